//! Scoring, system evaluation and the noise-sweep experiment.

pub mod cli;
mod scoring;
mod sweep;

pub use scoring::{
    cer_tokens, char_errors, corpus_error_rates, edit_distance_report, edit_distance_table, word_errors, words,
    ErrorReport,
};
pub use sweep::{
    decode_streams, evaluate, format_sweep_csv, noise_sweep, sort_rows, DecodeSettings, Evaluation, SweepConfig,
    SweepOutcome, SweepResult, System, Systems, SWEEP_HEADER,
};
