//! Synthetic audio-visual utterances, log-mel features, SNR-controlled noise
//! and frame-rate conversion.

mod corpus;
mod io;
mod mel;
mod noise;
mod pipeline;
mod resample;
mod synth;
mod waveform;

pub use corpus::{
    format_manifest, generate_corpus, parse_manifest, read_manifest, write_manifest, Corpus, CorpusSpec, UtteranceRecord,
};
pub use io::{decode_features, encode_features, read_feature_file, write_feature_file, FEATURE_MAGIC, FEATURE_VERSION};
pub use mel::{log_mel, mel_to_hz, hz_to_mel, MelConfig, MelFilterbank, LOG_FLOOR};
pub use noise::{generate_noise, mix_at_snr, signal_power, NoiseKind, NoiseSpec, SnrLevel};
pub use pipeline::{model_streams, StreamPair, MODEL_FPS};
pub use resample::{align_streams, resample_frames};
pub use synth::{synthesize_utterance, CorpusConfig, Segment, Utterance};
pub use waveform::{FeatureSequence, StreamKind, Waveform};
