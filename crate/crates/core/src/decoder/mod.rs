//! Joint CTC/attention beam search with language-model shallow fusion, and
//! score-level fusion of two independently modelled streams.

mod records;
mod search;

use std::fmt;
use std::str::FromStr;

use crate::ctc::CtcPrefixState;
use crate::error::{Error, Result};
use crate::models::{AttentionState, LmState};

pub use records::{format_decode_record, parse_decode_record, DecodeRecord, DECODE_COLUMNS};
pub use search::{beam_search, greedy_attention, late_fusion_search, sequence_scores, RankedHypothesis, Stream};

#[derive(Clone, Debug, PartialEq)]
pub struct BeamConfig {
    /// λ
    pub ctc_weight: f64,
    /// β
    pub lm_weight: f64,
    pub beam_width: usize,
    /// Hard cap on hypothesis length. When absent it is derived from the
    /// number of encoder frames as `ceil(1.5 · T' / min_symbol_frames)`.
    pub max_output_len: Option<usize>,
    pub min_symbol_frames: f64,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig { ctc_weight: 0.1, lm_weight: 0.4, beam_width: 20, max_output_len: None, min_symbol_frames: 4.8 }
    }
}

impl BeamConfig {
    /// Defaults for visual-only decoding, which trusts the LM less.
    pub fn visual() -> Self {
        BeamConfig { lm_weight: 0.1, ..BeamConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ctc_weight) {
            return Err(Error::Config(format!("CTC weight must lie in [0, 1], got {}", self.ctc_weight)));
        }
        if !(self.lm_weight >= 0.0) || !self.lm_weight.is_finite() {
            return Err(Error::Config(format!("LM weight must be finite and non-negative, got {}", self.lm_weight)));
        }
        if self.beam_width == 0 {
            return Err(Error::Config("beam width must be at least 1".into()));
        }
        if !(self.min_symbol_frames > 0.0) {
            return Err(Error::Config("min_symbol_frames must be positive".into()));
        }
        Ok(())
    }

    pub fn max_len_for(&self, frames: usize) -> usize {
        self.max_output_len
            .unwrap_or_else(|| (1.5 * frames as f64 / self.min_symbol_frames).ceil() as usize)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FusionMode {
    /// One encoder over both streams.
    Early,
    /// Synchronous beam over the combined per-step score.
    Late,
    /// Independent beams whose n-best lists are rescored by the combined score.
    LateRescore,
}

impl FusionMode {
    pub fn name(self) -> &'static str {
        match self {
            FusionMode::Early => "early",
            FusionMode::Late => "late",
            FusionMode::LateRescore => "late-rescore",
        }
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "early" => Ok(FusionMode::Early),
            "late" => Ok(FusionMode::Late),
            "late-rescore" => Ok(FusionMode::LateRescore),
            _ => Err(Error::Usage(format!("unknown fusion mode {s:?} (early, late, late-rescore)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FusionConfig {
    pub mode: FusionMode,
    /// Audio weight γ of late fusion.
    pub gamma: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig { mode: FusionMode::Late, gamma: 0.85 }
    }
}

/// A decoding prefix with its per-model scores and incremental states.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    pub prefix: Vec<usize>,
    pub logp_ctc: f64,
    pub logp_att: f64,
    pub logp_lm: f64,
    pub ctc_state: CtcPrefixState,
    pub att_state: AttentionState,
    pub lm_state: Option<LmState>,
}

fn weighted(w: f64, x: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w * x
    }
}

/// `λ·ctc + (1−λ)·att + β·lm`, with zero-weight terms dropped so that an
/// impossible component cannot turn into NaN.
pub fn combine_scores(cfg: &BeamConfig, ctc: f64, att: f64, lm: f64) -> f64 {
    weighted(cfg.ctc_weight, ctc) + weighted(1.0 - cfg.ctc_weight, att) + weighted(cfg.lm_weight, lm)
}

pub fn joint_score(h: &Hypothesis, cfg: &BeamConfig) -> f64 {
    combine_scores(cfg, h.logp_ctc, h.logp_att, h.logp_lm)
}

/// `γ·audio + (1−γ)·visual`, dropping a stream whose weight is zero.
pub fn fuse_scores(gamma: f64, audio: f64, visual: f64) -> f64 {
    weighted(gamma, audio) + weighted(1.0 - gamma, visual)
}
