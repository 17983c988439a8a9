use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::{NoiseKind, SnrLevel};
use crate::models::Modality;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Adadelta,
    /// SGD with momentum.
    Sgd,
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adadelta" => Ok(OptimizerKind::Adadelta),
            "sgd" => Ok(OptimizerKind::Sgd),
            _ => Err(Error::Config(format!("unknown optimizer {s:?} (adadelta, sgd)"))),
        }
    }
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Adadelta => "adadelta",
            OptimizerKind::Sgd => "sgd",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// α: weight of the CTC term.
    pub ctc_alpha: f64,
    /// ε of uniform label smoothing on the attention targets.
    pub label_smoothing: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub adadelta_rho: f64,
    pub adadelta_eps: f64,
    pub momentum: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    pub clip_norm: f64,
    /// Augmentation choices besides clean audio.
    pub augment_snrs: Vec<f64>,
    pub augment_noise: NoiseKind,
    pub augment: bool,
    /// Stop after this many epochs without validation-loss improvement; 0 disables.
    pub patience: usize,
    pub seed: u64,
    /// Beam width of the per-epoch validation decode.
    pub val_beam: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            ctc_alpha: 0.2,
            label_smoothing: 0.1,
            epochs: 20,
            batch_size: 10,
            optimizer: OptimizerKind::Adadelta,
            learning_rate: 1.0,
            adadelta_rho: 0.95,
            adadelta_eps: 1e-6,
            momentum: 0.9,
            clip_norm: 5.0,
            augment_snrs: vec![0.0, 5.0, 10.0],
            augment_noise: NoiseKind::Babble,
            augment: true,
            patience: 0,
            seed: 1,
            val_beam: 1,
        }
    }
}

impl TrainConfig {
    /// Defaults for one modality. Smoothing is off for audio-visual models,
    /// where it did not pay off.
    pub fn for_modality(modality: Modality) -> Self {
        let label_smoothing = if modality == Modality::AudioVisual { 0.0 } else { 0.1 };
        TrainConfig { label_smoothing, ..TrainConfig::default() }
    }

    /// The `{clean} ∪ SNRs` choices that augmentation draws from uniformly.
    pub fn augment_levels(&self) -> Vec<SnrLevel> {
        let mut levels: Vec<SnrLevel> = self.augment_snrs.iter().map(|&d| SnrLevel::Db(d)).collect();
        levels.push(SnrLevel::Clean);
        levels
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.ctc_alpha) {
            return bad(format!("ctc_alpha must lie in [0, 1], got {}", self.ctc_alpha));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return bad(format!("label_smoothing must lie in [0, 1), got {}", self.label_smoothing));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.learning_rate >= 0.0) {
            return bad(format!("learning_rate must be non-negative, got {}", self.learning_rate));
        }
        if self.augment_snrs.iter().any(|s| !s.is_finite()) {
            return bad("augment_snrs must be finite".into());
        }
        if self.val_beam == 0 {
            return bad("val_beam must be positive".into());
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let snrs: Vec<String> = self.augment_snrs.iter().map(|s| s.to_string()).collect();
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k}={v}").expect("string write");
        kv("ctc_alpha", self.ctc_alpha.to_string());
        kv("label_smoothing", self.label_smoothing.to_string());
        kv("epochs", self.epochs.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("optimizer", self.optimizer.name().into());
        kv("learning_rate", self.learning_rate.to_string());
        kv("adadelta_rho", self.adadelta_rho.to_string());
        kv("adadelta_eps", self.adadelta_eps.to_string());
        kv("momentum", self.momentum.to_string());
        kv("clip_norm", self.clip_norm.to_string());
        kv("augment_snrs", snrs.join(","));
        kv("augment_noise", self.augment_noise.name().into());
        kv("augment", self.augment.to_string());
        kv("patience", self.patience.to_string());
        kv("seed", self.seed.to_string());
        kv("val_beam", self.val_beam.to_string());
        out
    }

    /// Parses `key=value` lines on top of the defaults. Blank lines and `#`
    /// comments are skipped; unknown keys are errors.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            let bad = || Error::Config(format!("line {}: bad value {v:?} for {k}", n + 1));
            macro_rules! num {
                () => {
                    v.parse().map_err(|_| bad())?
                };
            }
            match k {
                "ctc_alpha" => cfg.ctc_alpha = num!(),
                "label_smoothing" => cfg.label_smoothing = num!(),
                "epochs" => cfg.epochs = num!(),
                "batch_size" => cfg.batch_size = num!(),
                "optimizer" => cfg.optimizer = v.parse()?,
                "learning_rate" => cfg.learning_rate = num!(),
                "adadelta_rho" => cfg.adadelta_rho = num!(),
                "adadelta_eps" => cfg.adadelta_eps = num!(),
                "momentum" => cfg.momentum = num!(),
                "clip_norm" => cfg.clip_norm = num!(),
                "augment_snrs" => {
                    cfg.augment_snrs = if v.is_empty() {
                        Vec::new()
                    } else {
                        v.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
                    }
                }
                "augment_noise" => cfg.augment_noise = v.parse()?,
                "augment" => cfg.augment = num!(),
                "patience" => cfg.patience = num!(),
                "seed" => cfg.seed = num!(),
                "val_beam" => cfg.val_beam = num!(),
                _ => return Err(Error::Config(format!("line {}: unknown key {k:?}", n + 1))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let cfg = TrainConfig::default();
        assert_eq!((cfg.ctc_alpha, cfg.batch_size), (0.2, 10));
        assert_eq!(cfg.augment_levels().len(), 4);
        assert_eq!(TrainConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn smoothing_is_off_only_for_audio_visual() {
        assert_eq!(TrainConfig::for_modality(Modality::Audio), TrainConfig::default());
        assert_eq!(TrainConfig::for_modality(Modality::Visual).label_smoothing, 0.1);
        assert_eq!(TrainConfig::for_modality(Modality::AudioVisual).label_smoothing, 0.0);
    }

    #[test]
    fn overrides_and_errors() {
        let cfg = TrainConfig::from_text("# toy\nepochs = 3\naugment_snrs=0,10\n").unwrap();
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.augment_snrs, vec![0.0, 10.0]);
        assert!(TrainConfig::from_text("nonsense=1").is_err());
        assert!(TrainConfig::from_text("ctc_alpha=2").is_err());
        assert!(TrainConfig::from_text("epochs").is_err());
    }
}
