//! Synthetic speaker: every symbol has a fixed three-partial "formant" tone
//! and a smooth visual mouth trajectory. Symbols that share a viseme group get
//! nearby trajectories, so the visual stream alone is less reliable than audio.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::models::Alphabet;
use crate::numerics::{seeded_rng, Matrix};

use super::{FeatureSequence, StreamKind, Waveform};

/// Everything that shapes the synthetic speaker.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusConfig {
    pub alphabet: Alphabet,
    pub sample_rate: f64,
    /// Mean symbol duration.
    pub symbol_ms: f64,
    /// Symbol durations are drawn uniformly in `symbol_ms · (1 ± duration_jitter)`.
    pub duration_jitter: f64,
    /// Per-symbol pitch scale drawn uniformly in `1 ± pitch_jitter`.
    pub pitch_jitter: f64,
    pub amplitude: f64,
    pub visual_dim: usize,
    pub visual_fps: f64,
    /// Standard deviation of the additive Gaussian noise on visual frames.
    pub visual_noise: f64,
    /// Number of consecutive symbols sharing one viseme.
    pub viseme_group: usize,
    /// Spread of symbol-specific offsets around the shared viseme anchors.
    pub viseme_spread: f64,
    /// Seed of the symbol inventory (visual anchors). Utterance seeds only add jitter.
    pub inventory_seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            alphabet: Alphabet::toy(),
            sample_rate: 16_000.0,
            symbol_ms: 120.0,
            duration_jitter: 0.2,
            pitch_jitter: 0.03,
            amplitude: 0.3,
            visual_dim: 16,
            visual_fps: 25.0,
            visual_noise: 0.6,
            viseme_group: 2,
            viseme_spread: 0.5,
            inventory_seed: 20_190_512,
        }
    }
}

impl CorpusConfig {
    /// Same speaker without any randomness in durations or pitch.
    pub fn without_jitter(&self) -> Self {
        CorpusConfig { duration_jitter: 0.0, pitch_jitter: 0.0, ..self.clone() }
    }

    pub fn min_symbol_samples(&self) -> usize {
        (self.symbol_ms * (1.0 - self.duration_jitter) * self.sample_rate / 1000.0).round() as usize
    }

    /// Partial frequencies (Hz) of a symbol's signature.
    pub fn partials(&self, label: usize) -> [f64; 3] {
        let i = label as f64;
        let n = self.alphabet.len().max(1);
        [
            280.0 + 95.0 * i,
            1300.0 + 170.0 * ((label * 4) % n) as f64,
            3200.0 + 140.0 * ((label * 7) % n) as f64,
        ]
    }

    /// Renders the audio signature of `label` over `len` samples with pitch scale `pitch`.
    pub fn template(&self, label: usize, len: usize, pitch: f64) -> Vec<f64> {
        const GAINS: [f64; 3] = [1.0, 0.5, 0.25];
        let sr = self.sample_rate;
        let partials = self.partials(label);
        let glide = [-0.08, 0.0, 0.08][label % 3];
        let ramp = (0.01 * sr).max(1.0);
        let mut phases = [0.0f64; 3];
        let mut out = Vec::with_capacity(len);
        for n in 0..len {
            let tau = if len > 1 { n as f64 / (len - 1) as f64 } else { 0.5 };
            let env = {
                let a = (n as f64 / ramp).min(1.0);
                let d = ((len - 1 - n) as f64 / ramp).min(1.0);
                let e = a.min(d);
                0.5 - 0.5 * (PI * e).cos()
            };
            let mut v = 0.0;
            for k in 0..3 {
                v += GAINS[k] * phases[k].sin();
                let f = partials[k] * pitch * (1.0 + glide * (tau - 0.5));
                phases[k] += 2.0 * PI * f / sr;
            }
            out.push(self.amplitude * env * v / 1.75);
        }
        out
    }

    /// Three anchor vectors per symbol, shared within a viseme group plus a
    /// symbol-specific offset.
    pub fn visual_anchors(&self) -> Vec<[Vec<f64>; 3]> {
        let mut rng = seeded_rng(self.inventory_seed);
        let group = self.viseme_group.max(1);
        let n_groups = self.alphabet.len().div_ceil(group);
        let mut draw = |scale: f64| -> Vec<f64> {
            (0..self.visual_dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    scale * z
                })
                .collect::<Vec<f64>>()
        };
        let groups: Vec<[Vec<f64>; 3]> = (0..n_groups).map(|_| [draw(1.0), draw(1.0), draw(1.0)]).collect();
        (0..self.alphabet.len())
            .map(|label| {
                let base = &groups[label / group];
                let mut anchors = base.clone();
                for a in anchors.iter_mut() {
                    for (x, o) in a.iter_mut().zip(draw(self.viseme_spread)) {
                        *x += o;
                    }
                }
                anchors
            })
            .collect()
    }
}

/// Sample span of one spoken symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub label: usize,
    pub start: usize,
    pub len: usize,
}

/// One synthetic utterance: audio, clean visual stream, and the ground-truth timeline.
#[derive(Clone, Debug, PartialEq)]
pub struct Utterance {
    pub labels: Vec<usize>,
    pub waveform: Waveform,
    pub visual: FeatureSequence,
    pub segments: Vec<Segment>,
}

fn smoothstep(x: f64) -> f64 {
    x * x * (3.0 - 2.0 * x)
}

fn trajectory(anchors: &[Vec<f64>; 3], tau: f64, out: &mut [f64]) {
    let (a, b, u) = if tau < 0.5 {
        (&anchors[0], &anchors[1], tau * 2.0)
    } else {
        (&anchors[1], &anchors[2], (tau - 0.5) * 2.0)
    };
    let w = smoothstep(u.clamp(0.0, 1.0));
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        *o = (1.0 - w) * x + w * y;
    }
}

/// Renders `labels` as audio plus a 25 fps visual trajectory. Deterministic in `seed`.
pub fn synthesize_utterance(labels: &[usize], config: &CorpusConfig, seed: u64) -> Result<Utterance> {
    if labels.is_empty() {
        return Err(Error::Usage("cannot synthesize an empty label sequence".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= config.alphabet.len()) {
        return Err(Error::Usage(format!("label id {bad} is outside the corpus alphabet")));
    }
    let mut rng = seeded_rng(seed);
    let sr = config.sample_rate;
    let mut samples = Vec::new();
    let mut segments = Vec::with_capacity(labels.len());
    for &label in labels {
        let jitter = if config.duration_jitter > 0.0 {
            rng.gen_range(-config.duration_jitter..=config.duration_jitter)
        } else {
            0.0
        };
        let pitch = if config.pitch_jitter > 0.0 {
            1.0 + rng.gen_range(-config.pitch_jitter..=config.pitch_jitter)
        } else {
            1.0
        };
        let len = ((config.symbol_ms * (1.0 + jitter)) * sr / 1000.0).round().max(1.0) as usize;
        segments.push(Segment { label, start: samples.len(), len });
        samples.extend(config.template(label, len, pitch));
    }
    let total = samples.len();
    let waveform = Waveform::new(samples, sr)?;

    let anchors = config.visual_anchors();
    let n_frames = ((total as f64 / sr) * config.visual_fps).ceil().max(1.0) as usize;
    let mut frames = Matrix::zeros(n_frames, config.visual_dim);
    let mut seg_idx = 0;
    for k in 0..n_frames {
        let centre = (((k as f64 + 0.5) / config.visual_fps) * sr).min(total as f64 - 1.0).max(0.0);
        while seg_idx + 1 < segments.len() && centre >= (segments[seg_idx].start + segments[seg_idx].len) as f64 {
            seg_idx += 1;
        }
        let seg = segments[seg_idx];
        let tau = ((centre - seg.start as f64) / seg.len.max(1) as f64).clamp(0.0, 1.0);
        let row = frames.row_mut(k);
        trajectory(&anchors[seg.label], tau, row);
        if config.visual_noise > 0.0 {
            for v in row.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += config.visual_noise * z;
            }
        }
    }
    let visual = FeatureSequence::new(frames, config.visual_fps, StreamKind::Visual)?;
    Ok(Utterance { labels: labels.to_vec(), waveform, visual, segments })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = CorpusConfig::default();
        let labels = cfg.alphabet.encode("ab").unwrap();
        let a = synthesize_utterance(&labels, &cfg, 7).unwrap();
        let b = synthesize_utterance(&labels, &cfg, 7).unwrap();
        assert_eq!(a, b);
        let c = synthesize_utterance(&labels, &cfg, 8).unwrap();
        assert_ne!(a.waveform, c.waveform);
    }

    #[test]
    fn zero_jitter_single_label_is_the_template() {
        let cfg = CorpusConfig::default().without_jitter();
        let u = synthesize_utterance(&[3], &cfg, 99).unwrap();
        let len = (cfg.symbol_ms * cfg.sample_rate / 1000.0).round() as usize;
        assert_eq!(u.waveform.samples(), cfg.template(3, len, 1.0).as_slice());
    }

    #[test]
    fn unknown_and_empty_labels_are_rejected() {
        let cfg = CorpusConfig::default();
        assert!(synthesize_utterance(&[], &cfg, 1).is_err());
        assert!(synthesize_utterance(&[11], &cfg, 1).is_err());
    }

    #[test]
    fn visual_stream_shape() {
        let cfg = CorpusConfig::default();
        let u = synthesize_utterance(&[0, 1, 2], &cfg, 3).unwrap();
        assert_eq!(u.visual.fps(), 25.0);
        assert_eq!(u.visual.dim(), 16);
        let expected = (u.waveform.duration_secs() * 25.0).ceil() as usize;
        assert_eq!(u.visual.len(), expected);
    }
}
