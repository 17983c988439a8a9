use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::{derive_seed, seeded_rng};

use super::{synthesize_utterance, CorpusConfig, Waveform};

/// Synthetic noise families: broadband, coloured, speech-like and narrowband.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NoiseKind {
    White,
    Pink,
    /// Sum of six independent synthetic talkers.
    Babble,
    /// A tone whose frequency wanders across the speech band, with two harmonics.
    Tonal,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 4] = [NoiseKind::White, NoiseKind::Pink, NoiseKind::Babble, NoiseKind::Tonal];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::White => "white",
            NoiseKind::Pink => "pink",
            NoiseKind::Babble => "babble",
            NoiseKind::Tonal => "tonal",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "white" => Ok(NoiseKind::White),
            "pink" => Ok(NoiseKind::Pink),
            "babble" => Ok(NoiseKind::Babble),
            "tonal" => Ok(NoiseKind::Tonal),
            other => Err(Error::Usage(format!("unknown noise kind {other:?}"))),
        }
    }
}

/// Target signal-to-noise ratio, or no noise at all.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SnrLevel {
    Clean,
    Db(f64),
}

impl SnrLevel {
    pub fn db(self) -> Option<f64> {
        match self {
            SnrLevel::Clean => None,
            SnrLevel::Db(d) => Some(d),
        }
    }
}

impl fmt::Display for SnrLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SnrLevel::Clean => f.write_str("clean"),
            SnrLevel::Db(d) => write!(f, "{d}"),
        }
    }
}

impl FromStr for SnrLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("clean") || s.eq_ignore_ascii_case("inf") {
            return Ok(SnrLevel::Clean);
        }
        let d: f64 = s.trim_end_matches("dB").parse().map_err(|_| Error::Usage(format!("bad SNR {s:?}")))?;
        if !d.is_finite() {
            return Err(Error::Usage(format!("SNR must be finite, got {s:?}")));
        }
        Ok(SnrLevel::Db(d))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub snr: SnrLevel,
}

pub fn signal_power(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64
}

/// Adds `k·noise` to `signal` with `k` chosen so that the mixture has exactly
/// the requested SNR over the signal's span. Shorter noise is tiled.
pub fn mix_at_snr(signal: &Waveform, noise: &Waveform, snr: SnrLevel) -> Result<Waveform> {
    let snr_db = match snr {
        SnrLevel::Clean => return Ok(signal.clone()),
        SnrLevel::Db(d) => d,
    };
    if signal.sample_rate() != noise.sample_rate() {
        return Err(Error::Usage(format!(
            "sample rates differ: {} vs {}",
            signal.sample_rate(),
            noise.sample_rate()
        )));
    }
    if noise.is_empty() {
        return Err(Error::Numeric("noise waveform is empty".into()));
    }
    let n = signal.len();
    let tiled: Vec<f64> = noise.samples().iter().copied().cycle().take(n).collect();
    let p_signal = signal_power(signal.samples());
    let p_noise = signal_power(&tiled);
    if p_signal <= 0.0 || p_noise <= 0.0 {
        return Err(Error::Numeric(format!("zero power (signal {p_signal}, noise {p_noise})")));
    }
    let k = (p_signal / (p_noise * 10f64.powf(snr_db / 10.0))).sqrt();
    let mixed = signal.samples().iter().zip(&tiled).map(|(s, v)| s + k * v).collect();
    Waveform::new(mixed, signal.sample_rate())
}

/// Draws `len` samples of the given noise family. Deterministic in `seed`.
pub fn generate_noise(kind: NoiseKind, len: usize, cfg: &CorpusConfig, seed: u64) -> Result<Waveform> {
    let sr = cfg.sample_rate;
    let mut rng = seeded_rng(seed);
    let samples = match kind {
        NoiseKind::White => (0..len).map(|_| StandardNormal.sample(&mut rng)).collect(),
        NoiseKind::Pink => {
            // Paul Kellet's refined pink filter
            let mut b = [0.0f64; 7];
            (0..len)
                .map(|_| {
                    let w: f64 = StandardNormal.sample(&mut rng);
                    b[0] = 0.99886 * b[0] + w * 0.0555179;
                    b[1] = 0.99332 * b[1] + w * 0.0750759;
                    b[2] = 0.96900 * b[2] + w * 0.1538520;
                    b[3] = 0.86650 * b[3] + w * 0.3104856;
                    b[4] = 0.55000 * b[4] + w * 0.5329522;
                    b[5] = -0.7616 * b[5] - w * 0.0168980;
                    let out = b.iter().sum::<f64>() + w * 0.5362;
                    b[6] = w * 0.115926;
                    out
                })
                .collect()
        }
        NoiseKind::Babble => {
            let mut mix = vec![0.0; len];
            for talker in 0..6u64 {
                let mut track = Vec::with_capacity(len + 4096);
                let offset = rng.gen_range(0..(cfg.sample_rate * 0.1) as usize + 1);
                track.extend(std::iter::repeat(0.0).take(offset));
                let mut piece = 0u64;
                while track.len() < len {
                    let n_sym = rng.gen_range(3..=8);
                    let labels: Vec<usize> = (0..n_sym).map(|_| rng.gen_range(0..cfg.alphabet.len())).collect();
                    let u = synthesize_utterance(&labels, cfg, derive_seed(seed, talker * 1_000_003 + piece))?;
                    track.extend_from_slice(u.waveform.samples());
                    piece += 1;
                }
                for (m, v) in mix.iter_mut().zip(&track) {
                    *m += v;
                }
            }
            mix
        }
        NoiseKind::Tonal => {
            let base = rng.gen_range(600.0..1400.0);
            let depth = rng.gen_range(400.0..900.0);
            let rate = rng.gen_range(0.8..2.5);
            let phase0 = rng.gen_range(0.0..2.0 * PI);
            let mut drift = 0.0f64;
            let mut phase = 0.0f64;
            (0..len)
                .map(|n| {
                    let t = n as f64 / sr;
                    drift = (drift + rng.gen_range(-2.0..2.0)).clamp(-300.0, 300.0);
                    let f = (base + depth * (2.0 * PI * rate * t + phase0).sin() + drift).max(50.0);
                    phase += 2.0 * PI * f / sr;
                    phase.sin() + 0.5 * (2.0 * phase).sin() + 0.25 * (3.0 * phase).sin()
                })
                .collect()
        }
    };
    Waveform::new(samples, sr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn measured_snr(signal: &Waveform, mixed: &Waveform) -> f64 {
        let resid: Vec<f64> = mixed.samples().iter().zip(signal.samples()).map(|(m, s)| m - s).collect();
        10.0 * (signal_power(signal.samples()) / signal_power(&resid)).log10()
    }

    fn test_signal() -> Waveform {
        let cfg = CorpusConfig::default();
        synthesize_utterance(&[0, 4, 2, 9], &cfg, 5).unwrap().waveform
    }

    #[test]
    fn hits_requested_snr_for_every_family() {
        let cfg = CorpusConfig::default();
        let s = test_signal();
        for kind in NoiseKind::ALL {
            let noise = generate_noise(kind, s.len(), &cfg, 17).unwrap();
            for snr in [-5.0, 0.0, 5.0, 10.0, 20.0] {
                let m = mix_at_snr(&s, &noise, SnrLevel::Db(snr)).unwrap();
                assert!((measured_snr(&s, &m) - snr).abs() < 0.01, "{kind} at {snr}");
            }
        }
    }

    #[test]
    fn clean_returns_signal_exactly() {
        let s = test_signal();
        let noise = Waveform::new(vec![1.0; 10], s.sample_rate()).unwrap();
        assert_eq!(mix_at_snr(&s, &noise, SnrLevel::Clean).unwrap(), s);
    }

    #[test]
    fn scale_factor_hand_computed() {
        // P_signal = 1, P_noise = 4, 10 dB -> k = sqrt(1 / 40)
        let s = Waveform::new(vec![1.0, -1.0, 1.0, -1.0], 8000.0).unwrap();
        let n = Waveform::new(vec![2.0, 2.0, -2.0, -2.0], 8000.0).unwrap();
        let m = mix_at_snr(&s, &n, SnrLevel::Db(10.0)).unwrap();
        let k = (m.samples()[0] - 1.0) / 2.0;
        assert!((k - 0.158_113_883_008_418_98).abs() < 1e-12);
    }

    #[test]
    fn zero_power_and_rate_mismatch_are_errors() {
        let s = Waveform::new(vec![0.0; 8], 8000.0).unwrap();
        let n = Waveform::new(vec![1.0; 8], 8000.0).unwrap();
        assert!(matches!(mix_at_snr(&s, &n, SnrLevel::Db(0.0)), Err(Error::Numeric(_))));
        assert!(matches!(mix_at_snr(&n, &s, SnrLevel::Db(0.0)), Err(Error::Numeric(_))));
        let other = Waveform::new(vec![1.0; 8], 16000.0).unwrap();
        assert!(matches!(mix_at_snr(&n, &other, SnrLevel::Db(0.0)), Err(Error::Usage(_))));
    }

    #[test]
    fn short_noise_is_tiled() {
        let s = test_signal();
        let n = Waveform::new(vec![1.0, -1.0, 0.5], s.sample_rate()).unwrap();
        let m = mix_at_snr(&s, &n, SnrLevel::Db(3.0)).unwrap();
        assert_eq!(m.len(), s.len());
        assert!((measured_snr(&s, &m) - 3.0).abs() < 0.01);
    }

    #[test]
    fn parse_levels_and_kinds() {
        assert_eq!("clean".parse::<SnrLevel>().unwrap(), SnrLevel::Clean);
        assert_eq!("-5".parse::<SnrLevel>().unwrap(), SnrLevel::Db(-5.0));
        assert!("loud".parse::<SnrLevel>().is_err());
        assert_eq!("babble".parse::<NoiseKind>().unwrap(), NoiseKind::Babble);
    }
}
