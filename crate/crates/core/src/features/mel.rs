use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

use super::{FeatureSequence, StreamKind, Waveform};

/// Floor applied to mel energies before the log: `ln(1e-10)`.
pub const LOG_FLOOR: f64 = -23.025850929940457;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MelConfig {
    pub n_mels: usize,
    pub window_ms: f64,
    pub hop_ms: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        MelConfig { n_mels: 80, window_ms: 25.0, hop_ms: 10.0 }
    }
}

/// Triangular filters spaced evenly on the mel scale from 0 Hz to Nyquist.
#[derive(Clone, Debug)]
pub struct MelFilterbank {
    /// `(first_bin, weights)` per filter.
    filters: Vec<(usize, Vec<f64>)>,
    centers_hz: Vec<f64>,
    n_fft: usize,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_fft: usize, sample_rate: f64) -> Self {
        let top = hz_to_mel(sample_rate / 2.0);
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz = sample_rate / n_fft as f64;
        let n_bins = n_fft / 2 + 1;
        let mut filters = Vec::with_capacity(n_mels);
        for m in 0..n_mels {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let mut first = None;
            let mut weights = Vec::new();
            for k in 0..n_bins {
                let f = k as f64 * bin_hz;
                let w = if f > lo && f <= mid {
                    (f - lo) / (mid - lo)
                } else if f > mid && f < hi {
                    (hi - f) / (hi - mid)
                } else {
                    0.0
                };
                if w > 0.0 {
                    first.get_or_insert(k);
                    weights.push(w);
                } else if first.is_some() {
                    break;
                }
            }
            filters.push((first.unwrap_or(0), weights));
        }
        MelFilterbank { filters, centers_hz: edges[1..=n_mels].to_vec(), n_fft }
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn apply(&self, magnitude: &[f64], out: &mut [f64]) {
        for ((first, weights), o) in self.filters.iter().zip(out.iter_mut()) {
            *o = weights.iter().zip(&magnitude[*first..]).map(|(w, m)| w * m).sum();
        }
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }
}

struct Analyzer {
    window: Vec<f64>,
    hop: usize,
    fft: Arc<dyn Fft<f64>>,
    bank: MelFilterbank,
}

impl Analyzer {
    fn new(sample_rate: f64, cfg: &MelConfig) -> Self {
        let win_len = (cfg.window_ms * sample_rate / 1000.0).round() as usize;
        let hop = (cfg.hop_ms * sample_rate / 1000.0).round() as usize;
        let n_fft = win_len.next_power_of_two();
        let window = (0..win_len)
            .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (win_len - 1) as f64).cos())
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(n_fft);
        Analyzer { window, hop, fft, bank: MelFilterbank::new(cfg.n_mels, n_fft, sample_rate) }
    }
}

/// Hamming-windowed magnitude spectrogram projected on a mel filterbank and
/// log-compressed with a floor of [`LOG_FLOOR`]. Output frame rate is `1000 / hop_ms`.
pub fn log_mel(w: &Waveform, cfg: &MelConfig) -> Result<FeatureSequence> {
    let an = Analyzer::new(w.sample_rate(), cfg);
    let win_len = an.window.len();
    if w.len() < win_len {
        return Err(Error::Usage(format!(
            "waveform of {} samples is shorter than one {win_len}-sample window",
            w.len()
        )));
    }
    let n_fft = an.bank.n_fft();
    let n_frames = (w.len() - win_len) / an.hop + 1;
    let mut out = Matrix::zeros(n_frames, cfg.n_mels);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut mag = vec![0.0; n_fft / 2 + 1];
    let samples = w.samples();
    for t in 0..n_frames {
        let start = t * an.hop;
        for (n, slot) in buf.iter_mut().enumerate() {
            *slot = if n < win_len {
                Complex::new(samples[start + n] * an.window[n], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        an.fft.process(&mut buf);
        for (m, c) in mag.iter_mut().zip(&buf) {
            *m = c.norm();
        }
        let row = out.row_mut(t);
        an.bank.apply(&mag, row);
        for v in row.iter_mut() {
            *v = v.max(1e-10).ln();
        }
    }
    FeatureSequence::new(out, 1000.0 / cfg.hop_ms, StreamKind::Audio)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, secs: f64, sr: f64) -> Waveform {
        let n = (secs * sr) as usize;
        Waveform::new((0..n).map(|i| (2.0 * PI * freq * i as f64 / sr).sin()).collect(), sr).unwrap()
    }

    #[test]
    fn frame_rate_is_one_hundred() {
        let f = log_mel(&tone(440.0, 0.3, 16_000.0), &MelConfig::default()).unwrap();
        assert_eq!(f.fps(), 100.0);
        assert_eq!(f.dim(), 80);
    }

    #[test]
    fn frame_count_formula() {
        for n in [400usize, 401, 559, 560, 16_000, 12_345] {
            let w = Waveform::new(vec![0.1; n], 16_000.0).unwrap();
            let f = log_mel(&w, &MelConfig::default()).unwrap();
            assert_eq!(f.len(), (n - 400) / 160 + 1, "n = {n}");
        }
    }

    #[test]
    fn silence_hits_the_floor() {
        let w = Waveform::new(vec![0.0; 4000], 16_000.0).unwrap();
        let f = log_mel(&w, &MelConfig::default()).unwrap();
        assert!(f.frames().data().iter().all(|&v| v == LOG_FLOOR));
    }

    #[test]
    fn too_short_is_rejected() {
        let w = Waveform::new(vec![0.0; 399], 16_000.0).unwrap();
        assert!(log_mel(&w, &MelConfig::default()).is_err());
    }

    #[test]
    fn tone_peaks_in_bracketing_filter() {
        let sr = 16_000.0;
        let f = log_mel(&tone(1000.0, 0.2, sr), &MelConfig::default()).unwrap();
        // independent centre computation
        let top = 2595.0 * (1.0f64 + 8000.0 / 700.0).log10();
        let centers: Vec<f64> =
            (1..=80).map(|i| 700.0 * (10f64.powf(top * i as f64 / 81.0 / 2595.0) - 1.0)).collect();
        let upper = centers.iter().position(|&c| c >= 1000.0).unwrap();
        for t in 0..f.len() {
            let row = f.frames().row(t);
            let argmax = (0..80).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            assert!(argmax == upper || argmax + 1 == upper, "frame {t}: {argmax} vs {upper}");
        }
    }
}
