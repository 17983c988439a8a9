use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Mono audio samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0) {
            return Err(Error::Usage(format!("sample rate must be positive, got {sample_rate}")));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::Numeric("waveform contains non-finite samples".into()));
        }
        Ok(Waveform { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StreamKind {
    Audio,
    Visual,
    /// Log-posterior lattices stored in the feature container.
    Lattice,
}

/// A `T × D` frame matrix with its frame rate.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence {
    frames: Matrix,
    fps: f64,
    kind: StreamKind,
}

impl FeatureSequence {
    pub fn new(frames: Matrix, fps: f64, kind: StreamKind) -> Result<Self> {
        if !(fps > 0.0) {
            return Err(Error::Usage(format!("fps must be positive, got {fps}")));
        }
        if !frames.is_finite() && kind != StreamKind::Lattice {
            return Err(Error::Numeric("feature frames contain non-finite values".into()));
        }
        Ok(FeatureSequence { frames, fps, kind })
    }

    pub fn frames(&self) -> &Matrix {
        &self.frames
    }

    pub fn into_frames(self) -> Matrix {
        self.frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn kind(&self) -> StreamKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.frames.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.frames.cols()
    }

    /// Per-utterance, per-dimension mean/variance normalization.
    pub fn normalized(&self) -> FeatureSequence {
        let (t, d) = self.frames.shape();
        let mut out = self.frames.clone();
        if t == 0 {
            return self.clone();
        }
        for j in 0..d {
            let mean = (0..t).map(|i| self.frames.get(i, j)).sum::<f64>() / t as f64;
            let var = (0..t).map(|i| (self.frames.get(i, j) - mean).powi(2)).sum::<f64>() / t as f64;
            let inv = 1.0 / (var.sqrt() + 1e-5);
            for i in 0..t {
                out.set(i, j, (self.frames.get(i, j) - mean) * inv);
            }
        }
        FeatureSequence { frames: out, fps: self.fps, kind: self.kind }
    }

    /// Keeps the first `len` frames.
    pub fn truncated(&self, len: usize) -> FeatureSequence {
        let len = len.min(self.len());
        let d = self.dim();
        let data = self.frames.data()[..len * d].to_vec();
        FeatureSequence {
            frames: Matrix::from_vec(len, d, data).expect("prefix of a valid matrix"),
            fps: self.fps,
            kind: self.kind,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_rates() {
        assert!(Waveform::new(vec![0.0], 0.0).is_err());
        assert!(FeatureSequence::new(Matrix::zeros(1, 1), -1.0, StreamKind::Audio).is_err());
    }

    #[test]
    fn normalization_centers_each_dimension() {
        let m = Matrix::from_rows(&[vec![1.0, 10.0], vec![3.0, 30.0], vec![5.0, 20.0]]).unwrap();
        let f = FeatureSequence::new(m, 100.0, StreamKind::Audio).unwrap().normalized();
        for j in 0..2 {
            let mean: f64 = (0..3).map(|i| f.frames().get(i, j)).sum::<f64>() / 3.0;
            let var: f64 = (0..3).map(|i| f.frames().get(i, j).powi(2)).sum::<f64>() / 3.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-4);
        }
    }
}
