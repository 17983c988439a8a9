use crate::error::{Error, Result};
use crate::numerics::{log_softmax, log_sum_exp, Matrix};

/// Per-frame log-posteriors over the labels plus a trailing blank column.
#[derive(Clone, Debug, PartialEq)]
pub struct LogProbLattice {
    logp: Matrix,
    fps: f64,
}

impl LogProbLattice {
    /// Wraps already-normalized rows. Every row must log-sum-exp to 0 within 1e-9.
    pub fn new(logp: Matrix, fps: f64) -> Result<Self> {
        if logp.rows() == 0 || logp.cols() < 2 {
            return Err(Error::Usage(format!(
                "lattice needs at least one frame and two columns, got {}x{}",
                logp.rows(),
                logp.cols()
            )));
        }
        for t in 0..logp.rows() {
            let lse = log_sum_exp(logp.row(t))?;
            if lse.abs() > 1e-9 {
                return Err(Error::Numeric(format!("lattice row {t} sums to exp({lse})")));
            }
        }
        Ok(LogProbLattice { logp, fps })
    }

    /// Applies a row-wise log-softmax to raw scores.
    pub fn from_logits(mut logits: Matrix, fps: f64) -> Self {
        for t in 0..logits.rows() {
            log_softmax(logits.row_mut(t));
        }
        LogProbLattice { logp: logits, fps }
    }

    /// Builds a lattice from linear-domain probability rows (test fixtures).
    pub fn from_probs(rows: &[Vec<f64>], fps: f64) -> Result<Self> {
        let logs: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|p| p.ln()).collect()).collect();
        let mut m = Matrix::zeros(rows.len(), rows.first().map_or(0, Vec::len));
        for (t, r) in logs.iter().enumerate() {
            m.row_mut(t).copy_from_slice(r);
        }
        LogProbLattice::new(m, fps)
    }

    pub fn frames(&self) -> usize {
        self.logp.rows()
    }

    /// Number of real labels (columns minus the blank).
    pub fn num_labels(&self) -> usize {
        self.logp.cols() - 1
    }

    pub fn blank(&self) -> usize {
        self.logp.cols() - 1
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    #[inline]
    pub fn at(&self, t: usize, k: usize) -> f64 {
        self.logp.get(t, k)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.logp
    }
}
