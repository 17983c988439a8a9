use crate::error::{usage, Result};
use crate::numerics::{log_add, Matrix, NEG_INF};

use super::LogProbLattice;

/// Result of scoring one target against a lattice.
#[derive(Clone, Debug)]
pub struct CtcLoss {
    /// `ln p_ctc(y|x)`; `-inf` when the target cannot fit in the lattice.
    pub log_prob: f64,
    /// `∂(−ln p)/∂lattice[t][k]`, same shape as the lattice. All zeros when infeasible.
    pub grad: Matrix,
    pub feasible: bool,
}

impl CtcLoss {
    pub fn nll(&self) -> f64 {
        -self.log_prob
    }
}

/// Minimum number of frames that can carry `target`: one per label plus one
/// separating blank between each pair of equal neighbours.
pub fn required_frames(target: &[usize]) -> usize {
    let repeats = target.windows(2).filter(|w| w[0] == w[1]).count();
    target.len() + repeats
}

/// CTC negative log-likelihood by the forward-backward recursion over the
/// blank-interleaved target.
pub fn ctc_loss(lattice: &LogProbLattice, target: &[usize]) -> Result<CtcLoss> {
    let frames = lattice.frames();
    let blank = lattice.blank();
    if target.is_empty() {
        return usage("ctc target must be non-empty");
    }
    if let Some(bad) = target.iter().find(|&&k| k >= blank) {
        return usage(format!("ctc target contains non-label id {bad}"));
    }
    let width = lattice.num_labels() + 1;
    if required_frames(target) > frames {
        return Ok(CtcLoss {
            log_prob: NEG_INF,
            grad: Matrix::zeros(frames, width),
            feasible: false,
        });
    }

    // expanded[s]: blank at even s, target[s/2] at odd s
    let states = 2 * target.len() + 1;
    let sym = |s: usize| if s % 2 == 0 { blank } else { target[s / 2] };
    let can_skip = |s: usize| s % 2 == 1 && s >= 2 && target[s / 2] != target[s / 2 - 1];

    let mut alpha = vec![NEG_INF; frames * states];
    alpha[0] = lattice.at(0, blank);
    alpha[1] = lattice.at(0, target[0]);
    for t in 1..frames {
        let (prev, cur) = alpha.split_at_mut(t * states);
        let prev = &prev[(t - 1) * states..];
        let cur = &mut cur[..states];
        for s in 0..states {
            let mut acc = prev[s];
            if s >= 1 {
                acc = log_add(acc, prev[s - 1]);
            }
            if can_skip(s) {
                acc = log_add(acc, prev[s - 2]);
            }
            cur[s] = if acc == NEG_INF { NEG_INF } else { acc + lattice.at(t, sym(s)) };
        }
    }

    let mut beta = vec![NEG_INF; frames * states];
    let last = (frames - 1) * states;
    beta[last + states - 1] = lattice.at(frames - 1, blank);
    beta[last + states - 2] = lattice.at(frames - 1, target[target.len() - 1]);
    for t in (0..frames - 1).rev() {
        let (cur, next) = beta.split_at_mut((t + 1) * states);
        let cur = &mut cur[t * states..];
        let next = &next[..states];
        for s in 0..states {
            let mut acc = next[s];
            if s + 1 < states {
                acc = log_add(acc, next[s + 1]);
            }
            if s + 2 < states && can_skip(s + 2) {
                acc = log_add(acc, next[s + 2]);
            }
            cur[s] = if acc == NEG_INF { NEG_INF } else { acc + lattice.at(t, sym(s)) };
        }
    }

    let log_prob = log_add(alpha[last + states - 1], alpha[last + states - 2]);
    let mut grad = Matrix::zeros(frames, width);
    if log_prob == NEG_INF {
        return Ok(CtcLoss { log_prob, grad, feasible: true });
    }
    for t in 0..frames {
        let row = grad.row_mut(t);
        for s in 0..states {
            let ab = alpha[t * states + s] + beta[t * states + s];
            if ab == NEG_INF {
                continue;
            }
            let k = sym(s);
            // alpha and beta both include the emission at t
            row[k] -= (ab - lattice.at(t, k) - log_prob).exp();
        }
    }
    Ok(CtcLoss { log_prob, grad, feasible: true })
}

/// CTC loss on raw scores: applies the row-wise log-softmax and returns the
/// gradient of `−ln p` with respect to the raw scores (`softmax − occupancy`).
pub fn ctc_loss_from_logits(logits: &Matrix, fps: f64, target: &[usize]) -> Result<(CtcLoss, LogProbLattice)> {
    let lattice = LogProbLattice::from_logits(logits.clone(), fps);
    let mut loss = ctc_loss(&lattice, target)?;
    if loss.feasible && loss.log_prob.is_finite() {
        for t in 0..lattice.frames() {
            let logp = lattice.matrix().row(t);
            for (g, lp) in loss.grad.row_mut(t).iter_mut().zip(logp) {
                *g += lp.exp();
            }
        }
    }
    Ok((loss, lattice))
}
