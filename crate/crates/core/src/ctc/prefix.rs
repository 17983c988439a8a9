//! Exact CTC prefix probabilities for label-synchronous decoding.
//!
//! For a prefix `g` we keep, per frame `t`, two forward quantities over the
//! first `t+1` frames:
//!
//! * `r_n[t]`: all paths whose collapse is exactly `g` and whose frame `t` emits the last label of `g`;
//! * `r_b[t]`: the same, with frame `t` emitting blank.
//!
//! Extending `g` by a label `c` gives `h = g·c`. A path for `h` enters `c` at
//! frame `t` from any path for `g` ending at `t−1`, except that when `c` equals
//! the last label of `g` it must come from a blank (otherwise the two copies
//! would merge):
//!
//! ```text
//! φ[t]    = r_b(g)[t−1] ⊕ (c ≠ last(g) ? r_n(g)[t−1] : 0)
//! r_n(h)[t] = (r_n(h)[t−1] ⊕ φ[t]) ⊗ x_t(c)
//! r_b(h)[t] = (r_b(h)[t−1] ⊕ r_n(h)[t−1]) ⊗ x_t(blank)
//! ψ(h)    = ⊕_t φ[t] ⊗ x_t(c)              (with r_n(h)[0] = x_0(c) iff g is empty)
//! ```
//!
//! `⊕` is log-add and `⊗` is addition in the log domain. `ψ(h)` sums every full
//! path whose collapse starts with `h`: each such path enters `c` at exactly one
//! first frame, and whatever follows that frame is unconstrained and
//! normalizes to one. The probability that the output is exactly `g` is
//! `r_n(g)[T−1] ⊕ r_b(g)[T−1]`, which is what end-of-sentence scores.
//!
//! For the empty prefix, `r_b[t]` is the running product of blanks and
//! `r_n` is zero everywhere, so the same recursion covers the first label.

use crate::numerics::{log_add, NEG_INF};

use super::LogProbLattice;

/// Forward state of one decoding prefix.
#[derive(Clone, Debug, PartialEq)]
pub struct CtcPrefixState {
    r_nonblank: Vec<f64>,
    r_blank: Vec<f64>,
    last: Option<usize>,
    prefix_log_prob: f64,
}

/// State of the empty prefix, whose prefix probability is one.
pub fn ctc_prefix_init(lattice: &LogProbLattice) -> CtcPrefixState {
    let frames = lattice.frames();
    let blank = lattice.blank();
    let mut r_blank = Vec::with_capacity(frames);
    let mut acc = 0.0;
    for t in 0..frames {
        acc += lattice.at(t, blank);
        r_blank.push(acc);
    }
    CtcPrefixState {
        r_nonblank: vec![NEG_INF; frames],
        r_blank,
        last: None,
        prefix_log_prob: 0.0,
    }
}

impl CtcPrefixState {
    pub fn frames(&self) -> usize {
        self.r_blank.len()
    }

    pub fn nonblank(&self) -> &[f64] {
        &self.r_nonblank
    }

    pub fn blank(&self) -> &[f64] {
        &self.r_blank
    }

    pub fn last_label(&self) -> Option<usize> {
        self.last
    }

    /// `ln` of the mass of all alignments whose collapse begins with this prefix.
    pub fn prefix_log_prob(&self) -> f64 {
        self.prefix_log_prob
    }

    /// `ln p(output == prefix)`: the end-of-sentence score.
    pub fn terminated_log_prob(&self) -> f64 {
        let last = self.frames() - 1;
        log_add(self.r_nonblank[last], self.r_blank[last])
    }

    /// Extends the prefix by `label` and returns the new state; its
    /// [`prefix_log_prob`](Self::prefix_log_prob) is `ψ(prefix·label)`.
    pub fn extend(&self, label: usize, lattice: &LogProbLattice) -> CtcPrefixState {
        debug_assert!(label < lattice.blank(), "blank is not a decoding label");
        let frames = self.frames();
        let blank = lattice.blank();
        let mut r_n = vec![NEG_INF; frames];
        let mut r_b = vec![NEG_INF; frames];
        if self.last.is_none() {
            r_n[0] = lattice.at(0, label);
        }
        let mut psi = r_n[0];
        let repeat = self.last == Some(label);
        for t in 1..frames {
            let phi = if repeat {
                self.r_blank[t - 1]
            } else {
                log_add(self.r_blank[t - 1], self.r_nonblank[t - 1])
            };
            let x = lattice.at(t, label);
            let entered = phi + x;
            r_n[t] = log_add(r_n[t - 1], phi) + x;
            r_b[t] = log_add(r_b[t - 1], r_n[t - 1]) + lattice.at(t, blank);
            psi = log_add(psi, entered);
        }
        CtcPrefixState { r_nonblank: r_n, r_blank: r_b, last: Some(label), prefix_log_prob: psi }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctc::ctc_loss;
    use crate::numerics::{log_sum_exp, seeded_rng, Matrix};

    fn random_lattice(frames: usize, labels: usize, seed: u64) -> LogProbLattice {
        let mut rng = seeded_rng(seed);
        LogProbLattice::from_logits(Matrix::uniform(frames, labels + 1, 2.0, &mut rng), 25.0)
    }

    #[test]
    fn empty_prefix_terminates_with_all_blank_product() {
        let rows = vec![vec![0.2, 0.3, 0.5], vec![0.1, 0.6, 0.3], vec![0.25, 0.25, 0.5]];
        let lat = LogProbLattice::from_probs(&rows, 25.0).unwrap();
        let s = ctc_prefix_init(&lat);
        assert_eq!(s.frames(), 3);
        let want = (0.5f64 * 0.3 * 0.5).ln();
        assert!((s.terminated_log_prob() - want).abs() < 1e-14);
    }

    #[test]
    fn single_frame_init_and_extend() {
        let lat = LogProbLattice::from_probs(&[vec![0.1, 0.7, 0.2]], 25.0).unwrap();
        let s = ctc_prefix_init(&lat);
        assert_eq!(s.blank(), &[0.2f64.ln()]);
        let a = s.extend(0, &lat);
        assert!((a.prefix_log_prob() - 0.1f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn conservation_along_every_prefix() {
        for seed in 0..20 {
            let lat = random_lattice(5, 2, seed);
            let mut frontier = vec![ctc_prefix_init(&lat)];
            for _depth in 0..3 {
                let mut next = Vec::new();
                for g in &frontier {
                    let mut parts = vec![g.terminated_log_prob()];
                    for c in 0..2 {
                        let h = g.extend(c, &lat);
                        parts.push(h.prefix_log_prob());
                        next.push(h);
                    }
                    let total = log_sum_exp(&parts).unwrap();
                    if g.prefix_log_prob() > -700.0 {
                        assert!((total - g.prefix_log_prob()).abs() < 1e-10);
                    }
                }
                frontier = next;
            }
        }
    }

    #[test]
    fn terminated_score_equals_ctc_loss() {
        for seed in 0..20 {
            let lat = random_lattice(6, 3, 50 + seed);
            let target = [2usize, 0, 0, 1];
            let mut s = ctc_prefix_init(&lat);
            for &c in &target {
                s = s.extend(c, &lat);
            }
            let want = ctc_loss(&lat, &target).unwrap().log_prob;
            assert!((s.terminated_log_prob() - want).abs() < 1e-10);
        }
    }

    #[test]
    fn infeasible_extension_is_neg_inf() {
        let lat = random_lattice(2, 2, 3);
        let s = ctc_prefix_init(&lat).extend(0, &lat).extend(1, &lat).extend(0, &lat);
        assert_eq!(s.prefix_log_prob(), NEG_INF);
    }
}
