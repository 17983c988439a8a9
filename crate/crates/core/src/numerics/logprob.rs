use std::fmt;

use crate::error::{usage, Error, Result};

pub const NEG_INF: f64 = f64::NEG_INFINITY;

/// A natural-log probability. Always `<= 0` or exactly `-inf` (probability zero).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LogProb(f64);

impl LogProb {
    pub const ZERO: LogProb = LogProb(NEG_INF);
    pub const ONE: LogProb = LogProb(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value > 0.0 {
            return Err(Error::Numeric(format!("{value} is not a log-probability")));
        }
        Ok(LogProb(value))
    }

    /// Clamps tiny positive round-off (up to 1e-9) to zero.
    pub fn from_rounded(value: f64) -> Result<Self> {
        if value > 0.0 && value <= 1e-9 {
            Ok(LogProb(0.0))
        } else {
            Self::new(value)
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_zero_prob(self) -> bool {
        self.0 == NEG_INF
    }
}

impl fmt::Display for LogProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// `ln(exp(a) + exp(b))` without overflow; exact `-inf` when both are `-inf`.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == NEG_INF {
        return NEG_INF;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln Σ exp(vᵢ)` with the max-shift trick.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return usage("log_sum_exp of an empty list");
    }
    Ok(log_sum_exp_nonempty(values))
}

pub(crate) fn log_sum_exp_nonempty(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(NEG_INF, f64::max);
    if max == NEG_INF {
        return NEG_INF;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// In-place log-softmax of a logit row.
pub fn log_softmax(row: &mut [f64]) {
    let lse = log_sum_exp_nonempty(row);
    for v in row.iter_mut() {
        *v -= lse;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_element_is_identity() {
        assert_eq!(log_sum_exp(&[-1.25]).unwrap(), -1.25);
    }

    #[test]
    fn duplicate_adds_ln2() {
        let x = -3.5;
        let got = log_sum_exp(&[x, x]).unwrap();
        assert!((got - (x + std::f64::consts::LN_2)).abs() < 1e-15);
    }

    #[test]
    fn matches_direct_summation() {
        let got = log_sum_exp(&[0.1f64.ln(), 0.2f64.ln(), 0.3f64.ln()]).unwrap();
        assert!((got - 0.6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn all_neg_inf_is_exact() {
        assert_eq!(log_sum_exp(&[NEG_INF, NEG_INF]).unwrap(), NEG_INF);
        assert_eq!(log_add(NEG_INF, NEG_INF), NEG_INF);
        assert_eq!(log_add(NEG_INF, -2.0), -2.0);
    }

    #[test]
    fn empty_is_usage_error() {
        assert!(matches!(log_sum_exp(&[]), Err(Error::Usage(_))));
    }

    #[test]
    fn logprob_rejects_positive_and_nan() {
        assert!(LogProb::new(0.5).is_err());
        assert!(LogProb::new(f64::NAN).is_err());
        assert!(LogProb::new(NEG_INF).unwrap().is_zero_prob());
    }

    #[test]
    fn log_softmax_normalizes() {
        let mut row = vec![1.0, -2.0, 0.5, 3.0];
        log_softmax(&mut row);
        assert!(log_sum_exp(&row).unwrap().abs() < 1e-12);
    }
}
