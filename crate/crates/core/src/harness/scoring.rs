use std::ops::AddAssign;

use crate::error::{Error, Result};

/// Edit operations of a minimal alignment plus the reference length.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ErrorReport {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub ref_len: usize,
}

impl ErrorReport {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    /// `(S + D + I) / N`; may exceed 1. Zero for an empty total.
    pub fn rate(&self) -> f64 {
        if self.ref_len == 0 {
            0.0
        } else {
            self.errors() as f64 / self.ref_len as f64
        }
    }
}

impl AddAssign for ErrorReport {
    fn add_assign(&mut self, o: ErrorReport) {
        self.substitutions += o.substitutions;
        self.deletions += o.deletions;
        self.insertions += o.insertions;
        self.ref_len += o.ref_len;
    }
}

/// Levenshtein cost table; `d[i][j]` aligns `r[..i]` with `h[..j]`.
pub fn edit_distance_table<T: PartialEq>(r: &[T], h: &[T]) -> Vec<Vec<usize>> {
    let mut d = vec![vec![0usize; h.len() + 1]; r.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=h.len() {
        d[0][j] = j;
    }
    for i in 1..=r.len() {
        for j in 1..=h.len() {
            let sub = d[i - 1][j - 1] + usize::from(r[i - 1] != h[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d
}

/// Minimal-edit alignment of `hypothesis` against `reference`. Among equally
/// cheap alignments the backtrace prefers, at every cell, a match or
/// substitution, then a deletion, then an insertion.
pub fn edit_distance_report<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Result<ErrorReport> {
    if reference.is_empty() {
        return Err(Error::Usage("reference must not be empty".into()));
    }
    let d = edit_distance_table(reference, hypothesis);
    let mut rep = ErrorReport { ref_len: reference.len(), ..ErrorReport::default() };
    let (mut i, mut j) = (reference.len(), hypothesis.len());
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let differ = reference[i - 1] != hypothesis[j - 1];
            if d[i][j] == d[i - 1][j - 1] + usize::from(differ) {
                rep.substitutions += usize::from(differ);
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[i][j] == d[i - 1][j] + 1 {
            rep.deletions += 1;
            i -= 1;
        } else {
            rep.insertions += 1;
            j -= 1;
        }
    }
    Ok(rep)
}

pub fn words(text: &str) -> Vec<&str> {
    text.split(' ').filter(|w| !w.is_empty()).collect()
}

/// Characters scored by CER: every character except space.
pub fn cer_tokens(text: &str) -> Vec<char> {
    text.chars().filter(|&c| c != ' ').collect()
}

pub fn word_errors(reference: &str, hypothesis: &str) -> Result<ErrorReport> {
    edit_distance_report(&words(reference), &words(hypothesis))
}

pub fn char_errors(reference: &str, hypothesis: &str) -> Result<ErrorReport> {
    edit_distance_report(&cer_tokens(reference), &cer_tokens(hypothesis))
}

/// Corpus-level WER and CER reports over aligned `(reference, hypothesis)` pairs.
pub fn corpus_error_rates<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<(ErrorReport, ErrorReport)> {
    let mut w = ErrorReport::default();
    let mut c = ErrorReport::default();
    for (r, h) in pairs {
        w += word_errors(r, h)?;
        c += char_errors(r, h)?;
    }
    Ok((w, c))
}
