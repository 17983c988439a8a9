use crate::error::{Error, Result};

/// Output symbols plus the blank, start and end markers.
///
/// Ids are contiguous: labels occupy `0..n`, then `blank = n`, `sos = n + 1`,
/// `eos = n + 2`. The attention decoder and LM emit distributions over
/// `labels ∪ {eos}`, indexed `0..=n` with `eos` at position `n`; their inputs
/// are `labels ∪ {sos}`, likewise with `sos` at position `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    labels: Vec<char>,
}

impl Alphabet {
    pub fn new(labels: impl IntoIterator<Item = char>) -> Result<Self> {
        let labels: Vec<char> = labels.into_iter().collect();
        if labels.is_empty() {
            return Err(Error::Usage("alphabet needs at least one label".into()));
        }
        for (i, c) in labels.iter().enumerate() {
            if labels[..i].contains(c) {
                return Err(Error::Usage(format!("duplicate label {c:?}")));
            }
            if *c == '\t' || *c == '\n' {
                return Err(Error::Usage("tab and newline cannot be labels".into()));
            }
        }
        Ok(Alphabet { labels })
    }

    /// Ten letters `a`..`j` plus space.
    pub fn toy() -> Self {
        Alphabet::new("abcdefghij ".chars()).expect("static alphabet")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[char] {
        &self.labels
    }

    pub fn blank_id(&self) -> usize {
        self.labels.len()
    }

    pub fn sos_id(&self) -> usize {
        self.labels.len() + 1
    }

    pub fn eos_id(&self) -> usize {
        self.labels.len() + 2
    }

    /// Width of decoder/LM output distributions (`labels ∪ {eos}`).
    pub fn output_size(&self) -> usize {
        self.labels.len() + 1
    }

    /// Width of CTC lattices (`labels ∪ {blank}`).
    pub fn ctc_size(&self) -> usize {
        self.labels.len() + 1
    }

    /// Position of `eos` in an output distribution and of `sos` in an input embedding.
    pub fn boundary_slot(&self) -> usize {
        self.labels.len()
    }

    pub fn id_of(&self, c: char) -> Result<usize> {
        self.labels
            .iter()
            .position(|&l| l == c)
            .ok_or_else(|| Error::Usage(format!("symbol {c:?} is not in the alphabet")))
    }

    pub fn encode(&self, text: &str) -> Result<Vec<usize>> {
        text.chars().map(|c| self.id_of(c)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> String {
        ids.iter().filter_map(|&i| self.labels.get(i)).collect()
    }

    pub fn symbols_string(&self) -> String {
        self.labels.iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specials_follow_labels() {
        let a = Alphabet::toy();
        assert_eq!(a.len(), 11);
        assert_eq!((a.blank_id(), a.sos_id(), a.eos_id()), (11, 12, 13));
        assert_eq!(a.output_size(), 12);
    }

    #[test]
    fn encode_decode_and_unknown_symbol() {
        let a = Alphabet::toy();
        let ids = a.encode("ab j").unwrap();
        assert_eq!(a.decode(&ids), "ab j");
        let err = a.encode("az").unwrap_err();
        assert!(err.to_string().contains("'z'"));
    }

    #[test]
    fn rejects_duplicates() {
        assert!(Alphabet::new("aba".chars()).is_err());
        assert!(Alphabet::new("".chars()).is_err());
    }
}
