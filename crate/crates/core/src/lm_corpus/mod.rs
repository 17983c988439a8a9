//! Character-LM training text and LM training.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::features::UtteranceRecord;
use crate::models::{Alphabet, LanguageModel, LmConfig, Params};
use crate::numerics::{derive_seed, seeded_rng};
use crate::training::{clip_grad_norm, Optimizer};

/// Transcripts as label sequences, already split.
#[derive(Clone, Debug, PartialEq)]
pub struct TextCorpus {
    pub train: Vec<Vec<usize>>,
    pub valid: Vec<Vec<usize>>,
}

impl TextCorpus {
    pub fn len(&self) -> usize {
        self.train.len() + self.valid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Concatenates the transcripts of every manifest, shuffles them with `seed`
/// and holds out `valid_fraction` of them. Duplicates are kept.
pub fn build_lm_corpus(
    manifests: &[Vec<UtteranceRecord>],
    alphabet: &Alphabet,
    valid_fraction: f64,
    seed: u64,
) -> Result<TextCorpus> {
    if !(0.0..1.0).contains(&valid_fraction) {
        return Err(Error::Usage(format!("validation fraction must lie in [0, 1), got {valid_fraction}")));
    }
    let mut all = Vec::new();
    for m in manifests {
        for r in m {
            let labels = r.text.chars().map(|c| {
                alphabet.id_of(c).map_err(|_| Error::Usage(format!("utterance {}: symbol {c:?} is not in the alphabet", r.id)))
            });
            all.push(labels.collect::<Result<Vec<_>>>()?);
        }
    }
    all.shuffle(&mut seeded_rng(seed));
    let n_valid = (all.len() as f64 * valid_fraction).round() as usize;
    let train = all.split_off(n_valid);
    Ok(TextCorpus { train, valid: all })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LmTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adadelta_rho: f64,
    pub adadelta_eps: f64,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for LmTrainConfig {
    fn default() -> Self {
        LmTrainConfig { epochs: 10, batch_size: 10, learning_rate: 1.0, adadelta_rho: 0.95, adadelta_eps: 1e-6, clip_norm: 5.0, seed: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmEpoch {
    pub epoch: usize,
    /// Mean per-symbol negative log-likelihood on the training text.
    pub train_nll: f64,
    pub valid_perplexity: f64,
}

#[derive(Clone, Debug)]
pub struct LmOutcome {
    pub lm: LanguageModel,
    pub epochs: Vec<LmEpoch>,
    pub diverged: Option<String>,
}

/// `exp` of the mean per-symbol NLL, counting the eos prediction of every sequence.
pub fn perplexity(lm: &LanguageModel, seqs: &[Vec<usize>]) -> Result<f64> {
    let mut nll = 0.0;
    let mut count = 0usize;
    for s in seqs {
        nll += lm.net.sequence_nll(s, None)?;
        count += s.len() + 1;
    }
    if count == 0 {
        return Err(Error::Usage("perplexity of an empty text".into()));
    }
    Ok((nll / count as f64).exp())
}

pub fn train_lm(
    corpus: &TextCorpus,
    alphabet: &Alphabet,
    config: LmConfig,
    cfg: &LmTrainConfig,
    mut on_epoch: impl FnMut(&LmEpoch),
) -> Result<LmOutcome> {
    if corpus.train.is_empty() {
        return Err(Error::Usage("LM training text is empty".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let mut lm = LanguageModel::new(alphabet.clone(), config);
    let mut opt = Optimizer::adadelta(cfg.learning_rate, cfg.adadelta_rho, cfg.adadelta_eps);
    let mut epochs = Vec::new();
    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..corpus.train.len()).collect();
        order.shuffle(&mut seeded_rng(derive_seed(cfg.seed, epoch as u64)));
        let last_good = lm.clone();
        let (mut nll, mut count) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let mut grad = lm.net.zeros_like();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let s = &corpus.train[i];
                nll += lm.net.sequence_nll(s, Some((scale, &mut grad)))?;
                count += s.len() + 1;
            }
            if !nll.is_finite() || !grad.all_finite() {
                return Ok(LmOutcome { lm: last_good, epochs, diverged: Some(format!("non-finite loss in epoch {epoch}")) });
            }
            clip_grad_norm(&mut grad, cfg.clip_norm);
            opt.step(&mut lm.net, &grad);
        }
        let valid_perplexity = if corpus.valid.is_empty() { f64::NAN } else { perplexity(&lm, &corpus.valid)? };
        let e = LmEpoch { epoch, train_nll: nll / count as f64, valid_perplexity };
        on_epoch(&e);
        epochs.push(e);
    }
    Ok(LmOutcome { lm, epochs, diverged: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, text: &str) -> UtteranceRecord {
        UtteranceRecord { id: id.into(), text: text.into(), seed: 0, duration_secs: 0.0 }
    }

    #[test]
    fn sizes_add_up_and_duplicates_stay() {
        let a = Alphabet::toy();
        let m1 = vec![rec("1", "abc"), rec("2", "abc"), rec("3", "de")];
        let m2 = vec![rec("4", "j")];
        assert_eq!(build_lm_corpus(&[m1.clone()], &a, 0.0, 1).unwrap().len(), 3);
        let both = build_lm_corpus(&[m1.clone(), m2], &a, 0.25, 1).unwrap();
        assert_eq!((both.len(), both.valid.len()), (4, 1));
        let c = build_lm_corpus(&[m1.clone()], &a, 0.0, 1).unwrap();
        assert_eq!(c.train.iter().filter(|s| **s == vec![0, 1, 2]).count(), 2);
        assert_eq!(c, build_lm_corpus(&[m1], &a, 0.0, 1).unwrap());
    }

    #[test]
    fn unknown_symbol_is_named() {
        let err = build_lm_corpus(&[vec![rec("x", "abz")]], &Alphabet::toy(), 0.0, 1).unwrap_err();
        assert!(err.to_string().contains("'z'"), "{err}");
    }

    #[test]
    fn untrained_perplexity_is_near_uniform() {
        let a = Alphabet::toy();
        let lm = LanguageModel::new(a.clone(), LmConfig::default());
        let text = vec![a.encode("abc def").unwrap(), a.encode("ghij").unwrap()];
        let ppl = perplexity(&lm, &text).unwrap();
        assert!((ppl - 12.0).abs() < 1.0, "{ppl}");
    }

    #[test]
    fn alternating_text_learns_the_bigram() {
        let a = Alphabet::new("ab".chars()).unwrap();
        let text = vec![vec![0, 1, 0, 1, 0, 1, 0, 1]; 20];
        let corpus = TextCorpus { train: text.clone(), valid: text };
        let cfg = LmTrainConfig { epochs: 15, batch_size: 4, ..LmTrainConfig::default() };
        let out = train_lm(&corpus, &a, LmConfig { embed: 4, hidden: 8, seed: 2 }, &cfg, |_| {}).unwrap();
        let net = &out.lm.net;
        let (s, _) = net.lm_step(&net.initial_state(), 3).unwrap();
        let (_, after_a) = net.lm_step(&s, 0).unwrap();
        // Count oracle on the training text: after 'a' comes 'b' every time.
        assert!(after_a[1] > after_a[0]);
        let first = out.epochs.first().unwrap().valid_perplexity;
        let last = out.epochs.last().unwrap().valid_perplexity;
        assert!(last < first);
    }

    #[test]
    fn repeated_sequence_is_memorized() {
        let a = Alphabet::toy();
        let seq = a.encode("bad cafe").unwrap();
        let corpus = TextCorpus { train: vec![seq.clone(); 30], valid: vec![seq.clone()] };
        let cfg = LmTrainConfig { epochs: 30, batch_size: 5, ..LmTrainConfig::default() };
        let out = train_lm(&corpus, &a, LmConfig { embed: 8, hidden: 24, seed: 3 }, &cfg, |_| {}).unwrap();
        assert!(out.diverged.is_none());
        let net = &out.lm.net;
        let mut state = net.initial_state();
        let mut prev = a.sos_id();
        let mut nll = 0.0;
        for (k, &next) in seq.iter().enumerate() {
            let (s, logp) = net.lm_step(&state, prev).unwrap();
            if k > 0 {
                nll -= logp[next];
            }
            state = s;
            prev = next;
        }
        let interior = (nll / (seq.len() - 1) as f64).exp();
        assert!(interior < 1.05, "{interior}");
    }

    #[test]
    fn training_beats_untrained_on_held_out_text() {
        let a = Alphabet::toy();
        let recs: Vec<UtteranceRecord> = ["abc abc", "bad abc", "abc cab", "cab bad", "bad cab abc", "abc bad"]
            .iter()
            .cycle()
            .take(60)
            .enumerate()
            .map(|(i, t)| rec(&i.to_string(), t))
            .collect();
        let corpus = build_lm_corpus(&[recs], &a, 0.2, 4).unwrap();
        let cfg = LmTrainConfig { epochs: 5, ..LmTrainConfig::default() };
        let config = LmConfig { embed: 8, hidden: 16, seed: 1 };
        let untrained = perplexity(&LanguageModel::new(a.clone(), config.clone()), &corpus.valid).unwrap();
        let mut logged = Vec::new();
        let out = train_lm(&corpus, &a, config, &cfg, |e| logged.push(e.valid_perplexity)).unwrap();
        assert_eq!(logged.len(), 5);
        assert!(*logged.last().unwrap() < untrained);
        assert_eq!(perplexity(&out.lm, &corpus.valid).unwrap(), *logged.last().unwrap());
    }

    #[test]
    fn empty_text_is_rejected() {
        let empty = TextCorpus { train: vec![], valid: vec![] };
        assert!(train_lm(&empty, &Alphabet::toy(), LmConfig::default(), &LmTrainConfig::default(), |_| {}).is_err());
    }
}
