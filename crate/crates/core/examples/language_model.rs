//! Train the character LSTM language model on corpus transcripts, report
//! perplexity, and save it for shallow fusion.

use std::env;

use avsr::features::{generate_corpus, CorpusConfig, CorpusSpec};
use avsr::lm_corpus::{build_lm_corpus, perplexity, train_lm, LmTrainConfig};
use avsr::models::{LanguageModel, LmConfig};

fn main() -> avsr::error::Result<()> {
    let corpus = CorpusConfig::default();
    let recs = generate_corpus(&CorpusSpec { n_train: 1000, n_valid: 0, n_test: 0, ..CorpusSpec::default() }, &corpus)?;
    let text = build_lm_corpus(&[recs.train], &corpus.alphabet, 0.1, 1)?;
    println!("{} training transcripts, {} held out", text.train.len(), text.valid.len());

    let untrained = LanguageModel::new(corpus.alphabet.clone(), LmConfig::default());
    println!("untrained perplexity {:.3}", perplexity(&untrained, &text.valid)?);

    let cfg = LmTrainConfig { epochs: 5, ..LmTrainConfig::default() };
    let out = train_lm(&text, &corpus.alphabet, LmConfig::default(), &cfg, |e| {
        println!("epoch {}  train nll/symbol {:.4}  held-out perplexity {:.4}", e.epoch, e.train_nll, e.valid_perplexity);
    })?;

    // what the model expects after "ab"
    let lm = &out.lm;
    let (mut state, mut logp) = lm.net.lm_step(&lm.net.initial_state(), corpus.alphabet.sos_id())?;
    for c in "ab".chars() {
        (state, logp) = lm.net.lm_step(&state, corpus.alphabet.id_of(c)?)?;
    }
    let mut next: Vec<(String, f64)> = logp
        .iter()
        .enumerate()
        .map(|(k, &l)| (corpus.alphabet.labels().get(k).map_or("<eos>".into(), |c| format!("{c:?}")), l.exp()))
        .collect();
    next.sort_by(|a, b| b.1.total_cmp(&a.1));
    println!("p(next | \"ab\"): {}", next.iter().take(4).map(|(c, p)| format!("{c} {p:.3}")).collect::<Vec<_>>().join(", "));

    let path = env::temp_dir().join("avsr_lm.ck");
    lm.to_checkpoint().write(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}
