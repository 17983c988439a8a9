//! Decode held-out utterances with the audio model under different CTC and
//! LM weights, next to plain greedy attention decoding.
//!
//! Needs the checkpoints written by `train_model audio` and `language_model`.

use std::env;
use std::path::PathBuf;

use avsr::decoder::{beam_search, greedy_attention, BeamConfig, Stream};
use avsr::features::*;
use avsr::harness::corpus_error_rates;
use avsr::models::{Checkpoint, HybridModel, LanguageModel, ModelInput};

fn checkpoint(name: &str) -> PathBuf {
    let p = env::temp_dir().join(name);
    if !p.exists() {
        eprintln!("{} is missing; run the train_model and language_model examples first", p.display());
        std::process::exit(1);
    }
    p
}

fn main() -> avsr::error::Result<()> {
    let model = HybridModel::from_checkpoint(&Checkpoint::read(checkpoint("avsr_audio.ck"))?)?;
    let lm = LanguageModel::from_checkpoint(&Checkpoint::read(checkpoint("avsr_lm.ck"))?)?;
    let (corpus, mel) = (CorpusConfig::default(), MelConfig::default());
    let test = generate_corpus(&CorpusSpec { n_train: 0, n_valid: 0, n_test: 30, seed: 99, ..CorpusSpec::default() }, &corpus)?.test;

    let mut encoded = Vec::new();
    for r in &test {
        let u = r.synthesize(&corpus)?;
        let streams = model_streams(&u.waveform, &u.visual, &mel)?;
        encoded.push((r.text.clone(), model.infer(ModelInput::Single(&streams.audio))?));
    }

    let report = |name: &str, hyps: Vec<String>| -> avsr::error::Result<()> {
        let pairs: Vec<(&str, &str)> = encoded.iter().zip(&hyps).map(|((r, _), h)| (r.as_str(), h.as_str())).collect();
        let (wer, cer) = corpus_error_rates(pairs)?;
        println!("{name:<28} WER {:.4}  CER {:.4}", wer.rate(), cer.rate());
        Ok(())
    };

    let mut greedy = Vec::new();
    for (_, (states, _)) in &encoded {
        let cap = BeamConfig::default().max_len_for(states.frames());
        greedy.push(model.alphabet.decode(&greedy_attention(&model, states, cap)?));
    }
    report("greedy attention", greedy)?;

    for (ctc_weight, lm_weight) in [(0.0, 0.0), (0.1, 0.0), (1.0, 0.0), (0.1, 0.4)] {
        let cfg = BeamConfig { ctc_weight, lm_weight, beam_width: 10, ..BeamConfig::default() };
        let mut hyps = Vec::new();
        for (_, (states, lattice)) in &encoded {
            let stream = Stream { model: &model, states, lattice, lm: Some(&lm.net), cfg: &cfg };
            let best = beam_search(&stream)?.into_iter().next().map(|h| h.labels).unwrap_or_default();
            hyps.push(model.alphabet.decode(&best));
        }
        report(&format!("beam 10, ctc {ctc_weight}, lm {lm_weight}"), hyps)?;
    }
    Ok(())
}
