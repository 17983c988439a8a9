//! Train a small hybrid CTC/attention model and save a checkpoint. The
//! decoding examples load what this writes.
//!
//!     cargo run --release --example train_model -- [audio|visual|av] [epochs]

use std::env;

use avsr::features::*;
use avsr::models::{HybridModel, Modality, ModelConfig, Params};
use avsr::training::{prepare_examples, train, TrainConfig};

fn main() -> avsr::error::Result<()> {
    let args: Vec<String> = env::args().collect();
    let modality: Modality = args.get(1).map_or(Ok(Modality::Audio), |s| s.parse())?;
    let epochs = args.get(2).map_or(Ok(10), |s| s.parse()).expect("epochs must be an integer");
    let out = env::temp_dir().join(format!("avsr_{}.ck", modality.name()));

    let (corpus, mel) = (CorpusConfig::default(), MelConfig::default());
    let spec = CorpusSpec { n_train: 1200, n_valid: 40, n_test: 0, ..CorpusSpec::default() };
    let recs = generate_corpus(&spec, &corpus)?;
    let train_set = prepare_examples(&recs.train, &corpus, &mel)?;
    let valid = prepare_examples(&recs.valid, &corpus, &mel)?;

    let model = HybridModel::new(corpus.alphabet.clone(), ModelConfig::new(modality))?;
    println!("{} model: {} parameters, {} training utterances", modality.name(), model.num_params(), train_set.len());
    let cfg = TrainConfig { epochs, ..TrainConfig::for_modality(modality) };
    let outcome = train(model, &train_set, &valid, &cfg, &corpus, &mel, |m| {
        println!("epoch {:>2}  train {:.4}  valid {:.4}  greedy CER {:.4}", m.epoch, m.train_loss, m.val_loss, m.val_cer);
    })?;
    println!("CTC terms dropped as infeasible: {}", outcome.infeasible_ctc);
    outcome.model.to_checkpoint().write(&out)?;
    println!("wrote {}", out.display());
    Ok(())
}
