//! A reduced noise sweep over every available system, printed as CSV.
//!
//! Uses whichever of the `train_model` checkpoints exist (audio, visual, av)
//! plus the `language_model` one.

use std::env;

use avsr::features::*;
use avsr::harness::{format_sweep_csv, noise_sweep, DecodeSettings, SweepConfig, System, Systems};
use avsr::models::{Checkpoint, HybridModel, LanguageModel};
use avsr::training::prepare_examples;

fn load(name: &str) -> avsr::error::Result<Option<Checkpoint>> {
    let p = env::temp_dir().join(name);
    if p.exists() { Checkpoint::read(p).map(Some) } else { Ok(None) }
}

fn main() -> avsr::error::Result<()> {
    let model = |name| load(name)?.map(|c| HybridModel::from_checkpoint(&c)).transpose();
    let systems = Systems {
        audio: model("avsr_audio.ck")?,
        visual: model("avsr_visual.ck")?,
        audio_visual: model("avsr_audio-visual.ck")?,
        lm: load("avsr_lm.ck")?.map(|c| LanguageModel::from_checkpoint(&c)).transpose()?,
    };
    let available: Vec<System> = System::ALL.into_iter().filter(|&s| systems.check(s).is_ok()).collect();
    if available.is_empty() {
        eprintln!("no checkpoints in {}; run the train_model example first", env::temp_dir().display());
        std::process::exit(1);
    }

    let (corpus, mel) = (CorpusConfig::default(), MelConfig::default());
    let recs = generate_corpus(&CorpusSpec { n_train: 0, n_valid: 0, n_test: 20, seed: 99, ..CorpusSpec::default() }, &corpus)?;
    let test = prepare_examples(&recs.test, &corpus, &mel)?;
    let sweep = SweepConfig {
        kinds: vec![NoiseKind::White, NoiseKind::Babble],
        snrs: vec![SnrLevel::Db(-5.0), SnrLevel::Db(5.0), SnrLevel::Db(20.0), SnrLevel::Clean],
        systems: available,
        seed: 1,
    };
    let out = noise_sweep(&systems, &test, &DecodeSettings::default(), &sweep, &corpus, &mel)?;
    print!("{}", format_sweep_csv(&out.rows));
    eprintln!("largest achieved-SNR error {:.2e} dB", out.max_snr_error_db);
    Ok(())
}
