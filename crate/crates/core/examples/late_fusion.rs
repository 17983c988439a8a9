//! Score-level fusion of separately trained audio and visual models on
//! babble-corrupted audio, sweeping the audio weight γ.
//!
//! Needs `train_model audio`, `train_model visual` and `language_model`.

use std::env;
use std::path::PathBuf;

use avsr::decoder::{BeamConfig, FusionConfig, FusionMode};
use avsr::features::*;
use avsr::harness::{evaluate, DecodeSettings, System, Systems};
use avsr::models::{Checkpoint, HybridModel, LanguageModel};
use avsr::numerics::derive_seed;

fn checkpoint(name: &str) -> PathBuf {
    let p = env::temp_dir().join(name);
    if !p.exists() {
        eprintln!("{} is missing; run the train_model and language_model examples first", p.display());
        std::process::exit(1);
    }
    p
}

fn main() -> avsr::error::Result<()> {
    let systems = Systems {
        audio: Some(HybridModel::from_checkpoint(&Checkpoint::read(checkpoint("avsr_audio.ck"))?)?),
        visual: Some(HybridModel::from_checkpoint(&Checkpoint::read(checkpoint("avsr_visual.ck"))?)?),
        audio_visual: None,
        lm: Some(LanguageModel::from_checkpoint(&Checkpoint::read(checkpoint("avsr_lm.ck"))?)?),
    };
    let (corpus, mel) = (CorpusConfig::default(), MelConfig::default());
    let test = generate_corpus(&CorpusSpec { n_train: 0, n_valid: 0, n_test: 30, seed: 99, ..CorpusSpec::default() }, &corpus)?.test;

    for snr in [SnrLevel::Db(-5.0), SnrLevel::Db(5.0), SnrLevel::Clean] {
        let mut streams = Vec::new();
        for (i, r) in test.iter().enumerate() {
            let u = r.synthesize(&corpus)?;
            let noise = generate_noise(NoiseKind::Babble, u.waveform.len(), &corpus, derive_seed(5, i as u64))?;
            streams.push(model_streams(&mix_at_snr(&u.waveform, &noise, snr)?, &u.visual, &mel)?);
        }
        let items: Vec<(&str, &StreamPair)> = test.iter().zip(&streams).map(|(r, s)| (r.text.as_str(), s)).collect();
        let label = snr.db().map_or("clean".to_string(), |d| format!("{d} dB"));
        for gamma in [1.0, 0.85, 0.5, 0.0] {
            for mode in [FusionMode::Late, FusionMode::LateRescore] {
                let settings = DecodeSettings {
                    audio: BeamConfig { beam_width: 10, ..BeamConfig::default() },
                    visual: BeamConfig { beam_width: 10, ..BeamConfig::visual() },
                    fusion: FusionConfig { mode, gamma },
                };
                let ev = evaluate(System::AvLate, &systems, &items, &settings)?;
                println!("babble {label:>6}  γ {gamma:<4} {:<12} WER {:.4}  CER {:.4}", mode.name(), ev.wer.rate(), ev.cer.rate());
            }
        }
    }
    Ok(())
}
