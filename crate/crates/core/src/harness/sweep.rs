use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::decoder::{beam_search, late_fusion_search, BeamConfig, FusionConfig, FusionMode, RankedHypothesis, Stream};
use crate::error::{Error, Result};
use crate::features::{
    generate_noise, mix_at_snr, model_streams, signal_power, CorpusConfig, MelConfig, NoiseKind, SnrLevel, StreamPair,
};
use crate::models::{HybridModel, LanguageModel, ModelInput};
use crate::numerics::derive_seed;
use crate::training::Example;

use super::{corpus_error_rates, ErrorReport};

/// The recognizers compared by the sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum System {
    A,
    V,
    /// One encoder over both streams.
    AvEarly,
    /// Score fusion of the A and V models.
    AvLate,
}

impl System {
    pub const ALL: [System; 4] = [System::A, System::V, System::AvEarly, System::AvLate];

    pub fn name(self) -> &'static str {
        match self {
            System::A => "A",
            System::V => "V",
            System::AvEarly => "AV-early",
            System::AvLate => "AV-late",
        }
    }

    pub fn uses_audio(self) -> bool {
        self != System::V
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for System {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        System::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Usage(format!("unknown system {s:?} (A, V, AV-early, AV-late)")))
    }
}

/// Trained models available to the harness. Any may be missing; asking for a
/// system whose models are absent is a config error.
#[derive(Clone, Debug, Default)]
pub struct Systems {
    pub audio: Option<HybridModel>,
    pub visual: Option<HybridModel>,
    pub audio_visual: Option<HybridModel>,
    pub lm: Option<LanguageModel>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeSettings {
    /// Used for A and AV-early decoding and as the audio stream of AV-late.
    pub audio: BeamConfig,
    pub visual: BeamConfig,
    /// `mode` early is read as late when decoding the AV-late system.
    pub fusion: FusionConfig,
}

impl Default for DecodeSettings {
    fn default() -> Self {
        DecodeSettings { audio: BeamConfig::default(), visual: BeamConfig::visual(), fusion: FusionConfig::default() }
    }
}

fn need<'a>(m: &'a Option<HybridModel>, what: &str, system: System) -> Result<&'a HybridModel> {
    m.as_ref().ok_or_else(|| Error::Config(format!("system {system} needs a {what} checkpoint")))
}

impl Systems {
    pub fn check(&self, system: System) -> Result<()> {
        match system {
            System::A => need(&self.audio, "audio", system).map(drop),
            System::V => need(&self.visual, "visual", system).map(drop),
            System::AvEarly => need(&self.audio_visual, "audio-visual", system).map(drop),
            System::AvLate => {
                need(&self.audio, "audio", system)?;
                need(&self.visual, "visual", system).map(drop)
            }
        }
    }
}

/// Best hypothesis of `system` for one utterance; an empty hypothesis when
/// the beam finished nothing.
pub fn decode_streams(system: System, systems: &Systems, pair: &StreamPair, settings: &DecodeSettings) -> Result<RankedHypothesis> {
    systems.check(system)?;
    let lm = systems.lm.as_ref().map(|l| &l.net);
    let single = |model: &HybridModel, input: ModelInput<'_>, cfg: &BeamConfig| -> Result<Vec<RankedHypothesis>> {
        let (states, lattice) = model.infer(input)?;
        beam_search(&Stream { model, states: &states, lattice: &lattice, lm, cfg })
    };
    let hyps = match system {
        System::A => single(systems.audio.as_ref().unwrap(), ModelInput::Single(&pair.audio), &settings.audio)?,
        System::V => single(systems.visual.as_ref().unwrap(), ModelInput::Single(&pair.visual), &settings.visual)?,
        System::AvEarly => single(
            systems.audio_visual.as_ref().unwrap(),
            ModelInput::Fused { audio: &pair.audio, visual: &pair.visual },
            &settings.audio,
        )?,
        System::AvLate => {
            let (am, vm) = (systems.audio.as_ref().unwrap(), systems.visual.as_ref().unwrap());
            let (sa, la) = am.infer(ModelInput::Single(&pair.audio))?;
            let (sv, lv) = vm.infer(ModelInput::Single(&pair.visual))?;
            let audio = Stream { model: am, states: &sa, lattice: &la, lm, cfg: &settings.audio };
            let visual = Stream { model: vm, states: &sv, lattice: &lv, lm, cfg: &settings.visual };
            let mut fusion = settings.fusion;
            if fusion.mode == FusionMode::Early {
                fusion.mode = FusionMode::Late;
            }
            late_fusion_search(&audio, &visual, &fusion)?
        }
    };
    Ok(hyps.into_iter().next().unwrap_or(RankedHypothesis { labels: Vec::new(), score: f64::NEG_INFINITY, streams: Vec::new() }))
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub wer: ErrorReport,
    pub cer: ErrorReport,
    /// Best hypothesis per utterance, in input order.
    pub hypotheses: Vec<RankedHypothesis>,
    pub texts: Vec<String>,
}

/// Decodes every `(reference, streams)` pair in parallel and scores the result.
pub fn evaluate(system: System, systems: &Systems, items: &[(&str, &StreamPair)], settings: &DecodeSettings) -> Result<Evaluation> {
    systems.check(system)?;
    let alphabet = match system {
        System::V => &systems.visual.as_ref().unwrap().alphabet,
        System::AvEarly => &systems.audio_visual.as_ref().unwrap().alphabet,
        _ => &systems.audio.as_ref().unwrap().alphabet,
    };
    let hypotheses = items
        .par_iter()
        .map(|(_, pair)| decode_streams(system, systems, pair, settings))
        .collect::<Result<Vec<_>>>()?;
    let texts: Vec<String> = hypotheses.iter().map(|h| alphabet.decode(&h.labels)).collect();
    let (wer, cer) = corpus_error_rates(items.iter().zip(&texts).map(|((r, _), h)| (*r, h.as_str())))?;
    Ok(Evaluation { wer, cer, hypotheses, texts })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub kinds: Vec<NoiseKind>,
    pub snrs: Vec<SnrLevel>,
    pub systems: Vec<System>,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            kinds: NoiseKind::ALL.to_vec(),
            snrs: [-5.0, 0.0, 5.0, 10.0, 15.0, 20.0].into_iter().map(SnrLevel::Db).collect(),
            systems: System::ALL.to_vec(),
            seed: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepResult {
    pub noise: NoiseKind,
    pub snr: SnrLevel,
    pub system: System,
    pub wer: f64,
    pub cer: f64,
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    /// Sorted by noise, SNR (clean last) and system.
    pub rows: Vec<SweepResult>,
    /// Largest `|achieved − target|` SNR over every mixed utterance, in dB.
    pub max_snr_error_db: f64,
}

fn snr_key(s: SnrLevel) -> f64 {
    s.db().unwrap_or(f64::INFINITY)
}

pub fn sort_rows(rows: &mut [SweepResult]) {
    rows.sort_by(|a, b| {
        a.noise
            .cmp(&b.noise)
            .then_with(|| snr_key(a.snr).partial_cmp(&snr_key(b.snr)).unwrap_or(Ordering::Equal))
            .then_with(|| a.system.cmp(&b.system))
    });
}

pub const SWEEP_HEADER: &str = "noise,snr_db,system,wer,cer";

pub fn format_sweep_csv(rows: &[SweepResult]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{:.6},{:.6}\n", r.noise, r.snr, r.system, r.wer, r.cer));
    }
    out
}

/// Corrupts the test audio with every noise kind at every SNR, decodes each
/// system and scores it. Each utterance gets one noise realization per kind,
/// scaled to each SNR. Video does not depend on the audio noise, so V is
/// decoded once and its scores repeated on every row.
pub fn noise_sweep(
    systems: &Systems,
    test: &[Example],
    settings: &DecodeSettings,
    sweep: &SweepConfig,
    corpus: &CorpusConfig,
    mel: &MelConfig,
) -> Result<SweepOutcome> {
    if test.is_empty() {
        return Err(Error::Usage("sweep needs at least one test utterance".into()));
    }
    if sweep.kinds.is_empty() || sweep.snrs.is_empty() || sweep.systems.is_empty() {
        return Err(Error::Config("sweep needs at least one noise kind, SNR and system".into()));
    }
    for &s in &sweep.systems {
        systems.check(s)?;
    }
    let visual = if sweep.systems.contains(&System::V) {
        let items: Vec<(&str, &StreamPair)> = test.iter().map(|e| (e.text.as_str(), &e.clean)).collect();
        Some(evaluate(System::V, systems, &items, settings)?)
    } else {
        None
    };
    let mut rows = Vec::new();
    let mut max_err: f64 = 0.0;
    for (ki, &kind) in sweep.kinds.iter().enumerate() {
        let kind_seed = derive_seed(sweep.seed, ki as u64);
        let noises = test
            .par_iter()
            .enumerate()
            .map(|(i, e)| generate_noise(kind, e.waveform.len(), corpus, derive_seed(kind_seed, i as u64)))
            .collect::<Result<Vec<_>>>()?;
        for &snr in &sweep.snrs {
            let mixed = test
                .par_iter()
                .zip(&noises)
                .map(|(e, n)| {
                    let noisy = mix_at_snr(&e.waveform, n, snr)?;
                    let err = match snr.db() {
                        Some(target) => {
                            let residual: Vec<f64> =
                                noisy.samples().iter().zip(e.waveform.samples()).map(|(a, b)| a - b).collect();
                            let achieved = 10.0 * (signal_power(e.waveform.samples()) / signal_power(&residual)).log10();
                            (achieved - target).abs()
                        }
                        None => 0.0,
                    };
                    Ok((model_streams(&noisy, &e.visual, mel)?, err))
                })
                .collect::<Result<Vec<_>>>()?;
            max_err = mixed.iter().map(|(_, e)| *e).fold(max_err, f64::max);
            let items: Vec<(&str, &StreamPair)> = test.iter().zip(&mixed).map(|(e, (p, _))| (e.text.as_str(), p)).collect();
            for &system in &sweep.systems {
                let (wer, cer) = match (system, &visual) {
                    (System::V, Some(v)) => (v.wer.rate(), v.cer.rate()),
                    _ => {
                        let ev = evaluate(system, systems, &items, settings)?;
                        (ev.wer.rate(), ev.cer.rate())
                    }
                };
                rows.push(SweepResult { noise: kind, snr, system, wer, cer });
            }
        }
    }
    sort_rows(&mut rows);
    Ok(SweepOutcome { rows, max_snr_error_db: max_err })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn system_names_round_trip() {
        for s in System::ALL {
            assert_eq!(s.name().parse::<System>().unwrap(), s);
        }
        assert!("AV".parse::<System>().is_err());
    }

    #[test]
    fn missing_checkpoint_is_a_config_error() {
        let systems = Systems::default();
        assert!(matches!(systems.check(System::AvLate), Err(Error::Config(_))));
    }

    #[test]
    fn rows_sort_and_format() {
        let row = |noise, snr, system| SweepResult { noise, snr, system, wer: 0.5, cer: 0.25 };
        let mut rows = vec![
            row(NoiseKind::Pink, SnrLevel::Db(0.0), System::A),
            row(NoiseKind::White, SnrLevel::Clean, System::A),
            row(NoiseKind::White, SnrLevel::Db(-5.0), System::V),
            row(NoiseKind::White, SnrLevel::Db(-5.0), System::A),
        ];
        sort_rows(&mut rows);
        assert_eq!(
            format_sweep_csv(&rows),
            "noise,snr_db,system,wer,cer\n\
             white,-5,A,0.500000,0.250000\n\
             white,-5,V,0.500000,0.250000\n\
             white,clean,A,0.500000,0.250000\n\
             pink,0,A,0.500000,0.250000\n"
        );
    }
}
