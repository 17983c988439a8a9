use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::decoder::{format_decode_record, BeamConfig, DecodeRecord, FusionConfig, FusionMode};
use crate::error::{Error, Result};
use crate::features::{
    generate_corpus, generate_noise, mix_at_snr, model_streams, read_manifest, write_manifest, CorpusConfig, CorpusSpec,
    MelConfig, NoiseKind, SnrLevel, StreamPair, UtteranceRecord,
};
use crate::lm_corpus::{build_lm_corpus, train_lm, LmTrainConfig};
use crate::models::{Checkpoint, HybridModel, LanguageModel, LmConfig, Modality, ModelConfig};
use crate::numerics::derive_seed;
use crate::training::{format_metrics, prepare_examples, train, Example, TrainConfig};

use super::{corpus_error_rates, evaluate, format_sweep_csv, noise_sweep, DecodeSettings, SweepConfig, System, Systems};

#[derive(Debug, Parser)]
#[command(name = "avsr", version, about = "Toy hybrid CTC/attention audio-visual speech recognition")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write train/valid/test manifests of a synthetic corpus.
    GenCorpus(GenCorpusArgs),
    /// Train a hybrid CTC/attention model.
    Train(TrainArgs),
    /// Train the character LM on corpus transcripts.
    TrainLm(TrainLmArgs),
    /// Decode a corpus split and write one record per utterance.
    Decode(DecodeArgs),
    /// Score hypotheses against references.
    Eval(EvalArgs),
    /// WER/CER of every system across noise kinds and SNRs.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct GenCorpusArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub n_train: usize,
    #[arg(long, default_value_t = 100)]
    pub n_valid: usize,
    #[arg(long, default_value_t = 200)]
    pub n_test: usize,
    #[arg(long, default_value_t = 3)]
    pub min_symbols: usize,
    #[arg(long, default_value_t = 8)]
    pub max_symbols: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory written by gen-corpus.
    #[arg(long)]
    pub corpus: PathBuf,
    /// audio, visual or av.
    #[arg(long, default_value = "audio")]
    pub modality: Modality,
    #[arg(long)]
    pub out: PathBuf,
    /// key=value training config; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// α, the CTC weight of the training loss.
    #[arg(long)]
    pub ctc_weight_train: Option<f64>,
    #[arg(long)]
    pub label_smoothing: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use only the first N training utterances.
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainLmArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub audio_model: Option<PathBuf>,
    #[arg(long)]
    pub visual_model: Option<PathBuf>,
    #[arg(long)]
    pub av_model: Option<PathBuf>,
    #[arg(long)]
    pub lm: Option<PathBuf>,
    /// λ, the CTC weight of the decoding score.
    #[arg(long, default_value_t = 0.1)]
    pub ctc_weight: f64,
    /// β for audio and audio-visual decoding.
    #[arg(long, default_value_t = 0.4)]
    pub lm_weight: f64,
    /// β for the visual stream.
    #[arg(long, default_value_t = 0.1)]
    pub visual_lm_weight: f64,
    #[arg(long, default_value_t = 20)]
    pub beam: usize,
    /// early, late or late-rescore.
    #[arg(long, default_value = "late")]
    pub fusion: FusionMode,
    /// γ, the audio weight of late fusion.
    #[arg(long, default_value_t = 0.85)]
    pub gamma: f64,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// A, V, AV-early or AV-late; by default chosen from the given models and --fusion.
    #[arg(long)]
    pub system: Option<System>,
    #[command(flatten)]
    pub models: ModelArgs,
    /// Mix noise into the audio at this SNR (dB or "clean").
    #[arg(long, default_value = "clean", allow_hyphen_values = true)]
    pub snr: SnrLevel,
    #[arg(long, default_value = "babble")]
    pub noise: NoiseKind,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Decode records go here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Lines of `id<TAB>text...`; a manifest works.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Lines of `id<TAB>text...`; decode records work.
    #[arg(long)]
    pub hyp: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub models: ModelArgs,
    /// Comma-separated SNRs in dB.
    #[arg(long, value_delimiter = ',', default_value = "-5,0,5,10,15,20", allow_hyphen_values = true)]
    pub snr: Vec<SnrLevel>,
    #[arg(long, value_delimiter = ',', default_value = "white,pink,babble,tonal")]
    pub noise: Vec<NoiseKind>,
    #[arg(long, value_delimiter = ',')]
    pub systems: Option<Vec<System>>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn split_path(dir: &Path, split: &str) -> PathBuf {
    dir.join(format!("{split}.tsv"))
}

fn load_split(dir: &Path, split: &str) -> Result<Vec<UtteranceRecord>> {
    let p = split_path(dir, split);
    if !p.exists() {
        return Err(Error::Config(format!("missing manifest {}", p.display())));
    }
    read_manifest(p)
}

fn load_model(path: &Option<PathBuf>) -> Result<Option<HybridModel>> {
    path.as_ref().map(|p| HybridModel::from_checkpoint(&Checkpoint::read(p)?)).transpose()
}

impl ModelArgs {
    fn systems(&self) -> Result<Systems> {
        Ok(Systems {
            audio: load_model(&self.audio_model)?,
            visual: load_model(&self.visual_model)?,
            audio_visual: load_model(&self.av_model)?,
            lm: self.lm.as_ref().map(|p| LanguageModel::from_checkpoint(&Checkpoint::read(p)?)).transpose()?,
        })
    }

    fn settings(&self) -> DecodeSettings {
        let audio = BeamConfig { ctc_weight: self.ctc_weight, lm_weight: self.lm_weight, beam_width: self.beam, ..BeamConfig::default() };
        DecodeSettings {
            visual: BeamConfig { lm_weight: self.visual_lm_weight, ..audio.clone() },
            audio,
            fusion: FusionConfig { mode: self.fusion, gamma: self.gamma },
        }
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn gen_corpus(a: &GenCorpusArgs) -> Result<()> {
    let spec = CorpusSpec {
        n_train: a.n_train,
        n_valid: a.n_valid,
        n_test: a.n_test,
        min_symbols: a.min_symbols,
        max_symbols: a.max_symbols,
        seed: a.seed,
    };
    let c = generate_corpus(&spec, &CorpusConfig::default())?;
    fs::create_dir_all(&a.out)?;
    for (name, recs) in [("train", &c.train), ("valid", &c.valid), ("test", &c.test)] {
        write_manifest(split_path(&a.out, name), recs)?;
    }
    eprintln!("wrote {} / {} / {} utterances to {}", c.train.len(), c.valid.len(), c.test.len(), a.out.display());
    Ok(())
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::read(p)?,
        None => TrainConfig::for_modality(a.modality),
    };
    if let Some(v) = a.ctc_weight_train {
        cfg.ctc_alpha = v;
    }
    if let Some(v) = a.label_smoothing {
        cfg.label_smoothing = v;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    cfg.validate()?;
    let (corpus, mel) = (CorpusConfig::default(), MelConfig::default());
    let mut train_recs = load_split(&a.corpus, "train")?;
    if let Some(n) = a.limit {
        train_recs.truncate(n);
    }
    let valid_recs = load_split(&a.corpus, "valid")?;
    let train_set = prepare_examples(&train_recs, &corpus, &mel)?;
    let valid = prepare_examples(&valid_recs, &corpus, &mel)?;
    let model = HybridModel::new(corpus.alphabet.clone(), ModelConfig { seed: cfg.seed, ..ModelConfig::new(a.modality) })?;
    let out = train(model, &train_set, &valid, &cfg, &corpus, &mel, |m| {
        eprintln!("epoch {} train {:.4} val {:.4} cer {:.4}", m.epoch, m.train_loss, m.val_loss, m.val_cer);
    })?;
    if let Some(reason) = &out.diverged {
        eprintln!("training stopped early: {reason}; keeping the last good parameters");
    }
    let mut ck = out.model.to_checkpoint();
    ck.set("train_config", cfg.to_text());
    ck.write(&a.out)?;
    if let Some(p) = &a.metrics {
        fs::write(p, format_metrics(&out.metrics))?;
    }
    Ok(())
}

fn train_lm_cmd(a: &TrainLmArgs) -> Result<()> {
    let alphabet = CorpusConfig::default().alphabet;
    let manifests = vec![load_split(&a.corpus, "train")?, load_split(&a.corpus, "valid")?];
    let text = build_lm_corpus(&manifests, &alphabet, 0.1, a.seed)?;
    let cfg = LmTrainConfig { epochs: a.epochs, seed: a.seed, ..LmTrainConfig::default() };
    let out = train_lm(&text, &alphabet, LmConfig { seed: a.seed, ..LmConfig::default() }, &cfg, |e| {
        eprintln!("epoch {} train nll {:.4} valid perplexity {:.4}", e.epoch, e.train_nll, e.valid_perplexity);
    })?;
    if let Some(reason) = &out.diverged {
        eprintln!("training stopped early: {reason}; keeping the last good parameters");
    }
    out.lm.to_checkpoint().write(&a.out)
}

fn default_system(m: &ModelArgs) -> Result<System> {
    let s = match (&m.audio_model, &m.visual_model, &m.av_model) {
        (_, _, Some(_)) if m.fusion == FusionMode::Early => System::AvEarly,
        (Some(_), Some(_), _) if m.fusion != FusionMode::Early => System::AvLate,
        (Some(_), None, None) => System::A,
        (None, Some(_), None) => System::V,
        (None, None, Some(_)) => System::AvEarly,
        _ => return Err(Error::Config("pass --system or exactly the checkpoints one system needs".into())),
    };
    Ok(s)
}

/// Clean or noise-corrupted model streams of each record, in order.
fn noisy_streams(recs: &[UtteranceRecord], snr: SnrLevel, noise: NoiseKind, seed: u64) -> Result<Vec<StreamPair>> {
    let (corpus, mel) = (CorpusConfig::default(), MelConfig::default());
    recs.par_iter()
        .enumerate()
        .map(|(i, r)| {
            let u = r.synthesize(&corpus)?;
            let audio = match snr {
                SnrLevel::Clean => u.waveform,
                SnrLevel::Db(_) => {
                    let n = generate_noise(noise, u.waveform.len(), &corpus, derive_seed(seed, i as u64))?;
                    mix_at_snr(&u.waveform, &n, snr)?
                }
            };
            model_streams(&audio, &u.visual, &mel)
        })
        .collect()
}

fn decode_cmd(a: &DecodeArgs) -> Result<()> {
    let system = match a.system {
        Some(s) => s,
        None => default_system(&a.models)?,
    };
    let systems = a.models.systems()?;
    systems.check(system)?;
    let recs = load_split(&a.corpus, &a.split)?;
    let streams = noisy_streams(&recs, a.snr, a.noise, a.seed)?;
    let items: Vec<(&str, &StreamPair)> = recs.iter().zip(&streams).map(|(r, s)| (r.text.as_str(), s)).collect();
    let ev = evaluate(system, &systems, &items, &a.models.settings())?;
    let mut text = String::new();
    for ((r, h), t) in recs.iter().zip(&ev.hypotheses).zip(ev.texts) {
        text.push_str(&format_decode_record(&DecodeRecord::new(&r.id, t, h.score, &h.streams)));
        text.push('\n');
    }
    emit(&a.out, &text)?;
    eprintln!("{system}: WER {:.4} CER {:.4}", ev.wer.rate(), ev.cer.rate());
    Ok(())
}

fn id_text(path: &Path) -> Result<Vec<(String, String)>> {
    let body = fs::read_to_string(path)?;
    body.lines()
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let mut f = l.split('\t');
            match (f.next(), f.next()) {
                (Some(id), Some(text)) => Ok((id.to_string(), text.to_string())),
                _ => Err(Error::Format(format!("{}: expected id<TAB>text, got {l:?}", path.display()))),
            }
        })
        .collect()
}

fn eval_cmd(a: &EvalArgs) -> Result<()> {
    let refs = id_text(&a.reference)?;
    let hyps: HashMap<String, String> = id_text(&a.hyp)?.into_iter().collect();
    let pairs = refs
        .iter()
        .map(|(id, r)| {
            hyps.get(id)
                .map(|h| (r.as_str(), h.as_str()))
                .ok_or_else(|| Error::Usage(format!("no hypothesis for utterance {id}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let (w, c) = corpus_error_rates(pairs)?;
    println!(
        "WER {:.6} (S {} D {} I {} N {})\nCER {:.6} (S {} D {} I {} N {})",
        w.rate(),
        w.substitutions,
        w.deletions,
        w.insertions,
        w.ref_len,
        c.rate(),
        c.substitutions,
        c.deletions,
        c.insertions,
        c.ref_len
    );
    Ok(())
}

fn sweep_cmd(a: &SweepArgs) -> Result<()> {
    let systems = a.models.systems()?;
    let wanted = match &a.systems {
        Some(s) => s.clone(),
        None => System::ALL.into_iter().filter(|&s| systems.check(s).is_ok()).collect(),
    };
    let (corpus, mel) = (CorpusConfig::default(), MelConfig::default());
    let mut recs = load_split(&a.corpus, "test")?;
    if let Some(n) = a.limit {
        recs.truncate(n);
    }
    let test: Vec<Example> = prepare_examples(&recs, &corpus, &mel)?;
    let sweep = SweepConfig { kinds: a.noise.clone(), snrs: a.snr.clone(), systems: wanted, seed: a.seed };
    let out = noise_sweep(&systems, &test, &a.models.settings(), &sweep, &corpus, &mel)?;
    emit(&a.out, &format_sweep_csv(&out.rows))?;
    eprintln!("largest SNR error {:.2e} dB", out.max_snr_error_db);
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenCorpus(a) => gen_corpus(a),
        Command::Train(a) => train_cmd(a),
        Command::TrainLm(a) => train_lm_cmd(a),
        Command::Decode(a) => decode_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
    }
}
