use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::decoder::{beam_search, BeamConfig, Stream};
use crate::error::{Error, Result};
use crate::features::{model_streams, CorpusConfig, FeatureSequence, MelConfig, StreamPair, UtteranceRecord, Waveform};
use crate::harness::corpus_error_rates;
use crate::models::{HybridModel, Modality, ModelInput, Params};
use crate::numerics::{derive_seed, seeded_rng};

use super::{augment, clip_grad_norm, multitask_loss, Optimizer, TrainConfig};

/// One training or evaluation utterance with its clean model streams.
#[derive(Clone, Debug)]
pub struct Example {
    pub id: String,
    pub text: String,
    pub labels: Vec<usize>,
    pub waveform: Waveform,
    /// Raw visual stream at the corpus frame rate.
    pub visual: FeatureSequence,
    pub clean: StreamPair,
}

impl Example {
    pub fn input(&self, modality: Modality) -> ModelInput<'_> {
        input_for(modality, &self.clean)
    }
}

pub(crate) fn input_for(modality: Modality, s: &StreamPair) -> ModelInput<'_> {
    match modality {
        Modality::Audio => ModelInput::Single(&s.audio),
        Modality::Visual => ModelInput::Single(&s.visual),
        Modality::AudioVisual => ModelInput::Fused { audio: &s.audio, visual: &s.visual },
    }
}

/// Synthesizes every record and extracts its clean streams.
pub fn prepare_examples(records: &[UtteranceRecord], corpus: &CorpusConfig, mel: &MelConfig) -> Result<Vec<Example>> {
    records
        .par_iter()
        .map(|r| {
            let u = r.synthesize(corpus)?;
            let clean = model_streams(&u.waveform, &u.visual, mel)?;
            Ok(Example { id: r.id.clone(), text: r.text.clone(), labels: u.labels, waveform: u.waveform, visual: u.visual, clean })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_cer: f64,
}

pub const METRICS_HEADER: &str = "epoch,train_loss,val_loss,val_cer";

pub fn format_metrics(rows: &[EpochMetrics]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for m in rows {
        out.push_str(&format!("{},{:.6},{:.6},{:.6}\n", m.epoch, m.train_loss, m.val_loss, m.val_cer));
    }
    out
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Final parameters, or the last good ones when training diverged.
    pub model: HybridModel,
    pub metrics: Vec<EpochMetrics>,
    /// Training utterances (counted per visit) whose CTC term was dropped.
    pub infeasible_ctc: usize,
    pub diverged: Option<String>,
}

fn validation(model: &HybridModel, valid: &[Example], cfg: &TrainConfig) -> Result<(f64, f64)> {
    if valid.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let modality = model.modality();
    let mut loss = 0.0;
    for chunk in valid.chunks(cfg.batch_size) {
        let batch: Vec<(ModelInput, &[usize])> = chunk.iter().map(|e| (e.input(modality), e.labels.as_slice())).collect();
        loss += multitask_loss(model, &batch, cfg.ctc_alpha, cfg.label_smoothing, false)?.loss * chunk.len() as f64;
    }
    let beam = BeamConfig { lm_weight: 0.0, beam_width: cfg.val_beam, ..BeamConfig::default() };
    let hyps = valid
        .par_iter()
        .map(|e| {
            let (states, lattice) = model.infer(e.input(modality))?;
            let stream = Stream { model, states: &states, lattice: &lattice, lm: None, cfg: &beam };
            let best = beam_search(&stream)?.into_iter().next();
            Ok(best.map(|h| model.alphabet.decode(&h.labels)).unwrap_or_default())
        })
        .collect::<Result<Vec<String>>>()?;
    let (_, cer) = corpus_error_rates(valid.iter().zip(&hyps).map(|(e, h)| (e.text.as_str(), h.as_str())))?;
    Ok((loss / valid.len() as f64, cer.rate()))
}

/// Trains `model` with shuffled mini-batches. Deterministic in `cfg.seed`.
/// `on_epoch` sees each epoch's metrics as soon as they are known.
pub fn train(
    mut model: HybridModel,
    train_set: &[Example],
    valid: &[Example],
    cfg: &TrainConfig,
    corpus: &CorpusConfig,
    mel: &MelConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Usage("training set is empty".into()));
    }
    if let Some(dup) = valid.iter().find(|v| train_set.iter().any(|t| t.id == v.id)) {
        return Err(Error::Usage(format!("utterance {} is in both training and validation sets", dup.id)));
    }
    let modality = model.modality();
    let uses_audio = modality != Modality::Visual;
    let mut opt = Optimizer::from_config(cfg);
    let mut metrics = Vec::new();
    let mut infeasible_ctc = 0;
    let mut best_val = f64::INFINITY;
    let mut stale = 0;
    for epoch in 1..=cfg.epochs {
        let epoch_seed = derive_seed(cfg.seed, epoch as u64);
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut seeded_rng(epoch_seed));
        let last_good = model.clone();
        let mut total = 0.0;
        for batch_idx in order.chunks(cfg.batch_size) {
            let streams = batch_idx
                .par_iter()
                .map(|&i| {
                    let ex = &train_set[i];
                    if !(cfg.augment && uses_audio) {
                        return Ok(None);
                    }
                    let mut rng = seeded_rng(derive_seed(epoch_seed, i as u64));
                    let (noisy, level) = augment(&ex.waveform, cfg, corpus, &mut rng)?;
                    if level.db().is_none() {
                        return Ok(None);
                    }
                    model_streams(&noisy, &ex.visual, mel).map(Some)
                })
                .collect::<Result<Vec<Option<StreamPair>>>>()?;
            let batch: Vec<(ModelInput, &[usize])> = batch_idx
                .iter()
                .zip(&streams)
                .map(|(&i, s)| {
                    let ex = &train_set[i];
                    let pair = s.as_ref().unwrap_or(&ex.clean);
                    (input_for(modality, pair), ex.labels.as_slice())
                })
                .collect();
            let out = multitask_loss(&model, &batch, cfg.ctc_alpha, cfg.label_smoothing, true)?;
            infeasible_ctc += out.infeasible;
            let mut grad = out.grad.expect("gradient requested");
            if !out.loss.is_finite() || !grad.all_finite() {
                return Ok(TrainOutcome {
                    model: last_good,
                    metrics,
                    infeasible_ctc,
                    diverged: Some(format!("non-finite loss or gradient in epoch {epoch}")),
                });
            }
            clip_grad_norm(&mut grad, cfg.clip_norm);
            opt.step(&mut model, &grad);
            total += out.loss * batch_idx.len() as f64;
        }
        if !model.all_finite() {
            return Ok(TrainOutcome {
                model: last_good,
                metrics,
                infeasible_ctc,
                diverged: Some(format!("non-finite parameters after epoch {epoch}")),
            });
        }
        let (val_loss, val_cer) = validation(&model, valid, cfg)?;
        let m = EpochMetrics { epoch, train_loss: total / train_set.len() as f64, val_loss, val_cer };
        on_epoch(&m);
        metrics.push(m);
        if cfg.patience > 0 {
            if val_loss < best_val {
                best_val = val_loss;
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.patience {
                    break;
                }
            }
        }
    }
    Ok(TrainOutcome { model, metrics, infeasible_ctc, diverged: None })
}
