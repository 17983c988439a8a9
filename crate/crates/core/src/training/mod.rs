//! Multi-task training of the hybrid model: `α·CTC + (1−α)·attention`, with
//! label smoothing on the attention targets and babble-noise augmentation of
//! the raw audio.

mod config;
mod optim;
mod trainer;

use rand::Rng;

use crate::error::{Error, Result};
use crate::features::{generate_noise, mix_at_snr, CorpusConfig, SnrLevel, Waveform};
use crate::models::{HybridModel, ModelInput, Params};

pub use config::{OptimizerKind, TrainConfig};
pub use optim::{clip_grad_norm, Optimizer};
pub use trainer::{
    format_metrics, prepare_examples, train, EpochMetrics, Example, TrainOutcome, METRICS_HEADER,
};

/// `(1−ε)·onehot(gold) + ε/V`.
pub fn label_smooth(gold: usize, classes: usize, eps: f64) -> Vec<f64> {
    let mut q = vec![eps / classes as f64; classes];
    q[gold] += 1.0 - eps;
    q
}

/// Draws uniformly from `{clean} ∪ augment_snrs` and mixes in fresh noise of
/// the configured kind at the drawn SNR.
pub fn augment<R: Rng>(w: &Waveform, cfg: &TrainConfig, corpus: &CorpusConfig, rng: &mut R) -> Result<(Waveform, SnrLevel)> {
    let levels = cfg.augment_levels();
    let level = levels[rng.gen_range(0..levels.len())];
    let noise_seed = rng.gen();
    match level {
        SnrLevel::Clean => Ok((w.clone(), level)),
        SnrLevel::Db(_) => {
            let noise = generate_noise(cfg.augment_noise, w.len(), corpus, noise_seed)?;
            Ok((mix_at_snr(w, &noise, level)?, level))
        }
    }
}

/// Mean multi-task loss of a batch and its gradient.
#[derive(Clone, Debug)]
pub struct BatchLoss {
    pub loss: f64,
    pub ctc: f64,
    pub attention: f64,
    /// Utterances whose target cannot be aligned by CTC; their CTC term is dropped.
    pub infeasible: usize,
    pub grad: Option<HybridModel>,
}

/// `mean_b [α·(−log p_ctc) + (1−α)·(−log p_att)]` over the batch. Gradients
/// are computed when `with_grad`.
pub fn multitask_loss(
    model: &HybridModel,
    batch: &[(ModelInput<'_>, &[usize])],
    alpha: f64,
    smoothing: f64,
    with_grad: bool,
) -> Result<BatchLoss> {
    use rayon::prelude::*;
    if batch.is_empty() {
        return Err(Error::Usage("empty batch".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let parts = batch
        .par_iter()
        .map(|(input, target)| {
            if with_grad {
                let mut g = model.zeros_like();
                let l = model.utterance_loss(*input, target, alpha, smoothing, Some((scale, &mut g)))?;
                Ok((l, Some(g)))
            } else {
                Ok((model.utterance_loss(*input, target, alpha, smoothing, None)?, None))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let infeasible = parts.iter().filter(|(l, _)| !l.ctc_feasible).count();
    if alpha > 0.0 && infeasible == batch.len() {
        return Err(Error::Training(format!(
            "every utterance in the batch is CTC-infeasible ({} of {})",
            infeasible,
            batch.len()
        )));
    }
    let (mut loss, mut ctc, mut att) = (0.0, 0.0, 0.0);
    let mut grad: Option<HybridModel> = None;
    for (l, g) in parts {
        let ctc_term = if l.ctc_feasible && alpha > 0.0 { alpha * l.ctc } else { 0.0 };
        let att_term = if alpha < 1.0 { (1.0 - alpha) * l.attention } else { 0.0 };
        loss += ctc_term + att_term;
        if l.ctc_feasible {
            ctc += l.ctc;
        }
        att += l.attention;
        if let Some(g) = g {
            match grad.as_mut() {
                None => grad = Some(g),
                Some(acc) => acc.add_scaled(1.0, &g),
            }
        }
    }
    Ok(BatchLoss { loss: loss * scale, ctc: ctc * scale, attention: att * scale, infeasible, grad })
}
