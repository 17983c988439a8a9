use std::fmt;
use std::str::FromStr;

use crate::ctc::{ctc_loss_from_logits, LogProbLattice};
use crate::error::{Error, Result};
use crate::numerics::{seeded_rng, Matrix};

use super::attention::{AttentionDecoder, DecoderDims};
use super::checkpoint::Checkpoint;
use super::encoder::{BlstmStack, EarlyFusionEncoder, Encoder, EncoderStates, ModelInput};
use super::linear::Linear;
use super::lm::RnnLm;
use super::params::{join, Params};
use super::Alphabet;

/// Which streams a model consumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modality {
    Audio,
    Visual,
    /// Both streams through the early-fusion encoder.
    AudioVisual,
}

impl Modality {
    pub fn name(self) -> &'static str {
        match self {
            Modality::Audio => "audio",
            Modality::Visual => "visual",
            Modality::AudioVisual => "audio-visual",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "audio" | "a" | "A" => Ok(Modality::Audio),
            "visual" | "v" | "V" => Ok(Modality::Visual),
            "audio-visual" | "av" | "AV" => Ok(Modality::AudioVisual),
            _ => Err(Error::Usage(format!("unknown modality {s:?} (audio, visual, audio-visual)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub modality: Modality,
    pub audio_dim: usize,
    pub visual_dim: usize,
    pub encoder_hidden: usize,
    /// Layers per BLSTM stack; early fusion uses this for each branch and the trunk.
    pub encoder_layers: usize,
    pub embed: usize,
    pub decoder_hidden: usize,
    pub attention: usize,
    pub conv_channels: usize,
    pub conv_width: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(modality: Modality) -> Self {
        ModelConfig {
            modality,
            audio_dim: 80,
            visual_dim: 16,
            encoder_hidden: 32,
            encoder_layers: 2,
            embed: 16,
            decoder_hidden: 64,
            attention: 32,
            conv_channels: 4,
            conv_width: 7,
            seed: 1,
        }
    }

    fn fields(&self) -> [(&'static str, String); 11] {
        [
            ("modality", self.modality.name().into()),
            ("audio_dim", self.audio_dim.to_string()),
            ("visual_dim", self.visual_dim.to_string()),
            ("encoder_hidden", self.encoder_hidden.to_string()),
            ("encoder_layers", self.encoder_layers.to_string()),
            ("embed", self.embed.to_string()),
            ("decoder_hidden", self.decoder_hidden.to_string()),
            ("attention", self.attention.to_string()),
            ("conv_channels", self.conv_channels.to_string()),
            ("conv_width", self.conv_width.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }

    fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        Ok(ModelConfig {
            modality: ck.get("modality")?.parse()?,
            audio_dim: ck.parse("audio_dim")?,
            visual_dim: ck.parse("visual_dim")?,
            encoder_hidden: ck.parse("encoder_hidden")?,
            encoder_layers: ck.parse("encoder_layers")?,
            embed: ck.parse("embed")?,
            decoder_hidden: ck.parse("decoder_hidden")?,
            attention: ck.parse("attention")?,
            conv_channels: ck.parse("conv_channels")?,
            conv_width: ck.parse("conv_width")?,
            seed: ck.parse("seed")?,
        })
    }
}

/// Shared encoder with a CTC head and a location-aware attention decoder.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridModel {
    pub alphabet: Alphabet,
    pub config: ModelConfig,
    pub encoder: Encoder,
    pub ctc_head: Linear,
    pub decoder: AttentionDecoder,
}

/// Per-utterance components of the multi-task objective (negative log-likelihoods).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UtteranceLoss {
    pub ctc: f64,
    pub attention: f64,
    pub ctc_feasible: bool,
}

impl HybridModel {
    pub fn new(alphabet: Alphabet, config: ModelConfig) -> Result<Self> {
        if config.encoder_layers == 0 || config.encoder_hidden == 0 {
            return Err(Error::Config("encoder needs at least one layer of non-zero width".into()));
        }
        if config.conv_width % 2 == 0 {
            return Err(Error::Config("location filter width must be odd".into()));
        }
        let mut rng = seeded_rng(config.seed);
        let c = &config;
        let encoder = match c.modality {
            Modality::Audio => Encoder::Single(BlstmStack::new(c.audio_dim, c.encoder_hidden, c.encoder_layers, &mut rng)),
            Modality::Visual => Encoder::Single(BlstmStack::new(c.visual_dim, c.encoder_hidden, c.encoder_layers, &mut rng)),
            Modality::AudioVisual => Encoder::EarlyFusion(EarlyFusionEncoder {
                audio: BlstmStack::new(c.audio_dim, c.encoder_hidden, c.encoder_layers, &mut rng),
                visual: BlstmStack::new(c.visual_dim, c.encoder_hidden, c.encoder_layers, &mut rng),
                trunk: BlstmStack::new(4 * c.encoder_hidden, c.encoder_hidden, c.encoder_layers, &mut rng),
            }),
        };
        let enc_dim = encoder.output_dim();
        let ctc_head = Linear::new(enc_dim, alphabet.ctc_size(), &mut rng);
        let decoder = AttentionDecoder::new(
            DecoderDims {
                labels: alphabet.len(),
                encoder: enc_dim,
                embed: c.embed,
                hidden: c.decoder_hidden,
                attention: c.attention,
                conv_channels: c.conv_channels,
                conv_width: c.conv_width,
            },
            &mut rng,
        );
        Ok(HybridModel { alphabet, config, encoder, ctc_head, decoder })
    }

    pub fn modality(&self) -> Modality {
        self.config.modality
    }

    pub fn encode(&self, input: ModelInput<'_>) -> Result<EncoderStates> {
        Ok(self.encoder.encode(input)?.0)
    }

    /// CTC log-posteriors over `labels ∪ {blank}` for every encoder frame.
    pub fn ctc_lattice(&self, states: &EncoderStates) -> LogProbLattice {
        LogProbLattice::from_logits(self.ctc_head.apply_rows(&states.h), states.fps)
    }

    /// Encoder states plus CTC lattice, the inputs of joint decoding.
    pub fn infer(&self, input: ModelInput<'_>) -> Result<(EncoderStates, LogProbLattice)> {
        let states = self.encode(input)?;
        let lattice = self.ctc_lattice(&states);
        Ok((states, lattice))
    }

    /// Component losses for one utterance. With `grad`, accumulates the
    /// gradient of `α·ctc + (1−α)·attention` (CTC term dropped when
    /// infeasible), scaled by `scale`.
    pub fn utterance_loss(
        &self,
        input: ModelInput<'_>,
        target: &[usize],
        alpha: f64,
        smoothing: f64,
        grad: Option<(f64, &mut HybridModel)>,
    ) -> Result<UtteranceLoss> {
        let (states, cache) = self.encoder.encode(input)?;
        let logits = self.ctc_head.apply_rows(&states.h);
        let (ctc, _) = ctc_loss_from_logits(&logits, states.fps, target)?;
        let want_grad = grad.is_some();
        let mut d_h = Matrix::zeros(states.h.rows(), states.h.cols());
        match grad {
            None => {
                let att = self.decoder.sequence_loss(&states.h, target, smoothing, None)?;
                Ok(UtteranceLoss { ctc: ctc.nll(), attention: att, ctc_feasible: ctc.feasible })
            }
            Some((scale, g)) => {
                let att = if alpha < 1.0 {
                    self.decoder.sequence_loss(&states.h, target, smoothing, Some(((1.0 - alpha) * scale, &mut g.decoder, &mut d_h)))?
                } else {
                    self.decoder.sequence_loss(&states.h, target, smoothing, None)?
                };
                if ctc.feasible && alpha > 0.0 {
                    let mut d_logits = ctc.grad.clone();
                    d_logits.scale(alpha * scale);
                    d_h.add_assign(&self.ctc_head.backward_rows(&states.h, &d_logits, &mut g.ctc_head));
                }
                debug_assert!(want_grad);
                self.encoder.backward(&cache, &d_h, &mut g.encoder);
                Ok(UtteranceLoss { ctc: ctc.nll(), attention: att, ctc_feasible: ctc.feasible })
            }
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new("hybrid");
        ck.set("alphabet", self.alphabet.symbols_string());
        for (k, v) in self.config.fields() {
            ck.set(k, v);
        }
        ck.add_params(self);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.kind != "hybrid" {
            return Err(Error::Format(format!("expected a hybrid model checkpoint, found {:?}", ck.kind)));
        }
        let alphabet = Alphabet::new(ck.get("alphabet")?.chars())?;
        let mut model = HybridModel::new(alphabet, ModelConfig::from_checkpoint(ck)?)?;
        ck.load_params(&mut model)?;
        Ok(model)
    }
}

impl Params for HybridModel {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Matrix)) {
        self.encoder.visit(&join(prefix, "encoder"), f);
        self.ctc_head.visit(&join(prefix, "ctc"), f);
        self.decoder.visit(&join(prefix, "decoder"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Matrix)) {
        self.encoder.visit_mut(&join(prefix, "encoder"), f);
        self.ctc_head.visit_mut(&join(prefix, "ctc"), f);
        self.decoder.visit_mut(&join(prefix, "decoder"), f);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LmConfig {
    pub embed: usize,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig { embed: 16, hidden: 64, seed: 1 }
    }
}

/// A character LM bundled with its alphabet.
#[derive(Clone, Debug, PartialEq)]
pub struct LanguageModel {
    pub alphabet: Alphabet,
    pub config: LmConfig,
    pub net: RnnLm,
}

impl LanguageModel {
    pub fn new(alphabet: Alphabet, config: LmConfig) -> Self {
        let mut rng = seeded_rng(config.seed);
        let net = RnnLm::new(alphabet.len(), config.embed, config.hidden, &mut rng);
        LanguageModel { alphabet, config, net }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new("lm");
        ck.set("alphabet", self.alphabet.symbols_string());
        ck.set("embed", self.config.embed);
        ck.set("hidden", self.config.hidden);
        ck.set("seed", self.config.seed);
        ck.add_params(&self.net);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.kind != "lm" {
            return Err(Error::Format(format!("expected a language model checkpoint, found {:?}", ck.kind)));
        }
        let alphabet = Alphabet::new(ck.get("alphabet")?.chars())?;
        let config = LmConfig { embed: ck.parse("embed")?, hidden: ck.parse("hidden")?, seed: ck.parse("seed")? };
        let mut lm = LanguageModel::new(alphabet, config);
        ck.load_params(&mut lm.net)?;
        Ok(lm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureSequence, StreamKind};
    use crate::numerics::{fd_gradient, log_sum_exp, max_rel_error};

    fn tiny(modality: Modality) -> ModelConfig {
        ModelConfig {
            audio_dim: 5,
            visual_dim: 3,
            encoder_hidden: 3,
            encoder_layers: 1,
            embed: 3,
            decoder_hidden: 4,
            attention: 3,
            conv_channels: 2,
            conv_width: 3,
            ..ModelConfig::new(modality)
        }
    }

    fn alphabet() -> Alphabet {
        Alphabet::new("ab".chars()).unwrap()
    }

    fn seq(t: usize, d: usize, seed: u64, kind: StreamKind) -> FeatureSequence {
        let mut rng = seeded_rng(seed);
        FeatureSequence::new(Matrix::uniform(t, d, 1.0, &mut rng), 50.0, kind).unwrap()
    }

    #[test]
    fn ctc_head_rows_are_normalized() {
        let m = HybridModel::new(alphabet(), tiny(Modality::Audio)).unwrap();
        let x = seq(6, 5, 1, StreamKind::Audio);
        let (_, lattice) = m.infer(ModelInput::Single(&x)).unwrap();
        for t in 0..6 {
            assert!(log_sum_exp(lattice.matrix().row(t)).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        for modality in [Modality::Audio, Modality::AudioVisual] {
            let m = HybridModel::new(alphabet(), tiny(modality)).unwrap();
            let ck = Checkpoint::decode(&m.to_checkpoint().encode()).unwrap();
            assert_eq!(HybridModel::from_checkpoint(&ck).unwrap(), m);
        }
        let lm = LanguageModel::new(alphabet(), LmConfig { embed: 3, hidden: 4, seed: 9 });
        let ck = Checkpoint::decode(&lm.to_checkpoint().encode()).unwrap();
        assert_eq!(LanguageModel::from_checkpoint(&ck).unwrap(), lm);
        assert!(HybridModel::from_checkpoint(&ck).is_err());
    }

    #[test]
    fn multitask_gradient_matches_finite_differences() {
        for seed in 0..10 {
            let modality = if seed % 2 == 0 { Modality::Audio } else { Modality::AudioVisual };
            let m = HybridModel::new(alphabet(), ModelConfig { seed, ..tiny(modality) }).unwrap();
            let a = seq(5, 5, 100 + seed, StreamKind::Audio);
            let v = seq(5, 3, 200 + seed, StreamKind::Visual);
            let input = match modality {
                Modality::AudioVisual => ModelInput::Fused { audio: &a, visual: &v },
                _ => ModelInput::Single(&a),
            };
            let target = [0, 1, 1];
            let (alpha, eps) = (0.3, 0.1);
            let objective = |m: &HybridModel| {
                let l = m.utterance_loss(input, &target, alpha, eps, None).unwrap();
                alpha * l.ctc + (1.0 - alpha) * l.attention
            };
            let mut g = m.zeros_like();
            m.utterance_loss(input, &target, alpha, eps, Some((1.0, &mut g))).unwrap();
            let numeric = fd_gradient(
                |p| {
                    let mut mm = m.clone();
                    mm.unflatten(p);
                    objective(&mm)
                },
                &m.flatten(),
                1e-5,
            )
            .unwrap();
            let err = max_rel_error(&g.flatten(), &numeric);
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }
}
