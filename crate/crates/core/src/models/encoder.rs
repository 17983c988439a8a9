use rand::Rng;

use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::numerics::Matrix;

use super::lstm::{Lstm, LstmSeqCache};
use super::params::{join, Params};

/// Frame-wise encoder output: `T × 2h` concatenated forward/backward states.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderStates {
    pub h: Matrix,
    pub fps: f64,
}

impl EncoderStates {
    pub fn frames(&self) -> usize {
        self.h.rows()
    }

    pub fn dim(&self) -> usize {
        self.h.cols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlstmLayer {
    pub fwd: Lstm,
    pub bwd: Lstm,
}

#[derive(Clone, Debug)]
struct LayerCache {
    input: Matrix,
    fwd: LstmSeqCache,
    bwd: LstmSeqCache,
}

/// Stack of bidirectional LSTM layers.
#[derive(Clone, Debug, PartialEq)]
pub struct BlstmStack {
    pub layers: Vec<BlstmLayer>,
}

#[derive(Clone, Debug)]
pub struct BlstmCache {
    layers: Vec<LayerCache>,
}

impl BlstmStack {
    pub fn new<R: Rng>(input: usize, hidden: usize, layers: usize, rng: &mut R) -> Self {
        let layers = (0..layers)
            .map(|i| {
                let width = if i == 0 { input } else { 2 * hidden };
                BlstmLayer { fwd: Lstm::new(width, hidden, rng), bwd: Lstm::new(width, hidden, rng) }
            })
            .collect();
        BlstmStack { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fwd.input()
    }

    pub fn output_dim(&self) -> usize {
        2 * self.layers.last().expect("non-empty stack").fwd.hidden()
    }

    pub fn forward(&self, x: &Matrix) -> (Matrix, BlstmCache) {
        let mut input = x.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (hf, cf) = layer.fwd.forward_seq(&input, false);
            let (hb, cb) = layer.bwd.forward_seq(&input, true);
            let out = hf.hconcat(&hb).expect("equal frame counts");
            caches.push(LayerCache { input, fwd: cf, bwd: cb });
            input = out;
        }
        (input, BlstmCache { layers: caches })
    }

    pub fn backward(&self, cache: &BlstmCache, d_out: &Matrix, grad: &mut BlstmStack) -> Matrix {
        let mut d = d_out.clone();
        for ((layer, lc), g) in self.layers.iter().zip(&cache.layers).zip(grad.layers.iter_mut()).rev() {
            let half = layer.fwd.hidden();
            let (df, db) = d.hsplit(half);
            let mut dx = layer.fwd.backward_seq(&lc.input, &lc.fwd, &df, &mut g.fwd);
            dx.add_assign(&layer.bwd.backward_seq(&lc.input, &lc.bwd, &db, &mut g.bwd));
            d = dx;
        }
        d
    }
}

impl Params for BlstmStack {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Matrix)) {
        for (i, l) in self.layers.iter().enumerate() {
            l.fwd.visit(&join(prefix, &format!("l{i}.fwd")), f);
            l.bwd.visit(&join(prefix, &format!("l{i}.bwd")), f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Matrix)) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.fwd.visit_mut(&join(prefix, &format!("l{i}.fwd")), f);
            l.bwd.visit_mut(&join(prefix, &format!("l{i}.bwd")), f);
        }
    }
}

/// Two modality branches whose outputs are concatenated per frame and fed to a trunk.
#[derive(Clone, Debug, PartialEq)]
pub struct EarlyFusionEncoder {
    pub audio: BlstmStack,
    pub visual: BlstmStack,
    pub trunk: BlstmStack,
}

#[derive(Clone, Debug)]
pub struct EarlyFusionCache {
    audio: BlstmCache,
    visual: BlstmCache,
    trunk: BlstmCache,
    audio_width: usize,
}

impl EarlyFusionEncoder {
    /// Per-frame `[audio-branch ‖ visual-branch]`, the trunk's input.
    pub fn branch_outputs(&self, audio: &Matrix, visual: &Matrix) -> Result<Matrix> {
        check_pair(audio, visual)?;
        let (ha, _) = self.audio.forward(audio);
        let (hv, _) = self.visual.forward(visual);
        ha.hconcat(&hv)
    }

    pub fn forward(&self, audio: &Matrix, visual: &Matrix) -> Result<(Matrix, EarlyFusionCache)> {
        check_pair(audio, visual)?;
        let (ha, ca) = self.audio.forward(audio);
        let (hv, cv) = self.visual.forward(visual);
        let joint = ha.hconcat(&hv)?;
        let (out, ct) = self.trunk.forward(&joint);
        Ok((out, EarlyFusionCache { audio: ca, visual: cv, trunk: ct, audio_width: ha.cols() }))
    }

    pub fn backward(&self, cache: &EarlyFusionCache, d_out: &Matrix, grad: &mut EarlyFusionEncoder) -> (Matrix, Matrix) {
        let d_joint = self.trunk.backward(&cache.trunk, d_out, &mut grad.trunk);
        let (da, dv) = d_joint.hsplit(cache.audio_width);
        let dxa = self.audio.backward(&cache.audio, &da, &mut grad.audio);
        let dxv = self.visual.backward(&cache.visual, &dv, &mut grad.visual);
        (dxa, dxv)
    }
}

fn check_pair(audio: &Matrix, visual: &Matrix) -> Result<()> {
    if audio.rows() != visual.rows() {
        return Err(Error::Usage(format!(
            "early fusion needs equal frame counts, got audio {} vs visual {}",
            audio.rows(),
            visual.rows()
        )));
    }
    Ok(())
}

impl Params for EarlyFusionEncoder {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Matrix)) {
        self.audio.visit(&join(prefix, "audio"), f);
        self.visual.visit(&join(prefix, "visual"), f);
        self.trunk.visit(&join(prefix, "trunk"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Matrix)) {
        self.audio.visit_mut(&join(prefix, "audio"), f);
        self.visual.visit_mut(&join(prefix, "visual"), f);
        self.trunk.visit_mut(&join(prefix, "trunk"), f);
    }
}

/// The encoder topologies of the hybrid model.
#[derive(Clone, Debug, PartialEq)]
pub enum Encoder {
    Single(BlstmStack),
    EarlyFusion(EarlyFusionEncoder),
}

/// Feature streams fed to an encoder.
#[derive(Clone, Copy, Debug)]
pub enum ModelInput<'a> {
    Single(&'a FeatureSequence),
    Fused { audio: &'a FeatureSequence, visual: &'a FeatureSequence },
}

impl ModelInput<'_> {
    pub fn frames(&self) -> usize {
        match self {
            ModelInput::Single(x) => x.len(),
            ModelInput::Fused { audio, .. } => audio.len(),
        }
    }

    pub fn fps(&self) -> f64 {
        match self {
            ModelInput::Single(x) => x.fps(),
            ModelInput::Fused { audio, .. } => audio.fps(),
        }
    }
}

#[derive(Clone, Debug)]
pub enum EncoderCache {
    Single(BlstmCache),
    EarlyFusion(EarlyFusionCache),
}

impl Encoder {
    pub fn output_dim(&self) -> usize {
        match self {
            Encoder::Single(s) => s.output_dim(),
            Encoder::EarlyFusion(e) => e.trunk.output_dim(),
        }
    }

    pub fn encode(&self, input: ModelInput<'_>) -> Result<(EncoderStates, EncoderCache)> {
        if input.frames() == 0 {
            return Err(Error::Usage("encoder input has no frames".into()));
        }
        match (self, input) {
            (Encoder::Single(stack), ModelInput::Single(x)) => {
                if x.dim() != stack.input_dim() {
                    return Err(Error::Usage(format!(
                        "encoder expects {}-dim frames, got {}",
                        stack.input_dim(),
                        x.dim()
                    )));
                }
                let (h, cache) = stack.forward(x.frames());
                Ok((EncoderStates { h, fps: x.fps() }, EncoderCache::Single(cache)))
            }
            (Encoder::EarlyFusion(enc), ModelInput::Fused { audio, visual }) => {
                if audio.fps() != visual.fps() {
                    return Err(Error::Usage(format!(
                        "early fusion needs equal frame rates, got {} and {} fps",
                        audio.fps(),
                        visual.fps()
                    )));
                }
                if audio.dim() != enc.audio.input_dim() || visual.dim() != enc.visual.input_dim() {
                    return Err(Error::Usage(format!(
                        "early fusion expects {}+{} dims, got {}+{}",
                        enc.audio.input_dim(),
                        enc.visual.input_dim(),
                        audio.dim(),
                        visual.dim()
                    )));
                }
                let (h, cache) = enc.forward(audio.frames(), visual.frames())?;
                Ok((EncoderStates { h, fps: audio.fps() }, EncoderCache::EarlyFusion(cache)))
            }
            (Encoder::Single(_), ModelInput::Fused { .. }) => {
                Err(Error::Usage("single-stream encoder given two streams".into()))
            }
            (Encoder::EarlyFusion(_), ModelInput::Single(_)) => {
                Err(Error::Usage("early-fusion encoder needs audio and visual streams".into()))
            }
        }
    }

    /// Accumulates parameter gradients for `d_states`; input gradients are discarded.
    pub fn backward(&self, cache: &EncoderCache, d_states: &Matrix, grad: &mut Encoder) {
        match (self, cache, grad) {
            (Encoder::Single(s), EncoderCache::Single(c), Encoder::Single(g)) => {
                s.backward(c, d_states, g);
            }
            (Encoder::EarlyFusion(e), EncoderCache::EarlyFusion(c), Encoder::EarlyFusion(g)) => {
                e.backward(c, d_states, g);
            }
            _ => panic!("encoder, cache and gradient topologies differ"),
        }
    }
}

impl Params for Encoder {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Matrix)) {
        match self {
            Encoder::Single(s) => s.visit(prefix, f),
            Encoder::EarlyFusion(e) => e.visit(prefix, f),
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Matrix)) {
        match self {
            Encoder::Single(s) => s.visit_mut(prefix, f),
            Encoder::EarlyFusion(e) => e.visit_mut(prefix, f),
        }
    }
}

/// Convenience wrapper: encode a single stream with a BLSTM stack.
pub fn blstm_encode(x: &FeatureSequence, stack: &BlstmStack) -> Result<EncoderStates> {
    Encoder::Single(stack.clone()).encode(ModelInput::Single(x)).map(|(s, _)| s)
}

/// Convenience wrapper for the early-fusion topology; streams must already share a frame rate and length.
pub fn early_fusion_encode(
    audio: &FeatureSequence,
    visual: &FeatureSequence,
    enc: &EarlyFusionEncoder,
) -> Result<EncoderStates> {
    Encoder::EarlyFusion(enc.clone()).encode(ModelInput::Fused { audio, visual }).map(|(s, _)| s)
}
