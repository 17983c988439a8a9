//! Location-aware attention decoder.
//!
//! One decoding step, given the previous state `(z, c, a)` and label `y`:
//!
//! ```text
//! f      = conv(a)                                 T × C location features
//! e_t    = g · tanh(W z + V h_t + U f_t + b)
//! a'     = softmax(e)
//! ctx    = Σ_t a'_t h_t
//! z', c' = LSTM([emb(y); ctx], z, c)
//! logp   = log_softmax(W_o [z'; ctx] + b_o)         over labels ∪ {eos}
//! ```

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{axpy, dot, log_softmax, matvec, matvec_t_acc, outer_acc, Matrix};

use super::linear::Linear;
use super::lstm::{Lstm, LstmStep};
use super::params::{join, Params};
use super::EncoderStates;

/// Previous alignment plus the decoder's recurrent state.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionState {
    pub alignment: Vec<f64>,
    pub z: Vec<f64>,
    pub c: Vec<f64>,
}

/// Encoder states with their attention projection `V·h_t + b` precomputed.
#[derive(Clone, Debug)]
pub struct AttentionMemory {
    pub h: Matrix,
    proj: Matrix,
}

impl AttentionMemory {
    pub fn frames(&self) -> usize {
        self.h.rows()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecoderDims {
    pub labels: usize,
    pub encoder: usize,
    pub embed: usize,
    pub hidden: usize,
    pub attention: usize,
    pub conv_channels: usize,
    pub conv_width: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionDecoder {
    /// `(labels + 1) × embed`; the last row is `sos`.
    pub embed: Matrix,
    pub att_w: Matrix,
    pub att_v: Matrix,
    pub att_u: Matrix,
    pub att_b: Matrix,
    pub att_g: Matrix,
    /// `channels × width` filters over the previous alignment.
    pub conv: Matrix,
    pub cell: Lstm,
    pub out: Linear,
}

#[derive(Clone, Debug)]
struct AttentionCache {
    loc: Matrix,
    tanh: Matrix,
    alignment: Vec<f64>,
    ctx: Vec<f64>,
}

#[derive(Clone, Debug)]
struct StepCache {
    prev: AttentionState,
    input_row: usize,
    att: AttentionCache,
    x: Vec<f64>,
    cell: LstmStep,
    probs: Vec<f64>,
}

impl AttentionDecoder {
    pub fn new<R: Rng>(dims: DecoderDims, rng: &mut R) -> Self {
        let d = dims;
        AttentionDecoder {
            embed: Matrix::uniform(d.labels + 1, d.embed, 0.1, rng),
            att_w: Matrix::uniform(d.attention, d.hidden, 0.1, rng),
            att_v: Matrix::uniform(d.attention, d.encoder, 0.1, rng),
            att_u: Matrix::uniform(d.attention, d.conv_channels, 0.1, rng),
            att_b: Matrix::uniform(1, d.attention, 0.1, rng),
            att_g: Matrix::uniform(1, d.attention, 0.1, rng),
            conv: Matrix::uniform(d.conv_channels, d.conv_width, 0.1, rng),
            cell: Lstm::new(d.embed + d.encoder, d.hidden, rng),
            out: Linear::new(d.hidden + d.encoder, d.labels + 1, rng),
        }
    }

    pub fn num_labels(&self) -> usize {
        self.embed.rows() - 1
    }

    pub fn encoder_dim(&self) -> usize {
        self.att_v.cols()
    }

    pub fn hidden(&self) -> usize {
        self.cell.hidden()
    }

    /// Width of the output distribution, `labels ∪ {eos}`.
    pub fn output_size(&self) -> usize {
        self.out.output()
    }

    pub fn prepare(&self, states: &EncoderStates) -> Result<AttentionMemory> {
        self.prepare_matrix(&states.h)
    }

    fn prepare_matrix(&self, h: &Matrix) -> Result<AttentionMemory> {
        if h.cols() != self.encoder_dim() {
            return Err(Error::Usage(format!(
                "decoder expects {}-dim encoder states, got {}",
                self.encoder_dim(),
                h.cols()
            )));
        }
        if h.rows() == 0 {
            return Err(Error::Usage("cannot attend over zero encoder frames".into()));
        }
        let mut proj = h.matmul_t(&self.att_v);
        for t in 0..proj.rows() {
            axpy(1.0, self.att_b.data(), proj.row_mut(t));
        }
        Ok(AttentionMemory { h: h.clone(), proj })
    }

    /// Uniform alignment, zero recurrent state.
    pub fn initial_state(&self, frames: usize) -> AttentionState {
        AttentionState {
            alignment: vec![1.0 / frames as f64; frames],
            z: vec![0.0; self.hidden()],
            c: vec![0.0; self.hidden()],
        }
    }

    /// Maps a previous label (a real label or `sos`) to its embedding row.
    pub fn input_row(&self, prev_label: usize) -> Result<usize> {
        let n = self.num_labels();
        if prev_label < n {
            Ok(prev_label)
        } else if prev_label == n + 1 {
            Ok(n)
        } else if prev_label == n {
            Err(Error::Usage("blank is a CTC-only symbol and cannot condition the decoder".into()))
        } else {
            Err(Error::Usage(format!("label id {prev_label} cannot condition the decoder")))
        }
    }

    fn location_features(&self, prev: &[f64]) -> Matrix {
        let t_len = prev.len();
        let (channels, width) = self.conv.shape();
        let half = (width / 2) as isize;
        let mut loc = Matrix::zeros(t_len, channels);
        for t in 0..t_len {
            let row = loc.row_mut(t);
            for (ch, r) in row.iter_mut().enumerate() {
                let filt = self.conv.row(ch);
                let mut s = 0.0;
                for (k, w) in filt.iter().enumerate() {
                    let src = t as isize + k as isize - half;
                    if src >= 0 && (src as usize) < t_len {
                        s += w * prev[src as usize];
                    }
                }
                *r = s;
            }
        }
        loc
    }

    fn attend(&self, state: &AttentionState, mem: &AttentionMemory) -> Result<AttentionCache> {
        let t_len = mem.frames();
        if state.alignment.len() != t_len {
            return Err(Error::Usage(format!(
                "alignment has {} entries but the encoder has {} frames",
                state.alignment.len(),
                t_len
            )));
        }
        let a_dim = self.att_w.rows();
        let mut wz = vec![0.0; a_dim];
        matvec(&self.att_w, &state.z, &mut wz);
        let loc = self.location_features(&state.alignment);
        let mut tanh = loc.matmul_t(&self.att_u);
        let mut scores = vec![0.0; t_len];
        for t in 0..t_len {
            let row = tanh.row_mut(t);
            axpy(1.0, mem.proj.row(t), row);
            axpy(1.0, &wz, row);
            for v in row.iter_mut() {
                *v = v.tanh();
            }
            scores[t] = dot(self.att_g.data(), row);
        }
        log_softmax(&mut scores);
        let alignment: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
        let mut ctx = vec![0.0; mem.h.cols()];
        for (t, &a) in alignment.iter().enumerate() {
            axpy(a, mem.h.row(t), &mut ctx);
        }
        Ok(AttentionCache { loc, tanh, alignment, ctx })
    }

    /// Location-aware attention: returns the context vector and the state
    /// with its alignment replaced by the new one.
    pub fn attention_step(&self, state: &AttentionState, mem: &AttentionMemory) -> Result<(Vec<f64>, AttentionState)> {
        let cache = self.attend(state, mem)?;
        let next = AttentionState { alignment: cache.alignment, z: state.z.clone(), c: state.c.clone() };
        Ok((cache.ctx, next))
    }

    fn cell_input(&self, row: usize, ctx: &[f64]) -> Vec<f64> {
        let mut x = self.embed.row(row).to_vec();
        x.extend_from_slice(ctx);
        x
    }

    fn output_logits(&self, z: &[f64], ctx: &[f64]) -> Vec<f64> {
        let mut o = z.to_vec();
        o.extend_from_slice(ctx);
        self.out.apply(&o)
    }

    /// Advances the recurrent state on `prev_label` and `context`, returning
    /// log-probabilities over `labels ∪ {eos}` (eos last).
    pub fn decoder_step(
        &self,
        state: &AttentionState,
        prev_label: usize,
        context: &[f64],
    ) -> Result<(AttentionState, Vec<f64>)> {
        let row = self.input_row(prev_label)?;
        if context.len() != self.encoder_dim() {
            return Err(Error::Usage(format!(
                "context has {} entries, decoder expects {}",
                context.len(),
                self.encoder_dim()
            )));
        }
        let pre = self.cell.project_input(&self.cell_input(row, context));
        let step = self.cell.step(pre, &state.z, &state.c);
        let mut logp = self.output_logits(&step.h, context);
        log_softmax(&mut logp);
        Ok((AttentionState { alignment: state.alignment.clone(), z: step.h, c: step.c }, logp))
    }

    /// Attention followed by the decoder step.
    pub fn step(
        &self,
        state: &AttentionState,
        prev_label: usize,
        mem: &AttentionMemory,
    ) -> Result<(AttentionState, Vec<f64>)> {
        let (ctx, attended) = self.attention_step(state, mem)?;
        self.decoder_step(&attended, prev_label, &ctx)
    }

    fn output_slot(&self, label: Option<usize>) -> usize {
        label.unwrap_or(self.num_labels())
    }

    /// Teacher-forced cross-entropy of `target` followed by `eos`, each step's
    /// one-hot target smoothed by `smoothing`. Without `grad`, only the loss
    /// is computed. With it, `scale ·` gradients are accumulated into the
    /// decoder gradient and into `d_h` (encoder states).
    pub fn sequence_loss(
        &self,
        h: &Matrix,
        target: &[usize],
        smoothing: f64,
        grad: Option<(f64, &mut AttentionDecoder, &mut Matrix)>,
    ) -> Result<f64> {
        let n = self.num_labels();
        if let Some(&bad) = target.iter().find(|&&l| l >= n) {
            return Err(Error::Usage(format!("target label id {bad} is not a real label")));
        }
        let mem = self.prepare_matrix(h)?;
        let v = self.output_size();
        let mut state = self.initial_state(mem.frames());
        let mut prev = n + 1;
        let mut loss = 0.0;
        let keep = grad.is_some();
        let mut caches = Vec::with_capacity(target.len() + 1);
        for i in 0..=target.len() {
            let gold = self.output_slot(target.get(i).copied());
            let input_row = self.input_row(prev)?;
            let att = self.attend(&state, &mem)?;
            let x = self.cell_input(input_row, &att.ctx);
            let pre = self.cell.project_input(&x);
            let cell = self.cell.step(pre, &state.z, &state.c);
            let mut logp = self.output_logits(&cell.h, &att.ctx);
            log_softmax(&mut logp);
            let q = crate::training::label_smooth(gold, v, smoothing);
            loss -= q.iter().zip(&logp).filter(|(qk, _)| **qk > 0.0).map(|(qk, lk)| qk * lk).sum::<f64>();
            let next = AttentionState { alignment: att.alignment.clone(), z: cell.h.clone(), c: cell.c.clone() };
            if keep {
                let probs = logp
                    .iter()
                    .zip(&q)
                    .map(|(l, qk)| l.exp() - qk)
                    .collect();
                caches.push(StepCache { prev: state, input_row, att, x, cell, probs });
            }
            state = next;
            prev = target.get(i).copied().unwrap_or(n);
        }
        if let Some((scale, g, d_h)) = grad {
            self.backward(&mem, &caches, scale, g, d_h);
        }
        Ok(loss)
    }

    fn backward(&self, mem: &AttentionMemory, caches: &[StepCache], scale: f64, g: &mut AttentionDecoder, d_h: &mut Matrix) {
        let hid = self.hidden();
        let e_dim = self.embed.cols();
        let t_len = mem.frames();
        let mut dz = vec![0.0; hid];
        let mut dc = vec![0.0; hid];
        let mut da = vec![0.0; t_len];
        for sc in caches.iter().rev() {
            let dlogits: Vec<f64> = sc.probs.iter().map(|d| scale * d).collect();
            let mut o = sc.cell.h.clone();
            o.extend_from_slice(&sc.att.ctx);
            outer_acc(1.0, &dlogits, &o, &mut g.out.w);
            axpy(1.0, &dlogits, g.out.b.data_mut());
            let mut d_o = vec![0.0; o.len()];
            matvec_t_acc(&self.out.w, &dlogits, &mut d_o);
            axpy(1.0, &d_o[..hid], &mut dz);
            let mut dctx = d_o[hid..].to_vec();

            let (dpre, dz_prev, dc_prev) = self.cell.step_backward(&sc.cell, &sc.prev.z, &sc.prev.c, &dz, &dc, &mut g.cell);
            outer_acc(1.0, &dpre, &sc.x, &mut g.cell.w_x);
            let mut dx = vec![0.0; sc.x.len()];
            matvec_t_acc(&self.cell.w_x, &dpre, &mut dx);
            axpy(1.0, &dx[..e_dim], g.embed.row_mut(sc.input_row));
            axpy(1.0, &dx[e_dim..], &mut dctx);

            let (dz_att, da_prev) = self.attend_backward(mem, &sc.prev, &sc.att, &dctx, &da, g, d_h);
            dz = dz_prev;
            axpy(1.0, &dz_att, &mut dz);
            dc = dc_prev;
            da = da_prev;
        }
    }

    /// Backpropagates through one attention step given gradients on its
    /// context and output alignment. Returns gradients on the previous `z`
    /// and previous alignment.
    #[allow(clippy::too_many_arguments)]
    fn attend_backward(
        &self,
        mem: &AttentionMemory,
        prev: &AttentionState,
        cache: &AttentionCache,
        dctx: &[f64],
        d_align: &[f64],
        g: &mut AttentionDecoder,
        d_h: &mut Matrix,
    ) -> (Vec<f64>, Vec<f64>) {
        let t_len = mem.frames();
        let a = &cache.alignment;
        let mut da: Vec<f64> = d_align.to_vec();
        for t in 0..t_len {
            da[t] += dot(dctx, mem.h.row(t));
            axpy(a[t], dctx, d_h.row_mut(t));
        }
        let mean: f64 = a.iter().zip(&da).map(|(x, y)| x * y).sum();
        let a_dim = self.att_w.rows();
        let gv = self.att_g.data();
        let mut du = Matrix::zeros(t_len, a_dim);
        let mut du_sum = vec![0.0; a_dim];
        for t in 0..t_len {
            let de = a[t] * (da[t] - mean);
            let th = cache.tanh.row(t);
            axpy(de, th, g.att_g.data_mut());
            let row = du.row_mut(t);
            for j in 0..a_dim {
                row[j] = de * gv[j] * (1.0 - th[j] * th[j]);
            }
            axpy(1.0, row, &mut du_sum);
        }
        outer_acc(1.0, &du_sum, &prev.z, &mut g.att_w);
        axpy(1.0, &du_sum, g.att_b.data_mut());
        let mut dz = vec![0.0; self.hidden()];
        matvec_t_acc(&self.att_w, &du_sum, &mut dz);
        g.att_v.add_tmatmul(&du, &mem.h);
        d_h.add_assign(&du.matmul(&self.att_v));
        g.att_u.add_tmatmul(&du, &cache.loc);
        let dloc = du.matmul(&self.att_u);

        let (channels, width) = self.conv.shape();
        let half = (width / 2) as isize;
        let mut da_prev = vec![0.0; t_len];
        for t in 0..t_len {
            for ch in 0..channels {
                let d = dloc.get(t, ch);
                if d == 0.0 {
                    continue;
                }
                for k in 0..width {
                    let src = t as isize + k as isize - half;
                    if src >= 0 && (src as usize) < t_len {
                        let s = src as usize;
                        let gk = g.conv.get(ch, k);
                        g.conv.set(ch, k, gk + d * prev.alignment[s]);
                        da_prev[s] += d * self.conv.get(ch, k);
                    }
                }
            }
        }
        (dz, da_prev)
    }
}

impl Params for AttentionDecoder {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Matrix)) {
        f(join(prefix, "embed"), &self.embed);
        f(join(prefix, "att_w"), &self.att_w);
        f(join(prefix, "att_v"), &self.att_v);
        f(join(prefix, "att_u"), &self.att_u);
        f(join(prefix, "att_b"), &self.att_b);
        f(join(prefix, "att_g"), &self.att_g);
        f(join(prefix, "conv"), &self.conv);
        self.cell.visit(&join(prefix, "cell"), f);
        self.out.visit(&join(prefix, "out"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Matrix)) {
        f(join(prefix, "embed"), &mut self.embed);
        f(join(prefix, "att_w"), &mut self.att_w);
        f(join(prefix, "att_v"), &mut self.att_v);
        f(join(prefix, "att_u"), &mut self.att_u);
        f(join(prefix, "att_b"), &mut self.att_b);
        f(join(prefix, "att_g"), &mut self.att_g);
        f(join(prefix, "conv"), &mut self.conv);
        self.cell.visit_mut(&join(prefix, "cell"), f);
        self.out.visit_mut(&join(prefix, "out"), f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{fd_gradient, log_sum_exp, max_rel_error, seeded_rng, SeededRng};

    fn dims() -> DecoderDims {
        DecoderDims { labels: 3, encoder: 4, embed: 3, hidden: 5, attention: 4, conv_channels: 2, conv_width: 3 }
    }

    fn setup(seed: u64, t_len: usize) -> (AttentionDecoder, Matrix, SeededRng) {
        let mut rng = seeded_rng(seed);
        let mut dec = AttentionDecoder::new(dims(), &mut rng);
        // Larger weights so gradients are not all vanishingly small.
        dec.visit_mut("", &mut |_, m| m.scale(5.0));
        let h = Matrix::uniform(t_len, 4, 1.0, &mut rng);
        (dec, h, rng)
    }

    #[test]
    fn alignment_is_a_distribution() {
        for seed in 0..10 {
            let (dec, h, mut rng) = setup(seed, 6);
            let mem = dec.prepare_matrix(&h).unwrap();
            let mut state = dec.initial_state(6);
            state.z = Matrix::uniform(1, 5, 1.0, &mut rng).into_data();
            for _ in 0..3 {
                let (_, next) = dec.attention_step(&state, &mem).unwrap();
                assert!(next.alignment.iter().all(|&a| a >= 0.0));
                assert!((next.alignment.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                state = next;
            }
        }
    }

    #[test]
    fn zero_scores_give_uniform_alignment_and_mean_context() {
        let (mut dec, h, _) = setup(3, 5);
        dec.att_g.fill(0.0);
        let mem = dec.prepare_matrix(&h).unwrap();
        let (ctx, next) = dec.attention_step(&dec.initial_state(5), &mem).unwrap();
        for a in &next.alignment {
            assert!((a - 0.2).abs() < 1e-15);
        }
        for (j, c) in ctx.iter().enumerate() {
            let mean = (0..5).map(|t| h.get(t, j)).sum::<f64>() / 5.0;
            assert!((c - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn decoder_outputs_are_normalized() {
        for seed in 0..10 {
            let (dec, h, _) = setup(seed, 4);
            let mem = dec.prepare_matrix(&h).unwrap();
            let mut state = dec.initial_state(4);
            let mut prev = 4;
            for label in [0, 2, 1] {
                let (next, logp) = dec.step(&state, prev, &mem).unwrap();
                assert_eq!(logp.len(), 4);
                assert!(log_sum_exp(&logp).unwrap().abs() < 1e-9);
                state = next;
                prev = label;
            }
        }
    }

    #[test]
    fn zeroed_output_layer_is_uniform() {
        let (mut dec, h, _) = setup(1, 4);
        dec.out.zero();
        let mem = dec.prepare_matrix(&h).unwrap();
        let (_, logp) = dec.step(&dec.initial_state(4), 4, &mem).unwrap();
        for l in logp {
            assert!((l - (0.25f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn blank_and_eos_cannot_condition() {
        let (dec, h, _) = setup(1, 4);
        let mem = dec.prepare_matrix(&h).unwrap();
        let s = dec.initial_state(4);
        assert!(matches!(dec.step(&s, 3, &mem), Err(Error::Usage(_))));
        assert!(matches!(dec.step(&s, 5, &mem), Err(Error::Usage(_))));
        assert!(dec.step(&s, 4, &mem).is_ok());
    }

    #[test]
    fn context_sum_gradient_wrt_encoder_states() {
        for seed in 0..10 {
            let (dec, h, mut rng) = setup(50 + seed, 6);
            let mut state = dec.initial_state(6);
            state.z = Matrix::uniform(1, 5, 1.0, &mut rng).into_data();
            let raw: Vec<f64> = (0..6).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            state.alignment = raw.iter().map(|r| r / total).collect();

            let mem = dec.prepare_matrix(&h).unwrap();
            let cache = dec.attend(&state, &mem).unwrap();
            let mut g = dec.zeros_like();
            let mut d_h = Matrix::zeros(6, 4);
            let (dz, da_prev) = dec.attend_backward(&mem, &state, &cache, &[1.0; 4], &[0.0; 6], &mut g, &mut d_h);

            let ctx_sum = |dec: &AttentionDecoder, h: &Matrix, s: &AttentionState| -> f64 {
                let mem = dec.prepare_matrix(h).unwrap();
                dec.attention_step(s, &mem).unwrap().0.iter().sum()
            };
            let num_h = fd_gradient(
                |v| ctx_sum(&dec, &Matrix::from_vec(6, 4, v.to_vec()).unwrap(), &state),
                h.data(),
                1e-5,
            )
            .unwrap();
            assert!(max_rel_error(d_h.data(), &num_h) < 1e-4, "seed {seed}: H");
            let num_p = fd_gradient(
                |p| {
                    let mut d = dec.clone();
                    d.unflatten(p);
                    ctx_sum(&d, &h, &state)
                },
                &dec.flatten(),
                1e-5,
            )
            .unwrap();
            assert!(max_rel_error(&g.flatten(), &num_p) < 1e-4, "seed {seed}: params");
            let num_z = fd_gradient(
                |z| ctx_sum(&dec, &h, &AttentionState { z: z.to_vec(), ..state.clone() }),
                &state.z,
                1e-5,
            )
            .unwrap();
            assert!(max_rel_error(&dz, &num_z) < 1e-4, "seed {seed}: z");
            let num_a = fd_gradient(
                |a| ctx_sum(&dec, &h, &AttentionState { alignment: a.to_vec(), ..state.clone() }),
                &state.alignment,
                1e-5,
            )
            .unwrap();
            assert!(max_rel_error(&da_prev, &num_a) < 1e-4, "seed {seed}: alignment");
        }
    }

    #[test]
    fn teacher_forced_gradient_matches_finite_differences() {
        for seed in 0..10 {
            let (dec, h, _) = setup(100 + seed, 5);
            let target = [0, 2, 2, 1];
            let smoothing = if seed % 2 == 0 { 0.0 } else { 0.1 };
            let mut g = dec.zeros_like();
            let mut d_h = Matrix::zeros(5, 4);
            let loss = dec.sequence_loss(&h, &target, smoothing, Some((1.0, &mut g, &mut d_h))).unwrap();
            assert_eq!(loss, dec.sequence_loss(&h, &target, smoothing, None).unwrap());
            let num_p = fd_gradient(
                |p| {
                    let mut d = dec.clone();
                    d.unflatten(p);
                    d.sequence_loss(&h, &target, smoothing, None).unwrap()
                },
                &dec.flatten(),
                1e-5,
            )
            .unwrap();
            assert!(max_rel_error(&g.flatten(), &num_p) < 1e-4, "seed {seed}: params");
            let num_h = fd_gradient(
                |v| dec.sequence_loss(&Matrix::from_vec(5, 4, v.to_vec()).unwrap(), &target, smoothing, None).unwrap(),
                h.data(),
                1e-5,
            )
            .unwrap();
            assert!(max_rel_error(d_h.data(), &num_h) < 1e-4, "seed {seed}: H");
        }
    }

    #[test]
    fn teacher_forced_loss_is_sum_of_step_log_probs() {
        let (dec, h, _) = setup(7, 5);
        let target = [1, 0];
        let mem = dec.prepare_matrix(&h).unwrap();
        let mut state = dec.initial_state(5);
        let mut prev = 4;
        let mut total = 0.0;
        for gold in [1, 0, 3] {
            let (next, logp) = dec.step(&state, prev, &mem).unwrap();
            total -= logp[gold];
            state = next;
            prev = if gold == 3 { 0 } else { gold };
        }
        let loss = dec.sequence_loss(&h, &target, 0.0, None).unwrap();
        assert!((loss - total).abs() < 1e-12);
    }
}
