use rand::Rng;

use crate::numerics::{axpy, matvec, matvec_t_acc, outer_acc, Matrix};

use super::params::{join, Params};

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// LSTM cell with gates stacked as `[input, forget, candidate, output]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Lstm {
    pub w_x: Matrix,
    pub w_h: Matrix,
    pub b: Matrix,
}

/// Activations of one cell step, kept for backpropagation.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmStep {
    /// Post-nonlinearity gates, `4h`.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

/// Per-timestep activations of a whole-sequence pass.
#[derive(Clone, Debug)]
pub struct LstmSeqCache {
    steps: Vec<LstmStep>,
    reverse: bool,
}

impl Lstm {
    /// Uniform(−0.1, 0.1) weights, forget-gate bias +1.
    pub fn new<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let w_x = Matrix::uniform(4 * hidden, input, 0.1, rng);
        let w_h = Matrix::uniform(4 * hidden, hidden, 0.1, rng);
        let mut b = Matrix::uniform(1, 4 * hidden, 0.1, rng);
        for v in &mut b.data_mut()[hidden..2 * hidden] {
            *v += 1.0;
        }
        Lstm { w_x, w_h, b }
    }

    pub fn hidden(&self) -> usize {
        self.w_h.cols()
    }

    pub fn input(&self) -> usize {
        self.w_x.cols()
    }

    /// Input projection plus bias, `w_x·x + b`.
    pub fn project_input(&self, x: &[f64]) -> Vec<f64> {
        let mut pre = vec![0.0; 4 * self.hidden()];
        matvec(&self.w_x, x, &mut pre);
        axpy(1.0, self.b.data(), &mut pre);
        pre
    }

    /// One step from a precomputed input projection.
    pub fn step(&self, mut pre: Vec<f64>, h_prev: &[f64], c_prev: &[f64]) -> LstmStep {
        let h = self.hidden();
        let mut rec = vec![0.0; 4 * h];
        matvec(&self.w_h, h_prev, &mut rec);
        axpy(1.0, &rec, &mut pre);
        for v in &mut pre[..2 * h] {
            *v = sigmoid(*v);
        }
        for v in &mut pre[2 * h..3 * h] {
            *v = v.tanh();
        }
        for v in &mut pre[3 * h..] {
            *v = sigmoid(*v);
        }
        let mut c = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        let mut out = vec![0.0; h];
        for j in 0..h {
            c[j] = pre[h + j] * c_prev[j] + pre[j] * pre[2 * h + j];
            tanh_c[j] = c[j].tanh();
            out[j] = pre[3 * h + j] * tanh_c[j];
        }
        LstmStep { gates: pre, c, tanh_c, h: out }
    }

    /// Backpropagates one step. Accumulates `w_h`/`b` gradients and returns
    /// `(d_pre, dh_prev, dc_prev)`; the caller owns the `w_x` term since it
    /// knows the step input.
    pub fn step_backward(
        &self,
        step: &LstmStep,
        h_prev: &[f64],
        c_prev: &[f64],
        dh: &[f64],
        dc_next: &[f64],
        grad: &mut Lstm,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let h = self.hidden();
        let g = &step.gates;
        let mut dpre = vec![0.0; 4 * h];
        let mut dc_prev = vec![0.0; h];
        for j in 0..h {
            let (i, f, cand, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
            let tc = step.tanh_c[j];
            let d_o = dh[j] * tc;
            let dc = dc_next[j] + dh[j] * o * (1.0 - tc * tc);
            dpre[j] = dc * cand * i * (1.0 - i);
            dpre[h + j] = dc * c_prev[j] * f * (1.0 - f);
            dpre[2 * h + j] = dc * i * (1.0 - cand * cand);
            dpre[3 * h + j] = d_o * o * (1.0 - o);
            dc_prev[j] = dc * f;
        }
        outer_acc(1.0, &dpre, h_prev, &mut grad.w_h);
        axpy(1.0, &dpre, grad.b.data_mut());
        let mut dh_prev = vec![0.0; h];
        matvec_t_acc(&self.w_h, &dpre, &mut dh_prev);
        (dpre, dh_prev, dc_prev)
    }

    /// Runs over every row of `x`, right to left when `reverse`. Row `t` of
    /// the output is the hidden state after consuming row `t`.
    pub fn forward_seq(&self, x: &Matrix, reverse: bool) -> (Matrix, LstmSeqCache) {
        let t_len = x.rows();
        let h = self.hidden();
        let proj = x.matmul_t(&self.w_x);
        let mut out = Matrix::zeros(t_len, h);
        let mut steps: Vec<LstmStep> = Vec::with_capacity(t_len);
        let zeros = vec![0.0; h];
        for k in 0..t_len {
            let t = if reverse { t_len - 1 - k } else { k };
            let mut pre = proj.row(t).to_vec();
            axpy(1.0, self.b.data(), &mut pre);
            let (h_prev, c_prev) = match steps.last() {
                Some(s) => (&s.h[..], &s.c[..]),
                None => (&zeros[..], &zeros[..]),
            };
            let s = self.step(pre, h_prev, c_prev);
            out.row_mut(t).copy_from_slice(&s.h);
            steps.push(s);
        }
        (out, LstmSeqCache { steps, reverse })
    }

    /// Backpropagates `d_out` (same shape as the forward output) and returns `dX`.
    pub fn backward_seq(&self, x: &Matrix, cache: &LstmSeqCache, d_out: &Matrix, grad: &mut Lstm) -> Matrix {
        let t_len = x.rows();
        let h = self.hidden();
        let zeros = vec![0.0; h];
        let mut dpre_all = Matrix::zeros(t_len, 4 * h);
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        for k in (0..t_len).rev() {
            let t = if cache.reverse { t_len - 1 - k } else { k };
            let step = &cache.steps[k];
            let (h_prev, c_prev) = if k == 0 {
                (&zeros[..], &zeros[..])
            } else {
                (&cache.steps[k - 1].h[..], &cache.steps[k - 1].c[..])
            };
            let mut dh = d_out.row(t).to_vec();
            axpy(1.0, &dh_next, &mut dh);
            let (dpre, dh_prev, dc_prev) = self.step_backward(step, h_prev, c_prev, &dh, &dc_next, grad);
            dpre_all.row_mut(t).copy_from_slice(&dpre);
            dh_next = dh_prev;
            dc_next = dc_prev;
        }
        grad.w_x.add_tmatmul(&dpre_all, x);
        dpre_all.matmul(&self.w_x)
    }
}

impl Params for Lstm {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Matrix)) {
        f(join(prefix, "w_x"), &self.w_x);
        f(join(prefix, "w_h"), &self.w_h);
        f(join(prefix, "b"), &self.b);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Matrix)) {
        f(join(prefix, "w_x"), &mut self.w_x);
        f(join(prefix, "w_h"), &mut self.w_h);
        f(join(prefix, "b"), &mut self.b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{dot, fd_gradient, max_rel_error, seeded_rng};

    fn weighted_sum(m: &Matrix, w: &Matrix) -> f64 {
        dot(m.data(), w.data())
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let mut rng = seeded_rng(1);
        let l = Lstm::new(3, 4, &mut rng);
        for v in &l.b.data()[4..8] {
            assert!((v - 1.0).abs() <= 0.1);
        }
    }

    #[test]
    fn sequence_gradient_matches_finite_differences() {
        for seed in 0..10 {
            let mut rng = seeded_rng(seed);
            let lstm = Lstm::new(3, 4, &mut rng);
            let x = Matrix::uniform(5, 3, 1.0, &mut rng);
            let probe = Matrix::uniform(5, 4, 1.0, &mut rng);
            for reverse in [false, true] {
                let (_, cache) = lstm.forward_seq(&x, reverse);
                let mut grad = lstm.zeros_like();
                let dx = lstm.backward_seq(&x, &cache, &probe, &mut grad);
                let numeric = fd_gradient(
                    |p| {
                        let mut l = lstm.clone();
                        l.unflatten(p);
                        weighted_sum(&l.forward_seq(&x, reverse).0, &probe)
                    },
                    &lstm.flatten(),
                    1e-5,
                )
                .unwrap();
                assert!(max_rel_error(&grad.flatten(), &numeric) < 1e-4);
                let numeric_x = fd_gradient(
                    |v| {
                        let xm = Matrix::from_vec(5, 3, v.to_vec()).unwrap();
                        weighted_sum(&lstm.forward_seq(&xm, reverse).0, &probe)
                    },
                    x.data(),
                    1e-5,
                )
                .unwrap();
                assert!(max_rel_error(dx.data(), &numeric_x) < 1e-4);
            }
        }
    }
}
