use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{axpy, log_softmax, matvec_t_acc, outer_acc, Matrix};

use super::linear::Linear;
use super::lstm::{Lstm, LstmStep};
use super::params::{join, Params};

/// Character-level recurrent LM over `labels ∪ {eos}`, conditioned on `sos`
/// for the first prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct RnnLm {
    /// `(labels + 1) × embed`; the last row is `sos`.
    pub embed: Matrix,
    pub cell: Lstm,
    pub out: Linear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl RnnLm {
    pub fn new<R: Rng>(labels: usize, embed: usize, hidden: usize, rng: &mut R) -> Self {
        RnnLm {
            embed: Matrix::uniform(labels + 1, embed, 0.1, rng),
            cell: Lstm::new(embed, hidden, rng),
            out: Linear::new(hidden, labels + 1, rng),
        }
    }

    pub fn num_labels(&self) -> usize {
        self.embed.rows() - 1
    }

    pub fn initial_state(&self) -> LmState {
        let h = self.cell.hidden();
        LmState { h: vec![0.0; h], c: vec![0.0; h] }
    }

    fn input_row(&self, label: usize) -> Result<usize> {
        let n = self.num_labels();
        match label {
            l if l < n => Ok(l),
            l if l == n + 1 => Ok(n),
            l if l == n => Err(Error::Usage("blank cannot condition the language model".into())),
            l => Err(Error::Usage(format!("label id {l} cannot condition the language model"))),
        }
    }

    fn advance(&self, state: &LmState, row: usize) -> (LstmStep, Vec<f64>) {
        let pre = self.cell.project_input(self.embed.row(row));
        let step = self.cell.step(pre, &state.h, &state.c);
        let mut logp = self.out.apply(&step.h);
        log_softmax(&mut logp);
        (step, logp)
    }

    /// Consumes `label` (a real label or `sos`) and returns the next-symbol
    /// distribution, eos last.
    pub fn lm_step(&self, state: &LmState, label: usize) -> Result<(LmState, Vec<f64>)> {
        let (step, logp) = self.advance(state, self.input_row(label)?);
        Ok((LmState { h: step.h, c: step.c }, logp))
    }

    /// `−log p(labels, eos)`; accumulates `scale ·` gradients when asked.
    pub fn sequence_nll(&self, labels: &[usize], grad: Option<(f64, &mut RnnLm)>) -> Result<f64> {
        let n = self.num_labels();
        if let Some(&bad) = labels.iter().find(|&&l| l >= n) {
            return Err(Error::Usage(format!("label id {bad} is not a real label")));
        }
        let mut state = self.initial_state();
        let mut rows = Vec::with_capacity(labels.len() + 1);
        rows.push(n);
        rows.extend_from_slice(labels);
        let mut nll = 0.0;
        let mut caches = Vec::with_capacity(rows.len());
        for (i, &row) in rows.iter().enumerate() {
            let gold = labels.get(i).copied().unwrap_or(n);
            let (step, logp) = self.advance(&state, row);
            nll -= logp[gold];
            let prev = std::mem::replace(&mut state, LmState { h: step.h.clone(), c: step.c.clone() });
            if grad.is_some() {
                let mut d = logp.iter().map(|l| l.exp()).collect::<Vec<_>>();
                d[gold] -= 1.0;
                caches.push((prev, row, step, d));
            }
        }
        if let Some((scale, g)) = grad {
            let hid = self.cell.hidden();
            let mut dh = vec![0.0; hid];
            let mut dc = vec![0.0; hid];
            for (prev, row, step, d) in caches.iter().rev() {
                let dl: Vec<f64> = d.iter().map(|v| scale * v).collect();
                outer_acc(1.0, &dl, &step.h, &mut g.out.w);
                axpy(1.0, &dl, g.out.b.data_mut());
                matvec_t_acc(&self.out.w, &dl, &mut dh);
                let (dpre, dh_prev, dc_prev) = self.cell.step_backward(step, &prev.h, &prev.c, &dh, &dc, &mut g.cell);
                outer_acc(1.0, &dpre, self.embed.row(*row), &mut g.cell.w_x);
                matvec_t_acc(&self.cell.w_x, &dpre, g.embed.row_mut(*row));
                dh = dh_prev;
                dc = dc_prev;
            }
        }
        Ok(nll)
    }
}

impl Params for RnnLm {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Matrix)) {
        f(join(prefix, "embed"), &self.embed);
        self.cell.visit(&join(prefix, "cell"), f);
        self.out.visit(&join(prefix, "out"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Matrix)) {
        f(join(prefix, "embed"), &mut self.embed);
        self.cell.visit_mut(&join(prefix, "cell"), f);
        self.out.visit_mut(&join(prefix, "out"), f);
    }
}
