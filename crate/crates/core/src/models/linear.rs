use rand::Rng;

use crate::numerics::{axpy, matvec, Matrix};

use super::params::{join, Params};

/// Affine map `y = W·x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub w: Matrix,
    pub b: Matrix,
}

impl Linear {
    pub fn new<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        Linear { w: Matrix::uniform(output, input, 0.1, rng), b: Matrix::uniform(1, output, 0.1, rng) }
    }

    pub fn input(&self) -> usize {
        self.w.cols()
    }

    pub fn output(&self) -> usize {
        self.w.rows()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.output()];
        matvec(&self.w, x, &mut y);
        axpy(1.0, self.b.data(), &mut y);
        y
    }

    /// Row-wise application to a `T × input` matrix.
    pub fn apply_rows(&self, x: &Matrix) -> Matrix {
        let mut y = x.matmul_t(&self.w);
        for t in 0..y.rows() {
            axpy(1.0, self.b.data(), y.row_mut(t));
        }
        y
    }

    /// Accumulates parameter gradients for `dy` (rows aligned with `x`) and returns `dx`.
    pub fn backward_rows(&self, x: &Matrix, dy: &Matrix, grad: &mut Linear) -> Matrix {
        grad.w.add_tmatmul(dy, x);
        for t in 0..dy.rows() {
            axpy(1.0, dy.row(t), grad.b.data_mut());
        }
        dy.matmul(&self.w)
    }
}

impl Params for Linear {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Matrix)) {
        f(join(prefix, "w"), &self.w);
        f(join(prefix, "b"), &self.b);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Matrix)) {
        f(join(prefix, "w"), &mut self.w);
        f(join(prefix, "b"), &mut self.b);
    }
}
