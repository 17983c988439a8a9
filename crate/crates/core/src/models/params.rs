use crate::numerics::Matrix;

/// A bundle of named weight tensors. Gradients use the same type as the
/// parameters they belong to, so optimizers and checkpoints can walk both in
/// lock-step.
pub trait Params {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Matrix));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Matrix));

    fn named_tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = Vec::new();
        self.visit("", &mut |name, m| out.push((name, m)));
        out
    }

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, m| n += m.data().len());
        n
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit("", &mut |_, m| out.extend_from_slice(m.data()));
        out
    }

    fn unflatten(&mut self, values: &[f64]) {
        let mut at = 0;
        self.visit_mut("", &mut |_, m| {
            let n = m.data().len();
            m.data_mut().copy_from_slice(&values[at..at + n]);
            at += n;
        });
        assert_eq!(at, values.len(), "parameter count mismatch");
    }

    fn zero(&mut self) {
        self.visit_mut("", &mut |_, m| m.fill(0.0));
    }

    fn zeros_like(&self) -> Self
    where
        Self: Clone + Sized,
    {
        let mut z = self.clone();
        z.zero();
        z
    }

    /// `self += k · other`, tensor by tensor.
    fn add_scaled(&mut self, k: f64, other: &Self)
    where
        Self: Sized,
    {
        let flat = other.flatten();
        let mut at = 0;
        self.visit_mut("", &mut |_, m| {
            for v in m.data_mut() {
                *v += k * flat[at];
                at += 1;
            }
        });
    }

    fn sq_norm(&self) -> f64 {
        let mut s = 0.0;
        self.visit("", &mut |_, m| s += m.sq_norm());
        s
    }

    fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit("", &mut |_, m| ok &= m.is_finite());
        ok
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}
