//! Finite-difference check of the hand-written BLSTM backward pass, for the
//! weights and for the input.

use avsr::models::{BlstmStack, Params};
use avsr::numerics::{fd_gradient, max_rel_error, seeded_rng, Matrix};

/// Scalar probe: a fixed random projection of the encoder output.
fn probe(out: &Matrix, w: &Matrix) -> f64 {
    out.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
}

fn main() -> avsr::error::Result<()> {
    let mut rng = seeded_rng(3);
    let stack = BlstmStack::new(4, 5, 2, &mut rng);
    let x = Matrix::uniform(6, 4, 1.0, &mut rng);
    let (out, cache) = stack.forward(&x);
    let w = Matrix::uniform(out.rows(), out.cols(), 1.0, &mut rng);

    // d(probe)/d(out) is w itself
    let mut grad = stack.zeros_like();
    let dx = stack.backward(&cache, &w, &mut grad);

    let theta = stack.flatten();
    let numeric = fd_gradient(
        |p| {
            let mut s = stack.clone();
            s.unflatten(p);
            probe(&s.forward(&x).0, &w)
        },
        &theta,
        1e-5,
    )?;
    println!("{} weights: max rel err {:.2e}", theta.len(), max_rel_error(&grad.flatten(), &numeric));

    let numeric_x = fd_gradient(
        |v| probe(&stack.forward(&Matrix::from_vec(6, 4, v.to_vec()).unwrap()).0, &w),
        x.data(),
        1e-5,
    )?;
    println!("{} inputs: max rel err {:.2e}", x.data().len(), max_rel_error(dx.data(), &numeric_x));
    Ok(())
}
