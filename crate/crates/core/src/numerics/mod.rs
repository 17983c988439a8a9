//! Log-domain arithmetic, dense matrices, seeded randomness and finite-difference
//! gradient checking shared by the rest of the crate.

mod gradcheck;
mod logprob;
mod matrix;
mod rng;

pub use gradcheck::{fd_gradient, max_rel_error, rel_error};
pub use logprob::{log_add, log_softmax, log_sum_exp, LogProb, NEG_INF};
pub use matrix::Matrix;
pub use rng::{derive_seed, seeded_rng, SeededRng, RNG_ALGORITHM};

pub(crate) use matrix::{axpy, dot, matvec, matvec_t_acc, outer_acc};
