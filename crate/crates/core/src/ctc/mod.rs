//! Connectionist temporal classification: the training loss with its analytic
//! gradient, and label-synchronous prefix scoring for joint decoding.

mod lattice;
mod loss;
mod prefix;

pub use lattice::LogProbLattice;
pub use loss::{ctc_loss, ctc_loss_from_logits, required_frames, CtcLoss};
pub use prefix::{ctc_prefix_init, CtcPrefixState};
