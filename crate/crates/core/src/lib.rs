pub mod ctc;
pub mod decoder;
pub mod error;
pub mod features;
pub mod harness;
pub mod lm_corpus;
pub mod models;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
