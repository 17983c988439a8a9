mod alphabet;
mod attention;
mod checkpoint;
mod encoder;
mod hybrid;
mod linear;
mod lm;
mod lstm;
mod params;

pub use alphabet::Alphabet;
pub use attention::{AttentionDecoder, AttentionMemory, AttentionState, DecoderDims};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use encoder::{
    blstm_encode, early_fusion_encode, BlstmCache, BlstmLayer, BlstmStack, EarlyFusionCache, EarlyFusionEncoder,
    Encoder, EncoderCache, EncoderStates, ModelInput,
};
pub use hybrid::{HybridModel, LanguageModel, LmConfig, Modality, ModelConfig, UtteranceLoss};
pub use linear::Linear;
pub use lm::{LmState, RnnLm};
pub use lstm::{Lstm, LstmSeqCache, LstmStep};
pub use params::Params;
