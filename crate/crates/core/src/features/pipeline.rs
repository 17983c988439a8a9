use crate::error::Result;

use super::{align_streams, log_mel, resample_frames, FeatureSequence, MelConfig, Waveform};

/// Frame rate every model runs at. Audio is decimated from 100 fps, video
/// interpolated up from 25 fps.
pub const MODEL_FPS: f64 = 50.0;

/// Model-ready audio and visual streams: same rate, same length, each
/// normalized per utterance and dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamPair {
    pub audio: FeatureSequence,
    pub visual: FeatureSequence,
}

pub fn model_streams(audio: &Waveform, visual: &FeatureSequence, mel: &MelConfig) -> Result<StreamPair> {
    let a = resample_frames(&log_mel(audio, mel)?, MODEL_FPS)?;
    let v = resample_frames(visual, MODEL_FPS)?;
    let (a, v) = align_streams(&a, &v)?;
    Ok(StreamPair { audio: a.normalized(), visual: v.normalized() })
}
