use crate::error::{Error, Result};
use crate::numerics::Matrix;

use super::FeatureSequence;

/// Changes the frame rate of a sequence.
///
/// Upsampling interpolates linearly on the frame-time axis (frame `j` of the
/// output sits at `j / target_fps` seconds) and clamps past the last input
/// frame. Downsampling requires an integer ratio and keeps every `ratio`-th
/// frame starting at frame 0.
pub fn resample_frames(seq: &FeatureSequence, target_fps: f64) -> Result<FeatureSequence> {
    if !(target_fps > 0.0) {
        return Err(Error::Usage(format!("target fps must be positive, got {target_fps}")));
    }
    let fps = seq.fps();
    if target_fps == fps {
        return Ok(seq.clone());
    }
    let (t, d) = seq.frames().shape();
    let src = seq.frames();
    let out = if target_fps > fps {
        let out_len = (t as f64 * target_fps / fps).ceil() as usize;
        let mut out = Matrix::zeros(out_len, d);
        for j in 0..out_len {
            let pos = j as f64 * fps / target_fps;
            let i0 = (pos.floor() as usize).min(t - 1);
            let i1 = (i0 + 1).min(t - 1);
            let frac = if i0 == i1 { 0.0 } else { pos - i0 as f64 };
            let row = out.row_mut(j);
            for (k, v) in row.iter_mut().enumerate() {
                let a = src.get(i0, k);
                *v = if frac == 0.0 { a } else { a + frac * (src.get(i1, k) - a) };
            }
        }
        out
    } else {
        let ratio = fps / target_fps;
        let step = ratio.round();
        if (ratio - step).abs() > 1e-9 {
            return Err(Error::Usage(format!(
                "cannot decimate {fps} fps to {target_fps} fps: ratio {ratio} is not an integer"
            )));
        }
        let step = step as usize;
        let out_len = t.div_ceil(step);
        let mut out = Matrix::zeros(out_len, d);
        for j in 0..out_len {
            out.row_mut(j).copy_from_slice(src.row(j * step));
        }
        out
    };
    FeatureSequence::new(out, target_fps, seq.kind())
}

/// Brings two streams at the same rate to a common length by dropping the
/// trailing frames of the longer one.
pub fn align_streams(a: &FeatureSequence, b: &FeatureSequence) -> Result<(FeatureSequence, FeatureSequence)> {
    if a.fps() != b.fps() {
        return Err(Error::Usage(format!("streams run at {} and {} fps", a.fps(), b.fps())));
    }
    let len = a.len().min(b.len());
    Ok((a.truncated(len), b.truncated(len)))
}
