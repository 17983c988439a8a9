//! Binary feature container.
//!
//! ```text
//! offset  size  field
//! 0       2     magic  b"FQ"
//! 2       2     version (u16 LE, currently 1)
//! 4       4     T, frame count (u32 LE)
//! 8       4     D, frame width (u32 LE)
//! 12      4     fps (f32 LE)
//! 16      8·T·D frames, row-major f64 LE
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

use super::{FeatureSequence, StreamKind};

pub const FEATURE_MAGIC: [u8; 2] = *b"FQ";
pub const FEATURE_VERSION: u16 = 1;

pub fn encode_features(seq: &FeatureSequence) -> Vec<u8> {
    let (t, d) = seq.frames().shape();
    let mut out = Vec::with_capacity(16 + 8 * t * d);
    out.extend_from_slice(&FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&(t as u32).to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&(seq.fps() as f32).to_le_bytes());
    for v in seq.frames().data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_features(bytes: &[u8], kind: StreamKind) -> Result<FeatureSequence> {
    if bytes.len() < 16 || bytes[..2] != FEATURE_MAGIC {
        return Err(Error::Format("not a feature file (bad magic)".into()));
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let version = u16_at(2);
    if version != FEATURE_VERSION {
        return Err(Error::Format(format!("unsupported feature file version {version}")));
    }
    let (t, d) = (u32_at(4) as usize, u32_at(8) as usize);
    let fps = f32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as f64;
    let body = &bytes[16..];
    if body.len() != 8 * t * d {
        return Err(Error::Format(format!("expected {} payload bytes, found {}", 8 * t * d, body.len())));
    }
    let mut m = Matrix::zeros(t, d);
    for (slot, chunk) in m.data_mut().iter_mut().zip(body.chunks_exact(8)) {
        *slot = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
    }
    FeatureSequence::new(m, fps, kind)
}

pub fn write_feature_file(path: impl AsRef<Path>, seq: &FeatureSequence) -> Result<()> {
    fs::write(path, encode_features(seq))?;
    Ok(())
}

pub fn read_feature_file(path: impl AsRef<Path>, kind: StreamKind) -> Result<FeatureSequence> {
    decode_features(&fs::read(path)?, kind)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn header_is_sixteen_bytes() {
        let m = Matrix::from_rows(&[vec![1.5, -2.0]]).unwrap();
        let seq = FeatureSequence::new(m, 50.0, StreamKind::Audio).unwrap();
        let bytes = encode_features(&seq);
        assert_eq!(bytes.len(), 16 + 16);
        assert_eq!(&bytes[..2], b"FQ");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &50.0f32.to_le_bytes());
        assert_eq!(&bytes[16..24], &1.5f64.to_le_bytes());
    }

    #[test]
    fn truncated_payload_is_a_format_error() {
        let seq = FeatureSequence::new(Matrix::zeros(3, 2), 25.0, StreamKind::Visual).unwrap();
        let bytes = encode_features(&seq);
        assert!(matches!(decode_features(&bytes[..bytes.len() - 1], StreamKind::Visual), Err(Error::Format(_))));
        assert!(matches!(decode_features(b"XX", StreamKind::Visual), Err(Error::Format(_))));
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(t in 0usize..6, d in 1usize..5, seed in any::<u64>()) {
            let mut rng = crate::numerics::seeded_rng(seed);
            let m = Matrix::uniform(t, d, 50.0, &mut rng);
            let seq = FeatureSequence::new(m, 100.0, StreamKind::Audio).unwrap();
            let back = decode_features(&encode_features(&seq), StreamKind::Audio).unwrap();
            prop_assert_eq!(back, seq);
        }
    }
}
