//! Binary tensor files.
//!
//! Layout, all little-endian:
//!
//! | bytes        | content                    |
//! |--------------|----------------------------|
//! | 4            | magic `DST1`               |
//! | 4            | `ndim` as `u32`            |
//! | 8 · ndim     | extents as `u64`           |
//! | 4 · ∏ dims   | row-major `f32` payload    |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"DST1";

fn parse_err(offset: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        offset: offset as u64,
        msg: msg.into(),
    }
}

pub fn encode(t: &Tensor<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * t.ndim() + 4 * t.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
    for &d in t.dims() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Tensor<f32>> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(parse_err(
            0,
            format!(
                "bad magic {:?}, expected \"DST1\"",
                String::from_utf8_lossy(&bytes[..bytes.len().min(4)])
            ),
        ));
    }
    let ndim_bytes = bytes
        .get(4..8)
        .ok_or_else(|| parse_err(4, "truncated before the dimension count"))?;
    let ndim = u32::from_le_bytes(ndim_bytes.try_into().unwrap()) as usize;
    let mut dims = Vec::with_capacity(ndim.min(64));
    let mut count: usize = 1;
    for i in 0..ndim {
        let off = 8 + 8 * i;
        let raw = bytes
            .get(off..off + 8)
            .ok_or_else(|| parse_err(off, format!("truncated in extent {i} of {ndim}")))?;
        let d = u64::from_le_bytes(raw.try_into().unwrap());
        let d = usize::try_from(d)
            .map_err(|_| parse_err(off, format!("extent {d} does not fit in memory")))?;
        count = count
            .checked_mul(d)
            .filter(|c| c.checked_mul(4).is_some())
            .ok_or_else(|| parse_err(off, "element count overflows"))?;
        dims.push(d);
    }
    let start = 8 + 8 * ndim;
    let payload = &bytes[start..];
    let expected = count * 4;
    if payload.len() != expected {
        return Err(parse_err(
            start,
            format!(
                "payload has {} bytes, expected {expected} for dims {dims:?}",
                payload.len()
            ),
        ));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Tensor::new(&dims, data)
}

pub fn write_tensor(path: &Path, t: &Tensor<f32>) -> Result<()> {
    fs::write(path, encode(t)).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: &Path) -> Result<Tensor<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let t = Tensor::new(&[2], vec![1.0f32, -0.5]).unwrap();
        let b = encode(&t);
        assert_eq!(&b[..4], b"DST1");
        assert_eq!(&b[4..8], &1u32.to_le_bytes());
        assert_eq!(&b[8..16], &2u64.to_le_bytes());
        assert_eq!(&b[16..20], &1.0f32.to_le_bytes());
        assert_eq!(b.len(), 24);
    }

    #[test]
    fn bad_magic_at_offset_zero() {
        let mut b = encode(&Tensor::zeros(&[1]));
        b[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode(&b), Err(Error::Parse { offset: 0, .. })));
    }

    #[test]
    fn short_payload_names_lengths() {
        let mut b = encode(&Tensor::zeros(&[3, 5, 7]));
        b.pop();
        match decode(&b) {
            Err(Error::Parse { offset, msg }) => {
                assert_eq!(offset, 8 + 24);
                assert!(msg.contains("419") && msg.contains("420"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truncated_header_and_overflow() {
        let b = encode(&Tensor::zeros(&[2, 2]));
        assert!(matches!(
            decode(&b[..6]),
            Err(Error::Parse { offset: 4, .. })
        ));
        assert!(matches!(
            decode(&b[..12]),
            Err(Error::Parse { offset: 8, .. })
        ));
        let mut big = Vec::from(&b"DST1"[..]);
        big.extend_from_slice(&2u32.to_le_bytes());
        big.extend_from_slice(&u64::MAX.to_le_bytes());
        big.extend_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(decode(&big), Err(Error::Parse { .. })));
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(dims in prop::collection::vec(1usize..6, 0..4), seed in any::<u32>()) {
            let n: usize = dims.iter().product();
            let data: Vec<f32> = (0..n).map(|i| f32::from_bits(seed.wrapping_mul(2654435761).wrapping_add(i as u32 * 97) & 0xbf7f_ffff)).collect();
            let t = Tensor::new(&dims, data).unwrap();
            let back = decode(&encode(&t)).unwrap();
            prop_assert_eq!(back.dims(), t.dims());
            prop_assert!(back.data().iter().zip(t.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
