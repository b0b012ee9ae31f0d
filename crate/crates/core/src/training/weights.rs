//! The ILNW weight file.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "ILNW"            4 bytes magic
//! version: u32      currently 1
//! count:   u32      number of tensors
//! count × {
//!     name_len: u16
//!     name:     name_len bytes of UTF-8
//!     rank:     u8   (1..=4)
//!     dims:     rank × u32
//!     data:     product(dims) × f64
//! }
//! ```
//!
//! Tensors are written in name order, so identical parameter maps produce
//! identical files.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"ILNW";
pub const VERSION: u32 = 1;

/// Named tensors as stored in a weight file.
pub type WeightMap = BTreeMap<String, Tensor>;

pub fn encode(weights: &WeightMap) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let count = u32::try_from(weights.len())
        .map_err(|_| Error::InvalidArgument("too many tensors for a weight file".into()))?;
    out.extend_from_slice(&count.to_le_bytes());
    for (name, t) in weights {
        let len = u16::try_from(name.len()).map_err(|_| Error::Parameter {
            name: name.clone(),
            detail: "name longer than 65535 bytes".into(),
        })?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.rank() as u8);
        for &d in t.shape() {
            let d = u32::try_from(d).map_err(|_| Error::Parameter {
                name: name.clone(),
                detail: "extent exceeds u32".into(),
            })?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::WeightFormat {
                offset: self.pos,
                detail: format!(
                    "truncated while reading {what}: need {n} bytes, {} left",
                    self.bytes.len() - self.pos
                ),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<WeightMap> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::WeightFormat {
            offset: 0,
            detail: format!("bad magic {magic:?}, expected \"ILNW\""),
        });
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::WeightFormat {
            offset: 4,
            detail: format!("unsupported version {version}"),
        });
    }
    let count = r.u32("tensor count")?;
    let mut out = WeightMap::new();
    for _ in 0..count {
        let entry_at = r.pos;
        let len = r.u16("name length")? as usize;
        let name_at = r.pos;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|e| Error::WeightFormat {
                offset: name_at,
                detail: format!("name is not UTF-8: {e}"),
            })?
            .to_string();
        let rank_at = r.pos;
        let rank = r.u8("rank")? as usize;
        if !(1..=4).contains(&rank) {
            return Err(Error::WeightFormat {
                offset: rank_at,
                detail: format!("rank {rank} of `{name}` outside 1..=4"),
            });
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("extent")? as usize);
        }
        let numel = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::WeightFormat {
                offset: rank_at,
                detail: format!("shape {shape:?} of `{name}` overflows"),
            })?
            / 8;
        let raw = r.take(numel * 8, "tensor data")?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let tensor = Tensor::from_vec(&shape, data)?;
        if out.insert(name.clone(), tensor).is_some() {
            return Err(Error::WeightFormat {
                offset: entry_at,
                detail: format!("duplicate tensor `{name}`"),
            });
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::WeightFormat {
            offset: r.pos,
            detail: format!("{} trailing bytes", bytes.len() - r.pos),
        });
    }
    Ok(out)
}

pub fn save_weights(weights: &WeightMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(weights)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<WeightMap> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_map() -> WeightMap {
        let mut w = WeightMap::new();
        w.insert(
            "enc0.conv0.kernel".into(),
            Tensor::from_fn(&[2, 1, 3, 3], |i| i as f64 * 0.1 - 0.3),
        );
        w.insert(
            "enc0.conv0.bias".into(),
            Tensor::from_vec(&[2], vec![f64::MIN_POSITIVE, -0.0]).unwrap(),
        );
        w
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&sample_map()).unwrap();
        assert_eq!(&bytes[..4], b"ILNW");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        // first entry in name order is the bias
        assert_eq!(u16::from_le_bytes(bytes[12..14].try_into().unwrap()), 15);
        assert_eq!(&bytes[14..29], b"enc0.conv0.bias");
        assert_eq!(bytes[29], 1);
        assert_eq!(u32::from_le_bytes(bytes[30..34].try_into().unwrap()), 2);
    }

    #[test]
    fn corrupt_magic_reports_offset_zero() {
        let mut bytes = encode(&sample_map()).unwrap();
        bytes[0] = b'X';
        match decode(&bytes) {
            Err(Error::WeightFormat { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_version_and_truncation() {
        let mut bytes = encode(&sample_map()).unwrap();
        bytes[4] = 9;
        assert!(matches!(
            decode(&bytes),
            Err(Error::WeightFormat { offset: 4, .. })
        ));
        let bytes = encode(&sample_map()).unwrap();
        let cut = &bytes[..bytes.len() - 3];
        match decode(cut) {
            Err(Error::WeightFormat { offset, detail }) => {
                assert!(offset > 12);
                assert!(detail.contains("truncated"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let mut long = encode(&sample_map()).unwrap();
        long.push(0);
        assert!(decode(&long).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bitwise(values in proptest::collection::vec(any::<f64>(), 1..40), split in 1usize..5) {
            let mut w = WeightMap::new();
            let rows = split.min(values.len());
            let used = values.len() / rows * rows;
            w.insert("p".into(), Tensor::from_vec(&[rows, used / rows], values[..used].to_vec()).unwrap());
            let back = decode(&encode(&w).unwrap()).unwrap();
            prop_assert_eq!(back.len(), 1);
            let a: Vec<u64> = w["p"].data().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back["p"].data().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
            prop_assert_eq!(back["p"].shape(), w["p"].shape());
        }
    }
}
