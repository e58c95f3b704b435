//! Packed code tensors and the `.szt` container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "SZT1"            4 bytes magic
//! version           u8  (= 1)
//! granularity       u8  (0 = per-layer, 1 + axis = per-channel along axis)
//! rank              u8
//! dims              rank × u64
//! threshold count   u64, then that many f64
//! scale count       u64, then that many f64
//! payload           ceil(numel / 4) bytes of packed codes
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::code::{code_at, pack_codes, packed_len, unpack_codes, TernaryCode};
use crate::error::{Result, SztError};

pub const MAGIC: &[u8; 4] = b"SZT1";
pub const FORMAT_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Granularity {
    PerLayer,
    PerChannel(usize),
}

impl Granularity {
    fn tag(self) -> Result<u8> {
        match self {
            Granularity::PerLayer => Ok(0),
            Granularity::PerChannel(axis) if axis < 255 => Ok(axis as u8 + 1),
            Granularity::PerChannel(axis) => Err(SztError::Format(format!("channel axis {axis} does not fit the tag byte"))),
        }
    }

    fn from_tag(tag: u8) -> Self {
        match tag {
            0 => Granularity::PerLayer,
            t => Granularity::PerChannel(t as usize - 1),
        }
    }
}

/// Row-major packed codes with their thresholds and decode scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackedTernaryTensor {
    dims: Vec<usize>,
    granularity: Granularity,
    thresholds: Vec<f64>,
    scales: Vec<f64>,
    payload: Vec<u8>,
}

/// Number of elements described by `dims`, rejecting zero-sized axes.
pub fn numel(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(SztError::ShapeMismatch(format!("dims must be non-empty and positive, got {dims:?}")));
    }
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| SztError::ShapeMismatch(format!("dims {dims:?} overflow")))
}

/// Maps a flat row-major index to its channel along `axis`.
#[inline]
pub(crate) fn channel_of(index: usize, dims: &[usize], axis: usize) -> usize {
    let stride: usize = dims[axis + 1..].iter().product();
    (index / stride) % dims[axis]
}

impl PackedTernaryTensor {
    pub fn from_codes(
        dims: Vec<usize>,
        granularity: Granularity,
        thresholds: Vec<f64>,
        scales: Vec<f64>,
        codes: &[TernaryCode],
    ) -> Result<Self> {
        let n = numel(&dims)?;
        if codes.len() != n {
            return Err(SztError::LengthMismatch(format!("{} codes for dims {dims:?} ({n} elements)", codes.len())));
        }
        Self::new(dims, granularity, thresholds, scales, pack_codes(codes))
    }

    pub fn new(
        dims: Vec<usize>,
        granularity: Granularity,
        thresholds: Vec<f64>,
        scales: Vec<f64>,
        payload: Vec<u8>,
    ) -> Result<Self> {
        let n = numel(&dims)?;
        let groups = match granularity {
            Granularity::PerLayer => 1,
            Granularity::PerChannel(axis) => *dims
                .get(axis)
                .ok_or_else(|| SztError::ShapeMismatch(format!("channel axis {axis} out of range for rank {}", dims.len())))?,
        };
        if thresholds.len() != groups || scales.len() != groups {
            return Err(SztError::LengthMismatch(format!(
                "expected {groups} thresholds and scales, got {} and {}",
                thresholds.len(),
                scales.len()
            )));
        }
        if let Some(bad) = thresholds.iter().chain(&scales).find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(SztError::InvalidInput(format!("thresholds and scales must be positive, found {bad}")));
        }
        if payload.len() != packed_len(n) {
            return Err(SztError::LengthMismatch(format!(
                "payload has {} bytes, {n} codes need {}",
                payload.len(),
                packed_len(n)
            )));
        }
        Ok(Self { dims, granularity, thresholds, scales, payload })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn numel(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    #[inline]
    pub fn code(&self, index: usize) -> TernaryCode {
        code_at(&self.payload, index)
    }

    pub fn codes(&self) -> Vec<TernaryCode> {
        unpack_codes(&self.payload, self.numel()).expect("payload length checked at construction")
    }

    /// Index into `thresholds`/`scales` for flat element `index`.
    #[inline]
    pub fn group_of(&self, index: usize) -> usize {
        match self.granularity {
            Granularity::PerLayer => 0,
            Granularity::PerChannel(axis) => channel_of(index, &self.dims, axis),
        }
    }

    /// Decoded real values `scale · v(q)`.
    pub fn dequantize(&self) -> Vec<f64> {
        (0..self.numel())
            .map(|i| self.scales[self.group_of(i)] * f64::from(self.code(i).numeric_value()))
            .collect()
    }

    /// Counts of each code word, in `TernaryCode::ALL` order.
    pub fn histogram(&self) -> [usize; 4] {
        let mut counts = [0usize; 4];
        for i in 0..self.numel() {
            counts[self.code(i).bits() as usize] += 1;
        }
        counts
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        if self.dims.len() > u8::MAX as usize {
            return Err(SztError::Format(format!("rank {} exceeds 255", self.dims.len())));
        }
        w.write_all(MAGIC)?;
        w.write_all(&[FORMAT_VERSION, self.granularity.tag()?, self.dims.len() as u8])?;
        for &d in &self.dims {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for list in [&self.thresholds, &self.scales] {
            w.write_all(&(list.len() as u64).to_le_bytes())?;
            for v in list {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.write_all(&self.payload)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(16 + 8 * self.dims.len() + 16 * self.thresholds.len() + self.payload.len());
        self.write_to(&mut out)?;
        Ok(out)
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, "magic")?;
        if &magic != MAGIC {
            return Err(SztError::Format(format!("bad magic {magic:?}")));
        }
        let mut head = [0u8; 3];
        read_exact(&mut r, &mut head, "header")?;
        let [version, tag, rank] = head;
        if version != FORMAT_VERSION {
            return Err(SztError::Format(format!("unsupported version {version}")));
        }
        let dims = (0..rank)
            .map(|_| read_u64(&mut r, "dims").map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let thresholds = read_f64_list(&mut r, "thresholds")?;
        let scales = read_f64_list(&mut r, "scales")?;
        let n = numel(&dims).map_err(|e| SztError::Format(e.to_string()))?;
        let mut payload = vec![0u8; packed_len(n)];
        read_exact(&mut r, &mut payload, "payload")?;
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(SztError::Format("trailing bytes after payload".into()));
        }
        Self::new(dims, Granularity::from_tag(tag), thresholds, scales, payload)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_from(bytes)
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => SztError::Format(format!("truncated while reading {what}")),
        _ => SztError::Io(e),
    })
}

fn read_u64<R: Read>(r: &mut R, what: &str) -> Result<u64> {
    let mut buf = [0u8; 8];
    read_exact(r, &mut buf, what)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64_list<R: Read>(r: &mut R, what: &str) -> Result<Vec<f64>> {
    let count = read_u64(r, what)?;
    if count > 1 << 32 {
        return Err(SztError::Format(format!("implausible {what} count {count}")));
    }
    (0..count).map(|_| read_u64(r, what).map(f64::from_bits)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use TernaryCode::*;

    fn sample() -> PackedTernaryTensor {
        PackedTernaryTensor::from_codes(
            vec![2, 3],
            Granularity::PerChannel(0),
            vec![1.0, 2.0],
            vec![1.0, 2.0],
            &[PlusOne, ZeroMinus, MinusOne, ZeroPlus, PlusOne, MinusOne],
        )
        .unwrap()
    }

    #[test]
    fn byte_layout_is_exact() {
        let t = PackedTernaryTensor::from_codes(
            vec![4],
            Granularity::PerLayer,
            vec![0.5],
            vec![0.5],
            &[ZeroPlus, PlusOne, ZeroMinus, MinusOne],
        )
        .unwrap();
        let bytes = t.to_bytes().unwrap();
        let mut expected = b"SZT1".to_vec();
        expected.extend([1, 0, 1]);
        expected.extend(4u64.to_le_bytes());
        expected.extend(1u64.to_le_bytes());
        expected.extend(0.5f64.to_le_bytes());
        expected.extend(1u64.to_le_bytes());
        expected.extend(0.5f64.to_le_bytes());
        expected.push(0xE4);
        assert_eq!(bytes, expected);
    }

    #[test]
    fn file_round_trip() {
        let t = sample();
        let back = PackedTernaryTensor::from_bytes(&t.to_bytes().unwrap()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.granularity(), Granularity::PerChannel(0));
    }

    #[test]
    fn dequantize_uses_channel_scale() {
        assert_eq!(sample().dequantize(), vec![1.0, 0.0, -1.0, 0.0, 2.0, -2.0]);
    }

    #[test]
    fn rejects_truncated_and_trailing_data() {
        let bytes = sample().to_bytes().unwrap();
        assert!(matches!(PackedTernaryTensor::from_bytes(&bytes[..bytes.len() - 1]), Err(SztError::Format(_))));
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(matches!(PackedTernaryTensor::from_bytes(&longer), Err(SztError::Format(_))));
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(PackedTernaryTensor::from_bytes(&bad).is_err());
    }

    #[test]
    fn rejects_non_positive_thresholds() {
        let err = PackedTernaryTensor::from_codes(vec![1], Granularity::PerLayer, vec![0.0], vec![1.0], &[PlusOne]);
        assert!(matches!(err, Err(SztError::InvalidInput(_))));
    }

    #[test]
    fn channel_index_follows_axis() {
        let dims = [2, 3, 4];
        assert_eq!(channel_of(0, &dims, 0), 0);
        assert_eq!(channel_of(12, &dims, 0), 1);
        assert_eq!(channel_of(4, &dims, 1), 1);
        assert_eq!(channel_of(7, &dims, 2), 3);
    }
}
