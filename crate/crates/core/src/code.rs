//! The four-state code alphabet and its 2-bit packing.
//!
//! Bit patterns (high bit = stored sign, low bit = magnitude):
//!
//! ```text
//! 0⁺ = 0b00   +1 = 0b01   0⁻ = 0b10   −1 = 0b11
//! ```
//!
//! Code `i` of a sequence lives in bits `2*(i % 4) ..= 2*(i % 4) + 1` of
//! byte `i / 4`, least-significant slot first. Unused trailing slots hold
//! the `0⁺` pattern so a padded buffer decodes to numeric zero.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SztError};

/// One 2-bit code word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TernaryCode {
    PlusOne,
    ZeroPlus,
    ZeroMinus,
    MinusOne,
}

impl TernaryCode {
    pub const ALL: [TernaryCode; 4] = [
        TernaryCode::ZeroPlus,
        TernaryCode::PlusOne,
        TernaryCode::ZeroMinus,
        TernaryCode::MinusOne,
    ];

    /// Decoded value in `{-1, 0, +1}`; both signed zeros decode to 0.
    #[inline]
    pub const fn numeric_value(self) -> i8 {
        match self {
            TernaryCode::PlusOne => 1,
            TernaryCode::ZeroPlus | TernaryCode::ZeroMinus => 0,
            TernaryCode::MinusOne => -1,
        }
    }

    /// The sign carried by the code word, including the sign of a zero.
    #[inline]
    pub const fn stored_sign(self) -> i8 {
        if self.bits() & 0b10 != 0 {
            -1
        } else {
            1
        }
    }

    #[inline]
    pub const fn bits(self) -> u8 {
        match self {
            TernaryCode::ZeroPlus => 0b00,
            TernaryCode::PlusOne => 0b01,
            TernaryCode::ZeroMinus => 0b10,
            TernaryCode::MinusOne => 0b11,
        }
    }

    /// Inverse of [`TernaryCode::bits`]; only the low two bits are read.
    #[inline]
    pub const fn from_bits(bits: u8) -> Self {
        match bits & 0b11 {
            0b00 => TernaryCode::ZeroPlus,
            0b01 => TernaryCode::PlusOne,
            0b10 => TernaryCode::ZeroMinus,
            _ => TernaryCode::MinusOne,
        }
    }

    #[inline]
    pub const fn is_zero(self) -> bool {
        self.bits() & 0b01 == 0
    }

    pub const fn symbol(self) -> &'static str {
        match self {
            TernaryCode::PlusOne => "+1",
            TernaryCode::ZeroPlus => "0+",
            TernaryCode::ZeroMinus => "0-",
            TernaryCode::MinusOne => "-1",
        }
    }
}

impl std::fmt::Display for TernaryCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Number of bytes needed to hold `n` codes.
#[inline]
pub const fn packed_len(n: usize) -> usize {
    n.div_ceil(4)
}

pub fn pack_codes(codes: &[TernaryCode]) -> Vec<u8> {
    let mut out = vec![0u8; packed_len(codes.len())];
    for (i, code) in codes.iter().enumerate() {
        out[i / 4] |= code.bits() << (2 * (i % 4));
    }
    out
}

pub fn unpack_codes(bytes: &[u8], n: usize) -> Result<Vec<TernaryCode>> {
    let capacity = bytes.len().saturating_mul(4);
    if n > capacity {
        return Err(SztError::LengthMismatch(format!(
            "requested {n} codes from {} bytes (capacity {capacity})",
            bytes.len()
        )));
    }
    Ok((0..n).map(|i| code_at(bytes, i)).collect())
}

/// Reads slot `i` without bounds checks beyond the slice index.
#[inline]
pub fn code_at(bytes: &[u8], i: usize) -> TernaryCode {
    TernaryCode::from_bits(bytes[i / 4] >> (2 * (i % 4)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use TernaryCode::*;

    #[test]
    fn pack_reference_vector() {
        assert_eq!(pack_codes(&[ZeroPlus, PlusOne, ZeroMinus, MinusOne]), vec![0xE4]);
        assert_eq!(pack_codes(&[]), Vec::<u8>::new());
        assert_eq!(pack_codes(&[PlusOne]), vec![0x01]);
    }

    #[test]
    fn unpack_reference_vector() {
        assert_eq!(unpack_codes(&[0xE4], 4).unwrap(), vec![ZeroPlus, PlusOne, ZeroMinus, MinusOne]);
        assert_eq!(unpack_codes(&[0x01], 1).unwrap(), vec![PlusOne]);
        assert!(matches!(unpack_codes(&[0x00], 5), Err(SztError::LengthMismatch(_))));
    }

    #[test]
    fn padding_decodes_to_zero_plus() {
        let bytes = pack_codes(&[MinusOne]);
        assert_eq!(unpack_codes(&bytes, 4).unwrap(), vec![MinusOne, ZeroPlus, ZeroPlus, ZeroPlus]);
    }

    #[test]
    fn decode_and_sign_tables() {
        assert_eq!(ZeroPlus.numeric_value(), 0);
        assert_eq!(ZeroMinus.numeric_value(), 0);
        assert_eq!(MinusOne.numeric_value(), -1);
        assert_eq!(PlusOne.numeric_value(), 1);

        assert_eq!(ZeroMinus.stored_sign(), -1);
        assert_eq!(PlusOne.stored_sign(), 1);
        assert_eq!(ZeroPlus.stored_sign(), 1);
        assert_eq!(MinusOne.stored_sign(), -1);
    }

    #[test]
    fn sign_is_the_high_bit() {
        for code in TernaryCode::ALL {
            assert_eq!(code.stored_sign() == -1, code.bits() >> 1 == 1);
            assert_eq!(TernaryCode::from_bits(code.bits()), code);
        }
    }
}
