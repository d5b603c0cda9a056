use std::fmt;

use primitive_types::U256;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::LedgerError;

/// A raw 32-byte digest.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Hash256(pub [u8; 32]);

impl Hash256 {
    pub const ZERO: Hash256 = Hash256([0u8; 32]);

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// The digest read as an unsigned big-endian 256-bit integer.
    pub fn to_u256(&self) -> U256 {
        U256::from_big_endian(&self.0)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s.trim_start_matches("0x"), &mut out)?;
        Ok(Hash256(out))
    }

    /// Short prefix for logs.
    pub fn short(&self) -> String {
        hex::encode(&self.0[..4])
    }
}

impl fmt::Debug for Hash256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hash256({})", self.short())
    }
}

impl fmt::Display for Hash256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Hash256 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Hash256 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Hash256::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Account identifier: the SHA-256 digest of an account's public key.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Address(pub Hash256);

impl Address {
    pub fn from_public_key(public_key: &[u8; 32]) -> Self {
        Address(super::crypto::sha256(public_key))
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0 .0
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address({})", self.0.short())
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// Token quantity in the smallest unit. Arithmetic is checked; overflow is an error.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Amount(pub u64);

impl Amount {
    pub const ZERO: Amount = Amount(0);

    pub fn new(v: u64) -> Self {
        Amount(v)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn checked_add(self, rhs: Amount) -> Result<Amount, LedgerError> {
        self.0.checked_add(rhs.0).map(Amount).ok_or(LedgerError::Overflow)
    }

    pub fn checked_sub(self, rhs: Amount) -> Result<Amount, LedgerError> {
        self.0.checked_sub(rhs.0).map(Amount).ok_or(LedgerError::Overflow)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Debug for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Exact fraction in [0, 1] stored as parts per million.
///
/// Serialized as a decimal number (`0.05`) so configuration files stay readable.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ratio {
    ppm: u32,
}

impl Ratio {
    pub const SCALE: u64 = 1_000_000;
    pub const ZERO: Ratio = Ratio { ppm: 0 };
    pub const ONE: Ratio = Ratio { ppm: 1_000_000 };

    pub fn from_ppm(ppm: u32) -> Self {
        Ratio { ppm: ppm.min(Self::SCALE as u32) }
    }

    pub fn from_f64(x: f64) -> Self {
        let clamped = x.clamp(0.0, 1.0);
        Ratio::from_ppm((clamped * Self::SCALE as f64).round() as u32)
    }

    pub fn ppm(self) -> u32 {
        self.ppm
    }

    pub fn as_f64(self) -> f64 {
        self.ppm as f64 / Self::SCALE as f64
    }

    /// `floor(amount * self)`, exact.
    pub fn apply_floor(self, amount: Amount) -> Amount {
        Amount(((amount.0 as u128 * self.ppm as u128) / Self::SCALE as u128) as u64)
    }

    /// `ceil(amount * self)`, exact.
    pub fn apply_ceil(self, amount: Amount) -> Amount {
        let num = amount.0 as u128 * self.ppm as u128;
        Amount(num.div_ceil(Self::SCALE as u128) as u64)
    }

    /// True iff `value < self * reference`, evaluated without rounding.
    pub fn strictly_exceeds(self, value: Amount, reference: Amount) -> bool {
        (value.0 as u128) * (Self::SCALE as u128) < (self.ppm as u128) * (reference.0 as u128)
    }

    /// True iff `value >= self * reference`, evaluated without rounding.
    pub fn is_reached_by(self, value: Amount, reference: Amount) -> bool {
        (value.0 as u128) * (Self::SCALE as u128) >= (self.ppm as u128) * (reference.0 as u128)
    }
}

impl fmt::Debug for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_f64())
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_f64())
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let x = f64::deserialize(d)?;
        if !(0.0..=1.0).contains(&x) {
            return Err(serde::de::Error::custom(format!("ratio {x} outside [0, 1]")));
        }
        Ok(Ratio::from_f64(x))
    }
}

/// A 256-bit threshold scalar (PoCW difficulty `D` or the system puzzle target).
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Difficulty(pub U256);

impl Difficulty {
    pub const ZERO: Difficulty = Difficulty(U256::zero());

    /// `D` such that `D * units / 2^256 == p` for a single token unit.
    ///
    /// `p` is clamped to [0, 1); 1.0 saturates at `U256::MAX`.
    pub fn from_probability(p: f64) -> Self {
        if p <= 0.0 {
            return Difficulty::ZERO;
        }
        if p >= 1.0 {
            return Difficulty(U256::MAX);
        }
        // p = mantissa * 2^exp exactly, so D = mantissa * 2^(256 + exp).
        let bits = p.to_bits();
        let raw_exp = ((bits >> 52) & 0x7ff) as i32;
        let (mantissa, exp) = if raw_exp == 0 {
            (bits & ((1u64 << 52) - 1), -1074)
        } else {
            ((bits & ((1u64 << 52) - 1)) | (1u64 << 52), raw_exp - 1075)
        };
        let shift = 256 + exp;
        let m = U256::from(mantissa);
        if shift >= 0 {
            Difficulty(m << shift as usize)
        } else {
            Difficulty(m >> (-shift) as usize)
        }
    }

    /// Difficulty from a per-trial success probability for a given reward.
    pub fn for_reward(p_per_trial: f64, reward: Amount) -> Self {
        Self::from_probability(p_per_trial / reward.0.max(1) as f64)
    }

    /// `U256::MAX` stands in for the unrepresentable cap `2^256`: every digest passes.
    pub const CAP: Difficulty = Difficulty(U256::MAX);

    pub fn is_cap(self) -> bool {
        self.0 == U256::MAX
    }

    /// Exact power of two, `2^exp`; `2^256` maps to [`Difficulty::CAP`].
    pub fn pow2(exp: u32) -> Self {
        if exp >= 256 {
            Difficulty(U256::MAX)
        } else {
            Difficulty(U256::one() << exp)
        }
    }

    /// Approximate probability that a uniform 256-bit digest falls below `self * units`.
    pub fn probability(self, units: Amount) -> f64 {
        match self.0.checked_mul(U256::from(units.0)) {
            None => 1.0,
            Some(t) => u256_to_f64(t) / 2f64.powi(256),
        }
    }

    pub fn to_hex(self) -> String {
        format!("{:#066x}", self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, String> {
        let digits = s.trim_start_matches("0x");
        if digits.is_empty() || digits.len() > 64 {
            return Err(format!("bad 256-bit hex value: {s}"));
        }
        let padded = format!("{digits:0>64}");
        let mut bytes = [0u8; 32];
        hex::decode_to_slice(&padded, &mut bytes).map_err(|e| e.to_string())?;
        Ok(Difficulty(U256::from_big_endian(&bytes)))
    }

    /// Accepts either a `0x`-prefixed 256-bit hex integer or a per-unit probability.
    pub fn parse(s: &str) -> Result<Self, String> {
        if s.starts_with("0x") {
            Self::from_hex(s)
        } else {
            let p: f64 = s.parse().map_err(|_| format!("not a probability or hex value: {s}"))?;
            Ok(Self::from_probability(p))
        }
    }
}

pub(crate) fn u256_to_f64(v: U256) -> f64 {
    let mut acc = 0f64;
    for (i, word) in v.0.iter().enumerate() {
        acc += (*word as f64) * 2f64.powi(64 * i as i32);
    }
    acc
}

impl fmt::Debug for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Difficulty({})", self.to_hex())
    }
}

impl Serialize for Difficulty {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Difficulty {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Difficulty::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_floor_and_strict_bound() {
        let k = Ratio::from_f64(0.05);
        assert_eq!(k.apply_floor(Amount(100)), Amount(5));
        assert!(k.strictly_exceeds(Amount(4), Amount(100)));
        assert!(!k.strictly_exceeds(Amount(5), Amount(100)));
    }

    #[test]
    fn amount_overflow_is_error() {
        assert!(Amount(u64::MAX).checked_add(Amount(1)).is_err());
        assert!(Amount(0).checked_sub(Amount(1)).is_err());
    }

    #[test]
    fn difficulty_probability_roundtrip() {
        for p in [0.5, 0.01, 1e-6, 1e-12] {
            let d = Difficulty::from_probability(p);
            let back = d.probability(Amount(1));
            assert!((back - p).abs() / p < 1e-6, "p={p} back={back}");
        }
        assert_eq!(Difficulty::from_probability(0.5), Difficulty::pow2(255));
    }

    #[test]
    fn difficulty_hex_roundtrip() {
        let d = Difficulty::pow2(200);
        assert_eq!(Difficulty::from_hex(&d.to_hex()).unwrap(), d);
        assert_eq!(Difficulty::parse("0x10").unwrap(), Difficulty(U256::from(16)));
    }
}
