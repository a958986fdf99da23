//! Bit and basis sequences. Positions exposed to callers are 1-based.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error};
use crate::photon::Basis;

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString(Vec<u8>);

impl BitString {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    /// Builds a string from raw bits; every value must be 0 or 1.
    pub fn from_bits(bits: Vec<u8>) -> Result<Self, Error> {
        if let Some(bad) = bits.iter().find(|b| **b > 1) {
            return Err(invalid(format!("bit value {bad} is not 0 or 1")));
        }
        Ok(Self(bits))
    }

    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Self {
        Self(bits.into_iter().map(u8::from).collect())
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Self((0..len).map(|_| u8::from(rng.random_bool(0.5))).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Bit at 1-based `pos`.
    pub fn get(&self, pos: usize) -> Option<u8> {
        pos.checked_sub(1).and_then(|i| self.0.get(i).copied())
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = u8> + '_ {
        self.0.iter().copied()
    }

    pub fn push(&mut self, bit: u8) {
        debug_assert!(bit <= 1);
        self.0.push(bit & 1);
    }

    /// Bits at the given 1-based positions, in the order given.
    pub fn select(&self, positions: &[usize]) -> Self {
        Self(positions.iter().map(|&p| self.0[p - 1]).collect())
    }

    /// Number of positions where the two strings differ, over the common prefix.
    pub fn hamming(&self, other: &BitString) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    pub fn parity(&self) -> u8 {
        self.0.iter().fold(0, |acc, b| acc ^ b)
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.0
    }
}

impl From<BitString> for Vec<u8> {
    fn from(b: BitString) -> Self {
        b.0
    }
}

impl FromIterator<u8> for BitString {
    fn from_iter<I: IntoIterator<Item = u8>>(iter: I) -> Self {
        let mut s = BitString::new();
        for b in iter {
            s.push(b);
        }
        s
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            f.write_str(if *b == 0 { "0" } else { "1" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .filter(|c| !c.is_whitespace() && *c != '_')
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(invalid(format!("not a bit: {other:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BasisString(Vec<Basis>);

impl BasisString {
    pub fn new(bases: Vec<Basis>) -> Self {
        Self(bases)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, pos: usize) -> Option<Basis> {
        pos.checked_sub(1).and_then(|i| self.0.get(i).copied())
    }

    pub fn as_slice(&self) -> &[Basis] {
        &self.0
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = Basis> + '_ {
        self.0.iter().copied()
    }
}

impl FromIterator<Basis> for BasisString {
    fn from_iter<I: IntoIterator<Item = Basis>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl fmt::Display for BasisString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl FromStr for BasisString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .filter(|c| !c.is_whitespace() && *c != ',')
            .map(|c| Basis::from_letter(c).ok_or_else(|| invalid(format!("unknown basis letter {c:?}"))))
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }
}

impl Serialize for BasisString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BasisString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_based_access() {
        let s: BitString = "0110".parse().unwrap();
        assert_eq!(s.get(0), None);
        assert_eq!(s.get(1), Some(0));
        assert_eq!(s.get(2), Some(1));
        assert_eq!(s.get(5), None);
        assert_eq!(s.select(&[4, 2]).to_string(), "01");
    }

    #[test]
    fn rejects_non_bits() {
        assert!("0120".parse::<BitString>().is_err());
        assert!(BitString::from_bits(vec![0, 2]).is_err());
        assert_eq!("0110_0110".parse::<BitString>().unwrap().len(), 8);
    }

    #[test]
    fn basis_string_letters() {
        let b: BasisString = "RDC".parse().unwrap();
        assert_eq!(b.get(3), Some(Basis::Circular));
        assert_eq!(b.to_string(), "RDC");
        assert!("RX".parse::<BasisString>().is_err());
    }
}
