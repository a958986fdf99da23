//! Photon polarization states, conjugate coding and measurement with collapse.
//!
//! Three bases are modelled: rectilinear (0°/90°), diagonal (45°/135°) and
//! circular (left/right spin). Any two distinct bases are fully conjugate: a
//! photon measured in a basis other than its own yields a uniformly random bit
//! and is left in the state that encodes that bit in the measuring basis.
//!
//! Bit convention: the first-listed direction of each basis carries 0
//! (0°, 45°, spinL) and the second carries 1 (90°, 135°, spinR).

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Basis {
    Rectilinear,
    Diagonal,
    Circular,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::Rectilinear, Basis::Diagonal, Basis::Circular];

    /// Single-letter code used in announcements and traces.
    pub fn letter(self) -> char {
        match self {
            Basis::Rectilinear => 'R',
            Basis::Diagonal => 'D',
            Basis::Circular => 'C',
        }
    }

    pub fn from_letter(c: char) -> Option<Basis> {
        match c.to_ascii_uppercase() {
            'R' => Some(Basis::Rectilinear),
            'D' => Some(Basis::Diagonal),
            'C' => Some(Basis::Circular),
            _ => None,
        }
    }

    /// The two polarizations of this basis, ordered by the bit they carry.
    pub fn states(self) -> [Polarization; 2] {
        match self {
            Basis::Rectilinear => [Polarization::Deg0, Polarization::Deg90],
            Basis::Diagonal => [Polarization::Deg45, Polarization::Deg135],
            Basis::Circular => [Polarization::SpinL, Polarization::SpinR],
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.chars();
        match (chars.next().and_then(Basis::from_letter), chars.next()) {
            (Some(b), None) => Ok(b),
            _ => Err(invalid(format!("unknown basis {s:?}"))),
        }
    }
}

impl Serialize for Basis {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut buf = [0u8; 4];
        serializer.serialize_str(self.letter().encode_utf8(&mut buf))
    }
}

impl<'de> Deserialize<'de> for Basis {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    #[serde(rename = "0deg")]
    Deg0,
    #[serde(rename = "90deg")]
    Deg90,
    #[serde(rename = "45deg")]
    Deg45,
    #[serde(rename = "135deg")]
    Deg135,
    #[serde(rename = "spinL")]
    SpinL,
    #[serde(rename = "spinR")]
    SpinR,
}

impl Polarization {
    pub const ALL: [Polarization; 6] = [
        Polarization::Deg0,
        Polarization::Deg90,
        Polarization::Deg45,
        Polarization::Deg135,
        Polarization::SpinL,
        Polarization::SpinR,
    ];

    /// Bit carried by this state when read in its own basis.
    pub fn bit(self) -> u8 {
        match self {
            Polarization::Deg0 | Polarization::Deg45 | Polarization::SpinL => 0,
            Polarization::Deg90 | Polarization::Deg135 | Polarization::SpinR => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Polarization::Deg0 => "0deg",
            Polarization::Deg90 => "90deg",
            Polarization::Deg45 => "45deg",
            Polarization::Deg135 => "135deg",
            Polarization::SpinL => "spinL",
            Polarization::SpinR => "spinR",
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A single photon in flight. `tag` is a sequence number for tracing only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Photon {
    pub polarization: Polarization,
    pub tag: u64,
}

impl Photon {
    pub fn new(polarization: Polarization, tag: u64) -> Self {
        Self { polarization, tag }
    }

    pub fn with_polarization(self, polarization: Polarization) -> Self {
        Self { polarization, ..self }
    }
}

pub fn basis_of(p: Polarization) -> Basis {
    match p {
        Polarization::Deg0 | Polarization::Deg90 => Basis::Rectilinear,
        Polarization::Deg45 | Polarization::Deg135 => Basis::Diagonal,
        Polarization::SpinL | Polarization::SpinR => Basis::Circular,
    }
}

/// Polarization of `basis` that carries `bit`. Only the low bit is read.
pub fn encode(bit: u8, basis: Basis) -> Polarization {
    debug_assert!(bit <= 1, "bit out of range: {bit}");
    basis.states()[usize::from(bit & 1)]
}

/// Outcome of reading a photon through a polarization filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Measurement {
    pub bit: u8,
    pub collapsed: Polarization,
}

/// Measures `photon` in `basis`.
///
/// A matching basis reads the encoded bit and leaves the state intact without
/// touching `rng`. A conjugate basis draws one uniform bit from `rng` and the
/// photon collapses onto the corresponding state of the measuring basis.
pub fn measure<R: Rng + ?Sized>(photon: &Photon, basis: Basis, rng: &mut R) -> Measurement {
    let current = photon.polarization;
    if basis_of(current) == basis {
        Measurement {
            bit: current.bit(),
            collapsed: current,
        }
    } else {
        let bit = u8::from(rng.random_bool(0.5));
        Measurement {
            bit,
            collapsed: encode(bit, basis),
        }
    }
}

/// A nonempty set of bases, kept sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BasisSet(Vec<Basis>);

impl BasisSet {
    pub fn new(bases: impl IntoIterator<Item = Basis>) -> Result<Self, Error> {
        let mut v: Vec<Basis> = bases.into_iter().collect();
        v.sort();
        v.dedup();
        if v.is_empty() {
            return Err(invalid("basis set must be nonempty"));
        }
        Ok(Self(v))
    }

    /// Rectilinear and diagonal, the BB84 pool.
    pub fn bb84() -> Self {
        Self(vec![Basis::Rectilinear, Basis::Diagonal])
    }

    pub fn all() -> Self {
        Self(Basis::ALL.to_vec())
    }

    pub fn pair(a: Basis, b: Basis) -> Self {
        Self::new([a, b]).expect("two bases are nonempty")
    }

    pub fn members(&self) -> &[Basis] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, b: Basis) -> bool {
        self.0.contains(&b)
    }

    /// Uniform draw over the members.
    pub fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> Basis {
        if self.0.len() == 1 {
            self.0[0]
        } else {
            self.0[rng.random_range(0..self.0.len())]
        }
    }
}

impl fmt::Display for BasisSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl FromStr for BasisSet {
    type Err = Error;

    /// Accepts letter strings such as `"RD"` or `"R,D,C"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bases = s
            .chars()
            .filter(|c| !matches!(c, ',' | ' ' | '{' | '}'))
            .map(|c| Basis::from_letter(c).ok_or_else(|| invalid(format!("unknown basis letter {c:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(bases)
    }
}

impl Serialize for BasisSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BasisSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    #[test]
    fn ownership() {
        assert_eq!(basis_of(Polarization::Deg90), Basis::Rectilinear);
        assert_eq!(basis_of(Polarization::Deg45), Basis::Diagonal);
        assert_eq!(basis_of(Polarization::SpinR), Basis::Circular);
        for p in Polarization::ALL {
            assert_eq!(Polarization::ALL.iter().filter(|q| basis_of(**q) == basis_of(p)).count(), 2);
        }
    }

    #[test]
    fn encoding_convention() {
        assert_eq!(encode(0, Basis::Rectilinear), Polarization::Deg0);
        assert_eq!(encode(1, Basis::Diagonal), Polarization::Deg135);
        assert_eq!(encode(1, Basis::Circular), Polarization::SpinR);
        assert_eq!(encode(0, Basis::Circular), Polarization::SpinL);
    }

    #[test]
    fn matching_basis_is_identity_and_leaves_rng_alone() {
        let mut rng = rng_from_seed(1);
        let before = rng.clone();
        let m = measure(&Photon::new(Polarization::Deg0, 0), Basis::Rectilinear, &mut rng);
        assert_eq!(m, Measurement { bit: 0, collapsed: Polarization::Deg0 });
        let m = measure(&Photon::new(Polarization::Deg135, 0), Basis::Diagonal, &mut rng);
        assert_eq!(m, Measurement { bit: 1, collapsed: Polarization::Deg135 });
        assert_eq!(rng, before);
    }

    #[test]
    fn mismatched_measurement_is_fair() {
        let mut rng = rng_from_seed(42);
        let n = 10_000;
        let photon = Photon::new(Polarization::Deg0, 0);
        let ones: u32 = (0..n)
            .map(|_| u32::from(measure(&photon, Basis::Circular, &mut rng).bit))
            .sum();
        let freq = f64::from(ones) / f64::from(n);
        assert!((freq - 0.5).abs() <= 0.015, "freq = {freq}");
    }

    #[test]
    fn collapse_lands_in_measuring_basis() {
        let mut rng = rng_from_seed(3);
        for _ in 0..100 {
            let m = measure(&Photon::new(Polarization::Deg0, 0), Basis::Diagonal, &mut rng);
            assert_eq!(basis_of(m.collapsed), Basis::Diagonal);
            assert_eq!(m.collapsed.bit(), m.bit);
        }
    }

    #[test]
    fn labels() {
        assert_eq!(serde_json::to_string(&Polarization::SpinL).unwrap(), "\"spinL\"");
        assert_eq!(serde_json::to_string(&Polarization::Deg135).unwrap(), "\"135deg\"");
        assert_eq!(serde_json::to_string(&Basis::Circular).unwrap(), "\"C\"");
        assert_eq!("R,D".parse::<BasisSet>().unwrap(), BasisSet::bb84());
        assert!("".parse::<BasisSet>().is_err());
        assert!("RX".parse::<BasisSet>().is_err());
    }
}
