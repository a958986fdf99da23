//! BB84: random bits in random bases, receiver guesses, public sifting, and
//! a sampled error-rate check that decides whether to abort.

use std::fmt;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::{BasisString, BitString};
use crate::channels::{Channels, Party, Payload};
use crate::error::{invalid, Error};
use crate::photon::{encode, measure, BasisSet, Photon};

/// Default abort threshold on the sampled error rate.
pub const DEFAULT_QBER_THRESHOLD: f64 = 0.11;

/// Sender's side after steps 1-3: bits, bases, and the photons that encode them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preparation {
    pub bits: BitString,
    pub bases: BasisString,
    pub photons: Vec<Photon>,
}

/// Receiver's guessed bases and the bits read with them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reading {
    pub bases: BasisString,
    pub bits: BitString,
}

pub fn sender_prepare<R: Rng + ?Sized>(n: usize, basis_pool: &BasisSet, rng: &mut R) -> Result<Preparation, Error> {
    if n == 0 {
        return Err(invalid("photon count must be at least 1"));
    }
    let mut bits = BitString::new();
    let mut bases = Vec::with_capacity(n);
    let mut photons = Vec::with_capacity(n);
    for i in 0..n {
        let bit = u8::from(rng.random_bool(0.5));
        let basis = basis_pool.choose(rng);
        bits.push(bit);
        bases.push(basis);
        photons.push(Photon::new(encode(bit, basis), i as u64));
    }
    Ok(Preparation {
        bits,
        bases: BasisString::new(bases),
        photons,
    })
}

/// Picks a basis for one arriving photon and reads it.
fn read_one<R: Rng + ?Sized>(photon: &Photon, basis_pool: &BasisSet, rng: &mut R) -> (crate::photon::Basis, u8) {
    let basis = basis_pool.choose(rng);
    (basis, measure(photon, basis, rng).bit)
}

pub fn receiver_measure<R: Rng + ?Sized>(photons: &[Photon], basis_pool: &BasisSet, rng: &mut R) -> Result<Reading, Error> {
    if photons.is_empty() {
        return Err(invalid("no photons to measure"));
    }
    let (bases, bits): (Vec<_>, Vec<_>) = photons.iter().map(|p| read_one(p, basis_pool, rng)).unzip();
    Ok(Reading {
        bases: BasisString::new(bases),
        bits: BitString::from_bits(bits)?,
    })
}

/// Reads photons in caller-chosen bases.
pub fn measure_in<R: Rng + ?Sized>(photons: &[Photon], bases: &BasisString, rng: &mut R) -> Result<Reading, Error> {
    if photons.len() != bases.len() {
        return Err(invalid("one basis per photon required"));
    }
    let bits = photons
        .iter()
        .zip(bases.iter())
        .map(|(p, b)| measure(p, b, rng).bit)
        .collect::<Vec<_>>();
    Ok(Reading {
        bases: bases.clone(),
        bits: BitString::from_bits(bits)?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawExchange {
    pub sent: Preparation,
    pub received: Reading,
}

/// Steps 1-6 on the shared clock: one photon per tick, each carried across
/// the quantum channel and read on arrival.
pub fn run_exchange<R1, R2, R3>(
    n: usize,
    basis_pool: &BasisSet,
    channels: &mut Channels,
    sender_rng: &mut R1,
    receiver_rng: &mut R2,
    channel_rng: &mut R3,
) -> Result<RawExchange, Error>
where
    R1: Rng + ?Sized,
    R2: Rng + ?Sized,
    R3: Rng + ?Sized,
{
    let sent = sender_prepare(n, basis_pool, sender_rng)?;
    let mut bases = Vec::with_capacity(n);
    let mut bits = Vec::with_capacity(n);
    for photon in &sent.photons {
        channels.tick();
        let arrived = channels.emit_photon(photon.polarization, true, channel_rng);
        let (basis, bit) = read_one(&arrived, basis_pool, receiver_rng);
        channels.record_measurement(arrived.tag, basis, bit);
        bases.push(basis);
        bits.push(bit);
    }
    Ok(RawExchange {
        sent,
        received: Reading {
            bases: BasisString::new(bases),
            bits: BitString::from_bits(bits)?,
        },
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiftResult {
    /// Ascending 1-based photon positions where the bases agreed.
    pub kept_indices: Vec<usize>,
    pub sender_key: BitString,
    pub receiver_key: BitString,
}

impl SiftResult {
    pub fn len(&self) -> usize {
        self.kept_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept_indices.is_empty()
    }

    pub fn errors(&self) -> usize {
        self.sender_key.hamming(&self.receiver_key)
    }
}

/// Step 7: the sender announces its bases, the receiver answers which ones it matched.
pub fn sift(
    s: &BitString,
    b: &BasisString,
    b_prime: &BasisString,
    s_prime: &BitString,
    channels: &mut Channels,
) -> Result<SiftResult, Error> {
    let n = s.len();
    if b.len() != n || b_prime.len() != n || s_prime.len() != n {
        return Err(invalid(format!(
            "sift inputs differ in length: s={n}, b={}, b'={}, s'={}",
            b.len(),
            b_prime.len(),
            s_prime.len()
        )));
    }
    let announced = channels.send(Party::Sender, Payload::BasisReveal { bases: b.clone() });
    let Payload::BasisReveal { bases: seen } = announced.payload else {
        unreachable!("classical channel delivers verbatim")
    };
    let matches = BitString::from_bools(seen.iter().zip(b_prime.iter()).map(|(x, y)| x == y));
    channels.send(
        Party::Receiver,
        Payload::BasisMatch {
            matches: matches.clone(),
        },
    );
    let kept_indices: Vec<usize> = matches
        .iter()
        .enumerate()
        .filter(|(_, m)| *m == 1)
        .map(|(i, _)| i + 1)
        .collect();
    Ok(SiftResult {
        sender_key: s.select(&kept_indices),
        receiver_key: s_prime.select(&kept_indices),
        kept_indices,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QberEstimate {
    pub qber: f64,
    pub sampled: usize,
    pub disagreements: usize,
    /// Sifted key with the disclosed positions removed.
    pub remaining: SiftResult,
}

/// Discloses a uniform sample of `sample_size` sifted positions and measures
/// their disagreement rate. Disclosed bits are removed from the key.
///
/// An empty sample reports a rate of 0.
pub fn estimate_qber<R: Rng + ?Sized>(
    sift: &SiftResult,
    sample_size: usize,
    channels: &mut Channels,
    rng: &mut R,
) -> Result<QberEstimate, Error> {
    let len = sift.len();
    if sample_size > len {
        return Err(invalid(format!("sample size {sample_size} exceeds sifted key length {len}")));
    }
    let mut picked = index::sample(rng, len, sample_size).into_vec();
    picked.sort_unstable();

    let samples: Vec<(usize, u8)> = picked.iter().map(|&i| (i + 1, sift.sender_key.as_slice()[i])).collect();
    let delivered = channels.send(Party::Sender, Payload::QberSample { samples });
    let Payload::QberSample { samples } = delivered.payload else {
        unreachable!("classical channel delivers verbatim")
    };
    let disagreements = samples
        .iter()
        .filter(|(pos, bit)| sift.receiver_key.get(*pos) != Some(*bit))
        .count();

    let mut burned = vec![false; len];
    for &i in &picked {
        burned[i] = true;
    }
    let keep: Vec<usize> = (0..len).filter(|i| !burned[*i]).collect();
    let remaining = SiftResult {
        kept_indices: keep.iter().map(|&i| sift.kept_indices[i]).collect(),
        sender_key: keep.iter().map(|&i| sift.sender_key.as_slice()[i]).collect(),
        receiver_key: keep.iter().map(|&i| sift.receiver_key.as_slice()[i]).collect(),
    };
    let qber = if sample_size == 0 {
        0.0
    } else {
        disagreements as f64 / sample_size as f64
    };
    Ok(QberEstimate {
        qber,
        sampled: sample_size,
        disagreements,
        remaining,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Proceed,
    Abort,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Decision::Proceed => "proceed",
            Decision::Abort => "abort",
        })
    }
}

/// Abort iff `qber` is strictly above `threshold`.
pub fn decide(qber: f64, threshold: f64) -> Decision {
    if qber > threshold {
        Decision::Abort
    } else {
        Decision::Proceed
    }
}

/// [`decide`], recorded in the trace as the `eve_check` decision.
pub fn detect_eve(qber: f64, threshold: f64, channels: &mut Channels) -> Decision {
    debug_assert!((0.0..=1.0).contains(&qber) && (0.0..=1.0).contains(&threshold));
    let d = decide(qber, threshold);
    channels.record_decision("eve_check", d.to_string());
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photon::{basis_of, Basis, Polarization};
    use crate::seed::rng_from_seed;

    #[test]
    fn prepared_photons_encode_their_bits() {
        let mut rng = rng_from_seed(1);
        let prep = sender_prepare(4, &BasisSet::bb84(), &mut rng).unwrap();
        for i in 1..=4 {
            let p = prep.photons[i - 1].polarization;
            assert_eq!(p, encode(prep.bits.get(i).unwrap(), prep.bases.get(i).unwrap()));
        }
    }

    #[test]
    fn zero_photons_rejected() {
        let mut rng = rng_from_seed(1);
        assert!(matches!(sender_prepare(0, &BasisSet::bb84(), &mut rng), Err(Error::InvalidArgument(_))));
        assert!(receiver_measure(&[], &BasisSet::bb84(), &mut rng).is_err());
    }

    #[test]
    fn basis_choice_is_balanced() {
        let mut rng = rng_from_seed(2);
        let prep = sender_prepare(10_000, &BasisSet::bb84(), &mut rng).unwrap();
        let rect = prep.bases.iter().filter(|b| *b == Basis::Rectilinear).count();
        assert!((rect as f64 / 10_000.0 - 0.5).abs() <= 0.02);
    }

    #[test]
    fn forced_rectilinear_reads_zeros() {
        let mut rng = rng_from_seed(3);
        let photons: Vec<Photon> = (0..32).map(|i| Photon::new(Polarization::Deg0, i)).collect();
        let bases: BasisString = std::iter::repeat_n(Basis::Rectilinear, 32).collect();
        let r = measure_in(&photons, &bases, &mut rng).unwrap();
        assert!(r.bits.iter().all(|b| b == 0));
    }

    #[test]
    fn noiseless_matching_positions_agree() {
        let mut rng = rng_from_seed(4);
        let prep = sender_prepare(10_000, &BasisSet::bb84(), &mut rng).unwrap();
        let read = receiver_measure(&prep.photons, &BasisSet::bb84(), &mut rng).unwrap();
        let mut matched = 0;
        for i in 1..=10_000 {
            if prep.bases.get(i) == read.bases.get(i) {
                matched += 1;
                assert_eq!(prep.bits.get(i), read.bits.get(i));
            }
        }
        assert!((matched as f64 / 10_000.0 - 0.5).abs() <= 0.02);
    }

    #[test]
    fn sift_rule() {
        let s: BitString = "0110".parse().unwrap();
        let sp: BitString = "0100".parse().unwrap();
        let b: BasisString = "RDRD".parse().unwrap();
        let bp: BasisString = "RRRD".parse().unwrap();
        let mut ch = Channels::noiseless();
        let r = sift(&s, &b, &bp, &sp, &mut ch).unwrap();
        assert_eq!(r.kept_indices, vec![1, 3, 4]);
        assert_eq!(r.sender_key.to_string(), "010");
        assert_eq!(r.receiver_key.to_string(), "000");
        assert_eq!(ch.trace().classical("basis_reveal").count(), 1);
        assert_eq!(ch.trace().classical("basis_match").count(), 1);

        let all = sift(&s, &b, &b, &sp, &mut ch).unwrap();
        assert_eq!(all.kept_indices, vec![1, 2, 3, 4]);
    }

    #[test]
    fn sift_length_mismatch() {
        let s: BitString = "01".parse().unwrap();
        let b: BasisString = "RDR".parse().unwrap();
        let mut ch = Channels::noiseless();
        assert!(sift(&s, &b, &b, &s, &mut ch).is_err());
    }

    #[test]
    fn sifted_fraction() {
        let mut rng = rng_from_seed(8);
        let prep = sender_prepare(10_000, &BasisSet::bb84(), &mut rng).unwrap();
        let read = receiver_measure(&prep.photons, &BasisSet::bb84(), &mut rng).unwrap();
        let mut ch = Channels::noiseless();
        let r = sift(&prep.bits, &prep.bases, &read.bases, &read.bits, &mut ch).unwrap();
        assert!((r.len() as f64 / 10_000.0 - 0.5).abs() <= 0.02);
        assert_eq!(r.errors(), 0);
        for &i in &r.kept_indices {
            assert_eq!(basis_of(prep.photons[i - 1].polarization), read.bases.get(i).unwrap());
        }
    }

    fn keys(a: &str, b: &str) -> SiftResult {
        let sender_key: BitString = a.parse().unwrap();
        SiftResult {
            kept_indices: (1..=sender_key.len()).collect(),
            receiver_key: b.parse().unwrap(),
            sender_key,
        }
    }

    #[test]
    fn qber_exact_counts() {
        let mut rng = rng_from_seed(9);
        let mut ch = Channels::noiseless();
        let same = keys("0110101", "0110101");
        let est = estimate_qber(&same, 4, &mut ch, &mut rng).unwrap();
        assert_eq!(est.qber, 0.0);
        assert_eq!(est.remaining.len(), 3);

        let a = "0".repeat(100);
        let b = format!("{}{}", "1".repeat(25), "0".repeat(75));
        let est = estimate_qber(&keys(&a, &b), 100, &mut ch, &mut rng).unwrap();
        assert_eq!(est.qber, 0.25);
        assert!(est.remaining.is_empty());
        assert!(estimate_qber(&same, 8, &mut ch, &mut rng).is_err());
    }

    #[test]
    fn qber_burns_exactly_the_sample() {
        let mut rng = rng_from_seed(10);
        let mut ch = Channels::noiseless();
        let k = keys(&"01".repeat(50), &"01".repeat(50));
        let est = estimate_qber(&k, 37, &mut ch, &mut rng).unwrap();
        assert_eq!(est.remaining.len(), 63);
        let Payload::QberSample { samples } = ch.trace().classical("qber_sample").next().unwrap().2.clone() else {
            panic!()
        };
        for (pos, _) in samples {
            assert!(!est.remaining.kept_indices.contains(&pos));
        }
    }

    #[test]
    fn decision_boundary() {
        let mut ch = Channels::noiseless();
        assert_eq!(detect_eve(0.0, 0.11, &mut ch), Decision::Proceed);
        assert_eq!(detect_eve(0.25, 0.11, &mut ch), Decision::Abort);
        assert_eq!(detect_eve(0.11, 0.11, &mut ch), Decision::Proceed);
        assert_eq!(ch.trace().count_kind("decision"), 3);
    }
}
