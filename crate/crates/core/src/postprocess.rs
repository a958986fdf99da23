//! Key reconciliation by interactive parity bisection, and privacy
//! amplification by shared permutation and discard.
//!
//! Reconciliation runs in passes. Each pass both parties shuffle the
//! surviving positions with a permutation whose seed the sender announces,
//! cut the result into fixed-size blocks and exchange block parities. A block
//! whose parities differ is halved repeatedly until a single differing
//! position remains; that position is dropped from both keys. Bit values are
//! never changed. Passes stop after a run of error-free passes or at the pass
//! limit.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::channels::{Channels, Party, Payload};
use crate::error::{invalid, Error};
use crate::seed::rng_from_seed;

/// Extra bits dropped by privacy amplification beyond the leaked parities.
pub const AMPLIFY_SAFETY_BITS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconciliationParams {
    pub initial_block_size: usize,
    pub passes_without_error_to_stop: u32,
    pub max_passes: u32,
}

impl Default for ReconciliationParams {
    fn default() -> Self {
        Self {
            initial_block_size: 16,
            passes_without_error_to_stop: 2,
            max_passes: 32,
        }
    }
}

impl ReconciliationParams {
    pub fn validate(&self) -> Result<(), Error> {
        if self.initial_block_size == 0 || self.passes_without_error_to_stop == 0 || self.max_passes == 0 {
            return Err(invalid(format!("reconciliation parameters must all be >= 1: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconciliationResult {
    pub key_a: BitString,
    pub key_b: BitString,
    /// Original 1-based positions removed from both keys.
    pub discarded_positions: BTreeSet<usize>,
    pub leaked_parity_count: usize,
    pub passes: u32,
}

impl ReconciliationResult {
    pub fn keys_equal(&self) -> bool {
        self.key_a == self.key_b
    }
}

fn parity_of(bits: &[u8]) -> u8 {
    bits.iter().fold(0, |acc, b| acc ^ b)
}

/// XOR of the bits at 1-based positions `lo..=hi`.
pub fn block_parity(bits: &BitString, lo: usize, hi: usize) -> Result<u8, Error> {
    if lo == 0 || lo > hi || hi > bits.len() {
        return Err(invalid(format!("bad block range {lo}..={hi} for length {}", bits.len())));
    }
    Ok(parity_of(&bits.as_slice()[lo - 1..hi]))
}

/// Both parties publish their parity of `lo..=hi`. Returns (sender, receiver).
fn exchange_parity(a: &[u8], b: &[u8], lo: usize, hi: usize, pass: u32, channels: &mut Channels) -> (u8, u8) {
    let pa = parity_of(&a[lo - 1..hi]);
    let pb = parity_of(&b[lo - 1..hi]);
    let block_lo = lo;
    let block_hi = hi;
    channels.send(
        Party::Sender,
        Payload::Parity {
            pass,
            block_lo,
            block_hi,
            parity: pa,
        },
    );
    channels.send(
        Party::Receiver,
        Payload::Parity {
            pass,
            block_lo,
            block_hi,
            parity: pb,
        },
    );
    (pa, pb)
}

/// Halves `lo..=hi` until one position is left; the block parities must differ on entry.
/// Returns the 1-based position and the number of parity messages sent.
fn bisect(a: &[u8], b: &[u8], mut lo: usize, mut hi: usize, pass: u32, channels: &mut Channels) -> (usize, usize) {
    let mut sent = 0;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        let (pa, pb) = exchange_parity(a, b, lo, mid, pass, channels);
        sent += 2;
        if pa != pb {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    (lo, sent)
}

/// Locates one differing position inside a block whose parities disagree.
///
/// Each halving step publishes one parity per party on the classical channel,
/// so a block of `n` bits costs `ceil(log2 n)` messages per side.
pub fn bisect_error(a: &BitString, b: &BitString, lo: usize, hi: usize, channels: &mut Channels) -> Result<usize, Error> {
    if a.len() != b.len() {
        return Err(invalid("keys differ in length"));
    }
    if block_parity(a, lo, hi)? == block_parity(b, lo, hi)? {
        return Err(Error::ContractViolation(format!("block {lo}..={hi} has matching parities")));
    }
    Ok(bisect(a.as_slice(), b.as_slice(), lo, hi, 0, channels).0)
}

pub fn reconcile<R: Rng + ?Sized>(
    a: &BitString,
    b: &BitString,
    params: &ReconciliationParams,
    channels: &mut Channels,
    shared_rng: &mut R,
) -> Result<ReconciliationResult, Error> {
    params.validate()?;
    if a.len() != b.len() {
        return Err(invalid(format!("key lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(invalid("cannot reconcile empty keys"));
    }

    let (ka, kb) = (a.as_slice(), b.as_slice());
    // surviving original 0-based indices, in the current pass order
    let mut alive: Vec<usize> = (0..a.len()).collect();
    let mut discarded = BTreeSet::new();
    let mut leaked = 0usize;
    let mut clean_run = 0u32;
    let mut passes = 0u32;

    for pass in 1..=params.max_passes {
        passes = pass;
        let seed = shared_rng.next_u64();
        channels.send(Party::Sender, Payload::PermSeed { pass, seed });
        alive.sort_unstable();
        alive.shuffle(&mut rng_from_seed(seed));

        let pa: Vec<u8> = alive.iter().map(|&i| ka[i]).collect();
        let pb: Vec<u8> = alive.iter().map(|&i| kb[i]).collect();
        let block = params.initial_block_size.min(alive.len().max(1));
        let mut found = Vec::new();

        for start in (0..alive.len()).step_by(block) {
            let lo = start + 1;
            let hi = (start + block).min(alive.len());
            let (sa, sb) = exchange_parity(&pa, &pb, lo, hi, pass, channels);
            leaked += 2;
            if sa != sb {
                let (pos, sent) = bisect(&pa, &pb, lo, hi, pass, channels);
                leaked += sent;
                let original = alive[pos - 1] + 1;
                channels.send(Party::Sender, Payload::Discard { position: original });
                channels.record_discard(original);
                found.push(pos - 1);
            }
        }

        if found.is_empty() {
            clean_run += 1;
            if clean_run >= params.passes_without_error_to_stop {
                break;
            }
        } else {
            clean_run = 0;
            let drop: BTreeSet<usize> = found.into_iter().collect();
            for &slot in &drop {
                discarded.insert(alive[slot] + 1);
            }
            alive = alive
                .into_iter()
                .enumerate()
                .filter(|(slot, _)| !drop.contains(slot))
                .map(|(_, i)| i)
                .collect();
        }
    }

    alive.sort_unstable();
    Ok(ReconciliationResult {
        key_a: alive.iter().map(|&i| ka[i]).collect(),
        key_b: alive.iter().map(|&i| kb[i]).collect(),
        discarded_positions: discarded,
        leaked_parity_count: leaked,
        passes,
    })
}

/// Default discard rule: every leaked parity plus [`AMPLIFY_SAFETY_BITS`].
pub fn default_discard(leaked_parity_count: usize) -> usize {
    leaked_parity_count + AMPLIFY_SAFETY_BITS
}

/// Shuffles `key` with the shared random source and drops the first `discard_count` bits.
pub fn privacy_amplify<R: Rng + ?Sized>(key: &BitString, discard_count: usize, shared_rng: &mut R) -> Result<BitString, Error> {
    if discard_count > key.len() {
        return Err(invalid(format!("cannot discard {discard_count} of {} bits", key.len())));
    }
    let mut bits = key.as_slice().to_vec();
    bits.shuffle(shared_rng);
    Ok(bits.into_iter().skip(discard_count).collect())
}
