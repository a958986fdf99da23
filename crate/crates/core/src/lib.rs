//! Deterministic discrete-time simulator for BB84 quantum key distribution and
//! for base-selection / transmission-synchronized (BSTS) message transfer.
//!
//! The pipeline mirrors a two-channel QKD link:
//!
//! 1. [`bb84`] prepares, transmits and measures photons, sifts the raw keys
//!    and estimates the error rate to detect an intercept-resend eavesdropper.
//! 2. [`postprocess`] reconciles the sifted keys by interactive parity
//!    bisection and optionally shrinks them by permutation and discard.
//! 3. [`bsts`] derives a base pair, a millisecond interval and a per-photon
//!    basis schedule from the resulting primary key, then sends message bits
//!    on scheduled ticks hidden among randomly polarized fake photons.
//!
//! [`session`] wires the stages together and is what the `bsts` binary and the
//! crate examples drive. Every random choice flows from a single root seed, so
//! a configuration and seed fully determine the trace and the report.
//!
//! ```bash
//! cargo run --example bsts_worked_example
//! cargo run --bin bsts -- session --photons 4096 --seed 7
//! ```

pub mod bb84;
pub mod bits;
pub mod bsts;
pub mod channels;
pub mod error;
pub mod photon;
pub mod postprocess;
pub mod seed;
pub mod session;

pub use bits::{BasisString, BitString};
pub use channels::{Channels, Eavesdropper, QuantumChannelConfig, SessionTrace};
pub use error::{Error, Result};
pub use photon::{basis_of, encode, measure, Basis, BasisSet, Photon, Polarization};
pub use seed::{SeedTree, SimRng, Stage};
