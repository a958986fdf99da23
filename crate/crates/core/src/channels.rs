//! Quantum and classical channels, the millisecond clock and the session trace.
//!
//! The quantum channel carries photons through an optional intercept-resend
//! eavesdropper followed by basis-preserving bit-flip noise. The classical
//! channel is public and authenticated: every message is delivered verbatim,
//! recorded in the trace, and appended to the eavesdropper's view.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::{BasisString, BitString};
use crate::error::{invalid, Error};
use crate::photon::{basis_of, encode, measure, Basis, BasisSet, Photon, Polarization};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum Eavesdropper {
    #[default]
    None,
    /// Measure every photon in a basis drawn uniformly from the set and
    /// forward the collapsed state.
    InterceptResend(BasisSet),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumChannelConfig {
    noise_flip_prob: f64,
    eavesdropper: Eavesdropper,
}

impl Default for QuantumChannelConfig {
    fn default() -> Self {
        Self {
            noise_flip_prob: 0.0,
            eavesdropper: Eavesdropper::None,
        }
    }
}

impl QuantumChannelConfig {
    pub fn new(noise_flip_prob: f64, eavesdropper: Eavesdropper) -> Result<Self, Error> {
        if !(0.0..=1.0).contains(&noise_flip_prob) {
            return Err(invalid(format!("noise_flip_prob {noise_flip_prob} outside [0, 1]")));
        }
        Ok(Self {
            noise_flip_prob,
            eavesdropper,
        })
    }

    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn noise_flip_prob(&self) -> f64 {
        self.noise_flip_prob
    }

    pub fn eavesdropper(&self) -> &Eavesdropper {
        &self.eavesdropper
    }
}

/// One photon as seen by the eavesdropper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EveRecord {
    pub tag: u64,
    pub basis: Basis,
    pub bit: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interception {
    pub resent: Photon,
    pub eve_bit: u8,
    pub eve_basis: Basis,
}

/// Intercept-resend: measure in a basis drawn from `basis_set`, forward the collapsed photon.
pub fn eve_intercept<R: Rng + ?Sized>(photon: Photon, basis_set: &BasisSet, rng: &mut R) -> Interception {
    let eve_basis = basis_set.choose(rng);
    let m = measure(&photon, eve_basis, rng);
    Interception {
        resent: photon.with_polarization(m.collapsed),
        eve_bit: m.bit,
        eve_basis,
    }
}

/// Basis-preserving bit flip.
pub fn flip(p: Polarization) -> Polarization {
    encode(1 - p.bit(), basis_of(p))
}

#[derive(Debug, Clone, Default)]
pub struct QuantumChannel {
    config: QuantumChannelConfig,
    eve_log: Vec<EveRecord>,
}

impl QuantumChannel {
    pub fn new(config: QuantumChannelConfig) -> Self {
        Self {
            config,
            eve_log: Vec::new(),
        }
    }

    pub fn config(&self) -> &QuantumChannelConfig {
        &self.config
    }

    /// Eavesdropper's private measurement log, in transmission order.
    pub fn eve_log(&self) -> &[EveRecord] {
        &self.eve_log
    }

    /// Carries one photon across the fiber. The eavesdropper, when present,
    /// acts before noise.
    pub fn transmit<R: Rng + ?Sized>(&mut self, photon: Photon, rng: &mut R) -> Photon {
        let mut photon = photon;
        if let Eavesdropper::InterceptResend(set) = &self.config.eavesdropper {
            let hit = eve_intercept(photon, set, rng);
            self.eve_log.push(EveRecord {
                tag: photon.tag,
                basis: hit.eve_basis,
                bit: hit.eve_bit,
            });
            photon = hit.resent;
        }
        let p = self.config.noise_flip_prob;
        if p > 0.0 && rng.random_bool(p) {
            photon = photon.with_polarization(flip(photon.polarization));
        }
        photon
    }
}

/// Stateless form of [`QuantumChannel::transmit`] that drops the eavesdropper's record.
pub fn transmit_quantum<R: Rng + ?Sized>(photon: Photon, cfg: &QuantumChannelConfig, rng: &mut R) -> Photon {
    QuantumChannel::new(cfg.clone()).transmit(photon, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    Sender,
    Receiver,
}

/// Body of a classical message; serialized as `{"type": ..., "body": {...}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "body", rename_all = "snake_case")]
pub enum Payload {
    BasisReveal { bases: BasisString },
    /// `1` where the receiver used the announced basis.
    BasisMatch { matches: BitString },
    /// Disclosed (position, bit) pairs, 1-based positions into the sifted key.
    QberSample { samples: Vec<(usize, u8)> },
    PermSeed { pass: u32, seed: u64 },
    Parity {
        pass: u32,
        block_lo: usize,
        block_hi: usize,
        parity: u8,
    },
    Discard { position: usize },
    KeyCheck { parity: u8 },
    BstsStart { t_ms: u64 },
    BstsEnd { t_ms: u64 },
}

impl Payload {
    pub fn type_name(&self) -> &'static str {
        match self {
            Payload::BasisReveal { .. } => "basis_reveal",
            Payload::BasisMatch { .. } => "basis_match",
            Payload::QberSample { .. } => "qber_sample",
            Payload::PermSeed { .. } => "perm_seed",
            Payload::Parity { .. } => "parity",
            Payload::Discard { .. } => "discard",
            Payload::KeyCheck { .. } => "key_check",
            Payload::BstsStart { .. } => "bsts_start",
            Payload::BstsEnd { .. } => "bsts_end",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassicalMessage {
    pub from: Party,
    pub t_ms: u64,
    #[serde(flatten)]
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventDetail {
    PhotonSent {
        tag: u64,
        polarization: Polarization,
        real: bool,
    },
    PhotonMeasured {
        tag: u64,
        basis: Basis,
        bit: u8,
    },
    Classical {
        from: Party,
        #[serde(flatten)]
        payload: Payload,
    },
    Discard {
        position: usize,
    },
    Decision {
        name: String,
        value: String,
    },
}

impl EventDetail {
    pub fn kind(&self) -> &'static str {
        match self {
            EventDetail::PhotonSent { .. } => "photon_sent",
            EventDetail::PhotonMeasured { .. } => "photon_measured",
            EventDetail::Classical { .. } => "classical",
            EventDetail::Discard { .. } => "discard",
            EventDetail::Decision { .. } => "decision",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t_ms: u64,
    #[serde(flatten)]
    pub detail: EventDetail,
}

/// Ordered, timestamped log of every protocol action in a session.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionTrace {
    pub events: Vec<TraceEvent>,
}

impl SessionTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t_ms: u64, detail: EventDetail) {
        debug_assert!(
            self.events.last().is_none_or(|e| e.t_ms <= t_ms),
            "trace time went backwards"
        );
        self.events.push(TraceEvent { t_ms, detail });
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn is_time_ordered(&self) -> bool {
        self.events.windows(2).all(|w| w[0].t_ms <= w[1].t_ms)
    }

    pub fn count_kind(&self, kind: &str) -> usize {
        self.events.iter().filter(|e| e.detail.kind() == kind).count()
    }

    /// Classical messages of the given type, in order.
    pub fn classical<'a>(&'a self, type_name: &'a str) -> impl Iterator<Item = (u64, Party, &'a Payload)> + 'a {
        self.events.iter().filter_map(move |e| match &e.detail {
            EventDetail::Classical { from, payload } if payload.type_name() == type_name => Some((e.t_ms, *from, payload)),
            _ => None,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serialization is infallible")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Clock {
    pub now_ms: u64,
}

impl Clock {
    pub fn at(now_ms: u64) -> Self {
        Self { now_ms }
    }

    #[must_use]
    pub fn tick(self) -> Clock {
        Clock { now_ms: self.now_ms + 1 }
    }
}

/// Public authenticated channel. Its `view` is exactly what the eavesdropper reads.
#[derive(Debug, Clone, Default)]
pub struct ClassicalChannel {
    view: Vec<ClassicalMessage>,
}

impl ClassicalChannel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn send(&mut self, msg: ClassicalMessage, trace: &mut SessionTrace) -> ClassicalMessage {
        trace.push(
            msg.t_ms,
            EventDetail::Classical {
                from: msg.from,
                payload: msg.payload.clone(),
            },
        );
        self.view.push(msg.clone());
        msg
    }

    pub fn eve_view(&self) -> &[ClassicalMessage] {
        &self.view
    }
}

/// Both channels of a session, the clock they share, and the trace they write.
#[derive(Debug, Clone, Default)]
pub struct Channels {
    pub quantum: QuantumChannel,
    pub classical: ClassicalChannel,
    clock: Clock,
    trace: SessionTrace,
    next_tag: u64,
}

impl Channels {
    pub fn new(config: QuantumChannelConfig) -> Self {
        Self {
            quantum: QuantumChannel::new(config),
            ..Self::default()
        }
    }

    pub fn noiseless() -> Self {
        Self::new(QuantumChannelConfig::noiseless())
    }

    pub fn now(&self) -> u64 {
        self.clock.now_ms
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    pub fn tick(&mut self) -> u64 {
        self.clock = self.clock.tick();
        self.clock.now_ms
    }

    pub fn trace(&self) -> &SessionTrace {
        &self.trace
    }

    pub fn into_trace(self) -> SessionTrace {
        self.trace
    }

    /// Prepares a tagged photon, logs it as sent at the current tick and
    /// carries it across the quantum channel.
    pub fn emit_photon<R: Rng + ?Sized>(&mut self, polarization: Polarization, real: bool, rng: &mut R) -> Photon {
        let tag = self.next_tag;
        self.next_tag += 1;
        self.trace.push(
            self.clock.now_ms,
            EventDetail::PhotonSent {
                tag,
                polarization,
                real,
            },
        );
        self.quantum.transmit(Photon::new(polarization, tag), rng)
    }

    pub fn record_measurement(&mut self, tag: u64, basis: Basis, bit: u8) {
        self.trace
            .push(self.clock.now_ms, EventDetail::PhotonMeasured { tag, basis, bit });
    }

    pub fn send(&mut self, from: Party, payload: Payload) -> ClassicalMessage {
        let msg = ClassicalMessage {
            from,
            t_ms: self.clock.now_ms,
            payload,
        };
        self.classical.send(msg, &mut self.trace)
    }

    pub fn record_discard(&mut self, position: usize) {
        self.trace.push(self.clock.now_ms, EventDetail::Discard { position });
    }

    pub fn record_decision(&mut self, name: &str, value: impl Into<String>) {
        self.trace.push(
            self.clock.now_ms,
            EventDetail::Decision {
                name: name.to_owned(),
                value: value.into(),
            },
        );
    }

    pub fn eve_view(&self) -> &[ClassicalMessage] {
        self.classical.eve_view()
    }

    pub fn eve_log(&self) -> &[EveRecord] {
        self.quantum.eve_log()
    }
}
