//! Base selection and transmission synchronization.
//!
//! Both endpoints read the same primary key and derive the same session:
//!
//! * bits 1-2 pick a pair of bases,
//! * bits 3-6 pick the spacing between real photons in milliseconds,
//! * bits 7.. pick, per real photon, which of the two bases carries it
//!   (0 for the first, 1 for the second), cycling back to bit 7 when the
//!   key runs out.
//!
//! The sender emits one photon every millisecond. On ticks that are a
//! multiple of the interval after the start mark it sends the next message
//! bit in the scheduled basis; on every other tick it sends a fake photon
//! in one of the six states, chosen uniformly. The receiver only reads the
//! scheduled ticks.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::{BasisString, BitString};
use crate::channels::{Channels, ClassicalMessage, Eavesdropper, EventDetail, Party, Payload, QuantumChannelConfig};
use crate::error::{invalid, Error};
use crate::photon::{encode, measure, Basis, BasisSet, Photon, Polarization};
use crate::seed::{SeedTree, Stage};

/// Two base-selection bits, four timing bits, at least one schedule bit.
pub const MIN_PRIMARY_KEY_BITS: usize = 7;
const SCHEDULE_OFFSET: usize = 6;

/// Base pair lookup. `00` and `11` both give rectilinear/diagonal.
pub fn select_bases(bit1: u8, bit2: u8) -> (Basis, Basis) {
    match (bit1 & 1, bit2 & 1) {
        (0, 0) => (Basis::Rectilinear, Basis::Diagonal),
        (0, 1) => (Basis::Rectilinear, Basis::Circular),
        (1, 0) => (Basis::Circular, Basis::Diagonal),
        _ => (Basis::Rectilinear, Basis::Diagonal),
    }
}

/// How bits 3-6 become an interval.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingRule {
    /// Binary value plus one: `0000` is 1 ms, `1111` is 16 ms.
    #[default]
    Table2,
    /// Binary value as is (`1001` is 9 ms); `0000` is read as 16 ms.
    Example9,
}

impl fmt::Display for TimingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            TimingRule::Table2 => "table2",
            TimingRule::Example9 => "example9",
        })
    }
}

impl FromStr for TimingRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table2" => Ok(TimingRule::Table2),
            "example9" => Ok(TimingRule::Example9),
            other => Err(invalid(format!("unknown timing rule {other:?} (expected table2 or example9)"))),
        }
    }
}

/// Interval in ms for four timing bits, most significant first.
pub fn timing_interval(bits: [u8; 4], rule: TimingRule) -> u32 {
    let value = bits.iter().fold(0u32, |acc, b| (acc << 1) | u32::from(b & 1));
    match rule {
        TimingRule::Table2 => value + 1,
        TimingRule::Example9 if value == 0 => 16,
        TimingRule::Example9 => value,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PrimaryKey(BitString);

impl PrimaryKey {
    pub fn new(bits: BitString) -> Result<Self, Error> {
        if bits.len() < MIN_PRIMARY_KEY_BITS {
            return Err(Error::KeyTooShort {
                len: bits.len(),
                min: MIN_PRIMARY_KEY_BITS,
            });
        }
        Ok(Self(bits))
    }

    pub fn bits(&self) -> &BitString {
        &self.0
    }
}

impl FromStr for PrimaryKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s.parse()?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SessionParams {
    pub base1: Basis,
    pub base2: Basis,
    pub interval_ms: u32,
    /// One basis per primary-key bit from position 7 on.
    pub schedule: BasisString,
}

impl SessionParams {
    /// Basis for the `i`-th real photon (1-based); the schedule repeats.
    ///
    /// # Panics
    /// If `i` is 0.
    pub fn basis_for(&self, i: usize) -> Basis {
        assert!(i >= 1, "photon indices are 1-based");
        self.schedule.as_slice()[(i - 1) % self.schedule.len()]
    }

    pub fn pair(&self) -> BasisSet {
        BasisSet::pair(self.base1, self.base2)
    }
}

pub fn derive_session(key: &PrimaryKey, rule: TimingRule) -> SessionParams {
    let bits = key.bits().as_slice();
    let (base1, base2) = select_bases(bits[0], bits[1]);
    let interval_ms = timing_interval([bits[2], bits[3], bits[4], bits[5]], rule);
    let schedule = bits[SCHEDULE_OFFSET..]
        .iter()
        .map(|&b| if b == 0 { base1 } else { base2 })
        .collect();
    SessionParams {
        base1,
        base2,
        interval_ms,
        schedule,
    }
}

pub fn schedule_basis(params: &SessionParams, i: usize) -> Basis {
    params.basis_for(i)
}

fn is_real_slot(start_ms: u64, t_ms: u64, interval_ms: u32) -> bool {
    t_ms > start_ms && (t_ms - start_ms).is_multiple_of(u64::from(interval_ms))
}

/// Sending endpoint. Drive with [`start`](Self::start), then one
/// [`on_tick`](Self::on_tick) per clock tick until [`is_done`](Self::is_done),
/// then [`finish`](Self::finish).
#[derive(Debug, Clone)]
pub struct BstsSender {
    message: BitString,
    params: SessionParams,
    start_ms: Option<u64>,
    sent: usize,
}

impl BstsSender {
    pub fn new(message: BitString, params: SessionParams) -> Result<Self, Error> {
        if message.is_empty() {
            return Err(invalid("message must contain at least one bit"));
        }
        Ok(Self {
            message,
            params,
            start_ms: None,
            sent: 0,
        })
    }

    pub fn start(&mut self, channels: &mut Channels) -> ClassicalMessage {
        let t_ms = channels.now();
        self.start_ms = Some(t_ms);
        channels.send(Party::Sender, Payload::BstsStart { t_ms })
    }

    pub fn is_done(&self) -> bool {
        self.sent == self.message.len()
    }

    /// Emits this tick's photon (real or fake) into the quantum channel and
    /// returns it as it arrives at the far end.
    pub fn on_tick<R1, R2>(&mut self, channels: &mut Channels, rng: &mut R1, channel_rng: &mut R2) -> Photon
    where
        R1: Rng + ?Sized,
        R2: Rng + ?Sized,
    {
        let start = self.start_ms.expect("sender not started");
        let t = channels.now();
        if !self.is_done() && is_real_slot(start, t, self.params.interval_ms) {
            self.sent += 1;
            let basis = self.params.basis_for(self.sent);
            let bit = self.message.get(self.sent).expect("within message");
            channels.emit_photon(encode(bit, basis), true, channel_rng)
        } else {
            let fake = Polarization::ALL[rng.random_range(0..Polarization::ALL.len())];
            channels.emit_photon(fake, false, channel_rng)
        }
    }

    pub fn finish(&mut self, channels: &mut Channels) -> ClassicalMessage {
        channels.send(Party::Sender, Payload::BstsEnd { t_ms: channels.now() })
    }
}

/// Receiving endpoint: listens between the start and end marks and reads
/// only the scheduled ticks.
#[derive(Debug, Clone)]
pub struct BstsReceiver {
    params: SessionParams,
    start_ms: Option<u64>,
    ended: bool,
    decoded: BitString,
}

impl BstsReceiver {
    pub fn new(params: SessionParams) -> Self {
        Self {
            params,
            start_ms: None,
            ended: false,
            decoded: BitString::new(),
        }
    }

    pub fn on_classical(&mut self, msg: &ClassicalMessage) -> Result<(), Error> {
        match msg.payload {
            Payload::BstsStart { t_ms } => {
                if self.start_ms.is_some() {
                    return Err(Error::ProtocolViolation("second start mark".into()));
                }
                self.start_ms = Some(t_ms);
            }
            Payload::BstsEnd { t_ms } => match self.start_ms {
                None => return Err(Error::ProtocolViolation("end mark before start mark".into())),
                Some(start) if t_ms < start => {
                    return Err(Error::ProtocolViolation(format!("end mark at {t_ms} ms precedes start at {start} ms")))
                }
                Some(_) => self.ended = true,
            },
            _ => {}
        }
        Ok(())
    }

    /// Reads `photon` if `t_ms` is a scheduled tick; fakes are left unmeasured.
    /// Returns the basis used and the bit read.
    pub fn on_photon<R: Rng + ?Sized>(&mut self, t_ms: u64, photon: &Photon, rng: &mut R) -> Option<(Basis, u8)> {
        let start = self.start_ms?;
        if self.ended || !is_real_slot(start, t_ms, self.params.interval_ms) {
            return None;
        }
        let basis = self.params.basis_for(self.decoded.len() + 1);
        let bit = measure(photon, basis, rng).bit;
        self.decoded.push(bit);
        Some((basis, bit))
    }

    pub fn finish(self) -> Result<BitString, Error> {
        if self.start_ms.is_none() {
            return Err(Error::ProtocolViolation("no start mark observed".into()));
        }
        Ok(self.decoded)
    }
}

/// Photons as they arrived, with the marks that bracket them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SendLog {
    pub start_ms: u64,
    pub end_ms: u64,
    pub arrivals: Vec<(u64, Photon)>,
}

/// Runs the sender alone and records what reaches the receiving end.
pub fn bsts_send<R1, R2>(
    message: &BitString,
    params: &SessionParams,
    channels: &mut Channels,
    rng: &mut R1,
    channel_rng: &mut R2,
) -> Result<SendLog, Error>
where
    R1: Rng + ?Sized,
    R2: Rng + ?Sized,
{
    let mut tx = BstsSender::new(message.clone(), params.clone())?;
    let start_ms = channels.now();
    tx.start(channels);
    let mut arrivals = Vec::new();
    while !tx.is_done() {
        channels.tick();
        let photon = tx.on_tick(channels, rng, channel_rng);
        arrivals.push((channels.now(), photon));
    }
    tx.finish(channels);
    Ok(SendLog {
        start_ms,
        end_ms: channels.now(),
        arrivals,
    })
}

/// Decodes a recorded transmission. Untraced counterpart of [`bsts_transfer`].
pub fn bsts_receive<R: Rng + ?Sized>(params: &SessionParams, log: &SendLog, rng: &mut R) -> Result<BitString, Error> {
    let mut rx = BstsReceiver::new(params.clone());
    let mark = |t_ms, payload| ClassicalMessage {
        from: Party::Sender,
        t_ms,
        payload,
    };
    rx.on_classical(&mark(log.start_ms, Payload::BstsStart { t_ms: log.start_ms }))?;
    for (t, photon) in &log.arrivals {
        rx.on_photon(*t, photon, rng);
    }
    rx.on_classical(&mark(log.end_ms, Payload::BstsEnd { t_ms: log.end_ms }))?;
    rx.finish()
}

/// Random sources for one transfer.
pub struct TransferRngs<'a, R: Rng + ?Sized> {
    pub sender: &'a mut R,
    pub receiver: &'a mut R,
    pub channel: &'a mut R,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transfer {
    pub decoded: BitString,
    pub start_ms: u64,
    pub end_ms: u64,
    /// Tags of the real photons, in message order.
    pub real_tags: Vec<u64>,
}

/// Full traced transfer: sender and receiver advance together tick by tick.
/// Each side uses its own copy of the session parameters.
pub fn bsts_transfer<R: Rng + ?Sized>(
    message: &BitString,
    sender_params: &SessionParams,
    receiver_params: &SessionParams,
    channels: &mut Channels,
    rngs: TransferRngs<'_, R>,
) -> Result<Transfer, Error> {
    let mut tx = BstsSender::new(message.clone(), sender_params.clone())?;
    let mut rx = BstsReceiver::new(receiver_params.clone());
    let start = tx.start(channels);
    rx.on_classical(&start)?;
    let mut real_tags = Vec::with_capacity(message.len());
    while !tx.is_done() {
        channels.tick();
        let before = tx.sent;
        let photon = tx.on_tick(channels, rngs.sender, rngs.channel);
        if tx.sent > before {
            real_tags.push(photon.tag);
        }
        if let Some((basis, bit)) = rx.on_photon(channels.now(), &photon, rngs.receiver) {
            channels.record_measurement(photon.tag, basis, bit);
        }
    }
    let end = tx.finish(channels);
    rx.on_classical(&end)?;
    Ok(Transfer {
        decoded: rx.finish()?,
        start_ms: start.t_ms,
        end_ms: end.t_ms,
        real_tags,
    })
}

/// Tags of real photons recorded in the trace, in send order.
pub fn real_photon_tags(channels: &Channels) -> Vec<u64> {
    channels
        .trace()
        .events
        .iter()
        .filter_map(|e| match e.detail {
            EventDetail::PhotonSent { tag, real: true, .. } => Some(tag),
            _ => None,
        })
        .collect()
}

/// Fraction of message bits the eavesdropper's log has right, if she was listening.
pub fn eve_accuracy(message: &BitString, transfer: &Transfer, channels: &Channels) -> Option<f64> {
    let log = channels.eve_log();
    if log.is_empty() {
        return None;
    }
    let by_tag: std::collections::HashMap<u64, u8> = log.iter().map(|r| (r.tag, r.bit)).collect();
    let right = transfer
        .real_tags
        .iter()
        .zip(message.iter())
        .filter(|(tag, bit)| by_tag.get(tag) == Some(bit))
        .count();
    Some(right as f64 / message.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EveExperiment {
    /// `None` when no eavesdropper was present.
    pub eve_accuracy: Option<f64>,
    pub receiver_error: f64,
}

/// Runs one noiseless transfer with an intercept-resend eavesdropper (or
/// none) reading every photon, real or fake.
pub fn simulate_bsts_eve(
    message: &BitString,
    params: &SessionParams,
    eve_basis_set: Option<&BasisSet>,
    seed: u64,
) -> Result<EveExperiment, Error> {
    let eve = match eve_basis_set {
        Some(set) => Eavesdropper::InterceptResend(set.clone()),
        None => Eavesdropper::None,
    };
    let mut channels = Channels::new(QuantumChannelConfig::new(0.0, eve)?);
    let seeds = SeedTree::new(seed);
    let (mut s, mut r, mut c) = (seeds.rng(Stage::BstsSender), seeds.rng(Stage::BstsReceiver), seeds.rng(Stage::QuantumChannel));
    let transfer = bsts_transfer(
        message,
        params,
        params,
        &mut channels,
        TransferRngs {
            sender: &mut s,
            receiver: &mut r,
            channel: &mut c,
        },
    )?;
    Ok(EveExperiment {
        eve_accuracy: eve_accuracy(message, &transfer, &channels),
        receiver_error: transfer.decoded.hamming(message) as f64 / message.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    fn worked_example() -> SessionParams {
        derive_session(&"01100110011".parse().unwrap(), TimingRule::Table2)
    }

    #[test]
    fn base_table() {
        use Basis::*;
        assert_eq!(select_bases(0, 0), (Rectilinear, Diagonal));
        assert_eq!(select_bases(0, 1), (Rectilinear, Circular));
        assert_eq!(select_bases(1, 0), (Circular, Diagonal));
        assert_eq!(select_bases(1, 1), (Rectilinear, Diagonal));
    }

    #[test]
    fn timing_rules() {
        assert_eq!(timing_interval([0, 0, 0, 0], TimingRule::Table2), 1);
        assert_eq!(timing_interval([1, 1, 1, 1], TimingRule::Table2), 16);
        assert_eq!(timing_interval([1, 0, 0, 1], TimingRule::Table2), 10);
        assert_eq!(timing_interval([1, 0, 0, 1], TimingRule::Example9), 9);
        assert_eq!(timing_interval([0, 0, 0, 0], TimingRule::Example9), 16);
        assert_eq!("example9".parse::<TimingRule>().unwrap(), TimingRule::Example9);
        assert!("table3".parse::<TimingRule>().is_err());
    }

    #[test]
    fn derive_examples() {
        let p = worked_example();
        assert_eq!((p.base1, p.base2), (Basis::Rectilinear, Basis::Circular));
        assert_eq!(p.schedule.to_string(), "CRRCC");
        assert_eq!(p.interval_ms, 10);

        let p = derive_session(&"0000001".parse().unwrap(), TimingRule::Table2);
        assert_eq!((p.base1, p.base2, p.interval_ms), (Basis::Rectilinear, Basis::Diagonal, 1));
        assert_eq!(p.schedule.to_string(), "D");

        assert_eq!("011001".parse::<PrimaryKey>(), Err(Error::KeyTooShort { len: 6, min: 7 }));
    }

    #[test]
    fn schedule_wraps() {
        let p = worked_example();
        assert_eq!(schedule_basis(&p, 1), Basis::Circular);
        assert_eq!(schedule_basis(&p, 5), Basis::Circular);
        assert_eq!(schedule_basis(&p, 6), Basis::Circular);
        assert_eq!(schedule_basis(&p, 7), Basis::Rectilinear);
    }

    #[test]
    fn real_slots_are_interval_multiples() {
        let mut p = worked_example();
        p.interval_ms = 10;
        let mut ch = Channels::noiseless();
        let (mut a, mut b) = (rng_from_seed(1), rng_from_seed(2));
        let log = bsts_send(&"101".parse().unwrap(), &p, &mut ch, &mut a, &mut b).unwrap();
        let real: Vec<u64> = ch
            .trace()
            .events
            .iter()
            .filter_map(|e| match e.detail {
                EventDetail::PhotonSent { real: true, .. } => Some(e.t_ms),
                _ => None,
            })
            .collect();
        assert_eq!(real, vec![10, 20, 30]);
        assert_eq!(log.arrivals.len(), 30);
        assert_eq!(ch.trace().count_kind("photon_sent"), 30);
        assert_eq!((log.start_ms, log.end_ms), (0, 30));

        let decoded = bsts_receive(&p, &log, &mut rng_from_seed(3)).unwrap();
        assert_eq!(decoded.to_string(), "101");
    }

    #[test]
    fn real_photons_follow_schedule() {
        let p = worked_example();
        let mut ch = Channels::noiseless();
        let (mut a, mut b) = (rng_from_seed(1), rng_from_seed(2));
        bsts_send(&"10".parse().unwrap(), &p, &mut ch, &mut a, &mut b).unwrap();
        let real: Vec<Polarization> = ch
            .trace()
            .events
            .iter()
            .filter_map(|e| match e.detail {
                EventDetail::PhotonSent {
                    real: true,
                    polarization,
                    ..
                } => Some(polarization),
                _ => None,
            })
            .collect();
        assert_eq!(real, vec![Polarization::SpinR, Polarization::Deg0]);
    }

    #[test]
    fn empty_message_rejected() {
        let mut ch = Channels::noiseless();
        let (mut a, mut b) = (rng_from_seed(1), rng_from_seed(2));
        assert!(bsts_send(&BitString::new(), &worked_example(), &mut ch, &mut a, &mut b).is_err());
    }

    #[test]
    fn end_before_start_is_a_violation() {
        let mut rx = BstsReceiver::new(worked_example());
        let end = ClassicalMessage {
            from: Party::Sender,
            t_ms: 5,
            payload: Payload::BstsEnd { t_ms: 5 },
        };
        assert!(matches!(rx.on_classical(&end), Err(Error::ProtocolViolation(_))));
        assert!(matches!(rx.finish(), Err(Error::ProtocolViolation(_))));
    }

    #[test]
    fn photons_outside_marks_are_ignored() {
        let p = worked_example();
        let mut rx = BstsReceiver::new(p);
        let mut rng = rng_from_seed(0);
        let ph = Photon::new(Polarization::SpinR, 0);
        assert_eq!(rx.on_photon(10, &ph, &mut rng), None);
        rx.on_classical(&ClassicalMessage {
            from: Party::Sender,
            t_ms: 0,
            payload: Payload::BstsStart { t_ms: 0 },
        })
        .unwrap();
        assert_eq!(rx.on_photon(9, &ph, &mut rng), None);
        assert_eq!(rx.on_photon(10, &ph, &mut rng), Some((Basis::Circular, 1)));
        assert_eq!(rx.finish().unwrap().to_string(), "1");
    }

    #[test]
    fn noisy_transfer_error_rate() {
        let p = worked_example();
        let message = BitString::random(10_000, &mut rng_from_seed(4));
        let mut ch = Channels::new(QuantumChannelConfig::new(0.1, Eavesdropper::None).unwrap());
        let (mut s, mut r, mut c) = (rng_from_seed(5), rng_from_seed(6), rng_from_seed(7));
        let t = bsts_transfer(
            &message,
            &p,
            &p,
            &mut ch,
            TransferRngs {
                sender: &mut s,
                receiver: &mut r,
                channel: &mut c,
            },
        )
        .unwrap();
        let frac = t.decoded.hamming(&message) as f64 / 10_000.0;
        assert!((frac - 0.1).abs() <= 0.012, "error fraction {frac}");
        assert_eq!(ch.trace().count_kind("photon_measured"), 10_000);
    }

    #[test]
    fn no_eve_baseline() {
        let message = BitString::random(500, &mut rng_from_seed(1));
        let e = simulate_bsts_eve(&message, &worked_example(), None, 3).unwrap();
        assert_eq!(e.eve_accuracy, None);
        assert_eq!(e.receiver_error, 0.0);
    }
}
