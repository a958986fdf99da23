//! End-to-end sessions: BB84, eavesdropper check, reconciliation, optional
//! amplification, then BSTS message transfer keyed by the result.
//!
//! Exit codes used by the binary: 0 success, 2 eavesdropper detected,
//! 3 post-processing failed (parity mismatch or key used up), 4 invalid
//! configuration or I/O failure.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bb84::{self, Decision, DEFAULT_QBER_THRESHOLD};
use crate::bits::BitString;
use crate::bsts::{self, PrimaryKey, TimingRule, TransferRngs, MIN_PRIMARY_KEY_BITS};
use crate::channels::{Channels, Eavesdropper, Party, Payload, QuantumChannelConfig, SessionTrace};
use crate::error::{invalid, Error};
use crate::photon::BasisSet;
use crate::postprocess::{self, ReconciliationParams};
use crate::seed::{SeedTree, Stage};

pub const EXIT_OK: i32 = 0;
pub const EXIT_EVE_DETECTED: i32 = 2;
pub const EXIT_RECONCILIATION: i32 = 3;
pub const EXIT_INVALID: i32 = 4;

/// Length of the random message sent when none is configured.
pub const DEFAULT_MESSAGE_BITS: usize = 64;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EveMode {
    #[default]
    None,
    InterceptResend,
}

impl std::str::FromStr for EveMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(EveMode::None),
            "intercept_resend" | "intercept-resend" => Ok(EveMode::InterceptResend),
            other => Err(invalid(format!("unknown eve mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub photons: usize,
    pub noise_flip_prob: f64,
    pub eve_mode: EveMode,
    pub eve_basis_set: BasisSet,
    pub seed: u64,
    pub sample_size: usize,
    pub qber_threshold: f64,
    pub timing_rule: TimingRule,
    /// Message to transfer; `None` sends [`DEFAULT_MESSAGE_BITS`] random bits
    /// drawn from the session seed.
    pub message: Option<BitString>,
    pub recon: ReconciliationParams,
    pub amplify: bool,
    pub trace_path: Option<PathBuf>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            photons: 4096,
            noise_flip_prob: 0.0,
            eve_mode: EveMode::None,
            eve_basis_set: BasisSet::bb84(),
            seed: 0,
            sample_size: 200,
            qber_threshold: DEFAULT_QBER_THRESHOLD,
            timing_rule: TimingRule::Table2,
            message: None,
            recon: ReconciliationParams::default(),
            amplify: false,
            trace_path: None,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.photons < self.sample_size + MIN_PRIMARY_KEY_BITS {
            return Err(invalid(format!(
                "photons ({}) must be at least sample_size + {MIN_PRIMARY_KEY_BITS} ({})",
                self.photons,
                self.sample_size + MIN_PRIMARY_KEY_BITS
            )));
        }
        for (name, v) in [("noise_flip_prob", self.noise_flip_prob), ("qber_threshold", self.qber_threshold)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if self.message.as_ref().is_some_and(BitString::is_empty) {
            return Err(invalid("message must contain at least one bit"));
        }
        self.recon.validate()
    }

    pub fn channel_config(&self) -> Result<QuantumChannelConfig, Error> {
        let eve = match self.eve_mode {
            EveMode::None => Eavesdropper::None,
            EveMode::InterceptResend => Eavesdropper::InterceptResend(self.eve_basis_set.clone()),
        };
        QuantumChannelConfig::new(self.noise_flip_prob, eve)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub seed: u64,
    pub sifted_len: usize,
    pub qber: f64,
    pub eve_decision: Decision,
    pub reconciled_len: usize,
    pub leaked_parity_count: usize,
    pub amplified_len: usize,
    pub bsts_interval_ms: Option<u32>,
    /// Base pair as two letters, e.g. `"RC"`.
    pub bsts_bases: Option<String>,
    pub message_delivered: bool,
    /// Bit-error fraction of the decoded message; `None` if nothing was sent.
    pub receiver_error: Option<f64>,
    /// Fraction of message bits the eavesdropper read correctly; `None` without one.
    pub eve_accuracy: Option<f64>,
}

impl SessionReport {
    fn new(seed: u64) -> Self {
        Self {
            seed,
            sifted_len: 0,
            qber: 0.0,
            eve_decision: Decision::Proceed,
            reconciled_len: 0,
            leaked_parity_count: 0,
            amplified_len: 0,
            bsts_interval_ms: None,
            bsts_bases: None,
            message_delivered: false,
            receiver_error: None,
            eve_accuracy: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serialization is infallible")
    }
}

impl fmt::Display for SessionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_owned(), |x| format!("{x:.4}"));
        writeln!(f, "seed                {}", self.seed)?;
        writeln!(f, "sifted key          {} bits", self.sifted_len)?;
        writeln!(f, "sampled QBER        {:.4}", self.qber)?;
        writeln!(f, "eavesdropper check  {}", self.eve_decision)?;
        writeln!(f, "reconciled key      {} bits ({} parities leaked)", self.reconciled_len, self.leaked_parity_count)?;
        writeln!(f, "primary key         {} bits", self.amplified_len)?;
        match (&self.bsts_bases, self.bsts_interval_ms) {
            (Some(b), Some(ms)) => writeln!(f, "BSTS session        bases {b}, every {ms} ms")?,
            _ => writeln!(f, "BSTS session        -")?,
        }
        writeln!(f, "message delivered   {}", self.message_delivered)?;
        writeln!(f, "receiver error      {}", opt(self.receiver_error))?;
        write!(f, "eve accuracy        {}", opt(self.eve_accuracy))
    }
}

#[derive(Debug, Clone)]
pub struct SessionRun {
    pub report: SessionReport,
    pub trace: SessionTrace,
}

impl SessionRun {
    pub fn exit_code(&self) -> i32 {
        match self.report.eve_decision {
            Decision::Abort => EXIT_EVE_DETECTED,
            Decision::Proceed => EXIT_OK,
        }
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(#[source] Error),

    #[error("reconciled keys failed the final parity check")]
    ReconciliationFailed(Box<SessionRun>),

    #[error("key exhausted: {reason}")]
    KeyExhausted { reason: String, run: Box<SessionRun> },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl SessionError {
    pub fn exit_code(&self) -> i32 {
        match self {
            SessionError::InvalidConfig(_) | SessionError::Io { .. } => EXIT_INVALID,
            SessionError::ReconciliationFailed(_) | SessionError::KeyExhausted { .. } => EXIT_RECONCILIATION,
        }
    }

    /// The partial run, when the pipeline got far enough to produce one.
    pub fn run(&self) -> Option<&SessionRun> {
        match self {
            SessionError::ReconciliationFailed(run) | SessionError::KeyExhausted { run, .. } => Some(run),
            _ => None,
        }
    }
}

fn exhausted(reason: String, report: SessionReport, channels: Channels) -> SessionError {
    SessionError::KeyExhausted {
        reason,
        run: Box::new(SessionRun {
            report,
            trace: channels.into_trace(),
        }),
    }
}

/// Runs the pipeline; writes the trace to `cfg.trace_path` when set.
pub fn run_full_session(cfg: &SessionConfig) -> Result<SessionRun, SessionError> {
    let result = run_pipeline(cfg);
    if let Some(path) = &cfg.trace_path {
        let trace = match &result {
            Ok(run) => Some(&run.trace),
            Err(e) => e.run().map(|r| &r.trace),
        };
        if let Some(trace) = trace {
            emit_trace(trace, path)?;
        }
    }
    result
}

fn run_pipeline(cfg: &SessionConfig) -> Result<SessionRun, SessionError> {
    cfg.validate().map_err(SessionError::InvalidConfig)?;
    let seeds = SeedTree::new(cfg.seed);
    let mut channels = Channels::new(cfg.channel_config().map_err(SessionError::InvalidConfig)?);
    let mut report = SessionReport::new(cfg.seed);
    let internal = |e: Error| SessionError::InvalidConfig(e);

    // quantum exchange and sifting
    let pool = BasisSet::bb84();
    let (mut sender_rng, mut receiver_rng, mut channel_rng) =
        (seeds.rng(Stage::Sender), seeds.rng(Stage::Receiver), seeds.rng(Stage::QuantumChannel));
    let raw = bb84::run_exchange(cfg.photons, &pool, &mut channels, &mut sender_rng, &mut receiver_rng, &mut channel_rng)
        .map_err(internal)?;
    let sifted = bb84::sift(&raw.sent.bits, &raw.sent.bases, &raw.received.bases, &raw.received.bits, &mut channels)
        .map_err(internal)?;
    report.sifted_len = sifted.len();

    // eavesdropper check
    if sifted.len() < cfg.sample_size + MIN_PRIMARY_KEY_BITS {
        let reason = format!("sifted key of {} bits cannot cover the sample and a primary key", sifted.len());
        return Err(exhausted(reason, report, channels));
    }
    let estimate = bb84::estimate_qber(&sifted, cfg.sample_size, &mut channels, &mut seeds.rng(Stage::QberSample))
        .map_err(internal)?;
    report.qber = estimate.qber;
    report.eve_decision = bb84::detect_eve(estimate.qber, cfg.qber_threshold, &mut channels);
    if report.eve_decision == Decision::Abort {
        return Ok(SessionRun {
            report,
            trace: channels.into_trace(),
        });
    }

    // reconciliation
    let keys = estimate.remaining;
    let recon = postprocess::reconcile(
        &keys.sender_key,
        &keys.receiver_key,
        &cfg.recon,
        &mut channels,
        &mut seeds.rng(Stage::Reconciliation),
    )
    .map_err(internal)?;
    report.reconciled_len = recon.key_a.len();
    report.leaked_parity_count = recon.leaked_parity_count;
    report.amplified_len = recon.key_a.len();

    let check = channels.send(
        Party::Sender,
        Payload::KeyCheck {
            parity: recon.key_a.parity(),
        },
    );
    let Payload::KeyCheck { parity: announced } = check.payload else {
        unreachable!("classical channel delivers verbatim")
    };
    let parity_ok = announced == recon.key_b.parity();
    channels.record_decision("key_check", if parity_ok { "match" } else { "mismatch" });
    if !parity_ok {
        return Err(SessionError::ReconciliationFailed(Box::new(SessionRun {
            report,
            trace: channels.into_trace(),
        })));
    }

    // privacy amplification
    let (primary_a, primary_b) = if cfg.amplify {
        let discard = postprocess::default_discard(recon.leaked_parity_count);
        if discard + MIN_PRIMARY_KEY_BITS > recon.key_a.len() {
            let reason = format!(
                "amplification would discard {discard} of {} reconciled bits, leaving fewer than {MIN_PRIMARY_KEY_BITS}",
                recon.key_a.len()
            );
            return Err(exhausted(reason, report, channels));
        }
        // both ends seed the shared permutation identically
        let a = postprocess::privacy_amplify(&recon.key_a, discard, &mut seeds.rng(Stage::Amplification)).map_err(internal)?;
        let b = postprocess::privacy_amplify(&recon.key_b, discard, &mut seeds.rng(Stage::Amplification)).map_err(internal)?;
        (a, b)
    } else {
        (recon.key_a, recon.key_b)
    };
    report.amplified_len = primary_a.len();

    let (key_a, key_b) = match (PrimaryKey::new(primary_a), PrimaryKey::new(primary_b)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return Err(exhausted(e.to_string(), report, channels)),
    };

    // BSTS transfer, each endpoint with the parameters from its own key
    let sender_params = bsts::derive_session(&key_a, cfg.timing_rule);
    let receiver_params = bsts::derive_session(&key_b, cfg.timing_rule);
    report.bsts_interval_ms = Some(sender_params.interval_ms);
    report.bsts_bases = Some(format!("{}{}", sender_params.base1, sender_params.base2));
    channels.record_decision(
        "bsts_params",
        format!("{}{}/{}ms", sender_params.base1, sender_params.base2, sender_params.interval_ms),
    );

    let message = match &cfg.message {
        Some(m) => m.clone(),
        None => BitString::random(DEFAULT_MESSAGE_BITS, &mut seeds.rng(Stage::Message)),
    };
    let (mut s, mut r) = (seeds.rng(Stage::BstsSender), seeds.rng(Stage::BstsReceiver));
    let transfer = bsts::bsts_transfer(
        &message,
        &sender_params,
        &receiver_params,
        &mut channels,
        TransferRngs {
            sender: &mut s,
            receiver: &mut r,
            channel: &mut channel_rng,
        },
    )
    .map_err(internal)?;

    report.message_delivered = transfer.decoded == message;
    report.receiver_error = Some(transfer.decoded.hamming(&message) as f64 / message.len() as f64);
    report.eve_accuracy = bsts::eve_accuracy(&message, &transfer, &channels);
    channels.record_decision("delivery", if report.message_delivered { "ok" } else { "corrupted" });

    Ok(SessionRun {
        report,
        trace: channels.into_trace(),
    })
}

/// Exit code of a finished (or failed) session.
pub fn exit_code(result: &Result<SessionRun, SessionError>) -> i32 {
    match result {
        Ok(run) => run.exit_code(),
        Err(e) => e.exit_code(),
    }
}

pub fn emit_trace(trace: &SessionTrace, path: &Path) -> Result<(), SessionError> {
    fs::write(path, trace.to_json()).map_err(|source| SessionError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn read_trace(path: &Path) -> Result<SessionTrace, SessionError> {
    let io_err = |source| SessionError::Io {
        path: path.to_owned(),
        source,
    };
    let text = fs::read_to_string(path).map_err(io_err)?;
    SessionTrace::from_json(&text).map_err(|e| io_err(io::Error::new(io::ErrorKind::InvalidData, e)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldStats {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
}

impl FieldStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        Some(Self { n, mean, stderr })
    }
}

/// Mean and standard error per numeric report field. Optional fields are
/// summarized over the reports that carry them; booleans count as 0/1.
pub fn summarize(reports: &[SessionReport]) -> Result<BTreeMap<String, FieldStats>, Error> {
    if reports.is_empty() {
        return Err(invalid("nothing to summarize"));
    }
    type Extract = fn(&SessionReport) -> Option<f64>;
    let fields: [(&str, Extract); 10] = [
        ("sifted_len", |r| Some(r.sifted_len as f64)),
        ("qber", |r| Some(r.qber)),
        ("abort", |r| Some(f64::from(u8::from(r.eve_decision == Decision::Abort)))),
        ("reconciled_len", |r| Some(r.reconciled_len as f64)),
        ("leaked_parity_count", |r| Some(r.leaked_parity_count as f64)),
        ("amplified_len", |r| Some(r.amplified_len as f64)),
        ("bsts_interval_ms", |r| r.bsts_interval_ms.map(f64::from)),
        ("message_delivered", |r| Some(f64::from(u8::from(r.message_delivered)))),
        ("receiver_error", |r| r.receiver_error),
        ("eve_accuracy", |r| r.eve_accuracy),
    ];
    Ok(fields
        .iter()
        .filter_map(|(name, get)| {
            let values: Vec<f64> = reports.iter().filter_map(get).collect();
            FieldStats::from_values(&values).map(|s| ((*name).to_owned(), s))
        })
        .collect())
}

/// One seed's result in a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub seed: u64,
    pub exit_code: i32,
    pub report: Option<SessionReport>,
    pub error: Option<String>,
}

/// Runs `cfg` once per seed in parallel; entries come back in seed order.
/// Traces are not written.
pub fn sweep(cfg: &SessionConfig, seeds: &[u64]) -> Vec<SweepEntry> {
    seeds
        .par_iter()
        .map(|&seed| {
            let run_cfg = SessionConfig {
                seed,
                trace_path: None,
                ..cfg.clone()
            };
            let result = run_full_session(&run_cfg);
            let code = exit_code(&result);
            match result {
                Ok(run) => SweepEntry {
                    seed,
                    exit_code: code,
                    report: Some(run.report),
                    error: None,
                },
                Err(e) => SweepEntry {
                    seed,
                    exit_code: code,
                    report: e.run().map(|r| r.report.clone()),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lossless_pipeline() {
        let cfg = SessionConfig {
            seed: 11,
            ..SessionConfig::default()
        };
        let run = run_full_session(&cfg).unwrap();
        let r = &run.report;
        assert_eq!(run.exit_code(), EXIT_OK);
        assert_eq!(r.eve_decision, Decision::Proceed);
        assert!(r.message_delivered);
        assert_eq!(r.receiver_error, Some(0.0));
        assert!(r.sifted_len >= r.reconciled_len && r.reconciled_len >= r.amplified_len);
        assert!(run.trace.is_time_ordered());
    }

    #[test]
    fn eve_is_caught() {
        let cfg = SessionConfig {
            eve_mode: EveMode::InterceptResend,
            seed: 3,
            ..SessionConfig::default()
        };
        let run = run_full_session(&cfg).unwrap();
        assert_eq!(run.report.eve_decision, Decision::Abort);
        assert_eq!(run.exit_code(), EXIT_EVE_DETECTED);
        assert_eq!(run.report.reconciled_len, 0);
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            SessionConfig {
                photons: 100,
                sample_size: 94,
                ..SessionConfig::default()
            },
            SessionConfig {
                noise_flip_prob: 1.5,
                ..SessionConfig::default()
            },
            SessionConfig {
                message: Some(BitString::new()),
                ..SessionConfig::default()
            },
        ];
        for cfg in bad {
            let err = run_full_session(&cfg).unwrap_err();
            assert_eq!(err.exit_code(), EXIT_INVALID, "{err}");
        }
    }

    #[test]
    fn amplification_shrinks_key() {
        let cfg = SessionConfig {
            amplify: true,
            noise_flip_prob: 0.02,
            seed: 5,
            ..SessionConfig::default()
        };
        let run = run_full_session(&cfg).unwrap();
        let r = &run.report;
        assert_eq!(r.amplified_len, r.reconciled_len - postprocess::default_discard(r.leaked_parity_count));
        // channel noise also reaches the BSTS photons
        assert!(r.receiver_error.unwrap() < 0.15);
    }

    #[test]
    fn exhausted_key_is_exit_3() {
        let cfg = SessionConfig {
            photons: 64,
            sample_size: 10,
            amplify: true,
            ..SessionConfig::default()
        };
        let err = run_full_session(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_RECONCILIATION);
        assert!(err.run().is_some());
    }

    #[test]
    fn summarize_edge_cases() {
        assert!(summarize(&[]).is_err());
        let run = run_full_session(&SessionConfig::default()).unwrap();
        let one = summarize(std::slice::from_ref(&run.report)).unwrap();
        assert_eq!(one["sifted_len"].mean, run.report.sifted_len as f64);
        assert_eq!(one["sifted_len"].stderr, 0.0);
        assert!(!one.contains_key("eve_accuracy"));
        let two = summarize(&[run.report.clone(), run.report.clone()]).unwrap();
        assert!(two.values().all(|s| s.stderr == 0.0));
    }

    #[test]
    fn config_json_defaults() {
        let cfg: SessionConfig = serde_json::from_str(r#"{"photons": 1000, "eve_basis_set": "RDC"}"#).unwrap();
        assert_eq!(cfg.photons, 1000);
        assert_eq!(cfg.eve_basis_set, BasisSet::all());
        assert_eq!(cfg.sample_size, 200);
    }
}
