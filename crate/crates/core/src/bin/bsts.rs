//! Command-line front end for the simulator.
//!
//! Exit codes: 0 success, 2 eavesdropper detected, 3 reconciliation failure,
//! 4 invalid configuration or I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use qkd_bsts::bb84::{self, Decision, DEFAULT_QBER_THRESHOLD};
use qkd_bsts::bsts::{self, PrimaryKey, TimingRule, TransferRngs};
use qkd_bsts::postprocess::{self, ReconciliationParams};
use qkd_bsts::session::{self, EveMode, SessionConfig, EXIT_EVE_DETECTED, EXIT_INVALID, EXIT_OK, EXIT_RECONCILIATION};
use qkd_bsts::{BasisSet, BitString, Channels, SeedTree, Stage};

#[derive(Parser)]
#[command(name = "bsts", version, about = "BB84 + BSTS quantum link simulator")]
struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Photon exchange, sifting and the eavesdropper check.
    Bb84(ChannelArgs),
    /// Reconcile two keys and optionally amplify the result.
    Postprocess(PostprocessArgs),
    /// Derive session parameters from a primary key.
    BstsDerive(DeriveArgs),
    /// Send a message over a BSTS session keyed by a primary key.
    BstsRun(BstsRunArgs),
    /// Full pipeline: BB84, check, reconciliation, amplification, BSTS transfer.
    Session(SessionArgs),
    /// Run the full pipeline over many seeds and summarize.
    Sweep(SweepArgs),
}

#[derive(Args, Clone)]
struct ChannelArgs {
    #[arg(long, default_value_t = 4096)]
    photons: usize,
    #[arg(long, default_value_t = 0.0)]
    noise_flip_prob: f64,
    /// none | intercept_resend
    #[arg(long, default_value = "none")]
    eve_mode: EveMode,
    /// Bases the eavesdropper picks from, e.g. RD or RDC.
    #[arg(long, default_value = "RD")]
    eve_basis_set: BasisSet,
    #[arg(long, env = "BSTS_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    sample_size: usize,
    #[arg(long, default_value_t = DEFAULT_QBER_THRESHOLD)]
    qber_threshold: f64,
    #[arg(long)]
    trace_path: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ReconArgs {
    #[arg(long, default_value_t = 16)]
    initial_block_size: usize,
    #[arg(long, default_value_t = 2)]
    passes_without_error_to_stop: u32,
    #[arg(long, default_value_t = 32)]
    max_passes: u32,
}

impl From<&ReconArgs> for ReconciliationParams {
    fn from(a: &ReconArgs) -> Self {
        ReconciliationParams {
            initial_block_size: a.initial_block_size,
            passes_without_error_to_stop: a.passes_without_error_to_stop,
            max_passes: a.max_passes,
        }
    }
}

#[derive(Args)]
struct PostprocessArgs {
    /// Sender's key as a bit string.
    #[arg(long)]
    key_a: BitString,
    /// Receiver's key as a bit string.
    #[arg(long)]
    key_b: BitString,
    #[command(flatten)]
    recon: ReconArgs,
    #[arg(long)]
    amplify: bool,
    #[arg(long, env = "BSTS_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    trace_path: Option<PathBuf>,
}

#[derive(Args)]
struct DeriveArgs {
    #[arg(long)]
    key: PrimaryKey,
    /// table2 (value + 1) or example9 (value as is)
    #[arg(long, default_value = "table2")]
    timing_rule: TimingRule,
}

#[derive(Args)]
struct BstsRunArgs {
    #[arg(long)]
    key: PrimaryKey,
    #[arg(long)]
    message: BitString,
    #[arg(long, default_value = "table2")]
    timing_rule: TimingRule,
    #[arg(long, default_value_t = 0.0)]
    noise_flip_prob: f64,
    #[arg(long, default_value = "none")]
    eve_mode: EveMode,
    #[arg(long, default_value = "RDC")]
    eve_basis_set: BasisSet,
    #[arg(long, env = "BSTS_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    trace_path: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SessionArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long, default_value = "table2")]
    timing_rule: TimingRule,
    /// Message bits; random 64 bits when omitted.
    #[arg(long)]
    message: Option<BitString>,
    #[command(flatten)]
    recon: ReconArgs,
    #[arg(long)]
    amplify: bool,
}

impl From<&SessionArgs> for SessionConfig {
    fn from(a: &SessionArgs) -> Self {
        let c = &a.channel;
        SessionConfig {
            photons: c.photons,
            noise_flip_prob: c.noise_flip_prob,
            eve_mode: c.eve_mode,
            eve_basis_set: c.eve_basis_set.clone(),
            seed: c.seed,
            sample_size: c.sample_size,
            qber_threshold: c.qber_threshold,
            timing_rule: a.timing_rule,
            message: a.message.clone(),
            recon: (&a.recon).into(),
            amplify: a.amplify,
            trace_path: c.trace_path.clone(),
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    session: SessionArgs,
    /// Number of consecutive seeds, starting at --seed.
    #[arg(long, default_value_t = 100)]
    runs: u64,
}

fn fail(code: i32, msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    code
}

fn write_trace(channels: Channels, path: Option<&PathBuf>) -> Result<(), i32> {
    if let Some(path) = path {
        session::emit_trace(&channels.into_trace(), path).map_err(|e| fail(e.exit_code(), e))?;
    }
    Ok(())
}

fn cmd_bb84(a: &ChannelArgs, as_json: bool) -> Result<i32, i32> {
    let cfg = SessionConfig {
        photons: a.photons,
        noise_flip_prob: a.noise_flip_prob,
        eve_mode: a.eve_mode,
        eve_basis_set: a.eve_basis_set.clone(),
        sample_size: a.sample_size,
        qber_threshold: a.qber_threshold,
        ..SessionConfig::default()
    };
    cfg.validate().map_err(|e| fail(EXIT_INVALID, e))?;
    let mut channels = Channels::new(cfg.channel_config().map_err(|e| fail(EXIT_INVALID, e))?);
    let seeds = SeedTree::new(a.seed);
    let pool = BasisSet::bb84();
    let raw = bb84::run_exchange(
        a.photons,
        &pool,
        &mut channels,
        &mut seeds.rng(Stage::Sender),
        &mut seeds.rng(Stage::Receiver),
        &mut seeds.rng(Stage::QuantumChannel),
    )
    .map_err(|e| fail(EXIT_INVALID, e))?;
    let sifted = bb84::sift(&raw.sent.bits, &raw.sent.bases, &raw.received.bases, &raw.received.bits, &mut channels)
        .map_err(|e| fail(EXIT_INVALID, e))?;
    let est = bb84::estimate_qber(&sifted, a.sample_size.min(sifted.len()), &mut channels, &mut seeds.rng(Stage::QberSample))
        .map_err(|e| fail(EXIT_INVALID, e))?;
    let decision = bb84::detect_eve(est.qber, a.qber_threshold, &mut channels);
    let true_qber = sifted.errors() as f64 / sifted.len().max(1) as f64;
    if as_json {
        println!(
            "{}",
            json!({
                "photons": a.photons,
                "sifted_len": sifted.len(),
                "sifted_qber": true_qber,
                "qber": est.qber,
                "eve_decision": decision,
                "remaining_len": est.remaining.len(),
            })
        );
    } else {
        println!("photons sent        {}", a.photons);
        println!("sifted key          {} bits", sifted.len());
        println!("sampled QBER        {:.4} ({} of {})", est.qber, est.disagreements, est.sampled);
        println!("sifted-key QBER     {true_qber:.4}");
        println!("decision            {decision}");
    }
    write_trace(channels, a.trace_path.as_ref())?;
    Ok(if decision == Decision::Abort { EXIT_EVE_DETECTED } else { EXIT_OK })
}

fn cmd_postprocess(a: &PostprocessArgs, as_json: bool) -> Result<i32, i32> {
    let mut channels = Channels::noiseless();
    let seeds = SeedTree::new(a.seed);
    let r = postprocess::reconcile(&a.key_a, &a.key_b, &(&a.recon).into(), &mut channels, &mut seeds.rng(Stage::Reconciliation))
        .map_err(|e| fail(EXIT_INVALID, e))?;
    let amplified = if a.amplify {
        let discard = postprocess::default_discard(r.leaked_parity_count);
        Some(
            postprocess::privacy_amplify(&r.key_a, discard, &mut seeds.rng(Stage::Amplification))
                .map_err(|e| fail(EXIT_RECONCILIATION, e))?,
        )
    } else {
        None
    };
    if as_json {
        println!(
            "{}",
            json!({
                "key_a": r.key_a,
                "key_b": r.key_b,
                "keys_equal": r.keys_equal(),
                "discarded_positions": r.discarded_positions,
                "leaked_parity_count": r.leaked_parity_count,
                "passes": r.passes,
                "amplified": amplified,
            })
        );
    } else {
        println!("reconciled A        {}", r.key_a);
        println!("reconciled B        {}", r.key_b);
        println!("discarded           {:?}", r.discarded_positions);
        println!("parities leaked     {} over {} passes", r.leaked_parity_count, r.passes);
        if let Some(k) = &amplified {
            println!("amplified           {k}");
        }
    }
    write_trace(channels, a.trace_path.as_ref())?;
    Ok(if r.keys_equal() { EXIT_OK } else { EXIT_RECONCILIATION })
}

fn cmd_derive(a: &DeriveArgs, as_json: bool) -> Result<i32, i32> {
    let p = bsts::derive_session(&a.key, a.timing_rule);
    if as_json {
        println!("{}", serde_json::to_string(&p).expect("params serialize"));
    } else {
        println!("base 1      {:?}", p.base1);
        println!("base 2      {:?}", p.base2);
        println!("interval    {} ms ({})", p.interval_ms, a.timing_rule);
        println!("schedule    {}", p.schedule);
    }
    Ok(EXIT_OK)
}

fn cmd_bsts_run(a: &BstsRunArgs, as_json: bool) -> Result<i32, i32> {
    if a.message.is_empty() {
        return Err(fail(EXIT_INVALID, "message must contain at least one bit"));
    }
    let params = bsts::derive_session(&a.key, a.timing_rule);
    let eve = match a.eve_mode {
        EveMode::None => qkd_bsts::Eavesdropper::None,
        EveMode::InterceptResend => qkd_bsts::Eavesdropper::InterceptResend(a.eve_basis_set.clone()),
    };
    let cfg = qkd_bsts::QuantumChannelConfig::new(a.noise_flip_prob, eve).map_err(|e| fail(EXIT_INVALID, e))?;
    let mut channels = Channels::new(cfg);
    let seeds = SeedTree::new(a.seed);
    let (mut s, mut r, mut c) = (seeds.rng(Stage::BstsSender), seeds.rng(Stage::BstsReceiver), seeds.rng(Stage::QuantumChannel));
    let t = bsts::bsts_transfer(
        &a.message,
        &params,
        &params,
        &mut channels,
        TransferRngs {
            sender: &mut s,
            receiver: &mut r,
            channel: &mut c,
        },
    )
    .map_err(|e| fail(EXIT_INVALID, e))?;
    let receiver_error = t.decoded.hamming(&a.message) as f64 / a.message.len() as f64;
    let eve_accuracy = bsts::eve_accuracy(&a.message, &t, &channels);
    let photons = channels.trace().count_kind("photon_sent");
    if as_json {
        println!(
            "{}",
            json!({
                "params": params,
                "decoded": t.decoded,
                "message_delivered": t.decoded == a.message,
                "photons": photons,
                "real_photons": t.real_tags.len(),
                "start_ms": t.start_ms,
                "end_ms": t.end_ms,
                "receiver_error": receiver_error,
                "eve_accuracy": eve_accuracy,
            })
        );
    } else {
        println!("session     {}{} every {} ms, schedule {}", params.base1, params.base2, params.interval_ms, params.schedule);
        println!("sent        {}", a.message);
        println!("decoded     {}", t.decoded);
        println!("photons     {} ({} real) from {} to {} ms", photons, t.real_tags.len(), t.start_ms, t.end_ms);
        println!("rx error    {receiver_error:.4}");
        if let Some(acc) = eve_accuracy {
            println!("eve acc.    {acc:.4}");
        }
    }
    write_trace(channels, a.trace_path.as_ref())?;
    Ok(EXIT_OK)
}

fn cmd_session(a: &SessionArgs, as_json: bool) -> i32 {
    let cfg = SessionConfig::from(a);
    let result = session::run_full_session(&cfg);
    let code = session::exit_code(&result);
    let report = match &result {
        Ok(run) => Some(&run.report),
        Err(e) => {
            eprintln!("error: {e}");
            e.run().map(|r| &r.report)
        }
    };
    if let Some(report) = report {
        if as_json {
            println!("{}", report.to_json());
        } else {
            println!("{report}");
        }
    }
    code
}

fn cmd_sweep(a: &SweepArgs, as_json: bool) -> i32 {
    let mut cfg = SessionConfig::from(&a.session);
    if let Err(e) = cfg.validate() {
        return fail(EXIT_INVALID, e);
    }
    cfg.trace_path = None;
    let first = cfg.seed;
    let seeds: Vec<u64> = (0..a.runs).map(|i| first.wrapping_add(i)).collect();
    let entries = session::sweep(&cfg, &seeds);
    let reports: Vec<_> = entries.iter().filter_map(|e| e.report.clone()).collect();
    let mut codes = std::collections::BTreeMap::<i32, usize>::new();
    for e in &entries {
        *codes.entry(e.exit_code).or_default() += 1;
    }
    let summary = match session::summarize(&reports) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_INVALID, e),
    };
    if as_json {
        println!("{}", json!({ "runs": entries.len(), "exit_codes": codes, "summary": summary }));
    } else {
        println!("runs: {}  exit codes: {:?}", entries.len(), codes);
        println!("{:<22}{:>8}{:>14}{:>12}", "field", "n", "mean", "stderr");
        for (name, s) in &summary {
            println!("{name:<22}{:>8}{:>14.5}{:>12.5}", s.n, s.mean, s.stderr);
        }
    }
    EXIT_OK
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INVALID as u8 } else { 0 });
        }
    };
    let code = match &cli.command {
        Command::Bb84(a) => cmd_bb84(a, cli.json),
        Command::Postprocess(a) => cmd_postprocess(a, cli.json),
        Command::BstsDerive(a) => cmd_derive(a, cli.json),
        Command::BstsRun(a) => cmd_bsts_run(a, cli.json),
        Command::Session(a) => Ok(cmd_session(a, cli.json)),
        Command::Sweep(a) => Ok(cmd_sweep(a, cli.json)),
    }
    .unwrap_or_else(|code| code);
    ExitCode::from(code as u8)
}
