//! The whole link: BB84, eavesdropper check, reconciliation, amplification and
//! a BSTS transfer keyed by the result. Writes the session trace as JSON.
//!
//! cargo run --example full_session -- [trace.json]

use qkd_bsts::session::{self, EveMode, SessionConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let trace_path = std::env::args().nth(1).filter(|a| a.ends_with(".json")).map(Into::into);
    let cfg = SessionConfig {
        photons: 4096,
        noise_flip_prob: 0.01,
        seed: 42,
        amplify: true,
        message: Some("1100101011110000".parse()?),
        trace_path,
        ..SessionConfig::default()
    };
    let run = session::run_full_session(&cfg)?;
    println!("{}", run.report);
    println!("trace: {} events", run.trace.len());

    let spied = SessionConfig {
        eve_mode: EveMode::InterceptResend,
        trace_path: None,
        ..cfg
    };
    let caught = session::run_full_session(&spied)?;
    println!("\nwith an eavesdropper: QBER {:.3}, decision {}, exit code {}", caught.report.qber, caught.report.eve_decision, caught.exit_code());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
