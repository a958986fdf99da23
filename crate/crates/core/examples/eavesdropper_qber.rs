//! BB84 with and without an intercept-resend eavesdropper: sifting, sampled
//! error rate and the abort decision.
//!
//! cargo run --example eavesdropper_qber

use qkd_bsts::bb84::{self, DEFAULT_QBER_THRESHOLD};
use qkd_bsts::{BasisSet, Channels, Eavesdropper, QuantumChannelConfig, SeedTree, Stage};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let scenarios = [
        ("clean fiber", QuantumChannelConfig::noiseless()),
        ("3% noise", QuantumChannelConfig::new(0.03, Eavesdropper::None)?),
        ("eve R/D", QuantumChannelConfig::new(0.0, Eavesdropper::InterceptResend(BasisSet::bb84()))?),
        ("eve R/D/C", QuantumChannelConfig::new(0.0, Eavesdropper::InterceptResend(BasisSet::all()))?),
    ];
    println!("{:<12}{:>8}{:>12}{:>12}{:>10}", "channel", "sifted", "true QBER", "sampled", "decision");
    for (name, cfg) in scenarios {
        let seeds = SeedTree::new(99);
        let mut ch = Channels::new(cfg);
        let raw = bb84::run_exchange(
            4096,
            &BasisSet::bb84(),
            &mut ch,
            &mut seeds.rng(Stage::Sender),
            &mut seeds.rng(Stage::Receiver),
            &mut seeds.rng(Stage::QuantumChannel),
        )?;
        let sifted = bb84::sift(&raw.sent.bits, &raw.sent.bases, &raw.received.bases, &raw.received.bits, &mut ch)?;
        let est = bb84::estimate_qber(&sifted, 200, &mut ch, &mut seeds.rng(Stage::QberSample))?;
        let decision = bb84::detect_eve(est.qber, DEFAULT_QBER_THRESHOLD, &mut ch);
        let true_qber = sifted.errors() as f64 / sifted.len() as f64;
        println!("{name:<12}{:>8}{true_qber:>12.4}{:>12.4}{decision:>10}", sifted.len(), est.qber);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
