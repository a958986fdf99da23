//! How much an intercept-resend eavesdropper learns from a BSTS transfer,
//! and how visible her disturbance is to the receiver.
//!
//! cargo run --example bsts_eavesdropping

use qkd_bsts::bsts::{self, PrimaryKey, TimingRule};
use qkd_bsts::seed::rng_from_seed;
use qkd_bsts::{BasisSet, BitString};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let key: PrimaryKey = "01100110011".parse()?;
    let params = bsts::derive_session(&key, TimingRule::Table2);
    let message = BitString::random(10_000, &mut rng_from_seed(5));

    let cases: [(&str, Option<BasisSet>, f64, f64); 3] = [
        ("no eavesdropper", None, f64::NAN, 0.0),
        ("random of R/D/C", Some(BasisSet::all()), 2.0 / 3.0, 1.0 / 3.0),
        ("knows the pair", Some(params.pair()), 0.75, 0.25),
    ];
    println!("{:<18}{:>12}{:>10}{:>12}{:>10}", "eavesdropper", "eve acc.", "expected", "rx error", "expected");
    for (name, set, want_acc, want_err) in cases {
        let e = bsts::simulate_bsts_eve(&message, &params, set.as_ref(), 11)?;
        let acc = e.eve_accuracy.map_or_else(|| "-".to_owned(), |a| format!("{a:.4}"));
        let want = if want_acc.is_nan() { "-".to_owned() } else { format!("{want_acc:.4}") };
        println!("{name:<18}{acc:>12}{want:>10}{:>12.4}{want_err:>10.4}", e.receiver_error);
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
