//! Parity-bisection reconciliation on noisy keys, then permutation-based
//! privacy amplification.
//!
//! cargo run --example reconciliation

use rand::Rng;

use qkd_bsts::postprocess::{self, ReconciliationParams};
use qkd_bsts::seed::rng_from_seed;
use qkd_bsts::{BitString, Channels};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = rng_from_seed(7);
    let alice = BitString::random(1024, &mut rng);
    let bob: BitString = alice.iter().map(|b| b ^ u8::from(rng.random_bool(0.05))).collect();
    println!("errors before      {}", alice.hamming(&bob));

    let mut channels = Channels::noiseless();
    let params = ReconciliationParams::default();
    let r = postprocess::reconcile(&alice, &bob, &params, &mut channels, &mut rng_from_seed(8))?;
    println!("passes             {}", r.passes);
    println!("bits discarded     {}", r.discarded_positions.len());
    println!("parities published {}", r.leaked_parity_count);
    println!("keys equal         {}", r.keys_equal());
    println!("final length       {}", r.key_a.len());

    let discard = postprocess::default_discard(r.leaked_parity_count);
    let a = postprocess::privacy_amplify(&r.key_a, discard, &mut rng_from_seed(9))?;
    let b = postprocess::privacy_amplify(&r.key_b, discard, &mut rng_from_seed(9))?;
    println!("amplified length   {} (dropped {discard})", a.len());
    println!("amplified equal    {}", a == b);
    if !r.keys_equal() || a != b {
        return Err("reconciliation left the keys different".into());
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
