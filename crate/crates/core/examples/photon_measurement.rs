//! Conjugate coding: matching-basis reads are exact, conjugate reads are coin flips
//! and destroy the original polarization.
//!
//! cargo run --example photon_measurement

use qkd_bsts::seed::rng_from_seed;
use qkd_bsts::{basis_of, encode, measure, Basis, Photon};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = rng_from_seed(2024);
    let trials = 10_000u32;

    println!("{:<6}{:<10}{:>8}{:>12}", "bit", "prepared", "read in", "P(read 1)");
    for prepared in Basis::ALL {
        for bit in [0u8, 1] {
            let photon = Photon::new(encode(bit, prepared), 0);
            for reader in Basis::ALL {
                let ones: u32 = (0..trials).map(|_| u32::from(measure(&photon, reader, &mut rng).bit)).sum();
                let p = f64::from(ones) / f64::from(trials);
                println!("{bit:<6}{:<10}{:>8}{p:>12.4}", photon.polarization.to_string(), reader.letter());
                if reader == prepared && p != f64::from(bit) {
                    return Err(format!("matching basis misread {}", photon.polarization).into());
                }
            }
        }
    }

    // collapse: a diagonal read of a 0deg photon leaves a diagonal photon behind
    let photon = Photon::new(encode(0, Basis::Rectilinear), 1);
    let first = measure(&photon, Basis::Diagonal, &mut rng);
    let again = measure(&photon.with_polarization(first.collapsed), Basis::Diagonal, &mut rng);
    println!(
        "\n0deg read diagonally -> {} ({:?}); re-read -> {}",
        first.collapsed,
        basis_of(first.collapsed),
        again.bit
    );
    assert_eq!(first.bit, again.bit);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
