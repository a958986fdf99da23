//! Session parameters for the primary key 01100110011 and a short message
//! sent over them, with every photon of the transfer listed.
//!
//! cargo run --example bsts_worked_example

use qkd_bsts::bsts::{self, PrimaryKey, TimingRule, TransferRngs};
use qkd_bsts::channels::EventDetail;
use qkd_bsts::{BitString, Channels, SeedTree, Stage};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let key: PrimaryKey = "01100110011".parse()?;
    for rule in [TimingRule::Table2, TimingRule::Example9] {
        let p = bsts::derive_session(&key, rule);
        println!("{rule:<9} bases {}{}  interval {:>2} ms  schedule {}", p.base1, p.base2, p.interval_ms, p.schedule);
    }

    let params = bsts::derive_session(&key, TimingRule::Table2);
    let message: BitString = "1001011".parse()?;
    let seeds = SeedTree::new(1);
    let (mut s, mut r, mut c) = (seeds.rng(Stage::BstsSender), seeds.rng(Stage::BstsReceiver), seeds.rng(Stage::QuantumChannel));
    let mut channels = Channels::noiseless();
    let t = bsts::bsts_transfer(
        &message,
        &params,
        &params,
        &mut channels,
        TransferRngs {
            sender: &mut s,
            receiver: &mut r,
            channel: &mut c,
        },
    )?;

    println!("\nreal photons (fakes fill every other tick):");
    let mut k = 0;
    for e in &channels.trace().events {
        if let EventDetail::PhotonSent { polarization, real: true, .. } = e.detail {
            k += 1;
            println!("  t={:>3} ms  bit {}  basis {}  {polarization}", e.t_ms, message.get(k).unwrap_or(0), params.basis_for(k));
        }
    }
    let total = channels.trace().count_kind("photon_sent");
    println!("\nsent {message}, decoded {}, {total} photons ({} fake)", t.decoded, total - message.len());
    if t.decoded != message {
        return Err("noiseless transfer corrupted the message".into());
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
