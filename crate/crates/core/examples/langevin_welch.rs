//! Simulates the desk-scale two-mode model in the time domain and compares
//! the Welch estimate of the amplitude-quadrature output with the exact
//! frequency-domain spectrum over each mechanical resonance.
//!
//! cargo run --release --example langevin_welch -- [segments] [log2 segment length] [seed]

use std::time::Instant;

use mimsqueeze::oracle::{StochasticCheck, stochastic_check};
use mimsqueeze::presets::desk_scale;

fn main() -> mimsqueeze::Result<()> {
    let mut args = std::env::args().skip(1);
    let segments: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(100);
    let log2: u32 = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);

    let model = desk_scale();
    let check = StochasticCheck { segments, segment_length: 1 << log2, seed, ..StochasticCheck::default() };
    let start = Instant::now();
    let report = stochastic_check(&model, &check)?;
    println!("{} segments of {} samples in {:.1?}", report.segments, check.segment_length, start.elapsed());
    for b in &report.bands {
        println!(
            "{:>6}: band [{:.5}, {:.5}] rad/s  welch/exact = {:.4}",
            b.label, b.lo, b.hi, b.ratio
        );
    }
    Ok(())
}
