//! Quality factor from a noisy synthetic free-decay envelope.
//!
//! cargo run --release --example ringdown

use std::f64::consts::TAU;

use mimsqueeze::fitting::{RingdownData, ringdown_fit};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> mimsqueeze::Result<()> {
    let (f_hz, gamma_hz) = (2.43e6, 8.1e-3);
    let gamma = TAU * gamma_hz;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let jitter = Normal::new(0.0, 0.02).expect("finite width");
    let times: Vec<f64> = (0..300).map(|i| i as f64).collect();
    let amps = times.iter().map(|t| 1e-10 * (-0.5 * gamma * t).exp() * (1.0 + jitter.sample(&mut rng))).collect();
    let r = ringdown_fit(&RingdownData::new(times, amps, f_hz)?)?;
    println!("Gamma/2pi = {:.4e} Hz (generated {gamma_hz:.4e}), Q = {:.4e}", r.gamma_m / TAU, r.q);
    Ok(())
}
