//! Generates noisy synthetic detected spectra from the reference device and
//! fits cavity and mode parameters back from a perturbed starting guess.
//!
//! cargo run --release --example fit_synthetic -- [noise fraction] [seed]

use std::f64::consts::TAU;

use mimsqueeze::fitting::{FitParameter, FitProblem, default_windows, fit};
use mimsqueeze::presets::reference_device;
use mimsqueeze::spectra::{Quantity, SpectrumEvaluator, SpectrumTrace, Stage, linear_grid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> mimsqueeze::Result<()> {
    let mut args = std::env::args().skip(1);
    let noise: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.01);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(3);

    let truth = reference_device();
    let windows = default_windows(&truth);
    let grid: Vec<f64> = windows.iter().map(|w| linear_grid(w.lo_hz, w.hi_hz, 1001)).collect::<Result<Vec<_>, _>>()?.concat();
    let clean = SpectrumEvaluator::new(&truth)?.detected_trace(Quantity::DirectX, &grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise).expect("finite noise level");
    let values = clean.values().iter().map(|v| v * (1.0 + normal.sample(&mut rng))).collect();
    let data = SpectrumTrace::new(grid, values, Quantity::DirectX, Stage::Detected)?;

    let mut guess = truth.clone();
    for (p, f) in [
        (FitParameter::Kappa, 1.15),
        (FitParameter::Detuning, 0.85),
        (FitParameter::Coupling(0), 1.2),
        (FitParameter::Coupling(1), 0.8),
        (FitParameter::Frequency(0), 1.002),
        (FitParameter::Frequency(1), 0.998),
    ] {
        guess = p.set(&guess, p.get(&truth)? * f)?;
    }
    let result = fit(&FitProblem::all_free(data, guess, windows, 0.3)?)?;
    println!("cost {:.4e} -> {:.4e} after {} iterations ({:?})", result.initial_cost, result.cost, result.iterations, result.termination);
    for p in &result.parameters {
        let t = p.param.get(&truth)?;
        println!(
            "{:>11}: {:.6e} +- {:.1e} Hz (truth {:.6e}, error {:+.2e})",
            p.param.to_string(),
            p.value / TAU,
            p.uncertainty / TAU,
            t / TAU,
            p.value / t - 1.0
        );
    }
    Ok(())
}
