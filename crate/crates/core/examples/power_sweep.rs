//! Squeezing and optical broadening of both modes as the input power grows,
//! with couplings scaled as the square root of power.
//!
//! cargo run --release --example power_sweep

use std::f64::consts::TAU;

use mimsqueeze::fitting::default_windows;
use mimsqueeze::presets::{REFERENCE_POWER_MW, reference_device};
use mimsqueeze::spectra::linear_grid;
use mimsqueeze::sweeps::{SweepPlan, SweptParameter, run_sweep};

fn main() -> mimsqueeze::Result<()> {
    let base = reference_device();
    let grid: Vec<f64> = default_windows(&base).iter().map(|w| linear_grid(w.lo_hz, w.hi_hz, 2001)).collect::<Result<Vec<_>, _>>()?.concat();
    let powers = vec![1.6, 2.5, 3.5, 4.5, 5.5, 6.5, 7.1, 8.0];
    let result = run_sweep(&SweepPlan::new(base, SweptParameter::InputPower, powers, REFERENCE_POWER_MW, grid))?;
    println!("P (mW)  mode1 (dB)  mode2 (dB)  width1 (Hz)  width2 (Hz)");
    for p in &result.points {
        let db = |i: usize| p.squeezing[i].map_or(f64::NAN, |s| s.min_db);
        let width = |i: usize| p.gamma_eff[i].map_or(f64::NAN, |g| g / TAU);
        println!("{:6.1}  {:10.3}  {:10.3}  {:11.1}  {:11.1}", p.value, db(0), db(1), width(0), width(1));
    }
    Ok(())
}
