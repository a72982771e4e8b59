//! Squeezing versus laser detuning at fixed input power. The intracavity
//! photon number follows the cavity Lorentzian; blue detunings are reported
//! as unstable.
//!
//! cargo run --release --example detuning_sweep -- [power mW]

use mimsqueeze::fitting::default_windows;
use mimsqueeze::presets::{REFERENCE_POWER_MW, reference_device};
use mimsqueeze::spectra::linear_grid;
use mimsqueeze::sweeps::{SweepPlan, SweptParameter, run_sweep};

fn main() -> mimsqueeze::Result<()> {
    let power_mw: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3.0);
    let base = reference_device();
    let grid: Vec<f64> = default_windows(&base).iter().map(|w| linear_grid(w.lo_hz, w.hi_hz, 2001)).collect::<Result<Vec<_>, _>>()?.concat();
    let detunings = vec![-2.0e6, 1.2e6, 2.5e6, 4.0e6, 5.5e6, 7.0e6, 8.7e6];
    let plan = SweepPlan::new(base, SweptParameter::Detuning { power_mw }, detunings, REFERENCE_POWER_MW, grid);
    for p in &run_sweep(&plan)?.points {
        match (&p.error, p.squeezing.as_slice()) {
            (None, [Some(a), Some(b)]) => println!("{:>8.2} MHz: {:.3} dB, {:.3} dB", p.value / 1e6, a.min_db, b.min_db),
            (Some(e), _) => println!("{:>8.2} MHz: {e}", p.value / 1e6),
            _ => println!("{:>8.2} MHz: no summary", p.value / 1e6),
        }
    }
    Ok(())
}
