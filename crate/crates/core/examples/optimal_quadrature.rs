//! Optimal homodyne angle and the resulting envelope, compared with fixed
//! quadratures at the frequency of strongest squeezing.
//!
//! cargo run --release --example optimal_quadrature

use std::f64::consts::{PI, TAU};

use mimsqueeze::fitting::default_windows;
use mimsqueeze::presets::reference_device;
use mimsqueeze::spectra::{QuadratureAngle, Quantity, SHOT_NOISE, SpectrumEvaluator, linear_grid, squeezing_level_db, to_db};

fn main() -> mimsqueeze::Result<()> {
    let model = reference_device();
    let eval = SpectrumEvaluator::new(&model)?;
    for w in default_windows(&model) {
        let grid = linear_grid(w.lo_hz, w.hi_hz, 4001)?;
        let envelope = eval.detected_trace(Quantity::Optimal, &grid)?;
        let best = squeezing_level_db(&envelope, w.lo_hz, w.hi_hz)?;
        let omega = TAU * best.freq_hz;
        let phase = eval.optimal_phase(omega)?;
        println!("{}: optimal {:.3} dB at {:.0} Hz, theta = {:.4} rad", model.modes()[w.mode].label(), best.min_db, best.freq_hz, phase.theta.radians());
        let c = eval.components(omega)?.attenuated(model.eta_det());
        for k in 0..8 {
            let theta = QuadratureAngle::new(k as f64 * PI / 8.0);
            println!("  theta = {:.3}: {:+.3} dB", theta.radians(), to_db(c.quadrature(theta) / SHOT_NOISE)?);
        }
    }
    Ok(())
}
