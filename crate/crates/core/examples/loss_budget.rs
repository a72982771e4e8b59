//! How cavity-output and detection efficiencies combine: the detected
//! squeezing only depends on their product.
//!
//! cargo run --release --example loss_budget

use mimsqueeze::fitting::default_windows;
use mimsqueeze::presets::reference_device;
use mimsqueeze::spectra::{Quantity, SpectrumEvaluator, linear_grid, squeezing_level_db};

fn main() -> mimsqueeze::Result<()> {
    let base = reference_device();
    let w = default_windows(&base)[0];
    let grid = linear_grid(w.lo_hz, w.hi_hz, 2001)?;
    println!("eta_cav  eta_det  product  detected min (dB)  loss-corrected (dB)");
    for eta_cav in [0.91, 0.8, 0.6] {
        for eta_det in [1.0, 0.83, 0.5] {
            let model = base
                .with_cavity(base.cavity().with_output_efficiency(eta_cav)?)
                .with_eta_det(eta_det)?;
            let eval = SpectrumEvaluator::new(&model)?;
            let detected = eval.detected_trace(Quantity::DirectX, &grid)?;
            let corrected = detected.correct_for_losses(eta_det)?;
            let d = squeezing_level_db(&detected, w.lo_hz, w.hi_hz)?;
            let c = squeezing_level_db(&corrected.trace, w.lo_hz, w.hi_hz)?;
            println!("{eta_cav:7.2}  {eta_det:7.2}  {:7.3}  {:17.3}  {:19.3}", eta_cav * eta_det, d.min_db, c.min_db);
        }
    }
    Ok(())
}
