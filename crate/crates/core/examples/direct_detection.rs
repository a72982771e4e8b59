//! Direct-detection (amplitude quadrature) spectrum of the reference device
//! around both mechanical modes, before and after the detector.
//!
//! cargo run --release --example direct_detection

use mimsqueeze::fitting::default_windows;
use mimsqueeze::presets::reference_device;
use mimsqueeze::spectra::{Quantity, SpectrumEvaluator, linear_grid, squeezing_level_db};

fn main() -> mimsqueeze::Result<()> {
    let model = reference_device();
    let eval = SpectrumEvaluator::new(&model)?;
    for w in default_windows(&model) {
        let grid = linear_grid(w.lo_hz, w.hi_hz, 4001)?;
        let cavity = eval.trace(Quantity::DirectX, &grid)?;
        let detected = eval.detected_trace(Quantity::DirectX, &grid)?;
        let c = squeezing_level_db(&cavity, w.lo_hz, w.hi_hz)?;
        let d = squeezing_level_db(&detected, w.lo_hz, w.hi_hz)?;
        println!(
            "{}: {:.3} dB at the cavity output, {:.3} dB detected (eta_det = {}), minimum at {:.0} Hz",
            model.modes()[w.mode].label(),
            c.min_db,
            d.min_db,
            model.eta_det(),
            d.freq_hz
        );
    }
    Ok(())
}
