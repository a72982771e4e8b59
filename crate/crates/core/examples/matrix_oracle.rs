//! Per-mode closed forms against the exact linear solve of the full
//! multimode system, as the two modes are pulled apart.
//!
//! cargo run --release --example matrix_oracle

use std::f64::consts::TAU;

use mimsqueeze::oracle::closed_form_deviation;
use mimsqueeze::presets::reference_device;
use mimsqueeze::spectra::{SpectrumEvaluator, linear_grid};

fn main() -> mimsqueeze::Result<()> {
    let base = reference_device();
    for separation_hz in [1.11e6, 3e6, 1e7, 3e7] {
        let m2 = base.modes()[1].with_frequency(base.modes()[0].omega_m() + TAU * separation_hz)?;
        let model = base.with_modes(vec![base.modes()[0].clone(), m2])?;
        let eval = SpectrumEvaluator::new(&model)?;
        let mut omegas = Vec::new();
        for w in eval.windows() {
            omegas.extend(linear_grid(w.lo, w.hi, 20_000)?);
        }
        let d = closed_form_deviation(&eval, &omegas)?;
        println!(
            "separation {:>9.3e} Hz: max relative deviation {:.3e} (S_X {:.2e}, S_Y {:.2e}, Re S_XY {:.2e})",
            separation_hz,
            d.max(),
            d.sx,
            d.sy,
            d.re_sxy
        );
    }
    let single = base.single_mode(0)?;
    let eval = SpectrumEvaluator::new(&single)?;
    let w = eval.windows()[0];
    let d = closed_form_deviation(&eval, &linear_grid(w.lo, w.hi, 20_000)?)?;
    println!("single mode: max relative deviation {:.3e}", d.max());
    Ok(())
}
