use num_complex::Complex64;

use super::{ComponentSpectra, SHOT_NOISE};
use crate::error::Result;
use crate::model::{
    CavityParams, MechanicalMode, checked_cavity_denominator, effective_susceptibility_with,
    inverse_bare_susceptibility,
};

/// Single-mode closed forms for S_X, S_Y and Re S_XY at the cavity output port.
///
/// Exact for one mechanical mode; with several modes it neglects the
/// off-resonant response of all but `mode`.
pub fn closed_form_components(cavity: &CavityParams, mode: &MechanicalMode, omega: f64) -> Result<ComponentSpectra> {
    let d = checked_cavity_denominator(cavity, omega)?;
    let kappa = cavity.kappa();
    let delta = cavity.detuning();
    let eta = cavity.eta_cav();
    let g = mode.g();
    let gamma = mode.gamma_m();
    let n_half = mode.n_th() + 0.5;

    let c = Complex64::new(0.5 * kappa, -omega);
    let inv_chi_m = inverse_bare_susceptibility(mode, omega);
    let chi_eff = effective_susceptibility_with(mode, cavity, omega, d);
    let ratio = chi_eff * inv_chi_m;

    let chi_over_d = (chi_eff / d).norm_sqr();
    let ratio_over_d = (kappa * ratio / d).norm_sqr();
    let c2 = c.norm_sqr();
    let interference = (c * kappa * ratio / d).re;
    // thermal force transduced into each quadrature: kappa |2 G g chi_eff / D|^2 2 Gamma (n + 1/2)
    let thermal = kappa * 4.0 * g * g * chi_over_d * 2.0 * gamma * n_half;

    let spring = 4.0 * g * g / inv_chi_m - delta;
    let sx = eta * (thermal * delta * delta + 0.5 * ratio_over_d * (c2 + delta * delta) - interference) + SHOT_NOISE;
    let sy = eta * (thermal * c2 + 0.5 * ratio_over_d * (c2 + spring.norm_sqr()) - interference) + SHOT_NOISE;

    let cross_weight = (2.0 * kappa * g).powi(2) * chi_over_d;
    let re_sxy = eta * cross_weight * (delta * gamma * n_half + 0.5 * (c * inv_chi_m).re)
        - eta * 0.5 * (4.0 * kappa * g * g * chi_eff / d).re;
    Ok(ComponentSpectra { sx, sy, re_sxy })
}
