//! Ready-made models used by the examples, tests and default configs.

use std::f64::consts::TAU;

use crate::model::{CavityParams, MechanicalMode, SystemModel, coupling_from_measurement_rate};

/// Share of the non-output cavity loss attributed to the input mirror. The
/// spectra only depend on kappa_out / kappa, so the split is cosmetic.
pub const REFERENCE_INPUT_SHARE: f64 = 0.5;

/// Input power (mW) at which [`reference_device`] couplings are defined.
pub const REFERENCE_POWER_MW: f64 = 7.1;

/// Two localized band-gap modes of a membrane in a 7 MHz-wide cavity at
/// 2.3 MHz red detuning, with couplings set from measurement rates of
/// 7.3 kHz and 19.0 kHz.
pub fn reference_device() -> SystemModel {
    let kappa = TAU * 7.0e6;
    let cavity = CavityParams::from_efficiency(kappa, 0.91, REFERENCE_INPUT_SHARE, TAU * 2.3e6).expect("valid cavity");
    let mode = |label: &str, f: f64, gamma_hz: f64, n_th: f64, meas_hz: f64| {
        let g = coupling_from_measurement_rate(TAU * meas_hz, kappa).expect("valid rate");
        MechanicalMode::new(label, TAU * f, TAU * gamma_hz, g, n_th).expect("valid mode")
    };
    let modes = vec![
        mode("mode1", 1.32e6, 2.3e-3, 1.72e5, 7.3e3),
        mode("mode2", 2.43e6, 8.1e-3, 9.4e4, 19.0e3),
    ];
    SystemModel::new(cavity, modes, 0.83).expect("valid model")
}

/// Rescaled two-mode model (Q ~ 10^3, n_th = 10, arbitrary time units) small
/// enough for time-domain simulation to converge.
pub fn desk_scale() -> SystemModel {
    let cavity = CavityParams::from_efficiency(10.0, 0.9, 0.5, 3.0).expect("valid cavity");
    let modes = vec![
        MechanicalMode::new("mode1", 1.3, 1e-3, 0.3, 10.0).expect("valid mode"),
        MechanicalMode::new("mode2", 2.4, 1e-3, 0.3, 10.0).expect("valid mode"),
    ];
    SystemModel::new(cavity, modes, 1.0).expect("valid model")
}
