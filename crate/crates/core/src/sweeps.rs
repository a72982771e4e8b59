//! Input-power and detuning sweeps with per-window squeezing summaries.
//!
//! Couplings scale as sqrt(intracavity photon number). At fixed detuning that
//! number is proportional to input power; at fixed input power it follows the
//! driven-cavity Lorentzian (kappa^2/4) / (kappa^2/4 + Delta^2). Heating,
//! absorption and any saturation beyond the linearized model are not modeled.

use std::f64::consts::TAU;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fitting::FitWindow;
use crate::model::{SystemModel, effective_mode_parameters};
use crate::spectra::{Quantity, SpectrumEvaluator, SpectrumTrace, SqueezingLevel, Stage, squeezing_level_db};

/// g(P) = g(P0) sqrt(P / P0).
pub fn scale_coupling_with_power(g: f64, power: f64, reference_power: f64) -> Result<f64> {
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::param("power", format!("must be > 0, got {power}")));
    }
    if !(reference_power > 0.0 && reference_power.is_finite()) {
        return Err(Error::param("reference_power", format!("must be > 0, got {reference_power}")));
    }
    Ok(g * (power / reference_power).sqrt())
}

/// Intracavity photon number at detuning `detuning` relative to the peak.
pub fn cavity_lorentzian(kappa: f64, detuning: f64) -> f64 {
    let h = 0.25 * kappa * kappa;
    h / (h + detuning * detuning)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweptParameter {
    /// Values in mW at the base detuning.
    InputPower,
    /// Values in Hz at input power `power_mw`.
    Detuning { power_mw: f64 },
}

/// Sweep over one parameter of `base`, whose couplings hold at
/// `reference_power_mw` and the base detuning.
#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub base: SystemModel,
    pub parameter: SweptParameter,
    pub values: Vec<f64>,
    pub reference_power_mw: f64,
    pub grid_hz: Vec<f64>,
    pub windows: Vec<FitWindow>,
    pub quantity: Quantity,
    pub stage: Stage,
}

impl SweepPlan {
    /// Direct detection after the detector, with the default +-50 kHz windows.
    pub fn new(base: SystemModel, parameter: SweptParameter, values: Vec<f64>, reference_power_mw: f64, grid_hz: Vec<f64>) -> Self {
        let windows = crate::fitting::default_windows(&base);
        Self { base, parameter, values, reference_power_mw, grid_hz, windows, quantity: Quantity::DirectX, stage: Stage::Detected }
    }

    pub fn with_quantity(mut self, quantity: Quantity, stage: Stage) -> Self {
        self.quantity = quantity;
        self.stage = stage;
        self
    }

    pub fn with_windows(mut self, windows: Vec<FitWindow>) -> Self {
        self.windows = windows;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::param("sweep.values", "must not be empty"));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::param("sweep.values", format!("{v} is not finite")));
        }
        let powers_positive = match self.parameter {
            SweptParameter::InputPower => self.values.iter().all(|v| *v > 0.0),
            SweptParameter::Detuning { power_mw } => power_mw > 0.0,
        };
        if !powers_positive {
            return Err(Error::param("sweep.values", "powers must be > 0"));
        }
        if !(self.reference_power_mw > 0.0) {
            return Err(Error::param("sweep.reference_power_mw", "must be > 0"));
        }
        if self.grid_hz.is_empty() {
            return Err(Error::param("grid", "must not be empty"));
        }
        if matches!(self.stage, Stage::LossCorrected) {
            return Err(Error::param("sweep.stage", "loss-corrected sweeps are not supported"));
        }
        Ok(())
    }

    /// The model at one swept value.
    pub fn model_at(&self, value: f64) -> Result<SystemModel> {
        let base = &self.base;
        let kappa = base.cavity().kappa();
        let (power, detuning) = match self.parameter {
            SweptParameter::InputPower => (value, base.cavity().detuning()),
            SweptParameter::Detuning { power_mw } => (power_mw, TAU * value),
        };
        let photon_ratio = cavity_lorentzian(kappa, detuning) / cavity_lorentzian(kappa, base.cavity().detuning());
        let modes = base
            .modes()
            .iter()
            .map(|m| {
                let g = scale_coupling_with_power(m.g(), power, self.reference_power_mw)? * photon_ratio.sqrt();
                m.with_coupling(g)
            })
            .collect::<Result<Vec<_>>>()?;
        base.with_cavity(base.cavity().with_detuning(detuning)?).with_modes(modes)
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub stable: bool,
    /// None for unstable or failed points.
    pub trace: Option<SpectrumTrace>,
    /// One entry per plan window; None where the window could not be summarized.
    pub squeezing: Vec<Option<SqueezingLevel>>,
    /// Optically broadened FWHM of each mode, rad/s.
    pub gamma_eff: Vec<Option<f64>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub parameter: SweptParameter,
    pub points: Vec<SweepPoint>,
}

/// Evaluates every plan value concurrently; results keep plan order and
/// per-point failures are recorded rather than aborting the sweep.
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepResult> {
    plan.validate()?;
    let points = plan.values.par_iter().map(|&value| sweep_point(plan, value)).collect();
    Ok(SweepResult { parameter: plan.parameter, points })
}

fn sweep_point(plan: &SweepPlan, value: f64) -> SweepPoint {
    let failed = |stable: bool, e: Error| SweepPoint {
        value,
        stable,
        trace: None,
        squeezing: vec![None; plan.windows.len()],
        gamma_eff: vec![None; plan.base.modes().len()],
        error: Some(e.to_string()),
    };
    let model = match plan.model_at(value) {
        Ok(m) => m,
        Err(e) => return failed(false, e),
    };
    if !model.is_stable() {
        let e = Error::Unstable { max_real: model.drift_matrix().max_real_eigenvalue() };
        log::warn!("sweep point {value}: {e}");
        return failed(false, e);
    }
    let eval = SpectrumEvaluator::unchecked(&model);
    let trace = match plan.stage {
        Stage::Detected => eval.detected_trace(plan.quantity, &plan.grid_hz),
        _ => eval.trace(plan.quantity, &plan.grid_hz),
    };
    let trace = match trace {
        Ok(t) => t.with_meta("sweep_value", value),
        Err(e) => return failed(true, e),
    };
    let squeezing = plan
        .windows
        .iter()
        .map(|w| squeezing_level_db(&trace, w.lo_hz, w.hi_hz).ok())
        .collect();
    let gamma_eff = model
        .modes()
        .iter()
        .map(|m| effective_mode_parameters(m, model.cavity()).ok().map(|p| p.gamma_eff))
        .collect();
    SweepPoint { value, stable: true, trace: Some(trace), squeezing, gamma_eff, error: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{REFERENCE_POWER_MW, reference_device};
    use crate::spectra::linear_grid;

    fn grid(model: &SystemModel) -> Vec<f64> {
        let mut g = Vec::new();
        for w in crate::fitting::default_windows(model) {
            g.extend(linear_grid(w.lo_hz, w.hi_hz, 801).unwrap());
        }
        g
    }

    #[test]
    fn power_scaling() {
        assert_eq!(scale_coupling_with_power(3.0, 2.0, 2.0).unwrap(), 3.0);
        assert!((scale_coupling_with_power(3.0, 8.0, 2.0).unwrap() - 6.0).abs() < 1e-15);
        assert!(scale_coupling_with_power(3.0, 0.0, 2.0).is_err());
        assert!(scale_coupling_with_power(3.0, 1.0, -2.0).is_err());
    }

    #[test]
    fn single_point_matches_direct_call() {
        let base = reference_device();
        let g = grid(&base);
        let plan = SweepPlan::new(base.clone(), SweptParameter::InputPower, vec![REFERENCE_POWER_MW], REFERENCE_POWER_MW, g.clone());
        let r = run_sweep(&plan).unwrap();
        let direct = SpectrumEvaluator::new(&base).unwrap().detected_trace(Quantity::DirectX, &g).unwrap();
        assert_eq!(r.points[0].trace.as_ref().unwrap().values(), direct.values());
    }

    #[test]
    fn detuning_at_reference_is_identity() {
        let base = reference_device();
        let plan = SweepPlan::new(
            base.clone(),
            SweptParameter::Detuning { power_mw: REFERENCE_POWER_MW },
            vec![],
            REFERENCE_POWER_MW,
            vec![1.0],
        );
        let m = plan.model_at(base.cavity().detuning() / TAU).unwrap();
        for (a, b) in m.modes().iter().zip(base.modes()) {
            assert!((a.g() / b.g() - 1.0).abs() < 1e-12);
        }
        assert!(run_sweep(&plan).is_err());
    }

    #[test]
    fn blue_detuning_is_reported_not_dropped() {
        let base = reference_device();
        let plan = SweepPlan::new(base.clone(), SweptParameter::Detuning { power_mw: 3.0 }, vec![2.3e6, -2.3e6], REFERENCE_POWER_MW, grid(&base));
        let r = run_sweep(&plan).unwrap();
        assert_eq!(r.points.len(), 2);
        assert!(r.points[0].stable && r.points[0].trace.is_some());
        assert!(!r.points[1].stable && r.points[1].trace.is_none() && r.points[1].error.is_some());
    }

    #[test]
    fn sweeps_are_deterministic() {
        let base = reference_device();
        let plan = SweepPlan::new(base.clone(), SweptParameter::InputPower, vec![1.6, 4.0, 8.0], REFERENCE_POWER_MW, grid(&base));
        let a = run_sweep(&plan).unwrap();
        let b = run_sweep(&plan).unwrap();
        for (p, q) in a.points.iter().zip(&b.points) {
            assert_eq!(p.trace.as_ref().unwrap().values(), q.trace.as_ref().unwrap().values());
            assert_eq!(p.squeezing, q.squeezing);
        }
    }
}
