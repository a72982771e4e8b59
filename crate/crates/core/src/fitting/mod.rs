//! Shot-noise normalization of measured traces, relative-deviation least
//! squares over the cavity and mode parameters, and ring-down damping fits.

pub mod optimizer;
mod ringdown;

use std::f64::consts::TAU;
use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;

pub use optimizer::Termination;
pub use ringdown::{RingdownData, RingdownResult, ringdown_fit};

use crate::error::{Error, Result};
use crate::model::SystemModel;
use crate::spectra::{Quantity, SHOT_NOISE, SpectrumEvaluator, SpectrumTrace, Stage};

/// Signal, shot-noise and electronic-noise PSDs in detector units on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTraceSet {
    frequencies_hz: Vec<f64>,
    signal: Vec<f64>,
    shot: Vec<f64>,
    electronic: Vec<f64>,
}

impl RawTraceSet {
    pub fn new(frequencies_hz: Vec<f64>, signal: Vec<f64>, shot: Vec<f64>, electronic: Vec<f64>) -> Result<Self> {
        let n = frequencies_hz.len();
        if signal.len() != n || shot.len() != n || electronic.len() != n {
            return Err(Error::InvalidTrace("signal, shot and electronic traces must share the grid".into()));
        }
        Ok(Self { frequencies_hz, signal, shot, electronic })
    }

    pub fn frequencies_hz(&self) -> &[f64] {
        &self.frequencies_hz
    }
}

/// (signal - electronic) / (shot - electronic): shot noise becomes exactly 1.
pub fn normalize_trace(raw: &RawTraceSet) -> Result<SpectrumTrace> {
    let values = raw
        .frequencies_hz
        .iter()
        .zip(raw.signal.iter().zip(raw.shot.iter().zip(&raw.electronic)))
        .map(|(&f, (&s, (&sh, &e)))| {
            let den = sh - e;
            if den > 0.0 {
                Ok((s - e) / den)
            } else {
                Err(Error::NonPositiveDenominator { freq_hz: f, value: den })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    SpectrumTrace::new(raw.frequencies_hz.clone(), values, Quantity::DirectX, Stage::Detected)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FitParameter {
    Kappa,
    Detuning,
    Coupling(usize),
    Frequency(usize),
}

impl FitParameter {
    pub fn get(self, model: &SystemModel) -> Result<f64> {
        Ok(match self {
            FitParameter::Kappa => model.cavity().kappa(),
            FitParameter::Detuning => model.cavity().detuning(),
            FitParameter::Coupling(l) => model.mode(l)?.g(),
            FitParameter::Frequency(l) => model.mode(l)?.omega_m(),
        })
    }

    pub fn set(self, model: &SystemModel, value: f64) -> Result<SystemModel> {
        match self {
            FitParameter::Kappa => Ok(model.with_cavity(model.cavity().with_linewidth(value)?)),
            FitParameter::Detuning => Ok(model.with_cavity(model.cavity().with_detuning(value)?)),
            FitParameter::Coupling(l) | FitParameter::Frequency(l) => {
                let mut modes = model.modes().to_vec();
                let m = model.mode(l)?;
                modes[l] = match self {
                    FitParameter::Coupling(_) => m.with_coupling(value)?,
                    _ => m.with_frequency(value)?,
                };
                model.with_modes(modes)
            }
        }
    }

    fn mode(self) -> Option<usize> {
        match self {
            FitParameter::Coupling(l) | FitParameter::Frequency(l) => Some(l),
            _ => None,
        }
    }
}

impl fmt::Display for FitParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitParameter::Kappa => f.write_str("kappa"),
            FitParameter::Detuning => f.write_str("detuning"),
            FitParameter::Coupling(l) => write!(f, "g[{}]", l + 1),
            FitParameter::Frequency(l) => write!(f, "omega_m[{}]", l + 1),
        }
    }
}

/// A free parameter with its starting value and box bounds, all in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeParameter {
    pub param: FitParameter,
    pub initial: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Frequency interval (Hz) around mode `mode`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitWindow {
    pub mode: usize,
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl FitWindow {
    pub fn contains(&self, f_hz: f64) -> bool {
        f_hz >= self.lo_hz && f_hz <= self.hi_hz
    }
}

/// Half-width of the default per-mode fit windows.
pub const DEFAULT_WINDOW_HALF_WIDTH_HZ: f64 = 50e3;

pub fn default_windows(model: &SystemModel) -> Vec<FitWindow> {
    model
        .modes()
        .iter()
        .enumerate()
        .map(|(mode, m)| {
            let f = m.omega_m() / TAU;
            FitWindow { mode, lo_hz: f - DEFAULT_WINDOW_HALF_WIDTH_HZ, hi_hz: f + DEFAULT_WINDOW_HALF_WIDTH_HZ }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub max_simplex_iterations: usize,
    pub max_lm_iterations: usize,
    /// Scan each free mode frequency over its window before the simplex search.
    pub seed_frequencies: bool,
    pub scan_points: usize,
    pub quantity: Quantity,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_simplex_iterations: 3000,
            max_lm_iterations: 100,
            seed_frequencies: true,
            scan_points: 801,
            quantity: Quantity::DirectX,
        }
    }
}

/// Normalized detected data, fit windows and the free/fixed parameter split.
/// Everything not listed in `free` is taken from `base` unchanged.
#[derive(Debug, Clone)]
pub struct FitProblem {
    data: SpectrumTrace,
    base: SystemModel,
    windows: Vec<FitWindow>,
    notches_hz: Vec<(f64, f64)>,
    free: Vec<FreeParameter>,
    options: FitOptions,
}

impl FitProblem {
    pub fn new(data: SpectrumTrace, base: SystemModel, windows: Vec<FitWindow>, free: Vec<FreeParameter>) -> Result<Self> {
        if windows.is_empty() {
            return Err(Error::FitProblem("no fit windows".into()));
        }
        for w in &windows {
            if !(w.lo_hz < w.hi_hz) {
                return Err(Error::FitProblem(format!("window [{}, {}] Hz is empty", w.lo_hz, w.hi_hz)));
            }
            base.mode(w.mode)?;
        }
        for (i, a) in windows.iter().enumerate() {
            for b in &windows[i + 1..] {
                if a.lo_hz <= b.hi_hz && b.lo_hz <= a.hi_hz {
                    return Err(Error::FitProblem("fit windows overlap".into()));
                }
            }
        }
        for (i, p) in free.iter().enumerate() {
            p.param.get(&base)?;
            if !(p.lower <= p.initial && p.initial <= p.upper) || !(p.lower < p.upper) {
                return Err(Error::FitProblem(format!("bounds of {} do not contain its initial value", p.param)));
            }
            if p.initial == 0.0 {
                return Err(Error::FitProblem(format!("initial value of {} must be nonzero", p.param)));
            }
            if free[..i].iter().any(|q| q.param == p.param) {
                return Err(Error::FitProblem(format!("{} listed twice", p.param)));
            }
        }
        Ok(Self { data, base, windows, notches_hz: Vec::new(), free, options: FitOptions::default() })
    }

    /// Every cavity and mode parameter free, starting from `guess`, with the
    /// box guess * [1 - rel, 1 + rel].
    pub fn all_free(data: SpectrumTrace, guess: SystemModel, windows: Vec<FitWindow>, rel: f64) -> Result<Self> {
        let mut params = vec![FitParameter::Kappa, FitParameter::Detuning];
        for l in 0..guess.modes().len() {
            params.push(FitParameter::Coupling(l));
            params.push(FitParameter::Frequency(l));
        }
        let free = params
            .into_iter()
            .map(|param| {
                let v = param.get(&guess)?;
                let (a, b) = (v * (1.0 - rel), v * (1.0 + rel));
                Ok(FreeParameter { param, initial: v, lower: a.min(b), upper: a.max(b) })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(data, guess, windows, free)
    }

    pub fn with_notches(mut self, notches_hz: Vec<(f64, f64)>) -> Self {
        self.notches_hz = notches_hz;
        self
    }

    pub fn with_options(mut self, options: FitOptions) -> Self {
        self.options = options;
        self
    }

    pub fn base(&self) -> &SystemModel {
        &self.base
    }

    pub fn free(&self) -> &[FreeParameter] {
        &self.free
    }

    pub fn windows(&self) -> &[FitWindow] {
        &self.windows
    }

    /// Data points used by the cost, as (frequency Hz, value, window index).
    fn points(&self) -> Result<Vec<(f64, f64, usize)>> {
        let mut pts = Vec::new();
        for (f, v) in self.data.frequencies_hz().iter().zip(self.data.values()) {
            if self.notches_hz.iter().any(|(a, b)| f >= a && f <= b) {
                continue;
            }
            if let Some(w) = self.windows.iter().position(|w| w.contains(*f)) {
                if *v == 0.0 {
                    return Err(Error::ZeroDataValue { freq_hz: *f });
                }
                pts.push((*f, *v, w));
            }
        }
        if pts.is_empty() {
            return Err(Error::FitProblem("every fit window is empty".into()));
        }
        Ok(pts)
    }

    fn model_for(&self, values: &[f64]) -> Result<SystemModel> {
        let mut m = self.base.clone();
        for (p, v) in self.free.iter().zip(values) {
            m = p.param.set(&m, *v)?;
        }
        Ok(m)
    }
}

/// Detected, normalized model PSD at each frequency (Hz).
fn model_values(model: &SystemModel, freqs_hz: &[f64], quantity: Quantity) -> Result<Vec<f64>> {
    let eval = SpectrumEvaluator::unchecked(model);
    let eta = model.eta_det();
    freqs_hz
        .par_iter()
        .map(|&f| {
            let c = eval.components(TAU * f)?.attenuated(eta);
            let s = match quantity {
                Quantity::DirectX => c.sx,
                Quantity::PhaseY => c.sy,
                Quantity::Quadrature(t) => c.quadrature(t),
                Quantity::Optimal => c.optimal(),
                Quantity::CrossReXY | Quantity::OptimalTheta => {
                    return Err(Error::FitProblem(format!("cannot fit {quantity}")));
                }
            };
            Ok(s / SHOT_NOISE)
        })
        .collect()
}

/// Sum over window points of ((model - data) / data)^2 for the detected
/// direct-detection PSD.
pub fn residual(model: &SystemModel, data: &SpectrumTrace, windows: &[FitWindow]) -> Result<f64> {
    if windows.is_empty() {
        return Err(Error::FitProblem("no fit windows".into()));
    }
    let (freqs, vals): (Vec<f64>, Vec<f64>) = data
        .frequencies_hz()
        .iter()
        .zip(data.values())
        .filter(|(f, _)| windows.iter().any(|w| w.contains(**f)))
        .map(|(f, v)| (*f, *v))
        .unzip();
    if freqs.is_empty() {
        return Err(Error::FitProblem("every fit window is empty".into()));
    }
    if let Some(i) = vals.iter().position(|v| *v == 0.0) {
        return Err(Error::ZeroDataValue { freq_hz: freqs[i] });
    }
    let m = model_values(model, &freqs, Quantity::DirectX)?;
    Ok(m.iter().zip(&vals).map(|(m, d)| ((m - d) / d).powi(2)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedParameter {
    pub param: FitParameter,
    pub value: f64,
    /// One-sigma estimate from the local curvature of the cost.
    pub uncertainty: f64,
    pub initial: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub parameters: Vec<FittedParameter>,
    pub model: SystemModel,
    pub cost: f64,
    pub initial_cost: f64,
    pub points: usize,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    pub fitted_trace: SpectrumTrace,
}

impl FitResult {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn value(&self, param: FitParameter) -> Option<f64> {
        self.parameters.iter().find(|p| p.param == param).map(|p| p.value)
    }
}

struct Objective<'a> {
    problem: &'a FitProblem,
    freqs: Vec<f64>,
    data: Vec<f64>,
    evaluations: usize,
}

impl Objective<'_> {
    /// Relative residuals, or None for unstable or unevaluable parameter sets.
    fn residuals(&mut self, values: &[f64]) -> Option<Vec<f64>> {
        self.evaluations += 1;
        let model = self.problem.model_for(values).ok()?;
        if !model.is_stable() {
            return None;
        }
        let m = model_values(&model, &self.freqs, self.problem.options.quantity).ok()?;
        let r: Vec<f64> = m.iter().zip(&self.data).map(|(m, d)| (m - d) / d).collect();
        r.iter().all(|v| v.is_finite()).then_some(r)
    }

    fn cost(&mut self, values: &[f64]) -> f64 {
        self.residuals(values).map_or(f64::INFINITY, |r| r.iter().map(|v| v * v).sum())
    }
}

/// Minimizes the relative-deviation cost: a frequency scan per free mode
/// frequency, a bounded simplex search, then Levenberg-Marquardt polish.
pub fn fit(problem: &FitProblem) -> Result<FitResult> {
    let points = problem.points()?;
    let free = &problem.free;
    let lower: Vec<f64> = free.iter().map(|p| p.lower).collect();
    let upper: Vec<f64> = free.iter().map(|p| p.upper).collect();
    let mut x: Vec<f64> = free.iter().map(|p| p.initial).collect();

    let mut all = Objective {
        problem,
        freqs: points.iter().map(|p| p.0).collect(),
        data: points.iter().map(|p| p.1).collect(),
        evaluations: 0,
    };
    let initial_cost = all.cost(&x);
    let mut evaluations = 0;

    if problem.options.seed_frequencies {
        for (k, p) in free.iter().enumerate() {
            let FitParameter::Frequency(l) = p.param else { continue };
            let in_window: Vec<&(f64, f64, usize)> =
                points.iter().filter(|pt| problem.windows[pt.2].mode == l).collect();
            let Some(win) = problem.windows.iter().find(|w| w.mode == l) else { continue };
            let lo = (TAU * win.lo_hz).max(p.lower);
            let hi = (TAU * win.hi_hz).min(p.upper);
            if in_window.is_empty() || !(lo < hi) {
                continue;
            }
            let mut local = Objective {
                problem,
                freqs: in_window.iter().map(|p| p.0).collect(),
                data: in_window.iter().map(|p| p.1).collect(),
                evaluations: 0,
            };
            let n = problem.options.scan_points.max(3);
            let mut best = (local.cost(&x), x[k]);
            for i in 0..n {
                let mut trial = x.clone();
                trial[k] = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                let c = local.cost(&trial);
                if c < best.0 {
                    best = (c, trial[k]);
                }
            }
            x[k] = best.1;
            evaluations += local.evaluations;
        }
    }

    // simplex in the unit box; steps of 5% (1e-3 for mode frequencies) of each value
    let to_unit = |v: &[f64]| -> Vec<f64> { (0..v.len()).map(|k| (v[k] - lower[k]) / (upper[k] - lower[k])).collect() };
    let from_unit = |u: &[f64]| -> Vec<f64> { (0..u.len()).map(|k| lower[k] + u[k] * (upper[k] - lower[k])).collect() };
    let steps: Vec<f64> = free
        .iter()
        .zip(&x)
        .map(|(p, v)| {
            let rel = if matches!(p.param, FitParameter::Frequency(_)) { 1e-3 } else { 0.05 };
            (rel * v.abs() / (p.upper - p.lower)).min(0.25)
        })
        .collect();
    let nm = optimizer::nelder_mead(
        &mut |u| all.cost(&from_unit(u)),
        &to_unit(&x),
        &steps,
        problem.options.max_simplex_iterations,
        1e-12,
    );
    let mut iterations = nm.iterations;
    let mut termination = nm.termination;
    if nm.cost <= all.cost(&x) {
        x = from_unit(&nm.x);
    }

    // polish in coordinates relative to the starting values
    let scale: Vec<f64> = free.iter().map(|p| p.initial.abs()).collect();
    let s_lower: Vec<f64> = lower.iter().zip(&scale).map(|(l, s)| l / s).collect();
    let s_upper: Vec<f64> = upper.iter().zip(&scale).map(|(u, s)| u / s).collect();
    let s_start: Vec<f64> = x.iter().zip(&scale).map(|(v, s)| v / s).collect();
    let unscale = |s: &[f64]| -> Vec<f64> { s.iter().zip(&scale).map(|(a, b)| a * b).collect() };
    let lm = optimizer::levenberg_marquardt(
        &mut |s| all.residuals(&unscale(s)),
        &s_start,
        &s_lower,
        &s_upper,
        problem.options.max_lm_iterations,
    );
    let mut jacobian = None;
    if let Some(lm) = lm {
        iterations += lm.iterations;
        x = unscale(&lm.x);
        if lm.termination == Termination::Converged {
            termination = Termination::Converged;
        }
        jacobian = Some(lm.jacobian);
    }

    let mut cost = all.cost(&x);
    if !(cost <= initial_cost) {
        x = free.iter().map(|p| p.initial).collect();
        cost = initial_cost;
        jacobian = None;
    }
    evaluations += all.evaluations;
    if !cost.is_finite() {
        return Err(Error::FitProblem("no stable parameter set found inside the bounds".into()));
    }

    let n = points.len();
    let p = free.len();
    let sigma = jacobian
        .map(|j| {
            let s2 = if n > p { cost / (n - p) as f64 } else { 0.0 };
            covariance_diagonal(&j, s2)
        })
        .unwrap_or_else(|| vec![f64::NAN; p]);

    let model = problem.model_for(&x)?;
    let parameters = free
        .iter()
        .zip(&x)
        .zip(&sigma)
        .zip(&scale)
        .map(|(((fp, v), s), sc)| FittedParameter { param: fp.param, value: *v, uncertainty: s * sc, initial: fp.initial })
        .collect();

    let values = model_values(&model, problem.data.frequencies_hz(), problem.options.quantity)?;
    let fitted_trace = SpectrumTrace::new(problem.data.frequencies_hz().to_vec(), values, problem.options.quantity, Stage::Detected)?
        .with_meta("model_hash", model.content_hash())
        .with_meta("cost", cost);

    Ok(FitResult { parameters, model, cost, initial_cost, points: n, iterations, evaluations, termination, fitted_trace })
}

/// Fits each window on its own with the shared cavity parameters and that
/// window's mode parameters free.
pub fn fit_per_window(problem: &FitProblem) -> Result<Vec<FitResult>> {
    problem
        .windows
        .iter()
        .map(|w| {
            let free: Vec<FreeParameter> =
                problem.free.iter().copied().filter(|p| p.param.mode().is_none_or(|l| l == w.mode)).collect();
            let sub = FitProblem { windows: vec![*w], free, ..problem.clone() };
            fit(&sub)
        })
        .collect()
}

/// sqrt(diag(s2 (J^T J)^+)).
fn covariance_diagonal(j: &DMatrix<f64>, s2: f64) -> Vec<f64> {
    let jtj = j.transpose() * j;
    match jtj.clone().pseudo_inverse(1e-14 * jtj.amax()) {
        Ok(inv) => (0..inv.nrows()).map(|k| (s2 * inv[(k, k)]).max(0.0).sqrt()).collect(),
        Err(_) => vec![f64::NAN; jtj.nrows()],
    }
}
