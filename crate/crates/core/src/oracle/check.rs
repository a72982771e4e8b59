//! Cross-checks between the closed forms and the two oracles.

use std::f64::consts::TAU;

use rayon::prelude::*;

use super::frequency::FrequencyOracle;
use super::langevin::{InitialState, LangevinSimulator, max_time_step};
use super::welch::{WelchAccumulator, WelchEstimate, WelchOptions, WindowFunction};
use super::drift::NoiseInputSpec;
use crate::error::{Error, Result};
use crate::model::{SystemModel, effective_mode_parameters};
use crate::spectra::{ComponentSpectra, SpectrumEvaluator};

/// Largest relative deviations between the closed forms and the exact solve.
/// The cross spectrum and its deviation are scaled by sqrt(S_X S_Y), since Re S_XY
/// crosses zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DeviationReport {
    pub sx: f64,
    pub sy: f64,
    pub re_sxy: f64,
    pub optimal: f64,
    pub points: usize,
}

impl DeviationReport {
    pub fn max(&self) -> f64 {
        self.sx.max(self.sy).max(self.re_sxy).max(self.optimal)
    }

    fn merge(self, o: Self) -> Self {
        Self {
            sx: self.sx.max(o.sx),
            sy: self.sy.max(o.sy),
            re_sxy: self.re_sxy.max(o.re_sxy),
            optimal: self.optimal.max(o.optimal),
            points: self.points + o.points,
        }
    }

    fn single(c: &ComponentSpectra, e: &ComponentSpectra) -> Self {
        let cross_scale = (e.sx * e.sy).sqrt();
        Self {
            sx: ((c.sx - e.sx) / e.sx).abs(),
            sy: ((c.sy - e.sy) / e.sy).abs(),
            re_sxy: ((c.re_sxy - e.re_sxy) / cross_scale).abs(),
            optimal: ((c.optimal() - e.optimal()) / e.optimal()).abs(),
            points: 1,
        }
    }
}

/// Deviation of the closed forms from the exact solve at every grid point
/// (rad/s) that falls inside a mode window.
pub fn closed_form_deviation(evaluator: &SpectrumEvaluator, omegas: &[f64]) -> Result<DeviationReport> {
    omegas
        .par_iter()
        .filter(|w| evaluator.owner(**w).is_some())
        .map(|&w| Ok(DeviationReport::single(&evaluator.closed_form(w)?, &evaluator.exact(w)?)))
        .try_reduce(DeviationReport::default, |a, b| Ok(a.merge(b)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StochasticCheck {
    /// Zero selects the largest admissible step.
    pub dt: f64,
    pub segment_length: usize,
    pub segments: usize,
    pub overlap: f64,
    pub window: WindowFunction,
    pub seed: u64,
    /// Independent trajectories sharing the segment budget, run in parallel.
    pub trajectories: usize,
    /// Band half-width around each effective resonance, in effective linewidths.
    pub band_halfwidth: f64,
}

impl Default for StochasticCheck {
    fn default() -> Self {
        Self {
            dt: 0.0,
            segment_length: 1 << 20,
            segments: 200,
            overlap: 0.5,
            window: WindowFunction::Hann,
            seed: 1,
            trajectories: 1,
            band_halfwidth: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandComparison {
    pub label: String,
    /// Band edges in rad/s.
    pub lo: f64,
    pub hi: f64,
    pub welch: f64,
    pub exact: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StochasticReport {
    pub segments: usize,
    pub dt: f64,
    pub bands: Vec<BandComparison>,
    pub estimate: WelchEstimate,
}

impl StochasticReport {
    pub fn max_band_error(&self) -> f64 {
        self.bands.iter().map(|b| (b.ratio - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Simulates the amplitude-quadrature output, estimates its PSD with Welch
/// averaging and compares band-integrated power over each mechanical
/// resonance (effective frequency +- effective linewidth) with the exact PSD
/// sampled on the same bins.
pub fn stochastic_check(model: &SystemModel, check: &StochasticCheck) -> Result<StochasticReport> {
    let dt = if check.dt > 0.0 { check.dt } else { max_time_step(model) };
    let noise = NoiseInputSpec::physical(model);
    let sim = LangevinSimulator::new(model, &noise, dt)?;
    let opts = WelchOptions { segment_length: check.segment_length, overlap: check.overlap, window: check.window };
    let trajectories = check.trajectories.max(1);
    if check.segments < trajectories {
        return Err(Error::param("segments", "fewer segments than trajectories"));
    }
    let step = check.segment_length - (check.overlap * check.segment_length as f64).floor() as usize;

    let partials = (0..trajectories)
        .into_par_iter()
        .map(|t| {
            let share = check.segments / trajectories + usize::from(t < check.segments % trajectories);
            let samples = check.segment_length + (share - 1) * step.max(1);
            let mut acc = WelchAccumulator::new(opts, 1.0 / dt)?;
            sim.run_with(samples, check.seed, t as u64, &InitialState::Stationary, |s| acc.push(s.x_out), |_| {})?;
            acc.estimate()
        })
        .collect::<Result<Vec<_>>>()?;

    let segments: usize = partials.iter().map(|p| p.segments).sum();
    let frequencies = partials[0].frequencies.clone();
    let mut psd = vec![0.0; frequencies.len()];
    for p in &partials {
        for (acc, v) in psd.iter_mut().zip(&p.psd) {
            *acc += v * p.segments as f64 / segments as f64;
        }
    }
    let estimate = WelchEstimate { frequencies, psd, segments };

    let oracle = FrequencyOracle::new(model);
    let mut bands = Vec::new();
    for mode in model.modes() {
        let eff = effective_mode_parameters(mode, model.cavity())?;
        let (lo, hi) = (eff.omega_eff - check.band_halfwidth * eff.gamma_eff, eff.omega_eff + check.band_halfwidth * eff.gamma_eff);
        let (mut welch, mut exact) = (0.0, 0.0);
        for (f, p) in estimate.frequencies.iter().zip(&estimate.psd) {
            let w = TAU * f;
            if w >= lo && w <= hi {
                welch += p;
                exact += oracle.components(w)?.sx;
            }
        }
        if exact == 0.0 {
            return Err(Error::EmptyWindow { lo_hz: lo / TAU, hi_hz: hi / TAU, points: 0, needed: 1 });
        }
        bands.push(BandComparison { label: mode.label().to_string(), lo, hi, welch, exact, ratio: welch / exact });
    }
    Ok(StochasticReport { segments, dt, bands, estimate })
}
