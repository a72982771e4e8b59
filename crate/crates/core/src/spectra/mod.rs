//! Output-light spectra: closed forms per mechanical mode, quadrature
//! rotation, the optimal-squeezing envelope, loss maps and dB reporting.
//!
//! Values returned by the scalar functions are in internal units (shot
//! noise 1/2). [`SpectrumTrace`] values are normalized to shot noise 1.

mod closed_form;
mod evaluator;
mod trace;

use std::f64::consts::PI;

pub use closed_form::closed_form_components;
pub use evaluator::{
    Fallback, ModeWindow, SpectrumEvaluator, cross_spectrum_real, direct_detection_psd, optimal_phase, optimal_psd,
    phase_quadrature_psd, quadrature_psd,
};
pub use trace::{
    LossCorrection, Quantity, SpectrumTrace, SqueezingLevel, Stage, apply_detection_efficiency, correct_for_losses,
    linear_grid, squeezing_level_db, to_db,
};

/// Shot-noise level in internal units.
pub const SHOT_NOISE: f64 = 0.5;

/// Homodyne angle, canonicalized to [0, pi). theta and theta + pi select the
/// same quadrature up to sign.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct QuadratureAngle(f64);

impl QuadratureAngle {
    pub fn new(theta: f64) -> Self {
        let t = theta.rem_euclid(PI);
        Self(if t >= PI { 0.0 } else { t })
    }

    pub fn radians(self) -> f64 {
        self.0
    }
}

impl From<f64> for QuadratureAngle {
    fn from(theta: f64) -> Self {
        Self::new(theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalPhase {
    pub theta: QuadratureAngle,
    /// Set when S_X = S_Y and Re S_XY = 0, where every angle is optimal.
    pub degenerate: bool,
}

/// Amplitude, phase and in-phase cross spectra at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentSpectra {
    pub sx: f64,
    pub sy: f64,
    pub re_sxy: f64,
}

impl ComponentSpectra {
    pub fn quadrature(&self, theta: QuadratureAngle) -> f64 {
        let two = 2.0 * theta.radians();
        0.5 * (self.sx + self.sy) + 0.5 * two.cos() * (self.sx - self.sy) + two.sin() * self.re_sxy
    }

    pub fn optimal_phase(&self) -> OptimalPhase {
        let half_diff = 0.5 * (self.sx - self.sy);
        let scale = (self.sx.abs() + self.sy.abs()).max(f64::MIN_POSITIVE);
        if half_diff.hypot(self.re_sxy) <= 1e-15 * scale {
            return OptimalPhase { theta: QuadratureAngle::new(0.0), degenerate: true };
        }
        // S(theta) = mean + half_diff cos 2theta + re_sxy sin 2theta, minimized
        // where (cos 2theta, sin 2theta) is antiparallel to (half_diff, re_sxy)
        let theta = 0.5 * (-self.re_sxy).atan2(-half_diff);
        OptimalPhase { theta: QuadratureAngle::new(theta), degenerate: false }
    }

    pub fn optimal(&self) -> f64 {
        0.5 * (self.sx + self.sy) - (0.5 * (self.sx - self.sy)).hypot(self.re_sxy)
    }

    /// S_X S_Y - Re^2 S_XY; at least 1/4 for any physical state.
    pub fn uncertainty_product(&self) -> f64 {
        self.sx * self.sy - self.re_sxy * self.re_sxy
    }

    /// Beam-splitter loss with transmission `eta`, mixing in vacuum.
    pub fn attenuated(&self, eta: f64) -> Self {
        Self {
            sx: eta * self.sx + (1.0 - eta) * SHOT_NOISE,
            sy: eta * self.sy + (1.0 - eta) * SHOT_NOISE,
            re_sxy: eta * self.re_sxy,
        }
    }
}
