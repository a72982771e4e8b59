//! Linear dynamics of the fluctuation quadratures: dx = A x dt + B dW.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::SystemModel;

/// Input-channel indices into the columns of B.
pub const X_IN1: usize = 0;
pub const Y_IN1: usize = 1;
pub const X_IN2: usize = 2;
pub const Y_IN2: usize = 3;
pub const X_EXT: usize = 4;
pub const Y_EXT: usize = 5;
/// Optical channels come first; mode `l` is driven by channel `THERMAL_OFFSET + l`.
pub const THERMAL_OFFSET: usize = 6;

/// State index of the cavity amplitude quadrature.
pub const STATE_X: usize = 0;
pub const STATE_Y: usize = 1;

pub fn state_q(mode: usize) -> usize {
    2 + 2 * mode
}

pub fn state_p(mode: usize) -> usize {
    3 + 2 * mode
}

/// Drift matrix A (state order X, Y, Q_1, P_1, ..., Q_L, P_L) and the
/// input coupling B (columns in channel order, see the `*_IN*` constants).
#[derive(Debug, Clone, PartialEq)]
pub struct DriftMatrix {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    n_modes: usize,
}

impl DriftMatrix {
    pub fn new(model: &SystemModel) -> Self {
        let modes = model.modes();
        let cav = model.cavity();
        let n = 2 + 2 * modes.len();
        let m = THERMAL_OFFSET + modes.len();
        let half_kappa = 0.5 * cav.kappa();
        let delta = cav.detuning();

        let mut a = DMatrix::zeros(n, n);
        a[(STATE_X, STATE_X)] = -half_kappa;
        a[(STATE_X, STATE_Y)] = delta;
        a[(STATE_Y, STATE_Y)] = -half_kappa;
        a[(STATE_Y, STATE_X)] = -delta;

        let mut b = DMatrix::zeros(n, m);
        let ports = [(X_IN1, Y_IN1, cav.kappa_in()), (X_IN2, Y_IN2, cav.kappa_out()), (X_EXT, Y_EXT, cav.kappa_ext())];
        for (cx, cy, k) in ports {
            b[(STATE_X, cx)] = k.sqrt();
            b[(STATE_Y, cy)] = k.sqrt();
        }

        for (l, mode) in modes.iter().enumerate() {
            let (q, p) = (state_q(l), state_p(l));
            a[(STATE_Y, q)] = -2.0 * mode.g();
            a[(q, p)] = mode.omega_m();
            a[(p, q)] = -mode.omega_m();
            a[(p, p)] = -mode.gamma_m();
            a[(p, STATE_X)] = -2.0 * mode.g();
            b[(p, THERMAL_OFFSET + l)] = (2.0 * mode.gamma_m()).sqrt();
        }
        Self { a, b, n_modes: modes.len() }
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.a.clone().complex_eigenvalues().iter().copied().collect()
    }

    pub fn max_real_eigenvalue(&self) -> f64 {
        self.eigenvalues().iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_stable(&self) -> bool {
        self.max_real_eigenvalue() < 0.0
    }

    pub fn ensure_stable(&self) -> Result<()> {
        let max_real = self.max_real_eigenvalue();
        if max_real < 0.0 {
            Ok(())
        } else {
            Err(Error::Unstable { max_real })
        }
    }
}

/// Symmetrized white-noise PSDs of every input channel.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseInputSpec {
    psd: Vec<f64>,
}

impl NoiseInputSpec {
    /// Vacuum (1/2) on every optical channel and n_th + 1/2 on each mode.
    pub fn physical(model: &SystemModel) -> Self {
        let mut psd = vec![0.5; THERMAL_OFFSET];
        psd.extend(model.modes().iter().map(|m| m.n_th() + 0.5));
        Self { psd }
    }

    pub fn custom(optical: [f64; THERMAL_OFFSET], thermal: Vec<f64>, model: &SystemModel) -> Result<Self> {
        if thermal.len() != model.modes().len() {
            return Err(Error::param(
                "noise",
                format!("{} thermal channels for {} modes", thermal.len(), model.modes().len()),
            ));
        }
        let psd: Vec<f64> = optical.into_iter().chain(thermal).collect();
        if let Some(bad) = psd.iter().find(|s| !(s.is_finite() && **s >= 0.5)) {
            return Err(Error::param("noise", format!("channel PSD {bad} below the vacuum level 1/2")));
        }
        Ok(Self { psd })
    }

    pub fn psd(&self) -> &[f64] {
        &self.psd
    }
}
