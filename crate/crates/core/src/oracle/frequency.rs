//! Exact linear-response solve of the full multimode system, one frequency at a time.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::drift::{DriftMatrix, NoiseInputSpec, STATE_X, STATE_Y, X_IN2, Y_IN2, state_p, state_q};
use crate::error::{Error, Result};
use crate::model::SystemModel;
use crate::spectra::ComponentSpectra;

/// Cached drift/input matrices for repeated frequency-domain solves.
#[derive(Debug, Clone)]
pub struct FrequencyOracle {
    a: DMatrix<Complex64>,
    b: DMatrix<Complex64>,
    psd: Vec<f64>,
    sqrt_kappa_out: f64,
}

impl FrequencyOracle {
    pub fn new(model: &SystemModel) -> Self {
        Self::with_noise(model, &NoiseInputSpec::physical(model))
    }

    pub fn with_noise(model: &SystemModel, noise: &NoiseInputSpec) -> Self {
        let drift = DriftMatrix::new(model);
        Self {
            a: drift.a().map(|v| Complex64::new(v, 0.0)),
            b: drift.b().map(|v| Complex64::new(v, 0.0)),
            psd: noise.psd().to_vec(),
            sqrt_kappa_out: model.cavity().kappa_out().sqrt(),
        }
    }

    fn system(&self, omega: f64) -> DMatrix<Complex64> {
        let n = self.a.nrows();
        DMatrix::from_diagonal_element(n, n, Complex64::new(0.0, -omega)) - &self.a
    }

    /// Rows `rows` of (-i w I - A)^-1, obtained from one LU of the transpose.
    fn resolvent_rows(&self, omega: f64, rows: &[usize]) -> Result<Vec<DVector<Complex64>>> {
        let lu = self.system(omega).transpose().lu();
        let n = self.a.nrows();
        rows.iter()
            .map(|&r| {
                let mut e = DVector::zeros(n);
                e[r] = Complex64::new(1.0, 0.0);
                let u = lu.solve(&e).ok_or(Error::Singular { omega })?;
                if u.iter().any(|z| !z.is_finite()) {
                    return Err(Error::Singular { omega });
                }
                Ok(u)
            })
            .collect()
    }

    /// Output quadrature rows at port 2, in the symmetrized convention (internal units).
    pub fn components(&self, omega: f64) -> Result<ComponentSpectra> {
        let rows = self.resolvent_rows(omega, &[STATE_X, STATE_Y])?;
        let tx = self.b.tr_mul(&rows[0]);
        let ty = self.b.tr_mul(&rows[1]);
        let (mut sx, mut sy, mut sxy) = (0.0, 0.0, Complex64::new(0.0, 0.0));
        for (j, &s) in self.psd.iter().enumerate() {
            let mut ox = self.sqrt_kappa_out * tx[j];
            let mut oy = self.sqrt_kappa_out * ty[j];
            if j == X_IN2 {
                ox -= 1.0;
            }
            if j == Y_IN2 {
                oy -= 1.0;
            }
            sx += ox.norm_sqr() * s;
            sy += oy.norm_sqr() * s;
            sxy += ox.conj() * oy * s;
        }
        Ok(ComponentSpectra { sx, sy, re_sxy: sxy.re })
    }

    /// Displacement response of mode `mode` to a force on its own momentum,
    /// i.e. the hybridized effective susceptibility.
    pub fn mechanical_response(&self, omega: f64, mode: usize) -> Result<Complex64> {
        let q = state_q(mode);
        if q >= self.a.nrows() {
            return Err(Error::param("mode_index", format!("{mode} out of range")));
        }
        let row = self.resolvent_rows(omega, &[q])?;
        Ok(row[0][state_p(mode)])
    }
}

/// Exact S_X, S_Y and Re S_XY at the cavity output (internal units, shot noise 1/2).
pub fn frequency_psd_exact(model: &SystemModel, omega: f64) -> Result<ComponentSpectra> {
    FrequencyOracle::new(model).components(omega)
}

pub fn mechanical_response(model: &SystemModel, omega: f64, mode: usize) -> Result<Complex64> {
    FrequencyOracle::new(model).mechanical_response(omega, mode)
}
