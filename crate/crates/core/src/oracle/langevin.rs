//! Exact discrete-time integration of dx = A x dt + B dW.
//!
//! Each step draws the input increments dW ~ N(0, S dt) and the state noise
//! conditioned on them from the exact Ornstein-Uhlenbeck transition, so the
//! port-2 increments that drive the cavity are the same ones subtracted in
//! the output. Output samples are step averages (integrate and dump) of
//! sqrt(kappa_out) X - X_in2 and likewise for Y.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::drift::{DriftMatrix, NoiseInputSpec, STATE_X, STATE_Y, X_IN2, Y_IN2};
use crate::error::{Error, Result};
use crate::model::SystemModel;

/// dt must not exceed this fraction of min(2 pi / Omega_max, 1 / kappa).
pub const DT_FRACTION: f64 = 0.05;

pub fn max_time_step(model: &SystemModel) -> f64 {
    let omega_max = model.modes().iter().map(|m| m.omega_m()).fold(0.0, f64::max);
    let kappa = model.cavity().kappa();
    let mut limit = f64::INFINITY;
    if omega_max > 0.0 {
        limit = limit.min(std::f64::consts::TAU / omega_max);
    }
    if kappa > 0.0 {
        limit = limit.min(1.0 / kappa);
    }
    DT_FRACTION * limit
}

/// Generator for stream `stream` of a master seed. Streams never overlap,
/// so parallel trajectories stay independent and reproducible.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Draw from the stationary covariance, so no burn-in is needed.
    Stationary,
    Zero,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputSample {
    pub x_out: f64,
    pub y_out: f64,
    /// Step average of the port-2 input noise that entered the cavity.
    pub x_in2: f64,
    pub y_in2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub dt: f64,
    pub seed: u64,
    pub x_out: Vec<f64>,
    pub y_out: Vec<f64>,
    pub x_in2: Vec<f64>,
    pub y_in2: Vec<f64>,
    /// Full state after every step, when requested.
    pub states: Option<Vec<Vec<f64>>>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.x_out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_out.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }
}

/// Precomputed one-step transition for a fixed model and dt.
#[derive(Debug, Clone)]
pub struct LangevinSimulator {
    dt: f64,
    n: usize,
    m: usize,
    /// exp(A dt), row-major n x n.
    phi: Vec<f64>,
    /// Deterministic part of the step integrals of X and Y, 2 x n.
    psi: Vec<f64>,
    /// Regression of (state noise, integral noise) on dW, (n+2) x m.
    gain: Vec<f64>,
    /// Square root of the residual covariance, (n+2) x (n+2).
    residual: Vec<f64>,
    /// sqrt(S_j dt) per channel.
    dw_scale: Vec<f64>,
    sqrt_kappa_out: f64,
    stationary_sqrt: DMatrix<f64>,
}

impl LangevinSimulator {
    pub fn new(model: &SystemModel, noise: &NoiseInputSpec, dt: f64) -> Result<Self> {
        Self::build(model, Some(noise), dt)
    }

    /// Same dynamics with every noise source switched off.
    pub fn noiseless(model: &SystemModel, dt: f64) -> Result<Self> {
        Self::build(model, None, dt)
    }

    fn build(model: &SystemModel, noise: Option<&NoiseInputSpec>, dt: f64) -> Result<Self> {
        let limit = max_time_step(model);
        if !(dt > 0.0 && dt <= limit) {
            return Err(Error::DtTooLarge { dt, limit });
        }
        let drift = DriftMatrix::new(model);
        drift.ensure_stable()?;
        let (n, m) = (drift.dim(), drift.n_inputs());
        let psd: Vec<f64> = match noise {
            Some(s) if s.psd().len() == m => s.psd().to_vec(),
            Some(s) => {
                return Err(Error::param("noise", format!("{} channels for a model with {m}", s.psd().len())));
            }
            None => vec![0.0; m],
        };

        // augmented state (x, int X dt, int Y dt, W)
        let na = n + 2 + m;
        let mut a_aug = DMatrix::zeros(na, na);
        a_aug.view_mut((0, 0), (n, n)).copy_from(drift.a());
        a_aug[(n, STATE_X)] = 1.0;
        a_aug[(n + 1, STATE_Y)] = 1.0;
        let mut b_aug = DMatrix::zeros(na, m);
        b_aug.view_mut((0, 0), (n, m)).copy_from(drift.b());
        for j in 0..m {
            b_aug[(n + 2 + j, j)] = 1.0;
        }
        let q = &b_aug * DMatrix::from_diagonal(&DVector::from_vec(psd.clone())) * b_aug.transpose();

        // Van Loan: exp([[-A, Q], [0, A^T]] dt) gives exp(A dt) and the step covariance
        let mut vl = DMatrix::zeros(2 * na, 2 * na);
        vl.view_mut((0, 0), (na, na)).copy_from(&(-&a_aug));
        vl.view_mut((0, na), (na, na)).copy_from(&q);
        vl.view_mut((na, na), (na, na)).copy_from(&a_aug.transpose());
        let e = (vl * dt).exp();
        let f = e.view((na, na), (na, na)).transpose();
        let cov = &f * e.view((0, na), (na, na));
        let cov = 0.5 * (&cov + cov.transpose());

        let k = n + 2;
        let mut gain = DMatrix::zeros(k, m);
        for j in 0..m {
            let var = psd[j] * dt;
            if var > 0.0 {
                for i in 0..k {
                    gain[(i, j)] = cov[(i, k + j)] / var;
                }
            }
        }
        let cross = cov.view((0, k), (k, m));
        let resid = cov.view((0, 0), (k, k)) - &gain * cross.transpose();
        let residual = psd_sqrt(&(0.5 * (&resid + resid.transpose())));

        let stationary = match noise {
            Some(_) => stationary_covariance(&drift, &psd)?,
            None => DMatrix::zeros(n, n),
        };

        Ok(Self {
            dt,
            n,
            m,
            phi: row_major(&f.view((0, 0), (n, n)).into_owned()),
            psi: row_major(&f.view((n, 0), (2, n)).into_owned()),
            gain: row_major(&gain),
            residual: row_major(&residual),
            dw_scale: psd.iter().map(|s| (s * dt).sqrt()).collect(),
            sqrt_kappa_out: model.cavity().kappa_out().sqrt(),
            stationary_sqrt: psd_sqrt(&stationary),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    /// exp(A dt) as an n x n matrix.
    pub fn transition(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.phi)
    }

    fn initial(&self, initial: &InitialState, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        match initial {
            InitialState::Zero => Ok(vec![0.0; self.n]),
            InitialState::Given(x) if x.len() == self.n => Ok(x.clone()),
            InitialState::Given(x) => {
                Err(Error::param("initial_state", format!("length {} for state dimension {}", x.len(), self.n)))
            }
            InitialState::Stationary => {
                let z = DVector::from_fn(self.n, |_, _| StandardNormal.sample(rng));
                Ok((&self.stationary_sqrt * z).iter().copied().collect())
            }
        }
    }

    /// Integrates `n_samples` steps, handing each output sample to `sink`;
    /// `on_state` sees the state after every step.
    pub fn run_with(
        &self,
        n_samples: usize,
        seed: u64,
        stream: u64,
        initial: &InitialState,
        mut sink: impl FnMut(OutputSample),
        mut on_state: impl FnMut(&[f64]),
    ) -> Result<()> {
        let mut rng = stream_rng(seed, stream);
        let (n, m, k) = (self.n, self.m, self.n + 2);
        let mut x = self.initial(initial, &mut rng)?;
        let mut next = vec![0.0; n];
        let mut dw = vec![0.0; m];
        let mut zeta = vec![0.0; k];
        let mut noise = vec![0.0; k];
        let inv_dt = 1.0 / self.dt;
        for _ in 0..n_samples {
            for (d, s) in dw.iter_mut().zip(&self.dw_scale) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *d = s * z;
            }
            for z in zeta.iter_mut() {
                *z = StandardNormal.sample(&mut rng);
            }
            for ((out, g), r) in noise.iter_mut().zip(self.gain.chunks_exact(m)).zip(self.residual.chunks_exact(k)) {
                *out = dot(g, &dw) + dot(r, &zeta);
            }
            let int_x = dot(&self.psi[..n], &x) + noise[n];
            let int_y = dot(&self.psi[n..], &x) + noise[n + 1];
            for i in 0..n {
                next[i] = dot(&self.phi[i * n..(i + 1) * n], &x) + noise[i];
            }
            std::mem::swap(&mut x, &mut next);
            let x_in2 = dw[X_IN2] * inv_dt;
            let y_in2 = dw[Y_IN2] * inv_dt;
            sink(OutputSample {
                x_out: self.sqrt_kappa_out * int_x * inv_dt - x_in2,
                y_out: self.sqrt_kappa_out * int_y * inv_dt - y_in2,
                x_in2,
                y_in2,
            });
            on_state(&x);
        }
        Ok(())
    }

    pub fn simulate(&self, n_samples: usize, seed: u64, initial: &InitialState, keep_states: bool) -> Result<TrajectoryRecord> {
        let mut rec = TrajectoryRecord {
            dt: self.dt,
            seed,
            x_out: Vec::with_capacity(n_samples),
            y_out: Vec::with_capacity(n_samples),
            x_in2: Vec::with_capacity(n_samples),
            y_in2: Vec::with_capacity(n_samples),
            states: keep_states.then(Vec::new),
        };
        let mut states = Vec::new();
        self.run_with(
            n_samples,
            seed,
            0,
            initial,
            |s| {
                rec.x_out.push(s.x_out);
                rec.y_out.push(s.y_out);
                rec.x_in2.push(s.x_in2);
                rec.y_in2.push(s.y_in2);
            },
            |x| {
                if keep_states {
                    states.push(x.to_vec());
                }
            },
        )?;
        if keep_states {
            rec.states = Some(states);
        }
        Ok(rec)
    }
}

/// Stationary trajectory of `duration` time units from the stationary state.
pub fn langevin_simulate(
    model: &SystemModel,
    dt: f64,
    duration: f64,
    seed: u64,
    noise: &NoiseInputSpec,
) -> Result<TrajectoryRecord> {
    let sim = LangevinSimulator::new(model, noise, dt)?;
    let n = (duration / dt).round() as usize;
    sim.simulate(n, seed, &InitialState::Stationary, false)
}

/// Solves A P + P A^T + B S B^T = 0.
pub fn stationary_covariance(drift: &DriftMatrix, psd: &[f64]) -> Result<DMatrix<f64>> {
    let a = drift.a();
    let n = a.nrows();
    let q = drift.b() * DMatrix::from_diagonal(&DVector::from_row_slice(psd)) * drift.b().transpose();
    let eye = DMatrix::<f64>::identity(n, n);
    let lyap = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = -DVector::from_column_slice(q.as_slice());
    let sol = lyap.lu().solve(&rhs).ok_or(Error::Singular { omega: 0.0 })?;
    let p = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok(0.5 * (&p + p.transpose()))
}

/// Symmetric square root via eigen-decomposition, clamping round-off negatives.
fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots)
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CavityParams, MechanicalMode};
    use crate::presets::desk_scale;

    fn small() -> SystemModel {
        let cav = CavityParams::new(0.5, 3.0, 0.5, 1.5).unwrap();
        let m = MechanicalMode::new("m", 1.2, 0.3, 0.4, 2.0).unwrap();
        SystemModel::new(cav, vec![m], 1.0).unwrap()
    }

    #[test]
    fn dt_limit() {
        let model = desk_scale();
        assert!((max_time_step(&model) - 0.005).abs() < 1e-15);
        let noise = NoiseInputSpec::physical(&model);
        assert!(matches!(LangevinSimulator::new(&model, &noise, 0.006), Err(Error::DtTooLarge { .. })));
    }

    #[test]
    fn noiseless_decay_follows_matrix_exponential() {
        let model = small();
        let dt = 0.005;
        let sim = LangevinSimulator::noiseless(&model, dt).unwrap();
        let x0 = vec![1.0, -0.5, 0.3, 0.8];
        let rec = sim.simulate(400, 1, &InitialState::Given(x0.clone()), true).unwrap();
        let states = rec.states.unwrap();
        let a = model.drift_matrix().a().clone();
        for step in [1usize, 50, 400] {
            let exact = (&a * (dt * step as f64)).exp() * DVector::from_vec(x0.clone());
            for i in 0..4 {
                assert!((states[step - 1][i] - exact[i]).abs() < 1e-12, "step {step}");
            }
        }
    }

    #[test]
    fn seeded_runs_are_bit_identical() {
        let model = small();
        let sim = LangevinSimulator::new(&model, &NoiseInputSpec::physical(&model), 0.005).unwrap();
        let a = sim.simulate(1000, 42, &InitialState::Stationary, false).unwrap();
        let b = sim.simulate(1000, 42, &InitialState::Stationary, false).unwrap();
        let c = sim.simulate(1000, 43, &InitialState::Stationary, false).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.x_out, c.x_out);
    }

    #[test]
    fn stationary_covariance_solves_lyapunov() {
        let model = small();
        let drift = model.drift_matrix();
        let psd = NoiseInputSpec::physical(&model).psd().to_vec();
        let p = stationary_covariance(&drift, &psd).unwrap();
        let q = drift.b() * DMatrix::from_diagonal(&DVector::from_vec(psd)) * drift.b().transpose();
        let r = drift.a() * &p + &p * drift.a().transpose() + q;
        assert!(r.amax() < 1e-12);
    }

    #[test]
    fn empirical_state_variance_matches_stationary() {
        let model = small();
        let psd = NoiseInputSpec::physical(&model);
        let sim = LangevinSimulator::new(&model, &psd, 0.005).unwrap();
        let p = stationary_covariance(&model.drift_matrix(), psd.psd()).unwrap();
        let n = 400_000;
        let mut acc = [0.0f64; 4];
        sim.run_with(n, 7, 0, &InitialState::Stationary, |_| {}, |x| {
            for i in 0..4 {
                acc[i] += x[i] * x[i];
            }
        })
        .unwrap();
        for i in 0..4 {
            let v = acc[i] / n as f64;
            assert!((v / p[(i, i)] - 1.0).abs() < 0.05, "state {i}: {v} vs {}", p[(i, i)]);
        }
    }
}
