//! Bounded Nelder-Mead and Levenberg-Marquardt on the unit box.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    IterationCap,
}

#[derive(Debug, Clone)]
pub struct MinimizeOutcome {
    pub x: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

fn clamp_unit(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(0.0, 1.0);
    }
}

/// Nelder-Mead on [0, 1]^n; trial points are clamped onto the box.
pub fn nelder_mead(
    f: &mut dyn FnMut(&[f64]) -> f64,
    start: &[f64],
    initial_step: &[f64],
    max_iterations: usize,
    ftol: f64,
) -> MinimizeOutcome {
    let n = start.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        let v = f(x);
        if v.is_nan() { f64::INFINITY } else { v }
    };
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..n {
        let mut p = start.to_vec();
        let h = initial_step[i];
        p[i] = if p[i] + h <= 1.0 { p[i] + h } else { p[i] - h };
        clamp_unit(&mut p);
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p, &mut evaluations)).collect();
    let mut termination = Termination::IterationCap;
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let (best, worst) = (values[0], values[n]);
        let spread = simplex[1..].iter().flat_map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max);
        if best.is_finite() && (worst - best).abs() <= ftol * (best.abs() + ftol) && spread < 1e-10 {
            termination = Termination::Converged;
            break;
        }

        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| {
            let mut p: Vec<f64> = centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (c - w)).collect();
            clamp_unit(&mut p);
            p
        };
        let reflected = along(1.0);
        let fr = eval(&reflected, &mut evaluations);
        if fr < values[0] {
            let expanded = along(2.0);
            let fe = eval(&expanded, &mut evaluations);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[n] {
            let p = along(0.5);
            let v = eval(&p, &mut evaluations);
            (p, v)
        } else {
            let p = along(-0.5);
            let v = eval(&p, &mut evaluations);
            (p, v)
        };
        if fc < values[n].min(fr) {
            simplex[n] = contracted;
            values[n] = fc;
            continue;
        }
        for i in 1..=n {
            let p: Vec<f64> = simplex[0].iter().zip(&simplex[i]).map(|(b, x)| b + 0.5 * (x - b)).collect();
            values[i] = eval(&p, &mut evaluations);
            simplex[i] = p;
        }
    }
    let ibest = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    MinimizeOutcome { x: simplex[ibest].clone(), cost: values[ibest], iterations, evaluations, termination }
}

#[derive(Debug, Clone)]
pub struct LeastSquaresOutcome {
    pub x: Vec<f64>,
    pub cost: f64,
    /// Jacobian of the residuals at `x`.
    pub jacobian: DMatrix<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

/// Levenberg-Marquardt on sum(r^2) with a forward-difference Jacobian.
/// `residuals` returns None where the model cannot be evaluated; such steps
/// are rejected. Coordinates are clamped to [lower, upper].
pub fn levenberg_marquardt(
    residuals: &mut dyn FnMut(&[f64]) -> Option<Vec<f64>>,
    start: &[f64],
    lower: &[f64],
    upper: &[f64],
    max_iterations: usize,
) -> Option<LeastSquaresOutcome> {
    let p = start.len();
    let mut evaluations = 1;
    let mut x = start.to_vec();
    let mut r = residuals(&x)?;
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut lambda = 1e-3;
    let mut termination = Termination::IterationCap;
    let mut iterations = 0;

    let jacobian = |x: &[f64], r: &[f64], evaluations: &mut usize, residuals: &mut dyn FnMut(&[f64]) -> Option<Vec<f64>>| {
        let mut j = DMatrix::zeros(r.len(), p);
        for k in 0..p {
            let mut h = 1e-7 * x[k].abs().max(1e-3);
            if x[k] + h > upper[k] {
                h = -h;
            }
            let mut xp = x.to_vec();
            xp[k] += h;
            *evaluations += 1;
            let rp = residuals(&xp)?;
            for i in 0..r.len() {
                j[(i, k)] = (rp[i] - r[i]) / h;
            }
        }
        Some(j)
    };

    let mut jac = jacobian(&x, &r, &mut evaluations, residuals)?;
    while iterations < max_iterations {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * DVector::from_column_slice(&r);
        let mut improved = false;
        for _ in 0..30 {
            let mut damped = jtj.clone();
            for k in 0..p {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-30);
            }
            let Some(step) = damped.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = (0..p).map(|k| (x[k] + step[k]).clamp(lower[k], upper[k])).collect();
            evaluations += 1;
            let trial_r = residuals(&trial);
            let trial_cost = trial_r.as_ref().map(|v| v.iter().map(|e| e * e).sum::<f64>());
            match (trial_r, trial_cost) {
                (Some(tr), Some(tc)) if tc < cost => {
                    let rel_drop = (cost - tc) / cost.max(f64::MIN_POSITIVE);
                    let moved = (0..p).map(|k| (trial[k] - x[k]).abs() / x[k].abs().max(1e-12)).fold(0.0, f64::max);
                    x = trial;
                    r = tr;
                    cost = tc;
                    lambda = (lambda * 0.3).max(1e-12);
                    improved = true;
                    if rel_drop < 1e-14 || moved < 1e-13 {
                        termination = Termination::Converged;
                    }
                    break;
                }
                _ => lambda *= 10.0,
            }
            if lambda > 1e12 {
                break;
            }
        }
        jac = jacobian(&x, &r, &mut evaluations, residuals)?;
        if !improved || termination == Termination::Converged {
            termination = Termination::Converged;
            break;
        }
    }
    Some(LeastSquaresOutcome { x, cost, jacobian: jac, iterations, evaluations, termination })
}
