//! Randomized invariants of the model, spectra, oracles, fitting and sweeps.

use std::f64::consts::{PI, TAU};

use mimsqueeze::fitting::{self, FitParameter, FitProblem, FreeParameter, RawTraceSet, normalize_trace};
use mimsqueeze::model::{
    CavityParams, MechanicalMode, SystemModel, bare_susceptibility, cavity_denominator, derived_rates,
    effective_mode_parameters, effective_susceptibility, thermal_occupation,
};
use mimsqueeze::oracle::{NoiseInputSpec, closed_form_deviation, frequency_psd_exact, langevin_simulate, max_time_step};
use mimsqueeze::presets::{REFERENCE_POWER_MW, reference_device};
use mimsqueeze::spectra::{QuadratureAngle, Quantity, SpectrumEvaluator, Stage, linear_grid};
use mimsqueeze::sweeps::{SweepPlan, SweptParameter, run_sweep};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct ModeDraw {
    omega_ratio: f64,
    q: f64,
    g_ratio: f64,
    n_th: f64,
}

fn mode_draw() -> impl Strategy<Value = ModeDraw> {
    (-1.3f64..0.3, 2.0f64..8.0, -4.0f64..-0.7, -2.0f64..5.0).prop_map(|(w, q, g, n)| ModeDraw {
        omega_ratio: 10f64.powf(w),
        q: 10f64.powf(q),
        g_ratio: 10f64.powf(g),
        n_th: 10f64.powf(n),
    })
}

fn cavity_draw() -> impl Strategy<Value = CavityParams> {
    (3.0f64..8.0, 0.05f64..1.0, 0.0f64..1.0, 0.05f64..1.5).prop_map(|(k, eta, share, d)| {
        let kappa = 10f64.powf(k);
        CavityParams::from_efficiency(kappa, eta, share, d * kappa).unwrap()
    })
}

fn build(cavity: &CavityParams, draws: &[ModeDraw], eta_det: f64) -> SystemModel {
    let modes = draws
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let omega = cavity.kappa() * d.omega_ratio * (1.0 + 0.7 * i as f64);
            MechanicalMode::new(format!("m{i}"), omega, omega / d.q, omega.min(cavity.kappa()) * d.g_ratio, d.n_th).unwrap()
        })
        .collect();
    SystemModel::new(cavity.clone(), modes, eta_det).unwrap()
}

/// Frequencies (rad/s) across each mode window and its effective resonance.
fn probe_grid(model: &SystemModel, n: usize) -> Vec<f64> {
    let mut g = Vec::new();
    for (w, m) in SpectrumEvaluator::default_windows(model).iter().zip(model.modes()) {
        g.extend(linear_grid(w.lo, w.hi, n).unwrap());
        if let Ok(e) = effective_mode_parameters(m, model.cavity()) {
            g.extend(linear_grid(e.omega_eff - 3.0 * e.gamma_eff, e.omega_eff + 3.0 * e.gamma_eff, n).unwrap());
        }
    }
    g
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn port_rates_close_after_every_mutation(c in cavity_draw(), k in 0.1f64..10.0, eta in 0.0f64..1.0) {
        let check = |c: &CavityParams| {
            let sum = c.kappa_in() + c.kappa_out() + c.kappa_ext();
            (sum - c.kappa()).abs() <= 1e-12 * c.kappa()
        };
        prop_assert!(check(&c));
        let wide = c.with_linewidth(c.kappa() * k).unwrap();
        prop_assert!(check(&wide));
        prop_assert!(rel(wide.eta_cav(), c.eta_cav()) < 1e-12);
        if let Ok(e) = c.with_output_efficiency(eta) {
            prop_assert!(check(&e));
            prop_assert!((e.eta_cav() - eta).abs() < 1e-12);
        }
    }

    #[test]
    fn effective_susceptibility_identity(c in cavity_draw(), d in mode_draw(), x in 0.0f64..3.0) {
        let model = build(&c, &[d], 1.0);
        let m = &model.modes()[0];
        let w = x * m.omega_m();
        let chi = effective_susceptibility(m, &c, w).unwrap();
        let lhs = 1.0 / chi;
        let term = 4.0 * m.g() * m.g() * c.detuning() / cavity_denominator(&c, w);
        let rhs = 1.0 / bare_susceptibility(m, w) - term;
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (lhs.norm() + term.norm()));
    }

    #[test]
    fn bare_susceptibility_is_real_in_time(d in mode_draw(), w in -1e8f64..1e8) {
        let m = MechanicalMode::new("m", 1e6 * d.omega_ratio, 1e6 * d.omega_ratio / d.q, 0.0, 0.0).unwrap();
        prop_assert_eq!(bare_susceptibility(&m, -w), bare_susceptibility(&m, w).conj());
    }

    #[test]
    fn thermal_occupation_scaling(t in 1e-3f64..1e3, w in 1e3f64..1e9, a in 0.1f64..10.0) {
        let n = thermal_occupation(t, w).unwrap();
        prop_assert!(rel(thermal_occupation(a * t, w).unwrap(), a * n) < 1e-14);
        prop_assert!(rel(thermal_occupation(t, a * w).unwrap(), n / a) < 1e-14);
    }

    #[test]
    fn measurement_rate_scaling(c in cavity_draw(), d in mode_draw(), a in 0.1f64..10.0) {
        let model = build(&c, &[d], 1.0);
        let r = derived_rates(&model, 0).unwrap().gamma_meas;
        let m = &model.modes()[0];
        let scaled = model.with_modes(vec![m.with_coupling(a * m.g()).unwrap()]).unwrap();
        prop_assert!(rel(derived_rates(&scaled, 0).unwrap().gamma_meas, a * a * r) < 1e-12);
        let half = model.with_cavity(c.with_linewidth(0.5 * c.kappa()).unwrap());
        prop_assert!(rel(derived_rates(&half, 0).unwrap().gamma_meas, 2.0 * r) < 1e-12);
    }

    #[test]
    fn passivity(c in (3.0f64..8.0, 0.0f64..1.0, 0.0f64..1.0, -2.0f64..2.0), d in mode_draw(), x in 0.0f64..3.0, th in 0.0f64..PI) {
        let kappa = 10f64.powf(c.0);
        let cav = CavityParams::from_efficiency(kappa, c.1, c.2, c.3 * kappa).unwrap();
        let omega = kappa * d.omega_ratio;
        let mode = MechanicalMode::new("m", omega, omega / d.q, 0.0, d.n_th).unwrap();
        let model = SystemModel::new(cav, vec![mode], 1.0).unwrap();
        let w = x * omega;
        for s in [SpectrumEvaluator::unchecked(&model).components(w).unwrap(), frequency_psd_exact(&model, w).unwrap()] {
            for v in [s.sx, s.sy, s.optimal(), s.quadrature(QuadratureAngle::new(th))] {
                prop_assert!(rel(v, 0.5) < 1e-12);
            }
            prop_assert!(s.re_sxy.abs() < 1e-12);
        }
    }

    #[test]
    fn zero_detuning_hides_squeezing_from_direct_detection(c in cavity_draw(), d in prop::collection::vec(mode_draw(), 1..=2), x in 0.0f64..3.0) {
        let cav = c.with_detuning(0.0).unwrap();
        let model = build(&cav, &d, 1.0);
        let w = x * model.modes()[0].omega_m();
        prop_assert!(rel(SpectrumEvaluator::unchecked(&model).direct_detection_psd(w).unwrap(), 0.5) < 1e-12);
        prop_assert!(rel(frequency_psd_exact(&model, w).unwrap().sx, 0.5) < 1e-12);
    }

    #[test]
    fn cavity_and_detection_losses_are_equivalent(c in cavity_draw(), d in mode_draw(), eta in 0.05f64..1.0) {
        let model = build(&c, &[d], eta);
        prop_assume!(model.is_stable());
        let merged = model
            .with_cavity(c.with_output_efficiency(c.eta_cav() * eta).unwrap())
            .with_eta_det(1.0)
            .unwrap();
        let (a, b) = (SpectrumEvaluator::unchecked(&model), SpectrumEvaluator::unchecked(&merged));
        for w in probe_grid(&model, 15) {
            let x = a.components(w).unwrap().attenuated(eta);
            let y = b.components(w).unwrap();
            prop_assert!(rel(x.sx, y.sx) < 1e-12 && rel(x.sy, y.sy) < 1e-12 && rel(x.optimal(), y.optimal()) < 1e-12);
        }
    }

    /// Momentum-only damping with white thermal noise is not a completely
    /// positive bath; the bound then holds only up to a correction bounded by
    /// Gamma_m / Omega_m, visible for low-Q modes near the ground state.
    #[test]
    fn uncertainty_bound_up_to_damping_correction(c in cavity_draw(), d in prop::collection::vec(mode_draw(), 1..=2)) {
        let model = build(&c, &d, 1.0);
        prop_assume!(model.is_stable());
        let q_min = d.iter().map(|m| m.q).fold(f64::INFINITY, f64::min);
        let allowance = 1e-10 + 1.0 / q_min;
        let eval = SpectrumEvaluator::unchecked(&model);
        for w in probe_grid(&model, 15) {
            let s = eval.exact(w).unwrap();
            let margin = s.uncertainty_product() - 0.25;
            prop_assert!(margin >= -allowance * s.sx.max(s.sy).max(1.0).powi(2), "margin {margin:e}, Q {q_min:e}");
        }
    }

    #[test]
    fn optimal_envelope_and_orthogonal_product(c in cavity_draw(), d in mode_draw(), th in 0.0f64..PI) {
        let model = build(&c, std::slice::from_ref(&d), 1.0);
        prop_assume!(model.is_stable());
        let eval = SpectrumEvaluator::unchecked(&model);
        for w in probe_grid(&model, 15) {
            let s = eval.components(w).unwrap();
            let opt = s.optimal();
            let slack = 1e-12 * s.sx.max(s.sy);
            prop_assert!(opt <= s.sx + slack && opt <= s.sy + slack && opt <= s.quadrature(QuadratureAngle::new(th)) + slack);
            let t = s.optimal_phase().theta.radians();
            let product = s.quadrature(QuadratureAngle::new(t)) * s.quadrature(QuadratureAngle::new(t + 0.5 * PI));
            let allowance = 1e-10 + 1.0 / d.q;
            prop_assert!(product >= 0.25 - allowance * s.sx.max(s.sy).max(1.0).powi(2));
        }
    }

    #[test]
    fn single_mode_closed_forms_match_oracle(c in cavity_draw(), d in mode_draw()) {
        let model = build(&c, &[d], 1.0);
        prop_assume!(model.is_stable());
        let eval = SpectrumEvaluator::unchecked(&model);
        let dev = closed_form_deviation(&eval, &probe_grid(&model, 25)).unwrap();
        prop_assert!(dev.max() < 1e-6, "{dev:?}");
    }

    #[test]
    fn normalization_is_gain_invariant(vals in prop::collection::vec((0.1f64..10.0, 1.0f64..2.0, 0.0f64..0.5), 3..20), gain in 1e-6f64..1e6) {
        let f: Vec<f64> = (0..vals.len()).map(|i| i as f64).collect();
        let sig: Vec<f64> = vals.iter().map(|v| v.0).collect();
        let shot: Vec<f64> = vals.iter().map(|v| v.1).collect();
        let el: Vec<f64> = vals.iter().map(|v| v.2).collect();
        let base = normalize_trace(&RawTraceSet::new(f.clone(), sig.clone(), shot.clone(), el.clone()).unwrap());
        let scale = |v: &[f64]| v.iter().map(|x| x * gain).collect::<Vec<_>>();
        let scaled = normalize_trace(&RawTraceSet::new(f, scale(&sig), scale(&shot), scale(&el)).unwrap());
        match (base, scaled) {
            (Ok(a), Ok(b)) => {
                for (x, y) in a.values().iter().zip(b.values()) {
                    prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
                }
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "gain changed validity"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn seeded_trajectories_are_bit_identical(seed in any::<u64>()) {
        let model = mimsqueeze::presets::desk_scale();
        let dt = max_time_step(&model);
        let noise = NoiseInputSpec::physical(&model);
        let a = langevin_simulate(&model, dt, 500.0 * dt, seed, &noise).unwrap();
        let b = langevin_simulate(&model, dt, 500.0 * dt, seed, &noise).unwrap();
        prop_assert_eq!(a.x_out, b.x_out);
        prop_assert_eq!(a.y_out, b.y_out);
    }

    #[test]
    fn fit_keeps_fixed_parameters_and_stays_stable(kf in 0.9f64..1.1, gf in 0.9f64..1.1) {
        let truth = reference_device();
        let windows = fitting::default_windows(&truth);
        let grid: Vec<f64> = windows.iter().flat_map(|w| linear_grid(w.lo_hz, w.hi_hz, 201).unwrap()).collect();
        let data = SpectrumEvaluator::new(&truth).unwrap().detected_trace(Quantity::DirectX, &grid).unwrap();
        let guess = FitParameter::Kappa.set(&truth, truth.cavity().kappa() * kf).unwrap();
        let guess = FitParameter::Coupling(1).set(&guess, truth.modes()[1].g() * gf).unwrap();
        let free = [FitParameter::Kappa, FitParameter::Coupling(1)]
            .into_iter()
            .map(|p| {
                let v = p.get(&guess).unwrap();
                FreeParameter { param: p, initial: v, lower: 0.5 * v, upper: 1.5 * v }
            })
            .collect();
        let problem = FitProblem::new(data, guess.clone(), windows, free).unwrap();
        let r = fitting::fit(&problem).unwrap();
        prop_assert!(r.model.is_stable());
        prop_assert!(r.cost <= r.initial_cost);
        let (a, b) = (&r.model, &guess);
        prop_assert_eq!(a.cavity().detuning().to_bits(), b.cavity().detuning().to_bits());
        prop_assert_eq!(a.eta_det().to_bits(), b.eta_det().to_bits());
        prop_assert_eq!(a.modes()[0].g().to_bits(), b.modes()[0].g().to_bits());
        for (m, n) in a.modes().iter().zip(b.modes()) {
            prop_assert_eq!(m.omega_m().to_bits(), n.omega_m().to_bits());
            prop_assert_eq!(m.gamma_m().to_bits(), n.gamma_m().to_bits());
            prop_assert_eq!(m.n_th().to_bits(), n.n_th().to_bits());
        }
        prop_assert!(rel(a.eta_cav(), b.eta_cav()) < 1e-15);
    }
}

#[test]
fn bound_violation_in_low_q_ground_state_corner_is_small() {
    // Q = 150, n_th = 0.02: the bound is broken, but well below Gamma_m / Omega_m
    let kappa = 1e5;
    let cav = CavityParams::from_efficiency(kappa, 0.9, 0.5, 0.5 * kappa).unwrap();
    let omega = 0.5 * kappa;
    let mode = MechanicalMode::new("m", omega, omega / 150.0, 0.01 * omega, 0.02).unwrap();
    let model = SystemModel::new(cav, vec![mode], 1.0).unwrap();
    let eval = SpectrumEvaluator::new(&model).unwrap();
    let worst = probe_grid(&model, 400)
        .into_iter()
        .map(|w| eval.exact(w).unwrap().uncertainty_product() - 0.25)
        .fold(f64::INFINITY, f64::min);
    assert!(worst < -1e-9, "{worst}");
    assert!(worst > -1.0 / 150.0, "{worst}");
}

#[test]
fn hybridization_shrinks_with_mode_separation() {
    let base = reference_device();
    let mut last = f64::INFINITY;
    for sep in [1.11e6, 3e6, 9e6] {
        let m2 = base.modes()[1].with_frequency(base.modes()[0].omega_m() + TAU * sep).unwrap();
        let model = base.with_modes(vec![base.modes()[0].clone(), m2]).unwrap();
        let eval = SpectrumEvaluator::new(&model).unwrap();
        let dev = closed_form_deviation(&eval, &probe_grid(&model, 400)).unwrap().max();
        assert!(dev < last, "separation {sep}: {dev} >= {last}");
        last = dev;
    }
}

#[test]
fn sweep_points_obey_spectral_invariants() {
    let base = reference_device();
    let grid: Vec<f64> = fitting::default_windows(&base).iter().flat_map(|w| linear_grid(w.lo_hz, w.hi_hz, 301).unwrap()).collect();
    let plan = SweepPlan::new(base.clone(), SweptParameter::InputPower, vec![1.6, 4.0, 8.0], REFERENCE_POWER_MW, grid.clone());
    let r = run_sweep(&plan).unwrap();
    let mut last_width = [0.0; 2];
    for (p, power) in r.points.iter().zip([1.6, 4.0, 8.0]) {
        let model = plan.model_at(power).unwrap();
        let eval = SpectrumEvaluator::new(&model).unwrap();
        for f in &grid {
            let s = eval.components(TAU * f).unwrap();
            assert!(s.uncertainty_product() >= 0.25 - 1e-10 * s.sx * s.sy);
        }
        assert_eq!(p.trace.as_ref().unwrap().stage(), Stage::Detected);
        for (l, w) in p.gamma_eff.iter().enumerate() {
            let w = w.unwrap();
            assert!(w >= last_width[l]);
            last_width[l] = w;
        }
    }
}
