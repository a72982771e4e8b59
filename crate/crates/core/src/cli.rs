//! Command-line front end: one config file plus overrides in, CSV traces and
//! TOML reports out. Output files carry no timestamps, so identical inputs
//! give byte-identical outputs.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::fitting::{self, FitOptions, FitProblem, FitResult, FitWindow, FreeParameter, normalize_trace};
use crate::io::{self, ConfigDocument};
use crate::model::{SystemModel, derived_rates, effective_mode_parameters};
use crate::oracle::{self, StochasticCheck};
use crate::spectra::{Quantity, SpectrumEvaluator, SpectrumTrace, Stage, linear_grid, squeezing_level_db};
use crate::sweeps::{self, SweepPlan, SweptParameter};
use crate::units::{Hertz, RadPerSec};

#[derive(Debug, Clone, Parser)]
#[command(name = "mimsqueeze", version, about = "Quantum-noise spectra of multimode optomechanical squeezers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration document.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Master seed for stochastic runs; overrides the config value.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Config override `key=value`, e.g. `cavity.detuning_hz=2.5e6`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// direct_X, phase_Y, cross_ReXY, quadrature_theta(<rad>), optimal or optimal_theta.
    #[arg(long, global = true)]
    pub quantity: Option<Quantity>,
    /// Analysis window `<f1_hz>:<f2_hz>`; replaces the configured windows.
    #[arg(long = "window", global = true, value_parser = parse_window, value_name = "F1:F2")]
    pub windows: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Direct, phase and cross spectra (or --quantity) at the cavity output and after detection.
    Spectrum,
    /// Optimal-quadrature envelope and the optimal angle.
    Optimal,
    /// Fit the model to a raw (frequency_hz,signal,shot,electronic) or normalized trace CSV.
    Fit { input: PathBuf },
    /// Power or detuning sweep from the [sweep] section.
    Sweep,
    /// Closed forms against the exact solve, plus an optional time-domain check.
    OracleCheck,
    /// Damping rate and Q from a time_s,amplitude CSV.
    Ringdown {
        input: PathBuf,
        /// Mode frequency; defaults to [ringdown] frequency_hz.
        #[arg(long)]
        frequency_hz: Option<f64>,
    },
}

fn parse_window(s: &str) -> std::result::Result<[f64; 2], String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("`{s}` is not <f1_hz>:<f2_hz>"))?;
    let a: f64 = a.trim().parse().map_err(|_| format!("`{a}` is not a number"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("`{b}` is not a number"))?;
    if !(a < b) {
        return Err(format!("window {a}:{b} must have f1 < f2"));
    }
    Ok([a, b])
}

/// Files written by one invocation, in creation order.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    /// Short human-readable summary.
    pub summary: Vec<String>,
}

struct Context {
    doc: ConfigDocument,
    model: SystemModel,
    windows: Vec<FitWindow>,
    out: PathBuf,
    output: RunOutput,
}

impl Context {
    fn write_trace(&mut self, name: &str, trace: &SpectrumTrace) -> Result<()> {
        let path = self.out.join(name);
        io::write_trace(&path, trace)?;
        self.output.files.push(path);
        Ok(())
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.out.join(name);
        fs::write(&path, text)?;
        self.output.files.push(path);
        Ok(())
    }

    fn write_report(&mut self, name: &str, table: toml::Table) -> Result<()> {
        let text = toml::to_string(&table).map_err(|e| Error::config(name, e.to_string()))?;
        self.write_text(name, &text)
    }

    /// Per-window minimum dB of a PSD trace, added to the summary and `table`.
    fn summarize(&mut self, trace: &SpectrumTrace, table: &mut toml::Table) {
        let key = format!("{}_{}", trace.quantity(), trace.stage());
        let mut row = toml::Table::new();
        for (i, w) in self.windows.iter().enumerate() {
            if let Ok(level) = squeezing_level_db(trace, w.lo_hz, w.hi_hz) {
                row.insert(format!("window{}_min_db", i + 1), level.min_db.into());
                row.insert(format!("window{}_freq_hz", i + 1), level.freq_hz.into());
                self.output.summary.push(format!("{key} window {}: {:.3} dB at {:.1} Hz", i + 1, level.min_db, level.freq_hz));
            }
        }
        table.insert(key, toml::Value::Table(row));
    }
}

fn file_stem(q: Quantity, stage: Stage) -> String {
    let name: String = q.to_string().chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect();
    format!("{}_{}.csv", name.trim_end_matches('_'), stage)
}

fn to_hz(w: f64) -> f64 {
    Hertz::from(RadPerSec(w)).0
}

fn load(cli: &Cli) -> Result<Context> {
    let path = cli.config.as_ref().ok_or_else(|| Error::config("--config", "a configuration file is required"))?;
    let text = fs::read_to_string(path)?;
    let doc = io::parse_config_with_overrides(&text, &cli.overrides)?;
    let model = doc.model()?;
    let windows = if cli.windows.is_empty() {
        doc.windows(&model)?
    } else {
        io::config_windows(&cli.windows, &model)?
    };
    fs::create_dir_all(&cli.out)?;
    Ok(Context { doc, model, windows, out: cli.out.clone(), output: RunOutput::default() })
}

/// Executes one parsed invocation.
pub fn run(cli: &Cli) -> Result<RunOutput> {
    if let Command::Ringdown { input, frequency_hz } = &cli.command {
        return ringdown(cli, input, *frequency_hz);
    }
    let mut ctx = load(cli)?;
    let validity = ctx.model.validity();
    if !validity.stable {
        return Err(Error::Unstable { max_real: validity.max_real_eigenvalue });
    }
    match &cli.command {
        Command::Spectrum => spectrum(cli, &mut ctx)?,
        Command::Optimal => optimal(&mut ctx)?,
        Command::Fit { input } => fit(cli, &mut ctx, input)?,
        Command::Sweep => sweep(cli, &mut ctx)?,
        Command::OracleCheck => oracle_check(cli, &mut ctx)?,
        Command::Ringdown { .. } => unreachable!("handled above"),
    }
    Ok(ctx.output)
}

fn model_table(model: &SystemModel) -> toml::Table {
    let mut t = toml::Table::new();
    let c = model.cavity();
    t.insert("model_hash".into(), model.content_hash().into());
    t.insert("kappa_hz".into(), to_hz(c.kappa()).into());
    t.insert("detuning_hz".into(), to_hz(c.detuning()).into());
    t.insert("eta_cav".into(), c.eta_cav().into());
    t.insert("eta_det".into(), model.eta_det().into());
    let modes = model
        .modes()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let mut mt = toml::Table::new();
            mt.insert("label".into(), m.label().into());
            mt.insert("omega_hz".into(), to_hz(m.omega_m()).into());
            mt.insert("gamma_hz".into(), to_hz(m.gamma_m()).into());
            mt.insert("g_hz".into(), to_hz(m.g()).into());
            mt.insert("n_th".into(), m.n_th().into());
            if let Ok(r) = derived_rates(model, i) {
                mt.insert("gamma_meas_hz".into(), to_hz(r.gamma_meas).into());
                mt.insert("quantum_cooperativity".into(), r.quantum_cooperativity.into());
            }
            if let Ok(e) = effective_mode_parameters(m, c) {
                mt.insert("omega_eff_hz".into(), to_hz(e.omega_eff).into());
                mt.insert("gamma_eff_hz".into(), to_hz(e.gamma_eff).into());
            }
            toml::Value::Table(mt)
        })
        .collect::<Vec<_>>();
    t.insert("modes".into(), toml::Value::Array(modes));
    t
}

fn spectrum(cli: &Cli, ctx: &mut Context) -> Result<()> {
    let grid = ctx.doc.grid_hz()?;
    let eval = SpectrumEvaluator::new(&ctx.model)?;
    let quantities = match cli.quantity {
        Some(q) => vec![q],
        None => vec![Quantity::DirectX, Quantity::PhaseY, Quantity::CrossReXY],
    };
    let mut report = toml::Table::new();
    report.insert("model".into(), toml::Value::Table(model_table(&ctx.model)));
    for q in quantities {
        for stage in [Stage::CavityOutput, Stage::Detected] {
            let t = match stage {
                Stage::Detected => eval.detected_trace(q, &grid)?,
                _ => eval.trace(q, &grid)?,
            };
            ctx.write_trace(&file_stem(q, stage), &t)?;
            if q.is_psd() {
                ctx.summarize(&t, &mut report);
            }
        }
    }
    ctx.write_report("spectrum_report.toml", report)
}

fn optimal(ctx: &mut Context) -> Result<()> {
    let grid = ctx.doc.grid_hz()?;
    let eval = SpectrumEvaluator::new(&ctx.model)?;
    let mut report = toml::Table::new();
    report.insert("model".into(), toml::Value::Table(model_table(&ctx.model)));
    for stage in [Stage::CavityOutput, Stage::Detected] {
        let t = match stage {
            Stage::Detected => eval.detected_trace(Quantity::Optimal, &grid)?,
            _ => eval.trace(Quantity::Optimal, &grid)?,
        };
        ctx.write_trace(&file_stem(Quantity::Optimal, stage), &t)?;
        ctx.summarize(&t, &mut report);
    }
    let theta = eval.trace(Quantity::OptimalTheta, &grid)?;
    ctx.write_trace(&file_stem(Quantity::OptimalTheta, Stage::CavityOutput), &theta)?;
    ctx.write_report("optimal_report.toml", report)
}

fn load_fit_data(input: &Path) -> Result<SpectrumTrace> {
    let text = fs::read_to_string(input)?;
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap_or_default();
    if header.split(',').count() == 4 {
        normalize_trace(&io::read_raw_traces(input)?)
    } else {
        io::read_trace_str(&text, &input.display().to_string())
    }
}

fn fit_table(r: &FitResult) -> toml::Table {
    let mut t = toml::Table::new();
    for p in &r.parameters {
        let mut pt = toml::Table::new();
        pt.insert("value_hz".into(), to_hz(p.value).into());
        pt.insert("uncertainty_hz".into(), to_hz(p.uncertainty).into());
        pt.insert("initial_hz".into(), to_hz(p.initial).into());
        t.insert(p.param.to_string(), toml::Value::Table(pt));
    }
    t.insert("cost".into(), r.cost.into());
    t.insert("initial_cost".into(), r.initial_cost.into());
    t.insert("points".into(), (r.points as i64).into());
    t.insert("iterations".into(), (r.iterations as i64).into());
    t.insert("evaluations".into(), (r.evaluations as i64).into());
    t.insert("converged".into(), r.converged().into());
    t.insert("model".into(), toml::Value::Table(model_table(&r.model)));
    t
}

fn fit(cli: &Cli, ctx: &mut Context, input: &Path) -> Result<()> {
    let data = load_fit_data(input)?;
    ctx.write_trace("fit_data_normalized.csv", &data)?;
    let rel = ctx.doc.fit.relative_bounds;
    if !(rel > 0.0 && rel < 1.0) {
        return Err(Error::config("fit.relative_bounds", "must lie in (0, 1)"));
    }
    let free = ctx
        .doc
        .free_parameters(ctx.model.modes().len())?
        .into_iter()
        .map(|param| {
            let v = param.get(&ctx.model)?;
            let (a, b) = (v * (1.0 - rel), v * (1.0 + rel));
            Ok(FreeParameter { param, initial: v, lower: a.min(b), upper: a.max(b) })
        })
        .collect::<Result<Vec<_>>>()?;
    let options = FitOptions {
        max_simplex_iterations: ctx.doc.fit.max_iterations,
        quantity: cli.quantity.unwrap_or(Quantity::DirectX),
        ..FitOptions::default()
    };
    let notches = ctx.doc.fit.notches_hz.iter().map(|[a, b]| (*a, *b)).collect();
    let problem = FitProblem::new(data, ctx.model.clone(), ctx.windows.clone(), free)?
        .with_notches(notches)
        .with_options(options);
    let results = if ctx.doc.fit.per_window { fitting::fit_per_window(&problem)? } else { vec![fitting::fit(&problem)?] };
    let mut report = toml::Table::new();
    let fits = results.iter().map(|r| toml::Value::Table(fit_table(r))).collect();
    report.insert("fits".into(), toml::Value::Array(fits));
    for (i, r) in results.iter().enumerate() {
        let name = if results.len() == 1 { "fitted_trace.csv".to_string() } else { format!("fitted_trace_window{}.csv", i + 1) };
        ctx.write_trace(&name, &r.fitted_trace)?;
        for p in &r.parameters {
            ctx.output.summary.push(format!("{} = {:.6e} +- {:.2e} Hz", p.param, to_hz(p.value), to_hz(p.uncertainty)));
        }
        ctx.output.summary.push(format!("cost {:.6e} (initial {:.6e}), converged: {}", r.cost, r.initial_cost, r.converged()));
    }
    ctx.write_report("fit_report.toml", report)
}

fn sweep(cli: &Cli, ctx: &mut Context) -> Result<()> {
    let s = ctx.doc.sweep.clone().ok_or_else(|| Error::config("sweep", "the sweep command needs a [sweep] section"))?;
    let parameter = match s.parameter.as_str() {
        "input_power" => SweptParameter::InputPower,
        "detuning" => SweptParameter::Detuning { power_mw: s.power_mw.unwrap_or(s.reference_power_mw) },
        other => return Err(Error::config("sweep.parameter", format!("`{other}` is not input_power or detuning"))),
    };
    let quantity = cli.quantity.unwrap_or(Quantity::DirectX);
    let plan = SweepPlan::new(ctx.model.clone(), parameter, s.values.clone(), s.reference_power_mw, ctx.doc.grid_hz()?)
        .with_windows(ctx.windows.clone())
        .with_quantity(quantity, Stage::Detected);
    let result = sweeps::run_sweep(&plan)?;
    let n_w = ctx.windows.len();
    let n_m = ctx.model.modes().len();
    let mut summary = String::from("value,stable");
    for i in 1..=n_w {
        summary.push_str(&format!(",window{i}_min_db"));
    }
    for i in 1..=n_m {
        summary.push_str(&format!(",gamma_eff{i}_hz"));
    }
    summary.push_str(",error\n");
    for (i, p) in result.points.iter().enumerate() {
        if let Some(t) = &p.trace {
            ctx.write_trace(&format!("sweep_{i:03}.csv"), t)?;
        }
        summary.push_str(&format!("{:e},{}", p.value, p.stable));
        for s in &p.squeezing {
            summary.push(',');
            if let Some(s) = s {
                summary.push_str(&format!("{:e}", s.min_db));
            }
        }
        for g in &p.gamma_eff {
            summary.push(',');
            if let Some(g) = g {
                summary.push_str(&format!("{:e}", to_hz(*g)));
            }
        }
        summary.push(',');
        if let Some(e) = &p.error {
            summary.push_str(&format!("\"{}\"", e.replace('"', "'")));
        }
        summary.push('\n');
        let levels: Vec<String> = p.squeezing.iter().map(|s| s.map_or("-".into(), |s| format!("{:.3} dB", s.min_db))).collect();
        ctx.output.summary.push(format!("{:e}: {}", p.value, if p.stable { levels.join(", ") } else { "unstable".into() }));
    }
    ctx.write_text("sweep_summary.csv", &summary)
}

fn oracle_check(cli: &Cli, ctx: &mut Context) -> Result<()> {
    let eval = SpectrumEvaluator::new(&ctx.model)?;
    let per_window = (ctx.doc.oracle.n_points / eval.windows().len().max(1)).max(2);
    let mut omegas = Vec::new();
    for w in eval.windows() {
        omegas.extend(linear_grid(w.lo, w.hi, per_window)?);
    }
    let dev = oracle::closed_form_deviation(&eval, &omegas)?;
    let mut report = toml::Table::new();
    let mut d = toml::Table::new();
    d.insert("points".into(), (dev.points as i64).into());
    d.insert("sx".into(), dev.sx.into());
    d.insert("sy".into(), dev.sy.into());
    d.insert("re_sxy".into(), dev.re_sxy.into());
    d.insert("optimal".into(), dev.optimal.into());
    d.insert("max".into(), dev.max().into());
    report.insert("closed_form_vs_exact".into(), toml::Value::Table(d));
    ctx.output.summary.push(format!("max in-window deviation {:.3e} over {} points", dev.max(), dev.points));

    let o = ctx.doc.oracle.clone();
    let seed = cli.seed.or(ctx.doc.seed).unwrap_or(1);
    if o.stochastic {
        let check = StochasticCheck {
            segments: o.segments,
            segment_length: 1usize << o.segment_log2,
            trajectories: o.trajectories,
            band_halfwidth: o.band_halfwidth,
            seed,
            ..StochasticCheck::default()
        };
        let r = oracle::stochastic_check(&ctx.model, &check)?;
        let mut st = toml::Table::new();
        st.insert("seed".into(), (seed as i64).into());
        st.insert("segments".into(), (r.segments as i64).into());
        st.insert("dt".into(), r.dt.into());
        let bands = r
            .bands
            .iter()
            .map(|b| {
                let mut bt = toml::Table::new();
                bt.insert("label".into(), b.label.clone().into());
                bt.insert("lo_hz".into(), to_hz(b.lo).into());
                bt.insert("hi_hz".into(), to_hz(b.hi).into());
                bt.insert("ratio".into(), b.ratio.into());
                ctx.output.summary.push(format!("{}: welch/exact = {:.4}", b.label, b.ratio));
                toml::Value::Table(bt)
            })
            .collect();
        st.insert("bands".into(), toml::Value::Array(bands));
        st.insert("max_band_error".into(), r.max_band_error().into());
        report.insert("stochastic".into(), toml::Value::Table(st));
    }
    if o.dump_samples > 0 {
        let dt = oracle::max_time_step(&ctx.model);
        let sim = oracle::LangevinSimulator::new(&ctx.model, &oracle::NoiseInputSpec::physical(&ctx.model), dt)?;
        let rec = sim.simulate(o.dump_samples, seed, &oracle::InitialState::Stationary, false)?;
        let path = ctx.out.join("trajectory.csv");
        io::write_trajectory(&path, &rec, o.dump_samples)?;
        ctx.output.files.push(path);
    }
    ctx.write_report("oracle_report.toml", report)
}

fn ringdown(cli: &Cli, input: &Path, frequency_hz: Option<f64>) -> Result<RunOutput> {
    let from_config = match &cli.config {
        Some(p) => io::parse_config_with_overrides(&fs::read_to_string(p)?, &cli.overrides)?.ringdown.frequency_hz,
        None => None,
    };
    let f = frequency_hz
        .or(from_config)
        .ok_or_else(|| Error::config("ringdown.frequency_hz", "give --frequency-hz or set it in the config"))?;
    let r = fitting::ringdown_fit(&io::read_ringdown(input, f)?)?;
    fs::create_dir_all(&cli.out)?;
    let mut t = toml::Table::new();
    t.insert("frequency_hz".into(), f.into());
    t.insert("gamma_hz".into(), to_hz(r.gamma_m).into());
    t.insert("quality_factor".into(), r.q.into());
    t.insert("decaying".into(), r.decaying.into());
    let path = cli.out.join("ringdown_report.toml");
    fs::write(&path, toml::to_string(&t).map_err(|e| Error::config("ringdown", e.to_string()))?)?;
    Ok(RunOutput {
        files: vec![path],
        summary: vec![format!("Gamma/2pi = {:.4e} Hz, Q = {:.4e}{}", to_hz(r.gamma_m), r.q, if r.decaying { "" } else { " (not decaying)" })],
    })
}
