use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fitting::{FitParameter, FitWindow};
use crate::model::{CavityParams, MechanicalMode, SystemModel, coupling_from_measurement_rate, thermal_occupation};
use crate::spectra::linear_grid;
use crate::units::{Hertz, RadPerSec};

/// Parsed configuration document; every rate is in Hz.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub seed: Option<u64>,
    pub cavity: CavitySection,
    pub modes: Vec<ModeSection>,
    #[serde(default)]
    pub detection: DetectionSection,
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub fit: FitSection,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub ringdown: RingdownSection,
}

/// Any one of the four linewidth keys may be omitted and is then inferred
/// from kappa_hz = kappa_in_hz + kappa_out_hz + kappa_ext_hz.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    pub kappa_hz: Option<f64>,
    pub kappa_in_hz: Option<f64>,
    pub kappa_out_hz: Option<f64>,
    pub kappa_ext_hz: Option<f64>,
    pub detuning_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSection {
    pub label: Option<String>,
    pub omega_hz: f64,
    pub gamma_hz: f64,
    pub g_hz: Option<f64>,
    /// Alternative to g_hz: Gamma_meas = 4 g^2 / kappa.
    pub gamma_meas_hz: Option<f64>,
    pub n_th: Option<f64>,
    pub temperature_k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSection {
    pub eta_det: f64,
}

impl Default for DetectionSection {
    fn default() -> Self {
        Self { eta_det: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    /// [lo, hi] pairs; defaults to +-50 kHz around every mode.
    pub windows_hz: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub notches_hz: Vec<[f64; 2]>,
    /// Names among kappa, detuning, g1.., omega1..; default all of them.
    pub free: Option<Vec<String>>,
    /// Box half-width relative to each starting value.
    pub relative_bounds: f64,
    pub per_window: bool,
    pub max_iterations: usize,
}

impl Default for FitSection {
    fn default() -> Self {
        Self { windows_hz: None, notches_hz: Vec::new(), free: None, relative_bounds: 0.3, per_window: false, max_iterations: 3000 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// "input_power" (values in mW) or "detuning" (values in Hz).
    pub parameter: String,
    pub values: Vec<f64>,
    pub reference_power_mw: f64,
    /// Input power held fixed during a detuning sweep; defaults to the reference.
    pub power_mw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub n_points: usize,
    pub stochastic: bool,
    pub segments: usize,
    pub segment_log2: u32,
    pub trajectories: usize,
    pub band_halfwidth: f64,
    /// Output samples written to trajectory.csv; 0 disables the dump.
    pub dump_samples: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            n_points: 100_000,
            stochastic: false,
            segments: 200,
            segment_log2: 20,
            trajectories: 1,
            band_halfwidth: 1.0,
            dump_samples: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RingdownSection {
    pub frequency_hz: Option<f64>,
}

fn hz(v: f64) -> f64 {
    RadPerSec::from(Hertz(v)).value()
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 { Ok(v) } else { Err(Error::config(key, format!("must be finite and > 0, got {v}"))) }
}

impl ConfigDocument {
    pub fn model(&self) -> Result<SystemModel> {
        let c = &self.cavity;
        let keys = ["cavity.kappa_hz", "cavity.kappa_in_hz", "cavity.kappa_out_hz", "cavity.kappa_ext_hz"];
        let given = [c.kappa_hz, c.kappa_in_hz, c.kappa_out_hz, c.kappa_ext_hz];
        for (k, v) in keys.iter().zip(given) {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::config(*k, format!("must be finite and >= 0, got {v}")));
                }
            }
        }
        let missing: Vec<usize> = (0..4).filter(|i| given[*i].is_none()).collect();
        let vals: [f64; 4] = match missing.as_slice() {
            [] => given.map(|v| v.unwrap_or_default()),
            [0] => {
                let [_, a, b, e] = given.map(|v| v.unwrap_or_default());
                [a + b + e, a, b, e]
            }
            [i] => {
                let v = given.map(|v| v.unwrap_or_default());
                let rest: f64 = (1..4).filter(|j| j != i).map(|j| v[j]).sum();
                let inferred = v[0] - rest;
                if inferred < 0.0 {
                    return Err(Error::config(
                        keys[*i],
                        format!("inferred as {} - {} = {inferred} Hz, which is negative ({})", v[0], rest, keys.join(", ")),
                    ));
                }
                let mut out = v;
                out[*i] = inferred;
                out
            }
            _ => {
                let names: Vec<&str> = missing.iter().map(|i| keys[*i]).collect();
                return Err(Error::config(names.join(", "), "at most one of the four linewidth keys may be omitted"));
            }
        };
        let cavity = CavityParams::with_total(hz(vals[0]), hz(vals[1]), hz(vals[2]), hz(vals[3]), hz(c.detuning_hz))
            .map_err(|e| match e {
                Error::PortClosure { .. } => Error::config(
                    keys.join(", "),
                    format!(
                        "kappa_in_hz + kappa_out_hz + kappa_ext_hz = {} Hz must equal kappa_hz = {} Hz",
                        vals[1] + vals[2] + vals[3],
                        vals[0]
                    ),
                ),
                e => e,
            })?;
        if self.modes.is_empty() {
            return Err(Error::config("modes", "at least one mode is required"));
        }
        let modes = self
            .modes
            .iter()
            .enumerate()
            .map(|(i, m)| self.mode(i, m, &cavity))
            .collect::<Result<Vec<_>>>()?;
        SystemModel::new(cavity, modes, self.detection.eta_det)
            .map_err(|e| Error::config("detection.eta_det", e.to_string()))
    }

    fn mode(&self, i: usize, m: &ModeSection, cavity: &CavityParams) -> Result<MechanicalMode> {
        let key = |k: &str| format!("modes[{i}].{k}");
        let omega = hz(positive(&key("omega_hz"), m.omega_hz)?);
        let gamma = hz(positive(&key("gamma_hz"), m.gamma_hz)?);
        let g = match (m.g_hz, m.gamma_meas_hz) {
            (Some(g), None) => hz(g),
            (None, Some(r)) => coupling_from_measurement_rate(hz(r), cavity.kappa())
                .map_err(|e| Error::config(key("gamma_meas_hz"), e.to_string()))?,
            (Some(_), Some(_)) => return Err(Error::config(key("g_hz"), "give either g_hz or gamma_meas_hz, not both")),
            (None, None) => return Err(Error::config(key("g_hz"), "one of g_hz or gamma_meas_hz is required")),
        };
        let n_th = match (m.n_th, m.temperature_k) {
            (Some(n), None) => n,
            (None, Some(t)) => thermal_occupation(t, omega).map_err(|e| Error::config(key("temperature_k"), e.to_string()))?,
            (Some(_), Some(_)) => return Err(Error::config(key("n_th"), "give either n_th or temperature_k, not both")),
            (None, None) => return Err(Error::config(key("n_th"), "one of n_th or temperature_k is required")),
        };
        let label = m.label.clone().unwrap_or_else(|| format!("mode{}", i + 1));
        MechanicalMode::new(label, omega, gamma, g, n_th).map_err(|e| Error::config(format!("modes[{i}]"), e.to_string()))
    }

    /// The configured grid, or 2001 points over +-50 kHz around every mode.
    pub fn grid_hz(&self) -> Result<Vec<f64>> {
        if let Some(g) = &self.grid {
            return linear_grid(g.f_min_hz, g.f_max_hz, g.n_points).map_err(|e| Error::config("grid", e.to_string()));
        }
        let mut out = Vec::new();
        for m in &self.modes {
            out.extend(linear_grid(m.omega_hz - 50e3, m.omega_hz + 50e3, 2001)?);
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        Ok(out)
    }

    /// Fit/summary windows assigned to the mode nearest their centre.
    pub fn windows(&self, model: &SystemModel) -> Result<Vec<FitWindow>> {
        match &self.fit.windows_hz {
            None => Ok(crate::fitting::default_windows(model)),
            Some(w) => config_windows(w, model),
        }
    }

    pub fn free_parameters(&self, n_modes: usize) -> Result<Vec<FitParameter>> {
        match &self.fit.free {
            None => {
                let mut v = vec![FitParameter::Kappa, FitParameter::Detuning];
                for l in 0..n_modes {
                    v.push(FitParameter::Coupling(l));
                    v.push(FitParameter::Frequency(l));
                }
                Ok(v)
            }
            Some(names) => names.iter().map(|n| parse_fit_parameter(n, n_modes)).collect(),
        }
    }
}

/// Window i goes to the mode whose frequency is nearest its centre.
pub fn config_windows(pairs: &[[f64; 2]], model: &SystemModel) -> Result<Vec<FitWindow>> {
    pairs
        .iter()
        .map(|[lo, hi]| {
            if !(lo < hi) {
                return Err(Error::config("fit.windows_hz", format!("[{lo}, {hi}] is empty")));
            }
            let centre = RadPerSec::from(Hertz(0.5 * (lo + hi))).value();
            let mode = (0..model.modes().len())
                .min_by(|a, b| {
                    let da = (model.modes()[*a].omega_m() - centre).abs();
                    let db = (model.modes()[*b].omega_m() - centre).abs();
                    da.total_cmp(&db)
                })
                .unwrap_or(0);
            Ok(FitWindow { mode, lo_hz: *lo, hi_hz: *hi })
        })
        .collect()
}

fn parse_fit_parameter(name: &str, n_modes: usize) -> Result<FitParameter> {
    let indexed = |prefix: &str| -> Option<usize> {
        name.strip_prefix(prefix).and_then(|s| s.parse::<usize>().ok()).filter(|l| (1..=n_modes).contains(l)).map(|l| l - 1)
    };
    match name {
        "kappa" => Ok(FitParameter::Kappa),
        "detuning" => Ok(FitParameter::Detuning),
        _ => indexed("g")
            .map(FitParameter::Coupling)
            .or_else(|| indexed("omega").map(FitParameter::Frequency))
            .ok_or_else(|| Error::config("fit.free", format!("unknown parameter `{name}` (kappa, detuning, g<l>, omega<l>)"))),
    }
}

pub fn parse_config(text: &str) -> Result<ConfigDocument> {
    parse_config_with_overrides(text, &[])
}

/// Parses `text` after applying `key=value` overrides, e.g.
/// `cavity.detuning_hz=2.5e6` or `modes.1.n_th=9e4`.
pub fn parse_config_with_overrides(text: &str, overrides: &[String]) -> Result<ConfigDocument> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
        source_name: "config".into(),
        message: e.to_string(),
    })?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let doc: ConfigDocument = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config {
        key: "config".into(),
        message: e.message().to_string(),
    })?;
    Ok(doc)
}

/// Sets one dotted path in a TOML table; numeric path segments index arrays.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(assignment, "override must look like key=value"))?;
    let path = path.trim();
    let value: toml::Value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let segments: Vec<&str> = path.split('.').collect();
    let mut root = toml::Value::Table(std::mem::take(table));
    let outcome = set_path(&mut root, &segments, value, path);
    if let toml::Value::Table(t) = root {
        *table = t;
    }
    outcome
}

fn set_path(node: &mut toml::Value, segments: &[&str], value: toml::Value, path: &str) -> Result<()> {
    let Some((seg, rest)) = segments.split_first() else {
        return Err(Error::config(path, "empty key"));
    };
    let child = match node {
        toml::Value::Table(t) => {
            if rest.is_empty() {
                t.insert(seg.to_string(), value);
                return Ok(());
            }
            t.entry(seg.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()))
        }
        toml::Value::Array(a) => {
            let i: usize = seg.parse().map_err(|_| Error::config(path, format!("`{seg}` is not an index")))?;
            let slot = a.get_mut(i).ok_or_else(|| Error::config(path, format!("index {i} out of range")))?;
            if rest.is_empty() {
                *slot = value;
                return Ok(());
            }
            slot
        }
        _ => return Err(Error::config(path, format!("`{seg}` is not inside a table or array"))),
    };
    set_path(child, rest, value, path)
}
