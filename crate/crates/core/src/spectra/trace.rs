use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::QuadratureAngle;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quantity {
    DirectX,
    PhaseY,
    CrossReXY,
    Quadrature(QuadratureAngle),
    Optimal,
    /// Optimal homodyne angle in radians rather than a PSD.
    OptimalTheta,
}

impl Quantity {
    pub fn is_psd(self) -> bool {
        !matches!(self, Quantity::CrossReXY | Quantity::OptimalTheta)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::DirectX => f.write_str("direct_X"),
            Quantity::PhaseY => f.write_str("phase_Y"),
            Quantity::CrossReXY => f.write_str("cross_ReXY"),
            Quantity::Quadrature(t) => write!(f, "quadrature_theta({})", t.radians()),
            Quantity::Optimal => f.write_str("optimal"),
            Quantity::OptimalTheta => f.write_str("optimal_theta"),
        }
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse { source_name: "quantity".into(), message: format!("unknown quantity `{s}`") };
        Ok(match s {
            "direct_X" | "direct" => Quantity::DirectX,
            "phase_Y" | "phase" => Quantity::PhaseY,
            "cross_ReXY" | "cross" => Quantity::CrossReXY,
            "optimal" => Quantity::Optimal,
            "optimal_theta" => Quantity::OptimalTheta,
            _ => {
                let inner = s
                    .strip_prefix("quadrature_theta(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(bad)?;
                Quantity::Quadrature(QuadratureAngle::new(inner.trim().parse::<f64>().map_err(|_| bad())?))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    CavityOutput,
    Detected,
    LossCorrected,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::CavityOutput => "cavity_output",
            Stage::Detected => "detected",
            Stage::LossCorrected => "loss_corrected",
        })
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cavity_output" => Ok(Stage::CavityOutput),
            "detected" => Ok(Stage::Detected),
            "loss_corrected" => Ok(Stage::LossCorrected),
            _ => Err(Error::Parse { source_name: "stage".into(), message: format!("unknown stage `{s}`") }),
        }
    }
}

/// PSD samples on a strictly increasing frequency grid (Hz), normalized so
/// that shot noise is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTrace {
    frequencies_hz: Vec<f64>,
    values: Vec<f64>,
    quantity: Quantity,
    stage: Stage,
    metadata: BTreeMap<String, String>,
}

impl SpectrumTrace {
    pub fn new(frequencies_hz: Vec<f64>, values: Vec<f64>, quantity: Quantity, stage: Stage) -> Result<Self> {
        if frequencies_hz.len() != values.len() {
            return Err(Error::InvalidTrace(format!(
                "{} frequencies but {} values",
                frequencies_hz.len(),
                values.len()
            )));
        }
        if frequencies_hz.len() < 2 {
            return Err(Error::InvalidTrace("need at least 2 grid points".into()));
        }
        if let Some(w) = frequencies_hz.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidTrace(format!("grid not strictly increasing at {} Hz", w[0])));
        }
        if frequencies_hz.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidTrace("non-finite sample".into()));
        }
        // loss-corrected traces keep negative values as a calibration diagnostic
        if quantity.is_psd() && stage != Stage::LossCorrected {
            if let Some((f, v)) = frequencies_hz.iter().zip(&values).find(|(_, v)| **v < 0.0) {
                return Err(Error::InvalidTrace(format!("negative PSD {v} at {f} Hz")));
            }
        }
        Ok(Self { frequencies_hz, values, quantity, stage, metadata: BTreeMap::new() })
    }

    pub fn frequencies_hz(&self) -> &[f64] {
        &self.frequencies_hz
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn quantity(&self) -> Quantity {
        self.quantity
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.metadata.insert(key.into(), value.to_string());
        self
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.insert(key.into(), value.to_string());
    }

    fn map_values(&self, stage: Stage, f: impl Fn(f64) -> f64) -> Self {
        Self {
            frequencies_hz: self.frequencies_hz.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            quantity: self.quantity,
            stage,
            metadata: self.metadata.clone(),
        }
    }

    /// S_det = eta S + (1 - eta); the cross spectrum only scales by eta.
    pub fn apply_detection_efficiency(&self, eta: f64) -> Result<Self> {
        check_eta(eta, false)?;
        let t = match self.quantity {
            Quantity::OptimalTheta => return Err(Error::InvalidTrace("loss maps do not apply to angle traces".into())),
            Quantity::CrossReXY => self.map_values(Stage::Detected, |v| eta * v),
            _ => self.map_values(Stage::Detected, |v| eta * v + (1.0 - eta)),
        };
        Ok(t.with_meta("eta_det", eta))
    }

    /// Inverse of [`Self::apply_detection_efficiency`]. Negative results are
    /// kept and reported.
    pub fn correct_for_losses(&self, eta: f64) -> Result<LossCorrection> {
        check_eta(eta, true)?;
        let trace = match self.quantity {
            Quantity::OptimalTheta => return Err(Error::InvalidTrace("loss maps do not apply to angle traces".into())),
            Quantity::CrossReXY => self.map_values(Stage::LossCorrected, |v| v / eta),
            _ => self.map_values(Stage::LossCorrected, |v| (v - (1.0 - eta)) / eta),
        }
        .with_meta("eta_det", eta);
        let negative_indices: Vec<usize> = if trace.quantity.is_psd() {
            trace.values.iter().enumerate().filter(|(_, v)| **v < 0.0).map(|(i, _)| i).collect()
        } else {
            Vec::new()
        };
        if !negative_indices.is_empty() {
            log::warn!(
                "{} loss-corrected points fall below zero; eta_det = {eta} is likely miscalibrated",
                negative_indices.len()
            );
        }
        Ok(LossCorrection { trace, negative_indices })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossCorrection {
    pub trace: SpectrumTrace,
    /// Grid indices whose corrected PSD is negative.
    pub negative_indices: Vec<usize>,
}

fn check_eta(eta: f64, strictly_positive: bool) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Efficiency { value: eta, reason: "must lie in [0, 1]" });
    }
    if strictly_positive && eta == 0.0 {
        return Err(Error::Efficiency { value: eta, reason: "cannot undo a zero efficiency" });
    }
    Ok(())
}

/// S_det = eta S + (1 - eta) S_SN for a single value with shot level `shot`.
pub fn apply_detection_efficiency(value: f64, eta: f64, shot: f64) -> Result<f64> {
    check_eta(eta, false)?;
    Ok(eta * value + (1.0 - eta) * shot)
}

pub fn correct_for_losses(value: f64, eta: f64, shot: f64) -> Result<f64> {
    check_eta(eta, true)?;
    Ok((value - (1.0 - eta) * shot) / eta)
}

/// 10 log10 of a shot-noise-normalized PSD.
pub fn to_db(normalized: f64) -> Result<f64> {
    if normalized > 0.0 {
        Ok(10.0 * normalized.log10())
    } else {
        Err(Error::NonPositivePsd { freq_hz: f64::NAN, value: normalized })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezingLevel {
    /// Most negative 10 log10(S) in the window; negative means squeezed.
    pub min_db: f64,
    pub freq_hz: f64,
}

pub fn squeezing_level_db(trace: &SpectrumTrace, lo_hz: f64, hi_hz: f64) -> Result<SqueezingLevel> {
    if !trace.quantity.is_psd() {
        return Err(Error::InvalidTrace(format!("{} is not a PSD", trace.quantity)));
    }
    let inside: Vec<(f64, f64)> = trace
        .frequencies_hz
        .iter()
        .zip(&trace.values)
        .filter(|(f, _)| **f >= lo_hz && **f <= hi_hz)
        .map(|(f, v)| (*f, *v))
        .collect();
    if inside.len() < 3 {
        return Err(Error::EmptyWindow { lo_hz, hi_hz, points: inside.len(), needed: 3 });
    }
    let (freq_hz, value) = inside.into_iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap_or((f64::NAN, f64::NAN));
    if !(value > 0.0) {
        return Err(Error::NonPositivePsd { freq_hz, value });
    }
    Ok(SqueezingLevel { min_db: 10.0 * value.log10(), freq_hz })
}

/// `n` evenly spaced points from `start` to `stop` inclusive.
pub fn linear_grid(start: f64, stop: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(stop > start) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::param("grid", format!("need n >= 2 and start < stop, got {n} points on [{start}, {stop}]")));
    }
    let step = (stop - start) / (n - 1) as f64;
    Ok((0..n).map(|i| if i == n - 1 { stop } else { start + step * i as f64 }).collect())
}
