//! Welch power spectral density estimation.
//!
//! Estimates are two-sided densities evaluated at f >= 0: a white series of
//! variance sigma^2 sampled at f_s reads flat at sigma^2 / f_s.

use std::f64::consts::TAU;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::langevin::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::spectra::{Quantity, SHOT_NOISE, SpectrumTrace, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowFunction {
    Rectangular,
    #[default]
    Hann,
    Hamming,
    Blackman,
}

impl WindowFunction {
    /// Periodic (DFT-even) window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let x = TAU * i as f64 / n as f64;
                match self {
                    WindowFunction::Rectangular => 1.0,
                    WindowFunction::Hann => 0.5 - 0.5 * x.cos(),
                    WindowFunction::Hamming => 0.54 - 0.46 * x.cos(),
                    WindowFunction::Blackman => 0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos(),
                }
            })
            .collect()
    }
}

impl std::str::FromStr for WindowFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rect" | "rectangular" | "boxcar" => Ok(WindowFunction::Rectangular),
            "hann" | "hanning" => Ok(WindowFunction::Hann),
            "hamming" => Ok(WindowFunction::Hamming),
            "blackman" => Ok(WindowFunction::Blackman),
            _ => Err(Error::Parse { source_name: "window".into(), message: format!("unknown window `{s}`") }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchOptions {
    pub segment_length: usize,
    /// Fraction of a segment shared with the next one, in [0, 0.9].
    pub overlap: f64,
    pub window: WindowFunction,
}

impl WelchOptions {
    fn validate(&self) -> Result<()> {
        if self.segment_length < 2 {
            return Err(Error::param("segment_length", "must be >= 2"));
        }
        if !(0.0..=0.9).contains(&self.overlap) {
            return Err(Error::param("overlap", format!("must lie in [0, 0.9], got {}", self.overlap)));
        }
        Ok(())
    }

    fn step(&self) -> usize {
        let shared = (self.overlap * self.segment_length as f64).floor() as usize;
        (self.segment_length - shared).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WelchEstimate {
    /// Bin frequencies in cycles per time unit, from 0 to f_s / 2.
    pub frequencies: Vec<f64>,
    pub psd: Vec<f64>,
    pub segments: usize,
}

/// Streaming Welch estimator; memory is one segment regardless of series length.
pub struct WelchAccumulator {
    opts: WelchOptions,
    sample_rate: f64,
    window: Vec<f64>,
    window_power: f64,
    fft: Arc<dyn Fft<f64>>,
    buffer: Vec<f64>,
    scratch: Vec<Complex<f64>>,
    sum: Vec<f64>,
    segments: usize,
}

impl WelchAccumulator {
    pub fn new(opts: WelchOptions, sample_rate: f64) -> Result<Self> {
        opts.validate()?;
        if !(sample_rate > 0.0) {
            return Err(Error::param("sample_rate", "must be > 0"));
        }
        let n = opts.segment_length;
        let window = opts.window.coefficients(n);
        let window_power = window.iter().map(|w| w * w).sum();
        Ok(Self {
            opts,
            sample_rate,
            window,
            window_power,
            fft: FftPlanner::new().plan_fft_forward(n),
            buffer: Vec::with_capacity(n),
            scratch: vec![Complex::new(0.0, 0.0); n],
            sum: vec![0.0; n / 2 + 1],
            segments: 0,
        })
    }

    pub fn push(&mut self, x: f64) {
        self.buffer.push(x);
        if self.buffer.len() == self.opts.segment_length {
            self.process();
            self.buffer.drain(..self.opts.step());
        }
    }

    pub fn extend(&mut self, xs: impl IntoIterator<Item = f64>) {
        for x in xs {
            self.push(x);
        }
    }

    fn process(&mut self) {
        for ((s, x), w) in self.scratch.iter_mut().zip(&self.buffer).zip(&self.window) {
            *s = Complex::new(x * w, 0.0);
        }
        self.fft.process(&mut self.scratch);
        for (acc, s) in self.sum.iter_mut().zip(&self.scratch) {
            *acc += s.norm_sqr();
        }
        self.segments += 1;
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn estimate(&self) -> Result<WelchEstimate> {
        if self.segments == 0 {
            return Err(Error::InsufficientData { needed: self.opts.segment_length, got: self.buffer.len() });
        }
        let n = self.opts.segment_length;
        let norm = 1.0 / (self.segments as f64 * self.sample_rate * self.window_power);
        Ok(WelchEstimate {
            frequencies: (0..self.sum.len()).map(|k| k as f64 * self.sample_rate / n as f64).collect(),
            psd: self.sum.iter().map(|s| s * norm).collect(),
            segments: self.segments,
        })
    }
}

pub fn welch_psd(series: &[f64], sample_rate: f64, opts: WelchOptions) -> Result<WelchEstimate> {
    opts.validate()?;
    if series.len() < opts.segment_length {
        return Err(Error::InsufficientData { needed: opts.segment_length, got: series.len() });
    }
    let mut acc = WelchAccumulator::new(opts, sample_rate)?;
    acc.extend(series.iter().copied());
    acc.estimate()
}

/// Welch estimate of the recorded amplitude-quadrature output, normalized to
/// shot noise 1. Frequencies are in cycles per record time unit.
pub fn welch_trace(record: &TrajectoryRecord, opts: WelchOptions) -> Result<SpectrumTrace> {
    let est = welch_psd(&record.x_out, record.sample_rate(), opts)?;
    let values = est.psd.iter().map(|p| p / SHOT_NOISE).collect();
    Ok(SpectrumTrace::new(est.frequencies, values, Quantity::DirectX, Stage::CavityOutput)?
        .with_meta("seed", record.seed)
        .with_meta("segments", est.segments)
        .with_meta("source", "langevin"))
}
