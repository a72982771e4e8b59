use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Free-decay amplitude envelope of one mechanical mode.
#[derive(Debug, Clone, PartialEq)]
pub struct RingdownData {
    times_s: Vec<f64>,
    amplitudes: Vec<f64>,
    frequency_hz: f64,
}

pub const MIN_RINGDOWN_SAMPLES: usize = 10;

impl RingdownData {
    pub fn new(times_s: Vec<f64>, amplitudes: Vec<f64>, frequency_hz: f64) -> Result<Self> {
        if times_s.len() != amplitudes.len() {
            return Err(Error::Ringdown("times and amplitudes differ in length".into()));
        }
        if times_s.len() < MIN_RINGDOWN_SAMPLES {
            return Err(Error::InsufficientData { needed: MIN_RINGDOWN_SAMPLES, got: times_s.len() });
        }
        if times_s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Ringdown("times must be strictly increasing".into()));
        }
        if let Some(a) = amplitudes.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::Ringdown(format!("amplitude {a} is not positive")));
        }
        if !(frequency_hz > 0.0) {
            return Err(Error::Ringdown("mode frequency must be > 0".into()));
        }
        Ok(Self { times_s, amplitudes, frequency_hz })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingdownResult {
    /// Energy damping rate, twice the amplitude decay rate, in rad/s.
    pub gamma_m: f64,
    /// Omega_m / Gamma_m; +inf only for an exactly flat envelope.
    pub q: f64,
    /// False when the fitted log-amplitude slope is >= 0.
    pub decaying: bool,
    pub slope: f64,
    pub intercept: f64,
}

/// Ordinary least squares of ln(amplitude) against time.
pub fn ringdown_fit(data: &RingdownData) -> Result<RingdownResult> {
    let n = data.times_s.len() as f64;
    let logs: Vec<f64> = data.amplitudes.iter().map(|a| a.ln()).collect();
    let tm = data.times_s.iter().sum::<f64>() / n;
    let lm = logs.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, l) in data.times_s.iter().zip(&logs) {
        sxy += (t - tm) * (l - lm);
        sxx += (t - tm) * (t - tm);
    }
    let slope = sxy / sxx;
    let intercept = lm - slope * tm;
    let gamma_m = -2.0 * slope;
    let decaying = slope < 0.0;
    if !decaying {
        log::warn!("ring-down envelope does not decay (slope {slope:e})");
    }
    let q = if slope == 0.0 { f64::INFINITY } else { TAU * data.frequency_hz / gamma_m };
    Ok(RingdownResult { gamma_m, q, decaying, slope, intercept })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn decay(gamma: f64, noise: f64, seed: u64) -> RingdownData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Normal::new(0.0, noise).unwrap();
        let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.5).collect();
        let amps = times.iter().map(|t| (-0.5 * gamma * t).exp() * (1.0 + dist.sample(&mut rng))).collect();
        RingdownData::new(times, amps, 2.43e6).unwrap()
    }

    #[test]
    fn recovers_quality_factor() {
        let gamma = TAU * 8.1e-3;
        let r = ringdown_fit(&decay(gamma, 0.0, 0)).unwrap();
        assert!((r.gamma_m / gamma - 1.0).abs() < 1e-10);
        assert!((r.q / 3.0e8 - 1.0).abs() < 0.01, "{}", r.q);
        assert!(r.decaying);
    }

    #[test]
    fn flat_envelope_is_flagged() {
        let times: Vec<f64> = (0..20).map(f64::from).collect();
        let r = ringdown_fit(&RingdownData::new(times, vec![3.0; 20], 1e6).unwrap()).unwrap();
        assert!(!r.decaying);
        assert_eq!(r.gamma_m, 0.0);
        assert_eq!(r.q, f64::INFINITY);
    }

    #[test]
    fn noisy_envelope_within_ten_percent() {
        let gamma = TAU * 8.1e-3;
        for seed in 0..100 {
            let r = ringdown_fit(&decay(gamma, 0.05, seed)).unwrap();
            assert!((r.gamma_m / gamma - 1.0).abs() < 0.1, "seed {seed}: {}", r.gamma_m / gamma);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RingdownData::new(vec![0.0; 5], vec![1.0; 5], 1.0).is_err());
        let t: Vec<f64> = (0..10).map(f64::from).collect();
        assert!(RingdownData::new(t.clone(), vec![0.0; 10], 1.0).is_err());
        let mut back = t.clone();
        back[3] = 1.0;
        assert!(RingdownData::new(back, vec![1.0; 10], 1.0).is_err());
    }
}
