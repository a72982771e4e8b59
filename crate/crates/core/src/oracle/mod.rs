//! Ground-truth evaluators: an exact frequency-domain solve and a stochastic
//! time-domain integration with Welch spectral estimation.

pub mod check;
pub mod drift;
pub mod frequency;
pub mod langevin;
pub mod welch;

pub use drift::{DriftMatrix, NoiseInputSpec};
pub use frequency::{FrequencyOracle, frequency_psd_exact, mechanical_response};
pub use langevin::{max_time_step, stationary_covariance, InitialState, LangevinSimulator, OutputSample, TrajectoryRecord, langevin_simulate};
pub use welch::{WelchAccumulator, WelchEstimate, WelchOptions, WindowFunction, welch_psd, welch_trace};
pub use check::{BandComparison, DeviationReport, StochasticCheck, StochasticReport, closed_form_deviation, stochastic_check};
