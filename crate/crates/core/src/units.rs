//! Unit-tagged frequencies and physical constants.
//!
//! Internally every rate is angular (rad/s). Ordinary frequency (Hz) only
//! appears at the I/O boundary, and the only way across is through the
//! conversions on these two newtypes.

use std::f64::consts::TAU;

/// Ordinary frequency in Hz.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Hertz(pub f64);

/// Angular frequency or rate in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct RadPerSec(pub f64);

impl Hertz {
    pub fn to_angular(self) -> RadPerSec {
        RadPerSec(self.0 * TAU)
    }
}

impl RadPerSec {
    pub fn to_hertz(self) -> Hertz {
        Hertz(self.0 / TAU)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<Hertz> for RadPerSec {
    fn from(f: Hertz) -> Self {
        f.to_angular()
    }
}

impl From<RadPerSec> for Hertz {
    fn from(w: RadPerSec) -> Self {
        w.to_hertz()
    }
}

/// CODATA 2018 exact/recommended values in SI units.
#[derive(Debug, Clone, Copy)]
pub struct PhysicalConstants;

impl PhysicalConstants {
    /// Boltzmann constant, J/K.
    pub const K_B: f64 = 1.380649e-23;
    /// Reduced Planck constant, J s.
    pub const HBAR: f64 = 1.054571817e-34;
}
