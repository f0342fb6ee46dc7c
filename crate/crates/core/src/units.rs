//! Physical constants and the [`Energy`] newtype.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Sub};

/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Elementary charge, i.e. joules per electronvolt.
pub const JOULES_PER_EV: f64 = 1.602_176_634e-19;
/// Bohr magneton (J/T).
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
/// Nuclear magneton (J/T).
pub const NUCLEAR_MAGNETON: f64 = 5.050_783_746_1e-27;

/// An energy in joules.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Energy(f64);

impl Energy {
    pub const ZERO: Energy = Energy(0.0);

    pub fn from_joules(j: f64) -> Self {
        Energy(j)
    }

    pub fn from_ev(ev: f64) -> Self {
        Energy(ev * JOULES_PER_EV)
    }

    pub fn joules(self) -> f64 {
        self.0
    }

    pub fn ev(self) -> f64 {
        self.0 / JOULES_PER_EV
    }

    /// Ratio of two energies.
    pub fn ratio(self, other: Energy) -> f64 {
        self.0 / other.0
    }

    pub fn scale(self, factor: f64) -> Energy {
        Energy(self.0 * factor)
    }
}

impl Add for Energy {
    type Output = Energy;
    fn add(self, rhs: Energy) -> Energy {
        Energy(self.0 + rhs.0)
    }
}

impl Sub for Energy {
    type Output = Energy;
    fn sub(self, rhs: Energy) -> Energy {
        Energy(self.0 - rhs.0)
    }
}

impl fmt::Display for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6} eV", self.ev())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ev_round_trip() {
        let e = Energy::from_ev(49.8);
        assert!((e.ev() - 49.8).abs() < 1e-12);
        assert!((e.joules() - 49.8 * 1.602_176_634e-19).abs() < 1e-30);
    }
}
