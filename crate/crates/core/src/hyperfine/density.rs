use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Matrix8, BATTERY_LOWER, DIM, STRETCHED};
use crate::spin::BlochState;
use crate::{Error, Result};

/// Hermitian, unit-trace 8×8 density matrix over the ground manifold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundStateDensity(Matrix8);

impl GroundStateDensity {
    pub const HERMITIAN_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-10;
    pub const EIGEN_FLOOR: f64 = -1e-8;

    pub fn from_matrix(m: Matrix8) -> Result<Self> {
        let herm = hermiticity_residual(&m);
        if herm > Self::HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "density not Hermitian (residual {herm:e})"
            )));
        }
        let tr = m.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > Self::TRACE_TOL {
            return Err(Error::InvalidState(format!("density trace {tr} ≠ 1")));
        }
        let rho = GroundStateDensity(m);
        let lo = rho.min_eigenvalue();
        if lo < Self::EIGEN_FLOOR {
            return Err(Error::InvalidState(format!(
                "density has eigenvalue {lo:e}"
            )));
        }
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix8) -> Self {
        GroundStateDensity(m)
    }

    pub fn maximally_mixed() -> Self {
        GroundStateDensity(Matrix8::identity() * Complex64::new(1.0 / DIM as f64, 0.0))
    }

    /// Projector onto basis state `index`.
    pub fn basis_state(index: usize) -> Result<Self> {
        if index >= DIM {
            return Err(Error::InvalidState(format!(
                "basis index {index} out of range"
            )));
        }
        let mut m = Matrix8::zeros();
        m[(index, index)] = Complex64::new(1.0, 0.0);
        Ok(GroundStateDensity(m))
    }

    /// `|2,2⟩⟨2,2|`.
    pub fn stretched() -> Self {
        Self::basis_state(STRETCHED).expect("index in range")
    }

    /// A random full-rank density `G G† / Tr(G G†)` with Gaussian `G`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let g = Matrix8::from_fn(|_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let m = g * g.adjoint();
        let tr = m.trace();
        GroundStateDensity(m / tr)
    }

    pub fn matrix(&self) -> &Matrix8 {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix8 {
        self.0
    }

    pub fn populations(&self) -> [f64; DIM] {
        std::array::from_fn(|k| self.0[(k, k)].re)
    }

    /// `Re Tr(ρ O)`.
    pub fn expectation(&self, op: &Matrix8) -> f64 {
        (self.0 * op).trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = SymmetricEigen::new(self.0)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.0).eigenvalues.min()
    }
}

pub(crate) fn hermiticity_residual(m: &Matrix8) -> f64 {
    (m - m.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Battery-subspace projection of a ground-state density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryProjection {
    pub state: BlochState,
    /// Trace of the `{|2,2⟩, |2,1⟩}` block before renormalisation.
    pub weight: f64,
}

impl BatteryProjection {
    pub const MIN_WEIGHT: f64 = 1e-6;
}

/// Extracts the `{|2,2⟩, |2,1⟩}` block, renormalises it and converts it to a
/// Bloch vector with `|2,2⟩` as the charged (`s_z = +1`) level.
pub fn project_battery_subspace(rho: &GroundStateDensity) -> Result<BatteryProjection> {
    let m = rho.matrix();
    let up = m[(STRETCHED, STRETCHED)].re;
    let down = m[(BATTERY_LOWER, BATTERY_LOWER)].re;
    let weight = up + down;
    if !(weight >= BatteryProjection::MIN_WEIGHT) {
        return Err(Error::DegenerateProjection { weight });
    }
    let coh = m[(STRETCHED, BATTERY_LOWER)] / weight;
    let state = BlochState {
        sx: 2.0 * coh.re,
        sy: -2.0 * coh.im,
        sz: (up - down) / weight,
    };
    Ok(BatteryProjection { state, weight })
}
