use std::f64::consts::PI;

use nalgebra::{Matrix2, Rotation3, Unit, Vector3};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::BLOCH_SLACK;
use crate::units::{Energy, HBAR, JOULES_PER_EV};
use crate::{Error, Result};

/// Atom number, gyromagnetic ratio and bias field of the ensemble.
///
/// Together they fix the energy scale `k = ħ γ B₀ N`, the full energy swing
/// of a fully polarized battery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    /// Number of atoms (dimensionless, order 10¹²).
    pub n_atoms: f64,
    /// Gyromagnetic ratio (rad·s⁻¹·T⁻¹).
    pub gamma: f64,
    /// Bias field magnitude (T).
    pub b0: f64,
}

impl EnsembleConfig {
    /// ⁸⁷Rb F = 2 gyromagnetic ratio, 2π × 7 GHz/T.
    pub const RB87_GAMMA: f64 = 2.0 * PI * 7.0e9;
    /// Default bias field (T).
    pub const DEFAULT_B0: f64 = 1.0e-6;
    /// Default energy scale in eV.
    pub const DEFAULT_ENERGY_SCALE_EV: f64 = 49.8;

    pub fn new(n_atoms: f64, gamma: f64, b0: f64) -> Result<Self> {
        let cfg = EnsembleConfig { n_atoms, gamma, b0 };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Solves for the atom number that gives the requested energy scale.
    pub fn with_energy_scale(k: Energy, gamma: f64, b0: f64) -> Result<Self> {
        let n_atoms = k.joules() / (HBAR * gamma * b0);
        Self::new(n_atoms, gamma, b0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_atoms.is_finite() && self.n_atoms >= 1.0) {
            return Err(Error::Config(format!(
                "n_atoms must be ≥ 1, got {}",
                self.n_atoms
            )));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::Config(format!(
                "gamma must be > 0, got {}",
                self.gamma
            )));
        }
        if !(self.b0.is_finite() && self.b0 > 0.0) {
            return Err(Error::Config(format!("b0 must be > 0, got {}", self.b0)));
        }
        Ok(())
    }

    /// `k = ħ γ B₀ N`.
    pub fn energy_scale(&self) -> Energy {
        Energy::from_joules(HBAR * self.gamma * self.b0 * self.n_atoms)
    }

    /// Larmor angular frequency `γ B₀` (rad/s).
    pub fn larmor(&self) -> f64 {
        self.gamma * self.b0
    }
}

impl Default for EnsembleConfig {
    /// ⁸⁷Rb in a 1 µT field with the atom number chosen so that `k = 49.8 eV`.
    fn default() -> Self {
        let k = Self::DEFAULT_ENERGY_SCALE_EV * JOULES_PER_EV;
        EnsembleConfig {
            n_atoms: k / (HBAR * Self::RB87_GAMMA * Self::DEFAULT_B0),
            gamma: Self::RB87_GAMMA,
            b0: Self::DEFAULT_B0,
        }
    }
}

/// Per-atom collective Bloch vector, `s_k = 2⟨J_k⟩/N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
}

impl BlochState {
    pub const UNPOLARIZED: BlochState = BlochState {
        sx: 0.0,
        sy: 0.0,
        sz: 0.0,
    };
    pub const CHARGED: BlochState = BlochState {
        sx: 0.0,
        sy: 0.0,
        sz: 1.0,
    };
    pub const DISCHARGED: BlochState = BlochState {
        sx: 0.0,
        sy: 0.0,
        sz: -1.0,
    };

    pub fn new(sx: f64, sy: f64, sz: f64) -> Result<Self> {
        let s = BlochState { sx, sy, sz };
        s.validate()?;
        Ok(s)
    }

    /// State of Bloch length `length` at polar angle `theta` from `+z` and
    /// azimuth `phi` (radians).
    pub fn from_polar(length: f64, theta: f64, phi: f64) -> Result<Self> {
        Self::new(
            length * theta.sin() * phi.cos(),
            length * theta.sin() * phi.sin(),
            length * theta.cos(),
        )
    }

    pub fn from_vector(v: Vector3<f64>) -> Result<Self> {
        Self::new(v.x, v.y, v.z)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sx.is_finite() && self.sy.is_finite() && self.sz.is_finite()) {
            return Err(Error::InvalidState(format!(
                "non-finite component in {self:?}"
            )));
        }
        let len = self.length();
        if len > 1.0 + BLOCH_SLACK {
            return Err(Error::InvalidState(format!("Bloch length {len} exceeds 1")));
        }
        Ok(())
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.sx, self.sy, self.sz)
    }

    /// Bloch length `S = λ₊ − λ₋`.
    pub fn length(&self) -> f64 {
        self.length_squared().sqrt()
    }

    pub fn length_squared(&self) -> f64 {
        self.sx * self.sx + self.sy * self.sy + self.sz * self.sz
    }

    /// Transverse magnitude `c = √(sx² + sy²)`.
    pub fn coherence(&self) -> f64 {
        self.sx.hypot(self.sy)
    }

    /// Azimuth of the transverse component, `atan2(sy, sx)`.
    pub fn azimuth(&self) -> f64 {
        self.sy.atan2(self.sx)
    }

    /// Eigenvalues `(λ₊, λ₋) = ((1 + S)/2, (1 − S)/2)` of the single-spin density.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let s = self.length();
        ((1.0 + s) / 2.0, (1.0 - s) / 2.0)
    }

    /// Draws a state with uniformly distributed direction and Bloch length
    /// uniform on `[0, 1]`.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> BlochState {
        let cos_theta: f64 = rng.random_range(-1.0..=1.0);
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        let len: f64 = rng.random_range(0.0..=1.0);
        let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
        BlochState {
            sx: len * sin_theta * phi.cos(),
            sy: len * sin_theta * phi.sin(),
            sz: len * cos_theta,
        }
    }

    /// The state with its transverse part removed.
    pub fn incoherent_part(&self) -> BlochState {
        BlochState {
            sx: 0.0,
            sy: 0.0,
            sz: self.sz,
        }
    }

    /// The state with its longitudinal part removed.
    pub fn coherent_part(&self) -> BlochState {
        BlochState {
            sx: self.sx,
            sy: self.sy,
            sz: 0.0,
        }
    }
}

/// A 2×2 Hermitian, trace-one density matrix over `{|↑⟩, |↓⟩}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelDensity(Matrix2<Complex64>);

impl TwoLevelDensity {
    pub const TOLERANCE: f64 = 1e-12;

    pub fn from_matrix(m: Matrix2<Complex64>) -> Result<Self> {
        let herm = (m - m.adjoint()).norm();
        if herm > Self::TOLERANCE {
            return Err(Error::InvalidState(format!(
                "matrix not Hermitian (residual {herm:e})"
            )));
        }
        let tr = m.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > Self::TOLERANCE {
            return Err(Error::InvalidState(format!("trace {tr} ≠ 1")));
        }
        let rho = TwoLevelDensity(m);
        let (_, lo) = rho.eigenvalues();
        if lo < -BLOCH_SLACK {
            return Err(Error::InvalidState(format!("negative eigenvalue {lo}")));
        }
        Ok(rho)
    }

    pub fn matrix(&self) -> &Matrix2<Complex64> {
        &self.0
    }

    /// Eigenvalues `(λ₊, λ₋)` from the 2×2 closed form.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let a = self.0[(0, 0)].re;
        let d = self.0[(1, 1)].re;
        let b = self.0[(0, 1)];
        let mean = 0.5 * (a + d);
        let r = (0.5 * (a - d)).hypot(b.norm());
        (mean + r, mean - r)
    }

    pub fn to_bloch(&self) -> BlochState {
        let b = self.0[(0, 1)];
        BlochState {
            sx: 2.0 * b.re,
            sy: -2.0 * b.im,
            sz: (self.0[(0, 0)] - self.0[(1, 1)]).re,
        }
    }
}

/// `ρ = (𝕀 + sx σx + sy σy + sz σz)/2`, basis ordered `(|↑⟩, |↓⟩)`.
pub fn density_from_bloch(state: BlochState) -> Result<TwoLevelDensity> {
    state.validate()?;
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let BlochState { sx, sy, sz } = state;
    Ok(TwoLevelDensity(Matrix2::new(
        c(0.5 * (1.0 + sz), 0.0),
        c(0.5 * sx, -0.5 * sy),
        c(0.5 * sx, 0.5 * sy),
        c(0.5 * (1.0 - sz), 0.0),
    )))
}

/// A right-handed rotation of the Bloch vector by `angle` about `axis`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    axis: Unit<Vector3<f64>>,
    angle: f64,
}

impl Rotation {
    /// Builds a rotation about `axis`, normalising it. Rejects zero or
    /// non-finite axes and non-finite angles.
    pub fn new(axis: Vector3<f64>, angle: f64) -> Result<Self> {
        if !angle.is_finite() {
            return Err(Error::Domain(format!(
                "rotation angle must be finite, got {angle}"
            )));
        }
        let norm = axis.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Domain(format!(
                "rotation axis must be non-zero, got {axis:?}"
            )));
        }
        Ok(Rotation {
            axis: Unit::new_normalize(axis),
            angle,
        })
    }

    pub fn x(angle: f64) -> Self {
        Rotation {
            axis: Vector3::x_axis(),
            angle,
        }
    }

    pub fn y(angle: f64) -> Self {
        Rotation {
            axis: Vector3::y_axis(),
            angle,
        }
    }

    pub fn z(angle: f64) -> Self {
        Rotation {
            axis: Vector3::z_axis(),
            angle,
        }
    }

    pub fn x_deg(deg: f64) -> Self {
        Self::x(deg.to_radians())
    }

    pub fn y_deg(deg: f64) -> Self {
        Self::y(deg.to_radians())
    }

    pub fn z_deg(deg: f64) -> Self {
        Self::z(deg.to_radians())
    }

    pub fn axis(&self) -> Vector3<f64> {
        self.axis.into_inner()
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn matrix(&self) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&self.axis, self.angle)
    }

    /// The SU(2) element `exp(−i θ n·σ/2)` inducing this rotation through
    /// `ρ ↦ U ρ U†`.
    pub fn unitary(&self) -> Matrix2<Complex64> {
        let (s, c) = (0.5 * self.angle).sin_cos();
        let n = self.axis;
        let i = Complex64::i();
        let nx = Complex64::new(n.x, 0.0);
        let ny = Complex64::new(n.y, 0.0);
        let nz = Complex64::new(n.z, 0.0);
        // n·σ
        let n_sigma = Matrix2::new(nz, nx - i * ny, nx + i * ny, -nz);
        Matrix2::identity() * Complex64::new(c, 0.0) - n_sigma * (i * s)
    }
}

/// Rotates the Bloch vector; the length is preserved up to rounding.
pub fn rotate(state: BlochState, r: Rotation) -> BlochState {
    let v = r.matrix() * state.as_vector();
    BlochState {
        sx: v.x,
        sy: v.y,
        sz: v.z,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    fn assert_state(s: BlochState, x: f64, y: f64, z: f64) {
        assert!(
            close(s.sx, x) && close(s.sy, y) && close(s.sz, z),
            "{s:?} != ({x}, {y}, {z})"
        );
    }

    #[test]
    fn density_of_reference_states() {
        let c = |re| Complex64::new(re, 0.0);
        let m = density_from_bloch(BlochState::UNPOLARIZED).unwrap();
        assert_eq!(*m.matrix(), Matrix2::new(c(0.5), c(0.0), c(0.0), c(0.5)));
        let m = density_from_bloch(BlochState::CHARGED).unwrap();
        assert_eq!(*m.matrix(), Matrix2::new(c(1.0), c(0.0), c(0.0), c(0.0)));
        let m = density_from_bloch(BlochState::new(1.0, 0.0, 0.0).unwrap()).unwrap();
        assert_eq!(*m.matrix(), Matrix2::new(c(0.5), c(0.5), c(0.5), c(0.5)));
    }

    #[test]
    fn overlong_state_is_rejected() {
        assert!(matches!(
            BlochState::new(0.0, 0.8, 0.8),
            Err(Error::InvalidState(_))
        ));
        assert!(BlochState::new(0.0, 0.0, 1.0 + 1e-13).is_ok());
        assert!(BlochState::new(f64::NAN, 0.0, 0.0).is_err());
        let bad = BlochState {
            sx: 1.0,
            sy: 1.0,
            sz: 0.0,
        };
        assert!(density_from_bloch(bad).is_err());
    }

    #[test]
    fn density_round_trip_and_eigenvalues() {
        let s = BlochState::new(0.3, -0.2, 0.5).unwrap();
        let rho = density_from_bloch(s).unwrap();
        assert_state(rho.to_bloch(), 0.3, -0.2, 0.5);
        let (hi, lo) = rho.eigenvalues();
        let (ehi, elo) = s.eigenvalues();
        assert!(close(hi, ehi) && close(lo, elo));
        assert!(TwoLevelDensity::from_matrix(*rho.matrix()).is_ok());
    }

    #[test]
    fn quarter_rotation_about_x() {
        assert_state(
            rotate(BlochState::CHARGED, Rotation::x(FRAC_PI_2)),
            0.0,
            -1.0,
            0.0,
        );
    }

    #[test]
    fn half_rotation_discharges() {
        assert_state(rotate(BlochState::CHARGED, Rotation::x(PI)), 0.0, 0.0, -1.0);
    }

    #[test]
    fn z_rotation_leaves_pole() {
        for k in 0..36 {
            let theta = k as f64 * 0.37;
            assert_state(
                rotate(BlochState::CHARGED, Rotation::z(theta)),
                0.0,
                0.0,
                1.0,
            );
        }
    }

    #[test]
    fn unitary_matches_so3_action() {
        let s = BlochState::new(0.2, 0.5, -0.6).unwrap();
        let r = Rotation::new(Vector3::new(1.0, -2.0, 0.5), 1.234).unwrap();
        let u = r.unitary();
        let rho = density_from_bloch(s).unwrap();
        let rotated = TwoLevelDensity::from_matrix(u * rho.matrix() * u.adjoint()).unwrap();
        let expected = rotate(s, r);
        let got = rotated.to_bloch();
        assert_state(got, expected.sx, expected.sy, expected.sz);
    }

    #[test]
    fn rotation_rejects_degenerate_axis() {
        assert!(Rotation::new(Vector3::zeros(), 1.0).is_err());
        assert!(Rotation::new(Vector3::x(), f64::INFINITY).is_err());
    }

    #[test]
    fn default_ensemble_energy_scale() {
        let cfg = EnsembleConfig::default();
        assert!((cfg.energy_scale().ev() - 49.8).abs() < 1e-12);
        assert!(cfg.n_atoms > 1e12 && cfg.n_atoms < 2e12);
        assert!(EnsembleConfig::new(0.5, 1.0, 1.0).is_err());
        assert!(EnsembleConfig::new(10.0, -1.0, 1.0).is_err());
        assert!(EnsembleConfig::new(10.0, 1.0, 0.0).is_err());
    }
}
