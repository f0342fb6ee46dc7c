//! The ground-manifold master equation and its fixed-step integrator.
//!
//! ```text
//! dρ/dt = −i[H_g/ħ, ρ] + R_se(φ(𝕀 + 4⟨S⟩·S) − ρ) + R_wall(𝕀/8 − ρ)
//!       + R_sd(φ − ρ) + R_op(φ(𝕀 + 2s·S) − ρ)
//! ```
//!
//! The spatial diffusion term is not modelled; its effect is carried by
//! `R_wall`. The wall term relaxes toward `𝕀/8` so that every relaxation
//! channel is trace preserving.

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::density::hermiticity_residual;
use super::operators::{ground_hamiltonian, nuclear_part, zeeman_hamiltonian};
use super::{
    build_operators, crosses_multiplets, GroundStateDensity, HyperfineParams, Matrix8,
    SpinOperators, DIM,
};
use crate::units::HBAR;
use crate::{Error, Result};

/// Relaxation and pumping rates (s⁻¹) and the mean photon spin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateParams {
    pub r_se: f64,
    pub r_sd: f64,
    pub r_wall: f64,
    pub r_op: f64,
    /// `s = i ε × ε*`; `(0, 0, 1)` for σ⁺ light along `z`.
    pub photon_spin: [f64; 3],
}

impl RateParams {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("r_se", self.r_se),
            ("r_sd", self.r_sd),
            ("r_wall", self.r_wall),
            ("r_op", self.r_op),
        ] {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::Config(format!("{name} must be ≥ 0, got {r}")));
            }
        }
        let s = Vector3::from(self.photon_spin);
        if !(s.iter().all(|x| x.is_finite()) && s.norm() <= 1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "|photon_spin| must be ≤ 1, got {:?}",
                self.photon_spin
            )));
        }
        Ok(())
    }

    /// No relaxation or pumping.
    pub fn none() -> Self {
        RateParams {
            r_se: 0.0,
            r_sd: 0.0,
            r_wall: 0.0,
            r_op: 0.0,
            photon_spin: [0.0; 3],
        }
    }

    fn max_rate(&self) -> f64 {
        self.r_se.max(self.r_sd).max(self.r_wall).max(self.r_op)
    }
}

impl Default for RateParams {
    /// σ⁺ optical pumping along `z` with no other relaxation.
    fn default() -> Self {
        RateParams {
            r_op: 500.0,
            photon_spin: [0.0, 0.0, 1.0],
            ..RateParams::none()
        }
    }
}

/// Treatment of the hyperfine precession.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// Full `H_g`, including the GHz hyperfine term.
    #[default]
    Lab,
    /// Interaction picture with respect to `A_g I·S` in the secular limit:
    /// coherences between `F = 1` and `F = 2` are averaged away, so the step
    /// size is set by the Zeeman and relaxation rates only.
    Secular,
}

/// The individual contributions to `dρ/dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationTerms {
    pub commutator: Matrix8,
    pub spin_exchange: Matrix8,
    pub wall: Matrix8,
    pub spin_destruction: Matrix8,
    pub pumping: Matrix8,
}

impl RelaxationTerms {
    pub fn total(&self) -> Matrix8 {
        self.commutator + self.spin_exchange + self.wall + self.spin_destruction + self.pumping
    }
}

/// Step control for [`MasterEquation::evolve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// s.
    pub t_final: f64,
    /// Nominal step (s); the last step is never overshot.
    pub dt: f64,
    /// Record every `stride`-th step (the final state is always recorded).
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub time: f64,
    pub rho: GroundStateDensity,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&TrajectorySample> {
        self.samples.last()
    }
}

const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn secular_part(m: &Matrix8) -> Matrix8 {
    Matrix8::from_fn(|i, j| {
        if crosses_multiplets(i, j) {
            Complex64::new(0.0, 0.0)
        } else {
            m[(i, j)]
        }
    })
}

/// A fully configured master equation.
#[derive(Debug, Clone)]
pub struct MasterEquation {
    params: HyperfineParams,
    rates: RateParams,
    field: Vector3<f64>,
    frame: Frame,
    ops: SpinOperators,
    /// `H/ħ` (rad/s) as used by the commutator in the current frame.
    omega: Matrix8,
    /// `𝕀 + 2 s·S`.
    photon: Matrix8,
}

impl MasterEquation {
    pub fn new(params: HyperfineParams, rates: RateParams, field: Vector3<f64>) -> Result<Self> {
        params.validate()?;
        rates.validate()?;
        if !field.iter().all(|b| b.is_finite()) {
            return Err(Error::Config(format!(
                "field must be finite, got {field:?}"
            )));
        }
        let ops = build_operators();
        let photon = Matrix8::identity() + ops.s_dot(&Vector3::from(rates.photon_spin)) * c(2.0);
        let mut me = MasterEquation {
            params,
            rates,
            field,
            frame: Frame::Lab,
            ops,
            omega: Matrix8::zeros(),
            photon,
        };
        me.omega = me.frame_hamiltonian();
        Ok(me)
    }

    pub fn with_frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self.omega = self.frame_hamiltonian();
        self
    }

    fn frame_hamiltonian(&self) -> Matrix8 {
        match self.frame {
            Frame::Lab => ground_hamiltonian(&self.params, &self.ops, &self.field) / c(HBAR),
            Frame::Secular => {
                secular_part(&(zeeman_hamiltonian(&self.params, &self.ops, &self.field) / c(HBAR)))
            }
        }
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn operators(&self) -> &SpinOperators {
        &self.ops
    }

    pub fn rates(&self) -> &RateParams {
        &self.rates
    }

    /// `⟨S⟩ = Re Tr(ρ S)`.
    pub fn mean_spin(&self, rho: &Matrix8) -> Vector3<f64> {
        Vector3::from_fn(|k, _| (rho * self.ops.s[k]).trace().re)
    }

    /// Every term of the right-hand side, with `⟨S⟩` taken from `rho`.
    pub fn terms(&self, rho: &Matrix8) -> RelaxationTerms {
        self.terms_with_spin(rho, &self.mean_spin(rho))
    }

    /// Terms with the spin-exchange mean field frozen at `mean_spin`; linear in `rho`.
    fn terms_with_spin(&self, rho: &Matrix8, mean_spin: &Vector3<f64>) -> RelaxationTerms {
        let r = &self.rates;
        let phi = nuclear_part(rho, &self.ops);
        let i = Complex64::i();
        let commutator = (self.omega * rho - rho * self.omega) * (-i);
        let se_target = Matrix8::identity() + self.ops.s_dot(mean_spin) * c(4.0);
        let mixed = Matrix8::identity() * (rho.trace() / c(DIM as f64));
        let mut t = RelaxationTerms {
            commutator,
            spin_exchange: (phi * se_target - rho) * c(r.r_se),
            wall: (mixed - rho) * c(r.r_wall),
            spin_destruction: (phi - rho) * c(r.r_sd),
            pumping: (phi * self.photon - rho) * c(r.r_op),
        };
        if self.frame == Frame::Secular {
            for m in [
                &mut t.commutator,
                &mut t.spin_exchange,
                &mut t.wall,
                &mut t.spin_destruction,
                &mut t.pumping,
            ] {
                *m = secular_part(m);
            }
        }
        t
    }

    fn rhs_matrix(&self, rho: &Matrix8) -> Matrix8 {
        self.terms(rho).total()
    }

    /// `dρ/dt` (s⁻¹).
    pub fn rhs(&self, rho: &GroundStateDensity) -> Matrix8 {
        self.rhs_matrix(rho.matrix())
    }

    /// Largest characteristic angular frequency or rate (s⁻¹) of the
    /// dynamics in the current frame.
    pub fn max_frequency(&self) -> f64 {
        let larmor = self.params.g_s.abs() * self.params.mu_b * self.field.norm() / HBAR;
        let mut f = self.rates.max_rate().max(larmor);
        if self.frame == Frame::Lab {
            f = f.max(self.params.delta_hf);
        }
        f
    }

    /// Largest step accepted by the stability guard, `0.1 / max_frequency`.
    pub fn max_stable_dt(&self) -> f64 {
        let f = self.max_frequency();
        if f > 0.0 {
            0.1 / f
        } else {
            f64::INFINITY
        }
    }

    fn rk4_step(&self, rho: &Matrix8, h: f64) -> Matrix8 {
        let hc = c(h);
        let half = c(0.5 * h);
        let k1 = self.rhs_matrix(rho);
        let k2 = self.rhs_matrix(&(rho + k1 * half));
        let k3 = self.rhs_matrix(&(rho + k2 * half));
        let k4 = self.rhs_matrix(&(rho + k3 * hc));
        let next = rho + (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * (hc / c(6.0));
        (next + next.adjoint()) * c(0.5)
    }

    /// Fixed-step RK4 integration from `rho0`, re-symmetrising after every step.
    pub fn evolve(&self, rho0: &GroundStateDensity, opts: &EvolveOptions) -> Result<Trajectory> {
        if !(opts.t_final.is_finite() && opts.t_final >= 0.0) {
            return Err(Error::Config(format!(
                "t_final must be ≥ 0, got {}",
                opts.t_final
            )));
        }
        if !(opts.dt.is_finite() && opts.dt > 0.0) {
            return Err(Error::Config(format!("dt must be > 0, got {}", opts.dt)));
        }
        if opts.stride == 0 {
            return Err(Error::Config("stride must be ≥ 1".into()));
        }
        let limit = self.max_stable_dt();
        if opts.dt > limit * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "dt = {:e} s exceeds the stability limit {:e} s",
                opts.dt, limit
            )));
        }

        let ratio = opts.t_final / opts.dt;
        let n_steps = if (ratio - ratio.round()).abs() < 1e-9 {
            ratio.round()
        } else {
            ratio.ceil()
        } as usize;
        let h = if n_steps > 0 {
            opts.t_final / n_steps as f64
        } else {
            0.0
        };

        let mut rho = match self.frame {
            Frame::Lab => *rho0.matrix(),
            Frame::Secular => secular_part(rho0.matrix()),
        };
        let mut samples = Vec::with_capacity(n_steps / opts.stride + 2);
        samples.push(self.checked_sample(0.0, &rho)?);
        for step in 1..=n_steps {
            rho = self.rk4_step(&rho, h);
            let tr = rho.trace();
            if !rho.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::IntegrationFailure(format!(
                    "non-finite density at step {step}"
                )));
            }
            if (tr - ONE).norm() > 1e-6 {
                return Err(Error::IntegrationFailure(format!(
                    "trace drifted to {tr} at step {step}"
                )));
            }
            if step % opts.stride == 0 || step == n_steps {
                samples.push(self.checked_sample(step as f64 * h, &rho)?);
            }
        }
        Ok(Trajectory { samples })
    }

    fn checked_sample(&self, time: f64, rho: &Matrix8) -> Result<TrajectorySample> {
        let state = GroundStateDensity::from_matrix_unchecked(*rho);
        let lo = state.min_eigenvalue();
        if lo < GroundStateDensity::EIGEN_FLOOR {
            return Err(Error::IntegrationFailure(format!(
                "density lost positivity (eigenvalue {lo:e}) at t = {time:e} s"
            )));
        }
        Ok(TrajectorySample { time, rho: state })
    }

    /// Solves `dρ/dt = 0` directly: with the spin-exchange mean field frozen
    /// the right-hand side is linear in `ρ`, so each iteration is one
    /// 64×64 linear solve with the trace condition replacing one equation.
    pub fn steady_state(
        &self,
        guess: &GroundStateDensity,
        tol: f64,
        max_iter: usize,
    ) -> Result<GroundStateDensity> {
        let n = DIM * DIM;
        let secular = self.frame == Frame::Secular;
        let mut rho = if secular {
            secular_part(guess.matrix())
        } else {
            *guess.matrix()
        };
        for _ in 0..max_iter.max(1) {
            let spin = self.mean_spin(&rho);
            let mut lin = DMatrix::<Complex64>::zeros(n, n);
            for a in 0..DIM {
                for b in 0..DIM {
                    let mut basis = Matrix8::zeros();
                    basis[(a, b)] = ONE;
                    let col = self.terms_with_spin(&basis, &spin).total();
                    for i in 0..DIM {
                        for j in 0..DIM {
                            lin[(i * DIM + j, a * DIM + b)] = col[(i, j)];
                        }
                    }
                }
            }
            let mut target = DVector::<Complex64>::zeros(n);
            if secular {
                for i in 0..DIM {
                    for j in 0..DIM {
                        if crosses_multiplets(i, j) {
                            let row = i * DIM + j;
                            lin.row_mut(row).fill(Complex64::new(0.0, 0.0));
                            lin[(row, row)] = ONE;
                        }
                    }
                }
            }
            // Tr(dρ/dt) = 0 makes the diagonal equations dependent; replace one.
            lin.row_mut(0).fill(Complex64::new(0.0, 0.0));
            for k in 0..DIM {
                lin[(0, k * DIM + k)] = ONE;
            }
            target[0] = ONE;
            let sol = lin.lu().solve(&target).ok_or_else(|| {
                Error::IntegrationFailure("steady-state system is singular".into())
            })?;
            let next = Matrix8::from_fn(|i, j| sol[i * DIM + j]);
            let next = (next + next.adjoint()) * c(0.5);
            let change = (next - rho).norm();
            rho = next;
            if change < tol {
                return GroundStateDensity::from_matrix(rho);
            }
        }
        Err(Error::IntegrationFailure(format!(
            "steady state not converged in {max_iter} iterations"
        )))
    }
}

/// One evaluation of the right-hand side for a Hermitian `rho`.
pub fn master_rhs(
    rho: &Matrix8,
    p: &HyperfineParams,
    r: &RateParams,
    field: &Vector3<f64>,
) -> Result<Matrix8> {
    let herm = hermiticity_residual(rho);
    if herm > GroundStateDensity::HERMITIAN_TOL {
        return Err(Error::InvalidState(format!(
            "density not Hermitian (residual {herm:e})"
        )));
    }
    Ok(MasterEquation::new(*p, *r, *field)?.rhs_matrix(rho))
}
