//! Closed-form and phenomenological evolution of the battery state.

use serde::{Deserialize, Serialize};

use crate::spin::{rotate, BlochState, EnsembleConfig, Rotation};
use crate::units::Energy;
use crate::{Error, Result};

fn check_time(t: f64, what: &str) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::Domain(format!("{what} must be ≥ 0, got {t}")));
    }
    Ok(())
}

/// Optical pumping and total relaxation rates (s⁻¹).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PumpRelaxParams {
    pub r_op: f64,
    pub r_rel: f64,
}

impl PumpRelaxParams {
    pub fn new(r_op: f64, r_rel: f64) -> Result<Self> {
        let p = PumpRelaxParams { r_op, r_rel };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |r: f64| r.is_finite() && r >= 0.0;
        if !(ok(self.r_op) && ok(self.r_rel) && self.r_op + self.r_rel > 0.0) {
            return Err(Error::Config(format!(
                "pump/relax rates must be ≥ 0 with a positive sum, got r_op = {}, r_rel = {}",
                self.r_op, self.r_rel
            )));
        }
        Ok(())
    }

    /// Plateau polarization `R_op/(R_op + R_rel)`.
    pub fn target_polarization(&self) -> f64 {
        self.r_op / (self.r_op + self.r_rel)
    }

    /// Exponent rate `R_op/2 + R_rel` of the charging transient.
    pub fn charging_rate(&self) -> f64 {
        0.5 * self.r_op + self.r_rel
    }
}

/// `T₁`, `T₂` and Larmor frequency of free evolution. Infinite times are
/// allowed and switch the corresponding decay off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreeEvolutionParams {
    /// Longitudinal relaxation time (s).
    pub t1: f64,
    /// Transverse relaxation time (s).
    pub t2: f64,
    /// Precession angular frequency (rad/s).
    pub larmor: f64,
}

impl FreeEvolutionParams {
    pub fn new(t1: f64, t2: f64, larmor: f64) -> Result<Self> {
        let p = FreeEvolutionParams { t1, t2, larmor };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > 0.0 && self.t2 > 0.0) {
            return Err(Error::Config(format!(
                "T1, T2 must be > 0, got {}, {}",
                self.t1, self.t2
            )));
        }
        if !(self.t2 <= 2.0 * self.t1) {
            return Err(Error::Config(format!(
                "T2 = {} exceeds 2·T1 = {}",
                self.t2,
                2.0 * self.t1
            )));
        }
        if !self.larmor.is_finite() {
            return Err(Error::Config(format!(
                "larmor must be finite, got {}",
                self.larmor
            )));
        }
        Ok(())
    }
}

impl Default for FreeEvolutionParams {
    /// Coated-cell relaxation times with a 1 µT ⁸⁷Rb Larmor frequency.
    fn default() -> Self {
        FreeEvolutionParams {
            t1: 220.8e-3,
            t2: 113.4e-3,
            larmor: EnsembleConfig::RB87_GAMMA * EnsembleConfig::DEFAULT_B0,
        }
    }
}

impl Default for PumpRelaxParams {
    /// `r_rel = 1/T₁` of the coated cell and a strong pump, giving `P ≈ 0.991`.
    fn default() -> Self {
        PumpRelaxParams {
            r_op: 500.0,
            r_rel: 1.0 / 220.8e-3,
        }
    }
}

/// Gradient-field dephasing: transverse decay rate per unit pulse duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DephasingChannel {
    pub gamma_g: f64,
}

impl DephasingChannel {
    pub fn new(gamma_g: f64) -> Result<Self> {
        if !(gamma_g.is_finite() && gamma_g >= 0.0) {
            return Err(Error::Config(format!("gamma_g must be ≥ 0, got {gamma_g}")));
        }
        Ok(DephasingChannel { gamma_g })
    }
}

impl Default for DephasingChannel {
    fn default() -> Self {
        DephasingChannel { gamma_g: 1000.0 }
    }
}

/// Sampling of a free-induction-decay trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FidConfig {
    /// Hz.
    pub sample_rate: f64,
    /// s.
    pub duration: f64,
    /// Signal units per unit transverse spin.
    pub amplitude_scale: f64,
}

impl FidConfig {
    pub const MIN_SAMPLES: usize = 16;

    pub fn new(sample_rate: f64, duration: f64, amplitude_scale: f64) -> Result<Self> {
        let f = FidConfig {
            sample_rate,
            duration,
            amplitude_scale,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !(pos(self.sample_rate) && pos(self.duration) && pos(self.amplitude_scale)) {
            return Err(Error::Config(format!(
                "FID parameters must be positive: {self:?}"
            )));
        }
        if self.sample_rate * self.duration < Self::MIN_SAMPLES as f64 {
            return Err(Error::Config(format!(
                "FID window holds {} samples, need at least {}",
                self.sample_rate * self.duration,
                Self::MIN_SAMPLES
            )));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.sample_rate * self.duration).round() as usize
    }

    /// Sample instants `tᵢ = i / sample_rate`, starting at the end of the
    /// preceding pulse.
    pub fn times(&self) -> Vec<f64> {
        (0..self.n_samples())
            .map(|i| i as f64 / self.sample_rate)
            .collect()
    }
}

impl Default for FidConfig {
    fn default() -> Self {
        FidConfig {
            sample_rate: 50_000.0,
            duration: 0.3,
            amplitude_scale: 1.0,
        }
    }
}

/// Charging curve `𝒞(t) = k·R_op/(R_op+R_rel)·[1 − e^{−(R_op/2 + R_rel)t}]`.
pub fn capacity_vs_time(t: f64, p: &PumpRelaxParams, cfg: &EnsembleConfig) -> Result<Energy> {
    check_time(t, "time")?;
    p.validate()?;
    let frac = p.target_polarization() * -(-p.charging_rate() * t).exp_m1();
    Ok(cfg.energy_scale().scale(frac))
}

/// Spin-temperature parameter `β = ln((1+P)/(1−P))`; infinite at `P = 1`.
pub fn spin_temperature(polarization: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&polarization) {
        return Err(Error::Domain(format!(
            "polarization must lie in [0, 1], got {polarization}"
        )));
    }
    Ok(((1.0 + polarization) / (1.0 - polarization)).ln())
}

/// Steady-state capacity `k·tanh(β/2)`, which equals `k·P`.
pub fn steady_state_capacity(polarization: f64, cfg: &EnsembleConfig) -> Result<Energy> {
    let beta = spin_temperature(polarization)?;
    let via_beta = (0.5 * beta).tanh();
    debug_assert!((via_beta - polarization).abs() <= 1e-12 * polarization.max(1.0));
    Ok(cfg.energy_scale().scale(via_beta))
}

/// Precession about `z` at the Larmor frequency with `T₂` decay of the
/// transverse part and `T₁` decay of `s_z` toward the unpolarized state.
pub fn free_evolve(state: BlochState, t: f64, p: &FreeEvolutionParams) -> Result<BlochState> {
    check_time(t, "free evolution time")?;
    let precessed = rotate(state, Rotation::z(p.larmor * t));
    let transverse = (-t / p.t2).exp();
    Ok(BlochState {
        sx: precessed.sx * transverse,
        sy: precessed.sy * transverse,
        sz: state.sz * (-t / p.t1).exp(),
    })
}

/// Gradient-pulse dephasing of duration `tau`; `s_z` is returned untouched.
pub fn dephase(state: BlochState, tau: f64, ch: &DephasingChannel) -> Result<BlochState> {
    check_time(tau, "dephasing duration")?;
    let f = if tau == 0.0 || ch.gamma_g == 0.0 {
        1.0
    } else {
        (-ch.gamma_g * tau).exp()
    };
    Ok(BlochState {
        sx: state.sx * f,
        sy: state.sy * f,
        sz: state.sz,
    })
}

/// `y(tᵢ) = A·c·e^{−tᵢ/T₂}·cos(ω tᵢ + φ₀)` with `c`, `φ₀` the initial
/// transverse magnitude and azimuth.
pub fn fid_signal(state: BlochState, p: &FreeEvolutionParams, f: &FidConfig) -> Vec<f64> {
    let c = state.coherence();
    let phi0 = state.azimuth();
    f.times()
        .into_iter()
        .map(|t| f.amplitude_scale * c * (-t / p.t2).exp() * (p.larmor * t + phi0).cos())
        .collect()
}
