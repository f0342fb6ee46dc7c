use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::{fit_fid, simulate_readout, FidFitResult, NoiseModel};
use crate::dynamics::{FidConfig, FreeEvolutionParams};
use crate::spin::{rotate, BlochState, EnsembleConfig, Rotation};
use crate::units::Energy;
use crate::{Error, Result};

/// Reconstructed lengths above one are accepted (and pulled back onto the
/// sphere) up to this absolute slack on top of the 3σ allowance.
const LENGTH_SLACK: f64 = 1e-6;

/// Transverse components read off a coherence FID.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceEstimate {
    pub sx: f64,
    pub sy: f64,
    pub sx_std: f64,
    pub sy_std: f64,
    pub covariance: f64,
    /// False when the trace held no spectral peak; components are then 0.
    pub signal_detected: bool,
}

impl CoherenceEstimate {
    pub fn undetected() -> Self {
        CoherenceEstimate {
            sx: 0.0,
            sy: 0.0,
            sx_std: 0.0,
            sy_std: 0.0,
            covariance: 0.0,
            signal_detected: false,
        }
    }
}

/// Longitudinal component read out after a `R_x(π/2)` pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationEstimate {
    pub sz: f64,
    pub std_error: f64,
    pub signal_detected: bool,
}

impl PopulationEstimate {
    pub fn undetected() -> Self {
        PopulationEstimate {
            sz: 0.0,
            std_error: 0.0,
            signal_detected: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TomographyResult {
    pub bloch: BlochState,
    /// Standard errors of `(sx, sy, sz)`.
    pub std_errors: [f64; 3],
    /// Bloch length before any projection back onto the sphere.
    pub raw_length: f64,
    pub length_std: f64,
    pub capacity: Energy,
    pub coherent_capacity: Energy,
    pub incoherent_capacity: Energy,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
}

/// `(sx, sy)` from the in-phase and quadrature amplitudes at t = 0.
pub fn coherence_from_fit(fit: &FidFitResult, f: &FidConfig) -> CoherenceEstimate {
    let s = f.amplitude_scale;
    CoherenceEstimate {
        sx: fit.in_phase / s,
        sy: fit.quadrature / s,
        sx_std: fit.in_phase_std / s,
        sy_std: fit.quadrature_std / s,
        covariance: fit.iq_covariance / (s * s),
        signal_detected: true,
    }
}

/// After `R_x(π/2)` the transverse vector is `(sx, −sz)`, so `sz` is minus
/// the quadrature amplitude; its sign follows from the fitted phase.
pub fn population_from_fit(fit: &FidFitResult, f: &FidConfig) -> PopulationEstimate {
    let s = f.amplitude_scale;
    PopulationEstimate {
        sz: -fit.quadrature / s,
        std_error: fit.quadrature_std / s,
        signal_detected: true,
    }
}

pub fn measure_coherence(
    state: BlochState,
    env: &FreeEvolutionParams,
    f: &FidConfig,
    noise: &NoiseModel,
) -> Result<CoherenceEstimate> {
    let series = simulate_readout(state, env, f, noise)?;
    match fit_fid(&series, f) {
        Ok(fit) => Ok(coherence_from_fit(&fit, f)),
        Err(Error::NoSpectralPeak { .. }) => Ok(CoherenceEstimate::undetected()),
        Err(e) => Err(e),
    }
}

/// Signed `sz` via a `R_x(π/2)` readout; a trace without a spectral peak is
/// reported as `sz = 0` with `signal_detected = false`.
pub fn measure_population(
    state: BlochState,
    env: &FreeEvolutionParams,
    f: &FidConfig,
    noise: &NoiseModel,
) -> Result<PopulationEstimate> {
    let rotated = rotate(state, Rotation::x(FRAC_PI_2));
    let series = simulate_readout(rotated, env, f, noise)?;
    match fit_fid(&series, f) {
        Ok(fit) => Ok(population_from_fit(&fit, f)),
        Err(Error::NoSpectralPeak { .. }) => Ok(PopulationEstimate::undetected()),
        Err(e) => Err(e),
    }
}

/// Two-level Bloch inversion from a coherence and a population readout.
pub fn reconstruct_state(
    coherence: &CoherenceEstimate,
    population: &PopulationEstimate,
    cfg: &EnsembleConfig,
) -> Result<TomographyResult> {
    let (sx, sy, sz) = (coherence.sx, coherence.sy, population.sz);
    let std_errors = [coherence.sx_std, coherence.sy_std, population.std_error];
    if [sx, sy, sz]
        .iter()
        .chain(&std_errors)
        .any(|v| !v.is_finite())
    {
        return Err(Error::InvalidState("non-finite tomography estimate".into()));
    }
    let length = (sx * sx + sy * sy + sz * sz).sqrt();
    let length_std = if length > 0.0 {
        let v = sx * sx * std_errors[0].powi(2)
            + sy * sy * std_errors[1].powi(2)
            + 2.0 * sx * sy * coherence.covariance
            + sz * sz * std_errors[2].powi(2);
        (v.max(0.0)).sqrt() / length
    } else {
        std_errors.iter().map(|s| s * s).sum::<f64>().sqrt()
    };
    if length > 1.0 + 3.0 * length_std + LENGTH_SLACK {
        return Err(Error::InconsistentReconstruction {
            length,
            std_error: length_std,
        });
    }
    let shrink = if length > 1.0 { 1.0 / length } else { 1.0 };
    let bloch = BlochState {
        sx: sx * shrink,
        sy: sy * shrink,
        sz: sz * shrink,
    };
    let s = bloch.length().min(1.0);
    let lambda_plus = 0.5 * (1.0 + s);
    let k = cfg.energy_scale();
    Ok(TomographyResult {
        bloch,
        std_errors,
        raw_length: length,
        length_std,
        capacity: k.scale(s),
        coherent_capacity: k.scale(bloch.coherence()),
        incoherent_capacity: k.scale(bloch.sz.abs()),
        lambda_plus,
        lambda_minus: 1.0 - lambda_plus,
    })
}

/// Full simulated tomography of `state`; the population readout draws its
/// noise from `noise.derive(1)`.
pub fn tomography(
    state: BlochState,
    env: &FreeEvolutionParams,
    f: &FidConfig,
    noise: &NoiseModel,
    cfg: &EnsembleConfig,
) -> Result<TomographyResult> {
    state.validate()?;
    let coherence = measure_coherence(state, env, f, noise)?;
    let population = measure_population(state, env, f, &noise.derive(1))?;
    reconstruct_state(&coherence, &population, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (FreeEvolutionParams, FidConfig, EnsembleConfig) {
        (
            FreeEvolutionParams::new(0.2208, 0.1134, 2.0 * std::f64::consts::PI * 300.0).unwrap(),
            FidConfig::new(4000.0, 0.25, 1.0).unwrap(),
            EnsembleConfig::default(),
        )
    }

    #[test]
    fn population_sign_and_value() {
        let (env, f, _) = setup();
        let quiet = NoiseModel::noiseless();
        let up = measure_population(BlochState::CHARGED, &env, &f, &quiet).unwrap();
        assert!((up.sz - 1.0).abs() < 1e-6 && up.signal_detected);
        let down =
            measure_population(BlochState::new(0.0, 0.0, -0.5).unwrap(), &env, &f, &quiet).unwrap();
        assert!((down.sz + 0.5).abs() < 1e-6);
        let none = measure_population(BlochState::UNPOLARIZED, &env, &f, &quiet).unwrap();
        assert_eq!(none, PopulationEstimate::undetected());
    }

    #[test]
    fn rotated_pure_state_split() {
        let (env, f, cfg) = setup();
        let k = cfg.energy_scale().ev();
        let state = rotate(BlochState::CHARGED, Rotation::x_deg(25.0));
        let r = tomography(state, &env, &f, &NoiseModel::noiseless(), &cfg).unwrap();
        let sin = 25f64.to_radians().sin();
        let cos = 25f64.to_radians().cos();
        assert!((r.capacity.ev() - k).abs() < 1e-6 * k);
        assert!((r.coherent_capacity.ev() - k * sin).abs() < 1e-6 * k);
        assert!((r.incoherent_capacity.ev() - k * cos).abs() < 1e-6 * k);
        assert_eq!(r.lambda_plus + r.lambda_minus, 1.0);
    }

    #[test]
    fn overlong_vector_rejected() {
        let (_, _, cfg) = setup();
        let coh = CoherenceEstimate {
            sx: 0.9,
            sy: 0.0,
            sx_std: 0.001,
            sy_std: 0.001,
            covariance: 0.0,
            signal_detected: true,
        };
        let pop = PopulationEstimate {
            sz: 0.9,
            std_error: 0.001,
            signal_detected: true,
        };
        assert!(matches!(
            reconstruct_state(&coh, &pop, &cfg),
            Err(Error::InconsistentReconstruction { .. })
        ));
        let pop = PopulationEstimate {
            sz: 0.436,
            std_error: 0.001,
            signal_detected: true,
        };
        let r = reconstruct_state(&coh, &pop, &cfg).unwrap();
        assert!(r.raw_length > 1.0);
        assert!((r.bloch.length() - 1.0).abs() < 1e-12);
    }
}
