//! Entropy measures of the single-spin density and their trade-off
//! relations with the capacity.
//!
//! For eigenvalues `λ± = (1 ± S)/2`:
//!
//! * `𝒞 + S_v·k ≥ k` (von Neumann, base 2),
//! * `𝒞 + T_p·k ≤ k` for `p ≥ 2` (Tsallis),
//! * `𝒞² + 2L²k² = k²` with `L² = T₂` (linear entropy, exact).

use serde::{Deserialize, Serialize};

use super::{BlochState, EnsembleConfig};
use crate::units::Energy;
use crate::{Error, Result};

fn clamped_eigenvalues(state: &BlochState) -> (f64, f64) {
    let s = state.length().min(1.0);
    ((1.0 + s) / 2.0, (1.0 - s) / 2.0)
}

/// Binary entropy `H₂(q)` in bits, with `0·log 0 = 0`.
pub fn binary_entropy(q: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    term(q) + term(1.0 - q)
}

/// `S_v = −λ₊ log₂ λ₊ − λ₋ log₂ λ₋`.
pub fn von_neumann_entropy(state: BlochState) -> f64 {
    let (hi, lo) = clamped_eigenvalues(&state);
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    term(hi) + term(lo)
}

/// `T_p = (1 − λ₋ᵖ − λ₊ᵖ)/(p − 1)`, defined here for `p ≥ 2`.
pub fn tsallis_entropy(state: BlochState, p: f64) -> Result<f64> {
    if !(p.is_finite() && p >= 2.0) {
        return Err(Error::Domain(format!(
            "Tsallis order must satisfy p ≥ 2, got {p}"
        )));
    }
    let (hi, lo) = clamped_eigenvalues(&state);
    Ok((1.0 - lo.powf(p) - hi.powf(p)) / (p - 1.0))
}

/// `L² = T₂ = (1 − S²)/2`.
pub fn linear_entropy(state: BlochState) -> f64 {
    0.5 * (1.0 - state.length_squared())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsallisSlack {
    pub p: f64,
    /// `k − 𝒞 − T_p·k`, non-negative when the bound holds.
    pub slack: Energy,
}

/// Slacks of the three entropy–capacity relations for one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    /// `𝒞 + S_v·k − k`, non-negative when the bound holds.
    pub von_neumann_slack: Energy,
    pub tsallis: Vec<TsallisSlack>,
    /// `𝒞² + 2L²k² − k²` in J², zero up to rounding.
    pub linear_residual: f64,
    /// `k`, kept so the relative residuals can be recovered.
    pub energy_scale: Energy,
}

impl RelationReport {
    pub fn von_neumann_slack_per_k(&self) -> f64 {
        self.von_neumann_slack.ratio(self.energy_scale)
    }

    pub fn linear_residual_relative(&self) -> f64 {
        self.linear_residual / self.energy_scale.joules().powi(2)
    }
}

pub fn relation_report(
    state: BlochState,
    cfg: &EnsembleConfig,
    p_values: &[f64],
) -> Result<RelationReport> {
    state.validate()?;
    let k = cfg.energy_scale();
    let c = state.capacity_per_k();
    let vn = c + von_neumann_entropy(state) - 1.0;
    let tsallis = p_values
        .iter()
        .map(|&p| {
            let t = tsallis_entropy(state, p)?;
            Ok(TsallisSlack {
                p,
                slack: k.scale(1.0 - c - t),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let lin = state.length_squared() + 2.0 * linear_entropy(state) - 1.0;
    Ok(RelationReport {
        von_neumann_slack: k.scale(vn),
        tsallis,
        linear_residual: lin * k.joules().powi(2),
        energy_scale: k,
    })
}
