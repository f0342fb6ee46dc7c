use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::spin::{capacity_exact, internal_energy, rotate, BlochState, EnsembleConfig, Rotation};
use crate::units::Energy;
use crate::{Error, Result};

const TIE_TOLERANCE: f64 = 1e-12;

/// Grid of the coarse-to-fine traversal, angles in degrees.
///
/// The energy is evaluated on `R_x(β)·R_z(α)` applied to the state, or on
/// `R_x(β)·R_y(γ)·R_z(α)` when `three_axis` is set. Angle tuples are listed
/// in the order the rotations act: `(α, β)` or `(α, γ, β)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub coarse_step: f64,
    pub fine_step: f64,
    /// Half-width of the fine window; `None` means ± `coarse_step`.
    pub fine_window: Option<f64>,
    pub alpha_range: [f64; 2],
    pub beta_range: [f64; 2],
    /// Range of the middle `R_y` angle in the three-axis variant.
    pub gamma_range: [f64; 2],
    pub three_axis: bool,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            coarse_step: 20.0,
            fine_step: 5.0,
            fine_window: None,
            alpha_range: [0.0, 360.0],
            beta_range: [0.0, 360.0],
            gamma_range: [0.0, 360.0],
            three_axis: false,
        }
    }
}

impl ScanConfig {
    pub fn with_steps(coarse_step: f64, fine_step: f64) -> Self {
        ScanConfig {
            coarse_step,
            fine_step,
            ..ScanConfig::default()
        }
    }

    pub fn window(&self) -> f64 {
        self.fine_window.unwrap_or(self.coarse_step)
    }

    pub fn validate(&self) -> Result<()> {
        let (c, f, w) = (self.coarse_step, self.fine_step, self.window());
        if !(c.is_finite() && f.is_finite() && w.is_finite()) || !(0.0 < f && f <= c) {
            return Err(Error::Config(format!(
                "need 0 < fine_step ≤ coarse_step, got {f} and {c}"
            )));
        }
        if 2.0 * w < c {
            return Err(Error::Config(format!(
                "fine window ±{w}° does not cover a {c}° coarse cell"
            )));
        }
        for r in self.ranges() {
            if !(r[0].is_finite() && r[1].is_finite() && r[0] < r[1] && r[1] - r[0] <= 360.0) {
                return Err(Error::Config(format!("invalid angle range {r:?}")));
            }
        }
        Ok(())
    }

    fn ranges(&self) -> Vec<[f64; 2]> {
        if self.three_axis {
            vec![self.alpha_range, self.gamma_range, self.beta_range]
        } else {
            vec![self.alpha_range, self.beta_range]
        }
    }

    pub fn coarse_len(&self) -> usize {
        self.ranges()
            .iter()
            .map(|r| axis(*r, self.coarse_step).len())
            .product()
    }

    pub fn fine_len(&self) -> usize {
        fine_offsets(self.window(), self.fine_step)
            .len()
            .pow(self.ranges().len() as u32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub coarse_step: f64,
    pub fine_step: f64,
    pub e_max: Energy,
    pub e_min: Energy,
    pub capacity: Energy,
    pub argmax: Vec<f64>,
    pub argmin: Vec<f64>,
    pub n_evaluations: usize,
    pub capacity_exact: Energy,
    /// `(𝒞_exact − 𝒞_scan)/𝒞_exact`; absent for a zero-capacity state.
    pub relative_deviation: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanStage {
    Coarse,
    FineMax,
    FineMin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub stage: ScanStage,
    pub angles: Vec<f64>,
    pub energy: Energy,
}

pub fn hierarchical_scan(
    state: BlochState,
    cfg: &EnsembleConfig,
    sc: &ScanConfig,
) -> Result<ScanResult> {
    hierarchical_scan_detailed(state, cfg, sc).map(|(r, _)| r)
}

/// As [`hierarchical_scan`], also returning every evaluated point.
pub fn hierarchical_scan_detailed(
    state: BlochState,
    cfg: &EnsembleConfig,
    sc: &ScanConfig,
) -> Result<(ScanResult, Vec<ScanPoint>)> {
    state.validate()?;
    cfg.validate()?;
    sc.validate()?;
    let axes: Vec<Vec<f64>> = sc
        .ranges()
        .iter()
        .map(|r| axis(*r, sc.coarse_step))
        .collect();
    if axes.iter().any(Vec::is_empty) {
        return Err(Error::Config("scan grid is empty".into()));
    }
    let eval = |stage: ScanStage, grid: Vec<Vec<f64>>| -> Vec<ScanPoint> {
        grid.into_par_iter()
            .map(|angles| {
                let energy = internal_energy(apply(state, &angles), cfg);
                ScanPoint {
                    stage,
                    angles,
                    energy,
                }
            })
            .collect()
    };

    let mut points = eval(ScanStage::Coarse, product(&axes));
    let coarse_max = points[select(&points, Ordering::Greater)].angles.clone();
    let coarse_min = points[select(&points, Ordering::Less)].angles.clone();
    let offsets = fine_offsets(sc.window(), sc.fine_step);
    points.extend(eval(ScanStage::FineMax, fine_grid(&coarse_max, &offsets)));
    points.extend(eval(ScanStage::FineMin, fine_grid(&coarse_min, &offsets)));

    let imax = select(&points, Ordering::Greater);
    let imin = select(&points, Ordering::Less);
    let (e_max, e_min) = (points[imax].energy, points[imin].energy);
    let capacity = e_max - e_min;
    let exact = capacity_exact(state, cfg);
    let relative_deviation =
        (exact.joules() > 0.0).then(|| (exact.joules() - capacity.joules()) / exact.joules());
    let result = ScanResult {
        coarse_step: sc.coarse_step,
        fine_step: sc.fine_step,
        e_max,
        e_min,
        capacity,
        argmax: points[imax].angles.clone(),
        argmin: points[imin].angles.clone(),
        n_evaluations: points.len(),
        capacity_exact: exact,
        relative_deviation,
    };
    Ok((result, points))
}

fn apply(state: BlochState, angles: &[f64]) -> BlochState {
    let s = rotate(state, Rotation::z_deg(angles[0]));
    match angles {
        [_, beta] => rotate(s, Rotation::x_deg(*beta)),
        [_, gamma, beta] => rotate(rotate(s, Rotation::y_deg(*gamma)), Rotation::x_deg(*beta)),
        _ => unreachable!("two or three scan angles"),
    }
}

fn axis(range: [f64; 2], step: f64) -> Vec<f64> {
    let n = ((range[1] - range[0]) / step - 1e-9).ceil().max(0.0) as usize;
    (0..n).map(|i| range[0] + i as f64 * step).collect()
}

fn fine_offsets(window: f64, step: f64) -> Vec<f64> {
    let m = (window / step + 1e-9).floor() as i64;
    (-m..=m).map(|i| i as f64 * step).collect()
}

fn fine_grid(center: &[f64], offsets: &[f64]) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = center
        .iter()
        .map(|c| offsets.iter().map(|o| (c + o).rem_euclid(360.0)).collect())
        .collect();
    product(&axes)
}

fn product(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, ax| {
        acc.iter()
            .flat_map(|prefix| {
                ax.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect()
    })
}

/// Index of the extremal point; near-ties go to the smallest angle tuple.
fn select(points: &[ScanPoint], want: Ordering) -> usize {
    let sign = if want == Ordering::Greater { 1.0 } else { -1.0 };
    let best = points
        .iter()
        .map(|p| sign * p.energy.joules())
        .fold(f64::NEG_INFINITY, f64::max);
    let scale = points
        .iter()
        .map(|p| p.energy.joules().abs())
        .fold(0.0, f64::max);
    let tol = TIE_TOLERANCE * scale;
    (0..points.len())
        .filter(|&i| sign * points[i].energy.joules() >= best - tol)
        .min_by(|&i, &j| lexicographic(&points[i].angles, &points[j].angles))
        .expect("non-empty grid")
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}
