use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    hierarchical_scan, run_sequence, Preparation, PulseOp, ReadoutKind, ScanConfig, ScanResult,
    SequenceEnv, Stage,
};
use crate::dynamics::FidConfig;
use crate::spin::{capacity_exact, BlochState, EnsembleConfig};
use crate::tomography::{
    fit_fid, measure_coherence, population_from_fit, reconstruct_state, simulate_readout,
    CoherenceEstimate, NoiseModel, PopulationEstimate, TomographyResult,
};
use crate::units::Energy;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProtocolId {
    /// Hierarchical scan of the coherent battery.
    P1,
    /// Tomographic capacity.
    P2,
    /// Hierarchical scan after coherence erasure.
    P3,
}

impl FromStr for ProtocolId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "p1" => Ok(ProtocolId::P1),
            "2" | "p2" => Ok(ProtocolId::P2),
            "3" | "p3" => Ok(ProtocolId::P3),
            _ => Err(Error::Config(format!(
                "unknown protocol {s:?}; expected 1, 2 or 3"
            ))),
        }
    }
}

impl fmt::Display for ProtocolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = match self {
            ProtocolId::P1 => 1,
            ProtocolId::P2 => 2,
            ProtocolId::P3 => 3,
        };
        write!(f, "P{n}")
    }
}

fn charged_and_prepared(prep: &Preparation) -> Vec<PulseOp> {
    let mut seq = vec![PulseOp::Pump(f64::INFINITY)];
    seq.extend(prep.ops.iter().copied());
    seq
}

pub fn protocol_1(prep: &Preparation) -> Vec<PulseOp> {
    let mut seq = charged_and_prepared(prep);
    seq.extend([PulseOp::Scan, PulseOp::Readout(ReadoutKind::Energy)]);
    seq
}

pub fn protocol_2(prep: &Preparation) -> Vec<PulseOp> {
    let mut seq = charged_and_prepared(prep);
    seq.extend([
        PulseOp::Readout(ReadoutKind::Coherence),
        PulseOp::GradientPulse(f64::INFINITY),
        PulseOp::RotX(FRAC_PI_2),
        PulseOp::Readout(ReadoutKind::Population),
    ]);
    seq
}

pub fn protocol_3(prep: &Preparation) -> Vec<PulseOp> {
    let mut seq = charged_and_prepared(prep);
    seq.extend([
        PulseOp::GradientPulse(f64::INFINITY),
        PulseOp::Scan,
        PulseOp::Readout(ReadoutKind::Energy),
    ]);
    seq
}

pub fn protocol_sequence(id: ProtocolId, prep: &Preparation) -> Vec<PulseOp> {
    match id {
        ProtocolId::P1 => protocol_1(prep),
        ProtocolId::P2 => protocol_2(prep),
        ProtocolId::P3 => protocol_3(prep),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub initial: BlochState,
    pub env: SequenceEnv,
    pub ensemble: EnsembleConfig,
    pub scan: ScanConfig,
    pub fid: FidConfig,
    /// Readout `i` of a run draws its noise from `noise.derive(i)`, except
    /// the first, which uses `noise` itself.
    pub noise: NoiseModel,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            initial: BlochState::UNPOLARIZED,
            env: SequenceEnv::default(),
            ensemble: EnsembleConfig::default(),
            scan: ScanConfig::default(),
            fid: FidConfig::default(),
            noise: NoiseModel::noiseless(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutRecord {
    /// Position in the sequence.
    pub stage: usize,
    pub kind: ReadoutKind,
    pub coherence: Option<CoherenceEstimate>,
    pub population: Option<PopulationEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRun {
    pub id: ProtocolId,
    pub prep: String,
    pub stages: Vec<Stage>,
    /// State right after the preparation rotations.
    pub prepared: BlochState,
    pub capacity_exact: Energy,
    pub scan: Option<ScanResult>,
    pub readouts: Vec<ReadoutRecord>,
    pub tomography: Option<TomographyResult>,
    /// Scanned capacity (P1, P3) or tomographic capacity (P2).
    pub capacity: Energy,
}

pub fn run_protocol(
    id: ProtocolId,
    prep: &Preparation,
    cfg: &ProtocolConfig,
) -> Result<ProtocolRun> {
    cfg.noise.validate()?;
    cfg.fid.validate()?;
    let seq = protocol_sequence(id, prep);
    let stages = run_sequence(cfg.initial, &seq, &cfg.env)?;
    let prepared = stages[prep.ops.len()].state;

    let mut scan = None;
    let mut readouts = Vec::new();
    for (i, stage) in stages.iter().enumerate() {
        match stage.op {
            PulseOp::Scan => {
                scan = Some(hierarchical_scan(stage.state, &cfg.ensemble, &cfg.scan)?);
            }
            PulseOp::Readout(kind) => {
                let noise = match readouts.len() {
                    0 => cfg.noise,
                    n => cfg.noise.derive(n as u64),
                };
                let (coherence, population) = match kind {
                    ReadoutKind::Energy => (None, None),
                    ReadoutKind::Coherence => (
                        Some(measure_coherence(
                            stage.state,
                            &cfg.env.free,
                            &cfg.fid,
                            &noise,
                        )?),
                        None,
                    ),
                    ReadoutKind::Population => (
                        None,
                        Some(read_rotated_population(stage.state, cfg, &noise)?),
                    ),
                };
                readouts.push(ReadoutRecord {
                    stage: i,
                    kind,
                    coherence,
                    population,
                });
            }
            _ => {}
        }
    }

    let coherence = readouts.iter().find_map(|r| r.coherence);
    let population = readouts.iter().find_map(|r| r.population);
    let tomography = match (coherence, population) {
        (Some(c), Some(p)) => Some(reconstruct_state(&c, &p, &cfg.ensemble)?),
        _ => None,
    };
    let capacity = match (&scan, &tomography) {
        (Some(s), _) => s.capacity,
        (None, Some(t)) => t.capacity,
        (None, None) => return Err(Error::Config(format!("{id} produced no capacity estimate"))),
    };
    Ok(ProtocolRun {
        id,
        prep: prep.to_string(),
        stages,
        prepared,
        capacity_exact: capacity_exact(prepared, &cfg.ensemble),
        scan,
        readouts,
        tomography,
        capacity,
    })
}

/// Population readout of a state whose `s_z` has already been turned into
/// the transverse plane by a `R_x(π/2)` pulse.
fn read_rotated_population(
    state: BlochState,
    cfg: &ProtocolConfig,
    noise: &NoiseModel,
) -> Result<PopulationEstimate> {
    let series = simulate_readout(state, &cfg.env.free, &cfg.fid, noise)?;
    match fit_fid(&series, &cfg.fid) {
        Ok(fit) => Ok(population_from_fit(&fit, &cfg.fid)),
        Err(Error::NoSpectralPeak { .. }) => Ok(PopulationEstimate::undetected()),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequences_have_expected_shape() {
        let prep: Preparation = "Rz(30)Ry(20)".parse().unwrap();
        let p1 = protocol_1(&prep);
        assert_eq!(p1.len(), 5);
        assert_eq!(p1[0], PulseOp::Pump(f64::INFINITY));
        assert_eq!(p1[1], PulseOp::RotY(20f64.to_radians()));
        assert_eq!(p1[3], PulseOp::Scan);
        let p2 = protocol_2(&prep);
        assert_eq!(p2[3], PulseOp::Readout(ReadoutKind::Coherence));
        assert_eq!(p2[6], PulseOp::Readout(ReadoutKind::Population));
        let p3 = protocol_3(&prep);
        assert_eq!(p3[3], PulseOp::GradientPulse(f64::INFINITY));
        assert_eq!("p2".parse::<ProtocolId>().unwrap(), ProtocolId::P2);
        assert!("4".parse::<ProtocolId>().is_err());
    }

    #[test]
    fn protocol_three_scans_the_incoherent_part() {
        let cfg = ProtocolConfig::default();
        let prep: Preparation = "Rz(200)Rx(33)".parse().unwrap();
        let run = run_protocol(ProtocolId::P3, &prep, &cfg).unwrap();
        let pre_scan = run.stages[prep.ops.len() + 1].state;
        assert_eq!((pre_scan.sx, pre_scan.sy), (0.0, 0.0));
        let k = cfg.ensemble.energy_scale().joules();
        let inc = k * run.prepared.sz.abs();
        assert!(
            (run.capacity.joules() - inc).abs() <= 2.0 * (1.0 - 2.5f64.to_radians().cos()) * inc
        );
        assert!(run.capacity.joules() <= inc * (1.0 + 1e-12));
    }
}
