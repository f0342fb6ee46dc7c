use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    dephase, free_evolve, DephasingChannel, FreeEvolutionParams, PumpRelaxParams,
};
use crate::spin::{rotate, BlochState, Rotation};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutKind {
    /// Records the state; no measurement noise.
    Energy,
    /// FID of the transverse components.
    Coherence,
    /// FID after the state's `s_z` has been rotated into the transverse plane.
    Population,
}

/// One step of a pulse sequence. Angles in radians, durations in seconds;
/// an infinite duration means the asymptotic limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "value", rename_all = "snake_case")]
pub enum PulseOp {
    RotX(f64),
    RotY(f64),
    RotZ(f64),
    FreePrecess(f64),
    GradientPulse(f64),
    Pump(f64),
    Readout(ReadoutKind),
    /// Marks where a protocol runner performs the hierarchical scan; the
    /// state passes through unchanged.
    Scan,
}

impl PulseOp {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PulseOp::RotX(a) | PulseOp::RotY(a) | PulseOp::RotZ(a) if !a.is_finite() => Err(
                Error::Config(format!("rotation angle must be finite: {self:?}")),
            ),
            PulseOp::FreePrecess(d) | PulseOp::GradientPulse(d) | PulseOp::Pump(d)
                if d.is_nan() || d < 0.0 =>
            {
                Err(Error::Config(format!("duration must be ≥ 0: {self:?}")))
            }
            _ => Ok(()),
        }
    }

    pub fn rotation(&self) -> Option<Rotation> {
        match *self {
            PulseOp::RotX(a) => Some(Rotation::x(a)),
            PulseOp::RotY(a) => Some(Rotation::y(a)),
            PulseOp::RotZ(a) => Some(Rotation::z(a)),
            _ => None,
        }
    }
}

/// Relaxation and control parameters used while executing a sequence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SequenceEnv {
    pub pump: PumpRelaxParams,
    pub free: FreeEvolutionParams,
    pub dephasing: DephasingChannel,
}


/// Relaxation toward `(0, 0, P)` with `P = r_op/(r_op + r_rel)` at rate
/// `r_op/2 + r_rel`.
pub fn pump(state: BlochState, duration: f64, p: &PumpRelaxParams) -> Result<BlochState> {
    p.validate()?;
    if duration.is_nan() || duration < 0.0 {
        return Err(Error::Domain(format!(
            "pump duration must be ≥ 0, got {duration}"
        )));
    }
    let target = p.target_polarization();
    let f = if duration == f64::INFINITY {
        0.0
    } else {
        (-p.charging_rate() * duration).exp()
    };
    Ok(BlochState {
        sx: state.sx * f,
        sy: state.sy * f,
        sz: target + (state.sz - target) * f,
    })
}

/// A state after the op that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub op: PulseOp,
    pub state: BlochState,
}

/// Applies `seq` left to right, returning the state after every op.
pub fn run_sequence(state: BlochState, seq: &[PulseOp], env: &SequenceEnv) -> Result<Vec<Stage>> {
    state.validate()?;
    let mut current = state;
    let mut out = Vec::with_capacity(seq.len());
    for op in seq {
        op.validate()?;
        current = match *op {
            PulseOp::RotX(_) | PulseOp::RotY(_) | PulseOp::RotZ(_) => {
                rotate(current, op.rotation().expect("rotation op"))
            }
            PulseOp::FreePrecess(t) => free_evolve(current, t, &env.free)?,
            PulseOp::GradientPulse(t) => dephase(current, t, &env.dephasing)?,
            PulseOp::Pump(t) => pump(current, t, &env.pump)?,
            PulseOp::Readout(_) | PulseOp::Scan => current,
        };
        out.push(Stage {
            op: *op,
            state: current,
        });
    }
    Ok(out)
}

/// A state-preparation rotation string such as `Rz(200)Rx(40)`, angles in
/// degrees, read as an operator product: the rightmost rotation acts first.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Preparation {
    /// Rotations in the order they are applied.
    pub ops: Vec<PulseOp>,
}

impl Preparation {
    pub fn identity() -> Self {
        Preparation::default()
    }

    /// From ops in application order.
    pub fn from_ops(ops: Vec<PulseOp>) -> Result<Self> {
        for op in &ops {
            op.validate()?;
            if op.rotation().is_none() {
                return Err(Error::Config(format!(
                    "preparation may only contain rotations: {op:?}"
                )));
            }
        }
        Ok(Preparation { ops })
    }

    pub fn apply(&self, state: BlochState) -> BlochState {
        self.ops.iter().fold(state, |s, op| {
            rotate(s, op.rotation().expect("validated rotation"))
        })
    }
}

impl FromStr for Preparation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '*')
            .collect();
        if compact.is_empty() || compact.eq_ignore_ascii_case("none") || compact == "I" {
            return Ok(Preparation::identity());
        }
        let bad = |why: &str| Error::Config(format!("cannot parse preparation {s:?}: {why}"));
        let mut ops = Vec::new();
        let mut rest = compact.as_str();
        while !rest.is_empty() {
            let mut chars = rest.chars();
            if !matches!(chars.next(), Some('R' | 'r')) {
                return Err(bad("expected R"));
            }
            let axis = chars.next().ok_or_else(|| bad("missing axis"))?;
            let body = chars.as_str();
            let body = body.strip_prefix('(').ok_or_else(|| bad("expected ("))?;
            let close = body.find(')').ok_or_else(|| bad("missing )"))?;
            let deg: f64 = body[..close]
                .trim_end_matches("deg")
                .trim_end_matches('°')
                .parse()
                .map_err(|_| bad("angle is not a number"))?;
            if !deg.is_finite() {
                return Err(bad("angle must be finite"));
            }
            let rad = deg.to_radians();
            ops.push(match axis.to_ascii_lowercase() {
                'x' => PulseOp::RotX(rad),
                'y' => PulseOp::RotY(rad),
                'z' => PulseOp::RotZ(rad),
                _ => return Err(bad("axis must be x, y or z")),
            });
            rest = &body[close + 1..];
        }
        ops.reverse();
        Preparation::from_ops(ops)
    }
}

impl fmt::Display for Preparation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ops.is_empty() {
            return write!(f, "I");
        }
        for op in self.ops.iter().rev() {
            let (axis, a) = match *op {
                PulseOp::RotX(a) => ('x', a),
                PulseOp::RotY(a) => ('y', a),
                PulseOp::RotZ(a) => ('z', a),
                _ => unreachable!("preparation holds rotations only"),
            };
            write!(f, "R{axis}({})", a.to_degrees())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: BlochState, b: BlochState, tol: f64) -> bool {
        (a.as_vector() - b.as_vector()).norm() <= tol
    }

    #[test]
    fn inversion_and_identity() {
        let env = SequenceEnv::default();
        let out = run_sequence(BlochState::CHARGED, &[PulseOp::RotX(PI)], &env).unwrap();
        assert!(close(out[0].state, BlochState::DISCHARGED, 1e-15));
        assert!(run_sequence(BlochState::CHARGED, &[], &env)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn equatorial_azimuth_shift() {
        let env = SequenceEnv::default();
        let theta = 0.7;
        let seq = [PulseOp::RotX(FRAC_PI_2), PulseOp::RotZ(theta)];
        let out = run_sequence(BlochState::CHARGED, &seq, &env).unwrap();
        let oracle = Rotation::z(theta).matrix() * Rotation::x(FRAC_PI_2).matrix();
        let expect = BlochState::from_vector(oracle * BlochState::CHARGED.as_vector()).unwrap();
        let s = out[1].state;
        assert!(close(s, expect, 1e-15));
        assert!((s.length() - 1.0).abs() < 1e-15 && s.sz.abs() < 1e-15);
        assert!((s.azimuth() - (-FRAC_PI_2 + theta)).abs() < 1e-14);
    }

    #[test]
    fn pump_matches_charging_curve() {
        let p = PumpRelaxParams::new(10.0, 1.0).unwrap();
        let t = 0.3;
        let s = pump(BlochState::UNPOLARIZED, t, &p).unwrap();
        let want = p.target_polarization() * (1.0 - (-p.charging_rate() * t).exp());
        assert!((s.sz - want).abs() < 1e-15);
        let full = pump(BlochState::new(0.5, 0.5, -0.5).unwrap(), f64::INFINITY, &p).unwrap();
        assert_eq!(
            full,
            BlochState {
                sx: 0.0,
                sy: 0.0,
                sz: p.target_polarization()
            }
        );
    }

    #[test]
    fn readout_and_scan_do_not_touch_state() {
        let s = BlochState::new(0.1, 0.2, 0.3).unwrap();
        let seq = [PulseOp::Readout(ReadoutKind::Coherence), PulseOp::Scan];
        for st in run_sequence(s, &seq, &SequenceEnv::default()).unwrap() {
            assert_eq!(st.state, s);
        }
    }

    #[test]
    fn invalid_ops_rejected() {
        let env = SequenceEnv::default();
        assert!(run_sequence(BlochState::CHARGED, &[PulseOp::Pump(-1.0)], &env).is_err());
        assert!(run_sequence(BlochState::CHARGED, &[PulseOp::RotX(f64::NAN)], &env).is_err());
    }

    #[test]
    fn preparation_strings() {
        let p: Preparation = "Rz(200)Rx(40)".parse().unwrap();
        assert_eq!(
            p.ops,
            vec![
                PulseOp::RotX(40f64.to_radians()),
                PulseOp::RotZ(200f64.to_radians())
            ]
        );
        let direct = rotate(
            rotate(BlochState::CHARGED, Rotation::x_deg(40.0)),
            Rotation::z_deg(200.0),
        );
        assert!(close(p.apply(BlochState::CHARGED), direct, 1e-15));
        assert_eq!(p.to_string().parse::<Preparation>().unwrap(), p);
        assert_eq!(
            "none".parse::<Preparation>().unwrap(),
            Preparation::identity()
        );
        assert!("Rq(3)".parse::<Preparation>().is_err());
        assert!("Rx(abc)".parse::<Preparation>().is_err());
        assert!("Rx(3".parse::<Preparation>().is_err());
    }
}
