use nalgebra::Vector3;
use serde_json::{json, Map, Value};

use spinbatt_core::dynamics::dephase;
use spinbatt_core::hyperfine::{
    project_battery_subspace, EvolveOptions, Frame, GroundStateDensity, MasterEquation, DIM,
};
use spinbatt_core::scan::{
    hierarchical_scan_detailed, run_protocol, Preparation, ProtocolId, ProtocolRun, PulseOp,
    ReadoutKind, ScanResult,
};
use spinbatt_core::spin::{relation_report, BlochState, CapacityReport};
use spinbatt_core::tomography::{coherence_from_fit, fit_fid, simulate_readout, TomographyResult};
use spinbatt_core::Error;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{json_f64, Cell, EnergyUnit, Table};

/// Payload, data tables and a one-line summary of a command.
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub payload: Value,
    pub tables: Vec<Table>,
    pub summary: String,
}

impl CommandOutput {
    fn new(mut payload: Value, tables: Vec<Table>, summary: String) -> Self {
        if !tables.is_empty() {
            let map: Map<String, Value> = tables
                .iter()
                .map(|t| (t.name.clone(), t.to_value()))
                .collect();
            payload["tables"] = Value::Object(map);
        }
        CommandOutput {
            payload,
            tables,
            summary,
        }
    }
}

/// How the battery state of a command is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum StateSpec {
    /// Explicit Bloch components.
    Bloch(BlochState),
    /// Rotations applied to the fully charged state `(0, 0, 1)`.
    Prep(Preparation),
}

impl StateSpec {
    pub fn parse(
        state: Option<&str>,
        prep: Option<&str>,
        default_prep: &str,
    ) -> Result<Self, CliError> {
        match (state, prep) {
            (Some(_), Some(_)) => Err(CliError::Usage(
                "give either --state or --prep, not both".into(),
            )),
            (Some(s), None) => {
                let parts: Vec<f64> = s
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| CliError::Usage(format!("--state expects sx,sy,sz, got {s:?}")))?;
                let [sx, sy, sz] = parts[..] else {
                    return Err(CliError::Usage(format!(
                        "--state expects three components, got {s:?}"
                    )));
                };
                BlochState::new(sx, sy, sz)
                    .map(StateSpec::Bloch)
                    .map_err(|e| CliError::Usage(e.to_string()))
            }
            (None, p) => p
                .unwrap_or(default_prep)
                .parse::<Preparation>()
                .map(StateSpec::Prep)
                .map_err(|e| CliError::Usage(e.to_string())),
        }
    }

    pub fn state(&self) -> BlochState {
        match self {
            StateSpec::Bloch(s) => *s,
            StateSpec::Prep(p) => p.apply(BlochState::CHARGED),
        }
    }

    pub fn label(&self) -> String {
        match self {
            StateSpec::Bloch(s) => format!("bloch({},{},{})", s.sx, s.sy, s.sz),
            StateSpec::Prep(p) => p.to_string(),
        }
    }
}

fn bloch(s: BlochState) -> Value {
    json!({ "sx": s.sx, "sy": s.sy, "sz": s.sz })
}

pub fn capacity(
    cfg: &RunConfig,
    spec: &StateSpec,
    u: EnergyUnit,
) -> Result<CommandOutput, CliError> {
    let s = spec.state();
    let r = CapacityReport::new(s, &cfg.ensemble);
    let rel = relation_report(s, &cfg.ensemble, &cfg.entropy.tsallis_orders)?;
    let (lp, lm) = s.eigenvalues();
    let tsallis: Vec<Value> = rel
        .tsallis
        .iter()
        .map(|t| json!({ "p": t.p, "slack": u.value(t.slack) }))
        .collect();
    let payload = json!({
        "energy_unit": u.label(),
        "energy_scale": u.value(cfg.ensemble.energy_scale()),
        "state_spec": spec.label(),
        "state": bloch(s),
        "bloch_length": s.length(),
        "lambda_plus": lp,
        "lambda_minus": lm,
        "energy": u.value(r.energy),
        "ergotropy": u.value(r.ergotropy),
        "antiergotropy": u.value(r.antiergotropy),
        "capacity": u.value(r.capacity),
        "coherent_capacity": u.value(r.coherent_capacity),
        "incoherent_capacity": u.value(r.incoherent_capacity),
        "pythagorean_residual": r.pythagorean_residual(),
        "relations": {
            "von_neumann_slack": u.value(rel.von_neumann_slack),
            "tsallis": tsallis,
            "linear_residual_relative": rel.linear_residual_relative(),
        },
    });
    let sfx = u.suffix();
    let cols: Vec<String> = [
        "energy",
        "ergotropy",
        "antiergotropy",
        "capacity",
        "coherent_capacity",
        "incoherent_capacity",
    ]
    .iter()
    .map(|c| format!("{c}_{sfx}"))
    .collect();
    let mut header = vec!["sx", "sy", "sz"];
    header.extend(cols.iter().map(String::as_str));
    let mut t = Table::new("capacity", &header);
    t.push(
        [s.sx, s.sy, s.sz]
            .into_iter()
            .chain(
                [
                    r.energy,
                    r.ergotropy,
                    r.antiergotropy,
                    r.capacity,
                    r.coherent_capacity,
                    r.incoherent_capacity,
                ]
                .map(|e| u.value(e)),
            )
            .map(Cell::from)
            .collect(),
    );
    let summary = format!("capacity {:.6} {}", u.value(r.capacity), u.label());
    Ok(CommandOutput::new(payload, vec![t], summary))
}

fn scan_value(r: &ScanResult, u: EnergyUnit) -> Value {
    json!({
        "coarse_step": r.coarse_step,
        "fine_step": r.fine_step,
        "e_max": u.value(r.e_max),
        "e_min": u.value(r.e_min),
        "capacity": u.value(r.capacity),
        "capacity_exact": u.value(r.capacity_exact),
        "argmax": r.argmax,
        "argmin": r.argmin,
        "n_evaluations": r.n_evaluations,
        "relative_deviation": r.relative_deviation,
    })
}

pub fn scan(cfg: &RunConfig, spec: &StateSpec, u: EnergyUnit) -> Result<CommandOutput, CliError> {
    let s = spec.state();
    let (r, points) = hierarchical_scan_detailed(s, &cfg.ensemble, &cfg.scan)?;
    let mut payload = scan_value(&r, u);
    payload["energy_unit"] = json!(u.label());
    payload["prep"] = json!(spec.label());
    payload["state"] = bloch(s);
    payload["fine_window"] = json!(cfg.scan.window());
    payload["three_axis"] = json!(cfg.scan.three_axis);

    let energy_col = format!("energy_{}", u.suffix());
    let header: Vec<&str> = if cfg.scan.three_axis {
        vec!["alpha_deg", "gamma_deg", "beta_deg", &energy_col]
    } else {
        vec!["alpha_deg", "beta_deg", &energy_col]
    };
    let mut t = Table::new("scan_surface", &header);
    for p in &points {
        let mut row: Vec<Cell> = p.angles.iter().map(|&a| a.into()).collect();
        row.push(u.value(p.energy).into());
        t.push(row);
    }
    let summary = format!(
        "scan capacity {:.6} {} (exact {:.6}, {} evaluations)",
        u.value(r.capacity),
        u.label(),
        u.value(r.capacity_exact),
        r.n_evaluations
    );
    Ok(CommandOutput::new(payload, vec![t], summary))
}

fn tomography_value(t: &TomographyResult, u: EnergyUnit) -> Value {
    json!({
        "bloch": bloch(t.bloch),
        "std_errors": t.std_errors,
        "raw_length": t.raw_length,
        "length_std": t.length_std,
        "capacity": u.value(t.capacity),
        "coherent_capacity": u.value(t.coherent_capacity),
        "incoherent_capacity": u.value(t.incoherent_capacity),
        "lambda_plus": t.lambda_plus,
        "lambda_minus": t.lambda_minus,
    })
}

fn op_cells(op: &PulseOp) -> (&'static str, Option<f64>, Option<f64>, &'static str) {
    match *op {
        PulseOp::RotX(a) => ("rot_x", Some(a.to_degrees()), None, ""),
        PulseOp::RotY(a) => ("rot_y", Some(a.to_degrees()), None, ""),
        PulseOp::RotZ(a) => ("rot_z", Some(a.to_degrees()), None, ""),
        PulseOp::FreePrecess(d) => ("free_precess", None, Some(d), ""),
        PulseOp::GradientPulse(d) => ("gradient_pulse", None, Some(d), ""),
        PulseOp::Pump(d) => ("pump", None, Some(d), ""),
        PulseOp::Readout(k) => (
            "readout",
            None,
            None,
            match k {
                ReadoutKind::Energy => "energy",
                ReadoutKind::Coherence => "coherence",
                ReadoutKind::Population => "population",
            },
        ),
        PulseOp::Scan => ("scan", None, None, ""),
    }
}

fn protocol_payload(run: &ProtocolRun, u: EnergyUnit) -> (Value, Table) {
    let mut t = Table::new(
        "protocol_stages",
        &[
            "stage",
            "op",
            "angle_deg",
            "duration_s",
            "readout",
            "sx",
            "sy",
            "sz",
        ],
    );
    let mut stages = Vec::new();
    for (i, st) in run.stages.iter().enumerate() {
        let (name, angle, duration, readout) = op_cells(&st.op);
        stages.push(json!({
            "op": name,
            "angle_deg": angle,
            "duration_s": duration.map(json_f64),
            "readout": (!readout.is_empty()).then_some(readout),
            "state": bloch(st.state),
        }));
        let opt = |x: Option<f64>| x.map_or(Cell::Text(String::new()), Cell::Num);
        t.push(vec![
            (i as f64).into(),
            name.into(),
            opt(angle),
            opt(duration),
            readout.into(),
            st.state.sx.into(),
            st.state.sy.into(),
            st.state.sz.into(),
        ]);
    }
    let exact = run.capacity_exact.joules();
    let payload = json!({
        "energy_unit": u.label(),
        "id": run.id.to_string(),
        "prep": run.prep,
        "prepared": bloch(run.prepared),
        "capacity_exact": u.value(run.capacity_exact),
        "capacity": u.value(run.capacity),
        "relative_deviation": (exact > 0.0).then(|| (exact - run.capacity.joules()) / exact),
        "stages": stages,
        "scan": run.scan.as_ref().map(|s| scan_value(s, u)),
        "tomography": run.tomography.as_ref().map(|t| tomography_value(t, u)),
        "readouts": serde_json::to_value(&run.readouts).expect("readouts serialise"),
    });
    (payload, t)
}

pub fn protocol(
    cfg: &RunConfig,
    id: ProtocolId,
    prep: &Preparation,
    u: EnergyUnit,
) -> Result<CommandOutput, CliError> {
    let run = run_protocol(id, prep, &cfg.protocol_config()?)?;
    let (payload, t) = protocol_payload(&run, u);
    let summary = format!(
        "{} capacity {:.6} {} (exact {:.6})",
        run.id,
        u.value(run.capacity),
        u.label(),
        u.value(run.capacity_exact)
    );
    Ok(CommandOutput::new(payload, vec![t], summary))
}

/// Initial ground-state density: `mixed`, `stretched` or `basis:N`.
pub fn parse_initial(spec: &str) -> Result<GroundStateDensity, CliError> {
    match spec.trim() {
        "mixed" => Ok(GroundStateDensity::maximally_mixed()),
        "stretched" => Ok(GroundStateDensity::stretched()),
        other => {
            let idx = other
                .strip_prefix("basis:")
                .and_then(|n| n.parse::<usize>().ok())
                .ok_or_else(|| {
                    CliError::Usage(format!(
                        "--initial expects mixed, stretched or basis:N, got {other:?}"
                    ))
                })?;
            GroundStateDensity::basis_state(idx).map_err(|e| CliError::Usage(e.to_string()))
        }
    }
}

pub fn evolve(
    cfg: &RunConfig,
    initial: &str,
    t_final: Option<f64>,
    u: EnergyUnit,
) -> Result<CommandOutput, CliError> {
    let rho0 = parse_initial(initial)?;
    let m = &cfg.master;
    let t_final = t_final.unwrap_or(m.t_final);
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(CliError::Usage(format!(
            "--t-final must be ≥ 0, got {t_final}"
        )));
    }
    let frame = if m.rotating_frame {
        Frame::Secular
    } else {
        Frame::Lab
    };
    let me = MasterEquation::new(m.hyperfine, m.rates, Vector3::from(m.field))?.with_frame(frame);
    let dt = match m.dt {
        Some(dt) => dt,
        None if me.max_stable_dt().is_finite() => me.max_stable_dt(),
        None if t_final > 0.0 => t_final / 1000.0,
        None => 1.0,
    };
    let traj = me.evolve(
        &rho0,
        &EvolveOptions {
            t_final,
            dt,
            stride: m.stride,
        },
    )?;
    let k = cfg.ensemble.energy_scale();
    let sz_op = me.operators().s[2];

    let cap_col = format!("capacity_{}", u.suffix());
    let mut header = vec!["time_s".to_string()];
    header.extend((1..=DIM).map(|i| format!("p{i}")));
    header.extend(["sz_electron", "bloch_sx", "bloch_sy", "bloch_sz"].map(String::from));
    header.push(cap_col);
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::new("evolve_trajectory", &header_refs);
    for sample in &traj.samples {
        let mut row: Vec<Cell> = vec![sample.time.into()];
        row.extend(sample.rho.populations().map(Cell::from));
        row.push(sample.rho.expectation(&sz_op).into());
        match project_battery_subspace(&sample.rho) {
            Ok(p) => {
                row.extend([p.state.sx, p.state.sy, p.state.sz].map(Cell::from));
                row.push(u.value(k.scale(p.state.length())).into());
            }
            Err(Error::DegenerateProjection { .. }) => row.extend([f64::NAN; 4].map(Cell::from)),
            Err(e) => return Err(e.into()),
        }
        t.push(row);
    }
    let last = traj
        .last()
        .ok_or_else(|| CliError::Numerical("empty trajectory".into()))?;
    let projection = project_battery_subspace(&last.rho).ok();
    let payload = json!({
        "energy_unit": u.label(),
        "initial": initial,
        "frame": if m.rotating_frame { "secular" } else { "lab" },
        "dt": dt,
        "t_final": t_final,
        "n_samples": traj.samples.len(),
        "final": {
            "populations": last.rho.populations(),
            "sz_electron": last.rho.expectation(&sz_op),
            "battery_weight": projection.map(|p| p.weight),
            "bloch": projection.map(|p| bloch(p.state)),
            "capacity": projection.map(|p| u.value(k.scale(p.state.length()))),
        },
    });
    let summary = format!(
        "evolved {} samples to t = {t_final} s; |2,2> population {:.6}",
        traj.samples.len(),
        last.rho.populations()[DIM - 1]
    );
    Ok(CommandOutput::new(payload, vec![t], summary))
}

pub fn dephase_sweep(
    cfg: &RunConfig,
    spec: &StateSpec,
    taus: &[f64],
    u: EnergyUnit,
) -> Result<CommandOutput, CliError> {
    let s = spec.state();
    let ch = cfg.dephasing.channel;
    let mut t = Table::new(
        "dephase",
        &["tau_s", "coherence", &format!("capacity_{}", u.suffix())],
    );
    let mut rows = Vec::new();
    for &tau in taus {
        let d = dephase(s, tau, &ch).map_err(|e| CliError::Usage(e.to_string()))?;
        let r = CapacityReport::new(d, &cfg.ensemble);
        let rel = relation_report(d, &cfg.ensemble, &cfg.entropy.tsallis_orders)?;
        t.push(vec![
            tau.into(),
            d.coherence().into(),
            u.value(r.capacity).into(),
        ]);
        rows.push(json!({
            "tau": tau,
            "state": bloch(d),
            "coherence": d.coherence(),
            "capacity": u.value(r.capacity),
            "coherent_capacity": u.value(r.coherent_capacity),
            "incoherent_capacity": u.value(r.incoherent_capacity),
            "von_neumann_slack": u.value(rel.von_neumann_slack),
            "linear_residual_relative": rel.linear_residual_relative(),
        }));
    }
    let payload = json!({
        "energy_unit": u.label(),
        "prep": spec.label(),
        "gamma_g": ch.gamma_g,
        "points": rows,
    });
    let summary = format!("dephased {} over {} durations", spec.label(), taus.len());
    Ok(CommandOutput::new(payload, vec![t], summary))
}

pub fn fid(cfg: &RunConfig, spec: &StateSpec, u: EnergyUnit) -> Result<CommandOutput, CliError> {
    let s = spec.state();
    let noise = cfg.noise_model();
    let series = simulate_readout(s, &cfg.relaxation, &cfg.fid, &noise)?;
    let fit = fit_fid(&series, &cfg.fid)?;
    let est = coherence_from_fit(&fit, &cfg.fid);
    let mut t = Table::new("fid_trace", &["t_s", "signal"]);
    for (time, y) in cfg.fid.times().into_iter().zip(&series) {
        t.push(vec![time.into(), (*y).into()]);
    }
    let payload = json!({
        "energy_unit": u.label(),
        "prep": spec.label(),
        "state": bloch(s),
        "noise": { "sigma": noise.sigma, "seed": noise.seed },
        "n_samples": series.len(),
        "fit": serde_json::to_value(fit).expect("fit serialises"),
        "coherence": { "sx": est.sx, "sy": est.sy, "sx_std": est.sx_std, "sy_std": est.sy_std },
        "coherent_capacity": u.value(cfg.ensemble.energy_scale().scale(est.sx.hypot(est.sy))),
    });
    let summary = format!(
        "fit amplitude {:.6}, frequency {:.3} rad/s, decay time {:.6} s",
        fit.amplitude, fit.frequency, fit.decay_time
    );
    Ok(CommandOutput::new(payload, vec![t], summary))
}
