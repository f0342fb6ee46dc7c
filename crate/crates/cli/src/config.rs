use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use spinbatt_core::dynamics::{DephasingChannel, FidConfig, FreeEvolutionParams, PumpRelaxParams};
use spinbatt_core::hyperfine::{HyperfineParams, RateParams};
use spinbatt_core::scan::{ProtocolConfig, ScanConfig, SequenceEnv};
use spinbatt_core::spin::{BlochState, EnsembleConfig};
use spinbatt_core::tomography::NoiseModel;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// Result record only.
    #[default]
    Json,
    /// Result record plus the data tables as CSV files.
    Csv,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory; `--out` and `SPINBATT_OUT` take precedence.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    pub format: Format,
    /// Report energies in J instead of eV.
    pub joules: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DephaseConfig {
    pub channel: DephasingChannel,
    /// Gradient-pulse durations (s) swept by `dephase`.
    pub taus: Vec<f64>,
}

impl Default for DephaseConfig {
    fn default() -> Self {
        DephaseConfig {
            channel: DephasingChannel::default(),
            taus: (0..=10).map(|i| i as f64 / 2000.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropyConfig {
    pub tsallis_orders: Vec<f64>,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        EntropyConfig {
            tsallis_orders: vec![2.0, 3.0, 5.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MasterConfig {
    pub hyperfine: HyperfineParams,
    pub rates: RateParams,
    /// Magnetic field (T).
    pub field: [f64; 3],
    /// Secular frame: drops the GHz hyperfine precession so the step size is
    /// set by the Zeeman and relaxation rates.
    pub rotating_frame: bool,
    pub t_final: f64,
    /// RK4 step (s); defaults to the stability limit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Record every `stride`-th step.
    pub stride: usize,
}

impl Default for MasterConfig {
    fn default() -> Self {
        MasterConfig {
            hyperfine: HyperfineParams::default(),
            rates: RateParams::default(),
            field: [0.0, 0.0, 2e-8],
            rotating_frame: true,
            t_final: 0.1,
            dt: None,
            stride: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    /// Bloch vector before pumping.
    pub initial: [f64; 3],
}

impl Default for ProtocolSection {
    fn default() -> Self {
        ProtocolSection { initial: [0.0; 3] }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Base seed of the readout noise; `--seed` overrides it.
    pub seed: u64,
    pub output: OutputConfig,
    pub ensemble: EnsembleConfig,
    pub pump: PumpRelaxParams,
    pub relaxation: FreeEvolutionParams,
    pub dephasing: DephaseConfig,
    pub scan: ScanConfig,
    pub noise: NoiseSection,
    pub fid: FidConfig,
    pub entropy: EntropyConfig,
    pub master: MasterConfig,
    pub protocol: ProtocolSection,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    /// Standard deviation of the additive readout noise (signal units).
    pub sigma: f64,
}

const SECTION_NOTES: &[(&str, &str)] = &[
    ("[output]", "# format: \"json\" writes the result record; \"csv\" also writes the data tables.\n# joules: report energies in J (default eV)."),
    ("[ensemble]", "# k = ħ·gamma·b0·n_atoms; the defaults give k = 49.8 eV."),
    ("[pump]", "# Optical pumping and total relaxation rates (1/s) for Pump ops."),
    ("[relaxation]", "# Free precession: t1, t2 (s) and Larmor frequency (rad/s); FID model."),
    ("[dephasing]", "# Gradient pulses: taus (s) swept by `dephase`."),
    ("[dephasing.channel]", "# Transverse decay rate per unit pulse duration (1/s)."),
    ("[scan]", "# Hierarchical scan, angles in degrees. fine_window defaults to ±coarse_step."),
    ("[noise]", "# Additive Gaussian readout noise; the seed comes from `seed`/--seed."),
    ("[fid]", "# FID sampling: sample_rate (Hz), duration (s), signal units per unit spin."),
    ("[entropy]", "# Tsallis orders p (≥ 2) reported by `capacity`."),
    ("[master]", "# Eight-level ground-state evolution (`evolve`). field in T, times in s."),
    ("[master.hyperfine]", "# delta_hf (rad/s), g_s, mu_b and mu_i (J/T)."),
    ("[master.rates]", "# r_se, r_sd, r_wall, r_op (1/s) and the mean photon spin."),
    ("[protocol]", "# Bloch vector before the pump stage."),
];

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.ensemble.validate()?;
        self.pump.validate()?;
        self.relaxation.validate()?;
        self.scan.validate()?;
        self.fid.validate()?;
        self.noise_model().validate()?;
        self.master.hyperfine.validate()?;
        self.master.rates.validate()?;
        if self.dephasing.channel.gamma_g.is_nan() || self.dephasing.channel.gamma_g < 0.0 {
            return Err(CliError::Config(
                "dephasing.channel.gamma_g must be ≥ 0".into(),
            ));
        }
        if self.dephasing.taus.iter().any(|t| t.is_nan() || *t < 0.0) {
            return Err(CliError::Config("dephasing.taus must be ≥ 0".into()));
        }
        if self
            .entropy
            .tsallis_orders
            .iter()
            .any(|p| !(p.is_finite() && *p >= 2.0))
        {
            return Err(CliError::Config(
                "entropy.tsallis_orders must be finite and ≥ 2".into(),
            ));
        }
        let m = &self.master;
        if !m.field.iter().all(|b| b.is_finite()) {
            return Err(CliError::Config("master.field must be finite".into()));
        }
        if !(m.t_final.is_finite() && m.t_final >= 0.0) {
            return Err(CliError::Config("master.t_final must be ≥ 0".into()));
        }
        if m.dt.is_some_and(|dt| !(dt.is_finite() && dt > 0.0)) || m.stride == 0 {
            return Err(CliError::Config(
                "master.dt must be > 0 and master.stride ≥ 1".into(),
            ));
        }
        BlochState::from_vector(self.protocol.initial.into())
            .map_err(|e| CliError::Config(format!("protocol.initial: {e}")))?;
        Ok(())
    }

    pub fn noise_model(&self) -> NoiseModel {
        NoiseModel {
            sigma: self.noise.sigma,
            seed: self.seed,
        }
    }

    pub fn sequence_env(&self) -> SequenceEnv {
        SequenceEnv {
            pump: self.pump,
            free: self.relaxation,
            dephasing: self.dephasing.channel,
        }
    }

    pub fn protocol_config(&self) -> Result<ProtocolConfig, CliError> {
        Ok(ProtocolConfig {
            initial: BlochState::from_vector(self.protocol.initial.into())?,
            env: self.sequence_env(),
            ensemble: self.ensemble,
            scan: self.scan.clone(),
            fid: self.fid,
            noise: self.noise_model(),
        })
    }

    /// Canonical TOML: every field written, in declaration order.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serialises to TOML")
    }

    /// SHA-256 of the canonical TOML, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_toml().as_bytes()))
    }

    /// The default configuration with a comment above each section.
    pub fn annotated_default() -> String {
        let body = RunConfig::default().canonical_toml();
        let mut out = String::from(
            "# spinbatt run configuration. Every key is optional; omitted keys take the\n\
             # values shown here. seed: base seed of the readout noise (--seed overrides).\n",
        );
        for line in body.lines() {
            if let Some((_, note)) = SECTION_NOTES.iter().find(|(h, _)| *h == line.trim()) {
                if !out.ends_with("\n\n") {
                    out.push('\n');
                }
                out.push_str(note);
                out.push('\n');
            }
            out.push_str(line);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annotated_default_round_trips() {
        let text = RunConfig::annotated_default();
        assert!(text.contains("# Hierarchical scan"));
        assert_eq!(RunConfig::from_toml(&text).unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_sections_take_defaults() {
        let cfg = RunConfig::from_toml("seed = 9\n[scan]\nfine_step = 10.0\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.scan.fine_step, 10.0);
        assert_eq!(cfg.scan.coarse_step, 20.0);
        assert_eq!(cfg.pump, PumpRelaxParams::default());
    }

    #[test]
    fn bad_configs_are_config_errors() {
        for text in [
            "[scan]\nfine_step = 50.0\n",
            "[ensemble]\nbogus = 1\n",
            "seed = \"x\"",
            "[noise]\nsigma = -1.0\n",
        ] {
            assert!(
                matches!(RunConfig::from_toml(text), Err(CliError::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
