//! Command-line runner: loads a TOML run configuration, dispatches one of
//! six commands and writes a JSON result record (plus CSV tables on request).

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand};

use spinbatt_core::scan::{Preparation, ProtocolId};

pub use commands::{CommandOutput, StateSpec};
pub use config::{Format, RunConfig};
pub use error::CliError;
use output::{write_outputs, EnergyUnit, ResultRecord, Written};

/// Environment variable that overrides the output directory.
pub const OUT_ENV: &str = "SPINBATT_OUT";
pub const DEFAULT_OUT_DIR: &str = "spinbatt-out";

#[derive(Debug, Parser)]
#[command(
    name = "spinbatt",
    version,
    about = "Collective-spin quantum battery simulator"
)]
pub struct Cli {
    /// TOML run configuration; omitted keys take their defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed of the readout noise (overrides the config).
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory (overrides SPINBATT_OUT and the config).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Report energies in joules instead of eV.
    #[arg(long, global = true)]
    pub joules: bool,
    /// Print the annotated default configuration and exit.
    #[arg(long)]
    pub print_default_config: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Args)]
pub struct StateArgs {
    /// Bloch components `sx,sy,sz`.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "prep")]
    pub state: Option<String>,
    /// Rotations applied to (0,0,1), e.g. `Rz(200)Rx(33)` (degrees, rightmost first).
    #[arg(long)]
    pub prep: Option<String>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Capacity, ergotropy and entropy relations of a state (default (0,0,1)).
    Capacity(StateArgs),
    /// Hierarchical scan of the rotation orbit (default state (0,0,1)).
    Scan(StateArgs),
    /// Run measurement protocol 1, 2 or 3.
    Protocol {
        #[arg(long)]
        id: String,
        #[arg(long, default_value = "Rx(25)")]
        prep: String,
    },
    /// Eight-level ground-state evolution.
    Evolve {
        /// `mixed`, `stretched` or `basis:N`.
        #[arg(long, default_value = "mixed")]
        initial: String,
        #[arg(long)]
        t_final: Option<f64>,
    },
    /// Capacity along a gradient-pulse dephasing sweep (default prep Ry(90)).
    Dephase {
        #[command(flatten)]
        state: StateArgs,
        /// Comma-separated pulse durations in seconds (overrides the config).
        #[arg(long, value_delimiter = ',')]
        tau: Vec<f64>,
    },
    /// Simulated FID readout and fit (default prep Ry(90)).
    Fid(StateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Capacity(_) => "capacity",
            Command::Scan(_) => "scan",
            Command::Protocol { .. } => "protocol",
            Command::Evolve { .. } => "evolve",
            Command::Dephase { .. } => "dephase",
            Command::Fid(_) => "fid",
        }
    }
}

/// Outcome of a completed run.
#[derive(Debug)]
pub enum Outcome {
    Printed(String),
    Ran {
        record: ResultRecord,
        summary: String,
        written: Written,
    },
}

/// Loads the config and applies the seed/format/unit overrides.
pub fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    if cli.joules {
        cfg.output.joules = true;
    }
    Ok(cfg)
}

/// Runs `cmd` against a validated config and returns its output.
pub fn execute(cfg: &RunConfig, cmd: &Command) -> Result<CommandOutput, CliError> {
    let u = if cfg.output.joules {
        EnergyUnit::Joule
    } else {
        EnergyUnit::Ev
    };
    match cmd {
        Command::Capacity(a) => commands::capacity(
            cfg,
            &StateSpec::parse(a.state.as_deref(), a.prep.as_deref(), "I")?,
            u,
        ),
        Command::Scan(a) => commands::scan(
            cfg,
            &StateSpec::parse(a.state.as_deref(), a.prep.as_deref(), "I")?,
            u,
        ),
        Command::Protocol { id, prep } => {
            let id: ProtocolId = id
                .parse()
                .map_err(|e: spinbatt_core::Error| CliError::Usage(e.to_string()))?;
            let prep: Preparation = prep
                .parse()
                .map_err(|e: spinbatt_core::Error| CliError::Usage(e.to_string()))?;
            commands::protocol(cfg, id, &prep, u)
        }
        Command::Evolve { initial, t_final } => commands::evolve(cfg, initial, *t_final, u),
        Command::Dephase { state, tau } => {
            let spec = StateSpec::parse(state.state.as_deref(), state.prep.as_deref(), "Ry(90)")?;
            let taus = if tau.is_empty() {
                cfg.dephasing.taus.clone()
            } else {
                tau.clone()
            };
            commands::dephase_sweep(cfg, &spec, &taus, u)
        }
        Command::Fid(a) => commands::fid(
            cfg,
            &StateSpec::parse(a.state.as_deref(), a.prep.as_deref(), "Ry(90)")?,
            u,
        ),
    }
}

/// Hash of the experiment settings; the output directory is excluded.
pub fn config_hash(cfg: &RunConfig) -> String {
    let mut c = cfg.clone();
    c.output.dir = None;
    c.hash()
}

pub fn run_cli(cli: Cli, env_out: Option<OsString>) -> Result<Outcome, CliError> {
    if cli.print_default_config {
        return Ok(Outcome::Printed(RunConfig::annotated_default()));
    }
    let Some(cmd) = cli.command.clone() else {
        return Err(CliError::Usage("no command given; try --help".into()));
    };
    let cfg = load_config(&cli)?;
    let out_dir = cli
        .out
        .clone()
        .or_else(|| env_out.filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));

    let out = execute(&cfg, &cmd)?;
    let hash = config_hash(&cfg);
    let now = Utc::now();
    let record = ResultRecord {
        run_id: format!(
            "{}-{}-{}",
            cmd.name(),
            now.format("%Y%m%dT%H%M%S%.3fZ"),
            &hash[..8]
        ),
        timestamp: now.to_rfc3339_opts(SecondsFormat::Millis, true),
        config_hash: hash,
        command: cmd.name().to_string(),
        payload: out.payload,
    };
    let written = write_outputs(
        &out_dir,
        &record,
        &out.tables,
        cfg.output.format == Format::Csv,
    )?;
    Ok(Outcome::Ran {
        record,
        summary: out.summary,
        written,
    })
}

/// Parses `args`, runs, prints, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run_cli(cli, std::env::var_os(OUT_ENV)) {
        Ok(Outcome::Printed(text)) => {
            print!("{text}");
            0
        }
        Ok(Outcome::Ran {
            summary, written, ..
        }) => {
            println!("{summary}");
            println!("wrote {}", written.record.display());
            for t in &written.tables {
                println!("wrote {}", t.display());
            }
            0
        }
        Err(e) => {
            eprintln!("spinbatt: {e}");
            e.exit_code()
        }
    }
}
