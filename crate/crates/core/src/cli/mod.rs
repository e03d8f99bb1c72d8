//! Config-driven front end: `run`, `validate` and `sweep`.
//!
//! Exit codes: 0 success, 2 usage error, 3 configuration error, 4 runtime
//! failure.

mod config;
mod run;
mod sweep;

pub use config::{
    CombConfig, ConfigError, Diagnostic, DoubleAfcConfig, ExperimentConfig, GridConfig, HeraldChannelConfig,
    HeraldDetectorConfig, PhotonConfig, QubitConfig, SignalChannelConfig, SignalDetectorConfig, SourceConfig,
    TimingConfig, WindowConfig, DEFAULT_PEAK_DEPTH,
};
pub use run::{
    derive_seed, report_lines, run_experiment, simulate, write_artifacts, ExperimentOutcome, ModeResult, StateRun,
    INCOMPLETE_MARKER,
};
pub use sweep::{sweep, with_value, SweepRow, SweepTable};

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Runtime(#[from] crate::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) | CliError::Io(_) => EXIT_RUNTIME,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "afc-qmem",
    version,
    about = "AFC quantum memory storage experiment simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration; defaults apply to every missing key.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "N")]
    parallel: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the full protocol and write artifacts.
    Run(Common),
    /// Check a configuration and list every problem.
    Validate(Common),
    /// Repeat the protocol over values of one numeric key.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted key path, e.g. `comb.tooth_width_mhz`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
    },
}

fn load(c: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Validate(c) => {
            let cfg = load(&c)?;
            let diags = cfg.validate();
            if !diags.is_empty() {
                return Err(ConfigError::Invalid(diags).into());
            }
            writeln!(out, "ok: configuration is valid (digest {})", cfg.digest())?;
        }
        Command::Run(c) => {
            let cfg = load(&c)?;
            let dir = cfg.output_dir.clone();
            let res = run_experiment(&cfg, &dir, c.parallel)?;
            for (k, v) in report_lines(&cfg, &res) {
                writeln!(out, "{k}: {v}")?;
            }
            writeln!(out, "artifacts: {}", dir.display())?;
        }
        Command::Sweep { common, param, values } => {
            let cfg = load(&common)?;
            let table = sweep(&cfg, &param, &values, common.parallel)?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            table.write_tsv(std::fs::File::create(cfg.output_dir.join("sweep.tsv"))?)?;
            table.write_tsv(&mut *out)?;
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let kind = match e {
                CliError::Config(_) => "configuration error",
                _ => "error",
            };
            let _ = writeln!(err, "{kind}: {e}");
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = main_with_args(std::iter::once("afc-qmem").chain(args.iter().copied()), &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(call(&[]).0, EXIT_USAGE);
        assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(call(&["run", "--seed", "x"]).0, EXIT_USAGE);
        assert_eq!(call(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn validate_default_and_broken_configs() {
        let (code, out, _) = call(&["validate"]);
        assert_eq!(code, EXIT_OK, "{out}");
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.toml");
        std::fs::write(
            &p,
            "[comb]\ntooth_width_mhz = 300.0\n[double_afc]\nrecall_time_2_ns = 9.0\n",
        )
        .unwrap();
        let (code, _, err) = call(&["validate", "--config", p.to_str().unwrap()]);
        assert_eq!(code, EXIT_CONFIG);
        assert!(
            err.contains("comb.tooth_width_mhz") && err.contains("double_afc.recall_time_2_ns"),
            "{err}"
        );
        std::fs::write(&p, "[comb]\nwidth = 3\n").unwrap();
        let (code, _, err) = call(&["validate", "--config", p.to_str().unwrap()]);
        assert_eq!(code, EXIT_CONFIG);
        assert!(err.contains("width"), "{err}");
        let (code, _, _) = call(&["validate", "--config", "/nonexistent/afc.toml"]);
        assert_eq!(code, EXIT_CONFIG);
    }
}
