//! Config-driven experiment runner for the `polywidth` library.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{ConfigError, Experiment, ExperimentConfig};
pub use experiments::run_experiment;
pub use report::{Format, Report};

/// Failure classes of a run, each with its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("resource guard `{guard}` tripped: {detail}")]
    Resource { guard: &'static str, detail: String },
    #[error("io error: {0}")]
    Io(String),
    #[error("computation failed: {0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Resource { .. } => 3,
            CliError::Io(_) => 4,
            CliError::Compute(_) => 1,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<polywidth::Error> for CliError {
    fn from(e: polywidth::Error) -> Self {
        match e {
            polywidth::Error::Resource { guard, detail } => CliError::Resource { guard, detail },
            polywidth::Error::Solver(msg) => CliError::Compute(msg),
            other => CliError::Config(other.to_string()),
        }
    }
}

/// Sizes the global worker pool; a no-op without the `parallel` feature.
pub fn configure_workers(workers: Option<usize>) -> Result<(), CliError> {
    match workers {
        Some(0) => Err(CliError::Config("--workers must be at least 1".into())),
        #[cfg(feature = "parallel")]
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Compute(format!("worker pool: {e}"))),
        _ => Ok(()),
    }
}

/// Loads, runs and writes one experiment; `out` overrides the config's `output`.
pub fn run_config_file(
    path: &std::path::Path,
    format: Format,
    out: Option<&std::path::Path>,
) -> Result<Report, CliError> {
    let cfg = ExperimentConfig::from_path(path)?;
    let report = run_experiment(&cfg)?;
    match out.or(cfg.output.as_deref()) {
        Some(p) => {
            let mut file = std::fs::File::create(p).map_err(|e| CliError::Io(format!("creating {}: {e}", p.display())))?;
            report
                .write_to(format, &mut file)
                .map_err(|e| CliError::Io(format!("writing {}: {e}", p.display())))?;
        }
        None => report
            .write_to(format, &mut std::io::stdout().lock())
            .map_err(|e| CliError::Io(format!("writing stdout: {e}")))?,
    }
    Ok(report)
}
