use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use polywidth_cli::{configure_workers, run_config_file, Format};

#[derive(Parser)]
#[command(name = "polywidth", version, about = "Widths, approximation radii and minimax risk certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON or TOML config.
    Run {
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        format: OutputFormat,
        /// Report path (defaults to the config's `output`, then stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for the data-parallel core.
        #[arg(long, env = "POLYWIDTH_WORKERS")]
        workers: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let Command::Run {
        config,
        format,
        out,
        workers,
    } = cli.command;
    let format = match format {
        OutputFormat::Json => Format::Json,
        OutputFormat::Csv => Format::Csv,
    };
    let result = configure_workers(workers).and_then(|()| run_config_file(&config, format, out.as_deref()));
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("polywidth: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
