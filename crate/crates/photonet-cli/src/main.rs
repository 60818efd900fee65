use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use photonet_cli::config::load_config;
use photonet_cli::output::{FileStamp, OutputFormat, OutputWriter};
use photonet_cli::reproduce::{reproduce_paper, ReproduceOptions};
use photonet_cli::scenarios;
use photonet_cli::{presets, CliError};

/// Simulation and analysis toolkit for coupled cavity-waveguide-cavity
/// photonic networks.
#[derive(Parser)]
#[command(name = "photonet", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario described by a TOML configuration file.
    Run {
        /// Path to the configuration file.
        config: PathBuf,
        /// Master seed override for stochastic scenarios.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory override.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Output file layout.
        #[arg(long, value_enum, default_value_t)]
        format: OutputFormat,
    },
    /// Recompute every modelled headline number and print the pass/fail
    /// table.
    ReproducePaper {
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the table to <out-dir>/reproduce_paper.txt.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Inspect the bundled parameter presets.
    Preset {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// One line per preset.
    List,
    /// Full preset as TOML.
    Show { name: String },
}

/// Print to stdout, tolerating a closed pipe (e.g. `photonet ... | head`).
fn emit(text: &str) {
    use std::io::Write;
    let _ = write!(std::io::stdout(), "{text}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Run { config, seed, out_dir, format } => {
            let loaded = load_config(&config)?;
            let outcome = scenarios::run(&loaded, seed, out_dir.as_deref(), format)?;
            emit(&format!("{}\n", outcome.summary));
            for file in &outcome.files {
                emit(&format!("wrote {}\n", file.display()));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ReproducePaper { seed, out_dir } => {
            let mut opts = ReproduceOptions::default();
            if let Some(seed) = seed {
                opts.seed = seed;
            }
            let report = reproduce_paper(&opts)?;
            let rendered = report.render();
            emit(&rendered);
            if let Some(dir) = out_dir {
                let stamp = FileStamp {
                    config_hash: photonet_cli::config::short_sha256(
                        format!("reproduce-paper seed={}", opts.seed).as_bytes(),
                    ),
                    seed: Some(opts.seed),
                };
                let mut writer = OutputWriter::new(&dir, stamp, OutputFormat::Csv)?;
                writer.write_report("reproduce_paper.txt", &rendered)?;
                for file in writer.written_files() {
                    emit(&format!("wrote {}\n", file.display()));
                }
            }
            if report.all_pass() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
        Command::Preset { action } => {
            match action {
                PresetAction::List => emit(&presets::listing()?),
                PresetAction::Show { name } => emit(&presets::show(&name)?),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
