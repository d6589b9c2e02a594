use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crn_sim::controller::ControllerKind;
use crn_sim::sim::{
    emit_metrics, load_config, run_scenario, write_csv, OutputFormat, ScenarioConfig,
};
use crn_sim::Error;

#[derive(Parser)]
#[command(
    name = "crn-sim",
    version,
    about = "Cognitive radio power-allocation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write per-step metrics.
    Run {
        #[arg(long, required_unless_present = "preset")]
        config: Option<PathBuf>,
        /// Start from a named preset (e.g. paper-fig4); --config is ignored.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, env = "CRN_SIM_SEED")]
        seed: Option<u64>,
        /// Override the horizon N.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        controller: Option<ControllerKind>,
        /// Output file; stdout (CSV only) when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
    },
    /// Parse and validate a configuration file.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Csv { .. } | Error::Json { .. } => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Validate { config } => {
            load_config(&config)?;
            println!("{}: ok", config.display());
            Ok(())
        }
        Command::Run {
            config,
            preset,
            seed,
            steps,
            controller,
            out,
            format,
        } => {
            let mut cfg = match (&preset, &config) {
                (Some(name), _) => ScenarioConfig::preset(name)?,
                (None, Some(path)) => load_config(path)?,
                (None, None) => unreachable!("clap requires one of them"),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = steps {
                cfg.horizon = n;
            }
            if let Some(c) = controller {
                cfg.controller = c;
            }
            cfg.validate()?;
            let trace = run_scenario(&cfg)?;
            match out {
                Some(path) => emit_metrics(&trace, &path, format),
                None => {
                    let stdout = std::io::stdout().lock();
                    match format {
                        OutputFormat::Csv => {
                            write_csv(&trace, stdout).map_err(|source| Error::Csv {
                                path: "<stdout>".into(),
                                source,
                            })
                        }
                        OutputFormat::Jsonl => {
                            for rec in &trace {
                                println!(
                                    "{}",
                                    serde_json::to_string(rec).expect("records serialise")
                                );
                            }
                            Ok(())
                        }
                    }
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
