use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dosnet_sim::presets::{build_preset, trace_csv, PresetOptions};
use dosnet_sim::report::oracle_report;
use dosnet_sim::runner::{csv_string, execute, imprecise_points, Job, JobOutput, DEFAULT_CI_TARGET};
use dosnet_sim::scenario::{parse_scenario, Scenario};
use dosnet_sim::sweep::{apply_axis, parse_values, point_label, Axis, SweepSpec};

#[derive(Parser)]
#[command(name = "dosnet-sim", version, about = "Distributed opportunistic scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and print CSV rows.
    Run {
        file: PathBuf,
        /// Overrides the file's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a figure preset.
    Preset {
        name: String,
        /// Output directory; CSV goes to stdout without it.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Horizon in mini slots (warmup is capped at a tenth).
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Print the analytic optimum and controller gains of a scenario.
    Oracle { file: PathBuf },
    /// Sweep one axis of a scenario file.
    Sweep {
        file: PathBuf,
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

impl Failure {
    fn runtime(e: impl std::fmt::Display) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    parse_scenario(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn validated(path: &Path, s: &Scenario) -> Result<dosnet::ScenarioConfig, Failure> {
    s.validate().map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn run_jobs(jobs: &[Job]) -> Result<Vec<JobOutput>, Failure> {
    let out = execute(jobs).map_err(Failure::runtime)?;
    for label in imprecise_points(&out, DEFAULT_CI_TARGET) {
        eprintln!("note: {label}: throughput CI half-width above {}%", DEFAULT_CI_TARGET * 100.0);
    }
    Ok(out)
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main_inner(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { file, seed, out } => {
            let s = load(&file)?;
            let mut config = validated(&file, &s)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let jobs = [Job {
                label: "run".into(),
                config,
                replications: s.replications,
                keep_results: false,
            }];
            let outputs = run_jobs(&jobs)?;
            emit(&csv_string(&outputs), out.as_deref())
        }
        Command::Preset {
            name,
            out,
            seed,
            horizon,
            replications,
        } => {
            let opts = PresetOptions {
                seed,
                horizon,
                replications,
            };
            let preset = build_preset(&name, &opts).map_err(|e| Failure::Invalid(e.to_string()))?;
            let outputs = run_jobs(&preset.jobs)?;
            let rows = csv_string(&outputs);
            match out {
                Some(dir) => {
                    fs::create_dir_all(&dir).map_err(Failure::runtime)?;
                    emit(&rows, Some(&dir.join(format!("{name}.csv"))))?;
                    if preset.traces {
                        let traces = trace_csv(&preset.jobs, &outputs);
                        emit(&traces, Some(&dir.join(format!("{name}_trace.csv"))))?;
                    }
                    Ok(())
                }
                None => emit(&rows, None),
            }
        }
        Command::Oracle { file } => {
            let s = load(&file)?;
            let config = validated(&file, &s)?;
            let text = oracle_report(&config).map_err(Failure::runtime)?;
            emit(&text, None)
        }
        Command::Sweep {
            file,
            axis,
            values,
            seed,
            out,
        } => {
            let s = load(&file)?;
            let axis: Axis = axis.parse().map_err(|e: dosnet_sim::sweep::SweepError| Failure::Invalid(e.to_string()))?;
            let values = parse_values(&values).map_err(|e| Failure::Invalid(e.to_string()))?;
            let spec = SweepSpec::new(axis, values).map_err(|e| Failure::Invalid(e.to_string()))?;
            let mut jobs = Vec::new();
            for &v in &spec.values {
                let raw = apply_axis(&s.config, spec.axis, v).map_err(|e| Failure::Invalid(e.to_string()))?;
                let point = Scenario { config: raw, ..s.clone() };
                let mut config = validated(&file, &point)?;
                if let Some(seed) = seed {
                    config.seed = seed;
                }
                jobs.push(Job {
                    label: point_label(spec.axis, v),
                    config,
                    replications: s.replications,
                    keep_results: false,
                });
            }
            let outputs = run_jobs(&jobs)?;
            emit(&csv_string(&outputs), out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
