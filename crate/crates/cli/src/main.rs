use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kahler_lab::tolerance::REGISTRY;
use kahler_lab::{run_to_dir, LabCliError, Scenario, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "lab",
    about = "Energy functional laboratory on radial Kähler metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write report.json, checks.csv and trace CSVs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: $LAB_OUT, then the config, then lab_out/<scenario>).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        grid: Option<usize>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// List scenario names and tolerance keys.
    ListScenarios,
    /// Parse and validate a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn fail(err: &LabCliError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match cli.command {
        Command::ListScenarios => {
            for s in Scenario::ALL {
                let models: Vec<_> = s.models().iter().map(|m| m.name()).collect();
                println!("{:<22} [{}] {}", s.name(), models.join(","), s.summary());
            }
            println!("\ntolerance keys:");
            for t in REGISTRY {
                println!("  {:<20} {:<8e} {}", t.key, t.default, t.about);
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match ScenarioConfig::load(&config) {
            Ok(cfg) => {
                println!("{}: valid {} config", config.display(), cfg.scenario.name());
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Run {
            config,
            out,
            seed,
            grid,
            jobs,
        } => {
            let mut cfg = match ScenarioConfig::load(&config) {
                Ok(cfg) => cfg,
                Err(e) => return fail(&e),
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(grid) = grid {
                cfg.grid_size = grid;
            }
            if let Err(e) = cfg.validate() {
                return fail(&e);
            }
            if let Some(jobs) = jobs {
                if jobs == 0 {
                    return fail(&LabCliError::Config("--jobs must be positive".into()));
                }
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(jobs)
                    .build_global()
                {
                    return fail(&LabCliError::Config(e.to_string()));
                }
            }
            let dir = out
                .or_else(|| std::env::var_os("LAB_OUT").map(PathBuf::from))
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("lab_out").join(cfg.scenario.name()));
            match run_to_dir(&cfg, &dir) {
                Ok(report) => {
                    for item in report.failures() {
                        eprintln!(
                            "FAIL {}: lhs {:e} rhs {:e} tol {:e}{}",
                            item.name,
                            item.lhs,
                            item.rhs,
                            item.tol,
                            item.note
                                .as_deref()
                                .map(|n| format!(" ({n})"))
                                .unwrap_or_default()
                        );
                    }
                    println!(
                        "{}: {} ({} checks, {:.2}s) -> {}",
                        report.scenario,
                        if report.aggregate { "PASS" } else { "FAIL" },
                        report.checks.len(),
                        report.runtime_seconds,
                        dir.display()
                    );
                    if report.aggregate {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => fail(&e),
            }
        }
    }
}
