use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dualflow::io::{
    certificate_report, certify_run, load_trajectory, read_measure_csv, run_dual, run_simulation, write_certificate,
    write_dual, write_json, write_run, RunConfig,
};
use dualflow::measures::metric_report;
use dualflow::scenarios::{run_scenario, ScenarioName, ScenarioParams};

/// Simulate nonlocal aggregation-diffusion systems and certify them by duality.
#[derive(Parser)]
#[command(name = "dualflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the forward system of a TOML config, write the run directory and certify it.
    Simulate {
        config: PathBuf,
        /// Overrides `output` of the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the backward problem described by the `[dual]` table of a config.
    Dual {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute the certificate of an existing run directory.
    Certify { run_dir: PathBuf },
    /// Run a preset experiment.
    Scenario {
        name: String,
        /// `key=v1:v2,key2=v`
        #[arg(long, default_value = "")]
        param: String,
        /// Write the full report as JSON here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Distances between two snapshot files.
    Metrics { file_a: PathBuf, file_b: PathBuf },
}

/// Certificates held or nothing was certified.
const OK: u8 = 0;
const SOLVER_ERROR: u8 = 1;
const CERTIFICATE_FAILED: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(SOLVER_ERROR)
        }
    }
}

fn verdict(passed: bool) -> u8 {
    if passed {
        OK
    } else {
        CERTIFICATE_FAILED
    }
}

fn run(command: Command) -> dualflow::Result<u8> {
    match command {
        Command::Simulate { config, out } => {
            let (cfg, text) = RunConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.clone());
            let sim = run_simulation(&cfg)?;
            let summary = write_run(&dir, &text, &cfg, &sim)?;
            for (i, l) in summary.ledgers.iter().enumerate() {
                println!(
                    "species {i}: mass {:.12} -> {:.12}, boundary loss {:.3e}",
                    l.initial, l.final_mass, l.boundary_loss
                );
            }
            println!("{} steps, {} nodes written to {}", summary.steps, summary.nodes, dir.display());
            certify_dir(&dir, &cfg, &sim.trajectory)
        }
        Command::Dual { config, out } => {
            let (cfg, _) = RunConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.join("dual"));
            let sol = run_dual(&cfg)?;
            write_dual(&dir, &sol)?;
            let last = sol.history.last().expect("dual history is never empty");
            println!(
                "psi_T: min {:.6}, max {:.6}, Lipschitz {:.6} (psi_0 {:.6}); written to {}",
                last.min,
                last.max,
                last.lip,
                sol.history[0].lip,
                dir.display()
            );
            Ok(OK)
        }
        Command::Certify { run_dir } => {
            let (cfg, _) = RunConfig::load(&run_dir.join("config.toml"))?;
            let traj = load_trajectory(&run_dir)?;
            certify_dir(&run_dir, &cfg, &traj)
        }
        Command::Scenario { name, param, json } => {
            let name = ScenarioName::parse(&name)?;
            let params = ScenarioParams::parse(&param)?;
            let outcome = run_scenario(name, &params)?;
            print!("{}", outcome.report());
            if let Some(path) = json {
                write_json(&path, &outcome)?;
            }
            println!("{name}: {}", if outcome.passed() { "PASS" } else { "FAIL" });
            Ok(verdict(outcome.passed()))
        }
        Command::Metrics { file_a, file_b } => {
            let a = read_measure_csv(&file_a)?;
            let b = read_measure_csv(&file_b)?;
            println!("{}", serde_json::to_string_pretty(&metric_report(&a, &b)?)?);
            Ok(OK)
        }
    }
}

fn certify_dir(dir: &Path, cfg: &RunConfig, traj: &dualflow::Trajectory) -> dualflow::Result<u8> {
    let cert = certify_run(cfg, traj)?;
    write_certificate(dir, &cert)?;
    print!("{}", certificate_report(&cert));
    Ok(verdict(cert.passed))
}
