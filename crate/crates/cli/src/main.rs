use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shf_lab::{run_file, CliError, Pipeline, RunOptions};

#[derive(Parser)]
#[command(name = "shf-lab", version, about = "Spacetime-harmonic function lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.directory`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads. One thread gives bit-identical reports.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Multiplies every check tolerance.
    #[arg(long, global = true, value_name = "X")]
    tolerance_scale: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Dirichlet solve with the configured or asymptotic boundary values.
    Solve,
    /// Fixed point of the boundary constants on excised boxes.
    Tune,
    /// Integral inequality for the asymptotically normalized solution.
    VerifyIdentity,
    /// Mass-aspect, flux and lower-bound energy estimates.
    Energy,
    /// Penrose-type bound when the inner torus is minimal and k = -g.
    Penrose,
    /// Upper and lower barriers in the asymptotic end.
    Barriers,
    /// Equality-case diagnostics along the level sets.
    Rigidity,
    /// Exact-jet checks on the pp-wave data.
    PpwaveAudit,
    /// Convergence study over dyadic refinements.
    Refine,
}

impl From<Command> for Pipeline {
    fn from(c: Command) -> Self {
        match c {
            Command::Solve => Pipeline::Solve,
            Command::Tune => Pipeline::Tune,
            Command::VerifyIdentity => Pipeline::VerifyIdentity,
            Command::Energy => Pipeline::Energy,
            Command::Penrose => Pipeline::Penrose,
            Command::Barriers => Pipeline::Barriers,
            Command::Rigidity => Pipeline::Rigidity,
            Command::PpwaveAudit => Pipeline::PpwaveAudit,
            Command::Refine => Pipeline::Refine,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let Some(config) = cli.config else {
        eprintln!("error: {}", CliError::config("--config", "a scenario file is required"));
        return ExitCode::from(3);
    };
    let opts = RunOptions { out: cli.out, threads: cli.threads, tolerance_scale: cli.tolerance_scale };
    match run_file(cli.command.into(), &config, &opts) {
        Ok(outcome) => {
            for c in &outcome.report.checks {
                println!(
                    "{} {:<36} value {:>12.4e}  tolerance {:>12.4e}  margin {:>12.4e}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.tolerance,
                    c.margin
                );
            }
            println!("report written to {}", outcome.out_dir.join(shf_lab::pipelines::REPORT_JSON).display());
            if outcome.report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
