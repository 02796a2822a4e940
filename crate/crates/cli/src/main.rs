use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use meterguard_cli::{
    cmd_bill, cmd_bounds, cmd_codebook, cmd_oracle, cmd_simulate, CliError, GridSpec, Result,
    RunConfig, Trace,
};
use meterguard_core::SolverOptions;

#[derive(Parser)]
#[command(
    name = "meterguard",
    version,
    about = "Smart-meter privacy with a battery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the privacy-cost bounds over a budget grid (CSV).
    Bounds(Common),
    /// Run the covering policy on a consumption trace (CSV + JSON summary).
    Simulate(Common),
    /// Bill-optimal requests for a consumption trace (CSV + JSON summary).
    Bill(Common),
    /// Exact leakage bracket on a tiny instance.
    Oracle(Common),
    /// Dump the covering codebook (JSON).
    Codebook(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    trace: Option<PathBuf>,
    /// `linear:25`, or a comma list of budgets, `max` and `inf`.
    #[arg(long)]
    delta_grid: Option<GridSpec>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = SolverOptions::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = SolverOptions::default().tol)]
    tol: f64,
}

impl Common {
    fn trace(&self, rc: &RunConfig) -> Result<Trace> {
        let path = self
            .trace
            .as_ref()
            .or(rc.io.trace.as_ref())
            .ok_or_else(|| CliError::Config("no trace given (--trace or io.trace)".into()))?;
        Trace::load(path)
    }

    fn out(&self, rc: &RunConfig) -> Option<PathBuf> {
        self.out.clone().or_else(|| rc.io.out.clone())
    }
}

/// The artifact goes to `--out` or stdout; the summary goes to stdout when
/// the artifact has a file, stderr otherwise.
fn emit(out: Option<&Path>, artifact: &str, summary: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, artifact).map_err(|source| CliError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            print!("{summary}");
        }
        None => {
            print!("{artifact}");
            eprint!("{summary}");
        }
    }
    let _ = std::io::stdout().flush();
    Ok(())
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn run(cli: Cli) -> Result<()> {
    let (Command::Bounds(c)
    | Command::Simulate(c)
    | Command::Bill(c)
    | Command::Oracle(c)
    | Command::Codebook(c)) = &cli.command;
    let rc = RunConfig::load(&c.config)?;
    let out = c.out(&rc);
    let opts = SolverOptions {
        tol: c.tol,
        seed: c.seed,
        ..SolverOptions::default()
    };
    match &cli.command {
        Command::Bounds(_) => {
            let grid = c.delta_grid.clone().unwrap_or_default();
            let run = cmd_bounds(&rc, &grid, &opts)?;
            emit(out.as_deref(), &run.to_csv(), &run.summary())?;
            let failed = run.failures();
            if failed > 0 {
                return Err(CliError::SolverFailures {
                    rows: failed,
                    total: run.rows.len(),
                });
            }
        }
        Command::Simulate(_) => {
            let sim = cmd_simulate(&rc, &c.trace(&rc)?)?;
            emit(out.as_deref(), &sim.to_csv(), &json(&sim.summary))?;
        }
        Command::Bill(_) => {
            let report = cmd_bill(&rc, &c.trace(&rc)?)?;
            let summary = format!(
                "bill: {}\nbill without battery: {}\nsavings: {}\ndelta headroom: {}\n",
                report.bill, report.bill_without_battery, report.savings, report.delta_headroom
            );
            emit(out.as_deref(), &report.to_csv(), &summary)?;
        }
        Command::Oracle(_) => {
            let slack = c.tol.max(1e-9);
            let report = cmd_oracle(&rc, c.delta_grid.as_ref(), 4, slack)?;
            emit(out.as_deref(), &json(&report), &report.summary())?;
        }
        Command::Codebook(_) => {
            let dump = cmd_codebook(&rc)?;
            let summary = format!("kappa = {}, log2 |V| = {}\n", dump.kappa, dump.log2_size);
            emit(out.as_deref(), &json(&dump), &summary)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
