use clap::{Parser, Subcommand};
use plap_core::experiments::acceptance::{run_criterion, CRITERIA};
use plap_core::experiments::config::Scenario;
use plap_core::experiments::output::{self, read_trace_series};
use plap_core::experiments::query::{bound_query, lorentz_query, BoundQuery, LorentzQuery};
use plap_core::experiments::run::{curves_csv, run_to_dir};
use plap_core::experiments::sweep::{sweep, write_sweep};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Simulations, bounds and checks for p-Laplacian evolution problems with
/// singular drift.
#[derive(Parser)]
#[command(name = "plap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write trace.csv, bounds.csv and report.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the scenario's [sweep] table; writes results.csv and results.jsonl.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: the scenario's `jobs`, else all cores).
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Lorentz norm and distance to L^∞ of a catalog field on a grid.
    Lorentz {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare a recorded trace (trace.csv or gnuplot data) with the decay bounds.
    Bound {
        /// Trace file with `t` and `l2_sq` columns.
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        /// Rate constant M; fitted to the trace when omitted.
        #[arg(long)]
        m: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        c0: f64,
        /// Constant forcing level g.
        #[arg(long, default_value_t = 0.0)]
        g: f64,
        /// Writes bounds.csv here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance suite (all criteria, or those listed).
    Check {
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
        #[arg(long, default_value_t = 20_240_601)]
        seed: u64,
        /// Writes acceptance.jsonl here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(config: &Path, seed: Option<u64>) -> plap_core::Result<Scenario> {
    let mut s = Scenario::load(config)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    Ok(s)
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(cmd: Command) -> plap_core::Result<bool> {
    match cmd {
        Command::Simulate { config, out, seed } => {
            let s = load(&config, seed)?;
            let res = run_to_dir(&s, &out)?;
            for c in &res.report.checks {
                println!("{:<16} {:?}  {}", c.name, c.status, c.detail);
            }
            println!("artifacts in {}", out.display());
            Ok(res.report.all_passed)
        }
        Command::Sweep {
            config,
            out,
            jobs,
            seed,
        } => {
            let s = load(&config, seed)?;
            let res = sweep(&s, jobs)?;
            write_sweep(&out, &s, &res)?;
            let failed = res.rows.iter().filter(|r| !r.ok).count();
            println!("{} points ({failed} failed), results in {}", res.rows.len(), out.display());
            Ok(failed == 0)
        }
        Command::Lorentz { config } => {
            let q = LorentzQuery::load(&config)?;
            print!("{}", output::to_json_pretty(&lorentz_query(&q)?)?);
            Ok(true)
        }
        Command::Bound {
            trace,
            p,
            dim,
            m,
            c0,
            g,
            out,
        } => {
            let (t, y) = read_trace_series(&std::fs::read_to_string(&trace)?)?;
            let a = bound_query(&t, &y, &BoundQuery { p, dim, m, c0, g })?;
            let table = curves_csv(&t, &y, &a.curves);
            match out {
                Some(dir) => {
                    output::write(&dir.join("bounds.csv"), &table)?;
                    output::write(&dir.join("bound_report.json"), &output::to_json_pretty(&a)?)?;
                }
                None => print!("{table}"),
            }
            eprint!("{}", output::to_json_pretty(&a)?);
            Ok(a.passed)
        }
        Command::Check { only, seed, out } => {
            let ids: Vec<usize> = if only.is_empty() { (1..=CRITERIA).collect() } else { only };
            let mut all = true;
            let mut lines = String::new();
            for id in ids {
                let o = run_criterion(id, seed)?;
                println!("{o}");
                all &= o.passed;
                lines.push_str(&output::to_json_line(&o)?);
            }
            if let Some(dir) = out {
                output::write(&dir.join("acceptance.jsonl"), &lines)?;
            }
            Ok(all)
        }
    }
}
