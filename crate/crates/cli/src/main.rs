//! `superburst` command-line driver.

mod overrides;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::Value;
use superburst_core::config::RunConfig;
use superburst_core::couplings::coupling_matrices;
use superburst_core::ensemble::{self, EnsembleOptions, SweepAxis};
use superburst_core::{lattice, output, Error};

use overrides::Overrides;

#[derive(Parser, Debug)]
#[command(name = "superburst", version, about = "Superradiant bursts in atomic arrays via cumulant expansions")]
struct Cli {
    /// Worker threads (falls back to SUPERBURST_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// JSON config file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one config (ensemble-averaged when it is random).
    Run {
        #[command(flatten)]
        common: Common,
        /// Also write the coupling matrices to couplings.csv.
        #[arg(long)]
        dump_couplings: bool,
        /// Stop at the first failing sample.
        #[arg(long)]
        fail_fast: bool,
    },
    /// Cartesian parameter sweep, e.g. `--axis N=8,16,32 --axis a=0.1:0.5:0.1`.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long = "axis", required = true)]
        axes: Vec<String>,
        #[arg(long)]
        fail_fast: bool,
    },
    /// Analytic burst criteria of the configured lattice (no integration).
    Criteria {
        #[command(flatten)]
        common: Common,
    },
    /// Print the coupling matrices as CSV.
    Couplings {
        #[command(flatten)]
        common: Common,
        /// Write to this file instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Exact benchmark run with quantum trajectories or the density matrix.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Number of MCWF trajectories.
        #[arg(long, conflicts_with = "lindblad")]
        mcwf: Option<usize>,
        /// Dense Lindblad integration instead of trajectories.
        #[arg(long)]
        lindblad: bool,
    },
}

fn load(common: &Common, patch: impl FnOnce(&mut Value)) -> anyhow::Result<RunConfig> {
    let mut value = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| Error::Config { pointer: String::new(), message: e.to_string() })?
        }
        None => Value::Object(Default::default()),
    };
    common.overrides.apply(&mut value);
    patch(&mut value);
    Ok(RunConfig::from_value(value)?)
}

fn print_summary(rows: &[output::SummaryRow]) {
    print!("{}", output::summary_csv(rows));
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { common, dump_couplings, fail_fast } => {
            let cfg = load(&common, |_| {})?;
            let dir = cfg.output_dir.clone();
            let result = ensemble::run_ensemble(&cfg, EnsembleOptions { fail_fast })?;
            let bundle = output::write_run(&result, &dir)?;
            if dump_couplings {
                let g = &cfg.geometry;
                let c = coupling_matrices(&lattice::build(g.kind, g.n, g.a)?, cfg.dipole)?;
                let mut buf = Vec::new();
                c.write_csv(&mut buf)?;
                output::write_atomic(&dir.join("couplings.csv"), &buf)?;
            }
            print_summary(&[result.summary_row(None)]);
            log::info!("wrote {}", bundle.timeseries.display());
        }
        Command::Sweep { common, axes, fail_fast } => {
            let cfg = load(&common, |_| {})?;
            let axes = axes.iter().map(|a| a.parse::<SweepAxis>()).collect::<Result<Vec<_>, _>>()?;
            let sweep = ensemble::run_sweep(&cfg, &axes, EnsembleOptions { fail_fast })?;
            output::write_sweep(&sweep, &cfg, &cfg.output_dir)?;
            print_summary(&sweep.summary_rows());
        }
        Command::Criteria { common } => {
            let cfg = load(&common, |_| {})?;
            let v = ensemble::criteria(&cfg)?;
            let opt = |x: Option<f64>| x.map(output::fmt_f64).unwrap_or_else(|| "none".into());
            println!("N = {}", cfg.geometry.n);
            println!("gamma_pair_sum = {}", output::fmt_f64(v.gamma_pair_sum));
            println!("gamma_dot0_full = {}", output::fmt_f64(v.gamma_dot0_full));
            println!("gamma_dot0_mode = {}", output::fmt_f64(v.gamma_dot0_mode));
            println!("n_exc_crit = {}", opt(v.n_exc_crit));
            println!("eta_crit = {}", opt(v.eta_crit));
        }
        Command::Couplings { common, output } => {
            let cfg = load(&common, |_| {})?;
            let g = &cfg.geometry;
            let c = coupling_matrices(&lattice::build(g.kind, g.n, g.a)?, cfg.dipole)?;
            let mut buf = Vec::new();
            c.write_csv(&mut buf)?;
            match output {
                Some(p) => output::write_atomic(&p, &buf)?,
                None => std::io::stdout().write_all(&buf)?,
            }
        }
        Command::Oracle { common, mcwf, lindblad } => {
            if mcwf.is_none() && !lindblad {
                return Err(Error::InvalidArgument("oracle needs --mcwf N or --lindblad".into()).into());
            }
            let cfg = load(&common, |v| {
                let method = overrides::entry(v, "method");
                method.remove("order");
                match mcwf {
                    Some(n) => {
                        method.insert("kind".into(), "mcwf".into());
                        method.insert("n_traj".into(), n.into());
                    }
                    None => {
                        method.insert("kind".into(), "lindblad".into());
                        method.remove("n_traj");
                    }
                }
            })?;
            let result = ensemble::run_ensemble(&cfg, EnsembleOptions::default())?;
            output::write_run(&result, &cfg.output_dir)?;
            print_summary(&[result.summary_row(None)]);
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numerical() => 2,
        _ => 1,
    }
}

fn init_threads(flag: Option<usize>) -> anyhow::Result<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("SUPERBURST_THREADS") {
            Ok(s) if !s.trim().is_empty() => {
                Some(s.trim().parse().map_err(|_| Error::InvalidArgument(format!("SUPERBURST_THREADS = {s:?} is not a count")))?)
            }
            _ => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::InvalidArgument("thread count must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = init_threads(cli.threads).and_then(|_| execute(cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
