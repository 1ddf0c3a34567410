use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kslab::bessel::{expected_mean, simulate_bessel_strided, zero_hitting_fraction, BesselConfig, MIN_HITTING_REPLICAS};
use kslab::diagnostics::dimension_table;
use kslab::seeding::ReplicaSeed;
use kslab::stats::{mean, std_err};
use kslab_harness::config::load_run_config;
use kslab_harness::persist::write_json;
use kslab_harness::run::execute;
use kslab_harness::sweep::{load_sweep_spec, run_sweep};
use kslab_harness::verify::{verify, VerifyOptions};
use kslab_harness::HarnessError;
use serde_json::json;

#[derive(Parser)]
#[command(name = "kslab", version, about = "Keller-Segel particle simulations and checks")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate all replicas of one config and write a run directory.
    Run {
        config: PathBuf,
        /// Override a config key, e.g. `--set sim.theta=1.5`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Run every cell of a (theta, N) grid and aggregate.
    Sweep {
        spec: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Check integrity and evaluate acceptance criteria for runs under DIR.
    Verify {
        dir: PathBuf,
        /// Skip the criteria that do not depend on the runs.
        #[arg(long)]
        runs_only: bool,
        /// Replicas re-simulated per run for the determinism check.
        #[arg(long, default_value_t = 2)]
        replay: usize,
    },
    /// Squared Bessel reference: zero-hitting fraction and mean check.
    Bessel {
        #[arg(long)]
        dimension: f64,
        #[arg(long, default_value_t = 1.0)]
        z0: f64,
        #[arg(long, default_value_t = 5.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1e-4)]
        dt: f64,
        #[arg(long, default_value_t = 500)]
        replicas: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the summary as JSON here as well.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the squared Bessel dimensions of every cluster size.
    Table {
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        n: usize,
    },
}

fn bessel(cfg: BesselConfig, replicas: usize, seed: u64, out: Option<PathBuf>) -> Result<(), HarnessError> {
    cfg.validate().map_err(|e| HarnessError::Validation(e.to_string()))?;
    if replicas < MIN_HITTING_REPLICAS {
        return Err(HarnessError::Validation(format!("need at least {MIN_HITTING_REPLICAS} replicas")));
    }
    let reflecting = BesselConfig { absorb_at_zero: false, ..cfg };
    let hit = zero_hitting_fraction(&BesselConfig { absorb_at_zero: true, ..cfg }, replicas, seed, 0)
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let steps = reflecting.steps().max(1);
    let finals: Vec<f64> = (0..replicas as u64)
        .map(|i| {
            let p = simulate_bessel_strided(&reflecting, steps, &mut ReplicaSeed::derive(seed, 1, i).dynamics_rng()).unwrap();
            *p.values.last().unwrap()
        })
        .collect();
    let summary = json!({
        "config": cfg,
        "replicas": replicas,
        "hit_fraction": hit.fraction,
        "hits": hit.hits,
        "threshold": hit.threshold,
        "mean_at_horizon": mean(&finals),
        "mean_stderr": std_err(&finals),
        "expected_mean": expected_mean(cfg.z0, cfg.dimension, cfg.horizon),
    });
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    if let Some(p) = out {
        write_json(&p, &summary)?;
    }
    Ok(())
}

fn table(theta: f64, n: usize) -> Result<(), HarnessError> {
    let t = dimension_table(theta, n).map_err(|e| HarnessError::Validation(e.to_string()))?;
    println!("k,dimension,below_two");
    for (k, d) in &t.dims {
        println!("{k},{d},{}", (*d < 2.0) as u8);
    }
    if let Some(k2) = t.k2 {
        println!("# k2 = {k2}");
    }
    Ok(())
}

fn dispatch(cmd: Cmd) -> Result<bool, HarnessError> {
    match cmd {
        Cmd::Run { config, sets } => {
            let cfg = load_run_config(&config, &sets)?;
            let out = execute(&cfg)?;
            println!("{}", out.dir.display());
            println!("{}", serde_json::to_string_pretty(&out.report).unwrap());
        }
        Cmd::Sweep { spec, sets } => {
            let spec = load_sweep_spec(&spec, &sets)?;
            let s = run_sweep(&spec)?;
            for c in &s.cells {
                match &c.error {
                    None => println!("ok     {}", c.name),
                    Some(e) => println!("FAILED {}: {e}", c.name),
                }
            }
            for e in &s.explosion {
                println!("theta = {}: explosion medians {:?}", e.theta, e.summary.rows.iter().map(|r| (r.n, r.median)).collect::<Vec<_>>());
            }
            if s.partial {
                log::warn!("sweep is partial: {} of {} cells failed", s.cells.iter().filter(|c| c.error.is_some()).count(), s.cells.len());
            }
            println!("{}", spec.sweep_dir().display());
        }
        Cmd::Verify { dir, runs_only, replay } => {
            let r = verify(&dir, VerifyOptions { standalone: !runs_only, replay })?;
            for run in &r.runs {
                for issue in &run.issues {
                    println!("{}: {issue}", run.dir);
                }
            }
            for c in &r.criteria {
                println!("{}", c.line());
            }
            println!("{}", if r.passed { "verification passed" } else { "verification FAILED" });
            return Ok(r.passed);
        }
        Cmd::Bessel { dimension, z0, horizon, dt, replicas, seed, out } => {
            bessel(BesselConfig { dimension, z0, horizon, dt, absorb_at_zero: true }, replicas, seed, out)?;
        }
        Cmd::Table { theta, n } => table(theta, n)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
