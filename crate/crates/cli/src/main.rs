//! `netctl`: generate networks, compute optimal transfers and run the
//! length/radius experiments from the command line.
//!
//! Exit status: 0 on success, 2 for usage or configuration errors (nothing is
//! written), 3 when the computation fails numerically or some tasks of a sweep
//! failed. The manifest records which.

mod commands;
mod config;
mod output;

use std::path::Path;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde::Serialize;

use commands::*;
use config::{resolve, Failure};
use output::{write_atomic, Manifest, OutputRecord, Status};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "netctl", version, about = "Optimal-control trajectory experiments on random networks")]
struct Cli {
    /// Maximum number of worker threads (default: all available cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    verb: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    GenSystem(GenSystemArgs),
    Trajectory(TrajectoryArgs),
    SweepDelta(SweepDeltaArgs),
    SweepX0(SweepX0Args),
    SweepTime(SweepTimeArgs),
    DirectionScan(DirectionScanArgs),
    Distribution(DistributionArgs),
    OracleCheck(OracleCheckArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let pool = match cli.workers {
        Some(0) => {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        Some(k) => rayon::ThreadPoolBuilder::new().num_threads(k).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::FAILURE;
        }
    };
    let workers = cli.workers;
    pool.install(|| match &cli.verb {
        Command::GenSystem(a) => dispatch::<GenSystem>(&a.common, a, workers),
        Command::Trajectory(a) => dispatch::<TrajectoryVerb>(&a.common, a, workers),
        Command::SweepDelta(a) => dispatch::<SweepDelta>(&a.common, a, workers),
        Command::SweepX0(a) => dispatch::<SweepX0>(&a.common, a, workers),
        Command::SweepTime(a) => dispatch::<SweepTime>(&a.common, a, workers),
        Command::DirectionScan(a) => dispatch::<DirectionScanVerb>(&a.common, a, workers),
        Command::Distribution(a) => dispatch::<Distribution>(&a.common, a, workers),
        Command::OracleCheck(a) => dispatch::<OracleCheck>(&a.common, a, workers),
    })
}

fn dispatch<V: Verb>(common: &ConfigArg, args: &impl Serialize, workers: Option<usize>) -> ExitCode {
    let flags = serde_json::to_value(args).expect("argument structs serialize");
    let resolved = match resolve::<V::Params>(common.config.as_deref(), flags) {
        Ok(r) => r,
        Err(Failure::Config(msg) | Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let manifest_path = V::manifest_path(&resolved.params);
    let mut manifest = Manifest::new(V::NAME, &resolved, workers);

    let products = match V::run(&resolved.params) {
        Ok(p) => p,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            manifest.status = Status::Failed;
            manifest.error = Some(msg);
            if let Err(e) = write_manifest(&manifest_path, &manifest) {
                eprintln!("error: {e:#}");
            }
            return ExitCode::from(EXIT_NUMERICAL);
        }
    };

    match write_products(&manifest_path, &mut manifest, products) {
        Ok(()) if manifest.status == Status::Ok => ExitCode::SUCCESS,
        Ok(()) => {
            eprintln!(
                "{} task(s) failed; see {}",
                manifest.failures.len(),
                manifest_path.display()
            );
            ExitCode::from(EXIT_NUMERICAL)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn write_products(manifest_path: &Path, manifest: &mut Manifest, products: output::Products) -> anyhow::Result<()> {
    for (path, bytes) in &products.files {
        write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))?;
        manifest.outputs.push(OutputRecord {
            path: path.clone(),
            sha256: output::sha256_hex(bytes),
            bytes: bytes.len(),
        });
    }
    if !products.failures.is_empty() {
        manifest.status = Status::Partial;
    }
    manifest.failures = products.failures;
    write_manifest(manifest_path, manifest)
}

fn write_manifest(path: &Path, manifest: &Manifest) -> anyhow::Result<()> {
    write_atomic(path, &output::json_bytes(manifest)).with_context(|| format!("writing {}", path.display()))
}
