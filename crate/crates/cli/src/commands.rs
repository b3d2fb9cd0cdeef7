//! The verbs: argument structs as parsed by clap, the resolved parameter
//! structs they merge into, and the computation behind each.

use std::path::PathBuf;

use clap::Args;
use nalgebra::DVector;
use netctl_core::harness::io::{write_distribution_csv, write_sweep_csv};
use netctl_core::harness::{
    child_seed, direction_scan, distribution_scan, sample_sphere, sweep_delta, sweep_time, sweep_time_matrix,
    sweep_x0_norm, DistanceMetric, FailureRecord, SweepOptions, SweepResult,
};
use netctl_core::network::{generate_network, select_drivers, shift_spectrum, SystemFile, WeightLaw};
use netctl_core::oracle::{oracle_metrics, oracle_min_energy};
use netctl_core::trajectory::{fmt_float, ControlTask, LengthMode};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{config_error, decade_spaced, load_system, Failure, VectorSpec};
use crate::output::Products;

/// A verb's resolved parameters and its computation.
pub trait Verb {
    const NAME: &'static str;
    type Params: Serialize + DeserializeOwned;

    fn manifest_path(params: &Self::Params) -> PathBuf;

    /// Compute every output in memory. Nothing touches the disk here.
    fn run(params: &Self::Params) -> Result<Products, Failure>;
}

/// Seed streams derived from the master seed.
const STREAM_X0: u64 = 0;
const STREAM_TARGET: u64 = 1;
const STREAM_SWEEP: u64 = 2;

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConfigArg {
    /// JSON file of parameters; flags given on the command line take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn d_out() -> PathBuf {
    PathBuf::from(".")
}
fn d_one() -> usize {
    1
}
fn d_avg_degree() -> f64 {
    4.0
}
fn d_samples() -> usize {
    40
}
fn d_order() -> usize {
    8
}
fn d_ensemble() -> usize {
    100
}
fn d_tf_long() -> f64 {
    1.0
}
fn d_tf_short() -> f64 {
    1e-2
}
fn d_threshold() -> f64 {
    1e-2
}
fn d_per_decade() -> usize {
    10
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    write(&mut buf).expect("writing to memory cannot fail");
    buf
}

fn failure_lines(variable: &str, records: &[FailureRecord]) -> Vec<String> {
    records
        .iter()
        .map(|f| match f.sample {
            Some(k) => format!("{variable}={}, sample {k}: {}", fmt_float(f.value), f.message),
            None => format!("{variable}={}: {}", fmt_float(f.value), f.message),
        })
        .collect()
}

struct SweepKnobs {
    ensemble: usize,
    tf: f64,
    samples: usize,
    quadrature_order: usize,
    length_mode: LengthMode,
    threshold: f64,
    metric: DistanceMetric,
    seed: u64,
}

impl SweepKnobs {
    fn options(&self) -> SweepOptions {
        SweepOptions {
            ensemble: self.ensemble,
            seed: child_seed(self.seed, STREAM_SWEEP),
            tf: self.tf,
            n_samples: self.samples,
            quadrature_order: self.quadrature_order,
            length_mode: self.length_mode,
            threshold: self.threshold,
            metric: self.metric,
        }
    }
}

/// The parts of a sweep worth keeping next to its CSV.
fn sweep_summary(s: &SweepResult) -> serde_json::Value {
    json!({
        "variable": s.variable,
        "grid": s.grid,
        "fits": s.fits,
        "crossover": s.crossover,
        "plateau_alpha": s.plateau_alpha,
        "failures": s.failures.len(),
    })
}

// ---------------------------------------------------------------- gen-system

/// Generate a random network, optionally shift its spectrum, and pick drivers.
#[derive(Debug, Clone, Args, Serialize)]
pub struct GenSystemArgs {
    /// Number of nodes.
    #[arg(long)]
    pub n: Option<usize>,
    /// Mean number of incoming links per node.
    #[arg(long)]
    pub avg_degree: Option<f64>,
    /// uniform01 or standard_normal.
    #[arg(long)]
    pub weight_law: Option<String>,
    /// Shift the diagonal so the largest real eigenvalue part equals this.
    #[arg(long, allow_negative_numbers = true)]
    pub lambda1: Option<f64>,
    /// Number of driver nodes.
    #[arg(long)]
    pub drivers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output system file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: ConfigArg,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSystemParams {
    pub n: usize,
    #[serde(default = "d_avg_degree")]
    pub avg_degree: f64,
    #[serde(default)]
    pub weight_law: WeightLaw,
    #[serde(default)]
    pub lambda1: Option<f64>,
    #[serde(default = "d_one")]
    pub drivers: usize,
    pub seed: u64,
    pub out: PathBuf,
}

pub struct GenSystem;

impl Verb for GenSystem {
    const NAME: &'static str = "gen-system";
    type Params = GenSystemParams;

    fn manifest_path(p: &GenSystemParams) -> PathBuf {
        p.out.with_extension("manifest.json")
    }

    fn run(p: &GenSystemParams) -> Result<Products, Failure> {
        let mut sys = generate_network(p.n, p.avg_degree, p.weight_law, p.seed)?;
        if let Some(target) = p.lambda1 {
            sys = shift_spectrum(&sys, target)?;
        }
        let drivers = select_drivers(&sys, p.drivers, p.seed)?;
        let mut out = Products::default();
        out.add_json(p.out.clone(), &SystemFile::new(sys, &drivers));
        Ok(out)
    }
}

// ---------------------------------------------------------------- trajectory

/// Sample one optimal trajectory and write its states, inputs and summaries.
#[derive(Debug, Clone, Args, Serialize)]
pub struct TrajectoryArgs {
    /// System file written by gen-system.
    #[arg(long)]
    pub system: Option<PathBuf>,
    /// Initial state: zero, random, random:<norm>, or comma-separated values.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Final state, in the same forms as --x0.
    #[arg(long, allow_hyphen_values = true)]
    pub xf: Option<String>,
    /// Draw the final state uniformly on the sphere of this radius around x0.
    #[arg(long)]
    pub xf_random_delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub t0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub tf: Option<f64>,
    /// Number of equispaced samples, endpoints included.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Gauss-Legendre nodes per sample interval for the length integral.
    #[arg(long)]
    pub quadrature_order: Option<usize>,
    /// quadrature or polyline.
    #[arg(long)]
    pub length_mode: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: ConfigArg,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryParams {
    pub system: PathBuf,
    #[serde(default = "VectorSpec::zero")]
    pub x0: VectorSpec,
    #[serde(default)]
    pub xf: Option<VectorSpec>,
    #[serde(default)]
    pub xf_random_delta: Option<f64>,
    #[serde(default)]
    pub t0: f64,
    pub tf: f64,
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default = "d_order")]
    pub quadrature_order: usize,
    #[serde(default)]
    pub length_mode: LengthMode,
    pub seed: u64,
    #[serde(default = "d_out")]
    pub out: PathBuf,
}

pub struct TrajectoryVerb;

impl Verb for TrajectoryVerb {
    const NAME: &'static str = "trajectory";
    type Params = TrajectoryParams;

    fn manifest_path(p: &TrajectoryParams) -> PathBuf {
        p.out.join("trajectory.manifest.json")
    }

    fn run(p: &TrajectoryParams) -> Result<Products, Failure> {
        let (sys, drivers) = load_system(&p.system)?;
        let x0 = p.x0.resolve(sys.n, child_seed(p.seed, STREAM_X0), "x0")?;
        let xf = match (&p.xf, p.xf_random_delta) {
            (Some(_), Some(_)) => return Err(config_error("give either xf or xf_random_delta, not both")),
            (None, None) => return Err(config_error("one of xf or xf_random_delta is required")),
            (Some(spec), None) => spec.resolve(sys.n, child_seed(p.seed, STREAM_TARGET), "xf")?,
            (None, Some(delta)) => sample_sphere(&x0, delta, 1, child_seed(p.seed, STREAM_TARGET))?.remove(0),
        };
        let mut task = ControlTask::new(&sys, &drivers, x0.clone(), xf.clone(), p.t0, p.tf)?
            .with_samples(p.samples)?
            .with_length_mode(p.length_mode);
        task.quadrature_order = p.quadrature_order;
        let traj = task.horizon()?.trajectory(&task.x0, &task.xf, task.length_mode)?;

        let mut sidecar = traj.sidecar_json();
        sidecar["x0"] = json!(x0.as_slice());
        sidecar["xf"] = json!(xf.as_slice());
        sidecar["drivers"] = json!(drivers.driver_nodes);
        let mut out = Products::default();
        out.add(p.out.join("trajectory.csv"), csv_bytes(|w| traj.write_csv(w)));
        out.add_json(p.out.join("trajectory.json"), &sidecar);
        Ok(out)
    }
}

// ---------------------------------------------------------------- sweep-delta

/// Mean length and radius against the transfer distance.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepDeltaArgs {
    #[arg(long)]
    pub system: Option<PathBuf>,
    /// Initial state: zero, random, random:<norm>, or comma-separated values.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    #[arg(long)]
    pub delta_min: Option<f64>,
    #[arg(long)]
    pub delta_max: Option<f64>,
    /// Grid points per decade of distance.
    #[arg(long)]
    pub per_decade: Option<usize>,
    /// Random final states per grid point.
    #[arg(long)]
    pub ensemble: Option<usize>,
    #[arg(long)]
    pub tf: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub quadrature_order: Option<usize>,
    #[arg(long)]
    pub length_mode: Option<String>,
    /// Distance between the curves from x0 and from the origin below which
    /// they count as merged.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// log10 or absolute.
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: ConfigArg,
}

fn d_delta_min() -> f64 {
    1e-5
}
fn d_delta_max() -> f64 {
    1e5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDeltaParams {
    pub system: PathBuf,
    #[serde(default = "VectorSpec::zero")]
    pub x0: VectorSpec,
    #[serde(default = "d_delta_min")]
    pub delta_min: f64,
    #[serde(default = "d_delta_max")]
    pub delta_max: f64,
    #[serde(default = "d_per_decade")]
    pub per_decade: usize,
    #[serde(default = "d_ensemble")]
    pub ensemble: usize,
    #[serde(default = "d_tf_long")]
    pub tf: f64,
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default = "d_order")]
    pub quadrature_order: usize,
    #[serde(default)]
    pub length_mode: LengthMode,
    #[serde(default = "d_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub metric: DistanceMetric,
    pub seed: u64,
    #[serde(default = "d_out")]
    pub out: PathBuf,
}

pub struct SweepDelta;

impl Verb for SweepDelta {
    const NAME: &'static str = "sweep-delta";
    type Params = SweepDeltaParams;

    fn manifest_path(p: &SweepDeltaParams) -> PathBuf {
        p.out.join("sweep_delta.manifest.json")
    }

    fn run(p: &SweepDeltaParams) -> Result<Products, Failure> {
        let (sys, drivers) = load_system(&p.system)?;
        let x0 = p.x0.resolve(sys.n, child_seed(p.seed, STREAM_X0), "x0")?;
        let grid = decade_spaced(p.delta_min, p.delta_max, p.per_decade, "delta")?;
        let opts = SweepKnobs {
            ensemble: p.ensemble,
            tf: p.tf,
            samples: p.samples,
            quadrature_order: p.quadrature_order,
            length_mode: p.length_mode,
            threshold: p.threshold,
            metric: p.metric,
            seed: p.seed,
        }
        .options();
        let s = sweep_delta(sys.matrix(), drivers.matrix(), &x0, &grid, &opts)?;

        let mut summary = sweep_summary(&s);
        summary["x0"] = json!(x0.as_slice());
        summary["drivers"] = json!(drivers.driver_nodes);
        let mut out = Products::default();
        out.failures = failure_lines("delta", &s.failures);
        out.add(p.out.join("sweep_delta.csv"), csv_bytes(|w| write_sweep_csv(&s, w)));
        out.add_json(p.out.join("sweep_delta.json"), &summary);
        Ok(out)
    }
}

// ---------------------------------------------------------------- sweep-x0

/// Crossover distance and plateau constants against the initial-state norm.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepX0Args {
    #[arg(long)]
    pub system: Option<PathBuf>,
    /// Direction of the initial state: random or comma-separated values.
    #[arg(long, allow_hyphen_values = true)]
    pub direction: Option<String>,
    /// Initial-state norms, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub norms: Option<Vec<f64>>,
    #[arg(long)]
    pub delta_min: Option<f64>,
    #[arg(long)]
    pub delta_max: Option<f64>,
    #[arg(long)]
    pub per_decade: Option<usize>,
    #[arg(long)]
    pub ensemble: Option<usize>,
    #[arg(long)]
    pub tf: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub quadrature_order: Option<usize>,
    #[arg(long)]
    pub length_mode: Option<String>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: ConfigArg,
}

fn d_norms() -> Vec<f64> {
    vec![1e-2, 1e-1, 1.0, 1e1, 1e2]
}
fn d_x0_delta_min() -> f64 {
    1e-7
}
fn d_x0_delta_max() -> f64 {
    1e7
}
fn d_x0_per_decade() -> usize {
    2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepX0Params {
    pub system: PathBuf,
    #[serde(default = "VectorSpec::random")]
    pub direction: VectorSpec,
    #[serde(default = "d_norms")]
    pub norms: Vec<f64>,
    #[serde(default = "d_x0_delta_min")]
    pub delta_min: f64,
    #[serde(default = "d_x0_delta_max")]
    pub delta_max: f64,
    #[serde(default = "d_x0_per_decade")]
    pub per_decade: usize,
    #[serde(default = "d_ensemble")]
    pub ensemble: usize,
    #[serde(default = "d_tf_long")]
    pub tf: f64,
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default = "d_order")]
    pub quadrature_order: usize,
    #[serde(default)]
    pub length_mode: LengthMode,
    #[serde(default = "d_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub metric: DistanceMetric,
    pub seed: u64,
    #[serde(default = "d_out")]
    pub out: PathBuf,
}

pub struct SweepX0;

impl Verb for SweepX0 {
    const NAME: &'static str = "sweep-x0";
    type Params = SweepX0Params;

    fn manifest_path(p: &SweepX0Params) -> PathBuf {
        p.out.join("sweep_x0.manifest.json")
    }

    fn run(p: &SweepX0Params) -> Result<Products, Failure> {
        let (sys, drivers) = load_system(&p.system)?;
        let direction = p.direction.resolve(sys.n, child_seed(p.seed, STREAM_X0), "direction")?;
        let grid = decade_spaced(p.delta_min, p.delta_max, p.per_decade, "delta")?;
        let opts = SweepKnobs {
            ensemble: p.ensemble,
            tf: p.tf,
            samples: p.samples,
            quadrature_order: p.quadrature_order,
            length_mode: p.length_mode,
            threshold: p.threshold,
            metric: p.metric,
            seed: p.seed,
        }
        .options();
        let ns = sweep_x0_norm(sys.matrix(), drivers.matrix(), &direction, &p.norms, &grid, &opts)?;

        let mut out = Products::default();
        out.failures = failure_lines("x0_norm", &ns.summary.failures);
        out.add(p.out.join("sweep_x0.csv"), csv_bytes(|w| write_sweep_csv(&ns.summary, w)));
        let mut per_norm = Vec::new();
        for (i, (norm, s)) in p.norms.iter().zip(&ns.per_norm).enumerate() {
            let file = format!("sweep_x0.norm{i}.csv");
            out.failures
                .extend(failure_lines(&format!("x0_norm={}, delta", fmt_float(*norm)), &s.failures));
            out.add(p.out.join(&file), csv_bytes(|w| write_sweep_csv(s, w)));
            let mut entry = sweep_summary(s);
            entry["x0_norm"] = json!(norm);
            entry["file"] = json!(file);
            per_norm.push(entry);
        }
        let summary = json!({
            "direction": direction.as_slice(),
            "drivers": drivers.driver_nodes,
            "norms": p.norms,
            "delta_star": ns.delta_star,
            "fits": ns.summary.fits,
            "per_norm": per_norm,
        });
        out.add_json(p.out.join("sweep_x0.json"), &summary);
        Ok(out)
    }
}

// ---------------------------------------------------------------- sweep-time

/// Mean length and radius against the control horizon, optionally across
/// spectral shifts and driver counts.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepTimeArgs {
    #[arg(long)]
    pub system: Option<PathBuf>,
    /// Initial state (single-system mode only).
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Transfer distance.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub tf_min: Option<f64>,
    #[arg(long)]
    pub tf_max: Option<f64>,
    #[arg(long)]
    pub per_decade: Option<usize>,
    /// Target largest eigenvalue real parts, comma-separated; enables the
    /// stability-class matrix.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lambdas: Option<Vec<f64>>,
    /// Driver counts, comma-separated; enables the matrix mode.
    #[arg(long, value_delimiter = ',')]
    pub driver_counts: Option<Vec<usize>>,
    #[arg(long)]
    pub ensemble: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub quadrature_order: Option<usize>,
    #[arg(long)]
    pub length_mode: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: ConfigArg,
}

fn d_time_delta() -> f64 {
    1e-3
}
fn d_tf_min() -> f64 {
    1e-2
}
fn d_tf_max() -> f64 {
    1e2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepTimeParams {
    pub system: PathBuf,
    #[serde(default = "VectorSpec::zero")]
    pub x0: VectorSpec,
    #[serde(default = "d_time_delta")]
    pub delta: f64,
    #[serde(default = "d_tf_min")]
    pub tf_min: f64,
    #[serde(default = "d_tf_max")]
    pub tf_max: f64,
    #[serde(default = "d_per_decade")]
    pub per_decade: usize,
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default)]
    pub driver_counts: Option<Vec<usize>>,
    #[serde(default = "d_ensemble")]
    pub ensemble: usize,
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default = "d_order")]
    pub quadrature_order: usize,
    #[serde(default)]
    pub length_mode: LengthMode,
    pub seed: u64,
    #[serde(default = "d_out")]
    pub out: PathBuf,
}

pub struct SweepTime;

impl Verb for SweepTime {
    const NAME: &'static str = "sweep-time";
    type Params = SweepTimeParams;

    fn manifest_path(p: &SweepTimeParams) -> PathBuf {
        p.out.join("sweep_time.manifest.json")
    }

    fn run(p: &SweepTimeParams) -> Result<Products, Failure> {
        let (sys, drivers) = load_system(&p.system)?;
        let grid = decade_spaced(p.tf_min, p.tf_max, p.per_decade, "tf")?;
        let opts = SweepKnobs {
            ensemble: p.ensemble,
            tf: p.tf_min,
            samples: p.samples,
            quadrature_order: p.quadrature_order,
            length_mode: p.length_mode,
            threshold: d_threshold(),
            metric: DistanceMetric::default(),
            seed: p.seed,
        }
        .options();
        let mut out = Products::default();

        if p.lambdas.is_none() && p.driver_counts.is_none() {
            let x0 = p.x0.resolve(sys.n, child_seed(p.seed, STREAM_X0), "x0")?;
            let s = sweep_time(sys.matrix(), drivers.matrix(), &x0, p.delta, &grid, &opts)?;
            let regimes = netctl_core::harness::TimeRegimes::from_sweep(&s);
            out.failures = failure_lines("tf", &s.failures);
            out.add(p.out.join("sweep_time.csv"), csv_bytes(|w| write_sweep_csv(&s, w)));
            let mut summary = sweep_summary(&s);
            summary["lambda1"] = json!(sys.lambda1);
            summary["drivers"] = json!(drivers.driver_nodes);
            summary["regimes"] = json!(regimes);
            out.add_json(p.out.join("sweep_time.json"), &summary);
            return Ok(out);
        }

        if p.x0.resolve(sys.n, 0, "x0")?.norm() != 0.0 {
            return Err(config_error("the lambda/driver-count matrix runs from the origin; drop x0"));
        }
        let lambdas = p.lambdas.clone().unwrap_or_else(|| vec![sys.lambda1]);
        let counts = p.driver_counts.clone().unwrap_or_else(|| vec![drivers.driver_nodes.len()]);
        let cells = sweep_time_matrix(&sys, &lambdas, &counts, p.delta, &grid, p.seed, &opts)?;
        let mut summary = Vec::new();
        for (i, cell) in cells.iter().enumerate() {
            let file = format!("sweep_time.cell{i}.csv");
            let label = format!("lambda1={}, drivers={}, tf", fmt_float(cell.lambda1), cell.drivers.len());
            out.failures.extend(failure_lines(&label, &cell.sweep.failures));
            out.add(p.out.join(&file), csv_bytes(|w| write_sweep_csv(&cell.sweep, w)));
            let mut entry = sweep_summary(&cell.sweep);
            entry["lambda1"] = json!(cell.lambda1);
            entry["drivers"] = json!(cell.drivers);
            entry["regimes"] = json!(cell.regimes);
            entry["file"] = json!(file);
            summary.push(entry);
        }
        out.add_json(p.out.join("sweep_time.json"), &json!({ "cells": summary }));
        Ok(out)
    }
}

// ---------------------------------------------------------------- direction-scan

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    #[default]
    Log,
}

/// Length and radius for final states x0 ± δ·v along one direction.
#[derive(Debug, Clone, Args, Serialize)]
pub struct DirectionScanArgs {
    #[arg(long)]
    pub system: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Scan direction: random or comma-separated values.
    #[arg(long, allow_hyphen_values = true)]
    pub direction: Option<String>,
    #[arg(long)]
    pub delta_min: Option<f64>,
    #[arg(long)]
    pub delta_max: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    pub points: Option<usize>,
    /// linear or log.
    #[arg(long)]
    pub spacing: Option<String>,
    #[arg(long)]
    pub tf: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub quadrature_order: Option<usize>,
    #[arg(long)]
    pub length_mode: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: ConfigArg,
}

fn d_scan_x0() -> VectorSpec {
    VectorSpec::Text("random:1".into())
}
fn d_scan_min() -> f64 {
    1e-6
}
fn d_scan_max() -> f64 {
    1e-1
}
fn d_points() -> usize {
    41
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionScanParams {
    pub system: PathBuf,
    #[serde(default = "d_scan_x0")]
    pub x0: VectorSpec,
    #[serde(default = "VectorSpec::random")]
    pub direction: VectorSpec,
    #[serde(default = "d_scan_min")]
    pub delta_min: f64,
    #[serde(default = "d_scan_max")]
    pub delta_max: f64,
    #[serde(default = "d_points")]
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
    #[serde(default = "d_tf_short")]
    pub tf: f64,
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default = "d_order")]
    pub quadrature_order: usize,
    #[serde(default)]
    pub length_mode: LengthMode,
    pub seed: u64,
    #[serde(default = "d_out")]
    pub out: PathBuf,
}

fn spaced(min: f64, max: f64, points: usize, spacing: Spacing) -> Result<Vec<f64>, Failure> {
    if !(min > 0.0 && max > min && max.is_finite()) || points < 2 {
        return Err(config_error(format!(
            "scan grid needs 0 < delta_min < delta_max and at least 2 points, got [{min}, {max}] with {points}"
        )));
    }
    let step = |i: usize| i as f64 / (points - 1) as f64;
    Ok(match spacing {
        Spacing::Linear => (0..points).map(|i| min + (max - min) * step(i)).collect(),
        Spacing::Log => {
            let (lo, hi) = (min.log10(), max.log10());
            (0..points).map(|i| 10f64.powf(lo + (hi - lo) * step(i))).collect()
        }
    })
}

pub struct DirectionScanVerb;

impl Verb for DirectionScanVerb {
    const NAME: &'static str = "direction-scan";
    type Params = DirectionScanParams;

    fn manifest_path(p: &DirectionScanParams) -> PathBuf {
        p.out.join("direction_scan.manifest.json")
    }

    fn run(p: &DirectionScanParams) -> Result<Products, Failure> {
        let (sys, drivers) = load_system(&p.system)?;
        let x0 = p.x0.resolve(sys.n, child_seed(p.seed, STREAM_X0), "x0")?;
        let dir = p.direction.resolve(sys.n, child_seed(p.seed, STREAM_TARGET), "direction")?;
        let grid = spaced(p.delta_min, p.delta_max, p.points, p.spacing)?;
        let opts = SweepKnobs {
            ensemble: 1,
            tf: p.tf,
            samples: p.samples,
            quadrature_order: p.quadrature_order,
            length_mode: p.length_mode,
            threshold: d_threshold(),
            metric: DistanceMetric::default(),
            seed: p.seed,
        }
        .options();
        let scan = direction_scan(sys.matrix(), drivers.matrix(), &x0, &dir, &grid, &opts)?;

        let mut csv = String::from("delta,L_plus,R_plus,L_minus,R_minus,pair_mean\n");
        for i in 0..scan.grid.len() {
            let row = [
                scan.grid[i],
                scan.plus_l[i],
                scan.plus_r[i],
                scan.minus_l[i],
                scan.minus_r[i],
                scan.pair_mean[i],
            ];
            csv.push_str(&row.map(fmt_float).join(","));
            csv.push('\n');
        }
        let unit: DVector<f64> = &dir / dir.norm();
        let summary = json!({
            "x0": x0.as_slice(),
            "direction": unit.as_slice(),
            "drivers": drivers.driver_nodes,
            "plus_fit": scan.plus_fit,
            "minus_fit": scan.minus_fit,
            "a_spread": scan.a_spread,
            "b_spread": scan.b_spread,
        });
        let mut out = Products::default();
        out.add(p.out.join("direction_scan.csv"), csv.into_bytes());
        out.add_json(p.out.join("direction_scan.json"), &summary);
        Ok(out)
    }
}

// ---------------------------------------------------------------- distribution

/// Length and radius over uniformly random directions at a fixed distance.
#[derive(Debug, Clone, Args, Serialize)]
pub struct DistributionArgs {
    #[arg(long)]
    pub system: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Number of random directions.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub tf: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub quadrature_order: Option<usize>,
    #[arg(long)]
    pub length_mode: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: ConfigArg,
}

fn d_dist_delta() -> f64 {
    1e-5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionParams {
    pub system: PathBuf,
    #[serde(default = "VectorSpec::zero")]
    pub x0: VectorSpec,
    #[serde(default = "d_dist_delta")]
    pub delta: f64,
    #[serde(default = "d_ensemble")]
    pub count: usize,
    #[serde(default = "d_tf_short")]
    pub tf: f64,
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default = "d_order")]
    pub quadrature_order: usize,
    #[serde(default)]
    pub length_mode: LengthMode,
    pub seed: u64,
    #[serde(default = "d_out")]
    pub out: PathBuf,
}

pub struct Distribution;

impl Verb for Distribution {
    const NAME: &'static str = "distribution";
    type Params = DistributionParams;

    fn manifest_path(p: &DistributionParams) -> PathBuf {
        p.out.join("distribution.manifest.json")
    }

    fn run(p: &DistributionParams) -> Result<Products, Failure> {
        let (sys, drivers) = load_system(&p.system)?;
        let x0 = p.x0.resolve(sys.n, child_seed(p.seed, STREAM_X0), "x0")?;
        let opts = SweepKnobs {
            ensemble: 1,
            tf: p.tf,
            samples: p.samples,
            quadrature_order: p.quadrature_order,
            length_mode: p.length_mode,
            threshold: d_threshold(),
            metric: DistanceMetric::default(),
            seed: p.seed,
        }
        .options();
        let scan = distribution_scan(sys.matrix(), drivers.matrix(), &x0, p.delta, p.count, &opts)?;
        let stats = |d: &netctl_core::harness::EmpiricalDistribution| {
            json!({
                "r_param": d.r_param,
                "ks_statistic_vs_arcsine": d.ks_statistic_vs_arcsine,
                "ks_statistic_vs_uniform": d.ks_statistic_vs_uniform,
                "min": d.sorted_values.first(),
                "max": d.sorted_values.last(),
            })
        };
        let summary = json!({
            "x0": x0.as_slice(),
            "drivers": drivers.driver_nodes,
            "delta": p.delta,
            "count": p.count,
            "length": stats(&scan.length_distribution),
            "radius": stats(&scan.radius_distribution),
        });
        let mut out = Products::default();
        out.add(p.out.join("distribution.csv"), csv_bytes(|w| write_distribution_csv(&scan, w)));
        out.add_json(p.out.join("distribution.json"), &summary);
        Ok(out)
    }
}

// ---------------------------------------------------------------- oracle-check

/// Compare the continuous solution with the discretized least-energy plan.
#[derive(Debug, Clone, Args, Serialize)]
pub struct OracleCheckArgs {
    #[arg(long)]
    pub system: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub xf: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub t0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub tf: Option<f64>,
    /// Number of piecewise-constant input steps.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub quadrature_order: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    pub common: ConfigArg,
}

fn d_oracle_xf() -> VectorSpec {
    VectorSpec::Text("random:1".into())
}
fn d_steps() -> usize {
    200
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleCheckParams {
    pub system: PathBuf,
    #[serde(default = "VectorSpec::zero")]
    pub x0: VectorSpec,
    #[serde(default = "d_oracle_xf")]
    pub xf: VectorSpec,
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "d_tf_long")]
    pub tf: f64,
    #[serde(default = "d_steps")]
    pub m: usize,
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default = "d_order")]
    pub quadrature_order: usize,
    pub seed: u64,
    #[serde(default = "d_out")]
    pub out: PathBuf,
}

pub struct OracleCheck;

impl Verb for OracleCheck {
    const NAME: &'static str = "oracle-check";
    type Params = OracleCheckParams;

    fn manifest_path(p: &OracleCheckParams) -> PathBuf {
        p.out.join("oracle_check.manifest.json")
    }

    fn run(p: &OracleCheckParams) -> Result<Products, Failure> {
        let (sys, drivers) = load_system(&p.system)?;
        let x0 = p.x0.resolve(sys.n, child_seed(p.seed, STREAM_X0), "x0")?;
        let xf = p.xf.resolve(sys.n, child_seed(p.seed, STREAM_TARGET), "xf")?;
        let mut task = ControlTask::new(&sys, &drivers, x0.clone(), xf.clone(), p.t0, p.tf)?.with_samples(p.samples)?;
        task.quadrature_order = p.quadrature_order;
        let cont = task.horizon()?.metrics(&x0, &xf, task.length_mode)?;
        let plan = oracle_min_energy(&task, p.m)?;
        let disc = oracle_metrics(&plan);
        let rel = |approx: f64, exact: f64| (approx - exact).abs() / exact.abs().max(f64::MIN_POSITIVE);
        let report = json!({
            "x0": x0.as_slice(),
            "xf": xf.as_slice(),
            "drivers": drivers.driver_nodes,
            "m": p.m,
            "continuous": {"E": cont.energy, "L": cont.length, "R": cont.radius},
            "oracle": {"E": plan.energy, "L": disc.length, "R": disc.radius},
            "rel_diff": {
                "E": rel(plan.energy, cont.energy),
                "L": rel(disc.length, cont.length),
                "R": rel(disc.radius, cont.radius),
            },
        });
        let mut out = Products::default();
        out.add_json(p.out.join("oracle_check.json"), &report);
        Ok(out)
    }
}
