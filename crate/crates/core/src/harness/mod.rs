//! Ensemble experiments: control-distance sweeps with crossover detection,
//! initial-state-norm sweeps, per-direction scans, distributions over
//! directions, and control-time sweeps across driver counts and stability
//! classes.
//!
//! Every random draw comes from a ChaCha stream seeded by hashing
//! `(master seed, grid index, sample index)`, so results do not depend on how
//! the work is scheduled across threads.

pub mod fit;
pub mod io;
pub mod stats;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use fit::{fit_affine, fit_piecewise_affine, fit_power_law, FitModel, LabeledFit, PiecewiseFit, ScalingFit};
pub use stats::{arcsine_cdf, ks_statistic, uniform_cdf, EmpiricalDistribution};

use crate::network::{select_drivers, shift_spectrum, DriverConfig, NetworkSystem};
use crate::trajectory::{Horizon, LengthMode, TaskMetrics, DEFAULT_QUADRATURE_ORDER, DEFAULT_SAMPLES};
use crate::{Error, Result};
use nalgebra::DMatrix;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the stream for item `index` under `parent`.
pub fn child_seed(parent: u64, index: u64) -> u64 {
    mix(mix(parent) ^ index)
}

/// Uniformly distributed unit vector in `Rⁿ` (normalized Gaussian).
pub fn random_direction(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let v = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let norm: f64 = v.norm();
        if norm > 1e-300 {
            return v / norm;
        }
    }
}

/// `count` points on the sphere of radius `delta` around `x0`. Point `i` draws
/// its direction from the stream `child_seed(seed, i)`.
pub fn sample_sphere(x0: &DVector<f64>, delta: f64, count: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::OutOfRange(format!("sphere radius must be positive, got {delta}")));
    }
    if count == 0 {
        return Err(Error::OutOfRange("need at least one sample".into()));
    }
    Ok((0..count)
        .map(|i| x0 + random_direction(x0.len(), child_seed(seed, i as u64)) * delta)
        .collect())
}

/// `count` values from `10^lo` to `10^hi`, evenly spaced in the exponent.
pub fn log_grid(lo_exp: f64, hi_exp: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![10f64.powf(lo_exp)];
    }
    (0..count)
        .map(|k| 10f64.powf(lo_exp + (hi_exp - lo_exp) * k as f64 / (count - 1) as f64))
        .collect()
}

/// Ten points per decade, both ends included.
pub fn decade_grid(lo_exp: i32, hi_exp: i32) -> Vec<f64> {
    let count = (10 * (hi_exp - lo_exp)).max(0) as usize + 1;
    log_grid(lo_exp as f64, hi_exp as f64, count)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::OutOfRange("empty grid".into()));
    }
    if grid.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::OutOfRange("grid values must be positive and finite".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::OutOfRange("grid must be strictly increasing".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    Delta,
    X0Norm,
    Tf,
}

impl SweepVariable {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Delta => "delta",
            Self::X0Norm => "x0_norm",
            Self::Tf => "tf",
        }
    }
}

/// How far apart two mean curves are at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    /// `|log₁₀ a − log₁₀ b|`
    #[default]
    Log10,
    /// `|a − b|`
    Absolute,
}

impl DistanceMetric {
    fn distance(self, a: f64, b: f64) -> f64 {
        match self {
            Self::Log10 => (a.log10() - b.log10()).abs(),
            Self::Absolute => (a - b).abs(),
        }
    }
}

/// Numerical and sampling parameters shared by all sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub ensemble: usize,
    pub seed: u64,
    pub tf: f64,
    pub n_samples: usize,
    pub quadrature_order: usize,
    pub length_mode: LengthMode,
    pub threshold: f64,
    pub metric: DistanceMetric,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            ensemble: 100,
            seed: 0,
            tf: 1.0,
            n_samples: DEFAULT_SAMPLES,
            quadrature_order: DEFAULT_QUADRATURE_ORDER,
            length_mode: LengthMode::Quadrature,
            threshold: 1e-2,
            metric: DistanceMetric::Log10,
        }
    }
}

impl SweepOptions {
    fn horizon(&self, a: &DMatrix<f64>, b: &DMatrix<f64>, tf: f64) -> Result<Horizon> {
        Horizon::new(a, b, 0.0, tf, self.n_samples, self.quadrature_order)
    }
}

/// Aggregated `L` and `R` over the ensemble at one grid value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointStats {
    pub value: f64,
    pub mean_l: f64,
    pub mean_r: f64,
    pub min_l: f64,
    pub max_l: f64,
    pub min_r: f64,
    pub max_r: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    pub samples_l: Vec<f64>,
    pub samples_r: Vec<f64>,
}

impl PointStats {
    fn from_outcomes(value: f64, outcomes: &[Option<TaskMetrics>]) -> Self {
        let ok: Vec<&TaskMetrics> = outcomes.iter().flatten().collect();
        let samples_l: Vec<f64> = ok.iter().map(|m| m.length).collect();
        let samples_r: Vec<f64> = ok.iter().map(|m| m.radius).collect();
        let mean = |v: &[f64]| {
            if v.is_empty() {
                f64::NAN
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        let min = |v: &[f64]| v.iter().copied().fold(f64::NAN, f64::min);
        let max = |v: &[f64]| v.iter().copied().fold(f64::NAN, f64::max);
        Self {
            value,
            mean_l: mean(&samples_l),
            mean_r: mean(&samples_r),
            min_l: min(&samples_l),
            max_l: max(&samples_l),
            min_r: min(&samples_r),
            max_r: max(&samples_r),
            n_ok: ok.len(),
            n_failed: outcomes.len() - ok.len(),
            samples_l,
            samples_r,
        }
    }

    fn failed(value: f64, count: usize) -> Self {
        Self::from_outcomes(value, &vec![None; count])
    }
}

/// Mean `L` and `R` along a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanCurve {
    pub grid: Vec<f64>,
    pub l: Vec<f64>,
    pub r: Vec<f64>,
}

impl MeanCurve {
    pub fn from_points(points: &[PointStats]) -> Self {
        Self {
            grid: points.iter().map(|p| p.value).collect(),
            l: points.iter().map(|p| p.mean_l).collect(),
            r: points.iter().map(|p| p.mean_r).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossover {
    pub delta_star: f64,
    pub l_star: f64,
    pub r_star: f64,
}

/// A task or grid point that could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureRecord {
    pub value: f64,
    /// `None` when the whole grid point failed (e.g. its Gramian).
    pub sample: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    pub per_point: Vec<PointStats>,
    pub fits: Vec<LabeledFit>,
    pub crossover: Option<Crossover>,
    pub plateau_alpha: Option<f64>,
    /// Mean curve of the companion run from the origin, when one was needed.
    pub origin: Option<MeanCurve>,
    pub failures: Vec<FailureRecord>,
}

impl SweepResult {
    pub fn curve(&self) -> MeanCurve {
        MeanCurve::from_points(&self.per_point)
    }

    pub fn fit(&self, quantity: &str) -> Option<&ScalingFit> {
        self.fits.iter().find(|f| f.quantity == quantity).map(|f| &f.fit)
    }
}

/// Evaluate the ensemble at every grid value of `deltas`, aborting on the
/// first failure. Final states for grid index `g` are
/// `sample_sphere(x0, δ_g, ensemble, child_seed(seed, g))`.
fn delta_curve(hz: &Horizon, x0: &DVector<f64>, deltas: &[f64], opts: &SweepOptions) -> Result<Vec<PointStats>> {
    let targets: Vec<Vec<DVector<f64>>> = deltas
        .iter()
        .enumerate()
        .map(|(g, &d)| sample_sphere(x0, d, opts.ensemble, child_seed(opts.seed, g as u64)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..deltas.len())
        .flat_map(|g| (0..opts.ensemble).map(move |s| (g, s)))
        .collect();
    let results: Vec<TaskMetrics> = jobs
        .par_iter()
        .map(|&(g, s)| {
            hz.metrics(x0, &targets[g][s], opts.length_mode).map_err(|e| Error::Task {
                value: deltas[g],
                sample: s,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    Ok(results
        .chunks(opts.ensemble)
        .zip(deltas)
        .map(|(chunk, &d)| {
            let outcomes: Vec<Option<TaskMetrics>> = chunk.iter().copied().map(Some).collect();
            PointStats::from_outcomes(d, &outcomes)
        })
        .collect())
}

/// Smallest grid value at which both the `L` and the `R` curves of the `x₀`
/// run are within `threshold` of the origin run.
pub fn detect_delta_star(
    x0_curve: &MeanCurve,
    origin: &MeanCurve,
    threshold: f64,
    metric: DistanceMetric,
) -> Result<Option<f64>> {
    if x0_curve.grid != origin.grid || x0_curve.l.len() != origin.l.len() || x0_curve.r.len() != origin.r.len() {
        return Err(Error::GridMismatch);
    }
    Ok((0..x0_curve.grid.len())
        .find(|&i| {
            metric.distance(x0_curve.l[i], origin.l[i]) < threshold
                && metric.distance(x0_curve.r[i], origin.r[i]) < threshold
        })
        .map(|i| x0_curve.grid[i]))
}

/// Plateau constants: the mean of the per-point means over `δ ≤ δ*/10`, or the
/// first grid point when no point lies that low.
fn plateau(points: &[PointStats], delta_star: f64) -> (f64, f64) {
    let low: Vec<&PointStats> = points.iter().filter(|p| p.value <= delta_star / 10.0).collect();
    if low.is_empty() {
        return (points[0].mean_l, points[0].mean_r);
    }
    let n = low.len() as f64;
    (
        low.iter().map(|p| p.mean_l).sum::<f64>() / n,
        low.iter().map(|p| p.mean_r).sum::<f64>() / n,
    )
}

fn branch_fits(points: &[PointStats], range: Option<(f64, f64)>) -> Vec<LabeledFit> {
    let xs: Vec<f64> = points.iter().map(|p| p.value).collect();
    let mut fits = Vec::new();
    for (name, ys) in [
        ("L", points.iter().map(|p| p.mean_l).collect::<Vec<_>>()),
        ("R", points.iter().map(|p| p.mean_r).collect::<Vec<_>>()),
    ] {
        if let Ok(f) = fit_power_law(&xs, &ys, range) {
            fits.push(LabeledFit::new(name, f));
        }
    }
    fits
}

fn is_zero(x: &DVector<f64>) -> bool {
    x.iter().all(|v| *v == 0.0)
}

/// Mean `L` and `R` against the control distance.
///
/// From the origin, power laws are fitted over the whole grid. From `x₀ ≠ 0`
/// the origin curve is computed on the same grid and directions, the crossover
/// `δ*` and plateau constants `L*`, `R*` are extracted, and the power laws are
/// fitted on `δ ≥ 10 δ*` (or `δ ≥ δ*` when that leaves fewer than three points).
pub fn sweep_delta(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    x0: &DVector<f64>,
    delta_grid: &[f64],
    opts: &SweepOptions,
) -> Result<SweepResult> {
    check_grid(delta_grid)?;
    if opts.ensemble == 0 {
        return Err(Error::OutOfRange("ensemble must be at least 1".into()));
    }
    let hz = opts.horizon(a, b, opts.tf)?;
    let per_point = delta_curve(&hz, x0, delta_grid, opts)?;
    if is_zero(x0) {
        return Ok(SweepResult {
            variable: SweepVariable::Delta,
            grid: delta_grid.to_vec(),
            fits: branch_fits(&per_point, None),
            per_point,
            crossover: None,
            plateau_alpha: None,
            origin: None,
            failures: Vec::new(),
        });
    }
    let origin = MeanCurve::from_points(&delta_curve(&hz, &DVector::zeros(x0.len()), delta_grid, opts)?);
    Ok(with_crossover(per_point, origin, delta_grid, opts))
}

fn with_crossover(per_point: Vec<PointStats>, origin: MeanCurve, grid: &[f64], opts: &SweepOptions) -> SweepResult {
    let curve = MeanCurve::from_points(&per_point);
    let delta_star = detect_delta_star(&curve, &origin, opts.threshold, opts.metric).expect("same grid");
    let (crossover, fits) = match delta_star {
        Some(ds) => {
            let (l_star, r_star) = plateau(&per_point, ds);
            let enough = grid.iter().filter(|&&d| d >= 10.0 * ds).count() >= 3;
            let lo = if enough { 10.0 * ds } else { ds };
            (
                Some(Crossover {
                    delta_star: ds,
                    l_star,
                    r_star,
                }),
                branch_fits(&per_point, Some((lo, f64::INFINITY))),
            )
        }
        None => (None, Vec::new()),
    };
    SweepResult {
        variable: SweepVariable::Delta,
        grid: grid.to_vec(),
        per_point,
        fits,
        crossover,
        plateau_alpha: None,
        origin: Some(origin),
        failures: Vec::new(),
    }
}

/// `δ*`, `L*` and `R*` as functions of `‖x₀‖`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormSweep {
    /// One row per norm: `mean_l = L*`, `mean_r = R*`; min/max span the
    /// per-point means on the plateau.
    pub summary: SweepResult,
    pub delta_star: Vec<Option<f64>>,
    pub per_norm: Vec<SweepResult>,
}

/// Run [`sweep_delta`] for `x₀ = ‖x₀‖·direction` at each norm (sharing the
/// origin run) and fit `δ*`, `L*`, `R*` against `‖x₀‖` as power laws.
pub fn sweep_x0_norm(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    direction: &DVector<f64>,
    norm_grid: &[f64],
    delta_grid: &[f64],
    opts: &SweepOptions,
) -> Result<NormSweep> {
    check_grid(norm_grid)?;
    check_grid(delta_grid)?;
    let len = direction.norm();
    if !(len > 0.0) {
        return Err(Error::OutOfRange("initial-state direction must be nonzero".into()));
    }
    let unit = direction / len;
    let hz = opts.horizon(a, b, opts.tf)?;
    let origin = MeanCurve::from_points(&delta_curve(&hz, &DVector::zeros(unit.len()), delta_grid, opts)?);
    let mut per_norm = Vec::with_capacity(norm_grid.len());
    for &norm in norm_grid {
        let x0 = &unit * norm;
        let pts = delta_curve(&hz, &x0, delta_grid, opts)?;
        per_norm.push(with_crossover(pts, origin.clone(), delta_grid, opts));
    }
    let delta_star: Vec<Option<f64>> = per_norm.iter().map(|s| s.crossover.map(|c| c.delta_star)).collect();

    let mut rows = Vec::new();
    for (norm, s) in norm_grid.iter().zip(&per_norm) {
        let Some(c) = s.crossover else { continue };
        let plateau_pts: Vec<&PointStats> = s.per_point.iter().filter(|p| p.value <= c.delta_star / 10.0).collect();
        let plateau_pts = if plateau_pts.is_empty() { vec![&s.per_point[0]] } else { plateau_pts };
        let fold = |f: fn(&PointStats) -> f64, init: f64, op: fn(f64, f64) -> f64| {
            plateau_pts.iter().map(|p| f(p)).fold(init, op)
        };
        rows.push(PointStats {
            value: *norm,
            mean_l: c.l_star,
            mean_r: c.r_star,
            min_l: fold(|p| p.mean_l, f64::INFINITY, f64::min),
            max_l: fold(|p| p.mean_l, f64::NEG_INFINITY, f64::max),
            min_r: fold(|p| p.mean_r, f64::INFINITY, f64::min),
            max_r: fold(|p| p.mean_r, f64::NEG_INFINITY, f64::max),
            n_ok: s.per_point.iter().map(|p| p.n_ok).sum(),
            n_failed: s.per_point.iter().map(|p| p.n_failed).sum(),
            samples_l: Vec::new(),
            samples_r: Vec::new(),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let mut fits = Vec::new();
    let ds: Vec<f64> = rows
        .iter()
        .map(|r| per_norm[norm_grid.iter().position(|n| *n == r.value).expect("own grid")].crossover.expect("row has crossover").delta_star)
        .collect();
    for (name, ys) in [
        ("delta_star", ds),
        ("L_star", rows.iter().map(|r| r.mean_l).collect()),
        ("R_star", rows.iter().map(|r| r.mean_r).collect()),
    ] {
        if let Ok(f) = fit_power_law(&xs, &ys, None) {
            fits.push(LabeledFit::new(name, f));
        }
    }
    Ok(NormSweep {
        summary: SweepResult {
            variable: SweepVariable::X0Norm,
            grid: norm_grid.to_vec(),
            per_point: rows,
            fits,
            crossover: None,
            plateau_alpha: None,
            origin: None,
            failures: Vec::new(),
        },
        delta_star,
        per_norm,
    })
}

/// Fits for `L(δ)` along one direction. A direction whose length first falls
/// has a `fall` branch `L = −aδ + b` before the breakpoint and a `rise` branch
/// `L = aδ − b` after it; otherwise only `rise` (`L = aδ + b`) is present.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionFit {
    pub breakpoint: Option<f64>,
    pub fall: Option<ScalingFit>,
    pub rise: ScalingFit,
}

impl DirectionFit {
    fn from_curve(grid: &[f64], l: &[f64]) -> Result<Self> {
        let argmin = l
            .iter()
            .enumerate()
            .fold(0, |best, (i, v)| if *v < l[best] { i } else { best });
        if argmin >= 3 && argmin + 3 <= l.len() {
            let pw = fit_piecewise_affine(grid, l)?;
            if pw.left.slope < 0.0 && pw.right.slope > 0.0 {
                return Ok(Self {
                    breakpoint: Some(pw.breakpoint),
                    fall: Some(pw.left),
                    rise: pw.right,
                });
            }
        }
        Ok(Self {
            breakpoint: None,
            fall: None,
            rise: fit_affine(grid, l, None)?,
        })
    }

    /// Magnitudes `(a, b)` of the rising branch.
    pub fn rise_ab(&self) -> (f64, f64) {
        (self.rise.slope, self.rise.intercept.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionScan {
    pub grid: Vec<f64>,
    pub plus_l: Vec<f64>,
    pub plus_r: Vec<f64>,
    pub minus_l: Vec<f64>,
    pub minus_r: Vec<f64>,
    pub plus_fit: DirectionFit,
    pub minus_fit: DirectionFit,
    /// Largest relative disagreement in `a` across all branches of the pair.
    pub a_spread: f64,
    /// Largest relative disagreement in `b` across all branches of the pair.
    pub b_spread: f64,
    /// `(L₊ + L₋)/2` on the grid.
    pub pair_mean: Vec<f64>,
}

fn rel_spread(vals: &[f64]) -> f64 {
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        0.0
    } else {
        (hi - lo) / scale
    }
}

/// `L(δ)` and `R(δ)` for `x_f = x₀ ± δ·direction`, with affine fits per
/// direction and the pair average.
pub fn direction_scan(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    x0: &DVector<f64>,
    direction: &DVector<f64>,
    delta_grid: &[f64],
    opts: &SweepOptions,
) -> Result<DirectionScan> {
    check_grid(delta_grid)?;
    let len = direction.norm();
    if !(len > 0.0) {
        return Err(Error::OutOfRange("scan direction must be nonzero".into()));
    }
    let unit = direction / len;
    let hz = opts.horizon(a, b, opts.tf)?;
    let run = |sign: f64| -> Result<Vec<TaskMetrics>> {
        delta_grid
            .par_iter()
            .enumerate()
            .map(|(g, &d)| {
                let xf = x0 + &unit * (sign * d);
                hz.metrics(x0, &xf, opts.length_mode).map_err(|e| Error::Task {
                    value: d,
                    sample: g,
                    source: Box::new(e),
                })
            })
            .collect()
    };
    let plus = run(1.0)?;
    let minus = run(-1.0)?;
    let plus_l: Vec<f64> = plus.iter().map(|m| m.length).collect();
    let minus_l: Vec<f64> = minus.iter().map(|m| m.length).collect();
    let plus_fit = DirectionFit::from_curve(delta_grid, &plus_l)?;
    let minus_fit = DirectionFit::from_curve(delta_grid, &minus_l)?;
    let mut a_vals = Vec::new();
    let mut b_vals = Vec::new();
    for f in [&plus_fit, &minus_fit] {
        let (ra, rb) = f.rise_ab();
        a_vals.push(ra);
        b_vals.push(rb);
        if let Some(fall) = &f.fall {
            a_vals.push(-fall.slope);
            b_vals.push(fall.intercept.abs());
        }
    }
    Ok(DirectionScan {
        grid: delta_grid.to_vec(),
        pair_mean: plus_l.iter().zip(&minus_l).map(|(p, m)| 0.5 * (p + m)).collect(),
        plus_r: plus.iter().map(|m| m.radius).collect(),
        minus_r: minus.iter().map(|m| m.radius).collect(),
        plus_l,
        minus_l,
        a_spread: rel_spread(&a_vals),
        b_spread: rel_spread(&b_vals),
        plus_fit,
        minus_fit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionScan {
    pub lengths: Vec<f64>,
    pub radii: Vec<f64>,
    pub length_distribution: EmpiricalDistribution,
    pub radius_distribution: EmpiricalDistribution,
}

/// `L` and `R` over `count` uniformly random directions at distance `delta`,
/// with KS distances to the arcsine and uniform laws.
pub fn distribution_scan(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    x0: &DVector<f64>,
    delta: f64,
    count: usize,
    opts: &SweepOptions,
) -> Result<DistributionScan> {
    let hz = opts.horizon(a, b, opts.tf)?;
    let targets = sample_sphere(x0, delta, count, opts.seed)?;
    let metrics: Vec<TaskMetrics> = targets
        .par_iter()
        .enumerate()
        .map(|(i, xf)| {
            hz.metrics(x0, xf, opts.length_mode).map_err(|e| Error::Task {
                value: delta,
                sample: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let lengths: Vec<f64> = metrics.iter().map(|m| m.length).collect();
    let radii: Vec<f64> = metrics.iter().map(|m| m.radius).collect();
    Ok(DistributionScan {
        length_distribution: EmpiricalDistribution::new(lengths.clone())?,
        radius_distribution: EmpiricalDistribution::new(radii.clone())?,
        lengths,
        radii,
    })
}

/// Coefficient of variation (population standard deviation over mean).
pub fn coefficient_of_variation(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean.abs()
}

/// Largest `t_f` of the short-time branch.
pub const SHORT_TIME_MAX: f64 = 1e-1;
/// A trailing decade whose mean `L` varies less than this counts as a plateau.
pub const PLATEAU_CV: f64 = 0.05;

/// Regime summary of one control-time sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeRegimes {
    pub short_l: Option<ScalingFit>,
    pub short_r: Option<ScalingFit>,
    /// CV of mean `L` and `R` across all successful grid points.
    pub overall_cv_l: f64,
    pub overall_cv_r: f64,
    /// Mean over the last decade of the grid, and its CV.
    pub tail_l: f64,
    pub tail_r: f64,
    pub tail_cv_l: f64,
    pub tail_cv_r: f64,
    pub plateau: bool,
    pub success_fraction: f64,
}

impl TimeRegimes {
    pub fn from_sweep(s: &SweepResult) -> Self {
        let ok: Vec<&PointStats> = s.per_point.iter().filter(|p| p.n_ok > 0).collect();
        let xs: Vec<f64> = ok.iter().map(|p| p.value).collect();
        let ls: Vec<f64> = ok.iter().map(|p| p.mean_l).collect();
        let rs: Vec<f64> = ok.iter().map(|p| p.mean_r).collect();
        let short = (0.0, SHORT_TIME_MAX);
        let top = xs.last().copied().unwrap_or(f64::NAN);
        let tail: Vec<usize> = (0..xs.len()).filter(|&i| xs[i] >= top / 10.0).collect();
        let pick = |v: &[f64]| tail.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let (tl, tr) = (pick(&ls), pick(&rs));
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let tail_cv_l = coefficient_of_variation(&tl);
        let tail_cv_r = coefficient_of_variation(&tr);
        Self {
            short_l: fit_power_law(&xs, &ls, Some(short)).ok(),
            short_r: fit_power_law(&xs, &rs, Some(short)).ok(),
            overall_cv_l: coefficient_of_variation(&ls),
            overall_cv_r: coefficient_of_variation(&rs),
            tail_l: mean(&tl),
            tail_r: mean(&tr),
            tail_cv_l,
            tail_cv_r,
            plateau: tl.len() >= 2 && tail_cv_l < PLATEAU_CV && tail_cv_r < PLATEAU_CV,
            success_fraction: ok.len() as f64 / s.per_point.len().max(1) as f64,
        }
    }
}

/// Mean `L` and `R` against the control horizon at fixed `delta`.
///
/// A grid point whose Gramian cannot be built or factored is recorded in
/// `failures` and skipped; so are individual failed tasks. Final states for
/// grid index `g` are drawn as in [`sweep_delta`], so every horizon sees the
/// same directions only if `seed` is shared.
pub fn sweep_time(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    x0: &DVector<f64>,
    delta: f64,
    tf_grid: &[f64],
    opts: &SweepOptions,
) -> Result<SweepResult> {
    check_grid(tf_grid)?;
    if opts.ensemble == 0 {
        return Err(Error::OutOfRange("ensemble must be at least 1".into()));
    }
    let targets = sample_sphere(x0, delta, opts.ensemble, opts.seed)?;
    let outcomes: Vec<(PointStats, Vec<FailureRecord>)> = tf_grid
        .par_iter()
        .map(|&tf| match opts.horizon(a, b, tf) {
            Err(e) => (
                PointStats::failed(tf, opts.ensemble),
                vec![FailureRecord {
                    value: tf,
                    sample: None,
                    message: e.to_string(),
                }],
            ),
            Ok(hz) => {
                let mut fails = Vec::new();
                let per: Vec<Option<TaskMetrics>> = targets
                    .iter()
                    .enumerate()
                    .map(|(s, xf)| match hz.metrics(x0, xf, opts.length_mode) {
                        Ok(m) => Some(m),
                        Err(e) => {
                            fails.push(FailureRecord {
                                value: tf,
                                sample: Some(s),
                                message: e.to_string(),
                            });
                            None
                        }
                    })
                    .collect();
                (PointStats::from_outcomes(tf, &per), fails)
            }
        })
        .collect();
    let (per_point, failures): (Vec<PointStats>, Vec<Vec<FailureRecord>>) = outcomes.into_iter().unzip();
    let mut result = SweepResult {
        variable: SweepVariable::Tf,
        grid: tf_grid.to_vec(),
        per_point,
        fits: Vec::new(),
        crossover: None,
        plateau_alpha: None,
        origin: None,
        failures: failures.into_iter().flatten().collect(),
    };
    let regimes = TimeRegimes::from_sweep(&result);
    if let Some(f) = regimes.short_l {
        result.fits.push(LabeledFit::new("L_short", f));
    }
    if let Some(f) = regimes.short_r {
        result.fits.push(LabeledFit::new("R_short", f));
    }
    if regimes.plateau {
        result.plateau_alpha = Some(regimes.tail_l);
    }
    Ok(result)
}

/// One cell of the stability-class × driver-count matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeCell {
    pub lambda1: f64,
    pub drivers: Vec<usize>,
    pub sweep: SweepResult,
    pub regimes: TimeRegimes,
}

/// Control-time sweeps for every combination of target `λ₁` and driver count.
/// Drivers are drawn with [`select_drivers`] from `child_seed(driver_seed, p)`.
pub fn sweep_time_matrix(
    base: &NetworkSystem,
    lambdas: &[f64],
    driver_counts: &[usize],
    delta: f64,
    tf_grid: &[f64],
    driver_seed: u64,
    opts: &SweepOptions,
) -> Result<Vec<TimeCell>> {
    let mut cells = Vec::new();
    for &lambda in lambdas {
        let sys = shift_spectrum(base, lambda)?;
        for &p in driver_counts {
            let drivers: DriverConfig = select_drivers(&sys, p, child_seed(driver_seed, p as u64))?;
            let sweep = sweep_time(
                sys.matrix(),
                drivers.matrix(),
                &DVector::zeros(sys.n),
                delta,
                tf_grid,
                opts,
            )?;
            cells.push(TimeCell {
                lambda1: sys.lambda1,
                drivers: drivers.driver_nodes.clone(),
                regimes: TimeRegimes::from_sweep(&sweep),
                sweep,
            });
        }
    }
    Ok(cells)
}

/// `max(1, round(0.6·N))`, the intermediate driver count.
pub fn sixty_percent(n: usize) -> usize {
    ((0.6 * n as f64).round() as usize).clamp(1, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn sphere_radius_and_determinism() {
        let x0 = dvector![0.5, -1.0, 2.0];
        let pts = sample_sphere(&x0, 0.25, 200, 9).unwrap();
        for p in &pts {
            assert!(((p - &x0).norm() / 0.25 - 1.0).abs() <= 1e-12);
        }
        assert_eq!(pts, sample_sphere(&x0, 0.25, 200, 9).unwrap());
        assert_ne!(pts, sample_sphere(&x0, 0.25, 200, 10).unwrap());
        assert!(sample_sphere(&x0, 0.0, 1, 0).is_err());
        assert!(sample_sphere(&x0, 1.0, 0, 0).is_err());
    }

    #[test]
    fn sphere_is_centred() {
        let x0 = DVector::zeros(3);
        let pts = sample_sphere(&x0, 1.0, 10_000, 3).unwrap();
        let mean = pts.iter().fold(DVector::zeros(3), |acc, p| acc + p) / 10_000.0;
        assert!(mean.norm() <= 0.05, "mean norm {}", mean.norm());
    }

    #[test]
    fn crossover_examples() {
        let grid = decade_grid(-3, 1);
        let same = MeanCurve {
            grid: grid.clone(),
            l: grid.iter().map(|d| 10.0 * d).collect(),
            r: grid.iter().map(|d| 5.0 * d).collect(),
        };
        assert_eq!(detect_delta_star(&same, &same, 1e-2, DistanceMetric::Log10).unwrap(), Some(grid[0]));

        let kinked = MeanCurve {
            grid: grid.clone(),
            l: grid.iter().map(|d| (10.0 * d).max(1.0)).collect(),
            r: grid.iter().map(|d| (5.0 * d).max(0.5)).collect(),
        };
        let ds = detect_delta_star(&kinked, &same, 1e-2, DistanceMetric::Log10).unwrap().unwrap();
        // log10(1/(10δ)) < 0.01 first holds at the grid point 0.1.
        assert!((ds - 0.1).abs() < 1e-12, "delta* = {ds}");

        let shifted = MeanCurve {
            grid: grid.clone(),
            l: same.l.iter().map(|v| v * 3.0).collect(),
            r: same.r.iter().map(|v| v * 3.0).collect(),
        };
        let gap = 3f64.log10();
        let d = DistanceMetric::Log10.distance(shifted.l[0], same.l[0]);
        assert!((d - gap).abs() < 1e-15);
        assert_eq!(detect_delta_star(&shifted, &same, d.min(DistanceMetric::Log10.distance(shifted.r[0], same.r[0])) - 1e-15, DistanceMetric::Log10).unwrap(), None);

        let other = MeanCurve {
            grid: vec![1.0],
            l: vec![1.0],
            r: vec![1.0],
        };
        assert!(matches!(
            detect_delta_star(&same, &other, 1e-2, DistanceMetric::Log10),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn equal_distance_never_crosses() {
        // The distance equals the threshold exactly at every point.
        let grid = vec![1.0, 2.0, 4.0];
        let a = MeanCurve {
            grid: grid.clone(),
            l: vec![1.0, 2.0, 4.0],
            r: vec![1.0, 2.0, 4.0],
        };
        let b = MeanCurve {
            grid,
            l: vec![1.5, 2.5, 4.5],
            r: vec![1.5, 2.5, 4.5],
        };
        assert_eq!(detect_delta_star(&a, &b, 0.5, DistanceMetric::Absolute).unwrap(), None);
        assert!(detect_delta_star(&a, &b, 0.5000001, DistanceMetric::Absolute).unwrap().is_some());
    }

    #[test]
    fn origin_sweep_is_linear() {
        let a = dmatrix![-1.0, 0.5; 0.3, -0.8];
        let b = dmatrix![1.0; 0.0];
        let opts = SweepOptions {
            ensemble: 8,
            seed: 5,
            tf: 0.5,
            ..Default::default()
        };
        let grid = decade_grid(-3, 2);
        let s = sweep_delta(&a, &b, &DVector::zeros(2), &grid, &opts).unwrap();
        let fl = s.fit("L").unwrap();
        assert!((fl.slope - 1.0).abs() < 0.02);
        for p in &s.per_point {
            assert!(p.mean_r <= p.mean_l);
            assert_eq!(p.n_ok, 8);
        }
        let again = sweep_delta(&a, &b, &DVector::zeros(2), &grid, &opts).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        let a = dmatrix![-1.0];
        let b = dmatrix![1.0];
        let opts = SweepOptions::default();
        assert!(sweep_delta(&a, &b, &dvector![0.0], &[1.0, 1.0], &opts).is_err());
        assert!(sweep_delta(&a, &b, &dvector![0.0], &[-1.0, 1.0], &opts).is_err());
        assert!(sweep_delta(&a, &b, &dvector![0.0], &[], &opts).is_err());
    }

    #[test]
    fn time_sweep_records_failures() {
        // Uncontrollable pair: every horizon fails but the sweep completes.
        let a = DMatrix::identity(2, 2);
        let b = dmatrix![1.0; 1.0];
        let opts = SweepOptions {
            ensemble: 3,
            ..Default::default()
        };
        let s = sweep_time(&a, &b, &DVector::zeros(2), 1e-3, &[0.1, 1.0], &opts).unwrap();
        assert_eq!(s.failures.len(), 2);
        assert!(s.per_point.iter().all(|p| p.n_failed == 3 && p.n_ok == 0));
    }

    #[test]
    fn driver_fractions() {
        assert_eq!(sixty_percent(5), 3);
        assert_eq!(sixty_percent(7), 4);
        assert_eq!(sixty_percent(1), 1);
    }

    #[test]
    fn cv_of_constant_is_zero() {
        assert_eq!(coefficient_of_variation(&[2.0, 2.0, 2.0]), 0.0);
        assert!((coefficient_of_variation(&[1.0, 3.0]) - 0.5).abs() < 1e-15);
    }
}
