//! Acceptance gate. Prints one PASS/FAIL line per criterion with the measured
//! values, the pinned tolerances and the runtime against its budget.
//!
//! Runs with `cargo test -p netctl-core --test acceptance`. The process exits
//! successfully even when a criterion fails, so that the remaining test targets
//! still run; set `NETCTL_ACCEPTANCE_STRICT=1` to turn any FAIL into a nonzero
//! exit status.

mod common;

use std::error::Error as StdError;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use common::{gaussian_matrix, gaussian_vector, rel};
use nalgebra::DVector;
use netctl_core::gramian::{build_gramian, difference_vector, minimum_energy};
use netctl_core::harness::{
    coefficient_of_variation, decade_grid, direction_scan, distribution_scan, fit_affine, fit_power_law,
    random_direction, sixty_percent, sweep_delta, sweep_time_matrix, sweep_x0_norm, ScalingFit, SweepOptions,
    SweepResult,
};
use netctl_core::linalg::{expm_integral, expm_integral_quadrature};
use netctl_core::network::{
    generate_network, select_drivers, shift_spectrum, DriverConfig, NetworkSystem, WeightLaw,
};
use netctl_core::oracle::{oracle_metrics, oracle_min_energy};
use netctl_core::trajectory::{ControlTask, Horizon, LengthMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Res<T> = std::result::Result<T, Box<dyn StdError>>;

/// Outcome of one criterion: whether every clause held, and what was measured.
struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new() -> Self {
        Self {
            pass: true,
            detail: String::new(),
        }
    }

    /// Record one clause.
    fn clause(&mut self, ok: bool, text: impl AsRef<str>) {
        self.pass &= ok;
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        let _ = write!(self.detail, "{}{}", if ok { "" } else { "[x] " }, text.as_ref());
    }
}

// ---------------------------------------------------------------------------
// System generators

/// Random Erdős–Rényi network with random size, density, weight law and
/// stability class, plus `p` drivers. Draws are repeated until the drivers
/// control the network.
fn random_network(rng: &mut ChaCha8Rng, sizes: std::ops::RangeInclusive<usize>, p: Option<usize>) -> Res<(NetworkSystem, DriverConfig)> {
    loop {
        let n = rng.random_range(sizes.clone());
        let degree = if n == 2 { 1.0 } else { rng.random_range(1.0..(n - 1) as f64) };
        let law = if rng.random_bool(0.5) {
            WeightLaw::Uniform01
        } else {
            WeightLaw::StandardNormal
        };
        let base = generate_network(n, degree, law, rng.random())?;
        let sys = shift_spectrum(&base, rng.random_range(-1.0..1.0))?;
        let p = p.unwrap_or_else(|| rng.random_range(1..=n));
        match select_drivers(&sys, p, rng.random()) {
            Ok(drivers) => return Ok((sys, drivers)),
            Err(netctl_core::Error::Uncontrollable(_)) => continue,
            Err(e) => return Err(e.into()),
        }
    }
}

/// Dense Gaussian 2-D system with node 0 as the only driver.
fn planar_system(seed: u64) -> Res<(NetworkSystem, DriverConfig)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sys = NetworkSystem::from_matrix(gaussian_matrix(2, 2, &mut rng) / 2f64.sqrt())?;
    let drivers = DriverConfig::new(2, vec![0])?;
    Ok((sys, drivers))
}

/// The seven-node, average-degree-four, single-driver network of the δ sweeps.
fn sweep_network() -> Res<(NetworkSystem, DriverConfig)> {
    let sys = shift_spectrum(&generate_network(7, 4.0, WeightLaw::Uniform01, 7)?, -1.0)?;
    let drivers = select_drivers(&sys, 1, 7)?;
    Ok((sys, drivers))
}

fn opts(ensemble: usize, seed: u64, tf: f64) -> SweepOptions {
    SweepOptions {
        ensemble,
        seed,
        tf,
        ..SweepOptions::default()
    }
}

fn fit_text(f: &ScalingFit) -> String {
    format!("slope {:.4}, R² {:.6}", f.slope, f.r_squared)
}

fn within(v: f64, target: f64, tol: f64) -> bool {
    (v - target).abs() <= tol
}

// ---------------------------------------------------------------------------
// Criteria

fn endpoint_fidelity() -> Res<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc1);
    let mut worst = 0.0f64;
    let mut errors = Vec::new();
    for k in 0..200 {
        let (sys, drivers) = random_network(&mut rng, 2..=7, None)?;
        let tf = 10f64.powf(rng.random_range(-2.0..1.0));
        let x0 = gaussian_vector(sys.n, &mut rng);
        let xf = gaussian_vector(sys.n, &mut rng);
        let run = || -> Res<f64> {
            let hz = Horizon::new(sys.matrix(), drivers.matrix(), 0.0, tf, 40, 8)?;
            let traj = hz.trajectory(&x0, &xf, LengthMode::Quadrature)?;
            Ok((traj.states.last().expect("samples") - &xf).norm() / xf.norm().max(1.0))
        };
        match run() {
            Ok(miss) => worst = worst.max(miss),
            Err(e) => errors.push(format!("system {k} (N={}, Nd={}, tf={tf:.3e}): {e}", sys.n, drivers.count())),
        }
    }
    let mut v = Verdict::new();
    v.clause(
        worst <= 1e-6,
        format!("worst ‖x(tf)−xf‖/max(1,‖xf‖) = {worst:.2e} over 200 systems (tol 1e-6)"),
    );
    v.clause(errors.is_empty(), format!("{} tasks failed{}", errors.len(), first(&errors)));
    Ok(v)
}

fn first(errors: &[String]) -> String {
    errors.first().map(|e| format!(", first: {e}")).unwrap_or_default()
}

fn energy_vs_oracle() -> Res<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc2);
    let (mut worst_above, mut worst_below) = (0.0f64, 0.0f64);
    let mut errors = Vec::new();
    for k in 0..50 {
        let (sys, drivers) = random_network(&mut rng, 2..=5, Some(1))?;
        let x0 = gaussian_vector(sys.n, &mut rng);
        let xf = gaussian_vector(sys.n, &mut rng);
        let run = || -> Res<(f64, f64)> {
            let g = build_gramian(sys.matrix(), drivers.matrix(), 0.0, 1.0)?;
            let d = difference_vector(sys.matrix(), &x0, &xf, 0.0, 1.0)?;
            let exact = minimum_energy(&g, &d)?;
            let task = ControlTask::new(&sys, &drivers, x0.clone(), xf.clone(), 0.0, 1.0)?;
            Ok((exact, oracle_min_energy(&task, 200)?.energy))
        };
        match run() {
            Ok((exact, oracle)) => {
                let r = (oracle - exact) / exact;
                worst_above = worst_above.max(r);
                worst_below = worst_below.max(-r);
            }
            Err(e) => errors.push(format!("system {k}: {e}")),
        }
    }
    let mut v = Verdict::new();
    v.clause(worst_above <= 0.01, format!("max (E_m − E)/E = {worst_above:.3e} (tol +1%)"));
    v.clause(worst_below <= 1e-9, format!("max (E − E_m)/E = {worst_below:.3e} (tol 1e-9)"));
    v.clause(errors.is_empty(), format!("{} systems failed{}", errors.len(), first(&errors)));
    Ok(v)
}

/// CV of the plateau means (`δ ≤ δ*/10`), or `None` with fewer than two points.
fn plateau_cv(s: &SweepResult, delta_star: f64) -> Option<f64> {
    let means: Vec<f64> = s
        .per_point
        .iter()
        .filter(|p| p.value <= delta_star / 10.0)
        .map(|p| p.mean_l)
        .collect();
    (means.len() >= 2).then(|| coefficient_of_variation(&means))
}

fn delta_scaling() -> Res<Verdict> {
    let (sys, drivers) = sweep_network()?;
    let grid = decade_grid(-5, 5);
    let o = opts(100, 0xc3, 1.0);
    let dir = random_direction(7, 0xc3);
    let mut v = Verdict::new();

    let origin = sweep_delta(sys.matrix(), drivers.matrix(), &DVector::zeros(7), &grid, &o)?;
    for q in ["L", "R"] {
        let f = origin.fit(q).ok_or("missing origin fit")?;
        v.clause(
            within(f.slope, 1.0, 0.02) && f.r_squared >= 0.999,
            format!("x0=0 {q}: {} (want 1±0.02, R²≥0.999)", fit_text(f)),
        );
    }
    for norm in [1e-1, 1e3] {
        let s = sweep_delta(sys.matrix(), drivers.matrix(), &(&dir * norm), &grid, &o)?;
        let Some(c) = s.crossover else {
            v.clause(false, format!("‖x0‖={norm:e}: no crossover detected"));
            continue;
        };
        let cv = plateau_cv(&s, c.delta_star);
        v.clause(
            cv.is_some_and(|cv| cv < 0.02),
            format!("‖x0‖={norm:e}: δ*={:.2e}, plateau CV {} (want <2%)", c.delta_star, cv.map_or("n/a".into(), |c| format!("{c:.2e}"))),
        );
        for q in ["L", "R"] {
            let f = s.fit(q).ok_or("missing branch fit")?;
            v.clause(
                within(f.slope, 1.0, 0.05),
                format!("‖x0‖={norm:e} {q}: {} (want 1±0.05)", fit_text(f)),
            );
        }
    }
    Ok(v)
}

fn crossover_scaling() -> Res<Verdict> {
    let (sys, drivers) = sweep_network()?;
    let norms = [1e-2, 1e-1, 1.0, 1e1, 1e2];
    let o = opts(100, 0xc4, 1.0);
    let dir = random_direction(7, 0xc4);
    let ns = sweep_x0_norm(sys.matrix(), drivers.matrix(), &dir, &norms, &decade_grid(-7, 7), &o)?;
    let mut v = Verdict::new();
    let found = ns.delta_star.iter().filter(|d| d.is_some()).count();
    v.clause(found == norms.len(), format!("δ* found for {found}/{} norms", norms.len()));
    for (q, tol) in [("delta_star", 0.1), ("L_star", 0.05), ("R_star", 0.05)] {
        match ns.summary.fit(q) {
            Some(f) => v.clause(within(f.slope, 1.0, tol), format!("{q} vs ‖x0‖: {} (want 1±{tol})", fit_text(f))),
            None => v.clause(false, format!("{q}: no fit")),
        }
    }
    Ok(v)
}

fn direction_structure() -> Res<Verdict> {
    let (sys, drivers) = planar_system(0xc5)?;
    let (a, b) = (sys.matrix(), drivers.matrix());
    let tf = 1e-2;
    let o = opts(1, 0xc5, tf);
    let x0 = random_direction(2, 0xc5);
    // Along ±d₀, d₀ = x₀ − e^{A t_f}x₀, the forced part of the path vanishes at δ = ‖d₀‖.
    let d0 = -difference_vector(a, &x0, &x0, 0.0, tf)?;
    let delta_b = d0.norm();
    let unit = &d0 / delta_b;
    let grid: Vec<f64> = (0..80).map(|i| delta_b * (0.05 + 3.95 * i as f64 / 79.0)).collect();
    let scan = direction_scan(a, b, &x0, &unit, &grid, &o)?;
    let mut v = Verdict::new();

    // One direction is affine, the other V-shaped.
    let (affine, vee) = if scan.minus_fit.fall.is_some() {
        (&scan.plus_fit, &scan.minus_fit)
    } else {
        (&scan.minus_fit, &scan.plus_fit)
    };
    v.clause(
        affine.fall.is_none() && affine.rise.r_squared >= 0.999,
        format!("affine branch R² {:.6}", affine.rise.r_squared),
    );
    match &vee.fall {
        Some(fall) => v.clause(
            fall.r_squared >= 0.999 && vee.rise.r_squared >= 0.999,
            format!("V branches R² {:.6} / {:.6}", fall.r_squared, vee.rise.r_squared),
        ),
        None => v.clause(false, "no V-shaped direction"),
    }
    v.clause(
        scan.a_spread <= 0.05 && scan.b_spread <= 0.05,
        format!("a spread {:.2e}, b spread {:.2e} (tol 5%)", scan.a_spread, scan.b_spread),
    );
    let bp = vee.breakpoint.unwrap_or(delta_b);
    let below: Vec<f64> = grid
        .iter()
        .zip(&scan.pair_mean)
        .filter(|(d, _)| **d < bp)
        .map(|(_, m)| *m)
        .collect();
    let lo = below.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = below.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    v.clause(
        !below.is_empty() && hi / lo - 1.0 <= 0.02,
        format!("pair mean below breakpoint varies {:.2e} (tol 2%)", hi / lo - 1.0),
    );
    let above = fit_power_law(&grid, &scan.pair_mean, Some((bp, f64::INFINITY)))?;
    v.clause(
        within(above.slope, 1.0, 0.02),
        format!("pair mean above breakpoint {} (want 1±0.02)", fit_text(&above)),
    );

    let origin = direction_scan(a, b, &DVector::zeros(2), &unit, &grid, &o)?;
    let f = fit_affine(&grid, &origin.plus_l, None)?;
    let scale = origin.plus_l.iter().copied().fold(0.0, f64::max);
    v.clause(
        f.intercept.abs() <= 1e-9 * scale && f.r_squared >= 0.9999,
        format!("x0=0: |b|/L_max {:.1e}, R² {:.8}", f.intercept.abs() / scale, f.r_squared),
    );
    Ok(v)
}

fn arcsine_law() -> Res<Verdict> {
    let (mut worst_l, mut worst_r, mut worst_u) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..5u64 {
        let (sys, drivers) = planar_system(0xc6 + seed)?;
        let o = opts(1, seed, 1e-2);
        let origin = distribution_scan(sys.matrix(), drivers.matrix(), &DVector::zeros(2), 1e-5, 100, &o)?;
        worst_l = worst_l.max(origin.length_distribution.ks_statistic_vs_arcsine);
        worst_r = worst_r.max(origin.radius_distribution.ks_statistic_vs_arcsine);
        let x0 = random_direction(2, seed);
        let away = distribution_scan(sys.matrix(), drivers.matrix(), &x0, 1e-5, 100, &o)?;
        worst_u = worst_u.max(away.length_distribution.ks_statistic_vs_uniform);
    }
    let mut v = Verdict::new();
    v.clause(worst_l <= 0.15, format!("x0=0 KS(L, arcsine) max {worst_l:.4} over 5 systems (tol 0.15)"));
    v.clause(worst_r <= 0.15, format!("x0=0 KS(R, arcsine) max {worst_r:.4} (tol 0.15)"));
    v.clause(worst_u <= 0.15, format!("x0≠0 KS(L, uniform) max {worst_u:.4} (tol 0.15)"));
    Ok(v)
}

fn regime_matrix() -> Res<Verdict> {
    let base = generate_network(5, 3.5, WeightLaw::Uniform01, 5)?;
    let delta = 1e-3;
    let counts = [1, sixty_percent(5), 5];
    let cells = sweep_time_matrix(
        &base,
        &[-1.0, 0.0, 1.0],
        &counts,
        delta,
        &decade_grid(-2, 2),
        0xc7,
        &opts(100, 0xc7, 1.0),
    )?;
    let cell = |lambda: f64, p: usize| {
        cells
            .iter()
            .find(|c| (c.lambda1 - lambda).abs() < 1e-6 && c.drivers.len() == p)
            .expect("every combination is swept")
    };
    let short = |lambda: f64, p: usize, target: f64, tol: f64| -> (bool, String) {
        let r = &cell(lambda, p).regimes;
        match (&r.short_l, &r.short_r) {
            (Some(l), Some(rr)) => (
                within(l.slope, target, tol) && within(rr.slope, target, tol),
                format!("L {:.3}, R {:.3}", l.slope, rr.slope),
            ),
            _ => (false, "no short-time fit".into()),
        }
    };
    let mut v = Verdict::new();

    let min_success = cells.iter().map(|c| c.regimes.success_fraction).fold(1.0, f64::min);
    v.clause(min_success >= 0.8, format!("min grid success {:.0}% (need 80%)", 100.0 * min_success));

    let (ok, text) = short(-1.0, 1, -4.0, 0.5);
    v.clause(ok, format!("(a) Nd=1 λ1=−1 short-time exponent {text} (want −4±0.5)"));

    let r = &cell(0.0, 1).regimes;
    let mean_l = cell(0.0, 1).sweep.per_point.iter().filter(|p| p.n_ok > 0).map(|p| p.mean_l).sum::<f64>()
        / (r.success_fraction * 41.0);
    v.clause(
        r.overall_cv_l < 0.05 && r.overall_cv_r < 0.05 && rel(mean_l, delta) <= 0.1,
        format!(
            "(b) Nd=1 λ1=0 CV L {:.3}, R {:.3}, mean L/δ {:.3} (want CV<5%, within 10% of δ)",
            r.overall_cv_l,
            r.overall_cv_r,
            mean_l / delta
        ),
    );

    let (ok, text) = short(1.0, 1, -4.0, 0.5);
    let r = &cell(1.0, 1).regimes;
    v.clause(
        ok && r.plateau,
        format!("(c) Nd=1 λ1=+1 short-time {text}, tail CV {:.3} (want −4±0.5 then CV<5%)", r.tail_cv_l),
    );

    for lambda in [-1.0, 1.0] {
        let (ok, text) = short(lambda, counts[1], -1.0, 0.3);
        v.clause(ok, format!("(d) Nd={} λ1={lambda:+} short-time {text} (want −1±0.3)", counts[1]));
    }

    for lambda in [-1.0, 0.0, 1.0] {
        let r = &cell(lambda, 5).regimes;
        v.clause(
            r.overall_cv_l < 0.05 && r.overall_cv_r < 0.05,
            format!("(e) Nd=5 λ1={lambda:+} CV L {:.3}, R {:.3} (want <5%)", r.overall_cv_l, r.overall_cv_r),
        );
    }

    for lambda in [0.0, 1.0] {
        for &p in &counts {
            let r = &cell(lambda, p).regimes;
            if !r.plateau {
                continue;
            }
            v.clause(
                rel(r.tail_l, delta) <= 0.1 && rel(r.tail_l, r.tail_r) <= 0.05,
                format!(
                    "(f) λ1={lambda:+} Nd={p} plateau α/δ {:.3}, |L−R|/R {:.3} (want ±10%, ≤5%)",
                    r.tail_l / delta,
                    rel(r.tail_l, r.tail_r)
                ),
            );
        }
    }
    Ok(v)
}

fn symmetry_suite() -> Res<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc8);
    let (mut worst_scale, mut worst_sign) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let (sys, drivers) = random_network(&mut rng, 2..=7, None)?;
        let hz = Horizon::new(sys.matrix(), drivers.matrix(), 0.0, 1.0, 40, 8)?;
        let x0 = DVector::zeros(sys.n);
        let xf = gaussian_vector(sys.n, &mut rng);
        let base = hz.metrics(&x0, &xf, LengthMode::Quadrature)?;
        for l in [1e-3, 3.7, 1e3] {
            let m = hz.metrics(&x0, &(&xf * l), LengthMode::Quadrature)?;
            worst_scale = worst_scale.max(rel(m.length, l * base.length)).max(rel(m.radius, l * base.radius));
        }
        let m = hz.metrics(&x0, &(-&xf), LengthMode::Quadrature)?;
        worst_sign = worst_sign.max(rel(m.length, base.length)).max(rel(m.radius, base.radius));
    }
    let mut v = Verdict::new();
    v.clause(worst_scale <= 1e-10, format!("xf→l·xf worst rel {worst_scale:.1e} (tol 1e-10)"));
    v.clause(worst_sign <= 1e-12, format!("xf→−xf worst rel {worst_sign:.1e} (tol 1e-12)"));
    Ok(v)
}

fn kernel_cross_checks() -> Res<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc9);
    let mut v = Verdict::new();

    let mut worst_w = 0.0f64;
    for _ in 0..20 {
        let (sys, drivers) = random_network(&mut rng, 2..=7, None)?;
        let tf = 10f64.powf(rng.random_range(-1.0..0.7));
        let q = drivers.matrix() * drivers.matrix().transpose();
        let w = expm_integral(sys.matrix(), &q, tf)?;
        let wq = expm_integral_quadrature(sys.matrix(), &q, tf, 64)?;
        worst_w = worst_w.max((&w - &wq).norm() / w.norm());
    }
    v.clause(worst_w <= 1e-8, format!("Gramian vs 64-node quadrature worst rel {worst_w:.1e} (tol 1e-8)"));

    let mut worst_l = 0.0f64;
    for _ in 0..5 {
        let (sys, drivers) = random_network(&mut rng, 5..=5, Some(1))?;
        let sys = shift_spectrum(&sys, -rng.random_range(0.1..1.0))?;
        let x0 = gaussian_vector(5, &mut rng);
        let xf = gaussian_vector(5, &mut rng);
        let task = ControlTask::new(&sys, &drivers, x0.clone(), xf.clone(), 0.0, 1.0)?;
        let hz = task.horizon()?;
        let quad = hz.metrics(&x0, &xf, LengthMode::Quadrature)?.length;
        let dense = oracle_metrics(&oracle_min_energy(&task, 10_000)?).length;
        worst_l = worst_l.max(rel(quad, dense));
    }
    v.clause(worst_l <= 0.01, format!("L quadrature vs m=1e4 oracle worst rel {worst_l:.1e} (tol 1%)"));

    let mut general = 0.0f64;
    let mut identity = 0.0f64;
    for _ in 0..5 {
        let n = rng.random_range(2..=6);
        let a = gaussian_matrix(n, n, &mut rng) / (n as f64).sqrt();
        let sys = NetworkSystem::from_matrix(a)?;
        let xf = gaussian_vector(n, &mut rng);
        let one = select_drivers(&sys, 1, rng.random())?;
        let hz = Horizon::new(sys.matrix(), one.matrix(), 0.0, 1.0, 40, 8)?;
        general = general.max(hz.length_gramian_form(&xf)?.rel_discrepancy);
        let all = DriverConfig::full(n)?;
        let hz = Horizon::new(sys.matrix(), all.matrix(), 0.0, 1.0, 40, 8)?;
        identity = identity.max(hz.length_gramian_form(&xf)?.rel_discrepancy);
    }
    v.clause(true, format!("Gramian-form length vs direct, single driver: worst rel {general:.2e} (reported)"));
    v.clause(identity <= 1e-6, format!("Gramian-form length vs direct, BBᵀ=I: worst rel {identity:.1e} (tol 1e-6)"));
    Ok(v)
}

// ---------------------------------------------------------------------------

struct Criterion {
    id: u8,
    name: &'static str,
    budget: Duration,
    run: fn() -> Res<Verdict>,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "endpoint fidelity", budget: Duration::from_secs(60), run: endpoint_fidelity },
        Criterion { id: 2, name: "energy vs discrete oracle", budget: Duration::from_secs(120), run: energy_vs_oracle },
        Criterion { id: 3, name: "length and radius vs distance", budget: Duration::from_secs(300), run: delta_scaling },
        Criterion { id: 4, name: "crossover scaling with ‖x0‖", budget: Duration::from_secs(600), run: crossover_scaling },
        Criterion { id: 5, name: "per-direction affine structure", budget: Duration::from_secs(60), run: direction_structure },
        Criterion { id: 6, name: "length distributions", budget: Duration::from_secs(60), run: arcsine_law },
        Criterion { id: 7, name: "control-time regime matrix", budget: Duration::from_secs(600), run: regime_matrix },
        Criterion { id: 8, name: "symmetry and homogeneity", budget: Duration::from_secs(30), run: symmetry_suite },
        Criterion { id: 9, name: "kernel cross-checks", budget: Duration::from_secs(120), run: kernel_cross_checks },
    ];
    let only: Option<u8> = std::env::var("NETCTL_ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    let mut ran = 0;
    for c in criteria.iter().filter(|c| only.is_none_or(|id| id == c.id)) {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(v) => (v.pass && elapsed <= c.budget, v.detail),
            Err(e) => (false, format!("[x] error: {e}")),
        };
        ran += 1;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {} ({}): {} [{:.1} s, budget {} s]",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            detail,
            elapsed.as_secs_f64(),
            c.budget.as_secs()
        );
    }
    println!("acceptance: {}/{} criteria pass", ran - failed, ran);
    if failed > 0 && std::env::var_os("NETCTL_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
