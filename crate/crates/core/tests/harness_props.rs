mod common;

use common::{random_pair, rel};
use nalgebra::{dvector, DVector};
use netctl_core::harness::{
    coefficient_of_variation, decade_grid, direction_scan, distribution_scan, ks_statistic, log_grid,
    sweep_delta, SweepOptions,
};
use netctl_core::network::{generate_network, select_drivers, WeightLaw};
use proptest::prelude::*;

fn opts(ensemble: usize, seed: u64, tf: f64) -> SweepOptions {
    SweepOptions {
        ensemble,
        seed,
        tf,
        ..SweepOptions::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn length_distribution_rescales_with_distance(seed in any::<u64>(), log_delta in -6.0f64..0.0) {
        let (sys, drv) = random_pair(2, 1, seed, None);
        let o = opts(1, seed, 1e-2);
        let delta = 10f64.powf(log_delta);
        let x0 = DVector::zeros(2);
        let small = distribution_scan(sys.matrix(), drv.matrix(), &x0, delta, 100, &o).unwrap();
        let large = distribution_scan(sys.matrix(), drv.matrix(), &x0, 100.0 * delta, 100, &o).unwrap();
        for (s, l) in small.lengths.iter().zip(&large.lengths) {
            prop_assert!(rel(l / 100.0, *s) <= 1e-10);
        }
        let (ds, dl) = (&small.length_distribution, &large.length_distribution);
        prop_assert!((ds.ks_statistic_vs_arcsine - dl.ks_statistic_vs_arcsine).abs() <= 1e-9);
        prop_assert!((ds.ks_statistic_vs_uniform - dl.ks_statistic_vs_uniform).abs() <= 1e-9);
    }

    #[test]
    fn pair_average_cancels_the_direction(seed in any::<u64>(), angle in 0.0f64..6.28) {
        let (sys, drv) = random_pair(2, 1, seed, None);
        let o = opts(1, seed, 1e-2);
        let x0 = dvector![1.0, 0.5];
        let dir = dvector![angle.cos(), angle.sin()];
        let grid = log_grid(-7.0, -4.0, 16);
        let scan = direction_scan(sys.matrix(), drv.matrix(), &x0, &dir, &grid, &o).unwrap();
        let lo = scan.pair_mean.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = scan.pair_mean.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(hi / lo - 1.0 <= 0.02, "pair mean varies by {}", hi / lo - 1.0);
        // Each branch still moves with δ; only the average is flat.
        let spread = |v: &[f64]| v[v.len() - 1] - v[0];
        prop_assert!(spread(&scan.plus_l).abs() > 10.0 * (hi - lo));
    }
}

#[test]
fn sweeps_are_reproducible_across_thread_counts() {
    let (sys, drv) = random_pair(4, 1, 11, Some(-0.5));
    let o = opts(16, 99, 0.5);
    let x0 = dvector![0.3, -0.2, 0.1, 0.4];
    let grid = decade_grid(-4, 0);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sweep_delta(sys.matrix(), drv.matrix(), &x0, &grid, &o).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one, four);
    assert_eq!(serde_json::to_string(&one).unwrap(), serde_json::to_string(&four).unwrap());
}

#[test]
fn plateau_constant_doubles_with_the_initial_state() {
    let (sys, drv) = random_pair(3, 1, 5, Some(-0.2));
    let o = opts(20, 3, 1.0);
    let x0 = dvector![0.6, -0.3, 0.2];
    let grid = decade_grid(-5, 1);
    let doubled: Vec<f64> = grid.iter().map(|d| 2.0 * d).collect();
    let base = sweep_delta(sys.matrix(), drv.matrix(), &x0, &grid, &o).unwrap();
    let twice = sweep_delta(sys.matrix(), drv.matrix(), &(&x0 * 2.0), &doubled, &o).unwrap();
    let (c1, c2) = (base.crossover.unwrap(), twice.crossover.unwrap());
    assert!(rel(c2.l_star, 2.0 * c1.l_star) <= 1e-9);
    assert!(rel(c2.r_star, 2.0 * c1.r_star) <= 1e-9);
    assert!(rel(c2.delta_star, 2.0 * c1.delta_star) <= 1e-12);
}

#[test]
fn far_initial_state_flattens_the_small_distance_curve() {
    let sys = generate_network(7, 4.0, WeightLaw::default(), 21).unwrap();
    let drv = select_drivers(&sys, 1, 21).unwrap();
    let dir = dvector![1.0, -1.0, 0.5, 0.0, 2.0, -0.5, 1.0];
    let x0 = &dir * (1e3 / dir.norm());
    let grid = decade_grid(-5, -1);
    let s = sweep_delta(sys.matrix(), drv.matrix(), &x0, &grid, &opts(20, 8, 1.0)).unwrap();
    let means: Vec<f64> = s.per_point.iter().map(|p| p.mean_l).collect();
    assert!(coefficient_of_variation(&means) < 0.02);
}

/// Near a nonzero start `L` is affine in the direction, `L ≈ L₀ + δ c·v`, so
/// over uniform directions in the plane it follows the arcsine law centred on
/// `L₀` rather than the quarter-arcsine law of the origin.
#[test]
fn lengths_near_a_nonzero_start_follow_the_centred_arcsine_law() {
    for seed in 0..5 {
        let (sys, drv) = random_pair(2, 1, seed, None);
        let x0 = dvector![1.0, -0.7];
        let scan = distribution_scan(sys.matrix(), drv.matrix(), &x0, 1e-5, 400, &opts(1, seed, 1e-2)).unwrap();
        let v = &scan.length_distribution.sorted_values;
        let (lo, hi) = (v[0], v[v.len() - 1]);
        let centred = |x: f64| 0.5 + ((2.0 * x - lo - hi) / (hi - lo)).clamp(-1.0, 1.0).asin() / std::f64::consts::PI;
        let ks = ks_statistic(v, centred);
        assert!(ks <= 0.08, "seed {seed}: KS {ks:.4}");
        assert!(scan.length_distribution.ks_statistic_vs_uniform > ks);
    }
}
