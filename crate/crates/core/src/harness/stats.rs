//! Empirical distributions and Kolmogorov–Smirnov distances.

use std::f64::consts::FRAC_2_PI;

use serde::Serialize;

use crate::{Error, Result};

/// `P(L ≤ x) = (2/π) arcsin(x / 2r)` on `[0, 2r]`.
pub fn arcsine_cdf(x: f64, r: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 2.0 * r {
        1.0
    } else {
        FRAC_2_PI * (x / (2.0 * r)).asin()
    }
}

/// Uniform CDF on `[lo, hi]`; a point mass when `lo == hi`.
pub fn uniform_cdf(x: f64, lo: f64, hi: f64) -> f64 {
    if x < lo {
        0.0
    } else if x >= hi {
        1.0
    } else {
        (x - lo) / (hi - lo)
    }
}

/// Exact one-sample KS statistic `sup |F_n − F|` for ascending `sorted`.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |d: f64, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDistribution {
    pub sorted_values: Vec<f64>,
    /// Half the largest value.
    pub r_param: f64,
    pub ks_statistic_vs_arcsine: f64,
    pub ks_statistic_vs_uniform: f64,
}

impl EmpiricalDistribution {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientPoints(0));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite sample {bad}")));
        }
        values.sort_by(f64::total_cmp);
        let lo = values[0];
        let hi = values[values.len() - 1];
        let r = hi / 2.0;
        Ok(Self {
            ks_statistic_vs_arcsine: ks_statistic(&values, |x| arcsine_cdf(x, r)),
            ks_statistic_vs_uniform: ks_statistic(&values, |x| uniform_cdf(x, lo, hi)),
            r_param: r,
            sorted_values: values,
        })
    }

    /// Fraction of samples `≤ x`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted_values.partition_point(|v| *v <= x) as f64 / self.sorted_values.len() as f64
    }
}
