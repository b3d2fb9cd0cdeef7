//! Ordinary least-squares fits in linear and log–log coordinates.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `log₁₀ y = slope · log₁₀ x + intercept`
    PowerLaw,
    /// `y = slope · x + intercept`
    Affine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub model: FitModel,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub fit_range: [f64; 2],
    pub n_points: usize,
}

/// A fit tagged with the quantity it describes, for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledFit {
    pub quantity: String,
    #[serde(flatten)]
    pub fit: ScalingFit,
}

impl LabeledFit {
    pub fn new(quantity: impl Into<String>, fit: ScalingFit) -> Self {
        Self {
            quantity: quantity.into(),
            fit,
        }
    }
}

fn select(xs: &[f64], ys: &[f64], range: Option<(f64, f64)>) -> Result<Vec<(f64, f64)>> {
    if xs.len() != ys.len() {
        return Err(Error::Dimension(format!("{} abscissae, {} ordinates", xs.len(), ys.len())));
    }
    let (lo, hi) = range.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, _)| **x >= lo && **x <= hi)
        .map(|(x, y)| (*x, *y))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientPoints(pts.len()));
    }
    Ok(pts)
}

/// Slope, intercept and `R²` of the least-squares line through `pts`.
fn ols(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy > 0.0 {
        1.0 - ss_res / syy
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    (slope, intercept, r2.clamp(0.0, 1.0))
}

fn bounds(pts: &[(f64, f64)]) -> [f64; 2] {
    let lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    [lo, hi]
}

/// Power law `y = 10^intercept · x^slope`, fitted on `log₁₀` of both axes over
/// the points with `x` inside `range` (inclusive).
pub fn fit_power_law(xs: &[f64], ys: &[f64], range: Option<(f64, f64)>) -> Result<ScalingFit> {
    let pts = select(xs, ys, range)?;
    if let Some(&(x, y)) = pts.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::NonPositive(if x > 0.0 { y } else { x }));
    }
    let logs: Vec<(f64, f64)> = pts.iter().map(|(x, y)| (x.log10(), y.log10())).collect();
    let (slope, intercept, r_squared) = ols(&logs);
    Ok(ScalingFit {
        model: FitModel::PowerLaw,
        slope,
        intercept,
        r_squared,
        fit_range: bounds(&pts),
        n_points: pts.len(),
    })
}

/// Straight line `y = slope·x + intercept` over the points inside `range`.
pub fn fit_affine(xs: &[f64], ys: &[f64], range: Option<(f64, f64)>) -> Result<ScalingFit> {
    let pts = select(xs, ys, range)?;
    let (slope, intercept, r_squared) = ols(&pts);
    Ok(ScalingFit {
        model: FitModel::Affine,
        slope,
        intercept,
        r_squared,
        fit_range: bounds(&pts),
        n_points: pts.len(),
    })
}

/// Two affine pieces joined at a breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseFit {
    /// Last abscissa of the left piece.
    pub breakpoint: f64,
    pub left: ScalingFit,
    pub right: ScalingFit,
}

/// Scan every split of the (sorted) points that leaves at least three on each
/// side and keep the one with the largest summed `R²`. Ties go to the earliest
/// split.
pub fn fit_piecewise_affine(xs: &[f64], ys: &[f64]) -> Result<PiecewiseFit> {
    let mut pts = select(xs, ys, None)?;
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.len() < 6 {
        return Err(Error::InsufficientPoints(pts.len()));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let mut best: Option<(f64, PiecewiseFit)> = None;
    for split in 3..=pts.len() - 3 {
        let left = fit_affine(&xs[..split], &ys[..split], None)?;
        let right = fit_affine(&xs[split..], &ys[split..], None)?;
        let score = left.r_squared + right.r_squared;
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((
                score,
                PiecewiseFit {
                    breakpoint: xs[split - 1],
                    left,
                    right,
                },
            ));
        }
    }
    Ok(best.expect("at least one split").1)
}
