//! `∫₀ᵗ e^{As} Q e^{Aᵀs} ds` for symmetric `Q`.

use nalgebra::DMatrix;

use super::expm::expm;
use super::quadrature::CompositeRule;
use super::{asymmetry, max_abs, require_square};
use crate::{Error, Result};

/// Largest `‖A‖₁·h` used for the base step before doubling.
const BASE_STEP_NORM: f64 = 0.5;

/// `∫₀ᵗ e^{As} Q e^{Aᵀs} ds` via the block-triangular exponential
/// `exp([[-A, Q], [0, Aᵀ]] h)` on a short base step `h = t / 2^k`, followed by
/// `k` doublings `W(2h) = W(h) + e^{Ah} W(h) e^{Aᵀh}`.
///
/// The doubling keeps every intermediate a sum of positive semidefinite terms,
/// so neither growing nor decaying exponentials are ever inverted.
pub fn expm_integral(a: &DMatrix<f64>, q: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    check_inputs(a, q, t)?;
    let w = integral_unchecked(a, q, t);
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow { t });
    }
    Ok(w)
}

fn check_inputs(a: &DMatrix<f64>, q: &DMatrix<f64>, t: f64) -> Result<()> {
    require_square(a, "expm_integral")?;
    if q.shape() != a.shape() {
        return Err(Error::Dimension(format!(
            "weight matrix is {}x{}, expected {}x{}",
            q.nrows(),
            q.ncols(),
            a.nrows(),
            a.ncols()
        )));
    }
    let asym = asymmetry(q);
    if asym > 1e-12 * max_abs(q) {
        return Err(Error::Symmetry { asymmetry: asym });
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::OutOfRange(format!("integration length {t} must be finite and >= 0")));
    }
    Ok(())
}

pub(crate) fn integral_unchecked(a: &DMatrix<f64>, q: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let n = a.nrows();
    if t == 0.0 {
        return DMatrix::zeros(n, n);
    }
    let norm = a
        .column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        * t;
    let doublings = if norm > BASE_STEP_NORM {
        (norm / BASE_STEP_NORM).log2().ceil() as i32
    } else {
        0
    };
    let h = t * 2f64.powi(-doublings);

    let mut block = DMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&(-a * h));
    block.view_mut((0, n), (n, n)).copy_from(&(q * h));
    block.view_mut((n, n), (n, n)).copy_from(&(a.transpose() * h));
    let e = expm(&block);
    let f22 = e.view((n, n), (n, n)).into_owned();
    let f12 = e.view((0, n), (n, n)).into_owned();
    let mut phi = f22.transpose();
    let mut w = &phi * f12;
    for _ in 0..doublings {
        w = &w + &phi * &w * phi.transpose();
        phi = &phi * &phi;
    }
    (&w + w.transpose()) * 0.5
}

/// Composite Gauss–Legendre evaluation of the same integral: `order` nodes on
/// each of `max(1, ceil(t))` panels. Independent of the exponential-integral path
/// except for the pointwise `e^{As}`.
pub fn expm_integral_quadrature(
    a: &DMatrix<f64>,
    q: &DMatrix<f64>,
    t: f64,
    order: usize,
) -> Result<DMatrix<f64>> {
    check_inputs(a, q, t)?;
    let n = a.nrows();
    let panels = (t.ceil() as usize).max(1);
    let rule = CompositeRule::uniform(0.0, t, panels, order);
    let mut acc = DMatrix::zeros(n, n);
    for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
        let e = super::matrix_exponential(a, s)?;
        acc += (&e * q * e.transpose()) * w;
    }
    Ok(acc)
}
