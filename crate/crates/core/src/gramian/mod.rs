//! Controllability Gramian, difference vector, optimal input and minimum energy.
//!
//! For `ẋ = Ax + Bu` on `[t₀, t_f]` the input of least energy `∫‖u‖²dt` that
//! steers `x₀` to `x_f` is `u(t) = Bᵀ e^{Aᵀ(t_f−t)} W⁻¹ d` with
//! `d = x_f − e^{A(t_f−t₀)} x₀` and Gramian
//! `W = ∫ e^{A(t_f−τ)} BBᵀ e^{Aᵀ(t_f−τ)} dτ`; its energy is `dᵀW⁻¹d`.

pub mod balance;

use nalgebra::{DMatrix, DVector};

pub use balance::Balanced;

use crate::linalg::{expm_integral, matrix_exponential, SpdFactor};
use crate::{Error, Result};

/// Horizons shorter than this are rejected outright.
pub const MIN_HORIZON: f64 = 1e-12;

/// `W[t₀, t_f]` in original coordinates, together with the balanced coordinates
/// used for every solve.
#[derive(Debug, Clone)]
pub struct Gramian {
    pub matrix: DMatrix<f64>,
    pub t0: f64,
    pub tf: f64,
    /// Condition number of the balanced Gramian, the matrix actually factored.
    /// Infinite when the pair is not controllable.
    pub condition_estimate: f64,
    pub(crate) balanced: Balanced,
    pub(crate) factor: Option<SpdFactor>,
}

impl Gramian {
    pub fn horizon(&self) -> f64 {
        self.tf - self.t0
    }

    pub fn balanced(&self) -> &Balanced {
        &self.balanced
    }

    pub(crate) fn factor(&self) -> Result<&SpdFactor> {
        self.factor.as_ref().ok_or(Error::NearSingular {
            condition: self.condition_estimate,
        })
    }

    /// `W⁻¹ v` in original coordinates.
    pub fn solve(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(v, self.matrix.nrows())?;
        let vt = self.balanced.to_balanced(v);
        let yt = self.factor()?.solve(&vt)?;
        Ok(self.balanced.t_inv.transpose() * yt)
    }
}

pub(crate) fn check_len(v: &DVector<f64>, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::Dimension(format!("vector of length {} for a system of order {n}", v.len())));
    }
    Ok(())
}

pub(crate) fn check_pair(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    crate::linalg::require_square(a, "system matrix")?;
    if b.nrows() != a.nrows() || b.ncols() == 0 {
        return Err(Error::Dimension(format!(
            "input matrix is {}x{} for a system of order {}",
            b.nrows(),
            b.ncols(),
            a.nrows()
        )));
    }
    Ok(())
}

pub(crate) fn check_interval(t0: f64, tf: f64) -> Result<()> {
    if !(t0.is_finite() && tf.is_finite()) || !(tf - t0 >= MIN_HORIZON) {
        return Err(Error::Interval { t0, tf });
    }
    Ok(())
}

/// Build `W[t₀, t_f]`. Only the horizon length matters for time-invariant systems.
pub fn build_gramian(a: &DMatrix<f64>, b: &DMatrix<f64>, t0: f64, tf: f64) -> Result<Gramian> {
    check_pair(a, b)?;
    check_interval(t0, tf)?;
    let h = tf - t0;
    let matrix = expm_integral(a, &(b * b.transpose()), h)?;
    let balanced = match balance::balance(a, b, h) {
        Ok(bal) => bal,
        Err(Error::Uncontrollable(_)) => Balanced::identity(a, b, h),
        Err(e) => return Err(e),
    };
    if balanced.w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow { t: h });
    }
    let (factor, condition_estimate) = match SpdFactor::new(&balanced.w) {
        Ok(f) => {
            let c = f.condition();
            (Some(f), c)
        }
        Err(Error::NearSingular { condition }) => (None, condition),
        Err(e) => return Err(e),
    };
    Ok(Gramian {
        matrix,
        t0,
        tf,
        condition_estimate,
        balanced,
        factor,
    })
}

/// `x_f − e^{A(t_f−t₀)} x₀`.
pub fn difference_vector(
    a: &DMatrix<f64>,
    x0: &DVector<f64>,
    xf: &DVector<f64>,
    t0: f64,
    tf: f64,
) -> Result<DVector<f64>> {
    crate::linalg::require_square(a, "system matrix")?;
    check_len(x0, a.nrows())?;
    check_len(xf, a.nrows())?;
    Ok(xf - matrix_exponential(a, tf - t0)? * x0)
}

/// The optimal open-loop input, ready for evaluation at any `t ∈ [t₀, t_f]`.
#[derive(Debug, Clone)]
pub struct OptimalInputSpec {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub winv_d: DVector<f64>,
    pub t0: f64,
    pub tf: f64,
}

/// Solve for `W⁻¹d` once; the result is cached in the returned spec.
pub fn optimal_input(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    x0: &DVector<f64>,
    xf: &DVector<f64>,
    t0: f64,
    tf: f64,
) -> Result<OptimalInputSpec> {
    let g = build_gramian(a, b, t0, tf)?;
    let d = difference_vector(a, x0, xf, t0, tf)?;
    let winv_d = g.solve(&d)?;
    Ok(OptimalInputSpec {
        a: a.clone(),
        b: b.clone(),
        winv_d,
        t0,
        tf,
    })
}

/// `u(t) = Bᵀ e^{Aᵀ(t_f−t)} W⁻¹d`.
pub fn evaluate_input(spec: &OptimalInputSpec, t: f64) -> Result<DVector<f64>> {
    if !(t >= spec.t0 && t <= spec.tf) {
        return Err(Error::Domain {
            t,
            t0: spec.t0,
            tf: spec.tf,
        });
    }
    let e = matrix_exponential(&spec.a.transpose(), spec.tf - t)?;
    Ok(spec.b.transpose() * (e * &spec.winv_d))
}

/// `dᵀW⁻¹d`, evaluated in balanced coordinates.
pub fn minimum_energy(g: &Gramian, d: &DVector<f64>) -> Result<f64> {
    check_len(d, g.matrix.nrows())?;
    let dt = g.balanced.to_balanced(d);
    let y = g.factor()?.solve(&dt)?;
    Ok(dt.dot(&y).max(0.0))
}
