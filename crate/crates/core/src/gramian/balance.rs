//! Well-scaled state coordinates for a fixed horizon.
//!
//! Single-driver Gramians of even small networks span many orders of magnitude,
//! and unstable modes make them grow like `e^{2λt}`. Solving `W y = d` in the
//! original coordinates then loses most significant digits. We instead work in
//! coordinates `x = T x̃` in which the Gramian over the horizon has unit
//! diagonal and a moderate condition number:
//!
//! * **Staircase**: a block Krylov basis of `(A, B)` puts the pair in
//!   block-Hessenberg form; coordinate `i` of Krylov layer `k` is rescaled by
//!   `c^k` (times the subdiagonal singular values) with `c` the horizon, which is
//!   the natural scaling of an integrator chain. A final diagonal (Jacobi)
//!   scaling equalizes the Gramian's diagonal.
//! * **Dichotomy**: when an unstable mode grows by more than `e^3` over the
//!   horizon, the state space is split with matrix sign functions into
//!   invariant subspaces whose growth rates differ by more than `e^3`. The
//!   unstable blocks are later evaluated backwards from the target, where they
//!   decay.

use nalgebra::{DMatrix, SVD};

use crate::linalg::integral::integral_unchecked;
use crate::linalg::spectrum;
use crate::{Error, Result};

/// Growth exponent `λ₁·h` above which the unstable subspace is split off.
const DICHOTOMY_THRESHOLD: f64 = 3.0;

/// `x = T x̃`, `Ã = T⁻¹AT`, `B̃ = T⁻¹B`, and the Gramian `W̃` over the horizon.
#[derive(Debug, Clone)]
pub struct Balanced {
    pub t: DMatrix<f64>,
    pub t_inv: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub w: DMatrix<f64>,
    /// Leading coordinates `0..unstable` form an invariant subspace of `Ã` that
    /// is evaluated backwards in time.
    pub unstable: usize,
}

impl Balanced {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Identity coordinates, used when the pair is not controllable and no
    /// Krylov basis exists.
    pub(crate) fn identity(a: &DMatrix<f64>, b: &DMatrix<f64>, h: f64) -> Self {
        let n = a.nrows();
        let w = integral_unchecked(a, &(b * b.transpose()), h);
        Self {
            t: DMatrix::identity(n, n),
            t_inv: DMatrix::identity(n, n),
            a: a.clone(),
            b: b.clone(),
            w,
            unstable: 0,
        }
    }

    pub fn to_balanced(&self, x: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
        &self.t_inv * x
    }

    pub fn to_original(&self, x: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
        &self.t * x
    }
}

/// Pick coordinates for the pair `(A, B)` on a horizon of length `h`.
pub fn balance(a: &DMatrix<f64>, b: &DMatrix<f64>, h: f64) -> Result<Balanced> {
    let lambda1 = spectrum(a)?.lambda1;
    if lambda1 > 0.0 && lambda1 * h >= DICHOTOMY_THRESHOLD {
        if let Some(split) = dichotomy(a, b, h)? {
            return Ok(split);
        }
    }
    staircase(a, b, h)
}

fn staircase(a: &DMatrix<f64>, b: &DMatrix<f64>, h: f64) -> Result<Balanced> {
    let n = a.nrows();
    let (q, layers, sigmas) = krylov_basis(a, b)?;
    let mut hess = q.transpose() * a * &q;
    let offsets: Vec<usize> = std::iter::once(0)
        .chain(layers.iter().scan(0, |acc, &l| {
            *acc += l;
            Some(*acc)
        }))
        .collect();
    // Entries below the first block subdiagonal vanish in exact arithmetic.
    for bi in 0..layers.len() {
        for bj in 0..bi.saturating_sub(1) {
            for i in offsets[bi]..offsets[bi + 1] {
                for j in offsets[bj]..offsets[bj + 1] {
                    hess[(i, j)] = 0.0;
                }
            }
        }
    }
    let c = h.min(1.0 / hess.norm());
    let mut scale = Vec::with_capacity(n);
    let mut prev_mean_log = 0.0f64;
    for (k, sig) in sigmas.iter().enumerate() {
        if k == 0 {
            scale.extend(std::iter::repeat_n(1.0, sig.len()));
            continue;
        }
        let layer: Vec<f64> = sig.iter().map(|s| c * s * prev_mean_log.exp()).collect();
        prev_mean_log = layer.iter().map(|v| v.ln()).sum::<f64>() / layer.len() as f64;
        scale.extend(layer);
    }
    let qb = q.transpose() * b;
    let build = |s: &[f64]| {
        let at = DMatrix::from_fn(n, n, |i, j| hess[(i, j)] * s[j] / s[i]);
        let bt = DMatrix::from_fn(n, b.ncols(), |i, j| qb[(i, j)] / s[i]);
        (at, bt)
    };
    let (mut at, mut bt) = build(&scale);
    let mut w = integral_unchecked(&at, &(&bt * bt.transpose()), h);
    if let Some(j) = jacobi(&w) {
        for (s, ji) in scale.iter_mut().zip(&j) {
            *s *= ji;
        }
        (at, bt) = build(&scale);
        w = integral_unchecked(&at, &(&bt * bt.transpose()), h);
    }
    let t = DMatrix::from_fn(n, n, |i, j| q[(i, j)] * scale[j]);
    let t_inv = DMatrix::from_fn(n, n, |i, j| q[(j, i)] / scale[i]);
    Ok(Balanced {
        t,
        t_inv,
        a: at,
        b: bt,
        w,
        unstable: 0,
    })
}

/// `sqrt(diag W)` when every diagonal entry is positive and finite.
fn jacobi(w: &DMatrix<f64>) -> Option<Vec<f64>> {
    let d: Vec<f64> = w.diagonal().iter().map(|v| v.sqrt()).collect();
    d.iter().all(|v| v.is_finite() && *v > 0.0).then_some(d)
}

/// Orthonormal block Krylov basis of `(A, B)` with the layer sizes and the
/// singular values that connect consecutive layers.
pub(crate) fn krylov_basis(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, Vec<usize>, Vec<Vec<f64>>)> {
    let n = a.nrows();
    let (u, s) = leading_subspace(b.clone(), 1e-12);
    if u.ncols() == 0 {
        return Err(Error::Uncontrollable("input matrix is zero".into()));
    }
    let u = orthonormal_complement(&DMatrix::zeros(n, 0), u);
    let a_scale = a.abs().max().max(f64::MIN_POSITIVE);
    let mut layers = vec![u.ncols()];
    let mut sigmas = vec![s];
    let mut q = u;
    let mut last = q.clone();
    while q.ncols() < n {
        let mut z = a * &last;
        for _ in 0..2 {
            z -= &q * (q.transpose() * &z);
        }
        let (u, s) = leading_subspace_abs(z, 1e-12 * a_scale);
        if u.ncols() == 0 {
            return Err(Error::Uncontrollable(format!(
                "Krylov subspace stalls at dimension {} of {n}",
                q.ncols()
            )));
        }
        let r = u.ncols().min(n - q.ncols());
        let u = orthonormal_complement(&q, u.columns(0, r).into_owned());
        layers.push(r);
        sigmas.push(s[..r].to_vec());
        q = concat_columns(&q, &u);
        last = u;
    }
    Ok((q, layers, sigmas))
}

/// Re-orthonormalize `u` against the basis `q` and itself. Singular vectors
/// of nearly rank-deficient blocks can lose orthogonality to `q` at the
/// `1e-3` level, which would make the change of coordinates inexact.
fn orthonormal_complement(q: &DMatrix<f64>, mut u: DMatrix<f64>) -> DMatrix<f64> {
    for _ in 0..2 {
        u -= q * (q.transpose() * &u);
    }
    let mut qr = u.qr().q();
    for _ in 0..2 {
        qr -= q * (q.transpose() * &qr);
        qr = qr.qr().q();
    }
    qr
}

fn leading_subspace(m: DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, Vec<f64>) {
    let smax = SVD::new(m.clone(), false, false).singular_values.max();
    leading_subspace_abs(m, rel_tol * smax)
}

/// Left singular vectors whose singular values exceed `tol`, sorted descending.
fn leading_subspace_abs(m: DMatrix<f64>, tol: f64) -> (DMatrix<f64>, Vec<f64>) {
    let svd = SVD::new(m, true, false);
    let u = svd.u.expect("requested U");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&i| svd.singular_values[i] > tol)
        .collect();
    let cols: Vec<_> = keep.iter().map(|&i| u.column(i).into_owned()).collect();
    let s = keep.iter().map(|&i| svd.singular_values[i]).collect();
    if cols.is_empty() {
        return (DMatrix::zeros(u.nrows(), 0), s);
    }
    (DMatrix::from_columns(&cols), s)
}

fn concat_columns(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Split off the unstable invariant subspace. Returns `None` when no clean split
/// exists, in which case the caller falls back to the staircase form.
fn dichotomy(a: &DMatrix<f64>, b: &DMatrix<f64>, h: f64) -> Result<Option<Balanced>> {
    let n = a.nrows();
    let spec = spectrum(a)?;
    let min_re = spec
        .full_spectrum
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min);

    let splits = split_points(&spec.full_spectrum, h);
    let (v, v_inv, k, blocks) = if splits.is_empty() {
        if min_re <= 0.0 {
            return Ok(None);
        }
        // Everything grows at similar rates: all coordinates run backwards.
        (DMatrix::identity(n, n), DMatrix::identity(n, n), n, vec![n])
    } else {
        let eye = DMatrix::<f64>::identity(n, n);
        let mut above = DMatrix::zeros(n, n);
        let mut bases = Vec::with_capacity(splits.len() + 1);
        for &mu in &splits {
            let Some(sign) = matrix_sign(&(a - &eye * mu)) else {
                return Ok(None);
            };
            let p = (&eye + sign) * 0.5;
            let Some(band) = range_basis(&p - &above) else {
                return Ok(None);
            };
            bases.push(band);
            above = p;
        }
        let Some(band) = range_basis(&eye - &above) else {
            return Ok(None);
        };
        bases.push(band);
        let blocks: Vec<usize> = bases.iter().map(|m| m.ncols()).collect();
        if blocks.iter().sum::<usize>() != n {
            return Ok(None);
        }
        let k = if min_re > 0.0 { n } else { n - blocks[blocks.len() - 1] };
        let v = bases.iter().skip(1).fold(bases[0].clone(), |acc, m| concat_columns(&acc, m));
        let Some(v_inv) = v.clone().try_inverse() else {
            return Ok(None);
        };
        (v, v_inv, k, blocks)
    };

    let mut at = &v_inv * a * &v;
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let mut leak: f64 = 0.0;
    let owner: Vec<usize> = blocks
        .iter()
        .enumerate()
        .flat_map(|(idx, &size)| std::iter::repeat_n(idx, size))
        .collect();
    for i in 0..n {
        for j in 0..n {
            if owner[i] != owner[j] {
                leak = leak.max(at[(i, j)].abs());
                at[(i, j)] = 0.0;
            }
        }
    }
    if leak > 1e-8 * scale {
        return Ok(None);
    }
    let bt0 = &v_inv * b;
    let w0 = integral_unchecked(&at, &(&bt0 * bt0.transpose()), h);
    let Some(j) = jacobi(&w0) else {
        return Ok(None);
    };
    let at = DMatrix::from_fn(n, n, |r, c| at[(r, c)] * j[c] / j[r]);
    let bt = DMatrix::from_fn(n, b.ncols(), |r, c| bt0[(r, c)] / j[r]);
    let w = integral_unchecked(&at, &(&bt * bt.transpose()), h);
    let t = DMatrix::from_fn(n, n, |r, c| v[(r, c)] * j[c]);
    let t_inv = DMatrix::from_fn(n, n, |r, c| v_inv[(r, c)] / j[r]);
    Ok(Some(Balanced {
        t,
        t_inv,
        a: at,
        b: bt,
        w,
        unstable: k,
    }))
}

/// Midpoints of the gaps between distinct real parts whose upper side is
/// unstable and across which growth rates separate by more than `e^3` over the
/// horizon, in decreasing order. When no gap is that wide, the widest gap with
/// an unstable upper side is used alone.
fn split_points(eigs: &[nalgebra::Complex<f64>], h: f64) -> Vec<f64> {
    let mut re: Vec<f64> = eigs.iter().map(|z| z.re).collect();
    re.sort_by(|x, y| y.total_cmp(x));
    let tol = 1e-9 * re.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    re.dedup_by(|x, y| (*x - *y).abs() <= tol);
    let gaps: Vec<(f64, f64)> = re.windows(2).filter(|w| w[0] > 0.0).map(|w| (w[0], w[1])).collect();
    let wide: Vec<f64> = gaps
        .iter()
        .filter(|(hi, lo)| (hi - lo) * h >= DICHOTOMY_THRESHOLD)
        .map(|(hi, lo)| 0.5 * (hi + lo))
        .collect();
    if !wide.is_empty() {
        return wide;
    }
    if re.last().is_some_and(|&lo| lo > 0.0) {
        return Vec::new();
    }
    gaps.iter()
        .max_by(|p, q| (p.0 - p.1).total_cmp(&(q.0 - q.1)))
        .map(|(hi, lo)| vec![0.5 * (hi + lo)])
        .unwrap_or_default()
}

/// Newton iteration for `sign(M)` with determinant scaling.
fn matrix_sign(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = m.nrows() as f64;
    let mut s = m.clone();
    for _ in 0..100 {
        let lu = s.clone().lu();
        let det = lu.determinant();
        let inv = lu.try_inverse()?;
        let g = if det != 0.0 && det.is_finite() {
            det.abs().powf(-1.0 / n)
        } else {
            1.0
        };
        let next = (&s * g + inv / g) * 0.5;
        let change = (&next - &s).abs().column_sum().max();
        let size = next.abs().column_sum().max();
        s = next;
        if !size.is_finite() {
            return None;
        }
        if change <= 1e-14 * size {
            return Some(s);
        }
    }
    // Converged to within rounding even if the stopping rule was never met.
    Some(s)
}

/// Orthonormal basis for the range of a projector, or `None` when the
/// projector is empty. The nonzero singular values of a projector are at
/// least one, so the top eigenvectors of `P Pᵀ` are separated from its null
/// space by a wide gap.
fn range_basis(p: DMatrix<f64>) -> Option<DMatrix<f64>> {
    let k = p.trace().round();
    if !(k >= 1.0) {
        return None;
    }
    let eig = (&p * p.transpose()).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let cols: Vec<_> = order[..(k as usize).min(order.len())]
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    Some(DMatrix::from_columns(&cols))
}
