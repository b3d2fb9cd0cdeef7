//! Error-free transformations and compensated dot products (Ogita, Rump and
//! Oishi's `Dot2`). Results are as accurate as if computed in twice the
//! working precision and then rounded.

use nalgebra::{DMatrix, DVector};

#[inline]
pub(crate) fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// `sum(a_i * b_i)` over the given pairs.
pub(crate) fn sum_of_products(terms: &[(f64, f64)]) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for &(a, b) in terms {
        let (p, pe) = two_prod(a, b);
        let (t, te) = two_sum(s, p);
        s = t;
        c += pe + te;
    }
    s + c
}

/// A vector held as the unevaluated sum `hi + lo`.
pub(crate) type Pair = (DVector<f64>, DVector<f64>);

/// `Σⱼ Mⱼvⱼ` for pair-valued `vⱼ`, returned as a pair with a renormalized
/// low part.
pub(crate) fn matvec_pair(terms: &[(&DMatrix<f64>, &Pair)]) -> Pair {
    let rows = terms.first().map_or(0, |(m, _)| m.nrows());
    let mut hi = DVector::zeros(rows);
    let mut lo = DVector::zeros(rows);
    for i in 0..rows {
        let mut s = 0.0;
        let mut c = 0.0;
        for (m, (vh, vl)) in terms {
            for j in 0..m.ncols() {
                for x in [vh[j], vl[j]] {
                    let (p, pe) = two_prod(m[(i, j)], x);
                    let (t, te) = two_sum(s, p);
                    s = t;
                    c += pe + te;
                }
            }
        }
        (hi[i], lo[i]) = two_sum(s, c);
    }
    (hi, lo)
}

pub fn dot2(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let mut s = 0.0;
    let mut c = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let (p, pe) = two_prod(a, b);
        let (t, te) = two_sum(s, p);
        s = t;
        c += pe + te;
    }
    s + c
}

/// `m * (hi + lo)` with every product accumulated in compensated arithmetic.
pub fn matvec2(m: &DMatrix<f64>, hi: &DVector<f64>, lo: &DVector<f64>) -> DVector<f64> {
    assert_eq!(m.ncols(), hi.len());
    assert_eq!(hi.len(), lo.len());
    DVector::from_fn(m.nrows(), |i, _| {
        let mut s = 0.0;
        let mut c = 0.0;
        for j in 0..m.ncols() {
            for x in [hi[j], lo[j]] {
                let (p, pe) = two_prod(m[(i, j)], x);
                let (t, te) = two_sum(s, p);
                s = t;
                c += pe + te;
            }
        }
        s + c
    })
}
