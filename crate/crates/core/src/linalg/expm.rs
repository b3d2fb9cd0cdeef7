//! Matrix exponential by scaling and squaring with diagonal Padé approximants
//! of degree 3 to 13 (Higham, SIAM J. Matrix Anal. Appl. 26(4), 2005).

use nalgebra::DMatrix;

use super::require_square;
use crate::{Error, Result};

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Largest 1-norm for which each approximant is accurate to unit roundoff.
const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539398330063230e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068;
const THETA13: f64 = 5.371920351148152;

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `e^{A t}`.
pub fn matrix_exponential(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    require_square(a, "matrix_exponential")?;
    if !t.is_finite() {
        return Err(Error::OutOfRange(format!("time {t} is not finite")));
    }
    let n = a.nrows();
    if t == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    let at = a * t;
    if at.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow { t });
    }
    let e = expm(&at);
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::Overflow { t });
    }
    Ok(e)
}

/// Exponential of an already time-scaled matrix. Non-finite results are left
/// for the caller to detect.
pub(crate) fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    if a.iter().all(|&v| v == 0.0) {
        return id;
    }
    let nrm = norm1(a);
    let a2 = a * a;
    if nrm <= THETA3 {
        return pade_low(a, &a2, &B3, &id);
    }
    if nrm <= THETA5 {
        return pade_low(a, &a2, &B5, &id);
    }
    if nrm <= THETA7 {
        return pade_low(a, &a2, &B7, &id);
    }
    if nrm <= THETA9 {
        return pade_low(a, &a2, &B9, &id);
    }
    let s = if nrm > THETA13 {
        (nrm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scale = 2f64.powi(-s);
    let a = a * scale;
    let a2 = a2 * (scale * scale);
    let mut r = pade13(&a, &a2, &id);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Degree 3..9 approximant evaluated with even powers of `a`.
fn pade_low(a: &DMatrix<f64>, a2: &DMatrix<f64>, b: &[f64], id: &DMatrix<f64>) -> DMatrix<f64> {
    let m = b.len() - 1;
    let mut u = id * b[1];
    let mut v = id * b[0];
    let mut pow = id.clone();
    for k in 1..=m / 2 {
        pow = &pow * a2;
        u += &pow * b[2 * k + 1];
        v += &pow * b[2 * k];
    }
    let u = a * u;
    rational(&u, &v)
}

fn pade13(a: &DMatrix<f64>, a2: &DMatrix<f64>, id: &DMatrix<f64>) -> DMatrix<f64> {
    let b = &B13;
    let a4 = a2 * a2;
    let a6 = &a4 * a2;
    let inner_u = &a6 * b[13] + &a4 * b[11] + a2 * b[9];
    let u = a * (&a6 * inner_u + &a6 * b[7] + &a4 * b[5] + a2 * b[3] + id * b[1]);
    let inner_v = &a6 * b[12] + &a4 * b[10] + a2 * b[8];
    let v = &a6 * inner_v + &a6 * b[6] + &a4 * b[4] + a2 * b[2] + id * b[0];
    rational(&u, &v)
}

/// `(v - u)^{-1} (v + u)`.
fn rational(u: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let p = v + u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .unwrap_or_else(|| DMatrix::from_element(u.nrows(), u.ncols(), f64::NAN))
}
