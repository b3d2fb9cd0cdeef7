//! Dense linear-algebra kernels: matrix exponential, exponential integrals,
//! symmetric positive-definite solves and spectra.
//!
//! Everything here operates on `nalgebra::DMatrix<f64>`; [`DenseMatrix`] is the
//! validated, serializable wrapper used at API and file boundaries.

pub(crate) mod compensated;
mod expm;
pub(crate) mod integral;
pub mod quadrature;

pub use compensated::{dot2, matvec2};
pub use expm::matrix_exponential;
pub use integral::{expm_integral, expm_integral_quadrature};

use std::ops::Deref;

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Condition number above which a symmetric system is declared numerically singular.
pub const MAX_CONDITION: f64 = 1e12;

/// A finite, non-empty real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::Dimension("matrix must be non-empty".into()));
        }
        if let Some(bad) = m.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite matrix entry {bad}")));
        }
        Ok(Self(m))
    }

    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Entries in row-major order.
    pub fn row_major(&self) -> Vec<f64> {
        let m = &self.0;
        (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)]))
            .collect()
    }
}

impl Deref for DenseMatrix {
    type Target = DMatrix<f64>;
    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Serialize for DenseMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson {
            rows: self.nrows(),
            cols: self.ncols(),
            data: self.row_major(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DenseMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = MatrixJson::deserialize(d)?;
        DenseMatrix::from_row_slice(raw.rows, raw.cols, &raw.data).map_err(serde::de::Error::custom)
    }
}

/// Largest real part of the spectrum together with the full spectrum.
#[derive(Debug, Clone)]
pub struct SpectralSummary {
    pub lambda1: f64,
    pub full_spectrum: Vec<Complex<f64>>,
}

/// Eigenvalues of a general real square matrix. `lambda1` is the spectral abscissa.
///
/// The matrix is first split along the strongly connected components of its
/// sparsity graph, which permutes it to block-triangular form. Each diagonal
/// block is handled separately, so acyclic parts of a network contribute their
/// diagonal entries exactly instead of the `ε^{1/k}`-accurate eigenvalues a
/// dense Schur form would give for the resulting Jordan blocks.
pub fn spectrum(a: &DMatrix<f64>) -> Result<SpectralSummary> {
    require_square(a, "spectrum")?;
    let n = a.nrows();
    let mut graph = petgraph::graph::DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && a[(i, j)] != 0.0 {
                graph.add_edge(nodes[j], nodes[i], ());
            }
        }
    }
    let mut full_spectrum = Vec::with_capacity(n);
    for component in petgraph::algo::tarjan_scc(&graph) {
        let component: Vec<usize> = component.into_iter().map(|v| v.index()).collect();
        if let [i] = component[..] {
            full_spectrum.push(Complex::new(a[(i, i)], 0.0));
            continue;
        }
        let block = DMatrix::from_fn(component.len(), component.len(), |r, c| a[(component[r], component[c])]);
        full_spectrum.extend(dense_eigenvalues(block)?);
    }
    let lambda1 = full_spectrum
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if !lambda1.is_finite() {
        return Err(Error::Numeric("non-finite eigenvalue".into()));
    }
    Ok(SpectralSummary {
        lambda1,
        full_spectrum,
    })
}

/// Eigenvalues by the real Schur form. Weighted cycles with zero diagonal can
/// stall the QR iteration, so on failure the block is retried after fixed
/// orthogonal similarities, which leave the spectrum unchanged.
fn dense_eigenvalues(block: DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let k = block.nrows();
    for attempt in 0..4 {
        let m = if attempt == 0 {
            block.clone()
        } else {
            let v = DVector::from_fn(k, |i, _| 1.0 + ((i * (attempt + 1)) % (k + 1)) as f64);
            let h = DMatrix::identity(k, k) - &v * v.transpose() * (2.0 / v.norm_squared());
            &h * &block * &h
        };
        if let Some(schur) = nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 100_000) {
            return Ok(schur.complex_eigenvalues().iter().copied().collect());
        }
    }
    Err(Error::Numeric("Schur iteration did not converge".into()))
}

pub(crate) fn require_square(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "{what} needs a non-empty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub(crate) fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Cholesky factorization of a symmetric positive-definite matrix with its
/// 2-norm condition number.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    matrix: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    condition: f64,
}

impl SpdFactor {
    pub fn new(w: &DMatrix<f64>) -> Result<Self> {
        require_square(w, "solve_spd")?;
        let scale = max_abs(w);
        let asym = asymmetry(w);
        if asym > 1e-10 * scale {
            return Err(Error::Symmetry { asymmetry: asym });
        }
        let sym = (w + w.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        let hi = eig.eigenvalues.max();
        let lo = eig.eigenvalues.min();
        let condition = if lo <= 0.0 || hi <= 0.0 { f64::INFINITY } else { hi / lo };
        if !(condition <= MAX_CONDITION) {
            return Err(Error::NearSingular { condition });
        }
        let chol = sym
            .clone()
            .cholesky()
            .ok_or(Error::NearSingular { condition })?;
        Ok(Self {
            matrix: sym,
            chol,
            condition,
        })
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Solve with one step of iterative refinement.
    pub fn solve(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "rhs length {} for a {}x{} system",
                v.len(),
                self.dim(),
                self.dim()
            )));
        }
        let mut y = self.chol.solve(v);
        let r = v - &self.matrix * &y;
        y += self.chol.solve(&r);
        Ok(y)
    }

    /// Solve to roughly twice working precision. The solution is returned as an
    /// unevaluated sum `hi + lo`; residuals are formed with compensated dot products.
    pub fn solve_extended(&self, v: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let mut hi = self.solve(v)?;
        let mut lo = DVector::zeros(v.len());
        for _ in 0..4 {
            let r = residual2(&self.matrix, v, &hi, &lo);
            let step = self.chol.solve(&r);
            // Renormalize so that `lo` stays below one ulp of `hi`; otherwise
            // its own rounding caps the attainable accuracy.
            for i in 0..hi.len() {
                (hi[i], lo[i]) = compensated::two_sum(hi[i], lo[i] + step[i]);
            }
        }
        Ok((hi, lo))
    }
}

/// `v - M (hi + lo)` with the `M hi` product accumulated in compensated arithmetic.
fn residual2(
    m: &DMatrix<f64>,
    v: &DVector<f64>,
    hi: &DVector<f64>,
    lo: &DVector<f64>,
) -> DVector<f64> {
    let n = v.len();
    let mut out = DVector::zeros(n);
    let mut terms = Vec::with_capacity(2 * n + 1);
    for i in 0..n {
        terms.clear();
        terms.push((v[i], 1.0));
        for j in 0..n {
            terms.push((m[(i, j)], -hi[j]));
            terms.push((m[(i, j)], -lo[j]));
        }
        out[i] = compensated::sum_of_products(&terms);
    }
    out
}

/// Solve `W y = v` for symmetric positive-definite `W`.
///
/// Fails with [`Error::NearSingular`] when the condition number exceeds
/// [`MAX_CONDITION`].
pub fn solve_spd(w: &DMatrix<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    SpdFactor::new(w)?.solve(v)
}
