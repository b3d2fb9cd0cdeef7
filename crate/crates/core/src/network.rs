//! Random directed networks, spectral shifts and driver-node selection.
//!
//! `A[(i, j)] != 0` means node `j` acts on node `i`, so `ẋᵢ = Σⱼ A[(i, j)] xⱼ`.
//! Node indices are zero-based everywhere.

use nalgebra::{DMatrix, SVD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{spectrum, DenseMatrix};
use crate::{Error, Result};

/// Number of driver sets tried before giving up on controllability.
pub const MAX_DRIVER_ATTEMPTS: usize = 100;

/// Distribution of the nonzero coupling weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightLaw {
    #[default]
    Uniform01,
    StandardNormal,
}

impl std::str::FromStr for WeightLaw {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform01" => Ok(Self::Uniform01),
            "standard_normal" => Ok(Self::StandardNormal),
            other => Err(Error::OutOfRange(format!("unknown weight law {other:?}"))),
        }
    }
}

/// A network's coupling matrix with the parameters that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSystem {
    #[serde(rename = "A")]
    pub a: DenseMatrix,
    #[serde(rename = "N")]
    pub n: usize,
    pub avg_degree: f64,
    pub weight_law: WeightLaw,
    pub seed: u64,
    pub lambda1: f64,
    pub shift_applied: f64,
}

impl NetworkSystem {
    /// Wrap an arbitrary square matrix. Generation metadata is zeroed.
    pub fn from_matrix(a: DMatrix<f64>) -> Result<Self> {
        let lambda1 = spectrum(&a)?.lambda1;
        let n = a.nrows();
        Ok(Self {
            a: DenseMatrix::new(a)?,
            n,
            avg_degree: 0.0,
            weight_law: WeightLaw::Uniform01,
            seed: 0,
            lambda1,
            shift_applied: 0.0,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Number of nonzero off-diagonal entries.
    pub fn edge_count(&self) -> usize {
        let a = self.matrix();
        let mut count = 0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j && a[(i, j)] != 0.0 {
                    count += 1;
                }
            }
        }
        count
    }
}

/// Directed Erdős–Rényi network: each ordered pair `(i, j)`, `i != j`, is an
/// edge with probability `avg_degree / (N − 1)`, weighted by an independent draw
/// from `law`. Pairs are visited row by row so the result is a pure function of
/// the arguments.
pub fn generate_network(n: usize, avg_degree: f64, law: WeightLaw, seed: u64) -> Result<NetworkSystem> {
    if n < 2 {
        return Err(Error::OutOfRange(format!("network needs at least 2 nodes, got {n}")));
    }
    let max_degree = (n - 1) as f64;
    if !(avg_degree > 0.0 && avg_degree <= max_degree) {
        return Err(Error::OutOfRange(format!(
            "average degree {avg_degree} outside (0, {max_degree}]"
        )));
    }
    let p = avg_degree / max_degree;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j || !rng.random_bool(p) {
                continue;
            }
            a[(i, j)] = match law {
                WeightLaw::Uniform01 => rng.random::<f64>(),
                WeightLaw::StandardNormal => rng.sample(StandardNormal),
            };
        }
    }
    let lambda1 = spectrum(&a)?.lambda1;
    Ok(NetworkSystem {
        a: DenseMatrix::new(a)?,
        n,
        avg_degree,
        weight_law: law,
        seed,
        lambda1,
        shift_applied: 0.0,
    })
}

/// Shift the diagonal so that the spectral abscissa becomes `target`.
///
/// `shift_applied` accumulates the total amount subtracted from the diagonal.
pub fn shift_spectrum(sys: &NetworkSystem, target: f64) -> Result<NetworkSystem> {
    let mut a = sys.matrix().clone();
    let mut lambda1 = spectrum(&a)?.lambda1;
    let mut total = 0.0;
    // A second pass absorbs the eigen-solver's rounding on the first shift.
    for _ in 0..2 {
        let c = lambda1 - target;
        if c == 0.0 {
            break;
        }
        for i in 0..a.nrows() {
            a[(i, i)] -= c;
        }
        total += c;
        lambda1 = spectrum(&a)?.lambda1;
    }
    Ok(NetworkSystem {
        a: DenseMatrix::new(a)?,
        lambda1,
        shift_applied: sys.shift_applied + total,
        ..sys.clone()
    })
}

/// Driver nodes and the input matrix they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct DriverConfig {
    pub driver_nodes: Vec<usize>,
    pub b: DenseMatrix,
}

impl DriverConfig {
    /// `B[(i, j)] = 1` iff `nodes[j] == i`.
    pub fn new(n: usize, nodes: Vec<usize>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() > n {
            return Err(Error::OutOfRange(format!(
                "driver count {} outside [1, {n}]",
                nodes.len()
            )));
        }
        let mut seen = vec![false; n];
        for &k in &nodes {
            if k >= n {
                return Err(Error::OutOfRange(format!("driver node {k} >= N = {n}")));
            }
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::OutOfRange(format!("driver node {k} listed twice")));
            }
        }
        let mut b = DMatrix::zeros(n, nodes.len());
        for (j, &k) in nodes.iter().enumerate() {
            b[(k, j)] = 1.0;
        }
        Ok(Self {
            driver_nodes: nodes,
            b: DenseMatrix::new(b)?,
        })
    }

    /// Every node driven, in index order.
    pub fn full(n: usize) -> Result<Self> {
        Self::new(n, (0..n).collect())
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn count(&self) -> usize {
        self.driver_nodes.len()
    }
}

/// Draw `p` distinct driver nodes uniformly at random, redrawing until the pair
/// `(A, B)` is controllable.
pub fn select_drivers(sys: &NetworkSystem, p: usize, seed: u64) -> Result<DriverConfig> {
    let n = sys.n;
    if p == 0 || p > n {
        return Err(Error::OutOfRange(format!("driver count {p} outside [1, {n}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_DRIVER_ATTEMPTS {
        let mut nodes = rand::seq::index::sample(&mut rng, n, p).into_vec();
        nodes.sort_unstable();
        let cfg = DriverConfig::new(n, nodes)?;
        if is_controllable(sys.matrix(), cfg.matrix())? {
            return Ok(cfg);
        }
    }
    Err(Error::Uncontrollable(format!(
        "no controllable set of {p} drivers found in {MAX_DRIVER_ATTEMPTS} attempts"
    )))
}

/// Kalman rank test on `[B, AB, …, A^(N−1)B]`.
///
/// `A` is scaled by `1 / max(1, ‖A‖)` first so that high powers stay in range;
/// scaling does not change the rank. Singular values at or below
/// `1e-10 · σ_max` count as zero.
pub fn is_controllable(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<bool> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::Dimension(format!(
            "A is {}x{}, B is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let p = b.ncols();
    let scaled = a / a.norm().max(1.0);
    let mut kalman = DMatrix::zeros(n, n * p);
    let mut block = b.clone();
    for k in 0..n {
        kalman.view_mut((0, k * p), (n, p)).copy_from(&block);
        block = &scaled * block;
    }
    let sv = SVD::new(kalman, false, false).singular_values;
    let smax = sv.max();
    if smax == 0.0 {
        return Ok(false);
    }
    Ok(sv.iter().filter(|&&s| s > 1e-10 * smax).count() == n)
}

/// On-disk form of a system: the network plus its driver nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    #[serde(flatten)]
    pub system: NetworkSystem,
    pub drivers: Vec<usize>,
}

impl SystemFile {
    pub fn new(system: NetworkSystem, drivers: &DriverConfig) -> Self {
        Self {
            system,
            drivers: drivers.driver_nodes.clone(),
        }
    }

    /// Validate the matrix shape and rebuild the driver configuration.
    pub fn driver_config(&self) -> Result<DriverConfig> {
        let a = self.system.matrix();
        if a.nrows() != self.system.n || a.ncols() != self.system.n {
            return Err(Error::Dimension(format!(
                "system declares N = {} but A is {}x{}",
                self.system.n,
                a.nrows(),
                a.ncols()
            )));
        }
        DriverConfig::new(self.system.n, self.drivers.clone())
    }
}
