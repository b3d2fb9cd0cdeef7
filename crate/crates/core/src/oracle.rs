//! Brute-force reference solution: the least-energy piecewise-constant input.
//!
//! The horizon is cut into `m` steps of length `dt`. With exact zero-order-hold
//! matrices `Φ = e^{A dt}` and `Γ = ∫₀^{dt} e^{As}B ds` the endpoint is
//! `x_m = Φ^m x₀ + Σₖ Φ^{m−1−k} Γ uₖ`, a linear map of the stacked inputs. The
//! least-norm solution of that constraint comes from the normal equations
//! `G z = d`, `G = Σₖ MₖMₖᵀ`, `uₖ = Mₖᵀ z`, with `Mₖ = Φ^{m−1−k}Γ`.
//!
//! The only approximation is the piecewise-constant input shape, so the oracle
//! energy approaches `dᵀW⁻¹d` from above as `m` grows.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::gramian::balance::{balance, Balanced};
use crate::gramian::{check_interval, check_len, check_pair};
use crate::linalg::compensated::{matvec_pair, two_sum, Pair};
use crate::linalg::{matrix_exponential, SpdFactor};
use crate::trajectory::ControlTask;
use crate::{Error, Result};

/// Largest state dimension the oracle accepts.
pub const MAX_ORDER: usize = 8;
/// Largest step count the oracle accepts.
pub const MAX_STEPS: usize = 10_000;

/// Zero-order-hold discretization of one horizon, with the factored
/// reachability Gramian. Computations run in the balanced coordinates of the
/// horizon; inputs are the same in both coordinate systems.
///
/// The endpoint map can cancel heavily: the inputs may be many orders of
/// magnitude larger than the displacement they produce. State recursions and
/// their adjoints are therefore carried as `hi + lo` pairs with compensated
/// products, and the normal equations are solved by refinement against those
/// recursions, with the working-precision Gramian as preconditioner.
#[derive(Debug, Clone)]
pub struct DiscreteModel {
    bal: Balanced,
    phi: DMatrix<f64>,
    gamma: DMatrix<f64>,
    phi_t: DMatrix<f64>,
    gamma_t: DMatrix<f64>,
    factor: SpdFactor,
    steps: usize,
    dt: f64,
    t0: f64,
}

/// The oracle's solution of one transfer.
#[derive(Debug, Clone)]
pub struct DiscretePlan {
    pub steps: usize,
    pub dt: f64,
    pub inputs: Vec<DVector<f64>>,
    pub states: Vec<DVector<f64>>,
    pub energy: f64,
}

/// Polyline length and largest deviation of a plan's states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleMetrics {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "R")]
    pub radius: f64,
}

const REFINEMENT_STEPS: usize = 8;

fn exact(v: DVector<f64>) -> Pair {
    let lo = DVector::zeros(v.len());
    (v, lo)
}

impl DiscreteModel {
    pub fn new(a: &DMatrix<f64>, b: &DMatrix<f64>, t0: f64, tf: f64, m: usize) -> Result<Self> {
        check_pair(a, b)?;
        check_interval(t0, tf)?;
        let n = a.nrows();
        if n > MAX_ORDER {
            return Err(Error::OutOfRange(format!("oracle supports N <= {MAX_ORDER}, got {n}")));
        }
        if !(2..=MAX_STEPS).contains(&m) {
            return Err(Error::OutOfRange(format!("oracle step count {m} outside [2, {MAX_STEPS}]")));
        }
        let h = tf - t0;
        let bal = balance(a, b, h)?;
        let dt = h / m as f64;
        let p = b.ncols();

        let mut aug = DMatrix::zeros(n + p, n + p);
        aug.view_mut((0, 0), (n, n)).copy_from(&bal.a);
        aug.view_mut((0, n), (n, p)).copy_from(&bal.b);
        let e = matrix_exponential(&aug, dt)?;
        let phi = e.view((0, 0), (n, n)).into_owned();
        let gamma = e.view((0, n), (n, p)).into_owned();

        // G = Σₖ MₖMₖᵀ with Mₖ = Φ^{m−1−k}Γ
        let mut gram = DMatrix::zeros(n, n);
        let mut mk = gamma.clone();
        for _ in 0..m {
            gram += &mk * mk.transpose();
            mk = &phi * &mk;
        }
        let gram = (&gram + gram.transpose()) * 0.5;
        let factor = SpdFactor::new(&gram).map_err(|e| match e {
            Error::NearSingular { condition } => Error::Uncontrollable(format!(
                "discrete reachability map is rank deficient (condition {condition:.3e})"
            )),
            other => other,
        })?;
        Ok(Self {
            bal,
            phi_t: phi.transpose(),
            gamma_t: gamma.transpose(),
            phi,
            gamma,
            factor,
            steps: m,
            dt,
            t0,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn input_dim(&self) -> usize {
        self.gamma.ncols()
    }

    fn order(&self) -> usize {
        self.phi.nrows()
    }

    /// Step `k` starts at this time.
    pub fn step_time(&self, k: usize) -> f64 {
        self.t0 + self.dt * k as f64
    }

    fn check_inputs(&self, inputs: &[DVector<f64>]) -> Result<()> {
        if inputs.len() != self.steps() {
            return Err(Error::Dimension(format!(
                "{} input vectors for {} steps",
                inputs.len(),
                self.steps()
            )));
        }
        for u in inputs {
            check_len(u, self.input_dim())?;
        }
        Ok(())
    }

    /// Balanced states `x₀ … x_m` of `x ← Φx + Γu`.
    fn forward(&self, x0: Pair, inputs: &[Pair]) -> Vec<Pair> {
        let mut states = Vec::with_capacity(inputs.len() + 1);
        states.push(x0);
        for u in inputs {
            let x = states.last().expect("non-empty");
            let next = matvec_pair(&[(&self.phi, x), (&self.gamma, u)]);
            states.push(next);
        }
        states
    }

    /// `Mₖᵀz` for every step, by the backward recursion `λ ← Φᵀλ`.
    fn adjoint(&self, z: &Pair) -> Vec<Pair> {
        let mut out = vec![exact(DVector::zeros(self.input_dim())); self.steps];
        let mut lambda = z.clone();
        for k in (0..self.steps).rev() {
            out[k] = matvec_pair(&[(&self.gamma_t, &lambda)]);
            lambda = matvec_pair(&[(&self.phi_t, &lambda)]);
        }
        out
    }

    fn reach_pair(&self, inputs: &[Pair]) -> Pair {
        self.forward(exact(DVector::zeros(self.order())), inputs)
            .pop()
            .expect("non-empty")
    }

    fn to_original(&self, x: &Pair) -> DVector<f64> {
        self.bal.to_original(&x.0) + self.bal.to_original(&x.1)
    }

    /// Displacement of the endpoint caused by the inputs: `Σₖ Φ^{m−1−k}Γuₖ`,
    /// in original coordinates.
    pub fn reach(&self, inputs: &[DVector<f64>]) -> Result<DVector<f64>> {
        self.check_inputs(inputs)?;
        let inputs: Vec<Pair> = inputs.iter().cloned().map(exact).collect();
        Ok(self.to_original(&self.reach_pair(&inputs)))
    }

    /// Orthogonal projection onto inputs that leave the endpoint unchanged.
    pub fn project_null(&self, inputs: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        self.check_inputs(inputs)?;
        let pairs: Vec<Pair> = inputs.iter().cloned().map(exact).collect();
        let (hi, lo) = self.reach_pair(&pairs);
        let z = self.factor.solve(&(hi + lo))?;
        Ok(inputs
            .iter()
            .zip(self.adjoint(&exact(z)))
            .map(|(u, (h, l))| u - h - l)
            .collect())
    }

    /// `Σₖ‖uₖ‖² dt`.
    pub fn energy(&self, inputs: &[DVector<f64>]) -> f64 {
        inputs.iter().map(|u| u.norm_squared()).sum::<f64>() * self.dt
    }

    /// States `x₀ … x_m` under the given inputs, original coordinates.
    pub fn simulate(&self, x0: &DVector<f64>, inputs: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        check_len(x0, self.order())?;
        self.check_inputs(inputs)?;
        let inputs: Vec<Pair> = inputs.iter().cloned().map(exact).collect();
        Ok(self.original_states(x0, &inputs))
    }

    fn original_states(&self, x0: &DVector<f64>, inputs: &[Pair]) -> Vec<DVector<f64>> {
        let mut states: Vec<DVector<f64>> = self
            .forward(exact(self.bal.to_balanced(x0)), inputs)
            .iter()
            .map(|x| self.to_original(x))
            .collect();
        states[0] = x0.clone();
        states
    }

    /// Least-energy inputs for `x₀ → x_f`.
    pub fn plan(&self, x0: &DVector<f64>, xf: &DVector<f64>) -> Result<DiscretePlan> {
        let n = self.order();
        check_len(x0, n)?;
        check_len(xf, n)?;
        let zeros = vec![exact(DVector::zeros(self.input_dim())); self.steps];
        let (free_hi, free_lo) = self
            .forward(exact(self.bal.to_balanced(x0)), &zeros)
            .pop()
            .expect("non-empty");
        let target = self.bal.to_balanced(xf);
        let mut d = exact(DVector::zeros(n));
        for i in 0..n {
            let (h, l) = two_sum(target[i], -free_hi[i]);
            d.0[i] = h;
            d.1[i] = l - free_lo[i];
        }

        let mut z = exact(DVector::zeros(n));
        for _ in 0..REFINEMENT_STEPS {
            let (rh, rl) = self.reach_pair(&self.adjoint(&z));
            let r = (&d.0 - rh) + (&d.1 - rl);
            let step = self.factor.solve(&r)?;
            for i in 0..n {
                (z.0[i], z.1[i]) = two_sum(z.0[i], z.1[i] + step[i]);
            }
            if step.norm() <= f64::EPSILON * f64::EPSILON * z.0.norm() {
                break;
            }
        }

        let inputs = self.adjoint(&z);
        let states = self.original_states(x0, &inputs);
        let miss = (states.last().expect("m >= 2") - xf).norm();
        let tolerance = 1e-8 * xf.norm().max(1.0);
        if !(miss <= tolerance) {
            return Err(Error::Consistency { miss, tolerance });
        }
        let inputs: Vec<DVector<f64>> = inputs.into_iter().map(|(h, l)| h + l).collect();
        Ok(DiscretePlan {
            steps: self.steps(),
            dt: self.dt,
            energy: self.energy(&inputs),
            inputs,
            states,
        })
    }
}

/// Least-energy piecewise-constant plan with `m` steps for `task`.
pub fn oracle_min_energy(task: &ControlTask, m: usize) -> Result<DiscretePlan> {
    DiscreteModel::new(task.system.matrix(), task.drivers.matrix(), task.t0, task.tf, m)?
        .plan(&task.x0, &task.xf)
}

/// Polyline length and radius over the plan's states.
pub fn oracle_metrics(plan: &DiscretePlan) -> OracleMetrics {
    let x0 = &plan.states[0];
    OracleMetrics {
        length: plan.states.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum(),
        radius: plan.states.iter().map(|x| (x - x0).norm()).fold(0.0, f64::max),
    }
}
