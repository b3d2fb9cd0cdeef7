//! Optimal trajectories and their geometry.
//!
//! Substituting the optimal input into the variation-of-constants formula gives
//! the path in closed form,
//!
//! ```text
//! x(t) = e^{A(t−t₀)} x₀ + W[t₀,t] e^{Aᵀ(t_f−t)} W⁻¹[t₀,t_f] d,
//! ```
//!
//! so no ODE stepping is involved. Everything that depends only on the system
//! and the horizon (exponentials, partial Gramians at every sample and
//! quadrature node) lives in a [`Horizon`], built once and shared by all tasks on
//! that horizon. Evaluating one task then costs a handful of small
//! matrix-vector products per node.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::gramian::{build_gramian, check_interval, check_len, check_pair, Gramian};
use crate::linalg::integral::integral_unchecked;
use crate::linalg::quadrature::CompositeRule;
use crate::linalg::{expm_integral, matrix_exponential, matvec2};
use crate::network::{DriverConfig, NetworkSystem};
use crate::{Error, Result};

pub const DEFAULT_SAMPLES: usize = 40;
pub const DEFAULT_QUADRATURE_ORDER: usize = 8;
/// Relative change in `L` between 40 and 80 samples above which a task counts as
/// under-resolved.
pub const RESOLUTION_TOLERANCE: f64 = 5e-3;

/// How the trajectory length is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthMode {
    /// Composite Gauss–Legendre quadrature of `‖ẋ‖` between consecutive samples.
    #[default]
    Quadrature,
    /// Sum of chord lengths between consecutive samples.
    Polyline,
}

/// Transfer `x₀ → x_f` over `[t₀, t_f]` on a given network and driver set.
#[derive(Debug, Clone)]
pub struct ControlTask<'a> {
    pub system: &'a NetworkSystem,
    pub drivers: &'a DriverConfig,
    pub x0: DVector<f64>,
    pub xf: DVector<f64>,
    pub t0: f64,
    pub tf: f64,
    pub n_samples: usize,
    pub quadrature_order: usize,
    pub length_mode: LengthMode,
}

impl<'a> ControlTask<'a> {
    pub fn new(
        system: &'a NetworkSystem,
        drivers: &'a DriverConfig,
        x0: DVector<f64>,
        xf: DVector<f64>,
        t0: f64,
        tf: f64,
    ) -> Result<Self> {
        let task = Self {
            system,
            drivers,
            x0,
            xf,
            t0,
            tf,
            n_samples: DEFAULT_SAMPLES,
            quadrature_order: DEFAULT_QUADRATURE_ORDER,
            length_mode: LengthMode::Quadrature,
        };
        task.validate()?;
        Ok(task)
    }

    pub fn with_samples(mut self, n_samples: usize) -> Result<Self> {
        self.n_samples = n_samples;
        self.validate()?;
        Ok(self)
    }

    pub fn with_length_mode(mut self, mode: LengthMode) -> Self {
        self.length_mode = mode;
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.system.n;
        check_pair(self.system.matrix(), self.drivers.matrix())?;
        check_len(&self.x0, n)?;
        check_len(&self.xf, n)?;
        check_interval(self.t0, self.tf)?;
        if self.n_samples < 3 {
            return Err(Error::OutOfRange(format!("need at least 3 samples, got {}", self.n_samples)));
        }
        if self.quadrature_order == 0 {
            return Err(Error::OutOfRange("quadrature order must be positive".into()));
        }
        Ok(())
    }

    /// `δ = ‖x_f − x₀‖`.
    pub fn delta(&self) -> f64 {
        (&self.xf - &self.x0).norm()
    }

    pub fn horizon(&self) -> Result<Horizon> {
        Horizon::new(
            self.system.matrix(),
            self.drivers.matrix(),
            self.t0,
            self.tf,
            self.n_samples,
            self.quadrature_order,
        )
    }
}

/// A sampled optimal trajectory and its scalar summaries.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    pub length: f64,
    pub radius: f64,
    pub energy: f64,
    pub delta: f64,
}

/// Scalars of one task without the sampled path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaskMetrics {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    pub delta: f64,
}

impl Trajectory {
    pub fn metrics(&self) -> TaskMetrics {
        TaskMetrics {
            length: self.length,
            radius: self.radius,
            energy: self.energy,
            delta: self.delta,
        }
    }

    /// One row per sample: `t,x_1..x_N,u_1..u_p`, numbers with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.states.first().map_or(0, |x| x.len());
        let p = self.inputs.first().map_or(0, |u| u.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x_{i}")));
        header.extend((1..=p).map(|i| format!("u_{i}")));
        writeln!(out, "{}", header.join(","))?;
        for ((t, x), u) in self.times.iter().zip(&self.states).zip(&self.inputs) {
            let row: Vec<String> = std::iter::once(*t)
                .chain(x.iter().copied())
                .chain(u.iter().copied())
                .map(fmt_float)
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// `{"L": …, "R": …, "E": …, "delta": …}`.
    pub fn sidecar_json(&self) -> serde_json::Value {
        serde_json::to_value(self.metrics()).expect("plain struct serializes")
    }
}

/// Fixed-width scientific notation with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Per-node operators, all in balanced coordinates.
#[derive(Debug, Clone)]
struct NodeOps {
    /// `e^{Ãs}`
    free: DMatrix<f64>,
    /// `W̃(s) e^{Ãᵀ(h−s)}`
    forward: DMatrix<f64>,
    /// `B̃ᵀ e^{Ãᵀ(h−s)}`
    input: DMatrix<f64>,
    /// `e^{−Ã_U τ}` and rows `0..k` of `W̃(τ)`, `τ = h − s`.
    backward: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

/// The unknowns of one task in balanced coordinates.
struct Solved {
    x0t: DVector<f64>,
    xft: DVector<f64>,
    y_hi: DVector<f64>,
    y_lo: DVector<f64>,
    y: DVector<f64>,
    energy: f64,
}

/// Everything that depends on `(A, B, t₀, t_f, n_samples, quadrature_order)` but
/// not on the endpoints.
#[derive(Debug, Clone)]
pub struct Horizon {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    gramian: Gramian,
    times: Vec<f64>,
    samples: Vec<NodeOps>,
    midpoints: Vec<NodeOps>,
    quad_nodes: Vec<f64>,
    quad_weights: Vec<f64>,
    quad: Vec<NodeOps>,
}

impl Horizon {
    pub fn new(
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        t0: f64,
        tf: f64,
        n_samples: usize,
        quadrature_order: usize,
    ) -> Result<Self> {
        if n_samples < 3 {
            return Err(Error::OutOfRange(format!("need at least 3 samples, got {n_samples}")));
        }
        if quadrature_order == 0 {
            return Err(Error::OutOfRange("quadrature order must be positive".into()));
        }
        let gramian = build_gramian(a, b, t0, tf)?;
        gramian.factor()?;
        let h = tf - t0;
        let last = n_samples - 1;
        let mut times: Vec<f64> = (0..n_samples).map(|k| t0 + h * k as f64 / last as f64).collect();
        times[last] = tf;
        let offsets: Vec<f64> = (0..n_samples).map(|k| h * k as f64 / last as f64).collect();
        let mids: Vec<f64> = offsets.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let rule = CompositeRule::on_breaks(&offsets, quadrature_order);

        let mut hz = Self {
            a: a.clone(),
            b: b.clone(),
            gramian,
            times,
            samples: Vec::new(),
            midpoints: Vec::new(),
            quad_nodes: rule.nodes.iter().map(|s| t0 + s).collect(),
            quad_weights: rule.weights,
            quad: Vec::new(),
        };
        let mut samples = offsets
            .iter()
            .take(last)
            .map(|&s| hz.node_ops(s))
            .collect::<Result<Vec<_>>>()?;
        samples.push(hz.endpoint_ops()?);
        hz.samples = samples;
        hz.midpoints = mids.iter().map(|&s| hz.node_ops(s)).collect::<Result<_>>()?;
        hz.quad = rule.nodes.iter().map(|&s| hz.node_ops(s)).collect::<Result<_>>()?;
        Ok(hz)
    }

    pub fn gramian(&self) -> &Gramian {
        &self.gramian
    }

    pub fn t0(&self) -> f64 {
        self.gramian.t0
    }

    pub fn tf(&self) -> f64 {
        self.gramian.tf
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    fn span(&self) -> f64 {
        self.gramian.horizon()
    }

    /// Operators at offset `s ∈ [0, h]` from `t₀`.
    fn node_ops(&self, s: f64) -> Result<NodeOps> {
        let bal = self.gramian.balanced();
        let h = self.span();
        let tau = (h - s).max(0.0);
        let q = &bal.b * bal.b.transpose();
        let free = matrix_exponential(&bal.a, s)?;
        let adj = matrix_exponential(&bal.a.transpose(), tau)?;
        let forward = integral_unchecked(&bal.a, &q, s) * &adj;
        let input = bal.b.transpose() * &adj;
        let backward = self.backward_ops(tau)?;
        let ops = NodeOps {
            free,
            forward,
            input,
            backward,
        };
        if ops.forward.iter().chain(ops.free.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Overflow { t: s });
        }
        Ok(ops)
    }

    /// At `t_f` the forward operator is the cached Gramian itself, so the
    /// endpoint reproduces `W̃ W̃⁻¹ d̃` exactly up to the solve accuracy.
    fn endpoint_ops(&self) -> Result<NodeOps> {
        let bal = self.gramian.balanced();
        Ok(NodeOps {
            free: matrix_exponential(&bal.a, self.span())?,
            forward: bal.w.clone(),
            input: bal.b.transpose(),
            backward: self.backward_ops(0.0)?,
        })
    }

    fn backward_ops(&self, tau: f64) -> Result<Option<(DMatrix<f64>, DMatrix<f64>)>> {
        let bal = self.gramian.balanced();
        let k = bal.unstable;
        if k == 0 {
            return Ok(None);
        }
        let au = bal.a.view((0, 0), (k, k)).into_owned();
        let e = matrix_exponential(&(-au), tau)?;
        let w = integral_unchecked(&bal.a, &(&bal.b * bal.b.transpose()), tau);
        Ok(Some((e, w.rows(0, k).into_owned())))
    }

    fn solve(&self, x0: &DVector<f64>, xf: &DVector<f64>) -> Result<Solved> {
        let n = self.order();
        check_len(x0, n)?;
        check_len(xf, n)?;
        let bal = self.gramian.balanced();
        let x0t = bal.to_balanced(x0);
        let xft = bal.to_balanced(xf);
        let end = self.samples.last().expect("at least three samples");
        let dt = &xft - &end.free * &x0t;
        let factor = self.gramian.factor()?;
        let (y_hi, y_lo) = factor.solve_extended(&dt)?;
        let y = &y_hi + &y_lo;
        let energy = dt.dot(&y).max(0.0);
        Ok(Solved {
            x0t,
            xft,
            y_hi,
            y_lo,
            y,
            energy,
        })
    }

    /// Balanced state, its derivative, and the input at one node.
    fn eval(&self, ops: &NodeOps, s: &Solved) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let bal = self.gramian.balanced();
        let mut x = &ops.free * &s.x0t + matvec2(&ops.forward, &s.y_hi, &s.y_lo);
        if let Some((e, w)) = &ops.backward {
            let k = e.nrows();
            let head = s.xft.rows(0, k) - matvec2(w, &s.y_hi, &s.y_lo);
            x.rows_mut(0, k).copy_from(&(e * head));
        }
        let u = &ops.input * &s.y;
        let xdot = &bal.a * &x + &bal.b * &u;
        (x, xdot, u)
    }

    fn physical(&self, xt: &DVector<f64>) -> DVector<f64> {
        self.gramian.balanced().to_original(xt)
    }

    /// Full sampled trajectory with `L`, `R` and `E`.
    pub fn trajectory(&self, x0: &DVector<f64>, xf: &DVector<f64>, mode: LengthMode) -> Result<Trajectory> {
        let solved = self.solve(x0, xf)?;
        let mut states = Vec::with_capacity(self.samples.len());
        let mut inputs = Vec::with_capacity(self.samples.len());
        for ops in &self.samples {
            let (x, _, u) = self.eval(ops, &solved);
            states.push(self.physical(&x));
            inputs.push(u);
        }
        states[0] = x0.clone();
        check_endpoint(states.last().expect("non-empty"), xf)?;
        let length = match mode {
            LengthMode::Quadrature => self.quadrature_length(&solved),
            LengthMode::Polyline => polyline(&states),
        };
        let radius = self.radius_from(&states, x0, &solved);
        Ok(Trajectory {
            times: self.times.clone(),
            states,
            inputs,
            length,
            radius,
            energy: solved.energy,
            delta: (xf - x0).norm(),
        })
    }

    /// `L`, `R`, `E`, `δ` without keeping the sampled path.
    pub fn metrics(&self, x0: &DVector<f64>, xf: &DVector<f64>, mode: LengthMode) -> Result<TaskMetrics> {
        Ok(self.trajectory(x0, xf, mode)?.metrics())
    }

    fn quadrature_length(&self, solved: &Solved) -> f64 {
        let bal = self.gramian.balanced();
        self.quad
            .iter()
            .zip(&self.quad_weights)
            .map(|(ops, w)| {
                let (_, xdot, _) = self.eval(ops, solved);
                w * (&bal.t * xdot).norm()
            })
            .sum()
    }

    /// Largest sampled deviation, refined at the two midpoints next to the
    /// coarse maximum.
    fn radius_from(&self, states: &[DVector<f64>], x0: &DVector<f64>, solved: &Solved) -> f64 {
        let (arg, mut best) = states
            .iter()
            .map(|x| (x - x0).norm())
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, r)| if r > acc.1 { (i, r) } else { acc });
        let neighbours = [arg.checked_sub(1), (arg < self.midpoints.len()).then_some(arg)];
        for m in neighbours.into_iter().flatten() {
            let (x, _, _) = self.eval(&self.midpoints[m], solved);
            best = best.max((self.physical(&x) - x0).norm());
        }
        best
    }

    /// `∫‖u‖²dt` by quadrature of the evaluated input; equals the minimum
    /// energy up to quadrature error.
    pub fn input_energy(&self, x0: &DVector<f64>, xf: &DVector<f64>) -> Result<f64> {
        let solved = self.solve(x0, xf)?;
        Ok(self
            .quad
            .iter()
            .zip(&self.quad_weights)
            .map(|(ops, w)| w * self.eval(ops, &solved).2.norm_squared())
            .sum())
    }

    /// Path at arbitrary instants in `[t₀, t_f]`.
    pub fn states_at(&self, x0: &DVector<f64>, xf: &DVector<f64>, times: &[f64]) -> Result<Vec<DVector<f64>>> {
        let solved = self.solve(x0, xf)?;
        times
            .iter()
            .map(|&t| {
                if !(t >= self.t0() && t <= self.tf()) {
                    return Err(Error::Domain {
                        t,
                        t0: self.t0(),
                        tf: self.tf(),
                    });
                }
                let ops = if t == self.tf() {
                    self.endpoint_ops()?
                } else {
                    self.node_ops(t - self.t0())?
                };
                Ok(self.physical(&self.eval(&ops, &solved).0))
            })
            .collect()
    }

    /// The length from the Gramian-form integrand
    /// `√( yᵀ e^{A(t_f−t)} (W[0,t]Aᵀ + I)(A W[0,t] + I) e^{Aᵀ(t_f−t)} y )`,
    /// `y = W⁻¹[0,t_f] x_f`, evaluated in original coordinates on the same
    /// quadrature nodes as [`Horizon::metrics`]. Direct differentiation of the
    /// path gives `BBᵀ` where this form has `I`, so the two agree only when
    /// `BBᵀ = I`.
    pub fn length_gramian_form(&self, xf: &DVector<f64>) -> Result<GramianFormReport> {
        if self.t0() != 0.0 {
            return Err(Error::OutOfRange("Gramian-form length needs t0 = 0".into()));
        }
        let n = self.order();
        let zero = DVector::zeros(n);
        let solved = self.solve(&zero, xf)?;
        let y = self.gramian.balanced().t_inv.transpose() * &solved.y;
        let q = &self.b * self.b.transpose();
        let eye = DMatrix::<f64>::identity(n, n);
        let mut closed = 0.0;
        for (&t, &w) in self.quad_nodes.iter().zip(&self.quad_weights) {
            let wt = expm_integral(&self.a, &q, t)?;
            let v = matrix_exponential(&self.a.transpose(), self.tf() - t)? * &y;
            closed += w * ((&self.a * wt + &eye) * v).norm();
        }
        let direct = self.quadrature_length(&solved);
        Ok(GramianFormReport {
            closed_form: closed,
            direct,
            rel_discrepancy: (closed - direct).abs() / direct.abs().max(f64::MIN_POSITIVE),
        })
    }
}

/// Gramian-form length against direct quadrature of `‖ẋ‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GramianFormReport {
    pub closed_form: f64,
    pub direct: f64,
    pub rel_discrepancy: f64,
}

fn check_endpoint(x_end: &DVector<f64>, xf: &DVector<f64>) -> Result<()> {
    let miss = (x_end - xf).norm();
    let tolerance = 1e-6 * xf.norm().max(1.0);
    if !(miss <= tolerance) {
        return Err(Error::Consistency { miss, tolerance });
    }
    Ok(())
}

fn polyline(states: &[DVector<f64>]) -> f64 {
    states.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum()
}

/// Sample the optimal path of `task`.
pub fn integrate_trajectory(task: &ControlTask) -> Result<Trajectory> {
    task.horizon()?.trajectory(&task.x0, &task.xf, task.length_mode)
}

/// `L = ∫‖ẋ‖dt`.
pub fn trajectory_length(task: &ControlTask) -> Result<f64> {
    Ok(integrate_trajectory(task)?.length)
}

/// `R = max‖x(t) − x₀‖`.
pub fn trajectory_radius(task: &ControlTask) -> Result<f64> {
    Ok(integrate_trajectory(task)?.radius)
}

/// Gramian-form length for a task with `x₀ = 0`, `t₀ = 0`.
pub fn length_gramian_form(task: &ControlTask) -> Result<GramianFormReport> {
    if task.x0.iter().any(|&v| v != 0.0) {
        return Err(Error::OutOfRange("Gramian-form length needs x0 = 0".into()));
    }
    task.horizon()?.length_gramian_form(&task.xf)
}

/// Lengths at the task's sample count and at twice that.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolutionReport {
    pub coarse: f64,
    pub fine: f64,
    pub rel_change: f64,
    pub resolved: bool,
}

/// Flags a task whose length moves by more than 0.5% when the sample count is
/// doubled.
pub fn check_resolution(task: &ControlTask) -> Result<ResolutionReport> {
    let coarse = trajectory_length(task)?;
    let fine_task = task.clone().with_samples(2 * task.n_samples)?;
    let fine = trajectory_length(&fine_task)?;
    let rel_change = (fine - coarse).abs() / fine.abs().max(f64::MIN_POSITIVE);
    Ok(ResolutionReport {
        coarse,
        fine,
        rel_change,
        resolved: rel_change < RESOLUTION_TOLERANCE,
    })
}
