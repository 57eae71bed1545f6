//! Solver status reporting and a dense log-barrier Newton method for small
//! smooth concave programs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

/// Outcome summary of an iterative solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub status: SolverStatus,
    pub iterations: usize,
    /// Relative duality gap bound.
    pub residual: f64,
}

/// Value, gradient and Hessian of a twice-differentiable function.
#[derive(Clone, Debug)]
pub struct Smooth {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl Smooth {
    pub fn affine(value: f64, grad: DVector<f64>) -> Smooth {
        let n = grad.len();
        Smooth { value, grad, hess: DMatrix::zeros(n, n) }
    }
}

/// Maximize a concave objective subject to concave constraints `h_j(x) ≥ 0`.
pub trait ConcaveProgram {
    fn dim(&self) -> usize;
    fn objective(&self, x: &DVector<f64>) -> Smooth;
    fn constraints(&self, x: &DVector<f64>) -> Vec<Smooth>;
    /// Cheap constraint values for the line search.
    fn constraint_values(&self, x: &DVector<f64>) -> Vec<f64> {
        self.constraints(x).into_iter().map(|c| c.value).collect()
    }
    fn objective_value(&self, x: &DVector<f64>) -> f64 {
        self.objective(x).value
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierSettings {
    /// Target `m/t` relative to `max(1, |f|)`.
    pub gap: f64,
    pub growth: f64,
    pub max_newton: usize,
}

impl Default for BarrierSettings {
    fn default() -> Self {
        BarrierSettings { gap: 1e-11, growth: 20.0, max_newton: 2000 }
    }
}

#[derive(Clone, Debug)]
pub struct BarrierOutcome {
    pub x: DVector<f64>,
    pub value: f64,
    /// Multipliers `1/(t·h_j)` at the final centering point.
    pub multipliers: Vec<f64>,
    pub report: SolverReport,
}

fn barrier_value<P: ConcaveProgram + ?Sized>(prog: &P, x: &DVector<f64>, t: f64) -> Option<f64> {
    let mut v = t * prog.objective_value(x);
    for h in prog.constraint_values(x) {
        if !(h > 0.0) {
            return None;
        }
        v += h.ln();
    }
    v.is_finite().then_some(v)
}

/// Log-barrier path following from a strictly feasible `x0`.
///
/// `stop` is checked after every centering and ends the run early when it
/// returns true (used by feasibility searches).
pub fn newton_barrier<P: ConcaveProgram + ?Sized>(
    prog: &P,
    x0: DVector<f64>,
    settings: &BarrierSettings,
    stop: Option<&dyn Fn(&DVector<f64>) -> bool>,
) -> BarrierOutcome {
    let n = prog.dim();
    let mut x = x0;
    let m = prog.constraint_values(&x).len() as f64;
    let f0 = prog.objective_value(&x).abs().max(1e-6);
    let mut t = (m / f0).max(1e-3);
    let mut steps = 0;
    let mut status = SolverStatus::MaxIter;
    loop {
        // Center.
        loop {
            if steps >= settings.max_newton {
                break;
            }
            let obj = prog.objective(&x);
            let cons = prog.constraints(&x);
            let mut g = &obj.grad * t;
            let mut h = &obj.hess * t;
            for c in &cons {
                g += &c.grad / c.value;
                h += &c.hess / c.value - (&c.grad * c.grad.transpose()) / (c.value * c.value);
            }
            let neg = -&h;
            let dx = match neg.clone().cholesky() {
                Some(ch) => ch.solve(&g),
                None => {
                    let reg = 1e-12 * neg.diagonal().abs().max().max(1e-300);
                    match (neg + DMatrix::identity(n, n) * reg).cholesky() {
                        Some(ch) => ch.solve(&g),
                        None => g.clone(),
                    }
                }
            };
            let dec = g.dot(&dx);
            steps += 1;
            if !(dec > 1e-10) {
                break;
            }
            let phi = barrier_value(prog, &x, t).unwrap_or(f64::NEG_INFINITY);
            let mut s = 1.0;
            let mut accepted = false;
            for _ in 0..200 {
                let cand = &x + &dx * s;
                if let Some(v) = barrier_value(prog, &cand, t) {
                    if v >= phi + 0.25 * s * dec && v > phi {
                        x = cand;
                        accepted = true;
                        break;
                    }
                }
                s *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if let Some(stop) = stop {
            if stop(&x) {
                status = SolverStatus::Optimal;
                break;
            }
        }
        let f = prog.objective_value(&x);
        if m / t <= settings.gap * f.abs().max(1.0) {
            status = SolverStatus::Optimal;
            break;
        }
        if steps >= settings.max_newton {
            break;
        }
        t *= settings.growth;
    }
    let obj = prog.objective(&x);
    let cons = prog.constraints(&x);
    let multipliers: Vec<f64> = cons.iter().map(|c| 1.0 / (t * c.value)).collect();
    let residual = m / (t * obj.value.abs().max(1.0));
    BarrierOutcome { value: obj.value, x, multipliers, report: SolverReport { status, iterations: steps, residual } }
}
