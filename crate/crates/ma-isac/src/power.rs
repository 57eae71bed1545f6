//! Per-subcarrier power allocation: water-filling, the weighted-sum power
//! step, and the sensing-constrained rate maximization.

use nalgebra::{DMatrix, DVector, Matrix2};
use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::objective::{dot, PowerTerms, Thresholds, Weighted};
use crate::solver::{newton_barrier, BarrierSettings, ConcaveProgram, Smooth, SolverReport, SolverStatus};

/// Inputs of a power step at fixed beams.
#[derive(Clone, Debug)]
pub struct PowerProblem {
    pub terms: PowerTerms,
    pub budget: f64,
    pub thresholds: Thresholds,
}

/// Per-vehicle 2×2 matrices whose semidefiniteness encodes the distance
/// and speed bound constraints.
#[derive(Clone, Debug, PartialEq)]
pub struct PsiMatrices {
    pub distance: Vec<Matrix2<f64>>,
    pub speed: Vec<Matrix2<f64>>,
}

pub fn psi_matrices(terms: &PowerTerms, thresholds: &Thresholds, p: &[f64]) -> PsiMatrices {
    let (sd, sv) = (thresholds.0[1], thresholds.0[2]);
    let mut distance = Vec::new();
    let mut speed = Vec::new();
    for k in 0..terms.num_vehicles() {
        let i = terms.info(k, p);
        let (rd, rv) = (sd.sqrt(), sv.sqrt());
        distance.push(Matrix2::new(i.c, rd * i.b, rd * i.b, sd * i.a - 1.0));
        speed.push(Matrix2::new(i.a, rv * i.b, rv * i.b, sv * i.c - 1.0));
    }
    PsiMatrices { distance, speed }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerSolution {
    pub powers: Vec<f64>,
    pub report: SolverReport,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WaterfillStatus {
    Ok,
    /// Every gain was zero; power was spread uniformly.
    UniformFallback,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Waterfill {
    pub powers: Vec<f64>,
    /// Budget multiplier `λ₁` of `Σ log2(1 + ĝp)`.
    pub multiplier: f64,
    pub iterations: usize,
    pub status: WaterfillStatus,
}

/// `p_n = max(0, 1/((λ₁−ȷ) ln 2) − 1/ĝ_n)` with `λ₁` set by bisection so the
/// budget is met.
pub fn waterfill(gains: &[f64], budget: f64, sensing_multiplier: f64) -> Waterfill {
    let n = gains.len();
    if gains.iter().all(|&g| !(g > 0.0)) {
        return Waterfill {
            powers: vec![budget / n as f64; n],
            multiplier: f64::NAN,
            iterations: 0,
            status: WaterfillStatus::UniformFallback,
        };
    }
    let floor = |g: f64| if g > 0.0 { 1.0 / g } else { f64::INFINITY };
    let fill = |level: f64| -> f64 { gains.iter().map(|&g| (level - floor(g)).max(0.0)).sum() };
    let min_floor = gains.iter().map(|&g| floor(g)).fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (min_floor, min_floor + budget);
    let mut level = hi;
    let mut iterations = 0;
    while iterations < 200 {
        iterations += 1;
        level = 0.5 * (lo + hi);
        let s = fill(level);
        if (s - budget).abs() <= 1e-13 * budget {
            break;
        }
        if s > budget {
            hi = level;
        } else {
            lo = level;
        }
    }
    // Exact level on the identified active set.
    let active: Vec<usize> = (0..n).filter(|&i| level > floor(gains[i])).collect();
    if !active.is_empty() {
        let exact = (budget + active.iter().map(|&i| floor(gains[i])).sum::<f64>()) / active.len() as f64;
        let same_set = (0..n).all(|i| (exact > floor(gains[i])) == active.contains(&i));
        if same_set {
            level = exact;
        }
    }
    let active: Vec<usize> = (0..n).filter(|&i| level > floor(gains[i])).collect();
    let share = budget / active.len() as f64;
    let mut powers = vec![0.0; n];
    for &i in &active {
        // Written through floor differences so equal gains split exactly.
        let spread: f64 = active.iter().map(|&j| floor(gains[j]) - floor(gains[i])).sum::<f64>() / active.len() as f64;
        powers[i] = (share + spread).max(0.0);
    }
    Waterfill {
        powers,
        multiplier: sensing_multiplier + 1.0 / (level * LN_2),
        iterations,
        status: WaterfillStatus::Ok,
    }
}

fn rate_smooth(gains: &[f64], p: &DVector<f64>, scale: f64) -> Smooth {
    let n = gains.len();
    let mut v = 0.0;
    let mut g = DVector::zeros(n);
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        let x = 1.0 + gains[i] * p[i];
        v += scale * x.ln();
        g[i] = scale * gains[i] / x;
        h[(i, i)] = -scale * gains[i] * gains[i] / (x * x);
    }
    Smooth { value: v, grad: g, hess: h }
}

/// Reduced information (θ, d, ν) of vehicle `k` as smooth functions of `p`.
fn reduced_smooth(terms: &PowerTerms, k: usize, p: &DVector<f64>) -> [Smooth; 3] {
    let ps = p.as_slice();
    let lin = |e: usize| (terms.prior[k][e] + dot(&terms.coef[k][e], ps), DVector::from_column_slice(&terms.coef[k][e]));
    let (th, gth) = lin(0);
    let (a, ga) = lin(1);
    let (b, gb) = lin(2);
    let (c, gc) = lin(3);
    let schur = |x: f64, gx: &DVector<f64>, y: f64, gy: &DVector<f64>| -> Smooth {
        // x − b²/y
        let r = b / y;
        let v = &gb - gy * r;
        Smooth {
            value: x - b * r,
            grad: gx - &gb * (2.0 * r) + gy * (r * r),
            hess: (&v * v.transpose()) * (-2.0 / y),
        }
    };
    let d = schur(a, &ga, c, &gc);
    let nu = schur(c, &gc, a, &ga);
    [Smooth::affine(th, gth), d, nu]
}

fn box_constraints(p: &DVector<f64>, budget: f64, out: &mut Vec<Smooth>, dim: usize) {
    let n = p.len();
    for i in 0..n {
        let mut g = DVector::zeros(dim);
        g[i] = 1.0;
        out.push(Smooth::affine(p[i], g));
    }
    let mut g = DVector::zeros(dim);
    for i in 0..n {
        g[i] = -1.0;
    }
    out.push(Smooth::affine(budget - p.sum(), g));
}

fn sensing_margins(terms: &PowerTerms, thresholds: &Thresholds, p: &DVector<f64>) -> Vec<Smooth> {
    let mut out = Vec::new();
    for k in 0..terms.num_vehicles() {
        let red = reduced_smooth(terms, k, p);
        for (j, r) in red.into_iter().enumerate() {
            let s = thresholds.0[j];
            if s.is_finite() {
                out.push(Smooth { value: s * r.value - 1.0, grad: r.grad * s, hess: r.hess * s });
            }
        }
    }
    out
}

struct QosProgram<'a> {
    problem: &'a PowerProblem,
    scale: f64,
}

impl ConcaveProgram for QosProgram<'_> {
    fn dim(&self) -> usize {
        self.problem.terms.rate_gains.len()
    }
    fn objective(&self, p: &DVector<f64>) -> Smooth {
        rate_smooth(&self.problem.terms.rate_gains, p, self.scale)
    }
    fn constraints(&self, p: &DVector<f64>) -> Vec<Smooth> {
        let mut out = sensing_margins(&self.problem.terms, &self.problem.thresholds, p);
        box_constraints(p, self.problem.budget, &mut out, p.len());
        out
    }
}

/// Maximize the smallest sensing margin over `(p, s)`.
struct FeasibilityProgram<'a> {
    problem: &'a PowerProblem,
}

impl ConcaveProgram for FeasibilityProgram<'_> {
    fn dim(&self) -> usize {
        self.problem.terms.rate_gains.len() + 1
    }
    fn objective(&self, x: &DVector<f64>) -> Smooth {
        let mut g = DVector::zeros(x.len());
        g[x.len() - 1] = 1.0;
        Smooth::affine(x[x.len() - 1], g)
    }
    fn constraints(&self, x: &DVector<f64>) -> Vec<Smooth> {
        let n = x.len() - 1;
        let p = x.rows(0, n).into_owned();
        let mut out = Vec::new();
        for m in sensing_margins(&self.problem.terms, &self.problem.thresholds, &p) {
            let mut g = DVector::zeros(n + 1);
            g.rows_mut(0, n).copy_from(&m.grad);
            g[n] = -1.0;
            let mut h = DMatrix::zeros(n + 1, n + 1);
            h.view_mut((0, 0), (n, n)).copy_from(&m.hess);
            out.push(Smooth { value: m.value - x[n], grad: g, hess: h });
        }
        box_constraints(&p, self.problem.budget, &mut out, n + 1);
        out
    }
}

fn clean(p: &DVector<f64>, budget: f64) -> Vec<f64> {
    let mut v: Vec<f64> = p.iter().map(|&x| x.max(0.0)).collect();
    let s: f64 = v.iter().sum();
    if s > budget {
        for x in &mut v {
            *x *= budget / s;
        }
    }
    v
}

/// Rate-maximizing powers subject to the sensing bound constraints.
pub fn solve_power_qos(problem: &PowerProblem) -> Result<PowerSolution> {
    let n = problem.terms.rate_gains.len();
    let settings = BarrierSettings::default();
    let mut p0 = DVector::from_element(n, problem.budget * (1.0 - 1e-3) / n as f64);
    let margins = |p: &DVector<f64>| sensing_margins(&problem.terms, &problem.thresholds, p);
    let worst = |p: &DVector<f64>| margins(p).iter().map(|m| m.value).fold(f64::INFINITY, f64::min);
    if worst(&p0) <= 0.0 {
        let feas = FeasibilityProgram { problem };
        let mut x0 = DVector::zeros(n + 1);
        x0.rows_mut(0, n).copy_from(&p0);
        x0[n] = worst(&p0) - 1.0;
        let stop = |x: &DVector<f64>| x[x.len() - 1] > 1e-6;
        let out = newton_barrier(&feas, x0, &settings, Some(&stop));
        let p = out.x.rows(0, n).into_owned();
        if !(worst(&p) > 0.0) {
            let info: Vec<_> = (0..problem.terms.num_vehicles()).map(|k| problem.terms.info(k, p.as_slice())).collect();
            let report = problem.thresholds.tightest(&info).expect("active thresholds");
            return Err(Error::Infeasible(report));
        }
        p0 = p;
    }
    let prog = QosProgram { problem, scale: 1.0 / (n as f64 * LN_2) };
    let out = newton_barrier(&prog, p0, &settings, None);
    Ok(PowerSolution { powers: clean(&out.x, problem.budget), report: out.report })
}

struct WeightedProgram<'a> {
    terms: &'a PowerTerms,
    budget: f64,
    weights: Weighted,
    scale: f64,
}

impl ConcaveProgram for WeightedProgram<'_> {
    fn dim(&self) -> usize {
        self.terms.rate_gains.len()
    }
    fn objective(&self, p: &DVector<f64>) -> Smooth {
        let n = p.len();
        let r = rate_smooth(&self.terms.rate_gains, p, self.scale);
        let mut out = Smooth { value: self.weights.rho * r.value, grad: r.grad * self.weights.rho, hess: r.hess * self.weights.rho };
        let ws = 1.0 - self.weights.rho;
        if ws > 0.0 {
            for k in 0..self.terms.num_vehicles() {
                for (i, s) in reduced_smooth(self.terms, k, p).into_iter().enumerate() {
                    let w = ws * self.weights.aleph[i];
                    if w == 0.0 {
                        continue;
                    }
                    out.value += w * s.value;
                    out.grad += s.grad * w;
                    out.hess += s.hess * w;
                }
            }
        }
        debug_assert_eq!(out.grad.len(), n);
        out
    }
    fn constraints(&self, p: &DVector<f64>) -> Vec<Smooth> {
        let mut out = Vec::new();
        box_constraints(p, self.budget, &mut out, p.len());
        out
    }
}

/// Powers maximizing the weighted rate/sensing objective over the capped
/// simplex.
pub fn solve_power_weighted(terms: &PowerTerms, budget: f64, weights: &Weighted) -> PowerSolution {
    let n = terms.rate_gains.len();
    if weights.rho >= 1.0 {
        let wf = waterfill(&terms.rate_gains, budget, 0.0);
        return PowerSolution { powers: wf.powers, report: SolverReport { status: SolverStatus::Optimal, iterations: wf.iterations, residual: 0.0 } };
    }
    let linear = weights.rho == 0.0 && weights.aleph[1] == 0.0 && weights.aleph[2] == 0.0;
    if linear {
        // Linear objective: the whole budget goes to the best coefficient.
        let coef: Vec<f64> = (0..n).map(|i| (0..terms.num_vehicles()).map(|k| terms.coef[k][0][i]).sum::<f64>()).collect();
        let mut best = 0;
        for i in 1..n {
            if coef[i] > coef[best] {
                best = i;
            }
        }
        let mut p = vec![0.0; n];
        p[best] = budget;
        return PowerSolution { powers: p, report: SolverReport { status: SolverStatus::Optimal, iterations: 0, residual: 0.0 } };
    }
    let prog = WeightedProgram { terms, budget, weights: *weights, scale: 1.0 / (n as f64 * LN_2) };
    let p0 = DVector::from_element(n, budget * (1.0 - 1e-3) / n as f64);
    let out = newton_barrier(&prog, p0, &BarrierSettings::default(), None);
    PowerSolution { powers: clean(&out.x, budget), report: out.report }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_gains_split_evenly() {
        let wf = waterfill(&[2.0; 4], 1.0, 0.0);
        for p in wf.powers {
            assert_eq!(p, 0.25);
        }
    }

    #[test]
    fn tiny_budget_goes_to_best_carrier() {
        let wf = waterfill(&[1e6, 1.0, 2.0], 1e-3, 0.0);
        assert!((wf.powers[0] - 1e-3).abs() < 1e-15);
        assert_eq!(&wf.powers[1..], &[0.0, 0.0]);
    }

    #[test]
    fn zero_gains_fall_back_to_uniform() {
        let wf = waterfill(&[0.0; 3], 3.0, 0.0);
        assert_eq!(wf.status, WaterfillStatus::UniformFallback);
        assert_eq!(wf.powers, vec![1.0; 3]);
    }
}
