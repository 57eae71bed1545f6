//! Unit-modulus beamforming through semidefinite relaxation.
//!
//! Each subcarrier beam `w_n` is lifted to `W_n = w_n w_nᴴ` and the rank
//! constraint dropped, leaving unit-diagonal PSD variables. The relaxed
//! problem is maximized by successive minorization: every iteration
//! maximizes a concave quadratic lower bound
//! `f(W⁺) + ⟨∇f, W − W⁺⟩ − (L/2)‖W − W⁺‖²` that touches the objective at
//! the current iterate, with `L` increased until the bound holds at the new
//! point. Each bound is maximized over a factorization `W = VVᴴ` with
//! unit-norm rows, which keeps the diagonal and PSD constraints exact.
//! Optimality is certified by a duality-gap bound. Gaussian randomization
//! then recovers unit-modulus beams.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fim::{beam_stats_lifted, SensingInfo};
use crate::objective::{Evaluation, InfoGrad, Scene, Stats, Thresholds, Weighted};
use crate::solver::{SolverReport, SolverStatus};

type CMat = DMatrix<Complex64>;
type CVec = DVector<Complex64>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamSettings {
    /// Certified duality-gap tolerance, relative to `max(1, |f|)`.
    pub tolerance: f64,
    /// Relative improvement below which iterations stop.
    pub improvement: f64,
    pub max_iterations: usize,
    pub inner_steps: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for BeamSettings {
    fn default() -> Self {
        BeamSettings { tolerance: 1e-6, improvement: 1e-10, max_iterations: 400, inner_steps: 10, samples: 100, seed: 0 }
    }
}

/// One minorization step: objective before, lower bound at the accepted
/// point, objective after.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaStep {
    pub before: f64,
    pub surrogate: f64,
    pub after: f64,
}

#[derive(Clone, Debug)]
pub struct BeamSolution {
    pub beams: Vec<CVec>,
    pub lifted: Vec<CMat>,
    /// Relaxed objective at the lifted solution.
    pub relaxed_value: f64,
    /// Objective at the recovered beams.
    pub value: f64,
    /// Per-vehicle reduced information `(θ, d, ν)` at the lifted solution.
    pub auxiliaries: Vec<[f64; 3]>,
    pub trace: Vec<ScaStep>,
    pub report: SolverReport,
}

#[derive(Clone, Copy, Debug)]
enum Goal {
    Weighted(Weighted),
    Barrier { thresholds: Thresholds, mu: f64 },
    SoftMin { thresholds: Thresholds, tau: f64 },
}

impl Goal {
    /// Value, rate weight and information weights; `None` outside the domain.
    fn eval(&self, e: &Evaluation) -> Option<(f64, f64, Vec<InfoGrad>)> {
        match *self {
            Goal::Weighted(w) => Some((w.value(e), w.rho, w.info_grads(&e.info))),
            Goal::Barrier { thresholds, mu } => {
                let v = thresholds.barrier_value(e, mu)?;
                Some((v, 1.0, thresholds.barrier_grads(&e.info, mu)))
            }
            Goal::SoftMin { thresholds, tau } => {
                let m: Vec<(usize, usize, f64)> = thresholds
                    .margins(&e.info)
                    .iter()
                    .enumerate()
                    .flat_map(|(k, ms)| ms.iter().enumerate().filter_map(move |(j, x)| x.map(|x| (k, j, x))))
                    .collect();
                let lo = m.iter().map(|x| x.2).fold(f64::INFINITY, f64::min);
                let wsum: f64 = m.iter().map(|x| (-(x.2 - lo) / tau).exp()).sum();
                let value = lo - tau * wsum.ln();
                let mut red = vec![[0.0; 3]; e.info.len()];
                for &(k, j, x) in &m {
                    red[k][j] += (-(x - lo) / tau).exp() / wsum * thresholds.0[j];
                }
                let grads = e.info.iter().zip(&red).map(|(i, w)| InfoGrad::from_reduced(i, *w)).collect();
                Some((value, 0.0, grads))
            }
        }
    }
}

fn cdot(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

fn lift(v: &[CMat]) -> Vec<CMat> {
    v.iter().map(|f| f * f.adjoint()).collect()
}

fn lifted_stats(scene: &Scene, w: &[CMat]) -> Stats {
    w.iter().map(|wn| scene.vehicles.iter().map(|v| beam_stats_lifted(&v.steer, &scene.tx, wn)).collect()).collect()
}

/// Hermitian gradient representers `C_n` from statistic gradients.
fn representers(scene: &Scene, g: &Stats) -> Vec<CMat> {
    let m = scene.m_tx();
    let mut out = Vec::with_capacity(g.len());
    for gn in g {
        let mut c = CMat::zeros(m, m);
        for (v, gs) in scene.vehicles.iter().zip(gn) {
            let a = &v.steer;
            let la = CVec::from_iterator(m, a.iter().zip(&scene.tx).map(|(z, p)| z * p));
            for i in 0..m {
                for j in 0..m {
                    let aa = a[i] * a[j].conj();
                    let ll = la[i] * la[j].conj();
                    let al = 0.5 * (la[i] * a[j].conj() + a[i] * la[j].conj());
                    c[(i, j)] += aa * gs.xi + ll * gs.xi1 + al * gs.xi2;
                }
            }
        }
        out.push(c);
    }
    out
}

struct Point {
    value: f64,
    eval: Evaluation,
    grad: Vec<CMat>,
}

fn evaluate(scene: &Scene, p: &[f64], goal: &Goal, w: &[CMat]) -> Option<Point> {
    let stats = lifted_stats(scene, w);
    let eval = scene.evaluate(&stats, p);
    let (value, d_rate, d_info) = goal.eval(&eval)?;
    if !value.is_finite() {
        return None;
    }
    let (g, _) = scene.backprop(&stats, p, d_rate, &d_info);
    Some(Point { value, eval, grad: representers(scene, &g) })
}

fn normalize_rows(v: &mut CMat) {
    for i in 0..v.nrows() {
        let n = v.row(i).norm();
        if n > 0.0 {
            for j in 0..v.ncols() {
                v[(i, j)] /= n;
            }
        } else {
            v[(i, 0)] = Complex64::new(1.0, 0.0);
        }
    }
}

/// Initial factors: each incumbent beam in the first column plus a small
/// deterministic perturbation so that the factorization is not stuck at
/// rank one.
fn initial_factors(beams: &[CVec], seed: u64) -> Vec<CMat> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_fac7);
    beams
        .iter()
        .map(|w| {
            let m = w.len();
            let mut v = CMat::zeros(m, m);
            for i in 0..m {
                v[(i, 0)] = w[i] / w[i].norm();
                for j in 1..m {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    v[(i, j)] = Complex64::new(re, im) * (0.05 / (m as f64).sqrt());
                }
            }
            normalize_rows(&mut v);
            v
        })
        .collect()
}

/// Upper bound on `max_{W'} ⟨C, W' − W⟩` over unit-diagonal PSD matrices.
fn gap_bound(c: &[CMat], w: &[CMat]) -> f64 {
    let mut gap = 0.0;
    for (cn, wn) in c.iter().zip(w) {
        let m = cn.nrows();
        let cw = cn * wn;
        let mut shifted = cn.clone();
        for i in 0..m {
            shifted[(i, i)] -= Complex64::new(cw[(i, i)].re, 0.0);
        }
        let herm = (&shifted + shifted.adjoint()) * Complex64::new(0.5, 0.0);
        let top = herm.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        gap += m as f64 * top.max(0.0);
    }
    gap
}

struct ScaOutcome {
    factors: Vec<CMat>,
    lifted: Vec<CMat>,
    value: f64,
    eval: Evaluation,
    trace: Vec<ScaStep>,
    report: SolverReport,
}

fn sca(scene: &Scene, p: &[f64], goal: &Goal, mut v: Vec<CMat>, settings: &BeamSettings, stop: Option<&dyn Fn(&Evaluation) -> bool>) -> Option<ScaOutcome> {
    let mut w = lift(&v);
    let mut cur = evaluate(scene, p, goal, &w)?;
    let mut trace = Vec::new();
    let mut lips = {
        let s: f64 = cur.grad.iter().map(|c| c.norm()).sum::<f64>() / cur.grad.len().max(1) as f64;
        (1e-3 * s).max(1e-300)
    };
    let mut alpha = f64::NAN;
    let mut iterations = 0;
    while iterations < settings.max_iterations {
        if let Some(stop) = stop {
            if stop(&cur.eval) {
                break;
            }
        }
        iterations += 1;
        let f0 = cur.value;
        let scale = f0.abs().max(1.0);
        let w0 = w.clone();
        let c0 = cur.grad.clone();
        let mut accepted = None;
        for _ in 0..60 {
            // Maximize the quadratic lower bound from the current factors.
            let sur = |wn: &[CMat]| -> f64 {
                let mut s = f0;
                for n in 0..wn.len() {
                    let d = &wn[n] - &w0[n];
                    s += cdot(&c0[n], &d) - 0.5 * lips * d.norm_squared();
                }
                s
            };
            let mut vt = v.clone();
            let mut wt = w0.clone();
            let mut s_cur = f0;
            if !alpha.is_finite() {
                let cn: f64 = c0.iter().map(|c| c.norm()).fold(0.0, f64::max);
                alpha = 0.25 / (cn + lips * scene.m_tx() as f64).max(1e-300);
            }
            for _ in 0..settings.inner_steps {
                let mut r: Vec<CMat> = Vec::with_capacity(vt.len());
                let mut rn2 = 0.0;
                for n in 0..vt.len() {
                    let cs = &c0[n] - (&wt[n] - &w0[n]) * Complex64::new(lips, 0.0);
                    let mut g = (&cs * &vt[n]) * Complex64::new(2.0, 0.0);
                    for i in 0..g.nrows() {
                        let proj: f64 = (0..g.ncols()).map(|j| (vt[n][(i, j)].conj() * g[(i, j)]).re).sum();
                        for j in 0..g.ncols() {
                            let vij = vt[n][(i, j)];
                            g[(i, j)] -= vij * proj;
                        }
                    }
                    rn2 += g.norm_squared();
                    r.push(g);
                }
                if rn2 <= 1e-30 * scale * scale {
                    break;
                }
                let mut moved = false;
                for _ in 0..40 {
                    let mut vn: Vec<CMat> = vt.iter().zip(&r).map(|(a, b)| a + b * Complex64::new(alpha, 0.0)).collect();
                    vn.iter_mut().for_each(normalize_rows);
                    let wn = lift(&vn);
                    let s_new = sur(&wn);
                    if s_new >= s_cur + 1e-4 * alpha * rn2 {
                        vt = vn;
                        wt = wn;
                        s_cur = s_new;
                        alpha *= 2.0;
                        moved = true;
                        break;
                    }
                    alpha *= 0.5;
                }
                if !moved {
                    break;
                }
            }
            if s_cur <= f0 {
                accepted = Some((vt, wt, None, s_cur));
                break;
            }
            match evaluate(scene, p, goal, &wt) {
                Some(pt) if pt.value >= s_cur - 1e-12 * scale => {
                    accepted = Some((vt, wt, Some(pt), s_cur));
                    break;
                }
                _ => lips *= 4.0,
            }
        }
        let Some((vt, wt, pt, s_best)) = accepted else { break };
        let Some(pt) = pt else {
            // No ascent possible on the bound: stationary.
            trace.push(ScaStep { before: f0, surrogate: f0, after: f0 });
            break;
        };
        let improvement = pt.value - f0;
        trace.push(ScaStep { before: f0, surrogate: s_best, after: pt.value });
        v = vt;
        w = wt;
        cur = pt;
        lips = (lips * 0.5).max(1e-300);
        if improvement <= settings.improvement * scale {
            break;
        }
    }
    let gap = gap_bound(&cur.grad, &w);
    let status = if gap <= settings.tolerance * cur.value.abs().max(1.0) { SolverStatus::Optimal } else { SolverStatus::MaxIter };
    Some(ScaOutcome {
        factors: v,
        lifted: w,
        value: cur.value,
        eval: cur.eval,
        trace,
        report: SolverReport { status, iterations, residual: gap },
    })
}

/// Candidate beams for recovery, per subcarrier.
struct Candidates {
    beams: Vec<Vec<CVec>>,
    rate: Vec<Vec<f64>>,
    info: Vec<Vec<Vec<[f64; 4]>>>,
}

fn unit_phase(x: &CVec) -> CVec {
    let arg = |z: &Complex64| if z.norm() > 0.0 { z.arg() } else { 0.0 };
    let first = arg(&x[0]);
    x.map(|z| Complex64::from_polar(1.0, arg(&z) - first))
}

fn principal_phase(w: &CMat) -> CVec {
    let e = w.clone().symmetric_eigen();
    let mut best = 0;
    for i in 1..e.eigenvalues.len() {
        if e.eigenvalues[i] > e.eigenvalues[best] {
            best = i;
        }
    }
    unit_phase(&e.eigenvectors.column(best).into_owned())
}

fn sample_phases(factor: &CMat, rng: &mut ChaCha8Rng) -> CVec {
    let m = factor.ncols();
    let z = CVec::from_fn(m, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    unit_phase(&(factor * z))
}

fn build_candidates(scene: &Scene, p: &[f64], factors: &[CMat], lifted: &[CMat], incumbent: Option<&[CVec]>, samples: usize, seed: u64) -> Candidates {
    let n_sc = factors.len();
    let mut beams = Vec::with_capacity(n_sc);
    for n in 0..n_sc {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(n as u64);
        let mut c = Vec::with_capacity(samples + 2);
        if let Some(inc) = incumbent {
            c.push(unit_phase(&inc[n]));
        }
        c.push(principal_phase(&lifted[n]));
        for _ in 0..samples {
            c.push(sample_phases(&factors[n], &mut rng));
        }
        beams.push(c);
    }
    let mut rate = Vec::with_capacity(n_sc);
    let mut info = Vec::with_capacity(n_sc);
    for n in 0..n_sc {
        let mut rn = Vec::new();
        let mut inn = Vec::new();
        for w in &beams[n] {
            let s = scene.stats_of(w);
            rn.push(scene.rate_term(n, &s, p[n]));
            inn.push(scene.info_term(n, &s, p[n]));
        }
        rate.push(rn);
        info.push(inn);
    }
    Candidates { beams, rate, info }
}

#[derive(Clone, Copy, Debug)]
enum Recovery {
    Weighted(Weighted),
    Qos(Thresholds),
}

impl Recovery {
    fn value(&self, rate: f64, info: &[SensingInfo]) -> Option<f64> {
        match self {
            Recovery::Weighted(w) => Some(w.rho * rate + (1.0 - w.rho) * w.sensing(info)),
            Recovery::Qos(t) => t.satisfied(info, 0.0).then_some(rate),
        }
    }
}

/// Picks one candidate per subcarrier: best common sample index first, then
/// greedy per-subcarrier improvement sweeps. Ties keep the lower index.
fn select(scene: &Scene, cand: &Candidates, goal: &Recovery) -> Option<(Vec<usize>, f64)> {
    let n_sc = cand.beams.len();
    let k_n = scene.num_vehicles();
    let count = cand.beams[0].len();
    let total = |choice: &[usize]| -> (f64, Vec<[f64; 4]>) {
        let mut rate = 0.0;
        let mut sums = vec![[0.0; 4]; k_n];
        for n in 0..n_sc {
            rate += cand.rate[n][choice[n]];
            for k in 0..k_n {
                for i in 0..4 {
                    sums[k][i] += cand.info[n][choice[n]][k][i];
                }
            }
        }
        (rate, sums)
    };
    let score = |rate: f64, sums: &[[f64; 4]]| goal.value(rate, &scene.info_from_sums(sums));
    let mut best: Option<(Vec<usize>, f64)> = None;
    for c in 0..count {
        let choice = vec![c; n_sc];
        let (r, s) = total(&choice);
        if let Some(v) = score(r, &s) {
            if best.as_ref().map_or(true, |b| v > b.1) {
                best = Some((choice, v));
            }
        }
    }
    let (mut choice, mut value) = best?;
    for _ in 0..3 {
        let mut changed = false;
        for n in 0..n_sc {
            let (rate, sums) = total(&choice);
            let old = choice[n];
            for c in 0..count {
                if c == old {
                    continue;
                }
                let r = rate - cand.rate[n][old] + cand.rate[n][c];
                let mut s = sums.clone();
                for k in 0..k_n {
                    for i in 0..4 {
                        s[k][i] += cand.info[n][c][k][i] - cand.info[n][old][k][i];
                    }
                }
                if let Some(v) = score(r, &s) {
                    if v > value * (1.0 + 1e-15 * value.signum()) + 1e-300 {
                        value = v;
                        choice[n] = c;
                        changed = true;
                    }
                }
            }
            if choice[n] != old {
                // Refresh so incremental sums do not drift.
                let (r, s) = total(&choice);
                value = score(r, &s).unwrap_or(value);
            }
        }
        if !changed {
            break;
        }
    }
    Some((choice, value))
}

fn auxiliaries(e: &Evaluation) -> Vec<[f64; 3]> {
    e.info.iter().map(|i| i.reduced()).collect()
}

/// Weighted-sum beam design at fixed powers.
pub fn sca_solve_weighted(scene: &Scene, powers: &[f64], weights: &Weighted, init: &[CVec], settings: &BeamSettings) -> Result<BeamSolution> {
    let goal = Goal::Weighted(*weights);
    let v0 = initial_factors(init, settings.seed);
    let out = sca(scene, powers, &goal, v0, settings, None).ok_or_else(|| Error::Domain("objective undefined at the initial beams".into()))?;
    let cand = build_candidates(scene, powers, &out.factors, &out.lifted, Some(init), settings.samples, settings.seed);
    let (choice, value) = select(scene, &cand, &Recovery::Weighted(*weights)).expect("weighted recovery always has a candidate");
    let beams = choice.iter().enumerate().map(|(n, &c)| cand.beams[n][c].clone()).collect();
    Ok(BeamSolution {
        beams,
        lifted: out.lifted,
        relaxed_value: out.value,
        value,
        auxiliaries: auxiliaries(&out.eval),
        trace: out.trace,
        report: out.report,
    })
}

/// Rate-maximizing beams subject to block-bound thresholds at fixed powers.
pub fn sca_solve_qos(scene: &Scene, powers: &[f64], thresholds: &Thresholds, init: &[CVec], settings: &BeamSettings) -> Result<BeamSolution> {
    let rate_only = Weighted { rho: 1.0, aleph: [0.0; 3] };
    let mut last_err = None;
    for attempt in 0..4 {
        let th = thresholds.scaled(0.95f64.powi(attempt));
        let v0 = initial_factors(init, settings.seed);
        let base = sca(scene, powers, &Goal::Weighted(rate_only), v0, settings, None).ok_or_else(|| Error::Domain("rate undefined at the initial beams".into()))?;
        let mut trace = base.trace.clone();
        let mut out = base;
        if th.is_active() && !th.satisfied(&out.eval.info, 0.0) {
            // Find a strictly feasible relaxed point, then follow the barrier path.
            let interior = |e: &Evaluation| th.margins(&e.info).iter().flatten().flatten().all(|&m| m > 1e-9);
            let feas = sca(scene, powers, &Goal::SoftMin { thresholds: th, tau: 0.02 }, out.factors.clone(), settings, Some(&interior))
                .expect("soft-min is defined everywhere");
            if !interior(&feas.eval) {
                let report = th.tightest(&feas.eval.info).expect("active thresholds");
                last_err = Some(Error::Infeasible(report));
                break;
            }
            let mut cur = feas;
            let m = th.count(scene.num_vehicles()) as f64;
            let mut mu = 1e-3 * out.value.abs().max(1.0);
            loop {
                let stage = sca(scene, powers, &Goal::Barrier { thresholds: th, mu }, cur.factors.clone(), settings, None).expect("interior start");
                trace.extend(stage.trace.iter().copied());
                cur = stage;
                if m * mu <= 1e-6 * cur.eval.rate.abs().max(1.0) {
                    break;
                }
                mu *= 0.1;
            }
            out = cur;
        }
        let cand = build_candidates(scene, powers, &out.factors, &out.lifted, Some(init), settings.samples, settings.seed);
        match select(scene, &cand, &Recovery::Qos(*thresholds)) {
            Some((choice, value)) => {
                let beams = choice.iter().enumerate().map(|(n, &c)| cand.beams[n][c].clone()).collect();
                return Ok(BeamSolution {
                    beams,
                    lifted: out.lifted,
                    relaxed_value: out.eval.rate,
                    value,
                    auxiliaries: auxiliaries(&out.eval),
                    trace,
                    report: out.report,
                });
            }
            None => {
                let e = scene.evaluate(&scene.stats(&cand.beams.iter().map(|c| c[0].clone()).collect::<Vec<_>>()), powers);
                last_err = Some(Error::Infeasible(thresholds.tightest(&e.info).expect("active thresholds")));
            }
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Draws `samples` vectors `x ~ CN(0, W)`, keeps their phases, and returns
/// the one scoring highest (lowest index on ties). Beams are rotated so the
/// first entry is 1.
pub fn gaussian_randomize<F: Fn(&CVec) -> f64>(w: &CMat, samples: usize, seed: u64, score: F) -> CVec {
    let e = w.clone().symmetric_eigen();
    // Eigenvalues at rounding level would otherwise add O(√ε) noise.
    let floor = 1e-12 * e.eigenvalues.max().max(0.0);
    let factor = &e.eigenvectors * DMatrix::from_diagonal(&e.eigenvalues.map(|l| Complex64::new(if l > floor { l.sqrt() } else { 0.0 }, 0.0)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(CVec, f64)> = None;
    for _ in 0..samples.max(1) {
        let cand = sample_phases(&factor, &mut rng);
        let s = score(&cand);
        if best.as_ref().map_or(true, |b| s > b.1) {
            best = Some((cand, s));
        }
    }
    best.expect("at least one sample").0
}
