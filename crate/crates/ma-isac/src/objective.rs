//! Objective evaluation shared by the beam, power and position solvers.
//!
//! Everything the optimization problems depend on reduces to three quadratic
//! forms of each beam against each vehicle ([`BeamStats`]) plus the powers.
//! [`Scene`] turns those into the rate and per-vehicle information and
//! back-propagates objective gradients onto them.

use nalgebra::{DVector, Matrix3};
use num_complex::Complex64;

use crate::error::{BoundKind, Error, Infeasibility, Result};
use crate::fim::{beam_stats, g_entry, BeamStats, GEntry, InfoCoefficients, RxTraces, SensingInfo};
use crate::model::{steering_cos, ArrayLayout, SubcarrierMap, SystemConfig, VehicleState};

/// Beam statistics indexed `[subcarrier][vehicle]`.
pub type Stats = Vec<Vec<BeamStats>>;

/// Per-vehicle constants.
#[derive(Clone, Debug)]
pub struct VehicleTerms {
    pub state: VehicleState,
    pub steer: DVector<Complex64>,
    pub coef: InfoCoefficients,
    /// `α T_e/η0`: SNR per unit power and unit `|aᴴw|²`.
    pub rate_gain: f64,
    pub prior: Matrix3<f64>,
    chain: ChainFactors,
}

/// Factors mapping g-block sums to motion-coordinate information.
#[derive(Clone, Copy, Debug)]
struct ChainFactors {
    t11: f64,
    t13: f64,
    t33_theta: f64,
    t22: f64,
    t23: f64,
    t33: f64,
}

impl ChainFactors {
    fn new(cfg: &SystemConfig, v: &VehicleState) -> ChainFactors {
        let (s, c) = v.theta.sin_cos();
        let (lam, nu, cl) = (cfg.wavelength, v.speed, cfg.lightspeed);
        ChainFactors {
            t11: s * s,
            t13: 4.0 * nu * s * s / lam,
            t33_theta: 4.0 * nu * nu * s * s / (lam * lam),
            t22: 4.0 / (cl * cl),
            t23: 4.0 * c / (cl * lam),
            t33: 4.0 * c * c / (lam * lam),
        }
    }

    /// This subcarrier's contribution per unit power to (θ, a, b, c).
    fn apply(&self, g: &GEntry) -> [f64; 4] {
        [
            self.t11 * g.g11 + self.t13 * g.g13 + self.t33_theta * g.g33,
            self.t22 * g.g22,
            self.t23 * g.g23,
            self.t33 * g.g33,
        ]
    }
}

/// One slot's optimization inputs.
#[derive(Clone, Debug)]
pub struct Scene {
    pub cfg: SystemConfig,
    pub tx: Vec<f64>,
    pub rx: RxTraces,
    pub map: SubcarrierMap,
    pub vehicles: Vec<VehicleTerms>,
}

/// Rate and per-vehicle information at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub rate: f64,
    pub info: Vec<SensingInfo>,
}

/// Sensitivity of an objective to `(θ, a, b, c)` of one vehicle.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct InfoGrad {
    pub theta: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl InfoGrad {
    /// Chain weights on the reduced information `(θ, a − b²/c, c − b²/a)`.
    pub fn from_reduced(info: &SensingInfo, w: [f64; 3]) -> InfoGrad {
        let (a, b, c) = (info.a, info.b, info.c);
        let (ia, ic) = (if a > 0.0 { 1.0 / a } else { 0.0 }, if c > 0.0 { 1.0 / c } else { 0.0 });
        InfoGrad {
            theta: w[0],
            a: w[1] + w[2] * b * b * ia * ia,
            b: -2.0 * b * (w[1] * ic + w[2] * ia),
            c: w[1] * b * b * ic * ic + w[2],
        }
    }
}

/// Power-affine form of the information at fixed beams.
#[derive(Clone, Debug)]
pub struct PowerTerms {
    /// Own-vehicle SNR per unit power on each subcarrier.
    pub rate_gains: Vec<f64>,
    /// `[vehicle][entry]` with entries (θ, a, b, c): prior constant ...
    pub prior: Vec<[f64; 4]>,
    /// ... and per-subcarrier coefficients `[vehicle][entry][n]`.
    pub coef: Vec<[Vec<f64>; 4]>,
}

impl PowerTerms {
    pub fn info(&self, k: usize, p: &[f64]) -> SensingInfo {
        let v: Vec<f64> = (0..4).map(|e| self.prior[k][e] + dot(&self.coef[k][e], p)).collect();
        SensingInfo { theta: v[0], a: v[1], b: v[2], c: v[3] }
    }

    pub fn num_vehicles(&self) -> usize {
        self.prior.len()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Scene {
    pub fn new(cfg: &SystemConfig, layout: &ArrayLayout, vehicles: &[VehicleState], priors: &[Matrix3<f64>], map: &SubcarrierMap) -> Result<Scene> {
        if priors.len() != vehicles.len() {
            return Err(Error::Config("one prior block per vehicle required".into()));
        }
        map.validate(cfg.num_subcarriers)?;
        if map.num_vehicles != vehicles.len() {
            return Err(Error::Config("subcarrier map and vehicle list disagree".into()));
        }
        let terms = vehicles
            .iter()
            .zip(priors)
            .map(|(v, prior)| {
                v.validate()?;
                let g = v.gains(cfg)?;
                Ok(VehicleTerms {
                    state: *v,
                    steer: steering_cos(&layout.tx, v.theta.cos(), cfg.wavelength),
                    coef: InfoCoefficients::new(cfg, g.gamma),
                    rate_gain: g.alpha * cfg.useful_duration / cfg.comm_noise_psd,
                    prior: *prior,
                    chain: ChainFactors::new(cfg, v),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Scene { cfg: cfg.clone(), tx: layout.tx.clone(), rx: RxTraces::of(&layout.rx), map: map.clone(), vehicles: terms })
    }

    /// Same scene with different transmit positions.
    pub fn with_tx(&self, tx: &[f64]) -> Scene {
        let mut s = self.clone();
        s.tx = tx.to_vec();
        for v in &mut s.vehicles {
            v.steer = steering_cos(tx, v.state.theta.cos(), self.cfg.wavelength);
        }
        s
    }

    /// Same scene with different receive positions.
    pub fn with_rx(&self, rx: &[f64]) -> Scene {
        let mut s = self.clone();
        s.rx = RxTraces::of(rx);
        s
    }

    pub fn num_vehicles(&self) -> usize {
        self.vehicles.len()
    }

    pub fn m_tx(&self) -> usize {
        self.tx.len()
    }

    pub fn stats_of(&self, w: &DVector<Complex64>) -> Vec<BeamStats> {
        self.vehicles.iter().map(|v| beam_stats(&v.steer, &self.tx, w)).collect()
    }

    pub fn stats(&self, beams: &[DVector<Complex64>]) -> Stats {
        beams.iter().map(|w| self.stats_of(w)).collect()
    }

    fn entry(&self, n: usize, k: usize, s: &BeamStats) -> [f64; 4] {
        let v = &self.vehicles[k];
        v.chain.apply(&g_entry(&v.coef, &self.rx, self.cfg.freq_index(n), s))
    }

    pub fn power_terms(&self, stats: &Stats) -> PowerTerms {
        let n_sc = stats.len();
        let rate_gains = (0..n_sc)
            .map(|n| {
                let k = self.map.owner[n];
                self.vehicles[k].rate_gain * stats[n][k].xi
            })
            .collect();
        let mut coef = vec![[vec![0.0; n_sc], vec![0.0; n_sc], vec![0.0; n_sc], vec![0.0; n_sc]]; self.num_vehicles()];
        for n in 0..n_sc {
            for k in 0..self.num_vehicles() {
                let e = self.entry(n, k, &stats[n][k]);
                for i in 0..4 {
                    coef[k][i][n] = e[i];
                }
            }
        }
        let prior = self
            .vehicles
            .iter()
            .map(|v| [v.prior[(0, 0)], v.prior[(1, 1)], v.prior[(1, 2)], v.prior[(2, 2)]])
            .collect();
        PowerTerms { rate_gains, prior, coef }
    }

    /// Per-subcarrier rate term `ln(1 + ĝp)/(N ln 2)`.
    pub fn rate_term(&self, n: usize, s: &[BeamStats], p: f64) -> f64 {
        let k = self.map.owner[n];
        (self.vehicles[k].rate_gain * s[k].xi * p).ln_1p() / (self.cfg.num_subcarriers as f64 * std::f64::consts::LN_2)
    }

    /// Per-subcarrier information contribution `[vehicle] → (θ, a, b, c)`.
    pub fn info_term(&self, n: usize, s: &[BeamStats], p: f64) -> Vec<[f64; 4]> {
        (0..self.num_vehicles())
            .map(|k| {
                let e = self.entry(n, k, &s[k]);
                [p * e[0], p * e[1], p * e[2], p * e[3]]
            })
            .collect()
    }

    pub fn info_from_sums(&self, sums: &[[f64; 4]]) -> Vec<SensingInfo> {
        self.vehicles
            .iter()
            .zip(sums)
            .map(|(v, s)| SensingInfo {
                theta: v.prior[(0, 0)] + s[0],
                a: v.prior[(1, 1)] + s[1],
                b: v.prior[(1, 2)] + s[2],
                c: v.prior[(2, 2)] + s[3],
            })
            .collect()
    }

    pub fn evaluate(&self, stats: &Stats, p: &[f64]) -> Evaluation {
        let mut rate = 0.0;
        let mut sums = vec![[0.0; 4]; self.num_vehicles()];
        for (n, s) in stats.iter().enumerate() {
            rate += self.rate_term(n, s, p[n]);
            for (acc, t) in sums.iter_mut().zip(self.info_term(n, s, p[n])) {
                for i in 0..4 {
                    acc[i] += t[i];
                }
            }
        }
        Evaluation { rate, info: self.info_from_sums(&sums) }
    }

    /// Gradients of `d_rate·rate + Σ_k d_info[k]·info_k` with respect to the
    /// beam statistics and the powers.
    pub fn backprop(&self, stats: &Stats, p: &[f64], d_rate: f64, d_info: &[InfoGrad]) -> (Stats, Vec<f64>) {
        let n_sc = stats.len();
        let norm = 1.0 / (self.cfg.num_subcarriers as f64 * std::f64::consts::LN_2);
        let (m, tr, tr2) = (self.rx.count, self.rx.sum, self.rx.sum_sq);
        let mut g_stats = vec![vec![BeamStats::default(); self.num_vehicles()]; n_sc];
        let mut g_p = vec![0.0; n_sc];
        for n in 0..n_sc {
            let f = self.cfg.freq_index(n);
            let own = self.map.owner[n];
            let gain = self.vehicles[own].rate_gain;
            let snr = gain * stats[n][own].xi * p[n];
            g_stats[n][own].xi += d_rate * norm * gain * p[n] / (1.0 + snr);
            g_p[n] += d_rate * norm * gain * stats[n][own].xi / (1.0 + snr);
            for (k, v) in self.vehicles.iter().enumerate() {
                let dg = &d_info[k];
                let ch = &v.chain;
                // Weights on g11, g13, g22, g23, g33.
                let w11 = dg.theta * ch.t11;
                let w13 = dg.theta * ch.t13;
                let w33 = dg.theta * ch.t33_theta + dg.c * ch.t33;
                let w22 = dg.a * ch.t22;
                let w23 = dg.b * ch.t23;
                let e = g_entry(&v.coef, &self.rx, f, &stats[n][k]);
                g_p[n] += w11 * e.g11 + w13 * e.g13 + w33 * e.g33 + w22 * e.g22 + w23 * e.g23;
                let c = &v.coef;
                let gs = &mut g_stats[n][k];
                gs.xi += p[n] * (w11 * c.c11 * tr2 + w13 * c.c13 * tr + w22 * c.c22 * f * f * m + w33 * c.c33 * m - w23 * c.c23 * f * m);
                gs.xi1 += p[n] * w11 * c.c11 * m;
                gs.xi2 += p[n] * (-2.0 * w11 * c.c11 * tr - w13 * c.c13 * m);
            }
        }
        (g_stats, g_p)
    }

    /// Gradient of the summed θ information with respect to the receive
    /// positions, at fixed beams and powers.
    pub fn theta_info_rx_gradient(&self, stats: &Stats, p: &[f64], rx: &[f64]) -> Vec<f64> {
        // θ information depends on rx through Tr(Λ) and Tr(Λ²) only.
        let (mut d_tr, mut d_tr2) = (0.0, 0.0);
        for (n, s) in stats.iter().enumerate() {
            for (k, v) in self.vehicles.iter().enumerate() {
                let (c, ch, st) = (&v.coef, &v.chain, &s[k]);
                d_tr2 += p[n] * ch.t11 * c.c11 * st.xi;
                d_tr += p[n] * (ch.t11 * c.c11 * (-2.0 * st.xi2) + ch.t13 * c.c13 * st.xi);
            }
        }
        rx.iter().map(|x| d_tr + 2.0 * x * d_tr2).collect()
    }
}

/// Weighted-sum objective: `ρ·rate + (1−ρ)·Σ_k Σ_i ℵ_i·reduced_i`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Weighted {
    pub rho: f64,
    pub aleph: [f64; 3],
}

impl Weighted {
    pub fn sensing(&self, info: &[SensingInfo]) -> f64 {
        info.iter().map(|i| dot(&self.aleph, &i.reduced())).sum()
    }

    pub fn value(&self, e: &Evaluation) -> f64 {
        self.rho * e.rate + (1.0 - self.rho) * self.sensing(&e.info)
    }

    pub fn info_grads(&self, info: &[SensingInfo]) -> Vec<InfoGrad> {
        let w = (1.0 - self.rho) * 1.0;
        info.iter().map(|i| InfoGrad::from_reduced(i, [w * self.aleph[0], w * self.aleph[1], w * self.aleph[2]])).collect()
    }
}

/// Normalizers making each sensing term sum to 1 across vehicles.
pub fn normalizing_aleph(info: &[SensingInfo]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        let s: f64 = info.iter().map(|x| x.reduced()[i]).sum();
        *o = if s > 0.0 { 1.0 / s } else { 1.0 };
    }
    out
}

/// Upper limits on (θ, d, ν) block bounds.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Thresholds(pub [f64; 3]);

impl Thresholds {
    pub fn unbounded() -> Thresholds {
        Thresholds([f64::INFINITY; 3])
    }

    pub fn scaled(&self, f: f64) -> Thresholds {
        Thresholds([self.0[0] * f, self.0[1] * f, self.0[2] * f])
    }

    /// Normalized margins `ς·info − 1 ≥ 0`, `[vehicle][kind]`; `None` for
    /// unbounded entries.
    pub fn margins(&self, info: &[SensingInfo]) -> Vec<[Option<f64>; 3]> {
        info.iter()
            .map(|i| {
                let r = i.reduced();
                let mut out = [None; 3];
                for j in 0..3 {
                    if self.0[j].is_finite() {
                        out[j] = Some(self.0[j] * r[j] - 1.0);
                    }
                }
                out
            })
            .collect()
    }

    pub fn is_active(&self) -> bool {
        self.0.iter().any(|t| t.is_finite())
    }

    pub fn satisfied(&self, info: &[SensingInfo], slack: f64) -> bool {
        self.margins(info).iter().flatten().flatten().all(|&m| m >= -slack)
    }

    /// The constraint with the smallest margin.
    pub fn tightest(&self, info: &[SensingInfo]) -> Option<Infeasibility> {
        let mut best: Option<Infeasibility> = None;
        for (k, ms) in self.margins(info).iter().enumerate() {
            for (j, m) in ms.iter().enumerate() {
                if let Some(m) = *m {
                    if best.map_or(true, |b| m < b.margin) {
                        best = Some(Infeasibility { vehicle: k, kind: BoundKind::ALL[j], margin: m });
                    }
                }
            }
        }
        best
    }

    /// `rate + μ·Σ ln(margin)`; `None` outside the strict interior.
    pub fn barrier_value(&self, e: &Evaluation, mu: f64) -> Option<f64> {
        let mut v = e.rate;
        for m in self.margins(&e.info).iter().flatten().flatten() {
            if *m <= 0.0 {
                return None;
            }
            v += mu * m.ln();
        }
        Some(v)
    }

    pub fn barrier_grads(&self, info: &[SensingInfo], mu: f64) -> Vec<InfoGrad> {
        info.iter()
            .map(|i| {
                let r = i.reduced();
                let mut w = [0.0; 3];
                for j in 0..3 {
                    if self.0[j].is_finite() {
                        let m = self.0[j] * r[j] - 1.0;
                        w[j] = if m > 0.0 { mu * self.0[j] / m } else { 0.0 };
                    }
                }
                InfoGrad::from_reduced(i, w)
            })
            .collect()
    }

    pub fn count(&self, k: usize) -> usize {
        k * self.0.iter().filter(|t| t.is_finite()).count()
    }
}
