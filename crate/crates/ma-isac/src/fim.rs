//! Fisher information of the echo model and the bounds derived from it.
//!
//! Information is first assembled in the echo coordinates `u = (cosθ, τ, μ)`
//! per subcarrier ("g-blocks", information per unit power), then mapped to
//! the motion coordinates `ζ = (θ, d, ν)` through the chain matrix.

use nalgebra::{DMatrix, DVector, Matrix3};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::spd_inverse;
use crate::model::{inner, steering_cos, ArrayLayout, BeamformerSet, EchoTarget, SystemConfig, VehicleState};
use crate::tracking::{transition_jacobian, MotionModel, TrackState};

/// Receive-array moments: element count, `Tr(Λ_rx)`, `Tr(Λ_rx²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RxTraces {
    pub count: f64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl RxTraces {
    pub fn of(rx: &[f64]) -> RxTraces {
        RxTraces {
            count: rx.len() as f64,
            sum: rx.iter().sum(),
            sum_sq: rx.iter().map(|p| p * p).sum(),
        }
    }
}

/// Quadratic forms of one beam against one vehicle's transmit steering
/// vector `a`: `ξ = |aᴴw|²`, `ξ₁ = |aᴴΛw|²`, `ξ₂ = Re(aᴴΛw·wᴴa)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BeamStats {
    pub xi: f64,
    pub xi1: f64,
    pub xi2: f64,
}

pub fn beam_stats(a: &DVector<Complex64>, tx: &[f64], w: &DVector<Complex64>) -> BeamStats {
    let mut s = Complex64::new(0.0, 0.0);
    let mut t = Complex64::new(0.0, 0.0);
    for l in 0..a.len() {
        let z = a[l].conj() * w[l];
        s += z;
        t += z * tx[l];
    }
    BeamStats { xi: s.norm_sqr(), xi1: t.norm_sqr(), xi2: (t * s.conj()).re }
}

/// The same forms for a lifted beam matrix `W`: `aᴴWa`, `aᴴΛWΛa`, `Re(aᴴΛWa)`.
pub fn beam_stats_lifted(a: &DVector<Complex64>, tx: &[f64], w: &DMatrix<Complex64>) -> BeamStats {
    let la = DVector::from_iterator(a.len(), a.iter().zip(tx).map(|(z, p)| z * p));
    let wa = w * a;
    let wla = w * &la;
    BeamStats {
        xi: a.dotc(&wa).re,
        xi1: la.dotc(&wla).re,
        xi2: la.dotc(&wa).re,
    }
}

/// Per-vehicle scalar factors of the g-block closed forms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InfoCoefficients {
    pub c11: f64,
    pub c12: f64,
    pub c13: f64,
    pub c22: f64,
    pub c33: f64,
    pub c23: f64,
}

impl InfoCoefficients {
    pub fn new(cfg: &SystemConfig, gamma: f64) -> InfoCoefficients {
        let q = cfg.num_blocks as f64;
        let (lam, df, ts) = (cfg.wavelength, cfg.subcarrier_spacing, cfg.symbol_duration);
        let noise = cfg.radar_noise_psd * cfg.useful_duration;
        let g2 = gamma * gamma;
        InfoCoefficients {
            c11: (2.0 * PI / lam).powi(2) * g2 * q / noise,
            c12: q * (2.0 * PI).powi(2) * g2 * df / (lam * noise),
            c13: q * (q - 1.0) * (2.0 * PI).powi(2) * g2 * ts / (2.0 * lam * noise),
            c22: q * (2.0 * PI * df).powi(2) * g2 / noise,
            c33: 2.0 * q * (q - 1.0) * (2.0 * q - 1.0) * (PI * ts).powi(2) * g2 / (3.0 * noise),
            c23: 2.0 * q * (q - 1.0) * PI * PI * g2 * df * ts / noise,
        }
    }
}

/// Information per unit power of one subcarrier.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GEntry {
    pub g11: f64,
    pub g12: f64,
    pub g13: f64,
    pub g22: f64,
    pub g33: f64,
    pub g23: f64,
}

/// g-block entries at frequency index `f` from the beam statistics.
pub fn g_entry(coef: &InfoCoefficients, rx: &RxTraces, f: f64, s: &BeamStats) -> GEntry {
    let m = rx.count;
    let cross = rx.sum * s.xi - m * s.xi2;
    GEntry {
        g11: coef.c11 * (rx.sum_sq * s.xi + m * s.xi1 - 2.0 * rx.sum * s.xi2),
        g12: -coef.c12 * f * cross,
        g13: coef.c13 * cross,
        g22: coef.c22 * f * f * m * s.xi,
        g33: coef.c33 * m * s.xi,
        g23: -coef.c23 * f * m * s.xi,
    }
}

/// Six length-N information vectors of one vehicle.
#[derive(Clone, Debug, PartialEq)]
pub struct FisherBlocks {
    pub g11: Vec<f64>,
    pub g12: Vec<f64>,
    pub g13: Vec<f64>,
    pub g22: Vec<f64>,
    pub g33: Vec<f64>,
    pub g23: Vec<f64>,
}

impl FisherBlocks {
    pub fn from_entries(entries: &[GEntry]) -> FisherBlocks {
        FisherBlocks {
            g11: entries.iter().map(|e| e.g11).collect(),
            g12: entries.iter().map(|e| e.g12).collect(),
            g13: entries.iter().map(|e| e.g13).collect(),
            g22: entries.iter().map(|e| e.g22).collect(),
            g33: entries.iter().map(|e| e.g33).collect(),
            g23: entries.iter().map(|e| e.g23).collect(),
        }
    }

    /// The vehicle's 3×3 information block in `u = (cosθ, τ, μ)`.
    pub fn u_fim(&self, p: &[f64]) -> Matrix3<f64> {
        let dot = |g: &[f64]| g.iter().zip(p).map(|(a, b)| a * b).sum::<f64>();
        let (s11, s12, s13) = (dot(&self.g11), dot(&self.g12), dot(&self.g13));
        let (s22, s23, s33) = (dot(&self.g22), dot(&self.g23), dot(&self.g33));
        Matrix3::new(s11, s12, s13, s12, s22, s23, s13, s23, s33)
    }
}

pub fn blocks_from_stats(cfg: &SystemConfig, rx: &RxTraces, coef: &InfoCoefficients, stats: &[BeamStats]) -> FisherBlocks {
    let entries: Vec<GEntry> = stats.iter().enumerate().map(|(n, s)| g_entry(coef, rx, cfg.freq_index(n), s)).collect();
    FisherBlocks::from_entries(&entries)
}

pub fn g_blocks(cfg: &SystemConfig, layout: &ArrayLayout, beams: &BeamformerSet, vehicle: &VehicleState) -> Result<FisherBlocks> {
    vehicle.validate()?;
    let a = steering_cos(&layout.tx, vehicle.theta.cos(), cfg.wavelength);
    let coef = InfoCoefficients::new(cfg, vehicle.gains(cfg)?.gamma);
    let stats: Vec<BeamStats> = beams.beams.iter().map(|w| beam_stats(&a, &layout.tx, w)).collect();
    Ok(blocks_from_stats(cfg, &RxTraces::of(&layout.rx), &coef, &stats))
}

/// Jacobian of `u = (cosθ, 2d/c, 2ν cosθ/λ)` with respect to `ζ = (θ, d, ν)`,
/// stored as `∂u_j/∂ζ_i` in row `i`.
pub fn chain_matrix(cfg: &SystemConfig, v: &VehicleState) -> Matrix3<f64> {
    let (s, c) = v.theta.sin_cos();
    let lam = cfg.wavelength;
    Matrix3::new(
        -s, 0.0, -2.0 * v.speed * s / lam,
        0.0, 2.0 / cfg.lightspeed, 0.0,
        0.0, 0.0, 2.0 * c / lam,
    )
}

/// A vehicle's information block in motion coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZetaFim {
    pub info: Matrix3<f64>,
    pub chain: Matrix3<f64>,
}

/// Motion-coordinate information from the weighted g-block sums.
pub fn fim_zeta_block(cfg: &SystemConfig, blocks: &FisherBlocks, vehicle: &VehicleState, p: &[f64]) -> ZetaFim {
    let j = blocks.u_fim(p);
    let (s11, s12, s13, s22, s23, s33) = (j[(0, 0)], j[(0, 1)], j[(0, 2)], j[(1, 1)], j[(1, 2)], j[(2, 2)]);
    let (sn, cs) = vehicle.theta.sin_cos();
    let (lam, c, nu) = (cfg.wavelength, cfg.lightspeed, vehicle.speed);
    let q11 = sn * sn * (s11 + 4.0 * nu / lam * s13 + 4.0 * nu * nu / (lam * lam) * s33);
    let q12 = -2.0 * sn / c * (s12 + 2.0 * nu / lam * s23);
    let q13 = -2.0 * sn * cs / lam * (s13 + 2.0 * nu / lam * s33);
    let q22 = 4.0 / (c * c) * s22;
    let q23 = 4.0 * cs / (c * lam) * s23;
    let q33 = 4.0 * cs * cs / (lam * lam) * s33;
    ZetaFim {
        info: Matrix3::new(q11, q12, q13, q12, q22, q23, q13, q23, q33),
        chain: chain_matrix(cfg, vehicle),
    }
}

/// Bounds on (θ, d, ν) in rad², m², (m/s)².
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoundTriple {
    pub theta: f64,
    pub distance: f64,
    pub speed: f64,
}

impl BoundTriple {
    pub fn as_array(&self) -> [f64; 3] {
        [self.theta, self.distance, self.speed]
    }

    pub fn from_array(a: [f64; 3]) -> BoundTriple {
        BoundTriple { theta: a[0], distance: a[1], speed: a[2] }
    }
}

/// The four information entries the block bounds use: θ information and
/// the (d, ν) 2×2 block `[[a, b], [b, c]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensingInfo {
    pub theta: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl SensingInfo {
    pub fn from_matrix(m: &Matrix3<f64>) -> SensingInfo {
        SensingInfo { theta: m[(0, 0)], a: m[(1, 1)], b: m[(1, 2)], c: m[(2, 2)] }
    }

    /// Distance information after eliminating speed: `a − b²/c`.
    pub fn distance(&self) -> f64 {
        if self.c > 0.0 {
            self.a - self.b * self.b / self.c
        } else {
            0.0
        }
    }

    /// Speed information after eliminating distance: `c − b²/a`.
    pub fn speed(&self) -> f64 {
        if self.a > 0.0 {
            self.c - self.b * self.b / self.a
        } else {
            0.0
        }
    }

    /// Reduced information (θ, d, ν); reciprocals of the block bounds.
    pub fn reduced(&self) -> [f64; 3] {
        [self.theta, self.distance(), self.speed()]
    }

    /// Block bounds, infinite where the information vanishes.
    pub fn bounds(&self) -> BoundTriple {
        let inv = |x: f64| if x > 0.0 { 1.0 / x } else { f64::INFINITY };
        let det = self.a * self.c - self.b * self.b;
        if det > 0.0 {
            BoundTriple { theta: inv(self.theta), distance: self.c / det, speed: self.a / det }
        } else {
            BoundTriple { theta: inv(self.theta), distance: f64::INFINITY, speed: f64::INFINITY }
        }
    }
}

/// Observation-only block bounds.
pub fn lcrlb(z: &ZetaFim) -> BoundTriple {
    SensingInfo::from_matrix(&z.info).bounds()
}

/// Block bounds with a vehicle's prior information added.
pub fn lpcrlb(z: &ZetaFim, prior: &Matrix3<f64>, vehicle: usize) -> Result<BoundTriple> {
    let info = SensingInfo::from_matrix(&(z.info + prior));
    if !(info.a > 0.0 && info.c > 0.0 && info.a * info.c - info.b * info.b > 0.0) {
        return Err(Error::NonPdBound(vehicle));
    }
    Ok(info.bounds())
}

/// 3×3 block `k` of a stacked 3K×3K matrix.
pub fn block(m: &DMatrix<f64>, k: usize) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[(3 * k + i, 3 * k + j)])
}

/// Observed information of all vehicles in `u` coordinates, including
/// cross-vehicle blocks, summed directly over subcarriers, blocks and
/// receive antennas.
pub fn observed_fim_u(cfg: &SystemConfig, layout: &ArrayLayout, beams: &BeamformerSet, targets: &[EchoTarget]) -> DMatrix<f64> {
    let k_n = targets.len();
    let m_rx = layout.m_rx();
    let lam = cfg.wavelength;
    let mut out = DMatrix::zeros(3 * k_n, 3 * k_n);
    // Per target: receive steering, Λ_rx b, and (s, t) per subcarrier.
    let prep: Vec<_> = targets
        .iter()
        .map(|t| {
            let a = steering_cos(&layout.tx, t.cos_theta, lam);
            let b = steering_cos(&layout.rx, t.cos_theta, lam);
            let lb: Vec<Complex64> = b.iter().zip(&layout.rx).map(|(z, p)| z * p).collect();
            let la = DVector::from_iterator(a.len(), a.iter().zip(&layout.tx).map(|(z, p)| z * p));
            let st: Vec<(Complex64, Complex64)> = beams.beams.iter().map(|w| (inner(&a, w), inner(&la, w))).collect();
            (b, lb, st)
        })
        .collect();
    let mut d = vec![vec![[Complex64::new(0.0, 0.0); 3]; m_rx]; k_n];
    for n in 0..cfg.num_subcarriers {
        let p = beams.powers[n];
        if p <= 0.0 {
            continue;
        }
        let var = p * cfg.radar_noise_psd * cfg.useful_duration;
        let f = cfg.freq_index(n) * cfg.subcarrier_spacing;
        for q in 0..cfg.num_blocks {
            for (k, t) in targets.iter().enumerate() {
                let (b, lb, st) = &prep[k];
                let (s, tt) = st[n];
                let phase = Complex64::from_polar(
                    t.gamma * p,
                    -2.0 * PI * f * t.delay + 2.0 * PI * t.doppler * q as f64 * cfg.symbol_duration,
                );
                let j = Complex64::new(0.0, 1.0);
                for i in 0..m_rx {
                    let bs = b[i] * s;
                    d[k][i][0] = phase * j * (2.0 * PI / lam) * (lb[i] * s - b[i] * tt);
                    d[k][i][1] = phase * (-j) * (2.0 * PI * f) * bs;
                    d[k][i][2] = phase * j * (2.0 * PI * q as f64 * cfg.symbol_duration) * bs;
                }
            }
            for k1 in 0..k_n {
                for k2 in 0..k_n {
                    for a1 in 0..3 {
                        for a2 in 0..3 {
                            let mut acc = Complex64::new(0.0, 0.0);
                            for i in 0..m_rx {
                                acc += d[k1][i][a1].conj() * d[k2][i][a2];
                            }
                            out[(3 * k1 + a1, 3 * k2 + a2)] += acc.re / var;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Observed information of all vehicles in motion coordinates. Diagonal
/// blocks come from the g-block closed forms, cross-vehicle blocks from the
/// direct sum.
pub fn observed_fim(cfg: &SystemConfig, layout: &ArrayLayout, beams: &BeamformerSet, vehicles: &[VehicleState]) -> Result<DMatrix<f64>> {
    let k_n = vehicles.len();
    let targets = vehicles.iter().map(|v| v.echo_target(cfg)).collect::<Result<Vec<_>>>()?;
    let mut out = DMatrix::zeros(3 * k_n, 3 * k_n);
    if k_n > 1 {
        let ju = observed_fim_u(cfg, layout, beams, &targets);
        for k1 in 0..k_n {
            for k2 in 0..k_n {
                if k1 == k2 {
                    continue;
                }
                let q1 = chain_matrix(cfg, &vehicles[k1]);
                let q2 = chain_matrix(cfg, &vehicles[k2]);
                let b = q1 * block_pair(&ju, k1, k2) * q2.transpose();
                for i in 0..3 {
                    for j in 0..3 {
                        out[(3 * k1 + i, 3 * k2 + j)] = b[(i, j)];
                    }
                }
            }
        }
    }
    for (k, v) in vehicles.iter().enumerate() {
        let z = fim_zeta_block(cfg, &g_blocks(cfg, layout, beams, v)?, v, beams.powers.as_slice());
        for i in 0..3 {
            for j in 0..3 {
                out[(3 * k + i, 3 * k + j)] = z.info[(i, j)];
            }
        }
    }
    Ok(out)
}

fn block_pair(m: &DMatrix<f64>, k1: usize, k2: usize) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[(3 * k1 + i, 3 * k2 + j)])
}

/// Prior information `(G Θ Gᵀ + Σ_ζ)⁻¹` for the next slot.
pub fn prior_fim(track: &TrackState, motion: &MotionModel) -> Result<DMatrix<f64>> {
    let g = transition_jacobian(&track.vehicles(), motion);
    let pred = &g * &track.covariance * g.transpose() + motion.process_covariance(track.num_vehicles());
    spd_inverse(&pred, "predicted covariance")
}

/// How [`pcrlb_diag`] inverts the total information.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PcrlbMode {
    /// Invert the full 3K×3K matrix.
    Full,
    /// Invert each vehicle's 3×3 principal block separately.
    BlockDiagonal,
}

/// Per-vehicle diagonal of `(J^O + J^P)⁻¹`.
pub fn pcrlb_diag(observed: &DMatrix<f64>, prior: &DMatrix<f64>, mode: PcrlbMode) -> Result<Vec<BoundTriple>> {
    let total = observed + prior;
    let k_n = total.nrows() / 3;
    match mode {
        PcrlbMode::Full => {
            let inv = spd_inverse(&total, "total information")?;
            Ok((0..k_n)
                .map(|k| BoundTriple::from_array([inv[(3 * k, 3 * k)], inv[(3 * k + 1, 3 * k + 1)], inv[(3 * k + 2, 3 * k + 2)]]))
                .collect())
        }
        PcrlbMode::BlockDiagonal => (0..k_n)
            .map(|k| {
                let b = block(&total, k);
                let inv = spd_inverse(&DMatrix::from_fn(3, 3, |i, j| b[(i, j)]), "vehicle information block")?;
                Ok(BoundTriple::from_array([inv[(0, 0)], inv[(1, 1)], inv[(2, 2)]]))
            })
            .collect(),
    }
}
