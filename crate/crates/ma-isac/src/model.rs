//! Physical-layer primitives: system constants, array geometry, steering
//! vectors, channel gains, the communication rate, and synthetic
//! post-matched-filter radar echoes.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Waveform, noise and propagation constants shared by every module.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub wavelength: f64,
    pub num_subcarriers: usize,
    pub num_blocks: usize,
    pub subcarrier_spacing: f64,
    pub symbol_duration: f64,
    pub useful_duration: f64,
    pub cyclic_prefix: f64,
    pub comm_noise_psd: f64,
    pub radar_noise_psd: f64,
    pub total_power: f64,
    pub radar_cross_section: f64,
    pub ref_path_loss: f64,
    pub ref_distance: f64,
    pub path_loss_exponent: f64,
    pub lightspeed: f64,
    /// Frequency index of the first subcarrier. Subcarrier `n` (0-based
    /// storage) sits at `(n + first_subcarrier_index)·Δf`.
    pub first_subcarrier_index: usize,
}

impl SystemConfig {
    /// 28 GHz, 32 subcarriers at 120 kHz, 7 blocks of 8.92 µs.
    pub fn reference() -> SystemConfig {
        let spacing = 120e3;
        let symbol = 8.92e-6;
        let useful = 1.0 / spacing;
        SystemConfig {
            wavelength: SPEED_OF_LIGHT / 28e9,
            num_subcarriers: 32,
            num_blocks: 7,
            subcarrier_spacing: spacing,
            symbol_duration: symbol,
            useful_duration: useful,
            cyclic_prefix: symbol - useful,
            comm_noise_psd: 1e-23,
            radar_noise_psd: 1.1e-25,
            total_power: 1.0,
            radar_cross_section: 0.1,
            ref_path_loss: 1e-7,
            ref_distance: 1.0,
            path_loss_exponent: 2.55,
            lightspeed: SPEED_OF_LIGHT,
            first_subcarrier_index: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positives = [
            ("wavelength", self.wavelength),
            ("subcarrier_spacing", self.subcarrier_spacing),
            ("symbol_duration", self.symbol_duration),
            ("useful_duration", self.useful_duration),
            ("cyclic_prefix", self.cyclic_prefix),
            ("comm_noise_psd", self.comm_noise_psd),
            ("radar_noise_psd", self.radar_noise_psd),
            ("total_power", self.total_power),
            ("radar_cross_section", self.radar_cross_section),
            ("ref_path_loss", self.ref_path_loss),
            ("ref_distance", self.ref_distance),
            ("lightspeed", self.lightspeed),
        ];
        for (name, v) in positives {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be finite and positive, got {v}")));
            }
        }
        if !self.path_loss_exponent.is_finite() {
            return Err(Error::Config("path_loss_exponent must be finite".into()));
        }
        if self.num_subcarriers == 0 || self.num_blocks == 0 {
            return Err(Error::Config("num_subcarriers and num_blocks must be at least 1".into()));
        }
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs());
        if rel(self.symbol_duration, self.useful_duration + self.cyclic_prefix) > 1e-9 {
            return Err(Error::Config(format!(
                "symbol duration {} s differs from useful {} s + cyclic prefix {} s",
                self.symbol_duration, self.useful_duration, self.cyclic_prefix
            )));
        }
        if rel(self.subcarrier_spacing * self.useful_duration, 1.0) > 1e-9 {
            return Err(Error::Config(format!(
                "subcarrier spacing {} Hz is not the reciprocal of useful duration {} s",
                self.subcarrier_spacing, self.useful_duration
            )));
        }
        Ok(())
    }

    /// Frequency index of stored subcarrier `n`.
    pub fn freq_index(&self, n: usize) -> f64 {
        (n + self.first_subcarrier_index) as f64
    }
}

/// Transmit and receive antenna positions along one axis, with their
/// feasible regions and spacing rules.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayLayout {
    pub tx: Vec<f64>,
    pub rx: Vec<f64>,
    pub tx_bounds: (f64, f64),
    pub rx_bounds: (f64, f64),
    pub min_spacing: f64,
    pub tx_rx_gap: f64,
}

impl ArrayLayout {
    /// Transmit region `[0, region]`, receive region of the same length
    /// starting `gap` after it. Both arrays start at their region's lower
    /// end with `spacing` between neighbours.
    pub fn ula(m_tx: usize, m_rx: usize, spacing: f64, region: f64, gap: f64) -> Result<ArrayLayout> {
        let tx_bounds = (0.0, region);
        let rx_bounds = (region + gap, 2.0 * region + gap);
        let layout = ArrayLayout {
            tx: (0..m_tx).map(|l| l as f64 * spacing).collect(),
            rx: (0..m_rx).map(|l| rx_bounds.0 + l as f64 * spacing).collect(),
            tx_bounds,
            rx_bounds,
            min_spacing: spacing,
            tx_rx_gap: gap,
        };
        layout.validate()?;
        Ok(layout)
    }

    /// Half-wavelength ULA with half-wavelength spacing/gap rules.
    pub fn half_wavelength(cfg: &SystemConfig, m_tx: usize, m_rx: usize, region: f64) -> Result<ArrayLayout> {
        let h = cfg.wavelength / 2.0;
        ArrayLayout::ula(m_tx, m_rx, h, region, h)
    }

    /// Same bounds and rules, with the transmit array reset to a ULA at the
    /// lower end of its region.
    pub fn with_tx_ula(&self) -> ArrayLayout {
        let mut out = self.clone();
        for (l, p) in out.tx.iter_mut().enumerate() {
            *p = self.tx_bounds.0 + l as f64 * self.min_spacing;
        }
        out
    }

    pub fn m_tx(&self) -> usize {
        self.tx.len()
    }

    pub fn m_rx(&self) -> usize {
        self.rx.len()
    }

    /// Number of adjacent pairs (after sorting) closer than the minimum spacing.
    pub fn spacing_violations(positions: &[f64], min_spacing: f64) -> usize {
        let mut s = positions.to_vec();
        s.sort_by(f64::total_cmp);
        s.windows(2).filter(|w| w[1] - w[0] < min_spacing * (1.0 - 1e-12)).count()
    }

    pub fn validate(&self) -> Result<()> {
        let tol = 1e-12 * self.rx_bounds.1.abs().max(1.0);
        let check = |name: &str, p: &[f64], (lo, hi): (f64, f64)| -> Result<()> {
            if p.is_empty() {
                return Err(Error::Config(format!("{name} array is empty")));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config(format!("{name} positions must be finite")));
            }
            if p[0] < lo - tol || p[p.len() - 1] > hi + tol {
                return Err(Error::Config(format!("{name} positions leave [{lo}, {hi}]")));
            }
            for w in p.windows(2) {
                if w[1] - w[0] < self.min_spacing - tol {
                    return Err(Error::Config(format!(
                        "{name} spacing {} below minimum {}",
                        w[1] - w[0],
                        self.min_spacing
                    )));
                }
            }
            Ok(())
        };
        if !(self.min_spacing > 0.0) || self.tx_rx_gap < 0.0 {
            return Err(Error::Config("min_spacing must be positive and tx_rx_gap nonnegative".into()));
        }
        check("transmit", &self.tx, self.tx_bounds)?;
        check("receive", &self.rx, self.rx_bounds)?;
        if self.rx_bounds.0 - self.tx_bounds.1 < self.tx_rx_gap - tol {
            return Err(Error::Config("receive region starts closer than tx_rx_gap to the transmit region".into()));
        }
        Ok(())
    }
}

/// Motion triple of one vehicle: angle (rad), distance (m), speed (m/s).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub theta: f64,
    pub distance: f64,
    pub speed: f64,
}

/// Large-scale gains of one vehicle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelGains {
    /// Communication path loss (linear).
    pub alpha: f64,
    /// Round-trip radar attenuation (linear amplitude).
    pub beta: f64,
    /// `beta` scaled by the useful symbol duration.
    pub gamma: f64,
}

/// Everything the echo model needs about one reflector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EchoTarget {
    pub cos_theta: f64,
    pub delay: f64,
    pub doppler: f64,
    pub gamma: f64,
}

impl VehicleState {
    pub fn new(theta: f64, distance: f64, speed: f64) -> VehicleState {
        VehicleState { theta, distance, speed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < PI) {
            return Err(Error::Domain(format!("theta {} outside (0, pi)", self.theta)));
        }
        if !(self.distance > 0.0 && self.distance.is_finite()) {
            return Err(Error::Domain(format!("distance {} must be positive", self.distance)));
        }
        if !self.speed.is_finite() {
            return Err(Error::Domain("speed must be finite".into()));
        }
        Ok(())
    }

    pub fn doppler(&self, cfg: &SystemConfig) -> f64 {
        2.0 * self.theta.cos() * self.speed / cfg.wavelength
    }

    pub fn delay(&self, cfg: &SystemConfig) -> f64 {
        2.0 * self.distance / cfg.lightspeed
    }

    pub fn gains(&self, cfg: &SystemConfig) -> Result<ChannelGains> {
        channel_gains(cfg, self.distance)
    }

    pub fn echo_target(&self, cfg: &SystemConfig) -> Result<EchoTarget> {
        self.validate()?;
        Ok(EchoTarget {
            cos_theta: self.theta.cos(),
            delay: self.delay(cfg),
            doppler: self.doppler(cfg),
            gamma: self.gains(cfg)?.gamma,
        })
    }
}

/// Entry `l` is `exp(j·2π·positions[l]·cosθ/λ)`.
pub fn steering(positions: &[f64], theta: f64, wavelength: f64) -> Result<DVector<Complex64>> {
    if !(theta > 0.0 && theta < PI) {
        return Err(Error::Domain(format!("theta {theta} outside (0, pi)")));
    }
    if positions.iter().any(|p| !p.is_finite()) {
        return Err(Error::Domain("non-finite antenna position".into()));
    }
    Ok(steering_cos(positions, theta.cos(), wavelength))
}

/// Steering vector parameterized directly by `cosθ`.
pub fn steering_cos(positions: &[f64], cos_theta: f64, wavelength: f64) -> DVector<Complex64> {
    let k = 2.0 * PI * cos_theta / wavelength;
    DVector::from_iterator(positions.len(), positions.iter().map(|p| Complex64::from_polar(1.0, k * p)))
}

pub fn channel_gains(cfg: &SystemConfig, d: f64) -> Result<ChannelGains> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::Domain(format!("distance {d} must be positive")));
    }
    let alpha = cfg.ref_path_loss * (d / cfg.ref_distance).powf(-cfg.path_loss_exponent);
    let beta = (cfg.wavelength.powi(2) * cfg.radar_cross_section / ((4.0 * PI).powi(3) * (d / 2.0).powi(4))).sqrt();
    Ok(ChannelGains { alpha, beta, gamma: beta * cfg.useful_duration })
}

/// Which vehicle each subcarrier serves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubcarrierMap {
    pub owner: Vec<usize>,
    pub num_vehicles: usize,
}

impl SubcarrierMap {
    /// `n` subcarriers split into `k` consecutive groups of (nearly) equal size.
    pub fn contiguous(n: usize, k: usize) -> SubcarrierMap {
        let owner = (0..n).map(|i| (i * k / n).min(k - 1)).collect();
        SubcarrierMap { owner, num_vehicles: k }
    }

    pub fn subcarriers_of(&self, k: usize) -> Vec<usize> {
        (0..self.owner.len()).filter(|&n| self.owner[n] == k).collect()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.owner.len() != n {
            return Err(Error::Config(format!("subcarrier map covers {} of {n} subcarriers", self.owner.len())));
        }
        if let Some(&bad) = self.owner.iter().find(|&&k| k >= self.num_vehicles) {
            return Err(Error::Config(format!("subcarrier assigned to unknown vehicle {bad}")));
        }
        Ok(())
    }
}

/// Per-subcarrier unit-modulus beams and powers.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamformerSet {
    pub beams: Vec<DVector<Complex64>>,
    pub powers: DVector<f64>,
    pub map: SubcarrierMap,
}

impl BeamformerSet {
    /// Each subcarrier beam matched to its own vehicle, uniform power.
    pub fn matched(cfg: &SystemConfig, layout: &ArrayLayout, vehicles: &[VehicleState], map: SubcarrierMap) -> Result<BeamformerSet> {
        let n = cfg.num_subcarriers;
        let mut beams = Vec::with_capacity(n);
        for &k in &map.owner {
            beams.push(steering(&layout.tx, vehicles[k].theta, cfg.wavelength)?);
        }
        Ok(BeamformerSet { beams, powers: DVector::from_element(n, cfg.total_power / n as f64), map })
    }

    pub fn validate(&self, cfg: &SystemConfig, m_tx: usize) -> Result<()> {
        let n = cfg.num_subcarriers;
        self.map.validate(n)?;
        if self.beams.len() != n || self.powers.len() != n {
            return Err(Error::Config("beam or power count differs from the subcarrier count".into()));
        }
        for w in &self.beams {
            if w.len() != m_tx || w.iter().any(|z| (z.norm() - 1.0).abs() > 1e-9) {
                return Err(Error::Config("beam entries must be unit modulus with M_tx entries".into()));
            }
        }
        if self.powers.iter().any(|&p| p < 0.0) || self.powers.sum() > cfg.total_power * (1.0 + 1e-9) {
            return Err(Error::Config("powers must be nonnegative within the budget".into()));
        }
        Ok(())
    }
}

/// `aᴴw`.
pub fn inner(a: &DVector<Complex64>, w: &DVector<Complex64>) -> Complex64 {
    a.iter().zip(w.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Effective gains `ĝ_n = α_k |aᴴw_n|² T_e/η0` for the vehicle owning each subcarrier.
pub fn rate_gains(cfg: &SystemConfig, layout: &ArrayLayout, beams: &BeamformerSet, vehicles: &[VehicleState]) -> Result<Vec<f64>> {
    let mut steer = Vec::with_capacity(vehicles.len());
    let mut alpha = Vec::with_capacity(vehicles.len());
    for v in vehicles {
        steer.push(steering(&layout.tx, v.theta, cfg.wavelength)?);
        alpha.push(v.gains(cfg)?.alpha);
    }
    Ok(beams
        .beams
        .iter()
        .zip(&beams.map.owner)
        .map(|(w, &k)| alpha[k] * inner(&steer[k], w).norm_sqr() * cfg.useful_duration / cfg.comm_noise_psd)
        .collect())
}

/// Rate from effective gains and powers, averaged over subcarriers
/// (bits/s/Hz).
pub fn rate_from_gains(gains: &[f64], powers: &[f64]) -> f64 {
    let n = gains.len().max(1) as f64;
    gains.iter().zip(powers).map(|(g, p)| (g * p).ln_1p()).sum::<f64>() / (n * std::f64::consts::LN_2)
}

/// Sum over vehicles and their subcarriers of `log2(1 + SNR)`, divided by
/// the number of subcarriers.
pub fn sum_rate(cfg: &SystemConfig, layout: &ArrayLayout, beams: &BeamformerSet, vehicles: &[VehicleState]) -> Result<f64> {
    let g = rate_gains(cfg, layout, beams, vehicles)?;
    Ok(rate_from_gains(&g, beams.powers.as_slice()))
}

/// Stacked echo `ỹ` (subcarrier-major, then block, then receive antenna)
/// with its per-subcarrier noise variance.
#[derive(Clone, Debug, PartialEq)]
pub struct EchoMeasurement {
    pub y: DVector<Complex64>,
    pub noise_var: Vec<f64>,
    pub m_rx: usize,
    pub num_blocks: usize,
}

impl EchoMeasurement {
    pub fn index(m_rx: usize, num_blocks: usize, n: usize, q: usize, i: usize) -> usize {
        (n * num_blocks + q) * m_rx + i
    }

    pub fn num_subcarriers(&self) -> usize {
        self.noise_var.len()
    }
}

/// Noiseless echo for arbitrary reflector parameters.
pub fn noiseless_echo_targets(cfg: &SystemConfig, layout: &ArrayLayout, beams: &BeamformerSet, targets: &[EchoTarget]) -> DVector<Complex64> {
    let (m_rx, nq, n_sc) = (layout.m_rx(), cfg.num_blocks, cfg.num_subcarriers);
    let mut y = DVector::zeros(m_rx * nq * n_sc);
    for t in targets {
        let a = steering_cos(&layout.tx, t.cos_theta, cfg.wavelength);
        let b = steering_cos(&layout.rx, t.cos_theta, cfg.wavelength);
        for n in 0..n_sc {
            let base = t.gamma * beams.powers[n] * inner(&a, &beams.beams[n]);
            let delay = Complex64::from_polar(1.0, -2.0 * PI * cfg.freq_index(n) * cfg.subcarrier_spacing * t.delay);
            for q in 0..nq {
                let doppler = Complex64::from_polar(1.0, 2.0 * PI * t.doppler * q as f64 * cfg.symbol_duration);
                let s = base * delay * doppler;
                for i in 0..m_rx {
                    y[EchoMeasurement::index(m_rx, nq, n, q, i)] += s * b[i];
                }
            }
        }
    }
    y
}

pub fn noise_variances(cfg: &SystemConfig, beams: &BeamformerSet) -> Vec<f64> {
    beams.powers.iter().map(|p| p * cfg.radar_noise_psd * cfg.useful_duration).collect()
}

/// Echo with circular Gaussian noise of variance `p_n η1 T_e` per entry.
/// `seed = None` returns the noiseless echo.
pub fn synth_echo_targets(
    cfg: &SystemConfig,
    layout: &ArrayLayout,
    beams: &BeamformerSet,
    targets: &[EchoTarget],
    seed: Option<u64>,
) -> EchoMeasurement {
    let mut y = noiseless_echo_targets(cfg, layout, beams, targets);
    let noise_var = noise_variances(cfg, beams);
    if let Some(seed) = seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let per_sc = layout.m_rx() * cfg.num_blocks;
        for (idx, z) in y.iter_mut().enumerate() {
            let s = (noise_var[idx / per_sc] / 2.0).sqrt();
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *z += Complex64::new(s * re, s * im);
        }
    }
    EchoMeasurement { y, noise_var, m_rx: layout.m_rx(), num_blocks: cfg.num_blocks }
}

pub fn synth_echo(
    cfg: &SystemConfig,
    layout: &ArrayLayout,
    beams: &BeamformerSet,
    vehicles: &[VehicleState],
    seed: Option<u64>,
) -> Result<EchoMeasurement> {
    let targets = vehicles.iter().map(|v| v.echo_target(cfg)).collect::<Result<Vec<_>>>()?;
    Ok(synth_echo_targets(cfg, layout, beams, &targets, seed))
}
