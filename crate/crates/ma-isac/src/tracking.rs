//! Vehicle kinematics and an information-form extended Kalman filter over
//! the stacked echo.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fim::chain_matrix;
use crate::linalg::{spd_inverse, symmetrize};
use crate::model::{inner, noiseless_echo_targets, steering_cos, ArrayLayout, BeamformerSet, EchoMeasurement, SystemConfig, VehicleState};

/// Slot-to-slot motion model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionModel {
    pub slot_duration: f64,
    /// Process noise standard deviations of (θ rad, d m, ν m/s).
    pub process_std: [f64; 3],
    /// Bounds of the per-slot uniform speed increment (m/s).
    pub speed_increment: (f64, f64),
}

impl MotionModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.slot_duration > 0.0) {
            return Err(Error::Config("slot duration must be positive".into()));
        }
        if self.process_std.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Config("process standard deviations must be nonnegative".into()));
        }
        if !(self.speed_increment.0 <= self.speed_increment.1) {
            return Err(Error::Config("speed increment bounds are reversed".into()));
        }
        Ok(())
    }

    /// Speed increment the filter assumes (midpoint of the bounds).
    pub fn mean_increment(&self) -> f64 {
        0.5 * (self.speed_increment.0 + self.speed_increment.1)
    }

    /// Process covariance seen by the filter: the configured noise with the
    /// uniform speed increment's variance folded into the speed term.
    pub fn process_covariance(&self, k: usize) -> DMatrix<f64> {
        let w = self.speed_increment.1 - self.speed_increment.0;
        let var = [
            self.process_std[0].powi(2),
            self.process_std[1].powi(2),
            self.process_std[2].powi(2) + w * w / 12.0,
        ];
        DMatrix::from_fn(3 * k, 3 * k, |i, j| if i == j { var[i % 3] } else { 0.0 })
    }
}

/// Stacked estimate `ζ̂ = (θ₁, d₁, ν₁, θ₂, …)` with its covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackState {
    pub estimate: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub slot: usize,
}

impl TrackState {
    pub fn from_vehicles(vehicles: &[VehicleState], covariance: DMatrix<f64>, slot: usize) -> TrackState {
        TrackState { estimate: stack(vehicles), covariance, slot }
    }

    pub fn num_vehicles(&self) -> usize {
        self.estimate.len() / 3
    }

    pub fn vehicles(&self) -> Vec<VehicleState> {
        unstack(&self.estimate)
    }
}

pub fn stack(vehicles: &[VehicleState]) -> DVector<f64> {
    DVector::from_iterator(3 * vehicles.len(), vehicles.iter().flat_map(|v| [v.theta, v.distance, v.speed]))
}

pub fn unstack(z: &DVector<f64>) -> Vec<VehicleState> {
    (0..z.len() / 3).map(|k| VehicleState::new(z[3 * k], z[3 * k + 1], z[3 * k + 2])).collect()
}

fn check_geometry(v: &VehicleState) -> Result<()> {
    if !(v.distance > 0.0) {
        return Err(Error::Geometry(format!("distance became {}", v.distance)));
    }
    if !(v.theta > 0.0 && v.theta < PI) {
        return Err(Error::Geometry(format!("angle became {}", v.theta)));
    }
    Ok(())
}

/// Linearized one-slot motion with a known speed increment and no noise.
pub fn propagate_mean(vehicles: &[VehicleState], motion: &MotionModel, increment: f64) -> Result<Vec<VehicleState>> {
    let dt = motion.slot_duration;
    vehicles
        .iter()
        .map(|v| {
            let (s, c) = v.theta.sin_cos();
            let out = VehicleState::new(v.theta + v.speed * dt * s / v.distance, v.distance - v.speed * dt * c, v.speed + increment);
            check_geometry(&out)?;
            Ok(out)
        })
        .collect()
}

/// One slot of motion with a uniform speed increment and Gaussian process
/// noise drawn from `rng`.
pub fn propagate_random<R: Rng + ?Sized>(vehicles: &[VehicleState], motion: &MotionModel, rng: &mut R) -> Result<Vec<VehicleState>> {
    let dt = motion.slot_duration;
    let (lo, hi) = motion.speed_increment;
    vehicles
        .iter()
        .map(|v| {
            let dv = if hi > lo { rng.random_range(lo..hi) } else { lo };
            let mut noise = [0.0; 3];
            for (n, s) in noise.iter_mut().zip(motion.process_std) {
                let z: f64 = StandardNormal.sample(rng);
                *n = s * z;
            }
            let (s, c) = v.theta.sin_cos();
            let out = VehicleState::new(
                v.theta + v.speed * dt * s / v.distance + noise[0],
                v.distance - v.speed * dt * c + noise[1],
                v.speed + dv + noise[2],
            );
            check_geometry(&out)?;
            Ok(out)
        })
        .collect()
}

/// Exact straight-line geometry: the vehicle moves `νΔT` along the road
/// and the new angle and range follow from the triangle it sweeps.
pub fn propagate_exact(v: &VehicleState, dt: f64) -> Result<VehicleState> {
    let step = v.speed * dt;
    let (s, c) = v.theta.sin_cos();
    let d2 = v.distance * v.distance + step * step - 2.0 * v.distance * step * c;
    if !(d2 > 0.0) {
        return Err(Error::Geometry("vehicle passes through the array".into()));
    }
    let d = d2.sqrt();
    let out = VehicleState::new(v.theta + (step * s / d).asin(), d, v.speed);
    check_geometry(&out)?;
    Ok(out)
}

/// Block-diagonal Jacobian of the linearized motion.
pub fn transition_jacobian(vehicles: &[VehicleState], motion: &MotionModel) -> DMatrix<f64> {
    let dt = motion.slot_duration;
    let mut g = DMatrix::zeros(3 * vehicles.len(), 3 * vehicles.len());
    for (k, v) in vehicles.iter().enumerate() {
        let (s, c) = v.theta.sin_cos();
        let (d, nu) = (v.distance, v.speed);
        let b = [
            [1.0 + nu * dt * c / d, -nu * dt * s / (d * d), dt * s / d],
            [nu * dt * s, 1.0, -dt * c],
            [0.0, 0.0, 1.0],
        ];
        for i in 0..3 {
            for j in 0..3 {
                g[(3 * k + i, 3 * k + j)] = b[i][j];
            }
        }
    }
    g
}

/// Jacobian of the stacked noiseless echo with respect to every vehicle's
/// `(θ, d, ν)`. Amplitude dependence on range is held fixed.
pub fn measurement_jacobian(cfg: &SystemConfig, layout: &ArrayLayout, beams: &BeamformerSet, vehicles: &[VehicleState]) -> Result<DMatrix<Complex64>> {
    let (m_rx, nq, n_sc) = (layout.m_rx(), cfg.num_blocks, cfg.num_subcarriers);
    let rows = m_rx * nq * n_sc;
    let lam = cfg.wavelength;
    let j = Complex64::new(0.0, 1.0);
    let mut h = DMatrix::zeros(rows, 3 * vehicles.len());
    for (k, v) in vehicles.iter().enumerate() {
        let t = v.echo_target(cfg)?;
        let chain = chain_matrix(cfg, v);
        let a = steering_cos(&layout.tx, t.cos_theta, lam);
        let b = steering_cos(&layout.rx, t.cos_theta, lam);
        let la = DVector::from_iterator(a.len(), a.iter().zip(&layout.tx).map(|(z, p)| z * p));
        for n in 0..n_sc {
            let p = beams.powers[n];
            let w = &beams.beams[n];
            let (s, tt) = (inner(&a, w), inner(&la, w));
            let f = cfg.freq_index(n) * cfg.subcarrier_spacing;
            for q in 0..nq {
                let tq = q as f64 * cfg.symbol_duration;
                let amp = Complex64::from_polar(t.gamma * p, -2.0 * PI * f * t.delay + 2.0 * PI * t.doppler * tq);
                for i in 0..m_rx {
                    let row = EchoMeasurement::index(m_rx, nq, n, q, i);
                    let du = [
                        amp * j * (2.0 * PI / lam) * b[i] * (layout.rx[i] * s - tt),
                        amp * (-j) * (2.0 * PI * f) * b[i] * s,
                        amp * j * (2.0 * PI * tq) * b[i] * s,
                    ];
                    for c in 0..3 {
                        h[(row, 3 * k + c)] = du[0] * chain[(c, 0)] + du[1] * chain[(c, 1)] + du[2] * chain[(c, 2)];
                    }
                }
            }
        }
    }
    Ok(h)
}

/// Motion and measurement Jacobians at the given estimate.
pub fn jacobians(
    estimate: &[VehicleState],
    cfg: &SystemConfig,
    layout: &ArrayLayout,
    beams: &BeamformerSet,
    motion: &MotionModel,
) -> Result<(DMatrix<f64>, DMatrix<Complex64>)> {
    Ok((transition_jacobian(estimate, motion), measurement_jacobian(cfg, layout, beams, estimate)?))
}

/// `Re(Hᴴ Σ⁻¹ H)` for a block-diagonal noise covariance; subcarriers with
/// zero power carry no information and are skipped.
pub fn measurement_information(h: &DMatrix<Complex64>, noise_var: &[f64], per_subcarrier: usize) -> DMatrix<f64> {
    let cols = h.ncols();
    let mut out = DMatrix::zeros(cols, cols);
    for r in 0..h.nrows() {
        let var = noise_var[r / per_subcarrier];
        if var <= 0.0 {
            continue;
        }
        for a in 0..cols {
            let ha = h[(r, a)].conj();
            for b in a..cols {
                out[(a, b)] += (ha * h[(r, b)]).re / var;
            }
        }
    }
    for a in 0..cols {
        for b in 0..a {
            out[(a, b)] = out[(b, a)];
        }
    }
    out
}

/// One-slot-ahead prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub estimate: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub slot: usize,
}

impl Prediction {
    pub fn vehicles(&self) -> Vec<VehicleState> {
        unstack(&self.estimate)
    }

    /// Prior information `Θ_pred⁻¹`.
    pub fn information(&self) -> Result<DMatrix<f64>> {
        spd_inverse(&self.covariance, "predicted covariance").map_err(|e| e.at_slot(self.slot))
    }
}

pub fn predict(track: &TrackState, motion: &MotionModel) -> Result<Prediction> {
    let slot = track.slot + 1;
    let prev = track.vehicles();
    let g = transition_jacobian(&prev, motion);
    let next = propagate_mean(&prev, motion, motion.mean_increment()).map_err(|e| e.at_slot(slot))?;
    let cov = symmetrize(&(&g * &track.covariance * g.transpose() + motion.process_covariance(prev.len())));
    Ok(Prediction { estimate: stack(&next), covariance: cov, slot })
}

/// Measurement update in information form.
pub fn update(pred: &Prediction, meas: &EchoMeasurement, cfg: &SystemConfig, layout: &ArrayLayout, beams: &BeamformerSet) -> Result<TrackState> {
    let slot = pred.slot;
    let vehicles = pred.vehicles();
    let expect_len = layout.m_rx() * cfg.num_blocks * cfg.num_subcarriers;
    if meas.y.len() != expect_len || meas.noise_var.len() != cfg.num_subcarriers {
        return Err(Error::Domain(format!("measurement length {} does not match {expect_len}", meas.y.len())).at_slot(slot));
    }
    let h = measurement_jacobian(cfg, layout, beams, &vehicles).map_err(|e| e.at_slot(slot))?;
    let targets = vehicles.iter().map(|v| v.echo_target(cfg)).collect::<Result<Vec<_>>>().map_err(|e| e.at_slot(slot))?;
    let mean = noiseless_echo_targets(cfg, layout, beams, &targets);
    let per_sc = layout.m_rx() * cfg.num_blocks;
    let info_meas = measurement_information(&h, &meas.noise_var, per_sc);
    let prior = pred.information()?;
    let cov = spd_inverse(&(prior + info_meas), "posterior information").map_err(|e| e.at_slot(slot))?;
    let mut score = DVector::zeros(h.ncols());
    for r in 0..h.nrows() {
        let var = meas.noise_var[r / per_sc];
        if var <= 0.0 {
            continue;
        }
        let innov = meas.y[r] - mean[r];
        for c in 0..h.ncols() {
            score[c] += (h[(r, c)].conj() * innov).re / var;
        }
    }
    let estimate = &pred.estimate + &cov * score;
    for v in unstack(&estimate) {
        check_geometry(&v).map_err(|e| e.at_slot(slot))?;
    }
    Ok(TrackState { estimate, covariance: cov, slot })
}

/// Predict then update.
pub fn ekf_step(
    track: &TrackState,
    meas: &EchoMeasurement,
    cfg: &SystemConfig,
    layout: &ArrayLayout,
    beams: &BeamformerSet,
    motion: &MotionModel,
) -> Result<TrackState> {
    let pred = predict(track, motion)?;
    update(&pred, meas, cfg, layout, beams)
}
