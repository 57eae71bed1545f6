//! Alternating optimization of beams, powers and antenna positions, the
//! predict / pre-optimize / refit tracking loop, parameter sweeps and the
//! fixed half-wavelength baseline.

use std::collections::HashMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, Matrix3};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::antenna::{pga_rx, pga_tx, PgaConfig};
use crate::beamforming::{sca_solve_qos, sca_solve_weighted, BeamSettings};
use crate::error::{Error, Infeasibility, Result};
use crate::fim::{block, observed_fim, pcrlb_diag, prior_fim, BoundTriple, PcrlbMode};
use crate::model::{steering, sum_rate, synth_echo_targets, ArrayLayout, BeamformerSet, SubcarrierMap, SystemConfig, VehicleState};
use crate::objective::{normalizing_aleph, Evaluation, Scene, Thresholds, Weighted};
use crate::power::{solve_power_qos, solve_power_weighted, waterfill, PowerProblem};
use crate::pso::{fitness, run_rpdpso, SearchBox, SwarmConfig};
use crate::tracking::{predict, propagate_random, update, MotionModel, TrackState};

type CVec = DVector<Complex64>;

/// How the sensing normalizers are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AlephPolicy {
    /// Each sensing term sums to 1 at the initial iterate.
    Normalized,
    Fixed([f64; 3]),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub rho: f64,
    pub aleph: AlephPolicy,
    /// Bound thresholds for the rate-maximizing mode.
    pub thresholds: Option<[f64; 3]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AoSettings {
    pub max_outer: usize,
    /// Relative outer objective change that ends the loop.
    pub tolerance: f64,
    pub move_tx: bool,
    pub move_rx: bool,
}

impl Default for AoSettings {
    fn default() -> Self {
        AoSettings { max_outer: 100, tolerance: 1e-4, move_tx: true, move_rx: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackingSettings {
    /// Standard deviation of the initial estimate error per (θ, d, ν).
    pub init_std: [f64; 3],
    pub pcrlb: PcrlbMode,
    /// Add receiver noise to the synthesized echoes.
    pub echo_noise: bool,
}

impl Default for TrackingSettings {
    fn default() -> Self {
        TrackingSettings { init_std: [1e-3, 0.5, 0.5], pcrlb: PcrlbMode::Full, echo_noise: true }
    }
}

/// Solver settings used by every stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct Solvers {
    pub beam: BeamSettings,
    pub pga: PgaConfig,
    pub swarm: SwarmConfig,
    pub ao: AoSettings,
    /// Seed the swarm with the weighted alternating-optimization layout.
    pub warm_start: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub cfg: SystemConfig,
    pub layout: ArrayLayout,
    pub vehicles: Vec<VehicleState>,
    pub map: SubcarrierMap,
    pub motion: MotionModel,
    pub horizon: usize,
    pub objective: ObjectiveConfig,
    pub solvers: Solvers,
    pub tracking: TrackingSettings,
    pub seed: u64,
    /// Record wall-clock time per slot (otherwise 0, keeping output reproducible).
    pub timing: bool,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        self.layout.validate()?;
        self.motion.validate()?;
        self.solvers.swarm.validate()?;
        self.map.validate(self.cfg.num_subcarriers)?;
        if self.map.num_vehicles != self.vehicles.len() {
            return Err(Error::Config("subcarrier map and vehicle list disagree".into()));
        }
        for v in &self.vehicles {
            v.validate()?;
        }
        if self.horizon < 1 {
            return Err(Error::Config("horizon must be at least one slot".into()));
        }
        if !(0.0..=1.0).contains(&self.objective.rho) {
            return Err(Error::Config(format!("weighting factor {} outside [0, 1]", self.objective.rho)));
        }
        if let Some(t) = self.objective.thresholds {
            if t.iter().any(|x| !(*x > 0.0)) {
                return Err(Error::Config("thresholds must be positive".into()));
            }
        }
        Ok(())
    }

    /// Truth plus seeded Gaussian error, with matching diagonal covariance.
    pub fn initial_track(&self) -> TrackState {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(2);
        let std = self.tracking.init_std;
        let mut est = Vec::with_capacity(self.vehicles.len());
        for v in &self.vehicles {
            let mut draw = |s: f64| if s > 0.0 { Normal::new(0.0, s).expect("positive std").sample(&mut rng) } else { 0.0 };
            est.push(VehicleState::new(v.theta + draw(std[0]), v.distance + draw(std[1]), v.speed + draw(std[2])));
        }
        let k = self.vehicles.len();
        let cov = DMatrix::from_fn(3 * k, 3 * k, |i, j| if i == j { std[i % 3].powi(2).max(1e-30) } else { 0.0 });
        TrackState::from_vehicles(&est, cov, 0)
    }

    /// Single-slot problem on the true channel with the prior carried by the
    /// initial track.
    pub fn first_slot(&self) -> Result<SlotProblem> {
        let prior = prior_fim(&self.initial_track(), &self.motion)?;
        Ok(SlotProblem { cfg: self.cfg.clone(), layout: self.layout.clone(), vehicles: self.vehicles.clone(), prior, map: self.map.clone() })
    }
}

/// Channel, prior and layout of one optimization slot.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotProblem {
    pub cfg: SystemConfig,
    pub layout: ArrayLayout,
    pub vehicles: Vec<VehicleState>,
    /// Full 3K×3K prior information.
    pub prior: DMatrix<f64>,
    pub map: SubcarrierMap,
}

impl SlotProblem {
    pub fn prior_blocks(&self) -> Vec<Matrix3<f64>> {
        (0..self.vehicles.len()).map(|k| block(&self.prior, k)).collect()
    }

    pub fn scene(&self) -> Result<Scene> {
        Scene::new(&self.cfg, &self.layout, &self.vehicles, &self.prior_blocks(), &self.map)
    }

    pub fn matched_beams(&self, tx: &[f64]) -> Result<Vec<CVec>> {
        self.map.owner.iter().map(|&k| steering(tx, self.vehicles[k].theta, self.cfg.wavelength)).collect()
    }

    pub fn uniform_powers(&self) -> Vec<f64> {
        vec![self.cfg.total_power / self.cfg.num_subcarriers as f64; self.cfg.num_subcarriers]
    }

    /// Normalizers from matched beams and uniform power on the current layout.
    pub fn initial_aleph(&self) -> Result<[f64; 3]> {
        let scene = self.scene()?;
        let e = scene.evaluate(&scene.stats(&self.matched_beams(&self.layout.tx)?), &self.uniform_powers());
        Ok(normalizing_aleph(&e.info))
    }

    /// Per-vehicle block-reduced bounds and PCRLB diagonal of a design.
    pub fn bounds(&self, layout: &ArrayLayout, beams: &[CVec], powers: &[f64], mode: PcrlbMode) -> Result<(Vec<BoundTriple>, Vec<BoundTriple>)> {
        let scene = self.scene()?.with_tx(&layout.tx).with_rx(&layout.rx);
        let e = scene.evaluate(&scene.stats(beams), powers);
        let set = beam_set(beams, powers, &self.map);
        let obs = observed_fim(&self.cfg, layout, &set, &self.vehicles)?;
        let pcrlb = pcrlb_diag(&obs, &self.prior, mode)?;
        Ok((e.info.iter().map(|i| i.bounds()).collect(), pcrlb))
    }
}

pub fn beam_set(beams: &[CVec], powers: &[f64], map: &SubcarrierMap) -> BeamformerSet {
    BeamformerSet { beams: beams.to_vec(), powers: DVector::from_column_slice(powers), map: map.clone() }
}

/// Result of the weighted alternating optimization.
#[derive(Clone, Debug)]
pub struct AoOutcome {
    pub layout: ArrayLayout,
    pub beams: Vec<CVec>,
    pub powers: Vec<f64>,
    pub aleph: [f64; 3],
    /// Objective at the start and after every outer iteration.
    pub trace: Vec<f64>,
    pub evaluation: Evaluation,
    pub converged: bool,
}

impl AoOutcome {
    pub fn iterations(&self) -> usize {
        self.trace.len() - 1
    }
}

/// Beams, power step, transmit positions and receive positions in turn
/// until the weighted objective settles.
pub fn run_p1_ao(problem: &SlotProblem, rho: f64, aleph: [f64; 3], solvers: &Solvers) -> Result<AoOutcome> {
    let weights = Weighted { rho, aleph };
    let mut layout = problem.layout.clone();
    let mut scene = problem.scene()?;
    let mut beams = problem.matched_beams(&layout.tx)?;
    let mut powers = problem.uniform_powers();
    let budget = problem.cfg.total_power;
    let ao = &solvers.ao;
    let mut eval = scene.evaluate(&scene.stats(&beams), &powers);
    let mut trace = vec![weights.value(&eval)];
    let mut converged = false;
    for _ in 0..ao.max_outer {
        let bf = sca_solve_weighted(&scene, &powers, &weights, &beams, &solvers.beam).map_err(|e| e.in_stage("beamforming"))?;
        beams = bf.beams;
        let terms = scene.power_terms(&scene.stats(&beams));
        let ps = solve_power_weighted(&terms, budget, &weights);
        // Keep the incumbent powers if the barrier solution is not better.
        let before = weights.value(&scene.evaluate(&scene.stats(&beams), &powers));
        if weights.value(&scene.evaluate(&scene.stats(&beams), &ps.powers)) >= before {
            powers = ps.powers;
        }
        if ao.move_tx {
            let out = pga_tx(&scene, layout.tx_bounds, layout.min_spacing, &beams, &powers, &weights, &solvers.pga).map_err(|e| e.in_stage("transmit positions"))?;
            layout.tx = out.positions;
            scene = scene.with_tx(&layout.tx);
        }
        if ao.move_rx {
            let out = pga_rx(&scene, &layout.rx, layout.rx_bounds, layout.min_spacing, &beams, &powers, &solvers.pga).map_err(|e| e.in_stage("receive positions"))?;
            layout.rx = out.positions;
            scene = scene.with_rx(&layout.rx);
        }
        eval = scene.evaluate(&scene.stats(&beams), &powers);
        let f = weights.value(&eval);
        let prev = *trace.last().expect("nonempty trace");
        trace.push(f);
        if (f - prev).abs() <= ao.tolerance * f.abs().max(1e-300) {
            converged = true;
            break;
        }
    }
    Ok(AoOutcome { layout, beams, powers, aleph, trace, evaluation: eval, converged })
}

/// A rate-maximizing design meeting the bound thresholds.
#[derive(Clone, Debug)]
pub struct QosDesign {
    pub beams: Vec<CVec>,
    pub powers: Vec<f64>,
    pub evaluation: Evaluation,
    pub rounds: usize,
}

/// Alternates the thresholded beam and power steps from matched beams and
/// uniform power.
pub fn solve_qos_joint(scene: &Scene, thresholds: &Thresholds, budget: f64, settings: &BeamSettings, init: &[CVec]) -> Result<QosDesign> {
    let n = init.len();
    let mut beams = init.to_vec();
    let mut powers = vec![budget / n as f64; n];
    if !thresholds.is_active() {
        // Without sensing constraints matched beams are optimal for the rate
        // and the power step is water-filling.
        let bf = sca_solve_weighted(scene, &powers, &Weighted { rho: 1.0, aleph: [0.0; 3] }, &beams, settings)?;
        beams = bf.beams;
        let terms = scene.power_terms(&scene.stats(&beams));
        powers = waterfill(&terms.rate_gains, budget, 0.0).powers;
        let evaluation = scene.evaluate(&scene.stats(&beams), &powers);
        return Ok(QosDesign { beams, powers, evaluation, rounds: 1 });
    }
    let mut rate = f64::NEG_INFINITY;
    let mut rounds = 0;
    let mut last = None;
    for _ in 0..6 {
        rounds += 1;
        let bf = match sca_solve_qos(scene, &powers, thresholds, &beams, settings) {
            Ok(b) => b,
            Err(e) if rounds > 1 && e.infeasibility().is_some() => break,
            Err(e) => return Err(e),
        };
        beams = bf.beams;
        let terms = scene.power_terms(&scene.stats(&beams));
        let ps = solve_power_qos(&PowerProblem { terms, budget, thresholds: *thresholds })?;
        let e_new = scene.evaluate(&scene.stats(&beams), &ps.powers);
        let e_old = scene.evaluate(&scene.stats(&beams), &powers);
        let old_ok = thresholds.satisfied(&e_old.info, 0.0);
        if thresholds.satisfied(&e_new.info, 0.0) && (!old_ok || e_new.rate >= e_old.rate) {
            powers = ps.powers;
        }
        let e = scene.evaluate(&scene.stats(&beams), &powers);
        let gain = e.rate - rate;
        rate = e.rate;
        last = Some(e);
        if gain <= 1e-6 * rate.abs().max(1.0) {
            break;
        }
    }
    let evaluation = last.unwrap_or_else(|| scene.evaluate(&scene.stats(&beams), &powers));
    if !thresholds.satisfied(&evaluation.info, 0.0) {
        return Err(Error::Infeasible(thresholds.tightest(&evaluation.info).expect("active thresholds")));
    }
    Ok(QosDesign { beams, powers, evaluation, rounds })
}

/// Per-slot output of the tracking loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: usize,
    pub truth: Vec<VehicleState>,
    pub predicted: Vec<VehicleState>,
    pub tracked: Vec<VehicleState>,
    pub tx: Vec<f64>,
    pub rx: Vec<f64>,
    /// Rate on the true channel with the slot's design.
    pub sum_rate: f64,
    /// Block-reduced bounds at the predicted state (what the design targets).
    pub lpcrlb: Vec<BoundTriple>,
    pub pcrlb: Vec<BoundTriple>,
    /// Diagonal of the updated filter covariance.
    pub covariance: Vec<BoundTriple>,
    /// Best swarm fitness, or minus the design rate without a swarm.
    pub objective: f64,
    pub swarm_evaluations: usize,
    pub qos_rounds: usize,
    pub feasible: bool,
    pub infeasibility: Option<Infeasibility>,
    pub seed: u64,
    pub runtime_ms: f64,
}

/// Whether the transmit layout is searched each slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayoutPolicy {
    Swarm,
    Fixed,
}

fn quantize(p: &[f64], step: f64) -> Vec<i64> {
    p.iter().map(|x| (x / step).round() as i64).collect()
}

/// Swarm search for the transmit layout on a slot problem.
fn optimize_layout(problem: &SlotProblem, scene: &Scene, thresholds: &Thresholds, solvers: &Solvers, rho: f64) -> Result<(Vec<f64>, f64, usize)> {
    let layout = &problem.layout;
    let bounds = SearchBox { lo: layout.tx_bounds.0, hi: layout.tx_bounds.1, min_spacing: layout.min_spacing };
    let mut seeds = vec![layout.with_tx_ula().tx];
    if solvers.warm_start {
        let aleph = problem.initial_aleph()?;
        let mut ao = *solvers;
        ao.ao.move_rx = false;
        if let Ok(out) = run_p1_ao(problem, rho, aleph, &ao) {
            seeds.push(out.layout.tx);
        }
    }
    let cfg = solvers.swarm;
    let step = problem.cfg.wavelength / 1000.0;
    let mut cache: HashMap<Vec<i64>, Option<f64>> = HashMap::new();
    let budget = problem.cfg.total_power;
    let out = run_rpdpso(&cfg, &bounds, layout.m_tx(), &seeds, |pos| {
        fitness(pos, layout.min_spacing, cfg.penalty, |sorted| {
            let key = quantize(sorted, step);
            if let Some(v) = cache.get(&key) {
                return *v;
            }
            let s = scene.with_tx(sorted);
            let v = problem
                .matched_beams(sorted)
                .ok()
                .and_then(|init| solve_qos_joint(&s, thresholds, budget, &solvers.beam, &init).ok())
                .map(|d| d.evaluation.rate);
            cache.insert(key, v);
            v
        })
    })?;
    Ok((out.best_position, out.best_fitness, out.evaluations))
}

/// Predict, pre-optimize the transmit layout on the predicted channel,
/// advance the truth, refit beams and powers, then sense and update.
pub fn run_two_stage(scenario: &Scenario) -> Result<Vec<SlotRecord>> {
    run_tracking(scenario, LayoutPolicy::Swarm)
}

/// [`run_two_stage`] with the transmit array held at the half-wavelength ULA.
pub fn baseline_ulah(scenario: &Scenario) -> Result<Vec<SlotRecord>> {
    let mut s = scenario.clone();
    s.layout = s.layout.with_tx_ula();
    run_tracking(&s, LayoutPolicy::Fixed)
}

pub fn run_tracking(scenario: &Scenario, policy: LayoutPolicy) -> Result<Vec<SlotRecord>> {
    scenario.validate()?;
    let cfg = &scenario.cfg;
    let thresholds = scenario.objective.thresholds.map(Thresholds).unwrap_or_else(Thresholds::unbounded);
    let mut layout = scenario.layout.clone();
    let mut truth = scenario.vehicles.clone();
    let mut track = scenario.initial_track();
    let mut truth_rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    truth_rng.set_stream(1);
    let mut records = Vec::with_capacity(scenario.horizon);
    for slot in 1..=scenario.horizon {
        let t0 = Instant::now();
        let pred = predict(&track, &scenario.motion)?;
        let prior = pred.information()?;
        let predicted = pred.vehicles();
        let problem = SlotProblem { cfg: cfg.clone(), layout: layout.clone(), vehicles: predicted.clone(), prior, map: scenario.map.clone() };
        let scene = problem.scene().map_err(|e| e.at_slot(slot))?;
        let mut feasible = true;
        let mut infeasibility = None;
        let (mut objective, mut evaluations) = (f64::NAN, 0);
        if policy == LayoutPolicy::Swarm {
            match optimize_layout(&problem, &scene, &thresholds, &scenario.solvers, scenario.objective.rho) {
                Ok((tx, fit, ev)) => {
                    layout.tx = tx;
                    objective = fit;
                    evaluations = ev;
                }
                Err(Error::SwarmInfeasible) => feasible = false,
                Err(e) => return Err(e.at_slot(slot)),
            }
        }
        truth = propagate_random(&truth, &scenario.motion, &mut truth_rng).map_err(|e| e.at_slot(slot))?;
        let scene = scene.with_tx(&layout.tx);
        let init = problem.matched_beams(&layout.tx)?;
        let design = match solve_qos_joint(&scene, &thresholds, cfg.total_power, &scenario.solvers.beam, &init) {
            Ok(d) => d,
            Err(e) if e.infeasibility().is_some() => {
                feasible = false;
                infeasibility = e.infeasibility();
                solve_qos_joint(&scene, &Thresholds::unbounded(), cfg.total_power, &scenario.solvers.beam, &init).map_err(|e| e.at_slot(slot))?
            }
            Err(e) => return Err(e.at_slot(slot)),
        };
        if policy == LayoutPolicy::Fixed || objective.is_nan() {
            objective = -design.evaluation.rate;
        }
        let set = beam_set(&design.beams, &design.powers, &scenario.map);
        let targets = truth.iter().map(|v| v.echo_target(cfg)).collect::<Result<Vec<_>>>().map_err(|e| e.at_slot(slot))?;
        let echo_seed = scenario.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(slot as u64);
        let meas = synth_echo_targets(cfg, &layout, &set, &targets, scenario.tracking.echo_noise.then_some(echo_seed));
        track = update(&pred, &meas, cfg, &layout, &set)?;
        let rate = sum_rate(cfg, &layout, &set, &truth)?;
        let problem = SlotProblem { layout: layout.clone(), ..problem };
        let (lpcrlb, pcrlb) = problem.bounds(&layout, &design.beams, &design.powers, scenario.tracking.pcrlb).map_err(|e| e.at_slot(slot))?;
        let k_n = truth.len();
        let covariance = (0..k_n)
            .map(|k| BoundTriple::from_array([track.covariance[(3 * k, 3 * k)], track.covariance[(3 * k + 1, 3 * k + 1)], track.covariance[(3 * k + 2, 3 * k + 2)]]))
            .collect();
        records.push(SlotRecord {
            slot,
            truth: truth.clone(),
            predicted,
            tracked: track.vehicles(),
            tx: layout.tx.clone(),
            rx: layout.rx.clone(),
            sum_rate: rate,
            lpcrlb,
            pcrlb,
            covariance,
            objective,
            swarm_evaluations: evaluations,
            qos_rounds: design.rounds,
            feasible,
            infeasibility,
            seed: scenario.seed,
            runtime_ms: if scenario.timing { t0.elapsed().as_secs_f64() * 1e3 } else { 0.0 },
        });
    }
    Ok(records)
}

/// One point of the rate/sensing trade-off.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub rho: f64,
    pub sum_rate: f64,
    /// `Σ_k Σ_i ℵ_i · reduced information`.
    pub sensing: f64,
    pub lpcrlb: Vec<BoundTriple>,
    pub pcrlb: Vec<BoundTriple>,
    pub tx: Vec<f64>,
    pub rx: Vec<f64>,
    pub outer_iterations: usize,
    /// Index of the weighting whose run produced the reported design.
    pub source: usize,
}

/// Weighted alternating optimization across weighting factors with one
/// set of normalizers. Every design found is kept in a pool and each
/// weighting reports the pool member scoring best under it.
pub fn run_tradeoff_sweep(problem: &SlotProblem, rhos: &[f64], aleph: [f64; 3], solvers: &Solvers, mode: PcrlbMode) -> Result<Vec<SweepPoint>> {
    let mut pool = Vec::with_capacity(rhos.len());
    for &rho in rhos {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::Config(format!("weighting factor {rho} outside [0, 1]")));
        }
        pool.push(run_p1_ao(problem, rho, aleph, solvers)?);
    }
    let mut out = Vec::with_capacity(rhos.len());
    for (i, &rho) in rhos.iter().enumerate() {
        let w = Weighted { rho, aleph };
        let mut best = i;
        for (j, cand) in pool.iter().enumerate() {
            if w.value(&cand.evaluation) > w.value(&pool[best].evaluation) {
                best = j;
            }
        }
        let sol = &pool[best];
        let (lpcrlb, pcrlb) = problem.bounds(&sol.layout, &sol.beams, &sol.powers, mode)?;
        out.push(SweepPoint {
            rho,
            sum_rate: sol.evaluation.rate,
            sensing: w.sensing(&sol.evaluation.info),
            lpcrlb,
            pcrlb,
            tx: sol.layout.tx.clone(),
            rx: sol.layout.rx.clone(),
            outer_iterations: pool[i].iterations(),
            source: best,
        });
    }
    Ok(out)
}

/// Matched-beam, uniform-power bounds for one array/waveform size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub label: String,
    pub m_rx: usize,
    pub num_subcarriers: usize,
    pub num_blocks: usize,
    pub lcrlb: Vec<BoundTriple>,
    pub lpcrlb: Vec<BoundTriple>,
}

/// Bounds at the scenario's size and with the receive array, the
/// subcarrier count and the block count doubled in turn. Total power and
/// the prior from the initial track are held fixed.
pub fn bound_table(scenario: &Scenario) -> Result<Vec<BoundRow>> {
    scenario.validate()?;
    let base = &scenario.cfg;
    let lay = &scenario.layout;
    let m_rx = lay.m_rx();
    let prior = prior_fim(&scenario.initial_track(), &scenario.motion)?;
    let blocks: Vec<Matrix3<f64>> = (0..scenario.vehicles.len()).map(|k| block(&prior, k)).collect();
    let variants = [("base", m_rx, base.num_subcarriers, base.num_blocks), ("2x_m_rx", 2 * m_rx, base.num_subcarriers, base.num_blocks), ("2x_n", m_rx, 2 * base.num_subcarriers, base.num_blocks), ("2x_q", m_rx, base.num_subcarriers, 2 * base.num_blocks)];
    let mut rows = Vec::with_capacity(variants.len());
    for (label, mr, n, q) in variants {
        let cfg = SystemConfig { num_subcarriers: n, num_blocks: q, ..base.clone() };
        let mut layout = lay.clone();
        if mr != m_rx {
            let region = (lay.rx_bounds.1 - lay.rx_bounds.0).max((mr - 1) as f64 * lay.min_spacing);
            layout.rx_bounds = (lay.rx_bounds.0, lay.rx_bounds.0 + region);
            layout.rx = (0..mr).map(|l| lay.rx_bounds.0 + l as f64 * lay.min_spacing).collect();
        }
        let map = SubcarrierMap::contiguous(n, scenario.vehicles.len());
        let scene = Scene::new(&cfg, &layout, &scenario.vehicles, &blocks, &map)?;
        let zero = Scene::new(&cfg, &layout, &scenario.vehicles, &vec![Matrix3::zeros(); blocks.len()], &map)?;
        let beams: Vec<CVec> = map.owner.iter().map(|&k| steering(&layout.tx, scenario.vehicles[k].theta, cfg.wavelength)).collect::<Result<_>>()?;
        let p = vec![cfg.total_power / n as f64; n];
        let bounds = |s: &Scene| s.evaluate(&s.stats(&beams), &p).info.iter().map(|i| i.bounds()).collect::<Vec<_>>();
        rows.push(BoundRow { label: label.into(), m_rx: mr, num_subcarriers: n, num_blocks: q, lcrlb: bounds(&zero), lpcrlb: bounds(&scene) });
    }
    Ok(rows)
}
