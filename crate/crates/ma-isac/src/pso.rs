//! Particle swarm search over transmit antenna positions with velocity
//! clamping, attenuated boundary reflection, distance pruning and
//! replenishment around retained bests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ArrayLayout;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwarmConfig {
    pub particles: usize,
    pub iterations: usize,
    pub inertia_min: f64,
    pub inertia_max: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Velocity limit as a fraction of the region width.
    pub velocity_scale: f64,
    /// Velocity attenuation on boundary reflection.
    pub reflection_scale: f64,
    /// Pruning radius as a fraction of the box diagonal.
    pub prune_scale: f64,
    /// Fitness penalty per adjacent pair closer than the minimum spacing.
    pub penalty: f64,
    /// Target number of active particles.
    pub retention: usize,
    pub seed: u64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        SwarmConfig {
            particles: 10,
            iterations: 20,
            inertia_min: 0.4,
            inertia_max: 0.9,
            cognitive: 1.5,
            social: 1.5,
            velocity_scale: 0.2,
            reflection_scale: 0.5,
            prune_scale: 0.5,
            penalty: 10.0,
            retention: 5,
            seed: 0,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles < 2 {
            return Err(Error::Config("swarm needs at least two particles".into()));
        }
        if !(self.inertia_min <= self.inertia_max) {
            return Err(Error::Config("inertia bounds are reversed".into()));
        }
        for (name, s) in [("velocity", self.velocity_scale), ("reflection", self.reflection_scale), ("prune", self.prune_scale)] {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::Config(format!("{name} scale {s} outside [0, 1]")));
            }
        }
        if !(self.penalty > 0.0) {
            return Err(Error::Config("penalty factor must be positive".into()));
        }
        Ok(())
    }
}

/// Transmit search box and spacing rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub lo: f64,
    pub hi: f64,
    pub min_spacing: f64,
}

impl SearchBox {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub id: u64,
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    pub active: bool,
}

impl Particle {
    pub fn at(id: u64, position: Vec<f64>) -> Particle {
        let m = position.len();
        Particle { id, best_position: position.clone(), position, velocity: vec![0.0; m], best_fitness: f64::INFINITY, active: true }
    }

    fn record(&mut self, fitness: f64) {
        if fitness < self.best_fitness {
            self.best_fitness = fitness;
            self.best_position = self.position.clone();
        }
    }
}

/// `−rate + ι·violations` for a position whose inner solve returned `rate`;
/// an infeasible inner solve scores `+∞`. The inner solve sees the sorted
/// positions.
pub fn fitness<F: FnOnce(&[f64]) -> Option<f64>>(position: &[f64], min_spacing: f64, penalty: f64, inner: F) -> f64 {
    let mut sorted = position.to_vec();
    sorted.sort_by(f64::total_cmp);
    let violations = ArrayLayout::spacing_violations(&sorted, min_spacing);
    match inner(&sorted) {
        Some(rate) => -rate + penalty * violations as f64,
        None => f64::INFINITY,
    }
}

fn inertia(iter: usize, cfg: &SwarmConfig) -> f64 {
    let frac = if cfg.iterations == 0 { 1.0 } else { iter as f64 / cfg.iterations as f64 };
    cfg.inertia_max - frac * (cfg.inertia_max - cfg.inertia_min)
}

/// Velocity and position update with explicit uniform draws `e1`, `e2`.
pub fn update_with(p: &Particle, global_best: &[f64], iter: usize, cfg: &SwarmConfig, bounds: &SearchBox, e1: &[f64], e2: &[f64]) -> Particle {
    let w = inertia(iter, cfg);
    let vmax = cfg.velocity_scale * bounds.width();
    let mut out = p.clone();
    for l in 0..p.position.len() {
        let x = p.position[l];
        let v = w * p.velocity[l] + cfg.cognitive * e1[l] * (p.best_position[l] - x) + cfg.social * e2[l] * (global_best[l] - x);
        let v = v.clamp(-vmax, vmax);
        let nx = x + v;
        if nx > bounds.hi || nx < bounds.lo {
            out.position[l] = nx.clamp(bounds.lo, bounds.hi);
            out.velocity[l] = -cfg.reflection_scale * v;
        } else {
            out.position[l] = nx;
            out.velocity[l] = v;
        }
    }
    out
}

fn particle_rng(seed: u64, id: u64, iter: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng.set_word_pos(iter as u128 * 1024);
    rng
}

/// [`update_with`] drawing `e1`, `e2` from the particle's own stream.
pub fn update_particle(p: &Particle, global_best: &[f64], iter: usize, cfg: &SwarmConfig, bounds: &SearchBox) -> Particle {
    let mut rng = particle_rng(cfg.seed, p.id, iter);
    let m = p.position.len();
    let e1: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    let e2: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    update_with(p, global_best, iter, cfg, bounds, &e1, &e2)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Deactivates particles farther than the pruning radius from the global
/// best while more than `retention` are active, then spawns particles near
/// retained bests until `retention` are active. Returns the ids spawned.
pub fn prune_and_replenish(swarm: &mut Vec<Particle>, global_best: &[f64], cfg: &SwarmConfig, bounds: &SearchBox, next_id: &mut u64, iter: usize) -> Vec<u64> {
    let m = global_best.len();
    let radius = cfg.prune_scale * bounds.width() * (m as f64).sqrt();
    let active = swarm.iter().filter(|p| p.active).count();
    if active > cfg.retention {
        for p in swarm.iter_mut().filter(|p| p.active) {
            if distance(&p.position, global_best) > radius {
                p.active = false;
            }
        }
    }
    let mut spawned = Vec::new();
    let mut active = swarm.iter().filter(|p| p.active).count();
    if active < cfg.retention {
        let retained: Vec<Vec<f64>> = {
            let r: Vec<Vec<f64>> = swarm.iter().filter(|p| p.active).map(|p| p.best_position.clone()).collect();
            if r.is_empty() { vec![global_best.to_vec()] } else { r }
        };
        let mut rng = particle_rng(cfg.seed ^ 0x7265_706c_656e_6973, u64::MAX - iter as u64, iter);
        while active < cfg.retention {
            let base = &retained[rng.random_range(0..retained.len())];
            let pos: Vec<f64> = base
                .iter()
                .map(|x| (x + rng.random_range(-bounds.min_spacing..=bounds.min_spacing)).clamp(bounds.lo, bounds.hi))
                .collect();
            let id = *next_id;
            *next_id += 1;
            swarm.push(Particle::at(id, pos));
            spawned.push(id);
            active += 1;
        }
    }
    spawned
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwarmOutcome {
    /// Sorted positions of the global best.
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    /// Global-best fitness after initialization and after every iteration.
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

/// Runs the swarm from `seeds` (placed first) plus uniform random particles.
pub fn run_rpdpso<F: FnMut(&[f64]) -> f64>(cfg: &SwarmConfig, bounds: &SearchBox, m: usize, seeds: &[Vec<f64>], mut fitness: F) -> Result<SwarmOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut swarm: Vec<Particle> = Vec::with_capacity(cfg.particles);
    for (i, s) in seeds.iter().take(cfg.particles).enumerate() {
        swarm.push(Particle::at(i as u64, s.iter().map(|x| x.clamp(bounds.lo, bounds.hi)).collect()));
    }
    while swarm.len() < cfg.particles {
        let mut pos: Vec<f64> = (0..m).map(|_| rng.random_range(bounds.lo..=bounds.hi)).collect();
        pos.sort_by(f64::total_cmp);
        swarm.push(Particle::at(swarm.len() as u64, pos));
    }
    let mut next_id = swarm.len() as u64;
    let mut evaluations = 0;
    for p in &mut swarm {
        let f = fitness(&p.position);
        evaluations += 1;
        p.record(f);
    }
    let best_of = |swarm: &[Particle], cur: Option<(Vec<f64>, f64)>| -> Option<(Vec<f64>, f64)> {
        let mut best = cur;
        for p in swarm {
            if best.as_ref().map_or(true, |b| p.best_fitness < b.1) {
                best = Some((p.best_position.clone(), p.best_fitness));
            }
        }
        best
    };
    let mut gbest = best_of(&swarm, None).expect("nonempty swarm");
    let mut trace = vec![gbest.1];
    for iter in 1..=cfg.iterations {
        for p in swarm.iter_mut().filter(|p| p.active) {
            *p = update_particle(p, &gbest.0, iter, cfg, bounds);
            let f = fitness(&p.position);
            evaluations += 1;
            p.record(f);
        }
        gbest = best_of(&swarm, Some(gbest)).expect("incumbent");
        let spawned = prune_and_replenish(&mut swarm, &gbest.0, cfg, bounds, &mut next_id, iter);
        for p in swarm.iter_mut().filter(|p| spawned.contains(&p.id)) {
            let f = fitness(&p.position);
            evaluations += 1;
            p.record(f);
        }
        gbest = best_of(&swarm, Some(gbest)).expect("incumbent");
        trace.push(gbest.1);
    }
    let (mut pos, fit) = gbest;
    pos.sort_by(f64::total_cmp);
    if !fit.is_finite() || ArrayLayout::spacing_violations(&pos, bounds.min_spacing) > 0 {
        return Err(Error::SwarmInfeasible);
    }
    Ok(SwarmOutcome { best_position: pos, best_fitness: fit, trace, evaluations })
}
