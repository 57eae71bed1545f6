//! JSON run configuration. Field names carry their units; angles are in
//! degrees here and radians everywhere else.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::antenna::PgaConfig;
use crate::beamforming::BeamSettings;
use crate::error::{Error, Result};
use crate::fim::PcrlbMode;
use crate::model::{channel_gains, ArrayLayout, SubcarrierMap, SystemConfig, VehicleState, SPEED_OF_LIGHT};
use crate::orchestrator::{AlephPolicy, AoSettings, ObjectiveConfig, Scenario, Solvers, TrackingSettings};
use crate::pso::SwarmConfig;
use crate::tracking::MotionModel;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "MA_ISAC_OUT_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub carrier_frequency_hz: f64,
    pub num_subcarriers: usize,
    pub num_blocks: usize,
    pub subcarrier_spacing_hz: f64,
    pub symbol_duration_s: f64,
    /// Defaults to the reciprocal of the subcarrier spacing.
    pub useful_duration_s: Option<f64>,
    pub total_power_w: f64,
    pub comm_noise_psd_w_per_hz: f64,
    pub radar_noise_psd_w_per_hz: f64,
    /// Overrides the radar noise so the reference echo SNR (see
    /// [`radar_noise_for_snr`]) takes this value.
    pub echo_snr_db: Option<f64>,
    pub radar_cross_section_m2: f64,
    pub ref_path_loss_db: f64,
    pub ref_distance_m: f64,
    pub path_loss_exponent: f64,
    pub first_subcarrier_index: usize,
}

impl Default for SystemSection {
    fn default() -> Self {
        SystemSection {
            carrier_frequency_hz: 28e9,
            num_subcarriers: 32,
            num_blocks: 7,
            subcarrier_spacing_hz: 120e3,
            symbol_duration_s: 8.92e-6,
            useful_duration_s: None,
            total_power_w: 1.0,
            comm_noise_psd_w_per_hz: 1e-23,
            radar_noise_psd_w_per_hz: 1.1e-25,
            echo_snr_db: None,
            radar_cross_section_m2: 0.1,
            ref_path_loss_db: -70.0,
            ref_distance_m: 1.0,
            path_loss_exponent: 2.55,
            first_subcarrier_index: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArraySection {
    pub num_tx: usize,
    pub num_rx: usize,
    /// Length of each movement region.
    pub region_lambda: f64,
    pub min_spacing_lambda: f64,
    pub tx_rx_gap_lambda: f64,
    /// Explicit initial positions; a ULA at the lower end of each region otherwise.
    pub tx_positions_m: Option<Vec<f64>>,
    pub rx_positions_m: Option<Vec<f64>>,
}

impl Default for ArraySection {
    fn default() -> Self {
        ArraySection {
            num_tx: 8,
            num_rx: 8,
            region_lambda: 9.0,
            min_spacing_lambda: 0.5,
            tx_rx_gap_lambda: 0.5,
            tx_positions_m: None,
            rx_positions_m: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleEntry {
    pub theta_deg: f64,
    pub distance_m: f64,
    pub speed_mps: f64,
}

fn default_vehicles() -> Vec<VehicleEntry> {
    vec![
        VehicleEntry { theta_deg: 9.2, distance_m: 400.0, speed_mps: 20.0 },
        VehicleEntry { theta_deg: 12.0, distance_m: 410.0, speed_mps: 18.0 },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionSection {
    pub slot_duration_s: f64,
    pub horizon_slots: usize,
    pub theta_std_deg: f64,
    pub distance_std_m: f64,
    pub speed_std_mps: f64,
    pub speed_increment_mps: [f64; 2],
    pub init_theta_std_deg: f64,
    pub init_distance_std_m: f64,
    pub init_speed_std_mps: f64,
    pub echo_noise: bool,
}

impl Default for MotionSection {
    fn default() -> Self {
        MotionSection {
            slot_duration_s: 0.02,
            horizon_slots: 2,
            theta_std_deg: 1e-4f64.to_degrees(),
            distance_std_m: 0.1,
            speed_std_mps: 0.1,
            speed_increment_mps: [-0.2, 0.2],
            init_theta_std_deg: 1e-3f64.to_degrees(),
            init_distance_std_m: 0.5,
            init_speed_std_mps: 0.5,
            echo_noise: true,
        }
    }
}

/// Thresholds on the achieved bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdEntry {
    pub theta_rad2: f64,
    pub distance_m2: f64,
    pub speed_m2ps2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlephEntry {
    Normalized,
    Fixed([f64; 3]),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveSection {
    pub rho: f64,
    pub aleph: AlephEntry,
    pub thresholds: Option<ThresholdEntry>,
}

impl Default for ObjectiveSection {
    fn default() -> Self {
        ObjectiveSection {
            rho: 0.5,
            aleph: AlephEntry::Normalized,
            thresholds: Some(ThresholdEntry { theta_rad2: 2e-4, distance_m2: 0.05, speed_m2ps2: 1.0 }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub beam: BeamSettings,
    pub pga: PgaConfig,
    pub ao: AoSettings,
    pub pcrlb: PcrlbMode,
    pub warm_start: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection { beam: BeamSettings::default(), pga: PgaConfig::default(), ao: AoSettings::default(), pcrlb: PcrlbMode::Full, warm_start: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub seed: u64,
    pub timing: bool,
    pub dir: Option<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { seed: 1, timing: false, dir: None }
    }
}

/// The whole configuration document. Every field is optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfigFile {
    pub system: SystemSection,
    pub array: ArraySection,
    pub vehicles: Vec<VehicleEntry>,
    pub motion: MotionSection,
    pub objective: ObjectiveSection,
    pub solver: SolverSection,
    pub swarm: SwarmConfig,
    pub output: OutputSection,
}

impl Default for RunConfigFile {
    fn default() -> Self {
        RunConfigFile {
            system: SystemSection::default(),
            array: ArraySection::default(),
            vehicles: default_vehicles(),
            motion: MotionSection::default(),
            objective: ObjectiveSection::default(),
            solver: SolverSection::default(),
            swarm: SwarmConfig::default(),
            output: OutputSection::default(),
        }
    }
}

/// A default used when the file omits a field that has no source value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub field: String,
    pub value: serde_json::Value,
}

const ASSUMED_DEFAULTS: &[&str] = &[
    "system.first_subcarrier_index",
    "motion.slot_duration_s",
    "motion.theta_std_deg",
    "motion.distance_std_m",
    "motion.speed_std_mps",
    "motion.speed_increment_mps",
    "motion.init_theta_std_deg",
    "motion.init_distance_std_m",
    "motion.init_speed_std_mps",
    "motion.echo_noise",
    "objective.rho",
    "solver.beam",
    "solver.pga",
    "solver.ao",
    "solver.pcrlb",
    "solver.warm_start",
    "swarm.inertia_min",
    "swarm.inertia_max",
    "swarm.cognitive",
    "swarm.social",
    "swarm.velocity_scale",
    "swarm.reflection_scale",
    "swarm.prune_scale",
    "swarm.penalty",
    "swarm.retention",
    "output.seed",
];

fn lookup<'a>(v: &'a serde_json::Value, path: &str) -> Option<&'a serde_json::Value> {
    path.split('.').try_fold(v, |cur, key| cur.get(key))
}

impl RunConfigFile {
    /// Parses a document; empty text gives the defaults.
    pub fn from_json(text: &str) -> Result<RunConfigFile> {
        if text.trim().is_empty() {
            return Ok(RunConfigFile::default());
        }
        serde_json::from_str(text).map_err(|e| Error::Config(format!("line {} column {}: {e}", e.line(), e.column())))
    }

    pub fn load(path: &Path) -> Result<RunConfigFile> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        RunConfigFile::from_json(&text)
    }

    /// Pretty JSON with every field explicit.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact serialization.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Assumed defaults the given document text leaves unset.
    pub fn provenance(&self, text: &str) -> Vec<ProvenanceEntry> {
        let raw: serde_json::Value = if text.trim().is_empty() { serde_json::json!({}) } else { serde_json::from_str(text).unwrap_or(serde_json::json!({})) };
        let resolved = serde_json::to_value(self).expect("config serializes");
        ASSUMED_DEFAULTS
            .iter()
            .filter(|f| lookup(&raw, f).is_none())
            .filter_map(|f| lookup(&resolved, f).map(|v| ProvenanceEntry { field: f.to_string(), value: v.clone() }))
            .collect()
    }

    pub fn system_config(&self) -> Result<SystemConfig> {
        let s = &self.system;
        if !(s.carrier_frequency_hz > 0.0) {
            return Err(Error::Config("system.carrier_frequency_hz must be positive".into()));
        }
        let useful = s.useful_duration_s.unwrap_or(1.0 / s.subcarrier_spacing_hz);
        let mut cfg = SystemConfig {
            wavelength: SPEED_OF_LIGHT / s.carrier_frequency_hz,
            num_subcarriers: s.num_subcarriers,
            num_blocks: s.num_blocks,
            subcarrier_spacing: s.subcarrier_spacing_hz,
            symbol_duration: s.symbol_duration_s,
            useful_duration: useful,
            cyclic_prefix: s.symbol_duration_s - useful,
            comm_noise_psd: s.comm_noise_psd_w_per_hz,
            radar_noise_psd: s.radar_noise_psd_w_per_hz,
            total_power: s.total_power_w,
            radar_cross_section: s.radar_cross_section_m2,
            ref_path_loss: 10f64.powf(s.ref_path_loss_db / 10.0),
            ref_distance: s.ref_distance_m,
            path_loss_exponent: s.path_loss_exponent,
            lightspeed: SPEED_OF_LIGHT,
            first_subcarrier_index: s.first_subcarrier_index,
        };
        if let Some(db) = s.echo_snr_db {
            let d = self.vehicles.first().map(|v| v.distance_m).ok_or_else(|| Error::Config("echo_snr_db needs a vehicle".into()))?;
            cfg.radar_noise_psd = radar_noise_for_snr(&cfg, d, db)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn layout(&self, cfg: &SystemConfig) -> Result<ArrayLayout> {
        let a = &self.array;
        let lam = cfg.wavelength;
        let mut layout = ArrayLayout::ula(a.num_tx, a.num_rx, a.min_spacing_lambda * lam, a.region_lambda * lam, a.tx_rx_gap_lambda * lam)?;
        if let Some(tx) = &a.tx_positions_m {
            if tx.len() != a.num_tx {
                return Err(Error::Config("array.tx_positions_m length differs from num_tx".into()));
            }
            layout.tx = tx.clone();
        }
        if let Some(rx) = &a.rx_positions_m {
            if rx.len() != a.num_rx {
                return Err(Error::Config("array.rx_positions_m length differs from num_rx".into()));
            }
            layout.rx = rx.clone();
        }
        layout.validate()?;
        Ok(layout)
    }

    pub fn vehicles(&self) -> Result<Vec<VehicleState>> {
        if self.vehicles.is_empty() {
            return Err(Error::Config("at least one vehicle is required".into()));
        }
        self.vehicles
            .iter()
            .enumerate()
            .map(|(k, v)| {
                if !(v.theta_deg > 0.0 && v.theta_deg < 180.0) {
                    return Err(Error::Config(format!("vehicles[{k}].theta_deg = {} outside (0, 180)", v.theta_deg)));
                }
                let s = VehicleState::new(v.theta_deg.to_radians(), v.distance_m, v.speed_mps);
                s.validate().map_err(|e| Error::Config(format!("vehicles[{k}]: {e}")))?;
                Ok(s)
            })
            .collect()
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let cfg = self.system_config()?;
        let layout = self.layout(&cfg)?;
        let vehicles = self.vehicles()?;
        let m = &self.motion;
        let motion = MotionModel {
            slot_duration: m.slot_duration_s,
            process_std: [m.theta_std_deg.to_radians(), m.distance_std_m, m.speed_std_mps],
            speed_increment: (m.speed_increment_mps[0], m.speed_increment_mps[1]),
        };
        let o = &self.objective;
        let objective = ObjectiveConfig {
            rho: o.rho,
            aleph: match o.aleph {
                AlephEntry::Normalized => AlephPolicy::Normalized,
                AlephEntry::Fixed(a) => AlephPolicy::Fixed(a),
            },
            thresholds: o.thresholds.map(|t| [t.theta_rad2, t.distance_m2, t.speed_m2ps2]),
        };
        let s = &self.solver;
        let scenario = Scenario {
            map: SubcarrierMap::contiguous(cfg.num_subcarriers, vehicles.len()),
            cfg,
            layout,
            vehicles,
            motion,
            horizon: m.horizon_slots,
            objective,
            solvers: Solvers { beam: s.beam, pga: s.pga, swarm: self.swarm, ao: s.ao, warm_start: s.warm_start },
            tracking: TrackingSettings { init_std: [m.init_theta_std_deg.to_radians(), m.init_distance_std_m, m.init_speed_std_mps], pcrlb: s.pcrlb, echo_noise: m.echo_noise },
            seed: self.output.seed,
            timing: self.output.timing,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Radar noise PSD at which a full-power echo from distance `d`, seen on
/// one transmit and one receive antenna, has the given SNR:
/// `γ² P_T / (η1 T_e)`.
pub fn radar_noise_for_snr(cfg: &SystemConfig, d: f64, snr_db: f64) -> Result<f64> {
    let g = channel_gains(cfg, d)?.gamma;
    Ok(g * g * cfg.total_power / (cfg.useful_duration * 10f64.powf(snr_db / 10.0)))
}

/// Reads, validates and converts a configuration file.
pub fn parse_config(path: &Path) -> Result<Scenario> {
    RunConfigFile::load(path)?.scenario()
}
