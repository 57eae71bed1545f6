#![allow(dead_code)]

use ma_isac::config::RunConfigFile;
use ma_isac::orchestrator::{Scenario, SlotProblem};

/// Default configuration shrunk to the given sizes, keeping the first `k`
/// default vehicles.
pub fn small_config(m_tx: usize, m_rx: usize, n: usize, k: usize) -> RunConfigFile {
    let mut f = RunConfigFile::default();
    f.array.num_tx = m_tx;
    f.array.num_rx = m_rx;
    f.system.num_subcarriers = n;
    f.vehicles.truncate(k);
    f
}

pub fn small_scenario(m_tx: usize, m_rx: usize, n: usize, k: usize) -> Scenario {
    small_config(m_tx, m_rx, n, k).scenario().expect("valid scenario")
}

pub fn small_problem(m_tx: usize, m_rx: usize, n: usize, k: usize) -> SlotProblem {
    small_scenario(m_tx, m_rx, n, k).first_slot().expect("valid slot")
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
