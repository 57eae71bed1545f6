//! Swarm search over transmit layouts, scoring each by the rate of the
//! thresholded beam/power design.

use ma_isac::beamforming::BeamSettings;
use ma_isac::config::RunConfigFile;
use ma_isac::objective::Thresholds;
use ma_isac::orchestrator::solve_qos_joint;
use ma_isac::pso::{fitness, run_rpdpso, SearchBox, SwarmConfig};

fn main() -> ma_isac::Result<()> {
    let mut f = RunConfigFile::default();
    f.array.num_tx = 4;
    f.array.num_rx = 4;
    f.system.num_subcarriers = 8;
    let problem = f.scenario()?.first_slot()?;
    let scene = problem.scene()?;
    let lay = &problem.layout;
    let bounds = SearchBox { lo: lay.tx_bounds.0, hi: lay.tx_bounds.1, min_spacing: lay.min_spacing };
    let thresholds = Thresholds([2e-4, 0.05, 1.0]);
    let cfg = SwarmConfig { seed: 3, ..SwarmConfig::default() };

    let out = run_rpdpso(&cfg, &bounds, lay.m_tx(), &[lay.tx.clone()], |pos| {
        fitness(pos, lay.min_spacing, cfg.penalty, |sorted| {
            let init = problem.matched_beams(sorted).ok()?;
            solve_qos_joint(&scene.with_tx(sorted), &thresholds, problem.cfg.total_power, &BeamSettings::default(), &init).ok().map(|d| d.evaluation.rate)
        })
    })?;
    let lam = problem.cfg.wavelength;
    let pos: Vec<String> = out.best_position.iter().map(|p| format!("{:.2}", p / lam)).collect();
    println!("best layout (wavelengths): {}", pos.join(" "));
    println!("rate {:.6} after {} evaluations", -out.best_fitness, out.evaluations);
    println!("global best per iteration: {:?}", out.trace.iter().map(|f| format!("{:.5}", -f)).collect::<Vec<_>>());
    Ok(())
}
