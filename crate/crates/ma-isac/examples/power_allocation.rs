//! Water-filling, the thresholded interior-point power step and the
//! weighted power step on one slot's matched beams.

use ma_isac::config::RunConfigFile;
use ma_isac::objective::{Thresholds, Weighted};
use ma_isac::power::{solve_power_qos, solve_power_weighted, waterfill, PowerProblem};

fn main() -> ma_isac::Result<()> {
    let problem = RunConfigFile::default().scenario()?.first_slot()?;
    let scene = problem.scene()?;
    let terms = scene.power_terms(&scene.stats(&problem.matched_beams(&problem.layout.tx)?));
    let budget = problem.cfg.total_power;

    let wf = waterfill(&terms.rate_gains, budget, 0.0);
    let active = wf.powers.iter().filter(|p| **p > 0.0).count();
    println!("water-filling: {active} of {} carriers active, {} iterations", wf.powers.len(), wf.iterations);

    let qos = solve_power_qos(&PowerProblem { terms: terms.clone(), budget, thresholds: Thresholds([2e-4, 0.05, 1.0]) })?;
    let max_gap = qos.powers.iter().zip(&wf.powers).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("thresholded step: largest deviation from water-filling {max_gap:.2e} W");

    let aleph = problem.initial_aleph()?;
    for rho in [0.0, 0.5] {
        let sol = solve_power_weighted(&terms, budget, &Weighted { rho, aleph });
        let p: Vec<String> = sol.powers.iter().take(4).map(|x| format!("{x:.4}")).collect();
        println!("weighted rho {rho}: first powers [{}]", p.join(", "));
    }
    Ok(())
}
