//! Weighted alternating optimization of beams, powers and both arrays,
//! compared with the same loop on fixed arrays.

use ma_isac::config::RunConfigFile;
use ma_isac::orchestrator::{run_p1_ao, Solvers};

fn main() -> ma_isac::Result<()> {
    let dmax: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(9.0);
    let mut f = RunConfigFile::default();
    f.array.region_lambda = dmax;
    let problem = f.scenario()?.first_slot()?;
    let aleph = problem.initial_aleph()?;

    let movable = run_p1_ao(&problem, 0.5, aleph, &Solvers::default())?;
    let mut locked = Solvers::default();
    locked.ao.move_tx = false;
    locked.ao.move_rx = false;
    let fixed = run_p1_ao(&problem, 0.5, aleph, &locked)?;

    println!("region {dmax} wavelengths, aleph ({:.3e}, {:.3e}, {:.3e})", aleph[0], aleph[1], aleph[2]);
    for (name, o) in [("movable", &movable), ("fixed", &fixed)] {
        println!(
            "{name:>8}: objective {:.6} after {} outer iterations, rate {:.4}",
            o.trace.last().unwrap(),
            o.iterations(),
            o.evaluation.rate
        );
    }
    println!("objective trace: {:?}", movable.trace.iter().map(|x| format!("{x:.5}")).collect::<Vec<_>>());
    Ok(())
}
