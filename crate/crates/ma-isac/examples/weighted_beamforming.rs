//! Successive convex approximation of the weighted rate/sensing beam design
//! from random unit-modulus starts, against the matched-beam baseline.

use ma_isac::beamforming::{sca_solve_weighted, BeamSettings};
use ma_isac::config::RunConfigFile;
use ma_isac::objective::Weighted;

fn main() -> ma_isac::Result<()> {
    let problem = RunConfigFile::default().scenario()?.first_slot()?;
    let scene = problem.scene()?;
    let powers = problem.uniform_powers();
    let matched = problem.matched_beams(&problem.layout.tx)?;
    let aleph = problem.initial_aleph()?;

    for rho in [0.0, 0.5, 1.0] {
        let w = Weighted { rho, aleph };
        let base = w.value(&scene.evaluate(&scene.stats(&matched), &powers));
        let sol = sca_solve_weighted(&scene, &powers, &w, &matched, &BeamSettings::default())?;
        println!(
            "rho {rho:.1}: matched {base:.6}, designed {:.6} (relaxed {:.6}) after {} SCA steps, rate {:.4}",
            sol.value,
            sol.relaxed_value,
            sol.trace.len(),
            scene.evaluate(&scene.stats(&sol.beams), &powers).rate
        );
    }
    Ok(())
}
