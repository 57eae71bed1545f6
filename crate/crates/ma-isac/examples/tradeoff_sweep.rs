//! Rate against aggregate sensing as the weighting factor goes from 0 to 1.

use ma_isac::config::RunConfigFile;
use ma_isac::fim::PcrlbMode;
use ma_isac::orchestrator::{run_tradeoff_sweep, Solvers};

fn main() -> ma_isac::Result<()> {
    let problem = RunConfigFile::default().scenario()?.first_slot()?;
    let aleph = problem.initial_aleph()?;
    let rhos: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let points = run_tradeoff_sweep(&problem, &rhos, aleph, &Solvers::default(), PcrlbMode::Full)?;
    println!(" rho   sum_rate   sensing   lpcrlb_theta  pcrlb_theta");
    for p in &points {
        println!("{:.1}  {:>9.5}  {:>8.5}   {:>12.4e}  {:>11.4e}", p.rho, p.sum_rate, p.sensing, p.lpcrlb[0].theta, p.pcrlb[0].theta);
    }
    Ok(())
}
