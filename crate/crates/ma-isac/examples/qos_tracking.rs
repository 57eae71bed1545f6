//! Two-stage tracking loop (swarm pre-optimization on the predicted
//! channel, then a refit) against the fixed half-wavelength array.

use ma_isac::config::RunConfigFile;
use ma_isac::orchestrator::{baseline_ulah, run_two_stage};

fn main() -> ma_isac::Result<()> {
    let mut f = RunConfigFile::default();
    f.array.num_tx = 4;
    f.array.num_rx = 4;
    f.system.num_subcarriers = 8;
    f.motion.horizon_slots = 3;
    let scenario = f.scenario()?;

    let ma = run_two_stage(&scenario)?;
    let ula = baseline_ulah(&scenario)?;
    println!("slot  rate(swarm)  rate(ULA)   lpcrlb_theta  lpcrlb_d   lpcrlb_nu  feasible");
    for (a, b) in ma.iter().zip(&ula) {
        let l = a.lpcrlb[0];
        println!("{:>4}  {:>11.6}  {:>9.6}   {:>12.3e}  {:>9.3e}  {:>9.3e}  {}", a.slot, a.sum_rate, b.sum_rate, l.theta, l.distance, l.speed, a.feasible);
    }
    Ok(())
}
