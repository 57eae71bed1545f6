//! LCRLB and LPCRLB of one vehicle as the receive array, the subcarrier
//! count and the block count are doubled in turn.
//!
//! Pass a config path to override the built-in setup, e.g.
//! `cargo run --example sensing_bounds -- configs/fig2.json`.

use ma_isac::config::{parse_config, RunConfigFile, VehicleEntry};
use ma_isac::orchestrator::bound_table;

fn main() -> ma_isac::Result<()> {
    let scenario = match std::env::args().nth(1) {
        Some(p) => parse_config(p.as_ref())?,
        None => {
            let mut f = RunConfigFile::default();
            f.vehicles = vec![VehicleEntry { theta_deg: 12.0, distance_m: 410.0, speed_mps: 18.0 }];
            f.system.num_subcarriers = 16;
            f.system.echo_snr_db = Some(-5.0);
            f.scenario()?
        }
    };
    println!("{:>8} {:>5} {:>4} {:>3}  {:>11} {:>11} {:>11}  {:>11}", "variant", "M_rx", "N", "Q", "theta", "d", "nu", "theta(post)");
    for r in bound_table(&scenario)? {
        let (b, p) = (r.lcrlb[0], r.lpcrlb[0]);
        println!(
            "{:>8} {:>5} {:>4} {:>3}  {:>11.3e} {:>11.3e} {:>11.3e}  {:>11.3e}",
            r.label, r.m_rx, r.num_subcarriers, r.num_blocks, b.theta, b.distance, b.speed, p.theta
        );
    }
    Ok(())
}
