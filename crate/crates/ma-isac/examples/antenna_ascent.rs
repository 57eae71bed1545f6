//! Projected gradient ascent on transmit and receive positions at fixed
//! beams and powers.

use ma_isac::antenna::{objective_rx, objective_tx, pga_rx, pga_tx, PgaConfig};
use ma_isac::config::RunConfigFile;
use ma_isac::objective::Weighted;

fn main() -> ma_isac::Result<()> {
    let mut f = RunConfigFile::default();
    f.array.region_lambda = 7.0;
    let mut problem = f.scenario()?.first_slot()?;
    let lam = problem.cfg.wavelength;
    let (lo, hi) = problem.layout.tx_bounds;
    // Start the transmit array at the top of its region.
    let m = problem.layout.m_tx();
    problem.layout.tx = (0..m).map(|l| hi - (m - 1 - l) as f64 * lam / 2.0).collect();

    let scene = problem.scene()?;
    let beams = problem.matched_beams(&problem.layout.tx)?;
    let powers = problem.uniform_powers();
    let w = Weighted { rho: 0.5, aleph: problem.initial_aleph()? };
    let cfg = PgaConfig::default();

    let tx = pga_tx(&scene, (lo, hi), problem.layout.min_spacing, &beams, &powers, &w, &cfg)?;
    println!(
        "transmit: objective {:.6} -> {:.6} in {} iterations",
        objective_tx(&scene, &beams, &powers, &w),
        objective_tx(&scene.with_tx(&tx.positions), &beams, &powers, &w),
        tx.iterations
    );
    let rx = pga_rx(&scene, &problem.layout.rx, problem.layout.rx_bounds, problem.layout.min_spacing, &beams, &powers, &cfg)?;
    println!(
        "receive: angle information {:.4e} -> {:.4e} in {} iterations",
        objective_rx(&scene, &beams, &powers),
        objective_rx(&scene.with_rx(&rx.positions), &beams, &powers),
        rx.iterations
    );
    let offsets: Vec<String> = rx.positions.iter().map(|p| format!("{:.2}", (p - problem.layout.rx_bounds.0) / lam)).collect();
    println!("receive positions (wavelengths from region start): {}", offsets.join(" "));
    Ok(())
}
