//! Information-form EKF over noisy echoes with matched beams, printing the
//! estimate error against the posterior bound each slot.

use ma_isac::fim::{observed_fim, pcrlb_diag, PcrlbMode};
use ma_isac::model::{synth_echo, ArrayLayout, BeamformerSet, SubcarrierMap, SystemConfig, VehicleState};
use ma_isac::tracking::{predict, propagate_random, update, MotionModel, TrackState};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ma_isac::Result<()> {
    let cfg = SystemConfig::reference();
    let layout = ArrayLayout::half_wavelength(&cfg, 8, 8, 9.0 * cfg.wavelength)?;
    let motion = MotionModel { slot_duration: 0.02, process_std: [1e-4, 0.1, 0.1], speed_increment: (-0.2, 0.2) };
    let mut truth = vec![VehicleState::new(9.2f64.to_radians(), 400.0, 20.0), VehicleState::new(12f64.to_radians(), 410.0, 18.0)];
    let start: Vec<VehicleState> = truth.iter().map(|v| VehicleState::new(v.theta + 5e-4, v.distance + 0.5, v.speed - 0.5)).collect();
    let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![1e-6, 0.25, 0.25, 1e-6, 0.25, 0.25]));
    let mut track = TrackState::from_vehicles(&start, cov, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    println!("slot  err_theta    err_d      err_nu     pcrlb_theta  pcrlb_d    pcrlb_nu");
    for slot in 1..=10u64 {
        let pred = predict(&track, &motion)?;
        truth = propagate_random(&truth, &motion, &mut rng)?;
        let beams = BeamformerSet::matched(&cfg, &layout, &pred.vehicles(), SubcarrierMap::contiguous(cfg.num_subcarriers, 2))?;
        let echo = synth_echo(&cfg, &layout, &beams, &truth, Some(slot))?;
        track = update(&pred, &echo, &cfg, &layout, &beams)?;
        let bound = pcrlb_diag(&observed_fim(&cfg, &layout, &beams, &pred.vehicles())?, &pred.information()?, PcrlbMode::Full)?;
        let (e, t) = (track.vehicles()[0], truth[0]);
        println!(
            "{slot:>4}  {:>9.2e}  {:>9.2e}  {:>9.2e}  {:>11.2e}  {:>9.2e}  {:>9.2e}",
            (e.theta - t.theta).abs(),
            (e.distance - t.distance).abs(),
            (e.speed - t.speed).abs(),
            bound[0].theta,
            bound[0].distance,
            bound[0].speed
        );
    }
    Ok(())
}
