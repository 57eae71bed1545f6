use ma_isac::fim::*;
use ma_isac::linalg::min_eigenvalue;
use ma_isac::model::*;
use ma_isac::tracking::{MotionModel, TrackState};
use nalgebra::{DMatrix, DVector, Matrix3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Information of the noiseless echo by central differences in
/// `(cosθ, τ, μ)` of every target.
fn fd_fim_u(cfg: &SystemConfig, layout: &ArrayLayout, beams: &BeamformerSet, targets: &[EchoTarget]) -> DMatrix<f64> {
    let k = targets.len();
    let steps = [1e-7, 1e-13, 1e-2];
    let mut cols: Vec<DVector<Complex64>> = Vec::new();
    for t in 0..k {
        for c in 0..3 {
            let shift = |h: f64| {
                let mut ts = targets.to_vec();
                match c {
                    0 => ts[t].cos_theta += h,
                    1 => ts[t].delay += h,
                    _ => ts[t].doppler += h,
                }
                noiseless_echo_targets(cfg, layout, beams, &ts)
            };
            let h = steps[c];
            cols.push((shift(h) - shift(-h)) / Complex64::new(2.0 * h, 0.0));
        }
    }
    let var = noise_variances(cfg, beams);
    let per = layout.m_rx() * cfg.num_blocks;
    DMatrix::from_fn(3 * k, 3 * k, |a, b| {
        cols[a].iter().zip(cols[b].iter()).enumerate().map(|(r, (x, y))| (x.conj() * y).re / var[r / per]).sum()
    })
}

fn frob_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn random_instance(rng: &mut ChaCha8Rng, m_tx: usize, m_rx: usize, n: usize, q: usize, k: usize) -> (SystemConfig, ArrayLayout, BeamformerSet, Vec<VehicleState>) {
    let mut cfg = SystemConfig::reference();
    cfg.num_subcarriers = n;
    cfg.num_blocks = q;
    let lam = cfg.wavelength;
    let mut layout = ArrayLayout::half_wavelength(&cfg, m_tx, m_rx, 4.0 * lam).unwrap();
    for (l, p) in layout.tx.iter_mut().enumerate() {
        *p = l as f64 * 0.5 * lam + rng.random_range(0.0..0.4) * lam;
    }
    let vs: Vec<VehicleState> = (0..k).map(|_| VehicleState::new(rng.random_range(0.3..2.8), rng.random_range(50.0..500.0), rng.random_range(-30.0..30.0))).collect();
    let map = SubcarrierMap::contiguous(n, k);
    let beams = (0..n).map(|_| DVector::from_fn(m_tx, |_, _| Complex64::from_polar(1.0, rng.random_range(0.0..6.283)))).collect();
    let mut powers = DVector::from_fn(n, |_, _| rng.random_range(0.1..1.0));
    powers *= cfg.total_power / powers.sum();
    (cfg, layout, BeamformerSet { beams, powers, map }, vs)
}

#[test]
fn closed_form_fim_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let (cfg, layout, beams, vs) = random_instance(&mut rng, 4, 4, 8, 3, 1);
        let t = vs[0].echo_target(&cfg).unwrap();
        let fd = fd_fim_u(&cfg, &layout, &beams, &[t]);
        let closed = g_blocks(&cfg, &layout, &beams, &vs[0]).unwrap().u_fim(beams.powers.as_slice());
        let closed = DMatrix::from_fn(3, 3, |i, j| closed[(i, j)]);
        assert!(frob_rel(&closed, &fd) < 1e-4, "{}", frob_rel(&closed, &fd));
    }
}

#[test]
fn multi_vehicle_fim_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (cfg, layout, beams, vs) = random_instance(&mut rng, 4, 4, 8, 3, 2);
    let targets: Vec<EchoTarget> = vs.iter().map(|v| v.echo_target(&cfg).unwrap()).collect();
    let fd = fd_fim_u(&cfg, &layout, &beams, &targets);
    let direct = observed_fim_u(&cfg, &layout, &beams, &targets);
    assert!(frob_rel(&direct, &fd) < 1e-4);
}

#[test]
fn zeta_block_matches_chain_rule_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (cfg, layout, beams, vs) = random_instance(&mut rng, 4, 4, 8, 3, 1);
    let t = vs[0].echo_target(&cfg).unwrap();
    let fd = fd_fim_u(&cfg, &layout, &beams, &[t]);
    let fd = Matrix3::from_fn(|i, j| fd[(i, j)]);
    let q = chain_matrix(&cfg, &vs[0]);
    let expect = q * fd * q.transpose();
    let z = fim_zeta_block(&cfg, &g_blocks(&cfg, &layout, &beams, &vs[0]).unwrap(), &vs[0], beams.powers.as_slice());
    for i in 0..3 {
        for j in 0..3 {
            let scale = (expect[(i, i)] * expect[(j, j)]).sqrt();
            assert!((z.info[(i, j)] - expect[(i, j)]).abs() < 1e-4 * scale, "({i},{j})");
        }
    }
}

#[test]
fn delay_information_vanishes_on_subcarrier_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let (mut cfg, layout, beams, vs) = random_instance(&mut rng, 4, 4, 8, 3, 1);
    cfg.first_subcarrier_index = 0;
    let g = g_blocks(&cfg, &layout, &beams, &vs[0]).unwrap();
    assert_eq!(g.g22[0], 0.0);
    assert!(g.g22[1] > 0.0);
}

#[test]
fn doubling_receive_antennas_doubles_range_doppler_blocks() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let (cfg, layout, beams, vs) = random_instance(&mut rng, 4, 4, 8, 3, 1);
    let lam = cfg.wavelength;
    let mut big = layout.clone();
    big.rx_bounds.1 += 4.0 * lam;
    big.rx = (0..8).map(|l| big.rx_bounds.0 + l as f64 * 0.5 * lam).collect();
    let a = g_blocks(&cfg, &layout, &beams, &vs[0]).unwrap();
    let b = g_blocks(&cfg, &big, &beams, &vs[0]).unwrap();
    for n in 0..8 {
        assert!((b.g22[n] - 2.0 * a.g22[n]).abs() <= 1e-12 * a.g22[n].abs());
        assert!((b.g33[n] - 2.0 * a.g33[n]).abs() <= 1e-12 * a.g33[n].abs());
        assert!((b.g23[n] - 2.0 * a.g23[n]).abs() <= 1e-12 * a.g23[n].abs());
    }
}

#[test]
fn zero_power_zero_information() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let (cfg, layout, beams, vs) = random_instance(&mut rng, 4, 4, 8, 3, 1);
    let z = fim_zeta_block(&cfg, &g_blocks(&cfg, &layout, &beams, &vs[0]).unwrap(), &vs[0], &[0.0; 8]);
    assert_eq!(z.info, Matrix3::zeros());
    let b = lcrlb(&z);
    assert!(b.theta.is_infinite() && b.distance.is_infinite());
}

#[test]
fn static_vehicle_angle_information() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (cfg, layout, beams, mut vs) = random_instance(&mut rng, 4, 4, 8, 3, 1);
    vs[0].speed = 0.0;
    let g = g_blocks(&cfg, &layout, &beams, &vs[0]).unwrap();
    let p = beams.powers.as_slice();
    let z = fim_zeta_block(&cfg, &g, &vs[0], p);
    let s = vs[0].theta.sin();
    let e: f64 = g.g11.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() * s * s;
    assert!((z.info[(0, 0)] - e).abs() < 1e-12 * e);
}

#[test]
fn doubling_power_halves_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let (cfg, layout, beams, vs) = random_instance(&mut rng, 4, 4, 8, 3, 1);
    let g = g_blocks(&cfg, &layout, &beams, &vs[0]).unwrap();
    let p: Vec<f64> = beams.powers.iter().copied().collect();
    let p2: Vec<f64> = p.iter().map(|x| 2.0 * x).collect();
    let b1 = lcrlb(&fim_zeta_block(&cfg, &g, &vs[0], &p)).as_array();
    let b2 = lcrlb(&fim_zeta_block(&cfg, &g, &vs[0], &p2)).as_array();
    for i in 0..3 {
        assert!((b2[i] - 0.5 * b1[i]).abs() < 1e-12 * b1[i]);
    }
}

#[test]
fn receive_positions_do_not_touch_range_doppler_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let (cfg, layout, beams, vs) = random_instance(&mut rng, 4, 4, 8, 3, 1);
    let mut moved = layout.clone();
    moved.rx[2] += 0.13 * cfg.wavelength;
    let p = beams.powers.as_slice();
    let a = lcrlb(&fim_zeta_block(&cfg, &g_blocks(&cfg, &layout, &beams, &vs[0]).unwrap(), &vs[0], p));
    let b = lcrlb(&fim_zeta_block(&cfg, &g_blocks(&cfg, &moved, &beams, &vs[0]).unwrap(), &vs[0], p));
    assert_eq!(a.distance, b.distance);
    assert_eq!(a.speed, b.speed);
    assert_ne!(a.theta, b.theta);
}

#[test]
fn fig2_bounds_shrink_with_resources() {
    use ma_isac::config::RunConfigFile;
    use ma_isac::orchestrator::bound_table;
    let mut f = RunConfigFile::default();
    f.vehicles = vec![ma_isac::config::VehicleEntry { theta_deg: 12.0, distance_m: 410.0, speed_mps: 18.0 }];
    f.system.num_subcarriers = 16;
    f.system.echo_snr_db = Some(-5.0);
    let rows = bound_table(&f.scenario().unwrap()).unwrap();
    let base = rows[0].lcrlb[0];
    for r in &rows[1..] {
        let b = r.lcrlb[0];
        assert!(b.distance < base.distance && b.speed < base.speed, "{}", r.label);
    }
    let n2 = rows.iter().find(|r| r.label == "2x_n").unwrap().lcrlb[0];
    assert!((n2.theta - base.theta).abs() <= 1e-9 * base.theta);
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize, scale: &[f64]) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let m = &a * a.transpose() + DMatrix::identity(n, n) * 0.1;
    DMatrix::from_fn(n, n, |i, j| m[(i, j)] * scale[i % scale.len()] * scale[j % scale.len()])
}

#[test]
fn prior_reduces_to_inverse_covariance_without_motion() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let cov = random_spd(&mut rng, 3, &[1e-3, 0.5, 0.5]);
    let track = TrackState::from_vehicles(&[VehicleState::new(0.5, 400.0, 0.0)], cov.clone(), 0);
    let motion = MotionModel { slot_duration: 1e-300, process_std: [0.0; 3], speed_increment: (0.0, 0.0) };
    let pri = prior_fim(&track, &motion).unwrap();
    let expect = cov.clone().try_inverse().unwrap();
    assert!(frob_rel(&pri, &expect) < 1e-9);
}

#[test]
fn huge_process_noise_removes_prior() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let cov = random_spd(&mut rng, 3, &[1e-3, 0.5, 0.5]);
    let track = TrackState::from_vehicles(&[VehicleState::new(0.5, 400.0, 10.0)], cov, 0);
    let motion = MotionModel { slot_duration: 0.02, process_std: [1e6; 3], speed_increment: (0.0, 0.0) };
    assert!(prior_fim(&track, &motion).unwrap().norm() < 1e-10);
}

#[test]
fn prior_is_symmetric_positive_definite() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..10 {
        let cov = random_spd(&mut rng, 6, &[1e-3, 0.5, 0.5]);
        let vs = [VehicleState::new(0.3, 400.0, 20.0), VehicleState::new(0.4, 300.0, -8.0)];
        let track = TrackState::from_vehicles(&vs, cov, 0);
        let motion = MotionModel { slot_duration: 0.02, process_std: [1e-4, 0.1, 0.1], speed_increment: (-0.2, 0.2) };
        let p = prior_fim(&track, &motion).unwrap();
        assert!((&p - p.transpose()).norm() <= 1e-12 * p.norm());
        assert!(min_eigenvalue(&p) > 0.0);
    }
}

#[test]
fn lpcrlb_without_prior_is_lcrlb() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (cfg, layout, beams, vs) = random_instance(&mut rng, 4, 4, 8, 3, 1);
    let z = fim_zeta_block(&cfg, &g_blocks(&cfg, &layout, &beams, &vs[0]).unwrap(), &vs[0], beams.powers.as_slice());
    assert_eq!(lpcrlb(&z, &Matrix3::zeros(), 0).unwrap(), lcrlb(&z));
}

#[test]
fn lpcrlb_decouples_without_cross_terms() {
    let info = Matrix3::new(4.0, 0.3, 0.2, 0.3, 5.0, 0.0, 0.2, 0.0, 8.0);
    let prior = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0);
    let z = ZetaFim { info, chain: Matrix3::identity() };
    let b = lpcrlb(&z, &prior, 0).unwrap();
    assert!((b.theta - 0.2).abs() < 1e-15);
    assert!((b.distance - 1.0 / 6.0).abs() < 1e-15);
    assert!((b.speed - 0.1).abs() < 1e-15);
}

#[test]
fn non_pd_block_is_reported() {
    let z = ZetaFim { info: Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 2.0, 1.0), chain: Matrix3::identity() };
    assert!(matches!(lpcrlb(&z, &Matrix3::zeros(), 3), Err(ma_isac::Error::NonPdBound(3))));
}

#[test]
fn pcrlb_of_diagonal_information_is_reciprocal() {
    let obs = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0, 8.0]));
    let d = pcrlb_diag(&obs, &DMatrix::zeros(3, 3), PcrlbMode::Full).unwrap();
    for (x, e) in d[0].as_array().iter().zip([0.5, 0.25, 0.125]) {
        assert!((x - e).abs() < 1e-15);
    }
}

#[test]
fn bound_ordering_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..100 {
        let j = random_spd(&mut rng, 6, &[1e3, 1.0, 10.0]);
        let k0 = block(&j, 0);
        let lp = SensingInfo::from_matrix(&k0).bounds().as_array();
        let bd = pcrlb_diag(&j, &DMatrix::zeros(6, 6), PcrlbMode::BlockDiagonal).unwrap()[0].as_array();
        let full = pcrlb_diag(&j, &DMatrix::zeros(6, 6), PcrlbMode::Full).unwrap()[0].as_array();
        for i in 0..3 {
            assert!(lp[i] <= bd[i] * (1.0 + 1e-10) && bd[i] <= full[i] * (1.0 + 1e-10));
        }
    }
}

#[test]
fn observed_fim_is_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    for _ in 0..5 {
        let (cfg, layout, beams, vs) = random_instance(&mut rng, 4, 4, 8, 3, 2);
        let j = observed_fim(&cfg, &layout, &beams, &vs).unwrap();
        assert!(min_eigenvalue(&j) >= -1e-10 * j.norm());
        for k in 0..2 {
            let z = fim_zeta_block(&cfg, &g_blocks(&cfg, &layout, &beams, &vs[k]).unwrap(), &vs[k], beams.powers.as_slice());
            assert_eq!(block(&j, k), z.info);
        }
    }
}
