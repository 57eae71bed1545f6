mod common;

use common::{rel, small_problem};
use ma_isac::beamforming::{gaussian_randomize, sca_solve_qos, sca_solve_weighted, BeamSettings};
use ma_isac::model::{sum_rate, ArrayLayout, BeamformerSet};
use ma_isac::objective::{Thresholds, Weighted};
use ma_isac::orchestrator::beam_set;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

type CVec = DVector<Complex64>;

fn random_beams(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<CVec> {
    (0..n).map(|_| CVec::from_fn(m, |_, _| Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI)))).collect()
}

fn assert_unit_modulus(beams: &[CVec]) {
    for w in beams {
        for z in w.iter() {
            assert!((z.norm() - 1.0).abs() < 1e-12, "|w| = {}", z.norm());
        }
    }
}

#[test]
fn rate_only_weighting_reports_the_recovered_rate() {
    let prob = small_problem(4, 4, 8, 2);
    let scene = prob.scene().unwrap();
    let p = prob.uniform_powers();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let init = random_beams(&mut rng, 8, 4);
    let w = Weighted { rho: 1.0, aleph: [1.0; 3] };
    let sol = sca_solve_weighted(&scene, &p, &w, &init, &BeamSettings::default()).unwrap();
    let set = beam_set(&sol.beams, &p, &prob.map);
    let direct = sum_rate(&prob.cfg, &prob.layout, &set, &prob.vehicles).unwrap();
    assert!(rel(sol.value, direct) < 1e-12, "{} vs {}", sol.value, direct);
    // Matched beams reach |aᴴw|² = M², the rate maximum.
    let matched = BeamformerSet::matched(&prob.cfg, &prob.layout, &prob.vehicles, prob.map.clone()).unwrap();
    let best = sum_rate(&prob.cfg, &prob.layout, &BeamformerSet { powers: DVector::from_vec(p.clone()), ..matched }, &prob.vehicles).unwrap();
    assert!(rel(direct, best) < 1e-6, "{direct} vs {best}");
}

#[test]
fn single_transmit_antenna_is_forced() {
    let mut prob = small_problem(1, 4, 4, 1);
    prob.layout = ArrayLayout::half_wavelength(&prob.cfg, 1, 4, 4.0 * prob.cfg.wavelength).unwrap();
    let scene = prob.scene().unwrap();
    let p = prob.uniform_powers();
    let init = vec![CVec::from_element(1, Complex64::from_polar(1.0, 0.4)); 4];
    let sol = sca_solve_weighted(&scene, &p, &Weighted { rho: 0.5, aleph: [1.0; 3] }, &init, &BeamSettings::default()).unwrap();
    for (w, l) in sol.beams.iter().zip(&sol.lifted) {
        assert!((l[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((w[0].norm() - 1.0).abs() < 1e-12);
    }
    let e = scene.evaluate(&scene.stats(&init), &p);
    assert!(rel(sol.value, Weighted { rho: 0.5, aleph: [1.0; 3] }.value(&e)) < 1e-12);
}

#[test]
fn sca_trace_is_monotone_and_minorizing() {
    let prob = small_problem(8, 8, 32, 2);
    let scene = prob.scene().unwrap();
    let p = prob.uniform_powers();
    let aleph = prob.initial_aleph().unwrap();
    let init = prob.matched_beams(&prob.layout.tx).unwrap();
    let sol = sca_solve_weighted(&scene, &p, &Weighted { rho: 0.5, aleph }, &init, &BeamSettings::default()).unwrap();
    assert!(!sol.trace.is_empty());
    for (i, s) in sol.trace.iter().enumerate() {
        let tol = 1e-9 * s.before.abs().max(1.0);
        assert!(s.surrogate >= s.before - tol, "step {i}: surrogate {} < {}", s.surrogate, s.before);
        assert!(s.after >= s.surrogate - tol, "step {i}: objective {} < surrogate {}", s.after, s.surrogate);
    }
    for w in sol.trace.windows(2) {
        assert!((w[1].before - w[0].after).abs() <= 1e-12 * w[0].after.abs().max(1.0));
    }
}

#[test]
fn lifted_solutions_keep_unit_diagonal() {
    let prob = small_problem(4, 4, 8, 2);
    let scene = prob.scene().unwrap();
    let p = prob.uniform_powers();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let init = random_beams(&mut rng, 8, 4);
    let sol = sca_solve_weighted(&scene, &p, &Weighted { rho: 0.3, aleph: prob.initial_aleph().unwrap() }, &init, &BeamSettings::default()).unwrap();
    for l in &sol.lifted {
        for i in 0..4 {
            assert!((l[(i, i)].re - 1.0).abs() < 1e-9 && l[(i, i)].im.abs() < 1e-9);
        }
        assert!((l - l.adjoint()).norm() < 1e-12);
        assert!(l.clone().symmetric_eigen().eigenvalues.min() > -1e-9);
    }
    assert_unit_modulus(&sol.beams);
}

#[test]
fn objective_ignores_global_beam_phase() {
    let prob = small_problem(4, 4, 8, 2);
    let scene = prob.scene().unwrap();
    let p = prob.uniform_powers();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let beams = random_beams(&mut rng, 8, 4);
    let rotated: Vec<CVec> = beams.iter().map(|w| w * Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI))).collect();
    let a = scene.evaluate(&scene.stats(&beams), &p);
    let b = scene.evaluate(&scene.stats(&rotated), &p);
    assert!(rel(b.rate, a.rate) < 1e-12);
    for (x, y) in a.info.iter().zip(&b.info) {
        for (u, v) in x.reduced().iter().zip(y.reduced()) {
            assert!(rel(v, *u) < 1e-9);
        }
    }
}

#[test]
fn unbounded_thresholds_match_rate_only_weighting() {
    let prob = small_problem(4, 4, 8, 2);
    let scene = prob.scene().unwrap();
    let p = prob.uniform_powers();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let init = random_beams(&mut rng, 8, 4);
    let s = BeamSettings::default();
    let q = sca_solve_qos(&scene, &p, &Thresholds::unbounded(), &init, &s).unwrap();
    let w = sca_solve_weighted(&scene, &p, &Weighted { rho: 1.0, aleph: [0.0; 3] }, &init, &s).unwrap();
    assert!(rel(q.value, w.value) < 1e-6, "{} vs {}", q.value, w.value);
}

#[test]
fn thresholds_at_the_unconstrained_optimum_leave_it_unchanged() {
    let prob = small_problem(4, 4, 8, 2);
    let scene = prob.scene().unwrap();
    let p = prob.uniform_powers();
    let init = prob.matched_beams(&prob.layout.tx).unwrap();
    let s = BeamSettings::default();
    let free = sca_solve_qos(&scene, &p, &Thresholds::unbounded(), &init, &s).unwrap();
    let e = scene.evaluate(&scene.stats(&free.beams), &p);
    let mut th = [0.0f64; 3];
    for i in &e.info {
        let b = i.bounds().as_array();
        for j in 0..3 {
            th[j] = th[j].max(b[j]);
        }
    }
    let marginal = sca_solve_qos(&scene, &p, &Thresholds(th), &init, &s).unwrap();
    assert!(rel(marginal.value, free.value) < 1e-6, "{} vs {}", marginal.value, free.value);
}

#[test]
fn qos_solution_meets_the_thresholds_it_reports() {
    let prob = small_problem(4, 4, 8, 2);
    let scene = prob.scene().unwrap();
    let p = prob.uniform_powers();
    let init = prob.matched_beams(&prob.layout.tx).unwrap();
    let s = BeamSettings::default();
    let e = scene.evaluate(&scene.stats(&init), &p);
    let aleph = prob.initial_aleph().unwrap();
    let sensing = sca_solve_weighted(&scene, &p, &Weighted { rho: 0.0, aleph: [aleph[0], 0.0, 0.0] }, &init, &s).unwrap();
    let es = scene.evaluate(&scene.stats(&sensing.beams), &p);
    let worst = |e: &ma_isac::objective::Evaluation, j: usize| e.info.iter().map(|i| i.bounds().as_array()[j]).fold(0.0, f64::max);
    let (tr, ts) = (worst(&e, 0), worst(&es, 0));
    assert!(ts < tr, "angle-weighted design should sharpen the angle bound");
    // Angle threshold between the rate-optimal and angle-optimal designs.
    let th = [(tr * ts).sqrt(), 1.5 * worst(&e, 1).max(worst(&es, 1)), 1.5 * worst(&e, 2).max(worst(&es, 2))];
    let sol = sca_solve_qos(&scene, &p, &Thresholds(th), &init, &s).unwrap();
    assert_unit_modulus(&sol.beams);
    let got = scene.evaluate(&scene.stats(&sol.beams), &p);
    for i in &got.info {
        let b = i.bounds().as_array();
        for j in 0..3 {
            assert!(b[j] <= th[j] * 1.05, "bound {j}: {} > {}", b[j], th[j]);
        }
    }
    assert!(sol.value <= e.rate * (1.0 + 1e-9));
}

#[test]
fn unreachable_thresholds_name_a_constraint() {
    let prob = small_problem(4, 4, 8, 2);
    let scene = prob.scene().unwrap();
    let p = prob.uniform_powers();
    let init = prob.matched_beams(&prob.layout.tx).unwrap();
    let err = sca_solve_qos(&scene, &p, &Thresholds([1e-30, 1e-30, 1e-30]), &init, &BeamSettings::default()).unwrap_err();
    let inf = err.infeasibility().expect("infeasibility report");
    assert!(inf.margin < 0.0);
}

#[test]
fn randomization_of_scalar_is_one() {
    let w = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    for seed in 0..5 {
        assert_eq!(gaussian_randomize(&w, 20, seed, |x| x[0].re)[0], Complex64::new(1.0, 0.0));
    }
}

#[test]
fn randomization_recovers_rank_one_beam_up_to_phase() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let beam = random_beams(&mut rng, 1, 6).remove(0);
    let w = &beam * beam.adjoint();
    let out = gaussian_randomize(&w, 10, 4, |_| 0.0);
    let phase = out[0] / beam[0];
    for i in 0..6 {
        assert!((out[i] - beam[i] * phase).norm() < 1e-9);
    }
}

#[test]
fn randomization_is_deterministic_per_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let a = DMatrix::from_fn(4, 4, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let mut w = &a * a.adjoint();
    for i in 0..4 {
        let d = w[(i, i)].re.sqrt();
        for j in 0..4 {
            w[(i, j)] /= d;
            w[(j, i)] /= d;
        }
    }
    let score = |x: &CVec| (x[1] * x[2].conj()).re;
    let x = gaussian_randomize(&w, 50, 7, score);
    let y = gaussian_randomize(&w, 50, 7, score);
    assert_eq!(x, y);
    assert_unit_modulus(&[x]);
}

#[test]
fn two_antenna_design_is_near_phase_grid_optimum() {
    let mut prob = small_problem(2, 4, 1, 1);
    let lam = prob.cfg.wavelength;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..5 {
        prob.layout.tx = vec![0.0, rng.random_range(0.5..3.0) * lam];
        let scene = prob.scene().unwrap();
        let p = prob.uniform_powers();
        let aleph = prob.initial_aleph().unwrap();
        let obj = Weighted { rho: 0.5, aleph };
        let value = |w: &CVec| obj.value(&scene.evaluate(&scene.stats(std::slice::from_ref(w)), &p));
        let mut grid = f64::NEG_INFINITY;
        for a in 0..64 {
            for b in 0..64 {
                let w = CVec::from_vec(vec![Complex64::from_polar(1.0, a as f64 * PI / 32.0), Complex64::from_polar(1.0, b as f64 * PI / 32.0)]);
                grid = grid.max(value(&w));
            }
        }
        let init = random_beams(&mut rng, 1, 2);
        let sol = sca_solve_weighted(&scene, &p, &obj, &init, &BeamSettings::default()).unwrap();
        assert!(sol.value >= 0.98 * grid, "{} vs grid {}", sol.value, grid);
    }
}
