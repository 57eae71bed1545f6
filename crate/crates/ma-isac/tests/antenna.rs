mod common;

use common::{rel, small_config, small_problem};
use ma_isac::antenna::*;
use ma_isac::model::{steering_cos, ArrayLayout};
use ma_isac::objective::Weighted;
use ma_isac::orchestrator::SlotProblem;
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

type CVec = DVector<Complex64>;

fn random_beam(rng: &mut ChaCha8Rng, m: usize) -> CVec {
    CVec::from_fn(m, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn unit_beams(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<CVec> {
    (0..n).map(|_| CVec::from_fn(m, |_, _| Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI)))).collect()
}

fn random_powers(rng: &mut ChaCha8Rng, n: usize, budget: f64) -> Vec<f64> {
    let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let s: f64 = p.iter().sum();
    p.iter().map(|x| x * budget / s).collect()
}

fn crel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn is_feasible(p: &[f64], bounds: (f64, f64), sp: f64) -> bool {
    let tol = 1e-12 * bounds.1.abs().max(1.0);
    p.iter().all(|&x| x >= bounds.0 - tol && x <= bounds.1 + tol) && p.windows(2).all(|w| w[1] - w[0] >= sp - tol)
}

fn central_diff<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

fn vec_rel(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    d / b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300)
}

#[test]
fn real_forms_match_complex_quadratic_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let lam = 0.01;
    for _ in 0..100 {
        let m = rng.random_range(1..10);
        let pos: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..5.0) * lam).collect();
        let c = rng.random_range(-1.0..1.0);
        let w = random_beam(&mut rng, m);
        let a = steering_cos(&pos, c, lam);
        let lw = CVec::from_fn(m, |l, _| w[l] * pos[l]);
        let la = CVec::from_fn(m, |l, _| a[l] * pos[l]);
        let ahw = a.dotc(&w);
        let ahlw = a.dotc(&lw);
        let x = xi_terms(&TrigForms::new(&pos, c, lam, &w), &pos);
        assert!(rel(x.xi, ahw.norm_sqr()) < 1e-10);
        assert!(rel(x.xi1, ahlw.norm_sqr()) < 1e-10);
        // wᴴΛa·aᴴw and wᴴa·aᴴΛw
        assert!(crel(x.xi2, la.dotc(&w).conj() * ahw) < 1e-10);
        assert!(crel(x.xi3, ahw.conj() * ahlw) < 1e-10);
        assert!(crel(x.xi3, x.xi2.conj()) < 1e-12);
    }
}

#[test]
fn zero_position_operator_zeroes_derived_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pos = [0.0, 0.013, 0.021];
    let w = random_beam(&mut rng, 3);
    let x = xi_terms(&TrigForms::new(&pos, 0.4, 0.01, &w), &[0.0; 3]);
    assert_eq!(x.xi1, 0.0);
    assert_eq!(x.xi2, Complex64::new(0.0, 0.0));
    assert_eq!(x.xi3, Complex64::new(0.0, 0.0));
}

#[test]
fn scalar_form_is_beam_energy() {
    let w = CVec::from_vec(vec![Complex64::new(0.3, -1.2)]);
    let t = TrigForms::new(&[0.0], 0.7, 0.01, &w);
    let x = xi_terms(&t, &[0.0]);
    assert!(rel(x.xi, 0.3 * 0.3 + 1.2 * 1.2) < 1e-15);
}

#[test]
fn trig_matrices_have_the_right_symmetry() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pos: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..0.05)).collect();
    let t = TrigForms::new(&pos, 0.3, 0.01, &random_beam(&mut rng, 6));
    for l in 0..6 {
        assert!((t.f[l].powi(2) + t.s[l].powi(2) - 1.0).abs() < 1e-15);
    }
    let (a, u, tt, d) = (t.a(), t.u(), t.t(), t.d());
    assert_eq!(a.transpose(), a);
    assert_eq!(tt.transpose(), tt);
    assert_eq!(u.transpose(), -&u);
    assert_eq!(d.transpose(), -&d);
}

#[test]
fn rate_gradient_matches_finite_differences() {
    let mut p = small_problem(4, 4, 8, 1);
    let lam = p.cfg.wavelength;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..5 {
        p.layout.tx = (0..4).map(|l| l as f64 * 0.7 * lam + rng.random_range(0.0..0.2) * lam).collect();
        let scene = p.scene().unwrap();
        let beams = unit_beams(&mut rng, 8, 4);
        let powers = random_powers(&mut rng, 8, 1.0);
        let w = Weighted { rho: 1.0, aleph: [0.0; 3] };
        let g = grad_tx(&scene, &beams, &powers, &w);
        let fd = central_diff(|x| objective_tx(&scene.with_tx(x), &beams, &powers, &w), &scene.tx, 1e-7 * lam);
        assert!(vec_rel(&g, &fd) <= 1e-5, "{g:?} vs {fd:?}");
    }
}

#[test]
fn broadside_vehicle_leaves_beam_gain_flat() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pos = [0.0, 0.007, 0.02, 0.031];
    let t = TrigForms::new(&pos, (PI / 2.0).cos(), 0.01, &random_beam(&mut rng, 4));
    let g = xi_gradients(&t, &pos, 0.0, 0.01);
    assert!(g.xi.iter().all(|&x| x == 0.0));
    let mut f = small_config(4, 4, 8, 1);
    f.vehicles[0].theta_deg = 90.0;
    let p = f.scenario().unwrap().first_slot().unwrap();
    let scene = p.scene().unwrap();
    let beams = unit_beams(&mut rng, 8, 4);
    let rate_only = Weighted { rho: 1.0, aleph: [0.0; 3] };
    let g = grad_tx(&scene, &beams, &p.uniform_powers(), &rate_only);
    // cos(π/2) is 6e-17 in floating point, so compare with an oblique vehicle.
    let mut f = small_config(4, 4, 8, 1);
    f.vehicles[0].theta_deg = 60.0;
    let q = f.scenario().unwrap().first_slot().unwrap();
    let oblique = grad_tx(&q.scene().unwrap(), &beams, &q.uniform_powers(), &rate_only);
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(norm(&g) <= 1e-12 * norm(&oblique), "{g:?} vs {oblique:?}");
}

#[test]
fn weighted_gradient_matches_finite_differences() {
    let p = small_problem(8, 8, 32, 2);
    let lam = p.cfg.wavelength;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let aleph = p.initial_aleph().unwrap();
    let w = Weighted { rho: 0.5, aleph };
    for _ in 0..3 {
        let tx: Vec<f64> = (0..8).map(|l| l as f64 * 0.9 * lam + rng.random_range(0.0..0.3) * lam).collect();
        let scene = p.scene().unwrap().with_tx(&tx);
        let beams = unit_beams(&mut rng, 32, 8);
        let powers = random_powers(&mut rng, 32, 1.0);
        let g = grad_tx(&scene, &beams, &powers, &w);
        let fd = central_diff(|x| objective_tx(&scene.with_tx(x), &beams, &powers, &w), &tx, 1e-6 * lam);
        assert!(vec_rel(&g, &fd) <= 1e-4, "{}", vec_rel(&g, &fd));
    }
}

#[test]
fn feasible_candidates_are_unchanged() {
    let lam = 0.01;
    let c = [0.0, 0.6 * lam, 2.0 * lam, 3.5 * lam];
    assert_eq!(project_tx(&c, (0.0, 4.0 * lam), lam / 2.0, TxAnchor::LowerBound).unwrap(), c.to_vec());
    assert_eq!(project_rx(&c, (0.0, 4.0 * lam), lam / 2.0).unwrap(), c.to_vec());
}

#[test]
fn below_range_first_element_is_lifted_to_the_lower_bound() {
    let lam = 0.01;
    let out = project_tx(&[-lam, lam, 2.0 * lam], (0.0, 4.0 * lam), lam / 2.0, TxAnchor::LowerBound).unwrap();
    assert_eq!(out, vec![0.0, lam, 2.0 * lam]);
    // Literal upper anchor pushes the first element to the top of its envelope.
    let out = project_tx(&[-lam, lam, 2.0 * lam], (0.0, 4.0 * lam), lam / 2.0, TxAnchor::UpperBound).unwrap();
    assert!(out[0] >= 3.0 * lam - 1e-15);
}

#[test]
fn projections_always_yield_feasible_arrays() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let lam = 0.01;
    for _ in 0..1000 {
        let m = rng.random_range(1..9);
        let sp = lam / 2.0;
        let lo = rng.random_range(-2.0..2.0) * lam;
        let hi = lo + (m as f64 - 1.0) * sp + rng.random_range(0.0..6.0) * lam;
        let cand: Vec<f64> = (0..m).map(|_| rng.random_range(lo - 2.0 * lam..hi + 2.0 * lam)).collect();
        for out in [project_tx(&cand, (lo, hi), sp, TxAnchor::LowerBound).unwrap(), project_rx(&cand, (lo, hi), sp).unwrap(), project_exact(&cand, (lo, hi), sp).unwrap()] {
            assert!(is_feasible(&out, (lo, hi), sp), "{cand:?} -> {out:?}");
        }
    }
}

#[test]
fn projections_are_idempotent() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let lam = 0.01;
    for _ in 0..300 {
        let m = rng.random_range(1..9);
        let b = (0.0, 8.0 * lam);
        let cand: Vec<f64> = (0..m).map(|_| rng.random_range(-lam..9.0 * lam)).collect();
        let a = project_tx(&cand, b, lam / 2.0, TxAnchor::LowerBound).unwrap();
        assert_eq!(project_tx(&a, b, lam / 2.0, TxAnchor::LowerBound).unwrap(), a);
        let r = project_rx(&cand, b, lam / 2.0).unwrap();
        assert_eq!(project_rx(&r, b, lam / 2.0).unwrap(), r);
        let e = project_exact(&cand, b, lam / 2.0).unwrap();
        let e2 = project_exact(&e, b, lam / 2.0).unwrap();
        assert!(e.iter().zip(&e2).all(|(x, y)| (x - y).abs() < 1e-15));
    }
}

#[test]
fn exact_projection_is_no_farther_than_sequential_clamps() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let lam = 0.01;
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    for _ in 0..300 {
        let m = rng.random_range(1..9);
        let b = (0.0, 8.0 * lam);
        let cand: Vec<f64> = (0..m).map(|_| rng.random_range(-lam..9.0 * lam)).collect();
        let e = project_exact(&cand, b, lam / 2.0).unwrap();
        let t = project_tx(&cand, b, lam / 2.0, TxAnchor::LowerBound).unwrap();
        assert!(dist(&e, &cand) <= dist(&t, &cand) * (1.0 + 1e-12) + 1e-30);
    }
}

#[test]
fn too_small_region_is_a_configuration_error() {
    assert!(project_rx(&[0.0, 0.1, 0.2], (0.0, 0.5), 0.5).is_err());
    assert!(project_exact(&[0.0, 0.1, 0.2], (0.0, 0.5), 0.5).is_err());
}

#[test]
fn stationary_start_is_returned() {
    let mut f = small_config(4, 4, 8, 1);
    f.vehicles[0].theta_deg = 90.0;
    let p = f.scenario().unwrap().first_slot().unwrap();
    let scene = p.scene().unwrap();
    let beams = p.matched_beams(&p.layout.tx).unwrap();
    let w = Weighted { rho: 1.0, aleph: [0.0; 3] };
    let out = pga_tx(&scene, p.layout.tx_bounds, p.layout.min_spacing, &beams, &p.uniform_powers(), &w, &PgaConfig::default()).unwrap();
    assert_eq!(out.positions, p.layout.tx);
    assert_eq!(out.trace.len(), 1);
}

/// Seven-wavelength regions with the transmit ULA at the top of its region.
fn seven_lambda_problem() -> SlotProblem {
    let mut f = small_config(8, 8, 32, 2);
    f.array.region_lambda = 7.0;
    let mut p = f.scenario().unwrap().first_slot().unwrap();
    let (hi, sp) = (p.layout.tx_bounds.1, p.layout.min_spacing);
    p.layout.tx = (0..8).map(|l| hi - (7 - l) as f64 * sp).collect();
    p
}

#[test]
fn transmit_ascent_beats_the_half_wavelength_array() {
    let p = seven_lambda_problem();
    let scene = p.scene().unwrap();
    let beams = p.matched_beams(&p.layout.tx).unwrap();
    let powers = p.uniform_powers();
    let w = Weighted { rho: 0.5, aleph: p.initial_aleph().unwrap() };
    let start = objective_tx(&scene, &beams, &powers, &w);
    for exact_projection in [false, true] {
        let cfg = PgaConfig { exact_projection, ..PgaConfig::default() };
        let out = pga_tx(&scene, p.layout.tx_bounds, p.layout.min_spacing, &beams, &powers, &w, &cfg).unwrap();
        assert!(out.trace.last().copied().unwrap() > start, "{:?}", out.trace);
        assert!(out.trace.windows(2).all(|t| t[1] >= t[0]));
        assert!(is_feasible(&out.positions, p.layout.tx_bounds, p.layout.min_spacing));
        assert!((out.trace[0] - start).abs() <= 1e-15 * start.abs());
    }
}

#[test]
fn transmit_ascent_stops_at_the_region_floor() {
    // Angle information grows with the transmit/receive separation, so an
    // array packed at the bottom of its region is already stationary.
    let mut f = small_config(8, 8, 32, 2);
    f.array.region_lambda = 7.0;
    let p = f.scenario().unwrap().first_slot().unwrap();
    let scene = p.scene().unwrap();
    let beams = p.matched_beams(&p.layout.tx).unwrap();
    let w = Weighted { rho: 0.5, aleph: p.initial_aleph().unwrap() };
    let g = grad_tx(&scene, &beams, &p.uniform_powers(), &w);
    assert!(g.iter().all(|&x| x < 0.0));
    let out = pga_tx(&scene, p.layout.tx_bounds, p.layout.min_spacing, &beams, &p.uniform_powers(), &w, &PgaConfig::default()).unwrap();
    assert_eq!(out.positions, p.layout.tx);
}

#[test]
fn receive_positions_do_not_move_distance_or_speed_bounds() {
    let p = small_problem(4, 4, 8, 2);
    let scene = p.scene().unwrap();
    let beams = p.matched_beams(&p.layout.tx).unwrap();
    let powers = p.uniform_powers();
    let stats = scene.stats(&beams);
    let a = scene.evaluate(&stats, &powers);
    let lam = p.cfg.wavelength;
    let moved: Vec<f64> = p.layout.rx.iter().enumerate().map(|(l, x)| x + (l as f64 * 0.3 + 0.1) * lam).collect();
    let b = scene.with_rx(&moved).evaluate(&stats, &powers);
    for (x, y) in a.info.iter().zip(&b.info) {
        let (bx, by) = (x.bounds(), y.bounds());
        assert!(rel(by.distance, bx.distance) < 1e-12);
        assert!(rel(by.speed, bx.speed) < 1e-12);
        assert!(rel(by.theta, bx.theta) > 1e-6);
    }
}

#[test]
fn receive_gradient_matches_finite_differences() {
    let p = small_problem(4, 6, 8, 2);
    let scene = p.scene().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let beams = unit_beams(&mut rng, 8, 4);
    let powers = random_powers(&mut rng, 8, 1.0);
    let lam = p.cfg.wavelength;
    let rx: Vec<f64> = p.layout.rx.iter().map(|x| x + rng.random_range(0.0..0.4) * lam).collect();
    let g = grad_rx(&scene, &beams, &powers, &rx);
    let fd = central_diff(|x| objective_rx(&scene.with_rx(x), &beams, &powers), &rx, 1e-5 * lam);
    assert!(vec_rel(&g, &fd) <= 1e-5, "{g:?} vs {fd:?}");
}

#[test]
fn two_element_receive_ascent_reaches_grid_optimum() {
    let mut f = small_config(4, 2, 8, 2);
    f.array.region_lambda = 3.0;
    let p = f.scenario().unwrap().first_slot().unwrap();
    let scene = p.scene().unwrap();
    let beams = p.matched_beams(&p.layout.tx).unwrap();
    let powers = p.uniform_powers();
    let (lo, hi) = p.layout.rx_bounds;
    let sp = p.layout.min_spacing;
    let step = p.cfg.wavelength / 50.0;
    let pts = ((hi - lo) / step).round() as usize;
    let mut grid = f64::NEG_INFINITY;
    for i in 0..=pts {
        for j in i..=pts {
            let x = [lo + i as f64 * step, lo + j as f64 * step];
            if x[1] - x[0] >= sp - 1e-12 {
                grid = grid.max(objective_rx(&scene.with_rx(&x), &beams, &powers));
            }
        }
    }
    let out = pga_rx(&scene, &p.layout.rx, p.layout.rx_bounds, sp, &beams, &powers, &PgaConfig { max_iterations: 500, ..PgaConfig::default() }).unwrap();
    let got = *out.trace.last().unwrap();
    assert!(got >= 0.99 * grid, "{got} vs grid {grid}");
    assert!(out.trace.windows(2).all(|t| t[1] >= t[0]));
    assert!(is_feasible(&out.positions, p.layout.rx_bounds, sp));
}

#[test]
fn layout_validation_rejects_crowded_arrays() {
    let cfg = small_problem(2, 2, 4, 1).cfg;
    let mut l = ArrayLayout::half_wavelength(&cfg, 2, 2, 3.0 * cfg.wavelength).unwrap();
    l.tx[1] = l.tx[0] + 0.2 * cfg.wavelength;
    assert!(l.validate().is_err());
}
