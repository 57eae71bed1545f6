//! Antenna position optimization by projected gradient ascent.
//!
//! Beam quadratic forms are written in real trigonometric form so their
//! position gradients are explicit. Projections keep each array ordered,
//! inside its region and at least the minimum spacing apart.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fim::BeamStats;
use crate::objective::{Scene, Weighted};

/// Real decomposition of one steering vector and one beam.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigForms {
    /// `cos(2π p cosθ/λ)` per element.
    pub f: DVector<f64>,
    /// `sin(2π p cosθ/λ)` per element.
    pub s: DVector<f64>,
    /// Real part of the beam.
    pub re: DVector<f64>,
    /// Imaginary part of the beam.
    pub im: DVector<f64>,
}

impl TrigForms {
    pub fn new(positions: &[f64], cos_theta: f64, wavelength: f64, w: &DVector<Complex64>) -> TrigForms {
        let k = 2.0 * std::f64::consts::PI * cos_theta / wavelength;
        TrigForms {
            f: DVector::from_iterator(positions.len(), positions.iter().map(|p| (k * p).cos())),
            s: DVector::from_iterator(positions.len(), positions.iter().map(|p| (k * p).sin())),
            re: w.map(|z| z.re),
            im: w.map(|z| z.im),
        }
    }

    /// `f fᵀ + s sᵀ`
    pub fn a(&self) -> DMatrix<f64> {
        &self.f * self.f.transpose() + &self.s * self.s.transpose()
    }

    /// `f sᵀ − s fᵀ`
    pub fn u(&self) -> DMatrix<f64> {
        &self.f * self.s.transpose() - &self.s * self.f.transpose()
    }

    /// `ħ ħᵀ + ð ðᵀ`
    pub fn t(&self) -> DMatrix<f64> {
        &self.re * self.re.transpose() + &self.im * self.im.transpose()
    }

    /// `ħ ðᵀ − ð ħᵀ`
    pub fn d(&self) -> DMatrix<f64> {
        &self.re * self.im.transpose() - &self.im * self.re.transpose()
    }
}

/// `|aᴴw|²`, `|aᴴΛw|²`, `wᴴΛ a aᴴ w` and `wᴴ a aᴴ Λ w`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XiTerms {
    pub xi: f64,
    pub xi1: f64,
    pub xi2: Complex64,
    pub xi3: Complex64,
}

fn quad(x: &DVector<f64>, m: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    x.dot(&(m * y))
}

/// The four beam quadratic forms evaluated from their real trigonometric
/// expansions, with `Λ = diag(positions)`.
pub fn xi_terms(trig: &TrigForms, positions: &[f64]) -> XiTerms {
    let lam = DMatrix::from_diagonal(&DVector::from_column_slice(positions));
    let (f, s, h, e) = (&trig.f, &trig.s, &trig.re, &trig.im);
    let (a, u, t, d) = (trig.a(), trig.u(), trig.t(), trig.d());
    let xi = quad(f, &t, f) + quad(s, &t, s) + 2.0 * quad(f, &d, s);
    let ltl = &lam * &t * &lam;
    let ldl = &lam * &d * &lam;
    let xi1 = quad(f, &ltl, f) + quad(s, &ltl, s) + 2.0 * quad(f, &ldl, s);
    let j = Complex64::new(0.0, 1.0);
    let cq = |x: &DVector<f64>, re: &DMatrix<f64>, imag: &DMatrix<f64>, y: &DVector<f64>| quad(x, re, y) + j * quad(x, imag, y);
    let la = &lam * &a;
    let lu = &lam * &u;
    let xi2 = cq(h, &la, &(-&lu), h) + cq(e, &la, &(-&lu), e) + cq(h, &lu, &la, e) - cq(e, &lu, &la, h);
    let al = &a * &lam;
    let ul = &u * &lam;
    let xi3 = cq(h, &al, &(-&ul), h) + cq(e, &al, &(-&ul), e) + cq(h, &ul, &al, e) - cq(e, &ul, &al, h);
    XiTerms { xi, xi1, xi2, xi3 }
}

/// Position gradients of `ξ`, `ξ1` and `Re(ξ2)` for one steering/beam pair.
#[derive(Clone, Debug, PartialEq)]
pub struct XiGradients {
    pub xi: DVector<f64>,
    pub xi1: DVector<f64>,
    pub xi2: DVector<f64>,
}

/// Gradients through the diagonal derivative factors of `f`, `s`, `Λf`, `Λs`.
pub fn xi_gradients(trig: &TrigForms, positions: &[f64], cos_theta: f64, wavelength: f64) -> XiGradients {
    let m = positions.len();
    let kap = 2.0 * std::f64::consts::PI * cos_theta / wavelength;
    let (f, s, h, e) = (&trig.f, &trig.s, &trig.re, &trig.im);
    // T x = ħ(ħ·x) + ð(ð·x), D x = ħ(ð·x) − ð(ħ·x).
    let tx = |x: &DVector<f64>| h * h.dot(x) + e * e.dot(x);
    let dx = |x: &DVector<f64>| h * e.dot(x) - e * h.dot(x);
    let lf = DVector::from_fn(m, |l, _| positions[l] * f[l]);
    let ls = DVector::from_fn(m, |l, _| positions[l] * s[l]);
    let om1 = DVector::from_fn(m, |l, _| -kap * s[l]);
    let om2 = DVector::from_fn(m, |l, _| kap * f[l]);
    let om3 = DVector::from_fn(m, |l, _| f[l] - kap * positions[l] * s[l]);
    let om4 = DVector::from_fn(m, |l, _| s[l] + kap * positions[l] * f[l]);
    let g_xi = (om1.component_mul(&(tx(f) + dx(s))) + om2.component_mul(&(tx(s) - dx(f)))) * 2.0;
    let g_xi1 = (om3.component_mul(&(tx(&lf) + dx(&ls))) + om4.component_mul(&(tx(&ls) - dx(&lf)))) * 2.0;
    // Re(conj(aᴴw)·aᴴΛw) differentiated entry by entry.
    let w: Vec<Complex64> = (0..m).map(|l| Complex64::new(h[l], e[l])).collect();
    let ac: Vec<Complex64> = (0..m).map(|l| Complex64::new(f[l], -s[l])).collect();
    let sv: Complex64 = (0..m).map(|l| ac[l] * w[l]).sum();
    let tv: Complex64 = (0..m).map(|l| ac[l] * w[l] * positions[l]).sum();
    let j = Complex64::new(0.0, 1.0);
    let g_xi2 = DVector::from_fn(m, |l, _| {
        let ds = -j * kap * ac[l] * w[l];
        let dt = ac[l] * w[l] * (Complex64::new(1.0, 0.0) - j * kap * positions[l]);
        (ds.conj() * tv + sv.conj() * dt).re
    });
    XiGradients { xi: g_xi, xi1: g_xi1, xi2: g_xi2 }
}

/// Weighted objective at fixed beams and powers, as a function of the
/// transmit positions held by `scene`.
pub fn objective_tx(scene: &Scene, beams: &[DVector<Complex64>], powers: &[f64], weights: &Weighted) -> f64 {
    weights.value(&scene.evaluate(&scene.stats(beams), powers))
}

/// Gradient of [`objective_tx`] with respect to the transmit positions.
pub fn grad_tx(scene: &Scene, beams: &[DVector<Complex64>], powers: &[f64], weights: &Weighted) -> Vec<f64> {
    let stats = scene.stats(beams);
    let e = scene.evaluate(&stats, powers);
    let (g, _) = scene.backprop(&stats, powers, weights.rho, &weights.info_grads(&e.info));
    let m = scene.m_tx();
    let mut out = DVector::zeros(m);
    for (n, w) in beams.iter().enumerate() {
        for (k, v) in scene.vehicles.iter().enumerate() {
            let gs: &BeamStats = &g[n][k];
            if gs.xi == 0.0 && gs.xi1 == 0.0 && gs.xi2 == 0.0 {
                continue;
            }
            let c = v.state.theta.cos();
            let trig = TrigForms::new(&scene.tx, c, scene.cfg.wavelength, w);
            let xg = xi_gradients(&trig, &scene.tx, c, scene.cfg.wavelength);
            out += xg.xi * gs.xi + xg.xi1 * gs.xi1 + xg.xi2 * gs.xi2;
        }
    }
    out.iter().copied().collect()
}

/// Summed angle information of all vehicles.
pub fn objective_rx(scene: &Scene, beams: &[DVector<Complex64>], powers: &[f64]) -> f64 {
    scene.evaluate(&scene.stats(beams), powers).info.iter().map(|i| i.theta).sum()
}

/// Gradient of [`objective_rx`] with respect to the receive positions.
pub fn grad_rx(scene: &Scene, beams: &[DVector<Complex64>], powers: &[f64], rx: &[f64]) -> Vec<f64> {
    scene.theta_info_rx_gradient(&scene.stats(beams), powers, rx)
}

/// Left anchor used by the sequential transmit projection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TxAnchor {
    /// `p_0 = D_min − D_sp`, so the first element can reach the lower bound.
    #[default]
    LowerBound,
    /// `p_0 = D_max − D_sp`. Pushes every element to the top of the region
    /// and generally does not yield a feasible array.
    UpperBound,
}

fn check_region(m: usize, (lo, hi): (f64, f64), sp: f64) -> Result<()> {
    if m > 0 && hi - lo < (m as f64 - 1.0) * sp * (1.0 - 1e-12) {
        return Err(Error::Config(format!("region [{lo}, {hi}] cannot hold {m} antennas {sp} apart")));
    }
    Ok(())
}

/// Sequential left-to-right clamp of transmit positions.
pub fn project_tx(candidate: &[f64], bounds: (f64, f64), min_spacing: f64, anchor: TxAnchor) -> Result<Vec<f64>> {
    let m = candidate.len();
    check_region(m, bounds, min_spacing)?;
    let mut prev = match anchor {
        TxAnchor::LowerBound => bounds.0 - min_spacing,
        TxAnchor::UpperBound => bounds.1 - min_spacing,
    };
    let mut out = Vec::with_capacity(m);
    for (i, &c) in candidate.iter().enumerate() {
        let l = i + 1;
        let top = bounds.1 - (m - l) as f64 * min_spacing;
        let p = (prev + min_spacing).max(c.min(top));
        out.push(p);
        prev = p;
    }
    Ok(out)
}

/// Sequential right-to-left clamp of receive positions, anchored at
/// `p_{M+1} = D_max + D_sp`.
pub fn project_rx(candidate: &[f64], bounds: (f64, f64), min_spacing: f64) -> Result<Vec<f64>> {
    let m = candidate.len();
    check_region(m, bounds, min_spacing)?;
    let mut out = vec![0.0; m];
    let mut next = bounds.1 + min_spacing;
    for i in (0..m).rev() {
        let bottom = bounds.0 + i as f64 * min_spacing;
        let p = bottom.max(candidate[i].min(next - min_spacing));
        out[i] = p;
        next = p;
    }
    Ok(out)
}

/// Euclidean projection onto ordered, spaced positions inside `bounds`.
pub fn project_exact(candidate: &[f64], bounds: (f64, f64), min_spacing: f64) -> Result<Vec<f64>> {
    let m = candidate.len();
    check_region(m, bounds, min_spacing)?;
    // With q_l = p_l − l·D_sp the constraints become q nondecreasing in a box.
    let q: Vec<f64> = candidate.iter().enumerate().map(|(l, c)| c - l as f64 * min_spacing).collect();
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(m);
    for &x in &q {
        blocks.push((x, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a <= b {
                break;
            }
            blocks.pop();
            let last = blocks.len() - 1;
            blocks[last] = ((a * na as f64 + b * nb as f64) / (na + nb) as f64, na + nb);
        }
    }
    let hi = bounds.1 - (m as f64 - 1.0) * min_spacing;
    let mut out = Vec::with_capacity(m);
    for (v, n) in blocks {
        for _ in 0..n {
            let l = out.len();
            out.push(v.clamp(bounds.0, hi) + l as f64 * min_spacing);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PgaConfig {
    /// First trial displacement along the unit gradient, in wavelengths.
    pub initial_step_wavelengths: f64,
    /// Step shrink factor while backtracking.
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub max_iterations: usize,
    /// Relative objective improvement that ends the ascent.
    pub tolerance: f64,
    pub exact_projection: bool,
    pub tx_anchor: TxAnchor,
}

impl Default for PgaConfig {
    fn default() -> Self {
        PgaConfig {
            initial_step_wavelengths: 0.1,
            backtrack: 0.5,
            max_backtracks: 30,
            max_iterations: 50,
            tolerance: 1e-8,
            exact_projection: false,
            tx_anchor: TxAnchor::LowerBound,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PgaOutcome {
    pub positions: Vec<f64>,
    /// Objective at the start and after every accepted step.
    pub trace: Vec<f64>,
    pub iterations: usize,
}

fn ascend<F, G, P>(start: &[f64], wavelength: f64, cfg: &PgaConfig, value: F, grad: G, project: P) -> Result<PgaOutcome>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut x = start.to_vec();
    let mut f = value(&x);
    let mut trace = vec![f];
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let g = grad(&x);
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(gn > 0.0) || !gn.is_finite() {
            break;
        }
        let mut step = cfg.initial_step_wavelengths * wavelength / gn;
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(p, d)| p + step * d).collect();
            let cand = project(&trial)?;
            let moved: f64 = cand.iter().zip(&x).zip(&g).map(|((c, p), d)| (c - p) * d).sum();
            if moved > 0.0 {
                let fc = value(&cand);
                if fc >= f + 1e-4 * moved {
                    accepted = Some((cand, fc));
                    break;
                }
            }
            step *= cfg.backtrack;
        }
        let Some((cand, fc)) = accepted else { break };
        let gain = fc - f;
        x = cand;
        f = fc;
        trace.push(f);
        if gain <= cfg.tolerance * f.abs().max(1.0) {
            break;
        }
    }
    Ok(PgaOutcome { positions: x, trace, iterations })
}

/// Projected gradient ascent of the weighted objective over transmit
/// positions with beams and powers fixed.
pub fn pga_tx(scene: &Scene, tx_bounds: (f64, f64), min_spacing: f64, beams: &[DVector<Complex64>], powers: &[f64], weights: &Weighted, cfg: &PgaConfig) -> Result<PgaOutcome> {
    let project = |c: &[f64]| {
        if cfg.exact_projection {
            project_exact(c, tx_bounds, min_spacing)
        } else {
            project_tx(c, tx_bounds, min_spacing, cfg.tx_anchor)
        }
    };
    ascend(
        &scene.tx,
        scene.cfg.wavelength,
        cfg,
        |x| objective_tx(&scene.with_tx(x), beams, powers, weights),
        |x| grad_tx(&scene.with_tx(x), beams, powers, weights),
        project,
    )
}

/// Projected gradient ascent of the summed angle information over receive
/// positions with everything else fixed.
pub fn pga_rx(scene: &Scene, rx: &[f64], rx_bounds: (f64, f64), min_spacing: f64, beams: &[DVector<Complex64>], powers: &[f64], cfg: &PgaConfig) -> Result<PgaOutcome> {
    let project = |c: &[f64]| {
        if cfg.exact_projection {
            project_exact(c, rx_bounds, min_spacing)
        } else {
            project_rx(c, rx_bounds, min_spacing)
        }
    };
    ascend(
        rx,
        scene.cfg.wavelength,
        cfg,
        |x| objective_rx(&scene.with_rx(x), beams, powers),
        |x| grad_rx(&scene.with_rx(x), beams, powers, x),
        project,
    )
}
