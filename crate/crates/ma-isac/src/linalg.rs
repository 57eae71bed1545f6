//! Guarded symmetric positive-definite inversion.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Smallest relative pivot accepted by [`spd_inverse`].
pub const PIVOT_GUARD: f64 = 1e-12;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Inverse of a symmetric positive-definite matrix.
///
/// The matrix is first scaled to unit diagonal so that parameters with very
/// different units do not trip the pivot test. A Cholesky pivot below
/// [`PIVOT_GUARD`] is reported as a conditioning error.
pub fn spd_inverse(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let mut scale = vec![0.0; n];
    for i in 0..n {
        let d = m[(i, i)];
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Conditioning { context: context.to_string(), pivot: 0.0 });
        }
        scale[i] = 1.0 / d.sqrt();
    }
    let s = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]) * scale[i] * scale[j]);
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut min_pivot = f64::INFINITY;
    for j in 0..n {
        let mut d = s[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        min_pivot = min_pivot.min(d);
        if !(d > PIVOT_GUARD) {
            return Err(Error::Conditioning { context: context.to_string(), pivot: d });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut v = s[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / ljj;
        }
    }
    // Invert L, then S⁻¹ = L⁻ᵀ L⁻¹.
    let mut linv = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        linv[(j, j)] = 1.0 / l[(j, j)];
        for i in j + 1..n {
            let mut v = 0.0;
            for k in j..i {
                v -= l[(i, k)] * linv[(k, j)];
            }
            linv[(i, j)] = v / l[(i, i)];
        }
    }
    let sinv = linv.transpose() * &linv;
    let out = DMatrix::from_fn(n, n, |i, j| sinv[(i, j)] * scale[i] * scale[j]);
    Ok(symmetrize(&out))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    symmetrize(m).symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}
