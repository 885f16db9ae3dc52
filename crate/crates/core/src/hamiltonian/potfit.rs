use faer::Mat;

use super::SopTerm;
use crate::error::{PvbError, Result};

#[derive(Debug, Clone)]
pub struct PotfitResult {
    pub terms: Vec<SopTerm>,
    pub singular_values: Vec<f64>,
    /// Largest elementwise deviation of the truncated expansion.
    pub max_error: f64,
    /// Frobenius norm of the residual.
    pub frobenius_error: f64,
}

/// Sum-of-products expansion of a two-dimensional potential table by SVD.
///
/// Keeps the smallest rank whose residual spectral norm is at most `tolerance`.
/// For square symmetric input the second factor is aligned with the first, with the
/// sign moved into the coefficient, so that identical factors can share cache keys.
pub fn potfit2(v: &Mat<f64>, tolerance: f64) -> Result<PotfitResult> {
    if !(tolerance > 0.0) {
        return Err(PvbError::InvalidInput(format!("tolerance must be positive, got {tolerance}")));
    }
    let (n1, n2) = (v.nrows(), v.ncols());
    if (0..n2).any(|j| (0..n1).any(|i| !v[(i, j)].is_finite())) {
        return Err(PvbError::InvalidInput("potential table has non-finite entries".into()));
    }
    let svd = v.thin_svd().map_err(|e| PvbError::EigenFailure(format!("{e:?}")))?;
    let s: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let rank = s.iter().take_while(|&&x| x > tolerance).count();
    let (u, w) = (svd.U(), svd.V());
    let mut terms = Vec::with_capacity(rank);
    for r in 0..rank {
        let a: Vec<f64> = (0..n1).map(|i| u[(i, r)]).collect();
        let mut b: Vec<f64> = (0..n2).map(|i| w[(i, r)]).collect();
        let mut c = s[r];
        if n1 == n2 {
            let same = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            let flip = a.iter().zip(&b).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max);
            if same < 1e-12 {
                b.clone_from(&a);
            } else if flip < 1e-12 {
                b.clone_from(&a);
                c = -c;
            }
        }
        terms.push(SopTerm { coefficient: c, factors: vec![a, b] });
    }
    let (max_error, frobenius_error) = reconstruction_error(v, &terms);
    Ok(PotfitResult { terms, singular_values: s, max_error, frobenius_error })
}

/// `(max, Frobenius)` residual of a truncated expansion.
pub fn reconstruction_error(v: &Mat<f64>, terms: &[SopTerm]) -> (f64, f64) {
    let mut max = 0.0f64;
    let mut fro = 0.0f64;
    for i in 0..v.nrows() {
        for j in 0..v.ncols() {
            let approx: f64 = terms.iter().map(|t| t.coefficient * t.factors[0][i] * t.factors[1][j]).sum();
            let e = v[(i, j)] - approx;
            max = max.max(e.abs());
            fro += e * e;
        }
    }
    (max, fro.sqrt())
}
