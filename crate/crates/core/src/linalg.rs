//! Small dense helpers on top of faer.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::linalg::matmul::matmul;
use rayon::prelude::*;
use faer::{c64, Accum, Mat, MatMut, MatRef, Par, Side};

use crate::error::{PvbError, Result};

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };

/// Real scalar for scaling complex matrices.
pub fn rs(x: f64) -> faer::Scale<c64> {
    faer::Scale(c64::new(x, 0.0))
}

/// `scale * a^H b`
pub fn weighted_adjoint_mul(a: MatRef<'_, c64>, b: MatRef<'_, c64>, scale: f64) -> Mat<c64> {
    let mut out = a.adjoint() * b;
    if scale != 1.0 {
        out *= crate::linalg::rs(scale);
    }
    out
}

/// `A x`. Large products are split into row blocks across threads; each entry is summed
/// in the same order whatever the thread count.
pub fn mat_vec(a: MatRef<'_, c64>, x: &[c64]) -> Vec<c64> {
    const PAR_MIN: usize = 1 << 18;
    const BLOCK: usize = 128;
    assert_eq!(a.ncols(), x.len());
    let rows = a.nrows();
    let mut y = vec![ZERO; rows];
    let xm = MatRef::from_column_major_slice(x, x.len(), 1);
    let block = |r0: usize, out: &mut [c64]| {
        let len = out.len();
        matmul(
            MatMut::from_column_major_slice_mut(out, len, 1),
            Accum::Replace,
            a.subrows(r0, len),
            xm,
            ONE,
            Par::Seq,
        );
    };
    if rows * x.len() < PAR_MIN {
        block(0, &mut y);
    } else {
        y.par_chunks_mut(BLOCK).enumerate().for_each(|(i, out)| block(i * BLOCK, out));
    }
    y
}

pub fn dot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm2(a: &[c64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    assert_eq!(a.nrows(), b.nrows());
    assert_eq!(a.ncols(), b.ncols());
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

pub fn max_abs(a: MatRef<'_, c64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn identity(n: usize) -> Mat<c64> {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub fn hermitize(a: &mut Mat<c64>) {
    let n = a.nrows();
    for j in 0..n {
        a[(j, j)].im = 0.0;
        for i in (j + 1)..n {
            let v = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = v;
            a[(j, i)] = v.conj();
        }
    }
}

pub fn kron(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Mat<c64> {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Inverse of a Hermitian positive definite matrix via Cholesky.
pub fn hpd_inverse(a: MatRef<'_, c64>) -> Result<Mat<c64>> {
    let llt = a
        .llt(Side::Lower)
        .map_err(|e| PvbError::NotPositiveDefinite(format!("{e:?}")))?;
    let mut inv = llt.inverse();
    hermitize(&mut inv);
    Ok(inv)
}

/// Solve `a x = b` for Hermitian positive definite `a`.
pub fn hpd_solve(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Result<Mat<c64>> {
    let llt = a
        .llt(Side::Lower)
        .map_err(|e| PvbError::NotPositiveDefinite(format!("{e:?}")))?;
    Ok(llt.solve(b))
}

pub fn general_inverse(a: MatRef<'_, c64>) -> Mat<c64> {
    a.partial_piv_lu().inverse()
}

pub fn hermitian_eigenvalues(a: MatRef<'_, c64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| PvbError::EigenFailure(format!("{e:?}")))
}

pub fn hermitian_eigen(a: MatRef<'_, c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| PvbError::EigenFailure(format!("{e:?}")))?;
    let vals: Vec<f64> = evd.S().column_vector().iter().map(|z| z.re).collect();
    Ok((vals, evd.U().to_owned()))
}

/// Eigenvalues of a general complex matrix, sorted by real part.
pub fn general_eigenvalues(a: MatRef<'_, c64>) -> Result<Vec<c64>> {
    let mut ev = a
        .eigenvalues()
        .map_err(|e| PvbError::EigenFailure(format!("{e:?}")))?;
    ev.sort_by(|x, y| x.re.total_cmp(&y.re));
    Ok(ev)
}

/// 2-norm condition number of a Hermitian positive definite matrix.
pub fn hermitian_condition(a: MatRef<'_, c64>) -> Result<f64> {
    let ev = hermitian_eigenvalues(a)?;
    let lo = ev.first().copied().unwrap_or(0.0);
    let hi = ev.last().copied().unwrap_or(0.0);
    if lo <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(hi / lo)
}

/// Solve `h v = lambda s v` with Hermitian `h` and Hermitian positive definite `s`.
///
/// Returns the lowest `n` eigenpairs, eigenvectors normalized so that `v^H s v = 1`.
pub fn generalized_hermitian_eigen(
    h: MatRef<'_, c64>,
    s: MatRef<'_, c64>,
    n: usize,
) -> Result<(Vec<f64>, Mat<c64>)> {
    let dim = h.nrows();
    if s.nrows() != dim || h.ncols() != dim || s.ncols() != dim {
        return Err(PvbError::DimensionMismatch(format!(
            "h is {}x{}, s is {}x{}",
            h.nrows(),
            h.ncols(),
            s.nrows(),
            s.ncols()
        )));
    }
    let llt = s
        .llt(Side::Lower)
        .map_err(|e| PvbError::NotPositiveDefinite(format!("{e:?}")))?;
    let l = llt.L();
    // C = L^-1 H L^-H
    let mut c = h.to_owned();
    solve_lower_triangular_in_place(l, c.as_mut(), Par::Seq);
    let mut c = c.adjoint().to_owned();
    solve_lower_triangular_in_place(l, c.as_mut(), Par::Seq);
    hermitize(&mut c);
    let (vals, y) = hermitian_eigen(c.as_ref())?;
    let n = n.min(dim);
    let mut v = y.subcols(0, n).to_owned();
    solve_upper_triangular_in_place(l.adjoint(), v.as_mut(), Par::Seq);
    Ok((vals[..n].to_vec(), v))
}

fn one_norm(a: MatRef<'_, c64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a degree-13 Pade approximant.
pub fn expm(a: MatRef<'_, c64>) -> Mat<c64> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    let norm = one_norm(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = a * crate::linalg::rs(0.5f64.powi(s));
    let id = identity(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let sc = |m: &Mat<c64>, x: f64| m * crate::linalg::rs(x);

    let inner_u = &a6 * (sc(&a6, B[13]) + sc(&a4, B[11]) + sc(&a2, B[9]));
    let u = &a * (inner_u + sc(&a6, B[7]) + sc(&a4, B[5]) + sc(&a2, B[3]) + sc(&id, B[1]));
    let inner_v = &a6 * (sc(&a6, B[12]) + sc(&a4, B[10]) + sc(&a2, B[8]));
    let v = inner_v + sc(&a6, B[6]) + sc(&a4, B[4]) + sc(&a2, B[2]) + sc(&id, B[0]);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.partial_piv_lu().solve(&p);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}
