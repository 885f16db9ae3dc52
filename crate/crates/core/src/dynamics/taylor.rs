use faer::{c64, MatRef};

use crate::error::{PvbError, Result};
use crate::linalg;

/// The series did not reach its tail cutoff within the allowed number of terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepTooLarge {
    pub terms: usize,
    pub last_norm: f64,
}

/// One Taylor step `psi(t + tau) = sum_k psi_k`, `psi_k = (-i tau / k) H psi_{k-1}`.
///
/// Accepts as soon as `|psi_k| <= eps` for some `k <= max_terms` and returns the
/// result together with that `k`. Otherwise the input is left untouched and
/// `StepTooLarge` is returned.
pub fn taylor_step(
    mut apply_h: impl FnMut(&[c64]) -> Vec<c64>,
    psi: &[c64],
    tau: f64,
    max_terms: usize,
    eps: f64,
) -> std::result::Result<(Vec<c64>, usize), StepTooLarge> {
    let mut out = psi.to_vec();
    let mut term = psi.to_vec();
    let mut last_norm = linalg::norm2(&term);
    if last_norm <= eps {
        return Ok((out, 0));
    }
    for k in 1..=max_terms {
        let f = c64::new(0.0, -tau / k as f64);
        term = apply_h(&term).into_iter().map(|z| z * f).collect();
        for (o, t) in out.iter_mut().zip(&term) {
            *o += t;
        }
        last_norm = linalg::norm2(&term);
        if last_norm <= eps {
            return Ok((out, k));
        }
    }
    Err(StepTooLarge { terms: max_terms, last_norm })
}

/// `exp(-i H tau) psi` by a dense matrix exponential.
pub fn dense_propagate_oracle(h: MatRef<'_, c64>, psi: &[c64], tau: f64) -> Result<Vec<c64>> {
    let n = h.nrows();
    if n > 4096 {
        return Err(PvbError::TooLarge(n));
    }
    if h.ncols() != n || psi.len() != n {
        return Err(PvbError::DimensionMismatch(format!("{}x{} operator, state of {}", n, h.ncols(), psi.len())));
    }
    let a = faer::Mat::from_fn(n, n, |i, j| h[(i, j)] * c64::new(0.0, -tau));
    let u = linalg::expm(a.as_ref());
    Ok(linalg::mat_vec(u.as_ref(), psi))
}

/// Largest step allowed by the control slope: `sqrt(zeta / (2 K max|du/dt|))`.
pub fn max_timestep(zeta: f64, bandwidth: f64, max_du_dt: f64) -> Result<f64> {
    for (name, v) in [("zeta", zeta), ("bandwidth", bandwidth), ("max du/dt", max_du_dt)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(PvbError::InvalidInput(format!("{name} must be positive, got {v}")));
        }
    }
    Ok((zeta / (2.0 * bandwidth * max_du_dt)).sqrt())
}
