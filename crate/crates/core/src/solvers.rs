//! Adaptive eigenmode solver and the dense full-grid reference.

use std::sync::Arc;

use faer::{c64, Mat, MatRef, Side};
use serde::{Deserialize, Serialize};

use crate::error::{PvbError, Result};
use crate::hamiltonian::{grid_matrix, grid_matrix_real, HamiltonianAssembler, OperatorSpec, ReducedHamiltonian};
use crate::linalg;
use crate::reduced_space::{
    boundary_cells, expand_cells, max_amplitudes, prune_cells, CellSet, ReducedBasis, DEFAULT_RADIUS,
};
use crate::space::{join_index, split_index, PhaseSpace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TiseConfig {
    pub zeta: f64,
    pub radius: f64,
    pub n_modes: usize,
    pub max_iterations: usize,
}

impl Default for TiseConfig {
    fn default() -> Self {
        Self { zeta: 1e-6, radius: DEFAULT_RADIUS, n_modes: 1, max_iterations: 200 }
    }
}

impl TiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err(PvbError::InvalidInput(format!("zeta must be positive, got {}", self.zeta)));
        }
        if !(self.radius >= 1.0 && self.radius.is_finite()) {
            return Err(PvbError::InvalidInput(format!("radius must be at least 1, got {}", self.radius)));
        }
        if self.n_modes == 0 {
            return Err(PvbError::InvalidInput("n_modes must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(PvbError::InvalidInput("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub n_cells: usize,
    pub boundary_max: f64,
    pub lowest: f64,
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub eigenvalues: Vec<f64>,
    /// Columns are modes in reduced coordinates, normalized to unit physical norm.
    pub eigenvectors: Mat<c64>,
    pub final_cells: CellSet,
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
}

/// Grid sample nearest to the x centre of each lattice column, per DoF.
fn lattice_x_samples(space: &PhaseSpace) -> Vec<Vec<usize>> {
    space
        .dofs()
        .iter()
        .map(|d| {
            let lat = &d.lattice;
            let g = lat.grid();
            (0..lat.nx())
                .map(|ix| {
                    let x = lat.center(lat.cell(ix, 0)).x;
                    let i = ((x - g.x0()) / g.dx()).round() as i64;
                    i.rem_euclid(g.n_points() as i64) as usize
                })
                .collect()
        })
        .collect()
}

/// Momentum rows at `p = 0`, or the two rows straddling it.
fn zero_momentum_rows(space: &PhaseSpace, d: usize) -> Vec<usize> {
    let lat = &space.dof(d).lattice;
    let freqs: Vec<i64> = (0..lat.np()).map(|ip| lat.center(lat.cell(0, ip)).freq).collect();
    if let Some(ip) = freqs.iter().position(|&f| f == 0) {
        return vec![ip];
    }
    let above = freqs.iter().position(|&f| f > 0);
    match above {
        Some(0) => vec![0],
        Some(i) => vec![i - 1, i],
        None => vec![freqs.len() - 1],
    }
}

/// Cells at the strict local minima of the static potential, sampled on the lattice x grid.
///
/// Falls back to the global minimum when there is no strict local minimum.
pub fn seed_cells(spec: &OperatorSpec, space: &PhaseSpace) -> CellSet {
    let xs = lattice_x_samples(space);
    let dims: Vec<usize> = xs.iter().map(|v| v.len()).collect();
    let total: usize = dims.iter().product();
    let values: Vec<f64> = (0..total)
        .map(|i| {
            let parts = split_index(i, &dims);
            let point: Vec<usize> = parts.iter().zip(&xs).map(|(&p, x)| x[p]).collect();
            spec.potential_at(&point)
        })
        .collect();

    let mut minima = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        let parts = split_index(i, &dims);
        let mut strict = true;
        'outer: for d in 0..dims.len() {
            if dims[d] < 2 {
                continue;
            }
            for step in [dims[d] - 1, 1] {
                let mut nb = parts.clone();
                nb[d] = (nb[d] + step) % dims[d];
                if values[join_index(&nb, &dims)] <= v {
                    strict = false;
                    break 'outer;
                }
            }
        }
        if strict {
            minima.push(parts);
        }
    }
    if minima.is_empty() {
        let best = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        minima.push(split_index(best, &dims));
    }

    let p_rows: Vec<Vec<usize>> = (0..space.n_dofs()).map(|d| zero_momentum_rows(space, d)).collect();
    let p_dims: Vec<usize> = p_rows.iter().map(|r| r.len()).collect();
    let n_combo: usize = p_dims.iter().product();
    let mut cells = Vec::new();
    for xs_idx in &minima {
        for combo in 0..n_combo {
            let ps = split_index(combo, &p_dims);
            let parts: Vec<usize> = (0..space.n_dofs())
                .map(|d| space.dof(d).lattice.cell(xs_idx[d], p_rows[d][ps[d]]))
                .collect();
            cells.push(space.join_cell(&parts));
        }
    }
    CellSet::new(cells)
}

/// Lowest generalized eigenpairs of `Hbb v = lambda S~^-1 v`, with `v^H S~^-1 v = 1`.
pub fn solve_reduced_eig(
    hbb: MatRef<'_, c64>,
    s_inv_tilde: MatRef<'_, c64>,
    n_modes: usize,
) -> Result<(Vec<f64>, Mat<c64>)> {
    if n_modes > hbb.nrows() {
        return Err(PvbError::InvalidInput(format!(
            "{n_modes} modes requested from a {}-dimensional space",
            hbb.nrows()
        )));
    }
    linalg::generalized_hermitian_eigen(hbb, s_inv_tilde, n_modes)
}

/// Adaptive eigenmode iteration started from the potential minima.
pub fn tise_adaptive(spec: &OperatorSpec, space: Arc<PhaseSpace>, config: &TiseConfig) -> Result<EigenResult> {
    let seeds = seed_cells(spec, &space);
    tise_adaptive_from(spec, space, seeds, config)
}

/// Adaptive eigenmode iteration from an explicit initial cell set.
pub fn tise_adaptive_from(
    spec: &OperatorSpec,
    space: Arc<PhaseSpace>,
    seeds: CellSet,
    config: &TiseConfig,
) -> Result<EigenResult> {
    config.validate()?;
    let mut asm = HamiltonianAssembler::new(spec, space.clone())?;
    let mut rb = ReducedBasis::new(&space, seeds)?;
    let mut rh = ReducedHamiltonian::new(&mut asm, rb.cells());
    let mut history = Vec::new();

    for it in 0..config.max_iterations {
        let want = config.n_modes.min(rb.dim());
        let (vals, vecs) = solve_reduced_eig(rh.drift().as_ref(), rb.s_inv_tilde().as_ref(), want)?;
        let amps = max_amplitudes(vecs.as_ref());
        let boundary = boundary_cells(rb.cells(), &space, config.radius);
        let boundary_max = boundary
            .iter()
            .map(|c| amps[rb.cells().position(c).unwrap()])
            .fold(0.0, f64::max);
        history.push(IterationRecord { n_cells: rb.dim(), boundary_max, lowest: vals[0] });

        if want == config.n_modes && boundary_max < config.zeta {
            return Ok(EigenResult {
                eigenvalues: vals,
                eigenvectors: vecs,
                final_cells: rb.cells().clone(),
                iterations: it + 1,
                history,
            });
        }

        let kept = prune_cells(rb.cells(), &amps, config.zeta);
        let next = expand_cells(&kept, &space, config.radius);
        if &next == rb.cells() {
            // nothing left to add: the offending amplitude sits on the momentum edge
            break;
        }
        let change = rb.update(&space, next)?;
        rh.update(&mut asm, rb.cells(), &change);
    }
    let last = history.last().map(|h| h.boundary_max).unwrap_or(f64::INFINITY);
    Err(PvbError::NoConvergence {
        iterations: history.len(),
        boundary_max: last,
        history: history.iter().map(|h| (h.n_cells, h.boundary_max)).collect(),
    })
}

/// Sorted eigenvalues of the dense sampled Hamiltonian.
pub fn reference_full_eig(spec: &OperatorSpec, space: &PhaseSpace) -> Result<Vec<f64>> {
    spec.validate()?;
    if let Some(h) = grid_matrix_real(spec, space, &[])? {
        let mut h = h;
        let n = h.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                let v = 0.5 * (h[(i, j)] + h[(j, i)]);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        return h
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| PvbError::EigenFailure(format!("{e:?}")));
    }
    let mut h = grid_matrix(spec, space, &[])?;
    linalg::hermitize(&mut h);
    linalg::hermitian_eigenvalues(h.as_ref())
}
