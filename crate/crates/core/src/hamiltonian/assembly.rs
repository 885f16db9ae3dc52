//! Reduced Hamiltonian `B~^dagger H B~`, assembled from one-dimensional factor tables.

use std::sync::Arc;

use faer::{c64, Mat};
use rand::Rng;
use rayon::prelude::*;

use super::cache::{direct_element, CacheStats, ElementCache, WindowTable};
use super::{grid_matrix, Factor, OperatorSpec, ProductTerm};
use crate::error::Result;
use crate::linalg::{self, ZERO};
use crate::reduced_space::{BasisChange, CellSet, ReducedBasis};
use crate::space::{Dof, PhaseSpace};
use crate::vn_basis::VonNeumannLattice;

#[derive(Debug, Clone)]
struct RegisteredFactor {
    dof: usize,
    factor: Factor,
}

#[derive(Debug, Clone)]
struct AssemblyTerm {
    coefficient: f64,
    /// Factor id per DoF; `None` means the overlap `B^dagger B` of that DoF.
    factors: Vec<Option<usize>>,
}

/// Lazily filled dense table of one-dimensional elements.
#[derive(Debug, Clone)]
struct FactorTable {
    n: usize,
    values: Vec<c64>,
    filled: Vec<bool>,
}

impl FactorTable {
    fn new(n: usize) -> Self {
        Self { n, values: vec![ZERO; n * n], filled: vec![false; n * n] }
    }
}

fn same_lattice(a: &VonNeumannLattice, b: &VonNeumannLattice) -> bool {
    a.grid() == b.grid() && a.nx() == b.nx() && a.np() == b.np() && a.sigma() == b.sigma() && a.shift() == b.shift()
}

/// Builds reduced Hamiltonian blocks with canonical-key caching of 1D elements.
///
/// Identical factors on identical DoFs share one factor id, so exchange-symmetric
/// product terms reuse each other's elements.
#[derive(Debug, Clone)]
pub struct HamiltonianAssembler {
    space: Arc<PhaseSpace>,
    factors: Vec<RegisteredFactor>,
    drift: Vec<AssemblyTerm>,
    controls: Vec<Vec<AssemblyTerm>>,
    windows: Vec<WindowTable>,
    tables: Vec<FactorTable>,
    overlaps: Vec<Vec<c64>>,
    cache: ElementCache,
    use_symmetry: bool,
}

impl HamiltonianAssembler {
    pub fn new(spec: &OperatorSpec, space: Arc<PhaseSpace>) -> Result<Self> {
        spec.validate()?;
        let windows = space.dofs().iter().map(WindowTable::new).collect();
        let overlaps = space
            .dofs()
            .iter()
            .map(|d| {
                let s = &d.pair.s_inv;
                let n = s.nrows();
                let mut v = vec![ZERO; n * n];
                for j in 0..n {
                    for k in 0..n {
                        v[j * n + k] = s[(j, k)];
                    }
                }
                v
            })
            .collect();
        let mut me = Self {
            space: space.clone(),
            factors: Vec::new(),
            drift: Vec::new(),
            controls: Vec::new(),
            windows,
            tables: Vec::new(),
            overlaps,
            cache: ElementCache::new(),
            use_symmetry: true,
        };
        me.drift = spec.drift_terms().iter().map(|t| me.register(t)).collect();
        me.controls = spec
            .control_terms(&space)
            .iter()
            .map(|g| g.iter().map(|t| me.register(t)).collect())
            .collect();
        Ok(me)
    }

    /// Evaluate every element by direct quadrature instead of through the cache.
    pub fn without_symmetry(mut self) -> Self {
        self.use_symmetry = false;
        self
    }

    fn register(&mut self, term: &ProductTerm) -> AssemblyTerm {
        let mut ids = vec![None; self.space.n_dofs()];
        for (d, f) in &term.factors {
            let lat = &self.space.dof(*d).lattice;
            let found = self.factors.iter().position(|r| {
                r.factor == *f && same_lattice(&self.space.dof(r.dof).lattice, lat)
            });
            let id = found.unwrap_or_else(|| {
                self.factors.push(RegisteredFactor { dof: *d, factor: f.clone() });
                self.tables.push(FactorTable::new(lat.n_cells()));
                self.factors.len() - 1
            });
            ids[*d] = Some(id);
        }
        AssemblyTerm { coefficient: term.coefficient, factors: ids }
    }

    pub fn space(&self) -> &Arc<PhaseSpace> {
        &self.space
    }

    pub fn n_signals(&self) -> usize {
        self.controls.len()
    }

    /// Number of distinct one-dimensional factors after symmetry folding.
    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn cache_stats(&self) -> CacheStats {
        self.cache.stats()
    }

    pub fn cache(&self) -> &ElementCache {
        &self.cache
    }

    fn ensure(&mut self, id: usize, j: usize, k: usize) {
        let n = self.tables[id].n;
        if self.tables[id].filled[j * n + k] {
            return;
        }
        let reg = &self.factors[id];
        let dof: &Dof = self.space.dof(reg.dof);
        let v = if self.use_symmetry {
            self.windows[reg.dof].element(dof, &reg.factor, id, &mut self.cache, j, k)
        } else {
            direct_element(dof, &reg.factor, j, k)
        };
        let t = &mut self.tables[id];
        t.values[j * n + k] = v;
        t.filled[j * n + k] = true;
    }

    fn prepare(&mut self, rows: &[Vec<usize>], cols: &[Vec<usize>]) {
        let nd = self.space.n_dofs();
        for d in 0..nd {
            let mut rd: Vec<usize> = rows.iter().map(|r| r[d]).collect();
            let mut cd: Vec<usize> = cols.iter().map(|c| c[d]).collect();
            rd.sort_unstable();
            rd.dedup();
            cd.sort_unstable();
            cd.dedup();
            let ids: Vec<usize> = self
                .drift
                .iter()
                .chain(self.controls.iter().flatten())
                .filter_map(|t| t.factors[d])
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            for id in ids {
                for &j in &rd {
                    for &k in &cd {
                        self.ensure(id, j, k);
                    }
                }
            }
        }
    }

    fn block(&self, terms: &[AssemblyTerm], rows: &[Vec<usize>], cols: &[Vec<usize>]) -> Mat<c64> {
        let nd = self.space.n_dofs();
        let srcs: Vec<(f64, Vec<(&[c64], usize)>)> = terms
            .iter()
            .map(|t| {
                let per: Vec<(&[c64], usize)> = (0..nd)
                    .map(|d| match t.factors[d] {
                        Some(id) => (self.tables[id].values.as_slice(), self.tables[id].n),
                        None => (self.overlaps[d].as_slice(), self.space.dof(d).lattice.n_cells()),
                    })
                    .collect();
                (t.coefficient, per)
            })
            .collect();
        let data: Vec<Vec<c64>> = rows
            .par_iter()
            .map(|r| {
                cols.iter()
                    .map(|c| {
                        let mut acc = ZERO;
                        for (coef, per) in &srcs {
                            let mut v = c64::new(*coef, 0.0);
                            for (d, (tab, n)) in per.iter().enumerate() {
                                v *= tab[r[d] * n + c[d]];
                            }
                            acc += v;
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        Mat::from_fn(rows.len(), cols.len(), |i, j| data[i][j])
    }

    /// Drift and control blocks for `rows x cols` of global cells.
    fn blocks(&mut self, rows: &[usize], cols: &[usize]) -> (Mat<c64>, Vec<Mat<c64>>) {
        let rs: Vec<Vec<usize>> = rows.iter().map(|&c| self.space.split_cell(c)).collect();
        let cs: Vec<Vec<usize>> = cols.iter().map(|&c| self.space.split_cell(c)).collect();
        self.prepare(&rs, &cs);
        let drift = self.block(&self.drift, &rs, &cs);
        let controls = self.controls.iter().map(|g| self.block(g, &rs, &cs)).collect();
        (drift, controls)
    }

    /// Single drift element `(B^dagger H B)_{jk}`.
    pub fn element(&mut self, cell_j: usize, cell_k: usize) -> c64 {
        let (m, _) = self.blocks(&[cell_j], &[cell_k]);
        m[(0, 0)]
    }

    /// Largest deviation between a random sample of cached one-dimensional elements
    /// and direct quadrature. Returns `(max deviation, entries audited)`.
    pub fn audit(&self, fraction: f64, min_samples: usize, rng: &mut impl Rng) -> (f64, usize) {
        let mut filled: Vec<(usize, usize)> = Vec::new();
        for (id, t) in self.tables.iter().enumerate() {
            for (i, &f) in t.filled.iter().enumerate() {
                if f {
                    filled.push((id, i));
                }
            }
        }
        if filled.is_empty() {
            return (0.0, 0);
        }
        let want = ((filled.len() as f64 * fraction).ceil() as usize).max(min_samples).min(filled.len());
        let mut worst = 0.0f64;
        for _ in 0..want {
            let (id, i) = filled[rng.gen_range(0..filled.len())];
            let t = &self.tables[id];
            let (j, k) = (i / t.n, i % t.n);
            let reg = &self.factors[id];
            let direct = direct_element(self.space.dof(reg.dof), &reg.factor, j, k);
            worst = worst.max((t.values[i] - direct).norm());
        }
        (worst, want)
    }
}

/// Reduced Hamiltonian split into drift and per-signal control parts.
#[derive(Debug, Clone)]
pub struct ReducedHamiltonian {
    cells: CellSet,
    drift: Mat<c64>,
    controls: Vec<Mat<c64>>,
}

impl ReducedHamiltonian {
    pub fn new(assembler: &mut HamiltonianAssembler, cells: &CellSet) -> Self {
        let c = cells.as_slice();
        let (mut drift, mut controls) = assembler.blocks(c, c);
        linalg::hermitize(&mut drift);
        controls.iter_mut().for_each(linalg::hermitize);
        Self { cells: cells.clone(), drift, controls }
    }

    pub fn cells(&self) -> &CellSet {
        &self.cells
    }

    pub fn drift(&self) -> &Mat<c64> {
        &self.drift
    }

    pub fn controls(&self) -> &[Mat<c64>] {
        &self.controls
    }

    /// `B~^dagger H(u) B~`.
    pub fn matrix_at(&self, u: &[f64]) -> Mat<c64> {
        let mut m = self.drift.clone();
        for (c, &ui) in self.controls.iter().zip(u) {
            if ui != 0.0 {
                m += c * crate::linalg::rs(ui);
            }
        }
        m
    }

    /// `B~^dagger H(u) B~ v` without forming the summed matrix.
    pub fn apply_at(&self, u: &[f64], v: &[c64]) -> Vec<c64> {
        let mut out = linalg::mat_vec(self.drift.as_ref(), v);
        for (c, &ui) in self.controls.iter().zip(u) {
            if ui != 0.0 {
                let w = linalg::mat_vec(c.as_ref(), v);
                for (o, x) in out.iter_mut().zip(w) {
                    *o += x * ui;
                }
            }
        }
        out
    }

    /// Follow a basis change, computing only rows of added cells.
    pub fn update(&mut self, assembler: &mut HamiltonianAssembler, new_cells: &CellSet, change: &BasisChange) {
        let n = new_cells.len();
        let mut drift = Mat::<c64>::zeros(n, n);
        let mut controls: Vec<Mat<c64>> = self.controls.iter().map(|_| Mat::zeros(n, n)).collect();
        for i in 0..n {
            let Some(oi) = change.origin[i] else { continue };
            for j in 0..n {
                if let Some(oj) = change.origin[j] {
                    drift[(i, j)] = self.drift[(oi, oj)];
                    for (new, old) in controls.iter_mut().zip(&self.controls) {
                        new[(i, j)] = old[(oi, oj)];
                    }
                }
            }
        }
        let added_pos: Vec<usize> = (0..n).filter(|&i| change.origin[i].is_none()).collect();
        if !added_pos.is_empty() {
            let rows: Vec<usize> = added_pos.iter().map(|&i| new_cells.as_slice()[i]).collect();
            let (d_blk, c_blks) = assembler.blocks(&rows, new_cells.as_slice());
            let write = |m: &mut Mat<c64>, blk: &Mat<c64>| {
                for (r, &i) in added_pos.iter().enumerate() {
                    for j in 0..n {
                        m[(i, j)] = blk[(r, j)];
                        m[(j, i)] = blk[(r, j)].conj();
                    }
                }
                linalg::hermitize(m);
            };
            write(&mut drift, &d_blk);
            for (m, blk) in controls.iter_mut().zip(&c_blks) {
                write(m, blk);
            }
        }
        self.cells = new_cells.clone();
        self.drift = drift;
        self.controls = controls;
    }
}

/// `H_1 psi = S~ (B~^dagger H B~ psi)` as two matrix-vector products.
pub fn apply_h1(rb: &ReducedBasis, hbb: &Mat<c64>, psi: &[c64]) -> Vec<c64> {
    let y = linalg::mat_vec(hbb.as_ref(), psi);
    linalg::mat_vec(rb.s_tilde().as_ref(), &y)
}

/// Explicit `H_1 = S~ B~^dagger H B~`.
pub fn h1_matrix(rb: &ReducedBasis, hbb: &Mat<c64>) -> Mat<c64> {
    rb.s_tilde() * hbb
}

/// `H_1 = S~ (R^dagger S^-1 G^dagger H G S^-1 R)` built from full-space matrices.
pub fn build_h1_via_g(spec: &OperatorSpec, space: &PhaseSpace, rb: &ReducedBasis, u: &[f64]) -> Result<Mat<c64>> {
    let h = grid_matrix(spec, space, u)?;
    let g = space.full_g();
    let s_inv = space.full_s_inv();
    let ghg = linalg::weighted_adjoint_mul(g.as_ref(), (&h * &g).as_ref(), space.weight());
    let inner = &s_inv * ghg * &s_inv;
    let cells = rb.cells().as_slice();
    let sub = Mat::from_fn(cells.len(), cells.len(), |i, j| inner[(cells[i], cells[j])]);
    Ok(rb.s_tilde() * sub)
}
