//! Direct-product phase space over several degrees of freedom.
//!
//! Cells and grid samples are ordered row-major over the degrees of freedom,
//! so the first DoF varies slowest.

use faer::{c64, Mat, MatRef};

use crate::error::{PvbError, Result};
use crate::fourier_grid::{FourierGrid, SpectralApplier};
use crate::linalg::{self, ZERO};
use crate::vn_basis::{build_basis_pair, BasisPair, VonNeumannLattice};

#[derive(Debug, Clone)]
pub struct Dof {
    pub lattice: VonNeumannLattice,
    pub pair: BasisPair,
    pub spectral: SpectralApplier,
}

impl Dof {
    pub fn new(lattice: VonNeumannLattice) -> Result<Self> {
        let pair = build_basis_pair(&lattice)?;
        let spectral = SpectralApplier::new(lattice.grid());
        Ok(Self { lattice, pair, spectral })
    }

    pub fn grid(&self) -> &FourierGrid {
        self.lattice.grid()
    }
}

#[derive(Debug, Clone)]
pub struct PhaseSpace {
    dofs: Vec<Dof>,
}

impl PhaseSpace {
    pub fn new(lattices: Vec<VonNeumannLattice>) -> Result<Self> {
        if lattices.is_empty() {
            return Err(PvbError::InvalidInput("at least one degree of freedom is required".into()));
        }
        let dofs = lattices.into_iter().map(Dof::new).collect::<Result<Vec<_>>>()?;
        Ok(Self { dofs })
    }

    pub fn from_dofs(dofs: Vec<Dof>) -> Self {
        assert!(!dofs.is_empty());
        Self { dofs }
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.len()
    }

    pub fn dof(&self, d: usize) -> &Dof {
        &self.dofs[d]
    }

    pub fn dofs(&self) -> &[Dof] {
        &self.dofs
    }

    pub fn n_cells(&self) -> usize {
        self.dofs.iter().map(|d| d.lattice.n_cells()).product()
    }

    pub fn n_points(&self) -> usize {
        self.dofs.iter().map(|d| d.grid().n_points()).product()
    }

    pub fn weight(&self) -> f64 {
        self.dofs.iter().map(|d| d.pair.weight).product()
    }

    /// Largest bandwidth over the degrees of freedom.
    pub fn bandwidth(&self) -> f64 {
        self.dofs.iter().map(|d| d.grid().bandwidth()).fold(0.0, f64::max)
    }

    pub fn cell_dims(&self) -> Vec<usize> {
        self.dofs.iter().map(|d| d.lattice.n_cells()).collect()
    }

    pub fn point_dims(&self) -> Vec<usize> {
        self.dofs.iter().map(|d| d.grid().n_points()).collect()
    }

    /// Per-DoF cell indices of a global cell.
    pub fn split_cell(&self, cell: usize) -> Vec<usize> {
        split_index(cell, &self.cell_dims())
    }

    pub fn join_cell(&self, parts: &[usize]) -> usize {
        join_index(parts, &self.cell_dims())
    }

    /// `(x-index, p-index)` of each DoF.
    pub fn lattice_coords(&self, cell: usize) -> Vec<(usize, usize)> {
        self.split_cell(cell)
            .iter()
            .zip(&self.dofs)
            .map(|(&c, d)| d.lattice.coords(c))
            .collect()
    }

    /// `(x, p)` centre of each DoF.
    pub fn cell_center(&self, cell: usize) -> Vec<(f64, f64)> {
        self.split_cell(cell)
            .iter()
            .zip(&self.dofs)
            .map(|(&c, d)| {
                let ctr = d.lattice.center(c);
                (ctr.x, ctr.p)
            })
            .collect()
    }

    /// Overlap-matrix entry `(B^dagger B)_{jk}`, the product of per-DoF entries.
    pub fn s_inv_entry(&self, j: usize, k: usize) -> c64 {
        let (js, ks) = (self.split_cell(j), self.split_cell(k));
        let mut acc = c64::new(1.0, 0.0);
        for (d, dof) in self.dofs.iter().enumerate() {
            acc *= dof.pair.s_inv[(js[d], ks[d])];
        }
        acc
    }

    fn kron_all(&self, f: impl Fn(&Dof) -> MatRef<'_, c64>) -> Mat<c64> {
        let mut out = f(&self.dofs[0]).to_owned();
        for d in &self.dofs[1..] {
            out = linalg::kron(out.as_ref(), f(d));
        }
        out
    }

    pub fn full_g(&self) -> Mat<c64> {
        self.kron_all(|d| d.pair.g.as_ref())
    }

    pub fn full_b(&self) -> Mat<c64> {
        self.kron_all(|d| d.pair.b.as_ref())
    }

    pub fn full_s_inv(&self) -> Mat<c64> {
        self.kron_all(|d| d.pair.s_inv.as_ref())
    }

    pub fn full_s(&self) -> Mat<c64> {
        self.kron_all(|d| d.pair.s.as_ref())
    }

    /// Applies one matrix per DoF to a row-major tensor.
    pub fn apply_kron(&self, mats: &[MatRef<'_, c64>], tensor: &[c64]) -> Vec<c64> {
        assert_eq!(mats.len(), self.n_dofs());
        let mut dims: Vec<usize> = mats.iter().map(|m| m.ncols()).collect();
        assert_eq!(dims.iter().product::<usize>(), tensor.len());
        let mut cur = tensor.to_vec();
        for (k, m) in mats.iter().enumerate() {
            cur = mode_product(&cur, &dims, k, *m);
            dims[k] = m.nrows();
        }
        cur
    }

    /// `w B^H psi` over all cells.
    pub fn b_dagger_apply(&self, psi: &[c64]) -> Vec<c64> {
        let adj: Vec<Mat<c64>> = self
            .dofs
            .iter()
            .map(|d| d.pair.b.adjoint().to_owned() * crate::linalg::rs(d.pair.weight))
            .collect();
        let refs: Vec<MatRef<'_, c64>> = adj.iter().map(|m| m.as_ref()).collect();
        self.apply_kron(&refs, psi)
    }

    /// `w G^H psi` over all cells, the full PvB coefficients.
    pub fn to_pvb(&self, psi: &[c64]) -> Vec<c64> {
        let adj: Vec<Mat<c64>> = self.dofs.iter().map(|d| d.pair.g_dagger()).collect();
        let refs: Vec<MatRef<'_, c64>> = adj.iter().map(|m| m.as_ref()).collect();
        self.apply_kron(&refs, psi)
    }

    /// `B c` for a coefficient vector over all cells.
    pub fn from_pvb(&self, coeffs: &[c64]) -> Vec<c64> {
        let refs: Vec<MatRef<'_, c64>> = self.dofs.iter().map(|d| d.pair.b.as_ref()).collect();
        self.apply_kron(&refs, coeffs)
    }

    /// `B c` for coefficients on a subset of cells.
    pub fn synthesize(&self, cells: &[usize], coeffs: &[c64]) -> Vec<c64> {
        let mut full = vec![ZERO; self.n_cells()];
        for (&c, &v) in cells.iter().zip(coeffs) {
            full[c] = v;
        }
        self.from_pvb(&full)
    }

    /// Columns of `B` for the given cells, sampled on the product grid.
    pub fn b_columns(&self, cells: &[usize]) -> Mat<c64> {
        let np = self.n_points();
        let mut out = Mat::zeros(np, cells.len());
        let pdims = self.point_dims();
        for (col, &cell) in cells.iter().enumerate() {
            let parts = self.split_cell(cell);
            for m in 0..np {
                let ms = split_index(m, &pdims);
                let mut v = c64::new(1.0, 0.0);
                for (d, dof) in self.dofs.iter().enumerate() {
                    v *= dof.pair.b[(ms[d], parts[d])];
                }
                out[(m, col)] = v;
            }
        }
        out
    }

    pub fn g_columns(&self, cells: &[usize]) -> Mat<c64> {
        let np = self.n_points();
        let mut out = Mat::zeros(np, cells.len());
        let pdims = self.point_dims();
        for (col, &cell) in cells.iter().enumerate() {
            let parts = self.split_cell(cell);
            for m in 0..np {
                let ms = split_index(m, &pdims);
                let mut v = c64::new(1.0, 0.0);
                for (d, dof) in self.dofs.iter().enumerate() {
                    v *= dof.pair.g[(ms[d], parts[d])];
                }
                out[(m, col)] = v;
            }
        }
        out
    }
}

pub fn split_index(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for d in (0..dims.len()).rev() {
        out[d] = idx % dims[d];
        idx /= dims[d];
    }
    out
}

pub fn join_index(parts: &[usize], dims: &[usize]) -> usize {
    parts.iter().zip(dims).fold(0, |acc, (&p, &n)| acc * n + p)
}

/// Multiply mode `k` of a row-major tensor by `m`.
pub fn mode_product(t: &[c64], dims: &[usize], k: usize, m: MatRef<'_, c64>) -> Vec<c64> {
    let outer: usize = dims[..k].iter().product();
    let inner: usize = dims[k + 1..].iter().product();
    let nk = dims[k];
    let mk = m.nrows();
    assert_eq!(m.ncols(), nk);
    let mut out = vec![ZERO; outer * mk * inner];
    for a in 0..outer {
        let src = &t[a * nk * inner..(a + 1) * nk * inner];
        let dst = &mut out[a * mk * inner..(a + 1) * mk * inner];
        for j in 0..nk {
            let row = &src[j * inner..(j + 1) * inner];
            for i in 0..mk {
                let mij = m[(i, j)];
                if mij == ZERO {
                    continue;
                }
                let drow = &mut dst[i * inner..(i + 1) * inner];
                for (d, s) in drow.iter_mut().zip(row) {
                    *d += mij * s;
                }
            }
        }
    }
    out
}
