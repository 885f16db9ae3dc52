//! Hamiltonians as sums of products of one-dimensional operators.

mod assembly;
mod cache;
mod potfit;

use std::sync::Arc;

use faer::{c64, Mat};

use crate::error::{PvbError, Result};
use crate::fourier_grid::{kinetic_symbol, spectral_matrix};
use crate::linalg::ZERO;
use crate::space::{split_index, PhaseSpace};

pub use assembly::{apply_h1, build_h1_via_g, h1_matrix, HamiltonianAssembler, ReducedHamiltonian};
pub use cache::{canonical_key, CacheStats, CanonicalKey, ElementCache, FactorKind};
pub use potfit::{potfit2, reconstruction_error as sop_residual, PotfitResult};

/// One-dimensional operator acting on a single degree of freedom.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    /// Multiplication by values on the sample points.
    Position(Arc<[f64]>),
    /// Multiplication by a function of `k`, given in `k_values` order.
    Spectral(Arc<[f64]>),
}

impl Factor {
    pub fn kind(&self) -> FactorKind {
        match self {
            Factor::Position(_) => FactorKind::Position,
            Factor::Spectral(_) => FactorKind::Spectral,
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            Factor::Position(v) | Factor::Spectral(v) => v,
        }
    }
}

/// `coefficient * prod_d factor_d`; DoFs without a factor carry the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductTerm {
    pub coefficient: f64,
    pub factors: Vec<(usize, Factor)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SopTerm {
    pub coefficient: f64,
    /// One unit-norm vector per DoF, sampled on that DoF's grid.
    pub factors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Coupling {
    /// Physical coordinate `x` in `[-L/2, L/2)`.
    Position,
    /// Momentum `k`.
    Momentum,
    Samples(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlTerm {
    pub dof: usize,
    pub coupling: Coupling,
    /// Index of the scalar signal `u_i(t)` multiplying this coupling.
    pub signal: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    pub kinetic: Vec<Option<Vec<f64>>>,
    pub potentials: Vec<Option<Vec<f64>>>,
    pub sop_terms: Vec<SopTerm>,
    pub controls: Vec<ControlTerm>,
    point_dims: Vec<usize>,
}

impl OperatorSpec {
    /// Empty operator on the grids of `space`.
    pub fn new(space: &PhaseSpace) -> Self {
        let d = space.n_dofs();
        Self {
            kinetic: vec![None; d],
            potentials: vec![None; d],
            sop_terms: Vec::new(),
            controls: Vec::new(),
            point_dims: space.point_dims(),
        }
    }

    /// `k^2 / 2m` on every DoF.
    pub fn with_kinetic(mut self, space: &PhaseSpace, masses: &[f64]) -> Self {
        for (d, &m) in masses.iter().enumerate() {
            self.kinetic[d] = Some(kinetic_symbol(space.dof(d).grid(), m));
        }
        self
    }

    pub fn with_potential(mut self, dof: usize, samples: Vec<f64>) -> Self {
        self.potentials[dof] = Some(samples);
        self
    }

    pub fn with_sop(mut self, terms: Vec<SopTerm>) -> Self {
        self.sop_terms.extend(terms);
        self
    }

    pub fn with_control(mut self, term: ControlTerm) -> Self {
        self.controls.push(term);
        self
    }

    pub fn n_dofs(&self) -> usize {
        self.point_dims.len()
    }

    pub fn n_signals(&self) -> usize {
        self.controls.iter().map(|c| c.signal + 1).max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.n_dofs();
        let bad = |what: &str| Err(PvbError::DimensionMismatch(what.to_string()));
        if self.kinetic.len() != d || self.potentials.len() != d {
            return bad("per-DoF operator count");
        }
        for (i, n) in self.point_dims.iter().enumerate() {
            if self.kinetic[i].as_ref().is_some_and(|v| v.len() != *n) {
                return bad("kinetic symbol length");
            }
            if self.potentials[i].as_ref().is_some_and(|v| v.len() != *n) {
                return bad("potential length");
            }
        }
        for t in &self.sop_terms {
            if t.factors.len() != d || t.factors.iter().zip(&self.point_dims).any(|(f, n)| f.len() != *n) {
                return bad("sum-of-products factor shape");
            }
        }
        for c in &self.controls {
            if c.dof >= d {
                return bad("control term DoF");
            }
            if let Coupling::Samples(v) = &c.coupling {
                if v.len() != self.point_dims[c.dof] {
                    return bad("control samples length");
                }
            }
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let all_finite = self.kinetic.iter().flatten().all(|v| finite(v))
            && self.potentials.iter().flatten().all(|v| finite(v))
            && self.sop_terms.iter().all(|t| t.coefficient.is_finite() && t.factors.iter().all(|f| finite(f)));
        if !all_finite {
            return Err(PvbError::InvalidInput("non-finite operator values".into()));
        }
        Ok(())
    }

    /// Static potential (per-DoF parts plus sum-of-products terms) at one product-grid point.
    pub fn potential_at(&self, point: &[usize]) -> f64 {
        let mut v = 0.0;
        for (d, pot) in self.potentials.iter().enumerate() {
            if let Some(pot) = pot {
                v += pot[point[d]];
            }
        }
        for t in &self.sop_terms {
            v += t.coefficient * t.factors.iter().zip(point).map(|(f, &i)| f[i]).product::<f64>();
        }
        v
    }

    /// Time-independent part as product terms.
    pub fn drift_terms(&self) -> Vec<ProductTerm> {
        let mut out = Vec::new();
        for (d, t) in self.kinetic.iter().enumerate() {
            if let Some(t) = t {
                out.push(ProductTerm { coefficient: 1.0, factors: vec![(d, Factor::Spectral(t.clone().into()))] });
            }
        }
        for (d, v) in self.potentials.iter().enumerate() {
            if let Some(v) = v {
                out.push(ProductTerm { coefficient: 1.0, factors: vec![(d, Factor::Position(v.clone().into()))] });
            }
        }
        for t in &self.sop_terms {
            out.push(ProductTerm {
                coefficient: t.coefficient,
                factors: t.factors.iter().enumerate().map(|(d, f)| (d, Factor::Position(f.clone().into()))).collect(),
            });
        }
        out
    }

    /// Coupling operators grouped by signal index.
    pub fn control_terms(&self, space: &PhaseSpace) -> Vec<Vec<ProductTerm>> {
        let mut out = vec![Vec::new(); self.n_signals()];
        for c in &self.controls {
            let grid = space.dof(c.dof).grid();
            let factor = match &c.coupling {
                Coupling::Position => Factor::Position(grid.physical_points().into()),
                Coupling::Momentum => Factor::Spectral(grid.k_values().into()),
                Coupling::Samples(v) => Factor::Position(v.clone().into()),
            };
            out[c.signal].push(ProductTerm { coefficient: 1.0, factors: vec![(c.dof, factor)] });
        }
        out
    }

    /// All terms of `H(u) = H_d + sum_i u_i H_c,i`.
    pub fn terms_at(&self, space: &PhaseSpace, u: &[f64]) -> Vec<ProductTerm> {
        let mut out = self.drift_terms();
        for (i, group) in self.control_terms(space).into_iter().enumerate() {
            let ui = u.get(i).copied().unwrap_or(0.0);
            if ui == 0.0 {
                continue;
            }
            for mut t in group {
                t.coefficient *= ui;
                out.push(t);
            }
        }
        out
    }
}

/// Apply a set of product terms to a sampled state on the product grid.
pub fn apply_terms_grid(terms: &[ProductTerm], space: &PhaseSpace, psi: &[c64]) -> Result<Vec<c64>> {
    let dims = space.point_dims();
    if psi.len() != space.n_points() {
        return Err(PvbError::DimensionMismatch(format!(
            "state has {} samples, grid has {}",
            psi.len(),
            space.n_points()
        )));
    }
    let mut out = vec![ZERO; psi.len()];
    for term in terms {
        let mut cur = psi.to_vec();
        for (d, f) in &term.factors {
            match f {
                Factor::Position(v) => {
                    for (i, z) in cur.iter_mut().enumerate() {
                        *z *= v[split_index(i, &dims)[*d]];
                    }
                }
                Factor::Spectral(sym) => {
                    apply_spectral_mode(space, &dims, *d, sym, &mut cur);
                }
            }
        }
        for (o, c) in out.iter_mut().zip(&cur) {
            *o += c * term.coefficient;
        }
    }
    Ok(out)
}

fn apply_spectral_mode(space: &PhaseSpace, dims: &[usize], d: usize, sym: &[f64], t: &mut [c64]) {
    let nd = dims[d];
    let inner: usize = dims[d + 1..].iter().product();
    let outer: usize = dims[..d].iter().product();
    let applier = &space.dof(d).spectral;
    let mut fiber = vec![ZERO; nd];
    for a in 0..outer {
        for c in 0..inner {
            let base = a * nd * inner + c;
            for (j, f) in fiber.iter_mut().enumerate() {
                *f = t[base + j * inner];
            }
            applier.apply(sym, &mut fiber);
            for (j, f) in fiber.iter().enumerate() {
                t[base + j * inner] = *f;
            }
        }
    }
}

/// `H psi` on the product grid, with control amplitudes `u`.
pub fn apply_h_grid(spec: &OperatorSpec, space: &PhaseSpace, psi: &[c64], u: &[f64]) -> Result<Vec<c64>> {
    apply_terms_grid(&spec.terms_at(space, u), space, psi)
}

enum Dense1d {
    Diag(Arc<[f64]>),
    Full(Mat<c64>),
}

/// Visits every nonzero entry of the sampled Hamiltonian.
fn for_each_grid_entry(terms: &[ProductTerm], space: &PhaseSpace, mut visit: impl FnMut(usize, usize, c64)) {
    let dims = space.point_dims();
    let n = space.n_points();
    for term in terms {
        let mut per_dof: Vec<Option<Dense1d>> = (0..dims.len()).map(|_| None).collect();
        for (d, f) in &term.factors {
            per_dof[*d] = Some(match f {
                Factor::Position(v) => Dense1d::Diag(v.clone()),
                Factor::Spectral(s) => Dense1d::Full(spectral_matrix(space.dof(*d).grid(), s)),
            });
        }
        let dense: Vec<usize> = (0..dims.len()).filter(|&d| matches!(per_dof[d], Some(Dense1d::Full(_)))).collect();
        let span: usize = dense.iter().map(|&d| dims[d]).product();
        for i in 0..n {
            let is = split_index(i, &dims);
            let mut diag_part = term.coefficient;
            for (d, f) in per_dof.iter().enumerate() {
                if let Some(Dense1d::Diag(v)) = f {
                    diag_part *= v[is[d]];
                }
            }
            if diag_part == 0.0 {
                continue;
            }
            for combo in 0..span {
                let mut js = is.clone();
                let mut rem = combo;
                let mut val = c64::new(diag_part, 0.0);
                for &d in dense.iter().rev() {
                    js[d] = rem % dims[d];
                    rem /= dims[d];
                    if let Some(Dense1d::Full(m)) = &per_dof[d] {
                        val *= m[(is[d], js[d])];
                    }
                }
                let j = crate::space::join_index(&js, &dims);
                visit(i, j, val);
            }
        }
    }
}

/// Dense sampled Hamiltonian (test scale).
pub fn grid_matrix(spec: &OperatorSpec, space: &PhaseSpace, u: &[f64]) -> Result<Mat<c64>> {
    let n = space.n_points();
    if n > 4096 {
        return Err(PvbError::TooLarge(n));
    }
    let mut h = Mat::<c64>::zeros(n, n);
    for_each_grid_entry(&spec.terms_at(space, u), space, |i, j, v| h[(i, j)] += v);
    Ok(h)
}

/// Dense sampled Hamiltonian as a real matrix, if it is real to `1e-13` relative.
pub fn grid_matrix_real(spec: &OperatorSpec, space: &PhaseSpace, u: &[f64]) -> Result<Option<Mat<f64>>> {
    let n = space.n_points();
    if n > 4096 {
        return Err(PvbError::TooLarge(n));
    }
    let mut h = Mat::<f64>::zeros(n, n);
    let mut max_re = 0.0f64;
    let mut max_im = 0.0f64;
    for_each_grid_entry(&spec.terms_at(space, u), space, |i, j, v| {
        h[(i, j)] += v.re;
        max_re = max_re.max(v.re.abs());
        max_im = max_im.max(v.im.abs());
    });
    Ok((max_im <= 1e-13 * max_re.max(1.0)).then_some(h))
}
