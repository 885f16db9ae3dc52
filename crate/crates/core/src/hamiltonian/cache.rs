//! Canonical phase-space keys and the element cache.
//!
//! Partner functions on a Gabor lattice are translates and modulates of one window:
//! `b_{a,b}(x) = exp(i p_b (x - x_a)) w_a(x)` with `w_a` independent of the momentum
//! index and `w_{a+1}(x_m) = w_a(x_{m-s})`. Elements of `x`-diagonal factors then
//! depend on the momenta only through their difference, and elements of
//! `k`-diagonal factors only on the x-index difference.

use std::collections::HashMap;

use faer::{c64, Mat};

use crate::linalg::ZERO;
use crate::space::Dof;
use crate::vn_basis::VonNeumannLattice;

use super::Factor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FactorKind {
    Position,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CanonicalKey {
    pub key: u64,
    /// The stored value is for the swapped pair and must be conjugated.
    pub conjugate: bool,
}

const ID_SHIFT: u32 = 40;

/// Key of the one-dimensional element `<b_j| O |b_k>` for factor `factor_id`.
pub fn canonical_key(
    lattice: &VonNeumannLattice,
    kind: FactorKind,
    factor_id: usize,
    cell_j: usize,
    cell_k: usize,
) -> CanonicalKey {
    let (mut j, mut k) = (lattice.coords(cell_j), lattice.coords(cell_k));
    let conjugate = j > k;
    if conjugate {
        std::mem::swap(&mut j, &mut k);
    }
    let (nx, np) = (lattice.nx() as u64, lattice.np() as u64);
    let ((a, b), (g, d)) = ((j.0 as u64, j.1 as u64), (k.0 as u64, k.1 as u64));
    let lin = match kind {
        FactorKind::Position => {
            let dp = d + np - 1 - b;
            (a * nx + g) * (2 * np - 1) + dp
        }
        FactorKind::Spectral => {
            let dx = (g + nx - a) % nx;
            (dx * np + b) * np + d
        }
    };
    CanonicalKey { key: ((factor_id as u64) << ID_SHIFT) | lin, conjugate }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
}

impl CacheStats {
    pub fn hit_rate(&self) -> f64 {
        let total = self.hits + self.misses;
        if total == 0 {
            0.0
        } else {
            self.hits as f64 / total as f64
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ElementCache {
    map: HashMap<u64, c64>,
    stats: CacheStats,
}

impl ElementCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> CacheStats {
        self.stats
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = u64> + '_ {
        self.map.keys().copied()
    }

    pub fn get(&mut self, key: u64) -> Option<c64> {
        let v = self.map.get(&key).copied();
        if v.is_some() {
            self.stats.hits += 1;
        }
        v
    }

    pub fn insert(&mut self, key: u64, value: c64) {
        self.stats.misses += 1;
        self.map.insert(key, value);
    }

    pub fn peek(&self, key: u64) -> Option<c64> {
        self.map.get(&key).copied()
    }
}

/// Per-DoF data for evaluating canonical one-dimensional elements.
#[derive(Debug, Clone)]
pub(crate) struct WindowTable {
    /// `w_a(x_m)` with one column per x index.
    windows: Mat<c64>,
}

impl WindowTable {
    pub(crate) fn new(dof: &Dof) -> Self {
        let lat = &dof.lattice;
        let xs = dof.grid().sample_points();
        let b = &dof.pair.b;
        let windows = Mat::from_fn(xs.len(), lat.nx(), |m, a| {
            let cell = lat.cell(a, 0);
            let c = lat.center(cell);
            b[(m, cell)] * c64::from_polar(1.0, -c.p * (xs[m] - c.x))
        });
        Self { windows }
    }

    /// Momentum-independent part of an unswapped element.
    fn canonical_value(&self, dof: &Dof, factor: &Factor, j: (usize, usize), k: (usize, usize)) -> c64 {
        let lat = &dof.lattice;
        let grid = dof.grid();
        let w = grid.weight();
        let xs = grid.sample_points();
        match factor {
            Factor::Position(v) => {
                let (a, b) = j;
                let (g, d) = k;
                let cj = lat.center(lat.cell(a, b));
                let ck = lat.center(lat.cell(g, d));
                let delta = ck.p - cj.p;
                let mut acc = ZERO;
                for m in 0..xs.len() {
                    let ph = c64::from_polar(1.0, delta * (xs[m] - ck.x));
                    acc += self.windows[(m, a)].conj() * v[m] * self.windows[(m, g)] * ph;
                }
                acc * w
            }
            Factor::Spectral(sym) => {
                let nx = lat.nx();
                let dx = (k.0 + nx - j.0) % nx;
                let left = lat.cell(0, j.1);
                let right = lat.cell(dx, k.1);
                let b = &dof.pair.b;
                let mut col: Vec<c64> = (0..xs.len()).map(|m| b[(m, right)]).collect();
                dof.spectral.apply(sym, &mut col);
                let acc: c64 = (0..xs.len()).map(|m| b[(m, left)].conj() * col[m]).sum();
                acc * w
            }
        }
    }

    /// Element `<b_j|O|b_k>` through the cache.
    pub(crate) fn element(
        &self,
        dof: &Dof,
        factor: &Factor,
        factor_id: usize,
        cache: &mut ElementCache,
        cell_j: usize,
        cell_k: usize,
    ) -> c64 {
        let lat = &dof.lattice;
        let key = canonical_key(lat, factor.kind(), factor_id, cell_j, cell_k);
        let (j, k) = if key.conjugate { (cell_k, cell_j) } else { (cell_j, cell_k) };
        let (cj, ck) = (lat.coords(j), lat.coords(k));
        let canon = match cache.get(key.key) {
            Some(v) => v,
            None => {
                let v = self.canonical_value(dof, factor, cj, ck);
                cache.insert(key.key, v);
                v
            }
        };
        let value = match factor {
            Factor::Position(_) => {
                let pj = lat.center(j);
                let pk = lat.center(k);
                canon * c64::from_polar(1.0, pj.p * (pj.x - pk.x))
            }
            Factor::Spectral(_) => canon,
        };
        if key.conjugate {
            value.conj()
        } else {
            value
        }
    }
}

/// `w b_j^H O b_k` by direct quadrature, bypassing all symmetry.
pub fn direct_element(dof: &Dof, factor: &Factor, cell_j: usize, cell_k: usize) -> c64 {
    let b = &dof.pair.b;
    let n = dof.grid().n_points();
    let mut col: Vec<c64> = (0..n).map(|m| b[(m, cell_k)]).collect();
    match factor {
        Factor::Position(v) => col.iter_mut().zip(v.iter()).for_each(|(c, x)| *c *= x),
        Factor::Spectral(s) => dof.spectral.apply(s, &mut col),
    }
    let acc: c64 = (0..n).map(|m| b[(m, cell_j)].conj() * col[m]).sum();
    acc * dof.pair.weight
}
