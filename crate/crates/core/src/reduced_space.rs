//! Reduced subspace spanned by a subset of the biorthogonal functions.

use std::collections::HashSet;

use faer::linalg::solvers::Solve;
use faer::{c64, Mat, MatRef};

use crate::error::{PvbError, Result};
use crate::linalg::{self, ZERO};
use crate::space::PhaseSpace;
use crate::vn_basis::MAX_CONDITION;

/// Default neighbourhood radius for expansion.
pub const DEFAULT_RADIUS: f64 = std::f64::consts::SQRT_2 + 1e-9;

/// Incremental inverse updates between fresh recomputations.
pub const REFRESH_INTERVAL: usize = 50;

/// Ascending, duplicate-free list of global cell indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct CellSet(Vec<usize>);

impl CellSet {
    pub fn new(cells: impl IntoIterator<Item = usize>) -> Self {
        let mut v: Vec<usize> = cells.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    pub fn full(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.0.binary_search(&cell).is_ok()
    }

    pub fn position(&self, cell: usize) -> Option<usize> {
        self.0.binary_search(&cell).ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn complement(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|c| !self.contains(*c)).collect()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self.0.last() {
            Some(&c) if c >= n => Err(PvbError::CellOutOfRange(c)),
            _ => Ok(()),
        }
    }
}

impl FromIterator<usize> for CellSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Self::new(iter)
    }
}

/// Integer offsets in the 2d-dimensional lattice within `radius`, excluding zero.
pub fn ball_offsets(n_dofs: usize, radius: f64) -> Vec<Vec<i64>> {
    let dim = 2 * n_dofs;
    let r = radius.floor() as i64;
    let r2 = radius * radius;
    let mut out = Vec::new();
    let mut cur = vec![-r; dim];
    loop {
        let d2: i64 = cur.iter().map(|v| v * v).sum();
        if d2 > 0 && (d2 as f64) <= r2 {
            out.push(cur.clone());
        }
        let mut k = 0;
        loop {
            if k == dim {
                return out;
            }
            cur[k] += 1;
            if cur[k] <= r {
                break;
            }
            cur[k] = -r;
            k += 1;
        }
    }
}

/// Neighbour of `cell` displaced by `offset` (pairs of x/p steps per DoF).
/// x wraps around, p is clamped: leaving the p range gives `None`.
pub fn neighbor(space: &PhaseSpace, cell: usize, offset: &[i64]) -> Option<usize> {
    let coords = space.lattice_coords(cell);
    let mut parts = Vec::with_capacity(coords.len());
    for (d, &(ix, ip)) in coords.iter().enumerate() {
        let lat = &space.dof(d).lattice;
        let nx = lat.nx() as i64;
        let np = lat.np() as i64;
        let x = (ix as i64 + offset[2 * d]).rem_euclid(nx);
        let p = ip as i64 + offset[2 * d + 1];
        if p < 0 || p >= np {
            return None;
        }
        parts.push(lat.cell(x as usize, p as usize));
    }
    Some(space.join_cell(&parts))
}

pub fn expand_cells(cells: &CellSet, space: &PhaseSpace, radius: f64) -> CellSet {
    let offsets = ball_offsets(space.n_dofs(), radius);
    let mut out: HashSet<usize> = cells.iter().collect();
    for c in cells.iter() {
        for o in &offsets {
            if let Some(nb) = neighbor(space, c, o) {
                out.insert(nb);
            }
        }
    }
    CellSet::new(out)
}

/// Members with a non-member neighbour within `radius`.
///
/// The momentum edge of the lattice is not a boundary: nothing lies beyond it, and the
/// full cell set is exact.
pub fn boundary_cells(cells: &CellSet, space: &PhaseSpace, radius: f64) -> CellSet {
    let offsets = ball_offsets(space.n_dofs(), radius);
    cells
        .iter()
        .filter(|&c| {
            offsets
                .iter()
                .any(|o| neighbor(space, c, o).is_some_and(|nb| !cells.contains(nb)))
        })
        .collect()
}

/// Row-wise maximum modulus over a set of coefficient vectors.
pub fn max_amplitudes(coeffs: MatRef<'_, c64>) -> Vec<f64> {
    (0..coeffs.nrows())
        .map(|i| (0..coeffs.ncols()).map(|j| coeffs[(i, j)].norm()).fold(0.0, f64::max))
        .collect()
}

/// Keeps cells whose amplitude is at least `zeta`; never returns an empty set.
pub fn prune_cells(cells: &CellSet, amplitudes: &[f64], zeta: f64) -> CellSet {
    assert_eq!(cells.len(), amplitudes.len());
    let kept: CellSet = cells
        .iter()
        .zip(amplitudes)
        .filter(|(_, &a)| a >= zeta)
        .map(|(c, _)| c)
        .collect();
    if !kept.is_empty() || cells.is_empty() {
        return kept;
    }
    let best = amplitudes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    CellSet::new([cells.as_slice()[best]])
}

/// `(B^dagger B)` restricted to `rows x cols`.
pub fn gram_block(space: &PhaseSpace, rows: &[usize], cols: &[usize]) -> Mat<c64> {
    Mat::from_fn(rows.len(), cols.len(), |i, j| space.s_inv_entry(rows[i], cols[j]))
}

/// Inverse of `[[A, C], [C^H, D]]` from `A^-1`, inverting only the `D`-sized Schur complement.
pub fn inverse_add(a_inv: MatRef<'_, c64>, c: MatRef<'_, c64>, d: MatRef<'_, c64>) -> Result<Mat<c64>> {
    let n = a_inv.nrows();
    let m = d.nrows();
    if c.nrows() != n || c.ncols() != m || d.ncols() != m {
        return Err(PvbError::DimensionMismatch("block sizes do not match".into()));
    }
    if m == 0 {
        return Ok(a_inv.to_owned());
    }
    let x = a_inv * c;
    let mut schur = d - c.adjoint() * &x;
    linalg::hermitize(&mut schur);
    let f1 = linalg::hpd_inverse(schur.as_ref())
        .map_err(|_| PvbError::NotPositiveDefinite("Schur complement of added cells".into()))?;
    let f2 = &x * &f1;
    let top = a_inv + &f2 * x.adjoint();
    let mut z = Mat::zeros(n + m, n + m);
    z.as_mut().submatrix_mut(0, 0, n, n).copy_from(&top);
    z.as_mut().submatrix_mut(0, n, n, m).copy_from(-&f2);
    z.as_mut().submatrix_mut(n, 0, m, n).copy_from(-f2.adjoint());
    z.as_mut().submatrix_mut(n, n, m, m).copy_from(&f1);
    linalg::hermitize(&mut z);
    Ok(z)
}

/// Inverse of the block of `Z` that remains after deleting `removed` rows and columns,
/// computed from `Z^-1` alone. Kept indices stay in ascending order.
pub fn inverse_remove(z_inv: MatRef<'_, c64>, removed: &[usize]) -> Result<Mat<c64>> {
    let n = z_inv.nrows();
    let rm: HashSet<usize> = removed.iter().copied().collect();
    if rm.iter().any(|&i| i >= n) {
        return Err(PvbError::DimensionMismatch("removed index out of range".into()));
    }
    let keep: Vec<usize> = (0..n).filter(|i| !rm.contains(i)).collect();
    let mut rem: Vec<usize> = rm.into_iter().collect();
    rem.sort_unstable();
    let ws = select(z_inv, &keep, &keep);
    if rem.is_empty() {
        return Ok(ws);
    }
    let wc = select(z_inv, &keep, &rem);
    let wd = select(z_inv, &rem, &rem);
    let y = wd.partial_piv_lu().solve(wc.adjoint().to_owned());
    if (0..y.ncols()).any(|j| (0..y.nrows()).any(|i| !y[(i, j)].re.is_finite() || !y[(i, j)].im.is_finite())) {
        return Err(PvbError::NotPositiveDefinite("removed block is singular".into()));
    }
    let mut a = ws - &wc * &y;
    linalg::hermitize(&mut a);
    Ok(a)
}

fn select(m: MatRef<'_, c64>, rows: &[usize], cols: &[usize]) -> Mat<c64> {
    Mat::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}


/// How a basis change maps old coefficient positions onto new ones.
#[derive(Debug, Clone, Default)]
pub struct BasisChange {
    /// For each new position, the old position of the same cell if it was kept.
    pub origin: Vec<Option<usize>>,
    pub added: Vec<usize>,
    pub removed: Vec<usize>,
    pub refreshed: bool,
}

impl BasisChange {
    /// Carry coefficients across; added cells start at zero.
    pub fn carry(&self, old: &[c64]) -> Vec<c64> {
        self.origin.iter().map(|o| o.map_or(ZERO, |i| old[i])).collect()
    }
}

/// Active cells with `S~^-1 = B~^dagger B~` and its inverse `S~`.
#[derive(Debug, Clone)]
pub struct ReducedBasis {
    cells: CellSet,
    s_inv_tilde: Mat<c64>,
    s_tilde: Mat<c64>,
    updates: usize,
}

impl ReducedBasis {
    pub fn new(space: &PhaseSpace, cells: CellSet) -> Result<Self> {
        if cells.is_empty() {
            return Err(PvbError::EmptySet);
        }
        cells.validate(space.n_cells())?;
        let (s_inv_tilde, s_tilde) = fresh(space, &cells)?;
        Ok(Self { cells, s_inv_tilde, s_tilde, updates: 0 })
    }

    pub fn cells(&self) -> &CellSet {
        &self.cells
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn s_inv_tilde(&self) -> &Mat<c64> {
        &self.s_inv_tilde
    }

    pub fn s_tilde(&self) -> &Mat<c64> {
        &self.s_tilde
    }

    pub fn updates_since_refresh(&self) -> usize {
        self.updates
    }

    pub fn refresh(&mut self, space: &PhaseSpace) -> Result<()> {
        let (a, b) = fresh(space, &self.cells)?;
        self.s_inv_tilde = a;
        self.s_tilde = b;
        self.updates = 0;
        Ok(())
    }

    /// Move to a new cell set using block inverse updates.
    pub fn update(&mut self, space: &PhaseSpace, new_cells: CellSet) -> Result<BasisChange> {
        if new_cells.is_empty() {
            return Err(PvbError::EmptySet);
        }
        new_cells.validate(space.n_cells())?;
        let old = self.cells.as_slice();
        let removed_pos: Vec<usize> = (0..old.len()).filter(|&i| !new_cells.contains(old[i])).collect();
        let kept: Vec<usize> = old.iter().copied().filter(|&c| new_cells.contains(c)).collect();
        let added: Vec<usize> = new_cells.iter().filter(|&c| !self.cells.contains(c)).collect();
        let removed: Vec<usize> = removed_pos.iter().map(|&i| old[i]).collect();
        let origin: Vec<Option<usize>> = new_cells.iter().map(|c| self.cells.position(c)).collect();

        let mut refreshed = false;
        if kept.is_empty() || self.updates + 1 >= REFRESH_INTERVAL {
            let (a, b) = fresh(space, &new_cells)?;
            self.s_inv_tilde = a;
            self.s_tilde = b;
            self.updates = 0;
            refreshed = true;
        } else if !removed.is_empty() || !added.is_empty() {
            let kept_inv = inverse_remove(self.s_tilde.as_ref(), &removed_pos)?;
            let c = gram_block(space, &kept, &added);
            let d = gram_block(space, &added, &added);
            let z = inverse_add(kept_inv.as_ref(), c.as_ref(), d.as_ref())?;
            // layout is [kept, added]; permute into ascending order
            let order: Vec<usize> = kept.iter().chain(&added).copied().collect();
            let mut perm = vec![0usize; order.len()];
            for (slot, &cell) in order.iter().enumerate() {
                perm[new_cells.position(cell).unwrap()] = slot;
            }
            self.s_tilde = select(z.as_ref(), &perm, &perm);
            self.s_inv_tilde = gram_block(space, new_cells.as_slice(), new_cells.as_slice());
            self.updates += 1;
        }
        self.cells = new_cells;
        Ok(BasisChange { origin, added, removed, refreshed })
    }

    /// `B~`, sampled on the product grid.
    pub fn b_tilde(&self, space: &PhaseSpace) -> Mat<c64> {
        space.b_columns(self.cells.as_slice())
    }

    /// Physical norm squared of reduced coefficients, `c^H S~^-1 c`.
    pub fn norm_sqr(&self, coeffs: &[c64]) -> f64 {
        let y = linalg::mat_vec(self.s_inv_tilde.as_ref(), coeffs);
        linalg::dot(coeffs, &y).re
    }

    /// Orthogonal projection of a sampled state onto the reduced space.
    pub fn project(&self, space: &PhaseSpace, psi: &[c64]) -> Vec<c64> {
        let full = space.b_dagger_apply(psi);
        let sub: Vec<c64> = self.cells.iter().map(|c| full[c]).collect();
        linalg::mat_vec(self.s_tilde.as_ref(), &sub)
    }
}

fn fresh(space: &PhaseSpace, cells: &CellSet) -> Result<(Mat<c64>, Mat<c64>)> {
    let s_inv = gram_block(space, cells.as_slice(), cells.as_slice());
    let cond = linalg::hermitian_condition(s_inv.as_ref())?;
    if !(cond <= MAX_CONDITION) {
        return Err(PvbError::IllConditioned { cond });
    }
    let s = linalg::hpd_inverse(s_inv.as_ref())?;
    Ok((s_inv, s))
}

/// `G~ = B~ S~`.
pub fn reduced_g(rb: &ReducedBasis, space: &PhaseSpace) -> Mat<c64> {
    rb.b_tilde(space) * rb.s_tilde()
}

/// Gaussians outside the cell set and their pseudo-inverse partners.
pub fn complementary_basis(space: &PhaseSpace, cells: &CellSet) -> Result<(Mat<c64>, Mat<c64>)> {
    let rest = cells.complement(space.n_cells());
    if rest.is_empty() {
        return Err(PvbError::EmptySet);
    }
    let gbar = space.g_columns(&rest);
    let gram = linalg::weighted_adjoint_mul(gbar.as_ref(), gbar.as_ref(), space.weight());
    let bbar = &gbar * linalg::hpd_inverse(gram.as_ref())?;
    Ok((gbar, bbar))
}

/// `P~ = B~ G~^dagger` on the sample points.
pub fn reduced_projector(rb: &ReducedBasis, space: &PhaseSpace) -> Mat<c64> {
    let bt = rb.b_tilde(space);
    let gt = &bt * rb.s_tilde();
    &bt * gt.adjoint() * crate::linalg::rs(space.weight())
}

/// `R S~ R^dagger S^-1`, the reduced projector in the B representation.
pub fn projector_bb(rb: &ReducedBasis, space: &PhaseSpace) -> Mat<c64> {
    let n = space.n_cells();
    let mut rsr = Mat::<c64>::zeros(n, n);
    for (i, ci) in rb.cells().iter().enumerate() {
        for (j, cj) in rb.cells().iter().enumerate() {
            rsr[(ci, cj)] = rb.s_tilde()[(i, j)];
        }
    }
    rsr * space.full_s_inv()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier_grid::FourierGrid;
    use crate::vn_basis::{build_lattice, Alignment};
    use rand::{Rng, SeedableRng};

    fn space(n: usize, nx: usize, np: usize, l: f64) -> PhaseSpace {
        let g = FourierGrid::new(l, n, 0.0).unwrap();
        PhaseSpace::new(vec![build_lattice(&g, nx, np, None, Alignment::Auto).unwrap()]).unwrap()
    }

    fn random_hpd(n: usize, rng: &mut impl Rng) -> Mat<c64> {
        let a = Mat::from_fn(n, n, |_, _| c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let mut m = &a * a.adjoint() + linalg::identity(n) * crate::linalg::rs(n as f64 * 0.1);
        linalg::hermitize(&mut m);
        m
    }

    #[test]
    fn ball_sizes() {
        assert_eq!(ball_offsets(1, DEFAULT_RADIUS).len(), 8);
        assert_eq!(ball_offsets(1, 1.0 + 1e-9).len(), 4);
        assert_eq!(ball_offsets(2, DEFAULT_RADIUS).len(), 32);
    }

    #[test]
    fn expansion_geometry() {
        let sp = space(64, 8, 8, 20.0);
        let lat = &sp.dof(0).lattice;
        let c = lat.cell(4, 4);
        let one = CellSet::new([c]);
        assert_eq!(expand_cells(&one, &sp, DEFAULT_RADIUS).len(), 9);
        assert_eq!(expand_cells(&one, &sp, 1.0 + 1e-9).len(), 5);
        let edge = CellSet::new([lat.cell(0, 0)]);
        let e = expand_cells(&edge, &sp, DEFAULT_RADIUS);
        assert_eq!(e.len(), 6);
        assert!(e.contains(lat.cell(7, 1)));
    }

    #[test]
    fn boundary_geometry() {
        let sp = space(64, 8, 8, 20.0);
        let lat = &sp.dof(0).lattice;
        let block: CellSet = (3..6).flat_map(|x| (3..6).map(move |p| lat.cell(x, p))).collect();
        let b = boundary_cells(&block, &sp, DEFAULT_RADIUS);
        assert_eq!(b.len(), 8);
        assert!(!b.contains(lat.cell(4, 4)));
        let one = CellSet::new([lat.cell(2, 2)]);
        assert_eq!(boundary_cells(&one, &sp, DEFAULT_RADIUS), one);
        let full = CellSet::full(64);
        assert!(boundary_cells(&full, &sp, DEFAULT_RADIUS).is_empty());
        // a full momentum column band has boundary only along x
        let band: CellSet = (2..5).flat_map(|x| (0..8).map(move |p| lat.cell(x, p))).collect();
        let bb = boundary_cells(&band, &sp, DEFAULT_RADIUS);
        assert_eq!(bb.len(), 16);
        assert!(bb.iter().all(|c| lat.coords(c).0 != 3));
    }

    #[test]
    fn prune_rules() {
        let cells = CellSet::new([1, 2, 3]);
        assert_eq!(prune_cells(&cells, &[1.0, 2.0, 3.0], 0.5), cells);
        assert_eq!(prune_cells(&cells, &[0.1, 2.0, 0.3], 0.5), CellSet::new([2]));
        assert_eq!(prune_cells(&cells, &[0.1, 0.2, 0.05], 0.5), CellSet::new([2]));
    }

    #[test]
    fn block_add_matches_dense() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let z = random_hpd(40, &mut rng);
        let a = z.as_ref().submatrix(0, 0, 36, 36).to_owned();
        let a_inv = linalg::hpd_inverse(a.as_ref()).unwrap();
        let zi = inverse_add(a_inv.as_ref(), z.as_ref().submatrix(0, 36, 36, 4), z.as_ref().submatrix(36, 36, 4, 4)).unwrap();
        let want = linalg::hpd_inverse(z.as_ref()).unwrap();
        assert!(linalg::max_abs_diff(zi.as_ref(), want.as_ref()) < 1e-9);

        let id = linalg::identity(3);
        let zero = Mat::<c64>::zeros(3, 2);
        let z2 = inverse_add(id.as_ref(), zero.as_ref(), linalg::identity(2).as_ref()).unwrap();
        assert!(linalg::max_abs_diff(z2.as_ref(), linalg::identity(5).as_ref()) < 1e-15);
        let same = inverse_add(a_inv.as_ref(), Mat::<c64>::zeros(36, 0).as_ref(), Mat::<c64>::zeros(0, 0).as_ref()).unwrap();
        assert!(linalg::max_abs_diff(same.as_ref(), a_inv.as_ref()) == 0.0);
    }

    #[test]
    fn block_remove_matches_dense() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let z = random_hpd(40, &mut rng);
        let zi = linalg::hpd_inverse(z.as_ref()).unwrap();
        let removed = [0usize, 5, 9, 17, 22, 30, 31, 39];
        let got = inverse_remove(zi.as_ref(), &removed).unwrap();
        let keep: Vec<usize> = (0..40).filter(|i| !removed.contains(i)).collect();
        let want = linalg::hpd_inverse(select(z.as_ref(), &keep, &keep).as_ref()).unwrap();
        assert!(linalg::max_abs_diff(got.as_ref(), want.as_ref()) < 1e-9);
    }

    #[test]
    fn non_pd_schur_is_rejected() {
        let a = linalg::identity(2);
        let c = Mat::from_fn(2, 1, |_, _| c64::new(1.0, 0.0));
        let d = Mat::from_fn(1, 1, |_, _| c64::new(1.0, 0.0));
        assert!(inverse_add(a.as_ref(), c.as_ref(), d.as_ref()).is_err());
    }

    #[test]
    fn singleton_and_full_sets() {
        let sp = space(64, 8, 8, 20.0);
        let rb = ReducedBasis::new(&sp, CellSet::new([10])).unwrap();
        let b = &sp.dof(0).pair.b;
        let bb: f64 = (0..64).map(|m| b[(m, 10)].norm_sqr()).sum::<f64>() * sp.weight();
        assert!((rb.s_tilde()[(0, 0)].re - 1.0 / bb).abs() < 1e-12);

        let full = ReducedBasis::new(&sp, CellSet::full(64)).unwrap();
        assert!(linalg::max_abs_diff(full.s_inv_tilde().as_ref(), sp.dof(0).pair.s_inv.as_ref()) < 1e-9);
        let gt = reduced_g(&full, &sp);
        assert!(linalg::max_abs_diff(gt.as_ref(), sp.dof(0).pair.g.as_ref()) < 1e-8);
        let pbb = projector_bb(&full, &sp);
        assert!(linalg::max_abs_diff(pbb.as_ref(), linalg::identity(64).as_ref()) < 1e-8);
    }

    #[test]
    fn incremental_matches_fresh() {
        let sp = space(64, 8, 8, 20.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut rb = ReducedBasis::new(&sp, CellSet::new(0..20)).unwrap();
        for _ in 0..20 {
            let next: CellSet = (0..64).filter(|_| rng.gen_bool(0.4)).collect();
            if next.is_empty() {
                continue;
            }
            let old = rb.cells().clone();
            let change = rb.update(&sp, next.clone()).unwrap();
            for (i, o) in change.origin.iter().enumerate() {
                if let Some(o) = o {
                    assert_eq!(old.as_slice()[*o], next.as_slice()[i]);
                }
            }
            let fresh = ReducedBasis::new(&sp, next).unwrap();
            assert!(linalg::max_abs_diff(rb.s_tilde().as_ref(), fresh.s_tilde().as_ref()) < 1e-8);
        }
    }

    #[test]
    fn reduced_identities() {
        let sp = space(64, 8, 8, 20.0);
        let lat = &sp.dof(0).lattice;
        let cells: CellSet = (1..6).flat_map(|x| (2..7).map(move |p| lat.cell(x, p))).collect();
        let rb = ReducedBasis::new(&sp, cells.clone()).unwrap();
        let w = sp.weight();
        let bt = rb.b_tilde(&sp);
        let gt = reduced_g(&rb, &sp);
        let gtb = linalg::weighted_adjoint_mul(gt.as_ref(), bt.as_ref(), w);
        assert!(linalg::max_abs_diff(gtb.as_ref(), linalg::identity(rb.dim()).as_ref()) < 1e-9);

        let p = reduced_projector(&rb, &sp);
        assert!(linalg::max_abs_diff((&p * &p).as_ref(), p.as_ref()) < 1e-8);

        let (gbar, bbar) = complementary_basis(&sp, &cells).unwrap();
        let gb = linalg::weighted_adjoint_mul(gbar.as_ref(), bt.as_ref(), w);
        assert!(linalg::max_abs(gb.as_ref()) < 1e-9);
        let gbb = linalg::weighted_adjoint_mul(gbar.as_ref(), bbar.as_ref(), w);
        assert!(linalg::max_abs_diff(gbb.as_ref(), linalg::identity(gbar.ncols()).as_ref()) < 1e-9);
        let pbar = &bbar * gbar.adjoint() * crate::linalg::rs(w);
        assert!(linalg::max_abs_diff((&p + &pbar).as_ref(), linalg::identity(64).as_ref()) < 1e-8);

        // deformed Gaussians
        let g = &sp.dof(0).pair.g;
        for (i, k) in cells.iter().enumerate() {
            let overlaps = linalg::weighted_adjoint_mul(gbar.as_ref(), g.as_ref().subcols(k, 1), w);
            let want = g.as_ref().subcols(k, 1) - &bbar * &overlaps;
            assert!(linalg::max_abs_diff(gt.as_ref().subcols(i, 1), want.as_ref()) < 1e-8);
        }

        // B-representation projector composed the long way
        let pbb = projector_bb(&rb, &sp);
        let pair = &sp.dof(0).pair;
        let composed = pair.g_dagger() * &p * &pair.b;
        assert!(linalg::max_abs_diff(pbb.as_ref(), composed.as_ref()) < 1e-8);
        assert!(linalg::max_abs_diff((&pbb * &pbb).as_ref(), pbb.as_ref()) < 1e-8);
    }

    #[test]
    fn interior_gaussian_barely_deformed() {
        let sp = space(160, 16, 10, 40.0);
        let lat = &sp.dof(0).lattice;
        let cells: CellSet = (2..14).flat_map(|x| (1..9).map(move |p| lat.cell(x, p))).collect();
        let rb = ReducedBasis::new(&sp, cells.clone()).unwrap();
        let gt = reduced_g(&rb, &sp);
        let k = lat.cell(8, 5);
        let i = cells.position(k).unwrap();
        let g = &sp.dof(0).pair.g;
        let diff: f64 = (0..160).map(|m| (gt[(m, i)] - g[(m, k)]).norm_sqr()).sum::<f64>() * sp.weight();
        assert!(diff.sqrt() < 1e-3, "{}", diff.sqrt());
    }
}
