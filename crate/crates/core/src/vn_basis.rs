//! Von Neumann lattice of periodized Gaussians and its biorthogonal partner basis.

use std::f64::consts::PI;

use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{PvbError, Result};
use crate::fourier_grid::FourierGrid;
use crate::linalg;

/// Largest overlap condition number accepted by [`build_basis_pair`].
pub const MAX_CONDITION: f64 = 1e12;

/// Placement of the x centres relative to the sample points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    /// Staggered when both lattice dimensions are even, aligned otherwise.
    #[default]
    Auto,
    Aligned,
    /// Centres shifted by half a grid step.
    Staggered,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeCenter {
    pub x: f64,
    pub p: f64,
    pub ix: usize,
    pub ip: usize,
    /// Momentum as an integer multiple of `2 pi / L`.
    pub freq: i64,
}

#[derive(Debug, Clone)]
pub struct VonNeumannLattice {
    grid: FourierGrid,
    nx: usize,
    np: usize,
    sigma: f64,
    shift: f64,
    centers: Vec<LatticeCenter>,
}

pub fn build_lattice(
    grid: &FourierGrid,
    nx: usize,
    np: usize,
    sigma: Option<f64>,
    alignment: Alignment,
) -> Result<VonNeumannLattice> {
    let n = grid.n_points();
    if nx == 0 || np == 0 || nx * np != n {
        return Err(PvbError::InvalidLattice(format!("{nx} x {np} cells for {n} grid points")));
    }
    let dx_lat = grid.length() / nx as f64;
    let dp_lat = 2.0 * grid.bandwidth() / np as f64;
    let sigma = match sigma {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => return Err(PvbError::InvalidLattice(format!("width must be positive, got {s}"))),
        None => (dx_lat / (2.0 * dp_lat)).sqrt(),
    };
    let staggered = match alignment {
        Alignment::Auto => nx % 2 == 0 && np % 2 == 0,
        Alignment::Aligned => false,
        Alignment::Staggered => true,
    };
    let shift = if staggered { 0.5 * grid.dx() } else { 0.0 };
    let step = (n / nx) as f64;
    let f0 = ((np - 1) * nx / 2) as i64;
    let mut centers = Vec::with_capacity(n);
    for ix in 0..nx {
        let x = grid.x0() + grid.dx() * step * ix as f64 + shift;
        for ip in 0..np {
            let freq = (ip * nx) as i64 - f0;
            centers.push(LatticeCenter { x, p: freq as f64 * grid.dk(), ix, ip, freq });
        }
    }
    let nm = grid.n_max() as i64;
    if centers.iter().any(|c| c.freq <= -nm || c.freq > nm) {
        return Err(PvbError::InvalidLattice("momentum centres outside the grid band".into()));
    }
    Ok(VonNeumannLattice { grid: *grid, nx, np, sigma, shift, centers })
}

impl VonNeumannLattice {
    pub fn grid(&self) -> &FourierGrid {
        &self.grid
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn np(&self) -> usize {
        self.np
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.np
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn x_spacing(&self) -> f64 {
        self.grid.length() / self.nx as f64
    }

    pub fn p_spacing(&self) -> f64 {
        2.0 * self.grid.bandwidth() / self.np as f64
    }

    /// Grid points between neighbouring x centres.
    pub fn x_step(&self) -> usize {
        self.grid.n_points() / self.nx
    }

    pub fn centers(&self) -> &[LatticeCenter] {
        &self.centers
    }

    pub fn center(&self, cell: usize) -> &LatticeCenter {
        &self.centers[cell]
    }

    pub fn cell(&self, ix: usize, ip: usize) -> usize {
        ix * self.np + ip
    }

    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell / self.np, cell % self.np)
    }

    /// Periodized Gaussian of `cell` evaluated at `x`.
    pub fn gaussian(&self, cell: usize, x: f64) -> c64 {
        let c = &self.centers[cell];
        let l = self.grid.length();
        let d = x - c.x;
        let y = d - l * (d / l + 0.5).floor();
        let norm = (2.0 * PI * self.sigma * self.sigma).powf(-0.25);
        let env = norm * (-(y / (2.0 * self.sigma)).powi(2)).exp();
        c64::from_polar(env, c.p * y)
    }

    /// Matrix of all Gaussians on the sample points, one column per cell.
    pub fn gaussian_matrix(&self) -> Mat<c64> {
        let xs = self.grid.sample_points();
        Mat::from_fn(xs.len(), self.n_cells(), |m, k| self.gaussian(k, xs[m]))
    }
}

/// Gaussian basis and its biorthogonal partner on one grid.
#[derive(Debug, Clone)]
pub struct BasisPair {
    pub g: Mat<c64>,
    pub b: Mat<c64>,
    pub s: Mat<c64>,
    pub s_inv: Mat<c64>,
    pub weight: f64,
    pub condition: f64,
}

pub fn build_basis_pair(lattice: &VonNeumannLattice) -> Result<BasisPair> {
    let weight = lattice.grid().weight();
    let g = lattice.gaussian_matrix();
    let mut s = linalg::weighted_adjoint_mul(g.as_ref(), g.as_ref(), weight);
    linalg::hermitize(&mut s);
    let condition = linalg::hermitian_condition(s.as_ref())?;
    if !(condition <= MAX_CONDITION) {
        return Err(PvbError::IllConditioned { cond: condition });
    }
    let s_inv = linalg::hpd_inverse(s.as_ref())?;
    let b = &g * &s_inv;
    Ok(BasisPair { g, b, s, s_inv, weight, condition })
}

impl BasisPair {
    pub fn dim(&self) -> usize {
        self.g.ncols()
    }

    /// `w G^H`, the left inverse of `B`.
    pub fn g_dagger(&self) -> Mat<c64> {
        self.g.adjoint().to_owned() * crate::linalg::rs(self.weight)
    }

    /// Biorthogonality, completeness and overlap residuals.
    pub fn residuals(&self) -> (f64, f64, f64) {
        let n = self.dim();
        let id = linalg::identity(n);
        let gb = linalg::weighted_adjoint_mul(self.g.as_ref(), self.b.as_ref(), self.weight);
        let bg = &self.b * self.g.adjoint() * crate::linalg::rs(self.weight);
        let btb = linalg::weighted_adjoint_mul(self.b.as_ref(), self.b.as_ref(), self.weight);
        (
            linalg::max_abs_diff(gb.as_ref(), id.as_ref()),
            linalg::max_abs_diff(bg.as_ref(), id.as_ref()),
            linalg::max_abs_diff(btb.as_ref(), self.s_inv.as_ref()),
        )
    }
}

/// Coefficients `psi_B = w G^H psi`.
pub fn to_pvb(pair: &BasisPair, psi: &[c64]) -> Vec<c64> {
    let w = pair.weight;
    (0..pair.dim())
        .map(|k| linalg::dot(pair.g.col(k).try_as_col_major().unwrap().as_slice(), psi) * w)
        .collect()
}

pub fn from_pvb(pair: &BasisPair, coeffs: &[c64]) -> Vec<c64> {
    linalg::mat_vec(pair.b.as_ref(), coeffs)
}

/// `A_BB = G^dagger A B` for an operator given on the sample points.
pub fn transform_operator(pair: &BasisPair, a: MatRef<'_, c64>) -> Mat<c64> {
    linalg::weighted_adjoint_mul(pair.g.as_ref(), (a * &pair.b).as_ref(), pair.weight)
}

/// Magnitudes `|<g_k|psi>|` over all cells.
pub fn husimi_diag(pair: &BasisPair, psi: &[c64]) -> Vec<f64> {
    to_pvb(pair, psi).iter().map(|z| z.norm()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(l: f64, n: usize, nx: usize, np: usize) -> (VonNeumannLattice, BasisPair) {
        let g = FourierGrid::new(l, n, 0.0).unwrap();
        let lat = build_lattice(&g, nx, np, None, Alignment::Auto).unwrap();
        let p = build_basis_pair(&lat).unwrap();
        (lat, p)
    }

    #[test]
    fn lattice_layout() {
        let g = FourierGrid::new(80.0, 160, 0.0).unwrap();
        let lat = build_lattice(&g, 32, 5, None, Alignment::Auto).unwrap();
        assert_eq!(lat.n_cells(), 160);
        assert_eq!(lat.shift(), 0.0);
        let xs = g.sample_points();
        for c in lat.centers() {
            assert!(xs.iter().any(|&x| (x - c.x).abs() < 1e-12));
            assert!(g.k_values().iter().any(|&k| (k - c.p).abs() < 1e-12));
        }
        let ps: Vec<f64> = (0..5).map(|ip| lat.center(ip).p).collect();
        assert!((ps[0] + ps[4]).abs() < 1e-12 && ps[2].abs() < 1e-12);
        assert!((lat.x_spacing() * lat.p_spacing() - 2.0 * PI).abs() < 1e-12);
        assert!((lat.sigma() - (lat.x_spacing() / (2.0 * lat.p_spacing())).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_lattices() {
        let g = FourierGrid::new(10.0, 16, 0.0).unwrap();
        assert!(build_lattice(&g, 3, 5, None, Alignment::Auto).is_err());
        assert!(build_lattice(&g, 4, 4, Some(-1.0), Alignment::Auto).is_err());
    }

    #[test]
    fn aligned_even_lattice_is_singular() {
        let g = FourierGrid::new(20.0, 64, 0.0).unwrap();
        let lat = build_lattice(&g, 8, 8, None, Alignment::Aligned).unwrap();
        assert!(matches!(build_basis_pair(&lat), Err(PvbError::IllConditioned { .. })));
        let lat = build_lattice(&g, 8, 8, None, Alignment::Auto).unwrap();
        assert!(build_basis_pair(&lat).unwrap().condition < 1e3);
    }

    #[test]
    fn biorthogonal_small() {
        for (l, n, nx, np) in [(4.0, 16, 4, 4), (20.0, 64, 8, 8), (80.0, 160, 32, 5)] {
            let (_, p) = pair(l, n, nx, np);
            let (a, b, c) = p.residuals();
            assert!(a < 1e-9 && b < 1e-9 && c < 1e-9, "{n}: {a} {b} {c}");
        }
    }

    #[test]
    fn gaussian_is_normalized() {
        let (lat, p) = pair(40.0, 160, 16, 10);
        let s = &p.s;
        for k in [0, 37, 159] {
            assert!((s[(k, k)].re - 1.0).abs() < 1e-10);
        }
        let _ = lat;
    }

    #[test]
    fn roundtrip_and_locality() {
        let (lat, p) = pair(40.0, 160, 16, 10);
        let grid = *lat.grid();
        let x0 = lat.center(lat.cell(8, 5)).x + 0.5 * lat.x_spacing();
        let psi: Vec<c64> = crate::fourier_grid::collocation_project(
            |x| {
                let y = grid.physical(x - x0);
                c64::from_polar((-(y * y) / 4.0).exp(), 0.3 * y)
            },
            &grid,
        );
        let c = to_pvb(&p, &psi);
        let back = from_pvb(&p, &c);
        for (a, b) in psi.iter().zip(&back) {
            assert!((a - b).norm() < 1e-10);
        }
        let peak = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (k, z) in c.iter().enumerate() {
            let ctr = lat.center(k);
            let far = grid.physical(ctr.x - x0).abs() > 4.0 * lat.x_spacing()
                || (ctr.p - 0.3).abs() > 4.0 * lat.p_spacing();
            if far {
                assert!(z.norm() < 1e-6 * peak, "cell {k}: {}", z.norm());
            }
        }
    }
}
