//! Built-in model Hamiltonians.

use faer::Mat;

use crate::error::{PvbError, Result};
use crate::hamiltonian::{potfit2, OperatorSpec, PotfitResult};
use crate::space::PhaseSpace;

/// Soft-core regularizer of the one-dimensional helium model.
pub const HELIUM_SOFT_CORE: f64 = 0.739707902;

fn physical(space: &PhaseSpace, d: usize) -> Vec<f64> {
    space.dof(d).grid().physical_points()
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(PvbError::InvalidInput(format!("{name} must be positive and finite, got {v}")))
    }
}

pub fn free(space: &PhaseSpace, masses: &[f64]) -> Result<OperatorSpec> {
    if masses.len() != space.n_dofs() {
        return Err(PvbError::DimensionMismatch(format!(
            "{} masses for {} degrees of freedom",
            masses.len(),
            space.n_dofs()
        )));
    }
    for &m in masses {
        check_positive("mass", m)?;
    }
    Ok(OperatorSpec::new(space).with_kinetic(space, masses))
}

/// `m w^2 b ((x/d)^4 - 2 (x/d)^2 + 1)` on a single DoF: minima 0 at `+-d`, barrier `m w^2 b`.
pub fn double_well(space: &PhaseSpace, m: f64, omega: f64, b: f64, d: f64) -> Result<OperatorSpec> {
    if space.n_dofs() != 1 {
        return Err(PvbError::InvalidInput("the double well has one degree of freedom".into()));
    }
    check_positive("omega", omega)?;
    check_positive("b", b)?;
    check_positive("d", d)?;
    let v = physical(space, 0)
        .iter()
        .map(|x| {
            let y = (x / d).powi(2);
            m * omega * omega * b * (y * y - 2.0 * y + 1.0)
        })
        .collect();
    Ok(free(space, &[m])?.with_potential(0, v))
}

/// Independent harmonic oscillators, one per DoF.
pub fn harmonic(space: &PhaseSpace, m: f64, omega: f64) -> Result<OperatorSpec> {
    check_positive("omega", omega)?;
    let masses = vec![m; space.n_dofs()];
    let mut spec = free(space, &masses)?;
    for d in 0..space.n_dofs() {
        let v = physical(space, d).iter().map(|x| 0.5 * m * omega * omega * x * x).collect();
        spec = spec.with_potential(d, v);
    }
    Ok(spec)
}

#[derive(Debug, Clone)]
pub struct HeliumModel {
    pub spec: OperatorSpec,
    pub interaction: PotfitResult,
}

/// Two soft-core electrons around a nucleus of charge `nuclear_charge`.
///
/// The electron-electron repulsion is expanded in products of one-electron factors
/// keeping singular values above `sop_tolerance`.
pub fn helium1d(
    space: &PhaseSpace,
    soft_core: f64,
    nuclear_charge: f64,
    masses: [f64; 2],
    sop_tolerance: f64,
) -> Result<HeliumModel> {
    if space.n_dofs() != 2 {
        return Err(PvbError::InvalidInput("the helium model has two degrees of freedom".into()));
    }
    check_positive("soft-core parameter", soft_core)?;
    if !nuclear_charge.is_finite() {
        return Err(PvbError::InvalidInput("nuclear charge must be finite".into()));
    }
    let a2 = soft_core * soft_core;
    let (x1, x2) = (physical(space, 0), physical(space, 1));
    let mut spec = free(space, &masses)?;
    for (d, xs) in [&x1, &x2].into_iter().enumerate() {
        let v = xs.iter().map(|x| -nuclear_charge / (x * x + a2).sqrt()).collect();
        spec = spec.with_potential(d, v);
    }
    let table = Mat::from_fn(x1.len(), x2.len(), |i, j| 1.0 / ((x1[i] - x2[j]).powi(2) + a2).sqrt());
    let interaction = potfit2(&table, sop_tolerance)?;
    let spec = spec.with_sop(interaction.terms.clone());
    Ok(HeliumModel { spec, interaction })
}

/// Helium interaction table on the product grid, for checking an expansion.
pub fn helium_interaction_table(space: &PhaseSpace, soft_core: f64) -> Mat<f64> {
    let (x1, x2) = (physical(space, 0), physical(space, 1));
    let a2 = soft_core * soft_core;
    Mat::from_fn(x1.len(), x2.len(), |i, j| 1.0 / ((x1[i] - x2[j]).powi(2) + a2).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier_grid::FourierGrid;
    use crate::vn_basis::{build_lattice, Alignment};

    fn space(dofs: usize, l: f64, n: usize, nx: usize) -> PhaseSpace {
        let g = FourierGrid::new(l, n, 0.0).unwrap();
        let lat = build_lattice(&g, nx, n / nx, None, Alignment::Auto).unwrap();
        PhaseSpace::new(vec![lat; dofs]).unwrap()
    }

    #[test]
    fn double_well_shape() {
        let sp = space(1, 80.0, 160, 32);
        let spec = double_well(&sp, 1.0, 1.0, 20.0, 22.0).unwrap();
        let v = spec.potentials[0].as_ref().unwrap();
        let xs = sp.dof(0).grid().physical_points();
        let at = |x: f64| v[xs.iter().position(|&y| (y - x).abs() < 1e-9).unwrap()];
        assert!((at(0.0) - 20.0).abs() < 1e-12);
        assert!(at(22.0).abs() < 1e-12 && at(-22.0).abs() < 1e-12);
        assert!(double_well(&space(2, 10.0, 16, 4), 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn helium_expansion_is_accurate() {
        let sp = space(2, 30.0, 64, 16);
        let he = helium1d(&sp, HELIUM_SOFT_CORE, 2.0, [1.0, 1.0], 1e-6).unwrap();
        assert!(he.interaction.max_error <= 1e-6);
        let table = helium_interaction_table(&sp, HELIUM_SOFT_CORE);
        let (i, j) = (10, 40);
        let approx: f64 =
            he.interaction.terms.iter().map(|t| t.coefficient * t.factors[0][i] * t.factors[1][j]).sum();
        assert!((approx - table[(i, j)]).abs() <= 1e-6);
    }
}
