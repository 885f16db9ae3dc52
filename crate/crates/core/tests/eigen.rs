use std::sync::Arc;

use pvb_core::fourier_grid::FourierGrid;
use pvb_core::space::PhaseSpace;
use pvb_core::vn_basis::{build_lattice, Alignment};
use pvb_core::{models, solvers};

fn space1(l: f64, n: usize, nx: usize) -> Arc<PhaseSpace> {
    let g = FourierGrid::new(l, n, 0.0).unwrap();
    Arc::new(PhaseSpace::new(vec![build_lattice(&g, nx, n / nx, None, Alignment::Auto).unwrap()]).unwrap())
}

#[test]
fn adaptive_double_well_matches_dense_with_fewer_cells() {
    let sp = space1(80.0, 160, 32);
    let spec = models::double_well(&sp, 1.0, 1.0, 20.0, 22.0).unwrap();
    let dense = solvers::reference_full_eig(&spec, &sp).unwrap();
    let cfg = solvers::TiseConfig { n_modes: 8, ..Default::default() };
    let r = solvers::tise_adaptive(&spec, sp.clone(), &cfg).unwrap();
    let err = r.eigenvalues.iter().zip(&dense).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err <= 5e-6, "max error {err}");
    assert!(r.final_cells.len() < sp.n_points());
    // the two wells are far apart: levels come in degenerate pairs near (n + 1/2)
    assert!((dense[0] - dense[1]).abs() < 1e-9);
    assert!((dense[2] - dense[0] - 1.0).abs() < 0.6);
}

#[test]
fn low_barrier_splitting_is_resolved() {
    // a barrier low enough for the tunnelling splitting to be well above round-off
    let sp = space1(30.0, 120, 24);
    let spec = models::double_well(&sp, 1.0, 1.0, 1.0, 2.0).unwrap();
    let dense = solvers::reference_full_eig(&spec, &sp).unwrap();
    let cfg = solvers::TiseConfig { n_modes: 2, zeta: 1e-8, ..Default::default() };
    let r = solvers::tise_adaptive(&spec, sp, &cfg).unwrap();
    let want = dense[1] - dense[0];
    let got = r.eigenvalues[1] - r.eigenvalues[0];
    assert!(want > 1e-4, "splitting {want}");
    assert!((got - want).abs() <= 0.1 * want, "splitting {got} vs {want}");
}

#[test]
fn adaptive_results_are_ordered_and_history_is_recorded() {
    let sp = space1(40.0, 96, 16);
    let spec = models::harmonic(&sp, 1.0, 1.0).unwrap();
    let r = solvers::tise_adaptive(&spec, sp, &solvers::TiseConfig { n_modes: 3, ..Default::default() }).unwrap();
    assert!(r.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(r.history.len(), r.iterations);
    assert!(r.history.last().unwrap().boundary_max < 1e-6);
}
