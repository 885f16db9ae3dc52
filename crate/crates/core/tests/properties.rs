use faer::c64;
use proptest::prelude::*;

use pvb_core::dynamics::{max_timestep, taylor_step, ControlPulse};
use pvb_core::fourier_grid::FourierGrid;
use pvb_core::linalg;
use pvb_core::reduced_space::{gram_block, CellSet, ReducedBasis};
use pvb_core::space::{join_index, split_index, PhaseSpace};
use pvb_core::vn_basis::{build_lattice, Alignment};

fn small_space() -> PhaseSpace {
    let g = FourierGrid::new(12.0, 24, 0.0).unwrap();
    let lat = build_lattice(&g, 6, 4, None, Alignment::Auto).unwrap();
    PhaseSpace::new(vec![lat.clone(), lat]).unwrap()
}

fn identity_error(a: &faer::Mat<c64>, b: &faer::Mat<c64>) -> f64 {
    let p = a * b;
    linalg::max_abs_diff(p.as_ref(), linalg::identity(p.nrows()).as_ref())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn index_roundtrip(dims in prop::collection::vec(1usize..7, 1..4), seed in any::<u64>()) {
        let total: usize = dims.iter().product();
        let idx = (seed as usize) % total;
        let parts = split_index(idx, &dims);
        prop_assert!(parts.iter().zip(&dims).all(|(p, d)| p < d));
        prop_assert_eq!(join_index(&parts, &dims), idx);
    }

    #[test]
    fn cell_set_is_sorted_and_complement_partitions(cells in prop::collection::vec(0usize..50, 0..80)) {
        let set = CellSet::new(cells.clone());
        prop_assert!(set.as_slice().windows(2).all(|w| w[0] < w[1]));
        prop_assert!(cells.iter().all(|&c| set.contains(c)));
        let comp = set.complement(50);
        prop_assert_eq!(comp.len() + set.len(), 50);
        prop_assert!(comp.iter().all(|&c| !set.contains(c)));
    }

    #[test]
    fn basis_updates_track_fresh_inverse(steps in prop::collection::vec(prop::collection::btree_set(0usize..576, 1..40), 1..5)) {
        let sp = small_space();
        let mut rb = ReducedBasis::new(&sp, CellSet::new(steps[0].iter().copied())).unwrap();
        for s in &steps[1..] {
            let before = rb.cells().clone();
            let change = rb.update(&sp, CellSet::new(s.iter().copied())).unwrap();
            for (pos, origin) in change.origin.iter().enumerate() {
                if let Some(o) = origin {
                    prop_assert_eq!(before.as_slice()[*o], rb.cells().as_slice()[pos]);
                }
            }
        }
        let cells = rb.cells().as_slice().to_vec();
        let fresh = gram_block(&sp, &cells, &cells);
        prop_assert!(linalg::max_abs_diff(rb.s_inv_tilde().as_ref(), fresh.as_ref()) < 1e-12);
        prop_assert!(identity_error(rb.s_tilde(), rb.s_inv_tilde()) < 1e-8);
    }

    #[test]
    fn table_pulse_stays_within_its_values(values in prop::collection::vec(-5.0f64..5.0, 2..10), t in -1.0f64..12.0) {
        let times: Vec<f64> = (0..values.len()).map(|i| i as f64).collect();
        let p = ControlPulse::Table { times, values: values.clone() };
        prop_assert!(p.validate().is_ok());
        let v = p.value(t);
        let lo = values.iter().copied().fold(0.0, f64::min);
        let hi = values.iter().copied().fold(0.0, f64::max);
        prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        prop_assert!(p.derivative(t).abs() <= p.max_slope(-1.0, 12.0) + 1e-12);
    }

    #[test]
    fn step_bound_scales_as_square_root(zeta in 1e-10f64..1e-2, k in 0.01f64..10.0, s in 0.01f64..10.0) {
        let a = max_timestep(zeta, k, s).unwrap();
        let b = max_timestep(4.0 * zeta, k, s).unwrap();
        prop_assert!((b / a - 2.0).abs() < 1e-12);
        prop_assert!((max_timestep(zeta, 4.0 * k, s).unwrap() / a - 0.5).abs() < 1e-12);
    }

    #[test]
    fn taylor_step_on_hermitian_2x2_is_unitary(a in -2.0f64..2.0, d in -2.0f64..2.0, re in -1.0f64..1.0, im in -1.0f64..1.0, tau in 0.01f64..0.3) {
        let h = faer::Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => c64::new(a, 0.0),
            (1, 1) => c64::new(d, 0.0),
            (0, 1) => c64::new(re, im),
            _ => c64::new(re, -im),
        });
        let psi = vec![c64::new(0.6, 0.0), c64::new(0.0, 0.8)];
        let (out, k) = taylor_step(|v| linalg::mat_vec(h.as_ref(), v), &psi, tau, 30, 1e-14).unwrap();
        prop_assert!(k <= 30);
        prop_assert!((linalg::norm2(&out) - 1.0).abs() < 1e-12);
    }
}
