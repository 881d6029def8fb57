//! Cross-module checks on spin-network bases and the variational ansatz.

use snaq_core::qalgebra::{FTable, Level, SpinLabel};
use snaq_core::spinnet::{build_hamiltonian, diagonalize, Convention, SnBasis, SpinNetwork, DEFAULT_DENSE_CAP};
use snaq_core::variational::{log_grid, optimize, phase_scan, OptimizeOptions, ScanOptions, VariationalState};

#[test]
fn torus_dimensions() {
    let net = SpinNetwork::torus(2).unwrap();
    let dims: Vec<usize> = (1..=3).map(|k| SnBasis::enumerate(&net, Level::new(k).unwrap()).unwrap().dim()).collect();
    assert_eq!(dims, vec![32, 528, 5600]);
}

#[test]
fn torus_ground_state_lies_below_the_variational_bound_scale() {
    // The exact ground-state energy per plaquette on the 2x2 torus cannot
    // exceed the strong-coupling vacuum value 0.
    let level = Level::new(1).unwrap();
    let basis = SnBasis::enumerate(&SpinNetwork::torus(2).unwrap(), level).unwrap();
    let h = build_hamiltonian(&basis, &FTable::eager(level), 1.0, Convention::Rescaled).unwrap();
    let spec = diagonalize(&h, 1, DEFAULT_DENSE_CAP).unwrap();
    assert!(spec.eigenvalues[0] < 0.0);
}

#[test]
fn level_one_transition_at_known_coupling() {
    let level = Level::new(1).unwrap();
    let scan = phase_scan(level, &log_grid(0.2, 5.0, 40), &ScanOptions::default()).unwrap();
    let c = scan.critical.expect("transition");
    assert!((c.g2 - (4.0f64 / 3.0).sqrt()).abs() < 1e-4, "{}", c.g2);
}

#[test]
fn optimum_beats_fixed_states() {
    for k in [2, 5, 9] {
        let level = Level::new(k).unwrap();
        for g2 in [0.3, 1.0, 4.0] {
            let o = optimize(level, g2, &OptimizeOptions::default()).unwrap();
            for s in [VariationalState::vacuum(level), VariationalState::uniform(level)] {
                assert!(o.energy <= snaq_core::variational::mean_energy(&s, g2).unwrap() + 1e-12);
            }
        }
    }
}

#[test]
fn hexagon_with_trivial_boundary_counts_loops() {
    for k in 1..=5 {
        let basis = SnBasis::enumerate(&SpinNetwork::hexagon([SpinLabel::ZERO; 6]), Level::new(k).unwrap()).unwrap();
        assert_eq!(basis.dim(), k as usize + 1);
    }
}
