//! Solver output against closed forms, perturbation theory and brute force.

use approx::assert_relative_eq;
use trapcert::certify::certify_1d;
use trapcert::magnetic2d::{
    build_hamiltonian_2d, certify_2d, solve_lowest_2d, Grid2D, MagneticSetup,
};
use trapcert::oracle::{
    box_reference, dense_brute_force_2d, fock_darwin_oracle, harmonic_reference,
    quartic_pt_reference,
};
use trapcert::potential::{PotentialKind, PotentialSpec, UnitSystem};
use trapcert::solver1d::{build_hamiltonian_1d, solve_lowest, Grid1D};
use trapcert::SolverOptions;

#[test]
fn harmonic_in_general_units() {
    let units = UnitSystem::new(1.3, 0.7).unwrap();
    let omega = 1.7;
    let spec = PotentialSpec::new(PotentialKind::QuarticFamily { lambda: 0.0, omega }, units).unwrap();
    let c = certify_1d(&spec, &SolverOptions::default()).unwrap();
    let r = harmonic_reference(omega, &units);
    for (e, o) in c.energies.iter().zip(&r.energies) {
        assert_relative_eq!(*e, *o, max_relative = 1e-8);
    }
    assert_relative_eq!(c.var_x, r.var_x, max_relative = 1e-8);
    assert_relative_eq!(c.bound_x, r.bound_x(&units), max_relative = 1e-8);
    assert_relative_eq!(c.varp, r.var_p, max_relative = 1e-8);
    assert_relative_eq!(c.alpha0, r.alpha0.unwrap(), max_relative = 1e-8);
    assert!(c.g_norm_sq < 1e-8, "{}", c.g_norm_sq);
    assert_relative_eq!(c.s_spectral, r.s_x(), max_relative = 1e-8);
    assert!(c.all_pass(), "{:?}", c.failures());
}

#[test]
fn quartic_follows_perturbation_theory() {
    for lambda in [0.002, 0.005, 0.01, 0.02] {
        let c = certify_1d(&PotentialSpec::quartic(lambda, 1.0), &SolverOptions::default()).unwrap();
        let r = quartic_pt_reference(lambda).unwrap();
        let l2 = r.error_scale;
        for (e, o) in c.energies.iter().zip(&r.energies) {
            assert!((e - o).abs() <= 100.0 * l2, "lambda {lambda}: {e} vs {o}");
        }
        assert!((c.var_x - r.var_x).abs() <= 20.0 * l2);
        assert!((c.varp - r.var_p).abs() <= 20.0 * l2);
        // First-order terms cancel in the deficit.
        assert!(c.epsilon > 0.0 && c.epsilon <= 0.4 * l2, "{}", c.epsilon);
        let curvature = 2.0 * c.delta * c.varp_ub;
        assert!((curvature - r.curvature_mean.unwrap()).abs() <= 100.0 * l2);
        let g = c.g_norm_sq / l2;
        assert!((g - 12.0).abs() < 12.0 * 20.0 * lambda, "lambda {lambda}: g/l^2 = {g}");
    }
    // Second-order ground-state coefficient -21/8.
    let lambda = 0.002;
    let c = certify_1d(&PotentialSpec::quartic(lambda, 1.0), &SolverOptions::default()).unwrap();
    let second = (c.energies[0] - quartic_pt_reference(lambda).unwrap().energies[0]) / (lambda * lambda);
    assert!((second + 21.0 / 8.0).abs() < 0.1, "{second}");
}

#[test]
fn box_matches_closed_form() {
    let length = std::f64::consts::PI;
    let c = certify_1d(&PotentialSpec::box_well(0.0, length), &SolverOptions::default()).unwrap();
    let r = box_reference(length, &UnitSystem::default());
    for (e, o) in c.energies.iter().zip(&r.energies) {
        assert_relative_eq!(*e, *o, max_relative = 1e-6);
    }
    assert_relative_eq!(c.var_x, r.var_x, max_relative = 1e-6);
    assert_relative_eq!(c.varp, r.var_p, max_relative = 1e-6);
    assert_relative_eq!(c.alpha0, r.alpha0.unwrap(), max_relative = 1e-5);
    assert_relative_eq!(c.bound_x, r.bound_x(&UnitSystem::default()), max_relative = 1e-6);
    assert!(c.varp_ub.is_infinite());
}

#[test]
fn fock_darwin_in_a_stronger_field() {
    let setup = MagneticSetup::new(
        2.0,
        1.0,
        PotentialSpec::anisotropic_2d(1.0, 1.0),
        Grid2D::square(80, 5.0).unwrap(),
        [0.6, 0.8],
    )
    .unwrap();
    let c = certify_2d(&setup, 10, 1e-10).unwrap();
    let oracle = fock_darwin_oracle(1.0, 2.0, 10);
    for (e, o) in c.energies.iter().zip(&oracle) {
        assert_relative_eq!(*e, *o, max_relative = 1e-3);
    }
    // Isotropic trap: S = l_B^4 m omega0^2 / 2.
    assert_relative_eq!(c.s_direct, setup.ell_b.powi(4) / 2.0, max_relative = 1e-6);
    assert!(c.all_pass(), "{:?}", c.failures());
}

/// At zero field the 2D lattice operator separates exactly into two 1D
/// lattice operators on the same points, so the phases and stencils agree.
#[test]
fn zero_field_lattice_is_a_tensor_product() {
    let n = 64;
    let half = 5.0;
    let setup = MagneticSetup::new(
        0.0,
        1.0,
        PotentialSpec::anisotropic_2d(1.0, 2.0),
        Grid2D::square(n, half).unwrap(),
        [1.0, 0.0],
    )
    .unwrap();
    let sp = solve_lowest_2d(&build_hamiltonian_2d(&setup).unwrap(), 10).unwrap();

    let grid = Grid1D::new(-half, half, n + 2).unwrap();
    let ex = solve_lowest(&build_hamiltonian_1d(&PotentialSpec::harmonic(1.0), &grid), 10).unwrap();
    let ey = solve_lowest(&build_hamiltonian_1d(&PotentialSpec::harmonic(2.0), &grid), 10).unwrap();
    let mut sums: Vec<f64> = ex
        .energies
        .iter()
        .flat_map(|a| ey.energies.iter().map(move |b| a + b))
        .collect();
    sums.sort_by(f64::total_cmp);
    for (e, s) in sp.energies.iter().zip(&sums) {
        assert!((e - s).abs() < 1e-6, "{e} vs {s}");
    }
}

#[test]
fn block_solver_vectors_span_the_dense_eigenspaces() {
    let setup = MagneticSetup::new(
        1.0,
        1.0,
        PotentialSpec::anisotropic_2d(1.0, 1.3),
        Grid2D::square(28, 3.5).unwrap(),
        [1.0, 0.0],
    )
    .unwrap();
    let op = build_hamiltonian_2d(&setup).unwrap();
    let fast = solve_lowest_2d(&op, 6).unwrap();
    let dense = dense_brute_force_2d(&op, 6).unwrap();
    for (i, (a, b)) in fast.wavefunctions.iter().zip(&dense.wavefunctions).enumerate() {
        assert_relative_eq!(fast.energies[i], dense.energies[i], max_relative = 1e-10);
        let overlap = fast.inner(a, b).norm();
        assert!((1.0 - overlap).abs() < 1e-8, "state {i}: overlap {overlap}");
    }
}
