//! Invariants that hold for every admissible input.

use std::sync::OnceLock;

use proptest::prelude::*;
use trapcert::certify::{
    certify_1d, certify_position_bound, exact_deficit_decomposition, rigidity_d1_d2, Certificate,
};
use trapcert::magnetic2d::{certify_spectrum_2d, solve_setup, Grid2D, MagneticSetup, Spectrum2D};
use trapcert::observables::{trk_corridor_weights, trk_sum, MatrixElementSet};
use trapcert::potential::{PotentialKind, PotentialSpec, UnitSystem};
use trapcert::SolverOptions;

fn cert(spec: &PotentialSpec) -> Certificate {
    certify_1d(spec, &SolverOptions::default()).unwrap()
}

fn quartic_in(lambda: f64, omega: f64, hbar: f64, mass: f64) -> PotentialSpec {
    PotentialSpec::new(
        PotentialKind::QuarticFamily { lambda, omega },
        UnitSystem::new(hbar, mass).unwrap(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    /// With the sum rule closed exactly, the deficit equals its tail
    /// decomposition and every rigidity and corridor inequality holds.
    #[test]
    fn tail_algebra_on_synthetic_spectra(
        steps in proptest::collection::vec(0.05f64..2.0, 2..8),
        raw in proptest::collection::vec(0.01f64..1.0, 8),
    ) {
        let mut gaps = Vec::new();
        let mut e = 0.0;
        for s in &steps {
            e += s;
            gaps.push(e);
        }
        let weights: Vec<f64> = raw[..gaps.len()].to_vec();
        let s: f64 = gaps.iter().zip(&weights).map(|(g, w)| g * w).sum();
        let set = MatrixElementSet::synthetic(gaps, weights, s, 1e-10);
        let units = UnitSystem::new((2.0 * s).sqrt(), 1.0).unwrap();
        let pos = certify_position_bound(&set, &units).unwrap();
        let scale = 1e-12 * pos.bound_x;
        prop_assert!(pos.epsilon >= -scale);
        prop_assert!((exact_deficit_decomposition(&set) - pos.epsilon).abs() <= scale);
        let summary = trk_sum(&set);
        let r = rigidity_d1_d2(&set, &summary, pos.epsilon, scale, 1e-12);
        prop_assert!(r.d1_ok && r.d2_t_ok && r.d2_eta_ok);
        prop_assert!(trk_corridor_weights(&summary, &set.gap).is_ok());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    /// Every confining polynomial certifies: bound, sum rule, rigidity,
    /// corridor, polarizability and momentum checks all pass.
    #[test]
    fn random_polynomial_traps_certify(
        c1 in -0.3f64..0.3,
        c2 in 0.2f64..2.0,
        c3 in -0.2f64..0.2,
        c4 in 0.05f64..1.0,
    ) {
        let spec = PotentialSpec::polynomial(vec![0.0, c1, c2, c3, c4]).unwrap();
        let c = cert(&spec);
        prop_assert!(c.all_pass(), "{:?}", c.failures());
        prop_assert!(c.epsilon > 0.0);
        prop_assert!(c.alpha0 <= c.alpha_mid * (1.0 + 1e-8));
    }

    /// Harmonic saturation in any unit system.
    #[test]
    fn harmonic_saturates_in_any_units(hbar in 0.3f64..3.0, mass in 0.3f64..3.0, omega in 0.3f64..3.0) {
        let c = cert(&quartic_in(0.0, omega, hbar, mass));
        let var = hbar / (2.0 * mass * omega);
        prop_assert!((c.var_x - var).abs() < 1e-7 * var);
        prop_assert!(c.epsilon.abs() < 1e-7 * var);
        prop_assert!(c.equality_scores.iter().all(|s| s.abs() < 1e-6));
    }

    /// The relative deficit depends only on the dimensionless coupling
    /// `lambda hbar / (m^2 omega^3)`.
    #[test]
    fn relative_deficit_is_scale_free(g in 0.05f64..1.0, hbar in 0.5f64..2.0, mass in 0.5f64..2.0, omega in 0.5f64..2.0) {
        let reference = cert(&PotentialSpec::quartic(g, 1.0));
        let lambda = g * mass * mass * omega.powi(3) / hbar;
        let scaled = cert(&quartic_in(lambda, omega, hbar, mass));
        let a = reference.epsilon / reference.bound_x;
        let b = scaled.epsilon / scaled.bound_x;
        prop_assert!((a - b).abs() < 1e-6 * a.max(1e-3), "{a} vs {b}");
    }

    /// A constant offset moves the energies and nothing else.
    #[test]
    fn offset_only_shifts_energies(c0 in -5.0f64..5.0, lambda in 0.0f64..1.0) {
        let base = cert(&PotentialSpec::polynomial(vec![0.0, 0.0, 0.5, 0.0, lambda]).unwrap());
        let shifted = cert(&PotentialSpec::polynomial(vec![c0, 0.0, 0.5, 0.0, lambda]).unwrap());
        for (a, b) in base.energies.iter().zip(&shifted.energies) {
            prop_assert!((b - a - c0).abs() < 1e-8);
        }
        prop_assert!((base.var_x - shifted.var_x).abs() < 1e-10);
        prop_assert!((base.bound_x - shifted.bound_x).abs() < 1e-10);
    }

    /// Along the quartic family the deficit and all four equality
    /// diagnostics grow with the coupling.
    #[test]
    fn deficit_and_battery_increase_with_coupling(l1 in 0.01f64..0.8, step in 0.05f64..0.5) {
        let a = cert(&PotentialSpec::quartic(l1, 1.0));
        let b = cert(&PotentialSpec::quartic(l1 + step, 1.0));
        prop_assert!(a.epsilon > 0.0 && b.epsilon > a.epsilon);
        for i in 0..4 {
            prop_assert!(a.equality_scores[i] > 0.0);
            prop_assert!(b.equality_scores[i] > a.equality_scores[i], "diagnostic {i}");
        }
        let first_three = &a.equality_scores[..3];
        let max = first_three.iter().cloned().fold(0.0, f64::max);
        let min = first_three.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(max <= 10.0 * min);
    }
}

fn isotropic_field() -> &'static (MagneticSetup, Spectrum2D) {
    static CELL: OnceLock<(MagneticSetup, Spectrum2D)> = OnceLock::new();
    CELL.get_or_init(|| {
        let setup = MagneticSetup::new(
            1.0,
            1.0,
            PotentialSpec::anisotropic_2d(1.0, 1.0),
            Grid2D::square(64, 5.0).unwrap(),
            [1.0, 0.0],
        )
        .unwrap();
        let sp = solve_setup(&setup, 12).unwrap();
        (setup, sp)
    })
}

fn anisotropic_no_field() -> &'static (MagneticSetup, Spectrum2D) {
    static CELL: OnceLock<(MagneticSetup, Spectrum2D)> = OnceLock::new();
    CELL.get_or_init(|| {
        let setup = MagneticSetup::new(
            0.0,
            1.0,
            PotentialSpec::anisotropic_2d(1.0, 1.5),
            Grid2D::square(64, 5.0).unwrap(),
            [1.0, 0.0],
        )
        .unwrap();
        let sp = solve_setup(&setup, 12).unwrap();
        (setup, sp)
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    /// An isotropic trap has no preferred direction for the guiding center.
    #[test]
    fn guiding_center_is_rotation_invariant(theta in 0.0f64..std::f64::consts::TAU) {
        let (setup, sp) = isotropic_field();
        let mut s = setup.clone();
        let reference = certify_spectrum_2d(sp, &s, 12, 1e-10).unwrap();
        s.set_direction([theta.cos(), theta.sin()]).unwrap();
        let c = certify_spectrum_2d(sp, &s, 12, 1e-10).unwrap();
        prop_assert!((c.variance - reference.variance).abs() < 1e-3 * reference.variance);
        prop_assert!((c.bound - reference.bound).abs() < 1e-3 * reference.bound);
        prop_assert!(c.all_pass(), "{:?}", c.failures());
    }

    /// Without a field the projected variance is the quadratic form of the
    /// position covariance, which is diagonal for an axis-aligned trap.
    #[test]
    fn projected_variance_is_a_quadratic_form(theta in 0.0f64..std::f64::consts::TAU) {
        let (setup, sp) = anisotropic_no_field();
        let var_along = |u: [f64; 2]| {
            let mut s = setup.clone();
            s.set_direction(u).unwrap();
            certify_spectrum_2d(sp, &s, 12, 1e-10).unwrap()
        };
        let vx = var_along([1.0, 0.0]).variance;
        let vy = var_along([0.0, 1.0]).variance;
        let c = var_along([theta.cos(), theta.sin()]);
        let expected = theta.cos().powi(2) * vx + theta.sin().powi(2) * vy;
        prop_assert!((c.variance - expected).abs() < 1e-6 * expected);
        prop_assert!(c.variance <= c.bound + 1e-4 * c.bound);
    }
}
