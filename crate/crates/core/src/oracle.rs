//! Independent reference results: closed forms for the harmonic trap, the
//! infinite square well and the Fock-Darwin spectrum, first-order
//! perturbation theory for the quartic family, and dense diagonalization.
//!
//! Nothing here calls the iterative solvers, so agreement with them is a
//! genuine cross-check.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::magnetic2d::{self, HermitianOperator2D, Spectrum2D};
use crate::potential::{PotentialSpec, UnitSystem};
use crate::solver1d::{self, Grid1D, Spectrum1D, TridiagonalOperator};

/// Reference values for one case. `None` means no closed form is offered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceBundle {
    pub case_id: String,
    /// Lowest energies `E_0, E_1, ...`.
    pub energies: Vec<f64>,
    pub var_x: f64,
    pub var_p: f64,
    pub alpha0: Option<f64>,
    /// `<V''>_0`.
    pub curvature_mean: Option<f64>,
    /// `|| V' - m omega^2 x ||^2` in the ground density.
    pub g_norm_sq: Option<f64>,
    /// `(n, |x_n0|^2)` for every nonzero element listed.
    pub x_weights: Vec<(usize, f64)>,
    pub p_weights: Vec<(usize, f64)>,
    /// Size of the neglected terms: 0 for exact bundles, `lambda^2` for the
    /// first-order expansion (multiply by a fitted constant).
    pub error_scale: f64,
}

impl ReferenceBundle {
    pub fn delta(&self) -> f64 {
        self.energies[1] - self.energies[0]
    }

    /// `hbar^2 / (2 m Delta)`.
    pub fn bound_x(&self, units: &UnitSystem) -> f64 {
        units.kinetic_scale() / self.delta()
    }

    /// `sum (E_n - E_0) |x_n0|^2` over the listed elements.
    pub fn s_x(&self) -> f64 {
        self.x_weights
            .iter()
            .map(|&(n, w)| (self.energies[n] - self.energies[0]) * w)
            .sum()
    }
}

/// Exact harmonic oscillator: `E_n = hbar omega (n + 1/2)`, one transition.
pub fn harmonic_reference(omega: f64, units: &UnitSystem) -> ReferenceBundle {
    let (hbar, m) = (units.hbar, units.mass);
    let x10 = hbar / (2.0 * m * omega);
    let p10 = m * hbar * omega / 2.0;
    ReferenceBundle {
        case_id: format!("harmonic(omega={omega})"),
        energies: (0..8).map(|n| hbar * omega * (n as f64 + 0.5)).collect(),
        var_x: x10,
        var_p: p10,
        alpha0: Some(1.0 / (m * omega * omega)),
        curvature_mean: Some(m * omega * omega),
        g_norm_sq: Some(0.0),
        x_weights: vec![(1, x10)],
        p_weights: vec![(1, p10)],
        error_scale: 0.0,
    }
}

/// Validity window of the first-order quartic expansion.
pub const QUARTIC_PT_MAX: f64 = 0.05;

/// First-order Rayleigh-Schrodinger values for `x^2/2 + lambda x^4`
/// (`hbar = m = omega = 1`), from `<n|x^4|n> = 3(2n^2 + 2n + 1)/4`.
pub fn quartic_pt_reference(lambda: f64) -> Result<ReferenceBundle> {
    if !(0.0..=QUARTIC_PT_MAX).contains(&lambda) {
        return Err(Error::OutOfValidity(format!(
            "first-order expansion needs 0 <= lambda <= {QUARTIC_PT_MAX}, got {lambda}"
        )));
    }
    if lambda == 0.0 {
        let mut b = harmonic_reference(1.0, &UnitSystem::default());
        b.case_id = "quartic-pt(lambda=0)".into();
        return Ok(b);
    }
    let x4 = |n: f64| 0.75 * (2.0 * n * n + 2.0 * n + 1.0);
    Ok(ReferenceBundle {
        case_id: format!("quartic-pt(lambda={lambda})"),
        energies: (0..3).map(|n| n as f64 + 0.5 + lambda * x4(n as f64)).collect(),
        var_x: 0.5 - 1.5 * lambda,
        var_p: 0.5 + 1.5 * lambda,
        alpha0: None,
        curvature_mean: Some(1.0 + 6.0 * lambda),
        g_norm_sq: Some(12.0 * lambda * lambda),
        x_weights: Vec::new(),
        p_weights: Vec::new(),
        error_scale: lambda * lambda,
    })
}

/// Number of terms kept in the square-well series.
const BOX_TERMS: usize = 20_000;

/// Infinite square well of length `length`. Elements are closed form;
/// `alpha0` sums its series to convergence.
pub fn box_reference(length: f64, units: &UnitSystem) -> ReferenceBundle {
    let (hbar, m) = (units.hbar, units.mass);
    let pi = std::f64::consts::PI;
    let e = |j: usize| (hbar * pi * j as f64 / length).powi(2) / (2.0 * m);
    // State label j = n + 1; only even j couple to the ground state.
    let x_el = |j: usize| {
        let jf = j as f64;
        8.0 * length * jf / (pi * pi * (jf * jf - 1.0).powi(2))
    };
    let p_el = |j: usize| {
        let jf = j as f64;
        hbar * 4.0 * jf / (length * (jf * jf - 1.0))
    };
    let alpha0 = 2.0
        * (2..BOX_TERMS)
            .step_by(2)
            .map(|j| x_el(j).powi(2) / (e(j) - e(1)))
            .sum::<f64>();
    ReferenceBundle {
        case_id: format!("box(length={length})"),
        energies: (1..=8).map(e).collect(),
        var_x: length * length * (1.0 / 12.0 - 1.0 / (2.0 * pi * pi)),
        var_p: (hbar * pi / length).powi(2),
        alpha0: Some(alpha0),
        curvature_mean: None,
        g_norm_sq: None,
        x_weights: (2..=8).step_by(2).map(|j| (j - 1, x_el(j).powi(2))).collect(),
        p_weights: (2..=8).step_by(2).map(|j| (j - 1, p_el(j).powi(2))).collect(),
        error_scale: 0.0,
    }
}

/// Mode frequencies `(Omega_+, Omega_-)` of an isotropic trap in a field.
pub fn fock_darwin_modes(omega0: f64, omega_c: f64) -> (f64, f64) {
    let root = (omega_c * omega_c + 4.0 * omega0 * omega0).sqrt();
    ((root + omega_c) / 2.0, (root - omega_c) / 2.0)
}

/// Lowest `k` levels `Omega_+ (n_+ + 1/2) + Omega_- (n_- + 1/2)` in units of
/// `hbar`, sorted, with multiplicity.
pub fn fock_darwin_oracle(omega0: f64, omega_c: f64, k: usize) -> Vec<f64> {
    let (wp, wm) = fock_darwin_modes(omega0, omega_c);
    let mut levels = Vec::with_capacity(k * k);
    for np in 0..k {
        for nm in 0..k {
            levels.push(wp * (np as f64 + 0.5) + wm * (nm as f64 + 0.5));
        }
    }
    levels.sort_by(f64::total_cmp);
    levels.truncate(k);
    levels
}

/// Largest 1D grid (interior points) accepted by the dense route.
pub const DENSE_MAX_1D: usize = 2048;
/// Largest 2D grid side accepted by the dense route.
pub const DENSE_MAX_2D: usize = 48;

/// Full dense diagonalization of the same three-point Hamiltonian the
/// iterative solver uses.
pub fn dense_brute_force(spec: &PotentialSpec, grid: &Grid1D, k: usize) -> Result<Spectrum1D> {
    let op = solver1d::build_hamiltonian_1d(spec, grid);
    dense_brute_force_op(&op, k)
}

pub fn dense_brute_force_op(op: &TridiagonalOperator, k: usize) -> Result<Spectrum1D> {
    let n = op.diag.len();
    if n > DENSE_MAX_1D {
        return Err(Error::TooLarge(format!(
            "{n} interior points exceeds the dense limit {DENSE_MAX_1D}"
        )));
    }
    if k == 0 || k > n {
        return Err(Error::EigensolverFailure(format!("cannot take {k} of {n} states")));
    }
    let eig = SymmetricEigen::new(op.dense());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vectors = order[..k]
        .iter()
        .map(|&c| eig.eigenvectors.column(c).iter().copied().collect())
        .collect();
    let mut sp = solver1d::spectrum_from_vectors(op, vectors);
    // Keep the dense eigenvalues themselves rather than Rayleigh quotients.
    for (e, &c) in sp.energies.iter_mut().zip(&order) {
        *e = eig.eigenvalues[c] + op.v_shift;
    }
    Ok(sp)
}

/// Dense complex Hermitian diagonalization of a 2D Peierls operator.
pub fn dense_brute_force_2d(op: &HermitianOperator2D, k: usize) -> Result<Spectrum2D> {
    let g = op.grid;
    if g.nx > DENSE_MAX_2D || g.ny > DENSE_MAX_2D {
        return Err(Error::TooLarge(format!(
            "{} x {} grid exceeds the dense limit {DENSE_MAX_2D} x {DENSE_MAX_2D}",
            g.nx, g.ny
        )));
    }
    let n = op.dim();
    if k == 0 || k > n {
        return Err(Error::EigensolverFailure(format!("cannot take {k} of {n} states")));
    }
    let eig = SymmetricEigen::new(op.dense());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order[..k].iter().map(|&c| eig.eigenvalues[c]).collect();
    let vectors = order[..k]
        .iter()
        .map(|&c| eig.eigenvectors.column(c).iter().copied().collect())
        .collect();
    Ok(magnetic2d::spectrum_from_vectors(op, values, vectors))
}

/// Lowest `k` eigenvalues of a 2D operator by dense diagonalization without
/// eigenvectors (several times cheaper than [`dense_brute_force_2d`]).
pub fn dense_energies_2d(op: &HermitianOperator2D, k: usize) -> Result<Vec<f64>> {
    let g = op.grid;
    if g.nx > DENSE_MAX_2D || g.ny > DENSE_MAX_2D {
        return Err(Error::TooLarge(format!(
            "{} x {} grid exceeds the dense limit {DENSE_MAX_2D} x {DENSE_MAX_2D}",
            g.nx, g.ny
        )));
    }
    let mut values: Vec<f64> = op.dense().symmetric_eigenvalues().iter().map(|e| e + op.v_shift).collect();
    values.sort_by(f64::total_cmp);
    values.truncate(k);
    Ok(values)
}
