//! Three-point finite-difference solver for `H = p^2/2m + V(x)` on a
//! Dirichlet box, with automatic box sizing and grid refinement.

pub mod tridiag;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{rel_diff, richardson};
use crate::potential::PotentialSpec;

/// Uniform grid including both Dirichlet end points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl Grid1D {
    pub const MIN_POINTS: usize = 64;

    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::MalformedSpec(format!(
                "grid needs x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n_points < Self::MIN_POINTS {
            return Err(Error::MalformedSpec(format!(
                "grid needs at least {} points, got {n_points}",
                Self::MIN_POINTS
            )));
        }
        Ok(Grid1D {
            x_min,
            x_max,
            n_points,
        })
    }

    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.n_points - 1 {
            self.x_max
        } else {
            self.x_min + i as f64 * self.h()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Number of unknowns (end points are pinned to zero).
    pub fn interior(&self) -> usize {
        self.n_points - 2
    }

    /// Same box with the spacing halved.
    pub fn refined(&self) -> Self {
        Grid1D {
            n_points: 2 * self.n_points - 1,
            ..*self
        }
    }
}

/// Solver knobs shared by the 1D pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Number of eigenpairs kept (initial value when adaptive).
    #[serde(alias = "K")]
    pub k: usize,
    /// Relative tolerance on Richardson-extrapolated energies and `Var(x)`.
    pub rtol: f64,
    /// Largest allowed boundary amplitude relative to the peak.
    pub tail_tol: f64,
    /// Relative threshold deciding whether a transition element is nonzero.
    pub tau: f64,
    /// Points on the coarsest grid.
    pub n_start: usize,
    pub max_doublings: usize,
    /// Increase `k` until the position sum-rule residual drops below this
    /// fraction of `hbar^2/2m`.
    pub trk_target: f64,
    pub k_max: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            k: 32,
            rtol: 1e-8,
            tail_tol: 1e-8,
            tau: 1e-10,
            n_start: 1025,
            max_doublings: 6,
            trk_target: 1e-5,
            k_max: 256,
        }
    }
}

/// Symmetric tridiagonal Hamiltonian on the interior points of a grid.
#[derive(Debug, Clone)]
pub struct TridiagonalOperator {
    pub grid: Grid1D,
    /// `hbar^2/(m h^2) + V(x_i) - v_shift`.
    pub diag: Vec<f64>,
    /// `-hbar^2/(2 m h^2)`.
    pub off: Vec<f64>,
    /// Potential on the interior points, shifted by `v_shift`.
    pub v: Vec<f64>,
    /// Minimum of `V` over the grid, removed before assembly.
    pub v_shift: f64,
    pub potential: PotentialSpec,
}

impl TridiagonalOperator {
    /// Hopping amplitude `hbar^2/(2 m h^2)`.
    pub fn hopping(&self) -> f64 {
        let h = self.grid.h();
        self.potential.units.kinetic_scale() / (h * h)
    }

    /// `<v, H v>` for a unit vector, with the kinetic part written as a sum of
    /// squared differences so that no large terms cancel.
    pub fn rayleigh(&self, v: &[f64]) -> f64 {
        let t = self.hopping();
        let n = v.len();
        let mut kinetic = v[0] * v[0] + v[n - 1] * v[n - 1];
        for i in 0..n - 1 {
            let d = v[i + 1] - v[i];
            kinetic += d * d;
        }
        let potential: f64 = v.iter().zip(&self.v).map(|(a, p)| p * a * a).sum();
        t * kinetic + potential
    }

    pub fn dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.diag.len();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.off[i];
                m[(i + 1, i)] = self.off[i];
            }
        }
        m
    }
}

/// Assemble the three-point Hamiltonian on `grid`.
pub fn build_hamiltonian_1d(spec: &PotentialSpec, grid: &Grid1D) -> TridiagonalOperator {
    let h = grid.h();
    let t = spec.units.kinetic_scale() / (h * h);
    let n = grid.interior();
    let raw: Vec<f64> = (1..=n).map(|i| spec.eval_potential(grid.x(i))).collect();
    let v_shift = raw.iter().copied().fold(f64::INFINITY, f64::min);
    // Points beyond a hard wall get a large finite barrier so the Sturm
    // recurrences stay finite.
    let cap = 1e15 * t.max(1.0);
    let v: Vec<f64> = raw.iter().map(|x| (x - v_shift).min(cap)).collect();
    TridiagonalOperator {
        grid: *grid,
        diag: v.iter().map(|p| 2.0 * t + p).collect(),
        off: vec![-t; n.saturating_sub(1)],
        v,
        v_shift,
        potential: spec.clone(),
    }
}

/// How a spectrum was obtained and how accurate it is believed to be.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub h_used: f64,
    pub n_points: usize,
    pub box_min: f64,
    pub box_max: f64,
    pub levels: usize,
    pub converged: bool,
    /// Richardson-extrapolated energies (same offset as `energies`).
    pub richardson_energies: Vec<f64>,
    pub richardson_var_x: f64,
    /// Change of the extrapolated energies between the last two refinements.
    pub energy_error_estimate: f64,
    pub var_error_estimate: f64,
}

/// Lowest eigenpairs on one grid.
#[derive(Debug, Clone)]
pub struct Spectrum1D {
    /// Ascending energies including the potential offset.
    pub energies: Vec<f64>,
    /// Wavefunctions on every grid point (zero at the ends), `h sum psi^2 = 1`.
    pub wavefunctions: Vec<Vec<f64>>,
    pub grid: Grid1D,
    pub convergence: ConvergenceRecord,
    pub potential: PotentialSpec,
    /// Minimum of `V` on the grid, subtracted before assembly.
    pub v_shift: f64,
    /// Some pair of energies lies within the degeneracy tolerance.
    pub degenerate: bool,
    /// The same problem on the previous (twice coarser) grid, if refined.
    pub coarse: Option<Box<Spectrum1D>>,
}

impl Spectrum1D {
    pub fn k(&self) -> usize {
        self.energies.len()
    }

    /// `h sum psi_a psi_b f(x)` over the grid.
    pub fn braket(&self, a: usize, b: usize, f: impl Fn(f64) -> f64) -> f64 {
        let h = self.grid.h();
        let (pa, pb) = (&self.wavefunctions[a], &self.wavefunctions[b]);
        (1..self.grid.n_points - 1)
            .map(|i| pa[i] * pb[i] * f(self.grid.x(i)))
            .sum::<f64>()
            * h
    }

    /// Ground-state expectation of `f(x)`.
    pub fn ground_expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.braket(0, 0, f)
    }

    /// Direct ground-state position variance (centered).
    pub fn variance_x(&self) -> f64 {
        let mean = self.ground_expectation(|x| x);
        self.ground_expectation(|x| (x - mean) * (x - mean))
    }

    /// Spacing ratio to the coarse level, if present.
    pub fn refinement_ratio(&self) -> Option<f64> {
        self.coarse.as_ref().map(|c| c.grid.h() / self.grid.h())
    }
}

/// Count sign changes, ignoring values below `1e-10` of the peak.
pub fn node_count(psi: &[f64]) -> usize {
    let peak = psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 1e-10 * peak;
    let mut last = 0.0;
    let mut count = 0;
    for &v in psi {
        if v.abs() <= floor {
            continue;
        }
        if last != 0.0 && (v > 0.0) != (last > 0.0) {
            count += 1;
        }
        last = v;
    }
    count
}

/// Lowest `k` eigenpairs of `op`, orthonormalized and sign-fixed.
pub fn solve_lowest(op: &TridiagonalOperator, k: usize) -> Result<Spectrum1D> {
    let grid = op.grid;
    if k == 0 || k >= grid.n_points - 1 {
        return Err(Error::EigensolverFailure(format!(
            "cannot compute {k} states on {} interior points",
            grid.interior()
        )));
    }
    let (_, vectors) = tridiag::lowest_eigenpairs(&op.diag, &op.off, k)?;
    Ok(spectrum_from_vectors(op, vectors))
}

/// Wrap orthonormal interior eigenvectors (ascending) as a spectrum on the
/// full grid.
pub(crate) fn spectrum_from_vectors(op: &TridiagonalOperator, vectors: Vec<Vec<f64>>) -> Spectrum1D {
    let grid = op.grid;
    let k = vectors.len();
    let scale = 1.0 / grid.h().sqrt();
    let mut energies = Vec::with_capacity(k);
    let mut wavefunctions = Vec::with_capacity(k);
    for (n, v) in vectors.into_iter().enumerate() {
        energies.push(op.rayleigh(&v) + op.v_shift);
        let sign = if n == 0 {
            v.iter().sum::<f64>().signum()
        } else {
            let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            v.iter()
                .find(|x| x.abs() > 1e-3 * peak)
                .map_or(1.0, |x| x.signum())
        };
        let mut psi = Vec::with_capacity(grid.n_points);
        psi.push(0.0);
        psi.extend(v.iter().map(|x| sign * scale * x));
        psi.push(0.0);
        wavefunctions.push(psi);
    }
    let spread = (energies[k - 1] - energies[0]).max(f64::MIN_POSITIVE);
    let degenerate = energies.windows(2).any(|w| w[1] - w[0] < 1e-9 * spread);
    Spectrum1D {
        convergence: ConvergenceRecord {
            h_used: grid.h(),
            n_points: grid.n_points,
            box_min: grid.x_min,
            box_max: grid.x_max,
            levels: 1,
            converged: false,
            richardson_energies: energies.clone(),
            richardson_var_x: f64::NAN,
            energy_error_estimate: f64::NAN,
            var_error_estimate: f64::NAN,
        },
        energies,
        wavefunctions,
        grid,
        potential: op.potential.clone(),
        v_shift: op.v_shift,
        degenerate,
        coarse: None,
    }
}

/// Classically allowed region `{V <= e}` sampled on `[lo, hi]`.
fn allowed_region(spec: &PotentialSpec, lo: f64, hi: f64, e: f64) -> Option<(f64, f64)> {
    let samples = 4000;
    let step = (hi - lo) / samples as f64;
    let inside: Vec<f64> = (0..=samples)
        .map(|i| lo + i as f64 * step)
        .filter(|&x| spec.eval_potential(x) <= e)
        .collect();
    Some((*inside.first()?, *inside.last()?))
}

fn outer_band_ratio(psi: &[f64]) -> f64 {
    let n = psi.len();
    let band = (n / 50).max(2);
    let peak = psi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let edge = psi[..band]
        .iter()
        .chain(&psi[n - band..])
        .fold(0.0f64, |m, v| m.max(v.abs()));
    edge / peak
}

const DOMAIN_POINTS: usize = 513;
const MAX_EXPANSIONS: usize = 10;

fn symmetric_snap(lo: f64, hi: f64) -> (f64, f64) {
    let center = 0.5 * (lo + hi);
    if center.abs() < 1e-6 * (hi - lo) {
        let half = 0.5 * (hi - lo);
        (-half, half)
    } else {
        (lo, hi)
    }
}

/// Choose a box that contains the classically allowed region of level `k`
/// with margin and in which the boundary amplitudes of `psi_0` and `psi_k`
/// stay below `tail_tol` of their peaks.
pub fn auto_domain(spec: &PotentialSpec, k: usize, tail_tol: f64) -> Result<Grid1D> {
    auto_domain_with(spec, k, tail_tol, SolverOptions::default().n_start)
}

pub fn auto_domain_with(spec: &PotentialSpec, k: usize, tail_tol: f64, n_points: usize) -> Result<Grid1D> {
    if spec.dimension() != 1 {
        return Err(Error::MalformedSpec(
            "one-dimensional solver needs a 1D potential".into(),
        ));
    }
    if k < 2 {
        return Err(Error::MalformedSpec(format!("auto_domain needs k >= 2, got {k}")));
    }
    if let Some((lo, hi)) = spec.hard_walls() {
        if matches!(spec.kind, crate::potential::PotentialKind::Box { .. }) {
            return Grid1D::new(lo, hi, n_points);
        }
        // Tabulated: the walls are at the table ends; still check the tails
        // in case the interpolated potential is soft.
        return Grid1D::new(lo, hi, n_points);
    }
    let levels = k + 1;
    // Grow a symmetric window until the allowed region of level k is
    // comfortably inside it.
    let mut half = 1.0;
    let (mut lo, mut hi) = loop {
        let grid = Grid1D::new(-half, half, DOMAIN_POINTS)?;
        let sp = solve_lowest(&build_hamiltonian_1d(spec, &grid), levels)?;
        let e = sp.energies[k];
        let (a, b) = allowed_region(spec, -half, half, e).ok_or_else(|| {
            Error::NoConvergence("no classically allowed region found".into())
        })?;
        if a > -0.8 * half && b < 0.8 * half {
            let margin = 0.5 * (b - a);
            break symmetric_snap(a - margin, b + margin);
        }
        half *= 2.0;
        if half > 1e12 {
            return Err(Error::NoConvergence("could not bracket the allowed region".into()));
        }
    };
    for _ in 0..=MAX_EXPANSIONS {
        let grid = Grid1D::new(lo, hi, DOMAIN_POINTS)?;
        let sp = solve_lowest(&build_hamiltonian_1d(spec, &grid), levels)?;
        let worst = outer_band_ratio(&sp.wavefunctions[0]).max(outer_band_ratio(&sp.wavefunctions[k]));
        if worst < tail_tol {
            return Grid1D::new(lo, hi, n_points);
        }
        let (c, w) = (0.5 * (lo + hi), 0.75 * (hi - lo));
        (lo, hi) = symmetric_snap(c - w, c + w);
    }
    Err(Error::NoConvergence(format!(
        "boundary amplitude still above {tail_tol:e} after {MAX_EXPANSIONS} box expansions"
    )))
}

/// Solve on successively halved grids until the Richardson-extrapolated
/// energies and `Var(x)` settle to `rtol`.
pub fn converge(spec: &PotentialSpec, k: usize, rtol: f64) -> Result<Spectrum1D> {
    converge_with(
        spec,
        &SolverOptions {
            k,
            rtol,
            ..SolverOptions::default()
        },
    )
}

pub fn converge_with(spec: &PotentialSpec, opts: &SolverOptions) -> Result<Spectrum1D> {
    let grid = auto_domain_with(spec, opts.k.max(2), opts.tail_tol, opts.n_start)?;
    converge_on(spec, grid, opts)
}

/// Refinement loop on a fixed box.
pub fn converge_on(spec: &PotentialSpec, mut grid: Grid1D, opts: &SolverOptions) -> Result<Spectrum1D> {
    let k = opts.k;
    let mut previous: Option<Spectrum1D> = None;
    let mut previous_extrapolation: Option<(Vec<f64>, f64)> = None;
    let mut last_error = f64::INFINITY;
    for level in 0..=opts.max_doublings {
        let mut sp = solve_lowest(&build_hamiltonian_1d(spec, &grid), k)?;
        let var = sp.variance_x();
        if let Some(coarse) = previous.take() {
            let ratio = coarse.grid.h() / sp.grid.h();
            let energies: Vec<f64> = sp
                .energies
                .iter()
                .zip(&coarse.energies)
                .map(|(f, c)| richardson(*f, *c, ratio))
                .collect();
            let var_r = richardson(var, coarse.variance_x(), ratio);
            let mut record = ConvergenceRecord {
                h_used: sp.grid.h(),
                n_points: sp.grid.n_points,
                box_min: sp.grid.x_min,
                box_max: sp.grid.x_max,
                levels: level + 1,
                converged: false,
                richardson_energies: energies.clone(),
                richardson_var_x: var_r,
                energy_error_estimate: f64::NAN,
                var_error_estimate: f64::NAN,
            };
            if let Some((prev_e, prev_var)) = &previous_extrapolation {
                // Relative changes measured on the shifted spectrum, which
                // is positive and free of the arbitrary constant.
                let shift = sp.v_shift;
                let worst_e = energies
                    .iter()
                    .zip(prev_e)
                    .map(|(a, b)| rel_diff(a - shift, b - shift, 1e-300))
                    .fold(0.0, f64::max);
                let worst_v = rel_diff(var_r, *prev_var, 1e-300);
                record.energy_error_estimate = energies
                    .iter()
                    .zip(prev_e)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                record.var_error_estimate = (var_r - prev_var).abs();
                last_error = worst_e.max(worst_v);
                if last_error < opts.rtol {
                    record.converged = true;
                    sp.convergence = record;
                    sp.coarse = Some(Box::new(coarse));
                    return Ok(sp);
                }
            }
            sp.convergence = record;
            previous_extrapolation = Some((energies, var_r));
        }
        previous = Some(sp);
        grid = grid.refined();
    }
    Err(Error::NoConvergence(format!(
        "relative change {last_error:.3e} still above rtol {:.1e} after {} doublings",
        opts.rtol, opts.max_doublings
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn free_particle_stencil() {
        let spec = PotentialSpec::box_well(0.0, 100.0);
        let grid = Grid1D::new(0.0, 100.0, 101).unwrap();
        let op = build_hamiltonian_1d(&spec, &grid);
        assert!(op.diag.iter().all(|d| (d - 1.0).abs() < 1e-15));
        assert!(op.off.iter().all(|e| (e + 0.5).abs() < 1e-15));
        assert_eq!(op.dense(), op.dense().transpose());
    }

    #[test]
    fn harmonic_diagonal_at_origin() {
        let grid = Grid1D::new(-5.0, 5.0, 101).unwrap();
        let op = build_hamiltonian_1d(&PotentialSpec::harmonic(1.0), &grid);
        let h = grid.h();
        // Interior index 49 is grid point 50, x = 0.
        assert!((op.diag[49] - 1.0 / (h * h)).abs() < 1e-12);
    }

    #[test]
    fn harmonic_low_levels() {
        let grid = Grid1D::new(-10.0, 10.0, 2001).unwrap();
        let sp = solve_lowest(&build_hamiltonian_1d(&PotentialSpec::harmonic(1.0), &grid), 3).unwrap();
        for (n, e) in sp.energies.iter().enumerate() {
            assert!((e - (n as f64 + 0.5)).abs() < 1e-4, "{n}: {e}");
        }
    }

    #[test]
    fn box_levels_and_ground_positivity() {
        let spec = PotentialSpec::box_well(0.0, PI);
        let grid = Grid1D::new(0.0, PI, 2049).unwrap();
        let sp = solve_lowest(&build_hamiltonian_1d(&spec, &grid), 5).unwrap();
        for (n, e) in sp.energies.iter().enumerate() {
            let exact = ((n + 1) * (n + 1)) as f64 / 2.0;
            assert!((e - exact).abs() / exact < 1e-5);
        }
        let one = solve_lowest(&build_hamiltonian_1d(&spec, &grid), 1).unwrap();
        assert_eq!(one.k(), 1);
        assert!(one.wavefunctions[0][1..grid.n_points - 1].iter().all(|v| *v > 0.0));
    }

    #[test]
    fn nodes_and_orthonormality() {
        let spec = PotentialSpec::quartic(0.3, 1.0);
        let grid = auto_domain(&spec, 12, 1e-8).unwrap();
        let sp = solve_lowest(&build_hamiltonian_1d(&spec, &grid), 12).unwrap();
        for a in 0..12 {
            assert_eq!(node_count(&sp.wavefunctions[a]), a);
            for b in 0..12 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((sp.braket(a, b, |_| 1.0) - want).abs() < 1e-10);
            }
        }
        assert!(!sp.degenerate);
    }

    #[test]
    fn auto_domain_examples() {
        let harmonic = auto_domain(&PotentialSpec::harmonic(1.0), 8, 1e-8).unwrap();
        assert!(harmonic.x_min <= -8.0 && harmonic.x_max >= 8.0);
        assert_eq!(harmonic.x_min, -harmonic.x_max);
        let stiff = auto_domain(&PotentialSpec::quartic(1.0, 1.0), 8, 1e-8).unwrap();
        assert!(stiff.x_max - stiff.x_min < harmonic.x_max - harmonic.x_min);
        let dw = auto_domain(&PotentialSpec::double_well(2.0), 4, 1e-8).unwrap();
        assert!(dw.x_min < -3.0 && dw.x_max > 3.0);
    }

    #[test]
    fn converge_examples() {
        let sp = converge(&PotentialSpec::harmonic(1.0), 6, 1e-8).unwrap();
        assert!(sp.convergence.converged);
        assert!((sp.convergence.richardson_energies[0] - 0.5).abs() < 1e-7);
        let q = converge(&PotentialSpec::quartic(0.1, 1.0), 6, 1e-8).unwrap();
        // First-order estimate 0.575; the true value is lower by O(lambda^2).
        let e0 = q.convergence.richardson_energies[0];
        assert!(e0 > 0.55 && e0 < 0.575, "{e0}");
        let err = converge(&PotentialSpec::harmonic(1.0), 6, 1e-15).unwrap_err();
        assert!(matches!(err, Error::NoConvergence(_)));
    }

    #[test]
    fn second_order_convergence_ratio() {
        let spec = PotentialSpec::quartic(0.2, 1.0);
        let grid = Grid1D::new(-8.0, 8.0, 257).unwrap();
        let e = |g: Grid1D| solve_lowest(&build_hamiltonian_1d(&spec, &g), 3).unwrap().energies;
        let (e1, e2, e3) = (e(grid), e(grid.refined()), e(grid.refined().refined()));
        for n in 0..3 {
            let ratio = (e1[n] - e2[n]) / (e2[n] - e3[n]);
            assert!((ratio - 4.0).abs() < 0.8, "{n}: {ratio}");
        }
    }

    #[test]
    fn constant_shift_only_moves_energies() {
        let a = PotentialSpec::polynomial(vec![0.0, 0.0, 0.5, 0.0, 0.1]).unwrap();
        let b = PotentialSpec::polynomial(vec![7.25, 0.0, 0.5, 0.0, 0.1]).unwrap();
        let grid = Grid1D::new(-6.0, 6.0, 1025).unwrap();
        let sa = solve_lowest(&build_hamiltonian_1d(&a, &grid), 4).unwrap();
        let sb = solve_lowest(&build_hamiltonian_1d(&b, &grid), 4).unwrap();
        for n in 0..4 {
            assert!((sb.energies[n] - sa.energies[n] - 7.25).abs() < 1e-10);
        }
        assert!((sa.variance_x() - sb.variance_x()).abs() < 1e-12);
    }
}
