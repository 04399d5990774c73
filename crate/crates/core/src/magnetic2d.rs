//! Two-dimensional traps in a uniform perpendicular magnetic field.
//!
//! The Hamiltonian `pi^2/2m + V` is discretized with a five-point stencil
//! whose links carry Peierls phases for the symmetric gauge
//! `A = B(-y, x)/2`. Lowest eigenpairs come from a Chebyshev-filtered block
//! subspace iteration (dense Rayleigh-Ritz on the block), which resolves
//! exactly degenerate multiplets without special handling.
//!
//! Every observable is evaluated on the configured grid and on a grid with
//! half as many points per axis, then Richardson-extrapolated.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::certify::{rigidity_d1_d2, Verdict, QUADRATURE_TOL};
use crate::error::{Error, Result};
use crate::numerics::{clusters, richardson, richardson_nonneg};
use crate::observables::{classify, trk_sum, GapInfo, MatrixElementSet, TrkSummary};
use crate::potential::{CurvatureQuality, PotentialSpec};

type C = Complex64;

/// Uniform rectangular grid of `nx * ny` interior points; the box edges carry
/// the Dirichlet condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, bounds: [f64; 4]) -> Result<Self> {
        let [x_min, x_max, y_min, y_max] = bounds;
        if nx < 4 || ny < 4 {
            return Err(Error::MalformedSpec(format!(
                "2D grid needs at least 4 interior points per axis, got {nx} x {ny}"
            )));
        }
        if !bounds.iter().all(|b| b.is_finite()) || x_max <= x_min || y_max <= y_min {
            return Err(Error::MalformedSpec(format!("bad 2D box {bounds:?}")));
        }
        Ok(Grid2D {
            nx,
            ny,
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    /// `n x n` points on `[-half, half]^2`.
    pub fn square(n: usize, half: f64) -> Result<Self> {
        Self::new(n, n, [-half, half, -half, half])
    }

    pub fn hx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx + 1) as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.ny + 1) as f64
    }

    pub fn cell(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (i + 1) as f64 * self.hx()
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_min + (j + 1) as f64 * self.hy()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Same box with half the points per axis (error-estimation grid).
    pub fn coarsened(&self) -> Result<Self> {
        Self::new(
            self.nx / 2,
            self.ny / 2,
            [self.x_min, self.x_max, self.y_min, self.y_max],
        )
    }
}

/// Field, charge, trap, grid and the in-plane direction being certified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagneticSetup {
    pub b: f64,
    pub q: f64,
    /// `sqrt(hbar / |q B|)`; infinite at zero field.
    pub ell_b: f64,
    pub potential: PotentialSpec,
    pub grid: Grid2D,
    pub u: [f64; 2],
    /// `u x z`, the direction the guiding-center shift couples to.
    pub w: [f64; 2],
}

impl MagneticSetup {
    pub fn new(b: f64, q: f64, potential: PotentialSpec, grid: Grid2D, u: [f64; 2]) -> Result<Self> {
        if potential.dimension() != 2 {
            return Err(Error::MalformedSpec(
                "magnetic setup needs a two-dimensional potential".into(),
            ));
        }
        if !(b.is_finite() && q.is_finite()) {
            return Err(Error::MalformedSpec("non-finite field or charge".into()));
        }
        let ell_b = if b * q == 0.0 {
            f64::INFINITY
        } else {
            (potential.units.hbar / (q * b).abs()).sqrt()
        };
        let mut setup = MagneticSetup {
            b,
            q,
            ell_b,
            potential,
            grid,
            u: [1.0, 0.0],
            w: [0.0, -1.0],
        };
        setup.set_direction(u)?;
        Ok(setup)
    }

    pub fn set_direction(&mut self, u: [f64; 2]) -> Result<()> {
        let norm = u[0].hypot(u[1]);
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::MalformedSpec(format!("direction {u:?} has no length")));
        }
        self.u = [u[0] / norm, u[1] / norm];
        self.w = [self.u[1], -self.u[0]];
        Ok(())
    }

    pub fn has_field(&self) -> bool {
        self.b * self.q != 0.0
    }

    /// Cyclotron frequency `|q B| / m`.
    pub fn omega_c(&self) -> f64 {
        (self.q * self.b).abs() / self.potential.units.mass
    }

    pub fn with_grid(&self, grid: Grid2D) -> Self {
        MagneticSetup {
            grid,
            ..self.clone()
        }
    }
}

/// Sparse Hermitian Hamiltonian on a [`Grid2D`].
#[derive(Debug, Clone)]
pub struct HermitianOperator2D {
    pub grid: Grid2D,
    /// Potential minus `v_shift` on the interior points.
    pub v: Vec<f64>,
    pub v_shift: f64,
    /// `hbar^2 / (2 m h^2)` per axis.
    pub tx: f64,
    pub ty: f64,
    /// Coefficient of `psi(i+1, j)` in `(H psi)(i, j)`, per row `j`.
    pub link_x: Vec<C>,
    /// Coefficient of `psi(i, j+1)` in `(H psi)(i, j)`, per column `i`.
    pub link_y: Vec<C>,
}

/// Peierls angles `(q/hbar) A . dl` of the +x link on row `j` and the +y link
/// on column `i`.
fn link_angles(setup: &MagneticSetup, grid: &Grid2D) -> (Vec<f64>, Vec<f64>) {
    let s = setup.q * setup.b / (2.0 * setup.potential.units.hbar);
    let (hx, hy) = (grid.hx(), grid.hy());
    let ax = (0..grid.ny).map(|j| -s * grid.y(j) * hx).collect();
    let ay = (0..grid.nx).map(|i| s * grid.x(i) * hy).collect();
    (ax, ay)
}

impl HermitianOperator2D {
    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    pub fn apply(&self, x: &[C], out: &mut [C]) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let d0 = 2.0 * (self.tx + self.ty);
        for j in 0..ny {
            let lx = self.link_x[j];
            for i in 0..nx {
                let k = j * nx + i;
                let mut s = x[k] * (d0 + self.v[k]);
                if i + 1 < nx {
                    s += lx * x[k + 1];
                }
                if i > 0 {
                    s += lx.conj() * x[k - 1];
                }
                if j + 1 < ny {
                    s += self.link_y[i] * x[k + nx];
                }
                if j > 0 {
                    s += self.link_y[i].conj() * x[k - nx];
                }
                out[k] = s;
            }
        }
    }

    /// Explicit matrix, for dense cross-checks on small grids.
    pub fn dense(&self) -> DMatrix<C> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![C::new(0.0, 0.0); n];
        let mut col = vec![C::new(0.0, 0.0); n];
        for c in 0..n {
            e[c] = C::new(1.0, 0.0);
            self.apply(&e, &mut col);
            m.set_column(c, &nalgebra::DVector::from_column_slice(&col));
            e[c] = C::new(0.0, 0.0);
        }
        m
    }

    /// True when every link phase is trivial.
    pub fn is_real(&self) -> bool {
        self.link_x.iter().chain(&self.link_y).all(|l| l.im == 0.0)
    }

    /// Gershgorin upper bound on the spectrum (shifted potential).
    pub fn upper_bound(&self) -> f64 {
        let vmax = self.v.iter().copied().fold(0.0f64, f64::max);
        vmax + 4.0 * (self.tx + self.ty)
    }
}

/// Assemble the Peierls Hamiltonian without resolution checks.
fn assemble(setup: &MagneticSetup, grid: &Grid2D) -> HermitianOperator2D {
    let kin = setup.potential.units.kinetic_scale();
    let (hx, hy) = (grid.hx(), grid.hy());
    let (tx, ty) = (kin / (hx * hx), kin / (hy * hy));
    let mut raw = Vec::with_capacity(grid.len());
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            raw.push(setup.potential.eval_2d(grid.x(i), grid.y(j)));
        }
    }
    let v_shift = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let (ax, ay) = link_angles(setup, grid);
    HermitianOperator2D {
        grid: *grid,
        v: raw.iter().map(|v| v - v_shift).collect(),
        v_shift,
        tx,
        ty,
        // A link with Peierls angle theta contributes -t exp(-i theta).
        link_x: ax.iter().map(|a| -tx * C::from_polar(1.0, -a)).collect(),
        link_y: ay.iter().map(|a| -ty * C::from_polar(1.0, -a)).collect(),
    }
}

/// Smallest trap length `(hbar^2 / (m k_max))^(1/4)` at the grid minimum of V.
fn trap_length(setup: &MagneticSetup) -> Option<f64> {
    let g = &setup.grid;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let (x, y) = (g.x(i), g.y(j));
            let v = setup.potential.eval_2d(x, y);
            if v < best.0 {
                best = (v, x, y);
            }
        }
    }
    let h = setup.potential.hessian_2d(best.1, best.2);
    let tr = h[0][0] + h[1][1];
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let k_max = 0.5 * tr + (0.25 * tr * tr - det).max(0.0).sqrt();
    let u = setup.potential.units;
    (k_max > 0.0).then(|| (u.hbar * u.hbar / (u.mass * k_max)).powf(0.25))
}

/// Peierls Hamiltonian of `setup`. Requires `h <= ell_B / 4` in a field and
/// `h <= l_trap / 2` for the trap length at the potential minimum.
pub fn build_hamiltonian_2d(setup: &MagneticSetup) -> Result<HermitianOperator2D> {
    if setup.potential.dimension() != 2 {
        return Err(Error::MalformedSpec("2D Hamiltonian needs a 2D potential".into()));
    }
    let h = setup.grid.hx().max(setup.grid.hy());
    if setup.has_field() && h > setup.ell_b / 4.0 {
        return Err(Error::GridTooCoarse(format!(
            "spacing {h:.4} exceeds magnetic length / 4 = {:.4}",
            setup.ell_b / 4.0
        )));
    }
    if let Some(l) = trap_length(setup) {
        if h > l / 2.0 {
            return Err(Error::GridTooCoarse(format!(
                "spacing {h:.4} exceeds trap length / 2 = {:.4}",
                l / 2.0
            )));
        }
    }
    Ok(assemble(setup, &setup.grid))
}

/// Knobs of the block eigensolver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Guard vectors beyond the requested `k`.
    pub extra: usize,
    /// Chebyshev polynomial degree per sweep.
    pub degree: usize,
    /// Residual tolerance relative to the spectral upper bound.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            extra: 8,
            degree: 24,
            tol: 1e-11,
            max_iter: 400,
            seed: 0x9e37_79b9_7f4a_7c15,
        }
    }
}

/// Lowest eigenpairs of a 2D operator plus grid-convergence data.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum2D {
    pub energies: Vec<f64>,
    /// Normalized so that `hx hy sum |psi|^2 = 1`; interior points only.
    pub wavefunctions: Vec<Vec<C>>,
    pub grid: Grid2D,
    pub v_shift: f64,
    /// Ground level within the degeneracy tolerance of the first excitation.
    pub degenerate: bool,
    pub convergence: Option<Convergence2D>,
    pub coarse: Option<Box<Spectrum2D>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence2D {
    pub h_fine: f64,
    pub h_coarse: f64,
    pub nx: usize,
    pub ny: usize,
    pub richardson_energies: Vec<f64>,
    /// Largest `|E_extrapolated - E_fine|`.
    pub energy_error_estimate: f64,
}

impl Spectrum2D {
    pub fn k(&self) -> usize {
        self.energies.len()
    }

    /// `h_coarse / h_fine` when a coarse companion is attached.
    pub fn refinement_ratio(&self) -> Option<f64> {
        self.coarse.as_ref().map(|c| c.grid.hx() / self.grid.hx())
    }

    /// Extrapolated energies when available, raw otherwise.
    pub fn best_energies(&self) -> &[f64] {
        self.convergence
            .as_ref()
            .map_or(&self.energies, |c| &c.richardson_energies)
    }

    pub fn inner(&self, a: &[C], b: &[C]) -> C {
        dot(a, b) * self.grid.cell()
    }
}

/// Relative width used to group (near-)degenerate levels.
pub const CLUSTER_REL: f64 = 5e-3;

fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

struct XorShift(u64);

impl XorShift {
    fn next(&mut self) -> f64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }
}

/// Modified Gram-Schmidt, two passes. Vectors that collapse are replaced by
/// fresh random ones.
fn orthonormalize(block: &mut [Vec<C>], rng: &mut XorShift) {
    for i in 0..block.len() {
        for _attempt in 0..4 {
            for _pass in 0..2 {
                for j in 0..i {
                    let (head, tail) = block.split_at_mut(i);
                    let c = dot(&head[j], &tail[0]);
                    for (t, h) in tail[0].iter_mut().zip(&head[j]) {
                        *t -= c * h;
                    }
                }
            }
            let n = norm(&block[i]);
            if n > 1e-10 {
                block[i].iter_mut().for_each(|x| *x /= n);
                break;
            }
            block[i] = (0..block[i].len())
                .map(|_| C::new(rng.next(), rng.next()))
                .collect();
        }
    }
}

/// Rayleigh-Ritz on an orthonormal block. Returns Ritz values and residual
/// norms; the block is rotated onto the Ritz vectors in place.
fn rayleigh_ritz(op: &HermitianOperator2D, block: &mut Vec<Vec<C>>) -> (Vec<f64>, Vec<f64>) {
    let p = block.len();
    let n = op.dim();
    let images: Vec<Vec<C>> = block
        .iter()
        .map(|v| {
            let mut out = vec![C::new(0.0, 0.0); n];
            op.apply(v, &mut out);
            out
        })
        .collect();
    let mut hs = DMatrix::from_fn(p, p, |r, c| dot(&block[r], &images[c]));
    hs = (&hs + hs.adjoint()) * C::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(hs);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let rotate = |src: &[Vec<C>], col: usize| -> Vec<C> {
        let mut out = vec![C::new(0.0, 0.0); n];
        for (r, v) in src.iter().enumerate() {
            let c = eig.eigenvectors[(r, col)];
            if c != C::new(0.0, 0.0) {
                out.iter_mut().zip(v).for_each(|(o, x)| *o += c * x);
            }
        }
        out
    };
    let mut values = Vec::with_capacity(p);
    let mut residuals = Vec::with_capacity(p);
    let mut rotated = Vec::with_capacity(p);
    for &col in &order {
        let theta = eig.eigenvalues[col];
        let v = rotate(block, col);
        let hv = rotate(&images, col);
        let r: f64 = hv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b * theta).norm_sqr())
            .sum::<f64>()
            .sqrt();
        values.push(theta);
        residuals.push(r);
        rotated.push(v);
    }
    *block = rotated;
    (values, residuals)
}

/// Damp the spectrum on `[a, b]` with a scaled Chebyshev polynomial
/// (`a0` estimates the lowest eigenvalue and sets the scaling).
fn chebyshev_filter(op: &HermitianOperator2D, block: &mut [Vec<C>], degree: usize, a: f64, b: f64, a0: f64) {
    let e = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    let sigma1 = e / (a0 - c);
    let n = op.dim();
    let mut hy = vec![C::new(0.0, 0.0); n];
    for x in block.iter_mut() {
        let mut sigma = sigma1;
        op.apply(x, &mut hy);
        let mut y: Vec<C> = hy
            .iter()
            .zip(x.iter())
            .map(|(h, v)| (h - v * c) * (sigma1 / e))
            .collect();
        let mut prev = x.clone();
        for _ in 1..degree {
            let sigma2 = 1.0 / (2.0 / sigma1 - sigma);
            op.apply(&y, &mut hy);
            let next: Vec<C> = hy
                .iter()
                .zip(&y)
                .zip(&prev)
                .map(|((h, v), p)| (h - v * c) * (2.0 * sigma2 / e) - p * (sigma * sigma2))
                .collect();
            prev = std::mem::replace(&mut y, next);
            sigma = sigma2;
        }
        *x = y;
    }
}

/// Lowest `k` eigenpairs with default solver settings.
pub fn solve_lowest_2d(op: &HermitianOperator2D, k: usize) -> Result<Spectrum2D> {
    solve_lowest_2d_with(op, k, &EigenOptions::default())
}

pub fn solve_lowest_2d_with(op: &HermitianOperator2D, k: usize, opts: &EigenOptions) -> Result<Spectrum2D> {
    let n = op.dim();
    let p = k + opts.extra.max(1);
    if k == 0 || p > n / 4 {
        return Err(Error::EigensolverFailure(format!(
            "{k} states (block {p}) is too many for {n} grid points"
        )));
    }
    let mut rng = XorShift(opts.seed | 1);
    let mut block: Vec<Vec<C>> = (0..p)
        .map(|_| (0..n).map(|_| C::new(rng.next(), rng.next())).collect())
        .collect();
    orthonormalize(&mut block, &mut rng);
    let upper = op.upper_bound();
    let tol = opts.tol * upper.max(1.0);
    let (mut values, mut residuals) = rayleigh_ritz(op, &mut block);
    let mut iterations = 0;
    while residuals[..k].iter().any(|r| *r > tol) {
        if iterations == opts.max_iter {
            return Err(Error::EigensolverFailure(format!(
                "block iteration stalled after {iterations} sweeps (residual {:.3e}, target {tol:.3e})",
                residuals[..k].iter().copied().fold(0.0, f64::max)
            )));
        }
        chebyshev_filter(op, &mut block, opts.degree, values[p - 1], upper, values[0]);
        orthonormalize(&mut block, &mut rng);
        (values, residuals) = rayleigh_ritz(op, &mut block);
        iterations += 1;
    }
    log::debug!("block eigensolver: {iterations} sweeps, block {p}, n {n}");
    block.truncate(k);
    values.truncate(k);
    Ok(spectrum_from_vectors(op, values, block))
}

/// Normalize, fix the global phase (largest component real positive) and add
/// the potential shift back.
pub(crate) fn spectrum_from_vectors(op: &HermitianOperator2D, values: Vec<f64>, vectors: Vec<Vec<C>>) -> Spectrum2D {
    let scale = 1.0 / op.grid.cell().sqrt();
    let wavefunctions: Vec<Vec<C>> = vectors
        .into_iter()
        .map(|v| {
            let peak = v.iter().copied().fold(C::new(0.0, 0.0), |m, x| {
                if x.norm() > m.norm() * (1.0 + 1e-9) {
                    x
                } else {
                    m
                }
            });
            let phase = if peak.norm() > 0.0 {
                peak.conj() / peak.norm()
            } else {
                C::new(1.0, 0.0)
            };
            let nv = norm(&v);
            v.iter().map(|x| x * phase * (scale / nv)).collect()
        })
        .collect();
    let energies: Vec<f64> = values.iter().map(|e| e + op.v_shift).collect();
    let spread = (energies[energies.len() - 1] - energies[0]).max(f64::MIN_POSITIVE);
    let degenerate = energies.len() > 1 && energies[1] - energies[0] < CLUSTER_REL * spread;
    Spectrum2D {
        energies,
        wavefunctions,
        grid: op.grid,
        v_shift: op.v_shift,
        degenerate,
        convergence: None,
        coarse: None,
    }
}

/// Solve on the setup's grid and on the coarsened grid; attach extrapolated
/// energies.
pub fn solve_setup(setup: &MagneticSetup, k: usize) -> Result<Spectrum2D> {
    let fine_op = build_hamiltonian_2d(setup)?;
    let coarse_grid = setup.grid.coarsened()?;
    let coarse_op = assemble(setup, &coarse_grid);
    let (fine, coarse) = rayon::join(|| solve_lowest_2d(&fine_op, k), || solve_lowest_2d(&coarse_op, k));
    let (mut fine, coarse) = (fine?, coarse?);
    let r = coarse_grid.hx() / setup.grid.hx();
    let richardson_energies: Vec<f64> = fine
        .energies
        .iter()
        .zip(&coarse.energies)
        .map(|(f, c)| richardson(*f, *c, r))
        .collect();
    let energy_error_estimate = richardson_energies
        .iter()
        .zip(&fine.energies)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    fine.convergence = Some(Convergence2D {
        h_fine: setup.grid.hx(),
        h_coarse: coarse_grid.hx(),
        nx: setup.grid.nx,
        ny: setup.grid.ny,
        richardson_energies,
        energy_error_estimate,
    });
    fine.coarse = Some(Box::new(coarse));
    Ok(fine)
}

/// Covariant central differences `(D_x psi, D_y psi)` with the Hamiltonian's
/// link phases; `pi = -i hbar D`.
fn covariant_gradient(setup: &MagneticSetup, grid: &Grid2D, psi: &[C]) -> [Vec<C>; 2] {
    let (ax, ay) = link_angles(setup, grid);
    let (nx, ny) = (grid.nx, grid.ny);
    let (hx, hy) = (grid.hx(), grid.hy());
    let zero = C::new(0.0, 0.0);
    let mut dx = vec![zero; grid.len()];
    let mut dy = vec![zero; grid.len()];
    for (j, &theta_x) in ax.iter().enumerate() {
        let ex = C::from_polar(1.0, -theta_x);
        for (i, &theta_y) in ay.iter().enumerate() {
            let k = j * nx + i;
            let right = if i + 1 < nx { psi[k + 1] } else { zero };
            let left = if i > 0 { psi[k - 1] } else { zero };
            dx[k] = (ex * right - ex.conj() * left) / (2.0 * hx);
            let ey = C::from_polar(1.0, -theta_y);
            let up = if j + 1 < ny { psi[k + nx] } else { zero };
            let down = if j > 0 { psi[k - nx] } else { zero };
            dy[k] = (ey * up - ey.conj() * down) / (2.0 * hy);
        }
    }
    [dx, dy]
}

/// Kinetic momentum `pi = p - q A` applied on the grid.
pub fn apply_pi(setup: &MagneticSetup, grid: &Grid2D, psi: &[C]) -> [Vec<C>; 2] {
    let hbar = setup.potential.units.hbar;
    let factor = C::new(0.0, -hbar);
    covariant_gradient(setup, grid, psi).map(|d| d.into_iter().map(|v| v * factor).collect())
}

/// Guiding-center component `R_u = u.r - (w.pi)/(qB)` applied to `psi`.
pub fn apply_guiding_center(setup: &MagneticSetup, grid: &Grid2D, psi: &[C]) -> Result<Vec<C>> {
    if !setup.has_field() {
        return Err(Error::ZeroField);
    }
    let [px, py] = apply_pi(setup, grid, psi);
    let qb = setup.q * setup.b;
    let w = setup.w;
    let mut out = apply_position(setup, grid, psi);
    for (k, o) in out.iter_mut().enumerate() {
        *o -= (px[k] * w[0] + py[k] * w[1]) / qb;
    }
    Ok(out)
}

/// `(u.r) psi`.
pub fn apply_position(setup: &MagneticSetup, grid: &Grid2D, psi: &[C]) -> Vec<C> {
    let u = setup.u;
    let mut out = psi.to_vec();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            out[grid.index(i, j)] *= u[0] * grid.x(i) + u[1] * grid.y(j);
        }
    }
    out
}

/// `<psi_0 | [pi_x, R_u] | psi_0>` and the `pi_y` counterpart, in units of `hbar`.
/// They vanish in the continuum; on the grid they measure the stencil error.
pub fn guiding_center_commutator(sp: &Spectrum2D, setup: &MagneticSetup) -> Result<[C; 2]> {
    let grid = &sp.grid;
    let psi = &sp.wavefunctions[0];
    let r = apply_guiding_center(setup, grid, psi)?;
    let pi = apply_pi(setup, grid, psi);
    let hbar = setup.potential.units.hbar;
    Ok([0, 1].map(|a| {
        // <pi psi, R psi> - <R psi, pi psi>, both operators Hermitian.
        let z = sp.inner(&pi[a], &r);
        (z - z.conj()) / hbar
    }))
}

/// Which in-plane observable to resolve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionObservable {
    GuidingCenter,
    Position,
}

impl DirectionObservable {
    pub fn label(&self) -> &'static str {
        match self {
            DirectionObservable::GuidingCenter => "R_u",
            DirectionObservable::Position => "x_u",
        }
    }
}

struct Level2 {
    weights: Vec<f64>,
    variance: f64,
    s_direct: f64,
}

const ROUNDOFF_FLOOR: f64 = 1e-24;

/// `<w^T (grad grad V) w>_0` by quadrature.
fn hessian_along(sp: &Spectrum2D, setup: &MagneticSetup) -> f64 {
    let g = &sp.grid;
    let w = setup.w;
    let psi = &sp.wavefunctions[0];
    let mut acc = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let h = setup.potential.hessian_2d(g.x(i), g.y(j));
            let q = w[0] * w[0] * h[0][0] + 2.0 * w[0] * w[1] * h[0][1] + w[1] * w[1] * h[1][1];
            acc += psi[g.index(i, j)].norm_sqr() * q;
        }
    }
    acc * g.cell()
}

fn direction_level(sp: &Spectrum2D, setup: &MagneticSetup, obs: DirectionObservable, k: usize) -> Result<Level2> {
    let grid = &sp.grid;
    let psi0 = &sp.wavefunctions[0];
    let (a_psi, s_direct) = match obs {
        DirectionObservable::GuidingCenter => {
            let s = 0.5 * setup.ell_b.powi(4) * hessian_along(sp, setup);
            (apply_guiding_center(setup, grid, psi0)?, s)
        }
        DirectionObservable::Position => (
            apply_position(setup, grid, psi0),
            setup.potential.units.kinetic_scale(),
        ),
    };
    let mean = sp.inner(psi0, &a_psi).re;
    let centered: Vec<C> = a_psi.iter().zip(psi0).map(|(a, p)| a - p * mean).collect();
    let second = sp.inner(&a_psi, &a_psi).re;
    let variance = sp.inner(&centered, &centered).re;
    let floor = ROUNDOFF_FLOOR * second;
    let weights = (1..k)
        .map(|n| {
            let w = sp.inner(&sp.wavefunctions[n], &centered).norm_sqr();
            if w < floor {
                0.0
            } else {
                w
            }
        })
        .collect();
    Ok(Level2 {
        weights,
        variance,
        s_direct,
    })
}

/// Transition elements of a direction observable, extrapolated over the
/// fine/coarse pair. Weights are summed per energy cluster (width
/// [`CLUSTER_REL`] of the spectral spread) before extrapolation and stored on
/// the first member of the cluster, so the result does not depend on the
/// basis chosen inside a degenerate multiplet.
pub fn direction_elements(sp: &Spectrum2D, setup: &MagneticSetup, obs: DirectionObservable, k: usize, tau: f64) -> Result<MatrixElementSet> {
    let k = k.min(sp.k());
    let fine = direction_level(sp, setup, obs, k)?;
    let energies = sp.best_energies();
    let gaps: Vec<f64> = energies[1..k].iter().map(|e| e - energies[0]).collect();
    let cluster_tol = CLUSTER_REL * (energies[k - 1] - energies[0]);
    let groups = clusters(&gaps, cluster_tol);
    let lumped = |weights: &[f64]| {
        let mut out = vec![0.0; weights.len()];
        for &(s, e) in &groups {
            out[s] = weights[s..e].iter().sum();
        }
        out
    };
    let mut weights = lumped(&fine.weights);
    let (mut variance, mut s_direct, mut allowance) = (fine.variance, fine.s_direct, 0.0);
    if let (Some(coarse_sp), Some(r)) = (&sp.coarse, sp.refinement_ratio()) {
        let coarse = direction_level(coarse_sp, setup, obs, k)?;
        let coarse_w = lumped(&coarse.weights);
        for (w, c) in weights.iter_mut().zip(&coarse_w) {
            *w = richardson_nonneg(*w, *c, r);
        }
        variance = richardson_nonneg(fine.variance, coarse.variance, r);
        s_direct = richardson(fine.s_direct, coarse.s_direct, r);
        allowance = (fine.s_direct - coarse.s_direct).abs() / (r * r - 1.0);
    }
    let gap = classify(&gaps, &weights, tau, cluster_tol);
    Ok(MatrixElementSet {
        observable: obs.label().into(),
        elements: weights.iter().map(|w| w.sqrt()).collect(),
        gaps,
        tau,
        k,
        gap,
        variance,
        s_direct,
        allowance,
    })
}

/// Guiding-center elements `|<psi_n | R_u | psi_0>|`; undefined at zero field.
pub fn guiding_center_elements(sp: &Spectrum2D, setup: &MagneticSetup, k: usize, tau: f64) -> Result<(MatrixElementSet, GapInfo)> {
    if !setup.has_field() {
        return Err(Error::ZeroField);
    }
    let set = direction_elements(sp, setup, DirectionObservable::GuidingCenter, k, tau)?;
    let gap = set.gap.clone();
    Ok((set, gap))
}

/// Elements of `x_u = u.r`; the sum rule is `hbar^2/2m` for every `u`.
pub fn position_direction_elements(sp: &Spectrum2D, setup: &MagneticSetup, k: usize, tau: f64) -> Result<(MatrixElementSet, GapInfo)> {
    let set = direction_elements(sp, setup, DirectionObservable::Position, k, tau)?;
    let gap = set.gap.clone();
    Ok((set, gap))
}

/// Sum-rule bookkeeping for the transverse observable.
pub fn transverse_trk(setup: &MagneticSetup, elements: &MatrixElementSet) -> Result<TrkSummary> {
    if setup.potential.curvature_quality() == CurvatureQuality::Singular {
        return Err(Error::CurvatureUnavailable(
            "the transverse sum rule needs the Hessian of V".into(),
        ));
    }
    Ok(trk_sum(elements))
}

/// Certified scalars for one in-plane direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransverseCertificate {
    pub observable: String,
    pub b: f64,
    pub q: f64,
    pub ell_b: f64,
    pub u: [f64; 2],
    pub w: [f64; 2],
    pub k_used: usize,
    pub energies: Vec<f64>,
    pub energy_error_estimate: f64,
    pub h_fine: f64,
    pub h_coarse: f64,
    pub delta: f64,
    pub gamma: Option<f64>,
    pub variance: f64,
    pub bound: f64,
    pub epsilon: f64,
    pub s_direct: f64,
    pub s_spectral: f64,
    pub trk_residual: f64,
    pub eta_trk: f64,
    /// `eta_trk` with the truncated spectral sum in place of the direct one.
    pub eta_trk_spectral: f64,
    pub eta_tilde: f64,
    #[serde(rename = "T")]
    pub tail: f64,
    pub d1_rhs: f64,
    pub d2_t_rhs: f64,
    pub d2_eta_rhs: f64,
    pub alpha0: f64,
    pub alpha_mid: f64,
    pub alpha_bound: f64,
    pub metric: f64,
    pub metric_bound: f64,
    /// `hbar sqrt(<w^T grad grad V w>_0 / m)`: the gap at which the
    /// guiding-center bound would be tight for a quadratic trap.
    pub saturation_gap: Option<f64>,
    pub saturated: bool,
    /// `max |<[pi_i, R_u]>_0| / hbar` on the grid (guiding center only).
    pub commutator_residual: Option<f64>,
    pub gaps: Vec<f64>,
    pub weights: Vec<f64>,
    pub verdicts: Vec<Verdict>,
    pub warnings: Vec<String>,
}

impl TransverseCertificate {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn failures(&self) -> Vec<&Verdict> {
        self.verdicts.iter().filter(|v| !v.pass).collect()
    }
}

/// Evaluate the master bound, D1/D2, polarizability and metric for a
/// direction observable.
pub fn certify_transverse(sp: &Spectrum2D, setup: &MagneticSetup, elements: &MatrixElementSet, summary: &TrkSummary) -> Result<TransverseCertificate> {
    let hbar = setup.potential.units.hbar;
    if sp.degenerate {
        return Err(Error::Degenerate(format!(
            "ground level within {CLUSTER_REL} of the spectral spread of the first excitation"
        )));
    }
    let delta = elements.gap.delta_a.ok_or_else(|| {
        Error::Degenerate(format!("{} couples the ground state to nothing", elements.observable))
    })?;
    let gamma = elements.gap.gamma_a;
    let s = summary.s_direct;
    let bound = s / delta;
    let variance = elements.variance;
    let epsilon = bound - variance;

    let conv = sp.convergence.as_ref();
    let energy_err = conv.map_or(0.0, |c| c.energy_error_estimate);
    let (h_fine, h_coarse) = conv.map_or((sp.grid.hx(), f64::NAN), |c| (c.h_fine, c.h_coarse));
    let rel_disc = energy_err / delta;
    let tol_var = QUADRATURE_TOL + summary.residual / delta + rel_disc * bound;
    let tol_eta = QUADRATURE_TOL + summary.residual / s + rel_disc;

    let rig = rigidity_d1_d2(elements, summary, epsilon, tol_var, tol_eta);
    let weights = elements.weights();
    let alpha0 = 2.0
        * elements
            .gaps
            .iter()
            .zip(&weights)
            .map(|(g, w)| w / g)
            .sum::<f64>();
    let alpha_mid = 2.0 * variance / delta;
    let alpha_bound = 2.0 * s / (delta * delta);
    let metric = variance / (hbar * hbar);
    let metric_bound = bound / (hbar * hbar);
    let eta_trk_spectral = if summary.s_spectral > 0.0 {
        (1.0 - delta * elements.active_weight() / summary.s_spectral).clamp(0.0, 1.0)
    } else {
        0.0
    };

    let (saturation_gap, commutator_residual) = match elements.observable.as_str() {
        "R_u" => {
            let curv = 2.0 * s / setup.ell_b.powi(4);
            let gap = (curv > 0.0).then(|| hbar * (curv / setup.potential.units.mass).sqrt());
            let comm = guiding_center_commutator(sp, setup)?;
            (gap, Some(comm[0].norm().max(comm[1].norm())))
        }
        _ => (None, None),
    };
    let saturated = epsilon.abs() <= tol_var + 1e-6 * bound;

    let closure_tol = (1e-2 * s).max(elements.allowance);
    let lower_edge = match gamma {
        Some(g) => g / (delta + g) * summary.eta_trk,
        None => summary.eta_trk,
    };
    let mut verdicts = vec![
        Verdict::le("master", variance, bound, tol_var),
        Verdict::close("trk_closure", summary.s_spectral, s, closure_tol),
        Verdict::le("d1", rig.d1_rhs, epsilon, tol_var),
        Verdict::le("d2_tail", rig.tail, rig.d2_t_rhs, tol_var * gamma.map_or(0.0, |g| delta / g)),
        Verdict::le("d2_eta", summary.eta_trk, rig.d2_eta_rhs, tol_eta),
        Verdict::le("corridor_upper", summary.eta_tilde, summary.eta_trk, tol_eta),
        Verdict::le("corridor_lower", lower_edge, summary.eta_tilde, tol_eta),
        Verdict::le("polarizability_sum", alpha0, alpha_mid, 2.0 * tol_var / delta),
        Verdict::le("polarizability_bound", alpha_mid, alpha_bound, 2.0 * tol_var / delta),
        Verdict::le("metric", metric, metric_bound, tol_var / (hbar * hbar)),
    ];
    if rig.single_channel {
        for v in verdicts.iter_mut().filter(|v| v.name.starts_with("d1") || v.name.starts_with("d2")) {
            v.note = Some("single active channel: no tail".into());
        }
    }
    if let Some(c) = commutator_residual {
        // Stencil error of the covariant differences, O(h^2/l^2).
        let tol = 10.0 * (h_fine / setup.ell_b).powi(2);
        verdicts.push(Verdict::le("commutator", c, 0.0, tol));
    }
    let mut warnings = Vec::new();
    if elements.gap.threshold_sensitive {
        warnings.push("active-gap classification changes between tau = 1e-12 and 1e-8".into());
    }
    if summary.residual > 1e-2 * s {
        warnings.push(format!(
            "truncated sum rule misses {:.3e} of {:.3e}; raise K",
            summary.residual, s
        ));
    }
    Ok(TransverseCertificate {
        observable: elements.observable.clone(),
        b: setup.b,
        q: setup.q,
        ell_b: setup.ell_b,
        u: setup.u,
        w: setup.w,
        k_used: elements.k,
        energies: sp.best_energies().to_vec(),
        energy_error_estimate: energy_err,
        h_fine,
        h_coarse,
        delta,
        gamma,
        variance,
        bound,
        epsilon,
        s_direct: s,
        s_spectral: summary.s_spectral,
        trk_residual: summary.residual,
        eta_trk: summary.eta_trk,
        eta_trk_spectral,
        eta_tilde: summary.eta_tilde,
        tail: rig.tail,
        d1_rhs: rig.d1_rhs,
        d2_t_rhs: rig.d2_t_rhs,
        d2_eta_rhs: rig.d2_eta_rhs,
        alpha0,
        alpha_mid,
        alpha_bound,
        metric,
        metric_bound,
        saturation_gap,
        saturated,
        commutator_residual,
        gaps: elements.gaps.clone(),
        weights,
        verdicts,
        warnings,
    })
}

/// Solve and certify: guiding center in a field, `x_u` at zero field.
pub fn certify_2d(setup: &MagneticSetup, k: usize, tau: f64) -> Result<TransverseCertificate> {
    let sp = solve_setup(setup, k)?;
    certify_spectrum_2d(&sp, setup, k, tau)
}

/// Certify an already solved spectrum (e.g. for several directions).
pub fn certify_spectrum_2d(sp: &Spectrum2D, setup: &MagneticSetup, k: usize, tau: f64) -> Result<TransverseCertificate> {
    let obs = if setup.has_field() {
        DirectionObservable::GuidingCenter
    } else {
        DirectionObservable::Position
    };
    let elements = direction_elements(sp, setup, obs, k, tau)?;
    let summary = transverse_trk(setup, &elements)?;
    certify_transverse(sp, setup, &elements, &summary)
}
