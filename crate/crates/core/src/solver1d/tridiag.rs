//! Symmetric tridiagonal eigenpairs by Sturm-sequence bisection and inverse
//! iteration.

use crate::error::{Error, Result};

/// Number of eigenvalues strictly below `sigma`.
pub fn sturm_count(diag: &[f64], off: &[f64], sigma: f64) -> usize {
    let pivmin = pivot_floor(off);
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let coupling = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] / q };
        q = diag[i] - sigma - coupling;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn pivot_floor(off: &[f64]) -> f64 {
    let emax = off.iter().fold(1.0f64, |m, e| m.max(e * e));
    f64::MIN_POSITIVE * emax
}

/// Gershgorin interval containing the whole spectrum.
pub fn gershgorin(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    (lo, hi)
}

/// The `k`-th smallest eigenvalue (0-based) by bisection.
pub fn bisect_eigenvalue(diag: &[f64], off: &[f64], k: usize) -> f64 {
    let (mut lo, mut hi) = gershgorin(diag, off);
    let width = (hi - lo).abs().max(f64::MIN_POSITIVE);
    lo -= 1e-12 * width;
    hi += 1e-12 * width;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            break;
        }
        if sturm_count(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// LU factorization with partial pivoting of `T - sigma I`.
struct ShiftedLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn new(diag: &[f64], off: &[f64], sigma: f64) -> Self {
        let n = diag.len();
        let mut d: Vec<f64> = diag.iter().map(|v| v - sigma).collect();
        let mut dl = off.to_vec();
        let mut du = off.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        // An exactly singular shift is what inverse iteration wants; keep the
        // solve finite by nudging zero pivots.
        let scale = diag.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for p in d.iter_mut() {
            if p.abs() < f64::EPSILON * scale {
                *p = f64::EPSILON * scale;
            }
        }
        ShiftedLu {
            dl,
            d,
            du,
            du2,
            swapped,
        }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn residual_norm(diag: &[f64], off: &[f64], v: &[f64], lambda: f64) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut r = (diag[i] - lambda) * v[i];
        if i > 0 {
            r += off[i - 1] * v[i - 1];
        }
        if i + 1 < n {
            r += off[i] * v[i + 1];
        }
        acc += r * r;
    }
    acc.sqrt()
}

/// Deterministic start vector, different for each level.
fn start_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut state = 0x9E37_79B9_7F4A_7C15u64 ^ seed.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 + 0.5
        })
        .collect()
}

/// Lowest `k` eigenpairs; vectors have unit Euclidean norm.
pub fn lowest_eigenpairs(diag: &[f64], off: &[f64], k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = diag.len();
    if k == 0 || k > n {
        return Err(Error::EigensolverFailure(format!(
            "requested {k} eigenpairs of a {n}x{n} matrix"
        )));
    }
    let values: Vec<f64> = (0..k).map(|j| bisect_eigenvalue(diag, off, j)).collect();
    let (lo, hi) = gershgorin(diag, off);
    let tnorm = lo.abs().max(hi.abs());
    let cluster_tol = 1e-3 * tnorm.max(1.0) / n as f64;
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (j, &lambda) in values.iter().enumerate() {
        let neighbours: Vec<usize> = (0..j)
            .filter(|&i| (values[i] - lambda).abs() < cluster_tol)
            .collect();
        let mut found = None;
        'attempt: for attempt in 0..4u64 {
            let lu = ShiftedLu::new(diag, off, lambda);
            let mut v = start_vector(n, j as u64 * 7 + attempt);
            normalize(&mut v);
            for _ in 0..6 {
                lu.solve(&mut v);
                for &i in &neighbours {
                    let dot: f64 = v.iter().zip(&vectors[i]).map(|(a, b)| a * b).sum();
                    v.iter_mut().zip(&vectors[i]).for_each(|(a, b)| *a -= dot * b);
                }
                if normalize(&mut v) == 0.0 || v.iter().any(|x| !x.is_finite()) {
                    continue 'attempt;
                }
                if residual_norm(diag, off, &v, lambda) <= 1e-10 * tnorm.max(1.0) {
                    found = Some(v);
                    break 'attempt;
                }
            }
        }
        match found {
            Some(v) => vectors.push(v),
            None => {
                return Err(Error::EigensolverFailure(format!(
                    "inverse iteration did not converge for eigenvalue {j} ({lambda:.6e})"
                )))
            }
        }
    }
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Free-particle chain: eigenvalues 2 - 2 cos(j pi / (n + 1)).
    fn laplacian(n: usize) -> (Vec<f64>, Vec<f64>) {
        (vec![2.0; n], vec![-1.0; n - 1])
    }

    #[test]
    fn bisection_matches_closed_form() {
        let n = 50;
        let (d, e) = laplacian(n);
        for j in 0..n {
            let exact = 2.0 - 2.0 * ((j + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((bisect_eigenvalue(&d, &e, j) - exact).abs() < 1e-13);
        }
        assert_eq!(sturm_count(&d, &e, 4.0 + 1e-9), n);
        assert_eq!(sturm_count(&d, &e, -1.0), 0);
    }

    #[test]
    fn eigenvectors_are_orthonormal_with_small_residuals() {
        let n = 200;
        let d: Vec<f64> = (0..n).map(|i| 2.0 + 0.001 * (i as f64 - 100.0).powi(2)).collect();
        let e = vec![-1.0; n - 1];
        let (vals, vecs) = lowest_eigenpairs(&d, &e, 10).unwrap();
        for i in 0..10 {
            assert!(residual_norm(&d, &e, &vecs[i], vals[i]) < 1e-9);
            for j in 0..10 {
                let dot: f64 = vecs[i].iter().zip(&vecs[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10, "{i} {j} {dot}");
            }
        }
    }

    #[test]
    fn pivoted_solve_inverts_the_matrix() {
        let d = vec![0.0, 1.0, -2.0, 0.5, 3.0];
        let e = vec![2.0, -1.0, 0.3, 4.0];
        let lu = ShiftedLu::new(&d, &e, 0.1);
        let x0 = [1.0, -2.0, 0.5, 3.0, -1.0];
        let mut b: Vec<f64> = (0..5)
            .map(|i| {
                let mut r = (d[i] - 0.1) * x0[i];
                if i > 0 {
                    r += e[i - 1] * x0[i - 1];
                }
                if i < 4 {
                    r += e[i] * x0[i + 1];
                }
                r
            })
            .collect();
        lu.solve(&mut b);
        for i in 0..5 {
            assert!((b[i] - x0[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn too_many_requested_is_an_error() {
        let (d, e) = laplacian(4);
        assert!(matches!(
            lowest_eigenpairs(&d, &e, 5),
            Err(Error::EigensolverFailure(_))
        ));
    }
}
