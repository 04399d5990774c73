//! Small numerical helpers shared by the solvers.

/// Richardson extrapolation of a quantity with leading error `c h^2`.
///
/// `ratio` is `h_coarse / h_fine`; it need not be 2.
///
/// ```
/// // f(h) = 1 + 3 h^2 sampled at h = 0.1 and h = 0.2
/// let r = trapcert::numerics::richardson(1.03, 1.12, 2.0);
/// assert!((r - 1.0).abs() < 1e-14);
/// ```
pub fn richardson(fine: f64, coarse: f64, ratio: f64) -> f64 {
    let r2 = ratio * ratio;
    (r2 * fine - coarse) / (r2 - 1.0)
}

/// Richardson extrapolation of a non-negative quantity, clamped at zero.
///
/// Lattice artifacts that vanish faster than `h^2` (for instance a selection
/// rule broken at `O(h^2)` in amplitude) extrapolate to a negative number
/// and are reset to zero.
pub fn richardson_nonneg(fine: f64, coarse: f64, ratio: f64) -> f64 {
    richardson(fine, coarse, ratio).max(0.0)
}

/// Relative difference with a floor on the scale.
pub fn rel_diff(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Group sorted values into clusters whose consecutive members are within `tol`.
/// Returns `(start, end)` index ranges, `end` exclusive.
pub fn clusters(sorted: &[f64], tol: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=sorted.len() {
        if i == sorted.len() || sorted[i] - sorted[i - 1] > tol {
            if start < i {
                out.push((start, i));
            }
            start = i;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_cancels_quadratic_error_for_any_ratio() {
        let f = |h: f64| 2.5 - 0.7 * h * h;
        for &(hf, hc) in &[(0.1, 0.2), (0.05, 0.13), (0.3, 0.31)] {
            let r = richardson(f(hf), f(hc), hc / hf);
            assert!((r - 2.5).abs() < 1e-12, "{hf} {hc} {r}");
        }
    }

    #[test]
    fn quartic_order_artifact_clamps_to_zero() {
        let a = |h: f64| 5.0 * h.powi(4);
        assert_eq!(richardson_nonneg(a(0.01), a(0.02), 2.0), 0.0);
    }

    #[test]
    fn cluster_grouping() {
        let v = [0.0, 1.0, 1.0 + 1e-12, 2.0, 3.0, 3.0];
        assert_eq!(clusters(&v, 1e-9), vec![(0, 1), (1, 3), (3, 4), (4, 6)]);
        assert!(clusters(&[], 1.0).is_empty());
    }
}
