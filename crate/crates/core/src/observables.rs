//! Transition elements, active gaps, ground-state variances and f-sum rules
//! for position, momentum and multiplicative observables.
//!
//! Every quantity is evaluated on the fine and the coarse grid of a converged
//! spectrum and Richardson-extrapolated; squared magnitudes are clamped at
//! zero so that lattice-only couplings disappear before thresholding.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{clusters, richardson, richardson_nonneg};
use crate::potential::CurvatureQuality;
use crate::solver1d::Spectrum1D;

/// Default relative threshold for calling a transition element nonzero.
pub const DEFAULT_TAU: f64 = 1e-10;

/// Real function of position together with its derivative.
#[derive(Clone)]
pub struct MultiplicativeFn {
    pub name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    df: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl MultiplicativeFn {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        MultiplicativeFn {
            name: name.into(),
            f: Arc::new(f),
            df: Arc::new(df),
        }
    }

    /// `x^k`.
    pub fn power(k: i32) -> Self {
        Self::new(
            format!("x^{k}"),
            move |x| x.powi(k),
            move |x| if k == 0 { 0.0 } else { k as f64 * x.powi(k - 1) },
        )
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("{c}"), move |_| c, |_| 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        (self.df)(x)
    }
}

impl fmt::Debug for MultiplicativeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MultiplicativeFn({})", self.name)
    }
}

#[derive(Debug, Clone)]
pub enum Observable {
    Position,
    Momentum,
    Multiplicative(MultiplicativeFn),
}

impl Observable {
    pub fn label(&self) -> String {
        match self {
            Observable::Position => "position".into(),
            Observable::Momentum => "momentum".into(),
            Observable::Multiplicative(f) => format!("multiplicative({})", f.name),
        }
    }
}

/// Active-gap structure of one observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapInfo {
    /// Smallest excitation energy with a nonzero element; `None` if the
    /// observable does not couple the ground state to anything.
    pub delta_a: Option<f64>,
    /// Increment from the active level to the next active level; `None`
    /// when only one channel is active.
    pub gamma_a: Option<f64>,
    /// State index `n >= 1` of the first active level.
    pub active_index: Option<usize>,
    /// All states in the active energy cluster.
    pub active_states: Vec<usize>,
    /// States above the active cluster classified nonzero.
    pub tail_indices: Vec<usize>,
    /// The classification changes when `tau` moves within `[1e-12, 1e-8]`.
    pub threshold_sensitive: bool,
}

impl GapInfo {
    pub fn single_channel(&self) -> bool {
        self.delta_a.is_some() && self.gamma_a.is_none()
    }
}

/// Transition elements `|A_n0|` for `n = 1..K-1` and derived ground-state data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixElementSet {
    pub observable: String,
    /// `|A_n0|`, index `n - 1`.
    pub elements: Vec<f64>,
    /// `E_n - E_0`, index `n - 1`.
    pub gaps: Vec<f64>,
    pub tau: f64,
    pub k: usize,
    pub gap: GapInfo,
    /// Direct quadrature `Var_0(A)`.
    pub variance: f64,
    /// `1/2 <[A,[H,A]]>_0` from the continuum double commutator.
    pub s_direct: f64,
    /// Grid-dependence of the above (difference between fine and coarse).
    pub allowance: f64,
}

impl MatrixElementSet {
    /// Hand-built element set, e.g. an idealized tail for saturation tests.
    pub fn synthetic(gaps: Vec<f64>, weights: Vec<f64>, s_direct: f64, tau: f64) -> Self {
        let variance = weights.iter().sum();
        let gap = classify(&gaps, &weights, tau, 0.0);
        MatrixElementSet {
            observable: "synthetic".into(),
            elements: weights.iter().map(|w| w.sqrt()).collect(),
            k: gaps.len() + 1,
            gaps,
            tau,
            gap,
            variance,
            s_direct,
            allowance: 0.0,
        }
    }

    /// `|A_n0|^2`, index `n - 1`.
    pub fn weights(&self) -> Vec<f64> {
        self.elements.iter().map(|a| a * a).collect()
    }

    /// Sum of weights in the active cluster.
    pub fn active_weight(&self) -> f64 {
        self.gap
            .active_states
            .iter()
            .map(|n| self.elements[n - 1].powi(2))
            .sum()
    }

    /// Weight above the active cluster (`T` for the position observable).
    pub fn tail_weight(&self) -> f64 {
        let Some(last) = self.gap.active_states.last() else {
            return 0.0;
        };
        self.elements[*last..].iter().map(|a| a * a).sum()
    }

    /// Truncated spectral sum `sum (E_n - E_0) |A_n0|^2`.
    pub fn s_spectral(&self) -> f64 {
        self.gaps
            .iter()
            .zip(&self.elements)
            .map(|(g, a)| g * a * a)
            .sum()
    }
}

/// Classify weights by the relative threshold, grouping levels whose gaps
/// lie within `cluster_tol` (for degenerate multiplets).
pub fn classify(gaps: &[f64], weights: &[f64], tau: f64, cluster_tol: f64) -> GapInfo {
    let mut info = classify_once(gaps, weights, tau, cluster_tol);
    let lo = classify_once(gaps, weights, 1e-12, cluster_tol);
    let hi = classify_once(gaps, weights, 1e-8, cluster_tol);
    info.threshold_sensitive = [&lo, &hi].iter().any(|other| {
        other.active_index != info.active_index
            || other.gamma_a.is_some() != info.gamma_a.is_some()
            || other
                .gamma_a
                .zip(info.gamma_a)
                .is_some_and(|(a, b)| (a - b).abs() > cluster_tol.max(1e-12 * b.abs()))
    });
    info
}

fn classify_once(gaps: &[f64], weights: &[f64], tau: f64, cluster_tol: f64) -> GapInfo {
    let total: f64 = weights.iter().sum();
    let groups = clusters(gaps, cluster_tol);
    let mut active: Vec<(usize, usize)> = Vec::new();
    if total > 0.0 {
        for &(s, e) in &groups {
            let w: f64 = weights[s..e].iter().sum();
            if w >= tau * total && w > 0.0 {
                active.push((s, e));
            }
        }
    }
    let mut info = GapInfo {
        delta_a: None,
        gamma_a: None,
        active_index: None,
        active_states: Vec::new(),
        tail_indices: Vec::new(),
        threshold_sensitive: false,
    };
    let Some(&(s, e)) = active.first() else {
        return info;
    };
    // Representative energy of a cluster: weight-averaged gap.
    let center = |s: usize, e: usize| {
        let w: f64 = weights[s..e].iter().sum();
        gaps[s..e].iter().zip(&weights[s..e]).map(|(g, x)| g * x).sum::<f64>() / w
    };
    let delta = center(s, e);
    info.delta_a = Some(delta);
    info.active_index = Some(s + 1);
    info.active_states = (s + 1..=e).collect();
    if let Some(&(s2, e2)) = active.get(1) {
        info.gamma_a = Some(center(s2, e2) - delta);
    }
    info.tail_indices = active[1..]
        .iter()
        .flat_map(|&(s, e)| s + 1..=e)
        .collect();
    info
}

/// Per-grid raw data for one observable.
struct Level {
    weights: Vec<f64>,
    variance: f64,
    s_direct: f64,
}

/// Central-difference derivative of the ground state (zero at the ends).
fn ground_derivative(sp: &Spectrum1D) -> Vec<f64> {
    let psi = &sp.wavefunctions[0];
    let h = sp.grid.h();
    let n = psi.len();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = (psi[i + 1] - psi[i - 1]) / (2.0 * h);
    }
    d
}

/// Squared elements below this fraction of `<A^2>_0` are roundoff.
const ROUNDOFF_FLOOR: f64 = 1e-24;

fn level(sp: &Spectrum1D, obs: &Observable, k: usize) -> Level {
    let mut out = raw_level(sp, obs, k);
    let floor = ROUNDOFF_FLOOR * (out.variance + out.weights.iter().sum::<f64>()).abs();
    let second_moment = match obs {
        Observable::Multiplicative(f) => sp.ground_expectation(|x| f.eval(x).powi(2)),
        Observable::Position => sp.ground_expectation(|x| x * x),
        Observable::Momentum => out.variance,
    };
    let floor = floor.max(ROUNDOFF_FLOOR * second_moment);
    out.weights.iter_mut().filter(|w| **w < floor).for_each(|w| *w = 0.0);
    out
}

fn raw_level(sp: &Spectrum1D, obs: &Observable, k: usize) -> Level {
    let units = sp.potential.units;
    let kin = units.kinetic_scale();
    let h = sp.grid.h();
    match obs {
        Observable::Position => {
            let mean = sp.ground_expectation(|x| x);
            Level {
                weights: (1..k).map(|n| sp.braket(n, 0, |x| x - mean).powi(2)).collect(),
                variance: sp.variance_x(),
                s_direct: kin,
            }
        }
        Observable::Momentum => {
            let d = ground_derivative(sp);
            let hb = units.hbar;
            let weights = (1..k)
                .map(|n| {
                    let overlap: f64 = sp.wavefunctions[n].iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() * h;
                    (hb * overlap).powi(2)
                })
                .collect();
            // Link differences, i.e. 2m<T> on the lattice. The central form
            // drops the wall links and converges only as O(h) at hard walls.
            let psi = &sp.wavefunctions[0];
            let variance = hb * hb * psi.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / h;
            let s_direct = match sp.potential.curvature_quality() {
                CurvatureQuality::Singular => f64::INFINITY,
                _ => 0.5 * hb * hb * sp.ground_expectation(|x| sp.potential.eval_derivatives(x).1),
            };
            Level {
                weights,
                variance,
                s_direct,
            }
        }
        Observable::Multiplicative(f) => {
            let mean = sp.ground_expectation(|x| f.eval(x));
            Level {
                weights: (1..k).map(|n| sp.braket(n, 0, |x| f.eval(x) - mean).powi(2)).collect(),
                variance: sp.ground_expectation(|x| (f.eval(x) - mean).powi(2)),
                s_direct: kin * sp.ground_expectation(|x| f.derivative(x).powi(2)),
            }
        }
    }
}

/// Extrapolate a scalar over the fine/coarse pair of `sp`.
/// Returns `(value, |fine - coarse|)`.
pub fn extrapolate(sp: &Spectrum1D, f: impl Fn(&Spectrum1D) -> f64) -> (f64, f64) {
    let fine = f(sp);
    match (&sp.coarse, sp.refinement_ratio()) {
        (Some(c), Some(r)) => {
            let coarse = f(c);
            if fine.is_finite() && coarse.is_finite() {
                (richardson(fine, coarse, r), (fine - coarse).abs())
            } else {
                (fine, 0.0)
            }
        }
        _ => (fine, 0.0),
    }
}

/// Excitation energies `E_n - E_0` for `n = 1..k-1`, extrapolated when possible.
pub fn excitation_gaps(sp: &Spectrum1D, k: usize) -> Vec<f64> {
    let e = if sp.coarse.is_some() {
        &sp.convergence.richardson_energies
    } else {
        &sp.energies
    };
    (1..k).map(|n| e[n] - e[0]).collect()
}

/// Elements of `obs` between `psi_0` and `psi_1..psi_{k-1}`.
pub fn matrix_elements(sp: &Spectrum1D, obs: &Observable, k: usize, tau: f64) -> MatrixElementSet {
    let k = k.min(sp.k());
    let fine = level(sp, obs, k);
    let (weights, variance, s_direct, allowance) = match (&sp.coarse, sp.refinement_ratio()) {
        (Some(c), Some(r)) if c.k() >= k => {
            let coarse = level(c, obs, k);
            let weights = fine
                .weights
                .iter()
                .zip(&coarse.weights)
                .map(|(a, b)| richardson_nonneg(*a, *b, r))
                .collect();
            let s = if fine.s_direct.is_finite() {
                richardson(fine.s_direct, coarse.s_direct, r)
            } else {
                fine.s_direct
            };
            let allowance = (fine.variance - coarse.variance).abs()
                + if s.is_finite() { (fine.s_direct - coarse.s_direct).abs() } else { 0.0 };
            (weights, richardson(fine.variance, coarse.variance, r), s, allowance)
        }
        _ => (fine.weights, fine.variance, fine.s_direct, 0.0),
    };
    let gaps = excitation_gaps(sp, k);
    let gap = classify(&gaps, &weights, tau, 0.0);
    MatrixElementSet {
        observable: obs.label(),
        elements: weights.iter().map(|w| w.sqrt()).collect(),
        gaps,
        tau,
        k,
        gap,
        variance,
        s_direct,
        allowance,
    }
}

pub fn matrix_elements_position(sp: &Spectrum1D, k: usize, tau: f64) -> MatrixElementSet {
    matrix_elements(sp, &Observable::Position, k, tau)
}

pub fn matrix_elements_momentum(sp: &Spectrum1D, k: usize, tau: f64) -> MatrixElementSet {
    matrix_elements(sp, &Observable::Momentum, k, tau)
}

pub fn matrix_elements_general(sp: &Spectrum1D, f: &MultiplicativeFn, k: usize, tau: f64) -> MatrixElementSet {
    matrix_elements(sp, &Observable::Multiplicative(f.clone()), k, tau)
}

/// Direct variance next to its truncated spectral sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub direct: f64,
    pub spectral: f64,
    pub difference: f64,
}

pub fn variance_ground(sp: &Spectrum1D, obs: &Observable) -> VarianceReport {
    let set = matrix_elements(sp, obs, sp.k(), DEFAULT_TAU);
    let spectral: f64 = set.weights().iter().sum();
    VarianceReport {
        direct: set.variance,
        spectral,
        difference: set.variance - spectral,
    }
}

/// Sum-rule bookkeeping for one observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrkSummary {
    pub s_spectral: f64,
    pub s_direct: f64,
    pub residual: f64,
    /// Share of the sum rule carried above the active level, in `[0, 1]`.
    pub eta_trk: f64,
    /// Normalized oscillator strengths `(E_n - E_0)|A_n0|^2 / S`.
    pub f_weights: Vec<f64>,
    pub eta_tilde: f64,
}

pub fn trk_sum(elements: &MatrixElementSet) -> TrkSummary {
    let s_spectral = elements.s_spectral();
    let s = elements.s_direct;
    let f_weights: Vec<f64> = elements
        .gaps
        .iter()
        .zip(elements.weights())
        .map(|(g, w)| g * w / s)
        .collect();
    let (eta_trk, eta_tilde) = match elements.gap.delta_a {
        Some(delta) if s.is_finite() && s > 0.0 => {
            let eta = (1.0 - delta * elements.active_weight() / s).clamp(0.0, 1.0);
            let tilde = 1.0
                - delta
                    * f_weights
                        .iter()
                        .zip(&elements.gaps)
                        .map(|(f, g)| f / g)
                        .sum::<f64>();
            (eta, tilde)
        }
        _ => (0.0, 0.0),
    };
    TrkSummary {
        s_spectral,
        s_direct: s,
        residual: (s - s_spectral).abs(),
        eta_trk,
        f_weights,
        eta_tilde,
    }
}

/// `eta_trk`, `eta_tilde` and the corridor `[Gamma/(Delta+Gamma) eta, eta]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorridorWeights {
    pub eta_trk: f64,
    pub eta_tilde: f64,
    pub lower_edge: f64,
    pub upper_edge: f64,
    pub tolerance: f64,
}

pub fn trk_corridor_weights(summary: &TrkSummary, gap: &GapInfo) -> Result<CorridorWeights> {
    let eta = summary.eta_trk;
    let lower = match (gap.delta_a, gap.gamma_a) {
        (Some(d), Some(g)) => g / (d + g) * eta,
        _ => eta,
    };
    let tolerance = 1e-10 + summary.residual / summary.s_direct.abs().max(f64::MIN_POSITIVE);
    let out = CorridorWeights {
        eta_trk: eta,
        eta_tilde: summary.eta_tilde,
        lower_edge: lower,
        upper_edge: eta,
        tolerance,
    };
    if summary.eta_tilde < lower - tolerance || summary.eta_tilde > eta + tolerance {
        return Err(Error::CorridorViolation {
            lower,
            value: summary.eta_tilde,
            upper: eta,
        });
    }
    Ok(out)
}
