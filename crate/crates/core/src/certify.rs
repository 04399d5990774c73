//! Bounds, deficits, rigidity estimates and equality diagnostics for the
//! ground state of a 1D trap, bundled into a [`Certificate`] with explicit
//! per-check tolerances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::richardson_nonneg;
use crate::observables::{
    matrix_elements, matrix_elements_momentum, matrix_elements_position, trk_corridor_weights, trk_sum,
    CorridorWeights, GapInfo, MatrixElementSet, MultiplicativeFn, Observable, TrkSummary,
};
use crate::potential::{CurvatureQuality, PotentialSpec};
use crate::solver1d::{converge_with, ConvergenceRecord, SolverOptions, Spectrum1D};

/// Quadrature floor added to every tolerance.
pub const QUADRATURE_TOL: f64 = 1e-10;

/// One inequality (or equality) check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    /// The check reads `lhs <= rhs + tolerance` unless stated otherwise.
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Verdict {
    pub fn le(name: &str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Verdict {
            name: name.into(),
            pass: lhs <= rhs + tolerance,
            lhs,
            rhs,
            tolerance,
            note: None,
        }
    }

    /// `|lhs - rhs| <= tolerance`.
    pub fn close(name: &str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Verdict {
            pass: (lhs - rhs).abs() <= tolerance,
            ..Self::le(name, lhs, rhs, tolerance)
        }
    }

    /// A check that does not apply; passes with an explanation.
    pub fn vacuous(name: &str, note: &str) -> Self {
        Verdict {
            name: name.into(),
            pass: true,
            lhs: f64::NAN,
            rhs: f64::NAN,
            tolerance: 0.0,
            note: Some(note.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionBound {
    pub var_x: f64,
    pub bound_x: f64,
    pub epsilon: f64,
}

/// `Var(x)`, `hbar^2/(2 m Delta_x)` and their difference.
pub fn certify_position_bound(x: &MatrixElementSet, units: &crate::potential::UnitSystem) -> Result<PositionBound> {
    let delta = x
        .gap
        .delta_a
        .ok_or_else(|| Error::Degenerate("position couples the ground state to nothing".into()))?;
    let bound_x = units.kinetic_scale() / delta;
    Ok(PositionBound {
        var_x: x.variance,
        bound_x,
        epsilon: bound_x - x.variance,
    })
}

/// Deficit from the spectral tail: `(1/Delta) sum [(E_n - E_0) - Delta] |x_n0|^2`.
pub fn exact_deficit_decomposition(x: &MatrixElementSet) -> f64 {
    let Some(delta) = x.gap.delta_a else {
        return 0.0;
    };
    x.gaps
        .iter()
        .zip(x.weights())
        .skip(x.gap.active_states.last().copied().unwrap_or(0))
        .map(|(g, w)| (g - delta) * w)
        .sum::<f64>()
        / delta
}

/// Right-hand sides of the tail rigidity inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRigidity {
    pub tail: f64,
    /// `S Gamma / (Delta (Delta + Gamma)) eta`: lower bound on epsilon.
    pub d1_rhs: f64,
    /// `(Delta/Gamma) epsilon`: upper bound on the tail weight.
    pub d2_t_rhs: f64,
    /// `Delta (Delta + Gamma) / (S Gamma) epsilon`: upper bound on eta.
    pub d2_eta_rhs: f64,
    pub d1_ok: bool,
    pub d2_t_ok: bool,
    pub d2_eta_ok: bool,
    pub single_channel: bool,
}

pub fn rigidity_d1_d2(x: &MatrixElementSet, summary: &TrkSummary, epsilon: f64, tol_var: f64, tol_eta: f64) -> TailRigidity {
    let tail = x.tail_weight();
    let s = summary.s_direct;
    match (x.gap.delta_a, x.gap.gamma_a) {
        (Some(d), Some(g)) => {
            let d1_rhs = s * g / (d * (d + g)) * summary.eta_trk;
            let d2_t_rhs = d / g * epsilon;
            let d2_eta_rhs = d * (d + g) / (s * g) * epsilon;
            TailRigidity {
                tail,
                d1_rhs,
                d2_t_rhs,
                d2_eta_rhs,
                d1_ok: d1_rhs <= epsilon + tol_var,
                d2_t_ok: tail <= d2_t_rhs + tol_var * d / g,
                d2_eta_ok: summary.eta_trk <= d2_eta_rhs + tol_eta,
                single_channel: false,
            }
        }
        _ => TailRigidity {
            tail,
            d1_rhs: 0.0,
            d2_t_rhs: f64::INFINITY,
            d2_eta_rhs: f64::INFINITY,
            d1_ok: true,
            d2_t_ok: true,
            d2_eta_ok: true,
            single_channel: true,
        },
    }
}

/// Force-deviation bound on the tail weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceRigidity {
    pub tail: f64,
    pub d3_rhs: f64,
    /// `|| V' - m omega^2 (x - <x>) ||^2` in the ground density, `omega = Delta_x/hbar`.
    pub g_norm_sq: f64,
}

/// Ground-density norm of the deviation of the force from linear, per grid.
fn force_deviation(sp: &Spectrum1D, active: usize) -> f64 {
    let u = sp.potential.units;
    let omega = (sp.energies[active] - sp.energies[0]) / u.hbar;
    let k = u.mass * omega * omega;
    let mean = sp.ground_expectation(|x| x);
    sp.ground_expectation(|x| {
        let g = sp.potential.eval_derivatives(x).0 - k * (x - mean);
        g * g
    })
}

/// Extrapolated `g_norm_sq`; errors when the force is not a function.
pub fn force_deviation_norm(sp: &Spectrum1D, x: &MatrixElementSet) -> Result<f64> {
    if sp.potential.curvature_quality() == CurvatureQuality::Singular {
        return Err(Error::CurvatureUnavailable(
            "hard walls exert a singular force; its ground-density norm diverges".into(),
        ));
    }
    let active = x
        .gap
        .active_index
        .ok_or_else(|| Error::Degenerate("no active position channel".into()))?;
    let fine = force_deviation(sp, active);
    Ok(match (&sp.coarse, sp.refinement_ratio()) {
        (Some(c), Some(r)) => richardson_nonneg(fine, force_deviation(c, active), r),
        _ => fine,
    })
}

pub fn rigidity_d3(sp: &Spectrum1D, x: &MatrixElementSet) -> Result<ForceRigidity> {
    let g_norm_sq = force_deviation_norm(sp, x)?;
    let u = sp.potential.units;
    let tail = x.tail_weight();
    let d3_rhs = match (x.gap.delta_a, x.gap.gamma_a) {
        (Some(d), Some(g)) => {
            let c = u.hbar.powi(4) / (u.mass * u.mass);
            c * g_norm_sq / (g * (2.0 * d + g)).powi(2)
        }
        _ => f64::INFINITY,
    };
    Ok(ForceRigidity {
        tail,
        d3_rhs,
        g_norm_sq,
    })
}

/// Lower bound on the deficit from the force deviation, given that the
/// tail lives below `Delta + Lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UvWindow {
    pub applicable: bool,
    /// Empirical window: largest tail excitation energy minus `Delta`.
    pub lambda_window: f64,
    /// `hbar^4 g^2 / (m^2 Delta Lambda (2 Delta + Lambda)^2)`.
    pub uv_rhs: f64,
    /// `hbar^4 g^2 / (4 m^2 Delta^3 (Delta + Lambda))`; reported only, see
    /// [`uv_rhs_folded`].
    pub uv_rhs_folded: f64,
}

pub fn uv_window_bound(x: &MatrixElementSet, g_norm_sq: f64, units: &crate::potential::UnitSystem) -> UvWindow {
    let (Some(delta), Some(&last)) = (x.gap.delta_a, x.gap.tail_indices.last()) else {
        return UvWindow {
            applicable: false,
            lambda_window: f64::NAN,
            uv_rhs: 0.0,
            uv_rhs_folded: 0.0,
        };
    };
    let lambda = x.gaps[last - 1] - delta;
    UvWindow {
        applicable: true,
        lambda_window: lambda,
        uv_rhs: uv_rhs(g_norm_sq, delta, lambda, units),
        uv_rhs_folded: uv_rhs_folded(g_norm_sq, delta, lambda, units),
    }
}

/// Window bound: every tail level obeys `(E_n-E_0)^2 - Delta^2 <=
/// (E_n-E_0-Delta) Lambda (2 Delta + Lambda)`, so the force-deviation norm is
/// at most `(m^2/hbar^4) Delta Lambda (2 Delta + Lambda)^2 epsilon`.
pub fn uv_rhs(g_norm_sq: f64, delta: f64, lambda: f64, units: &crate::potential::UnitSystem) -> f64 {
    units.hbar.powi(4) / (units.mass * units.mass) * g_norm_sq
        / (delta * lambda * (2.0 * delta + lambda).powi(2))
}

/// `(hbar^4 / 4 m^2) g^2 / (Delta^3 (Delta + Lambda))`.
///
/// This replaces `(2 Delta + Lambda)^2` by `4 Delta (Delta + Lambda)`, which
/// is smaller, so it is not implied by the window hypothesis and fails once
/// tail levels sit well above `Delta`. Kept for comparison.
pub fn uv_rhs_folded(g_norm_sq: f64, delta: f64, lambda: f64, units: &crate::potential::UnitSystem) -> f64 {
    units.hbar.powi(4) / (4.0 * units.mass * units.mass) * g_norm_sq / (delta.powi(3) * (delta + lambda))
}

/// The four diagnostics that vanish together exactly at the harmonic trap:
/// relative deficit, overlap defect of `x psi_0` with `psi_1`, sum-rule tail
/// fraction, and force-linearity defect.
pub fn equality_battery(x: &MatrixElementSet, bound: &PositionBound, summary: &TrkSummary, g_norm_sq: f64, units: &crate::potential::UnitSystem) -> [f64; 4] {
    let overlap = 1.0 - x.elements.first().map_or(0.0, |a| a * a) / bound.var_x;
    let delta = x.gap.delta_a.unwrap_or(f64::NAN);
    let omega = delta / units.hbar;
    [
        bound.epsilon / bound.bound_x,
        overlap,
        summary.eta_trk,
        g_norm_sq / (units.mass.powi(2) * omega.powi(4) * bound.var_x),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Polarizability {
    /// `2 sum |x_n0|^2 / (E_n - E_0)` over the computed states.
    pub alpha0: f64,
    /// `2 Var(x) / Delta`.
    pub alpha_mid: f64,
    /// `hbar^2 / (m Delta^2)`.
    pub alpha_bound: f64,
}

pub fn polarizability(x: &MatrixElementSet, var_x: f64, units: &crate::potential::UnitSystem) -> Polarizability {
    let delta = x.gap.delta_a.unwrap_or(f64::NAN);
    let alpha0 = 2.0 * x.gaps.iter().zip(x.weights()).map(|(g, w)| w / g).sum::<f64>();
    Polarizability {
        alpha0,
        alpha_mid: 2.0 * var_x / delta,
        alpha_bound: units.hbar * units.hbar / (units.mass * delta * delta),
    }
}

/// `(g_xx, 1/(2 m Delta))`.
pub fn quantum_metric(var_x: f64, delta: f64, units: &crate::potential::UnitSystem) -> (f64, f64) {
    (var_x / (units.hbar * units.hbar), 1.0 / (2.0 * units.mass * delta))
}

/// `(g_AA, S_A / (hbar^2 Delta_A))` for any observable.
pub fn quantum_metric_general(set: &MatrixElementSet, units: &crate::potential::UnitSystem) -> Option<(f64, f64)> {
    let d = set.gap.delta_a?;
    let h2 = units.hbar * units.hbar;
    Some((set.variance / h2, set.s_direct / (h2 * d)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumCorridor {
    pub varp: f64,
    /// `hbar^2 <V''> / (2 Delta)`.
    pub varp_ub: f64,
    /// `hbar^2 <V''> / (2 (Delta + Gamma))`.
    pub varp_lb: f64,
    /// Every contributing momentum transition lies at or below `Delta + Gamma`.
    pub lb_applicable: bool,
    /// `m Delta / 2`.
    pub varp_floor: f64,
    pub note: String,
}

/// Momentum variance against its curvature ceiling and uncertainty floor,
/// with `Delta = E_1 - E_0` and `Gamma = E_2 - E_1`.
pub fn momentum_corridor(p: &MatrixElementSet, units: &crate::potential::UnitSystem) -> MomentumCorridor {
    let delta = p.gaps[0];
    let gamma = p.gaps.get(1).map_or(f64::INFINITY, |g2| g2 - delta);
    let s = p.s_direct;
    let window = delta + gamma;
    let max_gap = std::iter::once(p.gap.active_index)
        .flatten()
        .chain(p.gap.tail_indices.iter().copied())
        .map(|n| p.gaps[n - 1])
        .fold(0.0, f64::max);
    let lb_applicable = max_gap <= window * (1.0 + 1e-9);
    let note = if !s.is_finite() {
        "curvature diverges at hard walls; the ceiling is infinite".to_string()
    } else if lb_applicable {
        "lower edge applies: all momentum transitions lie within Delta + Gamma".to_string()
    } else {
        format!(
            "lower edge informational: momentum transitions reach {max_gap:.6} > Delta + Gamma = {window:.6}"
        )
    };
    MomentumCorridor {
        varp: p.variance,
        varp_ub: s / delta,
        varp_lb: s / window,
        lb_applicable,
        varp_floor: units.mass * delta / 2.0,
        note,
    }
}

/// Everything certified about one trap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub potential: PotentialSpec,
    pub curvature_quality: CurvatureQuality,
    pub k_used: usize,
    pub energies: Vec<f64>,
    /// Active position gap.
    pub delta: f64,
    /// Second active position gap; `null` for a single active channel.
    pub gamma: Option<f64>,
    pub var_x: f64,
    pub bound_x: f64,
    pub epsilon: f64,
    pub epsilon_spectral: f64,
    #[serde(rename = "T")]
    pub tail: f64,
    pub s_spectral: f64,
    pub s_direct: f64,
    pub trk_residual: f64,
    /// Grid dependence of the position sum rule, `|S_lattice - S|`.
    pub trk_allowance: f64,
    pub eta_trk: f64,
    pub eta_tilde: f64,
    pub corridor: CorridorWeights,
    pub d1_rhs: f64,
    pub d2_t_rhs: f64,
    pub d2_eta_rhs: f64,
    pub d3_rhs: f64,
    pub uv_rhs: f64,
    pub uv_rhs_folded: f64,
    pub uv_lambda: f64,
    pub g_norm_sq: f64,
    pub alpha0: f64,
    pub alpha_mid: f64,
    pub alpha_bound: f64,
    pub g_xx: f64,
    pub g_xx_bound: f64,
    pub varp: f64,
    pub varp_ub: f64,
    pub varp_lb: f64,
    pub lb_applicable: bool,
    pub varp_floor: f64,
    pub varp_note: String,
    pub equality_scores: [f64; 4],
    pub position_gaps: GapInfo,
    pub momentum_gaps: GapInfo,
    pub verdicts: Vec<Verdict>,
    pub warnings: Vec<String>,
    pub provenance: ConvergenceRecord,
}

impl Certificate {
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

/// Converged spectrum with enough states that the position sum rule closes.
pub struct Analysis1D {
    pub spectrum: Spectrum1D,
    pub x: MatrixElementSet,
    pub k: usize,
}

/// Solve, doubling `k` until the position sum-rule residual falls below
/// `trk_target` (relative) or `k_max` is reached.
pub fn analyze_1d(spec: &PotentialSpec, opts: &SolverOptions) -> Result<Analysis1D> {
    if spec.dimension() != 1 {
        return Err(Error::MalformedSpec("expected a one-dimensional potential".into()));
    }
    let mut k = opts.k.max(2);
    loop {
        let run = SolverOptions { k, ..opts.clone() };
        let spectrum = converge_with(spec, &run)?;
        let x = matrix_elements_position(&spectrum, k, opts.tau);
        let relative = (x.s_direct - x.s_spectral()).abs() / x.s_direct;
        if relative <= opts.trk_target || k >= opts.k_max {
            log::debug!("k = {k}: position sum-rule residual {relative:.3e}");
            return Ok(Analysis1D { spectrum, x, k });
        }
        k = (2 * k).min(opts.k_max);
    }
}

/// `(hbar^2/2m) h sum psi_i psi_{i+1}`: the position sum rule on the lattice.
pub fn lattice_position_sum(sp: &Spectrum1D) -> f64 {
    let psi = &sp.wavefunctions[0];
    let h = sp.grid.h();
    sp.potential.units.kinetic_scale() * h * psi.windows(2).map(|w| w[0] * w[1]).sum::<f64>()
}

pub fn certify_1d(spec: &PotentialSpec, opts: &SolverOptions) -> Result<Certificate> {
    let analysis = analyze_1d(spec, opts)?;
    certify_analysis(&analysis, opts)
}

pub fn certify_analysis(analysis: &Analysis1D, opts: &SolverOptions) -> Result<Certificate> {
    let sp = &analysis.spectrum;
    let x = &analysis.x;
    let k = analysis.k;
    let units = sp.potential.units;
    let mut warnings = Vec::new();
    let mut verdicts = Vec::new();

    let pos = certify_position_bound(x, &units)?;
    let delta = x.gap.delta_a.expect("checked by certify_position_bound");
    let summary = trk_sum(x);
    let s = summary.s_direct;
    let conv = &sp.convergence;

    // Error of the extrapolated inputs, relative.
    let rel_disc = conv.energy_error_estimate / delta + conv.var_error_estimate / pos.var_x;
    let tol_var = QUADRATURE_TOL + summary.residual / delta + rel_disc * pos.bound_x;
    let tol_eta = QUADRATURE_TOL + summary.residual / s + rel_disc;

    verdicts.push(Verdict::le("position_bound", pos.var_x, pos.bound_x, tol_var));

    let eps_spectral = exact_deficit_decomposition(x);
    let truncation = (x.variance - x.weights().iter().sum::<f64>()).abs();
    verdicts.push(Verdict::close(
        "exact_deficit",
        pos.epsilon,
        eps_spectral,
        tol_var + truncation,
    ));

    let trk_allowance = (lattice_position_sum(sp) - s).abs();
    verdicts.push(Verdict::le(
        "trk_closure_x",
        summary.residual,
        0.0,
        (opts.trk_target * s).max(trk_allowance).max(1e-5 * s),
    ));

    let tail = rigidity_d1_d2(x, &summary, pos.epsilon, tol_var, tol_eta);
    if tail.single_channel {
        let note = "single active channel: tail empty";
        verdicts.push(Verdict::vacuous("d1", note));
        verdicts.push(Verdict::vacuous("d2_tail", note));
        verdicts.push(Verdict::vacuous("d2_eta", note));
    } else {
        let g = x.gap.gamma_a.unwrap();
        verdicts.push(Verdict::le("d1", tail.d1_rhs, pos.epsilon, tol_var));
        verdicts.push(Verdict::le("d2_tail", tail.tail, tail.d2_t_rhs, tol_var * delta / g));
        verdicts.push(Verdict::le("d2_eta", summary.eta_trk, tail.d2_eta_rhs, tol_eta));
    }

    let (d3_rhs, g_norm_sq) = match rigidity_d3(sp, x) {
        Ok(r) => {
            if tail.single_channel {
                verdicts.push(Verdict::vacuous("d3", "single active channel: tail empty"));
            } else {
                verdicts.push(Verdict::le("d3", r.tail, r.d3_rhs, tol_var));
            }
            (r.d3_rhs, r.g_norm_sq)
        }
        Err(Error::CurvatureUnavailable(why)) => {
            verdicts.push(Verdict::vacuous("d3", &why));
            (f64::INFINITY, f64::INFINITY)
        }
        Err(e) => return Err(e),
    };
    if sp.potential.curvature_quality() == CurvatureQuality::Approximate {
        warnings.push("force and curvature come from a spline; d3, uv and the momentum ceiling are approximate".into());
    }

    let uv = if g_norm_sq.is_finite() {
        uv_window_bound(x, g_norm_sq, &units)
    } else {
        UvWindow {
            applicable: false,
            lambda_window: f64::NAN,
            uv_rhs: f64::NAN,
            uv_rhs_folded: f64::NAN,
        }
    };
    if uv.applicable {
        verdicts.push(
            Verdict::le("uv", uv.uv_rhs, pos.epsilon, tol_var)
                .with_note(format!(
                    "empirical window Lambda = {:.6}; folded-constant form gives {:.6e}",
                    uv.lambda_window, uv.uv_rhs_folded
                )),
        );
    } else if g_norm_sq.is_finite() {
        verdicts.push(Verdict::vacuous("uv", "no tail: window undefined"));
    } else {
        verdicts.push(Verdict::vacuous("uv", "force norm diverges at hard walls"));
    }

    let corridor = match trk_corridor_weights(&summary, &x.gap) {
        Ok(c) => {
            verdicts.push(Verdict {
                name: "corridor".into(),
                pass: true,
                lhs: c.eta_tilde,
                rhs: c.upper_edge,
                tolerance: c.tolerance,
                note: Some(format!("lower edge {:.6e}", c.lower_edge)),
            });
            c
        }
        Err(Error::CorridorViolation { lower, value, upper }) => {
            let tolerance = QUADRATURE_TOL + summary.residual / s;
            verdicts.push(Verdict {
                name: "corridor".into(),
                pass: false,
                lhs: value,
                rhs: upper,
                tolerance,
                note: Some(format!("lower edge {lower:.6e}")),
            });
            CorridorWeights {
                eta_trk: summary.eta_trk,
                eta_tilde: value,
                lower_edge: lower,
                upper_edge: upper,
                tolerance,
            }
        }
        Err(e) => return Err(e),
    };

    let pol = polarizability(x, pos.var_x, &units);
    verdicts.push(Verdict::le("polarizability_sum", pol.alpha0, pol.alpha_mid, 2.0 * tol_var / delta));
    verdicts.push(Verdict::le(
        "polarizability_bound",
        pol.alpha_mid,
        pol.alpha_bound,
        2.0 * tol_var / delta,
    ));

    let (g_xx, g_xx_bound) = quantum_metric(pos.var_x, delta, &units);
    let h2 = units.hbar * units.hbar;
    verdicts.push(Verdict::le("metric_x", g_xx, g_xx_bound, tol_var / h2));

    let square = matrix_elements(sp, &Observable::Multiplicative(MultiplicativeFn::power(2)), k, opts.tau);
    if let Some((g_ff, bound)) = quantum_metric_general(&square, &units) {
        let residual = (square.s_direct - square.s_spectral()).max(0.0);
        let d = square.gap.delta_a.unwrap();
        let tol = QUADRATURE_TOL + (residual / d + rel_disc * square.variance) / h2;
        verdicts.push(Verdict::le("master_x2", g_ff, bound, tol));
    }

    let p = matrix_elements_momentum(sp, k, opts.tau);
    let mc = momentum_corridor(&p, &units);
    let tol_p = QUADRATURE_TOL + mc.varp * (rel_disc + summary.residual / s);
    if let Some(dp) = p.gap.delta_a {
        verdicts.push(Verdict::le("master_p", p.variance, p.s_direct / dp, tol_p));
    }
    verdicts.push(Verdict::le("momentum_ub", mc.varp, mc.varp_ub, tol_p));
    verdicts.push(Verdict::le("momentum_floor", mc.varp_floor, mc.varp, tol_p));
    if mc.lb_applicable {
        verdicts.push(Verdict::le("momentum_lb", mc.varp_lb, mc.varp, tol_p));
    } else {
        verdicts.push(Verdict::vacuous("momentum_lb", &mc.note));
    }

    verdicts.push(Verdict {
        name: "nondegenerate".into(),
        pass: !sp.degenerate,
        lhs: f64::NAN,
        rhs: f64::NAN,
        tolerance: 1e-9,
        note: sp.degenerate.then(|| "levels closer than 1e-9 of the spectral width".into()),
    });
    if x.gap.threshold_sensitive {
        warnings.push("position gap classification depends on tau within [1e-12, 1e-8]".into());
    }

    let scores = equality_battery(x, &pos, &summary, g_norm_sq, &units);
    let energies = conv.richardson_energies.clone();

    Ok(Certificate {
        potential: sp.potential.clone(),
        curvature_quality: sp.potential.curvature_quality(),
        k_used: k,
        energies,
        delta,
        gamma: x.gap.gamma_a,
        var_x: pos.var_x,
        bound_x: pos.bound_x,
        epsilon: pos.epsilon,
        epsilon_spectral: eps_spectral,
        tail: tail.tail,
        s_spectral: summary.s_spectral,
        s_direct: s,
        trk_residual: summary.residual,
        trk_allowance,
        eta_trk: summary.eta_trk,
        eta_tilde: summary.eta_tilde,
        corridor,
        d1_rhs: tail.d1_rhs,
        d2_t_rhs: tail.d2_t_rhs,
        d2_eta_rhs: tail.d2_eta_rhs,
        d3_rhs,
        uv_rhs: uv.uv_rhs,
        uv_rhs_folded: uv.uv_rhs_folded,
        uv_lambda: uv.lambda_window,
        g_norm_sq,
        alpha0: pol.alpha0,
        alpha_mid: pol.alpha_mid,
        alpha_bound: pol.alpha_bound,
        g_xx,
        g_xx_bound,
        varp: mc.varp,
        varp_ub: mc.varp_ub,
        varp_lb: mc.varp_lb,
        lb_applicable: mc.lb_applicable,
        varp_floor: mc.varp_floor,
        varp_note: mc.note,
        equality_scores: scores,
        position_gaps: x.gap.clone(),
        momentum_gaps: p.gap.clone(),
        verdicts,
        warnings,
        provenance: conv.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::DEFAULT_TAU;
    use crate::potential::UnitSystem;

    fn cert(spec: PotentialSpec) -> Certificate {
        certify_1d(&spec, &SolverOptions::default()).unwrap()
    }

    #[test]
    fn harmonic_saturates_everything() {
        let c = cert(PotentialSpec::harmonic(1.0));
        assert!(c.all_pass(), "{:?}", c.failures());
        assert!((c.var_x - 0.5).abs() < 1e-7 && (c.bound_x - 0.5).abs() < 1e-7);
        assert!(c.epsilon.abs() < 1e-7);
        assert!(c.equality_scores.iter().all(|s| s.abs() < 1e-6), "{:?}", c.equality_scores);
        assert!((c.alpha0 - 1.0).abs() < 1e-6 && (c.alpha_bound - 1.0).abs() < 1e-6);
        assert!((c.varp - 0.5).abs() < 1e-6 && (c.varp_ub - 0.5).abs() < 1e-6);
        assert!((c.varp_floor - 0.5).abs() < 1e-6 && (c.varp_lb - 0.25).abs() < 1e-6);
        assert!(c.lb_applicable);
        assert_eq!(c.gamma, None);
        assert!(c.g_norm_sq < 1e-12);
        assert!(c.verdict("d1").unwrap().note.is_some());
    }

    #[test]
    fn quartic_is_strict_and_passes() {
        for lambda in [0.1, 0.5, 1.0] {
            let c = cert(PotentialSpec::quartic(lambda, 1.0));
            assert!(c.all_pass(), "lambda {lambda}: {:?}", c.failures());
            assert!(c.epsilon > 1e-4);
            assert!(c.alpha0 < c.alpha_bound);
            assert!(c.g_xx < c.g_xx_bound);
            assert!((c.epsilon - c.epsilon_spectral).abs() < 1e-6);
        }
    }

    #[test]
    fn box_well_values() {
        let c = cert(PotentialSpec::box_well(0.0, std::f64::consts::PI));
        assert!(c.all_pass(), "{:?}", c.failures());
        let var = std::f64::consts::PI.powi(2) / 12.0 - 0.5;
        assert!((c.var_x - var).abs() < 1e-7);
        assert!((c.bound_x - 1.0 / 3.0).abs() < 1e-7);
        assert!((c.epsilon - (1.0 / 3.0 - var)).abs() < 1e-7);
        assert!(c.alpha0 <= 2.0 * var / 1.5 && 2.0 * var / 1.5 <= 4.0 / 9.0);
        assert!(c.verdict("d3").unwrap().note.is_some());
    }

    #[test]
    fn synthetic_two_level_tail_saturates_d1() {
        let (delta, gamma, s) = (1.0, 0.7, 0.5);
        let w1 = 0.3;
        let w2 = (s - delta * w1) / (delta + gamma);
        let set = MatrixElementSet::synthetic(vec![delta, delta + gamma], vec![w1, w2], s, DEFAULT_TAU);
        let summary = trk_sum(&set);
        let units = UnitSystem::default();
        let pos = certify_position_bound(&set, &units).unwrap();
        let r = rigidity_d1_d2(&set, &summary, pos.epsilon, 1e-15, 1e-15);
        assert!((r.d1_rhs - pos.epsilon).abs() < 1e-12);
        assert!((exact_deficit_decomposition(&set) - gamma * w2 / delta).abs() < 1e-12);
        assert!(r.d1_ok && r.d2_t_ok && r.d2_eta_ok);
    }

    #[test]
    fn uv_rhs_decreases_with_window() {
        let u = UnitSystem::default();
        let mut last = f64::INFINITY;
        for lambda in [0.1, 0.5, 1.0, 5.0, 50.0] {
            let r = uv_rhs(0.3, 1.2, lambda, &u);
            assert!(r < last);
            assert!(uv_rhs_folded(0.3, 1.2, lambda, &u) < uv_rhs_folded(0.3, 1.2, 0.9 * lambda, &u));
            last = r;
        }
    }
}
