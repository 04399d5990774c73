//! Declarative confining potentials in one and two dimensions.
//!
//! Every analytic kind carries closed-form first and second derivatives; the
//! force `V'` and curvature `V''` feed the double-commutator identities, so
//! they are never finite-differenced. Tabulated potentials interpolate with a
//! natural cubic spline and report their curvature as approximate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants the Hamiltonian is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    pub hbar: f64,
    pub mass: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_ref: Option<f64>,
}

impl Default for UnitSystem {
    fn default() -> Self {
        UnitSystem {
            hbar: 1.0,
            mass: 1.0,
            omega_ref: None,
        }
    }
}

impl UnitSystem {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        let units = UnitSystem {
            hbar,
            mass,
            omega_ref: None,
        };
        units.validate()?;
        Ok(units)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.hbar) || !positive(self.mass) {
            return Err(Error::MalformedSpec(format!(
                "hbar and mass must be finite and positive (hbar={}, mass={})",
                self.hbar, self.mass
            )));
        }
        if let Some(w) = self.omega_ref {
            if !positive(w) {
                return Err(Error::MalformedSpec(format!(
                    "omega_ref must be positive, got {w}"
                )));
            }
        }
        Ok(())
    }

    /// `hbar^2 / (2 m)`, the coefficient of the kinetic term.
    pub fn kinetic_scale(&self) -> f64 {
        self.hbar * self.hbar / (2.0 * self.mass)
    }
}

/// How trustworthy `V'` and `V''` are for curvature-based formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurvatureQuality {
    /// Closed-form derivatives.
    Exact,
    /// Spline derivatives; curvature-based checks carry a warning.
    Approximate,
    /// Hard walls: the wall force is a distribution, so `<V''>` and the
    /// force norm diverge.
    Singular,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    /// `V(x) = sum_k c_k x^k`.
    Polynomial1d { coeffs: Vec<f64> },
    /// `V(x) = m omega^2 x^2 / 2 + lambda x^4`.
    QuarticFamily { lambda: f64, omega: f64 },
    /// `V(x) = (x^2 - a^2)^2 / (4 a^2)`.
    DoubleWell { a: f64 },
    /// Infinite square well on `[left, right]`.
    Box { left: f64, right: f64 },
    /// Natural cubic spline through samples, hard walls outside the table.
    Tabulated1d(CubicSpline),
    /// `V(x, y) = sum_ij c[i][j] x^i y^j`.
    Polynomial2d { coeffs: Vec<Vec<f64>> },
    /// `V = m (wx^2 x^2 + wy^2 y^2) / 2 + lambda (x^2 + y^2)^2`.
    Quadratic2dAnisotropic {
        omega_x: f64,
        omega_y: f64,
        lambda: f64,
    },
}

/// A validated, confining potential together with its unit system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PotentialConfig", into = "PotentialConfig")]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub units: UnitSystem,
}

impl PotentialSpec {
    pub fn new(kind: PotentialKind, units: UnitSystem) -> Result<Self> {
        let spec = PotentialSpec { kind, units };
        spec.validate()?;
        Ok(spec)
    }

    /// `V = x^2/2` in units `hbar = m = omega = 1`.
    pub fn harmonic(omega: f64) -> Self {
        Self::quartic(0.0, omega)
    }

    /// `V = x^2/2 + lambda x^4` in units `hbar = m = 1`.
    pub fn quartic(lambda: f64, omega: f64) -> Self {
        Self::new(
            PotentialKind::QuarticFamily { lambda, omega },
            UnitSystem::default(),
        )
        .expect("quartic family parameters must be non-negative")
    }

    pub fn double_well(a: f64) -> Self {
        Self::new(PotentialKind::DoubleWell { a }, UnitSystem::default())
            .expect("double-well half-separation must be positive")
    }

    pub fn box_well(left: f64, right: f64) -> Self {
        Self::new(PotentialKind::Box { left, right }, UnitSystem::default())
            .expect("box must have positive length")
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        Self::new(PotentialKind::Polynomial1d { coeffs }, UnitSystem::default())
    }

    pub fn anisotropic_2d(omega_x: f64, omega_y: f64) -> Self {
        Self::new(
            PotentialKind::Quadratic2dAnisotropic {
                omega_x,
                omega_y,
                lambda: 0.0,
            },
            UnitSystem::default(),
        )
        .expect("trap frequencies must be positive")
    }

    pub fn with_units(mut self, units: UnitSystem) -> Result<Self> {
        self.units = units;
        self.validate()?;
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        match self.kind {
            PotentialKind::Polynomial2d { .. } | PotentialKind::Quadratic2dAnisotropic { .. } => 2,
            _ => 1,
        }
    }

    pub fn curvature_quality(&self) -> CurvatureQuality {
        match self.kind {
            PotentialKind::Box { .. } => CurvatureQuality::Singular,
            PotentialKind::Tabulated1d(_) => CurvatureQuality::Approximate,
            _ => CurvatureQuality::Exact,
        }
    }

    /// Finite interval outside of which the potential is infinite, if any.
    pub fn hard_walls(&self) -> Option<(f64, f64)> {
        match &self.kind {
            PotentialKind::Box { left, right } => Some((*left, *right)),
            PotentialKind::Tabulated1d(s) => Some((s.xs[0], s.xs[s.xs.len() - 1])),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        self.units.validate()?;
        let finite = |v: &[f64]| v.iter().all(|c| c.is_finite());
        match &self.kind {
            PotentialKind::Polynomial1d { coeffs } => {
                if coeffs.is_empty() || !finite(coeffs) {
                    return Err(Error::MalformedSpec(
                        "polynomial needs finite coefficients".into(),
                    ));
                }
                let degree = coeffs.iter().rposition(|c| *c != 0.0);
                match degree {
                    Some(d) if d >= 2 && d % 2 == 0 && coeffs[d] > 0.0 => Ok(()),
                    Some(d) => Err(Error::NonConfining(format!(
                        "leading term {} x^{d} must have even degree >= 2 and positive coefficient",
                        coeffs[d]
                    ))),
                    None => Err(Error::NonConfining("zero polynomial".into())),
                }
            }
            PotentialKind::QuarticFamily { lambda, omega } => {
                if !lambda.is_finite() || !omega.is_finite() {
                    return Err(Error::MalformedSpec("non-finite quartic parameter".into()));
                }
                if *lambda < 0.0 {
                    return Err(Error::NonConfining(format!(
                        "negative quartic coefficient {lambda}"
                    )));
                }
                if *omega <= 0.0 {
                    return Err(Error::NonConfining(format!(
                        "harmonic frequency must be positive, got {omega}"
                    )));
                }
                Ok(())
            }
            PotentialKind::DoubleWell { a } => {
                if !(a.is_finite() && *a > 0.0) {
                    return Err(Error::MalformedSpec(format!(
                        "double-well half-separation must be positive, got {a}"
                    )));
                }
                Ok(())
            }
            PotentialKind::Box { left, right } => {
                if !(left.is_finite() && right.is_finite() && right > left) {
                    return Err(Error::MalformedSpec(format!(
                        "box needs left < right, got [{left}, {right}]"
                    )));
                }
                Ok(())
            }
            PotentialKind::Tabulated1d(spline) => spline.validate(),
            PotentialKind::Polynomial2d { coeffs } => validate_poly2d(coeffs),
            PotentialKind::Quadratic2dAnisotropic {
                omega_x,
                omega_y,
                lambda,
            } => {
                if !(omega_x.is_finite() && omega_y.is_finite() && lambda.is_finite()) {
                    return Err(Error::MalformedSpec("non-finite 2D trap parameter".into()));
                }
                if *omega_x <= 0.0 || *omega_y <= 0.0 || *lambda < 0.0 {
                    return Err(Error::NonConfining(format!(
                        "need omega_x, omega_y > 0 and lambda >= 0 (got {omega_x}, {omega_y}, {lambda})"
                    )));
                }
                Ok(())
            }
        }
    }

    /// `V(x)` for a one-dimensional potential. Infinite outside hard walls.
    pub fn eval_potential(&self, x: f64) -> f64 {
        let m = self.units.mass;
        match &self.kind {
            PotentialKind::Polynomial1d { coeffs } => horner(coeffs, x),
            PotentialKind::QuarticFamily { lambda, omega } => {
                0.5 * m * omega * omega * x * x + lambda * x.powi(4)
            }
            PotentialKind::DoubleWell { a } => {
                let s = x * x - a * a;
                s * s / (4.0 * a * a)
            }
            PotentialKind::Box { left, right } => {
                if x < *left || x > *right {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            PotentialKind::Tabulated1d(spline) => spline.eval(x).0,
            PotentialKind::Polynomial2d { .. } | PotentialKind::Quadratic2dAnisotropic { .. } => {
                f64::NAN
            }
        }
    }

    /// Analytic `(V'(x), V''(x))`.
    pub fn eval_derivatives(&self, x: f64) -> (f64, f64) {
        let m = self.units.mass;
        match &self.kind {
            PotentialKind::Polynomial1d { coeffs } => {
                let d1: Vec<f64> = derivative_coeffs(coeffs);
                let d2: Vec<f64> = derivative_coeffs(&d1);
                (horner(&d1, x), horner(&d2, x))
            }
            PotentialKind::QuarticFamily { lambda, omega } => {
                let k = m * omega * omega;
                (k * x + 4.0 * lambda * x.powi(3), k + 12.0 * lambda * x * x)
            }
            PotentialKind::DoubleWell { a } => {
                let a2 = a * a;
                (x * (x * x - a2) / a2, (3.0 * x * x - a2) / a2)
            }
            PotentialKind::Box { .. } => (0.0, 0.0),
            PotentialKind::Tabulated1d(spline) => {
                let (_, d1, d2) = spline.eval(x);
                (d1, d2)
            }
            PotentialKind::Polynomial2d { .. } | PotentialKind::Quadratic2dAnisotropic { .. } => {
                (f64::NAN, f64::NAN)
            }
        }
    }

    /// `V(x, y)` for a two-dimensional potential.
    pub fn eval_2d(&self, x: f64, y: f64) -> f64 {
        let m = self.units.mass;
        match &self.kind {
            PotentialKind::Polynomial2d { coeffs } => poly2d(coeffs, x, y, 0, 0),
            PotentialKind::Quadratic2dAnisotropic {
                omega_x,
                omega_y,
                lambda,
            } => {
                let r2 = x * x + y * y;
                0.5 * m * (omega_x * omega_x * x * x + omega_y * omega_y * y * y)
                    + lambda * r2 * r2
            }
            _ => f64::NAN,
        }
    }

    /// Gradient `(dV/dx, dV/dy)`.
    pub fn gradient_2d(&self, x: f64, y: f64) -> [f64; 2] {
        let m = self.units.mass;
        match &self.kind {
            PotentialKind::Polynomial2d { coeffs } => {
                [poly2d(coeffs, x, y, 1, 0), poly2d(coeffs, x, y, 0, 1)]
            }
            PotentialKind::Quadratic2dAnisotropic {
                omega_x,
                omega_y,
                lambda,
            } => {
                let r2 = x * x + y * y;
                [
                    m * omega_x * omega_x * x + 4.0 * lambda * r2 * x,
                    m * omega_y * omega_y * y + 4.0 * lambda * r2 * y,
                ]
            }
            _ => [f64::NAN; 2],
        }
    }

    /// Hessian `[[Vxx, Vxy], [Vxy, Vyy]]`.
    pub fn hessian_2d(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let m = self.units.mass;
        match &self.kind {
            PotentialKind::Polynomial2d { coeffs } => {
                let xy = poly2d(coeffs, x, y, 1, 1);
                [
                    [poly2d(coeffs, x, y, 2, 0), xy],
                    [xy, poly2d(coeffs, x, y, 0, 2)],
                ]
            }
            PotentialKind::Quadratic2dAnisotropic {
                omega_x,
                omega_y,
                lambda,
            } => {
                let r2 = x * x + y * y;
                let xy = 8.0 * lambda * x * y;
                [
                    [m * omega_x * omega_x + 4.0 * lambda * (r2 + 2.0 * x * x), xy],
                    [xy, m * omega_y * omega_y + 4.0 * lambda * (r2 + 2.0 * y * y)],
                ]
            }
            _ => [[f64::NAN; 2]; 2],
        }
    }

    /// Serialize back to the config fragment format.
    pub fn to_toml(&self) -> String {
        toml::to_string(&PotentialConfig::from(self.clone()))
            .expect("potential config is always representable")
    }
}

/// Parse a structured config fragment (TOML) into a validated spec.
///
/// ```
/// let spec = trapcert::potential::parse_potential_spec(
///     "kind = \"polynomial-1d\"\ncoeffs = [0.0, 0.0, 0.5, 0.0, 0.1]",
/// ).unwrap();
/// assert!((spec.eval_potential(1.0) - 0.6).abs() < 1e-15);
/// ```
pub fn parse_potential_spec(text: &str) -> Result<PotentialSpec> {
    let config: PotentialConfig =
        toml::from_str(text).map_err(|e| Error::MalformedSpec(e.to_string()))?;
    PotentialSpec::try_from(config)
}

pub fn eval_potential(spec: &PotentialSpec, x: f64) -> f64 {
    spec.eval_potential(x)
}

pub fn eval_derivatives(spec: &PotentialSpec, x: f64) -> (f64, f64) {
    spec.eval_derivatives(x)
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn derivative_coeffs(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| k as f64 * c)
        .collect()
}

fn falling(n: usize, k: usize) -> f64 {
    (0..k).map(|i| (n - i) as f64).product()
}

/// `d^dx/dx d^dy/dy` of `sum c[i][j] x^i y^j`.
fn poly2d(coeffs: &[Vec<f64>], x: f64, y: f64, dx: usize, dy: usize) -> f64 {
    let mut total = 0.0;
    for (i, row) in coeffs.iter().enumerate() {
        if i < dx {
            continue;
        }
        let xi = falling(i, dx) * x.powi((i - dx) as i32);
        for (j, c) in row.iter().enumerate() {
            if j < dy || *c == 0.0 {
                continue;
            }
            total += c * xi * falling(j, dy) * y.powi((j - dy) as i32);
        }
    }
    total
}

fn validate_poly2d(coeffs: &[Vec<f64>]) -> Result<()> {
    if coeffs.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::MalformedSpec("non-finite 2D coefficient".into()));
    }
    let degree = coeffs
        .iter()
        .enumerate()
        .flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(move |(j, _)| i + j)
        })
        .max();
    let Some(degree) = degree else {
        return Err(Error::NonConfining("zero polynomial".into()));
    };
    if degree < 2 || degree % 2 == 1 {
        return Err(Error::NonConfining(format!(
            "total degree {degree} must be even and >= 2"
        )));
    }
    // The top homogeneous part must be positive in every direction.
    let min_leading = (0..720)
        .map(|k| {
            let t = k as f64 * std::f64::consts::PI / 360.0;
            let (c, s) = (t.cos(), t.sin());
            let mut acc = 0.0;
            for (i, row) in coeffs.iter().enumerate() {
                for (j, a) in row.iter().enumerate() {
                    if i + j == degree {
                        acc += a * c.powi(i as i32) * s.powi(j as i32);
                    }
                }
            }
            acc
        })
        .fold(f64::INFINITY, f64::min);
    if min_leading <= 0.0 {
        return Err(Error::NonConfining(format!(
            "leading homogeneous part of degree {degree} is not positive definite"
        )));
    }
    Ok(())
}

/// Natural cubic spline with analytic first and second derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let mut spline = CubicSpline {
            m: vec![0.0; xs.len()],
            xs,
            ys,
        };
        spline.validate()?;
        let n = spline.xs.len();
        // Tridiagonal system for interior second derivatives; M_0 = M_{n-1} = 0.
        let mut diag = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let (x, y) = (&spline.xs, &spline.ys);
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            diag[i] = 2.0 * (h0 + h1);
            upper[i] = h1;
            rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
        }
        for i in 2..n - 1 {
            let lower = x[i] - x[i - 1];
            let w = lower / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        for i in (1..n - 1).rev() {
            let next = if i + 1 < n - 1 { spline.m[i + 1] } else { 0.0 };
            spline.m[i] = (rhs[i] - upper[i] * next) / diag[i];
        }
        Ok(spline)
    }

    fn validate(&self) -> Result<()> {
        if self.xs.len() != self.ys.len() || self.xs.len() < 4 {
            return Err(Error::MalformedSpec(
                "tabulated potential needs >= 4 (x, v) pairs of equal length".into(),
            ));
        }
        if self.xs.iter().chain(&self.ys).any(|v| !v.is_finite()) {
            return Err(Error::MalformedSpec("non-finite tabulated sample".into()));
        }
        if self.xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::MalformedSpec(
                "tabulated x samples must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }

    /// `(value, first derivative, second derivative)`; infinite outside the table.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let n = self.xs.len();
        if x < self.xs[0] || x > self.xs[n - 1] {
            return (f64::INFINITY, 0.0, 0.0);
        }
        let i = self.xs.partition_point(|&k| k <= x).clamp(1, n - 1) - 1;
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let value = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d1 = (y1 - y0) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0 + (3.0 * b * b - 1.0) * h * m1 / 6.0;
        let d2 = a * m0 + b * m1;
        (value, d1, d2)
    }
}

/// Flat serde view of a potential: `{kind, coeffs|lambda|a|..., mass, hbar}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs2d: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_ref: Option<f64>,
}

fn required<T>(value: Option<T>, kind: &str, field: &str) -> Result<T> {
    value.ok_or_else(|| Error::MalformedSpec(format!("kind `{kind}` requires field `{field}`")))
}

impl TryFrom<PotentialConfig> for PotentialSpec {
    type Error = Error;

    fn try_from(c: PotentialConfig) -> Result<Self> {
        let units = UnitSystem {
            hbar: c.hbar.unwrap_or(1.0),
            mass: c.mass.unwrap_or(1.0),
            omega_ref: c.omega_ref,
        };
        let kind_name = c.kind.as_str();
        let kind = match kind_name {
            "polynomial-1d" => PotentialKind::Polynomial1d {
                coeffs: required(c.coeffs, kind_name, "coeffs")?,
            },
            "quartic-family" | "harmonic" => PotentialKind::QuarticFamily {
                lambda: if kind_name == "harmonic" {
                    0.0
                } else {
                    required(c.lambda, kind_name, "lambda")?
                },
                omega: c.omega.or(c.omega_ref).unwrap_or(1.0),
            },
            "double-well" => PotentialKind::DoubleWell {
                a: required(c.a, kind_name, "a")?,
            },
            "box" => PotentialKind::Box {
                left: required(c.left, kind_name, "left")?,
                right: required(c.right, kind_name, "right")?,
            },
            "tabulated-1d" => PotentialKind::Tabulated1d(CubicSpline::new(
                required(c.x, kind_name, "x")?,
                required(c.v, kind_name, "v")?,
            )?),
            "polynomial-2d" => PotentialKind::Polynomial2d {
                coeffs: required(c.coeffs2d, kind_name, "coeffs2d")?,
            },
            "quadratic-2d-anisotropic" => PotentialKind::Quadratic2dAnisotropic {
                omega_x: required(c.omega_x, kind_name, "omega_x")?,
                omega_y: required(c.omega_y, kind_name, "omega_y")?,
                lambda: c.lambda.unwrap_or(0.0),
            },
            other => {
                return Err(Error::MalformedSpec(format!(
                    "unknown potential kind `{other}`"
                )))
            }
        };
        PotentialSpec::new(kind, units)
    }
}

impl From<PotentialSpec> for PotentialConfig {
    fn from(spec: PotentialSpec) -> Self {
        let mut c = PotentialConfig {
            mass: Some(spec.units.mass),
            hbar: Some(spec.units.hbar),
            omega_ref: spec.units.omega_ref,
            ..Default::default()
        };
        match spec.kind {
            PotentialKind::Polynomial1d { coeffs } => {
                c.kind = "polynomial-1d".into();
                c.coeffs = Some(coeffs);
            }
            PotentialKind::QuarticFamily { lambda, omega } => {
                c.kind = "quartic-family".into();
                c.lambda = Some(lambda);
                c.omega = Some(omega);
            }
            PotentialKind::DoubleWell { a } => {
                c.kind = "double-well".into();
                c.a = Some(a);
            }
            PotentialKind::Box { left, right } => {
                c.kind = "box".into();
                c.left = Some(left);
                c.right = Some(right);
            }
            PotentialKind::Tabulated1d(spline) => {
                c.kind = "tabulated-1d".into();
                c.x = Some(spline.xs);
                c.v = Some(spline.ys);
            }
            PotentialKind::Polynomial2d { coeffs } => {
                c.kind = "polynomial-2d".into();
                c.coeffs2d = Some(coeffs);
            }
            PotentialKind::Quadratic2dAnisotropic {
                omega_x,
                omega_y,
                lambda,
            } => {
                c.kind = "quadratic-2d-anisotropic".into();
                c.omega_x = Some(omega_x);
                c.omega_y = Some(omega_y);
                c.lambda = Some(lambda);
            }
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quartic_lambda_zero_is_harmonic() {
        let spec = parse_potential_spec("kind = \"quartic-family\"\nlambda = 0.0").unwrap();
        assert_eq!(spec, PotentialSpec::harmonic(1.0));
        assert_eq!(spec.eval_potential(2.0), 2.0);
    }

    #[test]
    fn polynomial_direct_construction() {
        let spec =
            parse_potential_spec("kind = \"polynomial-1d\"\ncoeffs = [0, 0, 0.5, 0, 0.1]").unwrap();
        assert!((spec.eval_potential(1.0) - 0.6).abs() < 1e-15);
        assert!((spec.eval_potential(2.0) - (2.0 + 1.6)).abs() < 1e-14);
    }

    #[test]
    fn inverted_parabola_is_rejected() {
        let err = parse_potential_spec("kind = \"polynomial-1d\"\ncoeffs = [0, 0, -1]").unwrap_err();
        assert!(matches!(err, Error::NonConfining(_)));
        let odd = parse_potential_spec("kind = \"polynomial-1d\"\ncoeffs = [0, 0, 1, 1]").unwrap_err();
        assert!(matches!(odd, Error::NonConfining(_)));
        let neg = parse_potential_spec("kind = \"quartic-family\"\nlambda = -0.1").unwrap_err();
        assert!(matches!(neg, Error::NonConfining(_)));
    }

    #[test]
    fn schema_violations_are_malformed() {
        for text in [
            "kind = \"double-well\"",
            "kind = \"spaghetti\"",
            "kind = \"quartic-family\"\nlambda = 0.1\nbogus = 3",
            "kind = \"quartic-family\"\nlambda = 0.1\nmass = -1",
            "kind = \"tabulated-1d\"\nx = [0, 1]\nv = [0, 1]",
        ] {
            let err = parse_potential_spec(text).unwrap_err();
            assert!(matches!(err, Error::MalformedSpec(_)), "{text}: {err:?}");
        }
    }

    #[test]
    fn eval_examples() {
        let q = PotentialSpec::quartic(0.1, 1.0);
        assert!((q.eval_potential(1.0) - 0.6).abs() < 1e-15);
        let (d1, d2) = q.eval_derivatives(1.0);
        assert!((d1 - 1.4).abs() < 1e-15 && (d2 - 2.2).abs() < 1e-15);

        let h = PotentialSpec::harmonic(1.0);
        assert_eq!(h.eval_derivatives(3.0), (3.0, 1.0));
        for x in [-4.0, 0.3, 7.0] {
            assert_eq!(PotentialSpec::quartic(0.0, 1.0).eval_derivatives(x).1, 1.0);
        }

        let dw = PotentialSpec::double_well(2.0);
        assert_eq!(dw.eval_potential(0.0), 1.0);
        assert_eq!(dw.eval_potential(2.0), 0.0);
    }

    #[test]
    fn two_dimensional_derivatives() {
        // 0.5 x^2 + 0.5 y^2 + 0.1 (x^4 + 2 x^2 y^2 + y^4)
        let coeffs = vec![
            vec![0.0, 0.0, 0.5, 0.0, 0.1],
            vec![0.0; 5],
            vec![0.5, 0.0, 0.2, 0.0, 0.0],
            vec![0.0; 5],
            vec![0.1, 0.0, 0.0, 0.0, 0.0],
        ];
        let poly = PotentialSpec::new(
            PotentialKind::Polynomial2d { coeffs },
            UnitSystem::default(),
        )
        .unwrap();
        let quad = PotentialSpec::new(
            PotentialKind::Quadratic2dAnisotropic {
                omega_x: 1.0,
                omega_y: 1.0,
                lambda: 0.1,
            },
            UnitSystem::default(),
        )
        .unwrap();
        for &(x, y) in &[(0.3, -0.7), (1.5, 0.2), (-1.0, 2.0)] {
            assert!((poly.eval_2d(x, y) - quad.eval_2d(x, y)).abs() < 1e-12);
            let (gp, gq) = (poly.gradient_2d(x, y), quad.gradient_2d(x, y));
            let (hp, hq) = (poly.hessian_2d(x, y), quad.hessian_2d(x, y));
            for i in 0..2 {
                assert!((gp[i] - gq[i]).abs() < 1e-12);
                for j in 0..2 {
                    assert!((hp[i][j] - hq[i][j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn non_definite_2d_leading_part_rejected() {
        // x^2 - y^2 saddle.
        let saddle = PotentialKind::Polynomial2d {
            coeffs: vec![vec![0.0, 0.0, -1.0], vec![0.0; 3], vec![1.0, 0.0, 0.0]],
        };
        assert!(matches!(
            PotentialSpec::new(saddle, UnitSystem::default()),
            Err(Error::NonConfining(_))
        ));
    }

    #[test]
    fn spline_reproduces_cubic_interior_and_walls() {
        let xs: Vec<f64> = (0..=40).map(|i| -4.0 + 0.2 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 * x * x).collect();
        let spline = CubicSpline::new(xs, ys).unwrap();
        let (v, d1, d2) = spline.eval(0.55);
        assert!((v - 0.5 * 0.55 * 0.55).abs() < 1e-4);
        assert!((d1 - 0.55).abs() < 1e-3);
        assert!((d2 - 1.0).abs() < 1e-2);
        assert_eq!(spline.eval(4.5).0, f64::INFINITY);
    }

    #[test]
    fn box_has_hard_walls_and_singular_curvature() {
        let b = PotentialSpec::box_well(0.0, std::f64::consts::PI);
        assert_eq!(b.eval_potential(1.0), 0.0);
        assert_eq!(b.eval_potential(-0.1), f64::INFINITY);
        assert_eq!(b.curvature_quality(), CurvatureQuality::Singular);
        assert_eq!(b.hard_walls(), Some((0.0, std::f64::consts::PI)));
    }

    proptest! {
        #[test]
        fn polynomial_derivatives_match_central_differences(
            c in proptest::collection::vec(-1.0f64..1.0, 3..6),
            lead in 0.05f64..2.0,
            x in -2.0f64..2.0,
        ) {
            let mut coeffs = c;
            if coeffs.len() % 2 == 0 { coeffs.push(0.0); }
            let last = coeffs.len() - 1;
            coeffs[last] = lead;
            let spec = PotentialSpec::polynomial(coeffs).unwrap();
            let h = 1e-4;
            let v = |t: f64| spec.eval_potential(t);
            let fd1 = (v(x + h) - v(x - h)) / (2.0 * h);
            let fd2 = (v(x + h) - 2.0 * v(x) + v(x - h)) / (h * h);
            let (d1, d2) = spec.eval_derivatives(x);
            let scale = |a: f64| a.abs().max(1.0);
            prop_assert!((fd1 - d1).abs() / scale(d1) < 1e-6);
            // The second difference loses ~8 digits to cancellation at h = 1e-4.
            prop_assert!((fd2 - d2).abs() / scale(d2) < 1e-6 * 1e2);
        }

        #[test]
        fn parse_serialize_parse_round_trips(
            lambda in 0.0f64..3.0,
            a in 0.1f64..5.0,
            mass in 0.1f64..10.0,
            hbar in 0.1f64..10.0,
            pick in 0usize..3,
        ) {
            let units = UnitSystem { hbar, mass, omega_ref: None };
            let kind = match pick {
                0 => PotentialKind::QuarticFamily { lambda, omega: 1.0 },
                1 => PotentialKind::DoubleWell { a },
                _ => PotentialKind::Polynomial1d { coeffs: vec![0.3, -0.1, 0.5, 0.0, lambda + 0.01] },
            };
            let spec = PotentialSpec::new(kind, units).unwrap();
            let again = parse_potential_spec(&spec.to_toml()).unwrap();
            prop_assert_eq!(spec, again);
        }
    }
}
