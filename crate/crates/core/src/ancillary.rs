//! Catalog of ancillary-function schemes.
//!
//! A scheme is the triple (θ, α, γ) of smooth functions on `[0, T]` from
//! which the physical controls are reconstructed. Every family is
//! evaluated in dimensionless time `τ = t / T`; public accessors take
//! physical time and return derivatives with respect to it.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, StaError};

/// Absolute tolerance on the boundary values of θ and α (radians).
pub const BOUNDARY_TOL: f64 = 1e-12;
/// Grid used to screen every scheme for non-finite values and divergences.
pub const SCREEN_POINTS: usize = 4097;
/// Screening threshold on |α̇ tan θ|·T (and |tan θ| for families without
/// an analytic cancellation).
pub const DIVERGENCE_LIMIT: f64 = 1e8;

/// Value and first three derivatives of a function of time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Jet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl Jet {
    pub const ZERO: Jet = Jet {
        v: 0.0,
        d1: 0.0,
        d2: 0.0,
        d3: 0.0,
    };

    pub fn constant(v: f64) -> Self {
        Self { v, ..Self::ZERO }
    }

    fn from_tau(d: [f64; 4], duration: f64) -> Self {
        Self {
            v: d[0],
            d1: d[1] / duration,
            d2: d[2] / (duration * duration),
            d3: d[3] / (duration * duration * duration),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    FlatPi,
    ArcsinEps,
    QuarticLargeDelta,
    #[serde(rename = "optimized_2l")]
    Optimized2L,
    #[serde(rename = "ref_3l")]
    Ref3L,
    #[serde(rename = "num1_4l")]
    Num1_4L,
    #[serde(rename = "num2_4l")]
    Num2_4L,
    Custom,
}

impl SchemeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::FlatPi => "flat_pi",
            Self::ArcsinEps => "arcsin_eps",
            Self::QuarticLargeDelta => "quartic_large_delta",
            Self::Optimized2L => "optimized_2l",
            Self::Ref3L => "ref_3l",
            Self::Num1_4L => "num1_4l",
            Self::Num2_4L => "num2_4l",
            Self::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "flat_pi" => Self::FlatPi,
            "arcsin_eps" => Self::ArcsinEps,
            "quartic_large_delta" => Self::QuarticLargeDelta,
            "optimized_2l" => Self::Optimized2L,
            "ref_3l" => Self::Ref3L,
            "num1_4l" => Self::Num1_4L,
            "num2_4l" => Self::Num2_4L,
            "custom" => Self::Custom,
            other => return Err(StaError::Config(format!("unknown scheme kind `{other}`"))),
        })
    }

    /// Names of the free parameters, in the order used by the optimizer.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Self::FlatPi | Self::QuarticLargeDelta | Self::Custom => &[],
            Self::ArcsinEps | Self::Ref3L => &["eps"],
            Self::Optimized2L | Self::Num1_4L => &["c0", "c1"],
            Self::Num2_4L => &["d0", "d1"],
        }
    }

    pub fn default_target(self) -> Option<Target> {
        match self {
            Self::FlatPi | Self::ArcsinEps | Self::QuarticLargeDelta | Self::Optimized2L => Some(Target::TwoLevel),
            Self::Ref3L | Self::Num1_4L | Self::Num2_4L => Some(Target::ThreeLevel),
            Self::Custom => None,
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which synthesis branch and boundary-condition set a scheme belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    TwoLevel,
    ThreeLevel,
}

#[derive(Debug, Clone, PartialEq)]
enum Family {
    FlatPi,
    ArcsinEps { eps: f64 },
    Quartic,
    Optimized2L { c0: f64, c1: f64 },
    Ref3L { eps: f64 },
    Num1 { c0: f64, c1: f64 },
    Num2 { d0: f64, d1: f64 },
    Custom(Arc<CustomTable>),
}

/// An immutable ancillary-function scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct AncillaryScheme {
    family: Family,
    duration: f64,
    target: Target,
    approximate_boundary: bool,
}

/// θ, α, γ evaluated at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AncillaryPoint {
    pub theta: Jet,
    /// `None` for two-level families whose α is fixed at synthesis time.
    pub alpha: Option<Jet>,
    pub gamma: Jet,
}

fn check_duration(duration: f64) -> Result<()> {
    if duration.is_finite() && duration > 0.0 {
        Ok(())
    } else {
        Err(StaError::invalid(format!(
            "duration T must be positive, got {duration}"
        )))
    }
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(StaError::invalid(format!("parameter {name} must be finite, got {v}")))
    }
}

/// Evaluates a polynomial `Σ c_k τ^k` and its first three derivatives.
fn poly(coeffs: &[f64], tau: f64) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (order, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for k in (order..coeffs.len()).rev() {
            let falling: f64 = (0..order).map(|j| (k - j) as f64).product();
            acc = acc * tau + coeffs[k] * falling;
        }
        *slot = acc;
    }
    out
}

impl AncillaryScheme {
    fn build(family: Family, duration: f64, target: Target, approximate_boundary: bool) -> Result<Self> {
        check_duration(duration)?;
        let s = Self {
            family,
            duration,
            target,
            approximate_boundary,
        };
        s.validate()?;
        Ok(s)
    }

    /// θ = πt/T, γ = 0, constant α = −π/2.
    pub fn flat_pi(duration: f64) -> Result<Self> {
        Self::build(Family::FlatPi, duration, Target::TwoLevel, false)
    }

    /// θ = π·arcsin((1−ε)t/T)/arcsin(1−ε), γ = 0, α = −π/2.
    pub fn arcsin_eps(duration: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(StaError::invalid(format!("arcsin scheme needs 0 < eps < 1, got {eps}")));
        }
        Self::build(Family::ArcsinEps { eps }, duration, Target::TwoLevel, false)
    }

    /// θ = 4πτ³ − 3πτ⁴, which has θ̇(0) = θ̇(T) = θ̈(0) = 0.
    pub fn quartic_large_delta(duration: f64) -> Result<Self> {
        Self::build(Family::Quartic, duration, Target::TwoLevel, false)
    }

    /// θ = (π − c₁)τ + c₁τ³, γ = c₀θ; α is chosen at synthesis.
    pub fn optimized_2l(duration: f64, c0: f64, c1: f64) -> Result<Self> {
        check_finite("c0", c0)?;
        check_finite("c1", c1)?;
        Self::build(Family::Optimized2L { c0, c1 }, duration, Target::TwoLevel, false)
    }

    /// θ = ε − π/2 (constant), α = πτ/2. Misses the θ boundary conditions
    /// by ε, so it is flagged `approximate_boundary`.
    pub fn ref_3l(duration: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < FRAC_PI_2) {
            return Err(StaError::invalid(format!(
                "reference scheme needs 0 < eps < pi/2, got {eps}"
            )));
        }
        Self::build(Family::Ref3L { eps }, duration, Target::ThreeLevel, true)
    }

    /// Cubic θ from −π/2 to π/2 with α = (π/4) sin θ + π/4.
    pub fn num1_4l(duration: f64, c0: f64, c1: f64) -> Result<Self> {
        check_finite("c0", c0)?;
        check_finite("c1", c1)?;
        Self::build(Family::Num1 { c0, c1 }, duration, Target::ThreeLevel, false)
    }

    /// Quartic θ (parameter d₀) and cubic-plus-sine α (parameter d₁).
    pub fn num2_4l(duration: f64, d0: f64, d1: f64) -> Result<Self> {
        if !(0.55..=2.5).contains(&d0) {
            return Err(StaError::invalid(format!("num2_4l needs 0.55 <= d0 <= 2.5, got {d0}")));
        }
        check_finite("d1", d1)?;
        Self::build(Family::Num2 { d0, d1 }, duration, Target::ThreeLevel, false)
    }

    pub fn custom(duration: f64, target: Target, table: CustomTable) -> Result<Self> {
        Self::build(Family::Custom(Arc::new(table)), duration, target, false)
    }

    /// Builds a catalog member from its kind and parameter vector (in the
    /// order of [`SchemeKind::param_names`]).
    pub fn from_kind(kind: SchemeKind, duration: f64, params: &[f64]) -> Result<Self> {
        let names = kind.param_names();
        if kind == SchemeKind::Custom {
            return Err(StaError::invalid("custom schemes need a table"));
        }
        if params.len() != names.len() {
            return Err(StaError::invalid(format!(
                "{kind} takes {} parameters, got {}",
                names.len(),
                params.len()
            )));
        }
        match kind {
            SchemeKind::FlatPi => Self::flat_pi(duration),
            SchemeKind::ArcsinEps => Self::arcsin_eps(duration, params[0]),
            SchemeKind::QuarticLargeDelta => Self::quartic_large_delta(duration),
            SchemeKind::Optimized2L => Self::optimized_2l(duration, params[0], params[1]),
            SchemeKind::Ref3L => Self::ref_3l(duration, params[0]),
            SchemeKind::Num1_4L => Self::num1_4l(duration, params[0], params[1]),
            SchemeKind::Num2_4L => Self::num2_4l(duration, params[0], params[1]),
            SchemeKind::Custom => unreachable!(),
        }
    }

    pub fn kind(&self) -> SchemeKind {
        match self.family {
            Family::FlatPi => SchemeKind::FlatPi,
            Family::ArcsinEps { .. } => SchemeKind::ArcsinEps,
            Family::Quartic => SchemeKind::QuarticLargeDelta,
            Family::Optimized2L { .. } => SchemeKind::Optimized2L,
            Family::Ref3L { .. } => SchemeKind::Ref3L,
            Family::Num1 { .. } => SchemeKind::Num1_4L,
            Family::Num2 { .. } => SchemeKind::Num2_4L,
            Family::Custom(_) => SchemeKind::Custom,
        }
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn target(&self) -> Target {
        self.target
    }

    /// True when the scheme deliberately misses its boundary conditions.
    pub fn approximate_boundary(&self) -> bool {
        self.approximate_boundary
    }

    /// Parameter vector in the order of [`SchemeKind::param_names`].
    pub fn param_vector(&self) -> Vec<f64> {
        match self.family {
            Family::FlatPi | Family::Quartic | Family::Custom(_) => vec![],
            Family::ArcsinEps { eps } | Family::Ref3L { eps } => vec![eps],
            Family::Optimized2L { c0, c1 } | Family::Num1 { c0, c1 } => vec![c0, c1],
            Family::Num2 { d0, d1 } => vec![d0, d1],
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        self.kind()
            .param_names()
            .iter()
            .map(|n| n.to_string())
            .zip(self.param_vector())
            .collect()
    }

    pub(crate) fn custom_table(&self) -> Option<&CustomTable> {
        match &self.family {
            Family::Custom(t) => Some(t),
            _ => None,
        }
    }

    fn tau(&self, t: f64) -> f64 {
        t / self.duration
    }

    fn theta_tau(&self, tau: f64) -> [f64; 4] {
        match &self.family {
            Family::FlatPi => [PI * tau, PI, 0.0, 0.0],
            Family::ArcsinEps { eps } => {
                let k = 1.0 - eps;
                let amp = PI / k.asin();
                let u = k * tau;
                let s2 = 1.0 - u * u;
                let s = s2.sqrt();
                [
                    amp * u.asin(),
                    amp * k / s,
                    amp * k * k * u / (s2 * s),
                    amp * k * k * k * (1.0 + 2.0 * u * u) / (s2 * s2 * s),
                ]
            }
            Family::Quartic => poly(&[0.0, 0.0, 0.0, 4.0 * PI, -3.0 * PI], tau),
            Family::Optimized2L { c1, .. } => poly(&[0.0, PI - c1, 0.0, *c1], tau),
            Family::Ref3L { eps } => [eps - FRAC_PI_2, 0.0, 0.0, 0.0],
            Family::Num1 { c0, c1 } => poly(&[-FRAC_PI_2, PI - c0 - c1, *c0, *c1], tau),
            Family::Num2 { d0, .. } => poly(
                &[
                    -FRAC_PI_2,
                    1.0,
                    -(3.0 + 5.0 * PI - 16.0 * d0),
                    2.0 * (1.0 + 7.0 * PI - 16.0 * d0),
                    -8.0 * (PI - 2.0 * d0),
                ],
                tau,
            ),
            Family::Custom(table) => table.theta.eval(tau),
        }
    }

    fn alpha_tau(&self, tau: f64) -> Option<[f64; 4]> {
        match &self.family {
            Family::FlatPi | Family::ArcsinEps { .. } | Family::Quartic => Some([-FRAC_PI_2, 0.0, 0.0, 0.0]),
            Family::Optimized2L { .. } => None,
            Family::Ref3L { .. } => Some([FRAC_PI_2 * tau, FRAC_PI_2, 0.0, 0.0]),
            Family::Num1 { .. } => {
                let [th, d1, d2, d3] = self.theta_tau(tau);
                let (s, c) = th.sin_cos();
                Some([
                    FRAC_PI_4 * s + FRAC_PI_4,
                    FRAC_PI_4 * c * d1,
                    FRAC_PI_4 * (c * d2 - s * d1 * d1),
                    FRAC_PI_4 * (c * d3 - 3.0 * s * d1 * d2 - c * d1 * d1 * d1),
                ])
            }
            Family::Num2 { d1, .. } => {
                let p = poly(&[0.0, -PI * d1, 0.5 * (2.0 * PI * d1 + 3.0 * PI), -PI], tau);
                let (s, c) = (PI * tau).sin_cos();
                Some([
                    p[0] + d1 * s,
                    p[1] + d1 * PI * c,
                    p[2] - d1 * PI * PI * s,
                    p[3] - d1 * PI * PI * PI * c,
                ])
            }
            Family::Custom(table) => table.alpha.as_ref().map(|a| a.eval(tau)),
        }
    }

    fn gamma_tau(&self, tau: f64) -> [f64; 4] {
        match &self.family {
            Family::Optimized2L { c0, .. } => {
                let th = self.theta_tau(tau);
                [c0 * th[0], c0 * th[1], c0 * th[2], c0 * th[3]]
            }
            Family::Custom(table) => table.gamma.as_ref().map_or([0.0; 4], |g| g.eval(tau)),
            _ => [0.0; 4],
        }
    }

    pub fn theta(&self, t: f64) -> Jet {
        Jet::from_tau(self.theta_tau(self.tau(t)), self.duration)
    }

    pub fn alpha(&self, t: f64) -> Option<Jet> {
        self.alpha_tau(self.tau(t)).map(|a| Jet::from_tau(a, self.duration))
    }

    /// γ, normalized so that γ(0) = 0.
    pub fn gamma(&self, t: f64) -> Jet {
        Jet::from_tau(self.gamma_tau(self.tau(t)), self.duration)
    }

    pub fn eval(&self, t: f64) -> AncillaryPoint {
        AncillaryPoint {
            theta: self.theta(t),
            alpha: self.alpha(t),
            gamma: self.gamma(t),
        }
    }

    /// The product α̇·tan θ entering the three-level Rabi frequencies.
    ///
    /// For `num1_4l` the ansatz cancels the pole of tan θ analytically. At
    /// the endpoints, where θ = ±π/2 and α̇ = 0, the one-sided limit
    /// −α̈/θ̇ is used.
    pub fn alpha_dot_tan_theta(&self, t: f64) -> f64 {
        let tau = self.tau(t);
        if let Family::Num1 { .. } = self.family {
            let th = self.theta_tau(tau);
            return FRAC_PI_4 * th[0].sin() * th[1] / self.duration;
        }
        let Some(alpha) = self.alpha_tau(tau) else {
            return 0.0;
        };
        let th = self.theta_tau(tau);
        const EDGE: f64 = 1e-7;
        let edge = if tau < EDGE {
            Some(0.0)
        } else if tau > 1.0 - EDGE {
            Some(1.0)
        } else {
            None
        };
        if let Some(end) = edge {
            let th_end = self.theta_tau(end);
            let al_end = self.alpha_tau(end).unwrap_or(alpha);
            if th_end[0].cos().abs() < 1e-12 && al_end[1].abs() < 1e-10 && th_end[1] != 0.0 {
                return -al_end[2] / th_end[1] / self.duration;
            }
        }
        alpha[1] * th[0].tan() / self.duration
    }

    /// Whether the family's α(θ) ansatz removes any pole of tan θ.
    fn cancels_tan_pole(&self) -> bool {
        matches!(self.family, Family::Num1 { .. })
    }

    fn validate(&self) -> Result<()> {
        let n = SCREEN_POINTS;
        for i in 0..n {
            let tau = i as f64 / (n - 1) as f64;
            let t = tau * self.duration;
            let th = self.theta_tau(tau);
            let ga = self.gamma_tau(tau);
            let al = self.alpha_tau(tau);
            let finite =
                th.iter().chain(ga.iter()).all(|v| v.is_finite()) && al.is_none_or(|a| a.iter().all(|v| v.is_finite()));
            if !finite {
                return Err(StaError::invalid(format!(
                    "{} produces non-finite ancillary functions at t = {t}",
                    self.kind()
                )));
            }
        }
        self.check_boundary()?;
        if self.target == Target::ThreeLevel {
            self.screen_divergences()?;
        }
        Ok(())
    }

    fn check_boundary(&self) -> Result<()> {
        let th0 = self.theta_tau(0.0)[0];
        let th1 = self.theta_tau(1.0)[0];
        let bad = |what: &str, got: f64, want: f64| {
            StaError::invalid(format!(
                "{} violates boundary condition {what}: got {got}, want {want}",
                self.kind()
            ))
        };
        match self.target {
            Target::TwoLevel => {
                if (th0).abs() > BOUNDARY_TOL {
                    return Err(bad("theta(0)", th0, 0.0));
                }
                if (th1 - PI).abs() > BOUNDARY_TOL {
                    return Err(bad("theta(T)", th1, PI));
                }
            }
            Target::ThreeLevel => {
                if self.approximate_boundary {
                    return Ok(());
                }
                let al0 = self.alpha_tau(0.0).map_or(f64::NAN, |a| a[0]);
                let al1 = self.alpha_tau(1.0).map_or(f64::NAN, |a| a[0]);
                if (th0 + FRAC_PI_2).abs() > BOUNDARY_TOL {
                    return Err(bad("theta(0)", th0, -FRAC_PI_2));
                }
                if (th1 - FRAC_PI_2).abs() > BOUNDARY_TOL {
                    return Err(bad("theta(T)", th1, FRAC_PI_2));
                }
                if !(al0.abs() <= BOUNDARY_TOL) {
                    return Err(bad("alpha(0)", al0, 0.0));
                }
                if !((al1 - FRAC_PI_2).abs() <= BOUNDARY_TOL) {
                    return Err(bad("alpha(T)", al1, FRAC_PI_2));
                }
            }
        }
        Ok(())
    }

    /// Rejects three-level parameter sets whose Rabi frequencies diverge
    /// inside (0, T).
    fn screen_divergences(&self) -> Result<()> {
        let n = SCREEN_POINTS;
        let dt = self.duration / (n - 1) as f64;
        let mut prev_cos = self.theta(dt).v.cos();
        for i in 1..n - 1 {
            let t = i as f64 * dt;
            let th = self.theta(t).v;
            let product = self.alpha_dot_tan_theta(t) * self.duration;
            let tan_big = !self.cancels_tan_pole() && th.tan().abs() > DIVERGENCE_LIMIT;
            if !product.is_finite() || product.abs() > DIVERGENCE_LIMIT || tan_big {
                return Err(StaError::SynthesisFailure {
                    t,
                    reason: format!("{}: tan(theta) diverges inside (0, T)", self.kind()),
                });
            }
            let c = th.cos();
            if i > 1 && !self.cancels_tan_pole() && c * prev_cos < 0.0 {
                // θ crosses a pole of tan θ between grid points.
                let (mut lo, mut hi) = (t - dt, t);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if self.theta(mid).v.cos() * prev_cos > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let at = 0.5 * (lo + hi);
                let alpha_dot = self.alpha(at).map_or(0.0, |a| a.d1) * self.duration;
                if alpha_dot.abs() > 1e-6 {
                    return Err(StaError::SynthesisFailure {
                        t: at,
                        reason: format!("{}: theta crosses a pole of tan with nonzero alpha'", self.kind()),
                    });
                }
            }
            prev_cos = c;
        }
        Ok(())
    }
}

/// Endpoint values and derivatives of θ and α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryProfile {
    pub theta_start: Jet,
    pub theta_end: Jet,
    pub alpha_start: Option<Jet>,
    pub alpha_end: Option<Jet>,
    /// All catalog families (including tabulated ones) have analytic
    /// derivatives; the estimate is therefore zero.
    pub derivative_error: f64,
}

pub fn boundary_profile(s: &AncillaryScheme) -> BoundaryProfile {
    let t = s.duration();
    BoundaryProfile {
        theta_start: s.theta(0.0),
        theta_end: s.theta(t),
        alpha_start: s.alpha(0.0),
        alpha_end: s.alpha(t),
        derivative_error: 0.0,
    }
}

/// One tabulated component, interpolated by piecewise cubic Hermite
/// polynomials in τ.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteCurve {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl HermiteCurve {
    /// `slopes` are dτ-derivatives; when absent they are estimated by
    /// three-point finite differences.
    pub fn new(knots: Vec<f64>, values: Vec<f64>, slopes: Option<Vec<f64>>) -> Result<Self> {
        let n = knots.len();
        if n < 2 || values.len() != n {
            return Err(StaError::invalid(
                "tabulated curve needs >= 2 knots and matching values",
            ));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(StaError::invalid("knots must be strictly increasing"));
        }
        if (knots[0]).abs() > 1e-15 || (knots[n - 1] - 1.0).abs() > 1e-15 {
            return Err(StaError::invalid("knots must span tau in [0, 1]"));
        }
        if knots.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(StaError::invalid("tabulated data must be finite"));
        }
        let slopes = match slopes {
            Some(s) if s.len() == n => s,
            Some(_) => return Err(StaError::invalid("slopes must match knots")),
            None => estimate_slopes(&knots, &values),
        };
        Ok(Self { knots, values, slopes })
    }

    fn eval(&self, tau: f64) -> [f64; 4] {
        let n = self.knots.len();
        let tau = tau.clamp(0.0, 1.0);
        let i = match self.knots.binary_search_by(|k| k.total_cmp(&tau)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let h = self.knots[i + 1] - self.knots[i];
        let s = (tau - self.knots[i]) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let v =
            (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1;
        let d1 = (6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * m1;
        let d2 = (12.0 * s - 6.0) * y0 + (6.0 * s - 4.0) * m0 + (-12.0 * s + 6.0) * y1 + (6.0 * s - 2.0) * m1;
        let d3 = 12.0 * y0 + 6.0 * m0 - 12.0 * y1 + 6.0 * m1;
        [v, d1 / h, d2 / (h * h), d3 / (h * h * h)]
    }
}

fn estimate_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 2 {
        let m = (y[1] - y[0]) / (x[1] - x[0]);
        return vec![m, m];
    }
    // Second-order differences on a non-uniform grid.
    let three_point = |i0: usize, at: usize| {
        let (x0, x1, x2) = (x[i0], x[i0 + 1], x[i0 + 2]);
        let (y0, y1, y2) = (y[i0], y[i0 + 1], y[i0 + 2]);
        let xa = x[at];
        y0 * (2.0 * xa - x1 - x2) / ((x0 - x1) * (x0 - x2))
            + y1 * (2.0 * xa - x0 - x2) / ((x1 - x0) * (x1 - x2))
            + y2 * (2.0 * xa - x0 - x1) / ((x2 - x0) * (x2 - x1))
    };
    (0..n)
        .map(|i| match i {
            0 => three_point(0, 0),
            i if i == n - 1 => three_point(n - 3, n - 1),
            i => three_point(i - 1, i),
        })
        .collect()
}

/// Tabulated (θ, α, γ) for a user-supplied scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomTable {
    pub(crate) theta: HermiteCurve,
    pub(crate) alpha: Option<HermiteCurve>,
    pub(crate) gamma: Option<HermiteCurve>,
    pub(crate) spec: CustomTableSpec,
}

/// Serialized form of a tabulated scheme; all derivatives are with respect
/// to τ = t/T.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomTableSpec {
    pub tau: Vec<f64>,
    pub theta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_dot: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_dot: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_dot: Option<Vec<f64>>,
}

impl CustomTable {
    pub fn from_spec(spec: CustomTableSpec) -> Result<Self> {
        let theta = HermiteCurve::new(spec.tau.clone(), spec.theta.clone(), spec.theta_dot.clone())?;
        let alpha = spec
            .alpha
            .clone()
            .map(|a| HermiteCurve::new(spec.tau.clone(), a, spec.alpha_dot.clone()))
            .transpose()?;
        let gamma = spec
            .gamma
            .clone()
            .map(|g| {
                let g0 = g.first().copied().unwrap_or(0.0);
                let shifted = g.into_iter().map(|v| v - g0).collect();
                HermiteCurve::new(spec.tau.clone(), shifted, spec.gamma_dot.clone())
            })
            .transpose()?;
        Ok(Self {
            theta,
            alpha,
            gamma,
            spec,
        })
    }

    pub fn spec(&self) -> &CustomTableSpec {
        &self.spec
    }
}
