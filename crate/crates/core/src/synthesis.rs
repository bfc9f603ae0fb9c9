//! Inversion of ancillary schemes into physical controls, plus the two
//! adiabatic reference pulses and the area/energy metrics.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ancillary::{AncillaryScheme, Target, SCREEN_POINTS};
use crate::descriptor::format_f64;
use crate::error::{Result, StaError};
use crate::quadrature::{integrate_real, QuadOptions};

/// Threshold on |Ω|·T above which a three-level pulse counts as divergent.
pub const RABI_DIVERGENCE: f64 = 1e9;
/// Default number of samples in exported pulse tables.
pub const DEFAULT_SAMPLES: usize = 1001;

/// How α(t) is fixed for a two-level scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    Constant(f64),
    /// α chosen so that Ω_I ≡ 0.
    RealRabi,
    /// Use the α carried by the scheme itself (−π/2 for the π-pulse
    /// families, or a tabulated α).
    Scheme,
}

/// α(t) chosen so that the Rabi frequency is real, unwrapped for
/// continuity on a 4097-point grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RealRabiAlpha {
    scheme: AncillaryScheme,
    grid: Vec<f64>,
}

impl RealRabiAlpha {
    fn direction(&self, t: f64) -> (f64, f64, f64, f64) {
        let th = self.scheme.theta(t);
        let g = self.scheme.gamma(t);
        let (s, c) = th.v.sin_cos();
        let x = s * g.d1;
        let y = th.d1;
        let xd = c * th.d1 * g.d1 + s * g.d2;
        let yd = th.d2;
        (x, y, xd, yd)
    }

    fn raw(&self, t: f64) -> f64 {
        let (x, y, _, _) = self.direction(t);
        -y.atan2(x)
    }

    pub fn value(&self, t: f64) -> f64 {
        let n = self.grid.len();
        let tau = (t / self.scheme.duration()).clamp(0.0, 1.0);
        let i = ((tau * (n - 1) as f64).round() as usize).min(n - 1);
        let raw = self.raw(t);
        raw + PI * ((self.grid[i] - raw) / PI).round()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let (x, y, xd, yd) = self.direction(t);
        let r2 = x * x + y * y;
        let scale = (PI / self.scheme.duration()).powi(2);
        if r2 > 1e-16 * scale {
            return -(x * yd - y * xd) / r2;
        }
        // Isolated common zero of θ̇ and sinθ·γ̇: α is smooth through it.
        let h = 1e-6 * self.scheme.duration();
        let (lo, hi) = ((t - h).max(0.0), (t + h).min(self.scheme.duration()));
        (self.value(hi) - self.value(lo)) / (hi - lo)
    }
}

pub fn choose_alpha_real(s: &AncillaryScheme) -> Result<RealRabiAlpha> {
    if s.target() != Target::TwoLevel {
        return Err(StaError::invalid("real-Rabi alpha applies to two-level schemes only"));
    }
    let n = SCREEN_POINTS;
    let mut out = RealRabiAlpha {
        scheme: s.clone(),
        grid: Vec::with_capacity(n),
    };
    let scale = (PI / s.duration()).powi(2);
    let mut degenerate_run = 0usize;
    let mut prev = 0.0;
    for i in 0..n {
        let t = s.duration() * i as f64 / (n - 1) as f64;
        let (x, y, _, _) = out.direction(t);
        if x * x + y * y < 1e-24 * scale {
            degenerate_run += 1;
            if degenerate_run >= 3 {
                return Err(StaError::SynthesisFailure {
                    t,
                    reason: "theta' and sin(theta)*gamma' vanish together; alpha is undefined".into(),
                });
            }
        } else {
            degenerate_run = 0;
        }
        let raw = -y.atan2(x);
        let a = if i == 0 {
            raw
        } else {
            raw + PI * ((prev - raw) / PI).round()
        };
        out.grid.push(a);
        prev = a;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
enum AlphaProfile {
    Constant(f64),
    Scheme,
    Real(RealRabiAlpha),
}

/// Ω_R, Ω_I, δ₂ at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelControls {
    pub omega_r: f64,
    pub omega_i: f64,
    pub delta2: f64,
}

impl TwoLevelControls {
    pub fn omega12(&self) -> Complex64 {
        Complex64::new(self.omega_r, self.omega_i)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TwoLevelSource {
    Scheme {
        scheme: AncillaryScheme,
        alpha: AlphaProfile,
    },
    Adiabatic {
        omega0: f64,
        delta0: f64,
    },
}

/// Two-level controls on `[0, T]`, evaluable at any instant.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseTwoLevel {
    source: TwoLevelSource,
    duration: f64,
}

impl PulseTwoLevel {
    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn scheme(&self) -> Option<&AncillaryScheme> {
        match &self.source {
            TwoLevelSource::Scheme { scheme, .. } => Some(scheme),
            TwoLevelSource::Adiabatic { .. } => None,
        }
    }

    /// α(t) and α̇(t) used by the inversion (None for the adiabatic pulse).
    pub fn alpha(&self, t: f64) -> Option<(f64, f64)> {
        let TwoLevelSource::Scheme { scheme, alpha } = &self.source else {
            return None;
        };
        Some(match alpha {
            AlphaProfile::Constant(a) => (*a, 0.0),
            AlphaProfile::Scheme => {
                let a = scheme.alpha(t).expect("checked at synthesis");
                (a.v, a.d1)
            }
            AlphaProfile::Real(r) => (r.value(t), r.derivative(t)),
        })
    }

    pub fn eval(&self, t: f64) -> TwoLevelControls {
        match &self.source {
            TwoLevelSource::Adiabatic { omega0, delta0 } => {
                let (s, c) = (PI * t / self.duration).sin_cos();
                TwoLevelControls {
                    omega_r: omega0 * s,
                    omega_i: 0.0,
                    delta2: -delta0 * c,
                }
            }
            TwoLevelSource::Scheme { scheme, .. } => {
                let th = scheme.theta(t);
                let g = scheme.gamma(t);
                let (alpha, alpha_dot) = self.alpha(t).expect("scheme pulse");
                let (sa, ca) = alpha.sin_cos();
                let (st, ct) = th.v.sin_cos();
                TwoLevelControls {
                    omega_r: ca * st * g.d1 - sa * th.d1,
                    omega_i: sa * st * g.d1 + ca * th.d1,
                    delta2: -ct * g.d1 - alpha_dot,
                }
            }
        }
    }

    pub fn sample(&self, n: usize) -> Vec<(f64, TwoLevelControls)> {
        sample_times(self.duration, n).map(|t| (t, self.eval(t))).collect()
    }

    /// CSV with header `t,Omega_R,Omega_I,delta2`.
    pub fn to_csv(&self, n: usize) -> String {
        let mut out = String::from("t,Omega_R,Omega_I,delta2\n");
        for (t, c) in self.sample(n) {
            out.push_str(&format!(
                "{},{},{},{}\n",
                format_f64(t),
                format_f64(c.omega_r),
                format_f64(c.omega_i),
                format_f64(c.delta2)
            ));
        }
        out
    }
}

fn sample_times(duration: f64, n: usize) -> impl Iterator<Item = f64> {
    let n = n.max(2);
    (0..n).map(move |i| {
        if i + 1 == n {
            duration
        } else {
            duration * i as f64 / (n - 1) as f64
        }
    })
}

pub fn synth_two_level(s: &AncillaryScheme, mode: AlphaMode) -> Result<PulseTwoLevel> {
    if s.target() != Target::TwoLevel {
        return Err(StaError::invalid(format!("{} is not a two-level scheme", s.kind())));
    }
    let alpha = match mode {
        AlphaMode::Constant(a) if a.is_finite() => AlphaProfile::Constant(a),
        AlphaMode::Constant(a) => return Err(StaError::invalid(format!("alpha must be finite, got {a}"))),
        AlphaMode::Scheme => {
            if s.alpha(0.0).is_none() {
                return Err(StaError::invalid(format!(
                    "{} does not carry its own alpha; use a constant or real-Rabi alpha",
                    s.kind()
                )));
            }
            AlphaProfile::Scheme
        }
        AlphaMode::RealRabi => AlphaProfile::Real(choose_alpha_real(s)?),
    };
    let pulse = PulseTwoLevel {
        source: TwoLevelSource::Scheme {
            scheme: s.clone(),
            alpha,
        },
        duration: s.duration(),
    };
    for (t, c) in pulse.sample(SCREEN_POINTS) {
        if !(c.omega_r.is_finite() && c.omega_i.is_finite() && c.delta2.is_finite()) {
            return Err(StaError::SynthesisFailure {
                t,
                reason: "non-finite two-level controls".into(),
            });
        }
    }
    Ok(pulse)
}

/// Sinusoidal adiabatic reference: Ω₁₂ = Ω₀ sin(πt/T), δ₂ = −δ₀ cos(πt/T).
pub fn make_adiabatic_2l(duration: f64, omega0: f64, delta0: f64) -> Result<PulseTwoLevel> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(StaError::invalid("duration must be positive"));
    }
    if !(omega0.is_finite() && omega0 >= 0.0) || !delta0.is_finite() {
        return Err(StaError::invalid(
            "adiabatic pulse needs finite omega0 >= 0 and finite delta0",
        ));
    }
    Ok(PulseTwoLevel {
        source: TwoLevelSource::Adiabatic { omega0, delta0 },
        duration,
    })
}

#[derive(Debug, Clone, PartialEq)]
enum ThreeLevelSource {
    Scheme(AncillaryScheme),
    Stirap { omega0: f64 },
}

/// Real Ω₁₂, Ω₂₃ on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseThreeLevel {
    source: ThreeLevelSource,
    duration: f64,
}

impl PulseThreeLevel {
    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn scheme(&self) -> Option<&AncillaryScheme> {
        match &self.source {
            ThreeLevelSource::Scheme(s) => Some(s),
            ThreeLevelSource::Stirap { .. } => None,
        }
    }

    /// (Ω₁₂, Ω₂₃) at time `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match &self.source {
            ThreeLevelSource::Stirap { omega0 } => {
                let (s, c) = (0.5 * PI * t / self.duration).sin_cos();
                (omega0 * s, omega0 * c)
            }
            ThreeLevelSource::Scheme(s) => {
                let th = s.theta(t);
                let alpha = s.alpha(t).expect("three-level schemes carry alpha");
                let p = s.alpha_dot_tan_theta(t);
                let (sa, ca) = alpha.v.sin_cos();
                (2.0 * (-p * sa + th.d1 * ca), -2.0 * (p * ca + th.d1 * sa))
            }
        }
    }

    pub fn sample(&self, n: usize) -> Vec<(f64, (f64, f64))> {
        sample_times(self.duration, n).map(|t| (t, self.eval(t))).collect()
    }

    /// CSV with header `t,Omega12,Omega23`.
    pub fn to_csv(&self, n: usize) -> String {
        let mut out = String::from("t,Omega12,Omega23\n");
        for (t, (a, b)) in self.sample(n) {
            out.push_str(&format!("{},{},{}\n", format_f64(t), format_f64(a), format_f64(b)));
        }
        out
    }
}

pub fn synth_three_level(s: &AncillaryScheme) -> Result<PulseThreeLevel> {
    if s.target() != Target::ThreeLevel {
        return Err(StaError::invalid(format!("{} is not a three-level scheme", s.kind())));
    }
    let pulse = PulseThreeLevel {
        source: ThreeLevelSource::Scheme(s.clone()),
        duration: s.duration(),
    };
    for (t, (a, b)) in pulse.sample(SCREEN_POINTS) {
        let mag = a.hypot(b) * s.duration();
        if !mag.is_finite() || mag > RABI_DIVERGENCE {
            return Err(StaError::SynthesisFailure {
                t,
                reason: format!("Rabi frequency diverges (|Omega| T = {mag:e})"),
            });
        }
    }
    Ok(pulse)
}

/// Adiabatic STIRAP-like reference: Ω₁₂ = Ω₀ sin(πt/2T), Ω₂₃ = Ω₀ cos(πt/2T).
pub fn make_stirap_3l(duration: f64, omega0: f64) -> Result<PulseThreeLevel> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(StaError::invalid("duration must be positive"));
    }
    if !(omega0.is_finite() && omega0 >= 0.0) {
        return Err(StaError::invalid("stirap pulse needs finite omega0 >= 0"));
    }
    Ok(PulseThreeLevel {
        source: ThreeLevelSource::Stirap { omega0 },
        duration,
    })
}

/// Either pulse branch.
#[derive(Debug, Clone, PartialEq)]
pub enum Pulse {
    TwoLevel(PulseTwoLevel),
    ThreeLevel(PulseThreeLevel),
}

impl Pulse {
    pub fn duration(&self) -> f64 {
        match self {
            Pulse::TwoLevel(p) => p.duration(),
            Pulse::ThreeLevel(p) => p.duration(),
        }
    }

    /// Σ|Ω|² at time `t`.
    pub fn intensity(&self, t: f64) -> f64 {
        match self {
            Pulse::TwoLevel(p) => {
                let c = p.eval(t);
                c.omega_r * c.omega_r + c.omega_i * c.omega_i
            }
            Pulse::ThreeLevel(p) => {
                let (a, b) = p.eval(t);
                a * a + b * b
            }
        }
    }

    pub fn to_csv(&self, n: usize) -> String {
        match self {
            Pulse::TwoLevel(p) => p.to_csv(n),
            Pulse::ThreeLevel(p) => p.to_csv(n),
        }
    }
}

impl From<PulseTwoLevel> for Pulse {
    fn from(p: PulseTwoLevel) -> Self {
        Pulse::TwoLevel(p)
    }
}

impl From<PulseThreeLevel> for Pulse {
    fn from(p: PulseThreeLevel) -> Self {
        Pulse::ThreeLevel(p)
    }
}

/// Pulse area in units of π and energy in units of π²ħ/T.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseMetrics {
    pub area_pi: f64,
    pub energy_pi2: f64,
    pub area_error: f64,
    pub energy_error: f64,
}

/// Relative-plus-absolute tolerance for the metric integrals.
const METRIC_TOL: f64 = 1e-10;

pub fn pulse_metrics(p: &Pulse) -> Result<PulseMetrics> {
    let t_end = p.duration();
    // Dimensionless integrands: ∫₀¹ |Ω T| dτ and ∫₀¹ (Ω T)² dτ.
    let amp = |tau: f64| p.intensity(tau * t_end).sqrt() * t_end;
    let ene = |tau: f64| p.intensity(tau * t_end) * t_end * t_end;
    let scale = |f: &dyn Fn(f64) -> f64| -> f64 { (0..=8).map(|i| f(i as f64 / 8.0).abs()).fold(1.0, f64::max) };
    let (area, area_err) = integrate_real(amp, 0.0, 1.0, QuadOptions::with_tol(METRIC_TOL * scale(&amp)))?;
    let (energy, energy_err) = integrate_real(ene, 0.0, 1.0, QuadOptions::with_tol(METRIC_TOL * scale(&ene)))?;
    Ok(PulseMetrics {
        area_pi: area / PI,
        energy_pi2: energy / (PI * PI),
        area_error: area_err / PI,
        energy_error: energy_err / (PI * PI),
    })
}

/// θ̇, α̇, γ̇ implied by two-level controls through the invariant equations.
pub fn two_level_rates(c: &TwoLevelControls, theta: f64, alpha: f64) -> (f64, f64, f64) {
    let (sa, ca) = alpha.sin_cos();
    let proj = c.omega_r * ca + c.omega_i * sa;
    let theta_dot = c.omega_i * ca - c.omega_r * sa;
    let alpha_dot = -c.delta2 - proj * theta.cos() / theta.sin();
    let gamma_dot = proj / theta.sin();
    (theta_dot, alpha_dot, gamma_dot)
}

/// θ̇, α̇ implied by three-level Rabi frequencies.
pub fn three_level_rates(omega12: f64, omega23: f64, theta: f64, alpha: f64) -> (f64, f64) {
    let (sa, ca) = alpha.sin_cos();
    let theta_dot = 0.5 * (omega12 * ca - omega23 * sa);
    let alpha_dot = -0.5 * theta.cos() / theta.sin() * (omega23 * ca + omega12 * sa);
    (theta_dot, alpha_dot)
}
