//! Transition sensitivities q (two-level plus an unwanted third level) and
//! Q (three-level plus an unwanted fourth level), with their closed forms,
//! lower bounds and large-Δ leading terms.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ancillary::{AncillaryScheme, Target};
use crate::error::{Result, StaError};
use crate::quadrature::{integrate, integrate_phased, integrate_real, QuadOptions};
use crate::table::SweepTable;

/// Default absolute tolerance on the complex sensitivity integral.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Endpoint derivatives below this (in units of 1/Tⁿ) count as vanishing.
pub const DERIVATIVE_THRESHOLD: f64 = 1e-10;
const FORMS_TOL: f64 = 1e-8;

/// Unwanted-level model: splitting Δ, relative coupling β and the coupling
/// phase ζ (which the physics says is irrelevant; kept to test that).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbedModel {
    pub delta: f64,
    pub beta: f64,
    #[serde(default)]
    pub zeta: f64,
}

impl PerturbedModel {
    pub fn new(delta: f64, beta: f64) -> Self {
        Self { delta, beta, zeta: 0.0 }
    }

    pub fn with_phase(mut self, zeta: f64) -> Self {
        self.zeta = zeta;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub value: f64,
    pub quadrature_error: f64,
    pub lower_bound: f64,
    pub asymptotic_estimate: f64,
    pub delta_t: f64,
    /// Largest disagreement between the independent integral forms.
    pub forms_difference: f64,
    /// Set for schemes whose boundary conditions hold only approximately.
    pub approximate_boundary: bool,
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() {
        Ok(())
    } else {
        Err(StaError::invalid(format!("detuning must be finite, got {delta}")))
    }
}

fn options(duration: f64, delta: f64, tol: f64) -> QuadOptions {
    let mut cap = duration / 64.0;
    if delta != 0.0 {
        cap = cap.min(PI / (4.0 * delta.abs()));
    }
    QuadOptions::with_tol(tol).max_panel(cap)
}

fn finish(
    value: f64,
    error_abs: f64,
    others: &[f64],
    tol: f64,
    delta_t: f64,
    asymptotic_estimate: f64,
    approximate_boundary: bool,
) -> Result<SensitivityReport> {
    let forms_difference = others.iter().map(|o| (o - value).abs()).fold(0.0, f64::max);
    let allowed = FORMS_TOL.max(100.0 * tol) * value.max(1.0);
    if !(forms_difference <= allowed) {
        return Err(StaError::numeric(
            "independent sensitivity integral forms disagree",
            forms_difference,
        ));
    }
    Ok(SensitivityReport {
        value,
        // |I|² has error ≈ 2|I|·δI + δI².
        quadrature_error: 2.0 * value.sqrt() * error_abs + error_abs * error_abs,
        lower_bound: q_lower_bound(delta_t),
        asymptotic_estimate,
        delta_t,
        forms_difference,
        approximate_boundary,
    })
}

/// q for a two-level scheme at detuning Δ.
pub fn q_sensitivity(s: &AncillaryScheme, delta: f64) -> Result<SensitivityReport> {
    q_sensitivity_tol(s, delta, DEFAULT_TOL)
}

pub fn q_sensitivity_tol(s: &AncillaryScheme, delta: f64, tol: f64) -> Result<SensitivityReport> {
    if s.target() != Target::TwoLevel {
        return Err(StaError::invalid(format!(
            "q needs a two-level scheme, got {}",
            s.kind()
        )));
    }
    check_delta(delta)?;
    let duration = s.duration();
    let rate = |t: f64| {
        let th = s.theta(t);
        0.5 * (1.0 + th.v.cos()) * s.gamma(t).d1
    };
    let i = Complex64::i();
    // Components: expanded total derivative, the ¼-prefactor form, and
    // sin(θ/2)e^{iF}e^{iΔt} for the integration-by-parts form.
    let r = integrate_phased(
        rate,
        |t, f| {
            let th = s.theta(t);
            let gd = s.gamma(t).d1;
            let (sh, ch) = (0.5 * th.v).sin_cos();
            let fdot = ch * ch * gd;
            let e = Complex64::from_polar(1.0, f + delta * t);
            [
                Complex64::new(0.5 * th.d1 * ch, fdot * sh) * e,
                Complex64::new(th.v.sin() * gd, -th.d1) * (0.5 * ch) * e,
                e * sh,
            ]
        },
        0.0,
        duration,
        options(duration, delta, tol),
    )?;
    let main = r.value[0].norm_sqr();
    let quarter = r.value[1].norm_sqr();
    let g_end = (0.5 * s.theta(duration).v).sin() * Complex64::from_polar(1.0, r.phase_end + delta * duration);
    let g_start = Complex64::from((0.5 * s.theta(0.0).v).sin());
    let parts = (g_end - g_start - i * delta * r.value[2]).norm_sqr();
    let err_parts = r.error * delta.abs().max(1.0);
    finish(
        main,
        r.error,
        &[quarter, parts],
        tol.max(err_parts),
        delta * duration,
        q_asymptotic(s, delta)?,
        s.approximate_boundary(),
    )
}

/// Closed form of q for the flat π pulse as a function of x = ΔT.
pub fn q_flat_pi_closed_form(x: f64) -> f64 {
    let x = x.abs();
    let d = x - FRAC_PI_2;
    if d.abs() < FLAT_GUARD {
        return FLAT_TAYLOR.iter().rev().fold(0.0, |acc, c| acc * d + c);
    }
    let pi2 = PI * PI;
    let den = pi2 - 4.0 * x * x;
    pi2 * (4.0 * x * x - 4.0 * PI * x * x.sin() + pi2) / (den * den)
}

/// Half-width of the band around ΔT = π/2 where the Taylor series replaces
/// the closed form. Rounding error of the direct formula grows like 1e-16/d².
const FLAT_GUARD: f64 = 5e-3;

/// Taylor coefficients of the flat-π q about ΔT = π/2.
const FLAT_TAYLOR: [f64; 8] = [
    0.866_850_275_068_084_9,
    -0.159_154_943_091_895_34,
    -0.037_913_301_857_253_75,
    0.007_537_201_339_774_345,
    0.000_756_562_205_050_656,
    -0.000_154_489_837_361_358_74,
    -8.902_224_918_915_158e-6,
    1.841_304_467_601_76e-6,
];

/// (1 − |ΔT|)² for |ΔT| < 1, else 0.
pub fn q_lower_bound(delta_t: f64) -> f64 {
    let x = delta_t.abs();
    if x < 1.0 {
        (1.0 - x) * (1.0 - x)
    } else {
        0.0
    }
}

/// Leading large-Δ term of q, chosen by which endpoint derivatives vanish.
pub fn q_asymptotic(s: &AncillaryScheme, delta: f64) -> Result<f64> {
    if delta == 0.0 {
        return Ok(f64::INFINITY);
    }
    let t_end = s.duration();
    let a = s.theta(0.0);
    let b = s.theta(t_end);
    let small = |v: f64, n: i32| (v * t_end.powi(n)).abs() <= DERIVATIVE_THRESHOLD;
    if !small(a.d1, 1) {
        return Ok(a.d1 * a.d1 / (4.0 * delta * delta));
    }
    if small(b.d1, 1) && small(a.d2, 2) {
        // Displayed coefficient; the endpoint term at t = T is not included.
        return Ok(a.d3 * a.d3 / delta.powi(6));
    }
    let (f_end, _) = integrate_real(
        |t| 0.5 * (1.0 + s.theta(t).v.cos()) * s.gamma(t).d1,
        0.0,
        t_end,
        QuadOptions::with_tol(1e-12),
    )?;
    let g0 = Complex64::new(0.5 * a.d2, 0.0);
    let gt = Complex64::from_polar(-0.25 * b.d1 * b.d1, f_end + delta * t_end);
    Ok((gt - g0).norm_sqr() / delta.powi(4))
}

/// Q for a three-level scheme at detuning Δ.
pub fn big_q_sensitivity(s: &AncillaryScheme, delta: f64) -> Result<SensitivityReport> {
    big_q_sensitivity_tol(s, delta, DEFAULT_TOL)
}

pub fn big_q_sensitivity_tol(s: &AncillaryScheme, delta: f64, tol: f64) -> Result<SensitivityReport> {
    if s.target() != Target::ThreeLevel {
        return Err(StaError::invalid(format!(
            "Q needs a three-level scheme, got {}",
            s.kind()
        )));
    }
    check_delta(delta)?;
    let duration = s.duration();
    let r = integrate(
        |t| {
            let th = s.theta(t);
            let al = s.alpha(t).expect("three-level schemes carry alpha");
            let (st, ct) = th.v.sin_cos();
            let (sa, ca) = al.v.sin_cos();
            let e = Complex64::from_polar(1.0, delta * t);
            [e * (th.d1 * ct * sa + al.d1 * st * ca), e * (st * sa)]
        },
        0.0,
        duration,
        options(duration, delta, tol),
    )?;
    let h = |t: f64| s.theta(t).v.sin() * s.alpha(t).expect("alpha").v.sin();
    let parts =
        h(duration) * Complex64::from_polar(1.0, delta * duration) - h(0.0) - Complex64::i() * delta * r.value[1];
    let main = r.value[0].norm_sqr();
    finish(
        main,
        r.error,
        &[parts.norm_sqr()],
        tol.max(r.error * delta.abs().max(1.0)),
        delta * duration,
        big_q_asymptotic(s, delta),
        s.approximate_boundary(),
    )
}

pub fn big_q_lower_bound(delta_t: f64) -> f64 {
    q_lower_bound(delta_t)
}

/// α̇(0)²/Δ².
pub fn big_q_asymptotic(s: &AncillaryScheme, delta: f64) -> f64 {
    if delta == 0.0 {
        return f64::INFINITY;
    }
    let ad = s.alpha(0.0).map(|a| a.d1).unwrap_or(0.0);
    ad * ad / (delta * delta)
}

/// q or Q, whichever applies to the scheme.
pub fn sensitivity(s: &AncillaryScheme, delta: f64, tol: f64) -> Result<SensitivityReport> {
    match s.target() {
        Target::TwoLevel => q_sensitivity_tol(s, delta, tol),
        Target::ThreeLevel => big_q_sensitivity_tol(s, delta, tol),
    }
}

/// Sensitivity over a ΔT grid (Δ = ΔT / T), evaluated in parallel.
pub fn sensitivity_sweep(s: &AncillaryScheme, delta_t_grid: &[f64], tol: f64) -> Result<Vec<SensitivityReport>> {
    delta_t_grid
        .par_iter()
        .map(|&x| sensitivity(s, x / s.duration(), tol))
        .collect()
}

pub const SWEEP_COLUMNS: [&str; 5] = ["DeltaT", "value", "lower_bound", "asymptotic", "quad_error"];

pub fn sweep_table(reports: &[SensitivityReport]) -> SweepTable {
    let mut t = SweepTable::new(&SWEEP_COLUMNS);
    for r in reports {
        t.push(vec![
            r.delta_t,
            r.value,
            r.lower_bound,
            r.asymptotic_estimate,
            r.quadrature_error,
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog_2l(t: f64) -> Vec<AncillaryScheme> {
        vec![
            AncillaryScheme::flat_pi(t).unwrap(),
            AncillaryScheme::arcsin_eps(t, 0.01).unwrap(),
            AncillaryScheme::quartic_large_delta(t).unwrap(),
            AncillaryScheme::optimized_2l(t, 1.376, 14.927).unwrap(),
            AncillaryScheme::optimized_2l(t, 1.266, 7.873).unwrap(),
        ]
    }

    fn catalog_3l(t: f64) -> Vec<AncillaryScheme> {
        vec![
            AncillaryScheme::num1_4l(t, -76.546, 49.040).unwrap(),
            AncillaryScheme::num1_4l(t, -76.735, 46.054).unwrap(),
            AncillaryScheme::num2_4l(t, 0.794, -15.633).unwrap(),
            AncillaryScheme::num2_4l(t, 0.852, -13.204).unwrap(),
        ]
    }

    #[test]
    fn flat_closed_form_values() {
        assert!((q_flat_pi_closed_form(0.0) - 1.0).abs() < 1e-15);
        assert!((q_flat_pi_closed_form(3.0) - 0.586_129_172_7).abs() < 1e-9);
        assert_eq!(q_flat_pi_closed_form(-3.0), q_flat_pi_closed_form(3.0));
        // Continuity across the guard band edges.
        for edge in [FRAC_PI_2 - FLAT_GUARD, FRAC_PI_2 + FLAT_GUARD] {
            let inside = q_flat_pi_closed_form(edge - 1e-9f64.copysign(edge - FRAC_PI_2));
            let outside = q_flat_pi_closed_form(edge + 1e-9f64.copysign(edge - FRAC_PI_2));
            assert!((inside - outside).abs() < 5e-10);
        }
        assert!((q_flat_pi_closed_form(FRAC_PI_2) - FLAT_TAYLOR[0]).abs() < 1e-16);
    }

    #[test]
    fn flat_quadrature_matches_closed_form() {
        let s = AncillaryScheme::flat_pi(1.7).unwrap();
        for x in [0.0, 0.3, 1.0, FRAC_PI_2, 1.5709, 3.0, 7.5, 20.0] {
            let r = q_sensitivity(&s, x / 1.7).unwrap();
            assert!((r.value - q_flat_pi_closed_form(x)).abs() < 1e-9, "x={x}");
        }
    }

    #[test]
    fn zero_detuning_gives_one() {
        for s in catalog_2l(2.0) {
            assert!((q_sensitivity(&s, 0.0).unwrap().value - 1.0).abs() < 1e-10);
        }
        for s in catalog_3l(2.0) {
            assert!((big_q_sensitivity(&s, 0.0).unwrap().value - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn optimized_matches_independent_phase() {
        // F = ½c₀(θ + sin θ) in closed form for γ = c₀θ.
        let (c0, c1) = (1.376, 14.927);
        let s = AncillaryScheme::optimized_2l(1.0, c0, c1).unwrap();
        for delta in [1.0, -1.0, 3.0] {
            let r = integrate(
                |t| {
                    let th = s.theta(t);
                    let f = 0.5 * c0 * (th.v + th.v.sin());
                    let (sh, ch) = (0.5 * th.v).sin_cos();
                    let fdot = 0.5 * (1.0 + th.v.cos()) * c0 * th.d1;
                    [Complex64::new(0.5 * th.d1 * ch, fdot * sh) * Complex64::from_polar(1.0, f + delta * t)]
                },
                0.0,
                1.0,
                QuadOptions::with_tol(1e-12).max_panel(1.0 / 64.0),
            )
            .unwrap();
            let q = q_sensitivity(&s, delta).unwrap().value;
            assert!((q - r.value[0].norm_sqr()).abs() < 1e-9, "delta={delta}");
        }
        assert!((q_sensitivity(&s, 1.0).unwrap().value - 0.09467).abs() < 1e-4);
        assert!((q_sensitivity(&s, -1.0).unwrap().value - 2.246).abs() < 1e-3);
    }

    #[test]
    fn paper_zero_points() {
        let s = AncillaryScheme::optimized_2l(1.0, 1.266, 7.873).unwrap();
        assert!(q_sensitivity(&s, 3.0).unwrap().value < 1e-6);
        let s = AncillaryScheme::num1_4l(1.0, -76.735, 46.054).unwrap();
        assert!(big_q_sensitivity(&s, 3.0).unwrap().value < 1e-6);
        let s = AncillaryScheme::num2_4l(1.0, 0.852, -13.204).unwrap();
        assert!(big_q_sensitivity(&s, 3.0).unwrap().value < 1e-4);
    }

    #[test]
    fn ref_3l_values() {
        let s = AncillaryScheme::ref_3l(1.0, 0.002).unwrap();
        let r = big_q_sensitivity(&s, 1.0).unwrap();
        assert!(r.approximate_boundary);
        assert!((r.value - 0.94403).abs() < 1e-4);
        assert!((big_q_sensitivity(&s, 3.0).unwrap().value - 0.58613).abs() < 1e-4);
    }

    #[test]
    fn arcsin_near_resonant_zero() {
        let s = AncillaryScheme::arcsin_eps(1.0, 1e-4).unwrap();
        assert!(q_sensitivity(&s, 2.0 * PI).unwrap().value < 1e-3);
    }

    #[test]
    fn forms_agree_on_catalog() {
        for x in [0.5, 1.0, 2.0, 5.0] {
            for s in catalog_2l(1.0) {
                assert!(q_sensitivity(&s, x).unwrap().forms_difference < 1e-8);
            }
            for s in catalog_3l(1.0) {
                assert!(big_q_sensitivity(&s, x).unwrap().forms_difference < 1e-8);
            }
        }
    }

    #[test]
    fn symmetry_for_real_schemes() {
        let s = AncillaryScheme::quartic_large_delta(1.0).unwrap();
        let a = q_sensitivity(&s, 2.3).unwrap().value;
        let b = q_sensitivity(&s, -2.3).unwrap().value;
        assert!((a - b).abs() < 1e-10);
        for s in catalog_3l(1.0) {
            let a = big_q_sensitivity(&s, 2.3).unwrap().value;
            let b = big_q_sensitivity(&s, -2.3).unwrap().value;
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn asymptotic_branches() {
        let flat = AncillaryScheme::flat_pi(2.0).unwrap();
        assert!((q_asymptotic(&flat, 5.0).unwrap() - PI * PI / (4.0 * 100.0)).abs() < 1e-15);
        let quartic = AncillaryScheme::quartic_large_delta(1.0).unwrap();
        let want = 576.0 * PI * PI / 50f64.powi(6);
        assert!((q_asymptotic(&quartic, 50.0).unwrap() - want).abs() < 1e-12 * want);
        assert_eq!(q_asymptotic(&flat, 0.0).unwrap(), f64::INFINITY);
        let ref3 = AncillaryScheme::ref_3l(1.0, 0.002).unwrap();
        assert!((big_q_asymptotic(&ref3, 50.0) - PI * PI / 4.0 / 2500.0).abs() < 1e-15);
        let num1 = AncillaryScheme::num1_4l(1.0, -76.546, 49.040).unwrap();
        assert!(big_q_asymptotic(&num1, 50.0) < 1e-25);
    }

    #[test]
    fn intermediate_branch_matches_quadrature() {
        // θ(τ) = π τ²: θ̇(0) = 0, θ̈(0) = 2π, θ̇(T) = 2π.
        use crate::ancillary::{CustomTable, CustomTableSpec};
        let n = 41;
        let tau: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let spec = CustomTableSpec {
            theta: tau.iter().map(|t| PI * t * t).collect(),
            theta_dot: Some(tau.iter().map(|t| 2.0 * PI * t).collect()),
            tau,
            alpha: None,
            alpha_dot: None,
            gamma: None,
            gamma_dot: None,
        };
        let s = AncillaryScheme::custom(1.0, Target::TwoLevel, CustomTable::from_spec(spec).unwrap()).unwrap();
        let delta = 200.0;
        let q = q_sensitivity(&s, delta).unwrap().value;
        let est = q_asymptotic(&s, delta).unwrap();
        assert!((q - est).abs() < 0.1 * est, "q={q} est={est}");
    }

    #[test]
    fn flat_decays() {
        let s = AncillaryScheme::flat_pi(1.0).unwrap();
        let q = |x: f64| q_sensitivity(&s, x).unwrap().value;
        assert!(q(200.0) < q(20.0) && q(20.0) < q(2.0));
    }

    #[test]
    fn rejects_wrong_branch() {
        let s2 = AncillaryScheme::flat_pi(1.0).unwrap();
        let s3 = AncillaryScheme::ref_3l(1.0, 0.01).unwrap();
        assert!(q_sensitivity(&s3, 1.0).is_err());
        assert!(big_q_sensitivity(&s2, 1.0).is_err());
        assert!(q_sensitivity(&s2, f64::NAN).is_err());
    }

    #[test]
    fn sweep_csv_layout() {
        let s = AncillaryScheme::flat_pi(1.0).unwrap();
        let reports = sensitivity_sweep(&s, &[0.0, 0.5, 2.0], DEFAULT_TOL).unwrap();
        let csv = sweep_table(&reports).to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "DeltaT,value,lower_bound,asymptotic,quad_error");
        assert!(lines[1].contains(",inf,"));
        assert!(lines[2].starts_with("5.0000000000000000e-1,"));
    }
}
