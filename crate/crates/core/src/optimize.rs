//! Derivative-free minimization of q or Q over a scheme family's parameters.
//!
//! Nelder–Mead with every trial point projected onto the box, restarted
//! from a shifted Halton sequence. Starts run in parallel and are merged
//! with a deterministic tie-break, so results depend only on the problem.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ancillary::{AncillaryScheme, SchemeKind, Target};
use crate::dynamics::{evolve_ground, HamiltonianSpec};
use crate::error::{Result, StaError};
use crate::sensitivity::{self, PerturbedModel};
use crate::synthesis::make_adiabatic_2l;
use crate::table::SweepTable;

pub const DEFAULT_STARTS: usize = 16;
pub const DEFAULT_MAX_EVALS: usize = 2000;
pub const DEFAULT_XTOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    /// Two-level sensitivity q.
    #[serde(rename = "q")]
    SmallQ,
    /// Three-level sensitivity Q.
    #[serde(rename = "Q")]
    BigQ,
}

impl Objective {
    pub fn for_target(t: Target) -> Self {
        match t {
            Target::TwoLevel => Objective::SmallQ,
            Target::ThreeLevel => Objective::BigQ,
        }
    }
}

/// Default box for the families with free parameters.
pub fn default_bounds(kind: SchemeKind) -> Option<Vec<[f64; 2]>> {
    match kind {
        SchemeKind::Optimized2L => Some(vec![[-5.0, 5.0], [-40.0, 40.0]]),
        SchemeKind::Num1_4L => Some(vec![[-200.0, 200.0], [-200.0, 200.0]]),
        SchemeKind::Num2_4L => Some(vec![[0.55, 2.5], [-50.0, 50.0]]),
        SchemeKind::ArcsinEps => Some(vec![[1e-6, 1.0 - 1e-9]]),
        SchemeKind::Ref3L => Some(vec![[1e-4, 0.5 * PI - 1e-4]]),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptProblem {
    pub family: SchemeKind,
    #[serde(rename = "T")]
    pub duration: f64,
    pub objective: Objective,
    #[serde(rename = "DeltaT")]
    pub delta_t: f64,
    pub bounds: Vec<[f64; 2]>,
    /// Number of quasi-random starts.
    pub starts: usize,
    pub seed: u64,
    /// Explicit starting points tried before the quasi-random ones.
    #[serde(default)]
    pub extra_starts: Vec<Vec<f64>>,
    pub max_evals: usize,
    pub xtol: f64,
    /// Absolute tolerance handed to the sensitivity quadrature.
    pub tol: f64,
    #[serde(default)]
    pub record_history: bool,
}

impl OptProblem {
    pub fn new(family: SchemeKind, delta_t: f64) -> Result<Self> {
        let bounds = default_bounds(family)
            .ok_or_else(|| StaError::invalid(format!("{family} has no free parameters to optimize")))?;
        let target = family
            .default_target()
            .ok_or_else(|| StaError::invalid("custom schemes cannot be optimized"))?;
        Ok(Self {
            family,
            duration: 1.0,
            objective: Objective::for_target(target),
            delta_t,
            bounds,
            starts: DEFAULT_STARTS,
            seed: 0,
            extra_starts: reference_starts(family),
            max_evals: DEFAULT_MAX_EVALS,
            xtol: DEFAULT_XTOL,
            tol: sensitivity::DEFAULT_TOL,
            record_history: false,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.family.param_names().len();
        if n == 0 {
            return Err(StaError::invalid(format!("{} has no free parameters", self.family)));
        }
        if self.bounds.len() != n {
            return Err(StaError::invalid(format!(
                "{} needs {n} bounds, got {}",
                self.family,
                self.bounds.len()
            )));
        }
        for [lo, hi] in &self.bounds {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(StaError::invalid(format!("empty or non-finite bound [{lo}, {hi}]")));
            }
        }
        if self.family == SchemeKind::Num2_4L && self.bounds[0][0] < 0.55 {
            return Err(StaError::invalid("num2_4l requires d0 >= 0.55"));
        }
        let target = self.family.default_target().expect("catalog families have a target");
        if Objective::for_target(target) != self.objective {
            return Err(StaError::invalid(format!(
                "{:?} does not apply to {}",
                self.objective, self.family
            )));
        }
        if !(self.delta_t.is_finite() && self.duration.is_finite() && self.duration > 0.0) {
            return Err(StaError::invalid("DeltaT and T must be finite, T > 0"));
        }
        if self.starts == 0 && self.extra_starts.is_empty() {
            return Err(StaError::invalid("at least one start is required"));
        }
        if let Some(bad) = self.extra_starts.iter().find(|s| s.len() != n) {
            return Err(StaError::invalid(format!("start {bad:?} has the wrong dimension")));
        }
        if !(self.xtol > 0.0) || self.max_evals < n + 1 || !(self.tol > 0.0) {
            return Err(StaError::invalid(
                "xtol and tol must be positive and max_evals > dimension",
            ));
        }
        Ok(())
    }

    fn project(&self, x: &mut [f64]) {
        for (v, [lo, hi]) in x.iter_mut().zip(&self.bounds) {
            *v = v.clamp(*lo, *hi);
        }
    }

    /// Objective value; infeasible or failing parameter sets score +∞.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let Ok(s) = AncillaryScheme::from_kind(self.family, self.duration, x) else {
            return f64::INFINITY;
        };
        match sensitivity::sensitivity(&s, self.delta_t / self.duration, self.tol) {
            Ok(r) if r.value.is_finite() => r.value,
            _ => f64::INFINITY,
        }
    }

    /// Starting points: explicit ones first, then the shifted Halton set.
    pub fn start_points(&self) -> Vec<Vec<f64>> {
        let n = self.bounds.len();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let shift: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let mut out: Vec<Vec<f64>> = self
            .extra_starts
            .iter()
            .map(|s| {
                let mut s = s.clone();
                self.project(&mut s);
                s
            })
            .collect();
        for k in 1..=self.starts {
            let p = (0..n)
                .map(|d| {
                    let u = (radical_inverse(k as u64, PRIMES[d]) + shift[d]).fract();
                    let [lo, hi] = self.bounds[d];
                    lo + u * (hi - lo)
                })
                .collect();
            out.push(p);
        }
        out
    }
}

const PRIMES: [u64; 6] = [2, 3, 5, 7, 11, 13];

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while k > 0 {
        out += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub start: Vec<f64>,
    pub params: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub best_params: BTreeMap<String, f64>,
    pub best_vector: Vec<f64>,
    pub best_value: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub starts: Vec<StartSummary>,
    /// Best value after each iteration of the winning start.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<Vec<f64>>,
}

struct LocalRun {
    summary: StartSummary,
    history: Vec<f64>,
}

fn nelder_mead(p: &OptProblem, x0: &[f64]) -> LocalRun {
    let n = x0.len();
    let evals = std::cell::Cell::new(0usize);
    let f = |x: &[f64]| {
        evals.set(evals.get() + 1);
        p.evaluate(x)
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for d in 0..n {
        let [lo, hi] = p.bounds[d];
        let step = 0.05 * (hi - lo).max(1e-12);
        let mut x = x0.to_vec();
        x[d] = if x0[d] + step <= hi { x0[d] + step } else { x0[d] - step };
        p.project(&mut x);
        let v = f(&x);
        simplex.push((x, v));
    }
    let mut history = Vec::new();
    let mut converged = false;
    let order = |a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)| cmp_point(a.1, &a.0, b.1, &b.0);
    loop {
        simplex.sort_by(order);
        history.push(simplex[0].1);
        let best = &simplex[0].0;
        let scale = best.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diameter <= p.xtol * scale {
            converged = simplex[0].1.is_finite();
            break;
        }
        if evals.get() >= p.max_evals {
            break;
        }
        let worst = simplex[n].clone();
        let centroid: Vec<f64> = (0..n)
            .map(|d| simplex[..n].iter().map(|(x, _)| x[d]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| {
            let mut x: Vec<f64> = centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect();
            p.project(&mut x);
            x
        };
        let xr = along(1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = along(0.5);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = f(&xc);
            (xc, fc)
        };
        if fc < fr.min(worst.1) {
            simplex[n] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for item in simplex.iter_mut().skip(1) {
            let mut x: Vec<f64> = x_best.iter().zip(&item.0).map(|(b, v)| b + 0.5 * (v - b)).collect();
            p.project(&mut x);
            let v = f(&x);
            *item = (x, v);
        }
    }
    LocalRun {
        summary: StartSummary {
            start: x0.to_vec(),
            params: simplex[0].0.clone(),
            value: simplex[0].1,
            evaluations: evals.get(),
            converged,
        },
        history,
    }
}

/// Lowest value first, then lexicographic parameters; NaN sorts last.
fn cmp_point(va: f64, xa: &[f64], vb: f64, xb: &[f64]) -> Ordering {
    let key = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
    key(va).total_cmp(&key(vb)).then_with(|| {
        xa.iter()
            .zip(xb)
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

pub fn minimize_sensitivity(p: &OptProblem) -> Result<OptResult> {
    p.validate()?;
    let runs: Vec<LocalRun> = p.start_points().par_iter().map(|x0| nelder_mead(p, x0)).collect();
    let best = runs
        .iter()
        .min_by(|a, b| cmp_point(a.summary.value, &a.summary.params, b.summary.value, &b.summary.params))
        .expect("at least one start");
    if !best.summary.value.is_finite() {
        return Err(StaError::OptimizationFailure(format!(
            "no start produced a finite {:?} for {}",
            p.objective, p.family
        )));
    }
    let names = p.family.param_names();
    Ok(OptResult {
        best_params: names
            .iter()
            .map(|n| n.to_string())
            .zip(best.summary.params.iter().copied())
            .collect(),
        best_vector: best.summary.params.clone(),
        best_value: best.summary.value,
        evaluations: runs.iter().map(|r| r.summary.evaluations).sum(),
        converged: best.summary.converged,
        history: p.record_history.then(|| best.history.clone()),
        starts: runs.into_iter().map(|r| r.summary).collect(),
    })
}

/// Reference starting points for a family: the published optimized sets,
/// plus flat π (c₀ = c₁ = 0) for Optimized2L so the optimum never exceeds it.
pub fn reference_starts(kind: SchemeKind) -> Vec<Vec<f64>> {
    match kind {
        SchemeKind::Optimized2L => vec![vec![0.0, 0.0], vec![1.376, 14.927], vec![1.266, 7.873]],
        SchemeKind::Num1_4L => vec![vec![-76.546, 49.040], vec![-76.735, 46.054]],
        SchemeKind::Num2_4L => vec![vec![0.794, -15.633], vec![0.852, -13.204]],
        _ => Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frontier {
    /// Columns `DeltaT,value,<params...>,converged`; failed points hold NaN.
    pub table: SweepTable,
    pub results: Vec<Result<OptResult>>,
}

/// Minimizes at each grid point in order, warm-starting from the previous
/// solution. A failing point does not abort the sweep.
pub fn sensitivity_frontier(template: &OptProblem, delta_t_grid: &[f64]) -> Result<Frontier> {
    template.validate()?;
    if delta_t_grid.iter().any(|x| !x.is_finite()) {
        return Err(StaError::invalid("DeltaT grid must be finite"));
    }
    let names = template.family.param_names();
    let mut cols = vec!["DeltaT".to_string(), "value".to_string()];
    cols.extend(names.iter().map(|n| n.to_string()));
    cols.push("converged".into());
    let mut table = SweepTable::new(&cols);
    let mut results = Vec::with_capacity(delta_t_grid.len());
    let mut warm: Option<Vec<f64>> = None;
    for &x in delta_t_grid {
        let mut p = template.clone();
        p.delta_t = x;
        if let Some(w) = &warm {
            p.extra_starts.insert(0, w.clone());
        }
        let r = minimize_sensitivity(&p);
        let mut row = vec![x];
        match &r {
            Ok(res) => {
                row.push(res.best_value);
                row.extend(&res.best_vector);
                row.push(if res.converged { 1.0 } else { 0.0 });
                warm = Some(res.best_vector.clone());
            }
            Err(_) => {
                row.extend(std::iter::repeat_n(f64::NAN, names.len() + 2));
            }
        }
        table.push(row);
        results.push(r);
    }
    Ok(Frontier { table, results })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticTuning {
    pub omega0: f64,
    pub delta0: f64,
    /// P₂ at β = 0 for the tuned pulse.
    pub p2: f64,
}

/// Peak Rabi frequency matching the energy budget, and the chirp δ₀ that
/// maximizes the error-free transfer probability.
pub fn tune_adiabatic_2l(energy_pi2: f64, duration: f64) -> Result<AdiabaticTuning> {
    if !(energy_pi2.is_finite() && energy_pi2 > 0.0) {
        return Err(StaError::invalid("energy target must be positive"));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(StaError::invalid("duration must be positive"));
    }
    let omega0 = PI / duration * (2.0 * energy_pi2).sqrt();
    let p2 = |d0: f64| -> Result<f64> {
        let pulse = make_adiabatic_2l(duration, omega0, d0)?;
        Ok(evolve_ground(&HamiltonianSpec::new(pulse, PerturbedModel::new(0.0, 0.0)))?.p_target)
    };
    let hi = 20.0 * PI / duration;
    let n = 80;
    let grid: Vec<f64> = (0..=n).map(|i| hi * i as f64 / n as f64).collect();
    let values = grid.par_iter().map(|&d| p2(d)).collect::<Result<Vec<_>>>()?;
    let imax = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .expect("non-empty grid");
    let (mut a, mut b) = (grid[imax.saturating_sub(1)], grid[(imax + 1).min(n)]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (p2(c)?, p2(d)?);
    while b - a > 1e-7 * hi {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = p2(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = p2(d)?;
        }
    }
    let (delta0, best) = if fc >= fd { (c, fc) } else { (d, fd) };
    let (delta0, best) = if values[imax] > best {
        (grid[imax], values[imax])
    } else {
        (delta0, best)
    };
    Ok(AdiabaticTuning {
        omega0,
        delta0,
        p2: best,
    })
}

/// JSON report: problem echo, result and a version stamp.
pub fn report_json(p: &OptProblem, r: &OptResult) -> String {
    let value = serde_json::json!({
        "version": crate::VERSION,
        "problem": p,
        "result": r,
    });
    serde_json::to_string_pretty(&value).expect("report serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(kind: SchemeKind, x: f64) -> OptProblem {
        let mut p = OptProblem::new(kind, x).unwrap();
        p.starts = 4;
        p.max_evals = 400;
        p
    }

    #[test]
    fn halton_values() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(5, 3) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn starts_are_in_bounds_and_seeded() {
        let mut p = OptProblem::new(SchemeKind::Num2_4L, 3.0).unwrap();
        p.extra_starts = vec![vec![0.0, 100.0]];
        let s = p.start_points();
        assert_eq!(s.len(), 17);
        assert_eq!(s[0], vec![0.55, 50.0]);
        for x in &s {
            for (v, [lo, hi]) in x.iter().zip(&p.bounds) {
                assert!(v >= lo && v <= hi);
            }
        }
        let mut q = p.clone();
        q.seed = 7;
        assert_ne!(q.start_points(), s);
        assert_eq!(p.start_points(), s);
    }

    #[test]
    fn bound_respected_below_one() {
        let r = minimize_sensitivity(&quick(SchemeKind::Optimized2L, 0.5)).unwrap();
        assert!(r.best_value >= 0.25 - 1e-8);
    }

    #[test]
    fn deterministic_and_reproducible() {
        let p = quick(SchemeKind::Optimized2L, 2.0);
        let a = minimize_sensitivity(&p).unwrap();
        let b = minimize_sensitivity(&p).unwrap();
        assert_eq!(a, b);
        let again = p.evaluate(&a.best_vector);
        assert!((again - a.best_value).abs() < 1e-12);
    }

    #[test]
    fn paper_point_is_near_stationary() {
        let mut p = OptProblem::new(SchemeKind::Optimized2L, 3.0).unwrap();
        p.starts = 0;
        p.extra_starts = vec![vec![1.266, 7.873]];
        let q0 = p.evaluate(&[1.266, 7.873]);
        let r = minimize_sensitivity(&p).unwrap();
        assert!(r.best_value <= q0);
        assert!((q0 - r.best_value).abs() <= 1e-6f64.max(0.01 * q0));
    }

    #[test]
    fn invalid_problems() {
        assert!(OptProblem::new(SchemeKind::FlatPi, 1.0).is_err());
        let mut p = OptProblem::new(SchemeKind::Num2_4L, 1.0).unwrap();
        p.bounds[0] = [0.1, 1.0];
        assert!(minimize_sensitivity(&p).is_err());
        let mut p = OptProblem::new(SchemeKind::Num1_4L, 1.0).unwrap();
        p.objective = Objective::SmallQ;
        assert!(p.validate().is_err());
    }

    #[test]
    fn infeasible_everywhere_fails() {
        // Every Num2 member with d0 in this sliver is screened as divergent.
        let mut p = quick(SchemeKind::Num2_4L, 1.0);
        p.bounds = vec![[0.55, 0.55], [0.0, 0.0]];
        let feasible = AncillaryScheme::num2_4l(1.0, 0.55, 0.0).is_ok();
        let r = minimize_sensitivity(&p);
        assert_eq!(r.is_ok(), feasible);
    }

    #[test]
    fn tuning_energy_and_area() {
        let t = tune_adiabatic_2l(10.51, 1.0).unwrap();
        assert!((t.omega0 - PI * (21.02f64).sqrt()).abs() < 1e-12);
        let area = 2.0 * t.omega0 / (PI * PI);
        assert!((area - 2.92).abs() < 0.01);
        assert!(t.p2 > 0.5);
    }

    #[test]
    fn report_has_version() {
        let p = quick(SchemeKind::Optimized2L, 1.0);
        let r = minimize_sensitivity(&p).unwrap();
        let j: serde_json::Value = serde_json::from_str(&report_json(&p, &r)).unwrap();
        assert_eq!(j["version"], crate::VERSION);
        assert_eq!(j["problem"]["objective"], "q");
        assert_eq!(
            j["result"]["starts"].as_array().unwrap().len(),
            4 + reference_starts(p.family).len()
        );
    }
}
