//! Unitary propagation of the perturbed three- and four-level Hamiltonians.
//!
//! Each step applies exp(−iK) with K Hermitian, computed through the
//! eigendecomposition of K, so the propagator is unitary to rounding
//! regardless of step size. Step sizes are controlled by step doubling.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StaError};
use crate::sensitivity::PerturbedModel;
use crate::synthesis::Pulse;
use crate::table::SweepTable;

/// Default local error target per step.
pub const DEFAULT_LOCAL_TOL: f64 = 1e-12;
/// Hard cap on the step size as a fraction of T.
const MAX_STEP_FRACTION: f64 = 1.0 / 512.0;
/// Hard cap on h·‖H‖_F.
const MAX_PHASE_PER_STEP: f64 = 0.1;
const MIN_STEP_FRACTION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    pub pulse: Pulse,
    pub model: PerturbedModel,
}

impl HamiltonianSpec {
    pub fn new(pulse: impl Into<Pulse>, model: PerturbedModel) -> Self {
        Self {
            pulse: pulse.into(),
            model,
        }
    }

    pub fn dimension(&self) -> usize {
        match self.pulse {
            Pulse::TwoLevel(_) => 3,
            Pulse::ThreeLevel(_) => 4,
        }
    }

    /// Index of the bare state the transfer should end in.
    pub fn target_index(&self) -> usize {
        match self.pulse {
            Pulse::TwoLevel(_) => 1,
            Pulse::ThreeLevel(_) => 2,
        }
    }
}

pub fn build_hamiltonian(spec: &HamiltonianSpec, t: f64) -> DMatrix<Complex64> {
    let m = &spec.model;
    let c = |re: f64| Complex64::new(re, 0.0);
    let phase = Complex64::from_polar(m.beta, m.zeta);
    match &spec.pulse {
        Pulse::TwoLevel(p) => {
            let ctl = p.eval(t);
            let w = ctl.omega12();
            let d = ctl.delta2;
            let mut h = DMatrix::from_element(3, 3, c(0.0));
            h[(0, 0)] = c(-d);
            h[(0, 1)] = w.conj();
            h[(0, 2)] = (phase * w).conj();
            h[(1, 0)] = w;
            h[(1, 1)] = c(d);
            h[(2, 0)] = phase * w;
            h[(2, 2)] = c(-2.0 * m.delta + d);
            h * c(0.5)
        }
        Pulse::ThreeLevel(p) => {
            let (w12, w23) = p.eval(t);
            let mut h = DMatrix::from_element(4, 4, c(0.0));
            h[(0, 1)] = c(w12);
            h[(1, 0)] = c(w12);
            h[(1, 2)] = c(w23);
            h[(2, 1)] = c(w23);
            h[(1, 3)] = (phase * w23).conj();
            h[(3, 1)] = phase * w23;
            h[(3, 3)] = c(-2.0 * m.delta);
            h * c(0.5)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Stepper {
    /// Fourth-order Magnus with two Gauss points.
    #[default]
    Magnus4,
    /// Second-order Magnus (midpoint exponential).
    Midpoint,
}

impl Stepper {
    fn order(self) -> i32 {
        match self {
            Stepper::Magnus4 => 4,
            Stepper::Midpoint => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub local_tol: f64,
    pub stepper: Stepper,
    /// Record populations at this many uniformly spaced times (including
    /// both ends).
    pub samples: Option<usize>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            local_tol: DEFAULT_LOCAL_TOL,
            stepper: Stepper::Magnus4,
            samples: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResult {
    pub final_state: Vec<Complex64>,
    /// (t, populations) pairs when sampling was requested.
    pub populations: Option<Vec<(f64, Vec<f64>)>>,
    pub p_target: f64,
    /// Total population outside the target state, summed directly.
    pub infidelity: f64,
    /// Population of the unwanted level at t = T.
    pub leakage: f64,
    pub norm_drift: f64,
    pub steps: usize,
}

pub fn ground_state(dim: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); dim];
    v[0] = Complex64::new(1.0, 0.0);
    v
}

/// Evolves |1⟩ with default options.
pub fn evolve_ground(spec: &HamiltonianSpec) -> Result<EvolutionResult> {
    evolve(spec, &ground_state(spec.dimension()), EvolveOptions::default())
}

fn commutator(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a * b - b * a
}

/// exp(−iK)·ψ for Hermitian K.
fn apply_exp(k: DMatrix<Complex64>, psi: &DVector<Complex64>) -> DVector<Complex64> {
    // Symmetrize to remove rounding asymmetry before the Hermitian solver.
    let k = (&k + k.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = k.symmetric_eigen();
    let v = &eig.eigenvectors;
    let mut coeff = v.adjoint() * psi;
    for (c, &lam) in coeff.iter_mut().zip(eig.eigenvalues.iter()) {
        *c *= Complex64::from_polar(1.0, -lam);
    }
    v * coeff
}

fn step(spec: &HamiltonianSpec, stepper: Stepper, t: f64, h: f64, psi: &DVector<Complex64>) -> DVector<Complex64> {
    let k = match stepper {
        Stepper::Midpoint => build_hamiltonian(spec, t + 0.5 * h) * Complex64::new(h, 0.0),
        Stepper::Magnus4 => {
            let r = 3f64.sqrt() / 6.0;
            let h1 = build_hamiltonian(spec, t + (0.5 - r) * h);
            let h2 = build_hamiltonian(spec, t + (0.5 + r) * h);
            let c = commutator(&h2, &h1);
            (&h1 + &h2) * Complex64::new(0.5 * h, 0.0) - c * Complex64::new(0.0, 3f64.sqrt() / 12.0 * h * h)
        }
    };
    apply_exp(k, psi)
}

fn populations(psi: &DVector<Complex64>) -> Vec<f64> {
    psi.iter().map(|c| c.norm_sqr()).collect()
}

pub fn evolve(spec: &HamiltonianSpec, psi0: &[Complex64], opts: EvolveOptions) -> Result<EvolutionResult> {
    let dim = spec.dimension();
    if psi0.len() != dim {
        return Err(StaError::invalid(format!(
            "initial state needs {dim} components, got {}",
            psi0.len()
        )));
    }
    let norm0: f64 = psi0.iter().map(|c| c.norm_sqr()).sum();
    if !((norm0 - 1.0).abs() <= 1e-12) {
        return Err(StaError::invalid(format!("initial state norm² is {norm0}, expected 1")));
    }
    let m = &spec.model;
    if !(m.delta.is_finite() && m.beta.is_finite() && m.zeta.is_finite()) {
        return Err(StaError::invalid("perturbation parameters must be finite"));
    }
    if !(opts.local_tol > 0.0) {
        return Err(StaError::invalid("local tolerance must be positive"));
    }
    let t_end = spec.pulse.duration();
    let h_max_global = t_end * MAX_STEP_FRACTION;
    let h_min = t_end * MIN_STEP_FRACTION;
    let sample_times: Vec<f64> = match opts.samples {
        Some(n) => {
            let n = n.max(2);
            (0..n)
                .map(|i| {
                    if i + 1 == n {
                        t_end
                    } else {
                        t_end * i as f64 / (n - 1) as f64
                    }
                })
                .collect()
        }
        None => vec![t_end],
    };
    let mut record = opts.samples.map(|_| Vec::with_capacity(sample_times.len()));

    let mut psi = DVector::from_column_slice(psi0);
    let mut t = 0.0;
    let mut next_sample = 0;
    if let Some(r) = record.as_mut() {
        r.push((0.0, populations(&psi)));
        next_sample = 1;
    }
    let mut h = h_max_global;
    let mut steps = 0usize;
    let p = opts.stepper.order();
    while next_sample < sample_times.len() {
        let stop = sample_times[next_sample];
        if stop - t <= h_min.max(1e-15 * t_end) {
            t = stop;
            if let Some(r) = record.as_mut() {
                r.push((t, populations(&psi)));
            }
            next_sample += 1;
            continue;
        }
        let norm_h = build_hamiltonian(spec, t).norm();
        let cap = if norm_h > 0.0 {
            h_max_global.min(MAX_PHASE_PER_STEP / norm_h)
        } else {
            h_max_global
        };
        h = h.min(cap);
        let landing = h >= stop - t;
        let hh = if landing { stop - t } else { h };
        let big = step(spec, opts.stepper, t, hh, &psi);
        let half = step(spec, opts.stepper, t, 0.5 * hh, &psi);
        let small = step(spec, opts.stepper, t + 0.5 * hh, 0.5 * hh, &half);
        let err = (&big - &small).norm();
        if !err.is_finite() {
            return Err(StaError::numeric(format!("non-finite state at t = {t}"), err));
        }
        if err <= opts.local_tol {
            psi = small;
            t = if landing { stop } else { t + hh };
            steps += 1;
            if landing {
                if let Some(r) = record.as_mut() {
                    r.push((t, populations(&psi)));
                }
                next_sample += 1;
            }
        }
        let factor = if err == 0.0 {
            2.0
        } else {
            (0.9 * (opts.local_tol / err).powf(1.0 / (p + 1) as f64)).clamp(0.2, 2.0)
        };
        h = (hh * factor).min(cap.max(hh));
        if h < h_min {
            return Err(StaError::numeric(format!("step size underflow at t = {t}"), err));
        }
    }

    let pops = populations(&psi);
    let norm: f64 = pops.iter().sum();
    let target = spec.target_index();
    let infidelity: f64 = pops
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != target)
        .map(|(_, p)| p)
        .sum();
    Ok(EvolutionResult {
        final_state: psi.iter().copied().collect(),
        populations: record,
        p_target: pops[target],
        infidelity,
        leakage: pops[dim - 1],
        norm_drift: (norm - 1.0).abs(),
        steps,
    })
}

/// Final target probability for each β, with the pulse and Δ fixed.
pub fn beta_sweep(spec: &HamiltonianSpec, betas: &[f64], opts: EvolveOptions) -> Result<SweepTable> {
    let psi0 = ground_state(spec.dimension());
    let values = betas
        .par_iter()
        .map(|&beta| {
            let mut s = spec.clone();
            s.model.beta = beta;
            evolve(&s, &psi0, opts).map(|r| r.p_target)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = SweepTable::new(&["beta", "P_target"]);
    for (b, p) in betas.iter().zip(values) {
        table.push(vec![*b, p]);
    }
    Ok(table)
}

/// CSV with header `t,p1,p2,p3[,p4]`.
pub fn trajectory_table(r: &EvolutionResult) -> Option<SweepTable> {
    let pops = r.populations.as_ref()?;
    let dim = r.final_state.len();
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=dim).map(|i| format!("p{i}")));
    let mut table = SweepTable::new(&cols);
    for (t, p) in pops {
        let mut row = vec![*t];
        row.extend_from_slice(p);
        table.push(row);
    }
    Some(table)
}

/// Least-squares fit y = c₀ + c₁x + c₂x².
pub fn quadratic_fit(x: &[f64], y: &[f64]) -> Result<[f64; 3]> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(StaError::invalid("quadratic fit needs at least three (x, y) pairs"));
    }
    let mut a = Matrix3::zeros();
    let mut b = Vector3::zeros();
    for (&xi, &yi) in x.iter().zip(y) {
        let row = [1.0, xi, xi * xi];
        for r in 0..3 {
            b[r] += row[r] * yi;
            for c in 0..3 {
                a[(r, c)] += row[r] * row[c];
            }
        }
    }
    let sol = a
        .lu()
        .solve(&b)
        .ok_or_else(|| StaError::numeric("singular quadratic fit", f64::NAN))?;
    Ok([sol[0], sol[1], sol[2]])
}

/// Sensitivity estimated from simulated infidelities: the β² coefficient of
/// a quadratic fit of 1 − P against β².
pub fn fitted_sensitivity(spec: &HamiltonianSpec, betas: &[f64], opts: EvolveOptions) -> Result<f64> {
    let psi0 = ground_state(spec.dimension());
    let loss = betas
        .par_iter()
        .map(|&beta| {
            let mut s = spec.clone();
            s.model.beta = beta;
            evolve(&s, &psi0, opts).map(|r| r.infidelity)
        })
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = betas.iter().map(|b| b * b).collect();
    Ok(quadratic_fit(&x, &loss)?[1])
}
