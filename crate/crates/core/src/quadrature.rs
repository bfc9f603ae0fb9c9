//! Adaptive Gauss–Kronrod (G7/K15) quadrature for complex, vector-valued
//! integrands.
//!
//! Two features are specific to the sensitivity functionals:
//!
//! * a panel-width cap, so an oscillatory factor `exp(i Δ t)` advances by a
//!   bounded phase per panel;
//! * an optional co-integrated phase `F(t) = F(a) + ∫_a^t rate(s) ds` that is
//!   advanced panel by panel (left to right) and handed to the integrand at
//!   every node, avoiding a nested quadrature per evaluation.

use num_complex::Complex64;

use crate::error::{Result, StaError};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

/// Gauss weights for the nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const XGL8: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const WGL8: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    /// Absolute tolerance on the whole integral (max-norm over components).
    pub abs_tol: f64,
    /// Upper bound on any panel width.
    pub max_panel: f64,
    /// Maximum bisection depth below an initial panel.
    pub max_depth: u32,
    /// Integrand evaluation budget; panels are accepted as they stand once
    /// it is spent.
    pub max_evals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            max_panel: f64::INFINITY,
            max_depth: 40,
            max_evals: 4_000_000,
        }
    }
}

impl QuadOptions {
    pub fn with_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }

    pub fn max_panel(mut self, width: f64) -> Self {
        self.max_panel = width;
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<const N: usize> {
    pub value: [Complex64; N],
    /// Sum of the per-panel |K15 − G7| estimates.
    pub error: f64,
    /// Co-integrated phase at the upper limit.
    pub phase_end: f64,
    pub evaluations: usize,
}

/// Integrates a real scalar function.
pub fn integrate_real<F>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let r = integrate_phased(|_| 0.0, |t, _| [Complex64::new(f(t), 0.0)], a, b, opts)?;
    Ok((r.value[0].re, r.error))
}

/// Integrates a complex vector-valued function without a carried phase.
pub fn integrate<const N: usize, F>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult<N>>
where
    F: Fn(f64) -> [Complex64; N],
{
    integrate_phased(|_| 0.0, |t, _| f(t), a, b, opts)
}

/// Integrates `f(t, F(t))` over `[a, b]` where `F(a) = 0` and `F' = rate`.
pub fn integrate_phased<const N: usize, R, F>(rate: R, f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult<N>>
where
    R: Fn(f64) -> f64,
    F: Fn(f64, f64) -> [Complex64; N],
{
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(StaError::invalid(format!("bad integration interval [{a}, {b}]")));
    }
    if !(opts.abs_tol > 0.0) {
        return Err(StaError::invalid("quadrature tolerance must be positive"));
    }
    let mut acc = Accumulator::<N>::new();
    if b == a {
        return Ok(acc.finish(0.0));
    }
    let len = b - a;
    let panels = if opts.max_panel.is_finite() && opts.max_panel > 0.0 {
        (len / opts.max_panel).ceil().max(1.0) as usize
    } else {
        1
    };
    let width = len / panels as f64;
    let mut phase = 0.0;
    for k in 0..panels {
        let lo = a + k as f64 * width;
        let hi = if k + 1 == panels { b } else { lo + width };
        phase = adapt(&rate, &f, lo, hi, phase, len, opts, 0, &mut acc);
    }
    if !acc.error.is_finite() || acc.value.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(StaError::numeric("non-finite integrand", acc.error));
    }
    if acc.unresolved && acc.error > opts.abs_tol {
        return Err(StaError::numeric(
            "adaptive quadrature did not reach tolerance",
            acc.error,
        ));
    }
    Ok(acc.finish(phase))
}

struct Accumulator<const N: usize> {
    value: [Complex64; N],
    error: f64,
    evaluations: usize,
    unresolved: bool,
}

impl<const N: usize> Accumulator<N> {
    fn new() -> Self {
        Self {
            value: [Complex64::new(0.0, 0.0); N],
            error: 0.0,
            evaluations: 0,
            unresolved: false,
        }
    }

    fn finish(self, phase_end: f64) -> QuadResult<N> {
        QuadResult {
            value: self.value,
            error: self.error,
            phase_end,
            evaluations: self.evaluations,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn adapt<const N: usize, R, F>(
    rate: &R,
    f: &F,
    a: f64,
    b: f64,
    phase_a: f64,
    total_len: f64,
    opts: QuadOptions,
    depth: u32,
    acc: &mut Accumulator<N>,
) -> f64
where
    R: Fn(f64) -> f64,
    F: Fn(f64, f64) -> [Complex64; N],
{
    let (value, err, phase_b) = kronrod_panel(rate, f, a, b, phase_a);
    acc.evaluations += 15;
    let local_tol = opts.abs_tol * (b - a) / total_len;
    let too_deep = depth >= opts.max_depth || (b - a) < 1e-13 * total_len || acc.evaluations >= opts.max_evals;
    if err <= local_tol || !err.is_finite() || too_deep {
        if err > local_tol && too_deep {
            acc.unresolved = true;
        }
        for (s, v) in acc.value.iter_mut().zip(value) {
            *s += v;
        }
        acc.error += err;
        return phase_b;
    }
    let mid = 0.5 * (a + b);
    let phase_mid = adapt(rate, f, a, mid, phase_a, total_len, opts, depth + 1, acc);
    adapt(rate, f, mid, b, phase_mid, total_len, opts, depth + 1, acc)
}

/// Phase at `x` given the phase at `a`, by 8-point Gauss–Legendre on `[a, x]`.
fn advance_phase<R: Fn(f64) -> f64>(rate: &R, a: f64, x: f64, phase_a: f64) -> f64 {
    let c = 0.5 * (a + x);
    let h = 0.5 * (x - a);
    if h == 0.0 {
        return phase_a;
    }
    let mut s = 0.0;
    for (xi, wi) in XGL8.iter().zip(WGL8) {
        s += wi * (rate(c - h * xi) + rate(c + h * xi));
    }
    phase_a + h * s
}

fn kronrod_panel<const N: usize, R, F>(rate: &R, f: &F, a: f64, b: f64, phase_a: f64) -> ([Complex64; N], f64, f64)
where
    R: Fn(f64) -> f64,
    F: Fn(f64, f64) -> [Complex64; N],
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let zero = Complex64::new(0.0, 0.0);
    let mut kron = [zero; N];
    let mut gauss = [zero; N];
    let mut rate_integral = 0.0;

    let eval = |t: f64| f(t, advance_phase(rate, a, t, phase_a));

    let fc = eval(c);
    rate_integral += WGK[7] * rate(c);
    for i in 0..N {
        kron[i] = fc[i] * WGK[7];
        gauss[i] = fc[i] * WG[3];
    }
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = eval(c - dx);
        let f2 = eval(c + dx);
        rate_integral += WGK[j] * (rate(c - dx) + rate(c + dx));
        for i in 0..N {
            let sum = f1[i] + f2[i];
            kron[i] += sum * WGK[j];
            if j % 2 == 1 {
                gauss[i] += sum * WG[j / 2];
            }
        }
    }
    let mut err: f64 = 0.0;
    for i in 0..N {
        kron[i] *= h;
        gauss[i] *= h;
        err = err.max((kron[i] - gauss[i]).norm());
    }
    (kron, err, phase_a + h * rate_integral)
}
