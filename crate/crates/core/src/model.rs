//! Physical parameters, relaxation kernels, friction laws, initial data and the
//! sampling-based hypothesis checks on kernel and friction.
//!
//! The beam system is
//!
//! ```text
//! ρ1 φ_tt − k1 (φ_x + ψ)_x + μ φ_t = 0
//! ρ2 ψ_tt − k2 ψ_xx + ∫₀ᵗ g(t−s) ψ_xx(s) ds + k1 (φ_x + ψ) + h(ψ_t) + γ θ_xt = 0
//! ρ3 θ_tt + γ ψ_tx − δ θ_xx − β θ_txx = 0
//! ```
//!
//! on `(0, L)` with `φ = ψ = θ_x = 0` at both ends.

use std::f64::consts::PI;

use crate::diagnostics::LyapunovWeights;
use crate::error::{Error, Result};
use crate::grid::{Boundary, Field, Grid};

/// Tolerance used by every sampled hypothesis check.
pub const HYPOTHESIS_TOL: f64 = 1e-9;

const KERNEL_SAMPLES: usize = 2001;
const FRICTION_SAMPLES: usize = 10_001;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    pub k1: f64,
    pub k2: f64,
    pub mu: f64,
    pub beta: f64,
    pub delta: f64,
    pub gamma: f64,
    pub length: f64,
}

impl Default for Coefficients {
    fn default() -> Self {
        Coefficients {
            rho1: 1.0,
            rho2: 1.0,
            rho3: 1.0,
            k1: 1.0,
            k2: 1.0,
            mu: 1.0,
            beta: 1.0,
            delta: 1.0,
            gamma: 1.0,
            length: 1.0,
        }
    }
}

impl Coefficients {
    /// Inertias, stiffnesses and the length must be positive; the damping,
    /// conduction and coupling constants may be switched off with 0.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho1", self.rho1),
            ("rho2", self.rho2),
            ("rho3", self.rho3),
            ("k1", self.k1),
            ("k2", self.k2),
            ("length", self.length),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::contract(format!(
                    "coefficient {name} must be > 0, got {v}"
                )));
            }
        }
        let nonneg = [
            ("mu", self.mu),
            ("beta", self.beta),
            ("delta", self.delta),
            ("gamma", self.gamma),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::contract(format!(
                    "coefficient {name} must be >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn equal_wave_speeds(&self) -> bool {
        (self.k1 / self.rho1 - self.k2 / self.rho2).abs() <= 1e-12
    }
}

/// Relaxation kernel `g` of the memory term.
#[derive(Debug, Clone, PartialEq)]
pub enum MemoryKernel {
    /// `g ≡ 0`: no viscoelastic memory.
    Zero,
    /// `g(s) = a·e^{−b s}`.
    Exponential {
        a: f64,
        b: f64,
    },
    Tabulated(TabulatedKernel),
}

/// Piecewise-linear kernel through samples `(s_i, g_i)`, continued past the
/// last sample by `g_last·e^{−ξ_b (s − s_last)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedKernel {
    times: Vec<f64>,
    values: Vec<f64>,
    xi_bound: f64,
}

impl TabulatedKernel {
    pub fn new(times: Vec<f64>, values: Vec<f64>, xi_bound: f64) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::contract(
                "tabulated kernel needs at least two (time, value) samples of equal length",
            ));
        }
        if times[0] != 0.0 {
            return Err(Error::contract(
                "tabulated kernel samples must start at s = 0",
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::contract(
                "tabulated kernel times must be strictly increasing",
            ));
        }
        if values.iter().chain(&times).any(|v| !v.is_finite()) {
            return Err(Error::contract("tabulated kernel samples must be finite"));
        }
        if !(xi_bound > 0.0 && xi_bound.is_finite()) {
            return Err(Error::contract(
                "tabulated kernel tail rate xi_bound must be > 0",
            ));
        }
        Ok(TabulatedKernel {
            times,
            values,
            xi_bound,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn xi_bound(&self) -> f64 {
        self.xi_bound
    }

    fn last(&self) -> (f64, f64) {
        (*self.times.last().unwrap(), *self.values.last().unwrap())
    }

    fn segment(&self, s: f64) -> usize {
        // index i with times[i] <= s < times[i+1]
        match self.times.binary_search_by(|t| t.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(self.times.len() - 2),
            Err(i) => i - 1,
        }
    }

    fn eval(&self, s: f64) -> f64 {
        let (s_last, g_last) = self.last();
        if s >= s_last {
            return g_last * (-self.xi_bound * (s - s_last)).exp();
        }
        let i = self.segment(s);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let w = (s - t0) / (t1 - t0);
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    fn derivative(&self, s: f64) -> f64 {
        let (s_last, _) = self.last();
        if s >= s_last {
            return -self.xi_bound * self.eval(s);
        }
        let i = self.segment(s);
        (self.values[i + 1] - self.values[i]) / (self.times[i + 1] - self.times[i])
    }

    fn mass(&self, t: f64) -> f64 {
        let (s_last, g_last) = self.last();
        let mut acc = 0.0;
        for i in 0..self.times.len() - 1 {
            let (t0, t1) = (self.times[i], self.times[i + 1]);
            if t <= t0 {
                return acc;
            }
            let hi = t.min(t1);
            acc += 0.5 * (hi - t0) * (self.values[i] + self.eval(hi));
            if t <= t1 {
                return acc;
            }
        }
        acc + g_last / self.xi_bound * (1.0 - (-self.xi_bound * (t - s_last)).exp())
    }

    fn total_mass(&self) -> f64 {
        let (_, g_last) = self.last();
        let table: f64 = self
            .times
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, g)| 0.5 * (t[1] - t[0]) * (g[0] + g[1]))
            .sum();
        table + g_last / self.xi_bound
    }

    /// Per-segment ratio `−g'/g` taken at the left sample, the binding point
    /// of `g' ≤ −ξ g` on a linear piece.
    fn decay_ratios(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = self
            .times
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, g)| {
                let slope = (g[1] - g[0]) / (t[1] - t[0]);
                let ratio = if g[0] > 0.0 {
                    -slope / g[0]
                } else if g[1] > 0.0 {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                };
                (t[0], ratio)
            })
            .collect();
        let (s_last, _) = self.last();
        out.push((s_last, self.xi_bound));
        out
    }
}

impl MemoryKernel {
    pub fn exponential(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b > 0.0 && b.is_finite()) {
            return Err(Error::contract(format!(
                "exponential kernel needs finite a and b > 0, got a = {a}, b = {b}"
            )));
        }
        Ok(MemoryKernel::Exponential { a, b })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, MemoryKernel::Zero)
    }

    /// `g(s)`.
    pub fn eval(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::domain(format!(
                "kernel evaluated at negative time {s}"
            )));
        }
        Ok(self.eval_unchecked(s))
    }

    pub(crate) fn eval_unchecked(&self, s: f64) -> f64 {
        match self {
            MemoryKernel::Zero => 0.0,
            MemoryKernel::Exponential { a, b } => a * (-b * s).exp(),
            MemoryKernel::Tabulated(k) => k.eval(s),
        }
    }

    /// `g'(s)`; right derivative at tabulated nodes.
    pub fn derivative(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::domain(format!(
                "kernel derivative at negative time {s}"
            )));
        }
        Ok(self.derivative_unchecked(s))
    }

    pub(crate) fn derivative_unchecked(&self, s: f64) -> f64 {
        match self {
            MemoryKernel::Zero => 0.0,
            MemoryKernel::Exponential { a, b } => -b * a * (-b * s).exp(),
            MemoryKernel::Tabulated(k) => k.derivative(s),
        }
    }

    /// `∫₀ᵗ g(s) ds`.
    pub fn mass(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::domain(format!("kernel mass at negative time {t}")));
        }
        Ok(match self {
            MemoryKernel::Zero => 0.0,
            MemoryKernel::Exponential { a, b } => a / b * (-(-b * t).exp_m1()),
            MemoryKernel::Tabulated(k) => k.mass(t),
        })
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            MemoryKernel::Zero => 0.0,
            MemoryKernel::Exponential { a, b } => a / b,
            MemoryKernel::Tabulated(k) => k.total_mass(),
        }
    }

    /// `l = 1 − ∫₀^∞ g`.
    pub fn l(&self) -> f64 {
        1.0 - self.total_mass()
    }

    /// Decay rate `ξ(t)` with `g' ≤ −ξ g`. Exponential kernels have `ξ ≡ b`;
    /// tabulated kernels use the nonincreasing envelope from [`check_kernel`].
    pub fn xi(&self, t: f64) -> f64 {
        match self {
            MemoryKernel::Zero => 0.0,
            MemoryKernel::Exponential { b, .. } => *b,
            MemoryKernel::Tabulated(k) => {
                let mut env = f64::INFINITY;
                for (s, r) in k.decay_ratios() {
                    if s > t {
                        break;
                    }
                    env = env.min(r);
                }
                env.max(0.0)
            }
        }
    }

    /// Age beyond which `g(age) < eps·g(0)`, or `None` if nothing may be dropped.
    pub fn truncation_horizon(&self, eps: f64) -> Option<f64> {
        if !(eps > 0.0) {
            return None;
        }
        match self {
            MemoryKernel::Zero => Some(0.0),
            MemoryKernel::Exponential { b, .. } => Some((1.0 / eps).ln().max(0.0) / b),
            MemoryKernel::Tabulated(k) => {
                let g0 = k.values[0];
                if g0 <= 0.0 {
                    return None;
                }
                let target = eps * g0;
                let (s_last, g_last) = k.last();
                if g_last >= target {
                    return Some(s_last + (g_last / target).ln() / k.xi_bound);
                }
                // last sample after which g stays below target
                let mut horizon = 0.0;
                for (t, g) in k.times.iter().zip(&k.values) {
                    if *g >= target {
                        horizon = *t;
                    }
                }
                let i = k.times.iter().position(|t| *t == horizon).unwrap();
                let (t0, t1) = (k.times[i], k.times[i + 1]);
                let (g0s, g1s) = (k.values[i], k.values[i + 1]);
                Some(t0 + (g0s - target) / (g0s - g1s) * (t1 - t0))
            }
        }
    }
}

/// Result of [`check_kernel`].
#[derive(Debug, Clone, PartialEq)]
pub struct KernelReport {
    pub g0_positive: bool,
    pub l: f64,
    /// Largest constant `ξ` with `g' ≤ −ξ g` on the sample grid.
    pub xi_estimate: f64,
    /// Nonincreasing admissible `ξ(s)` at the sample abscissae.
    pub xi_table: Vec<(f64, f64)>,
    pub ok: bool,
    pub reasons: Vec<String>,
}

/// Checks `g(0) > 0`, `l > 0` and `g' ≤ −ξ(s) g` for a positive nonincreasing `ξ`.
pub fn check_kernel(kernel: &MemoryKernel) -> KernelReport {
    let g0 = kernel.eval_unchecked(0.0);
    let l = kernel.l();
    let mut reasons = Vec::new();
    let g0_positive = g0 > 0.0;
    if !g0_positive {
        reasons.push(format!("g(0) = {g0} is not positive"));
    }
    if !(l > 0.0) {
        reasons.push(format!("l = {l} ≤ 0"));
    }

    let ratios: Vec<(f64, f64)> = match kernel {
        MemoryKernel::Zero => vec![(0.0, 0.0)],
        MemoryKernel::Exponential { b, .. } => {
            // exact g'/g on the sample grid
            let horizon = 10.0 / b;
            (0..KERNEL_SAMPLES)
                .map(|i| {
                    let s = horizon * i as f64 / (KERNEL_SAMPLES - 1) as f64;
                    let ratio = -kernel.derivative_unchecked(s) / kernel.eval_unchecked(s);
                    (s, if ratio.is_finite() { ratio } else { *b })
                })
                .collect()
        }
        MemoryKernel::Tabulated(k) => {
            if k.values.iter().any(|v| *v < 0.0) {
                reasons.push("tabulated kernel has negative samples".to_string());
            }
            k.decay_ratios()
        }
    };

    let mut env = f64::INFINITY;
    let xi_table: Vec<(f64, f64)> = ratios
        .iter()
        .map(|&(s, r)| {
            env = env.min(r);
            (s, env)
        })
        .collect();
    let xi_estimate = env;
    if let Some(&(s, r)) = ratios.iter().find(|(_, r)| !(*r > HYPOTHESIS_TOL)) {
        reasons.push(format!("g'/g = {} at s = {s}: no positive decay rate", -r));
    }
    let ok = reasons.is_empty();
    KernelReport {
        g0_positive,
        l,
        xi_estimate,
        xi_table,
        ok,
        reasons,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrictionFamily {
    /// `h(s) = α s`.
    Linear(f64),
    /// `h(s) = α s³ / (1 + s²)`.
    RationalCubic(f64),
}

/// Nonlinear damping `h(ψ_t)` with its declared hypothesis constants.
#[derive(Debug, Clone, PartialEq)]
pub struct FrictionLaw {
    pub family: FrictionFamily,
    /// `c′` in `c′|s| ≤ |h(s)|` for `|s| ≥ ε′`.
    pub c_lower: f64,
    /// `c″` in `|h(s)| ≤ c″|s|` for `|s| ≥ ε′`.
    pub c_upper: f64,
    pub eps_prime: f64,
    /// Name of the convex comparison function; recorded, never evaluated.
    pub comparison: Option<String>,
}

impl FrictionLaw {
    pub fn linear(alpha: f64) -> Self {
        FrictionLaw {
            family: FrictionFamily::Linear(alpha),
            c_lower: alpha,
            c_upper: alpha,
            eps_prime: 1.0,
            comparison: None,
        }
    }

    pub fn rational_cubic(alpha: f64) -> Self {
        FrictionLaw {
            family: FrictionFamily::RationalCubic(alpha),
            c_lower: 0.5 * alpha,
            c_upper: alpha,
            eps_prime: 1.0,
            comparison: None,
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self.family {
            FrictionFamily::Linear(a) => a * s,
            FrictionFamily::RationalCubic(a) => a * s * s * s / (1.0 + s * s),
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match self.family {
            FrictionFamily::Linear(a) => a,
            FrictionFamily::RationalCubic(a) => {
                let s2 = s * s;
                a * (s2 * s2 + 3.0 * s2) / ((1.0 + s2) * (1.0 + s2))
            }
        }
    }

    /// Slope when `h` is linear.
    pub fn linear_coefficient(&self) -> Option<f64> {
        match self.family {
            FrictionFamily::Linear(a) => Some(a),
            FrictionFamily::RationalCubic(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionReport {
    pub c_lower: f64,
    pub c_upper: f64,
    pub monotone: bool,
    pub ok: bool,
}

/// Estimates `c′`, `c″` as the extreme values of `|h(s)|/|s|` over
/// `eps_prime ≤ |s| ≤ sample_max`, and checks that `h` is nondecreasing on a
/// dense symmetric sample.
pub fn check_friction(
    law: &FrictionLaw,
    eps_prime: f64,
    sample_max: f64,
) -> Result<FrictionReport> {
    if !(eps_prime > 0.0 && eps_prime < sample_max && sample_max.is_finite()) {
        return Err(Error::contract(format!(
            "check_friction needs 0 < eps_prime < sample_max, got {eps_prime}, {sample_max}"
        )));
    }
    let mut c_lower = f64::INFINITY;
    let mut c_upper: f64 = 0.0;
    let step = (sample_max - eps_prime) / (FRICTION_SAMPLES - 1) as f64;
    for i in 0..FRICTION_SAMPLES {
        let s = if i == FRICTION_SAMPLES - 1 {
            sample_max
        } else {
            eps_prime + step * i as f64
        };
        for s in [s, -s] {
            let ratio = law.eval(s).abs() / s.abs();
            c_lower = c_lower.min(ratio);
            c_upper = c_upper.max(ratio);
        }
    }

    let m = 2 * FRICTION_SAMPLES + 1;
    let mut prev = law.eval(-sample_max);
    let mut monotone = true;
    for i in 1..m {
        let s = -sample_max + 2.0 * sample_max * i as f64 / (m - 1) as f64;
        let h = law.eval(s);
        if h < prev - HYPOTHESIS_TOL * (1.0 + prev.abs()) {
            monotone = false;
            break;
        }
        prev = h;
    }
    Ok(FrictionReport {
        c_lower,
        c_upper,
        monotone,
        ok: c_lower > HYPOTHESIS_TOL && monotone,
    })
}

/// Closed-form or tabulated profile for one initial field.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    Zero,
    /// `sin(kπx/L)`.
    Sine(u32),
    /// `cos(kπx/L)`.
    Cosine(u32),
    /// `sin(2πx/L)·(x/L)(1 − x/L)` scaled to unit peak magnitude.
    BubbleSine,
    /// Nodal values read from `source`, one per grid node.
    Nodal {
        source: String,
        values: Vec<f64>,
    },
}

fn bubble_peak() -> f64 {
    // dense sampling of |sin(2πx) x (1-x)| on [0, 1]
    (0..=100_000)
        .map(|i| {
            let x = i as f64 / 100_000.0;
            ((2.0 * PI * x).sin() * x * (1.0 - x)).abs()
        })
        .fold(0.0, f64::max)
}

impl FieldSpec {
    pub fn sample(&self, grid: &Grid, boundary: Boundary) -> Result<Field> {
        let len = grid.length();
        match self {
            FieldSpec::Zero => Ok(grid.zeros(boundary)),
            FieldSpec::Sine(k) => {
                let k = *k as f64;
                Ok(grid.sample(boundary, |x| (k * PI * x / len).sin()))
            }
            FieldSpec::Cosine(k) => {
                let k = *k as f64;
                Ok(grid.sample(boundary, |x| (k * PI * x / len).cos()))
            }
            FieldSpec::BubbleSine => {
                let peak = bubble_peak();
                Ok(grid.sample(boundary, |x| {
                    let y = x / len;
                    (2.0 * PI * y).sin() * y * (1.0 - y) / peak
                }))
            }
            FieldSpec::Nodal { source, values } => {
                if values.len() != grid.points() {
                    return Err(Error::contract(format!(
                        "nodal field `{source}` has {} values, grid has {} nodes",
                        values.len(),
                        grid.points()
                    )));
                }
                let mut v = values.clone();
                if boundary == Boundary::DirichletZero {
                    let scale = 1.0 + v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
                    let n = grid.n();
                    if v[0].abs() > HYPOTHESIS_TOL * scale || v[n].abs() > HYPOTHESIS_TOL * scale {
                        return Err(Error::contract(format!(
                            "nodal field `{source}` must vanish at both ends"
                        )));
                    }
                    v[0] = 0.0;
                    v[n] = 0.0;
                }
                Ok(Field::from_raw(v, boundary))
            }
        }
    }

    fn endpoint_values(&self, length: f64) -> Option<(f64, f64)> {
        match self {
            FieldSpec::Zero | FieldSpec::BubbleSine => Some((0.0, 0.0)),
            FieldSpec::Sine(k) => Some((0.0, (*k as f64 * PI).sin())),
            FieldSpec::Cosine(k) => Some((1.0, (*k as f64 * PI * length / length).cos())),
            FieldSpec::Nodal { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub phi0: FieldSpec,
    pub phi1: FieldSpec,
    pub psi0: FieldSpec,
    pub psi1: FieldSpec,
    pub theta0: FieldSpec,
    pub theta1: FieldSpec,
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData {
            phi0: FieldSpec::Sine(1),
            phi1: FieldSpec::Zero,
            psi0: FieldSpec::BubbleSine,
            psi1: FieldSpec::Zero,
            theta0: FieldSpec::Cosine(1),
            theta1: FieldSpec::Zero,
        }
    }
}

/// The six sampled initial fields `(φ0, φ1, ψ0, ψ1, θ0, θ1)`.
pub struct SampledInitialData {
    pub phi0: Field,
    pub phi1: Field,
    pub psi0: Field,
    pub psi1: Field,
    pub theta0: Field,
    pub theta1: Field,
}

impl InitialData {
    /// Samples all fields and checks boundary compatibility: Dirichlet fields
    /// must vanish at the ends, θ fields must have a vanishing (second-order,
    /// one-sided) derivative there up to `O(dx²)`.
    pub fn sample(&self, grid: &Grid) -> Result<SampledInitialData> {
        let d = Boundary::DirichletZero;
        for (name, spec) in [
            ("phi0", &self.phi0),
            ("phi1", &self.phi1),
            ("psi0", &self.psi0),
            ("psi1", &self.psi1),
        ] {
            if let Some((a, b)) = spec.endpoint_values(grid.length()) {
                if a.abs() > HYPOTHESIS_TOL || b.abs() > HYPOTHESIS_TOL {
                    return Err(Error::contract(format!(
                        "{name} must vanish at x = 0 and x = L"
                    )));
                }
            }
        }
        let sampled = SampledInitialData {
            phi0: self.phi0.sample(grid, d)?,
            phi1: self.phi1.sample(grid, d)?,
            psi0: self.psi0.sample(grid, d)?,
            psi1: self.psi1.sample(grid, d)?,
            theta0: self.theta0.sample(grid, Boundary::NeumannZero)?,
            theta1: self.theta1.sample(grid, Boundary::NeumannZero)?,
        };
        for (name, f) in [("theta0", &sampled.theta0), ("theta1", &sampled.theta1)] {
            check_neumann_compatible(grid, name, f)?;
        }
        Ok(sampled)
    }
}

fn check_neumann_compatible(grid: &Grid, name: &str, f: &Field) -> Result<()> {
    let u = f.values();
    let n = grid.n();
    let h = grid.dx();
    let left = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
    let right = (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * h);
    let tol = (10.0 * h * h).max(HYPOTHESIS_TOL) * (1.0 + f.max_abs()) / grid.length();
    if left.abs() > tol || right.abs() > tol {
        return Err(Error::contract(format!(
            "{name} violates the Neumann condition: boundary slopes {left:.3e}, {right:.3e}"
        )));
    }
    Ok(())
}

/// How the integrator evaluates the memory convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MemoryMethod {
    /// Recursive for exponential kernels, direct history quadrature otherwise.
    #[default]
    Auto,
    Direct,
    Recursive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub coefficients: Coefficients,
    pub kernel: MemoryKernel,
    pub friction: FrictionLaw,
    pub initial: InitialData,
    /// Number of grid cells.
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    /// Record diagnostics every `stride` steps.
    pub stride: usize,
    pub eps_trunc: f64,
    pub weights: LyapunovWeights,
    pub memory_method: MemoryMethod,
    pub override_hypotheses: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            coefficients: Coefficients::default(),
            kernel: MemoryKernel::Exponential { a: 0.5, b: 1.0 },
            friction: FrictionLaw::linear(1.0),
            initial: InitialData::default(),
            n: 64,
            dt: 1e-3,
            t_final: 5.0,
            stride: 10,
            eps_trunc: 0.0,
            weights: LyapunovWeights::default(),
            memory_method: MemoryMethod::Auto,
            override_hypotheses: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.coefficients.validate()?;
        if self.n < 4 {
            return Err(Error::contract(format!(
                "grid.n must be >= 4, got {}",
                self.n
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::contract(format!(
                "time.dt must be > 0, got {}",
                self.dt
            )));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::contract(format!(
                "time.T must be >= 0, got {}",
                self.t_final
            )));
        }
        if self.stride == 0 {
            return Err(Error::contract("output.stride must be >= 1"));
        }
        if !(self.eps_trunc >= 0.0) {
            return Err(Error::contract(format!(
                "memory.eps_trunc must be >= 0, got {}",
                self.eps_trunc
            )));
        }
        self.weights.validate()?;
        if self.memory_method == MemoryMethod::Recursive
            && !matches!(
                self.kernel,
                MemoryKernel::Exponential { .. } | MemoryKernel::Zero
            )
        {
            return Err(Error::contract(
                "recursive memory evaluation needs an exponential kernel",
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n, self.coefficients.length)
    }

    /// Runs [`check_kernel`] and [`check_friction`] (on `[ε′, 100·ε′]`) and
    /// returns a hypothesis error unless both pass or the override is set.
    pub fn check_hypotheses(&self) -> Result<()> {
        if self.override_hypotheses {
            return Ok(());
        }
        let kr = check_kernel(&self.kernel);
        if !kr.ok {
            return Err(Error::Hypothesis(format!(
                "kernel: {}",
                kr.reasons.join("; ")
            )));
        }
        let eps = self.friction.eps_prime;
        let fr = check_friction(&self.friction, eps, 100.0 * eps)?;
        if !fr.ok {
            return Err(Error::Hypothesis(format!(
                "friction law: c_lower = {}, monotone = {}",
                fr.c_lower, fr.monotone
            )));
        }
        Ok(())
    }
}
