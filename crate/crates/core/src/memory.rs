//! History of ψ and the memory integrals built from it: the convolution
//! `∫₀ᵗ g(t−s) ψ(s) ds` and the energy term
//! `g∘ψ_x = ∫₀ᴸ ∫₀ᵗ g(t−s) (ψ_x(t) − ψ_x(s))² ds dx`.
//!
//! Two evaluators are provided. [`HistoryBuffer`] stores every accepted level
//! and applies the trapezoid rule in `s` with any kernel. For exponential
//! kernels [`RecursiveConvolution`] carries the same trapezoid sums forward in
//! O(1) work per step using `g(s + dt) = e^{−b dt} g(s)`.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::grid::{grad_inner_slice, Boundary, Field, Grid};
use crate::model::MemoryKernel;

/// Past levels `(t_k, ψ(t_k))` of the rotation angle.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryBuffer {
    dx: f64,
    points: usize,
    horizon: Option<f64>,
    levels: VecDeque<(f64, Vec<f64>)>,
}

impl HistoryBuffer {
    /// Buffer whose horizon drops levels with `g(t − s) < eps_trunc·g(0)`.
    /// `eps_trunc = 0` keeps everything.
    pub fn new(grid: &Grid, kernel: &MemoryKernel, eps_trunc: f64) -> Result<Self> {
        if !(eps_trunc >= 0.0) {
            return Err(Error::contract(format!(
                "eps_trunc must be >= 0, got {eps_trunc}"
            )));
        }
        Ok(Self::with_horizon(
            grid,
            kernel.truncation_horizon(eps_trunc),
        ))
    }

    pub fn with_horizon(grid: &Grid, horizon: Option<f64>) -> Self {
        HistoryBuffer {
            dx: grid.dx(),
            points: grid.points(),
            horizon,
            levels: VecDeque::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn horizon(&self) -> Option<f64> {
        self.horizon
    }

    pub fn times(&self) -> Vec<f64> {
        self.levels.iter().map(|(t, _)| *t).collect()
    }

    pub fn last_time(&self) -> Option<f64> {
        self.levels.back().map(|(t, _)| *t)
    }

    pub fn push(&mut self, t: f64, psi: &Field) -> Result<()> {
        if psi.len() != self.points || psi.boundary() != Boundary::DirichletZero {
            return Err(Error::contract(
                "history snapshots must be DirichletZero fields on the buffer's grid",
            ));
        }
        if let Some(last) = self.last_time() {
            if !(t > last) {
                return Err(Error::contract(format!(
                    "history times must increase: {t} after {last}"
                )));
            }
        }
        self.levels.push_back((t, psi.values().to_vec()));
        if let Some(h) = self.horizon {
            while self.levels.front().is_some_and(|(s, _)| t - s > h) {
                self.levels.pop_front();
            }
        }
        Ok(())
    }

    fn check_time(&self, t: f64) -> Result<()> {
        match self.last_time() {
            Some(last) if t < last => Err(Error::contract(format!(
                "memory evaluated at t = {t}, before the last stored level {last}"
            ))),
            None if t != 0.0 => Err(Error::contract(format!(
                "empty history evaluated at t = {t} > 0"
            ))),
            _ => Ok(()),
        }
    }

    /// Trapezoid weights in `s` times `f(t − s_k)`.
    fn weights(&self, t: f64, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let m = self.levels.len();
        let times: Vec<f64> = self.levels.iter().map(|(s, _)| *s).collect();
        (0..m)
            .map(|k| {
                let left = if k > 0 { times[k] - times[k - 1] } else { 0.0 };
                let right = if k + 1 < m {
                    times[k + 1] - times[k]
                } else {
                    0.0
                };
                0.5 * (left + right) * f(t - times[k])
            })
            .collect()
    }

    /// `∫ g(t−s) ψ(s) ds` over the stored levels, nodally.
    pub fn convolve(&self, kernel: &MemoryKernel, t: f64) -> Result<Field> {
        self.check_time(t)?;
        let mut out = vec![0.0; self.points];
        let w = self.weights(t, |age| kernel.eval_unchecked(age));
        for ((_, psi), wk) in self.levels.iter().zip(w) {
            if wk != 0.0 {
                for (o, p) in out.iter_mut().zip(psi) {
                    *o += wk * p;
                }
            }
        }
        Ok(Field::from_raw(out, Boundary::DirichletZero))
    }

    /// `Σ_k ω_k f(t − s_k) ‖D+(ψ_now − ψ_k)‖²`.
    fn weighted_deviation(&self, t: f64, psi_now: &Field, f: impl Fn(f64) -> f64) -> Result<f64> {
        self.check_time(t)?;
        if psi_now.len() != self.points {
            return Err(Error::contract(
                "psi_now lives on a different grid than the history",
            ));
        }
        let now = psi_now.values();
        let w = self.weights(t, f);
        let mut diff = vec![0.0; self.points];
        let mut acc = 0.0;
        for ((_, psi), wk) in self.levels.iter().zip(w) {
            if wk == 0.0 {
                continue;
            }
            for ((d, a), b) in diff.iter_mut().zip(now).zip(psi) {
                *d = a - b;
            }
            acc += wk * grad_inner_slice(&diff, &diff, self.dx);
        }
        Ok(acc)
    }

    /// `g∘ψ_x` at time `t` for the current angle `psi_now`.
    pub fn g_circ(&self, kernel: &MemoryKernel, t: f64, psi_now: &Field) -> Result<f64> {
        self.weighted_deviation(t, psi_now, |age| kernel.eval_unchecked(age))
    }

    /// The same history sum with `g'` in place of `g`.
    pub fn g_prime_circ(&self, kernel: &MemoryKernel, t: f64, psi_now: &Field) -> Result<f64> {
        self.weighted_deviation(t, psi_now, |age| kernel.derivative_unchecked(age))
    }
}

/// Trapezoid-in-time convolution for `g(s) = a·e^{−bs}`, updated recursively.
///
/// Besides `w ≈ ∫ g(t−s) ψ(s) ds` it carries the scalar sums
/// `Σ ω_k g(t−t_k)` and `Σ ω_k g(t−t_k) ‖D+ψ_k‖²`, which reproduce the
/// trapezoid value of `g∘ψ_x` without storing the history.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursiveConvolution {
    a: f64,
    b: f64,
    t: f64,
    dx: f64,
    w: Vec<f64>,
    psi_last: Vec<f64>,
    grad_last: f64,
    mass: f64,
    moment: f64,
}

impl RecursiveConvolution {
    /// Accumulator seeded with a single level `ψ(t0)`; the convolution is zero.
    pub fn new(kernel: &MemoryKernel, grid: &Grid, t0: f64, psi0: &Field) -> Result<Self> {
        let (a, b) = match kernel {
            MemoryKernel::Exponential { a, b } => (*a, *b),
            MemoryKernel::Zero => (0.0, 1.0),
            MemoryKernel::Tabulated(_) => {
                return Err(Error::contract(
                    "recursive convolution needs an exponential kernel",
                ))
            }
        };
        if psi0.len() != grid.points() {
            return Err(Error::contract("psi0 lives on a different grid"));
        }
        let psi_last = psi0.values().to_vec();
        Ok(RecursiveConvolution {
            a,
            b,
            t: t0,
            dx: grid.dx(),
            grad_last: grad_inner_slice(&psi_last, &psi_last, grid.dx()),
            w: vec![0.0; grid.points()],
            psi_last,
            mass: 0.0,
            moment: 0.0,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn w(&self) -> Field {
        Field::from_raw(self.w.clone(), Boundary::DirichletZero)
    }

    /// `w ← e^{−b dt} w + (dt/2)·a·(ψ_new + e^{−b dt} ψ_old)`.
    pub fn recursive_update(&self, psi_new: &Field, dt: f64) -> Result<Self> {
        let mut next = self.clone();
        next.advance(psi_new, dt)?;
        Ok(next)
    }

    pub fn advance(&mut self, psi_new: &Field, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::contract(format!("dt must be > 0, got {dt}")));
        }
        if psi_new.len() != self.w.len() {
            return Err(Error::contract("psi_new lives on a different grid"));
        }
        let decay = (-self.b * dt).exp();
        let half = 0.5 * dt * self.a;
        let new = psi_new.values();
        for ((w, p_new), p_old) in self.w.iter_mut().zip(new).zip(&self.psi_last) {
            *w = decay * *w + half * (p_new + decay * p_old);
        }
        let grad_new = grad_inner_slice(new, new, self.dx);
        self.mass = decay * self.mass + half * (1.0 + decay);
        self.moment = decay * self.moment + half * (grad_new + decay * self.grad_last);
        self.psi_last.copy_from_slice(new);
        self.grad_last = grad_new;
        self.t += dt;
        Ok(())
    }

    /// Trapezoid value of `g∘ψ_x` at the accumulator's time.
    pub fn g_circ(&self, psi_now: &Field) -> Result<f64> {
        if psi_now.len() != self.w.len() {
            return Err(Error::contract("psi_now lives on a different grid"));
        }
        let p = psi_now.values();
        let value = self.mass * grad_inner_slice(p, p, self.dx)
            - 2.0 * grad_inner_slice(p, &self.w, self.dx)
            + self.moment;
        // the expansion cancels to round-off when ψ is nearly constant in time
        Ok(value.max(0.0))
    }

    /// `Σ ω_k g'(t−t_k) ‖D+(ψ − ψ_k)‖² = −b·g∘ψ_x`.
    pub fn g_prime_circ(&self, psi_now: &Field) -> Result<f64> {
        Ok(-self.b * self.g_circ(psi_now)?)
    }
}

/// Whichever memory evaluator a run uses.
#[derive(Debug, Clone, PartialEq)]
pub enum MemoryState {
    Direct(HistoryBuffer),
    Recursive(RecursiveConvolution),
}

impl MemoryState {
    pub fn push(&mut self, t: f64, psi: &Field, dt: f64) -> Result<()> {
        match self {
            MemoryState::Direct(h) => h.push(t, psi),
            MemoryState::Recursive(r) => r.advance(psi, dt),
        }
    }

    pub fn convolution(&self, kernel: &MemoryKernel, t: f64) -> Result<Field> {
        match self {
            MemoryState::Direct(h) => h.convolve(kernel, t),
            MemoryState::Recursive(r) => Ok(r.w()),
        }
    }

    pub fn g_circ(&self, kernel: &MemoryKernel, t: f64, psi: &Field) -> Result<f64> {
        match self {
            MemoryState::Direct(h) => h.g_circ(kernel, t, psi),
            MemoryState::Recursive(r) => r.g_circ(psi),
        }
    }

    pub fn g_prime_circ(&self, kernel: &MemoryKernel, t: f64, psi: &Field) -> Result<f64> {
        match self {
            MemoryState::Direct(h) => h.g_prime_circ(kernel, t, psi),
            MemoryState::Recursive(r) => r.g_prime_circ(psi),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn exp05() -> MemoryKernel {
        MemoryKernel::exponential(0.5, 1.0).unwrap()
    }

    fn grid() -> Grid {
        Grid::new(32, 1.0).unwrap()
    }

    #[test]
    fn push_examples() {
        let g = grid();
        let mut h = HistoryBuffer::new(&g, &exp05(), 0.0).unwrap();
        let z = g.zeros(Boundary::DirichletZero);
        h.push(0.0, &z).unwrap();
        assert_eq!(h.len(), 1);
        h.push(0.1, &z).unwrap();
        assert_eq!(h.times(), vec![0.0, 0.1]);
        assert!(matches!(h.push(0.1, &z), Err(Error::Contract(_))));
        assert!(h.push(0.2, &g.zeros(Boundary::NeumannZero)).is_err());
    }

    #[test]
    fn truncation_drops_old_levels() {
        let g = grid();
        // g(1) = e^{-1} g(0), so this threshold puts the horizon at 1
        let mut h = HistoryBuffer::new(&g, &exp05(), (-1.0f64).exp()).unwrap();
        assert!((h.horizon().unwrap() - 1.0).abs() < 1e-14);
        let z = g.zeros(Boundary::DirichletZero);
        for k in 0..20 {
            h.push(k as f64 * 0.1, &z).unwrap();
        }
        h.push(2.0, &z).unwrap();
        assert!(h.times().iter().all(|s| *s >= 1.0 - 1e-12));
        assert_eq!(h.times()[0], 1.0);
    }

    #[test]
    fn convolve_at_zero_is_zero() {
        let g = grid();
        let h = HistoryBuffer::new(&g, &exp05(), 0.0).unwrap();
        assert_eq!(h.convolve(&exp05(), 0.0).unwrap().max_abs(), 0.0);
        assert!(h.convolve(&exp05(), 0.5).is_err());
    }

    #[test]
    fn convolve_constant_history_is_mass_times_psi() {
        let g = grid();
        let kernel = exp05();
        let psi = g.sample(Boundary::DirichletZero, |x| (PI * x).sin());
        let mut h = HistoryBuffer::new(&g, &kernel, 0.0).unwrap();
        let dt = 0.01;
        for k in 0..=200 {
            h.push(k as f64 * dt, &psi).unwrap();
        }
        let t = 2.0;
        let c = h.convolve(&kernel, t).unwrap();
        let m = kernel.mass(t).unwrap();
        for (ci, pi) in c.values().iter().zip(psi.values()) {
            // trapezoid error bound dt²/12·max|g''|·t
            assert!((ci - m * pi).abs() <= dt * dt / 12.0 * 0.5 * t + 1e-15);
        }
        assert_eq!(h.g_circ(&kernel, t, &psi).unwrap(), 0.0);
    }

    /// `∫₀ᵗ 0.5 e^{−(t−s)} sin s ds`.
    fn sine_convolution(t: f64) -> f64 {
        0.5 * (t.sin() - t.cos() + (-t).exp()) / 2.0
    }

    #[test]
    fn sine_convolution_closed_form_cross_check() {
        // fine composite Simpson as an independent check of the closed form
        let t = 1.7;
        let m = 2000;
        let h = t / m as f64;
        let f = |s: f64| 0.5 * (-(t - s)).exp() * s.sin();
        let simpson: f64 = (0..=m)
            .map(|i| {
                let w = if i == 0 || i == m {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                w * f(i as f64 * h)
            })
            .sum::<f64>()
            * h
            / 3.0;
        assert!((simpson - sine_convolution(t)).abs() < 1e-12);
    }

    #[test]
    fn g_circ_linear_history_matches_closed_form() {
        // ψ = sin(πx)·s: g∘ = ‖D+ sin‖²·∫₀ᵗ 0.5 e^{−r} r² dr
        let g = Grid::new(64, 1.0).unwrap();
        let kernel = exp05();
        let shape = g.sample(Boundary::DirichletZero, |x| (PI * x).sin());
        let dt = 1e-3;
        let t = 1.0;
        let mut h = HistoryBuffer::new(&g, &kernel, 0.0).unwrap();
        for k in 0..=1000 {
            h.push(k as f64 * dt, &shape.scaled(k as f64 * dt)).unwrap();
        }
        let now = shape.scaled(t);
        let time_part = 0.5 * (2.0 - (-t).exp() * (t * t + 2.0 * t + 2.0));
        let exact = PI * PI / 2.0 * time_part;
        // ‖D+ sin(πx)‖² = 2 sin²(π dx/2)/dx² carries the O(dx²) part exactly
        let dx = g.dx();
        let discrete = 2.0 * (PI * dx / 2.0).sin().powi(2) / (dx * dx) * time_part;
        let got = h.g_circ(&kernel, t, &now).unwrap();
        assert!(
            (got - discrete).abs() / discrete < 1e-6,
            "{got} vs {discrete}"
        );
        assert!((got - exact).abs() / exact < PI * PI / 12.0 * dx * dx * 1.01);
        let d = h.g_prime_circ(&kernel, t, &now).unwrap();
        assert!((d + got).abs() < 1e-12);
    }

    fn manufactured_errors(dt: f64) -> (f64, f64, f64) {
        let g = grid();
        let kernel = exp05();
        let shape = g.sample(Boundary::DirichletZero, |x| (PI * x).sin());
        let t_end = 2.0;
        let steps = (t_end / dt).round() as usize;
        let mut h = HistoryBuffer::new(&g, &kernel, 0.0).unwrap();
        h.push(0.0, &shape.scaled(0.0)).unwrap();
        let mut r = RecursiveConvolution::new(&kernel, &g, 0.0, &shape.scaled(0.0)).unwrap();
        for k in 1..=steps {
            let t = k as f64 * dt;
            let psi = shape.scaled(t.sin());
            h.push(t, &psi).unwrap();
            r.advance(&psi, dt).unwrap();
        }
        let exact = shape.scaled(sine_convolution(t_end));
        let direct = h.convolve(&kernel, t_end).unwrap();
        let rec = r.w();
        let err = |f: &Field| f.axpy(-1.0, &exact).unwrap().max_abs();
        let mutual = direct.axpy(-1.0, &rec).unwrap().max_abs();
        (err(&direct), err(&rec), mutual)
    }

    #[test]
    fn manufactured_convolution_second_order() {
        let (d1, r1, m1) = manufactured_errors(0.02);
        let (d2, r2, _) = manufactured_errors(0.01);
        assert!((d1 / d2).log2() >= 1.9);
        assert!((r1 / r2).log2() >= 1.9);
        assert!(m1 <= d1 + r1);
    }

    #[test]
    fn recursive_constant_history_limit() {
        let g = grid();
        let kernel = MemoryKernel::exponential(0.5, 2.0).unwrap();
        let psi = g.sample(Boundary::DirichletZero, |x| x * (1.0 - x));
        let mut r = RecursiveConvolution::new(&kernel, &g, 0.0, &psi).unwrap();
        let dt = 1e-3;
        for _ in 0..3000 {
            r.advance(&psi, dt).unwrap();
        }
        let t: f64 = 3.0;
        let factor = 0.25 * (1.0 - (-2.0 * t).exp());
        for (w, p) in r.w().values().iter().zip(psi.values()) {
            assert!((w - factor * p).abs() < 1e-6);
        }
        assert!(r.g_circ(&psi).unwrap() < 1e-12);
    }

    #[test]
    fn recursive_rejects_tabulated() {
        let g = grid();
        let tab = crate::model::TabulatedKernel::new(vec![0.0, 1.0], vec![0.5, 0.2], 1.0).unwrap();
        let z = g.zeros(Boundary::DirichletZero);
        assert!(RecursiveConvolution::new(&MemoryKernel::Tabulated(tab), &g, 0.0, &z).is_err());
        let r = RecursiveConvolution::new(&exp05(), &g, 0.0, &z).unwrap();
        let r = r.recursive_update(&z, 0.1).unwrap();
        assert_eq!(r.w().max_abs(), 0.0);
        assert!(r.recursive_update(&z, 0.0).is_err());
    }

    #[test]
    fn truncation_error_bound() {
        let g = grid();
        let kernel = exp05();
        let eps = 1e-2;
        let shape = g.sample(Boundary::DirichletZero, |x| (PI * x).sin());
        let mut full = HistoryBuffer::new(&g, &kernel, 0.0).unwrap();
        let mut cut = HistoryBuffer::new(&g, &kernel, eps).unwrap();
        let dt = 0.01;
        let t_end = 8.0;
        for k in 0..=800 {
            let t = k as f64 * dt;
            let psi = shape.scaled((3.0 * t).cos());
            full.push(t, &psi).unwrap();
            cut.push(t, &psi).unwrap();
        }
        assert!(cut.len() < full.len());
        let diff = full
            .convolve(&kernel, t_end)
            .unwrap()
            .axpy(-1.0, &cut.convolve(&kernel, t_end).unwrap())
            .unwrap()
            .max_abs();
        assert!(diff <= eps * 0.5 * t_end * 1.0, "{diff}");
    }

    fn level(interior: &[f64]) -> Field {
        let mut v = vec![0.0];
        v.extend_from_slice(interior);
        v.push(0.0);
        Field::from_raw(v, Boundary::DirichletZero)
    }

    proptest! {
        #[test]
        fn g_circ_nonnegative_and_recursion_matches_direct(
            data in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 7), 2..12),
        ) {
            let g = Grid::new(8, 1.0).unwrap();
            let kernel = MemoryKernel::exponential(0.8, 1.5).unwrap();
            let dt = 0.1;
            let mut h = HistoryBuffer::new(&g, &kernel, 0.0).unwrap();
            let first = level(&data[0]);
            h.push(0.0, &first).unwrap();
            let mut r = RecursiveConvolution::new(&kernel, &g, 0.0, &first).unwrap();
            for (k, d) in data.iter().enumerate().skip(1) {
                let psi = level(d);
                h.push(k as f64 * dt, &psi).unwrap();
                r.advance(&psi, dt).unwrap();
            }
            let t = (data.len() - 1) as f64 * dt;
            let now = level(&data[data.len() - 1]);
            let direct = h.g_circ(&kernel, t, &now).unwrap();
            prop_assert!(direct >= 0.0);
            prop_assert!((direct - r.g_circ(&now).unwrap()).abs() < 1e-10 * (1.0 + direct));
            let c = h.convolve(&kernel, t).unwrap();
            let diff = c.axpy(-1.0, &r.w()).unwrap().max_abs();
            prop_assert!(diff < 1e-12);
        }

        #[test]
        fn convolve_is_linear_in_history(
            a in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 7), 4),
            b in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 7), 4),
        ) {
            let g = Grid::new(8, 1.0).unwrap();
            let kernel = exp05();
            let mut ha = HistoryBuffer::new(&g, &kernel, 0.0).unwrap();
            let mut hb = ha.clone();
            let mut hs = ha.clone();
            for k in 0..4 {
                let (fa, fb) = (level(&a[k]), level(&b[k]));
                let t = 0.25 * k as f64;
                ha.push(t, &fa).unwrap();
                hb.push(t, &fb).unwrap();
                hs.push(t, &fa.axpy(1.0, &fb).unwrap()).unwrap();
            }
            let sum = ha.convolve(&kernel, 0.75).unwrap()
                .axpy(1.0, &hb.convolve(&kernel, 0.75).unwrap()).unwrap();
            let diff = sum.axpy(-1.0, &hs.convolve(&kernel, 0.75).unwrap()).unwrap().max_abs();
            prop_assert!(diff < 1e-14);
        }
    }
}
