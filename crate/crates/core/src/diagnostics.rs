//! Energy, dissipation rate, the energy-identity residual, the Lyapunov
//! functionals `I1..I4` and `L`, the weight inequalities, `L/E` equivalence
//! ratios and exponential decay fits.
//!
//! With `G(t) = ∫₀ᵗ g` and `D+` the forward difference,
//!
//! ```text
//! 2E = ρ1‖u‖² + ρ2‖v‖² + ρ3‖z‖² + k1·S(φ,ψ) + δ‖D+θ‖² + (k2 − G(t))‖D+ψ‖² + g∘ψ_x
//! S(φ,ψ) = ‖D+φ‖² + 2(Dcφ, ψ) + ‖ψ‖²
//! D = −μ‖u‖² − ½g(t)‖D+ψ‖² − β‖D+z‖² − (h(v), v) + ½ g'∘ψ_x
//! ```
//!
//! `S` is the discrete `‖φ_x + ψ‖²` matched to the right-hand-side stencils;
//! the semi-discrete system satisfies `E' = D` exactly when the memory term is
//! exact.

use crate::error::{Error, Result};
use crate::grid::{grad_inner_slice, inner_slice, trapezoid, Grid};
use crate::integrator::State;
use crate::memory::MemoryState;
use crate::model::{FrictionLaw, MemoryKernel, SimConfig};

/// Weights and Young's-inequality constants of `L = N·E + Σ N_i I_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovWeights {
    pub n: f64,
    pub n1: f64,
    pub n2: f64,
    pub n3: f64,
    pub n4: f64,
    pub epsilon: f64,
    pub epsilon7: f64,
    pub epsilon8: f64,
    pub epsilon9: f64,
    pub c: f64,
    pub c7: f64,
    pub c8: f64,
    pub c9: f64,
    pub c_prime: f64,
}

const FEASIBLE_WEIGHTS: &str = include_str!("../fixtures/lyapunov_weights.txt");

impl Default for LyapunovWeights {
    /// The feasible tuple recorded in `fixtures/lyapunov_weights.txt`.
    fn default() -> Self {
        LyapunovWeights::parse(FEASIBLE_WEIGHTS).expect("bundled weight fixture is valid")
    }
}

impl LyapunovWeights {
    pub const KEYS: [&'static str; 14] = [
        "N", "N1", "N2", "N3", "N4", "epsilon", "epsilon7", "epsilon8", "epsilon9", "c", "c7",
        "c8", "c9", "c_prime",
    ];

    pub fn get(&self, key: &str) -> Option<f64> {
        Some(match key {
            "N" => self.n,
            "N1" => self.n1,
            "N2" => self.n2,
            "N3" => self.n3,
            "N4" => self.n4,
            "epsilon" => self.epsilon,
            "epsilon7" => self.epsilon7,
            "epsilon8" => self.epsilon8,
            "epsilon9" => self.epsilon9,
            "c" => self.c,
            "c7" => self.c7,
            "c8" => self.c8,
            "c9" => self.c9,
            "c_prime" => self.c_prime,
            _ => return None,
        })
    }

    /// Sets one named constant; `false` for an unknown key.
    pub fn set(&mut self, key: &str, value: f64) -> bool {
        let slot = match key {
            "N" => &mut self.n,
            "N1" => &mut self.n1,
            "N2" => &mut self.n2,
            "N3" => &mut self.n3,
            "N4" => &mut self.n4,
            "epsilon" => &mut self.epsilon,
            "epsilon7" => &mut self.epsilon7,
            "epsilon8" => &mut self.epsilon8,
            "epsilon9" => &mut self.epsilon9,
            "c" => &mut self.c,
            "c7" => &mut self.c7,
            "c8" => &mut self.c8,
            "c9" => &mut self.c9,
            "c_prime" => &mut self.c_prime,
            _ => return false,
        };
        *slot = value;
        true
    }

    /// Reads `key = value` lines (keys as in [`Self::KEYS`]); `#` starts a comment.
    /// Every key must be present.
    pub fn parse(text: &str) -> Result<Self> {
        let mut w = LyapunovWeights {
            n: f64::NAN,
            n1: f64::NAN,
            n2: f64::NAN,
            n3: f64::NAN,
            n4: f64::NAN,
            epsilon: f64::NAN,
            epsilon7: f64::NAN,
            epsilon8: f64::NAN,
            epsilon9: f64::NAN,
            c: f64::NAN,
            c7: f64::NAN,
            c8: f64::NAN,
            c9: f64::NAN,
            c_prime: f64::NAN,
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse { line: i + 1, msg };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected `key = value`, got `{line}`")))?;
            let value: f64 = v
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("`{}` is not a number", v.trim())))?;
            if !w.set(k.trim(), value) {
                return Err(parse_err(format!("unknown weight `{}`", k.trim())));
            }
        }
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for key in Self::KEYS {
            let v = self.get(key).unwrap();
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::contract(format!(
                    "weight {key} must be > 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// One recorded diagnostic level of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord {
    pub t: f64,
    pub energy: f64,
    pub dissipation: f64,
    /// Largest step-wise identity residual since the previous record.
    pub residual: f64,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    pub lyapunov: f64,
    pub mean_z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovTerms {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
}

fn grid_of(state: &State, cfg: &SimConfig) -> Result<Grid> {
    let grid = Grid::new(state.points().saturating_sub(1), cfg.coefficients.length)?;
    if state.points() != cfg.n + 1 {
        return Err(Error::contract(format!(
            "state has {} nodes, configuration has n = {}",
            state.points(),
            cfg.n
        )));
    }
    Ok(grid)
}

/// `Σ_{interior} dx·(Dc a)_j·b_j`: `(Dc a, b)` for `b` vanishing at the ends.
fn centered_inner(a: &[f64], b: &[f64]) -> f64 {
    // dx·(a_{j+1} − a_{j−1})/(2dx) = (a_{j+1} − a_{j−1})/2
    let n = a.len() - 1;
    (1..n).map(|j| 0.5 * (a[j + 1] - a[j - 1]) * b[j]).sum()
}

pub fn energy(state: &State, memory: &MemoryState, cfg: &SimConfig) -> Result<f64> {
    let grid = grid_of(state, cfg)?;
    let c = &cfg.coefficients;
    let h = grid.dx();
    let (phi, psi) = (state.phi.values(), state.psi.values());
    let shear =
        grad_inner_slice(phi, phi, h) + 2.0 * centered_inner(phi, psi) + inner_slice(psi, psi, h);
    let g_mass = cfg.kernel.mass(state.t)?;
    let g_circ = memory.g_circ(&cfg.kernel, state.t, &state.psi)?;
    let twice = c.rho1 * inner_slice(state.u.values(), state.u.values(), h)
        + c.rho2 * inner_slice(state.v.values(), state.v.values(), h)
        + c.rho3 * inner_slice(state.z.values(), state.z.values(), h)
        + c.k1 * shear
        + c.delta * grad_inner_slice(state.theta.values(), state.theta.values(), h)
        + (c.k2 - g_mass) * grad_inner_slice(psi, psi, h)
        + g_circ;
    Ok(0.5 * twice)
}

pub fn dissipation(state: &State, memory: &MemoryState, cfg: &SimConfig) -> Result<f64> {
    let grid = grid_of(state, cfg)?;
    let c = &cfg.coefficients;
    let h = grid.dx();
    let (u, v, z, psi) = (
        state.u.values(),
        state.v.values(),
        state.z.values(),
        state.psi.values(),
    );
    let friction: Vec<f64> = v.iter().map(|s| cfg.friction.eval(*s)).collect();
    let g_t = cfg.kernel.eval(state.t)?;
    let g_prime = memory.g_prime_circ(&cfg.kernel, state.t, &state.psi)?;
    Ok(-c.mu * inner_slice(u, u, h)
        - 0.5 * g_t * grad_inner_slice(psi, psi, h)
        - c.beta * grad_inner_slice(z, z, h)
        - inner_slice(&friction, v, h)
        + 0.5 * g_prime)
}

/// `|(E1 − E0)/dt − (D0 + D1)/2| / (E_initial + |(D0 + D1)/2|)`, or 0 when
/// both numerator and denominator vanish.
pub fn identity_residual(
    e_prev: f64,
    d_prev: f64,
    e_next: f64,
    d_next: f64,
    dt: f64,
    e_initial: f64,
) -> f64 {
    let d_mid = 0.5 * (d_prev + d_next);
    let num = ((e_next - e_prev) / dt - d_mid).abs();
    let den = e_initial + d_mid.abs();
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn lyapunov_terms(
    state: &State,
    memory: &MemoryState,
    cfg: &SimConfig,
) -> Result<LyapunovTerms> {
    let grid = grid_of(state, cfg)?;
    let h = grid.dx();
    let conv = memory.convolution(&cfg.kernel, state.t)?;
    let g_mass = cfg.kernel.mass(state.t)?;
    let (phi, u, psi, v) = (
        state.phi.values(),
        state.u.values(),
        state.psi.values(),
        state.v.values(),
    );
    let relative: Vec<f64> = psi
        .iter()
        .zip(conv.values())
        .map(|(p, w)| g_mass * p - w)
        .collect();
    let i1 = -inner_slice(v, &relative, h);
    let i2 = centered_inner(phi, v) + inner_slice(v, psi, h) + centered_inner(psi, u)
        - centered_inner(conv.values(), u);
    let i3 = -inner_slice(state.theta.values(), state.z.values(), h);
    let i4 = -inner_slice(psi, v, h) - inner_slice(phi, u, h);
    Ok(LyapunovTerms { i1, i2, i3, i4 })
}

pub fn lyapunov_l(weights: &LyapunovWeights, energy: f64, terms: &LyapunovTerms) -> f64 {
    weights.n * energy
        + weights.n1 * terms.i1
        + weights.n2 * terms.i2
        + weights.n3 * terms.i3
        + weights.n4 * terms.i4
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Probe {
    pub energy: f64,
    pub dissipation: f64,
}

pub(crate) fn probe(state: &State, memory: &MemoryState, cfg: &SimConfig) -> Result<Probe> {
    Ok(Probe {
        energy: energy(state, memory, cfg)?,
        dissipation: dissipation(state, memory, cfg)?,
    })
}

pub(crate) fn record(
    state: &State,
    memory: &MemoryState,
    cfg: &SimConfig,
    probe: Probe,
    residual: f64,
) -> Result<EnergyRecord> {
    let terms = lyapunov_terms(state, memory, cfg)?;
    let h = cfg.coefficients.length / cfg.n as f64;
    Ok(EnergyRecord {
        t: state.t,
        energy: probe.energy,
        dissipation: probe.dissipation,
        residual,
        i1: terms.i1,
        i2: terms.i2,
        i3: terms.i3,
        i4: terms.i4,
        lyapunov: lyapunov_l(&cfg.weights, probe.energy, &terms),
        mean_z: trapezoid(state.z.values(), h),
    })
}

/// Left sides of the six weight conditions at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightCheck {
    pub values: [f64; 6],
}

impl WeightCheck {
    pub fn passed(&self) -> [bool; 6] {
        self.values.map(|v| v > 0.0)
    }

    pub fn all(&self) -> bool {
        self.values.iter().all(|v| *v > 0.0)
    }
}

/// Evaluates, with `G = ∫₀ᵗ g`, `c′ = min(weights.c_prime, friction.c_lower)`
/// and `ξ` the kernel's decay rate at `t`,
///
/// ```text
/// 1. N − N2 c7 (ε + 1/ε) + N4 (1 − ε8)
/// 2. N − N1 ε − N2 ε7/ε7 − N3 (ε8 + c8/ε8)
/// 3. N c′ + N1 (G − ε) − N2 c7/ε7 − N3 ε8 + N4
/// 4. N g(t)/2 + N1 ε − N2 c7 (ε7 + 1/ε7) − N3 c9
/// 5. ξ (N/2 + N1 c/ε + N2 c7/ε7) − (N1 c (ε + 1/ε) + N4 ε9)
/// 6. −N1 ε + N2 (1 − ε7) − N4
/// ```
pub fn check_weights(
    w: &LyapunovWeights,
    kernel: &MemoryKernel,
    friction: &FrictionLaw,
    t: f64,
) -> Result<WeightCheck> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("check_weights at negative time {t}")));
    }
    let g_mass = kernel.mass(t)?;
    let g_t = kernel.eval(t)?;
    let xi = kernel.xi(t);
    let c_prime = w.c_prime.min(friction.c_lower);
    let (e, e7, e8, e9) = (w.epsilon, w.epsilon7, w.epsilon8, w.epsilon9);
    let values = [
        w.n - w.n2 * w.c7 * (e + 1.0 / e) + w.n4 * (1.0 - e8),
        w.n - w.n1 * e - w.n2 * e7 / e7 - w.n3 * (e8 + w.c8 / e8),
        w.n * c_prime + w.n1 * (g_mass - e) - w.n2 * w.c7 / e7 - w.n3 * e8 + w.n4,
        w.n * g_t / 2.0 + w.n1 * e - w.n2 * w.c7 * (e7 + 1.0 / e7) - w.n3 * w.c9,
        xi * (w.n / 2.0 + w.n1 * w.c / e + w.n2 * w.c7 / e7)
            - (w.n1 * w.c * (e + 1.0 / e) + w.n4 * e9),
        -w.n1 * e + w.n2 * (1.0 - e7) - w.n4,
    ];
    Ok(WeightCheck { values })
}

/// Coarse grid search over `(N, N1..N4)` with the Young constants of `base`
/// held fixed. Returns every tuple that passes all six conditions at each of
/// `times`, ordered by increasing `N`.
pub fn search_feasible_weights(
    base: &LyapunovWeights,
    kernel: &MemoryKernel,
    friction: &FrictionLaw,
    times: &[f64],
) -> Result<Vec<LyapunovWeights>> {
    const N_GRID: [f64; 8] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0];
    const NI_GRID: [f64; 5] = [0.1, 0.5, 1.0, 5.0, 10.0];
    let mut out = Vec::new();
    for n in N_GRID {
        for n1 in NI_GRID {
            for n2 in NI_GRID {
                for n3 in NI_GRID {
                    for n4 in NI_GRID {
                        let w = LyapunovWeights {
                            n,
                            n1,
                            n2,
                            n3,
                            n4,
                            ..*base
                        };
                        let mut ok = true;
                        for &t in times {
                            if !check_weights(&w, kernel, friction, t)?.all() {
                                ok = false;
                                break;
                            }
                        }
                        if ok {
                            out.push(w);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equivalence {
    pub c1: f64,
    pub c2: f64,
}

impl Equivalence {
    pub fn holds(&self) -> bool {
        self.c1 > 0.0 && self.c1 <= self.c2
    }
}

/// `min` and `max` of `L/E` over records with `E > 1e-12·max E`.
pub fn equivalence_ratios(records: &[EnergyRecord]) -> Result<Equivalence> {
    let e_max = records.iter().fold(0.0_f64, |m, r| m.max(r.energy));
    let floor = 1e-12 * e_max;
    let mut c1 = f64::INFINITY;
    let mut c2 = f64::NEG_INFINITY;
    for r in records
        .iter()
        .filter(|r| r.energy > floor && r.energy > 0.0)
    {
        let q = r.lyapunov / r.energy;
        c1 = c1.min(q);
        c2 = c2.max(q);
    }
    if !c1.is_finite() {
        return Err(Error::Numerical(
            "L/E is undefined: no record has positive energy".to_string(),
        ));
    }
    Ok(Equivalence { c1, c2 })
}

/// Least-squares fit of `ln E = ln C0 − δ0 t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub c0: f64,
    pub delta0: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub points: usize,
}

/// The last 60% of `[t_first, t_last]`.
pub fn default_window(t_first: f64, t_last: f64) -> (f64, f64) {
    (t_first + 0.4 * (t_last - t_first), t_last)
}

/// Fits over the samples with `t_lo ≤ t ≤ t_hi` (up to a relative `1e-9` slack).
pub fn fit_decay(times: &[f64], energies: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    if times.len() != energies.len() {
        return Err(Error::contract("times and energies differ in length"));
    }
    let (lo, hi) = window;
    if !(lo <= hi) {
        return Err(Error::contract(format!("empty fit window [{lo}, {hi}]")));
    }
    let slack = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, (&t, &e)) in times.iter().zip(energies).enumerate() {
        if t < lo - slack || t > hi + slack {
            continue;
        }
        if !(e > 0.0) {
            return Err(Error::domain(format!(
                "record {i} (t = {t}) has nonpositive energy {e}"
            )));
        }
        xs.push(t);
        ys.push(e.ln());
    }
    if xs.len() < 2 {
        return Err(Error::contract(format!(
            "fit window [{lo}, {hi}] holds {} samples, need at least 2",
            xs.len()
        )));
    }
    let m = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / m;
    let y_mean = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    if sxx == 0.0 {
        return Err(Error::contract("fit window holds a single time"));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_tot: f64 = ys.iter().map(|y| (y - y_mean).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(DecayFit {
        c0: intercept.exp(),
        delta0: -slope,
        r_squared,
        window,
        points: xs.len(),
    })
}

/// [`fit_decay`] over trajectory records.
pub fn fit_records(records: &[EnergyRecord], window: (f64, f64)) -> Result<DecayFit> {
    let t: Vec<f64> = records.iter().map(|r| r.t).collect();
    let e: Vec<f64> = records.iter().map(|r| r.energy).collect();
    fit_decay(&t, &e, window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;
    use crate::integrator::initial_memory;
    use crate::model::Coefficients;
    use std::f64::consts::PI;

    fn cfg64() -> SimConfig {
        SimConfig::default()
    }

    fn zero_state(cfg: &SimConfig) -> State {
        State::zeros(&cfg.grid().unwrap())
    }

    #[test]
    fn zero_state_diagnostics_vanish() {
        let cfg = cfg64();
        let s = zero_state(&cfg);
        let m = initial_memory(&cfg, &s).unwrap();
        assert_eq!(energy(&s, &m, &cfg).unwrap(), 0.0);
        assert_eq!(dissipation(&s, &m, &cfg).unwrap(), 0.0);
        let t = lyapunov_terms(&s, &m, &cfg).unwrap();
        assert_eq!([t.i1, t.i2, t.i3, t.i4], [0.0; 4]);
        assert_eq!(identity_residual(0.0, 0.0, 0.0, 0.0, 0.1, 0.0), 0.0);
    }

    #[test]
    fn energy_of_sine_displacement() {
        let cfg = cfg64();
        let g = cfg.grid().unwrap();
        let mut s = zero_state(&cfg);
        s.phi = g.sample(Boundary::DirichletZero, |x| (PI * x).sin());
        let m = initial_memory(&cfg, &s).unwrap();
        let e = energy(&s, &m, &cfg).unwrap();
        // ½‖D+ sin(πx)‖² = sin²(π dx/2)/dx² exactly on the grid
        let h = g.dx();
        let discrete = (PI * h / 2.0).sin().powi(2) / (h * h);
        assert!((e - discrete).abs() < 1e-12);
        assert!((e - PI * PI / 4.0).abs() < PI.powi(4) / 48.0 * h * h * 1.01);
    }

    #[test]
    fn dissipation_of_sine_velocity() {
        let cfg = SimConfig {
            friction: FrictionLaw::linear(0.0),
            ..cfg64()
        };
        let g = cfg.grid().unwrap();
        let mut s = zero_state(&cfg);
        s.u = g.sample(Boundary::DirichletZero, |x| (PI * x).sin());
        let m = initial_memory(&cfg, &s).unwrap();
        assert!((dissipation(&s, &m, &cfg).unwrap() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn thermal_lyapunov_term() {
        let cfg = cfg64();
        let g = cfg.grid().unwrap();
        let mut s = zero_state(&cfg);
        s.theta = g.sample(Boundary::NeumannZero, |x| (PI * x).cos());
        s.z = s.theta.clone();
        let m = initial_memory(&cfg, &s).unwrap();
        let t = lyapunov_terms(&s, &m, &cfg).unwrap();
        assert!((t.i3 + 0.5).abs() < 1e-12);
        assert_eq!(t.i1, 0.0);
    }

    #[test]
    fn lyapunov_l_arithmetic() {
        let w = LyapunovWeights {
            n: 10.0,
            n1: 1.0,
            n2: 1.0,
            n3: 1.0,
            n4: 1.0,
            ..LyapunovWeights::default()
        };
        let ones = LyapunovTerms {
            i1: 1.0,
            i2: 1.0,
            i3: 1.0,
            i4: 1.0,
        };
        assert_eq!(lyapunov_l(&w, 1.0, &ones), 14.0);
        let zeros = LyapunovTerms {
            i1: 0.0,
            i2: 0.0,
            i3: 0.0,
            i4: 0.0,
        };
        assert_eq!(lyapunov_l(&w, 2.5, &zeros), 25.0);
    }

    #[test]
    fn weight_conditions_examples() {
        let kernel = MemoryKernel::exponential(0.5, 1.0).unwrap();
        let friction = FrictionLaw::linear(1.0);
        let w = LyapunovWeights::default();
        for t in [0.0, 1.0, 5.0, 40.0] {
            assert!(check_weights(&w, &kernel, &friction, t).unwrap().all());
        }
        let big = LyapunovWeights { n1: 1e6, ..w };
        let c = check_weights(&big, &kernel, &friction, 0.0).unwrap();
        assert!(!c.passed()[5]);
        assert!(check_weights(&w, &kernel, &friction, -1.0).is_err());
    }

    #[test]
    fn weight_search_finds_fixture_family() {
        let kernel = MemoryKernel::exponential(0.5, 1.0).unwrap();
        let friction = FrictionLaw::linear(1.0);
        let times: Vec<f64> = (0..=50).map(|k| k as f64 * 0.1).collect();
        let found =
            search_feasible_weights(&LyapunovWeights::default(), &kernel, &friction, &times)
                .unwrap();
        assert!(!found.is_empty());
        let fixture = LyapunovWeights::default();
        assert!(found.contains(&fixture));
    }

    #[test]
    fn weights_parse_errors() {
        assert!(LyapunovWeights::parse("N = 1").is_err());
        let bad = FEASIBLE_WEIGHTS.replace("N1 =", "M1 =");
        assert!(matches!(
            LyapunovWeights::parse(&bad),
            Err(Error::Parse { .. })
        ));
    }

    fn rec(t: f64, e: f64, l: f64) -> EnergyRecord {
        EnergyRecord {
            t,
            energy: e,
            dissipation: 0.0,
            residual: 0.0,
            i1: 0.0,
            i2: 0.0,
            i3: 0.0,
            i4: 0.0,
            lyapunov: l,
            mean_z: 0.0,
        }
    }

    #[test]
    fn equivalence_examples() {
        let r: Vec<_> = (0..5)
            .map(|k| rec(k as f64, 1.0 / (1.0 + k as f64), 7.0 / (1.0 + k as f64)))
            .collect();
        let q = equivalence_ratios(&r).unwrap();
        assert!((q.c1 - 7.0).abs() < 1e-15 && (q.c2 - 7.0).abs() < 1e-15 && q.holds());
        let bad = vec![rec(0.0, 1.0, -0.5), rec(1.0, 0.5, 0.1)];
        assert!(!equivalence_ratios(&bad).unwrap().holds());
        assert!(equivalence_ratios(&[rec(0.0, 0.0, 0.0)]).is_err());
    }

    #[test]
    fn fit_exact_exponential() {
        let t: Vec<f64> = (0..=50).map(|k| k as f64 * 0.1).collect();
        let e: Vec<f64> = t.iter().map(|t| 3.0 * (-2.0 * t).exp()).collect();
        let f = fit_decay(&t, &e, (0.0, 5.0)).unwrap();
        assert!((f.c0 - 3.0).abs() < 1e-12);
        assert!((f.delta0 - 2.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(f.points, 51);
    }

    #[test]
    fn fit_discriminates_polynomial_decay() {
        let t: Vec<f64> = (0..=400).map(|k| k as f64 * 0.1).collect();
        let e: Vec<f64> = t.iter().map(|t| (1.0 + t).powi(-2)).collect();
        let f = fit_decay(&t, &e, (0.0, 40.0)).unwrap();
        assert!(f.r_squared < 0.9, "{}", f.r_squared);
    }

    #[test]
    fn fit_rejects_nonpositive_energy() {
        let err = fit_decay(&[0.0, 1.0, 2.0], &[1.0, 0.0, 0.5], (0.0, 2.0)).unwrap_err();
        assert!(matches!(err, Error::Domain(ref m) if m.contains("record 1")));
        assert_eq!(default_window(0.0, 5.0), (2.0, 5.0));
    }

    #[test]
    fn exponential_history_term_is_minus_b_g_circ() {
        let cfg = SimConfig {
            memory_method: crate::model::MemoryMethod::Direct,
            t_final: 0.5,
            n: 16,
            ..cfg64()
        };
        let traj = crate::integrator::run(&cfg).unwrap();
        let s = &traj.final_state;
        // rebuild the direct history to compare both sums
        let mut h =
            crate::memory::HistoryBuffer::new(&cfg.grid().unwrap(), &cfg.kernel, 0.0).unwrap();
        let g = cfg.grid().unwrap();
        let shape = g.sample(Boundary::DirichletZero, |x| (PI * x).sin());
        for k in 0..=50 {
            h.push(k as f64 * 0.01, &shape.scaled((k as f64 * 0.01).cos()))
                .unwrap();
        }
        let a = h.g_circ(&cfg.kernel, 0.5, &s.psi).unwrap();
        let b = h.g_prime_circ(&cfg.kernel, 0.5, &s.psi).unwrap();
        assert!((b + a).abs() <= 1e-14 * a.max(1.0));
    }

    #[test]
    fn coefficients_scale_energy() {
        let cfg = SimConfig {
            coefficients: Coefficients {
                rho1: 3.0,
                ..Coefficients::default()
            },
            ..cfg64()
        };
        let g = cfg.grid().unwrap();
        let mut s = zero_state(&cfg);
        s.u = g.sample(Boundary::DirichletZero, |x| (PI * x).sin());
        let m = initial_memory(&cfg, &s).unwrap();
        assert!((energy(&s, &m, &cfg).unwrap() - 0.75).abs() < 1e-12);
    }
}
