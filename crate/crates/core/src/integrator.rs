//! Time stepping of the first-order system `U = (φ, u, ψ, v, θ, z)` with
//! `u = φ_t`, `v = ψ_t`, `z = θ_t`.
//!
//! Linear terms are advanced by Crank–Nicolson with a banded LU assembled once
//! per run. The memory convolution is lagged (evaluated at the old level).
//! Linear friction sits inside the implicit matrix; nonlinear friction is
//! split symmetrically around the linear step, each half step solved by
//! pointwise implicit midpoint with scalar Newton.

use crate::banded::{BandedLu, BandedMatrix};
use crate::diagnostics::{self, EnergyRecord};
use crate::error::{Error, Result};
use crate::grid::{self, Boundary, Field, Grid};
use crate::memory::{HistoryBuffer, MemoryState, RecursiveConvolution};
use crate::model::{MemoryKernel, MemoryMethod, SimConfig};
use crate::operator::{linear_entries, Var};

/// Any nodal magnitude above this aborts the run.
pub const BLOW_UP_THRESHOLD: f64 = 1e12;

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub phi: Field,
    pub u: Field,
    pub psi: Field,
    pub v: Field,
    pub theta: Field,
    pub z: Field,
}

/// Time derivative of a [`State`], field by field.
#[derive(Debug, Clone, PartialEq)]
pub struct StateRate {
    pub phi: Field,
    pub u: Field,
    pub psi: Field,
    pub v: Field,
    pub theta: Field,
    pub z: Field,
}

impl State {
    pub fn zeros(grid: &Grid) -> State {
        let d = grid.zeros(Boundary::DirichletZero);
        let nz = grid.zeros(Boundary::NeumannZero);
        State {
            t: 0.0,
            phi: d.clone(),
            u: d.clone(),
            psi: d.clone(),
            v: d,
            theta: nz.clone(),
            z: nz,
        }
    }

    pub fn initial(cfg: &SimConfig) -> Result<State> {
        let grid = cfg.grid()?;
        let s = cfg.initial.sample(&grid)?;
        Ok(State {
            t: 0.0,
            phi: s.phi0,
            u: s.phi1,
            psi: s.psi0,
            v: s.psi1,
            theta: s.theta0,
            z: s.theta1,
        })
    }

    pub fn field(&self, var: Var) -> &Field {
        match var {
            Var::Phi => &self.phi,
            Var::U => &self.u,
            Var::Psi => &self.psi,
            Var::V => &self.v,
            Var::Theta => &self.theta,
            Var::Z => &self.z,
        }
    }

    fn field_mut(&mut self, var: Var) -> &mut Field {
        match var {
            Var::Phi => &mut self.phi,
            Var::U => &mut self.u,
            Var::Psi => &mut self.psi,
            Var::V => &mut self.v,
            Var::Theta => &mut self.theta,
            Var::Z => &mut self.z,
        }
    }

    pub fn points(&self) -> usize {
        self.phi.len()
    }

    /// Largest nodal magnitude over all six fields.
    pub fn max_abs(&self) -> f64 {
        Var::ALL
            .iter()
            .map(|v| self.field(*v).max_abs())
            .fold(0.0, f64::max)
    }

    /// Blow-up error naming the first field that is non-finite or exceeds
    /// [`BLOW_UP_THRESHOLD`].
    pub fn check_bounded(&self) -> Result<()> {
        for var in Var::ALL {
            let f = self.field(var);
            if !f.is_finite() {
                return Err(Error::BlowUp {
                    field: var.name(),
                    magnitude: f64::INFINITY,
                });
            }
            let m = f.max_abs();
            if m > BLOW_UP_THRESHOLD {
                return Err(Error::BlowUp {
                    field: var.name(),
                    magnitude: m,
                });
            }
        }
        Ok(())
    }

    fn check_shape(&self, points: usize) -> Result<()> {
        for var in Var::ALL {
            let f = self.field(var);
            let expected = if var.is_dirichlet() {
                Boundary::DirichletZero
            } else {
                Boundary::NeumannZero
            };
            if f.len() != points || f.boundary() != expected {
                return Err(Error::contract(format!(
                    "state field {} has {} nodes / {:?}, expected {points} / {expected:?}",
                    var.name(),
                    f.len(),
                    f.boundary()
                )));
            }
        }
        Ok(())
    }

    /// Node-interleaved vector, index `6j + field`.
    pub(crate) fn to_interleaved(&self) -> Vec<f64> {
        let p = self.points();
        let mut out = vec![0.0; 6 * p];
        for var in Var::ALL {
            for (j, x) in self.field(var).values().iter().enumerate() {
                out[6 * j + var.index()] = *x;
            }
        }
        out
    }

    fn set_from_interleaved(&mut self, x: &[f64]) {
        let p = self.points();
        for var in Var::ALL {
            let f = self.field_mut(var).values_mut();
            for j in 0..p {
                f[j] = x[6 * j + var.index()];
            }
            if var.is_dirichlet() {
                f[0] = 0.0;
                f[p - 1] = 0.0;
            }
        }
    }
}

/// Right-hand side of the semi-discrete system for a given convolution
/// `conv_psi = ∫₀ᵗ g(t−s) ψ(s) ds`, built from the [`Grid`] operators.
pub fn rhs(state: &State, conv_psi: &Field, cfg: &SimConfig) -> Result<StateRate> {
    let grid = cfg.grid()?;
    state.check_shape(grid.points())?;
    for var in Var::ALL {
        if !state.field(var).is_finite() {
            return Err(Error::BlowUp {
                field: var.name(),
                magnitude: f64::INFINITY,
            });
        }
    }
    if conv_psi.boundary() != Boundary::DirichletZero {
        return Err(Error::contract("convolution field must be DirichletZero"));
    }
    let c = &cfg.coefficients;
    let n = grid.n();
    let zero_ends = |mut f: Field| {
        let v = f.values_mut();
        v[0] = 0.0;
        v[n] = 0.0;
        f.with_boundary(Boundary::DirichletZero)
    };

    let du = grid
        .laplacian(&state.phi)?
        .axpy(1.0, &grid.ddx(&state.psi)?)?
        .scaled(c.k1)
        .axpy(-c.mu, &state.u)?
        .scaled(1.0 / c.rho1);

    let friction: Vec<f64> = state
        .v
        .values()
        .iter()
        .map(|s| cfg.friction.eval(*s))
        .collect();
    let friction = Field::from_raw(friction, Boundary::Free);
    let shear = grid.ddx(&state.phi)?.axpy(1.0, &state.psi)?;
    let dv = grid
        .laplacian(&state.psi)?
        .scaled(c.k2)
        .axpy(-1.0, &grid.laplacian(conv_psi)?)?
        .axpy(-c.k1, &shear)?
        .axpy(-1.0, &friction)?
        .axpy(-c.gamma, &grid.ddx(&state.z)?)?
        .scaled(1.0 / c.rho2);

    let dz = grid
        .ddx_conservative(&state.v)?
        .scaled(-c.gamma)
        .axpy(c.delta, &grid.laplacian(&state.theta)?)?
        .axpy(c.beta, &grid.laplacian(&state.z)?)?
        .scaled(1.0 / c.rho3)
        .with_boundary(Boundary::NeumannZero);

    Ok(StateRate {
        phi: state.u.clone(),
        u: zero_ends(du),
        psi: state.v.clone(),
        v: zero_ends(dv),
        theta: state.z.clone(),
        z: dz,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Scalar Newton iterations summed over nodes and half steps.
    pub newton_iterations: usize,
    pub max_magnitude: f64,
    pub accepted: bool,
}

/// Crank–Nicolson stepper for one configuration and step size.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Grid,
    cfg: SimConfig,
    dt: f64,
    lu: BandedLu,
    /// `(row, col, value)` of `A` in interleaved indices.
    explicit: Vec<(usize, usize, f64)>,
    split_friction: bool,
}

impl Stepper {
    pub fn new(cfg: &SimConfig, dt: f64) -> Result<Stepper> {
        cfg.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::contract(format!("dt must be > 0, got {dt}")));
        }
        let grid = cfg.grid()?;
        let (alpha, split_friction) = match cfg.friction.linear_coefficient() {
            Some(a) => (a, false),
            None => (0.0, true),
        };
        let entries = linear_entries(&grid, &cfg.coefficients, alpha);
        let idx = |(var, j): (Var, usize)| 6 * j + var.index();
        let explicit: Vec<(usize, usize, f64)> = entries
            .iter()
            .map(|e| (idx(e.row), idx(e.col), e.val))
            .collect();
        let size = 6 * grid.points();
        let (mut kl, mut ku) = (0, 0);
        for &(r, c, _) in &explicit {
            kl = kl.max(r.saturating_sub(c));
            ku = ku.max(c.saturating_sub(r));
        }
        let mut m = BandedMatrix::zeros(size, kl, ku);
        for i in 0..size {
            m.add(i, i, 1.0)?;
        }
        for &(r, c, v) in &explicit {
            m.add(r, c, -0.5 * dt * v)?;
        }
        let lu = m.factor()?;
        Ok(Stepper {
            grid,
            cfg: cfg.clone(),
            dt,
            lu,
            explicit,
            split_friction,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `state` by `dt` using the convolution held in `memory` at
    /// `state.t`. The memory itself is not updated.
    pub fn step(&self, state: &State, memory: &MemoryState) -> Result<(State, StepReport)> {
        state.check_shape(self.grid.points())?;
        let mut next = state.clone();
        let mut newton = 0;
        if self.split_friction {
            newton += self.friction_half_step(&mut next)?;
        }

        let conv = memory.convolution(&self.cfg.kernel, state.t)?;
        let mut lap_conv = vec![0.0; self.grid.points()];
        grid::laplacian_dirichlet(conv.values(), self.grid.dx(), &mut lap_conv);

        let x = next.to_interleaved();
        let mut b = x.clone();
        let half = 0.5 * self.dt;
        for &(r, c, v) in &self.explicit {
            b[r] += half * v * x[c];
        }
        let rho2 = self.cfg.coefficients.rho2;
        for j in 1..self.grid.n() {
            b[6 * j + Var::V.index()] -= self.dt * lap_conv[j] / rho2;
        }
        self.lu.solve_in_place(&mut b);
        next.set_from_interleaved(&b);

        if self.split_friction {
            newton += self.friction_half_step(&mut next)?;
        }
        next.t = state.t + self.dt;
        next.check_bounded()?;
        Ok((
            next.clone(),
            StepReport {
                newton_iterations: newton,
                max_magnitude: next.max_abs(),
                accepted: true,
            },
        ))
    }

    /// `v' = −h(v)/ρ2` over `dt/2` by implicit midpoint: solve
    /// `m + (dt/4ρ2)·h(m) = v` and set `v ← 2m − v`.
    fn friction_half_step(&self, state: &mut State) -> Result<usize> {
        let c = 0.25 * self.dt / self.cfg.coefficients.rho2;
        let h = &self.cfg.friction;
        let mut total = 0;
        let n = self.grid.n();
        let v = state.v.values_mut();
        for vj in v.iter_mut().take(n).skip(1) {
            let target = *vj;
            let tol = NEWTON_TOL * target.abs().max(1.0);
            let mut m = target;
            let mut converged = false;
            for _ in 0..NEWTON_MAX_ITER {
                let r = m + c * h.eval(m) - target;
                if r.abs() <= tol {
                    converged = true;
                    break;
                }
                m -= r / (1.0 + c * h.derivative(m));
                total += 1;
            }
            if !converged {
                return Err(Error::StepFailure(format!(
                    "friction Newton did not converge for v = {target}"
                )));
            }
            *vj = 2.0 * m - target;
        }
        Ok(total)
    }
}

/// Builds a [`Stepper`] for `dt` and advances once.
pub fn step(
    state: &State,
    memory: &MemoryState,
    cfg: &SimConfig,
    dt: f64,
) -> Result<(State, StepReport)> {
    Stepper::new(cfg, dt)?.step(state, memory)
}

/// Memory evaluator that `run` uses for this configuration.
pub fn initial_memory(cfg: &SimConfig, state: &State) -> Result<MemoryState> {
    let grid = cfg.grid()?;
    let recursive = match cfg.memory_method {
        MemoryMethod::Auto => matches!(
            cfg.kernel,
            MemoryKernel::Exponential { .. } | MemoryKernel::Zero
        ),
        MemoryMethod::Recursive => true,
        MemoryMethod::Direct => false,
    };
    if recursive {
        Ok(MemoryState::Recursive(RecursiveConvolution::new(
            &cfg.kernel,
            &grid,
            state.t,
            &state.psi,
        )?))
    } else {
        let mut h = HistoryBuffer::new(&grid, &cfg.kernel, cfg.eps_trunc)?;
        h.push(state.t, &state.psi)?;
        Ok(MemoryState::Direct(h))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Keep the full state at every recorded level.
    pub keep_snapshots: bool,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<EnergyRecord>,
    pub snapshots: Vec<State>,
    pub final_state: State,
    /// Step size actually used, `T / round(T / dt)`.
    pub dt: f64,
    pub steps: usize,
    pub newton_iterations: usize,
}

/// Number of steps and effective step size for a horizon `t_final`.
pub fn step_plan(t_final: f64, dt: f64) -> (usize, f64) {
    if t_final == 0.0 {
        return (0, dt);
    }
    let steps = ((t_final / dt).round() as usize).max(1);
    (steps, t_final / steps as f64)
}

pub fn run(cfg: &SimConfig) -> Result<Trajectory> {
    run_with(cfg, RunOptions::default())
}

pub fn run_with(cfg: &SimConfig, options: RunOptions) -> Result<Trajectory> {
    cfg.validate()?;
    cfg.check_hypotheses()?;
    let state = State::initial(cfg)?;
    run_from(cfg, state, options)
}

/// Runs from an explicit initial state (hypotheses are not re-checked).
pub fn run_from(cfg: &SimConfig, mut state: State, options: RunOptions) -> Result<Trajectory> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    state.check_shape(grid.points())?;
    let (steps, dt) = step_plan(cfg.t_final, cfg.dt);
    let mut memory = initial_memory(cfg, &state)?;

    let mut probe = diagnostics::probe(&state, &memory, cfg)?;
    let e0 = probe.energy;
    let mut records = vec![diagnostics::record(&state, &memory, cfg, probe, 0.0)?];
    let mut snapshots = Vec::new();
    if options.keep_snapshots {
        snapshots.push(state.clone());
    }
    if steps == 0 {
        return Ok(Trajectory {
            records,
            snapshots,
            final_state: state,
            dt,
            steps,
            newton_iterations: 0,
        });
    }

    let stepper = Stepper::new(cfg, dt)?;
    let mut newton_total = 0;
    let mut residual_max: f64 = 0.0;
    for k in 1..=steps {
        let wrap = |e: Error, t: f64| Error::AtStep {
            step: k,
            t,
            source: Box::new(e),
        };
        let (mut next, report) = stepper
            .step(&state, &memory)
            .map_err(|e| wrap(e, state.t))?;
        // pin the clock to the step grid to avoid drift
        next.t = k as f64 * dt;
        newton_total += report.newton_iterations;
        memory
            .push(next.t, &next.psi, dt)
            .map_err(|e| wrap(e, next.t))?;
        let p = diagnostics::probe(&next, &memory, cfg).map_err(|e| wrap(e, next.t))?;
        let r = diagnostics::identity_residual(
            probe.energy,
            probe.dissipation,
            p.energy,
            p.dissipation,
            dt,
            e0,
        );
        residual_max = residual_max.max(r);
        probe = p;
        state = next;
        if k % cfg.stride == 0 || k == steps {
            records.push(
                diagnostics::record(&state, &memory, cfg, probe, residual_max)
                    .map_err(|e| wrap(e, state.t))?,
            );
            residual_max = 0.0;
            if options.keep_snapshots {
                snapshots.push(state.clone());
            }
        }
    }
    Ok(Trajectory {
        records,
        snapshots,
        final_state: state,
        dt,
        steps,
        newton_iterations: newton_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Coefficients, FrictionLaw};
    use std::f64::consts::PI;

    fn small_cfg(n: usize) -> SimConfig {
        SimConfig {
            n,
            ..SimConfig::default()
        }
    }

    #[test]
    fn zero_state_has_zero_rate() {
        let cfg = small_cfg(16);
        let s = State::zeros(&cfg.grid().unwrap());
        let r = rhs(&s, &s.psi, &cfg).unwrap();
        for f in [&r.phi, &r.u, &r.psi, &r.v, &r.theta, &r.z] {
            assert_eq!(f.max_abs(), 0.0);
        }
    }

    #[test]
    fn reduced_wave_rhs() {
        let cfg = SimConfig {
            n: 64,
            coefficients: Coefficients {
                gamma: 0.0,
                mu: 0.0,
                ..Coefficients::default()
            },
            friction: FrictionLaw::linear(0.0),
            kernel: MemoryKernel::Zero,
            ..SimConfig::default()
        };
        let g = cfg.grid().unwrap();
        let mut s = State::zeros(&g);
        s.phi = g.sample(Boundary::DirichletZero, |x| (PI * x).sin());
        let r = rhs(&s, &g.zeros(Boundary::DirichletZero), &cfg).unwrap();
        let dx2 = g.dx() * g.dx();
        for j in 1..64 {
            let exact = -PI * PI * (PI * g.x(j)).sin();
            assert!((r.u.values()[j] - exact).abs() <= PI.powi(4) / 12.0 * dx2 * 1.01);
        }
    }

    #[test]
    fn tiny_grid_hand_computation() {
        // n = 4, dx = 1/4, unit coefficients, linear friction h(s) = s, zero memory
        let cfg = SimConfig {
            n: 4,
            ..SimConfig::default()
        };
        let g = cfg.grid().unwrap();
        let d = |v: [f64; 3]| {
            g.field(vec![0.0, v[0], v[1], v[2], 0.0], Boundary::DirichletZero)
                .unwrap()
        };
        let nz = |v: [f64; 5]| g.field(v.to_vec(), Boundary::NeumannZero).unwrap();
        let s = State {
            t: 0.0,
            phi: d([1.0, 1.0, 1.0]),
            u: d([1.0, 1.0, 1.0]),
            psi: d([1.0, 1.0, 1.0]),
            v: d([1.0, 1.0, 1.0]),
            theta: nz([1.0, 1.0, 1.0, 1.0, 1.0]),
            z: nz([0.0, 1.0, 2.0, 3.0, 4.0]),
        };
        let r = rhs(&s, &g.zeros(Boundary::DirichletZero), &cfg).unwrap();
        // u' = lap φ + Dc ψ − u: lap φ = [−16, 0, −16], Dc ψ = [2, 0, −2]
        assert_eq!(r.u.values(), &[0.0, -15.0, -1.0, -19.0, 0.0]);
        // v' = lap ψ − (Dc φ + ψ) − v − Dc z: Dc z = [4, 4, 4]
        assert_eq!(r.v.values(), &[0.0, -24.0, -6.0, -20.0, 0.0]);
        // z' = −D'v + lap θ + lap z: D'v = [4, 2, 0, −2, −4], lap_N z = [32, 0, 0, 0, −32]
        assert_eq!(r.z.values(), &[28.0, -2.0, 0.0, 2.0, -28.0]);
        assert_eq!(r.phi, s.u);
    }

    #[test]
    fn zero_data_stays_zero() {
        let mut cfg = small_cfg(16);
        cfg.t_final = 0.05;
        cfg.stride = 1;
        let s = State::zeros(&cfg.grid().unwrap());
        let traj = run_from(&cfg, s, RunOptions::default()).unwrap();
        assert_eq!(traj.final_state.max_abs(), 0.0);
        assert!(traj.records.iter().all(|r| r.energy == 0.0));
    }

    #[test]
    fn t_zero_gives_single_record() {
        let mut cfg = small_cfg(16);
        cfg.t_final = 0.0;
        let traj = run(&cfg).unwrap();
        assert_eq!(traj.records.len(), 1);
        assert_eq!(traj.steps, 0);
    }

    #[test]
    fn boundary_values_pinned_and_deterministic() {
        let mut cfg = small_cfg(16);
        cfg.t_final = 0.2;
        cfg.friction = FrictionLaw::rational_cubic(1.0);
        let a = run_with(
            &cfg,
            RunOptions {
                keep_snapshots: true,
            },
        )
        .unwrap();
        let b = run_with(
            &cfg,
            RunOptions {
                keep_snapshots: true,
            },
        )
        .unwrap();
        assert_eq!(a.records, b.records);
        assert!(a.newton_iterations > 0);
        for s in &a.snapshots {
            for f in [&s.phi, &s.u, &s.psi, &s.v] {
                assert_eq!(f.values()[0], 0.0);
                assert_eq!(f.values()[16], 0.0);
            }
        }
    }

    #[test]
    fn blow_up_is_reported() {
        let cfg = small_cfg(8);
        let g = cfg.grid().unwrap();
        let mut s = State::zeros(&g);
        s.theta = g.sample(Boundary::NeumannZero, |_| 1e13);
        let err = s.check_bounded().unwrap_err();
        assert!(matches!(err, Error::BlowUp { field: "theta", .. }));
        s.theta = g.sample(Boundary::NeumannZero, |_| f64::NAN);
        assert!(rhs(&s, &g.zeros(Boundary::DirichletZero), &cfg)
            .unwrap_err()
            .is_blow_up());
    }

    #[test]
    fn hypothesis_failure_blocks_run() {
        let mut cfg = small_cfg(8);
        cfg.kernel = MemoryKernel::exponential(2.0, 1.0).unwrap();
        cfg.t_final = 0.01;
        assert!(run(&cfg).unwrap_err().is_hypothesis());
        cfg.override_hypotheses = true;
        assert!(run(&cfg).is_ok());
    }

    #[test]
    fn step_plan_rounds() {
        assert_eq!(step_plan(0.0, 0.1), (0, 0.1));
        let (k, dt) = step_plan(1.0, 0.3);
        assert_eq!(k, 3);
        assert!((dt - 1.0 / 3.0).abs() < 1e-15);
    }
}
