//! The invariant suite behind `thermobeam verify`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermobeam::generator::{assemble, coercivity, solve_resolvent};
use thermobeam::memory::{HistoryBuffer, RecursiveConvolution};
use thermobeam::model::MemoryKernel;
use thermobeam::nalgebra::DVector;
use thermobeam::{run, Boundary, Field, Grid, Result, SimConfig};

use crate::generator_mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Not applicable to this configuration.
    Skip,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        }
    }

    fn from(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

fn check(name: &'static str, r: Result<(bool, String)>) -> Check {
    match r {
        Ok((ok, detail)) => Check {
            name,
            status: Status::from(ok),
            detail,
        },
        Err(e) => Check {
            name,
            status: Status::Fail,
            detail: format!("error: {e}"),
        },
    }
}

pub const RESIDUAL_TOL: f64 = 1e-3;
pub const RESIDUAL_RATIO_MIN: f64 = 1.8;
pub const MEAN_TOL: f64 = 1e-8;
pub const CONVOLUTION_ORDER_MIN: f64 = 1.9;
pub const RESOLVENT_TOL: f64 = 1e-10;
pub const RESOLUTIONS: [usize; 3] = [8, 16, 32];

pub fn run_suite(cfg: &SimConfig) -> Vec<Check> {
    let mut out = Vec::new();
    let runs = (|| -> Result<_> {
        let coarse = run(cfg)?;
        let fine = run(&SimConfig {
            dt: cfg.dt / 2.0,
            ..cfg.clone()
        })?;
        Ok((coarse, fine))
    })();
    match runs {
        Ok((coarse, fine)) => {
            let max_res = |t: &thermobeam::Trajectory| {
                t.records.iter().map(|r| r.residual).fold(0.0, f64::max)
            };
            let (r1, r2) = (max_res(&coarse), max_res(&fine));
            let ratio = r1 / r2;
            let ok = r1 <= RESIDUAL_TOL && (ratio >= RESIDUAL_RATIO_MIN || r1 <= 1e-12);
            out.push(check(
                "energy identity",
                Ok((
                    ok,
                    format!("max residual {r1:.3e} (dt), {r2:.3e} (dt/2), ratio {ratio:.3}"),
                )),
            ));
            let m0 = coarse.records[0].mean_z;
            let drift = coarse
                .records
                .iter()
                .map(|r| (r.mean_z - m0).abs())
                .fold(0.0, f64::max);
            out.push(check(
                "mean conservation",
                Ok((
                    drift <= MEAN_TOL,
                    format!("max |mean_z - mean_z(0)| = {drift:.3e}"),
                )),
            ));
        }
        Err(e) => {
            for name in ["energy identity", "mean conservation"] {
                out.push(check(
                    name,
                    Err(thermobeam::Error::StepFailure(e.to_string())),
                ));
            }
        }
    }
    out.push(check("convolution oracle", convolution_oracle(&cfg.kernel)));
    if cfg.friction.linear_coefficient().is_none()
        || matches!(cfg.kernel, MemoryKernel::Tabulated(_))
    {
        for name in ["resolvent", "coercivity"] {
            out.push(Check {
                name,
                status: Status::Skip,
                detail: "needs linear friction and an exponential or zero kernel".into(),
            });
        }
    } else {
        out.push(check("resolvent", resolvent_check(cfg)));
        out.push(check("coercivity", coercivity_check(cfg)));
    }
    out
}

/// `∫₀ᵗ a e^{−b(t−s)} sin s ds`.
pub fn sine_convolution(a: f64, b: f64, t: f64) -> f64 {
    a * (b * t.sin() - t.cos() + (-b * t).exp()) / (1.0 + b * b)
}

/// Errors of the direct and recursive convolutions of `ψ = sin(πx) sin s`
/// at `t = 2` against the closed form, and their mutual distance.
pub fn convolution_errors(a: f64, b: f64, dt: f64) -> Result<(f64, f64, f64)> {
    let kernel = MemoryKernel::exponential(a, b)?;
    let grid = Grid::new(32, 1.0)?;
    let shape = grid.sample(Boundary::DirichletZero, |x| (PI * x).sin());
    let t_end = 2.0;
    let steps = (t_end / dt).round() as usize;
    let zero = shape.scaled(0.0);
    let mut direct = HistoryBuffer::new(&grid, &kernel, 0.0)?;
    direct.push(0.0, &zero)?;
    let mut rec = RecursiveConvolution::new(&kernel, &grid, 0.0, &zero)?;
    for k in 1..=steps {
        let t = k as f64 * dt;
        let psi = shape.scaled(t.sin());
        direct.push(t, &psi)?;
        rec.advance(&psi, dt)?;
    }
    let exact = shape.scaled(sine_convolution(a, b, t_end));
    let d = direct.convolve(&kernel, t_end)?;
    let r = rec.w();
    let err = |f: &Field| -> Result<f64> { Ok(f.axpy(-1.0, &exact)?.max_abs()) };
    Ok((err(&d)?, err(&r)?, d.axpy(-1.0, &r)?.max_abs()))
}

fn convolution_oracle(kernel: &MemoryKernel) -> Result<(bool, String)> {
    let (a, b) = match kernel {
        MemoryKernel::Exponential { a, b } => (*a, *b),
        _ => (0.5, 1.0),
    };
    let (d1, r1, m1) = convolution_errors(a, b, 0.02)?;
    let (d2, r2, _) = convolution_errors(a, b, 0.01)?;
    let (od, or) = ((d1 / d2).log2(), (r1 / r2).log2());
    let ok = od >= CONVOLUTION_ORDER_MIN && or >= CONVOLUTION_ORDER_MIN && m1 <= d1 + r1;
    Ok((
        ok,
        format!("g = {a}e^(-{b}s): orders {od:.3} (direct), {or:.3} (recursive), mutual {m1:.2e}"),
    ))
}

fn resolvent_check(cfg: &SimConfig) -> Result<(bool, String)> {
    let mode = generator_mode(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    for n in RESOLUTIONS {
        let gen = assemble(cfg, n, mode)?;
        for _ in 0..20 {
            let b = DVector::from_fn(gen.dim(), |_, _| rng.gen_range(-1.0..1.0));
            worst = worst.max(solve_resolvent(&gen, &b)?.residual);
        }
    }
    Ok((
        worst <= RESOLVENT_TOL,
        format!("max relative residual {worst:.3e} over 20 right sides at n = 8, 16, 32"),
    ))
}

fn coercivity_check(cfg: &SimConfig) -> Result<(bool, String)> {
    let mut alphas = Vec::new();
    for n in RESOLUTIONS {
        alphas.push(coercivity(cfg, n)?.alpha0);
    }
    let ok = alphas.iter().all(|a| *a > 0.0);
    let list: Vec<String> = alphas.iter().map(|a| format!("{a:.4e}")).collect();
    Ok((ok, format!("alpha0 at n = 8, 16, 32: {}", list.join(", "))))
}
