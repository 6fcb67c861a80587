//! Subcommands of the `thermobeam` binary.
//!
//! Every command writes its human-readable report to the given writer and
//! returns the process exit code: 0 on success, 1 on any other failure, 2 on
//! a kernel or friction hypothesis violation, 3 on a blow-up.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use thermobeam::config::{parse_config, serialize_config};
use thermobeam::diagnostics::{check_weights, default_window, fit_decay, EnergyRecord};
use thermobeam::generator::{assemble, spectrum, GeneratorMode};
use thermobeam::model::{check_friction, check_kernel, MemoryKernel};
use thermobeam::{Error, Result, SimConfig};

pub mod verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_HYPOTHESIS: i32 = 2;
pub const EXIT_BLOW_UP: i32 = 3;

pub fn exit_code(err: &Error) -> i32 {
    if err.is_hypothesis() {
        EXIT_HYPOTHESIS
    } else if err.is_blow_up() {
        EXIT_BLOW_UP
    } else {
        EXIT_FAILURE
    }
}

pub const ENERGY_HEADER: &str = "t,E,D,residual,I1,I2,I3,I4,L,mean_z";

/// 17 significant digits; negative zero is written as zero.
pub fn fmt_f64(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

/// Loads the config (defaults when `path` is `None`) and applies the
/// command-line override.
pub fn load_config(path: Option<&Path>, override_hypotheses: bool) -> Result<SimConfig> {
    let mut cfg = match path {
        Some(p) => parse_config(p)?,
        None => SimConfig::default(),
    };
    if override_hypotheses {
        cfg.override_hypotheses = true;
    }
    Ok(cfg)
}

pub fn energy_csv(records: &[EnergyRecord]) -> String {
    let mut s = String::from(ENERGY_HEADER);
    s.push('\n');
    for r in records {
        let row = [
            r.t,
            r.energy,
            r.dissipation,
            r.residual,
            r.i1,
            r.i2,
            r.i3,
            r.i4,
            r.lyapunov,
            r.mean_z,
        ];
        let cells: Vec<String> = row.iter().map(|x| fmt_f64(*x)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Traceability record written next to every output file.
pub struct RunManifest {
    pub command: &'static str,
    pub config_path: Option<PathBuf>,
    pub config: SimConfig,
    pub outputs: Vec<PathBuf>,
    /// Extra `key = value` results of the command.
    pub results: Vec<(String, String)>,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let started = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        let mut s = String::new();
        writeln!(s, "command = {}", self.command).unwrap();
        writeln!(s, "version = {}", env!("CARGO_PKG_VERSION")).unwrap();
        writeln!(s, "started_unix = {started:.3}").unwrap();
        let cfg_path = self
            .config_path
            .as_ref()
            .map_or("(defaults)".to_string(), |p| p.display().to_string());
        writeln!(s, "config_path = {cfg_path}").unwrap();
        for o in &self.outputs {
            writeln!(s, "output = {}", o.display()).unwrap();
        }
        for (k, v) in &self.results {
            writeln!(s, "{k} = {v}").unwrap();
        }
        writeln!(s, "\n[resolved config]").unwrap();
        s.push_str(&serialize_config(&self.config));
        s
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.txt");
        std::fs::write(&path, self.render())?;
        Ok(path)
    }
}

fn report_error(out: &mut dyn Write, err: &Error) -> i32 {
    let _ = writeln!(out, "error: {err}");
    exit_code(err)
}

/// Runs the simulation and writes `energy.csv` and `manifest.txt` into `out_dir`.
pub fn cmd_run(
    config: Option<&Path>,
    out_dir: &Path,
    override_hypotheses: bool,
    out: &mut dyn Write,
) -> i32 {
    match run_inner(config, out_dir, override_hypotheses, out) {
        Ok(()) => EXIT_OK,
        Err(e) => report_error(out, &e),
    }
}

fn run_inner(
    config: Option<&Path>,
    out_dir: &Path,
    override_hypotheses: bool,
    out: &mut dyn Write,
) -> Result<()> {
    let cfg = load_config(config, override_hypotheses)?;
    let traj = thermobeam::run(&cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let csv = out_dir.join("energy.csv");
    std::fs::write(&csv, energy_csv(&traj.records))?;
    let first = traj.records.first().map_or(f64::NAN, |r| r.energy);
    let last = traj.records.last().map_or(f64::NAN, |r| r.energy);
    let manifest = RunManifest {
        command: "run",
        config_path: config.map(Path::to_path_buf),
        config: cfg,
        outputs: vec![csv.clone()],
        results: vec![
            ("steps".into(), traj.steps.to_string()),
            ("dt_effective".into(), fmt_f64(traj.dt)),
            (
                "newton_iterations".into(),
                traj.newton_iterations.to_string(),
            ),
            ("records".into(), traj.records.len().to_string()),
        ],
    };
    let mpath = manifest.write(out_dir)?;
    writeln!(out, "{} steps, {} records", traj.steps, traj.records.len())?;
    writeln!(
        out,
        "E(first) = {}  E(last) = {}",
        fmt_f64(first),
        fmt_f64(last)
    )?;
    writeln!(out, "wrote {} and {}", csv.display(), mpath.display())?;
    Ok(())
}

/// Generator mode for a config: the augmented generator for exponential
/// kernels, the memory-free one for `g ≡ 0`.
pub fn generator_mode(cfg: &SimConfig) -> Result<GeneratorMode> {
    match cfg.kernel {
        MemoryKernel::Exponential { .. } => Ok(GeneratorMode::ExpAugmented),
        MemoryKernel::Zero => Ok(GeneratorMode::NoMemory),
        MemoryKernel::Tabulated(_) => Err(Error::Contract(
            "the generator has no finite-dimensional closure for tabulated kernels".into(),
        )),
    }
}

/// Writes `spectrum.csv` (`re,im`, real part descending) and `manifest.txt`.
pub fn cmd_spectrum(config: Option<&Path>, out_dir: &Path, out: &mut dyn Write) -> i32 {
    match spectrum_inner(config, out_dir, out) {
        Ok(()) => EXIT_OK,
        Err(e) => report_error(out, &e),
    }
}

fn spectrum_inner(config: Option<&Path>, out_dir: &Path, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(config, false)?;
    let mode = generator_mode(&cfg)?;
    let gen = assemble(&cfg, cfg.n, mode)?;
    let report = spectrum(&gen.matrix)?;
    std::fs::create_dir_all(out_dir)?;
    let mut csv = String::from("re,im\n");
    for z in &report.eigenvalues {
        writeln!(csv, "{},{}", fmt_f64(z.re), fmt_f64(z.im)).unwrap();
    }
    let path = out_dir.join("spectrum.csv");
    std::fs::write(&path, csv)?;
    let manifest = RunManifest {
        command: "spectrum",
        config_path: config.map(Path::to_path_buf),
        config: cfg,
        outputs: vec![path.clone()],
        results: vec![
            ("mode".into(), format!("{mode:?}")),
            ("dimension".into(), gen.dim().to_string()),
            ("abscissa".into(), fmt_f64(report.abscissa)),
            (
                "dominant".into(),
                format!(
                    "{} {}",
                    fmt_f64(report.dominant.re),
                    fmt_f64(report.dominant.im)
                ),
            ),
        ],
    };
    manifest.write(out_dir)?;
    writeln!(out, "{mode:?} generator, dimension {}", gen.dim())?;
    writeln!(out, "spectral abscissa = {}", fmt_f64(report.abscissa))?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

/// Parses `t_lo:t_hi`.
pub fn parse_window(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::Parse {
        line: 0,
        msg: format!("window must be `t_lo:t_hi`, got `{s}`"),
    };
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = a.trim().parse().map_err(|_| bad())?;
    let hi: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(bad());
    }
    Ok((lo, hi))
}

/// Reads the `t` and `E` columns of an energy CSV.
pub fn read_energy_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let parse_err = |e: csv::Error| Error::Parse {
        line: e.position().map_or(0, |p| p.line() as usize),
        msg: e.to_string(),
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Parse {
                line: 0,
                msg: format!("{other:?}"),
            },
        })?;
    let headers = reader.headers().map_err(parse_err)?.clone();
    let find = |name: &str| {
        headers.iter().position(|c| c == name).ok_or(Error::Parse {
            line: 1,
            msg: format!("missing column `{name}`"),
        })
    };
    let (it, ie) = (find("t")?, find("E")?);
    let mut t = Vec::new();
    let mut e = Vec::new();
    for row in reader.records() {
        let row = row.map_err(parse_err)?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let num = |j: usize| {
            row[j].parse::<f64>().map_err(|_| Error::Parse {
                line,
                msg: format!("`{}` is not a number", &row[j]),
            })
        };
        t.push(num(it)?);
        e.push(num(ie)?);
    }
    Ok((t, e))
}

/// Fits `E ≈ C0·e^{−δ0 t}`; exit 0 iff `δ0 > 0` and `r² ≥ 0.995`.
pub fn cmd_fit(csv: &Path, window: Option<(f64, f64)>, out: &mut dyn Write) -> i32 {
    let res = (|| -> Result<bool> {
        let (t, e) = read_energy_csv(csv)?;
        if t.is_empty() {
            return Err(Error::Contract("energy CSV has no data rows".into()));
        }
        let w = window.unwrap_or_else(|| default_window(t[0], t[t.len() - 1]));
        let fit = fit_decay(&t, &e, w)?;
        writeln!(out, "C0 = {}", fmt_f64(fit.c0))?;
        writeln!(out, "delta0 = {}", fmt_f64(fit.delta0))?;
        writeln!(out, "r_squared = {}", fmt_f64(fit.r_squared))?;
        writeln!(out, "window = {}:{}", fit.window.0, fit.window.1)?;
        writeln!(out, "points = {}", fit.points)?;
        Ok(fit.delta0 > 0.0 && fit.r_squared >= 0.995)
    })();
    match res {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            let _ = writeln!(
                out,
                "decay not established (need delta0 > 0 and r_squared >= 0.995)"
            );
            EXIT_FAILURE
        }
        Err(e) => report_error(out, &e),
    }
}

/// Reports the kernel, friction and Lyapunov-weight hypotheses. Exit 2 if any
/// fails; the override flag does not apply here.
pub fn cmd_check(config: Option<&Path>, out: &mut dyn Write) -> i32 {
    let res = (|| -> Result<bool> {
        let cfg = load_config(config, false)?;
        let kr = check_kernel(&cfg.kernel);
        writeln!(
            out,
            "kernel:   ok = {}  g0_positive = {}  l = {}  xi_estimate = {}",
            kr.ok, kr.g0_positive, kr.l, kr.xi_estimate
        )?;
        for r in &kr.reasons {
            writeln!(out, "          {r}")?;
        }
        let eps = cfg.friction.eps_prime;
        let fr = check_friction(&cfg.friction, eps, 100.0 * eps)?;
        writeln!(
            out,
            "friction: ok = {}  c_lower = {}  c_upper = {}  monotone = {}  (|s| in [{eps}, {}])",
            fr.ok,
            fr.c_lower,
            fr.c_upper,
            fr.monotone,
            100.0 * eps
        )?;
        let samples = 200;
        let mut worst = [f64::INFINITY; 6];
        for i in 0..=samples {
            let t = cfg.t_final * i as f64 / samples as f64;
            let c = check_weights(&cfg.weights, &cfg.kernel, &cfg.friction, t)?;
            for (w, v) in worst.iter_mut().zip(c.values) {
                *w = w.min(v);
            }
        }
        let weights_ok = worst.iter().all(|v| *v > 0.0);
        writeln!(
            out,
            "weights:  ok = {weights_ok}  (t in [0, {}])",
            cfg.t_final
        )?;
        for (i, v) in worst.iter().enumerate() {
            let status = if *v > 0.0 { "ok" } else { "FAIL" };
            writeln!(
                out,
                "          condition {}: min margin {v:.6e} {status}",
                i + 1
            )?;
        }
        Ok(kr.ok && fr.ok && weights_ok)
    })();
    match res {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_HYPOTHESIS,
        Err(e) => report_error(out, &e),
    }
}

/// Runs the invariant suite and prints a pass/fail table; exit 0 iff all pass.
pub fn cmd_verify(config: Option<&Path>, override_hypotheses: bool, out: &mut dyn Write) -> i32 {
    let cfg = match load_config(config, override_hypotheses) {
        Ok(c) => c,
        Err(e) => return report_error(out, &e),
    };
    if let Err(e) = cfg.check_hypotheses() {
        return report_error(out, &e);
    }
    let checks = verify::run_suite(&cfg);
    let _ = writeln!(out, "{:<22} {:<6} detail", "check", "status");
    for c in &checks {
        let _ = writeln!(out, "{:<22} {:<6} {}", c.name, c.status.label(), c.detail);
    }
    if checks.iter().all(|c| c.status != verify::Status::Fail) {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_parsing() {
        assert_eq!(parse_window("2:5").unwrap(), (2.0, 5.0));
        assert_eq!(parse_window(" 0.5 : 1e1 ").unwrap(), (0.5, 10.0));
        assert!(parse_window("5:2").is_err());
        assert!(parse_window("5").is_err());
        assert!(parse_window("a:b").is_err());
    }

    #[test]
    fn seventeen_digit_format_round_trips() {
        for x in [0.1, -1.0 / 3.0, 6.02214076e23, 1e-300, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(-0.0), "0.0000000000000000e0");
    }

    #[test]
    fn exit_code_mapping() {
        let blow = Error::AtStep {
            step: 3,
            t: 0.1,
            source: Box::new(Error::BlowUp {
                field: "v",
                magnitude: 1e13,
            }),
        };
        assert_eq!(exit_code(&blow), EXIT_BLOW_UP);
        assert_eq!(exit_code(&Error::Hypothesis("x".into())), EXIT_HYPOTHESIS);
        assert_eq!(exit_code(&Error::Contract("x".into())), EXIT_FAILURE);
    }
}
