use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn thermobeam(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thermobeam"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn zero_length_run_writes_one_row() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cfg.txt", "time.T = 0\ngrid.n = 16\n");
    let o = thermobeam(&["run", "--config", &cfg, "--out", "out"], dir.path());
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let csv = std::fs::read_to_string(dir.path().join("out/energy.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "t,E,D,residual,I1,I2,I3,I4,L,mean_z");
    assert!(lines[1].starts_with("0.0000000000000000e0,"));
    let manifest = std::fs::read_to_string(dir.path().join("out/manifest.txt")).unwrap();
    assert!(manifest.contains("command = run"));
    assert!(manifest.contains("time.T = 0.0"));
}

#[test]
fn run_output_is_deterministic_and_17_digit() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "cfg.txt",
        "grid.n = 16\ntime.T = 0.5\noutput.stride = 5\n",
    );
    for out in ["a", "b"] {
        let o = thermobeam(&["run", "--config", &cfg, "--out", out], dir.path());
        assert_eq!(code(&o), 0);
    }
    let a = std::fs::read(dir.path().join("a/energy.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/energy.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 101);
    for cell in rows[50].split(',') {
        let mantissa = cell.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17, "{cell}");
    }
}

#[test]
fn hypothesis_failure_exits_2_unless_overridden() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "cfg.txt",
        "kernel.a = 2\nkernel.b = 1\ngrid.n = 8\ntime.T = 0.1\n",
    );
    let o = thermobeam(&["run", "--config", &cfg, "--out", "o"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("l = -1 ≤ 0"), "{}", stdout(&o));
    let o = thermobeam(
        &[
            "run",
            "--config",
            &cfg,
            "--out",
            "o",
            "--override-hypotheses",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let o = thermobeam(&["check", "--config", &cfg], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn blow_up_exits_3() {
    // long-time stiffness k2 − ∫g = −1 with a fast kernel: the ψ modes grow
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "cfg.txt",
        "kernel.a = 200\nkernel.b = 100\ntime.T = 1\n",
    );
    let o = thermobeam(
        &[
            "run",
            "--config",
            &cfg,
            "--out",
            "o",
            "--override-hypotheses",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 3, "{}", stdout(&o));
    assert!(stdout(&o).contains("blow-up"));
}

#[test]
fn malformed_config_exits_1_with_line() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cfg.txt", "grid.n = 16\n\ncoefficients.rho9 = 1\n");
    let o = thermobeam(&["run", "--config", &cfg, "--out", "o"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("line 3"), "{}", stdout(&o));
    let o = thermobeam(
        &["run", "--config", "missing.txt", "--out", "o"],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn fit_recovers_exact_exponential() {
    let dir = TempDir::new().unwrap();
    let (c0, delta0) = (3.25, 0.7);
    let mut csv = String::from("t,E,D,residual,I1,I2,I3,I4,L,mean_z\n");
    for k in 0..=100 {
        let t = k as f64 * 0.05;
        csv.push_str(&format!(
            "{t},{},0,0,0,0,0,0,0,0\n",
            c0 * (-delta0 * t).exp()
        ));
    }
    let path = write(&dir, "energy.csv", &csv);
    let o = thermobeam(&["fit", &path, "--window", "1:5"], dir.path());
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let value = |key: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(key)).unwrap();
        line.split('=').nth(1).unwrap().trim().parse().unwrap()
    };
    assert!((value("C0") - c0).abs() < 1e-12);
    assert!((value("delta0") - delta0).abs() < 1e-12);
    assert!((value("r_squared") - 1.0).abs() < 1e-12);
    assert_eq!(value("points"), 81.0);
}

#[test]
fn fit_rejects_growth_and_bad_input() {
    let dir = TempDir::new().unwrap();
    let mut csv = String::from("t,E\n");
    for k in 0..=20 {
        let t = k as f64 * 0.1;
        csv.push_str(&format!("{t},{}\n", (0.3 * t).exp()));
    }
    let path = write(&dir, "grow.csv", &csv);
    assert_eq!(code(&thermobeam(&["fit", &path], dir.path())), 1);
    let bad = write(&dir, "bad.csv", "t,E\n0,1\n0.1,abc\n");
    let o = thermobeam(&["fit", &bad], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("line 3"));
    assert_eq!(
        code(&thermobeam(&["fit", &path, "--window", "5"], dir.path())),
        1
    );
}

#[test]
fn spectrum_is_sorted_and_recorded() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cfg.txt", "grid.n = 16\n");
    let o = thermobeam(&["spectrum", "--config", &cfg, "--out", "s"], dir.path());
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let csv = std::fs::read_to_string(dir.path().join("s/spectrum.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("re,im"));
    let re: Vec<f64> = lines
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    // φ, u, ψ, v, w on 15 interior nodes, θ and z on 16 mean-zero unknowns
    assert_eq!(re.len(), 5 * 15 + 2 * 16);
    assert!(re.windows(2).all(|w| w[0] >= w[1]));
    assert!(re[0] < 0.0);
    let manifest = std::fs::read_to_string(dir.path().join("s/manifest.txt")).unwrap();
    let abscissa: f64 = manifest
        .lines()
        .find_map(|l| l.strip_prefix("abscissa = "))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(abscissa, re[0]);

    let nonlinear = write(
        &dir,
        "nl.txt",
        "grid.n = 16\nfriction.family = rational_cubic\n",
    );
    assert_eq!(
        code(&thermobeam(
            &["spectrum", "--config", &nonlinear, "--out", "s2"],
            dir.path()
        )),
        1
    );
}

#[test]
fn check_reports_default_hypotheses() {
    let dir = TempDir::new().unwrap();
    let o = thermobeam(&["check"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("l = 0.5"));
}

#[test]
fn verify_default_config_passes() {
    let dir = TempDir::new().unwrap();
    let o = thermobeam(&["verify"], dir.path());
    let text = stdout(&o);
    assert_eq!(code(&o), 0, "{text}");
    for name in [
        "energy identity",
        "mean conservation",
        "convolution oracle",
        "resolvent",
        "coercivity",
    ] {
        let line = text.lines().find(|l| l.starts_with(name)).unwrap();
        assert!(line.contains("PASS"), "{line}");
    }
}

#[test]
fn verify_skips_linear_checks_for_nonlinear_friction() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "cfg.txt",
        "grid.n = 16\ntime.T = 1\nfriction.family = rational_cubic\n",
    );
    let o = thermobeam(&["verify", "--config", &cfg], dir.path());
    let text = stdout(&o);
    assert!(
        text.lines()
            .any(|l| l.starts_with("resolvent") && l.contains("SKIP")),
        "{text}"
    );
}
