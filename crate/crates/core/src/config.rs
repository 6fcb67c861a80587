//! Plain `key = value` configuration files.
//!
//! `#` starts a comment, blank lines are ignored, every key may appear at
//! most once and missing keys keep their [`SimConfig::default`] values.
//!
//! | key | value |
//! |-----|-------|
//! | `coefficients.{rho1,rho2,rho3,k1,k2,mu,beta,delta,gamma,length}` | number |
//! | `kernel.family` | `exponential`, `zero` or `tabulated` |
//! | `kernel.a`, `kernel.b` | exponential kernel `a·e^{−bs}` |
//! | `kernel.times`, `kernel.values` | comma-separated samples (tabulated) |
//! | `kernel.table` | file of `s g` rows, alternative to the inline lists |
//! | `kernel.xi` | tail decay rate past the last sample (tabulated) |
//! | `friction.family` | `linear` or `rational_cubic` |
//! | `friction.alpha` | slope / scale |
//! | `friction.{c_lower,c_upper,eps_prime}` | declared hypothesis constants |
//! | `friction.comparison` | free-text name of the convex comparison function |
//! | `grid.n`, `time.dt`, `time.T`, `output.stride` | discretisation |
//! | `init.{phi0,phi1,psi0,psi1,theta0,theta1}` | `zero`, `sin<k>`, `cos<k>`, `bubble_sine`, or a nodal file |
//! | `weights.<name>` | Lyapunov weights, names as in [`LyapunovWeights::KEYS`] |
//! | `memory.eps_trunc` | history truncation threshold (0 keeps everything) |
//! | `memory.method` | `auto`, `direct` or `recursive` |
//! | `override.hypotheses` | `true` or `false` |
//!
//! Nodal files hold one value per grid node, separated by whitespace or
//! commas. Relative paths are resolved against the config file's directory.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::diagnostics::LyapunovWeights;
use crate::error::{Error, Result};
use crate::model::{
    FieldSpec, FrictionFamily, FrictionLaw, MemoryKernel, MemoryMethod, SimConfig, TabulatedKernel,
};

const COEFFICIENT_KEYS: [&str; 10] = [
    "rho1", "rho2", "rho3", "k1", "k2", "mu", "beta", "delta", "gamma", "length",
];
const INIT_KEYS: [&str; 6] = ["phi0", "phi1", "psi0", "psi1", "theta0", "theta1"];

/// Reads and parses a config file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<SimConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text, path.parent())
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn number(line: usize, key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| parse_err(line, format!("`{key}`: expected a number, got `{v}`")))?;
    if !x.is_finite() {
        return Err(parse_err(line, format!("`{key}` must be finite")));
    }
    Ok(x)
}

fn count(line: usize, key: &str, v: &str) -> Result<usize> {
    v.parse().map_err(|_| {
        parse_err(
            line,
            format!("`{key}`: expected a nonnegative integer, got `{v}`"),
        )
    })
}

fn number_list(line: usize, key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| number(line, key, s.trim())).collect()
}

/// Numbers in a data file: whitespace or comma separated, `#` comments.
fn read_numbers(line: usize, path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| parse_err(line, format!("cannot read `{}`: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let body = l.split('#').next().unwrap_or("");
        for tok in body
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
        {
            let x: f64 = tok.parse().map_err(|_| {
                parse_err(
                    line,
                    format!(
                        "`{}` line {}: `{tok}` is not a number",
                        path.display(),
                        i + 1
                    ),
                )
            })?;
            out.push(x);
        }
    }
    Ok(out)
}

fn resolve(base: Option<&Path>, v: &str) -> PathBuf {
    let p = PathBuf::from(v);
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p,
    }
}

fn field_spec(line: usize, v: &str, base: Option<&Path>) -> Result<FieldSpec> {
    let preset = |prefix: &str| -> Option<u32> {
        v.strip_prefix(prefix)
            .and_then(|k| k.parse::<u32>().ok())
            .filter(|k| *k >= 1)
    };
    if v == "zero" {
        return Ok(FieldSpec::Zero);
    }
    if v == "bubble_sine" {
        return Ok(FieldSpec::BubbleSine);
    }
    if let Some(k) = preset("sin") {
        return Ok(FieldSpec::Sine(k));
    }
    if let Some(k) = preset("cos") {
        return Ok(FieldSpec::Cosine(k));
    }
    let path = resolve(base, v);
    let values = read_numbers(line, &path)?;
    Ok(FieldSpec::Nodal {
        source: path.to_string_lossy().into_owned(),
        values,
    })
}

fn boolean(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(parse_err(
            line,
            format!("`{key}`: expected true or false, got `{v}`"),
        )),
    }
}

/// Parses config text; `base` resolves relative file paths.
pub fn parse_config_str(text: &str, base: Option<&Path>) -> Result<SimConfig> {
    let mut entries: HashMap<String, (usize, String)> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body
            .split_once('=')
            .ok_or_else(|| parse_err(line, format!("expected `key = value`, got `{body}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(parse_err(line, "empty key or value"));
        }
        if let Some((first, _)) = entries.get(k) {
            return Err(parse_err(
                line,
                format!("duplicate key `{k}` (first set on line {first})"),
            ));
        }
        entries.insert(k.to_string(), (line, v.to_string()));
    }

    let mut cfg = SimConfig::default();
    let mut kernel_keys: HashMap<&str, (usize, String)> = HashMap::new();
    let mut friction_keys: HashMap<&str, (usize, String)> = HashMap::new();
    let mut sorted: Vec<(&String, &(usize, String))> = entries.iter().collect();
    sorted.sort_by_key(|(_, (line, _))| *line);

    for (key, (line, v)) in sorted {
        let line = *line;
        let (section, name) = key
            .split_once('.')
            .ok_or_else(|| parse_err(line, format!("unknown key `{key}`")))?;
        let unknown = || parse_err(line, format!("unknown key `{key}`"));
        match section {
            "coefficients" => {
                let x = number(line, key, v)?;
                let c = &mut cfg.coefficients;
                let slot = match name {
                    "rho1" => &mut c.rho1,
                    "rho2" => &mut c.rho2,
                    "rho3" => &mut c.rho3,
                    "k1" => &mut c.k1,
                    "k2" => &mut c.k2,
                    "mu" => &mut c.mu,
                    "beta" => &mut c.beta,
                    "delta" => &mut c.delta,
                    "gamma" => &mut c.gamma,
                    "length" => &mut c.length,
                    _ => return Err(unknown()),
                };
                *slot = x;
                let positive = matches!(name, "rho1" | "rho2" | "rho3" | "k1" | "k2" | "length");
                if (positive && x <= 0.0) || x < 0.0 {
                    let bound = if positive { "> 0" } else { ">= 0" };
                    return Err(parse_err(line, format!("`{key}` must be {bound}, got {x}")));
                }
            }
            "kernel" => {
                let name = ["family", "a", "b", "times", "values", "table", "xi"]
                    .into_iter()
                    .find(|k| *k == name)
                    .ok_or_else(unknown)?;
                kernel_keys.insert(name, (line, v.clone()));
            }
            "friction" => {
                let name = [
                    "family",
                    "alpha",
                    "c_lower",
                    "c_upper",
                    "eps_prime",
                    "comparison",
                ]
                .into_iter()
                .find(|k| *k == name)
                .ok_or_else(unknown)?;
                friction_keys.insert(name, (line, v.clone()));
            }
            "grid" if name == "n" => {
                cfg.n = count(line, key, v)?;
                if cfg.n < 4 {
                    return Err(parse_err(
                        line,
                        format!("`grid.n` must be >= 4, got {}", cfg.n),
                    ));
                }
            }
            "time" if name == "dt" => {
                cfg.dt = number(line, key, v)?;
                if cfg.dt <= 0.0 {
                    return Err(parse_err(line, "`time.dt` must be > 0"));
                }
            }
            "time" if name == "T" => {
                cfg.t_final = number(line, key, v)?;
                if cfg.t_final < 0.0 {
                    return Err(parse_err(line, "`time.T` must be >= 0"));
                }
            }
            "output" if name == "stride" => {
                cfg.stride = count(line, key, v)?;
                if cfg.stride == 0 {
                    return Err(parse_err(line, "`output.stride` must be >= 1"));
                }
            }
            "memory" if name == "eps_trunc" => {
                cfg.eps_trunc = number(line, key, v)?;
                if cfg.eps_trunc < 0.0 {
                    return Err(parse_err(line, "`memory.eps_trunc` must be >= 0"));
                }
            }
            "memory" if name == "method" => {
                cfg.memory_method = match v.as_str() {
                    "auto" => MemoryMethod::Auto,
                    "direct" => MemoryMethod::Direct,
                    "recursive" => MemoryMethod::Recursive,
                    _ => return Err(parse_err(line, format!("unknown memory method `{v}`"))),
                };
            }
            "override" if name == "hypotheses" => {
                cfg.override_hypotheses = boolean(line, key, v)?;
            }
            "init" => {
                let spec = field_spec(line, v, base)?;
                let init = &mut cfg.initial;
                let slot = match name {
                    "phi0" => &mut init.phi0,
                    "phi1" => &mut init.phi1,
                    "psi0" => &mut init.psi0,
                    "psi1" => &mut init.psi1,
                    "theta0" => &mut init.theta0,
                    "theta1" => &mut init.theta1,
                    _ => return Err(unknown()),
                };
                *slot = spec;
            }
            "weights" => {
                let x = number(line, key, v)?;
                if !cfg.weights.set(name, x) {
                    return Err(unknown());
                }
                if x <= 0.0 {
                    return Err(parse_err(line, format!("`{key}` must be > 0")));
                }
            }
            _ => return Err(unknown()),
        }
    }

    cfg.kernel = build_kernel(&kernel_keys, base)?;
    cfg.friction = build_friction(&friction_keys)?;
    cfg.validate()?;
    Ok(cfg)
}

fn build_kernel(
    keys: &HashMap<&str, (usize, String)>,
    base: Option<&Path>,
) -> Result<MemoryKernel> {
    let get = |k: &str| keys.get(k).map(|(l, v)| (*l, v.as_str()));
    let (fline, family) = get("family").unwrap_or((0, "exponential"));
    let reject = |names: &[&str]| -> Result<()> {
        for n in names {
            if let Some((l, _)) = get(n) {
                return Err(parse_err(
                    l,
                    format!("`kernel.{n}` does not apply to family `{family}`"),
                ));
            }
        }
        Ok(())
    };
    match family {
        "zero" => {
            reject(&["a", "b", "times", "values", "table", "xi"])?;
            Ok(MemoryKernel::Zero)
        }
        "exponential" => {
            reject(&["times", "values", "table", "xi"])?;
            let a = match get("a") {
                Some((l, v)) => number(l, "kernel.a", v)?,
                None => 0.5,
            };
            let (bl, b) = match get("b") {
                Some((l, v)) => (l, number(l, "kernel.b", v)?),
                None => (fline, 1.0),
            };
            MemoryKernel::exponential(a, b).map_err(|e| parse_err(bl, e.to_string()))
        }
        "tabulated" => {
            reject(&["a", "b"])?;
            let (times, values) = match (get("table"), get("times"), get("values")) {
                (Some((l, v)), None, None) => {
                    let nums = read_numbers(l, &resolve(base, v))?;
                    if nums.len() % 2 != 0 {
                        return Err(parse_err(l, "kernel table needs `s g` pairs"));
                    }
                    let t = nums.iter().step_by(2).copied().collect();
                    let g = nums.iter().skip(1).step_by(2).copied().collect();
                    (t, g)
                }
                (None, Some((lt, t)), Some((lv, g))) => {
                    (number_list(lt, "kernel.times", t)?, number_list(lv, "kernel.values", g)?)
                }
                _ => {
                    return Err(parse_err(
                        fline,
                        "tabulated kernel needs either `kernel.table` or both `kernel.times` and `kernel.values`",
                    ))
                }
            };
            let (xl, xi) =
                get("xi").ok_or_else(|| parse_err(fline, "tabulated kernel needs `kernel.xi`"))?;
            let xi = number(xl, "kernel.xi", xi)?;
            TabulatedKernel::new(times, values, xi)
                .map(MemoryKernel::Tabulated)
                .map_err(|e| parse_err(fline, e.to_string()))
        }
        other => Err(parse_err(fline, format!("unknown kernel family `{other}`"))),
    }
}

fn build_friction(keys: &HashMap<&str, (usize, String)>) -> Result<FrictionLaw> {
    let get = |k: &str| keys.get(k).map(|(l, v)| (*l, v.as_str()));
    let alpha = match get("alpha") {
        Some((l, v)) => {
            let a = number(l, "friction.alpha", v)?;
            if a < 0.0 {
                return Err(parse_err(l, "`friction.alpha` must be >= 0"));
            }
            a
        }
        None => 1.0,
    };
    let mut law = match get("family") {
        None | Some((_, "linear")) => FrictionLaw::linear(alpha),
        Some((_, "rational_cubic")) => FrictionLaw::rational_cubic(alpha),
        Some((l, other)) => return Err(parse_err(l, format!("unknown friction family `{other}`"))),
    };
    for (name, slot) in [
        ("c_lower", &mut law.c_lower),
        ("c_upper", &mut law.c_upper),
        ("eps_prime", &mut law.eps_prime),
    ] {
        if let Some((l, v)) = get(name) {
            *slot = number(l, &format!("friction.{name}"), v)?;
        }
    }
    if !(law.eps_prime > 0.0) {
        let l = get("eps_prime").map_or(0, |(l, _)| l);
        return Err(parse_err(l, "`friction.eps_prime` must be > 0"));
    }
    law.comparison = get("comparison").map(|(_, v)| v.to_string());
    Ok(law)
}

fn spec_str(spec: &FieldSpec) -> String {
    match spec {
        FieldSpec::Zero => "zero".to_string(),
        FieldSpec::Sine(k) => format!("sin{k}"),
        FieldSpec::Cosine(k) => format!("cos{k}"),
        FieldSpec::BubbleSine => "bubble_sine".to_string(),
        FieldSpec::Nodal { source, .. } => source.clone(),
    }
}

fn list(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| format!("{x:?}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Writes every key explicitly. Floats use the shortest representation that
/// parses back to the same bits; nodal fields are written as their source path.
pub fn serialize_config(cfg: &SimConfig) -> String {
    let mut s = String::new();
    let c = &cfg.coefficients;
    let values = [
        c.rho1, c.rho2, c.rho3, c.k1, c.k2, c.mu, c.beta, c.delta, c.gamma, c.length,
    ];
    for (k, v) in COEFFICIENT_KEYS.iter().zip(values) {
        writeln!(s, "coefficients.{k} = {v:?}").unwrap();
    }
    match &cfg.kernel {
        MemoryKernel::Zero => writeln!(s, "kernel.family = zero").unwrap(),
        MemoryKernel::Exponential { a, b } => writeln!(
            s,
            "kernel.family = exponential\nkernel.a = {a:?}\nkernel.b = {b:?}"
        )
        .unwrap(),
        MemoryKernel::Tabulated(t) => {
            writeln!(s, "kernel.family = tabulated").unwrap();
            writeln!(s, "kernel.times = {}", list(t.times())).unwrap();
            writeln!(s, "kernel.values = {}", list(t.values())).unwrap();
            writeln!(s, "kernel.xi = {:?}", t.xi_bound()).unwrap();
        }
    }
    let f = &cfg.friction;
    let (family, alpha) = match f.family {
        FrictionFamily::Linear(a) => ("linear", a),
        FrictionFamily::RationalCubic(a) => ("rational_cubic", a),
    };
    writeln!(s, "friction.family = {family}\nfriction.alpha = {alpha:?}").unwrap();
    writeln!(
        s,
        "friction.c_lower = {:?}\nfriction.c_upper = {:?}\nfriction.eps_prime = {:?}",
        f.c_lower, f.c_upper, f.eps_prime
    )
    .unwrap();
    if let Some(name) = &f.comparison {
        writeln!(s, "friction.comparison = {name}").unwrap();
    }
    writeln!(s, "grid.n = {}", cfg.n).unwrap();
    writeln!(s, "time.dt = {:?}\ntime.T = {:?}", cfg.dt, cfg.t_final).unwrap();
    writeln!(s, "output.stride = {}", cfg.stride).unwrap();
    let init = &cfg.initial;
    let specs = [
        &init.phi0,
        &init.phi1,
        &init.psi0,
        &init.psi1,
        &init.theta0,
        &init.theta1,
    ];
    for (k, spec) in INIT_KEYS.iter().zip(specs) {
        writeln!(s, "init.{k} = {}", spec_str(spec)).unwrap();
    }
    for k in LyapunovWeights::KEYS {
        writeln!(s, "weights.{k} = {:?}", cfg.weights.get(k).unwrap()).unwrap();
    }
    writeln!(s, "memory.eps_trunc = {:?}", cfg.eps_trunc).unwrap();
    let method = match cfg.memory_method {
        MemoryMethod::Auto => "auto",
        MemoryMethod::Direct => "direct",
        MemoryMethod::Recursive => "recursive",
    };
    writeln!(s, "memory.method = {method}").unwrap();
    writeln!(s, "override.hypotheses = {}", cfg.override_hypotheses).unwrap();
    s
}
