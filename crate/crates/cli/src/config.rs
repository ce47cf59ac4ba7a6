//! Run configuration: a line-based `[section]` / `key = value` format with
//! `#` comments.
//!
//! Every key is optional; missing keys take the defaults shown by
//! [`RunConfig::default`] (and by `render(&RunConfig::default())`). Unknown
//! sections and keys are rejected. A key given twice keeps the last value
//! and adds a warning.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use lyapdecay_core::bogovskii::SaddleSolverConfig;
use lyapdecay_core::poisson::InnerSolver;
use lyapdecay_core::solver::SolverConfig;
use lyapdecay_core::{FluidParams, GridSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidSection {
    pub gamma: f64,
    pub mu: f64,
    pub lambda: f64,
    pub rho_bar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovSection {
    pub sigma_auto: bool,
    /// Used when `sigma_auto` is false.
    pub sigma: Option<f64>,
    /// The decay fit uses `[fraction * t_end, t_end]`.
    pub fit_window_start_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    Equilibrium,
    GaussianBump,
    Random,
    Vortex,
}

impl PresetName {
    pub const ALL: [PresetName; 4] = [
        PresetName::Equilibrium,
        PresetName::GaussianBump,
        PresetName::Random,
        PresetName::Vortex,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Equilibrium => "equilibrium",
            PresetName::GaussianBump => "gaussian-bump",
            PresetName::Random => "random",
            PresetName::Vortex => "vortex",
        }
    }
}

impl FromStr for PresetName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown preset {s:?} (expected equilibrium, gaussian-bump, random or vortex)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitSection {
    pub preset: PresetName,
    pub amplitude: f64,
    pub seed: u64,
    /// Equilibrium density the perturbation is built around.
    pub rho_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub csv_path: String,
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridSection,
    pub fluid: FluidSection,
    pub solver: SolverConfig,
    pub lyapunov: LyapunovSection,
    pub init: InitSection,
    pub output: OutputSection,
    pub bogovskii: SaddleSolverConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridSection {
                nx: 64,
                ny: 64,
                lx: 1.0,
                ly: 1.0,
            },
            fluid: FluidSection {
                gamma: 1.4,
                mu: 0.1,
                lambda: 0.0,
                rho_bar: 4.0,
            },
            solver: SolverConfig::default(),
            lyapunov: LyapunovSection {
                sigma_auto: true,
                sigma: None,
                fit_window_start_fraction: 0.25,
            },
            init: InitSection {
                preset: PresetName::Equilibrium,
                amplitude: 0.1,
                seed: 0,
                rho_s: 1.0,
            },
            output: OutputSection {
                csv_path: "diagnostics.csv".into(),
                svg: false,
            },
            bogovskii: SaddleSolverConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn grid_spec(&self) -> GridSpec {
        GridSpec::new(self.grid.nx, self.grid.ny, self.grid.lx, self.grid.ly).expect("validated")
    }

    pub fn fluid_params(&self) -> FluidParams {
        let f = &self.fluid;
        FluidParams::new(f.gamma, f.mu, f.lambda, f.rho_bar).expect("validated")
    }

    pub fn fit_window(&self) -> (f64, f64) {
        let t_end = self.solver.t_end;
        (self.lyapunov.fit_window_start_fraction * t_end, t_end)
    }
}

/// A parsed configuration and the warnings raised while reading it.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub config: RunConfig,
    pub warnings: Vec<String>,
}

fn err(line: Option<usize>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    for (k, c) in line.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..k],
            _ => {}
        }
    }
    line
}

fn unquote(raw: &str) -> &str {
    raw.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(raw)
}

fn parse_value<T: FromStr>(raw: &str, line: usize, key: &str, what: &str) -> Result<T, ConfigError> {
    unquote(raw)
        .parse()
        .map_err(|_| err(Some(line), format!("{key}: expected {what}, got {raw:?}")))
}

fn parse_bool(raw: &str, line: usize, key: &str) -> Result<bool, ConfigError> {
    parse_value(raw, line, key, "true or false")
}

fn parse_f64(raw: &str, line: usize, key: &str) -> Result<f64, ConfigError> {
    let v: f64 = parse_value(raw, line, key, "a number")?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(err(Some(line), format!("{key}: value must be finite, got {raw:?}")))
    }
}

const KEYS: &[(&str, &[&str])] = &[
    ("grid", &["nx", "ny", "lx", "ly"]),
    ("fluid", &["gamma", "mu", "lambda", "rho_bar"]),
    ("solver", &["cfl", "visc_safety", "rho_floor", "t_end", "output_dt"]),
    ("lyapunov", &["sigma_auto", "sigma", "fit_window_start_fraction"]),
    ("init", &["preset", "amplitude", "seed", "rho_s"]),
    ("output", &["csv_path", "svg"]),
    ("bogovskii", &["tol", "max_iter", "mean_tol", "inner"]),
];

pub fn parse_config(text: &str) -> Result<ParsedConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut warnings = Vec::new();
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    let mut section: Option<&'static str> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let ln = idx + 1;
        let line = strip_comment(raw_line).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(Some(ln), format!("malformed section header {line:?}")))?
                .trim();
            let known = KEYS
                .iter()
                .find(|(s, _)| *s == name)
                .ok_or_else(|| err(Some(ln), format!("unknown section [{name}]")))?;
            section = Some(known.0);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(Some(ln), format!("expected `key = value`, got {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section.ok_or_else(|| err(Some(ln), format!("key {key:?} appears before any [section]")))?;
        let allowed = KEYS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key) {
            return Err(err(Some(ln), format!("unknown key {key:?} in [{sec}]")));
        }
        if value.is_empty() {
            return Err(err(Some(ln), format!("{key}: missing value")));
        }
        if let Some(prev) = seen.insert((sec.to_string(), key.to_string()), ln) {
            warnings.push(format!("line {ln}: [{sec}] {key} repeats line {prev}; the last value wins"));
        }
        match (sec, key) {
            ("grid", "nx") => cfg.grid.nx = parse_value(value, ln, key, "a positive integer")?,
            ("grid", "ny") => cfg.grid.ny = parse_value(value, ln, key, "a positive integer")?,
            ("grid", "lx") => cfg.grid.lx = parse_f64(value, ln, key)?,
            ("grid", "ly") => cfg.grid.ly = parse_f64(value, ln, key)?,
            ("fluid", "gamma") => cfg.fluid.gamma = parse_f64(value, ln, key)?,
            ("fluid", "mu") => cfg.fluid.mu = parse_f64(value, ln, key)?,
            ("fluid", "lambda") => cfg.fluid.lambda = parse_f64(value, ln, key)?,
            ("fluid", "rho_bar") => cfg.fluid.rho_bar = parse_f64(value, ln, key)?,
            ("solver", "cfl") => cfg.solver.cfl = parse_f64(value, ln, key)?,
            ("solver", "visc_safety") => cfg.solver.visc_safety = parse_f64(value, ln, key)?,
            ("solver", "rho_floor") => cfg.solver.rho_floor = parse_f64(value, ln, key)?,
            ("solver", "t_end") => cfg.solver.t_end = parse_f64(value, ln, key)?,
            ("solver", "output_dt") => cfg.solver.output_dt = parse_f64(value, ln, key)?,
            ("lyapunov", "sigma_auto") => cfg.lyapunov.sigma_auto = parse_bool(value, ln, key)?,
            ("lyapunov", "sigma") => cfg.lyapunov.sigma = Some(parse_f64(value, ln, key)?),
            ("lyapunov", "fit_window_start_fraction") => {
                cfg.lyapunov.fit_window_start_fraction = parse_f64(value, ln, key)?
            }
            ("init", "preset") => cfg.init.preset = unquote(value).parse().map_err(|m| err(Some(ln), m))?,
            ("init", "amplitude") => cfg.init.amplitude = parse_f64(value, ln, key)?,
            ("init", "seed") => cfg.init.seed = parse_value(value, ln, key, "a nonnegative integer")?,
            ("init", "rho_s") => cfg.init.rho_s = parse_f64(value, ln, key)?,
            ("output", "csv_path") => cfg.output.csv_path = unquote(value).to_string(),
            ("output", "svg") => cfg.output.svg = parse_bool(value, ln, key)?,
            ("bogovskii", "tol") => cfg.bogovskii.tol = parse_f64(value, ln, key)?,
            ("bogovskii", "max_iter") => {
                cfg.bogovskii.max_iter = Some(parse_value(value, ln, key, "a positive integer")?)
            }
            ("bogovskii", "mean_tol") => cfg.bogovskii.mean_tol = parse_f64(value, ln, key)?,
            ("bogovskii", "inner") => {
                cfg.bogovskii.inner = match unquote(value) {
                    "fast" => InnerSolver::FastDiagonalization,
                    "cg" => InnerSolver::ConjugateGradient,
                    other => return Err(err(Some(ln), format!("inner: expected \"fast\" or \"cg\", got {other:?}"))),
                }
            }
            _ => unreachable!("key list and match arms agree"),
        }
    }

    let line_of = |sec: &str, key: &str| seen.get(&(sec.to_string(), key.to_string())).copied();
    validate(&cfg, &line_of)?;
    Ok(ParsedConfig { config: cfg, warnings })
}

fn validate(cfg: &RunConfig, line_of: &dyn Fn(&str, &str) -> Option<usize>) -> Result<(), ConfigError> {
    let first_line = |keys: &[(&str, &str)]| keys.iter().filter_map(|(s, k)| line_of(s, k)).max();
    let g = &cfg.grid;
    GridSpec::new(g.nx, g.ny, g.lx, g.ly)
        .map_err(|e| err(first_line(&[("grid", "nx"), ("grid", "ny"), ("grid", "lx"), ("grid", "ly")]), e.to_string()))?;
    let f = &cfg.fluid;
    FluidParams::new(f.gamma, f.mu, f.lambda, f.rho_bar).map_err(|e| {
        err(
            first_line(&[("fluid", "gamma"), ("fluid", "mu"), ("fluid", "lambda"), ("fluid", "rho_bar")]),
            e.to_string(),
        )
    })?;
    cfg.solver.validate().map_err(|e| {
        err(
            first_line(&[
                ("solver", "cfl"),
                ("solver", "visc_safety"),
                ("solver", "rho_floor"),
                ("solver", "t_end"),
                ("solver", "output_dt"),
            ]),
            e.to_string(),
        )
    })?;
    cfg.bogovskii.validate().map_err(|e| {
        err(
            first_line(&[("bogovskii", "tol"), ("bogovskii", "max_iter"), ("bogovskii", "mean_tol")]),
            e.to_string(),
        )
    })?;

    let l = &cfg.lyapunov;
    if !(0.0..1.0).contains(&l.fit_window_start_fraction) {
        return Err(err(
            line_of("lyapunov", "fit_window_start_fraction"),
            format!("fit_window_start_fraction must lie in [0, 1), got {}", l.fit_window_start_fraction),
        ));
    }
    match (l.sigma_auto, l.sigma) {
        (false, None) => {
            return Err(err(
                line_of("lyapunov", "sigma_auto"),
                "sigma_auto = false requires an explicit sigma",
            ))
        }
        (_, Some(s)) if !(s >= 0.0) => {
            return Err(err(line_of("lyapunov", "sigma"), format!("sigma must be >= 0, got {s}")))
        }
        _ => {}
    }

    let i = &cfg.init;
    if !(i.amplitude >= 0.0) {
        return Err(err(line_of("init", "amplitude"), format!("amplitude must be >= 0, got {}", i.amplitude)));
    }
    if !(i.rho_s > 0.0) {
        return Err(err(line_of("init", "rho_s"), format!("rho_s must be positive, got {}", i.rho_s)));
    }
    if !(i.rho_s < f.rho_bar) {
        return Err(err(
            first_line(&[("init", "rho_s"), ("fluid", "rho_bar")]),
            format!("rho_s = {} must lie below rho_bar = {}", i.rho_s, f.rho_bar),
        ));
    }
    if cfg.output.csv_path.is_empty() || cfg.output.csv_path.contains('"') {
        return Err(err(line_of("output", "csv_path"), "csv_path must be a nonempty path without quotes"));
    }
    Ok(())
}

/// Serializes every field, so that `parse_config(&render(c))` reproduces `c`.
pub fn render(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let g = &cfg.grid;
    let _ = writeln!(s, "[grid]\nnx = {}\nny = {}\nlx = {:?}\nly = {:?}\n", g.nx, g.ny, g.lx, g.ly);
    let f = &cfg.fluid;
    let _ = writeln!(
        s,
        "[fluid]\ngamma = {:?}\nmu = {:?}\nlambda = {:?}\nrho_bar = {:?}\n",
        f.gamma, f.mu, f.lambda, f.rho_bar
    );
    let v = &cfg.solver;
    let _ = writeln!(
        s,
        "[solver]\ncfl = {:?}\nvisc_safety = {:?}\nrho_floor = {:?}\nt_end = {:?}\noutput_dt = {:?}\n",
        v.cfl, v.visc_safety, v.rho_floor, v.t_end, v.output_dt
    );
    let l = &cfg.lyapunov;
    let _ = writeln!(s, "[lyapunov]\nsigma_auto = {}", l.sigma_auto);
    if let Some(sigma) = l.sigma {
        let _ = writeln!(s, "sigma = {sigma:?}");
    }
    let _ = writeln!(s, "fit_window_start_fraction = {:?}\n", l.fit_window_start_fraction);
    let i = &cfg.init;
    let _ = writeln!(
        s,
        "[init]\npreset = \"{}\"\namplitude = {:?}\nseed = {}\nrho_s = {:?}\n",
        i.preset.as_str(),
        i.amplitude,
        i.seed,
        i.rho_s
    );
    let o = &cfg.output;
    let _ = writeln!(s, "[output]\ncsv_path = \"{}\"\nsvg = {}\n", o.csv_path, o.svg);
    let b = &cfg.bogovskii;
    let _ = writeln!(s, "[bogovskii]\ntol = {:?}", b.tol);
    if let Some(m) = b.max_iter {
        let _ = writeln!(s, "max_iter = {m}");
    }
    let inner = match b.inner {
        InnerSolver::FastDiagonalization => "fast",
        InnerSolver::ConjugateGradient => "cg",
    };
    let _ = writeln!(s, "mean_tol = {:?}\ninner = \"{inner}\"", b.mean_tol);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_blank_sections_give_defaults() {
        let p = parse_config("").unwrap();
        assert_eq!(p.config, RunConfig::default());
        let p = parse_config("[grid]\n[fluid]\n# nothing\n[solver]\n").unwrap();
        assert_eq!(p.config, RunConfig::default());
        assert!(p.warnings.is_empty());
        let c = p.config;
        assert_eq!((c.grid.nx, c.grid.ny), (64, 64));
        assert_eq!(c.solver.t_end, 2.0);
        assert_eq!(c.solver.output_dt, 0.01);
        assert_eq!(c.init.preset, PresetName::Equilibrium);
    }

    #[test]
    fn values_comments_and_quotes() {
        let text = "[init]\npreset = \"gaussian-bump\"   # bump\namplitude = 0.2\n[output]\ncsv_path = \"out#1.csv\"\nsvg = true\n";
        let c = parse_config(text).unwrap().config;
        assert_eq!(c.init.preset, PresetName::GaussianBump);
        assert_eq!(c.init.amplitude, 0.2);
        assert_eq!(c.output.csv_path, "out#1.csv");
        assert!(c.output.svg);
    }

    #[test]
    fn viscosity_constraint_rejected() {
        let e = parse_config("[fluid]\nmu = 0.1\nlambda = -0.2\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.message.contains("lambda"), "{e}");
    }

    #[test]
    fn syntax_and_unknown_keys() {
        let e = parse_config("[grid]\nnx 12\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = parse_config("[grid]\nnz = 12\n").unwrap_err();
        assert!(e.message.contains("unknown key"));
        let e = parse_config("[mesh]\n").unwrap_err();
        assert!(e.message.contains("unknown section"));
        let e = parse_config("nx = 3\n").unwrap_err();
        assert_eq!(e.line, Some(1));
        let e = parse_config("[grid]\nnx = -3\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = parse_config("[init]\npreset = swirl\n").unwrap_err();
        assert!(e.message.contains("unknown preset"));
    }

    #[test]
    fn duplicate_key_last_wins_with_warning() {
        let p = parse_config("[grid]\nnx = 16\nnx = 32\n").unwrap();
        assert_eq!(p.config.grid.nx, 32);
        assert_eq!(p.warnings.len(), 1);
        assert!(p.warnings[0].contains("line 3"));
    }

    #[test]
    fn cross_field_invariants() {
        assert!(parse_config("[lyapunov]\nsigma_auto = false\n").is_err());
        assert!(parse_config("[lyapunov]\nsigma_auto = false\nsigma = 0.05\n").is_ok());
        assert!(parse_config("[lyapunov]\nfit_window_start_fraction = 1.0\n").is_err());
        assert!(parse_config("[init]\nrho_s = 5\n").is_err());
        assert!(parse_config("[init]\namplitude = -1\n").is_err());
        assert!(parse_config("[solver]\ncfl = 1.2\n").is_err());
        assert!(parse_config("[grid]\nlx = inf\n").is_err());
    }

    #[test]
    fn default_round_trips() {
        let d = RunConfig::default();
        assert_eq!(parse_config(&render(&d)).unwrap().config, d);
    }
}
