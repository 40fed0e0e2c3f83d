//! Run specifications read from TOML documents with `[model]`, `[run]` and
//! `[output]` sections.

use std::fmt;
use std::path::PathBuf;

use serde::Deserialize;

use crate::effective::{Form, Substitution, DEFAULT_EPSILON4};
use crate::hierarchy::{Closure, InitMode, MAX_TRUNCATION};
use crate::model::OscillatorModel;
use crate::ode::Controls;
use crate::trajectory::Metric;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Hierarchy,
    Effective,
    Coefficients,
    Verify,
    Compare,
}

impl Mode {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "hierarchy" => Mode::Hierarchy,
            "effective" => Mode::Effective,
            "coefficients" => Mode::Coefficients,
            "verify" => Mode::Verify,
            "compare" => Mode::Compare,
            _ => return None,
        })
    }

    fn needs_model(self) -> bool {
        matches!(self, Mode::Hierarchy | Mode::Effective | Mode::Compare)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Hierarchy => "hierarchy",
            Mode::Effective => "effective",
            Mode::Coefficients => "coefficients",
            Mode::Verify => "verify",
            Mode::Compare => "compare",
        })
    }
}

/// Which groups of checks `verify` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Suite {
    #[default]
    All,
    Coefficients,
    Adiabatic,
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "all" => Ok(Suite::All),
            "coefficients" => Ok(Suite::Coefficients),
            "adiabatic" => Ok(Suite::Adiabatic),
            _ => Err(format!("unknown suite {s:?}, expected all, coefficients or adiabatic")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Initial {
    pub q0: f64,
    pub p0: f64,
    pub moments: InitMode,
}

/// Source of the two trajectories in compare mode.
#[derive(Debug, Clone, PartialEq)]
pub enum CompareSource {
    Files(PathBuf, PathBuf),
    /// Hierarchy against the reduced effective equation at each `hbar`.
    Sweep(Vec<f64>),
}

/// A validated run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub mode: Mode,
    /// `None` only for modes that do not integrate anything.
    pub model: Option<OscillatorModel>,
    pub initial: Initial,
    pub truncation: usize,
    pub hbar_order: u32,
    pub adiabatic_order: u32,
    pub closure: Closure,
    pub t_end: f64,
    pub controls: Controls,
    pub form: Form,
    pub substitution: Substitution,
    pub epsilon4: f64,
    pub seed: u64,
    pub samples: usize,
    /// Moment order for coefficient tables, residual bound for verify.
    pub n: usize,
    pub suite: Suite,
    pub compare: Option<CompareSource>,
    pub metric: Metric,
    pub workers: usize,
    pub output: Option<PathBuf>,
}

/// One semantic problem, located by its key path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub key: String,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid configuration:\n{}", .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<Violation>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: Option<RawModel>,
    #[serde(default)]
    run: RawRun,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(default = "one")]
    m: f64,
    #[serde(default = "one")]
    omega: f64,
    hbar: f64,
    /// `u_coeffs[k]` multiplies `q^k`.
    #[serde(default)]
    u_coeffs: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    mode: Option<String>,
    q0: Option<f64>,
    p0: Option<f64>,
    init: Option<String>,
    init_order: Option<u32>,
    truncation: Option<i64>,
    hbar_order: Option<i64>,
    adiabatic_order: Option<i64>,
    closure: Option<String>,
    t_end: Option<f64>,
    rel_tol: Option<f64>,
    abs_tol: Option<f64>,
    max_step: Option<f64>,
    fixed_step: Option<f64>,
    form: Option<String>,
    substitution: Option<String>,
    epsilon4: Option<f64>,
    seed: Option<u64>,
    samples: Option<i64>,
    n: Option<i64>,
    suite: Option<String>,
    inputs: Option<Vec<PathBuf>>,
    sweep: Option<Vec<f64>>,
    metric: Option<String>,
    workers: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    path: Option<PathBuf>,
}

struct Checker {
    violations: Vec<Violation>,
}

impl Checker {
    fn push(&mut self, key: &str, reason: impl Into<String>) {
        self.violations.push(Violation { key: key.to_string(), reason: reason.into() });
    }

    fn positive(&mut self, key: &str, v: Option<f64>, default: f64) -> f64 {
        match v {
            Some(x) if !(x.is_finite() && x > 0.0) => {
                self.push(key, format!("must be positive and finite, got {x}"));
                default
            }
            Some(x) => x,
            None => default,
        }
    }

    fn finite(&mut self, key: &str, v: Option<f64>, default: f64) -> f64 {
        match v {
            Some(x) if !x.is_finite() => {
                self.push(key, format!("must be finite, got {x}"));
                default
            }
            Some(x) => x,
            None => default,
        }
    }

    fn choice<T: Copy>(&mut self, key: &str, v: Option<&str>, options: &[(&str, T)], default: T) -> T {
        let Some(s) = v else { return default };
        match options.iter().find(|(name, _)| *name == s) {
            Some(&(_, value)) => value,
            None => {
                let names: Vec<_> = options.iter().map(|(n, _)| *n).collect();
                self.push(key, format!("unknown value {s:?}, expected one of {}", names.join(", ")));
                default
            }
        }
    }
}

/// Parses and validates a configuration. `mode` given on the command line
/// takes precedence over `run.mode`.
pub fn parse_config(text: &str, mode: Option<Mode>) -> Result<RunSpec, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    validate(raw, mode)
}

/// Validation for runs that have no configuration file at all.
pub fn default_spec(mode: Mode) -> Result<RunSpec, ConfigError> {
    validate(RawConfig::default(), Some(mode))
}

fn validate(raw: RawConfig, mode: Option<Mode>) -> Result<RunSpec, ConfigError> {
    let mut c = Checker { violations: Vec::new() };
    let run = raw.run;

    let mode = match (mode, run.mode.as_deref()) {
        (Some(m), _) => Some(m),
        (None, Some(s)) => {
            let m = Mode::parse(s);
            if m.is_none() {
                c.push("run.mode", format!(
                    "unknown mode {s:?}, expected hierarchy, effective, coefficients, verify or compare"
                ));
            }
            m
        }
        (None, None) => {
            c.push("run.mode", "missing; give it here or on the command line");
            None
        }
    };

    let model = match raw.model {
        Some(rm) => model_from_raw(&mut c, rm),
        None => {
            if mode.is_some_and(Mode::needs_model) {
                c.push("model", "section required for this mode");
            }
            None
        }
    };

    let q0 = c.finite("run.q0", run.q0, 1.0);
    let p0 = c.finite("run.p0", run.p0, 0.0);
    let init_order = run.init_order.unwrap_or(2);
    if init_order > 4 {
        c.push("run.init_order", format!("must be at most 4, got {init_order}"));
    }
    let moments = c.choice(
        "run.init",
        run.init.as_deref(),
        &[("harmonic", InitMode::HarmonicVacuum), ("adiabatic", InitMode::AdiabaticVacuum(init_order))],
        InitMode::HarmonicVacuum,
    );

    let truncation = match run.truncation {
        None => 2,
        Some(n) if n < 2 || n % 2 != 0 || n > MAX_TRUNCATION as i64 => {
            c.push("run.truncation", format!("must be even with 2 <= N <= {MAX_TRUNCATION}, got {n}"));
            2
        }
        Some(n) => n as usize,
    };
    let hbar_order = match run.hbar_order {
        None => 1,
        Some(k @ 0..=2) => k as u32,
        Some(k) => {
            c.push("run.hbar_order", format!("must be 0, 1 or 2, got {k}"));
            1
        }
    };
    let adiabatic_order = match run.adiabatic_order {
        None => 4,
        Some(k @ (0 | 2 | 4)) => k as u32,
        Some(k) => {
            c.push("run.adiabatic_order", format!("must be 0, 2 or 4, got {k}"));
            4
        }
    };
    let closure = c.choice(
        "run.closure",
        run.closure.as_deref(),
        &[("truncate", Closure::Truncate), ("adiabatic", Closure::Adiabatic)],
        Closure::Truncate,
    );

    let t_end = match run.t_end {
        Some(t) if !t.is_finite() => {
            c.push("run.t_end", format!("must be finite, got {t}"));
            0.0
        }
        Some(t) => t,
        None => {
            // Compared files carry their own time span.
            if mode.is_some_and(Mode::needs_model) && run.inputs.is_none() {
                c.push("run.t_end", "required for this mode");
            }
            0.0
        }
    };
    let defaults = Controls::default();
    let mut controls = Controls::with_tolerances(
        c.positive("run.rel_tol", run.rel_tol, defaults.rel_tol),
        c.positive("run.abs_tol", run.abs_tol, defaults.abs_tol),
    );
    if run.max_step.is_some() {
        controls.max_step = Some(c.positive("run.max_step", run.max_step, 1.0));
    }
    if run.fixed_step.is_some() {
        controls.fixed_step = Some(c.positive("run.fixed_step", run.fixed_step, 1.0));
    }

    let form = c.choice(
        "run.form",
        run.form.as_deref(),
        &[("reduced", Form::Reduced), ("fourth", Form::Fourth)],
        Form::Reduced,
    );
    let substitution = c.choice(
        "run.substitution",
        run.substitution.as_deref(),
        &[("explicit", Substitution::Explicit), ("iterated", Substitution::Iterated)],
        Substitution::Explicit,
    );
    let epsilon4 = c.positive("run.epsilon4", run.epsilon4, DEFAULT_EPSILON4);
    let samples = match run.samples {
        None => 100,
        Some(s) if s < 1 => {
            c.push("run.samples", format!("must be at least 1, got {s}"));
            100
        }
        Some(s) => s as usize,
    };

    let n = match (mode, run.n) {
        (_, None) => if mode == Some(Mode::Verify) { 8 } else { 2 },
        (Some(Mode::Verify), Some(n)) if !(2..=8).contains(&n) => {
            c.push("run.n", format!("residual checks cover 2 <= n <= 8, got {n}"));
            8
        }
        (Some(Mode::Verify), Some(n)) => n as usize,
        (_, Some(n)) if n < 1 || n > crate::coefficients::N_MAX as i64 => {
            c.push("run.n", format!("must satisfy 1 <= n <= {}, got {n}", crate::coefficients::N_MAX));
            2
        }
        (_, Some(n)) => n as usize,
    };
    let suite = match run.suite.as_deref().map(str::parse::<Suite>) {
        None => Suite::All,
        Some(Ok(s)) => s,
        Some(Err(e)) => {
            c.push("run.suite", e);
            Suite::All
        }
    };
    let metric = match run.metric.as_deref().map(str::parse::<Metric>) {
        None => Metric::Sup,
        Some(Ok(m)) => m,
        Some(Err(e)) => {
            c.push("run.metric", e.to_string());
            Metric::Sup
        }
    };
    let workers = match run.workers {
        None => 1,
        Some(w) if w < 1 => {
            c.push("run.workers", format!("must be at least 1, got {w}"));
            1
        }
        Some(w) => w as usize,
    };

    let compare = match (run.inputs, run.sweep) {
        (Some(_), Some(_)) => {
            c.push("run.inputs", "give either two inputs or an hbar sweep, not both");
            None
        }
        (Some(mut inputs), None) if inputs.len() == 2 => {
            let b = inputs.pop().expect("two inputs");
            let a = inputs.pop().expect("two inputs");
            Some(CompareSource::Files(a, b))
        }
        (Some(inputs), None) => {
            c.push("run.inputs", format!("compare needs exactly two trajectory inputs, got {}", inputs.len()));
            None
        }
        (None, Some(sweep)) => {
            if sweep.len() < 2 || sweep.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
                c.push("run.sweep", "needs at least two positive hbar values");
                None
            } else {
                Some(CompareSource::Sweep(sweep))
            }
        }
        (None, None) => {
            if mode == Some(Mode::Compare) {
                c.push("run.inputs", "compare needs two trajectory inputs or an hbar sweep");
            }
            None
        }
    };

    if !c.violations.is_empty() {
        return Err(ConfigError::Validation(c.violations));
    }
    Ok(RunSpec {
        mode: mode.expect("mode validated"),
        model,
        initial: Initial { q0, p0, moments },
        truncation,
        hbar_order,
        adiabatic_order,
        closure,
        t_end,
        controls,
        form,
        substitution,
        epsilon4,
        seed: run.seed.unwrap_or(DEFAULT_SEED),
        samples,
        n,
        suite,
        compare,
        metric,
        workers,
        output: raw.output.path,
    })
}

fn model_from_raw(c: &mut Checker, rm: RawModel) -> Option<OscillatorModel> {
    let before = c.violations.len();
    let m = c.positive("model.m", Some(rm.m), 1.0);
    let omega = c.positive("model.omega", Some(rm.omega), 1.0);
    if !(rm.hbar.is_finite() && rm.hbar >= 0.0) {
        c.push("model.hbar", format!("must be non-negative and finite, got {}", rm.hbar));
    }
    if c.violations.len() > before {
        return None;
    }
    match OscillatorModel::new(m, omega, rm.hbar, rm.u_coeffs) {
        Ok(model) => Some(model),
        Err(e) => {
            c.push("model.u_coeffs", e.to_string());
            None
        }
    }
}
