//! Command-line front end: `qmoments <mode> [--config <path>] [--out <path>] [--seed <int>]`.
//!
//! Exit codes: 0 success, 1 integration or output failure, 2 verification
//! failure, 3 configuration error.

use std::ffi::OsString;
use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adiabatic::{self, residual};
use crate::coefficients::{self, format_rational, magnitude, Rational};
use crate::config::{self, CompareSource, ConfigError, Mode, RunSpec, Suite};
use crate::effective::{self, EffectiveOptions};
use crate::error::Error;
use crate::hierarchy::{self, HierarchyOptions, RhsOptions};
use crate::model::OscillatorModel;
use crate::trajectory::{self, Trajectory};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUN_FAILURE: i32 = 1;
pub const EXIT_VERIFY_FAILURE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

/// Residual bound shared by every floating-point check in `verify`.
pub const RESIDUAL_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "qmoments", version, about = "Moment hierarchies and effective equations of anharmonic oscillators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run specification.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output path; overrides `[output] path`. Standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for sampled checks; overrides `run.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the truncated moment hierarchy and write a CSV trajectory.
    Hierarchy(Common),
    /// Integrate the effective equation of motion and write a CSV trajectory.
    Effective(Common),
    /// Print the exact coefficient tables for one order.
    Coefficients {
        #[command(flatten)]
        common: Common,
        /// Even n prints C, A, B, A', B'; odd n prints D and D~.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run the identity and residual checks.
    Verify {
        #[command(flatten)]
        common: Common,
        /// all, coefficients or adiabatic.
        suite: Option<Suite>,
    },
    /// Compare two trajectories, or sweep hbar comparing hierarchy and effective runs.
    Compare(Common),
}

/// Failure of a run, mapped to an exit code.
#[derive(Debug)]
pub enum RunError {
    Config(String),
    Run(String),
    Verification(usize),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Run(_) => EXIT_RUN_FAILURE,
            RunError::Verification(_) => EXIT_VERIFY_FAILURE,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(s) => write!(f, "configuration error: {s}"),
            RunError::Run(s) => write!(f, "{s}"),
            RunError::Verification(k) => write!(f, "{k} check(s) failed"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e.to_string())
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Run(e.to_string())
    }
}

impl From<io::Error> for RunError {
    fn from(e: io::Error) -> Self {
        RunError::Run(format!("output: {e}"))
    }
}

/// Parses arguments, runs, reports errors on stderr and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load(mode: Mode, common: &Common) -> Result<RunSpec, RunError> {
    let mut spec = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
            config::parse_config(&text, Some(mode))?
        }
        None => config::default_spec(mode)?,
    };
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    if let Some(out) = &common.out {
        spec.output = Some(out.clone());
    }
    Ok(spec)
}

pub fn execute(cli: Cli) -> Result<(), RunError> {
    let spec = match &cli.command {
        Command::Hierarchy(c) => load(Mode::Hierarchy, c)?,
        Command::Effective(c) => load(Mode::Effective, c)?,
        Command::Compare(c) => load(Mode::Compare, c)?,
        Command::Coefficients { common, n } => {
            let mut spec = load(Mode::Coefficients, common)?;
            if let Some(n) = n {
                spec.n = *n;
            }
            spec
        }
        Command::Verify { common, suite } => {
            let mut spec = load(Mode::Verify, common)?;
            if let Some(s) = suite {
                spec.suite = *s;
            }
            spec
        }
    };
    run(&spec)
}

/// Runs a validated specification, writing to `spec.output` or stdout.
pub fn run(spec: &RunSpec) -> Result<(), RunError> {
    let mut out: Box<dyn Write> = match &spec.output {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|e| {
            RunError::Run(format!("cannot create {}: {e}", path.display()))
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let result = dispatch(spec, &mut out);
    out.flush()?;
    result
}

fn dispatch(spec: &RunSpec, out: &mut dyn Write) -> Result<(), RunError> {
    match spec.mode {
        Mode::Hierarchy => {
            let traj = run_hierarchy(spec, model_of(spec)?)?;
            traj.write_csv(out)?;
        }
        Mode::Effective => {
            let traj = run_effective(spec, model_of(spec)?)?;
            traj.write_csv(out)?;
        }
        Mode::Coefficients => write_coefficients(spec.n, out)?,
        Mode::Verify => {
            let default_model = OscillatorModel::quartic(1e-3);
            let model = spec.model.as_ref().unwrap_or(&default_model);
            let report = verify_all(model, spec.suite, spec.seed, spec.samples, spec.n);
            write!(out, "{report}")?;
            let failed = report.failures();
            if failed > 0 {
                return Err(RunError::Verification(failed));
            }
        }
        Mode::Compare => {
            let (value, slope) = run_compare(spec)?;
            writeln!(out, "{},{value:.16e},{}", spec.metric, format_slope(slope))?;
        }
    }
    Ok(())
}

fn format_slope(slope: Option<f64>) -> String {
    match slope {
        Some(s) => format!("{s:.6}"),
        None => "nan".to_string(),
    }
}

fn model_of(spec: &RunSpec) -> Result<&OscillatorModel, RunError> {
    spec.model.as_ref().ok_or_else(|| RunError::Config("model section required".into()))
}

pub fn run_hierarchy(spec: &RunSpec, model: &OscillatorModel) -> Result<Trajectory, RunError> {
    let init = &spec.initial;
    let state = hierarchy::init_state(model, init.q0, init.p0, spec.truncation, init.moments)?;
    let opts = HierarchyOptions {
        rhs: RhsOptions { hbar_order: spec.hbar_order, closure: spec.closure },
        controls: spec.controls,
    };
    Ok(hierarchy::integrate(model, &state, spec.t_end, &opts)?)
}

pub fn run_effective(spec: &RunSpec, model: &OscillatorModel) -> Result<Trajectory, RunError> {
    let opts = EffectiveOptions {
        form: spec.form,
        adiabatic_order: spec.adiabatic_order,
        substitution: spec.substitution,
        epsilon4: spec.epsilon4,
        controls: spec.controls,
    };
    Ok(effective::integrate_effective(model, spec.initial.q0, spec.initial.p0, spec.t_end, &opts)?)
}

fn read_trajectory(path: &Path, m: f64) -> Result<Trajectory, RunError> {
    let file = File::open(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
    Trajectory::read_csv(BufReader::new(file), m)
        .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
}

/// Gap between the two sources. A sweep reports the gap at its smallest
/// `hbar` together with the log-log slope of gap against `hbar`.
pub fn run_compare(spec: &RunSpec) -> Result<(f64, Option<f64>), RunError> {
    match spec.compare.as_ref().ok_or_else(|| RunError::Config("nothing to compare".into()))? {
        CompareSource::Files(a, b) => {
            let m = spec.model.as_ref().map_or(1.0, OscillatorModel::m);
            let ta = read_trajectory(a, m)?;
            let tb = read_trajectory(b, m)?;
            Ok((trajectory::compare(&ta, &tb, spec.metric)?, None))
        }
        CompareSource::Sweep(hbars) => {
            let gaps = sweep_gaps(spec, model_of(spec)?, hbars)?;
            let (i_min, _) = hbars
                .iter()
                .enumerate()
                .min_by(|x, y| x.1.total_cmp(y.1))
                .expect("non-empty sweep");
            Ok((gaps[i_min], Some(trajectory::log_log_slope(hbars, &gaps))))
        }
    }
}

/// Hierarchy-versus-effective gap for each `hbar`, spread over `spec.workers` threads.
pub fn sweep_gaps(spec: &RunSpec, model: &OscillatorModel, hbars: &[f64]) -> Result<Vec<f64>, RunError> {
    let one = |h: f64| -> Result<f64, RunError> {
        let m = model.with_hbar(h)?;
        let a = run_hierarchy(spec, &m)?;
        let b = run_effective(spec, &m)?;
        Ok(trajectory::compare(&a, &b, spec.metric)?)
    };
    let chunk = hbars.len().div_ceil(spec.workers.max(1));
    std::thread::scope(|s| {
        let handles: Vec<_> = hbars
            .chunks(chunk)
            .map(|c| s.spawn(move || c.iter().map(|&h| one(h)).collect::<Result<Vec<_>, _>>()))
            .collect();
        let mut gaps = Vec::with_capacity(hbars.len());
        for h in handles {
            gaps.extend(h.join().expect("sweep worker panicked")?);
        }
        Ok(gaps)
    })
}

fn write_coefficients(n: usize, out: &mut dyn Write) -> Result<(), RunError> {
    if n % 2 == 0 {
        writeln!(out, "{}", coefficients::CoeffTable::new(n)?)?;
    } else {
        for (a, v) in coefficients::d_table(n)? {
            writeln!(out, "D[{a},{n}]={}", format_rational(&v))?;
        }
        for (a, v) in coefficients::d_tilde_table(n)? {
            writeln!(out, "D~[{a},{n}]={}", format_rational(&v))?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "CHECK {} {status} value={:e} threshold={:e}", self.name, self.value, self.threshold)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    fn bound(&mut self, name: impl Into<String>, value: f64, threshold: f64) {
        let pass = value <= threshold;
        self.checks.push(Check { name: name.into(), pass, value, threshold });
    }

    fn exact(&mut self, name: impl Into<String>, diff: &Rational) {
        let pass = diff.is_zero();
        self.checks.push(Check { name: name.into(), pass, value: magnitude(diff), threshold: 0.0 });
    }

    fn error(&mut self, name: impl Into<String>, e: &Error) {
        eprintln!("check error: {e}");
        self.checks.push(Check { name: name.into(), pass: false, value: f64::NAN, threshold: 0.0 });
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.pass).count()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Identity and residual checks. Failures are report content, never errors.
/// `n_residual` bounds the moment order of the residual families.
pub fn verify_all(model: &OscillatorModel, suite: Suite, seed: u64, samples: usize, n_residual: usize) -> Report {
    let mut report = Report::default();
    if matches!(suite, Suite::All | Suite::Coefficients) {
        coefficient_checks(&mut report);
    }
    if matches!(suite, Suite::All | Suite::Adiabatic) {
        adiabatic_checks(&mut report, model, seed, samples, n_residual);
    }
    report
}

fn coefficient_checks(report: &mut Report) {
    match coefficients::ap_bp(2) {
        Ok((ap, bp)) => {
            report.exact("a_prime_2", &(ap - Rational::new(1.into(), 16.into())));
            report.exact("b_prime_2", &(bp + Rational::new(5.into(), 16.into())));
        }
        Err(e) => report.error("a_prime_2", &e),
    }
    for n in (2..=coefficients::N_MAX).step_by(2) {
        match coefficients::identity_report(n) {
            Ok(r) => {
                report.exact(format!("weighted_ab_sum_n{n}"), &r.weighted_ab_sum);
                report.exact(format!("binomial_sum_n{n}"), &r.binomial_sum);
            }
            Err(e) => report.error(format!("identities_n{n}"), &e),
        }
        let c_diff = (1..n).step_by(2).try_fold(Rational::from_integer(0.into()), |acc, a| {
            Ok::<_, Error>(acc + (coefficients::c_coeff(n, a)? - coefficients::c_coeff_closed_form(n, a)?).abs())
        });
        match c_diff {
            Ok(d) => report.exact(format!("c_closed_form_n{n}"), &d),
            Err(e) => report.error(format!("c_closed_form_n{n}"), &e),
        }
    }
    for n in (3..coefficients::N_MAX).step_by(2) {
        let d_diff = (0..n).step_by(2).try_fold(Rational::from_integer(0.into()), |acc, a| {
            Ok::<_, Error>(acc + (coefficients::d_coeff(n, a)? - coefficients::d_coeff_closed_form(n, a)?).abs())
        });
        match d_diff {
            Ok(d) => report.exact(format!("d_closed_form_n{n}"), &d),
            Err(e) => report.error(format!("d_closed_form_n{n}"), &e),
        }
    }
}

fn adiabatic_checks(report: &mut Report, model: &OscillatorModel, seed: u64, samples: usize, n_residual: usize) {
    let jets = residual::random_jets(model, samples, seed);
    match residual::residual_suite(model, &jets, n_residual) {
        Ok(r) => {
            for (family, value) in &r.families {
                report.bound(format!("residual_{family}"), *value, RESIDUAL_THRESHOLD);
            }
            report.bound("residual_jets_evaluated_shortfall", (samples - r.evaluated) as f64, 0.0);
        }
        Err(e) => report.error("residual_suite", &e),
    }

    // Block identities on physical states: second-order classical jets.
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut reduced = 0.0f64;
    let mut zero_point = 0.0f64;
    let mut failure = None;
    for jet in &jets {
        let qdot: f64 = rng.gen_range(-1.0..1.0);
        let jet = model.classical_jet(jet.q(), qdot, 4);
        let result = adiabatic::second_moment_block(model, &jet).and_then(|b| {
            let zp = adiabatic::zero_point(model, &jet)?;
            let zc = adiabatic::zero_point_closed_form(model, &jet)?;
            Ok((b, zp, zc))
        });
        match result {
            Ok((b, zp, zc)) => {
                reduced = reduced.max((b.uncertainty() - b.uncertainty_reduced()).abs());
                zero_point = zero_point.max((zp - zc).abs() / zc.abs().max(f64::MIN_POSITIVE));
            }
            Err(e) => failure = Some(e),
        }
    }
    if let Some(e) = failure {
        report.error("second_moment_block", &e);
    }
    report.bound("uncertainty_reduced_form", reduced, RESIDUAL_THRESHOLD);
    report.bound("zero_point_closed_form", zero_point, RESIDUAL_THRESHOLD);
}
