//! Dormand–Prince 5(4) integrator with PI step-size control.
//!
//! A right-hand side may return [`Error::Domain`] for a trial state; the step is
//! then rejected and retried with a smaller step. Any other error aborts.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights; equal to the last row of `A` (first same as last).
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
/// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
const BETA: f64 = 0.04;
const ALPHA: f64 = 0.2 - 0.75 * BETA;

/// Step-size controls. `fixed_step` disables error control entirely.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controls {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: Option<f64>,
    pub initial_step: Option<f64>,
    pub fixed_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for Controls {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_step: None,
            initial_step: None,
            fixed_step: None,
            max_steps: 10_000_000,
        }
    }
}

impl Controls {
    pub fn fixed(h: f64) -> Self {
        Self { fixed_step: Some(h), ..Self::default() }
    }

    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self { rel_tol, abs_tol, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let ok = positive(self.rel_tol)
            && self.abs_tol.is_finite()
            && self.abs_tol >= 0.0
            && self.max_step.is_none_or(positive)
            && self.initial_step.is_none_or(positive)
            && self.fixed_step.is_none_or(positive)
            && self.max_steps > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Range(format!("invalid integrator controls {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

struct Stepper<F> {
    f: F,
    dim: usize,
    k: [Vec<f64>; 7],
    trial: Vec<f64>,
    stats: Stats,
}

impl<F> Stepper<F>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    fn eval(&mut self, t: f64, y: &[f64], stage: usize) -> Result<()> {
        self.stats.evaluations += 1;
        let mut out = std::mem::take(&mut self.k[stage]);
        let r = (self.f)(t, y, &mut out);
        self.k[stage] = out;
        r?;
        if self.k[stage].iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain { q: f64::NAN, x: f64::NAN });
        }
        Ok(())
    }

    /// One step from `(t, y)` with `k[0] = f(t, y)` already set. Writes the
    /// fifth-order solution to `y_new`, leaves `f(t + h, y_new)` in `k[6]` and
    /// returns the fifth-minus-fourth error vector in `err`.
    fn step(&mut self, t: f64, y: &[f64], h: f64, y_new: &mut [f64], err: &mut [f64]) -> Result<()> {
        for s in 1..7 {
            for i in 0..self.dim {
                let mut acc = 0.0;
                for (j, a) in A[s][..s].iter().enumerate() {
                    acc += a * self.k[j][i];
                }
                self.trial[i] = y[i] + h * acc;
            }
            let trial = std::mem::take(&mut self.trial);
            let r = self.eval(t + C[s] * h, &trial, s);
            self.trial = trial;
            r?;
        }
        for i in 0..self.dim {
            // last stage was evaluated at the fifth-order solution
            y_new[i] = self.trial[i];
            err[i] = h * (0..7).map(|s| E[s] * self.k[s][i]).sum::<f64>();
        }
        debug_assert!((0..self.dim).all(|i| {
            let b: f64 = (0..7).map(|s| B[s] * self.k[s][i]).sum();
            (y[i] + h * b - y_new[i]).abs() <= 1e-12 * (1.0 + y_new[i].abs())
        }));
        Ok(())
    }
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end` (either direction). The
/// observer sees the initial point and every accepted step as `(t, y, y')`
/// and may abort the run by returning an error.
pub fn integrate<F, O>(
    f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    controls: &Controls,
    mut observer: O,
) -> Result<Stats>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    O: FnMut(f64, &[f64], &[f64]) -> Result<()>,
{
    controls.validate()?;
    if !t0.is_finite() || !t_end.is_finite() {
        return Err(Error::Range("integration bounds must be finite".into()));
    }
    let dim = y0.len();
    let mut st = Stepper {
        f,
        dim,
        k: std::array::from_fn(|_| vec![0.0; dim]),
        trial: vec![0.0; dim],
        stats: Stats::default(),
    };
    let mut y = y0.to_vec();
    let mut t = t0;
    st.eval(t, &y, 0).map_err(|e| failure(t, e))?;
    observer(t, &y, &st.k[0])?;
    if t_end == t0 {
        return Ok(st.stats);
    }
    let dir = (t_end - t0).signum();
    let span = (t_end - t0).abs();
    let mut y_new = vec![0.0; dim];
    let mut err = vec![0.0; dim];

    if let Some(h_fixed) = controls.fixed_step {
        let steps = (span / h_fixed).round().max(1.0) as usize;
        let h = dir * span / steps as f64;
        for i in 1..=steps {
            st.step(t, &y, h, &mut y_new, &mut err).map_err(|e| failure(t, e))?;
            t = if i == steps { t_end } else { t0 + i as f64 * h };
            std::mem::swap(&mut y, &mut y_new);
            st.k.swap(0, 6);
            st.stats.accepted += 1;
            observer(t, &y, &st.k[0])?;
        }
        return Ok(st.stats);
    }

    let max_step = controls.max_step.unwrap_or(span).min(span);
    let mut h = controls
        .initial_step
        .unwrap_or_else(|| initial_step(&y, &st.k[0], controls, span))
        .min(max_step);
    let mut err_prev = 1e-4f64;
    let mut rejected_last = false;
    let mut last_domain: Option<Error> = None;

    while dir * (t_end - t) > 0.0 {
        if st.stats.accepted + st.stats.rejected >= controls.max_steps {
            return Err(Error::IntegrationFailure { t, reason: "maximum number of steps exceeded".into() });
        }
        let remaining = (t_end - t).abs();
        let last = h >= remaining * (1.0 - 1e-12);
        if last {
            h = remaining;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            let reason = match &last_domain {
                Some(e) => format!("step size underflow after {e}"),
                None => "step size underflow".into(),
            };
            return Err(Error::IntegrationFailure { t, reason });
        }
        let attempt = st.step(t, &y, dir * h, &mut y_new, &mut err);
        let norm = match attempt {
            Ok(()) => error_norm(&y, &y_new, &err, controls),
            Err(e @ Error::Domain { .. }) => {
                last_domain = Some(e);
                f64::INFINITY
            }
            Err(e) => return Err(failure(t, e)),
        };
        if norm <= 1.0 {
            t = if last { t_end } else { t + dir * h };
            std::mem::swap(&mut y, &mut y_new);
            st.k.swap(0, 6);
            st.stats.accepted += 1;
            observer(t, &y, &st.k[0])?;
            let mut factor = if norm == 0.0 {
                MAX_FACTOR
            } else {
                SAFETY * norm.powf(-ALPHA) * err_prev.powf(BETA)
            };
            factor = factor.clamp(MIN_FACTOR, MAX_FACTOR);
            if rejected_last {
                factor = factor.min(1.0);
            }
            h = (h * factor).min(max_step);
            err_prev = norm.max(1e-4);
            rejected_last = false;
        } else {
            st.stats.rejected += 1;
            let factor = if norm.is_finite() {
                (SAFETY * norm.powf(-ALPHA)).clamp(MIN_FACTOR, 1.0)
            } else {
                0.5
            };
            h *= factor;
            rejected_last = true;
        }
    }
    Ok(st.stats)
}

fn failure(t: f64, e: Error) -> Error {
    match e {
        Error::Domain { .. } => Error::IntegrationFailure { t, reason: e.to_string() },
        other => other,
    }
}

fn scale(y: f64, y_new: f64, c: &Controls) -> f64 {
    c.abs_tol + c.rel_tol * y.abs().max(y_new.abs())
}

/// Max norm of the scaled error, so components that never change (frozen
/// moments) do not dilute the control of the ones that do.
fn error_norm(y: &[f64], y_new: &[f64], err: &[f64], c: &Controls) -> f64 {
    let mut norm = 0.0f64;
    for i in 0..y.len() {
        let r = (err[i] / scale(y[i], y_new[i], c)).abs();
        if r.is_nan() {
            return f64::INFINITY;
        }
        norm = norm.max(r);
    }
    norm
}

fn initial_step(y: &[f64], dy: &[f64], c: &Controls, span: f64) -> f64 {
    if y.is_empty() {
        return span;
    }
    let rms = |v: &dyn Fn(usize) -> f64| ((0..y.len()).map(|i| v(i).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
    let d0 = rms(&|i| y[i] / scale(y[i], y[i], c));
    let d1 = rms(&|i| dy[i] / scale(y[i], y[i], c));
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span)
}
