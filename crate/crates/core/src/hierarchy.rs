//! Truncated moment hierarchy: expectation values coupled to the dimensionless
//! moments `G^{a,n}` for `2 <= n <= N`.

use crate::adiabatic::{self, PREFACTOR_N_MAX};
use crate::coefficients::{to_f64, vacuum_prefactor};
use crate::error::{Error, Result};
use crate::model::OscillatorModel;
use crate::ode::{self, Controls};
use crate::trajectory::{Sample, Trajectory};

/// Largest supported truncation order.
pub const MAX_TRUNCATION: usize = 16;

fn offset(n: usize) -> usize {
    // sum_{k=2}^{n-1} (k + 1)
    n * (n + 1) / 2 - 3
}

/// Dimensionless moments `G^{a,n}`, `2 <= n <= N`, `0 <= a <= n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    n_max: usize,
    values: Vec<f64>,
}

impl MomentTable {
    pub fn zeros(n_max: usize) -> Result<Self> {
        if !(2..=MAX_TRUNCATION).contains(&n_max) {
            return Err(Error::Range(format!("truncation order must be in 2..={MAX_TRUNCATION}, got {n_max}")));
        }
        Ok(Self { n_max, values: vec![0.0; offset(n_max + 1)] })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Stored value; `G^{0,0} = 1`, moments with `n = 1` vanish, and entries
    /// above the truncation are `None`.
    pub fn get(&self, a: usize, n: usize) -> Option<f64> {
        match n {
            0 => Some(if a == 0 { 1.0 } else { 0.0 }),
            1 => Some(0.0),
            _ if n > self.n_max || a > n => None,
            _ => Some(self.values[offset(n) + a]),
        }
    }

    pub fn set(&mut self, a: usize, n: usize, v: f64) {
        assert!((2..=self.n_max).contains(&n) && a <= n, "moment ({a},{n}) outside the table");
        self.values[offset(n) + a] = v;
    }

    /// `(a, n)` in storage order: by `n`, then `a`.
    pub fn labels(&self) -> Vec<(usize, usize)> {
        (2..=self.n_max).flat_map(|n| (0..=n).map(move |a| (a, n))).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    fn from_slice(n_max: usize, values: &[f64]) -> Self {
        Self { n_max, values: values.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentState {
    pub t: f64,
    pub q: f64,
    pub p: f64,
    pub g: MomentTable,
}

impl MomentState {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut y = vec![self.q, self.p];
        y.extend_from_slice(self.g.as_slice());
        y
    }

    pub fn from_slice(t: f64, n_max: usize, y: &[f64]) -> Self {
        Self { t, q: y[0], p: y[1], g: MomentTable::from_slice(n_max, &y[2..]) }
    }

    /// `g02 g22 - g12^2`
    pub fn uncertainty(&self) -> f64 {
        let g = |a| self.g.get(a, 2).unwrap_or(0.0);
        g(0) * g(2) - g(1) * g(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `G = hbar^{-n/2} (m omega)^{n/2-a} G~`
    ToDimensionless,
    ToDimensionful,
}

/// Rescales every stored moment between `G~^{a,n}` and `G^{a,n}`.
pub fn convert(model: &OscillatorModel, state: &MomentState, direction: Direction) -> Result<MomentState> {
    let hbar = model.hbar();
    if hbar <= 0.0 {
        return Err(Error::InvalidModel("moment rescaling needs hbar > 0".into()));
    }
    let mw = model.m() * model.omega();
    let mut out = state.clone();
    for (a, n) in state.g.labels() {
        let factor = hbar.powf(-(n as f64) / 2.0) * mw.powf(n as f64 / 2.0 - a as f64);
        let v = state.g.get(a, n).expect("label in range");
        out.g.set(a, n, match direction {
            Direction::ToDimensionless => v * factor,
            Direction::ToDimensionful => v / factor,
        });
    }
    Ok(out)
}

/// Rule for moments above the truncation that appear on the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Closure {
    #[default]
    Truncate,
    /// Adiabatic closed forms through second adiabatic order, evaluated on
    /// the classical jet of the current `(q, p/m)`.
    Adiabatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    HarmonicVacuum,
    AdiabaticVacuum(u32),
}

pub fn init_state(model: &OscillatorModel, q0: f64, p0: f64, n_max: usize, mode: InitMode) -> Result<MomentState> {
    let mut g = MomentTable::zeros(n_max)?;
    match mode {
        InitMode::HarmonicVacuum => {
            for (a, n) in g.labels() {
                g.set(a, n, to_f64(&vacuum_prefactor(n, a)));
            }
        }
        InitMode::AdiabaticVacuum(order) => {
            if order > 4 {
                return Err(Error::Range(format!("adiabatic order {order} exceeds 4")));
            }
            model.stiffness(q0)?;
            let jet = model.classical_jet(q0, p0 / model.m(), order as usize);
            for (a, n) in g.labels() {
                g.set(a, n, adiabatic::adiabatic_moment(model, n, a, &jet, order)?);
            }
        }
    }
    Ok(MomentState { t: 0.0, q: q0, p: p0, g })
}

/// Quantum Hamiltonian `p^2/2m + m omega^2 q^2/2 + U + (hbar omega/2)(G02 + G22)
/// + sum_n (hbar/m omega)^{n/2} U^(n) G^{0,n} / n!`.
pub fn hq(model: &OscillatorModel, state: &MomentState) -> f64 {
    let (m, w, hbar) = (model.m(), model.omega(), model.hbar());
    let (q, p) = (state.q, state.p);
    let mut h = p * p / (2.0 * m) + 0.5 * m * w * w * q * q + model.potential(q);
    let g = |a, n| state.g.get(a, n).unwrap_or(0.0);
    h += 0.5 * hbar * w * (g(0, 2) + g(2, 2));
    let mut fact = 1.0;
    for n in 2..=state.g.n_max() {
        fact *= n as f64;
        let u = model.u_derivative(q, n);
        if u != 0.0 {
            h += (hbar / (m * w)).powf(n as f64 / 2.0) * u * g(0, n) / fact;
        }
    }
    h
}

/// Time derivatives of a state.
#[derive(Debug, Clone, PartialEq)]
pub struct Rates {
    pub qdot: f64,
    pub pdot: f64,
    pub g: MomentTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RhsOptions {
    /// Highest power of `sqrt(hbar)` kept in the moment equations (0, 1 or 2).
    pub hbar_order: u32,
    pub closure: Closure,
}

impl Default for RhsOptions {
    fn default() -> Self {
        Self { hbar_order: 1, closure: Closure::Truncate }
    }
}

/// `dq/dt = p/m`, `dp/dt = -m omega^2 q - U' - sum_n (hbar/m omega)^{n/2} U^(n+1) G^{0,n}/n!`
/// and, per moment,
/// `dG^{a,n} = -a omega X G^{a-1,n} + (n-a) omega G^{a+1,n}`
/// `  + sqrt(hbar) a U'''/(2 (m omega)^{3/2}) [G^{0,2} G^{a-1,n-1} - G^{a-1,n+1} + (a-1)(a-2)/12 G^{a-3,n-3}]`
/// `  + hbar a U''''/(6 (m omega)^2) [G^{0,3} G^{a-1,n-1} - G^{a-1,n+2} + (a-1)(a-2)/4 G^{a-3,n-2}]`
/// with the second and third lines kept from `hbar_order` 1 and 2.
pub fn rhs(model: &OscillatorModel, state: &MomentState, opts: &RhsOptions) -> Result<Rates> {
    if opts.hbar_order > 2 {
        return Err(Error::Range(format!("hbar order {} exceeds 2", opts.hbar_order)));
    }
    let (m, w, hbar) = (model.m(), model.omega(), model.hbar());
    let q = state.q;
    let x = model.stiffness(q)?;
    let n_max = state.g.n_max();
    let closure_jet = match opts.closure {
        Closure::Adiabatic => Some(model.classical_jet(q, state.p / m, 2)),
        Closure::Truncate => None,
    };
    let g = |a: usize, n: usize| -> Result<f64> {
        if let Some(v) = state.g.get(a, n) {
            return Ok(v);
        }
        match &closure_jet {
            Some(jet) if n <= PREFACTOR_N_MAX => adiabatic::adiabatic_moment(model, n, a, jet, 2),
            _ => Ok(0.0),
        }
    };

    let mut pdot = -m * w * w * q - model.u_derivative(q, 1);
    let mut fact = 1.0;
    for n in 2..=n_max {
        fact *= n as f64;
        let u = model.u_derivative(q, n + 1);
        if u != 0.0 {
            pdot -= (hbar / (m * w)).powf(n as f64 / 2.0) * u * g(0, n)? / fact;
        }
    }

    let u3 = model.u_derivative(q, 3);
    let u4 = model.u_derivative(q, 4);
    let k1 = hbar.sqrt() * u3 / (2.0 * (m * w).powf(1.5));
    let k2 = hbar * u4 / (6.0 * (m * w).powi(2));
    let mut rates = MomentTable::zeros(n_max)?;
    for (a, n) in state.g.labels() {
        let af = a as f64;
        let mut ladder = 0.0;
        if a >= 1 {
            ladder -= af * x * g(a - 1, n)?;
        }
        if a < n {
            ladder += (n - a) as f64 * g(a + 1, n)?;
        }
        let mut d = w * ladder;
        if a >= 1 && opts.hbar_order >= 1 && k1 != 0.0 {
            let mut s = g(0, 2)? * g(a - 1, n - 1)? - g(a - 1, n + 1)?;
            if a >= 3 {
                s += ((a - 1) * (a - 2)) as f64 / 12.0 * g(a - 3, n - 3)?;
            }
            d += k1 * af * s;
        }
        if a >= 1 && opts.hbar_order >= 2 && k2 != 0.0 {
            let mut s = g(0, 3)? * g(a - 1, n - 1)? - g(a - 1, n + 2)?;
            if a >= 3 {
                s += ((a - 1) * (a - 2)) as f64 / 4.0 * g(a - 3, n - 2)?;
            }
            d += k2 * af * s;
        }
        rates.set(a, n, d);
    }
    Ok(Rates { qdot: state.p / m, pdot, g: rates })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HierarchyOptions {
    pub rhs: RhsOptions,
    pub controls: Controls,
}

fn sample(model: &OscillatorModel, state: &MomentState) -> Sample {
    Sample {
        t: state.t,
        q: state.q,
        p: state.p,
        moments: state.g.as_slice().to_vec(),
        hq: hq(model, state),
        uncertainty: state.uncertainty(),
        x: model.stiffness_unchecked(state.q),
    }
}

/// Integrates from `state0.t` to `t_end`, recording every accepted step.
/// Uncertainty violations are recorded in the samples, not treated as errors.
pub fn integrate(
    model: &OscillatorModel,
    state0: &MomentState,
    t_end: f64,
    opts: &HierarchyOptions,
) -> Result<Trajectory> {
    let n_max = state0.g.n_max();
    let mut traj = Trajectory::new(model.m(), state0.g.labels());
    let f = |t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let st = MomentState::from_slice(t, n_max, y);
        let r = rhs(model, &st, &opts.rhs)?;
        dy[0] = r.qdot;
        dy[1] = r.pdot;
        dy[2..].copy_from_slice(r.g.as_slice());
        Ok(())
    };
    ode::integrate(f, state0.t, &state0.to_vec(), t_end, &opts.controls, |t, y, _| {
        let st = MomentState::from_slice(t, n_max, y);
        let s = sample(model, &st);
        if !(s.x > 0.0) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationFailure { t, reason: format!("stiffness X = {} at q = {}", s.x, st.q) });
        }
        traj.push(s);
        Ok(())
    })?;
    Ok(traj)
}

/// State at the last sample of a hierarchy trajectory.
pub fn final_state(traj: &Trajectory, n_max: usize) -> Option<MomentState> {
    let s = traj.last()?;
    let mut y = vec![s.q, s.p];
    y.extend_from_slice(&s.moments);
    Some(MomentState::from_slice(s.t, n_max, &y))
}
