//! Higher-derivative effective equation for `q(t)` and its second-order
//! reductions.
//!
//! The correction is `-(hbar / 2 m^2 omega) U''' [f + f1 q'' + f2 q''^2 + f3 q''' + f4 q'''']`,
//! which is `G^{0,2}` through fourth adiabatic order regrouped by time
//! derivatives.
//!
//! The effective action `Gamma_eff` with mass `M(q) = m + hbar U'''^2 / (32 m^2 omega^5 X^{5/2})`
//! and quantum potential `(hbar omega / 2) X^{1/2}` has the Euler–Lagrange equation
//!
//! `M q'' = -m omega^2 q - U' - hbar U''' X^{-1/2} / (4 m omega) - M'(q) q'^2 / 2`
//!
//! with `M' = hbar / (32 m^2 omega^5) [2 U''' U'''' X^{-5/2} - (5/2) U'''^3 X^{-7/2} / (m omega^2)]`.
//! Its `O(hbar)` part coincides with the second-adiabatic-order reduced
//! equation, so the two differ at `O(hbar^2)`.

use crate::adiabatic::{g02_stack, second_moment_block};
use crate::error::{Error, Result};
use crate::model::{Jet, OscillatorModel};
use crate::ode::{self, Controls};
use crate::trajectory::{Sample, Trajectory};

pub use crate::trajectory::{compare, Metric};

/// Default floor on `|U''' f4|` below which the fourth-order solve is refused.
pub const DEFAULT_EPSILON4: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveCoeffs {
    pub f: f64,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub f4: f64,
}

impl EffectiveCoeffs {
    /// `f + f1 q'' + f2 q''^2 + f3 q''' + f4 q''''`
    pub fn bracket(&self, qdd: f64, q3: f64, q4: f64) -> f64 {
        self.f + self.f1 * qdd + self.f2 * qdd * qdd + self.f3 * q3 + self.f4 * q4
    }
}

struct Point {
    x: f64,
    u: [f64; 7],
    m: f64,
    w: f64,
}

impl Point {
    fn new(model: &OscillatorModel, q: f64) -> Result<Self> {
        let x = model.stiffness(q)?;
        let mut u = [0.0; 7];
        for (k, v) in u.iter_mut().enumerate() {
            *v = model.u_derivative(q, k);
        }
        Ok(Self { x, u, m: model.m(), w: model.omega() })
    }

    fn xp(&self, r: f64) -> f64 {
        self.x.powf(r)
    }
}

/// The coefficient functions `f, f1, ..., f4` at `(q, q')`.
pub fn eff_coeffs(model: &OscillatorModel, q: f64, qdot: f64) -> Result<EffectiveCoeffs> {
    let p = Point::new(model, q)?;
    let (m, w, u) = (p.m, p.w, &p.u);
    let v2 = qdot * qdot;
    let v4 = v2 * v2;
    let f = 0.5 * p.xp(-0.5) + u[4] * v2 / (16.0 * m * w.powi(4)) * p.xp(-2.5)
        - 5.0 * u[3] * u[3] * v2 / (64.0 * m * m * w.powi(6)) * p.xp(-3.5)
        - u[6] * v4 / (64.0 * m * w.powi(6)) * p.xp(-3.5)
        + 21.0 * u[4] * u[4] * v4 / (256.0 * m * m * w.powi(8)) * p.xp(-4.5)
        + 7.0 * u[5] * u[3] * v4 / (64.0 * m * m * w.powi(8)) * p.xp(-4.5)
        - 231.0 * u[4] * u[3] * u[3] * v4 / (512.0 * m.powi(3) * w.powi(10)) * p.xp(-5.5)
        + 1155.0 * u[3].powi(4) * v4 / (4096.0 * m.powi(4) * w.powi(12)) * p.xp(-6.5);
    let f1 = u[3] / (16.0 * m * w.powi(4)) * p.xp(-2.5)
        - 3.0 * u[5] * v2 / (32.0 * m * w.powi(6)) * p.xp(-3.5)
        + 63.0 * u[4] * u[3] * v2 / (128.0 * m * m * w.powi(8)) * p.xp(-4.5)
        - 231.0 * u[3].powi(3) * v2 / (512.0 * m.powi(3) * w.powi(10)) * p.xp(-5.5);
    let f2 = -3.0 * u[4] / (64.0 * m * w.powi(6)) * p.xp(-3.5)
        + 21.0 * u[3] * u[3] / (256.0 * m * m * w.powi(8)) * p.xp(-4.5);
    let f3 = -u[4] * qdot / (16.0 * m * w.powi(6)) * p.xp(-3.5)
        + 7.0 * u[3] * u[3] * qdot / (64.0 * m * m * w.powi(8)) * p.xp(-4.5);
    let f4 = -u[3] / (64.0 * m * w.powi(6)) * p.xp(-3.5);
    Ok(EffectiveCoeffs { f, f1, f2, f3, f4 })
}

/// Coefficients keeping only adiabatic orders `<= order` (0, 2 or 4).
pub fn eff_coeffs_to_order(model: &OscillatorModel, q: f64, qdot: f64, order: u32) -> Result<EffectiveCoeffs> {
    match order {
        4 => eff_coeffs(model, q, qdot),
        0 | 2 => {
            let p = Point::new(model, q)?;
            let (m, w, u) = (p.m, p.w, &p.u);
            let mut c = EffectiveCoeffs { f: 0.5 * p.xp(-0.5), f1: 0.0, f2: 0.0, f3: 0.0, f4: 0.0 };
            if order == 2 {
                let v2 = qdot * qdot;
                c.f += u[4] * v2 / (16.0 * m * w.powi(4)) * p.xp(-2.5)
                    - 5.0 * u[3] * u[3] * v2 / (64.0 * m * m * w.powi(6)) * p.xp(-3.5);
                c.f1 = u[3] / (16.0 * m * w.powi(4)) * p.xp(-2.5);
            }
            Ok(c)
        }
        other => Err(Error::Range(format!("effective equation is available at adiabatic order 0, 2 or 4, got {other}"))),
    }
}

/// How the higher derivatives in the correction are eliminated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Substitution {
    /// Classical jet substituted once.
    #[default]
    Explicit,
    /// A second pass with the corrected `q''` in place of the classical one;
    /// `q'''` and `q''''` stay classical.
    Iterated,
}

/// `q''` of the reduced second-order equation.
pub fn rhs_reduced(
    model: &OscillatorModel,
    q: f64,
    qdot: f64,
    order: u32,
    substitution: Substitution,
) -> Result<f64> {
    let c = eff_coeffs_to_order(model, q, qdot, order)?;
    let jet = model.classical_jet(q, qdot, 4);
    let d = |k| jet.derivative(k).expect("classical jet of order 4");
    let (qdd_cl, q3, q4) = (d(2), d(3), d(4));
    let kappa = model.hbar() / (2.0 * model.m() * model.m() * model.omega());
    let u3 = model.u_derivative(q, 3);
    let once = qdd_cl - kappa * u3 * c.bracket(qdd_cl, q3, q4);
    Ok(match substitution {
        Substitution::Explicit => once,
        Substitution::Iterated => qdd_cl - kappa * u3 * c.bracket(once, q3, q4),
    })
}

/// `q''''` from the fourth-order equation, given `(q, q', q'', q''')`.
pub fn rhs_fourth(model: &OscillatorModel, state: [f64; 4], epsilon4: f64) -> Result<f64> {
    let [q, qdot, qdd, q3] = state;
    let c = eff_coeffs(model, q, qdot)?;
    let u3 = model.u_derivative(q, 3);
    let lead = u3 * c.f4;
    let hbar = model.hbar();
    if lead.abs() < epsilon4 || hbar == 0.0 {
        let coefficient = if hbar == 0.0 { 0.0 } else { lead };
        return Err(Error::SingularLeadingTerm { q, coefficient, floor: epsilon4 });
    }
    let kappa = hbar / (2.0 * model.m() * model.m() * model.omega());
    let qdd_cl = model.classical_acceleration(q);
    let rest = c.f + c.f1 * qdd + c.f2 * qdd * qdd + c.f3 * q3;
    Ok(((qdd_cl - qdd) / kappa - u3 * rest) / lead)
}

/// `q''` from the Euler–Lagrange equation of the effective action.
pub fn gamma_eff_rhs(model: &OscillatorModel, q: f64, qdot: f64) -> Result<f64> {
    let p = Point::new(model, q)?;
    let (m, w, u) = (p.m, p.w, &p.u);
    let hbar = model.hbar();
    let k = hbar / (32.0 * m * m * w.powi(5));
    let mass = m + k * u[3] * u[3] * p.xp(-2.5);
    let mass_prime = k * (2.0 * u[3] * u[4] * p.xp(-2.5) - 2.5 * u[3].powi(3) * p.xp(-3.5) / (m * w * w));
    let force = -m * w * w * q - u[1] - hbar * u[3] * p.xp(-0.5) / (4.0 * m * w);
    Ok((force - 0.5 * mass_prime * qdot * qdot) / mass)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Form {
    #[default]
    Reduced,
    /// Fourth-order equation; carries the surplus runaway solutions.
    Fourth,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveOptions {
    pub form: Form,
    /// Adiabatic order of the reduced form (0, 2 or 4).
    pub adiabatic_order: u32,
    pub substitution: Substitution,
    pub epsilon4: f64,
    pub controls: Controls,
}

impl Default for EffectiveOptions {
    fn default() -> Self {
        Self {
            form: Form::Reduced,
            adiabatic_order: 4,
            substitution: Substitution::Explicit,
            epsilon4: DEFAULT_EPSILON4,
            controls: Controls::default(),
        }
    }
}

fn sample(model: &OscillatorModel, t: f64, jet: &Jet, adiabatic_order: u32) -> Result<Sample> {
    let (m, w, hbar) = (model.m(), model.omega(), model.hbar());
    let (q, qdot) = (jet.q(), jet.derivative(1).unwrap_or(0.0));
    let failure = |e: Error| Error::IntegrationFailure { t, reason: e.to_string() };
    let g02 = g02_stack(model, jet, 1, adiabatic_order).map_err(failure)?;
    let block = second_moment_block(model, &model.classical_jet(q, qdot, 2)).map_err(failure)?;
    let p = m * qdot;
    let hq = p * p / (2.0 * m) + 0.5 * m * w * w * q * q + model.potential(q)
        + 0.5 * hbar * w * (block.g02 + block.g22)
        + 0.5 * hbar / (m * w) * model.u_derivative(q, 2) * block.g02;
    Ok(Sample { t, q, p, moments: vec![g02], hq, uncertainty: block.uncertainty(), x: block.x })
}

/// Integrates the effective equation from `(q0, p0)` at `t = 0`. The fourth
/// form starts from the classical `q''` and `q'''`. Samples carry the
/// reconstructed `G^{0,2}` and the second-moment diagnostics of the
/// adiabatic block.
pub fn integrate_effective(
    model: &OscillatorModel,
    q0: f64,
    p0: f64,
    t_end: f64,
    opts: &EffectiveOptions,
) -> Result<Trajectory> {
    let m = model.m();
    let mut traj = Trajectory::new(m, vec![(0, 2)]);
    match opts.form {
        Form::Reduced => {
            let order = opts.adiabatic_order;
            eff_coeffs_to_order(model, q0, p0 / m, order)?;
            let f = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
                dy[0] = y[1];
                dy[1] = rhs_reduced(model, y[0], y[1], order, opts.substitution)?;
                Ok(())
            };
            let jet_order = order.max(2) as usize;
            ode::integrate(f, 0.0, &[q0, p0 / m], t_end, &opts.controls, |t, y, _| {
                traj.push(sample(model, t, &model.classical_jet(y[0], y[1], jet_order), order)?);
                Ok(())
            })?;
        }
        Form::Fourth => {
            let jet0 = model.classical_jet(q0, p0 / m, 3);
            let y0 = jet0.as_slice().to_vec();
            rhs_fourth(model, [y0[0], y0[1], y0[2], y0[3]], opts.epsilon4)?;
            let f = |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
                dy[..3].copy_from_slice(&y[1..4]);
                dy[3] = rhs_fourth(model, [y[0], y[1], y[2], y[3]], opts.epsilon4)?;
                Ok(())
            };
            ode::integrate(f, 0.0, &y0, t_end, &opts.controls, |t, y, dy| {
                let jet = Jet::new(vec![y[0], y[1], y[2], y[3], dy[3]])
                    .map_err(|e| Error::IntegrationFailure { t, reason: e.to_string() })?;
                traj.push(sample(model, t, &jet, 4)?);
                Ok(())
            })?;
        }
    }
    Ok(traj)
}
