//! Closed-form adiabatic moment solutions around the anharmonic vacuum.
//!
//! A moment is expanded as `G^{a,n} = sum_{e,i} G^{a,n}_{e,i} hbar^{e/2}`
//! where `i` counts time derivatives. The evaluators here are written once,
//! generic over [`Scalar`], so that the same expression serves point
//! evaluation and the Taylor-series residual checks in [`residual`].

pub mod block;
pub mod residual;

#[cfg(feature = "experimental")]
pub mod experimental;

use std::sync::OnceLock;

use crate::coefficients::{self, to_f64, N_MAX};
use crate::error::{Error, Result};
use crate::model::{Jet, OscillatorModel};
use crate::taylor::{Scalar, Taylor};

pub use block::{second_moment_block, zero_point, zero_point_closed_form, SecondMomentBlock};

/// Highest `n` for which the zeroth-order prefactor table is built. Closures
/// of the hierarchy reach two orders above the truncation.
pub const PREFACTOR_N_MAX: usize = N_MAX + 4;

/// Orders `(e, i)`: `hbar^{e/2}` and `i` time derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExpansionOrder {
    pub e: u32,
    pub i: u32,
}

impl ExpansionOrder {
    pub fn new(e: u32, i: u32) -> Result<Self> {
        match (e, i) {
            (0, 0..=4) | (1, 0..=1) => Ok(Self { e, i }),
            _ => Err(Error::Unsupported(format!("expansion order ({e},{i})"))),
        }
    }

    /// Every supported order, lowest first.
    pub fn all() -> impl Iterator<Item = ExpansionOrder> {
        [(0, 0), (0, 1), (0, 2), (0, 3), (0, 4), (1, 0), (1, 1)]
            .into_iter()
            .map(|(e, i)| ExpansionOrder { e, i })
    }
}

struct FloatTables {
    prefactor: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    a_prime: Vec<f64>,
    b_prime: Vec<f64>,
    d: Vec<Vec<f64>>,
    d_tilde: Vec<Vec<f64>>,
}

fn tables() -> &'static FloatTables {
    static TABLES: OnceLock<FloatTables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let prefactor = (0..=PREFACTOR_N_MAX)
            .map(|n| (0..=n).map(|a| to_f64(&coefficients::vacuum_prefactor(n, a))).collect())
            .collect();
        let row = |n: usize| vec![0.0; n + 1];
        let mut c: Vec<Vec<f64>> = (0..=N_MAX).map(row).collect();
        let mut a: Vec<Vec<f64>> = (0..=N_MAX).map(row).collect();
        let mut b: Vec<Vec<f64>> = (0..=N_MAX).map(row).collect();
        let mut d: Vec<Vec<f64>> = (0..=N_MAX).map(row).collect();
        let mut d_tilde: Vec<Vec<f64>> = (0..=N_MAX).map(row).collect();
        let mut a_prime = vec![0.0; N_MAX + 1];
        let mut b_prime = vec![0.0; N_MAX + 1];
        for n in (2..=N_MAX).step_by(2) {
            let table = coefficients::CoeffTable::new(n).expect("even n in range");
            for (k, v) in &table.c {
                c[n][*k] = to_f64(v);
            }
            for (k, v) in &table.a_tab {
                a[n][*k] = to_f64(v);
            }
            for (k, v) in &table.b_tab {
                b[n][*k] = to_f64(v);
            }
            a_prime[n] = to_f64(&table.a_prime);
            b_prime[n] = to_f64(&table.b_prime);
        }
        for n in (3..N_MAX).step_by(2) {
            for (k, v) in coefficients::d_table(n).expect("odd n in range") {
                d[n][k] = to_f64(&v);
            }
            for (k, v) in coefficients::d_tilde_table(n).expect("odd n in range") {
                d_tilde[n][k] = to_f64(&v);
            }
        }
        FloatTables { prefactor, c, a, b, a_prime, b_prime, d, d_tilde }
    })
}

/// Potential derivatives, stiffness and time derivatives of `q` at one point,
/// over any scalar type.
#[derive(Debug, Clone)]
pub(crate) struct Local<T> {
    pub m: f64,
    pub omega: f64,
    pub x: T,
    /// `u[k] = U^(k)(q)` for `k = 0..=6`.
    pub u: Vec<T>,
    /// `dq[k] = q^(k)`.
    pub dq: Vec<T>,
}

impl<T: Scalar> Local<T> {
    pub fn new(model: &OscillatorModel, dq: Vec<T>) -> Result<Self> {
        let q = &dq[0];
        let u: Vec<T> = (0..=6).map(|k| model.u_derivative_at(q, k)).collect();
        let m = model.m();
        let omega = model.omega();
        let x = u[2].clone() * (1.0 / (m * omega * omega)) + 1.0;
        if !(x.value() > 0.0) {
            return Err(Error::Domain { q: q.value(), x: x.value() });
        }
        Ok(Self { m, omega, x, u, dq })
    }

    fn xp(&self, r: f64) -> T {
        self.x.powf(r)
    }

    /// `U''' q'`
    pub fn v(&self) -> T {
        self.u[3].clone() * self.dq[1].clone()
    }

    /// `U''' q'' + U'''' q'^2`, the time derivative of `v`.
    pub fn w(&self) -> T {
        let qd = self.dq[1].clone();
        self.u[3].clone() * self.dq[2].clone() + self.u[4].clone() * qd.clone() * qd
    }

    /// `d w / dt`
    pub fn w_dot(&self) -> T {
        let qd = self.dq[1].clone();
        let qdd = self.dq[2].clone();
        self.u[3].clone() * self.dq[3].clone()
            + self.u[4].clone() * qd.clone() * qdd * 3.0
            + self.u[5].clone() * qd.clone() * qd.clone() * qd
    }

    /// `d^2 w / dt^2`
    pub fn w_ddot(&self) -> T {
        let qd = self.dq[1].clone();
        let qdd = self.dq[2].clone();
        let q3 = self.dq[3].clone();
        let qd2 = qd.clone() * qd.clone();
        self.u[3].clone() * self.dq[4].clone()
            + self.u[4].clone() * q3 * qd.clone() * 4.0
            + self.u[4].clone() * qdd.clone() * qdd.clone() * 3.0
            + self.u[5].clone() * qd2.clone() * qdd * 6.0
            + self.u[6].clone() * qd2.clone() * qd2
    }
}

impl Local<f64> {
    pub fn from_jet(model: &OscillatorModel, jet: &Jet) -> Result<Self> {
        Self::new(model, jet.as_slice().to_vec())
    }
}

impl Local<Taylor> {
    /// All available time derivatives of the series `q(t)`.
    pub fn from_series(model: &OscillatorModel, q: &Taylor) -> Result<Self> {
        let mut dq = vec![q.clone()];
        while dq.last().unwrap().len() > 1 {
            let next = dq.last().unwrap().derivative();
            dq.push(next);
        }
        Self::new(model, dq)
    }
}

pub(crate) fn g00<T: Scalar>(loc: &Local<T>, n: usize, a: usize) -> T {
    if a > n || a % 2 == 1 || n % 2 == 1 {
        return loc.x.lift(0.0);
    }
    let p = tables().prefactor[n][a];
    loc.xp((2.0 * a as f64 - n as f64) / 4.0) * p
}

pub(crate) fn g01<T: Scalar>(loc: &Local<T>, n: usize, a: usize) -> T {
    if a > n || a % 2 == 0 || n % 2 == 1 {
        return loc.x.lift(0.0);
    }
    let c = tables().c[n][a];
    let scale = 1.0 / (loc.m * loc.omega.powi(3));
    loc.v() * loc.xp((2.0 * a as f64 - n as f64 - 6.0) / 4.0) * (c * scale)
}

/// `G^{0,n}_{0,2}`
pub(crate) fn g02_lowest<T: Scalar>(loc: &Local<T>, n: usize) -> T {
    let t = tables();
    let (m, w) = (loc.m, loc.omega);
    let nf = n as f64;
    let v = loc.v();
    loc.w() * loc.xp(-(nf + 8.0) / 4.0) * (t.a_prime[n] / (m * w.powi(4)))
        + v.clone() * v * loc.xp(-(nf + 12.0) / 4.0) * (t.b_prime[n] / (4.0 * m * m * w.powi(6)))
}

pub(crate) fn g02<T: Scalar>(loc: &Local<T>, n: usize, a: usize) -> T {
    if a > n || a % 2 == 1 || n % 2 == 1 {
        return loc.x.lift(0.0);
    }
    let t = tables();
    let (m, w) = (loc.m, loc.omega);
    let (af, nf) = (a as f64, n as f64);
    let v = loc.v();
    let weight = to_f64(&coefficients::g0_weight(n, a));
    loc.w() * loc.xp((2.0 * af - nf - 8.0) / 4.0) * (t.a[n][a] / (m * w.powi(4)))
        + v.clone() * v * loc.xp((2.0 * af - nf - 12.0) / 4.0) * (t.b[n][a] / (4.0 * m * m * w.powi(6)))
        + loc.xp(af / 2.0) * g02_lowest(loc, n) * weight
}

fn g1x<T: Scalar>(loc: &Local<T>, n: usize, a: usize, coeff: f64) -> T {
    let scale = 1.0 / (loc.m.powf(1.5) * loc.omega.powf(2.5));
    loc.u[3].clone() * loc.xp((2.0 * a as f64 - n as f64 - 5.0) / 4.0) * (coeff * scale)
}

pub(crate) fn g10<T: Scalar>(loc: &Local<T>, n: usize, a: usize) -> T {
    if a > n || a % 2 == 1 || n % 2 == 0 {
        return loc.x.lift(0.0);
    }
    g1x(loc, n, a, tables().d[n][a])
}

/// Only the even-`a` branch; odd `a` with odd `n` must be rejected by the caller.
pub(crate) fn g11<T: Scalar>(loc: &Local<T>, n: usize, a: usize) -> T {
    if a > n || n % 2 == 0 || a % 2 == 1 {
        return loc.x.lift(0.0);
    }
    g1x(loc, n, a, tables().d_tilde[n][a])
}

/// `G^{0,2}_{0,4}`
pub(crate) fn g02_fourth<T: Scalar>(loc: &Local<T>) -> T {
    let (m, w) = (loc.m, loc.omega);
    let v = loc.v();
    let wv = loc.w();
    let v2 = v.clone() * v.clone();
    -(loc.w_ddot() * loc.xp(-3.5) * (1.0 / (64.0 * m * w.powi(6))))
        + (wv.clone() * wv.clone() * (21.0 / 256.0) + v.clone() * loc.w_dot() * (7.0 / 64.0))
            * loc.xp(-4.5)
            * (1.0 / (m * m * w.powi(8)))
        - v2.clone() * wv * loc.xp(-5.5) * (231.0 / (512.0 * m.powi(3) * w.powi(10)))
        + v2.clone() * v2 * loc.xp(-6.5) * (1155.0 / (4096.0 * m.powi(4) * w.powi(12)))
}

/// The auxiliary quantity relating `G^{2,2}_{0,4}` to `G^{0,2}_{0,4}`; equal to
/// the second time derivative of `G^{0,2}_{0,2}` divided by `2 omega`.
pub(crate) fn theta_expr<T: Scalar>(loc: &Local<T>) -> T {
    let (m, w) = (loc.m, loc.omega);
    let v = loc.v();
    let wv = loc.w();
    let v2 = v.clone() * v.clone();
    loc.w_ddot() * loc.xp(-2.5) * (1.0 / (32.0 * m * w.powi(5)))
        - (wv.clone() * wv.clone() * (5.0 / 32.0) + v.clone() * loc.w_dot() * (15.0 / 64.0))
            * loc.xp(-3.5)
            * (1.0 / (m * m * w.powi(7)))
        + v2.clone() * wv * loc.xp(-4.5) * (245.0 / (256.0 * m.powi(3) * w.powi(9)))
        - v2.clone() * v2 * loc.xp(-5.5) * (315.0 / (512.0 * m.powi(4) * w.powi(11)))
}

fn check_indices(n: usize, a: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Range(format!("moment order n must be at least 2, got {n}")));
    }
    if a > n {
        return Err(Error::Range(format!("a = {a} exceeds n = {n}")));
    }
    Ok(())
}

fn check_table(n: usize, max: usize) -> Result<()> {
    if n > max {
        return Err(Error::Range(format!("n = {n} exceeds the coefficient tables (max {max})")));
    }
    Ok(())
}

/// `G^{a,n}_{0,0}`
pub fn moment_00(model: &OscillatorModel, n: usize, a: usize, q: f64) -> Result<f64> {
    check_indices(n, a)?;
    check_table(n, PREFACTOR_N_MAX)?;
    let loc = Local::new(model, vec![q])?;
    Ok(g00(&loc, n, a))
}

/// `G^{a,n}_{0,1}`, linear in `q'`.
pub fn moment_01(model: &OscillatorModel, n: usize, a: usize, jet: &Jet) -> Result<f64> {
    check_indices(n, a)?;
    check_table(n, N_MAX)?;
    jet.require(1)?;
    Ok(g01(&Local::from_jet(model, jet)?, n, a))
}

/// `G^{a,n}_{0,2}`; zero for odd `n` and for odd `a`.
pub fn moment_02(model: &OscillatorModel, n: usize, a: usize, jet: &Jet) -> Result<f64> {
    check_indices(n, a)?;
    check_table(n, N_MAX)?;
    jet.require(2)?;
    Ok(g02(&Local::from_jet(model, jet)?, n, a))
}

/// `G^{a,n}_{0,3}`: zero unless `a` is odd and `n` even. The odd-`a` entries
/// follow from the second-order moments by the ascending recursion
/// `(n-a) omega G^{a+1} = dG^a_{0,2}/dt + a omega X G^{a-1}` over even `a`.
pub fn moment_03(model: &OscillatorModel, n: usize, a: usize, jet: &Jet) -> Result<f64> {
    check_indices(n, a)?;
    check_table(n, N_MAX)?;
    jet.require(3)?;
    if n % 2 == 1 || a % 2 == 0 {
        Local::from_jet(model, jet)?;
        return Ok(0.0);
    }
    let series = Local::from_series(model, &Taylor::from_derivatives(&jet.as_slice()[..4]))?;
    let omega = model.omega();
    let x = series.x.value();
    let mut below = 0.0;
    let mut current = 0.0;
    for even in (0..a).step_by(2) {
        let rate = g02(&series, n, even).derivative_at_origin(1).expect("jet order 3");
        current = (rate + even as f64 * omega * x * below) / ((n - even) as f64 * omega);
        below = current;
    }
    Ok(current)
}

/// `G^{0,2}_{0,4}`; other `(a, n)` are not available at fourth order.
pub fn moment_04(model: &OscillatorModel, n: usize, a: usize, jet: &Jet) -> Result<f64> {
    check_indices(n, a)?;
    if (a, n) != (0, 2) {
        return Err(Error::Unsupported(format!(
            "order (0,4) is only available for (a,n) = (0,2), got ({a},{n})"
        )));
    }
    jet.require(4)?;
    Ok(g02_fourth(&Local::from_jet(model, jet)?))
}

/// `G^{a,n}_{1,0}`; nonzero only for even `a` and odd `n`.
pub fn moment_10(model: &OscillatorModel, n: usize, a: usize, q: f64) -> Result<f64> {
    check_indices(n, a)?;
    check_table(n, N_MAX - 1)?;
    Ok(g10(&Local::new(model, vec![q])?, n, a))
}

/// `G^{a,n}_{1,1}`. Zero for even `n`; for odd `n` and even `a` it has the
/// same form as `G^{a,n}_{1,0}` with the first-order prefactors. Odd `a`
/// with odd `n` has no closed form.
pub fn moment_11(model: &OscillatorModel, n: usize, a: usize, jet: &Jet) -> Result<f64> {
    check_indices(n, a)?;
    check_table(n, N_MAX - 1)?;
    jet.require(1)?;
    if n % 2 == 1 && a % 2 == 1 {
        return Err(Error::Unsupported(format!(
            "G^{{{a},{n}}}_{{1,1}} with odd a and odd n has no closed-form solution"
        )));
    }
    Ok(g11(&Local::from_jet(model, jet)?, n, a))
}

/// Dispatch on the expansion order.
pub fn moment(
    model: &OscillatorModel,
    order: ExpansionOrder,
    n: usize,
    a: usize,
    jet: &Jet,
) -> Result<f64> {
    match (order.e, order.i) {
        (0, 0) => moment_00(model, n, a, jet.q()),
        (0, 1) => moment_01(model, n, a, jet),
        (0, 2) => moment_02(model, n, a, jet),
        (0, 3) => moment_03(model, n, a, jet),
        (0, 4) => moment_04(model, n, a, jet),
        (1, 0) => moment_10(model, n, a, jet.q()),
        (1, 1) => moment_11(model, n, a, jet),
        (e, i) => Err(Error::Unsupported(format!("expansion order ({e},{i})"))),
    }
}

/// The auxiliary quantity `Theta` in closed form (requires a jet of order 4).
pub fn theta(model: &OscillatorModel, jet: &Jet) -> Result<f64> {
    jet.require(4)?;
    Ok(theta_expr(&Local::from_jet(model, jet)?))
}

/// `G^{0,2}` summed over the supported orders with `e <= hbar_order` and
/// `i <= adiabatic_order`, with the formal adiabatic parameter set to one.
/// No `e = 2` order has a closed form, so `hbar_order = 2` adds nothing to
/// `hbar_order = 1`.
pub fn g02_stack(
    model: &OscillatorModel,
    jet: &Jet,
    hbar_order: u32,
    adiabatic_order: u32,
) -> Result<f64> {
    if hbar_order > 2 {
        return Err(Error::Range(format!("hbar order {hbar_order} exceeds 2")));
    }
    if adiabatic_order > 4 {
        return Err(Error::Range(format!(
            "adiabatic order {adiabatic_order} exceeds the available order 4"
        )));
    }
    jet.require(adiabatic_order as usize)?;
    let loc = Local::from_jet(model, jet)?;
    let mut total = g00(&loc, 2, 0);
    // G_{0,1}, G_{0,3} and every G_{1,i} with i <= 4 vanish for (a, n) = (0, 2)
    if adiabatic_order >= 2 {
        total += g02(&loc, 2, 0);
    }
    if adiabatic_order >= 4 {
        total += g02_fourth(&loc);
    }
    if hbar_order >= 1 {
        let sqrt_hbar = model.hbar().sqrt();
        total += sqrt_hbar * g10(&loc, 2, 0);
        if adiabatic_order >= 1 {
            total += sqrt_hbar * g11(&loc, 2, 0);
        }
    }
    Ok(total)
}

/// Sum of the supported orders up to `adiabatic_order`, including the
/// `sqrt(hbar)` corrections, for one moment. Orders without a closed form
/// for this `(a, n)`, or whose coefficient tables stop below `n`, contribute
/// nothing. Used to seed and close the hierarchy.
pub fn adiabatic_moment(
    model: &OscillatorModel,
    n: usize,
    a: usize,
    jet: &Jet,
    adiabatic_order: u32,
) -> Result<f64> {
    check_indices(n, a)?;
    check_table(n, PREFACTOR_N_MAX)?;
    let mut total = 0.0;
    let sqrt_hbar = model.hbar().sqrt();
    for order in ExpansionOrder::all() {
        let covered = match (order.e, order.i) {
            (0, 0) => true,
            (0, 4) => (a, n) == (0, 2),
            (0, _) => n <= N_MAX,
            _ => n < N_MAX,
        };
        if order.i > adiabatic_order || order.i as usize > jet.order() || !covered {
            continue;
        }
        let value = match moment(model, order, n, a, jet) {
            Err(Error::Unsupported(_)) => 0.0,
            other => other?,
        };
        total += if order.e == 1 { sqrt_hbar * value } else { value };
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quartic() -> OscillatorModel {
        OscillatorModel::quartic(1.0)
    }

    fn harmonic() -> OscillatorModel {
        OscillatorModel::harmonic(1.0, 1.0, 1.0).unwrap()
    }

    fn jet(v: &[f64]) -> Jet {
        Jet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn zeroth_order_values() {
        assert!((moment_00(&harmonic(), 2, 0, 0.3).unwrap() - 0.5).abs() < 1e-15);
        assert!((moment_00(&harmonic(), 4, 0, 0.3).unwrap() - 0.75).abs() < 1e-15);
        for a in 0..=3 {
            assert_eq!(moment_00(&quartic(), 3, a, 0.4).unwrap(), 0.0);
        }
        // X^{-1/2}/2 at X = 3/2
        let expect = 0.5 * 1.5f64.powf(-0.5);
        assert!((moment_00(&quartic(), 2, 0, 1.0).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn first_order_correlation() {
        let (q, qd) = (0.8, -0.6);
        let x = quartic().stiffness(q).unwrap();
        let expect = -q * qd / 8.0 * x.powf(-1.5);
        let got = moment_01(&quartic(), 2, 1, &jet(&[q, qd])).unwrap();
        assert!((got - expect).abs() < 1e-15);
        assert_eq!(moment_01(&quartic(), 4, 2, &jet(&[q, qd])).unwrap(), 0.0);
        assert_eq!(moment_01(&harmonic(), 4, 3, &jet(&[q, qd])).unwrap(), 0.0);
        assert!(matches!(moment_01(&quartic(), 2, 1, &jet(&[q])), Err(Error::Range(_))));
    }

    #[test]
    fn second_order_lowest_moment_explicit() {
        let model = OscillatorModel::new(1.2, 0.9, 1.0, vec![0.0, 0.0, 0.0, 0.3, 0.1]).unwrap();
        let (q, qd, qdd) = (0.4, 0.7, -0.5);
        let (m, w) = (1.2f64, 0.9f64);
        let x = model.stiffness(q).unwrap();
        let u3 = model.u_derivative(q, 3);
        let u4 = model.u_derivative(q, 4);
        let expect = (u3 * qdd + u4 * qd * qd) / (16.0 * m * w.powi(4)) * x.powf(-2.5)
            - 5.0 * (u3 * qd).powi(2) / (64.0 * m * m * w.powi(6)) * x.powf(-3.5);
        let got = moment_02(&model, 2, 0, &jet(&[q, qd, qdd])).unwrap();
        assert!((got - expect).abs() < 1e-15 * (1.0 + expect.abs()));
        assert_eq!(moment_02(&harmonic(), 4, 2, &jet(&[q, qd, qdd])).unwrap(), 0.0);
        assert_eq!(moment_02(&model, 4, 1, &jet(&[q, qd, qdd])).unwrap(), 0.0);
        assert_eq!(moment_02(&model, 5, 2, &jet(&[q, qd, qdd])).unwrap(), 0.0);
    }

    #[test]
    fn second_order_n4_sample() {
        // m = omega = 1, U = q^4/24, q = 1, q' = 1, q'' = -1 with A'_4 = 3/16, B'_4 = -15/16
        let x: f64 = 1.5;
        let (u3, u4) = (1.0, 1.0);
        let w = -u3 + u4;
        let v: f64 = 1.0;
        let expect = 3.0 / 16.0 * w * x.powf(-3.0) - 15.0 / 16.0 * v * v / 4.0 * x.powf(-4.0);
        let got = moment_02(&quartic(), 4, 0, &jet(&[1.0, 1.0, -1.0])).unwrap();
        assert!((got - expect).abs() < 1e-15);
    }

    #[test]
    fn sqrt_hbar_zeroth_order() {
        let got = moment_10(&quartic(), 3, 2, 1.0).unwrap();
        assert!((got - 1.0 / 12.0 / 1.5).abs() < 1e-15);
        assert_eq!(moment_10(&quartic(), 3, 1, 1.0).unwrap(), 0.0);
        assert_eq!(moment_10(&quartic(), 4, 2, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn sqrt_hbar_first_order() {
        let j = jet(&[0.5, 0.2]);
        assert_eq!(moment_11(&quartic(), 2, 1, &j).unwrap(), 0.0);
        assert_eq!(moment_11(&quartic(), 4, 2, &j).unwrap(), 0.0);
        assert!(matches!(moment_11(&quartic(), 3, 1, &j), Err(Error::Unsupported(_))));
        // even a, odd n: D~[2,3] = 5/24 times U'''/X
        let x = quartic().stiffness(0.5).unwrap();
        let got = moment_11(&quartic(), 3, 2, &j).unwrap();
        assert!((got - 5.0 / 24.0 * 0.5 / x).abs() < 1e-15);
    }

    #[test]
    fn third_order_correlation_is_rate_of_second_order_moment() {
        let model = OscillatorModel::new(1.1, 0.7, 1.0, vec![0.0, 0.0, 0.0, 0.2, 0.05, -0.01]).unwrap();
        let j = jet(&[0.3, 0.5, -0.2, 0.4]);
        // a = 1, n = 2: 2 omega G^{1,2}_{0,3} = d/dt G^{0,2}_{0,2}
        let series = Local::from_series(&model, &j.to_taylor()).unwrap();
        let rate = g02(&series, 2, 0).derivative_at_origin(1).unwrap();
        let got = moment_03(&model, 2, 1, &j).unwrap();
        assert!((got - rate / (2.0 * 0.7)).abs() < 1e-14);
        assert_eq!(moment_03(&model, 2, 0, &j).unwrap(), 0.0);
        assert_eq!(moment_03(&model, 3, 1, &j).unwrap(), 0.0);
    }

    #[test]
    fn fourth_order_only_for_lowest_second_moment() {
        let j = jet(&[0.3, 0.5, -0.2, 0.4, 0.1]);
        assert!(moment_04(&quartic(), 2, 0, &j).is_ok());
        assert!(matches!(moment_04(&quartic(), 4, 0, &j), Err(Error::Unsupported(_))));
        assert!(matches!(moment(&quartic(), ExpansionOrder { e: 2, i: 0 }, 2, 0, &j), Err(Error::Unsupported(_))));
        assert!(ExpansionOrder::new(1, 2).is_err());
    }

    #[test]
    fn stack_reduces_to_half_without_anharmonicity() {
        let j = jet(&[0.3, 0.5, -0.2, 0.4, 0.1]);
        for order in 0..=4 {
            assert_eq!(g02_stack(&harmonic(), &j, 1, order).unwrap(), 0.5);
        }
        let two = g02_stack(&quartic(), &j, 1, 2).unwrap();
        let parts = moment_00(&quartic(), 2, 0, 0.3).unwrap() + moment_02(&quartic(), 2, 0, &j).unwrap();
        assert_eq!(two, parts);
        assert!(g02_stack(&quartic(), &jet(&[0.3, 0.5]), 1, 2).is_err());
        assert_eq!(g02_stack(&quartic(), &j, 2, 4).unwrap(), g02_stack(&quartic(), &j, 1, 4).unwrap());
        assert!(g02_stack(&quartic(), &j, 3, 2).is_err());
    }

    #[test]
    fn stack_at_second_order_matches_explicit_expression() {
        let model = OscillatorModel::new(0.9, 1.3, 0.01, vec![0.0, 0.0, 0.0, -0.2, 0.3, 0.01]).unwrap();
        let (q, qd, qdd) = (0.2, -0.9, 0.6);
        let (m, w) = (0.9f64, 1.3f64);
        let x = model.stiffness(q).unwrap();
        let u3 = model.u_derivative(q, 3);
        let u4 = model.u_derivative(q, 4);
        let expect = 0.5 * x.powf(-0.5) + (u3 * qdd + u4 * qd * qd) / (16.0 * m * w.powi(4)) * x.powf(-2.5)
            - 5.0 * (u3 * qd).powi(2) / (64.0 * m * m * w.powi(6)) * x.powf(-3.5);
        let got = g02_stack(&model, &jet(&[q, qd, qdd]), 1, 2).unwrap();
        assert!((got - expect).abs() <= 1e-14 * expect.abs());
    }

    #[test]
    fn domain_error_propagates() {
        let soft = OscillatorModel::new(1.0, 1.0, 1.0, vec![0.0, 0.0, 0.0, 0.0, -1.0]).unwrap();
        assert!(matches!(moment_00(&soft, 2, 0, 1.0), Err(Error::Domain { .. })));
        assert!(matches!(moment_10(&soft, 3, 2, 1.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn parity_ladder() {
        let model = OscillatorModel::new(1.0, 1.0, 1.0, vec![0.0, 0.0, 0.0, 0.3, 0.2, 0.05]).unwrap();
        let j = jet(&[0.4, 0.3, -0.6, 0.2, 0.9]);
        for n in 2..=8 {
            for a in 0..=n {
                let even_a = a % 2 == 0;
                let even_n = n % 2 == 0;
                if !(even_a && even_n) {
                    assert_eq!(moment_00(&model, n, a, 0.4).unwrap(), 0.0);
                    assert_eq!(moment_02(&model, n, a, &j).unwrap(), 0.0);
                }
                if even_a || !even_n {
                    assert_eq!(moment_01(&model, n, a, &j).unwrap(), 0.0);
                }
                if !even_n || even_a {
                    assert_eq!(moment_03(&model, n, a, &j).unwrap(), 0.0);
                }
                if !(even_a && !even_n) {
                    assert_eq!(moment_10(&model, n, a, 0.4).unwrap(), 0.0);
                }
                if even_n {
                    assert_eq!(moment_11(&model, n, a, &j).unwrap(), 0.0);
                }
            }
        }
    }

    #[test]
    fn sqrt_hbar_moment_is_proportional_to_next_vacuum_moment() {
        // G^{a,n}_{1,0} m^{3/2} omega^{5/2} / U''' = const * X^{-1} G^{a,n+1}_{0,0}
        let model = OscillatorModel::new(1.0, 1.0, 1.0, vec![0.0, 0.0, 0.0, 0.4, 0.3]).unwrap();
        for n in [3usize, 5, 7] {
            for a in (0..n).step_by(2) {
                let ratio = |q: f64| {
                    let x = model.stiffness(q).unwrap();
                    let g10 = moment_10(&model, n, a, q).unwrap() / model.u_derivative(q, 3);
                    g10 / (moment_00(&model, n + 1, a, q).unwrap() / x)
                };
                let r0 = ratio(0.1);
                for q in [0.3, 0.7, 1.2] {
                    assert!((ratio(q) - r0).abs() <= 1e-13 * r0.abs(), "n={n} a={a}");
                }
            }
        }
    }
}
