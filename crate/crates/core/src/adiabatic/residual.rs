//! Substitution of the closed forms into the equations that define them.
//!
//! Each check is evaluated on the Taylor series generated by a jet, so time
//! derivatives come from the chain rule. A check reports the relative residual
//! `|sum of terms| / sum |terms|`, which is exactly zero when every term
//! vanishes.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{g00, g01, g02, g02_fourth, g10, theta_expr, Local};
use crate::coefficients::{half_binomial, to_f64};
use crate::error::{Error, Result};
use crate::model::{Jet, OscillatorModel};
use crate::taylor::{Scalar, Taylor};

/// Jet order needed by the fourth-order checks.
pub const RESIDUAL_JET_ORDER: usize = 6;

/// Maximum relative residual of each equation family over a set of jets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResidualReport {
    pub families: BTreeMap<&'static str, f64>,
    pub evaluated: usize,
    /// Jets rejected because `X <= 0`.
    pub skipped: usize,
}

impl ResidualReport {
    pub fn max_residual(&self) -> f64 {
        self.families.values().copied().fold(0.0, f64::max)
    }

    fn record(&mut self, family: &'static str, value: f64) {
        let slot = self.families.entry(family).or_insert(0.0);
        if value > *slot || value.is_nan() {
            *slot = value;
        }
    }
}

fn relative(terms: &[f64]) -> f64 {
    let scale: f64 = terms.iter().map(|t| t.abs()).sum();
    if scale == 0.0 {
        return 0.0;
    }
    terms.iter().sum::<f64>().abs() / scale
}

fn value(t: &Taylor) -> f64 {
    t.value()
}

fn rate(t: &Taylor) -> f64 {
    t.derivative_at_origin(1).unwrap_or(0.0)
}

/// `-a omega X G^{a-1} + (n-a) omega G^{a+1}` as two terms.
fn ladder(loc: &Local<Taylor>, n: usize, a: usize, g: impl Fn(usize) -> Taylor) -> [f64; 2] {
    let w = loc.omega;
    let down = if a == 0 { 0.0 } else { -(a as f64) * w * value(&loc.x) * value(&g(a - 1)) };
    let up = if a == n { 0.0 } else { (n - a) as f64 * w * value(&g(a + 1)) };
    [down, up]
}

fn check_jet(report: &mut ResidualReport, loc: &Local<Taylor>, n_max: usize) {
    let w = loc.omega;
    let m = loc.m;
    let x = value(&loc.x);
    for n in 2..=n_max {
        for a in 0..=n {
            // lambda^0: the zeroth-order moments annihilate the harmonic ladder
            report.record("lambda0", relative(&ladder(loc, n, a, |b| g00(loc, n, b))));

            // lambda^1: dG_{0,0} = ladder of G_{0,1}
            let mut terms = ladder(loc, n, a, |b| g01(loc, n, b)).to_vec();
            terms.push(-rate(&g00(loc, n, a)));
            report.record("lambda1", relative(&terms));

            // lambda^2: dG_{0,1} = ladder of G_{0,2}
            let mut terms = ladder(loc, n, a, |b| g02(loc, n, b)).to_vec();
            terms.push(-rate(&g01(loc, n, a)));
            report.record("lambda2", relative(&terms));

            // sqrt(hbar), lambda^0: ladder of G_{1,0} balances the cubic coupling
            let mut terms = ladder(loc, n, a, |b| g10(loc, n, b)).to_vec();
            if a >= 1 {
                let k = a as f64 * value(&loc.u[3]) / (2.0 * (m * w).powf(1.5));
                terms.push(k * value(&g00(loc, 2, 0)) * value(&g00(loc, n - 1, a - 1)));
                terms.push(-k * value(&g00(loc, n + 1, a - 1)));
                if a >= 3 && n >= 3 {
                    let c = ((a - 1) * (a - 2)) as f64 / 12.0;
                    terms.push(k * c * value(&g00(loc, n - 3, a - 3)));
                }
            }
            report.record("sqrt_hbar", relative(&terms));
        }

        // lambda^3 solvability: sum_a binom(n/2, a/2) X^{(n-a)/2} dG^{a,n}_{0,2} = 0
        if n % 2 == 0 {
            let terms: Vec<f64> = (0..=n)
                .step_by(2)
                .map(|a| to_f64(&half_binomial(n, a)) * x.powf((n - a) as f64 / 2.0) * rate(&g02(loc, n, a)))
                .collect();
            report.record("constraint", relative(&terms));
        }
    }

    // Theta in closed form against the second derivative of G^{0,2}_{0,2}
    let g = g02(loc, 2, 0);
    let second = g.derivative().derivative().value();
    report.record("theta", relative(&[value(&theta_expr(loc)), -second / (2.0 * w)]));

    // 2 X dG4 + (U''' q' / m omega^2) G4 + dTheta / omega = 0
    let g4 = g02_fourth(loc);
    let terms = [
        2.0 * x * rate(&g4),
        value(&loc.v()) / (m * w * w) * value(&g4),
        rate(&theta_expr(loc)) / w,
    ];
    report.record("constraint4", relative(&terms));
}

/// Runs every equation family for `2 <= n <= n_max` on each jet. Jets must
/// carry at least [`RESIDUAL_JET_ORDER`] derivatives; jets with `X <= 0` are
/// skipped and counted.
pub fn residual_suite(model: &OscillatorModel, jets: &[Jet], n_max: usize) -> Result<ResidualReport> {
    if !(2..=8).contains(&n_max) {
        return Err(Error::Range(format!("residual checks cover 2 <= n <= 8, got {n_max}")));
    }
    let mut report = ResidualReport::default();
    for jet in jets {
        jet.require(RESIDUAL_JET_ORDER)?;
        match Local::from_series(model, &jet.to_taylor()) {
            Ok(loc) => {
                check_jet(&mut report, &loc, n_max);
                report.evaluated += 1;
            }
            Err(Error::Domain { .. }) => report.skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

/// Seeded jets of order [`RESIDUAL_JET_ORDER`] with `|q| <= 1.5`, derivatives
/// in `[-1, 1]` and `X(q) > 0`.
pub fn random_jets(model: &OscillatorModel, count: usize, seed: u64) -> Vec<Jet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jets = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while jets.len() < count && attempts < 1000 * count.max(1) {
        attempts += 1;
        let q: f64 = rng.gen_range(-1.5..1.5);
        if model.stiffness(q).is_err() {
            continue;
        }
        let mut derivs = vec![q];
        derivs.extend((0..RESIDUAL_JET_ORDER).map(|_| rng.gen_range(-1.0..1.0)));
        jets.push(Jet::new(derivs).expect("finite jet"));
    }
    jets
}
