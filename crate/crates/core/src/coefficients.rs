//! Exact expansion coefficients of the anharmonic-vacuum moment solutions.
//!
//! Every coefficient is a rational number. Recurrences are the primary
//! definitions; the closed forms are kept as independent validators.
//!
//! | symbol | moments | indices |
//! |---|---|---|
//! | `P[a,n]` | `G_{0,0}` prefactor | even `a`, even `n` |
//! | `C[a,n]` | `G_{0,1}` | odd `a`, even `n` |
//! | `A[a,n]`, `B[a,n]` | `G_{0,2}` ansatz | even `a`, even `n` |
//! | `A'[n]`, `B'[n]` | `G^{0,n}_{0,2}` | even `n` |
//! | `D[a,n]` | `G_{1,0}` | even `a`, odd `n` |
//! | `D~[a,n]` | `G_{1,1}` | even `a`, odd `n` |

use std::collections::BTreeMap;
use std::fmt;

use num::{BigInt, BigRational, One, Signed, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Largest moment order handled by the coefficient tables.
pub const N_MAX: usize = 16;

fn int(v: i64) -> BigInt {
    BigInt::from(v)
}

fn rat(num: i64, den: i64) -> Rational {
    Rational::new(int(num), int(den))
}

fn factorial(k: usize) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, i| acc * int(i as i64))
}

fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

fn pow2(k: usize) -> BigInt {
    BigInt::one() << k
}

/// `Gamma(k + 1/2) / sqrt(pi) = (2k-1)!! / 2^k`.
fn gamma_half(k: usize) -> Rational {
    let odd = (1..=k).fold(BigInt::one(), |acc, i| acc * int(2 * i as i64 - 1));
    Rational::new(odd, pow2(k))
}

/// `Gamma(j/2)` as `value * sqrt(pi)^s` with `s` = 1 for odd `j`, 0 for even.
fn gamma_of_half_integer(j: usize) -> (Rational, u32) {
    assert!(j > 0);
    if j % 2 == 0 {
        (Rational::from_integer(factorial(j / 2 - 1)), 0)
    } else {
        (gamma_half((j - 1) / 2), 1)
    }
}

fn pochhammer(x: &Rational, k: usize) -> Rational {
    (0..k).fold(Rational::one(), |acc, i| {
        acc * (x + Rational::from_integer(int(i as i64)))
    })
}

pub fn to_f64(r: &Rational) -> f64 {
    use num::ToPrimitive;
    r.to_f64().expect("coefficient representable as f64")
}

/// `p/q` with an explicit denominator, also for integers.
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn check_even_n(n: usize) -> Result<()> {
    if n < 2 || n > N_MAX || n % 2 != 0 {
        return Err(Error::Range(format!("n must be even with 2 <= n <= {N_MAX}, got {n}")));
    }
    Ok(())
}

fn check_odd_n(n: usize) -> Result<()> {
    if n < 3 || n > N_MAX - 1 || n % 2 != 1 {
        return Err(Error::Range(format!(
            "n must be odd with 3 <= n <= {}, got {n}",
            N_MAX - 1
        )));
    }
    Ok(())
}

/// Harmonic-vacuum moment `(n-a)! a! / (2^n ((n-a)/2)! (a/2)!)` for even `a`
/// and `n`, zero otherwise. `P[0,0] = 1` is the normalization.
pub fn vacuum_prefactor(n: usize, a: usize) -> Rational {
    if a > n || a % 2 != 0 || n % 2 != 0 {
        return Rational::zero();
    }
    Rational::new(
        factorial(n - a) * factorial(a),
        pow2(n) * factorial((n - a) / 2) * factorial(a / 2),
    )
}

/// `C[a,n]` for every odd `a < n`, by descending recurrence from
/// `C[n-1,n] = -2^-(n+2) n!/(n/2)!`.
pub fn c_table(n: usize) -> Result<BTreeMap<usize, Rational>> {
    check_even_n(n)?;
    let mut c = BTreeMap::new();
    c.insert(
        n - 1,
        -Rational::new(factorial(n), pow2(n + 2) * factorial(n / 2)),
    );
    for a in (1..n / 2).rev().map(|k| 2 * k) {
        let inhom = Rational::new(
            factorial(n - a) * factorial(a - 1) * int(2 * a as i64 - n as i64),
            pow2(n + 2) * factorial((n - a) / 2) * factorial(a / 2),
        );
        let next = rat((n - a) as i64, a as i64) * &c[&(a + 1)] - inhom;
        c.insert(a - 1, next);
    }
    Ok(c)
}

fn check_odd_a(n: usize, a: usize) -> Result<()> {
    if a % 2 != 1 || a >= n {
        return Err(Error::Range(format!("a must be odd with 1 <= a <= {}, got {a}", n - 1)));
    }
    Ok(())
}

pub fn c_coeff(n: usize, a: usize) -> Result<Rational> {
    check_even_n(n)?;
    check_odd_a(n, a)?;
    Ok(c_table(n)?.remove(&a).expect("odd a present"))
}

/// Unrolled form of the `C` recurrence, used to cross-check [`c_table`].
pub fn c_coeff_closed_form(n: usize, a: usize) -> Result<Rational> {
    check_even_n(n)?;
    check_odd_a(n, a)?;
    // index shift: the closed form gives C[e-1,n] for even e
    let e = a + 1;
    let term = |e: usize| {
        Rational::new(
            factorial(n - e) * factorial(e - 1) * int(2 * e as i64 - n as i64),
            factorial((n - e) / 2) * factorial(e / 2),
        )
    };
    let scale = Rational::new(BigInt::one(), pow2(n + 2));
    let mut sum = Rational::zero();
    if n >= e + 2 {
        for b in 0..=(n - e - 2) / 2 {
            let prod = (0..=b).fold(Rational::one(), |acc, c| {
                acc * rat((n - (e + 2 * c)) as i64, (e + 2 * c) as i64)
            });
            sum += prod * term(e + 2 * (b + 1));
        }
    }
    Ok(-(term(e) + sum) * scale)
}

/// `A[a,n]` and `B[a,n]` for even `a` in `[0, n]`, seeded by `A[0,n] = B[0,n] = 0`.
pub fn ab_coeffs(n: usize) -> Result<(BTreeMap<usize, Rational>, BTreeMap<usize, Rational>)> {
    let c = c_table(n)?;
    let mut a_tab = BTreeMap::from([(0, Rational::zero())]);
    let mut b_tab = BTreeMap::from([(0, Rational::zero())]);
    for a in (1..n).step_by(2) {
        let w = rat(a as i64, (n - a) as i64);
        let ca = &c[&a];
        let next_a = ca / Rational::from_integer(int((n - a) as i64)) + &w * &a_tab[&(a - 1)];
        let next_b = ca * rat(2 * a as i64 - n as i64 - 6, (n - a) as i64) + &w * &b_tab[&(a - 1)];
        a_tab.insert(a + 1, next_a);
        b_tab.insert(a + 1, next_b);
    }
    Ok((a_tab, b_tab))
}

/// `binom(n/2, a/2)^2 / binom(n, a)`.
fn squared_weight(n: usize, a: usize) -> Rational {
    let h = binomial(n / 2, a / 2);
    Rational::new(&h * &h, binomial(n, a))
}

/// `(A'[n], B'[n])`, fixed by the third-order consistency condition.
pub fn ap_bp(n: usize) -> Result<(Rational, Rational)> {
    let (a_tab, b_tab) = ab_coeffs(n)?;
    let mut num_a = Rational::zero();
    let mut den_a = Rational::zero();
    let mut num_b = Rational::zero();
    let mut den_b = Rational::zero();
    for a in (0..=n).step_by(2) {
        let h = Rational::from_integer(binomial(n / 2, a / 2));
        let w = squared_weight(n, a);
        let shift = Rational::from_integer(int(2 * a as i64 - n as i64 - 12));
        num_a += &h * &a_tab[&a];
        den_a += w.clone();
        num_b += &h * &b_tab[&a] * &shift;
        den_b += w * shift;
    }
    assert!(!den_a.is_zero() && !den_b.is_zero(), "weight sums vanish for n = {n}");
    Ok((-num_a / den_a, -num_b / den_b))
}

/// All coefficients belonging to one even order `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffTable {
    pub n: usize,
    pub c: BTreeMap<usize, Rational>,
    pub a_tab: BTreeMap<usize, Rational>,
    pub b_tab: BTreeMap<usize, Rational>,
    pub a_prime: Rational,
    pub b_prime: Rational,
}

impl CoeffTable {
    pub fn new(n: usize) -> Result<Self> {
        let c = c_table(n)?;
        let (a_tab, b_tab) = ab_coeffs(n)?;
        let (a_prime, b_prime) = ap_bp(n)?;
        Ok(Self { n, c, a_tab, b_tab, a_prime, b_prime })
    }
}

impl fmt::Display for CoeffTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.n;
        for (a, v) in &self.c {
            writeln!(f, "C[{a},{n}]={}", format_rational(v))?;
        }
        for (a, v) in &self.a_tab {
            writeln!(f, "A[{a},{n}]={}", format_rational(v))?;
        }
        for (a, v) in &self.b_tab {
            writeln!(f, "B[{a},{n}]={}", format_rational(v))?;
        }
        writeln!(f, "A'[{n}]={}", format_rational(&self.a_prime))?;
        write!(f, "B'[{n}]={}", format_rational(&self.b_prime))
    }
}

/// Inhomogeneous term of the `O(sqrt(hbar))` zeroth/first adiabatic order
/// equation indexed by odd `a`, divided by `a U''' / (m^{3/2} omega^{5/2})`.
///
/// With `doubled` the product `G^{0,2} G^{a-1,n-1}` enters twice, which is the
/// first-adiabatic-order variant.
fn odd_order_source(n: usize, a: usize, doubled: bool) -> Rational {
    let product_weight = if doubled { Rational::one() } else { rat(1, 2) };
    let mut k = product_weight * vacuum_prefactor(n - 1, a - 1) - vacuum_prefactor(n + 1, a - 1);
    if a >= 3 {
        k += rat(((a - 1) * (a - 2)) as i64, 12) * vacuum_prefactor(n - 3, a - 3);
    }
    k / Rational::from_integer(int(2))
}

fn d_family(n: usize, doubled: bool) -> Result<BTreeMap<usize, Rational>> {
    check_odd_n(n)?;
    // (n-a) D[a+1] - a D[a-1] + a S(a) = 0 for odd a; a = n starts the descent
    let mut d = BTreeMap::new();
    d.insert(n - 1, odd_order_source(n, n, doubled));
    for a in (1..n - 1).rev().step_by(2) {
        let next = rat((n - a) as i64, a as i64) * &d[&(a + 1)] + odd_order_source(n, a, doubled);
        d.insert(a - 1, next);
    }
    Ok(d)
}

/// `D[a,n]` for every even `a < n`, by back-substitution of the descending
/// recurrence.
pub fn d_table(n: usize) -> Result<BTreeMap<usize, Rational>> {
    d_family(n, false)
}

/// First-adiabatic-order counterpart of [`d_table`].
pub fn d_tilde_table(n: usize) -> Result<BTreeMap<usize, Rational>> {
    d_family(n, true)
}

fn check_even_a_odd_n(n: usize, a: usize) -> Result<()> {
    check_odd_n(n)?;
    if a % 2 != 0 || a >= n {
        return Err(Error::Range(format!("a must be even with 0 <= a <= {}, got {a}", n - 1)));
    }
    Ok(())
}

pub fn d_coeff(n: usize, a: usize) -> Result<Rational> {
    check_even_a_odd_n(n, a)?;
    Ok(d_table(n)?.remove(&a).expect("even a present"))
}

pub fn d_tilde_coeff(n: usize, a: usize) -> Result<Rational> {
    check_even_a_odd_n(n, a)?;
    Ok(d_tilde_table(n)?.remove(&a).expect("even a present"))
}

/// Closed form of `D[a,n]` with the half-integer Gamma functions reduced to
/// rationals times powers of `sqrt(pi)`; all powers of `pi` cancel.
pub fn d_coeff_closed_form(n: usize, a: usize) -> Result<Rational> {
    check_even_a_odd_n(n, a)?;
    let b = (n - a - 1) / 2;
    // Gamma(n/2) = g_n sqrt(pi) for odd n
    let (g_n, s) = gamma_of_half_integer(n);
    debug_assert_eq!(s, 1);
    let twelve = Rational::from_integer(int(12));
    let nn = n as i64;
    match b {
        0 => Ok(Rational::from_integer(int(nn - 1)) * g_n / twelve),
        1 => Ok(Rational::from_integer(int(3 * nn - 11)) * g_n
            / (twelve * Rational::from_integer(int(nn - 2)))),
        _ => {
            // every bracketed term carries one sqrt(pi); the prefactor carries
            // Gamma(n/2)/pi = g_n / sqrt(pi)
            let mut bracket = Rational::from_integer(int(nn - 1) * factorial(b))
                + Rational::from_integer(int(nn - 8 * b as i64 - 1)) * gamma_half(b);
            let minus_b = Rational::from_integer(int(-(b as i64)));
            for c in 0..=(b - 2) {
                let sign = if c % 2 == 0 { 1 } else { -1 };
                let lin = int(sign * (nn - 8 * (b - c - 1) as i64 - 1));
                bracket -= Rational::from_integer(lin)
                    * gamma_half(b - c - 1)
                    * pochhammer(&minus_b, c + 1);
            }
            let sign = if b % 2 == 0 { Rational::one() } else { -Rational::one() };
            let poch = pochhammer(&(Rational::one() - rat(nn, 2)), b);
            Ok(sign * g_n / (twelve * poch) * bracket)
        }
    }
}

/// The two sums that must vanish for the second-order solution to be
/// consistent: `sum_a binom(n/2,a/2) (2a-n)(6A+B)` and
/// `sum_a binom(n/2,a/2)^2 binom(n,a)^-1 (2a-n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub n: usize,
    pub weighted_ab_sum: Rational,
    pub binomial_sum: Rational,
}

impl IdentityReport {
    pub fn holds(&self) -> bool {
        self.weighted_ab_sum.is_zero() && self.binomial_sum.is_zero()
    }
}

pub fn identity_report(n: usize) -> Result<IdentityReport> {
    let (a_tab, b_tab) = ab_coeffs(n)?;
    let mut weighted_ab_sum = Rational::zero();
    let mut binomial_sum = Rational::zero();
    for a in (0..=n).step_by(2) {
        let shift = Rational::from_integer(int(2 * a as i64 - n as i64));
        let h = Rational::from_integer(binomial(n / 2, a / 2));
        weighted_ab_sum += h * &shift * (Rational::from_integer(int(6)) * &a_tab[&a] + &b_tab[&a]);
        binomial_sum += squared_weight(n, a) * shift;
    }
    Ok(IdentityReport { n, weighted_ab_sum, binomial_sum })
}

/// `binom(n/2, a/2) / binom(n, a)`, the weight of `G^{0,n}_{0,2}` inside
/// `G^{a,n}_{0,2}`.
pub fn g0_weight(n: usize, a: usize) -> Rational {
    Rational::new(binomial(n / 2, a / 2), binomial(n, a))
}

/// `binom(n/2, a/2)` as used in the consistency condition.
pub fn half_binomial(n: usize, a: usize) -> Rational {
    Rational::from_integer(binomial(n / 2, a / 2))
}

/// Absolute value as `f64`, for reports.
pub fn magnitude(r: &Rational) -> f64 {
    to_f64(&r.abs())
}
