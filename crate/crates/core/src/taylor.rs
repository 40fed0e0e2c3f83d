//! Truncated Taylor series in time and the scalar abstraction shared with `f64`.
//!
//! The closed-form moment solutions are written once, generic over [`Scalar`].
//! Evaluated on `f64` they give values at a point; evaluated on [`Taylor`] they
//! give the whole local time expansion, so every time derivative needed by a
//! consistency equation is obtained by the chain rule rather than by
//! differencing.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

/// Arithmetic needed by the closed-form evaluators.
pub trait Scalar:
    Clone
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    /// A constant with the same shape as `self`.
    fn lift(&self, c: f64) -> Self;

    /// Real power. The leading value must be positive unless `r` is a
    /// non-negative integer.
    fn powf(&self, r: f64) -> Self;

    /// Value at the expansion point.
    fn value(&self) -> f64;
}

impl Scalar for f64 {
    fn lift(&self, c: f64) -> Self {
        c
    }

    fn powf(&self, r: f64) -> Self {
        f64::powf(*self, r)
    }

    fn value(&self) -> f64 {
        *self
    }
}

/// Taylor series `sum_k c[k] t^k` around `t = 0`, truncated to `len()` terms.
///
/// Binary operations truncate to the shorter operand, so a result never claims
/// more accuracy than its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Taylor {
    c: Vec<f64>,
}

impl Taylor {
    /// Builds the series from normalized coefficients `f^(k)(0)/k!`.
    pub fn from_coefficients(c: Vec<f64>) -> Self {
        assert!(!c.is_empty(), "a Taylor series needs at least one term");
        Self { c }
    }

    /// Builds the series from the values of `f, f', f'', ...` at `t = 0`.
    pub fn from_derivatives(derivs: &[f64]) -> Self {
        let mut fact = 1.0;
        let c = derivs
            .iter()
            .enumerate()
            .map(|(k, d)| {
                if k > 0 {
                    fact *= k as f64;
                }
                d / fact
            })
            .collect();
        Self::from_coefficients(c)
    }

    pub fn constant(v: f64, len: usize) -> Self {
        let mut c = vec![0.0; len.max(1)];
        c[0] = v;
        Self { c }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }

    /// Time derivative, one term shorter. A single-term series differentiates
    /// to the zero constant with no information about higher terms.
    pub fn derivative(&self) -> Self {
        if self.c.len() == 1 {
            return Self { c: vec![0.0] };
        }
        let c = self.c[1..]
            .iter()
            .enumerate()
            .map(|(k, v)| (k + 1) as f64 * v)
            .collect();
        Self { c }
    }

    /// `k`-th time derivative at `t = 0`, if the series is long enough.
    pub fn derivative_at_origin(&self, k: usize) -> Option<f64> {
        let ck = *self.c.get(k)?;
        Some(ck * (1..=k).map(|i| i as f64).product::<f64>())
    }

    fn zip_with(self, rhs: Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let len = self.c.len().min(rhs.c.len());
        let c = (0..len).map(|k| f(self.c[k], rhs.c[k])).collect();
        Self { c }
    }
}

impl Add for Taylor {
    type Output = Taylor;
    fn add(self, rhs: Taylor) -> Taylor {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for Taylor {
    type Output = Taylor;
    fn sub(self, rhs: Taylor) -> Taylor {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for Taylor {
    type Output = Taylor;
    fn mul(self, rhs: Taylor) -> Taylor {
        let len = self.c.len().min(rhs.c.len());
        let c = (0..len)
            .map(|k| (0..=k).map(|j| self.c[j] * rhs.c[k - j]).sum())
            .collect();
        Taylor { c }
    }
}

impl Neg for Taylor {
    type Output = Taylor;
    fn neg(mut self) -> Taylor {
        self.c.iter_mut().for_each(|v| *v = -*v);
        self
    }
}

impl Add<f64> for Taylor {
    type Output = Taylor;
    fn add(mut self, rhs: f64) -> Taylor {
        self.c[0] += rhs;
        self
    }
}

impl Mul<f64> for Taylor {
    type Output = Taylor;
    fn mul(mut self, rhs: f64) -> Taylor {
        self.c.iter_mut().for_each(|v| *v *= rhs);
        self
    }
}

impl Scalar for Taylor {
    fn lift(&self, c: f64) -> Self {
        Taylor::constant(c, self.c.len())
    }

    fn powf(&self, r: f64) -> Self {
        let x = &self.c;
        let n = x.len();
        let mut y = vec![0.0; n];
        y[0] = x[0].powf(r);
        if n > 1 && x[0] == 0.0 {
            // only reachable for integer r >= 0 with a vanishing base
            let k = r.round() as usize;
            let mut acc = Taylor::constant(1.0, n);
            for _ in 0..k {
                acc = acc * self.clone();
            }
            return acc;
        }
        // x0 k y_k = sum_{j=1}^{k} (r j - (k - j)) x_j y_{k-j}
        for k in 1..n {
            let s: f64 = (1..=k)
                .map(|j| (r * j as f64 - (k - j) as f64) * x[j] * y[k - j])
                .sum();
            y[k] = s / (k as f64 * x[0]);
        }
        Taylor { c: y }
    }

    fn value(&self) -> f64 {
        self.c[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn derivative_of_exponential_series() {
        let e = Taylor::from_derivatives(&[1.0; 6]);
        let d = e.derivative();
        assert_eq!(d.len(), 5);
        for k in 0..5 {
            assert!((d.derivative_at_origin(k).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn product_truncates_to_shorter_operand() {
        let a = Taylor::from_coefficients(vec![1.0, 2.0, 3.0]);
        let b = Taylor::from_coefficients(vec![1.0, 1.0]);
        assert_eq!((a * b).coefficients(), &[1.0, 3.0]);
    }

    #[test]
    fn integer_power_of_vanishing_base() {
        let t = Taylor::from_coefficients(vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(t.powf(2.0).coefficients(), &[0.0, 0.0, 1.0, 0.0]);
    }

    proptest! {
        // (1 + a t)^r against the binomial series
        #[test]
        fn power_matches_binomial_series(a in -2.0f64..2.0, r in -3.5f64..3.5) {
            let base = Taylor::from_coefficients(vec![1.0, a, 0.0, 0.0, 0.0]);
            let p = base.powf(r);
            let mut binom = 1.0;
            for k in 0..5 {
                if k > 0 {
                    binom *= (r - (k - 1) as f64) / k as f64;
                }
                let expect = binom * a.powi(k as i32);
                prop_assert!((p.coefficients()[k] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
            }
        }

        // x^r * x^s = x^(r+s)
        #[test]
        fn powers_compose(c in proptest::collection::vec(-1.0f64..1.0, 5), r in -2.0f64..2.0, s in -2.0f64..2.0) {
            let mut c = c;
            c[0] = 1.5 + c[0].abs();
            let x = Taylor::from_coefficients(c);
            let lhs = x.powf(r) * x.powf(s);
            let rhs = x.powf(r + s);
            for (u, v) in lhs.coefficients().iter().zip(rhs.coefficients()) {
                prop_assert!((u - v).abs() <= 1e-11 * (1.0 + v.abs()));
            }
        }
    }
}
