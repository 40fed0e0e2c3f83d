//! Oscillator parameters, the polynomial anharmonicity and time jets.

use crate::error::{Error, Result};
use crate::taylor::{Scalar, Taylor};

/// Highest polynomial degree accepted for `U(q)`. Degree 12 keeps `U^(6)`
/// a genuine polynomial.
pub const MAX_DEGREE: usize = 12;

/// `H = p^2/2m + m omega^2 q^2/2 + U(q)` with `U(q) = sum_{k>=3} c_k q^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorModel {
    m: f64,
    omega: f64,
    hbar: f64,
    /// `u_coeffs[k]` multiplies `q^k`; trailing zeros are trimmed.
    u_coeffs: Vec<f64>,
}

impl OscillatorModel {
    /// `hbar = 0` is accepted and describes the classical limit.
    pub fn new(m: f64, omega: f64, hbar: f64, u_coeffs: Vec<f64>) -> Result<Self> {
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::InvalidModel(format!("mass must be positive, got {m}")));
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidModel(format!(
                "frequency must be positive, got {omega}"
            )));
        }
        if !(hbar.is_finite() && hbar >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "hbar must be non-negative, got {hbar}"
            )));
        }
        let mut u_coeffs = u_coeffs;
        while u_coeffs.last() == Some(&0.0) {
            u_coeffs.pop();
        }
        if let Some(k) = u_coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidModel(format!("coefficient of q^{k} is not finite")));
        }
        if let Some(k) = u_coeffs.iter().take(3).position(|&c| c != 0.0) {
            return Err(Error::InvalidModel(format!(
                "U(q) must not contain a q^{k} term; constant, linear and quadratic parts are fixed by omega"
            )));
        }
        if u_coeffs.len() > MAX_DEGREE + 1 {
            return Err(Error::InvalidModel(format!(
                "degree {} exceeds the maximum {MAX_DEGREE}",
                u_coeffs.len() - 1
            )));
        }
        Ok(Self { m, omega, hbar, u_coeffs })
    }

    pub fn harmonic(m: f64, omega: f64, hbar: f64) -> Result<Self> {
        Self::new(m, omega, hbar, Vec::new())
    }

    /// `U(q) = q^4/24` with `m = omega = 1`.
    pub fn quartic(hbar: f64) -> Self {
        Self::new(1.0, 1.0, hbar, vec![0.0, 0.0, 0.0, 0.0, 1.0 / 24.0])
            .expect("valid quartic model")
    }

    pub fn with_hbar(&self, hbar: f64) -> Result<Self> {
        Self::new(self.m, self.omega, hbar, self.u_coeffs.clone())
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn u_coeffs(&self) -> &[f64] {
        &self.u_coeffs
    }

    pub fn is_harmonic(&self) -> bool {
        self.u_coeffs.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.u_coeffs.len().saturating_sub(1)
    }

    /// `U^(k)(q)`, exactly zero once `k` exceeds the degree.
    pub fn u_derivative(&self, q: f64, k: usize) -> f64 {
        self.u_derivative_at(&q, k)
    }

    /// `U^(k)` evaluated on any scalar, including a Taylor series in time.
    pub fn u_derivative_at<T: Scalar>(&self, q: &T, k: usize) -> T {
        let mut acc = q.lift(0.0);
        if k >= self.u_coeffs.len() {
            return acc;
        }
        // Horner over j = deg..=k with falling-factorial weights
        for j in (k..self.u_coeffs.len()).rev() {
            let falling: f64 = ((j - k + 1)..=j).map(|i| i as f64).product();
            acc = acc * q.clone() + self.u_coeffs[j] * falling;
        }
        acc
    }

    pub fn potential(&self, q: f64) -> f64 {
        self.u_derivative(q, 0)
    }

    /// `V(q) = m omega^2 q^2 / 2 + U(q)`.
    pub fn full_potential(&self, q: f64) -> f64 {
        0.5 * self.m * self.omega * self.omega * q * q + self.potential(q)
    }

    /// Classical acceleration `-omega^2 q - U'(q)/m`.
    pub fn classical_acceleration(&self, q: f64) -> f64 {
        -self.omega * self.omega * q - self.u_derivative(q, 1) / self.m
    }

    /// `X = 1 + U''(q)/(m omega^2)`; non-positive values are an error.
    pub fn stiffness(&self, q: f64) -> Result<f64> {
        let x = self.stiffness_unchecked(q);
        if x > 0.0 {
            Ok(x)
        } else {
            Err(Error::Domain { q, x })
        }
    }

    pub(crate) fn stiffness_unchecked(&self, q: f64) -> f64 {
        1.0 + self.u_derivative(q, 2) / (self.m * self.omega * self.omega)
    }

    /// Derivatives `(q, q', ..., q^(order))` of the classical trajectory through
    /// `(q, qdot)`, from the Taylor recursion of `q'' = -omega^2 q - U'(q)/m`.
    pub fn classical_jet(&self, q: f64, qdot: f64, order: usize) -> Jet {
        let mut c = vec![q, qdot];
        while c.len() < order + 1 {
            let series = Taylor::from_coefficients(c.clone());
            let accel = series.clone() * (-self.omega * self.omega)
                + self.u_derivative_at(&series, 1) * (-1.0 / self.m);
            // a_{k} = (k+2)(k+1) c_{k+2}
            let k = c.len() - 2;
            c.push(accel.coefficients()[k] / ((k + 2) * (k + 1)) as f64);
        }
        c.truncate(order + 1);
        let derivs = Taylor::from_coefficients(c);
        let values = (0..=order)
            .map(|k| derivs.derivative_at_origin(k).unwrap())
            .collect();
        Jet { derivs: values }
    }
}

/// Position together with its first few time derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    derivs: Vec<f64>,
}

impl Jet {
    /// `derivs = [q, q', q'', ...]`.
    pub fn new(derivs: Vec<f64>) -> Result<Self> {
        if derivs.is_empty() {
            return Err(Error::Range("a jet needs at least the position".into()));
        }
        if derivs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Range("jet entries must be finite".into()));
        }
        Ok(Self { derivs })
    }

    pub fn order(&self) -> usize {
        self.derivs.len() - 1
    }

    pub fn q(&self) -> f64 {
        self.derivs[0]
    }

    pub fn derivative(&self, k: usize) -> Option<f64> {
        self.derivs.get(k).copied()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.derivs
    }

    pub fn to_taylor(&self) -> Taylor {
        Taylor::from_derivatives(&self.derivs)
    }

    pub(crate) fn require(&self, order: usize) -> Result<()> {
        if self.order() < order {
            Err(Error::Range(format!(
                "jet of order {} is too short, order {order} required",
                self.order()
            )))
        } else {
            Ok(())
        }
    }
}
