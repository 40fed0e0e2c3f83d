//! Second moments at `O(hbar)`, zeroth adiabatic order.
//!
//! Only the `a = 1` equation is solved: it fixes `G^{2,2}_{2,0}` in terms of
//! the undetermined `G^{0,2}_{2,0}`, which must be supplied.

use super::{moment_00, moment_10};
use crate::error::Result;
use crate::model::OscillatorModel;

/// `X G^{0,2}_{2,0} - U'''^2/(24 m^3 omega^5) X^{-2} + U''''/(8 m^2 omega^3) X^{-1}`
pub fn g22_from_g02(model: &OscillatorModel, q: f64, g02_20: f64) -> Result<f64> {
    let x = model.stiffness(q)?;
    let (m, w) = (model.m(), model.omega());
    let u3 = model.u_derivative(q, 3);
    let u4 = model.u_derivative(q, 4);
    Ok(x * g02_20 - u3 * u3 / (24.0 * m.powi(3) * w.powi(5)) * x.powi(-2)
        + u4 / (8.0 * m * m * w.powi(3)) * x.recip())
}

/// Residual of the `a = 1` equation
/// `0 = omega G^{2,2} - omega X G^{0,2} - U'''/(2 (m omega)^{3/2}) G^{0,3}_{1,0} - U''''/(6 (m omega)^2) G^{0,4}_{0,0}`.
pub fn a1_residual(model: &OscillatorModel, q: f64, g02_20: f64, g22_20: f64) -> Result<f64> {
    let x = model.stiffness(q)?;
    let (m, w) = (model.m(), model.omega());
    let u3 = model.u_derivative(q, 3);
    let u4 = model.u_derivative(q, 4);
    Ok(w * g22_20 - w * x * g02_20
        - u3 / (2.0 * (m * w).powf(1.5)) * moment_10(model, 3, 0, q)?
        - u4 / (6.0 * (m * w).powi(2)) * moment_00(model, 4, 0, q)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relation_solves_the_a1_equation() {
        let model = OscillatorModel::new(1.2, 0.7, 1.0, vec![0.0, 0.0, 0.0, 0.3, 0.2, 0.1]).unwrap();
        for (q, g) in [(0.0, 0.1), (0.5, -0.3), (-0.3, 0.0)] {
            let g22 = g22_from_g02(&model, q, g).unwrap();
            assert!(a1_residual(&model, q, g, g22).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn harmonic_limit() {
        let h = OscillatorModel::harmonic(1.0, 1.0, 1.0).unwrap();
        assert_eq!(g22_from_g02(&h, 0.4, 0.25).unwrap(), 0.25);
    }
}
