use super::{g00, g01, g02, Local};
use crate::error::Result;
use crate::model::{Jet, OscillatorModel};

/// Tolerance below `1/4` at which the uncertainty relation counts as violated.
pub const UNCERTAINTY_TOLERANCE: f64 = 1e-6;

/// Dimensionless second moments through second adiabatic order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondMomentBlock {
    pub g02: f64,
    pub g22: f64,
    pub g12: f64,
    pub x: f64,
    /// `(U''' q'' + U'''' q'^2)/(16 m omega^4) X^{-5/2} - 5 (U''' q')^2/(64 m^2 omega^6) X^{-7/2}`
    pub y: f64,
}

impl SecondMomentBlock {
    /// `g02 g22 - g12^2`
    pub fn uncertainty(&self) -> f64 {
        self.g02 * self.g22 - self.g12 * self.g12
    }

    /// `1/4 - X Y^2 + (U''' q')^2/(32 m^2 omega^6) X^{-5/2} Y`, using
    /// `(U''' q')^2/(m^2 omega^6) = 64 g12^2 X^3`.
    pub fn uncertainty_reduced(&self) -> f64 {
        0.25 - self.x * self.y * self.y + 2.0 * self.g12 * self.g12 * self.x.sqrt() * self.y
    }

    pub fn violated(&self) -> bool {
        self.uncertainty() < 0.25 - UNCERTAINTY_TOLERANCE
    }
}

pub fn second_moment_block(model: &OscillatorModel, jet: &Jet) -> Result<SecondMomentBlock> {
    jet.require(2)?;
    let loc = Local::from_jet(model, jet)?;
    let y = g02(&loc, 2, 0);
    Ok(SecondMomentBlock {
        g02: g00(&loc, 2, 0) + y,
        g22: g00(&loc, 2, 2) + g02(&loc, 2, 2),
        g12: g01(&loc, 2, 1),
        x: loc.x,
        y,
    })
}

/// `g02 g22 - g12^2` of a block; the model is not needed once the block exists.
pub fn uncertainty_value(block: &SecondMomentBlock, _model: &OscillatorModel) -> f64 {
    block.uncertainty()
}

/// Dimensionless zero-point energy `g02 + g22`, in units of `hbar omega / 2`.
pub fn zero_point(model: &OscillatorModel, jet: &Jet) -> Result<f64> {
    let block = second_moment_block(model, jet)?;
    Ok(block.g02 + block.g22)
}

/// `X^{-1/2}(1 + X)/2 + Y(1 - X) + (U''' q')^2/(32 m^2 omega^6) X^{-5/2}`
pub fn zero_point_closed_form(model: &OscillatorModel, jet: &Jet) -> Result<f64> {
    jet.require(2)?;
    let loc = Local::from_jet(model, jet)?;
    let x = loc.x;
    let y = g02(&loc, 2, 0);
    let v = loc.v();
    let (m, w) = (model.m(), model.omega());
    Ok(0.5 * x.powf(-0.5) * (1.0 + x) + y * (1.0 - x) + v * v / (32.0 * m * m * w.powi(6)) * x.powf(-2.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn jet(v: &[f64]) -> Jet {
        Jet::new(v.to_vec()).unwrap()
    }

    fn model() -> OscillatorModel {
        OscillatorModel::new(1.3, 0.8, 1.0, vec![0.0, 0.0, 0.0, 0.25, 0.4, -0.02]).unwrap()
    }

    #[test]
    fn harmonic_block_saturates_uncertainty() {
        let h = OscillatorModel::harmonic(1.0, 2.0, 1.0).unwrap();
        let b = second_moment_block(&h, &jet(&[0.7, -1.0, 0.4])).unwrap();
        assert_eq!(b, SecondMomentBlock { g02: 0.5, g22: 0.5, g12: 0.0, x: 1.0, y: 0.0 });
        assert_eq!(b.uncertainty(), 0.25);
        assert!(!b.violated());
        assert_eq!(zero_point(&h, &jet(&[0.7, -1.0, 0.4])).unwrap(), 1.0);
    }

    #[test]
    fn block_matches_explicit_expressions() {
        let m = model();
        let (q, qd, qdd) = (0.3, 0.9, -0.4);
        let (mass, w) = (1.3f64, 0.8f64);
        let x = m.stiffness(q).unwrap();
        let u3 = m.u_derivative(q, 3);
        let u4 = m.u_derivative(q, 4);
        let wv = u3 * qdd + u4 * qd * qd;
        let v = u3 * qd;
        let y = wv / (16.0 * mass * w.powi(4)) * x.powf(-2.5) - 5.0 * v * v / (64.0 * mass * mass * w.powi(6)) * x.powf(-3.5);
        let g22 = 0.5 * x.sqrt() - wv / (16.0 * mass * w.powi(4)) * x.powf(-1.5)
            + 7.0 * v * v / (64.0 * mass * mass * w.powi(6)) * x.powf(-2.5);
        let g12 = -v / (8.0 * mass * w.powi(3)) * x.powf(-1.5);
        let b = second_moment_block(&m, &jet(&[q, qd, qdd])).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-14 * (1.0 + b.abs());
        assert!(close(b.y, y));
        assert!(close(b.g02, 0.5 * x.powf(-0.5) + y));
        assert!(close(b.g22, g22));
        assert!(close(b.g12, g12));
        assert!(close(b.x, x));
    }

    #[test]
    fn static_jet_has_no_correction() {
        let q4 = OscillatorModel::quartic(1.0);
        let b = second_moment_block(&q4, &jet(&[1.2, 0.0, 0.0])).unwrap();
        assert_eq!(b.y, 0.0);
        assert!((b.g02 - 0.5 * b.x.powf(-0.5)).abs() < 1e-15);
        assert!((b.uncertainty() - 0.25).abs() < 1e-15);
        let z = zero_point(&q4, &jet(&[1.2, 0.0, 0.0])).unwrap();
        assert!((z - 0.5 * b.x.powf(-0.5) * (1.0 + b.x)).abs() < 1e-15);
    }

    #[test]
    fn violation_flag() {
        let b = SecondMomentBlock { g02: 0.5, g22: 0.49, g12: 0.0, x: 1.0, y: 0.0 };
        assert!(b.violated());
        assert_eq!(uncertainty_value(&b, &model()), 0.245);
    }

    proptest! {
        #[test]
        fn reduced_uncertainty_identity(q in -1.0f64..1.0, qd in -2.0f64..2.0, qdd in -2.0f64..2.0) {
            let b = second_moment_block(&model(), &jet(&[q, qd, qdd])).unwrap();
            let (full, reduced) = (b.uncertainty(), b.uncertainty_reduced());
            prop_assert!((full - reduced).abs() <= 1e-12 * full.abs());
        }

        #[test]
        fn zero_point_identity(q in -1.0f64..1.0, qd in -2.0f64..2.0, qdd in -2.0f64..2.0) {
            let j = jet(&[q, qd, qdd]);
            let z = zero_point(&model(), &j).unwrap();
            let c = zero_point_closed_form(&model(), &j).unwrap();
            prop_assert!((z - c).abs() <= 1e-12 * c.abs());
        }
    }
}
