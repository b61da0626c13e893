//! Shared fixtures for the unit tests.

use num_rational::BigRational;

use crate::control::ControlSystem;
use crate::vecfield::{Chart, PolyVectorField, Polynomial};

pub fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// Frame of the free-nilpotent growth-(2,3,5) model on R^5:
/// X1 = d1, X2 = d2 + x1 d3 + (x1^2/2) d4 + x1 x2 d5.
pub fn m5_frame() -> Vec<PolyVectorField> {
    let n = 5;
    let x1 = Polynomial::var(n, 0);
    let x2 = Polynomial::var(n, 1);
    let one = Polynomial::constant_i64(n, 1);
    let zero = Polynomial::zero(n);
    vec![
        PolyVectorField::new(vec![
            one.clone(),
            zero.clone(),
            zero.clone(),
            zero.clone(),
            zero.clone(),
        ])
        .unwrap(),
        PolyVectorField::new(vec![
            zero.clone(),
            one,
            x1.clone(),
            x1.pow(2).scale(&q(1, 2)),
            x1.mul(&x2),
        ])
        .unwrap(),
    ]
}

pub fn m5_system() -> ControlSystem {
    ControlSystem::new(Chart::standard(5), m5_frame()).unwrap()
}
