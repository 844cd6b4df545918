//! Standard single-qubit matrices.

use std::f64::consts::FRAC_1_SQRT_2;

use super::Axis;
use crate::qmath::{ComplexMatrix, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

pub fn h() -> ComplexMatrix {
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    ComplexMatrix::from_rows(&[[s, s], [s, -s]])
}

pub fn x() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[[ZERO, ONE], [ONE, ZERO]])
}

pub fn y() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[[ZERO, -I], [I, ZERO]])
}

pub fn z() -> ComplexMatrix {
    ComplexMatrix::diagonal(&[ONE, -ONE])
}

pub fn neg_z() -> ComplexMatrix {
    ComplexMatrix::diagonal(&[-ONE, ONE])
}

pub fn pauli(axis: Axis) -> ComplexMatrix {
    match axis {
        Axis::X => x(),
        Axis::Y => y(),
        Axis::Z => z(),
    }
}

/// `exp(−iθσ/2)` as row-major `[m00, m01, m10, m11]`.
pub(crate) fn rotation_entries(axis: Axis, theta: f64) -> [C64; 4] {
    let (s, c) = (theta / 2.0).sin_cos();
    match axis {
        Axis::X => [C64::new(c, 0.0), C64::new(0.0, -s), C64::new(0.0, -s), C64::new(c, 0.0)],
        Axis::Y => [C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(c, 0.0)],
        Axis::Z => [C64::new(c, -s), ZERO, ZERO, C64::new(c, s)],
    }
}

pub fn rotation(axis: Axis, theta: f64) -> ComplexMatrix {
    let [a, b, c, d] = rotation_entries(axis, theta);
    ComplexMatrix::from_rows(&[[a, b], [c, d]])
}
