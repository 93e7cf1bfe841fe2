//! Minimal 2x2 complex matrix arithmetic for the one-step transfer updates.

use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Mat2 {
    pub m11: C64,
    pub m12: C64,
    pub m21: C64,
    pub m22: C64,
}

pub(crate) const ZERO2: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE2: C64 = C64::new(1.0, 0.0);

impl Mat2 {
    pub fn new(m11: C64, m12: C64, m21: C64, m22: C64) -> Self {
        Mat2 { m11, m12, m21, m22 }
    }

    pub fn identity() -> Self {
        Mat2::new(ONE2, ZERO2, ZERO2, ONE2)
    }

    pub fn diag(d1: C64, d2: C64) -> Self {
        Mat2::new(d1, ZERO2, ZERO2, d2)
    }

    pub fn det(&self) -> C64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        Mat2::new(
            self.m11 * rhs.m11 + self.m12 * rhs.m21,
            self.m11 * rhs.m12 + self.m12 * rhs.m22,
            self.m21 * rhs.m11 + self.m22 * rhs.m21,
            self.m21 * rhs.m12 + self.m22 * rhs.m22,
        )
    }

    pub fn mul_vec(&self, v: [C64; 2]) -> [C64; 2] {
        [
            self.m11 * v[0] + self.m12 * v[1],
            self.m21 * v[0] + self.m22 * v[1],
        ]
    }

    pub fn add(&self, rhs: &Mat2) -> Mat2 {
        Mat2::new(
            self.m11 + rhs.m11,
            self.m12 + rhs.m12,
            self.m21 + rhs.m21,
            self.m22 + rhs.m22,
        )
    }

    pub fn scale(&self, s: C64) -> Mat2 {
        Mat2::new(self.m11 * s, self.m12 * s, self.m21 * s, self.m22 * s)
    }

    /// Inverse; `None` when the determinant vanishes to working precision.
    pub fn inv(&self) -> Option<Mat2> {
        let d = self.det();
        let scale = self.m11.norm().max(self.m22.norm()).max(1.0);
        if d.norm() < 1e-14 * scale * scale {
            return None;
        }
        Some(Mat2::new(self.m22 / d, -self.m12 / d, -self.m21 / d, self.m11 / d))
    }

    /// Entrywise product.
    pub fn hadamard(&self, rhs: &Mat2) -> Mat2 {
        Mat2::new(
            self.m11 * rhs.m11,
            self.m12 * rhs.m12,
            self.m21 * rhs.m21,
            self.m22 * rhs.m22,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip() {
        let m = Mat2::new(
            C64::new(1.0, 2.0),
            C64::new(-0.5, 0.25),
            C64::new(0.0, -1.5),
            C64::new(2.0, 0.125),
        );
        let inv = m.inv().unwrap();
        let id = m.mul(&inv);
        assert!((id.m11 - ONE2).norm() < 1e-14);
        assert!(id.m12.norm() < 1e-14);
        assert!(id.m21.norm() < 1e-14);
        assert!((id.m22 - ONE2).norm() < 1e-14);
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        let m = Mat2::new(ONE2, ONE2, ONE2, ONE2);
        assert!(m.inv().is_none());
    }
}
