//! Minimal 3x3 matrix arithmetic for the constitutive layer.

use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat3<S>(pub [[S; 3]; 3]);

impl<S: Real> Mat3<S> {
    pub fn zero() -> Self {
        Mat3([[S::zero(); 3]; 3])
    }

    pub fn identity() -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            m.0[i][i] = S::one();
        }
        m
    }

    pub fn diag(a: S, b: S, c: S) -> Self {
        let mut m = Self::zero();
        m.0[0][0] = a;
        m.0[1][1] = b;
        m.0[2][2] = c;
        m
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = self.0[j][i];
            }
        }
        m
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let mut m = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = S::zero();
                for k in 0..3 {
                    s = s + self.0[i][k] * rhs.0[k][j];
                }
                m.0[i][j] = s;
            }
        }
        m
    }

    pub fn scale(&self, s: S) -> Self {
        let mut m = *self;
        for row in m.0.iter_mut() {
            for v in row.iter_mut() {
                *v = *v * s;
            }
        }
        m
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let mut m = *self;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = m.0[i][j] + rhs.0[i][j];
            }
        }
        m
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        let mut m = *self;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = m.0[i][j] - rhs.0[i][j];
            }
        }
        m
    }

    pub fn trace(&self) -> S {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn det(&self) -> S {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse via the adjugate; returns None when the determinant is zero
    /// (or not finite).
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == S::zero() || !d.is_finite() {
            return None;
        }
        let m = &self.0;
        let inv_d = S::one() / d;
        let mut out = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                // cofactor expansion, transposed
                let a = m[(j + 1) % 3][(i + 1) % 3] * m[(j + 2) % 3][(i + 2) % 3]
                    - m[(j + 1) % 3][(i + 2) % 3] * m[(j + 2) % 3][(i + 1) % 3];
                out.0[i][j] = a * inv_d;
            }
        }
        Some(out)
    }

    pub fn is_symmetric(&self, tol: S) -> bool {
        for i in 0..3 {
            for j in (i + 1)..3 {
                if (self.0[i][j] - self.0[j][i]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Symmetrize: (M + M^T)/2.
    pub fn sym_part(&self) -> Self {
        self.add(&self.transpose()).scale(S::of(0.5))
    }

    pub fn frobenius_norm(&self) -> S {
        let mut s = S::zero();
        for row in self.0.iter() {
            for v in row.iter() {
                s = s + *v * *v;
            }
        }
        s.sqrt()
    }

    /// Largest eigenvalue of a symmetric matrix, by the closed-form
    /// trigonometric solution of the characteristic cubic.
    pub fn sym_eig_max(&self) -> S {
        let one = S::one();
        let two = S::of(2.0);
        let three = S::of(3.0);
        let q = self.trace() / three;
        let b = self.sub(&Mat3::identity().scale(q));
        let p2 = b.frobenius_norm().powi(2) / S::of(6.0);
        if p2 <= S::epsilon() * (one + q * q) {
            return q;
        }
        let p = p2.sqrt();
        let det_b = b.scale(one / p).det();
        // clamp into acos domain
        let r = (det_b / two).max(-one).min(one);
        let phi = r.acos() / three;
        q + two * p * phi.cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m3(a: [[f64; 3]; 3]) -> Mat3<f64> {
        Mat3(a)
    }
    type M = Mat3<f64>;

    #[test]
    fn inverse_roundtrip() {
        let m = m3([[2.0, 1.0, 0.0], [0.5, 3.0, 1.0], [0.0, -1.0, 2.0]]);
        let inv = m.inverse().unwrap();
        let id = m.mul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((id.0[i][j] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn singular_has_no_inverse() {
        let m = m3([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 1.0, 1.0]]);
        assert!(m.inverse().is_none());
    }

    #[test]
    fn eig_max_of_diagonal() {
        let m = M::diag(1.0, 5.0, 2.0);
        assert!((m.sym_eig_max() - 5.0).abs() < 1e-12);
        assert!((M::identity().sym_eig_max() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eig_max_of_rotated_matrix() {
        // R diag(4,1,1) R^T for a rotation R about z by 0.3 rad
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let r = m3([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]);
        let m = r.mul(&M::diag(4.0, 1.0, 1.0)).mul(&r.transpose());
        assert!((m.sym_eig_max() - 4.0).abs() < 1e-10);
    }
}
