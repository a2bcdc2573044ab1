//! Small fixed-size linear algebra for the in-plane field quantities.
//!
//! Everything the solver kernels touch per element is a 2-vector (fields,
//! polarizations) or a 2x2 tensor (reluctivities, Hessian blocks), so these
//! types are deliberately plain `Copy` structs.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

/// In-plane 2-vector.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Self = Self { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product of two in-plane vectors.
    pub fn cross(self, other: Self) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Rotate by -90 degrees: maps a P1 shape-function gradient to its
    /// scalar-to-vector curl, `Curl phi = (d_y phi, -d_x phi)`.
    pub fn rot_neg90(self) -> Self {
        Self::new(self.y, -self.x)
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl Add for Vec2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, o: Self) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Neg for Vec2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        self.scale(s)
    }
}

/// 2x2 tensor, row-major.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const ZERO: Self = Self { a: 0.0, b: 0.0, c: 0.0, d: 0.0 };
    pub const IDENTITY: Self = Self { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    pub fn diag(a: f64, d: f64) -> Self {
        Self::new(a, 0.0, 0.0, d)
    }

    pub fn isotropic(s: f64) -> Self {
        Self::diag(s, s)
    }

    /// Outer product `u v^T`.
    pub fn outer(u: Vec2, v: Vec2) -> Self {
        Self::new(u.x * v.x, u.x * v.y, u.y * v.x, u.y * v.y)
    }

    pub fn mul_vec(self, v: Vec2) -> Vec2 {
        Vec2::new(self.a * v.x + self.b * v.y, self.c * v.x + self.d * v.y)
    }

    pub fn det(self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(self) -> f64 {
        self.a + self.d
    }

    pub fn transpose(self) -> Self {
        Self::new(self.a, self.c, self.b, self.d)
    }

    pub fn inverse(self) -> Option<Self> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let inv = 1.0 / det;
        Some(Self::new(self.d * inv, -self.b * inv, -self.c * inv, self.a * inv))
    }

    pub fn is_symmetric(self, tol: f64) -> bool {
        (self.b - self.c).abs() <= tol * (1.0 + self.b.abs() + self.c.abs())
    }

    /// Eigenvalues of a symmetric tensor, ascending.
    pub fn sym_eigenvalues(self) -> (f64, f64) {
        let mean = 0.5 * self.trace();
        let det = self.det();
        let disc = (mean * mean - det).max(0.0).sqrt();
        (mean - disc, mean + disc)
    }

    /// Symmetric positive definiteness via the leading-minor test.
    pub fn is_spd(self, sym_tol: f64) -> bool {
        self.is_symmetric(sym_tol) && self.a > 0.0 && self.det() > 0.0
    }
}

impl Add for Mat2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }
}

impl AddAssign for Mat2 {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for Mat2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }
}

impl Mul<f64> for Mat2 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }
}

impl Mul<Mat2> for Mat2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip() {
        let m = Mat2::new(3.0, 1.0, 1.0, 2.0);
        let inv = m.inverse().unwrap();
        let id = m * inv;
        assert!((id.a - 1.0).abs() < 1e-15);
        assert!(id.b.abs() < 1e-15);
        assert!(id.c.abs() < 1e-15);
        assert!((id.d - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eigenvalues_of_symmetric() {
        let m = Mat2::new(2.0, 1.0, 1.0, 2.0);
        let (lo, hi) = m.sym_eigenvalues();
        assert!((lo - 1.0).abs() < 1e-14);
        assert!((hi - 3.0).abs() < 1e-14);
    }

    #[test]
    fn rot_neg90_is_curl_map() {
        // grad(x) = (1,0) -> Curl x = (0,-1); grad(y) = (0,1) -> Curl y = (1,0)
        assert_eq!(Vec2::new(1.0, 0.0).rot_neg90(), Vec2::new(0.0, -1.0));
        assert_eq!(Vec2::new(0.0, 1.0).rot_neg90(), Vec2::new(1.0, 0.0));
    }
}
