use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use crate::real::{lit, Real};

/// Three-component vector in the local shading frame. The macro normal is +z,
/// so `z` is the cosine against the surface normal for unit vectors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3<R> {
    pub x: R,
    pub y: R,
    pub z: R,
}

impl<R: Real> Vec3<R> {
    pub const fn new(x: R, y: R, z: R) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(R::zero(), R::zero(), R::zero())
    }

    pub fn unit_z() -> Self {
        Self::new(R::zero(), R::zero(), R::one())
    }

    /// Direction from spherical coordinates around +z.
    pub fn from_spherical(cos_theta: R, phi: R) -> Self {
        let sin_theta = (R::one() - cos_theta * cos_theta).max(R::zero()).sqrt();
        let (s, c) = phi.sin_cos();
        Self::new(sin_theta * c, sin_theta * s, cos_theta)
    }

    pub fn dot(self, o: Self) -> R {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn length_squared(self) -> R {
        self.dot(self)
    }

    pub fn length(self) -> R {
        self.length_squared().sqrt()
    }

    /// Returns `None` for (near) zero-length input.
    pub fn try_normalize(self) -> Option<Self> {
        let len = self.length();
        if len > lit(1e-30) && len.is_finite() {
            Some(self / len)
        } else {
            None
        }
    }

    pub fn normalize(self) -> Self {
        self / self.length()
    }

    pub fn is_unit(self, tol: R) -> bool {
        (self.length() - R::one()).abs() <= tol
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Cosine against the macro normal.
    #[inline]
    pub fn cos_theta(self) -> R {
        self.z
    }

    /// Mirror image through the z = 0 plane.
    pub fn flip_z(self) -> Self {
        Self::new(self.x, self.y, -self.z)
    }

    /// Specular reflection of `self` about the unit normal `m`, keeping the
    /// outward-pointing convention: `reflect(w, m) = 2 (w.m) m - w`.
    pub fn reflect(self, m: Self) -> Self {
        m * (lit::<R>(2.0) * self.dot(m)) - self
    }

    pub fn max_abs_component(self) -> R {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn cast<S: Real>(self) -> Vec3<S> {
        Vec3::new(
            S::from(self.x).unwrap_or_else(S::nan),
            S::from(self.y).unwrap_or_else(S::nan),
            S::from(self.z).unwrap_or_else(S::nan),
        )
    }

    pub fn to_array(self) -> [R; 3] {
        [self.x, self.y, self.z]
    }
}

impl<R: Real> From<[R; 3]> for Vec3<R> {
    fn from(a: [R; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl<R: Real> Add for Vec3<R> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<R: Real> AddAssign for Vec3<R> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<R: Real> Sub for Vec3<R> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<R: Real> Neg for Vec3<R> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<R: Real> Mul<R> for Vec3<R> {
    type Output = Self;
    fn mul(self, s: R) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<R: Real> Div<R> for Vec3<R> {
    type Output = Self;
    fn div(self, s: R) -> Self {
        Self::new(self.x / s, self.y / s, self.z / s)
    }
}

/// Orthonormal basis with `n` as the third axis.
#[derive(Debug, Clone, Copy)]
pub struct Frame<R> {
    pub s: Vec3<R>,
    pub t: Vec3<R>,
    pub n: Vec3<R>,
}

impl<R: Real> Frame<R> {
    /// Branchless construction (Duff et al.), valid for any unit `n`.
    pub fn from_normal(n: Vec3<R>) -> Self {
        let sign = R::one().copysign(n.z);
        let a = -R::one() / (sign + n.z);
        let b = n.x * n.y * a;
        let s = Vec3::new(R::one() + sign * n.x * n.x * a, sign * b, -sign * n.x);
        let t = Vec3::new(b, sign + n.y * n.y * a, -n.y);
        Self { s, t, n }
    }

    pub fn to_world(&self, v: Vec3<R>) -> Vec3<R> {
        self.s * v.x + self.t * v.y + self.n * v.z
    }

    pub fn to_local(&self, v: Vec3<R>) -> Vec3<R> {
        Vec3::new(v.dot(self.s), v.dot(self.t), v.dot(self.n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_is_orthonormal() {
        for n in [
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, 0.0, -1.0),
            Vec3::new(0.3, -0.4, 0.2).normalize(),
            Vec3::new(1.0, 0.0, 0.0),
        ] {
            let f = Frame::<f64>::from_normal(n);
            assert!((f.s.dot(f.t)).abs() < 1e-12);
            assert!((f.s.dot(f.n)).abs() < 1e-12);
            assert!((f.t.dot(f.n)).abs() < 1e-12);
            assert!(f.s.is_unit(1e-12) && f.t.is_unit(1e-12));
            let v = Vec3::new(0.1, 0.7, -0.2);
            let back = f.to_world(f.to_local(v));
            assert!((back - v).length() < 1e-12);
        }
    }

    #[test]
    fn reflect_keeps_outward_convention() {
        let w = Vec3::<f64>::from_spherical(0.5, 0.3);
        let r = w.reflect(Vec3::unit_z());
        assert!((r.z - w.z).abs() < 1e-15);
        assert!((r.x + w.x).abs() < 1e-15);
    }
}
