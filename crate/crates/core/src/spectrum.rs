use std::ops::{Add, AddAssign, Div, Mul, Sub};

use crate::real::Real;

/// RGB triple. Used for albedo, Fresnel reflectance and BSDF values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Spectrum<R> {
    pub r: R,
    pub g: R,
    pub b: R,
}

impl<R: Real> Spectrum<R> {
    pub const fn new(r: R, g: R, b: R) -> Self {
        Self { r, g, b }
    }

    pub fn splat(v: R) -> Self {
        Self::new(v, v, v)
    }

    pub fn zero() -> Self {
        Self::splat(R::zero())
    }

    pub fn one() -> Self {
        Self::splat(R::one())
    }

    pub fn to_array(self) -> [R; 3] {
        [self.r, self.g, self.b]
    }

    pub fn map(self, f: impl Fn(R) -> R) -> Self {
        Self::new(f(self.r), f(self.g), f(self.b))
    }

    pub fn zip(self, o: Self, f: impl Fn(R, R) -> R) -> Self {
        Self::new(f(self.r, o.r), f(self.g, o.g), f(self.b, o.b))
    }

    pub fn max_channel(self) -> R {
        self.r.max(self.g).max(self.b)
    }

    pub fn min_channel(self) -> R {
        self.r.min(self.g).min(self.b)
    }

    pub fn mean(self) -> R {
        (self.r + self.g + self.b) / R::from(3.0).unwrap()
    }

    pub fn is_finite(self) -> bool {
        self.r.is_finite() && self.g.is_finite() && self.b.is_finite()
    }

    pub fn is_non_negative(self) -> bool {
        self.r >= R::zero() && self.g >= R::zero() && self.b >= R::zero()
    }

    pub fn is_black(self) -> bool {
        self.r == R::zero() && self.g == R::zero() && self.b == R::zero()
    }

    /// All channels inside the closed unit interval.
    pub fn in_unit_range(self) -> bool {
        self.to_array().iter().all(|&c| c >= R::zero() && c <= R::one())
    }

    pub fn cast<S: Real>(self) -> Spectrum<S> {
        self.to_array().map(|c| S::from(c).unwrap_or_else(S::nan)).into()
    }
}

impl<R: Real> From<[R; 3]> for Spectrum<R> {
    fn from(a: [R; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl<R: Real> Add for Spectrum<R> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        self.zip(o, |a, b| a + b)
    }
}

impl<R: Real> AddAssign for Spectrum<R> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<R: Real> Sub for Spectrum<R> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self.zip(o, |a, b| a - b)
    }
}

impl<R: Real> Mul for Spectrum<R> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.zip(o, |a, b| a * b)
    }
}

impl<R: Real> Mul<R> for Spectrum<R> {
    type Output = Self;
    fn mul(self, s: R) -> Self {
        self.map(|c| c * s)
    }
}

impl<R: Real> Div<R> for Spectrum<R> {
    type Output = Self;
    fn div(self, s: R) -> Self {
        self.map(|c| c / s)
    }
}
