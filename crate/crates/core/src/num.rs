//! Scalar abstraction and 2D point type.
//!
//! All geometric and numeric code in this crate is generic over [`Real`],
//! so the same pipeline runs in f32 or f64. Concrete aliases live at the
//! crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

/// Floating-point scalar: f32 or f64.
pub trait Real:
    num_traits::Float + num_traits::FromPrimitive + num_traits::NumAssign + Debug + Display + Sum + Send + Sync + 'static
{
    /// Lossy conversion from f64, for constants and configuration values.
    fn c(v: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(v).expect("finite constant")
    }

    fn from_usize_c(v: usize) -> Self {
        <Self as num_traits::FromPrimitive>::from_usize(v).expect("usize fits scalar")
    }

    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("scalar fits f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// 2D point / vector in canvas coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2<F> {
    pub x: F,
    pub y: F,
}

impl<F: Real> Point2<F> {
    pub fn new(x: F, y: F) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(F::zero(), F::zero())
    }

    pub fn dot(self, other: Self) -> F {
        self.x * other.x + self.y * other.y
    }

    /// 2D cross product (z component).
    pub fn cross(self, other: Self) -> F {
        self.x * other.y - self.y * other.x
    }

    /// Rotation by 90 degrees counter-clockwise: (x, y) -> (-y, x).
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn norm(self) -> F {
        self.dot(self).sqrt()
    }

    pub fn dist(self, other: Self) -> F {
        (self - other).norm()
    }

    /// Unit vector in the same direction, or None for a (near-)zero vector.
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n > F::zero() && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    pub fn lerp(self, other: Self, t: F) -> Self {
        self + (other - self) * t
    }

    pub fn to_f64(self) -> Point2<f64> {
        Point2::new(self.x.as_f64(), self.y.as_f64())
    }
}

impl<F: Real> Add for Point2<F> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<F: Real> Sub for Point2<F> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<F: Real> Mul<F> for Point2<F> {
    type Output = Self;
    fn mul(self, rhs: F) -> Self {
        Self::new(self.x * rhs, self.y * rhs)
    }
}

impl<F: Real> Div<F> for Point2<F> {
    type Output = Self;
    fn div(self, rhs: F) -> Self {
        Self::new(self.x / rhs, self.y / rhs)
    }
}

impl<F: Real> Neg for Point2<F> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<F: Real> AddAssign for Point2<F> {
    fn add_assign(&mut self, rhs: Self) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl<F: Real> SubAssign for Point2<F> {
    fn sub_assign(&mut self, rhs: Self) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}
