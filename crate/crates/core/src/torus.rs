//! Points, tangent directions and 2x2 derivative matrices on the flat torus
//! `T² = R²/Z²`.
//!
//! All metric quantities use the flat Euclidean metric of the unit square
//! chart and the natural logarithm.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Reduces `v` into `[0, 1)`.
///
/// `v - floor(v)` can round up to exactly `1.0` for tiny negative inputs, so
/// that case is folded back to `0.0`.
#[inline]
pub fn wrap_unit(v: f64) -> f64 {
    let r = v - v.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Reduces an angle into `[0, π)`.
#[inline]
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(PI);
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// Signed representative of `a - b` modulo π, in `(-π/2, π/2]`.
#[inline]
pub fn projective_difference(a: f64, b: f64) -> f64 {
    let mut d = (a - b).rem_euclid(PI);
    if d > PI / 2.0 {
        d -= PI;
    }
    d
}

/// Angle between the lines with directions `a` and `b`, in `[0, π/2]`.
#[inline]
pub fn projective_distance(a: f64, b: f64) -> f64 {
    projective_difference(a, b).abs()
}

/// Signed shortest displacement between two circle coordinates, in `[-½, ½)`.
#[inline]
pub fn circle_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    if d >= 0.5 {
        d - 1.0
    } else {
        d
    }
}

/// A point of the torus with both coordinates in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    x: f64,
    y: f64,
}

impl TorusPoint {
    /// Builds a point, reducing both coordinates modulo 1.
    pub fn new(x: f64, y: f64) -> Self {
        Self {
            x: wrap_unit(x),
            y: wrap_unit(y),
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    /// Wrap-aware Euclidean distance on the torus.
    pub fn distance(&self, other: &TorusPoint) -> f64 {
        circle_difference(self.x, other.x).hypot(circle_difference(self.y, other.y))
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }
}

impl fmt::Display for TorusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// A unit tangent vector `v(θ) = (cos θ, sin θ)` at a base point.
///
/// The angle is kept in `[0, π)`: every quantity computed from a unit
/// tangent here is a norm `‖M v‖`, which does not see the sign of `v`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitTangent {
    pub base: TorusPoint,
    theta: f64,
}

impl UnitTangent {
    pub fn new(base: TorusPoint, theta: f64) -> Self {
        Self {
            base,
            theta: wrap_angle(theta),
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn vector(&self) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (c, s)
    }
}

/// A 2x2 real matrix `[[a, b], [c, d]]` acting on column vectors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jacobian2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Jacobian2 {
    pub const IDENTITY: Jacobian2 = Jacobian2::new(1.0, 0.0, 0.0, 1.0);

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    /// Matrix product `self · rhs`.
    #[inline]
    pub fn mul(&self, rhs: &Jacobian2) -> Jacobian2 {
        Jacobian2 {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }

    #[inline]
    pub fn apply(&self, v: (f64, f64)) -> (f64, f64) {
        (self.a * v.0 + self.b * v.1, self.c * v.0 + self.d * v.1)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    /// Inverse of a matrix with determinant one.
    pub fn unimodular_inverse(&self) -> Jacobian2 {
        Jacobian2::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn transpose(&self) -> Jacobian2 {
        Jacobian2::new(self.a, self.c, self.b, self.d)
    }

    pub fn scale(&self, k: f64) -> Jacobian2 {
        Jacobian2::new(self.a * k, self.b * k, self.c * k, self.d * k)
    }

    pub fn max_abs(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    /// Singular values `(σ₁, σ₂)` with `σ₁ ≥ σ₂ ≥ 0`.
    pub fn singular_values(&self) -> (f64, f64) {
        let p = (self.a + self.d).hypot(self.b - self.c);
        let q = (self.a - self.d).hypot(self.b + self.c);
        let s1 = 0.5 * (p + q);
        let s2 = 0.5 * (p - q).abs();
        (s1, s2)
    }

    /// Operator norm `σ₁`.
    pub fn operator_norm(&self) -> f64 {
        self.singular_values().0
    }

    /// Angle in `[0, π)` of the right-singular direction of `σ₁`, the
    /// direction `M` stretches most.
    pub fn most_expanded_direction(&self) -> f64 {
        let s11 = self.a * self.a + self.c * self.c;
        let s22 = self.b * self.b + self.d * self.d;
        let s12 = self.a * self.b + self.c * self.d;
        wrap_angle(0.5 * (2.0 * s12).atan2(s11 - s22))
    }

    /// Angle in `[0, π)` of the right-singular direction of `σ₂`.
    pub fn most_contracted_direction(&self) -> f64 {
        wrap_angle(self.most_expanded_direction() + PI / 2.0)
    }

    /// `log ‖M v(θ)‖` for the unit vector at angle θ, given `(cos θ, sin θ)`.
    ///
    /// `M` is taken to be unimodular. Once `‖M‖² ≳ 1/ε` the product `M v`
    /// near the contracted direction cancels catastrophically (down to an
    /// exact zero); the result is then clamped to `log σ₂ = −log σ₁`, which
    /// no unit vector can undercut.
    #[inline]
    pub fn log_norm_along(&self, cos_t: f64, sin_t: f64) -> f64 {
        let vx = self.a * cos_t + self.b * sin_t;
        let vy = self.c * cos_t + self.d * sin_t;
        // dividing by ‖v‖² keeps isometries at exactly zero
        let r2 = (vx * vx + vy * vy) / (cos_t * cos_t + sin_t * sin_t);
        // exact arithmetic gives r2·‖M‖_F² = σ₂²(σ₁² + σ₂²) ≥ 1
        let fro2 = self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d;
        if r2 * fro2 < 1.0 {
            return -self.operator_norm().ln();
        }
        0.5 * r2.ln()
    }
}

/// Value and first two derivatives of the bump function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    pub value: f64,
    pub derivative: f64,
    pub second_derivative: f64,
}

/// The smooth circle function `φ(t) = sin²(πt)`.
///
/// φ vanishes at 0, peaks at ½ with value 1, increases on `(0, ½)` and
/// decreases on `(½, 1)`.
pub fn bump_phi(t: f64) -> Bump {
    let t = wrap_unit(t);
    let s = (PI * t).sin();
    let (s2, c2) = (2.0 * PI * t).sin_cos();
    Bump {
        value: s * s,
        derivative: PI * s2,
        second_derivative: 2.0 * PI * PI * c2,
    }
}

/// Angle in `[0, π)` of the line spanned by `(vx, vy)`.
#[inline]
pub fn line_angle(vx: f64, vy: f64) -> f64 {
    wrap_angle(vy.atan2(vx))
}
