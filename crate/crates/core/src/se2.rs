//! Planar rigid motions: SO(2) and SE(2) elements, their Lie algebra, and the
//! closed-form exponential.
//!
//! Rotations are stored as an angle wrapped to `(-π, π]`; the 2×2 matrix is
//! built on demand, so orthogonality holds by construction. Poses embed as the
//! usual 3×3 homogeneous matrices `[[R, p], [0, 1]]`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix2, Matrix3, Vector2};

use crate::error::{Error, Result};

/// Below this |θ| the exponential switches to a Taylor expansion of `V(θ)`.
pub const SMALL_ANGLE: f64 = 1e-6;

/// Tolerance on `m + mᵀ` accepted by [`vee`].
pub const ANTISYMMETRY_TOL: f64 = 1e-9;

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let a = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if a <= -PI {
        a + 2.0 * PI
    } else {
        a
    }
}

/// `ω ↦ [[0, -ω], [ω, 0]]`.
pub fn hat(omega: f64) -> Matrix2<f64> {
    Matrix2::new(0.0, -omega, omega, 0.0)
}

/// Inverse of [`hat`]. Rejects matrices that are not antisymmetric.
pub fn vee(m: &Matrix2<f64>) -> Result<f64> {
    let asymmetry = (m + m.transpose()).amax();
    if !(asymmetry <= ANTISYMMETRY_TOL) {
        return Err(Error::NotAntisymmetric { asymmetry });
    }
    Ok(0.5 * (m[(1, 0)] - m[(0, 1)]))
}

/// `J = hat(1)`, the quarter-turn.
pub fn quarter_turn(v: &Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-v.y, v.x)
}

/// Element of SO(2).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rotation {
    angle: f64,
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation { angle: 0.0 }
    }

    pub fn from_angle(theta: f64) -> Self {
        Rotation {
            angle: wrap_angle(theta),
        }
    }

    /// Recovers the angle of a rotation matrix with `atan2(m₂₁, m₁₁)`.
    pub fn from_matrix(m: &Matrix2<f64>) -> Self {
        Rotation {
            angle: wrap_angle(m[(1, 0)].atan2(m[(0, 0)])),
        }
    }

    /// Rotation whose first column is the direction of `v`.
    pub fn from_direction(v: &Vector2<f64>) -> Self {
        Rotation::from_angle(v.y.atan2(v.x))
    }

    /// Angle in `(-π, π]`.
    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn cos(&self) -> f64 {
        self.angle.cos()
    }

    pub fn sin(&self) -> f64 {
        self.angle.sin()
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        let (s, c) = self.angle.sin_cos();
        Matrix2::new(c, -s, s, c)
    }

    pub fn inverse(&self) -> Self {
        Rotation::from_angle(-self.angle)
    }

    pub fn rotate(&self, v: &Vector2<f64>) -> Vector2<f64> {
        let (s, c) = self.angle.sin_cos();
        Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y)
    }

    /// `Rᵀ v`.
    pub fn unrotate(&self, v: &Vector2<f64>) -> Vector2<f64> {
        let (s, c) = self.angle.sin_cos();
        Vector2::new(c * v.x + s * v.y, -s * v.x + c * v.y)
    }

    /// First column, `R e₁`.
    pub fn x_axis(&self) -> Vector2<f64> {
        let (s, c) = self.angle.sin_cos();
        Vector2::new(c, s)
    }

    /// Second column, `R e₂`.
    pub fn y_axis(&self) -> Vector2<f64> {
        let (s, c) = self.angle.sin_cos();
        Vector2::new(-s, c)
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation::from_angle(self.angle + rhs.angle)
    }
}

/// Body-frame velocity `(ω, vₓ, v_y)` in se(2).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Twist {
    pub omega: f64,
    pub vx: f64,
    pub vy: f64,
}

impl Twist {
    pub fn new(omega: f64, vx: f64, vy: f64) -> Self {
        Twist { omega, vx, vy }
    }

    /// Unicycle twist: forward speed `v`, turn rate `omega`, no side slip.
    pub fn unicycle(v: f64, omega: f64) -> Self {
        Twist {
            omega,
            vx: v,
            vy: 0.0,
        }
    }

    pub fn linear(&self) -> Vector2<f64> {
        Vector2::new(self.vx, self.vy)
    }

    /// The 3×3 matrix `[[ω̂, ν], [0, 0]]`.
    pub fn hat(&self) -> Matrix3<f64> {
        Matrix3::new(
            0.0,
            -self.omega,
            self.vx, //
            self.omega,
            0.0,
            self.vy, //
            0.0,
            0.0,
            0.0,
        )
    }

    /// Inverse of [`Twist::hat`]; reads the antisymmetric block and the last column.
    pub fn vee(m: &Matrix3<f64>) -> Result<Twist> {
        let block = m.fixed_view::<2, 2>(0, 0).into_owned();
        Ok(Twist {
            omega: vee(&block)?,
            vx: m[(0, 2)],
            vy: m[(1, 2)],
        })
    }
}

/// Element of SE(2).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub rotation: Rotation,
    pub position: Vector2<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Pose::default()
    }

    /// Pose from heading `theta` and position `(x, y)`.
    pub fn new(theta: f64, x: f64, y: f64) -> Self {
        Pose {
            rotation: Rotation::from_angle(theta),
            position: Vector2::new(x, y),
        }
    }

    pub fn from_parts(rotation: Rotation, position: Vector2<f64>) -> Self {
        Pose { rotation, position }
    }

    pub fn theta(&self) -> f64 {
        self.rotation.angle()
    }

    pub fn x(&self) -> f64 {
        self.position.x
    }

    pub fn y(&self) -> f64 {
        self.position.y
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        let r = self.rotation.matrix();
        Matrix3::new(
            r[(0, 0)],
            r[(0, 1)],
            self.position.x, //
            r[(1, 0)],
            r[(1, 1)],
            self.position.y, //
            0.0,
            0.0,
            1.0,
        )
    }

    /// Group product `self · other`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            position: self.position + self.rotation.rotate(&other.position),
        }
    }

    /// `(R, p) ↦ (Rᵀ, -Rᵀp)`.
    pub fn inverse(&self) -> Pose {
        Pose {
            rotation: self.rotation.inverse(),
            position: -self.rotation.unrotate(&self.position),
        }
    }

    /// Configuration of `other` seen from `self`: `self⁻¹ · other`.
    ///
    /// The position part is `Rₐᵀ(p_b - p_a)` and the angle is `θ_b - θ_a`.
    pub fn relative(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation.inverse() * other.rotation,
            position: self.rotation.unrotate(&(other.position - self.position)),
        }
    }

    /// Adjoint action `Ad_g ξ = (g ξ̂ g⁻¹)^∨`.
    pub fn adjoint(&self, xi: &Twist) -> Twist {
        let v = self.rotation.rotate(&xi.linear()) - xi.omega * quarter_turn(&self.position);
        Twist {
            omega: xi.omega,
            vx: v.x,
            vy: v.y,
        }
    }
}

impl Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

impl fmt::Display for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(θ: {:.6}, x: {:.6}, y: {:.6})",
            self.theta(),
            self.position.x,
            self.position.y
        )
    }
}

pub fn compose(a: &Pose, b: &Pose) -> Pose {
    a.compose(b)
}

pub fn inverse(a: &Pose) -> Pose {
    a.inverse()
}

pub fn relative(a: &Pose, b: &Pose) -> Pose {
    a.relative(b)
}

pub fn adjoint_twist(g: &Pose, xi: &Twist) -> Twist {
    g.adjoint(xi)
}

/// `exp(h ξ̂)` in closed form.
///
/// Exact motion under a twist held constant for `h` seconds. The translation is
/// `V(θ) ν h` with `θ = ω h` and
/// `V(θ) = (1/θ) [[sin θ, -(1 - cos θ)], [1 - cos θ, sin θ]]`.
pub fn exp_twist(xi: &Twist, h: f64) -> Pose {
    let theta = xi.omega * h;
    let (a, b) = if theta.abs() < SMALL_ANGLE {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0, theta * (0.5 - t2 / 24.0))
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta)
    };
    let nu = xi.linear() * h;
    Pose {
        rotation: Rotation::from_angle(theta),
        position: Vector2::new(a * nu.x - b * nu.y, b * nu.x + a * nu.y),
    }
}
