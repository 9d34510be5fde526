//! SE(2), its Lie algebra and dual, and the oscillator central extension.
//!
//! Conventions: `g = (R_theta, x0)` acts on the plane by `x -> R_theta x + x0`;
//! algebra elements are `(Omega, V)`; momenta are `(Pi, P)`. `J` is the
//! symplectic matrix `[[0, 1], [-1, 0]]`, so `b3 x v = -J v`.

mod magnetic;
mod poisson;

pub use magnetic::*;
pub use poisson::*;

use std::ops::{Add, Mul, Sub};

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

/// The symplectic matrix `J`.
pub const SYMPLECTIC: Matrix2<f64> = Matrix2::new(0.0, 1.0, -1.0, 0.0);

pub fn rotation(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// `b3 x v`, the counterclockwise quarter turn.
pub fn perp(v: &Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-v.y, v.x)
}

/// Which normalization to use where the printed factors disagree with the
/// structure they are meant to satisfy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Normalization {
    /// Constants exactly as printed.
    Paper,
    /// Constants solved from the defining identities.
    #[default]
    Verified,
}

impl std::str::FromStr for Normalization {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "paper" => Ok(Normalization::Paper),
            "verified" => Ok(Normalization::Verified),
            other => Err(format!("unknown normalization `{other}` (paper|verified)")),
        }
    }
}

impl std::fmt::Display for Normalization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Normalization::Paper => "paper",
            Normalization::Verified => "verified",
        })
    }
}

/// Element of SE(2). The angle is kept unwrapped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Se2Element {
    pub theta: f64,
    pub translation: Vector2<f64>,
}

impl Default for Se2Element {
    fn default() -> Self {
        Self::identity()
    }
}

impl Se2Element {
    pub fn new(theta: f64, x: f64, y: f64) -> Self {
        Se2Element {
            theta,
            translation: Vector2::new(x, y),
        }
    }

    pub fn identity() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn rotation(&self) -> Matrix2<f64> {
        rotation(self.theta)
    }

    pub fn compose(&self, other: &Se2Element) -> Se2Element {
        Se2Element {
            theta: self.theta + other.theta,
            translation: self.translation + self.rotation() * other.translation,
        }
    }

    pub fn inverse(&self) -> Se2Element {
        let rt = rotation(-self.theta);
        Se2Element {
            theta: -self.theta,
            translation: -(rt * self.translation),
        }
    }

    /// Homogeneous 3x3 matrix `[[R, x0], [0, 1]]`.
    pub fn to_matrix(&self) -> Matrix3<f64> {
        let r = self.rotation();
        let t = self.translation;
        Matrix3::new(
            r[(0, 0)],
            r[(0, 1)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            t.y,
            0.0,
            0.0,
            1.0,
        )
    }

    /// `exp(t zeta)` in closed form.
    pub fn exp(zeta: &Se2Vector, t: f64) -> Se2Element {
        Se2Element {
            theta: zeta.omega * t,
            translation: integrated_rotation(zeta.omega, t) * zeta.v,
        }
    }

    /// Applies the group element to a plane point.
    pub fn act(&self, x: &Vector2<f64>) -> Vector2<f64> {
        self.rotation() * x + self.translation
    }
}

/// `int_0^t R(rate s) ds`, with a series near `rate * t = 0`.
pub fn integrated_rotation(rate: f64, t: f64) -> Matrix2<f64> {
    let a = rate * t;
    let (sin_part, cos_part) = if a.abs() < 1e-3 {
        let a2 = a * a;
        (
            t * (1.0 - a2 / 6.0 * (1.0 - a2 / 20.0 * (1.0 - a2 / 42.0))),
            t * a / 2.0 * (1.0 - a2 / 12.0 * (1.0 - a2 / 30.0)),
        )
    } else {
        let half = 0.5 * a;
        ((a.sin()) / rate, 2.0 * half.sin() * half.sin() / rate)
    };
    Matrix2::new(sin_part, -cos_part, cos_part, sin_part)
}

/// Element `(Omega, V)` of se(2).
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Se2Vector {
    pub omega: f64,
    pub v: Vector2<f64>,
}

impl Se2Vector {
    pub fn new(omega: f64, vx: f64, vy: f64) -> Self {
        Se2Vector {
            omega,
            v: Vector2::new(vx, vy),
        }
    }

    pub fn from_vector(z: &Vector3<f64>) -> Self {
        Self::new(z.x, z.y, z.z)
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.omega, self.v.x, self.v.y)
    }

    pub const E_OMEGA: Se2Vector = Se2Vector {
        omega: 1.0,
        v: Vector2::new(0.0, 0.0),
    };
    pub const E_X: Se2Vector = Se2Vector {
        omega: 0.0,
        v: Vector2::new(1.0, 0.0),
    };
    pub const E_Y: Se2Vector = Se2Vector {
        omega: 0.0,
        v: Vector2::new(0.0, 1.0),
    };
}

impl Add for Se2Vector {
    type Output = Se2Vector;
    fn add(self, o: Se2Vector) -> Se2Vector {
        Se2Vector {
            omega: self.omega + o.omega,
            v: self.v + o.v,
        }
    }
}

impl Sub for Se2Vector {
    type Output = Se2Vector;
    fn sub(self, o: Se2Vector) -> Se2Vector {
        Se2Vector {
            omega: self.omega - o.omega,
            v: self.v - o.v,
        }
    }
}

impl Mul<f64> for Se2Vector {
    type Output = Se2Vector;
    fn mul(self, s: f64) -> Se2Vector {
        Se2Vector {
            omega: self.omega * s,
            v: self.v * s,
        }
    }
}

/// Momentum `(Pi, P)` in se(2)*.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Se2Momentum {
    pub angular: f64,
    pub linear: Vector2<f64>,
}

impl Se2Momentum {
    pub fn new(angular: f64, px: f64, py: f64) -> Self {
        Se2Momentum {
            angular,
            linear: Vector2::new(px, py),
        }
    }

    pub fn from_vector(z: &Vector3<f64>) -> Self {
        Self::new(z.x, z.y, z.z)
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.angular, self.linear.x, self.linear.y)
    }

    /// Duality pairing with an algebra element.
    pub fn pair(&self, zeta: &Se2Vector) -> f64 {
        self.angular * zeta.omega + self.linear.dot(&zeta.v)
    }
}

impl Add for Se2Momentum {
    type Output = Se2Momentum;
    fn add(self, o: Se2Momentum) -> Se2Momentum {
        Se2Momentum {
            angular: self.angular + o.angular,
            linear: self.linear + o.linear,
        }
    }
}

impl Sub for Se2Momentum {
    type Output = Se2Momentum;
    fn sub(self, o: Se2Momentum) -> Se2Momentum {
        Se2Momentum {
            angular: self.angular - o.angular,
            linear: self.linear - o.linear,
        }
    }
}

impl Mul<f64> for Se2Momentum {
    type Output = Se2Momentum;
    fn mul(self, s: f64) -> Se2Momentum {
        Se2Momentum {
            angular: self.angular * s,
            linear: self.linear * s,
        }
    }
}

/// `(pi, p)` in osc*. On the physical leaf `p` equals the circulation.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct OscMomentum {
    pub momentum: Se2Momentum,
    pub central: f64,
}

impl OscMomentum {
    pub fn new(momentum: Se2Momentum, central: f64) -> Self {
        OscMomentum { momentum, central }
    }
}

/// `Ad_{g^-1} zeta = (Omega, R^T (V + Omega b3 x x0))`.
pub fn ad_action(g: &Se2Element, zeta: &Se2Vector) -> Se2Vector {
    let rt = g.rotation().transpose();
    Se2Vector {
        omega: zeta.omega,
        v: rt * (zeta.v + perp(&g.translation) * zeta.omega),
    }
}

/// `Ad*_{g^-1} pi`, the dual of [`ad_action`] under the pairing.
pub fn coad_action(g: &Se2Element, pi: &Se2Momentum) -> Se2Momentum {
    let rp = g.rotation() * pi.linear;
    Se2Momentum {
        angular: pi.angular + rp.dot(&perp(&g.translation)),
        linear: rp,
    }
}

/// `[zeta1, zeta2] = (0, -Omega1 J V2 + Omega2 J V1)`.
pub fn lie_bracket_se2(a: &Se2Vector, b: &Se2Vector) -> Se2Vector {
    Se2Vector {
        omega: 0.0,
        v: SYMPLECTIC * (b.v * a.omega - a.v * b.omega) * -1.0,
    }
}

/// `B(g, h) = x0 . J R_theta y0`.
pub fn group_cocycle(g: &Se2Element, h: &Se2Element) -> f64 {
    g.translation
        .dot(&(SYMPLECTIC * g.rotation() * h.translation))
}

/// `C(zeta1, zeta2) = k V1 . J V2`, with `k` from [`coefficients`].
pub fn algebra_cocycle(a: &Se2Vector, b: &Se2Vector, mode: Normalization) -> f64 {
    coefficients(mode).cocycle * a.v.dot(&(SYMPLECTIC * b.v))
}

/// Element of the oscillator group.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OscElement {
    pub base: Se2Element,
    pub central: f64,
}

impl OscElement {
    pub fn new(base: Se2Element, central: f64) -> Self {
        OscElement { base, central }
    }

    /// `(g, a)(h, b) = (gh, a + b + s B(g, h))`, where `s` is the cocycle
    /// scale relative to the printed one (so that the induced algebra cocycle
    /// matches [`algebra_cocycle`] in the same mode).
    pub fn compose(&self, other: &OscElement, mode: Normalization) -> OscElement {
        let s = coefficients(mode).cocycle / coefficients(Normalization::Paper).cocycle;
        OscElement {
            base: self.base.compose(&other.base),
            central: self.central + other.central + s * group_cocycle(&self.base, &other.base),
        }
    }

    pub fn inverse(&self, mode: Normalization) -> OscElement {
        let s = coefficients(mode).cocycle / coefficients(Normalization::Paper).cocycle;
        let inv = self.base.inverse();
        OscElement {
            base: inv,
            central: -self.central - s * group_cocycle(&self.base, &inv),
        }
    }
}
