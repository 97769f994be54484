//! Velocity fields in chart parameters and trajectory integration.

pub(crate) mod integrate;

pub use integrate::{integrate_trajectory, solve, IntegratorParams, Method};

use libm::tanh;

use crate::error::{Error, Result};
use crate::linalg::{Mat2, Point2, Vec2};

/// Time-dependent 2D velocity field `ẋ = u(t, x)` in chart parameters.
///
/// Autonomous fields simply ignore `t`.
pub trait VelocityField: Sync {
    fn name(&self) -> &str;

    fn velocity(&self, t: f64, x: Point2) -> Vec2;

    /// Spatial Jacobian `∂u/∂x`. The default is a central difference.
    fn gradient(&self, t: f64, x: Point2) -> Mat2 {
        let hx = 1e-6 * x.x.abs().max(1.0);
        let hy = 1e-6 * x.y.abs().max(1.0);
        let dx = (self.velocity(t, x + Vec2::new(hx, 0.0))
            - self.velocity(t, x - Vec2::new(hx, 0.0)))
            * (0.5 / hx);
        let dy = (self.velocity(t, x + Vec2::new(0.0, hy))
            - self.velocity(t, x - Vec2::new(0.0, hy)))
            * (0.5 / hy);
        Mat2::from_cols(dx, dy)
    }

    /// Interval on which the field is defined.
    fn time_domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Declared divergence-free, used to select verification suites.
    fn is_incompressible(&self) -> bool {
        false
    }
}

/// Parameters of the Hamiltonian saddle `H = −L tanh(q₁x) tanh(q₂y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleParams {
    pub strength: f64,
    pub q1: f64,
    pub q2: f64,
}

impl SaddleParams {
    pub fn new(strength: f64, q1: f64, q2: f64) -> Result<Self> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !(ok(strength) && ok(q1) && ok(q2)) {
            return Err(Error::InvalidParameter(
                "saddle parameters L, q1, q2 must be positive",
            ));
        }
        Ok(SaddleParams { strength, q1, q2 })
    }
}

impl Default for SaddleParams {
    /// `L = 2`, `q₁ = 1`, `q₂ = 0.15`.
    fn default() -> Self {
        SaddleParams {
            strength: 2.0,
            q1: 1.0,
            q2: 0.15,
        }
    }
}

/// Velocity of the nonlinear saddle, `(∂_y H, −∂_x H)`.
pub fn saddle_velocity(params: &SaddleParams, x: Point2) -> Vec2 {
    let SaddleParams {
        strength: l,
        q1,
        q2,
    } = *params;
    let tx = tanh(q1 * x.x);
    let ty = tanh(q2 * x.y);
    Vec2::new(
        -l * q2 * (1.0 - ty * ty) * tx,
        l * q1 * ty * (1.0 - tx * tx),
    )
}

/// Linear saddle `(−λx, λy)` with flow map `(e^{−λT}x, e^{λT}y)`.
pub fn linear_saddle_velocity(lambda: f64, x: Point2) -> Vec2 {
    Vec2::new(-lambda * x.x, lambda * x.y)
}

/// Autonomous, incompressible nonlinear saddle. Globally defined.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NonlinearSaddle {
    pub params: SaddleParams,
}

impl NonlinearSaddle {
    pub fn new(params: SaddleParams) -> Self {
        NonlinearSaddle { params }
    }
}

impl VelocityField for NonlinearSaddle {
    fn name(&self) -> &str {
        "nonlinear_saddle"
    }

    fn velocity(&self, _t: f64, x: Point2) -> Vec2 {
        saddle_velocity(&self.params, x)
    }

    fn gradient(&self, _t: f64, x: Point2) -> Mat2 {
        let SaddleParams {
            strength: l,
            q1,
            q2,
        } = self.params;
        let tx = tanh(q1 * x.x);
        let ty = tanh(q2 * x.y);
        let sx = 1.0 - tx * tx;
        let sy = 1.0 - ty * ty;
        Mat2::new(
            -l * q1 * q2 * sx * sy,
            2.0 * l * q2 * q2 * tx * ty * sy,
            -2.0 * l * q1 * q1 * tx * ty * sx,
            l * q1 * q2 * sx * sy,
        )
    }

    fn is_incompressible(&self) -> bool {
        true
    }
}

/// Analytic oracle field with a closed-form linear flow map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSaddle {
    pub lambda: f64,
}

impl LinearSaddle {
    pub fn new(lambda: f64) -> Self {
        LinearSaddle { lambda }
    }

    /// Exact flow map over a duration `dt`.
    pub fn flow(&self, x: Point2, dt: f64) -> Point2 {
        let e = libm::exp(self.lambda * dt);
        Point2::new(x.x / e, x.y * e)
    }
}

impl VelocityField for LinearSaddle {
    fn name(&self) -> &str {
        "linear_saddle"
    }

    fn velocity(&self, _t: f64, x: Point2) -> Vec2 {
        linear_saddle_velocity(self.lambda, x)
    }

    fn gradient(&self, _t: f64, _x: Point2) -> Mat2 {
        Mat2::diag(-self.lambda, self.lambda)
    }

    fn is_incompressible(&self) -> bool {
        true
    }
}

/// Rigid rotation of the sphere about its polar axis, in geographic
/// parameters: `(φ̇, θ̇) = (ω, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereRotation {
    pub omega: f64,
}

impl SphereRotation {
    pub fn new(omega: f64) -> Self {
        SphereRotation { omega }
    }
}

impl VelocityField for SphereRotation {
    fn name(&self) -> &str {
        "sphere_rotation"
    }

    fn velocity(&self, _t: f64, _x: Point2) -> Vec2 {
        Vec2::new(self.omega, 0.0)
    }

    fn gradient(&self, _t: f64, _x: Point2) -> Mat2 {
        Mat2::diag(0.0, 0.0)
    }

    /// Area preserving on the sphere; parameter-space divergence is also zero.
    fn is_incompressible(&self) -> bool {
        true
    }
}
