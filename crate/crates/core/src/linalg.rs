//! Fixed-size 2D vectors and matrices.

use core::ops::{Add, AddAssign, Mul, Neg, Sub};

use libm::{atan2, cos, hypot, sin, sqrt};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

/// Points and tangent vectors share a representation; the alias keeps
/// signatures readable.
pub type Point2 = Vec2;

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        hypot(self.x, self.y)
    }

    /// Unit vector, or `None` for the zero vector and non-finite input.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Some(Vec2::new(self.x / n, self.y / n))
        } else {
            None
        }
    }

    /// Rotation by -90 degrees.
    pub fn perp_cw(self) -> Vec2 {
        Vec2::new(self.y, -self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

/// Row-major 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub m: [[f64; 2]; 2],
}

impl Default for Mat2 {
    fn default() -> Self {
        Mat2::IDENTITY
    }
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        m: [[1.0, 0.0], [0.0, 1.0]],
    };

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Mat2 {
            m: [[a11, a12], [a21, a22]],
        }
    }

    pub const fn diag(a: f64, b: f64) -> Self {
        Mat2::new(a, 0.0, 0.0, b)
    }

    /// Matrix with the given vectors as columns.
    pub fn from_cols(c1: Vec2, c2: Vec2) -> Self {
        Mat2::new(c1.x, c2.x, c1.y, c2.y)
    }

    pub fn col(&self, j: usize) -> Vec2 {
        Vec2::new(self.m[0][j], self.m[1][j])
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let inv = Mat2::new(
            self.m[1][1] / d,
            -self.m[0][1] / d,
            -self.m[1][0] / d,
            self.m[0][0] / d,
        );
        inv.is_finite().then_some(inv)
    }

    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        Vec2::new(
            self.m[0][0] * v.x + self.m[0][1] * v.y,
            self.m[1][0] * v.x + self.m[1][1] * v.y,
        )
    }

    pub fn frobenius(&self) -> f64 {
        let [[a, b], [c, d]] = self.m;
        sqrt(a * a + b * b + c * c + d * d)
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        let [[a, b], [c, d]] = self.m;
        Mat2::new(a * s, b * s, c * s, d * s)
    }

    /// `selfᵀ · self`, returned as a symmetric matrix.
    pub fn gram(&self) -> Sym2 {
        let [[a, b], [c, d]] = self.m;
        Sym2::new(a * a + c * c, a * b + c * d, b * b + d * d)
    }

    /// `self · selfᵀ`.
    pub fn outer_gram(&self) -> Sym2 {
        let [[a, b], [c, d]] = self.m;
        Sym2::new(a * a + b * b, a * c + b * d, c * c + d * d)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let a = &self.m;
        let b = &o.m;
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        let a = &self.m;
        let b = &o.m;
        Mat2::new(
            a[0][0] - b[0][0],
            a[0][1] - b[0][1],
            a[1][0] - b[1][0],
            a[1][1] - b[1][1],
        )
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let a = &self.m;
        let b = &o.m;
        Mat2::new(
            a[0][0] + b[0][0],
            a[0][1] + b[0][1],
            a[1][0] + b[1][0],
            a[1][1] + b[1][1],
        )
    }
}

/// Symmetric 2×2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

/// Eigenpairs of a symmetric 2×2 matrix, ascending.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymEigen {
    pub minor_value: f64,
    pub major_value: f64,
    pub minor_vector: Vec2,
    pub major_vector: Vec2,
}

impl Sym2 {
    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Sym2 { xx, xy, yy }
    }

    pub fn to_mat(self) -> Mat2 {
        Mat2::new(self.xx, self.xy, self.xy, self.yy)
    }

    pub fn det(self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn lerp(self, o: Sym2, t: f64) -> Sym2 {
        Sym2::new(
            self.xx + t * (o.xx - self.xx),
            self.xy + t * (o.xy - self.xy),
            self.yy + t * (o.yy - self.yy),
        )
    }

    pub fn is_finite(self) -> bool {
        self.xx.is_finite() && self.xy.is_finite() && self.yy.is_finite()
    }

    /// Closed-form eigendecomposition. The major eigenvector is
    /// `(cos φ, sin φ)` with `φ = ½·atan2(2xy, xx − yy)`; the minor one is its
    /// clockwise perpendicular. For positive-definite input the small
    /// eigenvalue is recovered as `det / λ_major` to avoid cancellation.
    pub fn eigen(self) -> SymEigen {
        let mean = 0.5 * (self.xx + self.yy);
        let radius = hypot(0.5 * (self.xx - self.yy), self.xy);
        let major_value = mean + radius;
        let det = self.det();
        let minor_value = if major_value > 0.0 && det > 0.0 {
            det / major_value
        } else {
            mean - radius
        };
        let phi = 0.5 * atan2(2.0 * self.xy, self.xx - self.yy);
        let major_vector = Vec2::new(cos(phi), sin(phi));
        SymEigen {
            minor_value,
            major_value,
            minor_vector: major_vector.perp_cw(),
            major_vector,
        }
    }

    /// Principal square root of a symmetric positive-definite matrix.
    pub fn sqrt_spd(self) -> Option<Sym2> {
        let e = self.eigen();
        if !(e.minor_value > 0.0 && e.major_value.is_finite()) {
            return None;
        }
        let (s1, s2) = (sqrt(e.minor_value), sqrt(e.major_value));
        let (u, v) = (e.minor_vector, e.major_vector);
        Some(Sym2::new(
            s1 * u.x * u.x + s2 * v.x * v.x,
            s1 * u.x * u.y + s2 * v.x * v.y,
            s1 * u.y * u.y + s2 * v.y * v.y,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip() {
        let a = Mat2::new(2.0, 1.0, -0.5, 3.0);
        let p = a * a.inverse().unwrap();
        assert!((p - Mat2::IDENTITY).frobenius() < 1e-15);
        assert!(Mat2::new(1.0, 2.0, 2.0, 4.0).inverse().is_none());
    }

    #[test]
    fn eigen_diagonal_and_rotated() {
        let e = Sym2::new(4.0, 0.0, 1.0).eigen();
        assert_eq!((e.minor_value, e.major_value), (1.0, 4.0));
        assert!((e.major_vector.x.abs() - 1.0).abs() < 1e-15);

        let e = Sym2::new(2.0, 1.0, 2.0).eigen();
        assert!((e.major_value - 3.0).abs() < 1e-14);
        assert!((e.minor_value - 1.0).abs() < 1e-14);
        let m = Sym2::new(2.0, 1.0, 2.0).to_mat();
        let r = m.mul_vec(e.minor_vector) - e.minor_vector * e.minor_value;
        assert!(r.norm() < 1e-14);
    }

    #[test]
    fn spd_sqrt_squares_back() {
        let g = Sym2::new(3.0, 0.7, 1.2);
        let r = g.sqrt_spd().unwrap().to_mat();
        assert!(((r * r) - g.to_mat()).frobenius() < 1e-14);
        assert!(Sym2::new(1.0, 2.0, 1.0).sqrt_spd().is_none());
    }
}
