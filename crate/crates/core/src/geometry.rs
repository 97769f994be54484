//! Parametrized 2D charts of embedded surfaces.
//!
//! A chart maps parameters `p = (p₁, p₂)` into Euclidean three-space. Its
//! pushforward `P′(p)` (3×2, columns `∂p₁P`, `∂p₂P`) induces the Gramian
//! `G = P′ᵀP′`, and the modulus `|P′| = G^{1/2}` converts parameter
//! components of tangent vectors into metric coordinates, in which the
//! surface inner product is the plain dot product.
//!
//! Deformation gradients computed in parameters are made metric by
//! conjugating with moduli at the initial and final points, see
//! [`metric_representation`].

use core::f64::consts::FRAC_PI_2;

use libm::{cos, sin};

use crate::error::{Error, Result};
use crate::linalg::{Mat2, Point2, Sym2};

/// Axis-aligned parameter rectangle; bounds may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub const UNBOUNDED: Rect = Rect {
        x_min: f64::NEG_INFINITY,
        x_max: f64::INFINITY,
        y_min: f64::NEG_INFINITY,
        y_max: f64::INFINITY,
    };

    pub const fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Rect {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    /// Closed containment; NaN coordinates are never contained.
    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }
}

/// 3×2 pushforward matrix, row-major (rows are ambient x, y, z).
pub type Pushforward = [[f64; 2]; 3];

pub trait Chart: Sync {
    fn name(&self) -> &str;

    fn domain(&self) -> Rect;

    /// `P′(p)`; evaluated without a domain check.
    fn pushforward(&self, p: Point2) -> Pushforward;

    fn contains(&self, p: Point2) -> bool {
        self.domain().contains(p)
    }

    /// Metric representing matrix `G(p) = P′(p)ᵀ P′(p)`.
    fn gramian(&self, p: Point2) -> Result<Sym2> {
        self.check(p)?;
        let g = gram_of(&self.pushforward(p));
        if !g.is_finite() {
            return Err(Error::NonFinite("gramian"));
        }
        Ok(g)
    }

    /// `|P′(p)| = G(p)^{1/2}`.
    fn modulus(&self, p: Point2) -> Result<Sym2> {
        self.gramian(p)?.sqrt_spd().ok_or(Error::Singular)
    }

    /// True when the modulus is the identity everywhere.
    fn is_euclidean(&self) -> bool {
        false
    }

    fn check(&self, p: Point2) -> Result<()> {
        if !p.is_finite() {
            return Err(Error::NonFinite("chart point"));
        }
        if !self.contains(p) {
            return Err(Error::OutsideDomain(p));
        }
        Ok(())
    }
}

/// `P′ᵀP′` computed from the pushforward columns.
pub fn gram_of(pf: &Pushforward) -> Sym2 {
    let (mut xx, mut xy, mut yy) = (0.0, 0.0, 0.0);
    for row in pf {
        xx += row[0] * row[0];
        xy += row[0] * row[1];
        yy += row[1] * row[1];
    }
    Sym2::new(xx, xy, yy)
}

/// The plane embedded as the first two ambient axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EuclideanChart {
    pub domain: Rect,
}

impl Default for EuclideanChart {
    fn default() -> Self {
        EuclideanChart {
            domain: Rect::UNBOUNDED,
        }
    }
}

impl EuclideanChart {
    pub fn new(domain: Rect) -> Self {
        EuclideanChart { domain }
    }
}

impl Chart for EuclideanChart {
    fn name(&self) -> &str {
        "euclidean"
    }

    fn domain(&self) -> Rect {
        self.domain
    }

    fn pushforward(&self, _p: Point2) -> Pushforward {
        [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]
    }

    fn gramian(&self, p: Point2) -> Result<Sym2> {
        self.check(p)?;
        Ok(Sym2::new(1.0, 0.0, 1.0))
    }

    fn modulus(&self, p: Point2) -> Result<Sym2> {
        self.gramian(p)
    }

    fn is_euclidean(&self) -> bool {
        true
    }
}

pub const DEFAULT_POLE_CLAMP: f64 = 1e-3;

/// Sphere of radius `R` in geographic parameters `(φ, θ)` = (longitude,
/// latitude), both in radians. Longitude is unbounded; latitudes within
/// `pole_clamp` of either pole are outside the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereChart {
    radius: f64,
    pole_clamp: f64,
}

impl SphereChart {
    pub fn new(radius: f64, pole_clamp: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidParameter("sphere radius must be positive"));
        }
        if !(pole_clamp > 0.0 && pole_clamp < FRAC_PI_2) {
            return Err(Error::InvalidParameter("pole clamp must lie in (0, pi/2)"));
        }
        Ok(SphereChart { radius, pole_clamp })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn pole_clamp(&self) -> f64 {
        self.pole_clamp
    }

    /// `P(φ, θ) = R (cosθ cosφ, cosθ sinφ, sinθ)`.
    pub fn embed(&self, p: Point2) -> [f64; 3] {
        let (phi, theta) = (p.x, p.y);
        let r = self.radius;
        [
            r * cos(theta) * cos(phi),
            r * cos(theta) * sin(phi),
            r * sin(theta),
        ]
    }
}

impl Chart for SphereChart {
    fn name(&self) -> &str {
        "sphere"
    }

    fn domain(&self) -> Rect {
        let lat = FRAC_PI_2 - self.pole_clamp;
        Rect::new(f64::NEG_INFINITY, f64::INFINITY, -lat, lat)
    }

    fn pushforward(&self, p: Point2) -> Pushforward {
        let (phi, theta) = (p.x, p.y);
        let r = self.radius;
        let (sp, cp) = (sin(phi), cos(phi));
        let (st, ct) = (sin(theta), cos(theta));
        [
            [-r * ct * sp, -r * st * cp],
            [r * ct * cp, -r * st * sp],
            [0.0, r * ct],
        ]
    }

    fn gramian(&self, p: Point2) -> Result<Sym2> {
        self.check(p)?;
        let rc = self.radius * cos(p.y);
        Ok(Sym2::new(rc * rc, 0.0, self.radius * self.radius))
    }

    fn modulus(&self, p: Point2) -> Result<Sym2> {
        self.check(p)?;
        Ok(Sym2::new(self.radius * cos(p.y), 0.0, self.radius))
    }
}

/// Metric representation `|P′(x₂)| · df · |P′(x₁)|⁻¹` of a linear map from
/// the tangent space at `x1` to the one at `x2`. Its singular values are the
/// true stretch ratios measured in the surface metric.
pub fn metric_representation<C: Chart + ?Sized>(
    chart: &C,
    x1: Point2,
    x2: Point2,
    df: Mat2,
) -> Result<Mat2> {
    if !df.is_finite() {
        return Err(Error::NonFinite("deformation gradient"));
    }
    if chart.is_euclidean() {
        chart.check(x1)?;
        chart.check(x2)?;
        return Ok(df);
    }
    let m1_inv = chart
        .modulus(x1)?
        .to_mat()
        .inverse()
        .ok_or(Error::Singular)?;
    let m2 = chart.modulus(x2)?.to_mat();
    Ok(m2 * df * m1_inv)
}
