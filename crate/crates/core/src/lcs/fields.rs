//! Scalar and line fields evaluated at arbitrary points.

use alloc::vec::Vec;

use libm::{fabs, floor, round};

use crate::deformation::{svd2, DeformationField, SvdPoint, GAP_TOL_REL};
use crate::dynamics::VelocityField;
use crate::error::{Error, Result};
use crate::flowmap::{FlowProblem, Grid2};
use crate::geometry::{metric_representation, Chart, Rect};
use crate::linalg::{Mat2, Point2, Sym2, Vec2};

use super::CurveKind;

/// Scalar field; `None` marks points where no valid value exists.
pub trait ScalarField {
    fn value(&self, x: Point2) -> Option<f64>;
}

impl<F: Fn(Point2) -> Option<f64>> ScalarField for F {
    fn value(&self, x: Point2) -> Option<f64> {
        self(x)
    }
}

/// Field of unit vectors defined up to sign (`v ≡ −v`).
pub trait LineField {
    /// Unit direction at `x`, in either orientation, or `None` where the
    /// field is undefined or degenerate.
    fn direction(&self, x: Point2) -> Option<Vec2>;

    /// Region outside which the field is undefined.
    fn domain(&self) -> Rect {
        Rect::UNBOUNDED
    }

    /// Curve family obtained by integrating the field.
    fn curve_kind(&self) -> CurveKind {
        CurveKind::Unspecified
    }
}

impl<F: Fn(Point2) -> Option<Vec2>> LineField for F {
    fn direction(&self, x: Point2) -> Option<Vec2> {
        self(x)
    }
}

/// Picks the sign of `v` that agrees with `reference`.
pub fn align(v: Vec2, reference: Vec2) -> Vec2 {
    if v.dot(reference) < 0.0 {
        -v
    } else {
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantDirection(Vec2);

impl ConstantDirection {
    pub fn new(v: Vec2) -> Result<Self> {
        v.normalized()
            .map(ConstantDirection)
            .ok_or(Error::InvalidParameter(
                "direction must be a nonzero finite vector",
            ))
    }
}

impl LineField for ConstantDirection {
    fn direction(&self, _x: Point2) -> Option<Vec2> {
        Some(self.0)
    }
}

fn keys_weights(s: f64) -> [f64; 4] {
    // Catmull–Rom (Keys, a = −1/2) weights for nodes at offsets −1, 0, 1, 2.
    let s2 = s * s;
    let s3 = s2 * s;
    [
        -0.5 * s3 + s2 - 0.5 * s,
        1.5 * s3 - 2.5 * s2 + 1.0,
        -1.5 * s3 + 2.0 * s2 + 0.5 * s,
        0.5 * s3 - 0.5 * s2,
    ]
}

/// Cell containing fractional coordinate `u` on an axis with `n` nodes,
/// and the offset inside it. Coordinates within roundoff of a node snap to
/// it so node queries return node values exactly.
fn cell(u: f64, n: usize) -> (usize, f64) {
    let r = round(u);
    let u = if fabs(u - r) < 1e-9 { r } else { u };
    let i = (floor(u).max(0.0) as usize).min(n - 2);
    (i, u - i as f64)
}

/// Grid-sampled scalar with bicubic (Catmull–Rom) interpolation. Stencils
/// reaching past the grid edge reuse the edge nodes; any NaN node in the
/// stencil makes the value undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct GridScalar {
    grid: Grid2,
    values: Vec<f64>,
}

impl GridScalar {
    pub fn new(grid: Grid2, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Mismatch("scalar values do not match the grid"));
        }
        Ok(GridScalar { grid, values })
    }

    pub fn grid(&self) -> &Grid2 {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl ScalarField for GridScalar {
    fn value(&self, p: Point2) -> Option<f64> {
        let g = &self.grid;
        if !g.extent().contains(p) {
            return None;
        }
        let (u, v) = g.fractional(p);
        let (i, fu) = cell(u, g.nx());
        let (j, fv) = cell(v, g.ny());
        let wu = keys_weights(fu);
        let wv = keys_weights(fv);
        let clamp = |k: isize, n: usize| k.clamp(0, n as isize - 1) as usize;
        let mut acc = 0.0;
        for (b, wy) in wv.iter().enumerate() {
            let jj = clamp(j as isize + b as isize - 1, g.ny());
            let mut row = 0.0;
            for (a, wx) in wu.iter().enumerate() {
                let ii = clamp(i as isize + a as isize - 1, g.nx());
                row += wx * self.values[g.index(ii, jj)];
            }
            acc += wy * row;
        }
        acc.is_finite().then_some(acc)
    }
}

/// Which singular-vector family a [`DirectionField`] represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionSource {
    /// Minor right-singular vector at the initial time.
    Xi1,
    /// Major right-singular vector at the initial time.
    Xi2,
    /// Minor left-singular vector, living at the final time.
    Theta1,
    /// Major left-singular vector, living at the final time.
    Theta2,
}

impl DirectionSource {
    /// Whether the field is the major eigenvector of the underlying right
    /// Cauchy–Green tensor. Left-singular fields are read off a backward
    /// field computed on a grid at the final time, where `θ₁` is the
    /// backward major direction and `θ₂` the backward minor one.
    fn uses_major(self) -> bool {
        matches!(self, DirectionSource::Xi2 | DirectionSource::Theta1)
    }
}

/// Grid-sampled line field of singular vectors.
///
/// Stores the right Cauchy–Green tensor per node, interpolates it
/// bilinearly and takes the requested eigenvector of the interpolant, so
/// sign flips between neighbouring nodes cannot cancel. Nodes that are
/// invalid or degenerate are masked and poison every cell touching them.
#[derive(Debug, Clone)]
pub struct DirectionField {
    grid: Grid2,
    source: DirectionSource,
    tensors: Vec<Option<Sym2>>,
    /// Per-node `|P′|⁻¹`, mapping metric components back to parameters.
    inverse_modulus: Option<Vec<Mat2>>,
}

impl DirectionField {
    /// Builds the field from a gridded deformation field whose Jacobians are
    /// in metric coordinates of `chart`. For `Theta*` sources `field` must
    /// be the backward field computed on a grid at the final time.
    pub fn from_deformation<C: Chart + ?Sized>(
        field: &DeformationField,
        source: DirectionSource,
        chart: &C,
    ) -> Result<Self> {
        let grid = *field.grid().ok_or(Error::Mismatch(
            "direction fields need a gridded deformation field",
        ))?;
        let mut tensors: Vec<Option<Sym2>> = (0..field.len())
            .map(|k| match field.svd[k] {
                Some(s) if !s.degenerate => field.right_cauchy_green(k),
                _ => None,
            })
            .collect();
        let inverse_modulus = if chart.is_euclidean() {
            None
        } else {
            let mut inv = Vec::with_capacity(field.len());
            for (k, t) in tensors.iter_mut().enumerate() {
                let m = chart
                    .modulus(grid.point(k))
                    .ok()
                    .and_then(|m| m.to_mat().inverse());
                if m.is_none() {
                    *t = None;
                }
                inv.push(m.unwrap_or(Mat2::IDENTITY));
            }
            Some(inv)
        };
        Ok(DirectionField {
            grid,
            source,
            tensors,
            inverse_modulus,
        })
    }

    pub fn grid(&self) -> &Grid2 {
        &self.grid
    }

    pub fn source(&self) -> DirectionSource {
        self.source
    }

    pub fn is_masked(&self, node: usize) -> bool {
        self.tensors[node].is_none()
    }
}

impl LineField for DirectionField {
    fn direction(&self, p: Point2) -> Option<Vec2> {
        let g = &self.grid;
        if !g.extent().contains(p) {
            return None;
        }
        let (u, v) = g.fractional(p);
        let (i, fu) = cell(u, g.nx());
        let (j, fv) = cell(v, g.ny());
        let corner = |a: usize, b: usize| self.tensors[g.index(i + a, j + b)];
        let c = corner(0, 0)?
            .lerp(corner(1, 0)?, fu)
            .lerp(corner(0, 1)?.lerp(corner(1, 1)?, fu), fv);
        let e = c.eigen();
        let gap = e.major_value - e.minor_value;
        if !(e.major_value > 0.0 && gap > GAP_TOL_REL * e.major_value) {
            return None;
        }
        let d = if self.source.uses_major() {
            e.major_vector
        } else {
            e.minor_vector
        };
        match &self.inverse_modulus {
            None => Some(d),
            Some(inv) => {
                let k = |a: usize, b: usize| inv[g.index(i + a, j + b)];
                let lerp = |a: Mat2, b: Mat2, t: f64| a + (b - a).scale(t);
                let m = lerp(lerp(k(0, 0), k(1, 0), fu), lerp(k(0, 1), k(1, 1), fu), fv);
                m.mul_vec(d).normalized()
            }
        }
    }

    fn domain(&self) -> Rect {
        self.grid.extent()
    }

    fn curve_kind(&self) -> CurveKind {
        match self.source {
            DirectionSource::Xi1 | DirectionSource::Theta1 => CurveKind::Strainline,
            DirectionSource::Xi2 | DirectionSource::Theta2 => CurveKind::Stretchline,
        }
    }
}

/// Singular-value data evaluated on demand at arbitrary points by
/// linearizing the flow there, without any grid interpolation.
pub struct PointwiseSvd<'a, V: ?Sized, C: ?Sized> {
    problem: FlowProblem<'a, V>,
    chart: &'a C,
}

impl<'a, V: VelocityField + ?Sized, C: Chart + ?Sized> PointwiseSvd<'a, V, C> {
    pub fn new(problem: FlowProblem<'a, V>, chart: &'a C) -> Self {
        PointwiseSvd { problem, chart }
    }

    pub fn problem(&self) -> &FlowProblem<'a, V> {
        &self.problem
    }

    /// Image of `x` and the SVD of the metric deformation gradient there.
    pub fn at(&self, x: Point2) -> Result<(Point2, SvdPoint)> {
        let (image, jac) = self.problem.linearize(x)?;
        let m = metric_representation(self.chart, x, image, jac)?;
        Ok((image, svd2(m)?))
    }

    /// Scalar derived from the SVD at `x`; `None` on any failure.
    pub fn scalar(&self, x: Point2, f: impl Fn(&SvdPoint) -> f64) -> Option<f64> {
        self.at(x)
            .ok()
            .map(|(_, s)| f(&s))
            .filter(|v| v.is_finite())
    }

    /// Right-singular vector in parameter components, `None` when
    /// degenerate.
    pub fn right_vector(&self, x: Point2, major: bool) -> Option<Vec2> {
        let (_, s) = self.at(x).ok()?;
        if s.degenerate {
            return None;
        }
        let d = if major { s.xi2 } else { s.xi1 };
        if self.chart.is_euclidean() {
            return Some(d);
        }
        let inv = self.chart.modulus(x).ok()?.to_mat().inverse()?;
        inv.mul_vec(d).normalized()
    }
}
