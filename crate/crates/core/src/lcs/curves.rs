//! Material curves from line-field integration and their variational
//! classification.

use alloc::vec::Vec;

use libm::{fabs, sin};

use crate::deformation::{paired, BackwardSample, DeformationField, ResidualStats};
use crate::error::{Error, Result};
use crate::flowmap::Grid2;
use crate::geometry::{Chart, Rect};
use crate::linalg::{Point2, Vec2};

use super::fields::{align, DirectionField, DirectionSource, GridScalar, LineField, ScalarField};
use super::lie::{lie_derivative, lie_derivative2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    /// Tangent to the minor right-singular field, normal to the major one.
    Strainline,
    /// Tangent to the major right-singular field, normal to the minor one.
    Stretchline,
    /// Integrated from a field with no singular-vector meaning.
    Unspecified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Repelling,
    Attracting,
    Unclassified,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Repelling => "repelling",
            Classification::Attracting => "attracting",
            Classification::Unclassified => "unclassified",
        }
    }
}

/// Why one end of an integrated curve stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxLength,
    Boundary,
    Degenerate,
    /// The field turned by more than the alignment threshold within a step.
    Discontinuity,
}

/// Per-vertex data gathered during classification. Failed stencils are NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexDiagnostics {
    pub sigma1: f64,
    pub sigma2: f64,
    /// `ℒ_{ξ₂}σ₂` and `ℒ²_{ξ₂}σ₂`.
    pub major_first: f64,
    pub major_second: f64,
    /// `ℒ_{ξ₁}σ₁` and `ℒ²_{ξ₁}σ₁`.
    pub minor_first: f64,
    pub minor_second: f64,
    pub repelling: bool,
    pub attracting: bool,
}

impl VertexDiagnostics {
    /// First and second Lie derivatives across the curve: along `ξ₂` for
    /// strainlines, along `ξ₁` otherwise.
    pub fn normal_derivatives(&self, kind: CurveKind) -> (f64, f64) {
        match kind {
            CurveKind::Strainline => (self.major_first, self.major_second),
            _ => (self.minor_first, self.minor_second),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialCurve {
    pub vertices: Vec<Point2>,
    pub arclength: f64,
    pub kind: CurveKind,
    pub classification: Classification,
    /// Empty until the curve is classified.
    pub diagnostics: Vec<VertexDiagnostics>,
    /// Stop reasons at the start and end of the vertex list.
    pub stops: [StopReason; 2],
}

impl MaterialCurve {
    /// Unclassified curve through the given vertices.
    pub fn polyline(vertices: Vec<Point2>, kind: CurveKind) -> Self {
        let arclength = vertices
            .windows(2)
            .fold(0.0, |len, w| len + w[0].dist(w[1]));
        MaterialCurve {
            vertices,
            arclength,
            kind,
            classification: Classification::Unclassified,
            diagnostics: Vec::new(),
            stops: [StopReason::MaxLength; 2],
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Unit tangents by central differences (one-sided at the ends).
    pub fn tangents(&self) -> Vec<Option<Vec2>> {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let a = self.vertices[i.saturating_sub(1)];
                let b = self.vertices[(i + 1).min(n - 1)];
                (b - a).normalized()
            })
            .collect()
    }

    /// Runs [`classify_variational`] and stores the label and diagnostics.
    pub fn classify(
        &mut self,
        fields: &StrainFields,
        tol: &Tolerances,
    ) -> Result<ClassificationReport> {
        let report = classify_variational(self, fields, tol)?;
        self.classification = report.classification;
        self.diagnostics = report.diagnostics.clone();
        Ok(report)
    }
}

const MIN_ALIGNMENT: f64 = 0.7;

/// One RK4 step of the line field from `p`, orienting every stage along
/// `prev` (the previous tangent).
fn rk4_step<L: LineField + ?Sized>(
    v: &L,
    domain: &Rect,
    p: Point2,
    prev: Vec2,
    h: f64,
) -> core::result::Result<Point2, StopReason> {
    let stage = |q: Point2, reference: Vec2| {
        if !domain.contains(q) {
            return Err(StopReason::Boundary);
        }
        let d = v.direction(q).ok_or(StopReason::Degenerate)?;
        let d = align(d, reference);
        if d.dot(reference) < MIN_ALIGNMENT {
            return Err(StopReason::Discontinuity);
        }
        Ok(d)
    };
    let k1 = stage(p, prev)?;
    let k2 = stage(p + k1 * (0.5 * h), k1)?;
    let k3 = stage(p + k2 * (0.5 * h), k1)?;
    let k4 = stage(p + k3 * h, k1)?;
    let q = p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    if !domain.contains(q) {
        return Err(StopReason::Boundary);
    }
    Ok(q)
}

fn half_curve<L: LineField + ?Sized>(
    v: &L,
    seed: Point2,
    start: Vec2,
    step: f64,
    length: f64,
) -> (Vec<Point2>, StopReason) {
    let domain = v.domain();
    let mut points = Vec::new();
    let mut p = seed;
    let mut tangent = start;
    let mut travelled = 0.0;
    loop {
        let remaining = length - travelled;
        if remaining <= 1e-12 * length {
            return (points, StopReason::MaxLength);
        }
        let h = step.min(remaining);
        match rk4_step(v, &domain, p, tangent, h) {
            Ok(q) => {
                if let Some(t) = (q - p).normalized() {
                    tangent = t;
                }
                points.push(q);
                p = q;
                travelled += h;
            }
            Err(reason) => return (points, reason),
        }
    }
}

/// Integrates the line field `v` through `seed` with fixed-step RK4,
/// `max_len / 2` in each direction. Each step's stages are sign-aligned
/// with the previous tangent; the first step uses the orientation `v`
/// reports at the seed. The returned vertices run from the end reached
/// against the seed orientation to the end reached along it.
pub fn integrate_line_field<L: LineField + ?Sized>(
    v: &L,
    seed: Point2,
    step: f64,
    max_len: f64,
) -> Result<MaterialCurve> {
    if !(step > 0.0 && step.is_finite()) || !(max_len > 0.0 && max_len.is_finite()) {
        return Err(Error::InvalidParameter(
            "curve step and length must be positive",
        ));
    }
    if !v.domain().contains(seed) {
        return Err(Error::OutsideDomain(seed));
    }
    let d0 = v.direction(seed).ok_or(Error::Degenerate(seed))?;
    let (back, back_stop) = half_curve(v, seed, -d0, step, 0.5 * max_len);
    let (fwd, fwd_stop) = half_curve(v, seed, d0, step, 0.5 * max_len);
    let mut vertices = Vec::with_capacity(back.len() + fwd.len() + 1);
    vertices.extend(back.into_iter().rev());
    vertices.push(seed);
    vertices.extend(fwd);
    let mut curve = MaterialCurve::polyline(vertices, v.curve_kind());
    curve.stops = [back_stop, fwd_stop];
    Ok(curve)
}

/// Thresholds of the variational classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Maximum deviation from normality between the curve tangent and the
    /// relevant singular vector, in degrees.
    pub normal_angle_deg: f64,
    /// First Lie derivatives count as zero below this fraction of the
    /// field's largest magnitude along the curve.
    pub first_order_rel: f64,
    /// Minimum fraction of vertices that must pass.
    pub coverage: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            normal_angle_deg: 5.0,
            first_order_rel: 1e-3,
            coverage: 0.9,
        }
    }
}

/// Gridded singular values and right-singular directions used to classify
/// curves.
#[derive(Debug, Clone)]
pub struct StrainFields {
    pub sigma1: GridScalar,
    pub sigma2: GridScalar,
    pub xi1: DirectionField,
    pub xi2: DirectionField,
    /// Lie-derivative step, the smaller grid spacing.
    pub h: f64,
}

impl StrainFields {
    pub fn new<C: Chart + ?Sized>(field: &DeformationField, chart: &C) -> Result<Self> {
        let grid: Grid2 = *field.grid().ok_or(Error::Mismatch(
            "classification needs a gridded deformation field",
        ))?;
        Ok(StrainFields {
            sigma1: GridScalar::new(grid, field.sigma1())?,
            sigma2: GridScalar::new(grid, field.sigma2())?,
            xi1: DirectionField::from_deformation(field, DirectionSource::Xi1, chart)?,
            xi2: DirectionField::from_deformation(field, DirectionSource::Xi2, chart)?,
            h: grid.dx().min(grid.dy()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport {
    pub classification: Classification,
    pub repelling_fraction: f64,
    pub attracting_fraction: f64,
    pub diagnostics: Vec<VertexDiagnostics>,
}

/// Variational classification of a material curve at its initial time.
///
/// A vertex supports *repelling* when `ξ₂` is normal to the tangent,
/// `ℒ_{ξ₂}σ₂ ≈ 0`, `ℒ²_{ξ₂}σ₂ < 0`, and `σ₁ < σ₂` with `σ₂ > 1`. It supports
/// *attracting* when `ξ₁` is normal to the tangent, `ℒ_{ξ₁}σ₁ ≈ 0`,
/// `ℒ²_{ξ₁}σ₁ > 0`, and `σ₁ < σ₂` with `σ₁ < 1`. The curve takes the label
/// whose vertex fraction reaches the coverage threshold.
pub fn classify_variational(
    curve: &MaterialCurve,
    fields: &StrainFields,
    tol: &Tolerances,
) -> Result<ClassificationReport> {
    let n = curve.vertices.len();
    if n < 3 {
        return Err(Error::CurveTooShort(n));
    }
    let max_sin = sin(tol.normal_angle_deg.to_radians());
    let h = fields.h;
    let sample = |f: &GridScalar, p: Point2| f.value(p).unwrap_or(f64::NAN);
    let sigmas: Vec<(f64, f64)> = curve
        .vertices
        .iter()
        .map(|&p| (sample(&fields.sigma1, p), sample(&fields.sigma2, p)))
        .collect();
    let scale = |pick: fn(&(f64, f64)) -> f64| {
        sigmas
            .iter()
            .map(pick)
            .filter(|v| v.is_finite())
            .fold(0.0, |m: f64, v| m.max(fabs(v)))
    };
    let tol1 = tol.first_order_rel * scale(|s| s.0);
    let tol2 = tol.first_order_rel * scale(|s| s.1);
    let normal = |t: Option<Vec2>, d: Option<Vec2>| match (t, d) {
        (Some(t), Some(d)) => fabs(t.dot(d)) <= max_sin,
        _ => false,
    };
    let tangents = curve.tangents();
    let mut diagnostics = Vec::with_capacity(n);
    for (i, &p) in curve.vertices.iter().enumerate() {
        let (s1, s2) = sigmas[i];
        let nan = |r: Result<f64>| r.unwrap_or(f64::NAN);
        let major_first = nan(lie_derivative(&fields.sigma2, &fields.xi2, p, h));
        let major_second = nan(lie_derivative2(&fields.sigma2, &fields.xi2, p, h));
        let minor_first = nan(lie_derivative(&fields.sigma1, &fields.xi1, p, h));
        let minor_second = nan(lie_derivative2(&fields.sigma1, &fields.xi1, p, h));
        let distinct = s2 - s1 > crate::deformation::GAP_TOL_REL * s2;
        let repelling = distinct
            && s2 > 1.0
            && normal(tangents[i], fields.xi2.direction(p))
            && fabs(major_first) <= tol2
            && major_second < 0.0;
        let attracting = distinct
            && s1 < 1.0
            && normal(tangents[i], fields.xi1.direction(p))
            && fabs(minor_first) <= tol1
            && minor_second > 0.0;
        diagnostics.push(VertexDiagnostics {
            sigma1: s1,
            sigma2: s2,
            major_first,
            major_second,
            minor_first,
            minor_second,
            repelling,
            attracting,
        });
    }
    let fraction = |f: fn(&VertexDiagnostics) -> bool| {
        diagnostics.iter().filter(|d| f(d)).count() as f64 / n as f64
    };
    let repelling_fraction = fraction(|d| d.repelling);
    let attracting_fraction = fraction(|d| d.attracting);
    let classification = if repelling_fraction >= tol.coverage {
        Classification::Repelling
    } else if attracting_fraction >= tol.coverage {
        Classification::Attracting
    } else {
        Classification::Unclassified
    };
    Ok(ClassificationReport {
        classification,
        repelling_fraction,
        attracting_fraction,
        diagnostics,
    })
}

/// Misalignment between forward left-singular vectors and independently
/// computed backward right-singular vectors at the same image points.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DualityReport {
    /// `1 − |⟨θ₁, ξᵇ₂⟩|`: forward compression image vs backward stretching.
    pub theta1_vs_stretch: ResidualStats,
    /// `1 − |⟨θ₂, ξᵇ₁⟩|`: forward stretching image vs backward compression.
    pub theta2_vs_strain: ResidualStats,
    pub masked: usize,
}

impl DualityReport {
    pub fn max(&self) -> f64 {
        self.theta1_vs_stretch.max.max(self.theta2_vs_strain.max)
    }
}

/// Forward strain curves map onto backward stretch curves: compares the
/// forward `θ` fields with the backward `ξ` fields at every paired sample.
/// Degenerate or invalid samples are counted as masked.
pub fn verify_strain_stretch_duality(
    fwd: &DeformationField,
    bwd: &BackwardSample,
) -> Result<DualityReport> {
    let (pairs, masked) = paired(fwd, bwd)?;
    let mut rep = DualityReport {
        masked,
        ..Default::default()
    };
    for (_, f, _, b) in pairs {
        rep.theta1_vs_stretch.push(1.0 - fabs(f.theta1.dot(b.xi2)));
        rep.theta2_vs_strain.push(1.0 - fabs(f.theta2.dot(b.xi1)));
    }
    Ok(rep)
}

/// Reverses the vertex order, keeping the stop reasons attached to their
/// ends.
pub fn reversed(curve: &MaterialCurve) -> MaterialCurve {
    let mut c = curve.clone();
    c.vertices.reverse();
    c.diagnostics.reverse();
    c.stops = [curve.stops[1], curve.stops[0]];
    c
}
