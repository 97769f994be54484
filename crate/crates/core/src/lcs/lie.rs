//! Finite-difference Lie derivatives along line fields and the criteria
//! built on them.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::flowmap::Grid2;
use crate::linalg::{Mat2, Point2, Vec2};

use super::fields::{align, LineField, ScalarField};
use super::MaterialCurve;

fn check_step(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter("derivative step must be positive"))
    }
}

fn eval<F: ScalarField + ?Sized>(f: &F, p: Point2) -> Result<f64> {
    f.value(p).ok_or(Error::InvalidStencil(p))
}

fn direction<L: LineField + ?Sized>(v: &L, x: Point2) -> Result<Vec2> {
    v.direction(x).ok_or(Error::Degenerate(x))
}

/// Central first difference of `f` at `x` along the fixed unit vector `d`.
pub fn directional<F: ScalarField + ?Sized>(f: &F, x: Point2, d: Vec2, h: f64) -> Result<f64> {
    check_step(h)?;
    Ok((eval(f, x + d * h)? - eval(f, x - d * h)?) / (2.0 * h))
}

/// Central second difference of `f` at `x` along the fixed unit vector `d`.
pub fn directional2<F: ScalarField + ?Sized>(f: &F, x: Point2, d: Vec2, h: f64) -> Result<f64> {
    check_step(h)?;
    let mid = eval(f, x)?;
    Ok((eval(f, x + d * h)? - 2.0 * mid + eval(f, x - d * h)?) / (h * h))
}

/// `ℒ_v f(x)` by a central difference along `v(x)`. The sign follows the
/// orientation `v` reports at `x`.
pub fn lie_derivative<F, L>(f: &F, v: &L, x: Point2, h: f64) -> Result<f64>
where
    F: ScalarField + ?Sized,
    L: LineField + ?Sized,
{
    directional(f, x, direction(v, x)?, h)
}

/// Straight second difference along `v(x)`. Orientation independent, and
/// equal to `ℒ_v ℒ_v f` wherever `ℒ_v f` vanishes to leading order.
pub fn lie_derivative2<F, L>(f: &F, v: &L, x: Point2, h: f64) -> Result<f64>
where
    F: ScalarField + ?Sized,
    L: LineField + ?Sized,
{
    directional2(f, x, direction(v, x)?, h)
}

/// `ℒ_v(ℒ_v f)(x)` with the inner derivative re-evaluated along the local
/// field direction at each outer stencil point (sign aligned with `v(x)`).
/// Unlike [`lie_derivative2`] this picks up the turning of `v`.
pub fn lie_derivative2_nested<F, L>(f: &F, v: &L, x: Point2, h: f64) -> Result<f64>
where
    F: ScalarField + ?Sized,
    L: LineField + ?Sized,
{
    check_step(h)?;
    let d0 = direction(v, x)?;
    let mut inner = [0.0; 2];
    for (slot, s) in inner.iter_mut().zip([1.0, -1.0]) {
        let p = x + d0 * (s * h);
        let d = align(direction(v, p)?, d0);
        *slot = directional(f, p, d, h)?;
    }
    Ok((inner[0] - inner[1]) / (2.0 * h))
}

/// `|r| / max(|lhs|, |rhs|, floor)`.
pub fn relative_residual(lhs: f64, rhs: f64, floor: f64) -> f64 {
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(floor)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferOptions {
    /// Derivative step at the initial point; the step at the image is
    /// `σ·h` so both stencils cover corresponding material lengths.
    pub h: f64,
    /// Second-order residuals are only formed where `|ℒ_ξ f| < gate`.
    pub gate: f64,
}

impl Default for TransferOptions {
    fn default() -> Self {
        TransferOptions {
            h: 1e-2,
            gate: 1e-3,
        }
    }
}

/// Both sides of the first- and second-order transfer relations
/// `ℒ_ξ f(x₁) = σ ℒ_θ g(x₂)` and `ℒ²_ξ f(x₁) = σ² ℒ²_θ g(x₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferResidual {
    pub lhs1: f64,
    pub rhs1: f64,
    pub r1: f64,
    /// `(lhs, rhs, residual)`, present only where the first-order gate
    /// passes.
    pub second: Option<(f64, f64, f64)>,
}

/// Transfer-rule residuals at `x1` for `f = g ∘ F` near `x1`.
///
/// `xi` is the right-singular field at `t₁`, `theta` the paired
/// left-singular field at `t₂`, and `sigma` the singular value weight
/// (`DF ξ = σ θ`). `df` orients `θ(x₂)` along `DF ξ(x₁)`; second
/// derivatives are nested Lie derivatives on both sides.
#[allow(clippy::too_many_arguments)]
pub fn transfer_rule_residual<F, G, S, L1, L2>(
    f: &F,
    g: &G,
    sigma: &S,
    xi: &L1,
    theta: &L2,
    x1: Point2,
    x2: Point2,
    df: Mat2,
    opts: &TransferOptions,
) -> Result<TransferResidual>
where
    F: ScalarField + ?Sized,
    G: ScalarField + ?Sized,
    S: ScalarField + ?Sized,
    L1: LineField + ?Sized,
    L2: LineField + ?Sized,
{
    check_step(opts.h)?;
    let s = eval(sigma, x1)?;
    let h2 = s * opts.h;
    let d1 = direction(xi, x1)?;
    let d2 = align(direction(theta, x2)?, df.mul_vec(d1));
    let lhs1 = directional(f, x1, d1, opts.h)?;
    let rhs1 = s * directional(g, x2, d2, h2)?;
    let second = if lhs1.abs() < opts.gate {
        let lhs = lie_derivative2_nested(f, xi, x1, opts.h)?;
        let rhs = s * s * lie_derivative2_nested(g, theta, x2, h2)?;
        Some((lhs, rhs, lhs - rhs))
    } else {
        None
    };
    Ok(TransferResidual {
        lhs1,
        rhs1,
        r1: lhs1 - rhs1,
        second,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremumKind {
    Max,
    Min,
}

/// A refined generalized extremum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub point: Point2,
    /// Grid node whose stencil bracketed the zero crossing.
    pub node: usize,
    /// Second derivative along `v` at `point`.
    pub second: f64,
}

/// Generalized extrema of `f` with respect to `v` on `grid`.
///
/// Around each node `x` the derivative along `w = v(x)` is sampled at
/// `x ∓ δ/2·w` (`δ` the smaller grid spacing). A sign change between the
/// two samples is refined by linear interpolation and kept if the second
/// derivative there has the sign required by `kind`. Nodes whose stencils
/// are invalid are skipped.
pub fn generalized_extrema<F, L>(f: &F, v: &L, grid: &Grid2, kind: ExtremumKind) -> Vec<Extremum>
where
    F: ScalarField + ?Sized,
    L: LineField + ?Sized,
{
    let delta = grid.dx().min(grid.dy());
    let h = 0.5 * delta;
    let mut out = Vec::new();
    for node in 0..grid.len() {
        let x = grid.point(node);
        let Some(w) = v.direction(x) else { continue };
        let lo = x - w * h;
        let hi = x + w * h;
        let (Ok(a), Ok(b)) = (directional(f, lo, w, h), directional(f, hi, w, h)) else {
            continue;
        };
        let crossing = match kind {
            ExtremumKind::Max => a >= 0.0 && b < 0.0,
            ExtremumKind::Min => a <= 0.0 && b > 0.0,
        };
        if !crossing {
            continue;
        }
        let point = lo + w * (delta * a / (a - b));
        let Ok(second) = directional2(f, point, w, h) else {
            continue;
        };
        let ok = match kind {
            ExtremumKind::Max => second < 0.0,
            ExtremumKind::Min => second > 0.0,
        };
        if ok {
            out.push(Extremum {
                point,
                node,
                second,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeVertex {
    pub point: Point2,
    /// `ℒ_n f`, `None` where the stencil was invalid.
    pub first: Option<f64>,
    /// `ℒ²_n f`, `None` where the stencil was invalid.
    pub second: Option<f64>,
    pub critical: bool,
    pub concave: bool,
}

impl RidgeVertex {
    pub fn passes(&self) -> bool {
        self.critical && self.concave
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeReport {
    pub vertices: Vec<RidgeVertex>,
}

impl RidgeReport {
    pub fn all_critical(&self) -> bool {
        self.vertices.iter().all(|v| v.critical)
    }

    pub fn all_concave(&self) -> bool {
        self.vertices.iter().all(|v| v.concave)
    }

    pub fn is_ridge(&self) -> bool {
        !self.vertices.is_empty() && self.vertices.iter().all(RidgeVertex::passes)
    }

    pub fn pass_fraction(&self) -> f64 {
        if self.vertices.is_empty() {
            return 0.0;
        }
        let n = self.vertices.iter().filter(|v| v.passes()).count();
        n as f64 / self.vertices.len() as f64
    }

    pub fn max_abs_first(&self) -> f64 {
        self.vertices
            .iter()
            .filter_map(|v| v.first)
            .fold(0.0, |m, d| m.max(d.abs()))
    }
}

/// Height-ridge conditions `|ℒ_n f| ≤ tol` and `ℒ²_n f < 0` at every vertex
/// of `curve`, with `n` the given normal field.
pub fn height_ridge_test<F, L>(
    f: &F,
    curve: &MaterialCurve,
    normal: &L,
    h: f64,
    tol: f64,
) -> Result<RidgeReport>
where
    F: ScalarField + ?Sized,
    L: LineField + ?Sized,
{
    check_step(h)?;
    let vertices = curve
        .vertices
        .iter()
        .map(|&p| {
            let first = lie_derivative(f, normal, p, h).ok();
            let second = lie_derivative2(f, normal, p, h).ok();
            RidgeVertex {
                point: p,
                first,
                second,
                critical: first.is_some_and(|d| d.abs() <= tol),
                concave: second.is_some_and(|d| d < 0.0),
            }
        })
        .collect();
    Ok(RidgeReport { vertices })
}
