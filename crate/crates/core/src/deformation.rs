//! Stretch analysis of deformation gradients.
//!
//! Index convention follows finite-time Lyapunov practice: `σ₁ ≤ σ₂`, so
//! `σ₂ = ‖DF‖` drives the forward FTLE. Right-singular vectors `ξᵢ` live at
//! the initial point `x₁`, left-singular vectors `θᵢ = DF ξᵢ / σᵢ` at the
//! image `x₂ = F(x₁)`.
//!
//! A single forward computation also yields the backward stretch data:
//! `DF⁻¹ = Ξ Σ⁻¹ Θᵀ`, so the backward singular values at `x₂` are
//! `κ₂ = 1/σ₁`, `κ₁ = 1/σ₂` and the backward FTLE at the image is
//! `−log(σ₁)/T`.

use alloc::vec;
use alloc::vec::Vec;

use libm::{atan2, cos, hypot, log, sin};

use crate::dynamics::VelocityField;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::flowmap::{metric_jacobians, FlowMap, FlowProblem, Grid2, Sites};
use crate::geometry::Chart;
use crate::linalg::{Mat2, Point2, Sym2, Vec2};

/// Relative singular-value gap below which a point is flagged degenerate.
pub const GAP_TOL_REL: f64 = 1e-9;

const TIE_EPS: f64 = 1e-14;

/// Closed-form SVD of one 2×2 deformation gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdPoint {
    pub sigma1: f64,
    pub sigma2: f64,
    pub xi1: Vec2,
    pub xi2: Vec2,
    pub theta1: Vec2,
    pub theta2: Vec2,
    pub degenerate: bool,
}

impl SvdPoint {
    /// `Θ Σ Ξᵀ`.
    pub fn reconstruct(&self) -> Mat2 {
        let theta = Mat2::from_cols(self.theta1, self.theta2);
        let xi = Mat2::from_cols(self.xi1, self.xi2);
        theta * Mat2::diag(self.sigma1, self.sigma2) * xi.transpose()
    }

    pub fn lambda1(&self) -> f64 {
        self.sigma1 * self.sigma1
    }

    pub fn lambda2(&self) -> f64 {
        self.sigma2 * self.sigma2
    }

    /// Largest backward stretch at the image, `1/σ₁`.
    pub fn kappa2(&self) -> f64 {
        1.0 / self.sigma1
    }

    /// Smallest backward stretch at the image, `1/σ₂`.
    pub fn kappa1(&self) -> f64 {
        1.0 / self.sigma2
    }

    /// Relative gap `(σ₂ − σ₁)/σ₂`.
    pub fn relative_gap(&self) -> f64 {
        (self.sigma2 - self.sigma1) / self.sigma2
    }
}

/// SVD with the default degeneracy tolerance.
pub fn svd2(m: Mat2) -> Result<SvdPoint> {
    svd2_with_gap(m, GAP_TOL_REL)
}

/// Closed-form SVD of a nonsingular 2×2 matrix.
///
/// Writes `m = R(α) · diag(Q+R, Q−R) · R(β)` with rotations `R`, which gives
/// `σ₂ = Q+R` and `ξ₂ = (cos β, −sin β)` without iteration. `σ₁` is taken as
/// `|det m| / σ₂` to keep full relative accuracy for strongly contracting
/// maps. Signs: `ξ₂` has a nonnegative first component (nonnegative second
/// on ties), `ξ₁` is `ξ₂` rotated by −90°, and `θᵢ = m ξᵢ / σᵢ`.
pub fn svd2_with_gap(m: Mat2, gap_rel: f64) -> Result<SvdPoint> {
    if !m.is_finite() {
        return Err(Error::NonFinite("matrix for SVD"));
    }
    let det = m.det();
    if det == 0.0 {
        return Err(Error::Singular);
    }
    let [[a, b], [c, d]] = m.m;
    let e = 0.5 * (a + d);
    let f = 0.5 * (a - d);
    let g = 0.5 * (c + b);
    let h = 0.5 * (c - b);
    let q = hypot(e, h);
    let r = hypot(f, g);
    let sigma2 = q + r;
    let sigma1 = (det.abs() / sigma2).min(sigma2);
    let beta = 0.5 * (atan2(h, e) - atan2(g, f));

    let mut xi2 = Vec2::new(cos(beta), -sin(beta));
    if xi2.x < -TIE_EPS || (xi2.x.abs() <= TIE_EPS && xi2.y < 0.0) {
        xi2 = -xi2;
    }
    let xi1 = xi2.perp_cw();
    let theta2 = (m.mul_vec(xi2) * (1.0 / sigma2))
        .normalized()
        .ok_or(Error::NonFinite("left singular vector"))?;
    let theta1 = theta2.perp_cw() * det.signum();

    let out = SvdPoint {
        sigma1,
        sigma2,
        xi1,
        xi2,
        theta1,
        theta2,
        degenerate: sigma2 - sigma1 < gap_rel * sigma2,
    };
    if !(sigma1 > 0.0 && sigma2.is_finite()) {
        return Err(Error::NonFinite("singular values"));
    }
    Ok(out)
}

/// Right and left Cauchy–Green tensors `C = DFᵀDF`, `B = DF DFᵀ`.
pub fn cauchy_green(df: Mat2) -> Result<(Sym2, Sym2)> {
    if !df.is_finite() {
        return Err(Error::NonFinite("deformation gradient"));
    }
    if df.det() == 0.0 {
        return Err(Error::Singular);
    }
    Ok((df.gram(), df.outer_gram()))
}

fn check_rate_inputs(sigma: f64, duration: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter("stretch ratio must be positive"));
    }
    if duration == 0.0 || !duration.is_finite() {
        return Err(Error::InvalidParameter("integration time must be nonzero"));
    }
    Ok(())
}

/// Forward FTLE `log(σ₂)/|T|`.
///
/// The magnitude of `T` is used so flow maps computed backward in time
/// produce rates with the usual sign.
pub fn ftle_forward(sigma2: f64, duration: f64) -> Result<f64> {
    check_rate_inputs(sigma2, duration)?;
    Ok(log(sigma2) / duration.abs())
}

/// Backward FTLE at the image point, `−log(σ₁)/|T|`.
pub fn ftle_backward_from_forward(sigma1: f64, duration: f64) -> Result<f64> {
    check_rate_inputs(sigma1, duration)?;
    Ok(-log(sigma1) / duration.abs())
}

/// Per-site SVD data of a flow map.
#[derive(Debug, Clone)]
pub struct DeformationField {
    pub flow: FlowMap,
    /// `None` where the flow map is invalid or the SVD failed.
    pub svd: Vec<Option<SvdPoint>>,
    /// Forward FTLE at the initial sites; NaN where invalid.
    pub ftle_f: Vec<f64>,
    /// Backward FTLE attached to `flow.final_positions`; NaN where invalid.
    pub ftle_b: Vec<f64>,
}

impl DeformationField {
    /// Runs the SVD pipeline on a flow map whose Jacobians are already in
    /// metric coordinates (see [`crate::flowmap::metric_jacobians`]).
    pub fn from_flow_map(mut flow: FlowMap) -> Result<Self> {
        if !flow.has_jacobians() {
            return Err(Error::Mismatch("flow map carries no deformation gradients"));
        }
        let duration = flow.duration();
        if duration == 0.0 || !duration.is_finite() {
            // SVD data is still well defined for a zero-time map, only rates are not.
            let svd: Vec<_> = (0..flow.len())
                .map(|k| {
                    flow.valid[k]
                        .then(|| svd2(flow.jacobians[k]).ok())
                        .flatten()
                })
                .collect();
            let n = flow.len();
            for (k, s) in svd.iter().enumerate() {
                flow.valid[k] &= s.is_some();
            }
            return Ok(DeformationField {
                flow,
                svd,
                ftle_f: vec![f64::NAN; n],
                ftle_b: vec![f64::NAN; n],
            });
        }
        let n = flow.len();
        let mut svd = Vec::with_capacity(n);
        let mut ftle_f = Vec::with_capacity(n);
        let mut ftle_b = Vec::with_capacity(n);
        for k in 0..n {
            let s = if flow.valid[k] {
                svd2(flow.jacobians[k]).ok()
            } else {
                None
            };
            flow.valid[k] = s.is_some();
            match s {
                Some(p) => {
                    ftle_f.push(ftle_forward(p.sigma2, duration)?);
                    ftle_b.push(ftle_backward_from_forward(p.sigma1, duration)?);
                }
                None => {
                    ftle_f.push(f64::NAN);
                    ftle_b.push(f64::NAN);
                }
            }
            svd.push(s);
        }
        Ok(DeformationField {
            flow,
            svd,
            ftle_f,
            ftle_b,
        })
    }

    pub fn len(&self) -> usize {
        self.svd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.svd.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.flow.duration()
    }

    pub fn grid(&self) -> Option<&Grid2> {
        self.flow.grid()
    }

    pub fn site(&self, k: usize) -> Point2 {
        self.flow.sites.point(k)
    }

    pub fn image(&self, k: usize) -> Point2 {
        self.flow.final_positions[k]
    }

    /// Per-site scalar derived from the SVD, NaN where invalid.
    pub fn scalar(&self, f: impl Fn(&SvdPoint) -> f64) -> Vec<f64> {
        self.svd
            .iter()
            .map(|s| s.as_ref().map_or(f64::NAN, &f))
            .collect()
    }

    pub fn sigma1(&self) -> Vec<f64> {
        self.scalar(|s| s.sigma1)
    }

    pub fn sigma2(&self) -> Vec<f64> {
        self.scalar(|s| s.sigma2)
    }

    pub fn lambda1(&self) -> Vec<f64> {
        self.scalar(SvdPoint::lambda1)
    }

    pub fn lambda2(&self) -> Vec<f64> {
        self.scalar(SvdPoint::lambda2)
    }

    pub fn kappa1(&self) -> Vec<f64> {
        self.scalar(SvdPoint::kappa1)
    }

    pub fn kappa2(&self) -> Vec<f64> {
        self.scalar(SvdPoint::kappa2)
    }

    pub fn valid_count(&self) -> usize {
        self.svd.iter().filter(|s| s.is_some()).count()
    }

    /// Right Cauchy–Green tensor per site (metric coordinates).
    pub fn right_cauchy_green(&self, k: usize) -> Option<Sym2> {
        self.svd[k].map(|_| self.flow.jacobians[k].gram())
    }

    /// Resamples the scattered backward FTLE onto a regular grid by nearest
    /// image point. Nodes farther than one cell diagonal from every image
    /// point are NaN.
    pub fn resample_backward_nearest(&self, target: &Grid2) -> Vec<f64> {
        let nx = target.nx();
        let ny = target.ny();
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); nx * ny];
        for k in 0..self.len() {
            if self.ftle_b[k].is_nan() {
                continue;
            }
            if let Some(node) = target.nearest(self.image(k)) {
                buckets[node].push(k);
            }
        }
        let reach = hypot(target.dx(), target.dy());
        (0..target.len())
            .map(|node| {
                let p = target.point(node);
                let (i, j) = target.ij(node);
                let mut best = (f64::INFINITY, f64::NAN);
                for jj in j.saturating_sub(1)..=(j + 1).min(ny - 1) {
                    for ii in i.saturating_sub(1)..=(i + 1).min(nx - 1) {
                        for &k in &buckets[target.index(ii, jj)] {
                            let d = self.image(k).dist(p);
                            if d < best.0 {
                                best = (d, self.ftle_b[k]);
                            }
                        }
                    }
                }
                if best.0 <= reach {
                    best.1
                } else {
                    f64::NAN
                }
            })
            .collect()
    }
}

/// Running max/mean of nonnegative residuals.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResidualStats {
    pub max: f64,
    pub mean: f64,
    pub count: usize,
}

impl ResidualStats {
    pub fn push(&mut self, r: f64) {
        let r = r.abs();
        self.count += 1;
        self.mean += (r - self.mean) / self.count as f64;
        if r > self.max || r.is_nan() {
            self.max = r;
        }
    }
}

impl FromIterator<f64> for ResidualStats {
    fn from_iter<I: IntoIterator<Item = f64>>(it: I) -> Self {
        let mut s = ResidualStats::default();
        for r in it {
            s.push(r);
        }
        s
    }
}

/// `|σ₁σ₂ − 1|` over valid sites (zero for volume-preserving flows).
pub fn verify_incompressibility(field: &DeformationField) -> ResidualStats {
    ResidualStats::from_iter(
        field
            .svd
            .iter()
            .flatten()
            .map(|s| s.sigma1 * s.sigma2 - 1.0),
    )
}

/// Up to `count` valid sites with relative singular-value gap of at least
/// `min_gap`, picked at a uniform stride through the site ordering.
pub fn sample_indices(field: &DeformationField, count: usize, min_gap: f64) -> Vec<usize> {
    let eligible: Vec<usize> = (0..field.len())
        .filter(|&k| field.svd[k].is_some_and(|s| !s.degenerate && s.relative_gap() >= min_gap))
        .collect();
    if count == 0 || eligible.is_empty() {
        return Vec::new();
    }
    if eligible.len() <= count {
        return eligible;
    }
    (0..count)
        .map(|i| eligible[i * eligible.len() / count])
        .collect()
}

/// Independent backward computation started at forward image points.
#[derive(Debug, Clone)]
pub struct BackwardSample {
    /// Forward site index for each backward site.
    pub indices: Vec<usize>,
    pub field: DeformationField,
}

/// Advects the images of `indices` from `t₂` back to `t₁` and runs the full
/// deformation pipeline on them. `problem` is the forward problem; it is
/// reversed internally. Backward Jacobians are made metric with `chart`.
pub fn backward_at_images<V, C, E>(
    forward: &DeformationField,
    problem: &FlowProblem<'_, V>,
    chart: &C,
    indices: &[usize],
    exec: &E,
) -> Result<BackwardSample>
where
    V: VelocityField + ?Sized,
    C: Chart + ?Sized,
    E: Executor,
{
    let images = indices.iter().map(|&k| forward.image(k)).collect();
    let back = problem.reversed();
    let fm = back.deformation_gradient_sites(Sites::Points(images), exec)?;
    let fm = metric_jacobians(fm, chart)?;
    Ok(BackwardSample {
        indices: indices.to_vec(),
        field: DeformationField::from_flow_map(fm)?,
    })
}

/// Residuals of the forward/backward stretch relations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BackwardReport {
    /// `|κ₂σ₁ − 1|` and `|κ₁σ₂ − 1|`.
    pub kappa_sigma: ResidualStats,
    /// `1 − |⟨θⱼ, ξᵇ_{n+1−j}⟩|`: forward left-singular vectors against
    /// backward principal directions at the image.
    pub misalignment: ResidualStats,
    /// `‖DF⁻¹θⱼ − σⱼ⁻¹ξⱼ‖` with `DF⁻¹` the independently computed backward
    /// Jacobian.
    pub pullback: ResidualStats,
    /// `|Λᵇ(x₂) − Λᶠ(x₁)|` with `Λᵇ` from the backward run.
    pub ftle: ResidualStats,
    /// Samples skipped because either side was invalid or degenerate.
    pub masked: usize,
}

fn check_pairing(fwd: &DeformationField, bwd: &BackwardSample) -> Result<()> {
    if bwd.indices.len() != bwd.field.len() {
        return Err(Error::Mismatch("backward sample index count"));
    }
    for (i, &k) in bwd.indices.iter().enumerate() {
        if k >= fwd.len() {
            return Err(Error::Mismatch("backward sample index out of range"));
        }
        let same = bwd.field.site(i) == fwd.image(k);
        let both_nan = bwd.field.site(i).x.is_nan() && fwd.image(k).x.is_nan();
        if !(same || both_nan) {
            return Err(Error::Mismatch("backward sites are not the forward images"));
        }
    }
    Ok(())
}

/// Forward site, forward SVD, backward site, backward SVD.
type Pair = (usize, SvdPoint, usize, SvdPoint);

/// Pairs each forward sample with its backward counterpart, skipping invalid
/// or degenerate ones.
pub(crate) fn paired<'a>(
    fwd: &'a DeformationField,
    bwd: &'a BackwardSample,
) -> Result<(Vec<Pair>, usize)> {
    check_pairing(fwd, bwd)?;
    let mut pairs = Vec::new();
    let mut masked = 0;
    for (i, &k) in bwd.indices.iter().enumerate() {
        match (fwd.svd[k], bwd.field.svd[i]) {
            (Some(f), Some(b)) if !f.degenerate && !b.degenerate => pairs.push((k, f, i, b)),
            _ => masked += 1,
        }
    }
    Ok((pairs, masked))
}

pub fn verify_backward_relations(
    fwd: &DeformationField,
    bwd: &BackwardSample,
) -> Result<BackwardReport> {
    let (pairs, masked) = paired(fwd, bwd)?;
    let mut rep = BackwardReport {
        masked,
        ..Default::default()
    };
    for (k, f, i, b) in pairs {
        rep.kappa_sigma.push(b.sigma2 * f.sigma1 - 1.0);
        rep.kappa_sigma.push(b.sigma1 * f.sigma2 - 1.0);
        rep.misalignment.push(1.0 - f.theta1.dot(b.xi2).abs());
        rep.misalignment.push(1.0 - f.theta2.dot(b.xi1).abs());
        let dfinv = bwd.field.flow.jacobians[i];
        rep.pullback
            .push((dfinv.mul_vec(f.theta1) - f.xi1 * (1.0 / f.sigma1)).norm());
        rep.pullback
            .push((dfinv.mul_vec(f.theta2) - f.xi2 * (1.0 / f.sigma2)).norm());
        rep.ftle.push(bwd.field.ftle_f[i] - fwd.ftle_f[k]);
    }
    Ok(rep)
}
