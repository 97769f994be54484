//! Flow maps `F = F_{t₁}^{t₂}` on grids and their deformation gradients.

use alloc::vec::Vec;

use crate::dynamics::{integrate::check_span, solve, IntegratorParams, VelocityField};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::geometry::{metric_representation, Chart, Rect};
use crate::linalg::{Mat2, Point2, Vec2};

/// Default central-difference step for deformation gradients.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Uniform rectilinear grid, stored row-major (x fastest).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2 {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    nx: usize,
    ny: usize,
}

impl Grid2 {
    pub fn new(x_range: (f64, f64), y_range: (f64, f64), nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidParameter(
                "grid needs at least 2 points per axis",
            ));
        }
        let finite = [x_range.0, x_range.1, y_range.0, y_range.1]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("grid extents"));
        }
        if !(x_range.0 < x_range.1 && y_range.0 < y_range.1) {
            return Err(Error::InvalidParameter("grid ranges must be increasing"));
        }
        Ok(Grid2 {
            x_min: x_range.0,
            x_max: x_range.1,
            y_min: y_range.0,
            y_max: y_range.1,
            nx,
            ny,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.x_min, self.x_max)
    }

    pub fn y_range(&self) -> (f64, f64) {
        (self.y_min, self.y_max)
    }

    pub fn extent(&self) -> Rect {
        Rect::new(self.x_min, self.x_max, self.y_min, self.y_max)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.ny - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx - 1 {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx()
        }
    }

    pub fn y(&self, j: usize) -> f64 {
        if j == self.ny - 1 {
            self.y_max
        } else {
            self.y_min + j as f64 * self.dy()
        }
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Inverse of [`Grid2::index`].
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    pub fn point(&self, k: usize) -> Point2 {
        let (i, j) = self.ij(k);
        Point2::new(self.x(i), self.y(j))
    }

    pub fn points(&self) -> impl Iterator<Item = Point2> + '_ {
        (0..self.len()).map(|k| self.point(k))
    }

    /// Fractional grid coordinates `(u, v)` with node `(i, j)` at `(i, j)`.
    pub fn fractional(&self, p: Point2) -> (f64, f64) {
        (
            (p.x - self.x_min) / self.dx(),
            (p.y - self.y_min) / self.dy(),
        )
    }

    /// Nearest node index, or `None` outside the grid extent.
    pub fn nearest(&self, p: Point2) -> Option<usize> {
        if !self.extent().contains(p) {
            return None;
        }
        let (u, v) = self.fractional(p);
        let i = (libm::round(u) as usize).min(self.nx - 1);
        let j = (libm::round(v) as usize).min(self.ny - 1);
        Some(self.index(i, j))
    }
}

/// Where the initial conditions of a flow map live.
#[derive(Debug, Clone, PartialEq)]
pub enum Sites {
    Grid(Grid2),
    Points(Vec<Point2>),
}

impl Sites {
    pub fn len(&self) -> usize {
        match self {
            Sites::Grid(g) => g.len(),
            Sites::Points(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, k: usize) -> Point2 {
        match self {
            Sites::Grid(g) => g.point(k),
            Sites::Points(p) => p[k],
        }
    }

    pub fn grid(&self) -> Option<&Grid2> {
        match self {
            Sites::Grid(g) => Some(g),
            Sites::Points(_) => None,
        }
    }
}

/// Sampled flow map: initial sites, final positions and (optionally)
/// per-site deformation gradients in parameter coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMap {
    pub sites: Sites,
    pub t1: f64,
    pub t2: f64,
    pub final_positions: Vec<Point2>,
    /// Empty for position-only maps.
    pub jacobians: Vec<Mat2>,
    pub valid: Vec<bool>,
}

impl FlowMap {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.t2 - self.t1
    }

    pub fn has_jacobians(&self) -> bool {
        self.jacobians.len() == self.len()
    }

    pub fn invalid_count(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }

    pub fn grid(&self) -> Option<&Grid2> {
        self.sites.grid()
    }
}

const NAN_POINT: Point2 = Point2::new(f64::NAN, f64::NAN);
const NAN_MAT: Mat2 = Mat2::new(f64::NAN, f64::NAN, f64::NAN, f64::NAN);

/// A velocity field together with the domain, time span and numerical
/// settings of one flow-map computation.
#[derive(Debug, Clone, Copy)]
pub struct FlowProblem<'a, V: ?Sized> {
    pub field: &'a V,
    pub domain: Rect,
    pub t1: f64,
    pub t2: f64,
    pub integrator: IntegratorParams,
    pub fd_step: f64,
}

impl<'a, V: VelocityField + ?Sized> FlowProblem<'a, V> {
    pub fn new(field: &'a V, domain: Rect, t1: f64, t2: f64) -> Self {
        FlowProblem {
            field,
            domain,
            t1,
            t2,
            integrator: IntegratorParams::default(),
            fd_step: DEFAULT_FD_STEP,
        }
    }

    pub fn with_integrator(mut self, ip: IntegratorParams) -> Self {
        self.integrator = ip;
        self
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    /// Same field and settings, integrated from `t2` back to `t1`.
    pub fn reversed(&self) -> Self {
        FlowProblem {
            t1: self.t2,
            t2: self.t1,
            ..*self
        }
    }

    pub fn duration(&self) -> f64 {
        self.t2 - self.t1
    }

    pub fn validate(&self) -> Result<()> {
        self.integrator.validate()?;
        check_span(self.field, self.t1, self.t2)?;
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return Err(Error::InvalidParameter(
                "finite-difference step must be positive",
            ));
        }
        Ok(())
    }

    /// Final position of the trajectory through `x` at `t1`.
    pub fn advect(&self, x: Point2) -> Result<Point2> {
        crate::dynamics::integrate_trajectory(
            self.field,
            &self.domain,
            x,
            self.t1,
            self.t2,
            &self.integrator,
        )
    }

    /// Central-difference deformation gradient at `x`:
    /// column i is `(F(x + h eᵢ) − F(x − h eᵢ)) / 2h`.
    ///
    /// The reference trajectory and the four stencil offsets from it are
    /// advanced as one coupled system, so all stencil points share the
    /// adaptive step sequence and the offsets (of size `h`) get their own
    /// absolute tolerance `atol·h`. The quotient then differentiates one
    /// smooth discrete flow map instead of amplifying step-selection noise
    /// by `1/h`.
    pub fn deformation_gradient_fd(&self, x: Point2) -> Result<Mat2> {
        self.linearize(x).map(|(_, j)| j)
    }

    /// [`FlowProblem::deformation_gradient_fd`] together with the final
    /// position of the stencil centre.
    pub fn linearize(&self, x: Point2) -> Result<(Point2, Mat2)> {
        self.validate()?;
        let h = self.fd_step;
        let offsets = [
            Vec2::new(h, 0.0),
            Vec2::new(-h, 0.0),
            Vec2::new(0.0, h),
            Vec2::new(0.0, -h),
        ];
        if !self.domain.contains(x) {
            return Err(Error::OutsideDomain(x));
        }
        let mut y0 = [0.0; 10];
        y0[0] = x.x;
        y0[1] = x.y;
        let mut spacing = [0.0; 2];
        for (k, o) in offsets.iter().enumerate() {
            let p = x + *o;
            if !self.domain.contains(p) {
                return Err(Error::OutsideDomain(p));
            }
            // offsets as actually represented in floating point
            y0[2 + 2 * k] = p.x - x.x;
            y0[3 + 2 * k] = p.y - x.y;
        }
        spacing[0] = y0[2] - y0[4];
        spacing[1] = y0[7] - y0[9];
        let mut weights = [h; 10];
        weights[0] = 1.0;
        weights[1] = 1.0;

        let field = self.field;
        let domain = self.domain;
        let y = solve(
            |t, y: &[f64; 10]| {
                let c = Point2::new(y[0], y[1]);
                let vc = field.velocity(t, c);
                let mut out = [0.0; 10];
                out[0] = vc.x;
                out[1] = vc.y;
                for k in 0..4 {
                    let v = field.velocity(t, c + Vec2::new(y[2 + 2 * k], y[3 + 2 * k]));
                    out[2 + 2 * k] = v.x - vc.x;
                    out[3 + 2 * k] = v.y - vc.y;
                }
                out
            },
            y0,
            self.t1,
            self.t2,
            &self.integrator,
            &weights,
            |y| {
                let c = Point2::new(y[0], y[1]);
                (0..4)
                    .map(|k| c + Vec2::new(y[2 + 2 * k], y[3 + 2 * k]))
                    .find(|p| !domain.contains(*p))
            },
        )?;
        let c1 = Vec2::new(y[2] - y[4], y[3] - y[5]) * (1.0 / spacing[0]);
        let c2 = Vec2::new(y[6] - y[8], y[7] - y[9]) * (1.0 / spacing[1]);
        let jac = checked_jacobian(Mat2::from_cols(c1, c2))?;
        Ok((Point2::new(y[0], y[1]), jac))
    }

    /// Deformation gradient from the variational equation
    /// `d/dt J = ∇u(t, x(t)) J`, `J(t₁) = I`, integrated alongside the
    /// trajectory. Returns the final position and `J(t₂)`.
    pub fn deformation_gradient_variational(&self, x: Point2) -> Result<(Point2, Mat2)> {
        self.validate()?;
        if !self.domain.contains(x) {
            return Err(Error::OutsideDomain(x));
        }
        let field = self.field;
        let domain = self.domain;
        let y = solve(
            |t, y: &[f64; 6]| {
                let p = Point2::new(y[0], y[1]);
                let v = field.velocity(t, p);
                let a = field.gradient(t, p);
                let j = Mat2::new(y[2], y[3], y[4], y[5]);
                let dj = a * j;
                [v.x, v.y, dj.m[0][0], dj.m[0][1], dj.m[1][0], dj.m[1][1]]
            },
            [x.x, x.y, 1.0, 0.0, 0.0, 1.0],
            self.t1,
            self.t2,
            &self.integrator,
            &[1.0; 6],
            |y| {
                let p = Point2::new(y[0], y[1]);
                (!domain.contains(p)).then_some(p)
            },
        )?;
        let jac = checked_jacobian(Mat2::new(y[2], y[3], y[4], y[5]))?;
        Ok((Point2::new(y[0], y[1]), jac))
    }

    /// Advects every grid point; failures only clear the point's valid flag.
    pub fn advect_grid<E: Executor>(&self, grid: &Grid2, exec: &E) -> Result<FlowMap> {
        self.advect_sites(Sites::Grid(*grid), exec)
    }

    pub fn advect_sites<E: Executor>(&self, sites: Sites, exec: &E) -> Result<FlowMap> {
        self.validate()?;
        let out = exec.map_indexed(sites.len(), |k| self.advect(sites.point(k)).ok());
        let valid = out.iter().map(Option::is_some).collect();
        Ok(FlowMap {
            t1: self.t1,
            t2: self.t2,
            final_positions: out.into_iter().map(|p| p.unwrap_or(NAN_POINT)).collect(),
            jacobians: Vec::new(),
            valid,
            sites,
        })
    }

    /// Positions and FD deformation gradients on a grid. Each Jacobian comes
    /// from its own auxiliary stencil, independent of the grid spacing.
    pub fn deformation_gradient_grid<E: Executor>(
        &self,
        grid: &Grid2,
        exec: &E,
    ) -> Result<FlowMap> {
        self.deformation_gradient_sites(Sites::Grid(*grid), exec)
    }

    pub fn deformation_gradient_sites<E: Executor>(
        &self,
        sites: Sites,
        exec: &E,
    ) -> Result<FlowMap> {
        self.validate()?;
        let out = exec.map_indexed(sites.len(), |k| {
            let x = sites.point(k);
            let pos = self.advect(x).ok()?;
            let jac = self.deformation_gradient_fd(x).ok()?;
            Some((pos, jac))
        });
        Ok(assemble(sites, self.t1, self.t2, out))
    }

    /// Like [`FlowProblem::deformation_gradient_sites`] but with the
    /// variational-equation estimator.
    pub fn variational_sites<E: Executor>(&self, sites: Sites, exec: &E) -> Result<FlowMap> {
        self.validate()?;
        let out = exec.map_indexed(sites.len(), |k| {
            self.deformation_gradient_variational(sites.point(k)).ok()
        });
        Ok(assemble(sites, self.t1, self.t2, out))
    }
}

fn assemble(sites: Sites, t1: f64, t2: f64, out: Vec<Option<(Point2, Mat2)>>) -> FlowMap {
    let mut final_positions = Vec::with_capacity(out.len());
    let mut jacobians = Vec::with_capacity(out.len());
    let mut valid = Vec::with_capacity(out.len());
    for r in out {
        let (p, j) = r.unwrap_or((NAN_POINT, NAN_MAT));
        final_positions.push(p);
        jacobians.push(j);
        valid.push(r.is_some());
    }
    FlowMap {
        sites,
        t1,
        t2,
        final_positions,
        jacobians,
        valid,
    }
}

fn checked_jacobian(j: Mat2) -> Result<Mat2> {
    if !j.is_finite() {
        return Err(Error::NonFinite("deformation gradient"));
    }
    if j.det() == 0.0 {
        return Err(Error::Singular);
    }
    Ok(j)
}

/// Replaces every Jacobian by its metric representation
/// `|P′(x₂)| DF(x₁) |P′(x₁)|⁻¹`. Points whose initial or final position falls
/// outside the chart domain are invalidated. Euclidean charts leave the
/// Jacobians untouched.
pub fn metric_jacobians<C: Chart + ?Sized>(mut fm: FlowMap, chart: &C) -> Result<FlowMap> {
    if !fm.has_jacobians() {
        return Err(Error::Mismatch("flow map carries no deformation gradients"));
    }
    for k in 0..fm.len() {
        if !fm.valid[k] {
            continue;
        }
        let x1 = fm.sites.point(k);
        let x2 = fm.final_positions[k];
        match metric_representation(chart, x1, x2, fm.jacobians[k]) {
            Ok(m) => fm.jacobians[k] = m,
            Err(_) => {
                fm.valid[k] = false;
                fm.jacobians[k] = NAN_MAT;
            }
        }
    }
    Ok(fm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{LinearSaddle, NonlinearSaddle, SphereRotation};
    use crate::exec::Serial;
    use crate::geometry::{EuclideanChart, SphereChart};

    fn exact_linear(lambda: f64, t: f64) -> Mat2 {
        Mat2::diag(libm::exp(-lambda * t), libm::exp(lambda * t))
    }

    #[test]
    fn grid_layout() {
        let g = Grid2::new((-1.0, 1.0), (0.0, 2.0), 3, 5).unwrap();
        assert_eq!(g.len(), 15);
        assert_eq!(g.point(0), Point2::new(-1.0, 0.0));
        assert_eq!(g.point(g.index(2, 4)), Point2::new(1.0, 2.0));
        assert_eq!(g.ij(7), (1, 2));
        assert_eq!(g.nearest(Point2::new(0.1, 0.4)), Some(g.index(1, 1)));
        assert!(Grid2::new((0.0, 1.0), (0.0, 1.0), 1, 4).is_err());
        assert!(Grid2::new((1.0, 0.0), (0.0, 1.0), 2, 4).is_err());
    }

    #[test]
    fn zero_time_flow_is_identity() {
        let f = NonlinearSaddle::default();
        let p = FlowProblem::new(&f, Rect::UNBOUNDED, 0.5, 0.5);
        let g = Grid2::new((-1.0, 1.0), (-1.0, 1.0), 5, 5).unwrap();
        let fm = p.deformation_gradient_grid(&g, &Serial).unwrap();
        for k in 0..g.len() {
            assert_eq!(fm.final_positions[k], g.point(k));
            assert!((fm.jacobians[k] - Mat2::IDENTITY).frobenius() < 1e-12);
        }
    }

    #[test]
    fn linear_saddle_positions_and_jacobian() {
        let f = LinearSaddle::new(0.3);
        let p = FlowProblem::new(&f, Rect::UNBOUNDED, 0.0, 1.0);
        let x2 = p.advect(Point2::new(1.0, 1.0)).unwrap();
        assert!((x2.x - 0.740818).abs() < 1e-6 && (x2.y - 1.349859).abs() < 1e-6);

        let exact = exact_linear(0.3, 1.0);
        for x in [
            Point2::new(0.0, 0.0),
            Point2::new(0.7, -0.4),
            Point2::new(-1.0, 1.0),
        ] {
            let j = p.deformation_gradient_fd(x).unwrap();
            assert!((j - exact).frobenius() < 1e-8, "{j:?}");
        }
    }

    #[test]
    fn saddle_origin_jacobian_is_linearization() {
        let f = NonlinearSaddle::default();
        let p = FlowProblem::new(&f, Rect::UNBOUNDED, 0.0, 1.0);
        let j = p.deformation_gradient_fd(Point2::ZERO).unwrap();
        assert!((j - exact_linear(0.3, 1.0)).frobenius() < 1e-6);
        assert_eq!(p.advect(Point2::ZERO).unwrap(), Point2::ZERO);
    }

    #[test]
    fn fd_and_variational_estimators_agree() {
        let f = NonlinearSaddle::default();
        let p = FlowProblem::new(&f, Rect::UNBOUNDED, 0.0, 3.0);
        for x in [
            Point2::new(0.3, 0.2),
            Point2::new(-0.8, 0.5),
            Point2::new(0.05, -0.9),
        ] {
            let fd = p.deformation_gradient_fd(x).unwrap();
            let (pos, var) = p.deformation_gradient_variational(x).unwrap();
            assert!((fd - var).frobenius() < 1e-7 * var.frobenius());
            assert!(pos.dist(p.advect(x).unwrap()) < 1e-9);
        }
    }

    #[test]
    fn linear_jacobian_is_uniform_on_grid() {
        let f = LinearSaddle::new(0.3);
        let p = FlowProblem::new(&f, Rect::UNBOUNDED, 0.0, 1.0);
        let g = Grid2::new((-1.0, 1.0), (-1.0, 1.0), 7, 7).unwrap();
        let fm = p.deformation_gradient_grid(&g, &Serial).unwrap();
        let first = fm.jacobians[0];
        for j in &fm.jacobians {
            assert!((*j - first).frobenius() < 1e-9);
        }
    }

    #[test]
    fn failures_only_invalidate_points() {
        let f = SphereRotation::new(1.0);
        let p = FlowProblem::new(&f, Rect::new(-1.0, 1.0, -1.0, 1.0), 0.0, 0.5);
        let g = Grid2::new((-1.0, 1.0), (-0.5, 0.5), 5, 3).unwrap();
        let fm = p.deformation_gradient_grid(&g, &Serial).unwrap();
        // φ = −1 has a stencil point outside the box, φ ∈ {0.5, 1} leave it
        assert_eq!(fm.invalid_count(), 3 * 3);
        assert!(!fm.valid[g.index(0, 1)]);
        assert!(fm.valid[g.index(1, 1)] && fm.valid[g.index(2, 1)]);
        assert!(!fm.valid[g.index(3, 1)]);
        assert!(fm.final_positions[g.index(4, 1)].x.is_nan());
    }

    #[test]
    fn rotation_parameter_jacobian_is_identity() {
        let f = SphereRotation::new(1.0);
        let chart = SphereChart::new(1.0, 1e-3).unwrap();
        let p = FlowProblem::new(&f, chart.domain(), 0.0, 2.0);
        let g = Grid2::new((-3.0, 3.0), (-1.4, 1.4), 7, 5).unwrap();
        let fm = p.deformation_gradient_grid(&g, &Serial).unwrap();
        assert_eq!(fm.invalid_count(), 0);
        for j in &fm.jacobians {
            assert!((*j - Mat2::IDENTITY).frobenius() < 1e-10);
        }
        let metric = metric_jacobians(fm, &chart).unwrap();
        for j in &metric.jacobians {
            assert!((*j - Mat2::IDENTITY).frobenius() < 1e-10);
        }
    }

    #[test]
    fn metric_jacobians_examples() {
        let fm = FlowMap {
            sites: Sites::Points(alloc::vec![Point2::new(0.0, 0.0), Point2::new(0.0, 0.0)]),
            t1: 0.0,
            t2: 1.0,
            final_positions: alloc::vec![
                Point2::new(0.0, core::f64::consts::FRAC_PI_3),
                Point2::new(0.0, core::f64::consts::FRAC_PI_2 - 1e-4),
            ],
            jacobians: alloc::vec![Mat2::IDENTITY, Mat2::IDENTITY],
            valid: alloc::vec![true, true],
        };
        let e = metric_jacobians(fm.clone(), &EuclideanChart::default()).unwrap();
        assert_eq!(e.jacobians, fm.jacobians);

        let s = SphereChart::new(1.0, 1e-3).unwrap();
        let m = metric_jacobians(fm, &s).unwrap();
        assert!((m.jacobians[0] - Mat2::diag(0.5, 1.0)).frobenius() < 1e-15);
        // image inside the polar band
        assert!(!m.valid[1]);
    }
}
