use libm::pow;

use super::VelocityField;
use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::linalg::Point2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Classical fourth-order Runge–Kutta with the span split into equal
    /// steps no longer than `step`.
    Rk4 { step: f64 },
    /// Dormand–Prince 5(4) with mixed absolute/relative error control.
    DormandPrince { atol: f64, rtol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorParams {
    pub method: Method,
    pub max_steps: usize,
}

impl Default for IntegratorParams {
    fn default() -> Self {
        IntegratorParams {
            method: Method::DormandPrince {
                atol: 1e-10,
                rtol: 1e-10,
            },
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorParams {
    pub fn rk4(step: f64) -> Self {
        IntegratorParams {
            method: Method::Rk4 { step },
            ..Default::default()
        }
    }

    pub fn dopri(atol: f64, rtol: f64) -> Self {
        IntegratorParams {
            method: Method::DormandPrince { atol, rtol },
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        match self.method {
            Method::Rk4 { step } if !pos(step) => {
                return Err(Error::InvalidParameter("RK4 step must be positive"))
            }
            Method::DormandPrince { atol, rtol } if !(pos(atol) && pos(rtol)) => {
                return Err(Error::InvalidParameter(
                    "integrator tolerances must be positive",
                ))
            }
            _ => {}
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter("max_steps must be at least 1"));
        }
        Ok(())
    }
}

/// Integrates `x0` from `t1` to `t2` (either direction) and returns the
/// final position. Leaving `domain` is an error, never clamped.
pub fn integrate_trajectory<V: VelocityField + ?Sized>(
    field: &V,
    domain: &Rect,
    x0: Point2,
    t1: f64,
    t2: f64,
    params: &IntegratorParams,
) -> Result<Point2> {
    check_span(field, t1, t2)?;
    if !domain.contains(x0) {
        return Err(Error::OutsideDomain(x0));
    }
    let y = solve(
        |t, y: &[f64; 2]| {
            let v = field.velocity(t, Point2::new(y[0], y[1]));
            [v.x, v.y]
        },
        [x0.x, x0.y],
        t1,
        t2,
        params,
        &[1.0; 2],
        |y| {
            let p = Point2::new(y[0], y[1]);
            (!domain.contains(p)).then_some(p)
        },
    )?;
    Ok(Point2::new(y[0], y[1]))
}

pub(crate) fn check_span<V: VelocityField + ?Sized>(field: &V, t1: f64, t2: f64) -> Result<()> {
    if !(t1.is_finite() && t2.is_finite()) {
        return Err(Error::NonFinite("time span"));
    }
    let (lo, hi) = field.time_domain();
    if t1 < lo || t1 > hi || t2 < lo || t2 > hi {
        return Err(Error::InvalidParameter(
            "integration span outside the field's time domain",
        ));
    }
    Ok(())
}

/// Generic explicit integrator on `[f64; N]` states.
///
/// `atol_weights` scales the absolute tolerance per component (use 1 for
/// ordinary coordinates, smaller values for components that are small by
/// construction such as stencil offsets). `exit` inspects every accepted
/// state and returns the offending point when the state has left the
/// admissible region.
pub fn solve<const N: usize, R, X>(
    rhs: R,
    y0: [f64; N],
    t1: f64,
    t2: f64,
    params: &IntegratorParams,
    atol_weights: &[f64; N],
    exit: X,
) -> Result<[f64; N]>
where
    R: Fn(f64, &[f64; N]) -> [f64; N],
    X: Fn(&[f64; N]) -> Option<Point2>,
{
    params.validate()?;
    if t2 == t1 {
        return Ok(y0);
    }
    let y = match params.method {
        Method::Rk4 { step } => rk4(&rhs, y0, t1, t2, step, params.max_steps, &exit)?,
        Method::DormandPrince { atol, rtol } => dopri(
            &rhs,
            y0,
            t1,
            t2,
            atol,
            rtol,
            atol_weights,
            params.max_steps,
            &exit,
        )?,
    };
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("trajectory"));
    }
    Ok(y)
}

#[inline]
fn axpy<const N: usize>(y: &[f64; N], terms: &[(f64, &[f64; N])], h: f64) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        if *c != 0.0 {
            for i in 0..N {
                out[i] += h * c * k[i];
            }
        }
    }
    out
}

fn rk4<const N: usize>(
    rhs: &impl Fn(f64, &[f64; N]) -> [f64; N],
    mut y: [f64; N],
    t1: f64,
    t2: f64,
    step: f64,
    max_steps: usize,
    exit: &impl Fn(&[f64; N]) -> Option<Point2>,
) -> Result<[f64; N]> {
    let span = t2 - t1;
    let n = libm::ceil(span.abs() / step).max(1.0);
    if n > max_steps as f64 {
        return Err(Error::StepLimit(max_steps));
    }
    let n = n as usize;
    let h = span / n as f64;
    for i in 0..n {
        let t = t1 + i as f64 * h;
        let k1 = rhs(t, &y);
        let k2 = rhs(t + 0.5 * h, &axpy(&y, &[(0.5, &k1)], h));
        let k3 = rhs(t + 0.5 * h, &axpy(&y, &[(0.5, &k2)], h));
        let k4 = rhs(t + h, &axpy(&y, &[(1.0, &k3)], h));
        y = axpy(
            &y,
            &[
                (1.0 / 6.0, &k1),
                (1.0 / 3.0, &k2),
                (1.0 / 3.0, &k3),
                (1.0 / 6.0, &k4),
            ],
            h,
        );
        if let Some(at) = exit(&y) {
            return Err(Error::LeftDomain { t: t + h, at });
        }
    }
    Ok(y)
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the fifth- and fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

#[allow(clippy::too_many_arguments)]
fn dopri<const N: usize>(
    rhs: &impl Fn(f64, &[f64; N]) -> [f64; N],
    mut y: [f64; N],
    t1: f64,
    t2: f64,
    atol: f64,
    rtol: f64,
    atol_weights: &[f64; N],
    max_steps: usize,
    exit: &impl Fn(&[f64; N]) -> Option<Point2>,
) -> Result<[f64; N]> {
    let dir = if t2 > t1 { 1.0 } else { -1.0 };
    let span = (t2 - t1).abs();
    let mut t = t1;
    let mut h = dir * span.min(1e-2);
    let mut k1 = rhs(t, &y);
    let mut rejected_last = false;

    for _ in 0..max_steps {
        let remaining = t2 - t;
        let last = (h - remaining) * dir >= 0.0;
        if last {
            h = remaining;
        }
        if h.abs() <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepUnderflow(t));
        }

        let k2 = rhs(t + C2 * h, &axpy(&y, &[(A21, &k1)], h));
        let k3 = rhs(t + C3 * h, &axpy(&y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = rhs(
            t + C4 * h,
            &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h),
        );
        let k5 = rhs(
            t + C5 * h,
            &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h),
        );
        let k6 = rhs(
            t + h,
            &axpy(
                &y,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                h,
            ),
        );
        let y_new = axpy(
            &y,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
            h,
        );
        let k7 = rhs(t + h, &y_new);

        let mut err: f64 = 0.0;
        for i in 0..N {
            let e =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = atol * atol_weights[i] + rtol * y[i].abs().max(y_new[i].abs());
            err = err.max(e.abs() / scale);
        }
        if !err.is_finite() {
            return Err(Error::NonFinite("integrator error estimate"));
        }

        if err <= 1.0 {
            t = if last { t2 } else { t + h };
            y = y_new;
            k1 = k7;
            if let Some(at) = exit(&y) {
                return Err(Error::LeftDomain { t, at });
            }
            if last {
                return Ok(y);
            }
            let mut factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * pow(err, -0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            if rejected_last {
                factor = factor.min(1.0);
            }
            h *= factor;
            rejected_last = false;
        } else {
            h *= (SAFETY * pow(err, -0.2)).clamp(MIN_FACTOR, 1.0);
            rejected_last = true;
        }
    }
    Err(Error::StepLimit(max_steps))
}
