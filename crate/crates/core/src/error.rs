use crate::linalg::Point2;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("point ({}, {}) lies outside the chart domain", .0.x, .0.y)]
    OutsideDomain(Point2),
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("matrix is singular")]
    Singular,
    #[error("trajectory left the domain at t = {t} (position ({}, {}))", .at.x, .at.y)]
    LeftDomain { t: f64, at: Point2 },
    #[error("integration exceeded {0} steps")]
    StepLimit(usize),
    #[error("step size underflow at t = {0}")]
    StepUnderflow(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("degenerate singular values at ({}, {})", .0.x, .0.y)]
    Degenerate(Point2),
    #[error("mismatched inputs: {0}")]
    Mismatch(&'static str),
    #[error("stencil point ({}, {}) has no valid field value", .0.x, .0.y)]
    InvalidStencil(Point2),
    #[error("curve has {0} vertices, at least 3 are required")]
    CurveTooShort(usize),
}
