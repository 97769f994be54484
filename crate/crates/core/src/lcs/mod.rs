//! Lagrangian coherent structures: Lie derivatives along singular-vector
//! fields, generalized extrema, strainline/stretchline integration and the
//! variational classification of material curves.

mod curves;
mod fields;
mod lie;

pub use curves::{
    classify_variational, integrate_line_field, reversed, verify_strain_stretch_duality,
    Classification, ClassificationReport, CurveKind, DualityReport, MaterialCurve, StopReason,
    StrainFields, Tolerances, VertexDiagnostics,
};
pub use fields::{
    align, ConstantDirection, DirectionField, DirectionSource, GridScalar, LineField, PointwiseSvd,
    ScalarField,
};
pub use lie::{
    directional, directional2, generalized_extrema, height_ridge_test, lie_derivative,
    lie_derivative2, lie_derivative2_nested, relative_residual, transfer_rule_residual, Extremum,
    ExtremumKind, RidgeReport, RidgeVertex, TransferOptions, TransferResidual,
};
