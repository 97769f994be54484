#![allow(dead_code)]

use lcsk_core::deformation::DeformationField;
use lcsk_core::dynamics::VelocityField;
use lcsk_core::flowmap::{FlowProblem, Grid2};
use lcsk_core::geometry::Rect;
use lcsk_core::Serial;

pub fn square(half: f64, n: usize) -> Grid2 {
    Grid2::new((-half, half), (-half, half), n, n).unwrap()
}

pub fn field_on<V: VelocityField>(v: &V, t1: f64, t2: f64, grid: &Grid2) -> DeformationField {
    let p = FlowProblem::new(v, Rect::UNBOUNDED, t1, t2);
    DeformationField::from_flow_map(p.deformation_gradient_grid(grid, &Serial).unwrap()).unwrap()
}
