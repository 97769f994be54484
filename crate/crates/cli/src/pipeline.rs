//! Shared setup for every command: field, chart, grid, pool and the forward
//! deformation field.

use std::path::{Path, PathBuf};

use lcsk_core::deformation::DeformationField;
use lcsk_core::dynamics::VelocityField;
use lcsk_core::flowmap::{metric_jacobians, FlowProblem, Grid2};
use lcsk_core::geometry::Chart;
use lcsk_core::lcs::GridScalar;

use crate::config::{AnyChart, Field, RunConfig};
use crate::error::CliError;
use crate::pool::Pool;

/// Invalid grid points above this fraction turn a run into a numerical
/// failure.
pub const MAX_INVALID_FRACTION: f64 = 0.01;

pub struct Context {
    pub config: RunConfig,
    pub field: Field,
    pub chart: AnyChart,
    pub grid: Grid2,
    pub pool: Pool,
}

/// Invalid-point summary of a grid computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Health {
    pub invalid: usize,
    pub total: usize,
}

impl Health {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.invalid as f64 / self.total as f64
        }
    }

    pub fn degraded(&self) -> bool {
        self.fraction() >= MAX_INVALID_FRACTION
    }

    /// `Err` when degraded, after the caller has written its outputs.
    pub fn check(&self) -> Result<(), CliError> {
        if self.degraded() {
            return Err(CliError::Numerical(format!(
                "{} of {} grid points invalid ({:.2}%)",
                self.invalid,
                self.total,
                100.0 * self.fraction()
            )));
        }
        if self.invalid > 0 {
            eprintln!(
                "warning: {} of {} grid points invalid",
                self.invalid, self.total
            );
        }
        Ok(())
    }
}

impl Context {
    pub fn new(config: RunConfig) -> Result<Self, CliError> {
        config.validate()?;
        Ok(Context {
            field: config.build_field()?,
            chart: config.build_chart()?,
            grid: config.build_grid()?,
            pool: Pool::new(config.run.threads)?,
            config,
        })
    }

    pub fn velocity(&self) -> &dyn VelocityField {
        self.field.as_dyn()
    }

    pub fn chart(&self) -> &dyn Chart {
        self.chart.as_dyn()
    }

    pub fn problem(&self) -> FlowProblem<'_, dyn VelocityField + '_> {
        let t = &self.config.time;
        FlowProblem::new(self.velocity(), self.chart().domain(), t.t1, t.t2())
            .with_integrator(self.config.integrator.params())
            .with_fd_step(self.config.deformation.fd_step)
    }

    /// Forward deformation field on the configured grid, Jacobians in
    /// metric coordinates.
    pub fn forward(&self) -> Result<(DeformationField, Health), CliError> {
        let fm = self
            .problem()
            .deformation_gradient_grid(&self.grid, &self.pool)?;
        let fm = metric_jacobians(fm, self.chart())?;
        let field = DeformationField::from_flow_map(fm)?;
        let health = Health {
            invalid: field.len() - field.valid_count(),
            total: field.len(),
        };
        Ok((field, health))
    }

    pub fn out_dir(&self) -> Result<&Path, CliError> {
        let dir = &self.config.output.dir;
        std::fs::create_dir_all(dir)?;
        Ok(dir)
    }

    pub fn out_path(&self, name: &str) -> Result<PathBuf, CliError> {
        Ok(self.out_dir()?.join(name))
    }
}

pub fn ftle_scalar(field: &DeformationField) -> Result<GridScalar, CliError> {
    let grid = *field
        .grid()
        .ok_or_else(|| CliError::Numerical("deformation field is not gridded".into()))?;
    Ok(GridScalar::new(grid, field.ftle_f.clone())?)
}
