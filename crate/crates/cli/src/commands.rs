use lcsk_core::deformation::{
    backward_at_images, sample_indices, verify_backward_relations, verify_incompressibility,
    DeformationField, ResidualStats, SvdPoint,
};
use lcsk_core::dynamics::VelocityField;
use lcsk_core::flowmap::Grid2;
use lcsk_core::geometry::Chart;
use lcsk_core::lcs::{
    generalized_extrema, height_ridge_test, integrate_line_field, relative_residual,
    transfer_rule_residual, verify_strain_stretch_duality, ConstantDirection, CurveKind, Extremum,
    ExtremumKind, GridScalar, MaterialCurve, PointwiseSvd, StrainFields, TransferOptions,
    TransferResidual,
};
use lcsk_core::{Error, Executor, Point2, Vec2};

use crate::config::{ExtremaSet, ExtremumName, Family, RidgeCheck, ScalarName, VectorName};
use crate::error::CliError;
use crate::io::{field_block, write_curves_csv, write_extrema_csv, write_field_csv, write_file};
use crate::pipeline::{ftle_scalar, Context};
use crate::report::{Check, Suite, VerifyReport};

/// Forward FTLE, backward FTLE, singular values and directions.
pub fn ftle(ctx: &Context) -> Result<(), CliError> {
    let (field, health) = ctx.forward()?;
    let out = &ctx.config.output;
    if out.csv {
        write_file(&ctx.out_path("field.csv")?, |w| write_field_csv(w, &field))?;
    }
    if out.binary {
        field_block(&field, &ctx.grid).save(&ctx.out_path("field.lcsk")?)?;
    }
    health.check()
}

/// Integrates one seed. Seeds on degenerate points give a one-vertex curve.
fn seed_curve(
    fields: &StrainFields,
    seed: Point2,
    family: Family,
    ctx: &Context,
) -> Result<MaterialCurve, Error> {
    let (lines, kind) = match family {
        Family::Strainline => (&fields.xi1, CurveKind::Strainline),
        Family::Stretchline => (&fields.xi2, CurveKind::Stretchline),
    };
    let cfg = &ctx.config.lines;
    let mut curve = match integrate_line_field(lines, seed, cfg.step, cfg.max_len) {
        Ok(c) => c,
        Err(Error::Degenerate(_)) => return Ok(MaterialCurve::polyline(vec![seed], kind)),
        Err(e) => return Err(e),
    };
    match curve.classify(fields, &ctx.config.classify.tolerances()) {
        Ok(_) | Err(Error::CurveTooShort(_)) => Ok(curve),
        Err(e) => Err(e),
    }
}

/// Strain- and stretchlines from the configured seeds, classified.
pub fn lines(ctx: &Context) -> Result<Vec<MaterialCurve>, CliError> {
    let seeds = &ctx.config.lines.seeds;
    let extent = ctx.grid.extent();
    for s in seeds {
        if !extent.contains(Point2::new(s.x, s.y)) {
            return Err(CliError::Config(format!(
                "seed ({}, {}) lies outside the grid",
                s.x, s.y
            )));
        }
    }
    let (field, health) = ctx.forward()?;
    let fields = StrainFields::new(&field, ctx.chart())?;
    let curves = ctx
        .pool
        .map_indexed(seeds.len(), |i| {
            let s = &seeds[i];
            seed_curve(&fields, Point2::new(s.x, s.y), s.family, ctx)
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    write_file(&ctx.out_path("curves.csv")?, |w| {
        write_curves_csv(w, &curves)
    })?;
    health.check()?;
    Ok(curves)
}

fn scalar_grid(field: &DeformationField, name: ScalarName) -> Result<GridScalar, CliError> {
    match name {
        ScalarName::FtleF => ftle_scalar(field),
        ScalarName::Sigma1 | ScalarName::Sigma2 => {
            let grid = *field
                .grid()
                .ok_or_else(|| CliError::Numerical("deformation field is not gridded".into()))?;
            let values = if name == ScalarName::Sigma1 {
                field.sigma1()
            } else {
                field.sigma2()
            };
            Ok(GridScalar::new(grid, values)?)
        }
    }
}

fn set_name(set: &ExtremaSet) -> String {
    let scalar = match set.scalar {
        ScalarName::FtleF => "ftle_f",
        ScalarName::Sigma1 => "sigma1",
        ScalarName::Sigma2 => "sigma2",
    };
    let dir = match set.direction {
        VectorName::Xi1 => "xi1",
        VectorName::Xi2 => "xi2",
    };
    let kind = match set.kind {
        ExtremumName::Max => "max",
        ExtremumName::Min => "min",
    };
    format!("{scalar}_{dir}_{kind}")
}

/// Generalized extrema for every configured set, one CSV per set.
pub fn extrema(ctx: &Context) -> Result<Vec<(String, Vec<Extremum>)>, CliError> {
    let (field, health) = ctx.forward()?;
    let fields = StrainFields::new(&field, ctx.chart())?;
    let mut all = Vec::new();
    for set in &ctx.config.extrema.sets {
        let f = scalar_grid(&field, set.scalar)?;
        let v = match set.direction {
            VectorName::Xi1 => &fields.xi1,
            VectorName::Xi2 => &fields.xi2,
        };
        let kind = match set.kind {
            ExtremumName::Max => ExtremumKind::Max,
            ExtremumName::Min => ExtremumKind::Min,
        };
        let found = generalized_extrema(&f, v, &ctx.grid, kind);
        let name = set_name(set);
        write_file(&ctx.out_path(&format!("extrema_{name}.csv"))?, |w| {
            write_extrema_csv(w, &found)
        })?;
        all.push((name, found));
    }
    health.check()?;
    Ok(all)
}

/// Denominator floor of the relative transfer-rule residuals. The compared
/// quantities are derivatives of stretch ratios, which are of order one, so
/// residuals are absolute below unit scale and relative above it.
pub const TRANSFER_FLOOR: f64 = 1.0;

/// Minimum relative singular-value gap of points sampled for the
/// direction-based suites.
const SAMPLE_GAP: f64 = 1e-6;
const TRANSFER_GAP: f64 = 1e-3;

fn stats_check(name: &str, s: &ResidualStats, threshold: f64) -> Check {
    Check::new(name, s.max, threshold)
}

fn incompressibility_suite(ctx: &Context, field: &DeformationField) -> Suite {
    if !ctx.velocity().is_incompressible() {
        return Suite::skipped("incompressibility", "field is not declared incompressible");
    }
    let s = verify_incompressibility(field);
    if s.count == 0 {
        return Suite::skipped("incompressibility", "no valid grid points");
    }
    Suite::new(
        "incompressibility",
        s.count,
        0,
        vec![stats_check(
            "sigma_product",
            &s,
            ctx.config.verify.incompressibility_tol,
        )],
    )
}

fn backward_suites(ctx: &Context, field: &DeformationField) -> Result<Vec<Suite>, CliError> {
    let v = &ctx.config.verify;
    let idx = sample_indices(field, v.samples, SAMPLE_GAP);
    let names = ["backward_relations", "ftle_symmetry", "duality"];
    if idx.is_empty() {
        return Ok(names
            .iter()
            .map(|n| Suite::skipped(n, "no nondegenerate sample points"))
            .collect());
    }
    let problem = ctx.problem();
    let bwd = backward_at_images(field, &problem, ctx.chart(), &idx, &ctx.pool)?;
    let rel = verify_backward_relations(field, &bwd)?;
    let dual = verify_strain_stretch_duality(field, &bwd)?;
    let count = rel.kappa_sigma.count / 2;
    if count == 0 {
        return Ok(names
            .iter()
            .map(|n| Suite::skipped(n, "every sampled pair was masked"))
            .collect());
    }
    Ok(vec![
        Suite::new(
            names[0],
            count,
            rel.masked,
            vec![
                stats_check("kappa_sigma", &rel.kappa_sigma, v.kappa_sigma_tol),
                stats_check("misalignment", &rel.misalignment, v.misalignment_tol),
                stats_check("pullback", &rel.pullback, v.pullback_tol),
            ],
        ),
        Suite::new(
            names[1],
            count,
            rel.masked,
            vec![stats_check("ftle_difference", &rel.ftle, v.ftle_tol)],
        ),
        Suite::new(
            names[2],
            dual.theta1_vs_stretch.count,
            dual.masked,
            vec![
                stats_check("theta1_vs_stretch", &dual.theta1_vs_stretch, v.duality_tol),
                stats_check("theta2_vs_strain", &dual.theta2_vs_strain, v.duality_tol),
            ],
        ),
    ])
}

type Pointwise<'a> = PointwiseSvd<'a, dyn VelocityField + 'a, dyn Chart + 'a>;

/// Transfer-rule residuals at `x1` for both singular pairs.
fn transfer_at(
    fw: &Pointwise<'_>,
    bw: &Pointwise<'_>,
    x1: Point2,
    opts: &TransferOptions,
) -> Vec<TransferResidual> {
    let Ok((x2, svd)) = fw.at(x1) else {
        return Vec::new();
    };
    let df = svd.reconstruct();
    let mut out = Vec::new();
    for major in [false, true] {
        let pick = move |s: &SvdPoint| if major { s.sigma2 } else { s.sigma1 };
        let f = |x: Point2| fw.scalar(x, |s| 1.0 / pick(s));
        // Backward singular values pair with the forward ones in reverse order.
        let g = |y: Point2| bw.scalar(y, |s| if major { s.sigma1 } else { s.sigma2 });
        let sigma = |x: Point2| fw.scalar(x, pick);
        let xi = |x: Point2| fw.right_vector(x, major);
        let theta = |y: Point2| bw.right_vector(y, !major);
        if let Ok(r) = transfer_rule_residual(&f, &g, &sigma, &xi, &theta, x1, x2, df, opts) {
            out.push(r);
        }
    }
    out
}

fn transfer_suite(ctx: &Context, field: &DeformationField) -> Suite {
    let v = &ctx.config.verify;
    let idx = sample_indices(field, v.transfer_samples, TRANSFER_GAP);
    if idx.is_empty() {
        return Suite::skipped("transfer_rule", "no nondegenerate sample points");
    }
    let problem = ctx.problem();
    let bw = PointwiseSvd::new(problem.reversed(), ctx.chart());
    let fw = PointwiseSvd::new(problem, ctx.chart());
    let opts = TransferOptions {
        h: v.transfer_step,
        ..TransferOptions::default()
    };
    let results: Vec<TransferResidual> = ctx
        .pool
        .map_indexed(idx.len(), |i| {
            transfer_at(&fw, &bw, field.site(idx[i]), &opts)
        })
        .into_iter()
        .flatten()
        .collect();
    if results.is_empty() {
        return Suite::skipped("transfer_rule", "every sample point failed to evaluate");
    }
    let first_rel = ResidualStats::from_iter(
        results
            .iter()
            .map(|r| relative_residual(r.lhs1, r.rhs1, TRANSFER_FLOOR)),
    );
    let first_abs = ResidualStats::from_iter(results.iter().map(|r| r.r1));
    let second: Vec<(f64, f64, f64)> = results.iter().filter_map(|r| r.second).collect();
    let second_rel = ResidualStats::from_iter(
        second
            .iter()
            .map(|&(l, r, _)| relative_residual(l, r, TRANSFER_FLOOR)),
    );
    let second_abs = ResidualStats::from_iter(second.iter().map(|s| s.2));
    let masked = 2 * idx.len() - results.len();
    let mut checks = vec![
        stats_check("first_order_relative", &first_rel, v.transfer_first_tol),
        Check::info("first_order_absolute", first_abs.max),
    ];
    if second.is_empty() {
        checks.push(Check::info("second_order_gated", 0.0));
    } else {
        checks.push(stats_check(
            "second_order_relative",
            &second_rel,
            v.transfer_second_tol,
        ));
        checks.push(Check::info("second_order_absolute", second_abs.max));
        checks.push(Check::info("second_order_gated", second.len() as f64));
    }
    Suite::new("transfer_rule", results.len(), masked, checks)
}

/// Axis segments of the nonlinear saddle: the x-axis for |x| ≤ 0.22 and the
/// y-axis for |y| ≤ 0.11 are forward-FTLE ridges.
fn saddle_ridges() -> Vec<RidgeCheck> {
    vec![
        RidgeCheck {
            from: [-0.22, 0.0],
            to: [0.22, 0.0],
            normal: [0.0, 1.0],
        },
        RidgeCheck {
            from: [0.0, -0.11],
            to: [0.0, 0.11],
            normal: [1.0, 0.0],
        },
    ]
}

/// Vertices of a segment at roughly grid spacing, dropping those whose
/// stencil would leave the grid.
fn segment(check: &RidgeCheck, grid: &Grid2, h: f64) -> Vec<Point2> {
    let a = Point2::new(check.from[0], check.from[1]);
    let b = Point2::new(check.to[0], check.to[1]);
    let n = ((a.dist(b) / h).ceil() as usize).max(1);
    let e = grid.extent();
    let margin = 3.0 * h;
    (0..=n)
        .map(|i| a + (b - a) * (i as f64 / n as f64))
        .filter(|p| {
            p.x >= e.x_min + margin
                && p.x <= e.x_max - margin
                && p.y >= e.y_min + margin
                && p.y <= e.y_max - margin
        })
        .collect()
}

fn ridge_suite(ctx: &Context, field: &DeformationField) -> Result<Suite, CliError> {
    let v = &ctx.config.verify;
    let mut checks = v.ridges.clone();
    if v.saddle_ridges && matches!(ctx.field, crate::config::Field::Nonlinear(_)) {
        checks.extend(saddle_ridges());
    }
    if checks.is_empty() {
        return Ok(Suite::skipped(
            "height_ridges",
            "no ridge segments configured",
        ));
    }
    let f = ftle_scalar(field)?;
    let h = ctx.grid.dx().min(ctx.grid.dy());
    let mut out = Vec::new();
    let mut vertices = 0;
    let mut masked = 0;
    for (i, c) in checks.iter().enumerate() {
        let normal = ConstantDirection::new(Vec2::new(c.normal[0], c.normal[1]))
            .map_err(|e| CliError::Config(format!("ridge normal: {e}")))?;
        let pts = segment(c, &ctx.grid, h);
        if pts.is_empty() {
            masked += 1;
            continue;
        }
        let curve = MaterialCurve::polyline(pts, CurveKind::Unspecified);
        let r = height_ridge_test(&f, &curve, &normal, h, v.ridge_first_tol)?;
        vertices += r.vertices.len();
        out.push(Check::new(
            &format!("segment{i}_first"),
            if r.all_critical() {
                r.max_abs_first()
            } else {
                f64::INFINITY
            },
            v.ridge_first_tol,
        ));
        let worst_second = r
            .vertices
            .iter()
            .map(|v| v.second.unwrap_or(f64::INFINITY))
            .fold(f64::NEG_INFINITY, f64::max);
        out.push(Check::negative(&format!("segment{i}_second"), worst_second));
    }
    if out.is_empty() {
        return Ok(Suite::skipped(
            "height_ridges",
            "segments lie outside the grid",
        ));
    }
    Ok(Suite::new("height_ridges", vertices, masked, out))
}

/// Runs every residual suite, writes `verify.json` and fails when any suite
/// fails.
pub fn verify(ctx: &Context) -> Result<VerifyReport, CliError> {
    let (field, health) = ctx.forward()?;
    let mut suites = vec![incompressibility_suite(ctx, &field)];
    suites.extend(backward_suites(ctx, &field)?);
    suites.push(transfer_suite(ctx, &field));
    suites.push(ridge_suite(ctx, &field)?);
    let report = VerifyReport::new(ctx, health, suites);
    std::fs::write(ctx.out_path("verify.json")?, report.to_json())?;
    health.check()?;
    if !report.passed {
        let failed: Vec<&str> = report
            .suites
            .iter()
            .filter(|s| s.status == crate::report::Status::Fail)
            .map(|s| s.name.as_str())
            .collect();
        return Err(CliError::Verification(format!(
            "failed suites: {}",
            failed.join(", ")
        )));
    }
    Ok(report)
}
