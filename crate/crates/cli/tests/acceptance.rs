//! Acceptance criteria AC1 to AC10. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use lcsk::commands;
use lcsk::report::{Status, VerifyReport};
use lcsk::{Context, RunConfig};
use lcsk_core::deformation::{svd2, verify_incompressibility};
use lcsk_core::dynamics::{LinearSaddle, NonlinearSaddle, SphereRotation, VelocityField};
use lcsk_core::flowmap::FlowProblem;
use lcsk_core::geometry::{Chart, Rect, SphereChart, DEFAULT_POLE_CLAMP};
use lcsk_core::lcs::{
    height_ridge_test, Classification, ConstantDirection, CurveKind, GridScalar, MaterialCurve,
};
use lcsk_core::{Mat2, Point2, Sym2, Vec2};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn context(overrides: &[&str], out: &std::path::Path) -> Context {
    let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    let mut cfg = RunConfig::load(None, &overrides).expect("valid configuration");
    cfg.output.dir = out.to_path_buf();
    Context::new(cfg).expect("context")
}

fn verify_report(ctx: &Context) -> VerifyReport {
    match commands::verify(ctx) {
        Ok(r) => r,
        Err(_) => {
            let json = std::fs::read_to_string(ctx.config.output.dir.join("verify.json"))
                .expect("verify.json written");
            serde_json::from_str(&json).expect("report parses")
        }
    }
}

fn value(report: &VerifyReport, suite: &str, check: &str) -> f64 {
    report
        .suite(suite)
        .and_then(|s| s.check(check))
        .and_then(|c| c.value)
        .unwrap_or(f64::INFINITY)
}

fn samples(report: &VerifyReport, suite: &str) -> usize {
    report.suite(suite).map_or(0, |s| s.samples)
}

fn ac1() -> Outcome {
    let start = Instant::now();
    let saddle = NonlinearSaddle::default();
    let mut values = Vec::new();
    for t in [1.0, 20.0] {
        let p = FlowProblem::new(&saddle, Rect::UNBOUNDED, 0.0, t);
        let (_, df) = p.linearize(Point2::ZERO).expect("origin linearizes");
        let s = svd2(df).expect("svd");
        values.push(s.sigma2.ln() / t);
    }
    let elapsed = start.elapsed();
    let pass = values.iter().all(|v| (v - 0.3).abs() <= 1e-3) && elapsed < Duration::from_secs(1);
    outcome(
        pass,
        format!(
            "origin FTLE T=1 {:.6}, T=20 {:.6} (0.3 +- 1e-3) in {:.2?} (< 1 s)",
            values[0], values[1], elapsed
        ),
    )
}

fn ac2(dir: &std::path::Path) -> Outcome {
    let start = Instant::now();
    let (field, _) = context(&[], dir).forward().expect("forward field");
    let saddle = verify_incompressibility(&field);
    let elapsed = start.elapsed();
    let (lin, _) = context(&["field.name=linear_saddle", "field.lambda=0.3"], dir)
        .forward()
        .expect("linear field");
    let linear = verify_incompressibility(&lin);
    let pass = saddle.count == 201 * 201
        && saddle.max <= 1e-3
        && linear.max <= 1e-8
        && elapsed < Duration::from_secs(30);
    outcome(
        pass,
        format!(
            "max |s1 s2 - 1| saddle {:.2e} (<= 1e-3, {} points, {:.1?} < 30 s), linear {:.2e} (<= 1e-8)",
            saddle.max, saddle.count, elapsed, linear.max
        ),
    )
}

fn ac3(report: &VerifyReport) -> Outcome {
    let d = value(report, "ftle_symmetry", "ftle_difference");
    let n = samples(report, "ftle_symmetry");
    outcome(
        n == 100 && d <= 2e-3,
        format!("max |backward - forward FTLE| {d:.2e} (<= 2e-3) at {n} image points"),
    )
}

fn ac4(report: &VerifyReport, linear: &VerifyReport) -> Outcome {
    let ks = value(report, "backward_relations", "kappa_sigma");
    let mis = value(report, "backward_relations", "misalignment");
    let n = samples(report, "backward_relations");
    let lks = value(linear, "backward_relations", "kappa_sigma");
    let lmis = value(linear, "backward_relations", "misalignment");
    let pass = n == 100 && ks <= 1e-3 && mis <= 1e-3 && lks <= 1e-7 && lmis <= 1e-7;
    outcome(
        pass,
        format!(
            "kappa-sigma {ks:.2e}, misalignment {mis:.2e} (<= 1e-3, {n} points); linear {lks:.2e}, {lmis:.2e} (<= 1e-7)"
        ),
    )
}

fn ac5(report: &VerifyReport) -> Outcome {
    let r1 = value(report, "transfer_rule", "first_order_relative");
    let r2 = value(report, "transfer_rule", "second_order_relative");
    let gated = value(report, "transfer_rule", "second_order_gated");
    // Both singular pairs are checked at every point.
    let points = samples(report, "transfer_rule") / 2;
    let pass = points == 20 && r1 <= 1e-3 && r2 <= 1e-2 && gated >= 1.0;
    outcome(
        pass,
        format!(
            "r1 {r1:.2e} (<= 1e-3) at {points} points, r2 {r2:.2e} (<= 1e-2) at {gated} gated pairs"
        ),
    )
}

fn ridge(f: &GridScalar, from: Point2, to: Point2, normal: Vec2, h: f64) -> (f64, f64) {
    let n = (from.dist(to) / h).round() as usize;
    let pts = (0..=n)
        .map(|i| from + (to - from) * (i as f64 / n as f64))
        .collect();
    let curve = MaterialCurve::polyline(pts, CurveKind::Unspecified);
    let dir = ConstantDirection::new(normal).expect("unit normal");
    let r = height_ridge_test(f, &curve, &dir, h, 5e-4).expect("ridge test");
    let worst_second = r
        .vertices
        .iter()
        .map(|v| v.second.unwrap_or(f64::INFINITY))
        .fold(f64::NEG_INFINITY, f64::max);
    let first = if r.all_critical() {
        r.max_abs_first()
    } else {
        f64::INFINITY
    };
    (first, worst_second)
}

fn ac6(dir: &std::path::Path) -> Outcome {
    let h = 0.01;
    let ctx = context(&[], dir);
    let (t1, _) = ctx.forward().expect("T=1 field");
    let f1 = GridScalar::new(ctx.grid, t1.ftle_f.clone()).expect("grid scalar");
    let (first, second) = ridge(
        &f1,
        Point2::new(-0.22, 0.0),
        Point2::new(0.22, 0.0),
        Vec2::new(0.0, 1.0),
        h,
    );

    let start = Instant::now();
    let ctx = context(&["time.duration=20"], dir);
    let (t20, _) = ctx.forward().expect("T=20 field");
    let elapsed = start.elapsed();
    let f20 = GridScalar::new(ctx.grid, t20.ftle_f.clone()).expect("grid scalar");
    let (_, second20) = ridge(
        &f20,
        Point2::new(0.0, -0.11),
        Point2::new(0.0, 0.11),
        Vec2::new(1.0, 0.0),
        h,
    );
    let pass =
        first <= 5e-4 && second < 0.0 && second20 < 0.0 && elapsed < Duration::from_secs(300);
    outcome(
        pass,
        format!(
            "T=1 x-axis |x|<=0.22: max |L| {first:.2e} (<= 5e-4), max L2 {second:.2e} (< 0); \
             T=20 y-axis |y|<=0.11: max L2 {second20:.2e} (< 0), grid in {elapsed:.1?} (< 5 min)"
        ),
    )
}

fn ac7(dir: &std::path::Path) -> Outcome {
    let ctx = context(&[], dir);
    let curves = commands::lines(&ctx).expect("lines");
    let (strain, stretch) = (&curves[0], &curves[1]);
    let off_x = strain.vertices.iter().fold(0.0f64, |m, p| m.max(p.y.abs()));
    let off_y = stretch
        .vertices
        .iter()
        .fold(0.0f64, |m, p| m.max(p.x.abs()));
    let full = |c: &MaterialCurve| c.arclength >= 0.4 - 1e-9;
    let pass = off_x <= 1e-3
        && off_y <= 1e-3
        && full(strain)
        && full(stretch)
        && strain.classification == Classification::Repelling
        && stretch.classification == Classification::Attracting;
    outcome(
        pass,
        format!(
            "strainline length {:.4}, max |y| {off_x:.1e}, {}; stretchline length {:.4}, max |x| {off_y:.1e}, {} (<= 1e-3)",
            strain.arclength,
            strain.classification.as_str(),
            stretch.arclength,
            stretch.classification.as_str()
        ),
    )
}

fn ac8(report: &VerifyReport) -> Outcome {
    let a = value(report, "duality", "theta1_vs_stretch");
    let b = value(report, "duality", "theta2_vs_strain");
    let n = samples(report, "duality");
    outcome(
        n == 100 && a <= 1e-3 && b <= 1e-3,
        format!("theta/backward-xi misalignment {a:.2e}, {b:.2e} (<= 1e-3) at {n} points"),
    )
}

fn ac9(dir: &std::path::Path) -> Outcome {
    let ctx = context(
        &[
            "chart.name=sphere",
            "chart.radius=1.0",
            "field.name=sphere_rotation",
            "field.omega=1.0",
            "grid.x=[0.0,6.283185307179586]",
            "grid.y=[-1.4,1.4]",
            "grid.nx=101",
            "grid.ny=51",
            "time.duration=3",
        ],
        dir,
    );
    let (field, _) = ctx.forward().expect("rotation field");
    let worst = field
        .svd
        .iter()
        .map(|s| {
            s.map_or(f64::INFINITY, |s| {
                (s.sigma1 - 1.0).abs().max((s.sigma2 - 1.0).abs())
            })
        })
        .fold(0.0f64, f64::max);

    let mut gram_err = 0.0f64;
    for radius in [1.0, 6371.0] {
        let chart = SphereChart::new(radius, DEFAULT_POLE_CLAMP).expect("chart");
        for p in ctx.grid.points() {
            let g = chart.gramian(p).expect("inside domain");
            let c = p.y.cos();
            let exact = Sym2::new(radius * radius * c * c, 0.0, radius * radius);
            let err = (g.to_mat() - exact.to_mat()).frobenius() / (radius * radius);
            gram_err = gram_err.max(err);
        }
    }
    outcome(
        worst <= 1e-6 && gram_err <= 1e-12,
        format!(
            "rotation max |s - 1| {worst:.2e} (<= 1e-6) on {}x{}; Gramian error {gram_err:.1e} (<= 1e-12, relative to R^2)",
            ctx.grid.nx(),
            ctx.grid.ny()
        ),
    )
}

fn svd_invariants_hold(m: Mat2) -> bool {
    let Ok(s) = svd2(m) else { return false };
    let scale = m.frobenius();
    let unit = [s.xi1, s.xi2, s.theta1, s.theta2]
        .iter()
        .all(|v| (v.norm() - 1.0).abs() <= 1e-12);
    unit && s.sigma1 <= s.sigma2
        && s.xi1.dot(s.xi2).abs() <= 1e-10
        && s.theta1.dot(s.theta2).abs() <= 1e-10
        && (s.reconstruct() - m).frobenius() <= 1e-10 * scale
}

fn fd_error(field: &dyn VelocityField, x: Point2, t: f64, h: f64) -> f64 {
    let p = FlowProblem::new(field, Rect::UNBOUNDED, 0.0, t);
    let exact = p
        .deformation_gradient_variational(x)
        .expect("variational")
        .1;
    let fd = p.with_fd_step(h).deformation_gradient_fd(x).expect("fd");
    (fd - exact).frobenius()
}

fn ac10() -> Outcome {
    let entries = [-7.5, -1.0, -1e-3, 0.0, 2e-4, 0.5, 3.0, 9.0];
    let mut total = 0;
    let mut bad = 0;
    for &a in &entries {
        for &b in &entries {
            for &c in &entries {
                for &d in &entries {
                    let m = Mat2::new(a, b, c, d);
                    if m.det().abs() <= 1e-12 * m.frobenius().powi(2) {
                        continue;
                    }
                    total += 1;
                    if !svd_invariants_hold(m) {
                        bad += 1;
                    }
                }
            }
        }
    }

    let saddle = NonlinearSaddle::default();
    let linear = LinearSaddle::new(0.3);
    let rotation = SphereRotation::new(0.7);
    let x = Point2::new(0.3, 0.4);
    let ratio = fd_error(&saddle, x, 1.0, 0.1) / fd_error(&saddle, x, 1.0, 0.05);
    // Central differences are exact for linear flows; only roundoff remains.
    let exact_fields: [&dyn VelocityField; 2] = [&linear, &rotation];
    let linear_err = exact_fields
        .iter()
        .flat_map(|f| [0.1, 1e-3, 1e-5].map(|h| fd_error(*f, x, 1.0, h)))
        .fold(0.0f64, f64::max);
    let pass = bad == 0 && (3.5..=4.5).contains(&ratio) && linear_err <= 1e-8;
    outcome(
        pass,
        format!(
            "SVD invariants {}/{total} matrices; FD error ratio h/(h/2) {ratio:.3} (3.5..4.5) on the saddle, linear fields {linear_err:.1e} (<= 1e-8)",
            total - bad
        ),
    )
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("temp dir");
    let root = dir.path();
    let sub = |name: &str| {
        let p = root.join(name);
        std::fs::create_dir_all(&p).expect("output dir");
        p
    };
    let report = verify_report(&context(&[], &sub("saddle")));
    let linear = verify_report(&context(
        &["field.name=linear_saddle", "field.lambda=0.3"],
        &sub("linear"),
    ));
    assert!(
        linear.suites.iter().all(|s| s.status != Status::Fail),
        "linear saddle verification failed"
    );

    let results = [
        ("AC1", ac1()),
        ("AC2", ac2(&sub("ac2"))),
        ("AC3", ac3(&report)),
        ("AC4", ac4(&report, &linear)),
        ("AC5", ac5(&report)),
        ("AC6", ac6(&sub("ac6"))),
        ("AC7", ac7(&sub("ac7"))),
        ("AC8", ac8(&report)),
        ("AC9", ac9(&sub("ac9"))),
        ("AC10", ac10()),
    ];
    let mut failed = 0;
    for (id, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{id:<5} {tag}  {}", o.detail);
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
