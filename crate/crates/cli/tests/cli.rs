use std::path::Path;
use std::process::{Command, Output};

use lcsk::commands;
use lcsk::io::GridBlock;
use lcsk::report::Status;
use lcsk::{Context, RunConfig};
use lcsk_core::lcs::Classification;

const SPHERE: &str = r#"
[chart]
name = "sphere"
radius = 1.0

[field]
name = "sphere_rotation"
omega = 1.0

[grid]
x = [0.0, 6.283185307179586]
y = [-1.4, 1.4]
nx = 101
ny = 51
"#;

fn lcsk(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcsk"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn context(overrides: &[&str], out: &Path) -> Context {
    let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    let mut cfg = RunConfig::load(None, &overrides).unwrap();
    cfg.output.dir = out.to_path_buf();
    Context::new(cfg).unwrap()
}

#[test]
fn dump_config_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let sets = ["--set", "time.duration=20", "--set", "grid.nx=51"];
    let o = lcsk(&[&["dump-config"][..], &sets].concat(), dir.path());
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let parsed = RunConfig::from_toml(&text).unwrap();
    let expected =
        RunConfig::load(None, &["time.duration=20".into(), "grid.nx=51".into()]).unwrap();
    assert_eq!(parsed.time, expected.time);
    assert_eq!(parsed.grid, expected.grid);
    assert_eq!(RunConfig::from_toml(&parsed.to_toml()).unwrap(), parsed);

    // A dumped file loads back unchanged.
    let path = dir.path().join("run.toml");
    std::fs::write(&path, &text).unwrap();
    let loaded = RunConfig::load(Some(&path), &[]).unwrap();
    assert_eq!(loaded, parsed);
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for set in [
        "time.duration=0",
        "grid.nz=3",
        "field.name=vortex",
        "integrator.atol=-1",
        "lines.seeds=[{x=5.0,y=0.0,family=\"strainline\"}]",
    ] {
        let cmd = if set.starts_with("lines") {
            "lines"
        } else {
            "ftle"
        };
        let o = lcsk(&[cmd, "--set", set], dir.path());
        assert_eq!(code(&o), 2, "{set}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = lcsk(&["ftle", "--config", "/nonexistent/run.toml"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn saddle_center_ftle() {
    let dir = tempfile::tempdir().unwrap();
    let o = lcsk(
        &["ftle", "--set", "grid.nx=41", "--set", "grid.ny=41"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let b = GridBlock::load(&dir.path().join("field.lcsk")).unwrap();
    assert_eq!((b.nx, b.ny), (41, 41));
    let center = 20 * 41 + 20;
    let f = b.channel("ftle_f").unwrap()[center];
    assert!((f - 0.3).abs() <= 1e-3, "{f}");
    // The origin is a fixed point, so the backward value lands on the same node.
    let fb = b.channel("ftle_b").unwrap()[center];
    assert!((fb - 0.3).abs() <= 1e-3, "{fb}");
    let csv = std::fs::read_to_string(dir.path().join("field.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 41 * 41);
}

#[test]
fn sphere_rotation_ftle_vanishes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sphere.toml");
    std::fs::write(&cfg, SPHERE).unwrap();
    let o = lcsk(&["ftle", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let b = GridBlock::load(&dir.path().join("field.lcsk")).unwrap();
    let f = b.channel("ftle_f").unwrap();
    assert_eq!(f.len(), 101 * 51);
    assert!(
        f.iter().all(|v| v.abs() <= 1e-6),
        "{:?}",
        f.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    );
    for name in ["s1", "s2"] {
        assert!(b
            .channel(name)
            .unwrap()
            .iter()
            .all(|s| (s - 1.0).abs() <= 1e-6));
    }
}

#[test]
fn degraded_runs_exit_3_after_writing() {
    let dir = tempfile::tempdir().unwrap();
    let o = lcsk(
        &[
            "ftle",
            "--set",
            "chart.name=sphere",
            "--set",
            "chart.radius=1.0",
            "--set",
            "grid.y=[-1.5,1.5]",
            "--set",
            "grid.nx=21",
            "--set",
            "grid.ny=21",
            "--set",
            "time.duration=5",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid"));
    assert!(dir.path().join("field.lcsk").exists());
}

#[test]
fn lines_are_classified() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = context(
        &[
            "grid.x=[-0.5,0.5]",
            "grid.y=[-0.5,0.5]",
            "grid.nx=101",
            "grid.ny=101",
        ],
        dir.path(),
    );
    let curves = commands::lines(&ctx).unwrap();
    assert_eq!(curves[0].classification, Classification::Repelling);
    assert_eq!(curves[1].classification, Classification::Attracting);
    let csv = std::fs::read_to_string(dir.path().join("curves.csv")).unwrap();
    let mut rows = csv.lines();
    assert_eq!(
        rows.next(),
        Some("curve_id,vertex_id,x,y,s1,s2,L1,L2,class")
    );
    assert_eq!(rows.count(), curves[0].len() + curves[1].len());
    assert!(csv.contains(",repelling") && csv.contains(",attracting"));

    let sphere: RunConfig = RunConfig::from_toml(SPHERE).unwrap();
    let mut sphere = sphere;
    sphere.output.dir = dir.path().to_path_buf();
    let ctx = Context::new(sphere).unwrap();
    for c in commands::lines(&ctx).unwrap() {
        assert_eq!(c.classification, Classification::Unclassified);
    }
}

#[test]
fn extrema_lie_on_the_axes_near_the_saddle() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = context(
        &[
            "grid.x=[-0.5,0.5]",
            "grid.y=[-0.5,0.5]",
            "grid.nx=101",
            "grid.ny=101",
        ],
        dir.path(),
    );
    let sets = commands::extrema(&ctx).unwrap();
    assert_eq!(sets.len(), 2);
    let (ref name, ref along_x) = sets[0];
    assert_eq!(name, "ftle_f_xi2_max");
    assert!(along_x
        .iter()
        .filter(|e| e.point.norm() < 0.1)
        .all(|e| e.point.y.abs() <= 0.02));
    assert!(along_x.iter().any(|e| e.point.norm() < 1e-9));
    assert!(dir.path().join("extrema_ftle_f_xi1_max.csv").exists());
}

#[test]
fn verify_saddle_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = lcsk(&["verify"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let json = std::fs::read_to_string(dir.path().join("verify.json")).unwrap();
    let report: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(report["passed"], true);
    for s in report["suites"].as_array().unwrap() {
        assert_eq!(s["status"], "pass", "{s}");
    }
}

#[test]
fn coarse_fd_step_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let o = lcsk(&["verify", "--set", "deformation.fd_step=0.1"], dir.path());
    assert_eq!(code(&o), 4);

    let residual = |h: &str, t: &str| {
        let ctx = context(
            &[
                &format!("deformation.fd_step={h}"),
                &format!("time.duration={t}"),
            ],
            dir.path(),
        );
        let r = match commands::verify(&ctx) {
            Ok(r) => r,
            Err(_) => {
                let json = std::fs::read_to_string(dir.path().join("verify.json")).unwrap();
                serde_json::from_str(&json).unwrap()
            }
        };
        let s = r.suite("incompressibility").unwrap().clone();
        (s.status, s.check("sigma_product").unwrap().value.unwrap())
    };
    // Truncation dominated: halving h divides the residual by four.
    let (_, coarse) = residual("0.1", "1");
    let (_, fine) = residual("0.05", "1");
    assert!((3.5..=4.5).contains(&(coarse / fine)), "{coarse} / {fine}");
    assert!(coarse > 1e4 * residual("1e-5", "1").1);
    let (status, r) = residual("0.1", "2");
    assert_eq!(status, Status::Fail, "{r}");
}

#[test]
fn verify_linear_saddle_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = context(
        &["field.name=linear_saddle", "field.lambda=0.3"],
        dir.path(),
    );
    let report = commands::verify(&ctx).unwrap();
    let mut checked = 0;
    for s in &report.suites {
        if s.status == Status::Skipped {
            continue;
        }
        for c in s.checks.iter().filter(|c| c.name != "second_order_gated") {
            let v = c.value.unwrap();
            assert!(v.abs() <= 1e-7, "{} {}: {v}", s.name, c.name);
            checked += 1;
        }
    }
    assert!(checked >= 10);
}

#[test]
fn binary_output_is_deterministic_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "ftle",
        "--set",
        "grid.nx=61",
        "--set",
        "grid.ny=61",
        "--set",
        "output.csv=false",
    ];
    assert_eq!(
        code(&lcsk(&[&args[..], &["--threads", "1"]].concat(), a.path())),
        0
    );
    assert_eq!(
        code(&lcsk(&[&args[..], &["--threads", "3"]].concat(), b.path())),
        0
    );
    let x = std::fs::read(a.path().join("field.lcsk")).unwrap();
    let y = std::fs::read(b.path().join("field.lcsk")).unwrap();
    assert!(!x.is_empty() && x == y);
    assert!(!a.path().join("field.csv").exists());
}

#[test]
fn lcsk_file_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let o = lcsk(
        &["ftle", "--set", "grid.nx=31", "--set", "grid.ny=21"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let path = dir.path().join("field.lcsk");
    let raw = std::fs::read(&path).unwrap();
    let block = GridBlock::load(&path).unwrap();
    let mut again = Vec::new();
    block.write_to(&mut again).unwrap();
    assert_eq!(raw, again);
    let names: Vec<&str> = block.channels.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        ["ftle_f", "ftle_b", "s1", "s2", "xi1x", "xi1y", "xi2x", "xi2y"]
    );
    assert_eq!((block.x_range, block.y_range), ((-1.0, 1.0), (-1.0, 1.0)));
}
