//! End-to-end tests of the command-line interface: exit codes, report
//! envelopes, artifact determinism and the SVG structure.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_billiard-cli")
}

const STD3: &str = r#"{
  "dimension": 2,
  "obstacles": [
    {"type": "sphere", "center": [0, 0], "radius": 1},
    {"type": "sphere", "center": [6, 0], "radius": 1},
    {"type": "sphere", "center": [3, 5.196152422706632], "radius": 1}
  ]
}"#;

fn write_scene(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("scene.json");
    fs::write(&path, STD3).unwrap();
    path
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn thread_cap_does_not_change_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path());
    let scene_arg = scene.to_str().unwrap();
    for (pass, threads) in [("one", "1"), ("many", "4")] {
        let out = Command::new(bin())
            .current_dir(dir.path())
            .env("BILLIARD_THREADS", threads)
            .args([
                "--scene",
                scene_arg,
                "--output-dir",
                pass,
                "orbit",
                "table",
                "--max-period",
                "6",
            ])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
    }
    let a = fs::read(dir.path().join("one/orbit_table.csv")).unwrap();
    let b = fs::read(dir.path().join("many/orbit_table.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn geometry_check_reports_the_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path());
    let out = run(
        dir.path(),
        &[
            "--scene",
            scene.to_str().unwrap(),
            "--output-dir",
            "out",
            "geometry",
            "check",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["report"]["certificate"]["holds"], true);
    let margin = json["report"]["certificate"]["min_margin"].as_f64().unwrap();
    assert!((margin - (3.0 * 3.0_f64.sqrt() - 2.0)).abs() < 1e-9);
    assert!(json["scene_hash"].as_str().unwrap().len() == 64);
    assert!(dir.path().join("out/geometry_check.json").exists());
}

#[test]
fn malformed_scene_exits_with_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    fs::write(&path, "{\"dimension\": 2}").unwrap();
    let out = run(
        dir.path(),
        &["--scene", path.to_str().unwrap(), "geometry", "check"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn blocked_scene_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("collinear.json");
    fs::write(
        &path,
        r#"{"dimension": 2, "obstacles": [
            {"type": "sphere", "center": [0, 0], "radius": 1},
            {"type": "sphere", "center": [4, 0], "radius": 1},
            {"type": "sphere", "center": [8, 0], "radius": 1}
        ]}"#,
    )
    .unwrap();
    let out = run(
        dir.path(),
        &["--scene", path.to_str().unwrap(), "geometry", "check"],
    );
    assert_eq!(out.status.code(), Some(2));
    let json: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(json["report"]["certificate"]["holds"], false);
    assert_eq!(json["report"]["certificate"]["witness"][0][0], 1);
    assert_eq!(json["report"]["certificate"]["witness"][1], 2);
}

#[test]
fn reports_are_byte_identical_for_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path());
    let scene_arg = scene.to_str().unwrap();
    for pass in ["a", "b"] {
        let out = run(
            dir.path(),
            &[
                "--scene",
                scene_arg,
                "--output-dir",
                pass,
                "--seed",
                "7",
                "certify",
                "symplectic",
                "--pair",
                "1",
                "2",
                "--lambda",
                "1",
                "--samples",
                "20",
            ],
        );
        assert_eq!(out.status.code(), Some(0), "{out:?}");
        let table = run(
            dir.path(),
            &[
                "--scene",
                scene_arg,
                "--output-dir",
                pass,
                "--seed",
                "7",
                "orbit",
                "table",
                "--max-period",
                "5",
            ],
        );
        assert_eq!(table.status.code(), Some(0));
    }
    for name in ["certify_symplectic.json", "orbit_table.csv"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn render_produces_expected_elements_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path());
    let scene_arg = scene.to_str().unwrap();
    for pass in ["r1", "r2"] {
        let out = run(
            dir.path(),
            &[
                "--scene",
                scene_arg,
                "--output-dir",
                pass,
                "render",
                "--words",
                "1-2",
            ],
        );
        assert_eq!(out.status.code(), Some(0), "{out:?}");
    }
    let svg = fs::read_to_string(dir.path().join("r1/render.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 3);
    assert_eq!(svg.matches("<polygon").count(), 1);
    assert_eq!(svg.matches("<line").count(), 2);
    let again = fs::read(dir.path().join("r2/render.svg")).unwrap();
    assert_eq!(fs::read(dir.path().join("r1/render.svg")).unwrap(), again);

    // Scene-only render when no words are given.
    let out = run(
        dir.path(),
        &["--scene", scene_arg, "--output-dir", "r3", "render"],
    );
    assert_eq!(out.status.code(), Some(0));
    let bare = fs::read_to_string(dir.path().join("r3/render.svg")).unwrap();
    assert_eq!(bare.matches("<circle").count(), 3);
    assert_eq!(bare.matches("<polygon").count(), 0);
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path());
    let config = dir.path().join("config.json");
    fs::write(
        &config,
        format!(
            r#"{{"scene_path": "{}", "output_dir": "cfg_out", "seed": 3, "max_period": 3}}"#,
            scene.to_str().unwrap().replace('\\', "/")
        ),
    )
    .unwrap();
    let out = run(
        dir.path(),
        &["--config", config.to_str().unwrap(), "orbit", "table"],
    );
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let csv = fs::read_to_string(dir.path().join("cfg_out/orbit_table.csv")).unwrap();
    // Period <= 3: exactly 5 orbits (plus comment and header lines).
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.starts_with("# scene_hash="));
    // Equal-length orbits are tie-broken lexicographically.
    let lines: Vec<&str> = csv.lines().skip(2).collect();
    assert!(lines[0].starts_with("1-2,"));
    assert!(lines[1].starts_with("1-3,"));
    assert!(lines[2].starts_with("2-3,"));
}

#[test]
fn transfer_and_count_emit_reports() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path());
    let scene_arg = scene.to_str().unwrap();
    let out = run(
        dir.path(),
        &[
            "--scene",
            scene_arg,
            "--output-dir",
            "t",
            "transfer",
            "spectrum",
            "--depth",
            "3",
            "--b",
            "0,50",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let json: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("t/transfer_spectrum.json")).unwrap(),
    )
    .unwrap();
    let lead = json["report"]["leading_eigenvalue"].as_f64().unwrap();
    assert!((lead - 1.0).abs() < 1e-8);
    assert!(dir.path().join("t/transfer_contraction.csv").exists());

    let out = run(
        dir.path(),
        &[
            "--scene",
            scene_arg,
            "--output-dir",
            "c",
            "count",
            "pi",
            "--max-period",
            "5",
            "--lambda-max",
            "20",
            "--depth",
            "3",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("c/count_pi.json")).unwrap())
            .unwrap();
    let rows = json["report"].as_array().unwrap();
    assert!(!rows.is_empty());
    assert_eq!(rows[0]["pi"], 3);
    // Ratios stay finite and positive on the grid.
    for row in rows {
        assert!(row["ratio"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn curvature_verify_cross_checks_the_period_map() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path());
    let out = run(
        dir.path(),
        &[
            "--scene",
            scene.to_str().unwrap(),
            "--output-dir",
            "cv",
            "curvature",
            "verify",
            "--word",
            "1-2-3",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let json: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let check = json["report"]["product_times_fd"].as_f64().unwrap();
    assert!((check - 1.0).abs() < 1e-4);
}

#[test]
fn three_dimensional_scenes_refuse_rendering_but_certify() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spheres.json");
    fs::write(
        &path,
        r#"{"dimension": 3, "obstacles": [
            {"type": "sphere", "center": [0, 0, 0], "radius": 1},
            {"type": "sphere", "center": [6, 0, 0], "radius": 1},
            {"type": "sphere", "center": [3, 5.196152422706632, 0], "radius": 1}
        ]}"#,
    )
    .unwrap();
    let render = run(
        dir.path(),
        &["--scene", path.to_str().unwrap(), "render", "--words", "1-2"],
    );
    assert_eq!(render.status.code(), Some(1));
    let certify = run(
        dir.path(),
        &[
            "--scene",
            path.to_str().unwrap(),
            "--output-dir",
            "s3",
            "certify",
            "symplectic",
            "--pair",
            "1",
            "2",
            "--lambda",
            "1",
            "--samples",
            "10",
        ],
    );
    assert_eq!(certify.status.code(), Some(0), "{certify:?}");
}
