use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ocmesh_core::view::cameras_to_json;
use ocmesh_core::{Camera, Vec3};
use serde_json::Value;
use tempfile::TempDir;

const SPHERE: &str = "(sphere 0 0 0 1)\n";

fn orbit(angle_deg: f64) -> Camera {
    let a = angle_deg.to_radians();
    let pos = Vec3::new(4.0 * a.sin(), -4.0 * a.cos(), 1.0);
    Camera::look_at(pos, Vec3::zeros(), Vec3::z(), 40f64.to_radians(), 96, 72).unwrap()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn file(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn cameras(&self, name: &str, cams: &[Camera]) -> PathBuf {
        self.file(name, &cameras_to_json(cams))
    }
}

fn ocmesh(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ocmesh"));
    cmd.args(args).env_remove("OCMESH_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn schema() -> jsonschema::Validator {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/schema/report.schema.json")).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_valid(doc: &Value) {
    let v = schema();
    let errors: Vec<String> = v
        .iter_errors(doc)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect();
    assert!(errors.is_empty(), "{errors:#?}\n{doc:#}");
}

/// Runs a command expected to succeed and returns its stdout report.
fn report(args: &[&str]) -> Value {
    let out = ocmesh(args, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_valid(&doc);
    doc
}

/// Runs a command expected to fail and returns its error record.
fn failure(args: &[&str], envs: &[(&str, &str)], code: i32) -> Value {
    let out = ocmesh(args, envs);
    assert_eq!(
        out.status.code(),
        Some(code),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_valid(&doc);
    doc["error"].clone()
}

const SMALL_ROOT: [&str; 4] = ["--lroot", "16", "--ainv-factor", "16"];

fn extract_args<'a>(scene: &'a Path, cams: &'a Path, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["extract", "--scene", s(scene), "--cameras", s(cams)];
    v.extend(SMALL_ROOT);
    v.extend(extra);
    v
}

#[test]
fn extract_sphere_writes_mesh_and_report() {
    let ws = Workspace::new();
    let scene = ws.file("sphere.scene", SPHERE);
    let cams = ws.cameras("cams.json", &[orbit(0.0)]);
    let out = ws.path("sphere.obj");
    let rep = ws.path("report.json");
    // The default invisible target, so coarse cells also get virtual grids.
    let args = ["extract", "--scene", s(&scene), "--cameras", s(&cams), "--lroot", "16"];
    let o = ocmesh(&[&args[..], &["--out", s(&out), "--report", s(&rep)]].concat(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    assert_valid(&doc);
    let run = &doc["runs"][0];
    for phase in [
        "coarse_nodes",
        "virtual_grids",
        "occupied_cells",
        "visible_cells",
        "fine_cells",
    ] {
        assert!(run["phases"][phase].as_u64().unwrap() > 0, "{phase}: {run:#}");
    }
    assert_eq!(run["mesh"]["audit"]["euler_characteristic"], 2);
    assert_eq!(run["mesh"]["audit"]["boundary_edge_count"], 0);
    let obj = std::fs::read_to_string(&out).unwrap();
    let faces = obj.lines().filter(|l| l.starts_with("f ")).count() as u64;
    assert_eq!(faces, run["mesh"]["faces"].as_u64().unwrap());
    assert!(doc["timings"]["total"].as_f64().unwrap() > 0.0);
}

#[test]
fn zero_cameras_is_a_config_error() {
    let ws = Workspace::new();
    let scene = ws.file("sphere.scene", SPHERE);
    let cams = ws.file("none.json", "[]");
    let err = failure(&extract_args(&scene, &cams, &[]), &[], 1);
    assert_eq!(err["kind"], "config");
    assert!(err["message"].as_str().unwrap().contains("camera"));
}

#[test]
fn fine_cell_cap_error_names_cap_and_attempt() {
    let ws = Workspace::new();
    let scene = ws.file("sphere.scene", SPHERE);
    let cams = ws.cameras("cams.json", &[orbit(0.0)]);
    let err = failure(&extract_args(&scene, &cams, &["--max-fine-cells", "10"]), &[], 1);
    assert_eq!(err["kind"], "fine_cell_cap");
    assert_eq!(err["cap"], 10);
    assert!(err["attempted"].as_u64().unwrap() > 10);
    let msg = err["message"].as_str().unwrap();
    assert!(
        msg.contains("10") && msg.contains(&err["attempted"].to_string()),
        "{msg}"
    );
}

#[test]
fn input_errors_are_records() {
    let ws = Workspace::new();
    let bad = ws.file("bad.scene", "(sphere 0 0 0 1)\n(spheer 1 2 3 4)\n");
    let cams = ws.cameras("cams.json", &[orbit(0.0)]);
    let err = failure(&extract_args(&bad, &cams, &[]), &[], 1);
    assert_eq!(
        (err["kind"].as_str(), err["line"].as_u64(), err["col"].as_u64()),
        (Some("parse"), Some(2), Some(2))
    );

    let missing = ws.path("missing.scene");
    let err = failure(&extract_args(&missing, &cams, &[]), &[], 1);
    assert_eq!(err["kind"], "io");
    assert_eq!(err["path"], s(&missing));

    let scene = ws.file("sphere.scene", SPHERE);
    let err = failure(&extract_args(&scene, &cams, &[]), &[("OCMESH_THREADS", "zero")], 1);
    assert_eq!(err["kind"], "config");

    let err = failure(&["extract", "--scene", s(&scene)], &[], 2);
    assert_eq!(err["kind"], "usage");
    let err = failure(&extract_args(&scene, &cams, &["--mode", "sometimes"]), &[], 2);
    assert_eq!(err["kind"], "usage");
}

#[test]
fn per_view_meshes_are_numbered() {
    let ws = Workspace::new();
    let scene = ws.file("sphere.scene", SPHERE);
    let cams = ws.cameras("cams.json", &[orbit(0.0), orbit(90.0)]);
    let out = ws.path("m.ply");
    let doc = report(&extract_args(&scene, &cams, &["--mode", "per-view", "--out", s(&out)]));
    assert_eq!(doc["mode"], "per_view_baseline");
    assert_eq!(doc["runs"].as_array().unwrap().len(), 2);
    for i in 0..2 {
        let p = ws.path(&format!("m_view{i}.ply"));
        assert_eq!(doc["runs"][i]["view"], i);
        assert_eq!(doc["runs"][i]["mesh"]["path"], s(&p));
        assert!(std::fs::read(&p).unwrap().starts_with(b"ply\n"));
    }
    assert!(!out.exists());
}

fn strip_timings(mut doc: Value) -> Value {
    doc.as_object_mut().unwrap().remove("timings").expect("timings field");
    doc
}

#[test]
fn reports_and_meshes_repeat_modulo_timings() {
    let ws = Workspace::new();
    let scene = ws.file("sphere.scene", SPHERE);
    let cams = ws.cameras("cams.json", &[orbit(0.0), orbit(30.0)]);
    let (a, b) = (ws.path("a.obj"), ws.path("b.obj"));
    let ra = report(&extract_args(&scene, &cams, &["--out", s(&a)]));
    let rb = report(&extract_args(&scene, &cams, &["--out", s(&b)]));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let (mut ra, rb) = (strip_timings(ra), strip_timings(rb));
    ra["runs"][0]["mesh"]["path"] = rb["runs"][0]["mesh"]["path"].clone();
    assert_eq!(ra, rb);
}

#[test]
fn ablation_rows_shrink_and_include_the_uniform_bound() {
    let ws = Workspace::new();
    let scene = ws.file("sphere.scene", SPHERE);
    let cams = ws.cameras("cams.json", &[orbit(0.0)]);
    let mut args = vec!["ablate", "--scene", s(&scene), "--cameras", s(&cams)];
    // Coarse cells keep the row without pruning small.
    args.extend(SMALL_ROOT);
    args.extend(["--pixels-per-cell", "4"]);
    let doc = report(&args);
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0]["materialized"], false);
    let depth = rows[0]["depth"].as_u64().unwrap();
    let a_hat = doc["a_hat"].as_f64().unwrap();
    assert_eq!(depth, (16.0 / a_hat).log2().ceil() as u64);
    assert_eq!(rows[0]["leaf_cells"].as_f64().unwrap(), 8f64.powi(depth as i32));
    let labels: Vec<&str> = rows.iter().map(|r| r["label"].as_str().unwrap()).collect();
    assert_eq!(
        labels[1..],
        ["angular", "angular+occupancy", "angular+occupancy+visibility"]
    );
    for w in rows.windows(2) {
        assert!(w[1]["leaf_cells"].as_f64() <= w[0]["leaf_cells"].as_f64(), "{w:#?}");
    }
    for key in ["vertices", "faces"] {
        assert!(rows[3][key].as_u64() <= rows[2][key].as_u64());
        assert!(rows[2][key].as_u64() <= rows[1][key].as_u64());
    }

    args.extend(["--rows", "angular"]);
    assert_eq!(report(&args)["rows"].as_array().unwrap().len(), 2);
    for bad in ["occupancy", "angular,visibility", "visibility,occupancy"] {
        let n = args.len();
        args[n - 1] = bad;
        assert_eq!(failure(&args, &[], 2)["kind"], "usage");
    }
}

fn consistency_args<'a>(scene: &'a Path, cams: &'a Path, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["consistency", "--scene", s(scene), "--cameras", s(cams)];
    v.extend(SMALL_ROOT);
    v.extend(extra);
    v
}

#[test]
fn identity_pair_scores_one_and_writes_maps() {
    let ws = Workspace::new();
    let scene = ws.file("sphere.scene", SPHERE);
    let cams = ws.cameras("cams.json", &[orbit(0.0)]);
    let maps = ws.path("maps");
    let doc = report(&consistency_args(&scene, &cams, &["--pairs", "0-0", "--out", s(&maps)]));
    let pair = &doc["pairs"][0];
    for key in ["masked_mean", "unmasked_mean"] {
        assert!((pair[key].as_f64().unwrap() - 1.0).abs() < 1e-12, "{pair:#}");
    }
    assert_eq!(pair["occluded_pixels"], 0);
    for f in ["frame0_depth.pfm", "frame0_shade.pgm", "pair0_0_ssim.pgm"] {
        assert!(maps.join(f).is_file(), "{f}");
    }
    let err = failure(&consistency_args(&scene, &cams, &["--pairs", "0-1"]), &[], 1);
    assert_eq!(err["kind"], "config");
    assert_eq!(
        failure(&consistency_args(&scene, &cams, &["--pairs", "0"]), &[], 2)["kind"],
        "usage"
    );
}

#[test]
fn single_mesh_pairs_beat_per_view_pairs() {
    let ws = Workspace::new();
    let scene = ws.file("sphere.scene", SPHERE);
    let cams = ws.cameras("cams.json", &[orbit(0.0), orbit(3.0)]);
    let single = report(&consistency_args(&scene, &cams, &["--pixels-per-cell", "3"]));
    let per = report(&consistency_args(
        &scene,
        &cams,
        &["--pixels-per-cell", "3", "--mode", "per-view"],
    ));
    let a = single["pairs"][0]["masked_mean"].as_f64().unwrap();
    let b = per["pairs"][0]["masked_mean"].as_f64().unwrap();
    assert!(a >= 0.99, "{a}");
    assert!(b < a, "{b} vs {a}");
    assert_eq!(per["runs"].as_array().unwrap().len(), 2);
}

fn oracle_args<'a>(scene: &'a Path, depth: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["oracle-dc", "--scene", s(scene), "--lroot", "3.4", "--depth", depth];
    v.extend(extra);
    v
}

#[test]
fn oracle_examples() {
    let ws = Workspace::new();
    let scene = ws.file("sphere.scene", SPHERE);
    let out = ws.path("oracle.obj");
    let doc = report(&oracle_args(&scene, "5", &["--out", s(&out)]));
    let audit = &doc["mesh"]["audit"];
    assert_eq!(audit["euler_characteristic"], 2);
    assert_eq!(audit["boundary_edge_count"], 0);
    assert_eq!(audit["nonmanifold_edge_count"], 0);
    assert_eq!(doc["config"]["origin"], serde_json::json!([-1.7, -1.7, -1.7]));
    assert!(out.is_file());

    let empty = ws.file("empty.scene", "(sphere 10 10 10 1)\n");
    let doc = report(&oracle_args(&empty, "5", &[]));
    assert_eq!(doc["mesh"]["faces"], 0);

    let err = failure(&oracle_args(&scene, "10", &[]), &[], 1);
    assert_eq!(err["kind"], "precondition");
    let doc = report(&oracle_args(&scene, "3", &["--origin", "-2,-2,-2"]));
    assert_eq!(doc["config"]["origin"], serde_json::json!([-2.0, -2.0, -2.0]));
}

#[test]
fn schema_rejects_malformed_reports() {
    let v = schema();
    assert!(!v.is_valid(&serde_json::json!({ "command": "extract" })));
    assert!(!v.is_valid(&serde_json::json!({ "error": { "kind": "fine_cell_cap", "message": "x" } })));
    assert!(v.is_valid(&serde_json::json!({ "error": { "kind": "config", "message": "x" } })));
}
