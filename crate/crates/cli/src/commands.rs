use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ocmesh_core::contour::{uniform_dual_contour, MAX_ORACLE_DEPTH};
use ocmesh_core::evalkit::{consistency as score, gt_flow, render_meshes, write_pfm, write_pgm, FrameRender};
use ocmesh_core::octree::{lod_ablation_counts, theoretical_uniform_leaves, Toggles};
use ocmesh_core::pipeline::{run, run_per_view, Extraction};
use ocmesh_core::sdf::parse_components;
use ocmesh_core::view::load_cameras;
use ocmesh_core::{Camera, Error, Mesh, SdfExpr, Vec3};
use serde_json::json;

use crate::args::{AblateArgs, ConsistencyArgs, ExtractArgs, Inputs, Mode, OracleArgs, Tuning};
use crate::report::{AblationRow, MeshReport, PairReport, RunReport, RunTimings, TuningEcho};
use crate::{emit, CliError, CliResult};

/// Ablation rows in the only order they may be enabled.
const ROW_CHAIN: [(&str, Toggles); 3] = [
    ("angular", Toggles::ANGULAR),
    ("occupancy", Toggles::OCCUPANCY),
    ("visibility", Toggles::VISIBILITY),
];

fn load_scene(path: &Path) -> CliResult<Vec<SdfExpr>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(parse_components(&text).map_err(Error::from)?)
}

fn load_inputs(inputs: &Inputs) -> CliResult<(Vec<SdfExpr>, Vec<Camera>)> {
    let comps = load_scene(&inputs.scene)?;
    let cams = load_cameras(&inputs.cameras)?;
    if cams.is_empty() {
        return Err(Error::Config("at least one camera is required".into()).into());
    }
    Ok((comps, cams))
}

fn extract_all(comps: &[SdfExpr], cams: &[Camera], tuning: &Tuning, mode: Mode) -> CliResult<Vec<Extraction>> {
    let cfg = tuning.pipeline();
    Ok(match mode {
        Mode::Single => vec![run(comps, cams, &cfg)?],
        Mode::PerView => run_per_view(comps, cams, &cfg)?,
    })
}

fn path_string(p: &Path) -> String {
    p.display().to_string()
}

/// `<stem>_view<i>.<ext>` next to `out`.
pub fn view_path(out: &Path, view: usize) -> PathBuf {
    let stem = out
        .file_stem()
        .map_or_else(|| "mesh".into(), |s| s.to_string_lossy().into_owned());
    let name = match out.extension() {
        Some(ext) => format!("{stem}_view{view}.{}", ext.to_string_lossy()),
        None => format!("{stem}_view{view}"),
    };
    out.with_file_name(name)
}

fn write_mesh(mesh: &Mesh, path: &Path) -> CliResult<()> {
    let ply = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply"));
    if ply {
        mesh.export_ply(path)?;
    } else {
        mesh.export_obj(path)?;
    }
    Ok(())
}

fn inputs_echo(inputs: &Inputs, cams: &[Camera]) -> serde_json::Value {
    json!({
        "scene": path_string(&inputs.scene),
        "cameras": path_string(&inputs.cameras),
        "camera_count": cams.len(),
    })
}

pub fn extract(a: &ExtractArgs) -> CliResult<()> {
    let start = Instant::now();
    let (comps, cams) = load_inputs(&a.inputs)?;
    let runs = extract_all(&comps, &cams, &a.tuning, a.mode)?;
    let mut reports = Vec::new();
    for (i, ex) in runs.iter().enumerate() {
        let view = (a.mode == Mode::PerView).then_some(i);
        let path = a.out.as_ref().map(|out| match view {
            Some(v) => view_path(out, v),
            None => out.clone(),
        });
        if let Some(p) = &path {
            write_mesh(&ex.merged(), p)?;
        }
        reports.push(RunReport::new(ex, view, path.as_deref().map(path_string)));
    }
    let timings: Vec<RunTimings> = runs.iter().map(RunTimings::from).collect();
    let report = json!({
        "command": "extract",
        "inputs": inputs_echo(&a.inputs, &cams),
        "config": TuningEcho::from(&a.tuning),
        "mode": a.mode,
        "runs": reports,
        "timings": { "runs": timings, "total": start.elapsed().as_secs_f64() },
    });
    emit(&report, a.report.as_deref())
}

/// Parses `--rows`: a non-empty prefix of the criteria chain.
pub fn parse_rows(text: &str) -> CliResult<Vec<(&'static str, Toggles)>> {
    let names: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    let is_prefix = !names.is_empty()
        && names.len() <= ROW_CHAIN.len()
        && names.iter().zip(ROW_CHAIN.iter()).all(|(n, (c, _))| n == c);
    if !is_prefix {
        return Err(CliError::Usage(format!(
            "--rows must be a prefix of angular,occupancy,visibility, got `{text}`"
        )));
    }
    Ok(ROW_CHAIN[..names.len()].to_vec())
}

pub fn ablate(a: &AblateArgs) -> CliResult<()> {
    let start = Instant::now();
    let rows = parse_rows(&a.rows)?;
    let (comps, cams) = load_inputs(&a.inputs)?;
    let cfg = a.tuning.pipeline().build_config(&cams)?;
    let (depth, uniform) = theoretical_uniform_leaves(&cfg);
    let mut out = vec![AblationRow {
        label: "uniform".into(),
        materialized: false,
        depth: Some(depth),
        leaf_cells: uniform,
        total_leaves: None,
        vertices: None,
        faces: None,
    }];
    let mut seconds = Vec::new();
    for (_, toggles) in rows {
        let c = lod_ablation_counts(&comps, &cams, &cfg, toggles, a.tuning.bisect_iters)?;
        seconds.push(json!({ "label": c.label, "seconds": c.seconds }));
        out.push(AblationRow {
            label: c.label,
            materialized: true,
            depth: None,
            leaf_cells: c.leaf_cells as f64,
            total_leaves: Some(c.total_leaves),
            vertices: Some(c.vertices),
            faces: Some(c.faces),
        });
    }
    let report = json!({
        "command": "ablate",
        "inputs": inputs_echo(&a.inputs, &cams),
        "config": TuningEcho::from(&a.tuning),
        "a_hat": cfg.lod.a_hat,
        "a_hat_inv": cfg.lod.a_hat_inv,
        "rows": out,
        "timings": { "rows": seconds, "total": start.elapsed().as_secs_f64() },
    });
    emit(&report, a.report.as_deref())
}

/// Parses `--pairs` as `src-dst,...`.
pub fn parse_pairs(text: &str) -> CliResult<Vec<(usize, usize)>> {
    let bad = || CliError::Usage(format!("--pairs expects `src-dst,...`, got `{text}`"));
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (s, d) = item.split_once('-').ok_or_else(bad)?;
        out.push((
            s.trim().parse().map_err(|_| bad())?,
            d.trim().parse().map_err(|_| bad())?,
        ));
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

pub fn consistency(a: &ConsistencyArgs) -> CliResult<()> {
    let start = Instant::now();
    let (comps, cams) = load_inputs(&a.inputs)?;
    let pairs = match &a.pairs {
        Some(p) => parse_pairs(p)?,
        None => (1..cams.len()).map(|i| (i - 1, i)).collect(),
    };
    if let Some(&(s, d)) = pairs.iter().find(|&&(s, d)| s >= cams.len() || d >= cams.len()) {
        return Err(Error::Config(format!("pair {s}-{d} is out of range for {} cameras", cams.len())).into());
    }
    let light = Vec3::from(a.light);
    if light.norm() == 0.0 {
        return Err(CliError::Usage("--light must be nonzero".into()));
    }
    let light = light.normalize();
    let runs = extract_all(&comps, &cams, &a.tuning, a.mode)?;
    let extract_seconds = start.elapsed().as_secs_f64();
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
    }

    let render_start = Instant::now();
    let mut frames: BTreeMap<usize, FrameRender> = BTreeMap::new();
    for &(s, d) in &pairs {
        for i in [s, d] {
            if frames.contains_key(&i) {
                continue;
            }
            let ex = match a.mode {
                Mode::Single => &runs[0],
                Mode::PerView => &runs[i],
            };
            let frame = render_meshes(&ex.meshes, &cams[i], &light)?;
            if let Some(dir) = &a.out {
                write_pfm(
                    &dir.join(format!("frame{i}_depth.pfm")),
                    frame.width,
                    frame.height,
                    &frame.depth,
                )?;
                write_pgm(
                    &dir.join(format!("frame{i}_shade.pgm")),
                    frame.width,
                    frame.height,
                    &frame.shade,
                )?;
            }
            frames.insert(i, frame);
        }
    }
    let render_seconds = render_start.elapsed().as_secs_f64();

    let score_start = Instant::now();
    let mut scored = Vec::new();
    for &(s, d) in &pairs {
        let (src, dst) = (&frames[&s], &frames[&d]);
        let c = score(src, dst, &gt_flow(src, dst))?;
        let map = match &a.out {
            Some(dir) => {
                let p = dir.join(format!("pair{s}_{d}_ssim.pgm"));
                write_pgm(&p, src.width, src.height, &c.map)?;
                Some(path_string(&p))
            }
            None => None,
        };
        scored.push(PairReport {
            src: s,
            dst: d,
            masked_mean: c.masked_mean,
            unmasked_mean: c.unmasked_mean,
            masked_pixels: c.masked_pixels,
            occluded_pixels: c.occluded_pixels,
            map,
        });
    }
    let min_masked = scored.iter().map(|p| p.masked_mean).fold(f64::INFINITY, f64::min);
    let mean_masked = scored.iter().map(|p| p.masked_mean).sum::<f64>() / scored.len() as f64;
    let reports: Vec<RunReport> = runs
        .iter()
        .enumerate()
        .map(|(i, ex)| RunReport::new(ex, (a.mode == Mode::PerView).then_some(i), None))
        .collect();
    let timings: Vec<RunTimings> = runs.iter().map(RunTimings::from).collect();
    let report = json!({
        "command": "consistency",
        "inputs": inputs_echo(&a.inputs, &cams),
        "config": TuningEcho::from(&a.tuning),
        "mode": a.mode,
        "light": [light.x, light.y, light.z],
        "runs": reports,
        "pairs": scored,
        "summary": { "min_masked_mean": min_masked, "mean_masked_mean": mean_masked },
        "timings": {
            "runs": timings,
            "extract": extract_seconds,
            "render": render_seconds,
            "score": score_start.elapsed().as_secs_f64(),
            "total": start.elapsed().as_secs_f64(),
        },
    });
    emit(&report, a.report.as_deref())
}

pub fn oracle_dc(a: &OracleArgs) -> CliResult<()> {
    let start = Instant::now();
    if a.depth > MAX_ORACLE_DEPTH {
        return Err(Error::Precondition(format!("oracle depth {} exceeds {MAX_ORACLE_DEPTH}", a.depth)).into());
    }
    if !(a.lroot > 0.0 && a.lroot.is_finite()) {
        return Err(Error::Config(format!("l_root must be positive, got {}", a.lroot)).into());
    }
    let comps = load_scene(&a.scene)?;
    let scene = SdfExpr::union_all(comps.clone()).expect("parsed scenes are non-empty");
    let origin = a.origin.map_or_else(|| Vec3::repeat(-0.5 * a.lroot), Vec3::from);
    let mesh = uniform_dual_contour(&scene, origin, a.lroot, a.depth, a.bisect_iters)?;
    if let Some(p) = &a.out {
        write_mesh(&mesh, p)?;
    }
    let report = json!({
        "command": "oracle-dc",
        "inputs": { "scene": path_string(&a.scene) },
        "config": {
            "origin": [origin.x, origin.y, origin.z],
            "l_root": a.lroot,
            "depth": a.depth,
            "bisect_iters": a.bisect_iters,
        },
        "mesh": MeshReport::new(&mesh, comps.len(), a.out.as_deref().map(path_string)),
        "timings": { "total": start.elapsed().as_secs_f64() },
    });
    emit(&report, a.report.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_must_be_a_prefix_chain() {
        assert_eq!(parse_rows("angular").unwrap().len(), 1);
        assert_eq!(parse_rows("angular, occupancy").unwrap().len(), 2);
        assert_eq!(parse_rows("angular,occupancy,visibility").unwrap().len(), 3);
        for bad in [
            "",
            "occupancy",
            "angular,visibility",
            "visibility,occupancy,angular",
            "angular,occupancy,visibility,angular",
        ] {
            assert!(matches!(parse_rows(bad), Err(CliError::Usage(_))), "{bad}");
        }
    }

    #[test]
    fn pair_lists() {
        assert_eq!(parse_pairs("0-1, 2-2").unwrap(), vec![(0, 1), (2, 2)]);
        assert!(parse_pairs("0").is_err());
        assert!(parse_pairs("a-1").is_err());
        assert!(parse_pairs("").is_err());
    }

    #[test]
    fn view_paths() {
        assert_eq!(view_path(Path::new("/t/m.obj"), 3), Path::new("/t/m_view3.obj"));
        assert_eq!(view_path(Path::new("m"), 0), Path::new("m_view0"));
    }
}
