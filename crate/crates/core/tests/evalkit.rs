use ocmesh_core::evalkit::*;
use ocmesh_core::pipeline::{run, run_per_view, PipelineConfig};
use ocmesh_core::sdf::SdfExpr;
use ocmesh_core::view::Camera;
use ocmesh_core::Vec3;

fn orbit(angle_deg: f64) -> Camera {
    let a = angle_deg.to_radians();
    let pos = Vec3::new(4.0 * a.sin(), -4.0 * a.cos(), 1.0);
    Camera::look_at(pos, Vec3::zeros(), Vec3::z(), 40f64.to_radians(), 96, 72).unwrap()
}

fn light() -> Vec3 {
    Vec3::new(0.4, -0.5, 0.75).normalize()
}

// A small root and a loose invisible target keep the coarse phase cheap
// for this bounded scene.
fn config(pixels_per_cell: f64) -> PipelineConfig {
    PipelineConfig {
        pixels_per_cell,
        ainv_factor: 16.0,
        l_root: 16.0,
        ..Default::default()
    }
}

fn sphere() -> SdfExpr {
    SdfExpr::sphere(Vec3::zeros(), 1.0)
}

#[test]
fn warp_reproduces_the_source_frame() {
    let cams = [orbit(0.0), orbit(4.0)];
    let ex = run(&[sphere()], &cams, &config(1.0)).unwrap();
    let mesh = ex.merged();
    let a = render_meshes(std::slice::from_ref(&mesh), &cams[0], &light()).unwrap();
    let b = render_meshes(&[mesh], &cams[1], &light()).unwrap();
    let flow = gt_flow(&a, &b);
    let warped = warp_bilinear(&b.shade, a.width, a.height, &flow);
    let mut err = 0.0;
    let mut n = 0;
    for (i, w) in warped.iter().enumerate() {
        if flow.valid[i] && !flow.occluded[i] {
            err += (w - a.shade[i]).abs();
            n += 1;
        }
    }
    assert!(n > 1000);
    let mae = err / n as f64;
    assert!(mae <= 2e-2, "{mae}");
}

#[test]
fn identity_pair_scores_one() {
    let cams = [orbit(0.0)];
    let ex = run(&[sphere()], &cams, &config(1.0)).unwrap();
    let a = render_meshes(&ex.meshes, &cams[0], &light()).unwrap();
    let c = consistency(&a, &a, &gt_flow(&a, &a)).unwrap();
    assert!((c.masked_mean - 1.0).abs() < 1e-12);
    assert!((c.unmasked_mean - 1.0).abs() < 1e-12);
}

#[test]
fn single_mesh_beats_per_view_meshes() {
    let cams = [orbit(0.0), orbit(3.0)];
    let cfg = config(3.0);
    let single = run(&[sphere()], &cams, &cfg).unwrap().merged();
    let per: Vec<_> = run_per_view(&[sphere()], &cams, &cfg)
        .unwrap()
        .iter()
        .map(|e| e.merged())
        .collect();
    let a = render_meshes(std::slice::from_ref(&single), &cams[0], &light()).unwrap();
    let b = render_meshes(&[single], &cams[1], &light()).unwrap();
    let same = consistency(&a, &b, &gt_flow(&a, &b)).unwrap();
    let a = render_meshes(&[per[0].clone()], &cams[0], &light()).unwrap();
    let b = render_meshes(&[per[1].clone()], &cams[1], &light()).unwrap();
    let switched = consistency(&a, &b, &gt_flow(&a, &b)).unwrap();
    assert!(same.masked_mean >= 0.99, "{}", same.masked_mean);
    assert!(
        switched.masked_mean < same.masked_mean,
        "{} vs {}",
        switched.masked_mean,
        same.masked_mean
    );
}
