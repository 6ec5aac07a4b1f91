//! View-consistency evaluation: ray-cast rendering of meshes, ground-truth
//! flow from depth and camera poses, flow warping and SSIM.

mod bvh;
mod ssim;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::mesh::Mesh;
use crate::view::{Camera, Projection};
use crate::{Error, Result, Vec3};

pub use bvh::{Aabb, Bvh, Hit};
pub use ssim::{consistency, gaussian_window, ssim_map, warp_bilinear, Consistency};

/// Relative depth margin beyond which a reprojected pixel counts as occluded.
pub const OCCLUSION_TOLERANCE: f64 = 1e-3;

/// Depth and Lambertian shade of one view. Misses have infinite depth and
/// zero shade; shade is averaged over subpixel samples.
#[derive(Debug, Clone)]
pub struct FrameRender {
    pub camera: Camera,
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
    pub shade: Vec<f64>,
}

impl FrameRender {
    pub fn at(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.depth[i], self.shade[i])
    }

    pub fn hit_count(&self) -> usize {
        self.depth.iter().filter(|d| d.is_finite()).count()
    }
}

/// Per-pixel flow to another view, with validity and occlusion masks.
#[derive(Debug, Clone)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub flow: Vec<[f64; 2]>,
    pub valid: Vec<bool>,
    pub occluded: Vec<bool>,
}

/// Shade samples per pixel along each axis. Depth comes from the pixel
/// center ray alone so that flow stays exact.
pub const SHADE_SAMPLES: usize = 8;

fn lambert(bvh: &Bvh, cam: &Camera, light_dir: &Vec3, px: f64, py: f64) -> Option<(f64, f64)> {
    let dir = cam.ray_direction(px, py);
    let hit = bvh.intersect(&cam.position, &dir)?;
    let [a, b, c] = bvh.triangles[hit.triangle as usize];
    let mut n = (b - a).cross(&(c - a));
    let len = n.norm();
    if len > 0.0 {
        n /= len;
    }
    if n.dot(&dir) > 0.0 {
        n = -n;
    }
    Some((hit.t, n.dot(light_dir).max(0.0)))
}

/// Casts one depth ray through each pixel center and averages Lambertian
/// shade over a stratified `SHADE_SAMPLES` squared subpixel grid. `light_dir`
/// points toward the light; normals are flipped to face the viewer.
pub fn render(bvh: &Bvh, cam: &Camera, light_dir: &Vec3) -> Result<FrameRender> {
    let norm = light_dir.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!(
            "light direction must be unit length, got {norm}"
        )));
    }
    let (w, h) = (cam.width as usize, cam.height as usize);
    let s = SHADE_SAMPLES;
    let pixels: Vec<(f64, f64)> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            let depth = match lambert(bvh, cam, light_dir, x + 0.5, y + 0.5) {
                None => f64::INFINITY,
                Some((t, _)) => t,
            };
            let mut shade = 0.0;
            for sy in 0..s {
                for sx in 0..s {
                    let (ox, oy) = ((sx as f64 + 0.5) / s as f64, (sy as f64 + 0.5) / s as f64);
                    if let Some((_, l)) = lambert(bvh, cam, light_dir, x + ox, y + oy) {
                        shade += l;
                    }
                }
            }
            (depth, shade / (s * s) as f64)
        })
        .collect();
    Ok(FrameRender {
        camera: cam.clone(),
        width: w,
        height: h,
        depth: pixels.iter().map(|p| p.0).collect(),
        shade: pixels.iter().map(|p| p.1).collect(),
    })
}

/// Renders a set of meshes as one scene.
pub fn render_meshes(meshes: &[Mesh], cam: &Camera, light_dir: &Vec3) -> Result<FrameRender> {
    render(&Bvh::from_meshes(meshes), cam, light_dir)
}

/// Farthest of the four pixel-center depths around continuous pixel
/// coordinates. A point behind it is hidden by every surface sample near
/// its footprint, which keeps grazing surfaces from flagging themselves.
fn farthest_depth_around(frame: &FrameRender, x: f64, y: f64) -> f64 {
    let (w, h) = (frame.width, frame.height);
    let sx = (x - 0.5).clamp(0.0, (w - 1) as f64);
    let sy = (y - 0.5).clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    [(x0, y0), (x1, y0), (x0, y1), (x1, y1)]
        .iter()
        .map(|&(x, y)| frame.depth[y * w + x])
        .fold(0.0, f64::max)
}

/// Ground-truth flow from `src` to `dst`: each hit pixel center is lifted
/// to world space with its depth and projected into the destination camera.
pub fn gt_flow(src: &FrameRender, dst: &FrameRender) -> FlowField {
    let (w, h) = (src.width, src.height);
    let cam = &src.camera;
    let results: Vec<([f64; 2], bool, bool)> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let d = src.depth[i];
            if !d.is_finite() {
                return ([0.0; 2], false, false);
            }
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let world = cam.unproject(px, py, d);
            match dst.camera.project(&world) {
                Projection::Behind => ([0.0; 2], false, false),
                Projection::Pixel { x: qx, y: qy, depth } => {
                    let inside = qx >= 0.0 && qy >= 0.0 && qx < dst.width as f64 && qy < dst.height as f64;
                    if !inside {
                        return ([0.0; 2], false, false);
                    }
                    let seen = farthest_depth_around(dst, qx, qy);
                    let occluded = depth - seen > OCCLUSION_TOLERANCE * depth;
                    ([qx - px, qy - py], true, occluded)
                }
            }
        })
        .collect();
    FlowField {
        width: w,
        height: h,
        flow: results.iter().map(|r| r.0).collect(),
        valid: results.iter().map(|r| r.1).collect(),
        occluded: results.iter().map(|r| r.2).collect(),
    }
}

/// Writes a single-channel little-endian PFM, rows bottom to top.
pub fn write_pfm(path: &Path, width: usize, height: usize, data: &[f64]) -> Result<()> {
    let mut buf = format!("Pf\n{width} {height}\n-1.0\n").into_bytes();
    for y in (0..height).rev() {
        for x in 0..width {
            buf.extend_from_slice(&(data[y * width + x] as f32).to_le_bytes());
        }
    }
    write_bytes(path, &buf)
}

/// Writes an 8-bit binary PGM of values clamped to `[0, 1]`.
pub fn write_pgm(path: &Path, width: usize, height: usize, data: &[f64]) -> Result<()> {
    let mut buf = format!("P5\n{width} {height}\n255\n").into_bytes();
    buf.extend(data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    write_bytes(path, &buf)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(|e| Error::io(path, e))
}

/// Reads a PFM written by [`write_pfm`].
pub fn read_pfm(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    };
    let mut lines = 0;
    let mut end = 0;
    while lines < 3 {
        let nl = bytes[end..]
            .iter()
            .position(|b| *b == b'\n')
            .ok_or_else(|| bad("short header"))?;
        end += nl + 1;
        lines += 1;
    }
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8"))?;
    let mut it = header.split_whitespace();
    if it.next() != Some("Pf") {
        return Err(bad("not a grayscale PFM"));
    }
    let w: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad width"))?;
    let h: usize = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("bad height"))?;
    let body = &bytes[end..];
    if body.len() != 4 * w * h {
        return Err(bad("body size does not match dimensions"));
    }
    let mut data = vec![0.0; w * h];
    for (i, chunk) in body.chunks_exact(4).enumerate() {
        let (x, row) = (i % w, i / w);
        data[(h - 1 - row) * w + x] = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
    }
    Ok((w, h, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdf::SdfExpr;

    fn cam(pos: Vec3, target: Vec3, w: u32, h: u32) -> Camera {
        Camera::look_at(pos, target, Vec3::y(), 50f64.to_radians(), w, h).unwrap()
    }

    fn sphere_mesh() -> Mesh {
        let s = SdfExpr::sphere(Vec3::zeros(), 1.0);
        crate::contour::uniform_dual_contour(&s, Vec3::repeat(-2.0), 4.0, 6, 20).unwrap()
    }

    fn plane_quad(z: f64, half: f64) -> Mesh {
        Mesh {
            vertices: vec![
                Vec3::new(-half, -half, z),
                Vec3::new(half, -half, z),
                Vec3::new(half, half, z),
                Vec3::new(-half, half, z),
            ],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
            component_id: 0,
        }
    }

    #[test]
    fn empty_scene_renders_nothing() {
        let c = cam(Vec3::new(0.0, 0.0, -5.0), Vec3::zeros(), 16, 12);
        let r = render_meshes(&[], &c, &Vec3::z()).unwrap();
        assert!(r.depth.iter().all(|d| d.is_infinite()));
    }

    #[test]
    fn sphere_center_depth() {
        // Analytic ray hits the exact sphere at depth 4; the mesh vertices
        // lie on it to bisection accuracy, faces cut chords inside it.
        let c = cam(Vec3::new(0.0, 0.0, -5.0), Vec3::zeros(), 33, 33);
        let r = render_meshes(&[sphere_mesh()], &c, &Vec3::z()).unwrap();
        let (d, _) = r.at(16, 16);
        assert!((d - 4.0).abs() < 5e-3, "{d}");
        // A triangle placed exactly on the tangent plane.
        let quad = plane_quad(-1.0, 0.5);
        let r = render_meshes(&[quad], &c, &Vec3::z()).unwrap();
        assert!((r.at(16, 16).0 - 4.0).abs() < 1e-6);
    }

    #[test]
    fn head_on_plane_has_unit_shade() {
        let c = cam(Vec3::new(0.0, 0.0, -5.0), Vec3::zeros(), 20, 20);
        let r = render_meshes(&[plane_quad(0.0, 10.0)], &c, &(-Vec3::z())).unwrap();
        assert!(r.shade.iter().all(|s| (s - 1.0).abs() < 1e-12));
        assert!(render_meshes(&[plane_quad(0.0, 10.0)], &c, &Vec3::new(0.0, 0.0, 2.0)).is_err());
    }

    #[test]
    fn identity_flow_is_zero() {
        let c = cam(Vec3::new(0.3, 0.2, -4.0), Vec3::zeros(), 40, 30);
        let r = render_meshes(&[sphere_mesh()], &c, &(-Vec3::z())).unwrap();
        let f = gt_flow(&r, &r);
        let mut n = 0;
        for i in 0..f.flow.len() {
            if f.valid[i] {
                n += 1;
                assert!(f.flow[i][0].abs() < 1e-9 && f.flow[i][1].abs() < 1e-9);
                assert!(!f.occluded[i]);
            }
        }
        assert_eq!(n, r.hit_count());
    }

    #[test]
    fn planar_translation_matches_homography() {
        // Fronto-parallel plane at depth D: a sideways shift t moves every
        // pixel by -f t / D.
        let d = 6.0;
        let t = 0.25;
        let a = cam(Vec3::new(0.0, 0.0, -d), Vec3::new(0.0, 0.0, 0.0), 64, 48);
        let b = Camera {
            position: a.position + a.orientation * Vec3::x() * t,
            ..a.clone()
        };
        let plane = plane_quad(0.0, 50.0);
        let ra = render_meshes(std::slice::from_ref(&plane), &a, &(-Vec3::z())).unwrap();
        let rb = render_meshes(&[plane], &b, &(-Vec3::z())).unwrap();
        let f = gt_flow(&ra, &rb);
        let expect = -a.focal() * t / d;
        let mut checked = 0;
        for i in 0..f.flow.len() {
            if f.valid[i] {
                assert!((f.flow[i][0] - expect).abs() < 1e-3, "{:?}", f.flow[i]);
                assert!(f.flow[i][1].abs() < 1e-3);
                checked += 1;
            }
        }
        assert!(checked > 1000);
        // The leftmost column maps outside the destination image.
        assert!(expect < -1.0);
        assert!(!f.valid[20 * 64]);
    }

    #[test]
    fn pfm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.pfm");
        let data = vec![1.0, 2.5, f64::INFINITY, 4.0, 5.0, 6.0];
        write_pfm(&p, 3, 2, &data).unwrap();
        let (w, h, back) = read_pfm(&p).unwrap();
        assert_eq!((w, h), (3, 2));
        assert_eq!(back, data);
    }
}
