use super::{Camera, Projection};
use crate::Vec3;

/// Straddling cells are clipped against this forward depth before projection.
const NEAR_CLIP: f64 = 1e-6;
/// Relative depth slack of the visibility test.
const DEPTH_SLACK: f64 = 1e-6;

const CUBE_EDGES: [(usize, usize); 12] = [
    (0, 1),
    (2, 3),
    (4, 5),
    (6, 7),
    (0, 2),
    (1, 3),
    (4, 6),
    (5, 7),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// Per-pixel nearest occluder depth for one camera; `+inf` where nothing
/// has been splatted.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthBuffer {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
}

struct ScreenBox {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl ScreenBox {
    fn from_points(pts: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut b = ScreenBox {
            x0: f64::INFINITY,
            x1: f64::NEG_INFINITY,
            y0: f64::INFINITY,
            y1: f64::NEG_INFINITY,
        };
        for (x, y) in pts {
            b.x0 = b.x0.min(x);
            b.x1 = b.x1.max(x);
            b.y0 = b.y0.min(y);
            b.y1 = b.y1.max(y);
        }
        b
    }
}

// Clamp before casting; projections near the camera plane can be huge.
fn clamp_index(v: f64, n: usize) -> usize {
    v.clamp(0.0, (n - 1) as f64) as usize
}

impl DepthBuffer {
    pub fn new(cam: &Camera) -> Self {
        let (width, height) = (cam.width as usize, cam.height as usize);
        DepthBuffer {
            width,
            height,
            depth: vec![f64::INFINITY; width * height],
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.depth[y * self.width + x]
    }

    /// Writes the cell's maximum corner depth into every pixel whose center
    /// lies inside the projected bounding box, keeping the per-pixel minimum.
    /// Cells with any corner behind the camera are not splatted.
    pub fn splat_occluder(&mut self, cam: &Camera, corners: &[Vec3; 8]) {
        let mut pts = [(0.0, 0.0); 8];
        let mut max_depth = 0.0f64;
        for (slot, c) in pts.iter_mut().zip(corners) {
            match cam.project(c) {
                Projection::Pixel { x, y, depth } => {
                    *slot = (x, y);
                    max_depth = max_depth.max(depth);
                }
                Projection::Behind => return,
            }
        }
        let b = ScreenBox::from_points(pts);
        let (w, h) = (self.width as f64, self.height as f64);
        // Pixel i is covered when its center i + 0.5 lies in [x0, x1].
        let i0 = (b.x0 - 0.5).ceil();
        let i1 = (b.x1 - 0.5).floor();
        let j0 = (b.y0 - 0.5).ceil();
        let j1 = (b.y1 - 0.5).floor();
        if i1 < 0.0 || j1 < 0.0 || i0 > w - 1.0 || j0 > h - 1.0 || i0 > i1 || j0 > j1 {
            return;
        }
        let (i0, i1) = (clamp_index(i0, self.width), clamp_index(i1, self.width));
        let (j0, j1) = (clamp_index(j0, self.height), clamp_index(j1, self.height));
        for j in j0..=j1 {
            let row = &mut self.depth[j * self.width..(j + 1) * self.width];
            for d in &mut row[i0..=i1] {
                if max_depth < *d {
                    *d = max_depth;
                }
            }
        }
    }

    /// True when the cell's nearest in-front depth is no farther than the
    /// buffer somewhere in its projected bounding box dilated by one pixel,
    /// and that box meets the image.
    pub fn is_visible(&self, cam: &Camera, corners: &[Vec3; 8]) -> bool {
        let local: Vec<Vec3> = corners.iter().map(|c| cam.to_camera(c)).collect();
        let mut pts = Vec::with_capacity(20);
        let mut min_depth = f64::INFINITY;
        for c in &local {
            if let Projection::Pixel { x, y, depth } = cam.project_camera(c) {
                pts.push((x, y));
                min_depth = min_depth.min(depth);
            }
        }
        if pts.is_empty() {
            return false;
        }
        if pts.len() < 8 {
            // Keep only the part of the cube in front of the camera.
            for &(a, b) in &CUBE_EDGES {
                let (pa, pb) = (local[a], local[b]);
                if (pa.z > NEAR_CLIP) != (pb.z > NEAR_CLIP) {
                    let t = (NEAR_CLIP - pa.z) / (pb.z - pa.z);
                    let q = pa + (pb - pa) * t;
                    if let Projection::Pixel { x, y, depth } = cam.project_camera(&q) {
                        pts.push((x, y));
                        min_depth = min_depth.min(depth);
                    }
                }
            }
        }
        let b = ScreenBox::from_points(pts);
        let (w, h) = (self.width as f64, self.height as f64);
        if b.x1 < 0.0 || b.y1 < 0.0 || b.x0 > w || b.y0 > h {
            return false;
        }
        let i0 = clamp_index(b.x0.floor() - 1.0, self.width);
        let i1 = clamp_index(b.x1.floor() + 1.0, self.width);
        let j0 = clamp_index(b.y0.floor() - 1.0, self.height);
        let j1 = clamp_index(b.y1.floor() + 1.0, self.height);
        let threshold = min_depth * (1.0 - DEPTH_SLACK);
        for j in j0..=j1 {
            let row = &self.depth[j * self.width..(j + 1) * self.width];
            if row[i0..=i1].iter().any(|&d| threshold <= d) {
                return true;
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::FRAC_PI_2;

    fn cube(min: Vec3, side: f64) -> [Vec3; 8] {
        std::array::from_fn(|i| {
            min + Vec3::new(
                (i & 1) as f64 * side,
                ((i >> 1) & 1) as f64 * side,
                ((i >> 2) & 1) as f64 * side,
            )
        })
    }

    fn cam() -> Camera {
        Camera::new(Vec3::zeros(), [1.0, 0.0, 0.0, 0.0], FRAC_PI_2, 64, 64).unwrap()
    }

    #[test]
    fn single_splat_fills_covered_pixels() {
        let cam = cam();
        let mut buf = DepthBuffer::new(&cam);
        let c = cube(Vec3::new(-1.0, -1.0, 9.0), 2.0);
        buf.splat_occluder(&cam, &c);
        assert_eq!(buf.at(32, 32), 11.0);
        assert_eq!(buf.at(0, 0), f64::INFINITY);
        assert!(buf.depth.iter().all(|&d| d == 11.0 || d == f64::INFINITY));
    }

    #[test]
    fn nested_splats_keep_minimum() {
        let cam = cam();
        let mut buf = DepthBuffer::new(&cam);
        buf.splat_occluder(&cam, &cube(Vec3::new(-1.0, -1.0, 9.0), 2.0));
        buf.splat_occluder(&cam, &cube(Vec3::new(-0.5, -0.5, 9.5), 1.0));
        assert_eq!(buf.at(32, 32), 10.5);
    }

    #[test]
    fn straddling_cell_is_not_splatted() {
        let cam = cam();
        let mut buf = DepthBuffer::new(&cam);
        buf.splat_occluder(&cam, &cube(Vec3::new(-1.0, -1.0, -1.0), 2.0));
        assert!(buf.depth.iter().all(|d| d.is_infinite()));
        // It is still tested with its in-front part.
        assert!(buf.is_visible(&cam, &cube(Vec3::new(-1.0, -1.0, -1.0), 2.0)));
    }

    #[test]
    fn visibility_examples() {
        let cam = cam();
        let mut buf = DepthBuffer::new(&cam);
        let probe = cube(Vec3::new(-0.5, -0.5, 10.0), 1.0);
        assert!(buf.is_visible(&cam, &probe));
        // Full-screen occluder at depth 1.
        buf.splat_occluder(
            &cam,
            &cube(Vec3::new(-10.0, -10.0, 0.5), 20.0).map(|mut p| {
                p.z = if p.z > 1.0 { 1.0 } else { 0.9 };
                p
            }),
        );
        assert!(!buf.is_visible(&cam, &probe));
        // Outside the frustum.
        let empty = DepthBuffer::new(&cam);
        assert!(!empty.is_visible(&cam, &cube(Vec3::new(100.0, 0.0, 10.0), 1.0)));
        assert!(!empty.is_visible(&cam, &cube(Vec3::new(0.0, 0.0, -10.0), 1.0)));
    }

    /// Brute force: a corner is hidden if it is behind the camera, projects
    /// outside the image, or some occluder with all corners in front covers
    /// its pixel center and lies entirely nearer.
    fn corner_hidden(cam: &Camera, occluders: &[[Vec3; 8]], p: &Vec3) -> bool {
        let Projection::Pixel { x, y, depth } = cam.project(p) else {
            return true;
        };
        if x < 0.0 || y < 0.0 || x >= cam.width as f64 || y >= cam.height as f64 {
            return true;
        }
        let (cx, cy) = (x.floor() + 0.5, y.floor() + 0.5);
        occluders.iter().any(|occ| {
            let mut proj = Vec::new();
            for c in occ {
                match cam.project(c) {
                    Projection::Pixel { x, y, depth } => proj.push((x, y, depth)),
                    Projection::Behind => return false,
                }
            }
            let x0 = proj.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
            let x1 = proj.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            let y0 = proj.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            let y1 = proj.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            let far = proj.iter().map(|p| p.2).fold(0.0, f64::max);
            (x0..=x1).contains(&cx) && (y0..=y1).contains(&cy) && far < depth
        })
    }

    #[test]
    fn occlusion_is_conservative() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(77);
        for trial in 0..40 {
            let target = Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), 20.0);
            let cam = Camera::look_at(
                Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), 0.0),
                target,
                Vec3::y(),
                rng.random_range(0.5..1.5),
                48,
                32,
            )
            .unwrap();
            let mut cells = Vec::new();
            for _ in 0..150 {
                let side = rng.random_range(0.2..3.0);
                let min = Vec3::new(
                    rng.random_range(-15.0..15.0),
                    rng.random_range(-15.0..15.0),
                    rng.random_range(-5.0..40.0),
                );
                cells.push(cube(min, side));
            }
            let mut buf = DepthBuffer::new(&cam);
            for c in &cells {
                buf.splat_occluder(&cam, c);
            }
            let mut hidden = 0;
            for c in &cells {
                if !buf.is_visible(&cam, c) {
                    hidden += 1;
                    for p in c {
                        assert!(
                            corner_hidden(&cam, &cells, p),
                            "trial {trial}: corner {p:?} is not hidden"
                        );
                    }
                }
            }
            assert!(hidden > 0 || trial > 0);
        }
    }
}
