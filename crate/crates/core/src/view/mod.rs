//! Pinhole cameras, angular-diameter targets and the conservative
//! multi-camera depth buffer.

mod depth;

use std::path::Path;

use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec3};

pub use depth::DepthBuffer;

/// Pinhole camera. The camera frame has `x` to the right, `y` down and `z`
/// forward; `orientation` maps camera-frame vectors to world vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub position: Vec3,
    pub orientation: UnitQuaternion<f64>,
    /// Horizontal field of view in radians.
    pub fov_h: f64,
    pub width: u32,
    pub height: u32,
}

/// Result of projecting a world point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Pixel { x: f64, y: f64, depth: f64 },
    Behind,
}

impl Camera {
    /// Builds a camera from a `(w, x, y, z)` quaternion, which must already be
    /// normalized to within `1e-9`.
    pub fn new(position: Vec3, wxyz: [f64; 4], fov_h: f64, width: u32, height: u32) -> Result<Self> {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        if (q.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "camera quaternion has norm {}, expected 1",
                q.norm()
            )));
        }
        Self::from_orientation(position, UnitQuaternion::new_unchecked(q), fov_h, width, height)
    }

    pub fn from_orientation(
        position: Vec3,
        orientation: UnitQuaternion<f64>,
        fov_h: f64,
        width: u32,
        height: u32,
    ) -> Result<Self> {
        if !(fov_h > 0.0 && fov_h < std::f64::consts::PI) {
            return Err(Error::Config(format!("fov_h must lie in (0, pi), got {fov_h}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::Config("camera resolution must be at least 1x1".into()));
        }
        if !position.iter().all(|c| c.is_finite()) {
            return Err(Error::Config("camera position must be finite".into()));
        }
        Ok(Camera {
            position,
            orientation,
            fov_h,
            width,
            height,
        })
    }

    /// Camera at `position` looking at `target`, with `up` roughly up in the image.
    pub fn look_at(position: Vec3, target: Vec3, up: Vec3, fov_h: f64, width: u32, height: u32) -> Result<Self> {
        let forward = (target - position).normalize();
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right);
        let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[right, down, forward]));
        Self::from_orientation(
            position,
            UnitQuaternion::from_rotation_matrix(&rot),
            fov_h,
            width,
            height,
        )
    }

    /// Focal length in pixels.
    pub fn focal(&self) -> f64 {
        0.5 * self.width as f64 / (0.5 * self.fov_h).tan()
    }

    /// Vertical field of view implied by square pixels.
    pub fn fov_v(&self) -> f64 {
        2.0 * ((0.5 * self.fov_h).tan() * self.height as f64 / self.width as f64).atan()
    }

    pub fn principal_point(&self) -> (f64, f64) {
        (0.5 * self.width as f64, 0.5 * self.height as f64)
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.orientation.inverse_transform_vector(&(p - self.position))
    }

    pub fn project(&self, p: &Vec3) -> Projection {
        self.project_camera(&self.to_camera(p))
    }

    /// Projects a point already expressed in the camera frame.
    pub fn project_camera(&self, c: &Vec3) -> Projection {
        if c.z <= 0.0 {
            return Projection::Behind;
        }
        let f = self.focal();
        let (cx, cy) = self.principal_point();
        Projection::Pixel {
            x: cx + f * c.x / c.z,
            y: cy + f * c.y / c.z,
            depth: c.z,
        }
    }

    /// World-space direction through continuous pixel coordinates, scaled so
    /// that its camera-forward component is 1.
    pub fn ray_direction(&self, px: f64, py: f64) -> Vec3 {
        let f = self.focal();
        let (cx, cy) = self.principal_point();
        self.orientation
            .transform_vector(&Vec3::new((px - cx) / f, (py - cy) / f, 1.0))
    }

    /// Inverse of [`Camera::project`] for a given forward depth.
    pub fn unproject(&self, px: f64, py: f64, depth: f64) -> Vec3 {
        self.position + self.ray_direction(px, py) * depth
    }

    /// `pixels_per_cell * fov_h / width`.
    pub fn target_angular_diameter(&self, pixels_per_cell: f64) -> Result<f64> {
        target_angular_diameter(self, pixels_per_cell)
    }
}

pub fn target_angular_diameter(cam: &Camera, pixels_per_cell: f64) -> Result<f64> {
    if !(pixels_per_cell > 0.0 && pixels_per_cell.is_finite()) {
        return Err(Error::Precondition(format!(
            "pixels_per_cell must be positive, got {pixels_per_cell}"
        )));
    }
    Ok(pixels_per_cell * cam.fov_h / cam.width as f64)
}

/// Largest angular diameter of a cube of side `side` centered at `center`
/// over all cameras: `side / max(d_min, min_cam |center - cam|)`.
pub fn node_angular_diameter(center: &Vec3, side: f64, cams: &[Camera], d_min: f64) -> f64 {
    let nearest = cams
        .iter()
        .map(|c| (center - c.position).norm())
        .fold(f64::INFINITY, f64::min);
    side / nearest.max(d_min)
}

/// Target angular diameters for visible (`a_hat`) and invisible
/// (`a_hat_inv`) regions, and the distance clamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LodTargets {
    pub a_hat: f64,
    pub a_hat_inv: f64,
    pub d_min: f64,
}

impl LodTargets {
    pub fn new(a_hat: f64, a_hat_inv: f64, d_min: f64) -> Result<Self> {
        if !(a_hat > 0.0 && a_hat_inv > a_hat && d_min > 0.0) {
            return Err(Error::Config(format!(
                "LOD targets need a_hat_inv > a_hat > 0 and d_min > 0 (got {a_hat}, {a_hat_inv}, {d_min})"
            )));
        }
        Ok(LodTargets {
            a_hat,
            a_hat_inv,
            d_min,
        })
    }

    /// Finest per-camera target over all cameras; `a_hat_inv = factor * a_hat`.
    pub fn from_cameras(cams: &[Camera], pixels_per_cell: f64, inv_factor: f64, d_min: f64) -> Result<Self> {
        if cams.is_empty() {
            return Err(Error::Config("at least one camera is required".into()));
        }
        let mut a_hat = f64::INFINITY;
        for cam in cams {
            a_hat = a_hat.min(cam.target_angular_diameter(pixels_per_cell)?);
        }
        if inv_factor.is_nan() || inv_factor <= 1.0 {
            return Err(Error::Config(format!(
                "a_hat_inv factor must exceed 1, got {inv_factor}"
            )));
        }
        Self::new(a_hat, inv_factor * a_hat, d_min)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CameraRecord {
    position: [f64; 3],
    quaternion: [f64; 4],
    fov_h_deg: f64,
    width: u32,
    height: u32,
}

/// Parses a camera file: a JSON array of
/// `{"position", "quaternion" (w, x, y, z), "fov_h_deg", "width", "height"}`.
pub fn parse_cameras(text: &str) -> Result<Vec<Camera>> {
    let records: Vec<CameraRecord> =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("camera file: {e}")))?;
    records
        .into_iter()
        .map(|r| {
            Camera::new(
                Vec3::from(r.position),
                r.quaternion,
                r.fov_h_deg.to_radians(),
                r.width,
                r.height,
            )
        })
        .collect()
}

pub fn load_cameras(path: &Path) -> Result<Vec<Camera>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cameras(&text)
}

pub fn cameras_to_json(cams: &[Camera]) -> String {
    let records: Vec<CameraRecord> = cams
        .iter()
        .map(|c| {
            let q = c.orientation.quaternion();
            CameraRecord {
                position: [c.position.x, c.position.y, c.position.z],
                quaternion: [q.w, q.i, q.j, q.k],
                fov_h_deg: c.fov_h.to_degrees(),
                width: c.width,
                height: c.height,
            }
        })
        .collect();
    serde_json::to_string_pretty(&records).expect("camera records serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn axis_camera(fov: f64, w: u32, h: u32) -> Camera {
        Camera::new(Vec3::zeros(), [1.0, 0.0, 0.0, 0.0], fov, w, h).unwrap()
    }

    #[test]
    fn target_diameter_examples() {
        let c = axis_camera(1.0, 1000, 500);
        assert_eq!(target_angular_diameter(&c, 1.0).unwrap(), 0.001);
        let c = axis_camera(FRAC_PI_2, 1280, 720);
        let a = target_angular_diameter(&c, 2.0).unwrap();
        assert!((a - 2.454e-3).abs() < 1e-6);
        assert!(target_angular_diameter(&c, 0.0).is_err());
    }

    #[test]
    fn node_diameter_examples() {
        let at = |d: f64| Camera::new(Vec3::new(d, 0.0, 0.0), [1.0, 0.0, 0.0, 0.0], 1.0, 10, 10).unwrap();
        let c = Vec3::zeros();
        assert_eq!(node_angular_diameter(&c, 10.0, &[at(100.0)], 1.0), 0.1);
        assert_eq!(node_angular_diameter(&c, 10.0, &[at(100.0), at(20.0)], 1.0), 0.5);
        assert_eq!(node_angular_diameter(&c, 10.0, &[at(0.2)], 1.0), 10.0);
    }

    #[test]
    fn projection_examples() {
        let c = axis_camera(FRAC_PI_2, 100, 100);
        assert_eq!(
            c.project(&Vec3::new(0.0, 0.0, 5.0)),
            Projection::Pixel {
                x: 50.0,
                y: 50.0,
                depth: 5.0
            }
        );
        assert_eq!(c.project(&Vec3::new(0.0, 0.0, -1.0)), Projection::Behind);
        assert_eq!(c.project(&Vec3::new(0.0, 0.0, 0.0)), Projection::Behind);
        // tan(fov_h / 2) = 1, so x = z lands on the right image edge.
        match c.project(&Vec3::new(1.0, 0.0, 1.0)) {
            Projection::Pixel { x, y, depth } => {
                assert!((x - 100.0).abs() < 1e-12);
                assert!((y - 50.0).abs() < 1e-12);
                assert_eq!(depth, 1.0);
            }
            Projection::Behind => panic!(),
        }
    }

    #[test]
    fn vertical_fov_from_aspect() {
        let c = axis_camera(FRAC_PI_2, 200, 100);
        assert!((c.fov_v() - 2.0 * 0.5f64.atan()).abs() < 1e-15);
    }

    #[test]
    fn look_at_faces_target() {
        let c = Camera::look_at(
            Vec3::new(1.0, 2.0, 3.0),
            Vec3::new(11.0, 2.0, 3.0),
            Vec3::z(),
            1.2,
            64,
            48,
        )
        .unwrap();
        match c.project(&Vec3::new(11.0, 2.0, 3.0)) {
            Projection::Pixel { x, y, depth } => {
                assert!((x - 32.0).abs() < 1e-9 && (y - 24.0).abs() < 1e-9);
                assert!((depth - 10.0).abs() < 1e-12);
            }
            _ => panic!(),
        }
        // World up appears above the principal point (smaller y).
        match c.project(&Vec3::new(11.0, 2.0, 4.0)) {
            Projection::Pixel { y, .. } => assert!(y < 24.0),
            _ => panic!(),
        }
    }

    #[test]
    fn invalid_cameras() {
        assert!(Camera::new(Vec3::zeros(), [1.0, 0.0, 0.0, 0.0], PI, 10, 10).is_err());
        assert!(Camera::new(Vec3::zeros(), [1.0, 0.0, 0.0, 0.0], 1.0, 0, 10).is_err());
        assert!(Camera::new(Vec3::zeros(), [1.1, 0.0, 0.0, 0.0], 1.0, 10, 10).is_err());
        assert!(LodTargets::new(0.1, 0.1, 1.0).is_err());
        assert!(LodTargets::from_cameras(&[], 1.0, 4.0, 1.0).is_err());
    }

    #[test]
    fn camera_file_round_trip() {
        let text = r#"[{"position":[1,2,3],"quaternion":[1,0,0,0],"fov_h_deg":90,"width":64,"height":32}]"#;
        let cams = parse_cameras(text).unwrap();
        assert_eq!(cams.len(), 1);
        assert!((cams[0].fov_h - FRAC_PI_2).abs() < 1e-15);
        let back = parse_cameras(&cameras_to_json(&cams)).unwrap();
        assert_eq!(back[0].width, 64);
        assert!((back[0].fov_h - cams[0].fov_h).abs() < 1e-12);
        assert!(parse_cameras("{}").is_err());
    }

    proptest! {
        #[test]
        fn unproject_inverts_project(
            x in -50.0..50.0f64, y in -50.0..50.0f64, z in -50.0..50.0f64,
            yaw in -3.0..3.0f64, pitch in -1.4..1.4f64,
        ) {
            let dir = Vec3::new(yaw.cos() * pitch.cos(), yaw.sin() * pitch.cos(), pitch.sin());
            let pos = Vec3::new(1.0, -2.0, 0.5);
            let cam = Camera::look_at(pos, pos + dir, Vec3::z(), 1.3, 320, 200).unwrap();
            let p = Vec3::new(x, y, z);
            if let Projection::Pixel { x: px, y: py, depth } = cam.project(&p) {
                let q = cam.unproject(px, py, depth);
                prop_assert!((q - p).norm() <= 1e-9 * p.norm().max(1.0));
            }
        }

        #[test]
        fn angular_diameter_monotone(d1 in 2.0..1000.0f64, extra in 0.1..100.0f64, side in 0.1..10.0f64) {
            let cam = |d: f64| Camera::new(Vec3::new(d, 0.0, 0.0), [1.0, 0.0, 0.0, 0.0], 1.0, 10, 10).unwrap();
            let near = node_angular_diameter(&Vec3::zeros(), side, &[cam(d1)], 1.0);
            let far = node_angular_diameter(&Vec3::zeros(), side, &[cam(d1 + extra)], 1.0);
            prop_assert!(far < near);
            let doubled = node_angular_diameter(&Vec3::zeros(), 2.0 * side, &[cam(d1)], 1.0);
            prop_assert!((doubled - 2.0 * near).abs() <= 1e-15 * doubled);
        }
    }
}
