//! Scenes and camera rigs shared by tests, benchmarks and examples.

use crate::octree::NodeKey;
use crate::sdf::{SdfExpr, TerrainParams};
use crate::view::Camera;
use crate::Vec3;

/// Invisible-region factor used with [`terrain_cameras`]. Smaller factors
/// fill the coarse phase with millions of tiny empty cells near the
/// cameras; 25 keeps the build within a few seconds.
pub const TERRAIN_AINV_FACTOR: f64 = 25.0;

pub const TERRAIN_PARAMS: TerrainParams = TerrainParams {
    seed: 7,
    octaves: 6,
    lacunarity: 2.0,
    gain: 0.5,
    horizontal_scale: 60.0,
    vertical_scale: 15.0,
};

/// Rolling fBm height field, `z` up.
pub fn terrain() -> SdfExpr {
    SdfExpr::terrain(TERRAIN_PARAMS)
}

/// Camera at `position` looking along heading `yaw` (radians from +x)
/// tilted down by `pitch`, with `z` up in the image.
pub fn ground_camera(position: Vec3, yaw: f64, pitch: f64, fov_h_deg: f64, width: u32, height: u32) -> Camera {
    let dir = Vec3::new(yaw.cos() * pitch.cos(), yaw.sin() * pitch.cos(), -pitch.sin());
    Camera::look_at(
        position,
        position + dir,
        Vec3::z(),
        fov_h_deg.to_radians(),
        width,
        height,
    )
    .expect("fixture cameras are valid")
}

/// Height of the terrain surface under `(x, y)` plus `clearance`.
pub fn above_terrain(x: f64, y: f64, clearance: f64) -> Vec3 {
    let t = TERRAIN_PARAMS;
    let h = t.vertical_scale
        * crate::sdf::fbm2(
            t.seed,
            t.octaves,
            t.lacunarity,
            t.gain,
            x / t.horizontal_scale,
            y / t.horizontal_scale,
        );
    Vec3::new(x, y, h + clearance)
}

/// Two 262x148 cameras with a 30 degree field of view (about 2e-3 rad per
/// pixel), 20 m above the ground and tilted down so the view ends at the
/// ground rather than the horizon.
pub fn terrain_cameras() -> Vec<Camera> {
    vec![
        ground_camera(above_terrain(0.0, 0.0, 20.0), 0.0, 0.5, 30.0, 262, 148),
        ground_camera(above_terrain(10.0, -25.0, 20.0), 0.7, 0.5, 30.0, 262, 148),
    ]
}

/// `n` cameras moving forward along +x in steps of `step` meters, tilted
/// down far enough that every frame shows ground and no horizon.
pub fn terrain_path(n: usize, step: f64, width: u32, height: u32) -> Vec<Camera> {
    let z = above_terrain(0.0, 0.0, 12.0).z;
    (0..n)
        .map(|i| ground_camera(Vec3::new(i as f64 * step, 0.0, z), 0.0, 0.7, 55.0, width, height))
        .collect()
}

/// Step, image size and pixels per cell of the view-consistency path.
/// Cells span about three pixels so facets stay larger than the warp's
/// interpolation footprint.
pub const PATH_STEP: f64 = 0.5;
pub const PATH_SIZE: (u32, u32) = (160, 90);
pub const PATH_PIXELS_PER_CELL: f64 = 3.0;
pub const PATH_AINV_FACTOR: f64 = 8.0;

/// A single 10x6 camera with a 20 degree field of view looking steeply
/// down. Its coarse target (about 0.035 rad) keeps the row without
/// occupancy or visibility pruning small enough to build.
pub fn ablation_camera() -> Camera {
    ground_camera(above_terrain(0.0, 0.0, 20.0), 0.0, 0.8, 20.0, 10, 6)
}

pub const ABLATION_AINV_FACTOR: f64 = 8.0;

/// Four cameras 400 m apart on the corners of a square, each with its own
/// heading, so their refined regions do not overlap.
pub fn scattered_cameras(width: u32) -> Vec<Camera> {
    let height = width * 9 / 16;
    [(200.0, 200.0), (-200.0, 200.0), (-200.0, -200.0), (200.0, -200.0)]
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| ground_camera(above_terrain(x, y, 20.0), i as f64 * 1.7, 0.5, 30.0, width, height))
        .collect()
}

/// Cameras on the axes around `center`, each looking at it from `distance`.
pub fn ring_cameras(center: Vec3, distance: f64, count: usize, fov_h_deg: f64, width: u32, height: u32) -> Vec<Camera> {
    const DIRS: [[f64; 3]; 8] = [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
        [0.577, 0.577, 0.577],
        [-0.577, -0.577, -0.577],
    ];
    DIRS.iter()
        .take(count)
        .map(|d| {
            let d = Vec3::from(*d).normalize();
            let up = if d.z.abs() > 0.9 { Vec3::x() } else { Vec3::z() };
            Camera::look_at(center + d * distance, center, up, fov_h_deg.to_radians(), width, height)
                .expect("fixture cameras are valid")
        })
        .collect()
}

/// Fifteen leaves tiling the root: the first octant split into eight
/// children, next to seven unsplit octants.
pub fn nine_cell_leaves() -> Vec<NodeKey> {
    let root = NodeKey::ROOT;
    let mut leaves: Vec<NodeKey> = root.child(0).children().to_vec();
    leaves.extend((1..8).map(|i| root.child(i)));
    leaves
}
