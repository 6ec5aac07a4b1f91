use serde::Serialize;

use super::{build, BuildConfig, Criteria};
use crate::contour::{extract, ExtractOptions};
use crate::sdf::SdfExpr;
use crate::view::Camera;
use crate::Result;

/// Criteria active in one ablation row. The angular criterion is always on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Toggles {
    pub occupancy: bool,
    pub visibility: bool,
}

impl Toggles {
    pub const ANGULAR: Toggles = Toggles {
        occupancy: false,
        visibility: false,
    };
    pub const OCCUPANCY: Toggles = Toggles {
        occupancy: true,
        visibility: false,
    };
    pub const VISIBILITY: Toggles = Toggles {
        occupancy: true,
        visibility: true,
    };

    pub fn label(&self) -> &'static str {
        match (self.occupancy, self.visibility) {
            (false, false) => "angular",
            (true, false) => "angular+occupancy",
            (true, true) => "angular+occupancy+visibility",
            (false, true) => "angular+visibility",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationCounts {
    pub label: String,
    /// Occupied leaves; every leaf when the occupancy criterion is off.
    pub leaf_cells: u64,
    pub vertices: u64,
    pub faces: u64,
    pub total_leaves: u64,
    pub seconds: f64,
}

/// Builds and meshes the scene with the given criteria.
pub fn lod_ablation_counts(
    components: &[SdfExpr],
    cams: &[Camera],
    cfg: &BuildConfig,
    toggles: Toggles,
    bisect_iters: u32,
) -> Result<AblationCounts> {
    let t = std::time::Instant::now();
    let mut cfg = cfg.clone();
    cfg.criteria = Criteria {
        occupancy: toggles.occupancy,
        visibility: toggles.visibility,
    };
    let scene = SdfExpr::union_all(components.to_vec())
        .ok_or_else(|| crate::Error::Config("scene has no components".into()))?;
    let complex = build(&scene, cams, &cfg)?;
    let meshes = extract(&complex, components, &ExtractOptions { bisect_iters })?;
    let counts = complex.counts();
    let leaf_cells = if toggles.occupancy {
        counts.occupied_leaves
    } else {
        counts.total_leaves
    };
    Ok(AblationCounts {
        label: toggles.label().to_string(),
        leaf_cells,
        vertices: meshes.iter().map(|m| m.used_vertex_count() as u64).sum(),
        faces: meshes.iter().map(|m| m.triangles.len() as u64).sum(),
        total_leaves: counts.total_leaves,
        seconds: t.elapsed().as_secs_f64(),
    })
}

/// Leaf count of a uniform grid fine enough to meet `a_hat` at `d_min`
/// everywhere: `8^depth` with `depth = ceil(log2(l_root / (a_hat d_min)))`.
pub fn theoretical_uniform_leaves(cfg: &BuildConfig) -> (u32, f64) {
    let depth = (cfg.l_root / (cfg.lod.a_hat * cfg.lod.d_min)).log2().ceil().max(0.0) as u32;
    (depth, 8f64.powi(depth as i32))
}
