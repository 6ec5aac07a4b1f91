//! Report records. Everything outside `timings` is a pure function of the
//! inputs, so two runs of the same command differ only there.

use ocmesh_core::octree::{BuildStats, LeafCounts};
use ocmesh_core::pipeline::Extraction;
use ocmesh_core::{Mesh, MeshAudit};
use serde::Serialize;

use crate::args::Tuning;

#[derive(Debug, Serialize)]
pub struct TuningEcho {
    pub pixels_per_cell: f64,
    pub ainv_factor: f64,
    pub d_min: f64,
    pub l_root: f64,
    pub origin: Option<[f64; 3]>,
    pub s_max: usize,
    pub k_dilate: u32,
    pub bisect_iters: u32,
    pub max_fine_cells: usize,
}

impl From<&Tuning> for TuningEcho {
    fn from(t: &Tuning) -> Self {
        TuningEcho {
            pixels_per_cell: t.pixels_per_cell,
            ainv_factor: t.ainv_factor,
            d_min: t.dmin,
            l_root: t.lroot,
            origin: t.origin,
            s_max: t.smax,
            k_dilate: t.kdilate,
            bisect_iters: t.bisect_iters,
            max_fine_cells: t.max_fine_cells,
        }
    }
}

/// Cell counts of each build phase.
#[derive(Debug, Serialize)]
pub struct PhaseCounts {
    pub coarse_nodes: usize,
    pub virtual_grids: usize,
    pub tested_cells: usize,
    pub occupied_cells: usize,
    pub visible_cells: usize,
    pub promoted_cells: usize,
    pub fine_cells: usize,
    pub corner_samples: usize,
}

impl From<&BuildStats> for PhaseCounts {
    fn from(s: &BuildStats) -> Self {
        PhaseCounts {
            coarse_nodes: s.coarse_nodes,
            virtual_grids: s.virtual_grids,
            tested_cells: s.tested_cells,
            occupied_cells: s.occupied_cells,
            visible_cells: s.visible_cells,
            promoted_cells: s.promoted_cells,
            fine_cells: s.fine_cells,
            corner_samples: s.corner_samples,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct MeshReport {
    pub path: Option<String>,
    pub components: usize,
    pub vertices: u64,
    pub faces: u64,
    pub audit: MeshAudit,
}

impl MeshReport {
    pub fn new(mesh: &Mesh, components: usize, path: Option<String>) -> Self {
        MeshReport {
            path,
            components,
            vertices: mesh.used_vertex_count() as u64,
            faces: mesh.triangles.len() as u64,
            audit: mesh.audit(),
        }
    }
}

/// One octree build and its mesh.
#[derive(Debug, Serialize)]
pub struct RunReport {
    /// Camera index in per-view mode.
    pub view: Option<usize>,
    pub a_hat: f64,
    pub a_hat_inv: f64,
    pub d_min: f64,
    pub l_root: f64,
    pub root_origin: [f64; 3],
    pub phases: PhaseCounts,
    pub leaves: LeafCounts,
    pub mesh: MeshReport,
}

impl RunReport {
    pub fn new(ex: &Extraction, view: Option<usize>, path: Option<String>) -> Self {
        let c = &ex.config;
        RunReport {
            view,
            a_hat: c.lod.a_hat,
            a_hat_inv: c.lod.a_hat_inv,
            d_min: c.lod.d_min,
            l_root: c.l_root,
            root_origin: c.root_origin.into(),
            phases: (&ex.complex.stats).into(),
            leaves: ex.complex.counts(),
            mesh: MeshReport::new(&ex.merged(), ex.meshes.len(), path),
        }
    }
}

/// Seconds spent in each phase of one run.
#[derive(Debug, Serialize)]
pub struct RunTimings {
    pub coarse: f64,
    pub occupancy: f64,
    pub visibility: f64,
    pub fine: f64,
    pub contour: f64,
}

impl From<&Extraction> for RunTimings {
    fn from(ex: &Extraction) -> Self {
        let s = &ex.complex.stats;
        RunTimings {
            coarse: s.coarse_time.as_secs_f64(),
            occupancy: s.occupancy_time.as_secs_f64(),
            visibility: s.visibility_time.as_secs_f64(),
            fine: s.fine_time.as_secs_f64(),
            contour: ex.contour_seconds,
        }
    }
}

/// A row of the criteria ablation. The uniform row is closed-form and has
/// no mesh.
#[derive(Debug, Serialize)]
pub struct AblationRow {
    pub label: String,
    pub materialized: bool,
    pub depth: Option<u32>,
    pub leaf_cells: f64,
    pub total_leaves: Option<u64>,
    pub vertices: Option<u64>,
    pub faces: Option<u64>,
}

#[derive(Debug, Serialize)]
pub struct PairReport {
    pub src: usize,
    pub dst: usize,
    pub masked_mean: f64,
    pub unmasked_mean: f64,
    pub masked_pixels: usize,
    pub occluded_pixels: usize,
    pub map: Option<String>,
}
