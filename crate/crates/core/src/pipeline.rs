//! End-to-end extraction: LOD targets from cameras, octree, contouring.

use serde::Serialize;

use crate::contour::{extract, ExtractOptions, DEFAULT_BISECT_ITERS};
use crate::mesh::Mesh;
use crate::octree::{
    build, Adjacency, BuildConfig, BuildStats, Criteria, LeafComplex, LeafCounts, DEFAULT_K_DILATE, DEFAULT_L_ROOT,
    DEFAULT_MAX_FINE_CELLS, DEFAULT_S_MAX,
};
use crate::sdf::SdfExpr;
use crate::view::{Camera, LodTargets};
use crate::{Error, Result, Vec3};

pub const DEFAULT_PIXELS_PER_CELL: f64 = 1.0;
pub const DEFAULT_AINV_FACTOR: f64 = 4.0;
pub const DEFAULT_D_MIN: f64 = 1.0;

/// User-facing knobs of one extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub pixels_per_cell: f64,
    pub ainv_factor: f64,
    pub d_min: f64,
    pub l_root: f64,
    /// Root cube corner; `None` centers the cube on the mean camera position.
    pub root_origin: Option<Vec3>,
    pub s_max: usize,
    pub k_dilate: u32,
    pub max_fine_cells: usize,
    pub bisect_iters: u32,
    pub adjacency: Adjacency,
    pub criteria: Criteria,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            pixels_per_cell: DEFAULT_PIXELS_PER_CELL,
            ainv_factor: DEFAULT_AINV_FACTOR,
            d_min: DEFAULT_D_MIN,
            l_root: DEFAULT_L_ROOT,
            root_origin: None,
            s_max: DEFAULT_S_MAX,
            k_dilate: DEFAULT_K_DILATE,
            max_fine_cells: DEFAULT_MAX_FINE_CELLS,
            bisect_iters: DEFAULT_BISECT_ITERS,
            adjacency: Adjacency::Face,
            criteria: Criteria::default(),
        }
    }
}

impl PipelineConfig {
    pub fn build_config(&self, cams: &[Camera]) -> Result<BuildConfig> {
        if cams.is_empty() {
            return Err(Error::Config("at least one camera is required".into()));
        }
        let lod = LodTargets::from_cameras(cams, self.pixels_per_cell, self.ainv_factor, self.d_min)?;
        let mut cfg = match self.root_origin {
            Some(origin) => {
                let mut c = BuildConfig::new(lod, origin);
                c.l_root = self.l_root;
                c
            }
            None => BuildConfig::centered(lod, cams, self.l_root),
        };
        cfg.s_max = self.s_max;
        cfg.k_dilate = self.k_dilate;
        cfg.max_fine_cells = self.max_fine_cells;
        cfg.adjacency = self.adjacency;
        cfg.criteria = self.criteria;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
pub struct Extraction {
    pub config: BuildConfig,
    pub complex: LeafComplex,
    /// One mesh per scene component.
    pub meshes: Vec<Mesh>,
    pub contour_seconds: f64,
}

/// Counts and timings of an extraction, as reported by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractionSummary {
    pub a_hat: f64,
    pub a_hat_inv: f64,
    pub d_min: f64,
    pub l_root: f64,
    pub root_origin: [f64; 3],
    pub build: BuildStats,
    pub leaves: LeafCounts,
    pub vertices: u64,
    pub faces: u64,
    pub contour_seconds: f64,
}

impl Extraction {
    pub fn merged(&self) -> Mesh {
        Mesh::concat(&self.meshes)
    }

    pub fn summary(&self) -> ExtractionSummary {
        let o = self.config.root_origin;
        ExtractionSummary {
            a_hat: self.config.lod.a_hat,
            a_hat_inv: self.config.lod.a_hat_inv,
            d_min: self.config.lod.d_min,
            l_root: self.config.l_root,
            root_origin: [o.x, o.y, o.z],
            build: self.complex.stats.clone(),
            leaves: self.complex.counts(),
            vertices: self.meshes.iter().map(|m| m.used_vertex_count() as u64).sum(),
            faces: self.meshes.iter().map(|m| m.triangles.len() as u64).sum(),
            contour_seconds: self.contour_seconds,
        }
    }
}

/// Builds one octree for all cameras and contours every component on it.
pub fn run(components: &[SdfExpr], cams: &[Camera], cfg: &PipelineConfig) -> Result<Extraction> {
    let scene =
        SdfExpr::union_all(components.to_vec()).ok_or_else(|| Error::Config("scene has no components".into()))?;
    let config = cfg.build_config(cams)?;
    let complex = build(&scene, cams, &config)?;
    let t = std::time::Instant::now();
    let meshes = extract(
        &complex,
        components,
        &ExtractOptions {
            bisect_iters: cfg.bisect_iters,
        },
    )?;
    Ok(Extraction {
        config,
        complex,
        meshes,
        contour_seconds: t.elapsed().as_secs_f64(),
    })
}

/// Baseline: an independent extraction per camera, each seeing only that
/// camera.
pub fn run_per_view(components: &[SdfExpr], cams: &[Camera], cfg: &PipelineConfig) -> Result<Vec<Extraction>> {
    if cams.is_empty() {
        return Err(Error::Config("at least one camera is required".into()));
    }
    cams.iter()
        .map(|c| run(components, std::slice::from_ref(c), cfg))
        .collect()
}
