//! Multi-view level-of-detail octree.
//!
//! Construction runs in three phases:
//!
//! 1. [`build_coarse`]: a max-priority queue on angular diameter subdivides
//!    the root until every leaf is below the invisible-region target. Past
//!    the node budget, queued nodes become dense virtual grids that are
//!    never stored cell by cell.
//! 2. [`flood_fill_occupancy`] and [`visibility_pass`]: occupancy spreads
//!    from seed cells along neighbors of sign-changing cells, then occupied
//!    cells are tested against per-camera depth buffers and the visible set
//!    is dilated.
//! 3. [`build_fine`]: visible occupied cells are refined down to the visible
//!    target, promoting unoccupied visible neighbors when the surface runs
//!    into them.
//!
//! Cells are addressed by [`NodeKey`]; corner samples live on a global
//! integer lattice so neighbors at any level share bit-identical values.

mod ablation;
mod coarse;
mod complex;
mod fine;
mod key;
mod occupancy;
mod visibility;

use std::time::Duration;

use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::sdf::SdfExpr;
use crate::view::{Camera, LodTargets};
use crate::{Error, Result, Vec3};

pub use ablation::{lod_ablation_counts, theoretical_uniform_leaves, AblationCounts, Toggles};
pub use coarse::{build_coarse, max_virtual_child_diameter, virtual_grid_log2};
pub use complex::{has_sign_change, AngularAudit, LeafComplex, LeafCounts, LeafInfo, LeafStage};
pub use fine::build_fine;
pub use key::{octant_offset, Corner, Frame, NodeKey, LATTICE_BITS, LATTICE_EXTENT, MAX_LEVEL};
pub use occupancy::flood_fill_occupancy;
pub use visibility::visibility_pass;

/// Which cells count as neighbors for flood fill and dilation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Adjacency {
    Face,
    /// Face, edge and corner neighbors.
    Full,
}

/// Which pruning criteria are active. The angular criterion always is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Criteria {
    pub occupancy: bool,
    pub visibility: bool,
}

impl Default for Criteria {
    fn default() -> Self {
        Criteria {
            occupancy: true,
            visibility: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildConfig {
    pub l_root: f64,
    pub s_max: usize,
    pub k_dilate: u32,
    pub lod: LodTargets,
    pub root_origin: Vec3,
    pub max_fine_cells: usize,
    pub adjacency: Adjacency,
    pub criteria: Criteria,
}

pub const DEFAULT_L_ROOT: f64 = 1000.0;
pub const DEFAULT_S_MAX: usize = 500_000;
pub const DEFAULT_K_DILATE: u32 = 2;
pub const DEFAULT_MAX_FINE_CELLS: usize = 50_000_000;

impl BuildConfig {
    pub fn new(lod: LodTargets, root_origin: Vec3) -> Self {
        BuildConfig {
            l_root: DEFAULT_L_ROOT,
            s_max: DEFAULT_S_MAX,
            k_dilate: DEFAULT_K_DILATE,
            lod,
            root_origin,
            max_fine_cells: DEFAULT_MAX_FINE_CELLS,
            adjacency: Adjacency::Face,
            criteria: Criteria::default(),
        }
    }

    /// Root cube of side `l_root` centered on the mean camera position.
    pub fn centered(lod: LodTargets, cams: &[Camera], l_root: f64) -> Self {
        let mean = cams.iter().map(|c| c.position).sum::<Vec3>() / cams.len().max(1) as f64;
        let h = 0.5 * l_root;
        let mut cfg = Self::new(lod, mean - Vec3::new(h, h, h));
        cfg.l_root = l_root;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l_root > 0.0 && self.l_root.is_finite()) {
            return Err(Error::Config(format!("l_root must be positive, got {}", self.l_root)));
        }
        if self.s_max < 1 {
            return Err(Error::Config("s_max must be at least 1".into()));
        }
        if !self.root_origin.iter().all(|c| c.is_finite()) {
            return Err(Error::Config("root origin must be finite".into()));
        }
        LodTargets::new(self.lod.a_hat, self.lod.a_hat_inv, self.lod.d_min)?;
        Ok(())
    }

    pub fn frame(&self) -> Frame {
        Frame::new(self.root_origin, self.l_root)
    }
}

/// Status of a node materialized by the coarse phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoarseKind {
    Internal,
    Leaf,
    /// Dense `2^log2n` per side grid of virtual children.
    Grid {
        log2n: u8,
    },
}

/// Flags of a coarse-complex cell (materialized leaf or virtual cell)
/// that some phase has touched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CellFlags {
    pub occupied: bool,
    pub visible: bool,
    /// Corner samples were checked by the flood fill.
    pub tested: bool,
    /// Subdivided by the fine phase.
    pub refined: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FineKind {
    Internal,
    Leaf { occupied: bool },
}

/// Signed distance samples keyed by lattice corner. Each corner is evaluated
/// once; values are exactly what [`SdfExpr::eval`] returns.
#[derive(Debug, Clone, Default)]
pub struct CornerCache {
    values: FxHashMap<Corner, f64>,
}

impl CornerCache {
    /// Evaluates every corner not yet cached in one batch.
    pub fn ensure(&mut self, expr: &SdfExpr, frame: &Frame, corners: impl IntoIterator<Item = Corner>) -> usize {
        let mut missing: Vec<Corner> = corners.into_iter().filter(|c| !self.values.contains_key(c)).collect();
        if missing.is_empty() {
            return 0;
        }
        missing.sort_unstable();
        missing.dedup();
        let points: Vec<Vec3> = missing.iter().map(|c| frame.point(c)).collect();
        let values = expr.eval_slice(&points);
        self.values.extend(missing.iter().copied().zip(values));
        missing.len()
    }

    /// Records samples taken elsewhere; they must come from the same field.
    pub(crate) fn insert_all(&mut self, samples: impl IntoIterator<Item = (Corner, f64)>) {
        self.values.extend(samples);
    }

    #[inline]
    pub fn get(&self, c: &Corner) -> Option<f64> {
        self.values.get(c).copied()
    }

    /// Cached value; panics if the corner was never evaluated.
    #[inline]
    pub fn value(&self, c: &Corner) -> f64 {
        match self.values.get(c) {
            Some(v) => *v,
            None => panic!("corner {c:?} was not evaluated"),
        }
    }

    #[inline]
    pub fn contains(&self, c: &Corner) -> bool {
        self.values.contains_key(c)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &Corner> {
        self.values.keys()
    }

    /// Same key set, values from another field.
    pub fn resample(&self, expr: &SdfExpr, frame: &Frame) -> CornerCache {
        let mut out = CornerCache::default();
        out.ensure(expr, frame, self.values.keys().copied());
        out
    }
}

/// Counts and timings of one build.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BuildStats {
    pub coarse_nodes: usize,
    pub virtual_grids: usize,
    pub tested_cells: usize,
    pub occupied_cells: usize,
    pub visible_cells: usize,
    pub promoted_cells: usize,
    pub fine_cells: usize,
    pub corner_samples: usize,
    #[serde(serialize_with = "ser_secs")]
    pub coarse_time: Duration,
    #[serde(serialize_with = "ser_secs")]
    pub occupancy_time: Duration,
    #[serde(serialize_with = "ser_secs")]
    pub visibility_time: Duration,
    #[serde(serialize_with = "ser_secs")]
    pub fine_time: Duration,
}

fn ser_secs<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

/// The evolving cell complex.
#[derive(Debug, Clone)]
pub struct OctreeState {
    pub frame: Frame,
    pub lod: LodTargets,
    pub criteria: Criteria,
    pub coarse: FxHashMap<NodeKey, CoarseKind>,
    /// Sorted keys of virtual-grid nodes.
    pub grids: Vec<NodeKey>,
    pub cells: FxHashMap<NodeKey, CellFlags>,
    pub fine: FxHashMap<NodeKey, FineKind>,
    pub corners: CornerCache,
    pub stats: BuildStats,
}

/// Runs all three phases.
pub fn build(expr: &SdfExpr, cams: &[Camera], cfg: &BuildConfig) -> Result<LeafComplex> {
    let t = std::time::Instant::now();
    let mut state = build_coarse(cams, cfg)?;
    state.stats.coarse_time = t.elapsed();

    let t = std::time::Instant::now();
    flood_fill_occupancy(&mut state, expr, cfg.adjacency);
    state.stats.occupancy_time = t.elapsed();

    let t = std::time::Instant::now();
    visibility_pass(&mut state, cams, cfg);
    state.stats.visibility_time = t.elapsed();

    let t = std::time::Instant::now();
    let mut complex = build_fine(state, expr, cams, cfg)?;
    complex.state.stats.fine_time = t.elapsed();
    Ok(complex)
}
