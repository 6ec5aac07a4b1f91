use std::ops::Deref;

use rustc_hash::FxHashMap;
use serde::Serialize;

use super::{
    coarse::max_virtual_child_diameter, Adjacency, CellFlags, CoarseKind, Corner, CornerCache, Criteria, FineKind,
    Frame, NodeKey, OctreeState, LATTICE_EXTENT,
};
use crate::sdf::{is_inside, SdfExpr};
use crate::view::{node_angular_diameter, Camera, LodTargets};
use crate::{Error, Result};

/// Where a leaf of the final complex comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafStage {
    Coarse,
    Virtual,
    Fine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeafInfo {
    pub key: NodeKey,
    pub stage: LeafStage,
    pub occupied: bool,
    pub visible: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LeafCounts {
    /// Leaves whose corner samples straddle the surface.
    pub occupied_leaves: u64,
    /// Leaves held in memory with evaluated corners.
    pub explicit_leaves: u64,
    /// All leaves, virtual ones included.
    pub total_leaves: u64,
}

/// Result of the exhaustive angular-diameter walk.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AngularAudit {
    pub checked_leaves: u64,
    pub checked_grids: u64,
    pub violations: u64,
    /// Largest `A / a_hat` over visible occupied leaves.
    pub worst_visible_ratio: f64,
    /// Largest `A / a_hat_inv` over all other leaves and virtual grids.
    pub worst_other_ratio: f64,
}

impl AngularAudit {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

pub(super) const FACE_OFFSETS: [[i64; 3]; 6] = [[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0], [0, 0, -1], [0, 0, 1]];

pub(super) fn adjacency_offsets(adj: Adjacency) -> Vec<[i64; 3]> {
    match adj {
        Adjacency::Face => FACE_OFFSETS.to_vec(),
        Adjacency::Full => (0..27i64)
            .map(|i| [i % 3 - 1, (i / 3) % 3 - 1, i / 9 - 1])
            .filter(|d| *d != [0, 0, 0])
            .collect(),
    }
}

/// Both signs among the samples; zero counts as outside.
#[inline]
pub fn has_sign_change(values: &[f64]) -> bool {
    let inside = values.iter().filter(|v| is_inside(**v)).count();
    inside > 0 && inside < values.len()
}

// Does `cell` (inside or equal to `region`) lie against the side of
// `region` facing direction `-d`?
fn touches_side(cell: &NodeKey, region: &NodeKey, d: [i64; 3]) -> bool {
    let r = cell.level() - region.level();
    (0..3).all(|a| match d[a] {
        1 => cell.ijk[a] == region.ijk[a] << r,
        -1 => cell.ijk[a] == ((region.ijk[a] + 1) << r) - 1,
        _ => true,
    })
}

impl OctreeState {
    /// Flags of a coarse-complex cell; untouched cells get the defaults
    /// implied by the active criteria.
    pub fn flags(&self, key: &NodeKey) -> CellFlags {
        self.cells.get(key).copied().unwrap_or(CellFlags {
            visible: !self.criteria.visibility,
            ..CellFlags::default()
        })
    }

    pub(super) fn flags_mut(&mut self, key: NodeKey) -> &mut CellFlags {
        let visible = !self.criteria.visibility;
        self.cells.entry(key).or_insert(CellFlags {
            visible,
            ..CellFlags::default()
        })
    }

    /// Coarse-complex cell containing the unit lattice cube at `u`.
    pub fn locate_coarse(&self, u: Corner) -> NodeKey {
        let mut key = NodeKey::ROOT;
        loop {
            match self.coarse[&key] {
                CoarseKind::Internal => key = NodeKey::containing(u, key.level() + 1),
                CoarseKind::Leaf => return key,
                CoarseKind::Grid { log2n } => return NodeKey::containing(u, key.level() + log2n as u32),
            }
        }
    }

    /// Final leaf containing the unit lattice cube at `u`.
    pub fn locate_leaf(&self, u: Corner) -> NodeKey {
        let mut key = self.locate_coarse(u);
        if !self.flags(&key).refined {
            return key;
        }
        loop {
            key = NodeKey::containing(u, key.level() + 1);
            match self.fine.get(&key) {
                Some(FineKind::Internal) => continue,
                Some(FineKind::Leaf { .. }) => return key,
                None => panic!("refined cell without fine child {key}"),
            }
        }
    }

    /// Virtual cells of a grid node, optionally only those on its boundary.
    pub fn grid_cells(&self, grid: &NodeKey, log2n: u32, boundary_only: bool) -> Vec<NodeKey> {
        let n = 1u64 << log2n;
        let level = grid.level() + log2n;
        let base = grid.ijk.map(|c| c << log2n);
        let mut out = Vec::new();
        let edge = |c: u64| c == 0 || c == n - 1;
        for i in 0..n {
            for j in 0..n {
                if boundary_only && !edge(i) && !edge(j) {
                    out.push(NodeKey::new(level, [base[0] + i, base[1] + j, base[2]]));
                    if n > 1 {
                        out.push(NodeKey::new(level, [base[0] + i, base[1] + j, base[2] + n - 1]));
                    }
                } else {
                    for k in 0..n {
                        out.push(NodeKey::new(level, [base[0] + i, base[1] + j, base[2] + k]));
                    }
                }
            }
        }
        out
    }

    /// Whether the flood fill tests `key` as a seed: a materialized coarse
    /// leaf, or a virtual cell on the boundary of its grid.
    pub fn is_seed(&self, key: &NodeKey) -> bool {
        let mut node = NodeKey::ROOT;
        loop {
            match self.coarse.get(&node) {
                Some(CoarseKind::Leaf) => return node == *key,
                Some(CoarseKind::Internal) if node.level() < key.level() => {
                    node = key.ancestor(node.level() + 1);
                }
                Some(CoarseKind::Grid { log2n }) => {
                    let n = *log2n as u32;
                    if key.level() != node.level() + n {
                        return false;
                    }
                    let last = (1u64 << n) - 1;
                    return (0..3).any(|a| {
                        let local = key.ijk[a] - (node.ijk[a] << n);
                        local == 0 || local == last
                    });
                }
                _ => return false,
            }
        }
    }

    /// Materialized coarse leaves and every virtual cell.
    pub fn all_coarse_cells(&self) -> Vec<NodeKey> {
        let mut out: Vec<NodeKey> = self
            .coarse
            .iter()
            .filter(|(_, k)| **k == CoarseKind::Leaf)
            .map(|(k, _)| *k)
            .collect();
        for g in &self.grids {
            if let CoarseKind::Grid { log2n } = self.coarse[g] {
                out.extend(self.grid_cells(g, log2n as u32, false));
            }
        }
        out.sort_unstable();
        out
    }

    /// Coarse-complex neighbors of a coarse-complex cell, appended to `out`.
    pub fn coarse_neighbors(&self, cell: &NodeKey, offsets: &[[i64; 3]], out: &mut Vec<NodeKey>) {
        for &d in offsets {
            self.coarse_neighbors_dir(cell, d, out);
        }
    }

    fn coarse_neighbors_dir(&self, cell: &NodeKey, d: [i64; 3], out: &mut Vec<NodeKey>) {
        let Some(target) = cell.offset(d) else {
            return;
        };
        let l = target.level();
        let mut key = NodeKey::ROOT;
        loop {
            match self.coarse[&key] {
                CoarseKind::Leaf => {
                    out.push(key);
                    return;
                }
                CoarseKind::Grid { log2n } => {
                    let m = key.level() + log2n as u32;
                    if m <= l {
                        out.push(target.ancestor(m));
                    } else {
                        self.grid_cells_touching(&key, log2n as u32, &target, d, out);
                    }
                    return;
                }
                CoarseKind::Internal => {
                    if key.level() == l {
                        self.descendants_touching(&key, &target, d, out);
                        return;
                    }
                    key = target.ancestor(key.level() + 1);
                }
            }
        }
    }

    fn descendants_touching(&self, node: &NodeKey, region: &NodeKey, d: [i64; 3], out: &mut Vec<NodeKey>) {
        for c in node.children() {
            if !touches_side(&c, region, d) {
                continue;
            }
            match self.coarse[&c] {
                CoarseKind::Leaf => out.push(c),
                CoarseKind::Internal => self.descendants_touching(&c, region, d, out),
                CoarseKind::Grid { log2n } => self.grid_cells_touching(&c, log2n as u32, region, d, out),
            }
        }
    }

    // Virtual cells of `grid` inside the deeper of `grid` and `region` that
    // lie against the required side of `region`.
    fn grid_cells_touching(&self, grid: &NodeKey, log2n: u32, region: &NodeKey, d: [i64; 3], out: &mut Vec<NodeKey>) {
        let m = grid.level() + log2n;
        let inner = if grid.level() >= region.level() { grid } else { region };
        let r = m - inner.level();
        let rr = m - region.level();
        let mut ranges = [(0u64, 0u64); 3];
        for a in 0..3 {
            let lo = inner.ijk[a] << r;
            let hi = (inner.ijk[a] + 1) << r;
            ranges[a] = match d[a] {
                1 => {
                    let v = region.ijk[a] << rr;
                    (v.max(lo), (v + 1).min(hi))
                }
                -1 => {
                    let v = ((region.ijk[a] + 1) << rr) - 1;
                    (v.max(lo), (v + 1).min(hi))
                }
                _ => (lo, hi),
            };
        }
        for i in ranges[0].0..ranges[0].1 {
            for j in ranges[1].0..ranges[1].1 {
                for k in ranges[2].0..ranges[2].1 {
                    out.push(NodeKey::new(m, [i, j, k]));
                }
            }
        }
    }

    /// Whether the corner samples of a cell straddle the surface. Corners
    /// must be cached.
    pub fn sign_change(&self, key: &NodeKey) -> bool {
        let v = key.corners().map(|c| self.corners.value(&c));
        has_sign_change(&v)
    }

    /// Leaves held in memory, all with sampled corners, in key order:
    /// coarse-complex cells in the cell map that were not refined, and fine
    /// leaves.
    pub fn explicit_leaves(&self) -> Vec<LeafInfo> {
        let mut out = Vec::new();
        for (k, f) in &self.cells {
            if f.refined {
                continue;
            }
            let stage = if self.coarse.get(k) == Some(&CoarseKind::Leaf) {
                LeafStage::Coarse
            } else {
                LeafStage::Virtual
            };
            out.push(LeafInfo {
                key: *k,
                stage,
                occupied: f.occupied,
                visible: f.visible,
            });
        }
        for (k, f) in &self.fine {
            if let FineKind::Leaf { occupied } = f {
                let root = self.fine_root(k);
                out.push(LeafInfo {
                    key: *k,
                    stage: LeafStage::Fine,
                    occupied: *occupied,
                    visible: self.flags(&root).visible,
                });
            }
        }
        out.sort_unstable_by_key(|l| l.key);
        out
    }

    /// Materialized coarse leaves absent from the cell map: unoccupied seeds.
    pub fn untracked_coarse_leaves(&self) -> Vec<NodeKey> {
        let mut out: Vec<NodeKey> = self
            .coarse
            .iter()
            .filter(|(k, kind)| **kind == CoarseKind::Leaf && !self.cells.contains_key(k))
            .map(|(k, _)| *k)
            .collect();
        out.sort_unstable();
        out
    }

    /// Coarse-complex cell a fine node descends from.
    pub fn fine_root(&self, key: &NodeKey) -> NodeKey {
        let mut k = *key;
        while k.level() > 0 {
            k = k.ancestor(k.level() - 1);
            if self.cells.get(&k).is_some_and(|f| f.refined) {
                return k;
            }
        }
        panic!("fine node {key} has no refined ancestor")
    }
}

/// The finished leaf complex with every explicit leaf's corners sampled.
#[derive(Debug, Clone)]
pub struct LeafComplex {
    pub(crate) state: OctreeState,
}

impl Deref for LeafComplex {
    type Target = OctreeState;

    fn deref(&self) -> &OctreeState {
        &self.state
    }
}

impl LeafComplex {
    pub(super) fn new(state: OctreeState) -> Self {
        LeafComplex { state }
    }

    pub fn into_state(self) -> OctreeState {
        self.state
    }

    pub fn frame(&self) -> &Frame {
        &self.state.frame
    }

    pub fn corner_cache(&self) -> &CornerCache {
        &self.state.corners
    }

    /// Builds a complex directly from leaf keys tiling the root cube.
    /// Every leaf is marked occupied and visible; corners are sampled
    /// from `expr`.
    pub fn from_leaf_keys(origin: crate::Vec3, l_root: f64, leaves: &[NodeKey], expr: &SdfExpr) -> Result<Self> {
        let frame = Frame::new(origin, l_root);
        let mut coarse: FxHashMap<NodeKey, CoarseKind> = FxHashMap::default();
        let mut volume: u128 = 0;
        for leaf in leaves {
            if coarse.insert(*leaf, CoarseKind::Leaf).is_some() {
                return Err(Error::Precondition(format!("duplicate leaf {leaf}")));
            }
            volume += 1u128 << (3 * (40 - leaf.level()));
        }
        for leaf in leaves {
            for l in 0..leaf.level() {
                match coarse.insert(leaf.ancestor(l), CoarseKind::Internal) {
                    Some(CoarseKind::Leaf) => {
                        return Err(Error::Precondition(format!("leaf {leaf} overlaps another leaf")));
                    }
                    _ => continue,
                }
            }
        }
        let extent = LATTICE_EXTENT as u128;
        if volume != extent * extent * extent
            || coarse
                .iter()
                .any(|(k, kind)| *kind == CoarseKind::Internal && k.children().iter().any(|c| !coarse.contains_key(c)))
        {
            return Err(Error::Precondition("leaf keys do not tile the root cube".into()));
        }
        let cells = leaves
            .iter()
            .map(|k| {
                (
                    *k,
                    CellFlags {
                        occupied: true,
                        visible: true,
                        tested: true,
                        refined: false,
                    },
                )
            })
            .collect();
        let mut corners = CornerCache::default();
        corners.ensure(expr, &frame, leaves.iter().flat_map(|k| k.corners()));
        let state = OctreeState {
            frame,
            lod: LodTargets {
                a_hat: f64::INFINITY,
                a_hat_inv: f64::INFINITY,
                d_min: 1.0,
            },
            criteria: Criteria::default(),
            stats: super::BuildStats {
                coarse_nodes: coarse.len(),
                corner_samples: corners.len(),
                ..Default::default()
            },
            coarse,
            grids: Vec::new(),
            cells,
            fine: FxHashMap::default(),
            corners,
        };
        Ok(LeafComplex { state })
    }

    pub fn counts(&self) -> LeafCounts {
        let leaves = self.explicit_leaves();
        let occupied = leaves.iter().filter(|l| l.occupied).count() as u64;
        let materialized = self.coarse.values().filter(|k| **k == CoarseKind::Leaf).count() as u64;
        let virtual_cells: u64 = self
            .grids
            .iter()
            .map(|g| match self.coarse[g] {
                CoarseKind::Grid { log2n } => 1u64 << (3 * log2n as u64),
                _ => 0,
            })
            .sum();
        let refined = self.cells.values().filter(|f| f.refined).count() as u64;
        let fine = self
            .fine
            .values()
            .filter(|k| matches!(k, FineKind::Leaf { .. }))
            .count() as u64;
        LeafCounts {
            occupied_leaves: occupied,
            explicit_leaves: leaves.len() as u64,
            total_leaves: materialized + virtual_cells - refined + fine,
        }
    }

    /// Checks every leaf against its angular target: visible occupied
    /// leaves against `a_hat`, everything else against `a_hat_inv`.
    /// Untouched virtual cells are covered per grid in closed form.
    pub fn audit_angular(&self, cams: &[Camera]) -> AngularAudit {
        let lod = self.state.lod;
        let mut audit = AngularAudit::default();
        for leaf in self.explicit_leaves() {
            let a = node_angular_diameter(
                &self.frame.center(&leaf.key),
                self.frame.side(&leaf.key),
                cams,
                lod.d_min,
            );
            audit.checked_leaves += 1;
            if leaf.visible && leaf.occupied {
                audit.worst_visible_ratio = audit.worst_visible_ratio.max(a / lod.a_hat);
                if a > lod.a_hat {
                    audit.violations += 1;
                }
            } else {
                audit.worst_other_ratio = audit.worst_other_ratio.max(a / lod.a_hat_inv);
                if a > lod.a_hat_inv {
                    audit.violations += 1;
                }
            }
        }
        for k in self.untracked_coarse_leaves() {
            let a = node_angular_diameter(&self.frame.center(&k), self.frame.side(&k), cams, lod.d_min);
            audit.checked_leaves += 1;
            audit.worst_other_ratio = audit.worst_other_ratio.max(a / lod.a_hat_inv);
            if a > lod.a_hat_inv {
                audit.violations += 1;
            }
        }
        for g in &self.grids {
            if let CoarseKind::Grid { log2n } = self.coarse[g] {
                let a = max_virtual_child_diameter(&self.frame, g, log2n as u32, cams, lod.d_min);
                audit.checked_grids += 1;
                audit.worst_other_ratio = audit.worst_other_ratio.max(a / lod.a_hat_inv);
                if a > lod.a_hat_inv {
                    audit.violations += 1;
                }
            }
        }
        audit
    }
}
