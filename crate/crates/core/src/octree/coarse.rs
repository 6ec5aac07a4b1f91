use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rustc_hash::FxHashMap;

use super::{BuildConfig, BuildStats, CellFlags, CoarseKind, CornerCache, Frame, NodeKey, OctreeState, MAX_LEVEL};
use crate::view::{node_angular_diameter, Camera, LodTargets};
use crate::{Error, Result};

struct Entry {
    a: f64,
    key: NodeKey,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Largest diameter first; among equals the smaller key pops first.
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.a.total_cmp(&other.a).then_with(|| other.key.cmp(&self.key))
    }
}

/// Largest angular diameter over the virtual children of `key` at
/// `log2n` levels below it. Per camera, the nearest child center is found
/// by clamping the camera onto the lattice of child centers.
pub fn max_virtual_child_diameter(frame: &Frame, key: &NodeKey, log2n: u32, cams: &[Camera], d_min: f64) -> f64 {
    let n = 1u64 << log2n;
    let level = key.level() + log2n;
    let side = frame.side(&NodeKey::new(level, [0; 3]));
    let (min, _) = frame.bounds(key);
    let mut nearest = f64::INFINITY;
    for cam in cams {
        let mut ijk = [0u64; 3];
        for a in 0..3 {
            let t = ((cam.position[a] - min[a]) / side).floor();
            let t = t.clamp(0.0, (n - 1) as f64) as u64;
            ijk[a] = (key.ijk[a] << log2n) + t;
        }
        let child = NodeKey::new(level, ijk);
        nearest = nearest.min((frame.center(&child) - cam.position).norm());
        // The clamped cell holds the nearest center up to rounding; probe
        // its neighbors so the bound never underestimates.
        for d in neighbor_offsets() {
            if let Some(nb) = child.offset(d) {
                if nb.ancestor(key.level()) == *key {
                    nearest = nearest.min((frame.center(&nb) - cam.position).norm());
                }
            }
        }
    }
    side / nearest.max(d_min)
}

fn neighbor_offsets() -> impl Iterator<Item = [i64; 3]> {
    (0..27)
        .map(|i| [i % 3 - 1, (i / 3) % 3 - 1, i / 9 - 1])
        .filter(|d| *d != [0, 0, 0])
}

/// Smallest `log2 N` such that every virtual child of `key` meets the
/// invisible-region target.
pub fn virtual_grid_log2(frame: &Frame, key: &NodeKey, cams: &[Camera], lod: &LodTargets) -> Result<u32> {
    for n in 1..=(MAX_LEVEL - key.level()) {
        if max_virtual_child_diameter(frame, key, n, cams, lod.d_min) <= lod.a_hat_inv {
            return Ok(n);
        }
    }
    Err(Error::LatticeDepth {
        level: MAX_LEVEL + 1,
        max: MAX_LEVEL,
    })
}

/// Coarse phase: priority subdivision down to `a_hat_inv` under the
/// `s_max` node budget.
pub fn build_coarse(cams: &[Camera], cfg: &BuildConfig) -> Result<OctreeState> {
    cfg.validate()?;
    if cams.is_empty() {
        return Err(Error::Config("at least one camera is required".into()));
    }
    let frame = cfg.frame();
    let lod = cfg.lod;
    let diameter = |k: &NodeKey| node_angular_diameter(&frame.center(k), frame.side(k), cams, lod.d_min);

    let mut coarse = FxHashMap::default();
    let mut grids = Vec::new();
    let mut heap = BinaryHeap::new();
    coarse.insert(NodeKey::ROOT, CoarseKind::Leaf);
    heap.push(Entry {
        a: diameter(&NodeKey::ROOT),
        key: NodeKey::ROOT,
    });

    while let Some(Entry { a, key }) = heap.pop() {
        if a <= lod.a_hat_inv {
            break;
        }
        if coarse.len() < cfg.s_max {
            if key.level() >= MAX_LEVEL {
                return Err(Error::LatticeDepth {
                    level: key.level() + 1,
                    max: MAX_LEVEL,
                });
            }
            coarse.insert(key, CoarseKind::Internal);
            for c in key.children() {
                coarse.insert(c, CoarseKind::Leaf);
                heap.push(Entry {
                    a: diameter(&c),
                    key: c,
                });
            }
        } else {
            let log2n = virtual_grid_log2(&frame, &key, cams, &lod)?;
            coarse.insert(key, CoarseKind::Grid { log2n: log2n as u8 });
            grids.push(key);
        }
    }
    grids.sort_unstable();

    let stats = BuildStats {
        coarse_nodes: coarse.len(),
        virtual_grids: grids.len(),
        ..Default::default()
    };
    Ok(OctreeState {
        frame,
        lod,
        criteria: cfg.criteria,
        coarse,
        grids,
        cells: FxHashMap::<NodeKey, CellFlags>::default(),
        fine: FxHashMap::default(),
        corners: CornerCache::default(),
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec3;

    fn cam_at(p: Vec3) -> Camera {
        Camera::look_at(p, p + Vec3::z(), -Vec3::y(), 60f64.to_radians(), 64, 48).unwrap()
    }

    #[test]
    fn virtual_grid_size_matches_closed_form() {
        // Node of side L with A = 0.5 seen from distance 2L.
        let frame = Frame::new(Vec3::zeros(), 8.0);
        let key = NodeKey::new(2, [1, 1, 1]);
        let c = frame.center(&key);
        let cam = cam_at(c + Vec3::new(4.0, 0.0, 0.0));
        let lod = LodTargets::new(0.05, 0.1, 1e-3).unwrap();
        assert!((node_angular_diameter(&c, 2.0, std::slice::from_ref(&cam), 1e-3) - 0.5).abs() < 1e-12);
        assert_eq!(
            virtual_grid_log2(&frame, &key, std::slice::from_ref(&cam), &lod).unwrap(),
            3
        );
        // Brute force over the 8^3 children.
        let mut worst: f64 = 0.0;
        for i in 0..8 {
            for j in 0..8 {
                for k in 0..8 {
                    let ch = NodeKey::new(5, [8 + i, 8 + j, 8 + k]);
                    worst = worst.max(node_angular_diameter(
                        &frame.center(&ch),
                        frame.side(&ch),
                        std::slice::from_ref(&cam),
                        1e-3,
                    ));
                }
            }
        }
        assert_eq!(worst, max_virtual_child_diameter(&frame, &key, 3, &[cam], 1e-3));
        assert!(worst <= 0.1);
    }

    #[test]
    fn coarse_leaves_meet_target_and_budget() {
        let cams = [cam_at(Vec3::new(10.0, 12.0, 7.0))];
        let lod = LodTargets::new(0.02, 0.08, 1e-3).unwrap();
        let mut cfg = BuildConfig::new(lod, Vec3::zeros());
        cfg.l_root = 64.0;
        cfg.s_max = 200;
        let st = build_coarse(&cams, &cfg).unwrap();
        assert!(st.coarse.len() <= cfg.s_max + 7);
        for (k, kind) in &st.coarse {
            match kind {
                CoarseKind::Leaf => {
                    let a = node_angular_diameter(&st.frame.center(k), st.frame.side(k), &cams, lod.d_min);
                    assert!(a <= lod.a_hat_inv);
                }
                CoarseKind::Grid { log2n } => {
                    let a = max_virtual_child_diameter(&st.frame, k, *log2n as u32, &cams, lod.d_min);
                    assert!(a <= lod.a_hat_inv);
                }
                CoarseKind::Internal => {
                    assert!(k.children().iter().all(|c| st.coarse.contains_key(c)));
                }
            }
        }
        assert!(!st.grids.is_empty());
    }

    #[test]
    fn budget_of_one_makes_root_a_grid() {
        let cams = [cam_at(Vec3::new(1.0, 2.0, 3.0))];
        let lod = LodTargets::new(0.05, 0.1, 1e-3).unwrap();
        let mut cfg = BuildConfig::new(lod, Vec3::zeros());
        cfg.l_root = 8.0;
        cfg.s_max = 1;
        let st = build_coarse(&cams, &cfg).unwrap();
        assert_eq!(st.grids, vec![NodeKey::ROOT]);
    }

    #[test]
    fn equal_diameters_pop_in_key_order() {
        let a = Entry {
            a: 1.0,
            key: NodeKey::new(1, [0, 0, 1]),
        };
        let b = Entry {
            a: 1.0,
            key: NodeKey::new(1, [1, 0, 0]),
        };
        assert!(a > b);
    }
}
