use rayon::prelude::*;
use rustc_hash::FxHashSet;

use super::complex::{has_sign_change, FACE_OFFSETS};
use super::{BuildConfig, FineKind, LeafComplex, NodeKey, OctreeState, LATTICE_EXTENT};
use crate::sdf::SdfExpr;
use crate::view::{node_angular_diameter, Camera};
use crate::{Error, Result};

/// Fine phase: refines visible occupied coarse cells until occupied
/// descendants meet `a_hat`, then samples the corners of every leaf.
///
/// A child keeps splitting while it, or a same-level face neighbor in the
/// same wave, straddles the surface. When the surface leaves a cell through
/// its root's boundary into an unoccupied visible coarse cell, that cell is
/// promoted to occupied and refined as well.
pub fn build_fine(mut state: OctreeState, expr: &SdfExpr, cams: &[Camera], cfg: &BuildConfig) -> Result<LeafComplex> {
    let frame = state.frame;
    let lod = state.lod;
    let occupancy = state.criteria.occupancy;
    let diameter = |k: &NodeKey| node_angular_diameter(&frame.center(k), frame.side(k), cams, lod.d_min);

    let mut roots: Vec<NodeKey> = state
        .cells
        .iter()
        .filter(|(_, f)| f.visible && f.occupied)
        .map(|(k, _)| *k)
        .collect();
    let mut created = 0usize;
    let mut promoted = 0usize;

    while !roots.is_empty() {
        roots.sort_unstable();
        roots.dedup();
        state
            .corners
            .ensure(expr, &frame, roots.iter().flat_map(|k| k.corners()));

        // (node, root) pairs to split this wave.
        let mut wave: Vec<(NodeKey, NodeKey)> = Vec::new();
        let mut boundary: Vec<(NodeKey, NodeKey)> = Vec::new();
        for r in &roots {
            if diameter(r) > lod.a_hat {
                state.flags_mut(*r).refined = true;
                wave.push((*r, *r));
            } else if state.sign_change(r) {
                boundary.push((*r, *r));
            }
        }

        while !wave.is_empty() {
            let children: Vec<(NodeKey, NodeKey)> =
                wave.iter().flat_map(|(k, r)| k.children().map(|c| (c, *r))).collect();
            created += children.len();
            if created > cfg.max_fine_cells {
                return Err(Error::FineCellCap {
                    cap: cfg.max_fine_cells,
                    attempted: created,
                });
            }
            state
                .corners
                .ensure(expr, &frame, children.iter().flat_map(|(c, _)| c.corners()));

            let st = &state;
            let sc: Vec<bool> = children.par_iter().map(|(c, _)| st.sign_change(c)).collect();
            let straddling: FxHashSet<NodeKey> = children
                .iter()
                .zip(&sc)
                .filter(|(_, s)| **s)
                .map(|((c, _), _)| *c)
                .collect();
            let split: Vec<bool> = children
                .par_iter()
                .zip(&sc)
                .map(|((c, _), s)| {
                    let active = !occupancy
                        || *s
                        || FACE_OFFSETS
                            .iter()
                            .any(|d| c.offset(*d).is_some_and(|n| straddling.contains(&n)));
                    active && diameter(c) > lod.a_hat
                })
                .collect();

            let mut next = Vec::new();
            for (i, (c, r)) in children.iter().enumerate() {
                if split[i] {
                    state.fine.insert(*c, FineKind::Internal);
                    next.push((*c, *r));
                } else {
                    state.fine.insert(*c, FineKind::Leaf { occupied: sc[i] });
                }
                if sc[i] {
                    boundary.push((*c, *r));
                }
            }
            wave = next;
        }

        let mut next_roots = Vec::new();
        if occupancy {
            for (c, r) in &boundary {
                for n in promotion_candidates(&state, c, r) {
                    let f = state.flags(&n);
                    if !f.occupied && f.visible && !f.refined {
                        state.flags_mut(n).occupied = true;
                        promoted += 1;
                        next_roots.push(n);
                    }
                }
            }
        }
        roots = next_roots;
    }

    let leaves = state.explicit_leaves();
    state
        .corners
        .ensure(expr, &frame, leaves.iter().flat_map(|l| l.key.corners()));
    state.stats.promoted_cells = promoted;
    state.stats.fine_cells = state
        .fine
        .values()
        .filter(|k| matches!(k, FineKind::Leaf { .. }))
        .count();
    state.stats.corner_samples = state.corners.len();
    state.stats.occupied_cells = state.cells.values().filter(|f| f.occupied).count();
    Ok(LeafComplex::new(state))
}

// Coarse cells across faces of `cell` that lie on the boundary of `root`
// and whose four corners straddle the surface.
fn promotion_candidates(state: &OctreeState, cell: &NodeKey, root: &NodeKey) -> Vec<NodeKey> {
    let r = cell.level() - root.level();
    let m = cell.min_corner();
    let size = cell.size_units();
    let corners = cell.corners();
    let mut out = Vec::new();
    for a in 0..3 {
        for side in 0..2u64 {
            let on_boundary = if side == 0 {
                cell.ijk[a] == root.ijk[a] << r
            } else {
                cell.ijk[a] == ((root.ijk[a] + 1) << r) - 1
            };
            if !on_boundary {
                continue;
            }
            let face: Vec<f64> = (0..8)
                .filter(|i| ((*i >> a) & 1) as u64 == side)
                .map(|i| state.corners.value(&corners[i]))
                .collect();
            if !has_sign_change(&face) {
                continue;
            }
            let mut u = [m[0] + size / 2, m[1] + size / 2, m[2] + size / 2];
            if side == 0 {
                if m[a] == 0 {
                    continue;
                }
                u[a] = m[a] - 1;
            } else {
                if m[a] + size == LATTICE_EXTENT {
                    continue;
                }
                u[a] = m[a] + size;
            }
            out.push(state.locate_coarse(u));
        }
    }
    out
}
