use rayon::prelude::*;
use rustc_hash::FxHashMap;

use super::complex::{adjacency_offsets, has_sign_change};
use super::{Adjacency, CellFlags, CoarseKind, Corner, NodeKey, OctreeState};
use crate::sdf::SdfExpr;

// Seeds are probed in chunks of roughly this many cells.
const SEED_CHUNK: usize = 1 << 18;

/// Marks coarse-complex cells whose corner samples straddle the surface.
///
/// Every materialized leaf and the boundary cells of every virtual grid
/// are tested; the frontier then spreads through neighbors of occupied
/// cells until it stops growing. Unoccupied seeds are not recorded: a
/// cell absent from the cell map is either an unoccupied seed or was never
/// reached. With the occupancy criterion disabled all cells are marked
/// occupied without sampling.
pub fn flood_fill_occupancy(state: &mut OctreeState, expr: &SdfExpr, adjacency: Adjacency) {
    if !state.criteria.occupancy {
        let visible = !state.criteria.visibility;
        for k in state.all_coarse_cells() {
            state.cells.insert(
                k,
                CellFlags {
                    occupied: true,
                    visible,
                    tested: true,
                    refined: false,
                },
            );
        }
        state.stats.tested_cells = state.cells.len();
        state.stats.occupied_cells = state.cells.len();
        return;
    }

    let mut leaves: Vec<NodeKey> = state
        .coarse
        .iter()
        .filter(|(_, k)| **k == CoarseKind::Leaf)
        .map(|(k, _)| *k)
        .collect();
    leaves.sort_unstable();
    let grids: Vec<(NodeKey, u32)> = state
        .grids
        .iter()
        .filter_map(|g| match state.coarse[g] {
            CoarseKind::Grid { log2n } => Some((*g, log2n as u32)),
            _ => None,
        })
        .collect();

    let mut tested = 0usize;
    let mut frontier = Vec::new();
    let mut chunk = Vec::new();
    let mut grid_iter = grids.iter();
    let mut leaf_iter = leaves.chunks(SEED_CHUNK);
    loop {
        chunk.clear();
        if let Some(ls) = leaf_iter.next() {
            chunk.extend_from_slice(ls);
        } else {
            for (g, n) in grid_iter.by_ref() {
                chunk.extend(state.grid_cells(g, *n, true));
                if chunk.len() >= SEED_CHUNK {
                    break;
                }
            }
        }
        if chunk.is_empty() {
            break;
        }
        tested += chunk.len();
        for k in probe_seeds(state, expr, &chunk) {
            frontier.push(k);
        }
    }

    // Cells reached from occupied seeds, in waves.
    let offsets = adjacency_offsets(adjacency);
    let mut wave: Vec<NodeKey> = Vec::new();
    loop {
        let st = &*state;
        let mut next: Vec<NodeKey> = frontier
            .par_iter()
            .flat_map_iter(|k| {
                let mut out = Vec::new();
                st.coarse_neighbors(k, &offsets, &mut out);
                out
            })
            .collect();
        next.par_sort_unstable();
        next.dedup();
        next.retain(|k| !st.cells.get(k).is_some_and(|f| f.tested) && !st.is_seed(k));
        if next.is_empty() {
            break;
        }
        wave.clear();
        wave.append(&mut next);
        tested += wave.len();
        let frame = state.frame;
        state
            .corners
            .ensure(expr, &frame, wave.iter().flat_map(|k| k.corners()));
        let st = &*state;
        let occupied: Vec<bool> = wave.par_iter().map(|k| st.sign_change(k)).collect();
        frontier.clear();
        for (k, occ) in wave.iter().zip(&occupied) {
            let f = state.flags_mut(*k);
            f.tested = true;
            f.occupied = *occ;
            if *occ {
                frontier.push(*k);
            }
        }
    }
    state.stats.tested_cells = tested;
    state.stats.occupied_cells = state.cells.values().filter(|f| f.occupied).count();
    state.stats.corner_samples = state.corners.len();
}

// Tests a batch of seed cells against corner samples taken for the batch.
// Occupied seeds are recorded with their corners cached; the rest are
// dropped. Returns the occupied seeds.
fn probe_seeds(state: &mut OctreeState, expr: &SdfExpr, seeds: &[NodeKey]) -> Vec<NodeKey> {
    let mut corners: Vec<Corner> = seeds.iter().flat_map(|k| k.corners()).collect();
    corners.par_sort_unstable();
    corners.dedup();
    let frame = state.frame;
    let cache = &state.corners;
    let values: Vec<f64> = corners
        .par_iter()
        .map(|c| cache.get(c).unwrap_or_else(|| expr.eval(&frame.point(c))))
        .collect();
    let local: FxHashMap<Corner, f64> = corners.into_iter().zip(values).collect();
    let occupied: Vec<NodeKey> = seeds
        .par_iter()
        .filter(|k| has_sign_change(&k.corners().map(|c| local[&c])))
        .copied()
        .collect();
    for k in &occupied {
        state.corners.insert_all(k.corners().map(|c| (c, local[&c])));
        *state.flags_mut(*k) = CellFlags {
            occupied: true,
            tested: true,
            ..state.flags(k)
        };
    }
    occupied
}
