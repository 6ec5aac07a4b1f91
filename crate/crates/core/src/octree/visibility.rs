use rayon::prelude::*;

use super::complex::adjacency_offsets;
use super::{BuildConfig, NodeKey, OctreeState};
use crate::view::{Camera, DepthBuffer};

/// Tests occupied cells against per-camera depth buffers built from the
/// occupied cells themselves, then dilates the visible set `k_dilate - 1`
/// neighbor steps. Disabled visibility leaves every cell visible.
pub fn visibility_pass(state: &mut OctreeState, cams: &[Camera], cfg: &BuildConfig) {
    if !state.criteria.visibility {
        for f in state.cells.values_mut() {
            f.visible = true;
        }
        state.stats.visible_cells = state.cells.len();
        return;
    }
    let mut occupied: Vec<NodeKey> = state
        .cells
        .iter()
        .filter(|(_, f)| f.occupied)
        .map(|(k, _)| *k)
        .collect();
    occupied.sort_unstable();
    let frame = state.frame;
    let boxes: Vec<_> = occupied.iter().map(|k| frame.corner_points(k)).collect();

    let buffers: Vec<DepthBuffer> = cams
        .par_iter()
        .map(|cam| {
            let mut buf = DepthBuffer::new(cam);
            for b in &boxes {
                buf.splat_occluder(cam, b);
            }
            buf
        })
        .collect();
    let visible: Vec<bool> = boxes
        .par_iter()
        .map(|b| cams.iter().zip(&buffers).any(|(cam, buf)| buf.is_visible(cam, b)))
        .collect();
    let mut frontier = Vec::new();
    for (k, v) in occupied.iter().zip(&visible) {
        if *v {
            state.flags_mut(*k).visible = true;
            frontier.push(*k);
        }
    }

    let offsets = adjacency_offsets(cfg.adjacency);
    for _ in 1..cfg.k_dilate {
        let st = &*state;
        let mut next: Vec<NodeKey> = frontier
            .par_iter()
            .flat_map_iter(|k| {
                let mut out = Vec::new();
                st.coarse_neighbors(k, &offsets, &mut out);
                out
            })
            .collect();
        next.sort_unstable();
        next.dedup();
        next.retain(|k| !state.flags(k).visible);
        for k in &next {
            state.flags_mut(*k).visible = true;
        }
        frontier = next;
    }
    state.stats.visible_cells = state.cells.values().filter(|f| f.visible).count();
}
