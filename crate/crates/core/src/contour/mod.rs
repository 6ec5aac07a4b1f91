//! Multiresolution dual contouring of a leaf complex.
//!
//! Every leaf edge is split at corners of smaller neighbors until the
//! pieces are minimal. Each minimal edge whose endpoint samples straddle the
//! surface gets a crossing by bisection; each cell touching such edges gets
//! the mean of their crossings; each such edge yields a polygon through the
//! vertices of the cells around it.

mod oracle;

use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::mesh::Mesh;
use crate::octree::{has_sign_change, Corner, CornerCache, Frame, NodeKey, OctreeState, LATTICE_EXTENT};
use crate::sdf::{is_inside, SdfExpr};
use crate::{Error, Result, Vec3};

pub use oracle::{uniform_dual_contour, MAX_ORACLE_DEPTH};

pub const DEFAULT_BISECT_ITERS: u32 = 20;
/// Triangles below this area are dropped.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractOptions {
    pub bisect_iters: u32,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            bisect_iters: DEFAULT_BISECT_ITERS,
        }
    }
}

/// An axis-aligned lattice edge, ordered by start corner then axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeKey {
    pub start: Corner,
    pub axis: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MinimalEdge {
    pub key: EdgeKey,
    pub len: u64,
}

impl MinimalEdge {
    pub fn end(&self) -> Corner {
        let mut e = self.key.start;
        e[self.key.axis as usize] += self.len;
        e
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeCrossing {
    pub edge: [Corner; 2],
    pub point: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellVertex {
    pub cell: NodeKey,
    pub position: Vec3,
}

/// Midpoint of the final bracket after `iters` halvings of `[a, b]`.
pub fn bisect_edge(expr: &SdfExpr, a: Vec3, b: Vec3, iters: u32) -> Result<Vec3> {
    let ia = is_inside(expr.eval(&a));
    if ia == is_inside(expr.eval(&b)) {
        return Err(Error::Precondition(format!(
            "bisection needs opposite signs at {a:?} and {b:?}"
        )));
    }
    Ok(bisect_bracket(expr, a, b, ia, iters))
}

pub(crate) fn bisect_bracket(expr: &SdfExpr, mut a: Vec3, mut b: Vec3, a_inside: bool, iters: u32) -> Vec3 {
    for _ in 0..iters {
        let m = (a + b) * 0.5;
        if is_inside(expr.eval(&m)) == a_inside {
            a = m;
        } else {
            b = m;
        }
    }
    (a + b) * 0.5
}

/// Mean of summed crossings, clamped to the cell cube.
pub(crate) fn cell_vertex(frame: &Frame, cell: &NodeKey, sum: Vec3, count: u32) -> Vec3 {
    let (lo, hi) = frame.bounds(cell);
    let m = sum / count as f64;
    Vec3::new(m.x.clamp(lo.x, hi.x), m.y.clamp(lo.y, hi.y), m.z.clamp(lo.z, hi.z))
}

/// Appends the triangles of a 3- or 4-gon, splitting quads along the
/// shorter diagonal and dropping slivers.
pub(crate) fn triangulate(ids: &[u32], positions: &[Vec3], out: &mut Vec<[u32; 3]>) {
    let p = |i: u32| positions[i as usize];
    let mut push = |t: [u32; 3]| {
        let area = 0.5 * (p(t[1]) - p(t[0])).cross(&(p(t[2]) - p(t[0]))).norm();
        if area >= MIN_TRIANGLE_AREA {
            out.push(t);
        }
    };
    match ids.len() {
        3 => push([ids[0], ids[1], ids[2]]),
        4 => {
            let d02 = (p(ids[0]) - p(ids[2])).norm_squared();
            let d13 = (p(ids[1]) - p(ids[3])).norm_squared();
            if d02 <= d13 {
                push([ids[0], ids[1], ids[2]]);
                push([ids[0], ids[2], ids[3]]);
            } else {
                push([ids[1], ids[2], ids[3]]);
                push([ids[1], ids[3], ids[0]]);
            }
        }
        _ => {}
    }
}

/// Removes cyclically repeated entries, keeping first occurrences in order.
pub(crate) fn dedup_cycle<T: PartialEq + Copy>(items: &[T]) -> Vec<T> {
    let mut out: Vec<T> = Vec::with_capacity(items.len());
    for &it in items {
        if !out.contains(&it) {
            out.push(it);
        }
    }
    out
}

/// Minimal edges whose endpoint samples in `cache` straddle the surface,
/// sorted by key.
///
/// A minimal edge is a whole edge of the smallest leaf around it, and that
/// leaf then has corners of both signs, so only leaves with a sign change
/// need their edges split.
pub fn sign_change_edges(complex: &OctreeState, cache: &CornerCache) -> Vec<MinimalEdge> {
    let leaves = complex.explicit_leaves();
    let mut edges: Vec<MinimalEdge> = leaves
        .par_iter()
        .filter(|leaf| has_sign_change(&leaf.key.corners().map(|c| cache.value(&c))))
        .flat_map_iter(|leaf| {
            let m = leaf.key.min_corner();
            let s = leaf.key.size_units();
            let mut out = Vec::new();
            for axis in 0..3usize {
                let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
                for q in 0..4u64 {
                    let mut start = m;
                    start[b] += (q & 1) * s;
                    start[c] += (q >> 1) * s;
                    split_edge(cache, start, axis, s, &mut out);
                }
            }
            out
        })
        .collect();
    edges.par_sort_unstable();
    edges.dedup();
    edges
}

fn split_edge(cache: &CornerCache, start: Corner, axis: usize, len: u64, out: &mut Vec<MinimalEdge>) {
    if len >= 2 {
        let mut mid = start;
        mid[axis] += len / 2;
        if cache.contains(&mid) {
            split_edge(cache, start, axis, len / 2, out);
            split_edge(cache, mid, axis, len / 2, out);
            return;
        }
    }
    let e = MinimalEdge {
        key: EdgeKey {
            start,
            axis: axis as u8,
        },
        len,
    };
    if is_inside(cache.value(&start)) != is_inside(cache.value(&e.end())) {
        out.push(e);
    }
}

// Leaves around an edge in counter-clockwise order about its axis, `None`
// where the edge lies on the root boundary.
fn incident_cells(complex: &OctreeState, e: &MinimalEdge) -> [Option<NodeKey>; 4] {
    let a = e.key.axis as usize;
    let (b, c) = ((a + 1) % 3, (a + 2) % 3);
    const QUADRANTS: [(bool, bool); 4] = [(false, false), (true, false), (true, true), (false, true)];
    QUADRANTS.map(|(pb, pc)| {
        let mut u = e.key.start;
        for (axis, plus) in [(b, pb), (c, pc)] {
            if plus {
                if u[axis] == LATTICE_EXTENT {
                    return None;
                }
            } else {
                if u[axis] == 0 {
                    return None;
                }
                u[axis] -= 1;
            }
        }
        Some(complex.locate_leaf(u))
    })
}

struct SignEdge {
    edge: MinimalEdge,
    start_inside: bool,
    cells: [Option<NodeKey>; 4],
    point: Vec3,
}

fn sign_edges(
    complex: &OctreeState,
    edges: &[MinimalEdge],
    cache: &CornerCache,
    expr: &SdfExpr,
    iters: u32,
) -> Vec<SignEdge> {
    let frame = &complex.frame;
    edges
        .par_iter()
        .map(|e| {
            let i0 = is_inside(cache.value(&e.key.start));
            let point = bisect_bracket(expr, frame.point(&e.key.start), frame.point(&e.end()), i0, iters);
            SignEdge {
                edge: *e,
                start_inside: i0,
                cells: incident_cells(complex, e),
                point,
            }
        })
        .collect()
}

fn accumulate_vertices(frame: &Frame, signs: &[SignEdge]) -> Vec<CellVertex> {
    let mut acc: FxHashMap<NodeKey, (Vec3, u32)> = FxHashMap::default();
    for s in signs {
        let present: Vec<NodeKey> = s.cells.iter().flatten().copied().collect();
        for cell in dedup_cycle(&present) {
            let e = acc.entry(cell).or_insert((Vec3::zeros(), 0));
            e.0 += s.point;
            e.1 += 1;
        }
    }
    let mut out: Vec<CellVertex> = acc
        .into_iter()
        .map(|(cell, (sum, n))| CellVertex {
            cell,
            position: cell_vertex(frame, &cell, sum, n),
        })
        .collect();
    out.sort_unstable_by_key(|v| v.cell);
    out
}

/// Bisected crossings of every sign-changing minimal edge of `expr`, in
/// edge-key order.
pub fn edge_crossings(complex: &OctreeState, expr: &SdfExpr, iters: u32) -> Vec<EdgeCrossing> {
    let cache = complex.corners.resample(expr, &complex.frame);
    let edges = sign_change_edges(complex, &cache);
    sign_edges(complex, &edges, &cache, expr, iters)
        .into_iter()
        .map(|s| EdgeCrossing {
            edge: [s.edge.key.start, s.edge.end()],
            point: s.point,
        })
        .collect()
}

/// One vertex per leaf touching a sign-changing minimal edge of `expr`,
/// in cell-key order. Uses the complex's own samples when `expr` is the
/// field they were taken from.
pub fn place_cell_vertices(complex: &OctreeState, expr: &SdfExpr, iters: u32) -> Vec<CellVertex> {
    let cache = complex.corners.resample(expr, &complex.frame);
    let edges = sign_change_edges(complex, &cache);
    let signs = sign_edges(complex, &edges, &cache, expr, iters);
    accumulate_vertices(&complex.frame, &signs)
}

fn emit(signs: &[SignEdge], vertices: &[CellVertex], component: u32) -> Result<Mesh> {
    let index: FxHashMap<NodeKey, u32> = vertices.iter().enumerate().map(|(i, v)| (v.cell, i as u32)).collect();
    let positions: Vec<Vec3> = vertices.iter().map(|v| v.position).collect();
    let mut triangles = Vec::new();
    for s in signs {
        if s.cells.iter().any(|c| c.is_none()) {
            continue;
        }
        let mut ring: Vec<NodeKey> = dedup_cycle(&s.cells.map(|c| c.unwrap()));
        if ring.len() < 3 {
            continue;
        }
        if !s.start_inside {
            ring.reverse();
        }
        let mut ids = Vec::with_capacity(4);
        for cell in &ring {
            match index.get(cell) {
                Some(i) => ids.push(*i),
                None => return Err(Error::MissingVertex { cell: cell.to_string() }),
            }
        }
        triangulate(&ids, &positions, &mut triangles);
    }
    Ok(Mesh {
        vertices: positions,
        triangles,
        component_id: component,
    })
}

/// Faces for the sign-changing minimal edges of `expr`, wound from the
/// inside toward the outside.
pub fn emit_faces(complex: &OctreeState, expr: &SdfExpr, vertices: &[CellVertex], iters: u32) -> Result<Mesh> {
    let cache = complex.corners.resample(expr, &complex.frame);
    let edges = sign_change_edges(complex, &cache);
    let signs = sign_edges(complex, &edges, &cache, expr, iters);
    emit(&signs, vertices, 0)
}

/// One mesh per component, each contoured against its own field sampled
/// on the corners of the same complex.
pub fn extract(complex: &OctreeState, components: &[SdfExpr], opts: &ExtractOptions) -> Result<Vec<Mesh>> {
    let single = components.len() == 1;
    components
        .iter()
        .enumerate()
        .map(|(i, expr)| {
            let resampled;
            let cache = if single {
                &complex.corners
            } else {
                resampled = complex.corners.resample(expr, &complex.frame);
                &resampled
            };
            let edges = sign_change_edges(complex, cache);
            let signs = sign_edges(complex, &edges, cache, expr, opts.bisect_iters);
            let vertices = accumulate_vertices(&complex.frame, &signs);
            emit(&signs, &vertices, i as u32)
        })
        .collect()
}
