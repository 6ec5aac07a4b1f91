//! Standalone dual contouring on a uniform grid, for equivalence tests.

use rustc_hash::FxHashMap;

use super::{bisect_bracket, cell_vertex, dedup_cycle, triangulate, EdgeKey};
use crate::mesh::Mesh;
use crate::octree::{Frame, NodeKey, LATTICE_BITS};
use crate::sdf::{is_inside, SdfExpr};
use crate::{Error, Result, Vec3};

/// Deepest grid the oracle accepts.
pub const MAX_ORACLE_DEPTH: u32 = 9;

/// Dual contouring of `expr` on a `2^depth` grid over the cube at `origin`
/// with side `l_root`. Each cell with a sign-changing edge gets the mean of
/// its edge crossings; each interior sign-changing edge gets a polygon.
pub fn uniform_dual_contour(expr: &SdfExpr, origin: Vec3, l_root: f64, depth: u32, iters: u32) -> Result<Mesh> {
    if depth > MAX_ORACLE_DEPTH {
        return Err(Error::Precondition(format!(
            "oracle depth {depth} exceeds {MAX_ORACLE_DEPTH}"
        )));
    }
    if !(l_root > 0.0 && l_root.is_finite() && origin.iter().all(|c| c.is_finite())) {
        return Err(Error::Precondition("oracle bounds must be finite".into()));
    }
    let frame = Frame::new(origin, l_root);
    let n = 1usize << depth;
    let shift = LATTICE_BITS - depth;
    let np = n + 1;
    let lattice = |i: usize, j: usize, k: usize| [(i as u64) << shift, (j as u64) << shift, (k as u64) << shift];
    let idx = |i: usize, j: usize, k: usize| (k * np + j) * np + i;

    let mut values = vec![0.0; np * np * np];
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                values[idx(i, j, k)] = expr.eval(&frame.point(&lattice(i, j, k)));
            }
        }
    }

    // Sign-changing edges with their crossings, in key order.
    let mut crossings: Vec<(EdgeKey, [usize; 3], bool, Vec3)> = Vec::new();
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                for axis in 0..3 {
                    let mut e = [i, j, k];
                    e[axis] += 1;
                    if e[axis] > n {
                        continue;
                    }
                    let v0 = values[idx(i, j, k)];
                    let v1 = values[idx(e[0], e[1], e[2])];
                    let inside = is_inside(v0);
                    if inside == is_inside(v1) {
                        continue;
                    }
                    let a = frame.point(&lattice(i, j, k));
                    let b = frame.point(&lattice(e[0], e[1], e[2]));
                    let key = EdgeKey {
                        start: lattice(i, j, k),
                        axis: axis as u8,
                    };
                    crossings.push((key, [i, j, k], inside, bisect_bracket(expr, a, b, inside, iters)));
                }
            }
        }
    }
    crossings.sort_by_key(|x| x.0);

    // Cells around an edge, counter-clockwise about its axis.
    let around = |start: [usize; 3], axis: usize| -> [Option<[usize; 3]>; 4] {
        let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
        [(0, 0), (1, 0), (1, 1), (0, 1)].map(|(db, dc): (usize, usize)| {
            let mut cell = start;
            if start[axis] >= n {
                return None;
            }
            for (ax, d) in [(b, db), (c, dc)] {
                if d == 0 {
                    if cell[ax] == 0 {
                        return None;
                    }
                    cell[ax] -= 1;
                } else if cell[ax] >= n {
                    return None;
                }
            }
            Some(cell)
        })
    };

    // Each cell sums the crossings of its own twelve edges in key order.
    let mut sums: FxHashMap<[usize; 3], (Vec3, u32)> = FxHashMap::default();
    for (key, start, _, p) in &crossings {
        for cell in around(*start, key.axis as usize).into_iter().flatten() {
            let s = sums.entry(cell).or_insert((Vec3::zeros(), 0));
            s.0 += p;
            s.1 += 1;
        }
    }
    let mut cells: Vec<([usize; 3], NodeKey)> = sums
        .keys()
        .map(|c| (*c, NodeKey::new(depth, [c[0] as u64, c[1] as u64, c[2] as u64])))
        .collect();
    cells.sort_by_key(|c| c.1);
    let mut index: FxHashMap<[usize; 3], u32> = FxHashMap::default();
    let mut positions = Vec::with_capacity(cells.len());
    for (c, key) in &cells {
        let (sum, count) = sums[c];
        index.insert(*c, positions.len() as u32);
        positions.push(cell_vertex(&frame, key, sum, count));
    }

    let mut triangles = Vec::new();
    for (key, start, inside, _) in &crossings {
        let ring = around(*start, key.axis as usize);
        if ring.iter().any(|c| c.is_none()) {
            continue;
        }
        let mut ids: Vec<u32> = dedup_cycle(&ring.map(|c| index[&c.unwrap()]));
        if !*inside {
            ids.reverse();
        }
        triangulate(&ids, &positions, &mut triangles);
    }
    Ok(Mesh {
        vertices: positions,
        triangles,
        component_id: 0,
    })
}
