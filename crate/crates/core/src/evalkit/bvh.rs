//! Median-split bounding volume hierarchy with watertight ray-triangle
//! intersection.

use crate::mesh::Mesh;
use crate::Vec3;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn contains(&self, o: &Aabb) -> bool {
        (0..3).all(|a| self.min[a] <= o.min[a] && o.max[a] <= self.max[a])
    }

    // Slab test; returns whether the ray enters before `t_max`.
    fn hit(&self, origin: &Vec3, inv_dir: &Vec3, t_max: f64) -> bool {
        let mut t0: f64 = 0.0;
        let mut t1 = t_max;
        for a in 0..3 {
            let mut near = (self.min[a] - origin[a]) * inv_dir[a];
            let mut far = (self.max[a] - origin[a]) * inv_dir[a];
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            // NaN from 0 * inf means the origin lies on the slab plane.
            if near.is_nan() || far.is_nan() {
                if origin[a] < self.min[a] || origin[a] > self.max[a] {
                    return false;
                }
                continue;
            }
            // Conservative slack against rounding in the slab distances.
            near -= near.abs() * 4.0 * f64::EPSILON;
            far += far.abs() * 4.0 * f64::EPSILON;
            t0 = t0.max(near);
            t1 = t1.min(far);
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Node {
    pub bounds: Aabb,
    /// Leaf: first triangle slot. Internal: index of the left child; the
    /// right child follows its whole subtree.
    pub start: u32,
    /// Triangle count for leaves, 0 for internal nodes.
    pub count: u32,
    pub right: u32,
}

/// Nearest intersection along a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub triangle: u32,
}

#[derive(Debug, Clone)]
pub struct Bvh {
    pub triangles: Vec<[Vec3; 3]>,
    pub order: Vec<u32>,
    pub nodes: Vec<Node>,
}

impl Bvh {
    pub fn from_meshes(meshes: &[Mesh]) -> Self {
        let tris = meshes
            .iter()
            .flat_map(|m| m.triangles.iter().map(|t| t.map(|i| m.vertices[i as usize])))
            .collect();
        Self::build(tris)
    }

    pub fn build(triangles: Vec<[Vec3; 3]>) -> Self {
        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        let centroids: Vec<Vec3> = triangles.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let mut nodes = Vec::new();
        if !triangles.is_empty() {
            build_node(&triangles, &centroids, &mut order, 0, triangles.len(), &mut nodes);
        }
        Bvh {
            triangles,
            order,
            nodes,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let ray = WatertightRay::new(*origin, *dir);
        let inv = dir.map(|d| 1.0 / d);
        let mut best: Option<Hit> = None;
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            let t_max = best.map_or(f64::INFINITY, |h| h.t);
            if !node.bounds.hit(origin, &inv, t_max) {
                continue;
            }
            if node.count > 0 {
                for slot in node.start..node.start + node.count {
                    let id = self.order[slot as usize];
                    if let Some(t) = ray.intersect(&self.triangles[id as usize]) {
                        if best.is_none_or(|h| t < h.t || (t == h.t && id < h.triangle)) {
                            best = Some(Hit { t, triangle: id });
                        }
                    }
                }
            } else {
                stack.push(node.right);
                stack.push(node.start);
            }
        }
        best
    }

    /// Exhaustive nearest hit, for testing.
    pub fn intersect_brute(&self, origin: &Vec3, dir: &Vec3) -> Option<Hit> {
        let ray = WatertightRay::new(*origin, *dir);
        let mut best: Option<Hit> = None;
        for (id, tri) in self.triangles.iter().enumerate() {
            if let Some(t) = ray.intersect(tri) {
                if best.is_none_or(|h| t < h.t) {
                    best = Some(Hit { t, triangle: id as u32 });
                }
            }
        }
        best
    }
}

fn build_node(
    tris: &[[Vec3; 3]],
    centroids: &[Vec3],
    order: &mut [u32],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> u32 {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &id in &order[start..end] {
        for p in &tris[id as usize] {
            bounds.grow(p);
        }
        cbounds.grow(&centroids[id as usize]);
    }
    let index = nodes.len() as u32;
    nodes.push(Node {
        bounds,
        start: start as u32,
        count: (end - start) as u32,
        right: 0,
    });
    if end - start <= LEAF_SIZE {
        return index;
    }
    let ext = cbounds.max - cbounds.min;
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |a, b| {
        centroids[*a as usize][axis]
            .total_cmp(&centroids[*b as usize][axis])
            .then(a.cmp(b))
    });
    let left = build_node(tris, centroids, order, start, mid, nodes);
    let right = build_node(tris, centroids, order, mid, end, nodes);
    nodes[index as usize] = Node {
        bounds,
        start: left,
        count: 0,
        right,
    };
    index
}

/// Precomputed shear of the watertight test (Woop, Benthin and Wald).
struct WatertightRay {
    origin: Vec3,
    k: [usize; 3],
    s: [f64; 3],
}

impl WatertightRay {
    fn new(origin: Vec3, dir: Vec3) -> Self {
        let kz = if dir.x.abs() >= dir.y.abs() && dir.x.abs() >= dir.z.abs() {
            0
        } else if dir.y.abs() >= dir.z.abs() {
            1
        } else {
            2
        };
        let mut kx = (kz + 1) % 3;
        let mut ky = (kx + 1) % 3;
        if dir[kz] < 0.0 {
            std::mem::swap(&mut kx, &mut ky);
        }
        WatertightRay {
            origin,
            k: [kx, ky, kz],
            s: [dir[kx] / dir[kz], dir[ky] / dir[kz], 1.0 / dir[kz]],
        }
    }

    /// Ray parameter of the hit, if any, for either winding.
    fn intersect(&self, tri: &[Vec3; 3]) -> Option<f64> {
        let [kx, ky, kz] = self.k;
        let [sx, sy, sz] = self.s;
        let rel = tri.map(|p| p - self.origin);
        let sheared = rel.map(|p| (p[kx] - sx * p[kz], p[ky] - sy * p[kz]));
        let [(ax, ay), (bx, by), (cx, cy)] = sheared;
        let u = cx * by - cy * bx;
        let v = ax * cy - ay * cx;
        let w = bx * ay - by * ax;
        if (u < 0.0 || v < 0.0 || w < 0.0) && (u > 0.0 || v > 0.0 || w > 0.0) {
            return None;
        }
        let det = u + v + w;
        if det == 0.0 {
            return None;
        }
        let t_scaled = sz * (u * rel[0][kz] + v * rel[1][kz] + w * rel[2][kz]);
        let t = t_scaled / det;
        (t > 0.0 && t.is_finite()).then_some(t)
    }
}
