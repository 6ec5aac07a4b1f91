//! Locational codes on a fixed-depth integer lattice.

use crate::Vec3;

/// Bits of the global corner lattice. Cells go down to level `MAX_LEVEL`, so
/// every cell edge spans at least two lattice units and has an integer midpoint.
pub const LATTICE_BITS: u32 = 40;
pub const MAX_LEVEL: u32 = LATTICE_BITS - 1;
pub const LATTICE_EXTENT: u64 = 1 << LATTICE_BITS;

/// Global lattice coordinates of a cell corner.
pub type Corner = [u64; 3];

/// A cube of the octree: `level` plus integer coordinates at that level.
/// Ordering is lexicographic on `(level, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeKey {
    pub level: u8,
    pub ijk: [u64; 3],
}

impl std::fmt::Display for NodeKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "L{}({}, {}, {})", self.level, self.ijk[0], self.ijk[1], self.ijk[2])
    }
}

/// Offset of corner or octant `i`: bit 0 is x, bit 1 is y, bit 2 is z.
#[inline]
pub fn octant_offset(i: usize) -> [u64; 3] {
    [(i & 1) as u64, ((i >> 1) & 1) as u64, ((i >> 2) & 1) as u64]
}

impl NodeKey {
    pub const ROOT: NodeKey = NodeKey {
        level: 0,
        ijk: [0, 0, 0],
    };

    pub fn new(level: u32, ijk: [u64; 3]) -> Self {
        debug_assert!(level <= MAX_LEVEL);
        debug_assert!(ijk.iter().all(|&c| c < (1u64 << level)));
        NodeKey {
            level: level as u8,
            ijk,
        }
    }

    #[inline]
    pub fn level(&self) -> u32 {
        self.level as u32
    }

    /// Lattice units per cell side.
    #[inline]
    pub fn shift(&self) -> u32 {
        LATTICE_BITS - self.level()
    }

    #[inline]
    pub fn size_units(&self) -> u64 {
        1u64 << self.shift()
    }

    #[inline]
    pub fn min_corner(&self) -> Corner {
        let s = self.shift();
        self.ijk.map(|c| c << s)
    }

    pub fn corners(&self) -> [Corner; 8] {
        let m = self.min_corner();
        let s = self.size_units();
        std::array::from_fn(|i| {
            let o = octant_offset(i);
            [m[0] + o[0] * s, m[1] + o[1] * s, m[2] + o[2] * s]
        })
    }

    #[inline]
    pub fn child(&self, octant: usize) -> NodeKey {
        let o = octant_offset(octant);
        NodeKey {
            level: self.level + 1,
            ijk: [self.ijk[0] * 2 + o[0], self.ijk[1] * 2 + o[1], self.ijk[2] * 2 + o[2]],
        }
    }

    pub fn children(&self) -> [NodeKey; 8] {
        std::array::from_fn(|i| self.child(i))
    }

    /// Ancestor (or self) at a coarser or equal level.
    #[inline]
    pub fn ancestor(&self, level: u32) -> NodeKey {
        debug_assert!(level <= self.level());
        let d = self.level() - level;
        NodeKey {
            level: level as u8,
            ijk: self.ijk.map(|c| c >> d),
        }
    }

    /// Same-level neighbor at integer offset `d`, if inside the root cube.
    pub fn offset(&self, d: [i64; 3]) -> Option<NodeKey> {
        let n = 1i64 << self.level;
        let mut ijk = [0u64; 3];
        for a in 0..3 {
            let c = self.ijk[a] as i64 + d[a];
            if c < 0 || c >= n {
                return None;
            }
            ijk[a] = c as u64;
        }
        Some(NodeKey { level: self.level, ijk })
    }

    /// Cell at `level` containing the unit lattice cube whose min corner is `u`.
    #[inline]
    pub fn containing(u: Corner, level: u32) -> NodeKey {
        let s = LATTICE_BITS - level;
        NodeKey {
            level: level as u8,
            ijk: u.map(|c| c >> s),
        }
    }

    pub fn contains_corner(&self, c: &Corner) -> bool {
        let m = self.min_corner();
        let s = self.size_units();
        (0..3).all(|a| c[a] >= m[a] && c[a] <= m[a] + s)
    }
}

/// Maps lattice coordinates to world space for a root cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub origin: Vec3,
    pub l_root: f64,
    unit: f64,
}

impl Frame {
    pub fn new(origin: Vec3, l_root: f64) -> Self {
        Frame {
            origin,
            l_root,
            unit: l_root / LATTICE_EXTENT as f64,
        }
    }

    /// World position of a lattice corner. Every cell sharing the corner
    /// computes the same bits.
    #[inline]
    pub fn point(&self, c: &Corner) -> Vec3 {
        Vec3::new(
            self.origin.x + c[0] as f64 * self.unit,
            self.origin.y + c[1] as f64 * self.unit,
            self.origin.z + c[2] as f64 * self.unit,
        )
    }

    #[inline]
    pub fn side(&self, key: &NodeKey) -> f64 {
        self.l_root / (1u64 << key.level) as f64
    }

    pub fn center(&self, key: &NodeKey) -> Vec3 {
        let half = self.side(key) * 0.5;
        self.point(&key.min_corner()) + Vec3::new(half, half, half)
    }

    pub fn corner_points(&self, key: &NodeKey) -> [Vec3; 8] {
        key.corners().map(|c| self.point(&c))
    }

    /// World-space bounds `(min, max)` of a cell.
    pub fn bounds(&self, key: &NodeKey) -> (Vec3, Vec3) {
        let m = key.min_corner();
        let s = key.size_units();
        (self.point(&m), self.point(&m.map(|c| c + s)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_arithmetic() {
        let k = NodeKey::new(3, [5, 2, 7]);
        assert_eq!(k.child(0b101).ijk, [11, 4, 15]);
        assert_eq!(k.child(3).ancestor(3), k);
        assert_eq!(k.child(6).ancestor(1), NodeKey::new(1, [1, 0, 1]));
        assert_eq!(k.offset([0, 0, 1]), None);
        assert_eq!(k.offset([-1, 1, -7]), Some(NodeKey::new(3, [4, 3, 0])));
        let u = k.child(7).min_corner();
        assert_eq!(NodeKey::containing(u, 3), k);
        assert!(k.contains_corner(&k.corners()[7]));
    }

    #[test]
    fn ordering_is_level_then_coordinates() {
        let mut keys = [
            NodeKey::new(2, [0, 0, 1]),
            NodeKey::new(1, [1, 1, 1]),
            NodeKey::new(2, [0, 1, 0]),
            NodeKey::ROOT,
        ];
        keys.sort();
        assert_eq!(keys[0], NodeKey::ROOT);
        assert_eq!(keys[1].level, 1);
        assert_eq!(keys[2].ijk, [0, 0, 1]);
    }

    #[test]
    fn frame_positions_are_exact() {
        let f = Frame::new(Vec3::new(-8.0, -8.0, -8.0), 16.0);
        let k = NodeKey::new(4, [3, 0, 15]);
        assert_eq!(f.point(&k.min_corner()), Vec3::new(-5.0, -8.0, 7.0));
        assert_eq!(f.side(&k), 1.0);
        assert_eq!(f.center(&k), Vec3::new(-4.5, -7.5, 7.5));
        // Matches a direct uniform-grid computation at that depth.
        let step = 16.0 / 16.0;
        assert_eq!(f.point(&k.min_corner()).x, -8.0 + 3.0 * step);
    }
}
