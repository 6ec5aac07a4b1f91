//! Procedural signed distance functions: expression tree, scene language and
//! batch evaluation.

mod noise;
mod parse;

use rayon::prelude::*;

use crate::Vec3;

pub use noise::{fbm2, gradient_noise2};
pub use parse::{format_scene, parse_components, parse_scene, ParseError, ParseErrorKind};

/// Expression tree of a procedural signed distance function.
///
/// Primitives return exact distances; the combinators return a conservative
/// bound whose sign is exact, which is all the mesher relies on.
#[derive(Debug, Clone, PartialEq)]
pub enum SdfExpr {
    Plane { normal: Vec3, offset: f64 },
    Sphere { center: Vec3, radius: f64 },
    Box { center: Vec3, half_extents: Vec3 },
    Terrain(TerrainParams),
    Union(Box<SdfExpr>, Box<SdfExpr>),
    Intersect(Box<SdfExpr>, Box<SdfExpr>),
    Difference(Box<SdfExpr>, Box<SdfExpr>),
    Offset(Box<SdfExpr>, f64),
    Translate(Vec3, Box<SdfExpr>),
    Scale(f64, Box<SdfExpr>),
}

/// Height-field terrain `z = vertical_scale * fbm2(x / horizontal_scale, y / horizontal_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerrainParams {
    pub seed: u64,
    pub octaves: u32,
    pub lacunarity: f64,
    pub gain: f64,
    pub horizontal_scale: f64,
    pub vertical_scale: f64,
}

/// Points together with their signed distances, in input order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleBatch {
    pub points: Vec<Vec3>,
    pub values: Vec<f64>,
}

// Below this many points a batch is evaluated on the calling thread.
const PARALLEL_THRESHOLD: usize = 4096;

impl SdfExpr {
    pub fn sphere(center: Vec3, radius: f64) -> Self {
        SdfExpr::Sphere { center, radius }
    }

    /// Plane `normal . p + offset = 0`; `normal` is normalized.
    pub fn plane(normal: Vec3, offset: f64) -> Self {
        let len = normal.norm();
        SdfExpr::Plane {
            normal: normal / len,
            offset: offset / len,
        }
    }

    pub fn union(a: SdfExpr, b: SdfExpr) -> Self {
        SdfExpr::Union(Box::new(a), Box::new(b))
    }

    pub fn terrain(params: TerrainParams) -> Self {
        SdfExpr::Terrain(params)
    }

    /// Union of a non-empty list of expressions, left-associated.
    pub fn union_all(mut items: Vec<SdfExpr>) -> Option<Self> {
        if items.is_empty() {
            return None;
        }
        let first = items.remove(0);
        Some(items.into_iter().fold(first, SdfExpr::union))
    }

    pub fn eval(&self, p: &Vec3) -> f64 {
        match self {
            SdfExpr::Plane { normal, offset } => normal.dot(p) + offset,
            SdfExpr::Sphere { center, radius } => (p - center).norm() - radius,
            SdfExpr::Box { center, half_extents } => {
                let q = (p - center).abs() - half_extents;
                let outside = q.sup(&Vec3::zeros()).norm();
                let inside = q.x.max(q.y).max(q.z).min(0.0);
                outside + inside
            }
            SdfExpr::Terrain(t) => {
                let h = fbm2(
                    t.seed,
                    t.octaves,
                    t.lacunarity,
                    t.gain,
                    p.x / t.horizontal_scale,
                    p.y / t.horizontal_scale,
                );
                p.z - t.vertical_scale * h
            }
            SdfExpr::Union(a, b) => a.eval(p).min(b.eval(p)),
            SdfExpr::Intersect(a, b) => a.eval(p).max(b.eval(p)),
            SdfExpr::Difference(a, b) => a.eval(p).max(-b.eval(p)),
            SdfExpr::Offset(child, d) => child.eval(p) - d,
            SdfExpr::Translate(d, child) => child.eval(&(p - d)),
            SdfExpr::Scale(s, child) => child.eval(&(p / *s)) * s,
        }
    }

    /// Evaluates many points, in parallel for large batches. Output order
    /// matches input order and each value equals [`SdfExpr::eval`] exactly.
    pub fn eval_batch(&self, points: Vec<Vec3>) -> SampleBatch {
        let values = self.eval_slice(&points);
        SampleBatch { points, values }
    }

    pub fn eval_slice(&self, points: &[Vec3]) -> Vec<f64> {
        if points.len() < PARALLEL_THRESHOLD {
            points.iter().map(|p| self.eval(p)).collect()
        } else {
            points.par_iter().map(|p| self.eval(p)).collect()
        }
    }
}

/// Sign convention used throughout: zero counts as positive.
#[inline]
pub fn is_inside(value: f64) -> bool {
    value < 0.0
}
