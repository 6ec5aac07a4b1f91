//! Indexed triangle meshes: audits and OBJ/PLY interchange.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    pub component_id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MeshAudit {
    pub euler_characteristic: i64,
    pub boundary_edge_count: usize,
    pub nonmanifold_edge_count: usize,
    pub connected_components: usize,
    /// Directed edges used by more than one triangle.
    pub misoriented_edge_count: usize,
}

impl MeshAudit {
    pub fn is_closed_manifold(&self) -> bool {
        self.boundary_edge_count == 0 && self.nonmanifold_edge_count == 0
    }
}

fn find(parent: &mut [u32], mut i: u32) -> u32 {
    while parent[i as usize] != i {
        parent[i as usize] = parent[parent[i as usize] as usize];
        i = parent[i as usize];
    }
    i
}

impl Mesh {
    /// Checks indices, degenerate triangles and finiteness.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len() as u32;
        if let Some(v) = self.vertices.iter().find(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::Precondition(format!("non-finite vertex {v:?}")));
        }
        for t in &self.triangles {
            if t.iter().any(|&i| i >= n) {
                return Err(Error::Precondition(format!("triangle {t:?} indexes past {n} vertices")));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::Precondition(format!("degenerate triangle {t:?}")));
            }
        }
        Ok(())
    }

    /// Vertices referenced by at least one triangle.
    pub fn used_vertex_count(&self) -> usize {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &i in t {
                used[i as usize] = true;
            }
        }
        used.iter().filter(|u| **u).count()
    }

    /// Combinatorial audit over referenced vertices.
    pub fn audit(&self) -> MeshAudit {
        let mut edges: FxHashMap<(u32, u32), u32> = FxHashMap::default();
        let mut directed: FxHashMap<(u32, u32), u32> = FxHashMap::default();
        let mut parent: Vec<u32> = (0..self.vertices.len() as u32).collect();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
                *directed.entry((a, b)).or_default() += 1;
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb) as usize] = ra.min(rb);
                }
            }
        }
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &i in t {
                used[i as usize] = true;
            }
        }
        let v = used.iter().filter(|u| **u).count() as i64;
        let components = (0..self.vertices.len() as u32)
            .filter(|&i| used[i as usize] && find(&mut parent, i) == i)
            .count();
        MeshAudit {
            euler_characteristic: v - edges.len() as i64 + self.triangles.len() as i64,
            boundary_edge_count: edges.values().filter(|c| **c == 1).count(),
            nonmanifold_edge_count: edges.values().filter(|c| **c > 2).count(),
            connected_components: components,
            misoriented_edge_count: directed.values().filter(|c| **c > 1).count(),
        }
    }

    /// Signed enclosed volume; positive for outward-wound closed meshes.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i as usize]);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn face_normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i as usize]);
        (b - a).cross(&(c - a))
    }

    /// Concatenates meshes into one; the result takes the first component id.
    pub fn concat(meshes: &[Mesh]) -> Mesh {
        let mut out = Mesh {
            component_id: meshes.first().map_or(0, |m| m.component_id),
            ..Default::default()
        };
        for m in meshes {
            let base = out.vertices.len() as u32;
            out.vertices.extend_from_slice(&m.vertices);
            out.triangles.extend(m.triangles.iter().map(|t| t.map(|i| i + base)));
        }
        out
    }

    pub fn write_obj<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        for v in &self.vertices {
            writeln!(w, "v {} {} {}", v.x as f32, v.y as f32, v.z as f32)?;
        }
        for t in &self.triangles {
            writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        Ok(())
    }

    pub fn write_ply<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        write!(
            w,
            "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
            self.vertices.len(),
            self.triangles.len()
        )?;
        for v in &self.vertices {
            for c in v.iter() {
                w.write_all(&(*c as f32).to_le_bytes())?;
            }
        }
        for t in &self.triangles {
            w.write_all(&[3u8])?;
            for i in t {
                w.write_all(&(*i as i32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn export_obj(&self, path: &Path) -> Result<()> {
        write_file(path, |w| self.write_obj(w))
    }

    pub fn export_ply(&self, path: &Path) -> Result<()> {
        write_file(path, |w| self.write_ply(w))
    }

    /// Reads `v` and `f` records; polygons are fanned into triangles.
    pub fn import_obj(path: &Path) -> Result<Mesh> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut mesh = Mesh::default();
        let bad = |msg: String| Error::Format {
            path: path.to_path_buf(),
            msg,
        };
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let mut it = line.split_whitespace();
            match it.next() {
                Some("v") => {
                    let c: Vec<f64> = it
                        .take(3)
                        .map(|s| s.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| bad(format!("line {}: {e}", n + 1)))?;
                    if c.len() != 3 {
                        return Err(bad(format!("line {}: vertex needs 3 coordinates", n + 1)));
                    }
                    mesh.vertices.push(Vec3::new(c[0], c[1], c[2]));
                }
                Some("f") => {
                    let idx: Vec<u32> = it
                        .map(|s| {
                            let first = s.split('/').next().unwrap_or(s);
                            first.parse::<u32>().ok().filter(|i| *i >= 1).map(|i| i - 1)
                        })
                        .collect::<Option<_>>()
                        .ok_or_else(|| bad(format!("line {}: bad face index", n + 1)))?;
                    if idx.len() < 3 {
                        return Err(bad(format!("line {}: face needs 3 indices", n + 1)));
                    }
                    for k in 1..idx.len() - 1 {
                        mesh.triangles.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        mesh.validate().map_err(|e| bad(e.to_string()))?;
        Ok(mesh)
    }

    /// Reads the binary PLY layout written by [`Mesh::export_ply`].
    pub fn import_ply(path: &Path) -> Result<Mesh> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let bad = |msg: &str| Error::Format {
            path: path.to_path_buf(),
            msg: msg.to_string(),
        };
        let marker = b"end_header\n";
        let end = bytes
            .windows(marker.len())
            .position(|w| w == marker)
            .ok_or_else(|| bad("missing end_header"))?
            + marker.len();
        let header = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8"))?;
        if !header.contains("format binary_little_endian 1.0") {
            return Err(bad("only binary_little_endian 1.0 is supported"));
        }
        let count = |name: &str| -> Result<usize> {
            header
                .lines()
                .find_map(|l| l.strip_prefix(&format!("element {name} ")))
                .and_then(|n| n.trim().parse().ok())
                .ok_or_else(|| bad("missing element count"))
        };
        let (nv, nf) = (count("vertex")?, count("face")?);
        let mut body = &bytes[end..];
        let mut take = |n: usize| -> Result<&[u8]> {
            if body.len() < n {
                return Err(bad("truncated body"));
            }
            let (head, rest) = body.split_at(n);
            body = rest;
            Ok(head)
        };
        let mut mesh = Mesh::default();
        for _ in 0..nv {
            let b = take(12)?;
            let f = |i: usize| f32::from_le_bytes(b[4 * i..4 * i + 4].try_into().unwrap()) as f64;
            mesh.vertices.push(Vec3::new(f(0), f(1), f(2)));
        }
        for _ in 0..nf {
            if take(1)?[0] != 3 {
                return Err(bad("only triangles are supported"));
            }
            let b = take(12)?;
            let i = |k: usize| i32::from_le_bytes(b[4 * k..4 * k + 4].try_into().unwrap());
            let t = [i(0), i(1), i(2)];
            if t.iter().any(|v| *v < 0) {
                return Err(bad("negative index"));
            }
            mesh.triangles.push(t.map(|v| v as u32));
        }
        mesh.validate().map_err(|e| bad(&e.to_string()))?;
        Ok(mesh)
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<std::fs::File>) -> std::io::Result<()>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetra() -> Mesh {
        Mesh {
            vertices: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.0, 0.0, 1.0),
            ],
            triangles: vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
            component_id: 0,
        }
    }

    #[test]
    fn single_triangle_audit() {
        let m = Mesh {
            vertices: vec![Vec3::zeros(), Vec3::x(), Vec3::y()],
            triangles: vec![[0, 1, 2]],
            component_id: 0,
        };
        let a = m.audit();
        assert_eq!(a.euler_characteristic, 1);
        assert_eq!(a.boundary_edge_count, 3);
        assert_eq!(a.connected_components, 1);
        let mut buf = Vec::new();
        m.write_obj(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }

    #[test]
    fn closed_tetrahedra() {
        let t = tetra();
        let a = t.audit();
        assert_eq!(a.euler_characteristic, 2);
        assert!(a.is_closed_manifold());
        assert_eq!(a.misoriented_edge_count, 0);
        assert!((t.signed_volume() - 1.0 / 6.0).abs() < 1e-15);

        let mut far = tetra();
        far.vertices.iter_mut().for_each(|v| *v += Vec3::new(5.0, 0.0, 0.0));
        let two = Mesh::concat(&[t, far]);
        let a = two.audit();
        assert_eq!(a.connected_components, 2);
        assert_eq!(a.euler_characteristic, 4);
    }

    #[test]
    fn validation_rejects_bad_meshes() {
        let mut m = tetra();
        m.triangles.push([0, 0, 1]);
        assert!(m.validate().is_err());
        let mut m = tetra();
        m.triangles.push([0, 1, 9]);
        assert!(m.validate().is_err());
        let mut m = tetra();
        m.vertices[0].x = f64::NAN;
        assert!(m.validate().is_err());
    }

    #[test]
    fn round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = tetra();
        m.vertices[3] = Vec3::new(0.1, 0.2, 1.0 / 3.0);
        for ext in ["obj", "ply"] {
            let p = dir.path().join(format!("m.{ext}"));
            let back = if ext == "obj" {
                m.export_obj(&p).unwrap();
                Mesh::import_obj(&p).unwrap()
            } else {
                m.export_ply(&p).unwrap();
                Mesh::import_ply(&p).unwrap()
            };
            assert_eq!(back.triangles, m.triangles);
            for (a, b) in back.vertices.iter().zip(&m.vertices) {
                for k in 0..3 {
                    assert_eq!(a[k] as f32, b[k] as f32);
                }
            }
        }
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let err = tetra().export_obj(Path::new("/nonexistent-dir/x.obj")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.obj"));
    }
}
