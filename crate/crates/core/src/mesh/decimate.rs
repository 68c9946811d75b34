//! Quadric edge-collapse decimation.
//!
//! Garland-Heckbert error quadrics with a link-condition validity check so
//! closed manifold inputs stay closed, plus a normal-flip guard. Collapses
//! are processed through a lazily invalidated priority queue; everything is
//! deterministic for a given input.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

use crate::error::{CoreError, Result};
use crate::geom::{triangle_area, Pt3};
use crate::mesh::{TriangleMesh, DEGENERATE_AREA};

pub struct DecimationResult {
    pub mesh: TriangleMesh,
    /// False when the mesh could not be reduced to the requested fraction
    /// (e.g. a closed mesh already at its minimal complex).
    pub reached_target: bool,
}

/// Reduces the triangle count to at most `target_fraction` of the input
/// (within one collapse step), preserving manifoldness of closed inputs.
pub fn decimate(mesh: &TriangleMesh, target_fraction: f64) -> Result<DecimationResult> {
    if !(target_fraction > 0.0 && target_fraction <= 1.0) {
        return Err(CoreError::Precondition(format!(
            "target_fraction must be in (0,1], got {target_fraction}"
        )));
    }
    let n_input = mesh.triangle_count();
    let target = (target_fraction * n_input as f64).floor() as usize;
    if target >= n_input {
        return Ok(DecimationResult {
            mesh: mesh.clone(),
            reached_target: true,
        });
    }

    let mut st = State::new(mesh);
    let mut heap: BinaryHeap<Reverse<Candidate>> = BinaryHeap::new();

    let mut seen = HashSet::new();
    for f in 0..st.faces.len() {
        let face = st.faces[f];
        for k in 0..3 {
            let a = face[k].min(face[(k + 1) % 3]);
            let b = face[k].max(face[(k + 1) % 3]);
            if seen.insert((a, b)) {
                heap.push(Reverse(st.candidate(a, b)));
            }
        }
    }

    while st.live_faces > target {
        let Some(Reverse(cand)) = heap.pop() else {
            break;
        };
        if !st.is_current(&cand) {
            continue;
        }
        if !st.collapse_is_valid(cand.a, cand.b, &cand.position) {
            continue;
        }
        let touched = st.collapse(cand.a, cand.b, cand.position);
        for (a, b) in touched {
            heap.push(Reverse(st.candidate(a, b)));
        }
    }

    let reached = st.live_faces <= target;
    Ok(DecimationResult {
        mesh: st.into_mesh()?,
        reached_target: reached,
    })
}

#[derive(PartialEq)]
struct Candidate {
    cost: f64,
    a: u32,
    b: u32,
    version_a: u32,
    version_b: u32,
    position: Pt3,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.a.cmp(&other.a))
            .then(self.b.cmp(&other.b))
    }
}

struct State {
    positions: Vec<Pt3>,
    quadrics: Vec<Matrix4<f64>>,
    versions: Vec<u32>,
    faces: Vec<[u32; 3]>,
    face_alive: Vec<bool>,
    incidence: Vec<Vec<u32>>,
    live_faces: usize,
}

impl State {
    fn new(mesh: &TriangleMesh) -> State {
        let nv = mesh.vertex_count();
        let mut quadrics = vec![Matrix4::zeros(); nv];
        let mut incidence: Vec<Vec<u32>> = vec![Vec::new(); nv];
        let faces: Vec<[u32; 3]> = mesh.triangles().to_vec();
        for (fi, f) in faces.iter().enumerate() {
            let a = mesh.vertices()[f[0] as usize];
            let b = mesh.vertices()[f[1] as usize];
            let c = mesh.vertices()[f[2] as usize];
            let n = (b - a).cross(&(c - a));
            let area = n.norm() * 0.5;
            if area > 0.0 {
                let n = n.normalize();
                let d = -n.dot(&a.coords);
                let p = Vector4::new(n.x, n.y, n.z, d);
                let k = p * p.transpose() * area;
                for &ix in f {
                    quadrics[ix as usize] += k;
                }
            }
            for &ix in f {
                incidence[ix as usize].push(fi as u32);
            }
        }
        State {
            positions: mesh.vertices().to_vec(),
            quadrics,
            versions: vec![0; nv],
            face_alive: vec![true; faces.len()],
            live_faces: faces.len(),
            faces,
            incidence,
        }
    }

    fn candidate(&self, a: u32, b: u32) -> Candidate {
        let q = self.quadrics[a as usize] + self.quadrics[b as usize];
        let position = optimal_position(
            &q,
            &self.positions[a as usize],
            &self.positions[b as usize],
        );
        let h = Vector4::new(position.x, position.y, position.z, 1.0);
        let cost = (h.transpose() * q * h)[(0, 0)].max(0.0);
        Candidate {
            cost,
            a,
            b,
            version_a: self.versions[a as usize],
            version_b: self.versions[b as usize],
            position,
        }
    }

    fn is_current(&self, c: &Candidate) -> bool {
        self.versions[c.a as usize] == c.version_a && self.versions[c.b as usize] == c.version_b
    }

    fn neighbors(&self, v: u32) -> Vec<u32> {
        let mut out = Vec::new();
        for &fi in &self.incidence[v as usize] {
            if !self.face_alive[fi as usize] {
                continue;
            }
            for &ix in &self.faces[fi as usize] {
                if ix != v && !out.contains(&ix) {
                    out.push(ix);
                }
            }
        }
        out.sort_unstable();
        out
    }

    fn collapse_is_valid(&self, a: u32, b: u32, position: &Pt3) -> bool {
        // Opposite vertices of faces shared by the edge.
        let mut shared = Vec::new();
        for &fi in &self.incidence[a as usize] {
            if !self.face_alive[fi as usize] {
                continue;
            }
            let f = self.faces[fi as usize];
            if f.contains(&b) {
                for &ix in &f {
                    if ix != a && ix != b {
                        shared.push(ix);
                    }
                }
            }
        }
        if shared.is_empty() || shared.len() > 2 {
            return false; // not an edge, or non-manifold
        }
        shared.sort_unstable();

        // Link condition: common neighbors must be exactly the shared-face
        // opposite vertices.
        let na = self.neighbors(a);
        let nb = self.neighbors(b);
        let common: Vec<u32> = na.iter().copied().filter(|v| nb.binary_search(v).is_ok()).collect();
        if common != shared {
            return false;
        }

        // A collapse removes `shared.len()` faces.
        if self.live_faces - shared.len() < 4 {
            return false;
        }

        // Normal-flip and degeneracy guard on all surviving incident faces.
        for &v in &[a, b] {
            for &fi in &self.incidence[v as usize] {
                if !self.face_alive[fi as usize] {
                    continue;
                }
                let f = self.faces[fi as usize];
                if f.contains(&a) && f.contains(&b) {
                    continue; // removed by the collapse
                }
                let old = [
                    self.positions[f[0] as usize],
                    self.positions[f[1] as usize],
                    self.positions[f[2] as usize],
                ];
                let mut new = old;
                for (k, &ix) in f.iter().enumerate() {
                    if ix == a || ix == b {
                        new[k] = *position;
                    }
                }
                let n_old = (old[1] - old[0]).cross(&(old[2] - old[0]));
                let n_new = (new[1] - new[0]).cross(&(new[2] - new[0]));
                if triangle_area(&new[0], &new[1], &new[2]) < DEGENERATE_AREA {
                    return false;
                }
                if n_old.dot(&n_new) <= 0.0 {
                    return false;
                }
            }
        }
        true
    }

    /// Collapses b into a at `position`; returns edges needing fresh costs.
    fn collapse(&mut self, a: u32, b: u32, position: Pt3) -> Vec<(u32, u32)> {
        self.positions[a as usize] = position;
        self.quadrics[a as usize] = self.quadrics[a as usize] + self.quadrics[b as usize];

        let b_faces = std::mem::take(&mut self.incidence[b as usize]);
        for &fi in &b_faces {
            if !self.face_alive[fi as usize] {
                continue;
            }
            let f = &mut self.faces[fi as usize];
            if f.contains(&a) {
                self.face_alive[fi as usize] = false;
                self.live_faces -= 1;
            } else {
                for ix in f.iter_mut() {
                    if *ix == b {
                        *ix = a;
                    }
                }
                self.incidence[a as usize].push(fi);
            }
        }

        self.versions[a as usize] += 1;
        self.versions[b as usize] += 1;

        self.neighbors(a).into_iter().map(|v| (a.min(v), a.max(v))).collect()
    }

    fn into_mesh(self) -> Result<TriangleMesh> {
        let mut remap = vec![u32::MAX; self.positions.len()];
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (fi, f) in self.faces.iter().enumerate() {
            if !self.face_alive[fi] {
                continue;
            }
            let mut t = [0u32; 3];
            for (k, &ix) in f.iter().enumerate() {
                if remap[ix as usize] == u32::MAX {
                    remap[ix as usize] = vertices.len() as u32;
                    vertices.push(self.positions[ix as usize]);
                }
                t[k] = remap[ix as usize];
            }
            triangles.push(t);
        }
        TriangleMesh::new(vertices, triangles)
    }
}

fn optimal_position(q: &Matrix4<f64>, va: &Pt3, vb: &Pt3) -> Pt3 {
    let a = Matrix3::new(
        q[(0, 0)], q[(0, 1)], q[(0, 2)],
        q[(1, 0)], q[(1, 1)], q[(1, 2)],
        q[(2, 0)], q[(2, 1)], q[(2, 2)],
    );
    let rhs = -Vector3::new(q[(0, 3)], q[(1, 3)], q[(2, 3)]);
    if let Some(inv) = a.try_inverse() {
        if a.determinant().abs() > 1e-12 {
            let x = inv * rhs;
            if x.iter().all(|c| c.is_finite()) {
                return Pt3::from(x);
            }
        }
    }
    // Fallback: cheapest of the endpoints and midpoint.
    let mid = Pt3::from((va.coords + vb.coords) * 0.5);
    let cost = |p: &Pt3| {
        let h = Vector4::new(p.x, p.y, p.z, 1.0);
        (h.transpose() * q * h)[(0, 0)]
    };
    let mut best = *va;
    let mut best_cost = cost(va);
    for p in [vb, &mid] {
        let c = cost(p);
        if c < best_cost {
            best_cost = c;
            best = *p;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::is_watertight;
    use crate::shapes;

    #[test]
    fn sphere_reduces_to_five_percent_and_stays_watertight() {
        let sphere = shapes::icosphere(4, 0.5); // 5120 triangles
        let n = sphere.triangle_count();
        let out = decimate(&sphere, 0.05).unwrap();
        assert!(out.reached_target);
        assert!(out.mesh.triangle_count() <= n / 20);
        assert!(is_watertight(&out.mesh));
        assert_eq!(out.mesh.euler_characteristic(), 2);
        // Shape is preserved coarsely: vertices remain near the sphere.
        for v in out.mesh.vertices() {
            let r = v.coords.norm();
            assert!((r - 0.5).abs() < 0.1, "radius {r}");
        }
    }

    #[test]
    fn target_one_is_identity() {
        let mesh = shapes::icosphere(2, 1.0);
        let out = decimate(&mesh, 1.0).unwrap();
        assert_eq!(out.mesh.triangle_count(), mesh.triangle_count());
        assert!(out.reached_target);
    }

    #[test]
    fn tetrahedron_cannot_shrink() {
        let tet = shapes::tetrahedron(1.0);
        let out = decimate(&tet, 0.05).unwrap();
        assert_eq!(out.mesh.triangle_count(), 4);
        assert!(!out.reached_target);
        assert!(is_watertight(&out.mesh));
    }

    #[test]
    fn never_increases_triangle_count() {
        for frac in [0.9, 0.5, 0.25, 0.1] {
            let mesh = shapes::torus(1.0, 0.4, 24, 12);
            let out = decimate(&mesh, frac).unwrap();
            assert!(out.mesh.triangle_count() <= mesh.triangle_count());
            assert!(is_watertight(&out.mesh), "fraction {frac}");
            // Torus: genus 1, Euler characteristic 0, preserved.
            assert_eq!(out.mesh.euler_characteristic(), 0);
        }
    }
}
