//! Triangle meshes: representation, normalization, cleanup, and sampling.

pub mod bvh;
pub mod decimate;
pub mod io;

use std::collections::HashMap;

use nalgebra::Vector3;
use rand::Rng;

use crate::error::{CoreError, Result};
use crate::geom::{triangle_area, triangle_normal, Aabb, Pt3, RigidScaleTransform, Vec3};
use crate::rng;

/// Triangles with area below this (in normalized object units) are dropped
/// during cleanup.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Indexed triangle surface. The universal geometry carrier of the pipeline.
#[derive(Clone, Debug)]
pub struct TriangleMesh {
    vertices: Vec<Pt3>,
    triangles: Vec<[u32; 3]>,
    areas: Vec<f64>,
}

impl TriangleMesh {
    /// Builds a mesh, validating indices and coordinates and dropping
    /// degenerate triangles.
    pub fn new(vertices: Vec<Pt3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(CoreError::EmptyGeometry("mesh has no vertices".into()));
        }
        for (i, v) in vertices.iter().enumerate() {
            if !v.coords.iter().all(|c| c.is_finite()) {
                return Err(CoreError::NonFinite(format!("vertex {i}: {v:?}")));
            }
        }
        let n = vertices.len() as u32;
        let mut kept = Vec::with_capacity(triangles.len());
        let mut areas = Vec::with_capacity(triangles.len());
        for (i, t) in triangles.iter().enumerate() {
            if t.iter().any(|&ix| ix >= n) {
                return Err(CoreError::MalformedFile {
                    path: "<memory>".into(),
                    line: i,
                    message: format!("triangle {i} references vertex out of range"),
                });
            }
            let area = triangle_area(
                &vertices[t[0] as usize],
                &vertices[t[1] as usize],
                &vertices[t[2] as usize],
            );
            if area >= DEGENERATE_AREA {
                kept.push(*t);
                areas.push(area);
            }
        }
        if kept.is_empty() {
            return Err(CoreError::EmptyGeometry(
                "mesh has no non-degenerate triangles".into(),
            ));
        }
        Ok(TriangleMesh {
            vertices,
            triangles: kept,
            areas,
        })
    }

    /// Builds a mesh keeping degenerate triangles.
    ///
    /// Extraction algorithms (Marching Cubes) rely on every emitted triangle
    /// for closure; dropping slivers there would open pinholes.
    pub fn from_parts_unfiltered(vertices: Vec<Pt3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if vertices.is_empty() || triangles.is_empty() {
            return Err(CoreError::EmptyGeometry("mesh has no geometry".into()));
        }
        for (i, v) in vertices.iter().enumerate() {
            if !v.coords.iter().all(|c| c.is_finite()) {
                return Err(CoreError::NonFinite(format!("vertex {i}: {v:?}")));
            }
        }
        let n = vertices.len() as u32;
        let mut areas = Vec::with_capacity(triangles.len());
        for (i, t) in triangles.iter().enumerate() {
            if t.iter().any(|&ix| ix >= n) {
                return Err(CoreError::MalformedFile {
                    path: "<memory>".into(),
                    line: i,
                    message: format!("triangle {i} references vertex out of range"),
                });
            }
            areas.push(triangle_area(
                &vertices[t[0] as usize],
                &vertices[t[1] as usize],
                &vertices[t[2] as usize],
            ));
        }
        Ok(TriangleMesh {
            vertices,
            triangles,
            areas,
        })
    }

    pub fn vertices(&self) -> &[Pt3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_vertices(&self, i: usize) -> (&Pt3, &Pt3, &Pt3) {
        let t = &self.triangles[i];
        (
            &self.vertices[t[0] as usize],
            &self.vertices[t[1] as usize],
            &self.vertices[t[2] as usize],
        )
    }

    pub fn triangle_areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn surface_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn triangle_normal(&self, i: usize) -> Vec3 {
        let (a, b, c) = self.triangle_vertices(i);
        triangle_normal(a, b, c)
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter())
    }

    /// Signed volume via the divergence theorem; positive for outward-oriented
    /// closed surfaces.
    pub fn signed_volume(&self) -> f64 {
        let mut v = 0.0;
        for t in &self.triangles {
            let a = self.vertices[t[0] as usize].coords;
            let b = self.vertices[t[1] as usize].coords;
            let c = self.vertices[t[2] as usize].coords;
            v += a.dot(&b.cross(&c)) / 6.0;
        }
        v
    }

    /// V - E + F over the mesh's edge graph.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &ix in t {
                used[ix as usize] = true;
            }
        }
        let v = used.iter().filter(|u| **u).count() as i64;
        let mut edges = std::collections::HashSet::new();
        for t in &self.triangles {
            for k in 0..3 {
                let a = t[k];
                let b = t[(k + 1) % 3];
                edges.insert((a.min(b), a.max(b)));
            }
        }
        v - edges.len() as i64 + self.triangles.len() as i64
    }

    /// Applies a transform to every vertex, producing a new mesh.
    pub fn transformed(&self, transform: &RigidScaleTransform) -> Result<Self> {
        let vertices = self.vertices.iter().map(|p| transform.apply(p)).collect();
        TriangleMesh::new(vertices, self.triangles.clone())
    }
}

/// True iff every edge is shared by exactly two triangles with consistent
/// orientation (each undirected edge appears once per direction).
pub fn is_watertight(mesh: &TriangleMesh) -> bool {
    watertight_report(mesh) == (0, 0)
}

/// (boundary edges, edges with inconsistent/non-manifold incidence).
pub fn watertight_report(mesh: &TriangleMesh) -> (usize, usize) {
    // Count directed edges; a closed consistently-oriented surface has every
    // directed edge exactly once and its reverse exactly once.
    let mut directed: HashMap<(u32, u32), u32> = HashMap::new();
    for t in mesh.triangles() {
        for k in 0..3 {
            let a = t[k];
            let b = t[(k + 1) % 3];
            *directed.entry((a, b)).or_insert(0) += 1;
        }
    }
    let mut boundary = 0;
    let mut nonmanifold = 0;
    for (&(a, b), &count) in &directed {
        if count > 1 {
            nonmanifold += 1;
            continue;
        }
        match directed.get(&(b, a)) {
            None => boundary += 1,
            Some(&rev) if rev == 1 => {}
            Some(_) => nonmanifold += 1,
        }
    }
    (boundary, nonmanifold)
}

/// Centers the bounding box at the origin and scales the longest side to 1.
/// Returns the normalized mesh and the transform original -> normalized.
pub fn normalize_unit_cube(mesh: &TriangleMesh) -> Result<(TriangleMesh, RigidScaleTransform)> {
    let bb = mesh.aabb();
    let longest = bb.longest_side();
    if longest <= 0.0 {
        return Err(CoreError::DegenerateGeometry(
            "mesh has zero extent; cannot normalize".into(),
        ));
    }
    let center = bb.center();
    let transform = RigidScaleTransform::uniform(-center.coords, 1.0 / longest)?;
    Ok((mesh.transformed(&transform)?, transform))
}

/// Removes edge-connected components whose triangle count is below
/// `min_triangle_fraction` of the total. The largest component is always
/// kept; ties break toward the component containing the lower first-triangle
/// index.
pub fn remove_small_components(mesh: &TriangleMesh, min_triangle_fraction: f64) -> Result<TriangleMesh> {
    if !(0.0..1.0).contains(&min_triangle_fraction) || min_triangle_fraction <= 0.0 {
        return Err(CoreError::Precondition(format!(
            "min_triangle_fraction must be in (0,1), got {min_triangle_fraction}"
        )));
    }
    let labels = component_labels(mesh);
    let n_comp = labels.iter().copied().max().map_or(0, |m| m + 1);
    if n_comp <= 1 {
        return Ok(mesh.clone());
    }
    let mut counts = vec![0usize; n_comp];
    let mut first_tri = vec![usize::MAX; n_comp];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        first_tri[l] = first_tri[l].min(i);
    }
    let threshold = min_triangle_fraction * mesh.triangle_count() as f64;
    let largest = (0..n_comp)
        .min_by(|&a, &b| {
            counts[b]
                .cmp(&counts[a])
                .then(first_tri[a].cmp(&first_tri[b]))
        })
        .unwrap();
    let keep: Vec<bool> = (0..n_comp)
        .map(|c| c == largest || counts[c] as f64 >= threshold)
        .collect();
    let triangles: Vec<[u32; 3]> = mesh
        .triangles()
        .iter()
        .zip(&labels)
        .filter(|(_, &l)| keep[l])
        .map(|(t, _)| *t)
        .collect();
    compact(mesh.vertices(), triangles)
}

/// Per-triangle component labels under shared-edge connectivity.
pub fn component_labels(mesh: &TriangleMesh) -> Vec<usize> {
    let mut edge_to_tris: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
    for (i, t) in mesh.triangles().iter().enumerate() {
        for k in 0..3 {
            let a = t[k];
            let b = t[(k + 1) % 3];
            edge_to_tris
                .entry((a.min(b), a.max(b)))
                .or_default()
                .push(i as u32);
        }
    }
    let n = mesh.triangle_count();
    let mut label = vec![usize::MAX; n];
    let mut next = 0usize;
    let mut stack = Vec::new();
    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); n];
    for tris in edge_to_tris.values() {
        for i in 0..tris.len() {
            for j in (i + 1)..tris.len() {
                adjacency[tris[i] as usize].push(tris[j]);
                adjacency[tris[j] as usize].push(tris[i]);
            }
        }
    }
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        stack.push(start);
        while let Some(t) = stack.pop() {
            for &nb in &adjacency[t] {
                if label[nb as usize] == usize::MAX {
                    label[nb as usize] = next;
                    stack.push(nb as usize);
                }
            }
        }
        next += 1;
    }
    label
}

/// Rebuilds a mesh from a triangle subset, dropping unused vertices.
fn compact(vertices: &[Pt3], triangles: Vec<[u32; 3]>) -> Result<TriangleMesh> {
    let mut remap = vec![u32::MAX; vertices.len()];
    let mut new_vertices = Vec::new();
    let mut new_triangles = Vec::with_capacity(triangles.len());
    for t in &triangles {
        let mut nt = [0u32; 3];
        for (k, &ix) in t.iter().enumerate() {
            if remap[ix as usize] == u32::MAX {
                remap[ix as usize] = new_vertices.len() as u32;
                new_vertices.push(vertices[ix as usize]);
            }
            nt[k] = remap[ix as usize];
        }
        new_triangles.push(nt);
    }
    TriangleMesh::new(new_vertices, new_triangles)
}

/// Draws `n` points from the surface, triangle choice weighted by area,
/// uniform within each triangle. Deterministic for a fixed seed.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<Vec<Pt3>> {
    if n == 0 {
        return Err(CoreError::Precondition("sample count must be >= 1".into()));
    }
    let mut cumulative = Vec::with_capacity(mesh.triangle_count());
    let mut total = 0.0;
    for &a in mesh.triangle_areas() {
        total += a;
        cumulative.push(total);
    }
    if total <= 0.0 {
        return Err(CoreError::DegenerateGeometry("zero surface area".into()));
    }
    let mut rng = rng::stream(seed, "surface-sample");
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let target = rng.gen::<f64>() * total;
        let idx = match cumulative.binary_search_by(|c| c.partial_cmp(&target).unwrap()) {
            Ok(i) => (i + 1).min(cumulative.len() - 1),
            Err(i) => i.min(cumulative.len() - 1),
        };
        let (a, b, c) = mesh.triangle_vertices(idx);
        let r1: f64 = rng.gen();
        let r2: f64 = rng.gen();
        let s = r1.sqrt();
        let w0 = 1.0 - s;
        let w1 = s * (1.0 - r2);
        let w2 = s * r2;
        points.push(Pt3::from(
            a.coords * w0 + b.coords * w1 + c.coords * w2,
        ));
    }
    Ok(points)
}

/// Index of the triangle a surface sample falls on; companion of
/// `sample_surface` used by tests and sampling diagnostics.
pub fn sample_surface_with_triangles(
    mesh: &TriangleMesh,
    n: usize,
    seed: u64,
) -> Result<(Vec<Pt3>, Vec<u32>)> {
    if n == 0 {
        return Err(CoreError::Precondition("sample count must be >= 1".into()));
    }
    let mut cumulative = Vec::with_capacity(mesh.triangle_count());
    let mut total = 0.0;
    for &a in mesh.triangle_areas() {
        total += a;
        cumulative.push(total);
    }
    let mut rng = rng::stream(seed, "surface-sample");
    let mut points = Vec::with_capacity(n);
    let mut tri_ids = Vec::with_capacity(n);
    for _ in 0..n {
        let target = rng.gen::<f64>() * total;
        let idx = match cumulative.binary_search_by(|c| c.partial_cmp(&target).unwrap()) {
            Ok(i) => (i + 1).min(cumulative.len() - 1),
            Err(i) => i.min(cumulative.len() - 1),
        };
        let (a, b, c) = mesh.triangle_vertices(idx);
        let r1: f64 = rng.gen();
        let r2: f64 = rng.gen();
        let s = r1.sqrt();
        let w0 = 1.0 - s;
        let w1 = s * (1.0 - r2);
        let w2 = s * r2;
        points.push(Pt3::from(a.coords * w0 + b.coords * w1 + c.coords * w2));
        tri_ids.push(idx as u32);
    }
    Ok((points, tri_ids))
}

/// Scales the mesh about the origin along one axis; used by upright-axis
/// scale augmentation.
pub fn scale_axis(mesh: &TriangleMesh, axis: usize, factor: f64) -> Result<TriangleMesh> {
    let mut scale = Vector3::new(1.0, 1.0, 1.0);
    scale[axis] = factor;
    let t = RigidScaleTransform::per_axis(Vec3::zeros(), scale)?;
    mesh.transformed(&t)
}
