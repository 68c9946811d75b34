//! Procedural primitive meshes.
//!
//! Used for fixtures, demos, and toy corpora; all closed shapes are produced
//! with outward-facing windings.

use std::collections::HashMap;

use crate::geom::Pt3;
use crate::mesh::TriangleMesh;

/// Regular tetrahedron with circumradius `scale * sqrt(3)`.
pub fn tetrahedron(scale: f64) -> TriangleMesh {
    let s = scale;
    let vertices = vec![
        Pt3::new(s, s, s),
        Pt3::new(s, -s, -s),
        Pt3::new(-s, s, -s),
        Pt3::new(-s, -s, s),
    ];
    let triangles = vec![[0, 1, 2], [0, 2, 3], [0, 3, 1], [1, 3, 2]];
    TriangleMesh::new(vertices, triangles).expect("regular tetrahedron is valid")
}

fn box_vertices(min: Pt3, max: Pt3) -> Vec<Pt3> {
    (0..8)
        .map(|i| {
            Pt3::new(
                if i & 1 != 0 { max.x } else { min.x },
                if i & 2 != 0 { max.y } else { min.y },
                if i & 4 != 0 { max.z } else { min.z },
            )
        })
        .collect()
}

const BOX_FACES: [[u32; 3]; 12] = [
    [0, 2, 3],
    [0, 3, 1], // -z
    [4, 5, 7],
    [4, 7, 6], // +z
    [0, 1, 5],
    [0, 5, 4], // -y
    [2, 6, 7],
    [2, 7, 3], // +y
    [0, 4, 6],
    [0, 6, 2], // -x
    [1, 3, 7],
    [1, 7, 5], // +x
];

/// Closed axis-aligned box.
pub fn box_mesh(min: Pt3, max: Pt3) -> TriangleMesh {
    TriangleMesh::new(box_vertices(min, max), BOX_FACES.to_vec()).expect("box is valid")
}

/// Box without its +z face: the canonical non-watertight test input.
pub fn open_box(min: Pt3, max: Pt3) -> TriangleMesh {
    let faces: Vec<[u32; 3]> = BOX_FACES
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != 2 && *i != 3)
        .map(|(_, f)| *f)
        .collect();
    TriangleMesh::new(box_vertices(min, max), faces).expect("open box is valid")
}

/// Icosphere with `20 * 4^subdivisions` triangles.
pub fn icosphere(subdivisions: u32, radius: f64) -> TriangleMesh {
    let t = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut vertices: Vec<Pt3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| {
        let v = nalgebra::Vector3::new(x, y, z).normalize() * radius;
        Pt3::from(v)
    })
    .collect();

    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut mid = [0u32; 3];
            for k in 0..3 {
                let a = f[k];
                let b = f[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                mid[k] = *midpoint.entry(key).or_insert_with(|| {
                    let m = (vertices[a as usize].coords + vertices[b as usize].coords) * 0.5;
                    let m = m.normalize() * radius;
                    vertices.push(Pt3::from(m));
                    (vertices.len() - 1) as u32
                });
            }
            next.push([f[0], mid[0], mid[2]]);
            next.push([f[1], mid[1], mid[0]]);
            next.push([f[2], mid[2], mid[1]]);
            next.push([mid[0], mid[1], mid[2]]);
        }
        faces = next;
    }

    TriangleMesh::new(vertices, faces).expect("icosphere is valid")
}

/// Torus around the z axis.
pub fn torus(major_radius: f64, minor_radius: f64, major_segments: u32, minor_segments: u32) -> TriangleMesh {
    let nu = major_segments.max(3);
    let nv = minor_segments.max(3);
    let mut vertices = Vec::with_capacity((nu * nv) as usize);
    for i in 0..nu {
        let u = 2.0 * std::f64::consts::PI * f64::from(i) / f64::from(nu);
        for j in 0..nv {
            let v = 2.0 * std::f64::consts::PI * f64::from(j) / f64::from(nv);
            let ring = major_radius + minor_radius * v.cos();
            vertices.push(Pt3::new(
                ring * u.cos(),
                ring * u.sin(),
                minor_radius * v.sin(),
            ));
        }
    }
    let mut faces = Vec::with_capacity((nu * nv * 2) as usize);
    let idx = |i: u32, j: u32| (i % nu) * nv + (j % nv);
    for i in 0..nu {
        for j in 0..nv {
            let a = idx(i, j);
            let b = idx(i + 1, j);
            let c = idx(i + 1, j + 1);
            let d = idx(i, j + 1);
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriangleMesh::new(vertices, faces).expect("torus is valid")
}

/// Closed cylinder along z from 0 to `height`.
pub fn cylinder(radius: f64, height: f64, segments: u32) -> TriangleMesh {
    let n = segments.max(3);
    let mut vertices = Vec::with_capacity((2 * n + 2) as usize);
    for i in 0..n {
        let a = 2.0 * std::f64::consts::PI * f64::from(i) / f64::from(n);
        vertices.push(Pt3::new(radius * a.cos(), radius * a.sin(), 0.0));
    }
    for i in 0..n {
        let a = 2.0 * std::f64::consts::PI * f64::from(i) / f64::from(n);
        vertices.push(Pt3::new(radius * a.cos(), radius * a.sin(), height));
    }
    let bottom_center = vertices.len() as u32;
    vertices.push(Pt3::new(0.0, 0.0, 0.0));
    let top_center = vertices.len() as u32;
    vertices.push(Pt3::new(0.0, 0.0, height));

    let mut faces = Vec::new();
    for i in 0..n {
        let b0 = i;
        let b1 = (i + 1) % n;
        let t0 = n + i;
        let t1 = n + (i + 1) % n;
        faces.push([b0, b1, t1]);
        faces.push([b0, t1, t0]);
        faces.push([bottom_center, b1, b0]);
        faces.push([top_center, t0, t1]);
    }
    TriangleMesh::new(vertices, faces).expect("cylinder is valid")
}

/// Single rectangle as two triangles; normal along `(b-a) x (d-a)`.
pub fn quad(a: Pt3, b: Pt3, c: Pt3, d: Pt3) -> TriangleMesh {
    TriangleMesh::new(vec![a, b, c, d], vec![[0, 1, 2], [0, 2, 3]]).expect("quad is valid")
}

/// Concatenates meshes without welding vertices.
pub fn merge(meshes: &[&TriangleMesh]) -> TriangleMesh {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for m in meshes {
        let base = vertices.len() as u32;
        vertices.extend_from_slice(m.vertices());
        triangles.extend(m.triangles().iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
    }
    TriangleMesh::new(vertices, triangles).expect("merged mesh is valid")
}
