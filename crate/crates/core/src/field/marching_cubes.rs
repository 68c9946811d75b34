//! Marching Cubes isosurface extraction.
//!
//! The 256-entry case table is generated once at startup by tracing the
//! isosurface boundary over the cube faces. Ambiguous faces (two diagonal
//! inside corners) are resolved with a fixed rule - each inside corner is cut
//! off separately - which depends only on the face's corner signs, so
//! neighboring cells always agree and the extracted surface has no cracks.
//! Vertices are linearly interpolated on cell edges and shared through a
//! global edge index, giving closed meshes whenever the isosurface stays off
//! the grid boundary.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::error::Result;
use crate::field::OccupancyGrid;
use crate::geom::Pt3;
use crate::mesh::TriangleMesh;

/// Corner `c` of the unit cube sits at bits (x, y, z) = (c&1, c>>1&1, c>>2&1).
fn corner_pos(c: usize) -> [f64; 3] {
    [
        (c & 1) as f64,
        ((c >> 1) & 1) as f64,
        ((c >> 2) & 1) as f64,
    ]
}

/// The 12 cube edges: 4 per axis.
pub(crate) const EDGE_CORNERS: [(usize, usize); 12] = [
    (0, 1),
    (2, 3),
    (4, 5),
    (6, 7), // x-edges
    (0, 2),
    (1, 3),
    (4, 6),
    (5, 7), // y-edges
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7), // z-edges
];

fn edge_axis(e: usize) -> usize {
    e / 4
}

fn edge_midpoint(e: usize) -> [f64; 3] {
    let (a, b) = EDGE_CORNERS[e];
    let pa = corner_pos(a);
    let pb = corner_pos(b);
    [
        (pa[0] + pb[0]) * 0.5,
        (pa[1] + pb[1]) * 0.5,
        (pa[2] + pb[2]) * 0.5,
    ]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// One isosurface polygon inside a cell, as a cycle of cube-edge ids.
///
/// Triangles (direct for cycles of length 3, centroid fans otherwise) are
/// formed at extraction time: a centroid vertex is strictly interior to its
/// cell, so no internal triangulation edge can coincide with one emitted by
/// a neighboring cell, which keeps the mesh edge-manifold even around
/// ambiguous faces.
type CaseCycles = Vec<Vec<u8>>;

/// Per-configuration isosurface cycles.
fn case_table() -> &'static Vec<CaseCycles> {
    static TABLE: OnceLock<Vec<CaseCycles>> = OnceLock::new();
    TABLE.get_or_init(|| (0..256).map(generate_case).collect())
}

/// Directed segment of the isosurface boundary across one cube face.
fn face_segments(config: usize, axis: usize, side: usize) -> Vec<(usize, usize)> {
    let inside = |c: usize| (config >> c) & 1 == 1;
    let face_corners: Vec<usize> = (0..8)
        .filter(|c| (c >> axis) & 1 == side)
        .collect();
    let on_face = |c: usize| (c >> axis) & 1 == side;
    let face_edges: Vec<usize> = (0..12)
        .filter(|&e| {
            let (a, b) = EDGE_CORNERS[e];
            on_face(a) && on_face(b)
        })
        .collect();
    let cut: Vec<usize> = face_edges
        .iter()
        .copied()
        .filter(|&e| {
            let (a, b) = EDGE_CORNERS[e];
            inside(a) != inside(b)
        })
        .collect();

    let mut normal = [0.0; 3];
    normal[axis] = if side == 1 { 1.0 } else { -1.0 };

    // Orients `(from, to)` so the inside reference corner lies to the left
    // when viewed along the outward face normal.
    let orient = |e1: usize, e2: usize, reference: usize| -> (usize, usize) {
        let q1 = edge_midpoint(e1);
        let q2 = edge_midpoint(e2);
        let r = corner_pos(reference);
        let s = dot(cross(sub(q2, q1), sub(r, q1)), normal);
        if s > 0.0 {
            (e1, e2)
        } else {
            (e2, e1)
        }
    };

    match cut.len() {
        0 => Vec::new(),
        2 => {
            // Reference: the inside corner farthest from the segment line.
            let q1 = edge_midpoint(cut[0]);
            let q2 = edge_midpoint(cut[1]);
            let reference = face_corners
                .iter()
                .copied()
                .filter(|&c| inside(c))
                .max_by(|&a, &b| {
                    let da = dot(
                        cross(sub(q2, q1), sub(corner_pos(a), q1)),
                        normal,
                    )
                    .abs();
                    let db = dot(
                        cross(sub(q2, q1), sub(corner_pos(b), q1)),
                        normal,
                    )
                    .abs();
                    da.partial_cmp(&db).unwrap()
                })
                .expect("cut face has an inside corner");
            vec![orient(cut[0], cut[1], reference)]
        }
        4 => {
            // Ambiguous face: two diagonal inside corners; cut each off with
            // its own segment (fixed rule, no asymptotic decider).
            let insides: Vec<usize> = face_corners
                .iter()
                .copied()
                .filter(|&c| inside(c))
                .collect();
            debug_assert_eq!(insides.len(), 2);
            insides
                .iter()
                .map(|&ci| {
                    let incident: Vec<usize> = cut
                        .iter()
                        .copied()
                        .filter(|&e| {
                            let (a, b) = EDGE_CORNERS[e];
                            a == ci || b == ci
                        })
                        .collect();
                    debug_assert_eq!(incident.len(), 2);
                    orient(incident[0], incident[1], ci)
                })
                .collect()
        }
        n => unreachable!("face with {n} cut edges"),
    }
}

fn generate_case(config: usize) -> CaseCycles {
    if config == 0 || config == 255 {
        return Vec::new();
    }
    // Directed segment map: source edge -> target edge.
    let mut next = [usize::MAX; 12];
    for axis in 0..3 {
        for side in 0..2 {
            for (from, to) in face_segments(config, axis, side) {
                assert_eq!(next[from], usize::MAX, "config {config}: duplicate outgoing segment");
                next[from] = to;
            }
        }
    }

    let mut cycles = Vec::new();
    let mut visited = [false; 12];
    for start in 0..12 {
        if next[start] == usize::MAX || visited[start] {
            continue;
        }
        let mut cycle = vec![start as u8];
        visited[start] = true;
        let mut cur = next[start];
        while cur != start {
            assert!(!visited[cur], "config {config}: crossing cycles");
            visited[cur] = true;
            cycle.push(cur as u8);
            cur = next[cur];
        }
        assert!(cycle.len() >= 3, "config {config}: degenerate cycle");
        cycles.push(cycle);
    }
    cycles
}

/// Extracts the iso-surface of a cell-centered scalar grid. Values above
/// `iso` count as inside. Returns `None` when no cell crosses the level.
pub fn marching_cubes(grid: &OccupancyGrid, iso: f64) -> Result<Option<TriangleMesh>> {
    let [nx, ny, nz] = grid.resolution();
    if nx < 2 || ny < 2 || nz < 2 {
        return Ok(None);
    }
    let table = case_table();

    let mut vertices: Vec<Pt3> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    // Global edge key: (axis, grid coords of the edge's lower corner).
    let mut edge_vertex: HashMap<(u8, u32, u32, u32), u32> = HashMap::new();

    let value = |x: u32, y: u32, z: u32| f64::from(grid.value(x, y, z));

    for z in 0..nz - 1 {
        for y in 0..ny - 1 {
            for x in 0..nx - 1 {
                let mut config = 0usize;
                let mut corner_vals = [0.0f64; 8];
                for c in 0..8 {
                    let v = value(
                        x + (c as u32 & 1),
                        y + ((c as u32 >> 1) & 1),
                        z + ((c as u32 >> 2) & 1),
                    );
                    corner_vals[c] = v;
                    if v > iso {
                        config |= 1 << c;
                    }
                }
                if config == 0 || config == 255 {
                    continue;
                }
                for cycle in &table[config] {
                    let ids: Vec<u32> = cycle
                        .iter()
                        .map(|&e| {
                            let e = e as usize;
                            let (ca, cb) = EDGE_CORNERS[e];
                            let ga = (
                                x + (ca as u32 & 1),
                                y + ((ca as u32 >> 1) & 1),
                                z + ((ca as u32 >> 2) & 1),
                            );
                            let key = (edge_axis(e) as u8, ga.0, ga.1, ga.2);
                            let next_id = vertices.len() as u32;
                            *edge_vertex.entry(key).or_insert_with(|| {
                                let va = corner_vals[ca];
                                let vb = corner_vals[cb];
                                let t =
                                    ((iso - va) / (vb - va)).clamp(1e-4, 1.0 - 1e-4);
                                let pa = grid.voxel_center(ga.0, ga.1, ga.2);
                                let gb = (
                                    x + (cb as u32 & 1),
                                    y + ((cb as u32 >> 1) & 1),
                                    z + ((cb as u32 >> 2) & 1),
                                );
                                let pb = grid.voxel_center(gb.0, gb.1, gb.2);
                                vertices
                                    .push(Pt3::from(pa.coords + (pb.coords - pa.coords) * t));
                                next_id
                            })
                        })
                        .collect();
                    // Cycles walk with inside-on-left seen from outside; the
                    // outward winding reverses them.
                    if ids.len() == 3 {
                        triangles.push([ids[0], ids[2], ids[1]]);
                    } else {
                        let mut c = crate::geom::Vec3::zeros();
                        for &id in &ids {
                            c += vertices[id as usize].coords;
                        }
                        let center_id = vertices.len() as u32;
                        vertices.push(Pt3::from(c / ids.len() as f64));
                        for i in 0..ids.len() {
                            let a = ids[i];
                            let b = ids[(i + 1) % ids.len()];
                            triangles.push([center_id, b, a]);
                        }
                    }
                }
            }
        }
    }

    if triangles.is_empty() {
        return Ok(None);
    }
    Ok(Some(TriangleMesh::from_parts_unfiltered(
        vertices, triangles,
    )?))
}
