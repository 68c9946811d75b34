//! Bounding volume hierarchy over mesh triangles.
//!
//! Accelerates the ray and proximity queries behind occupancy labeling,
//! depth rendering, contact detection, and collision checks. Immutable after
//! construction; safe to share across worker threads.

use nalgebra::Isometry3;

use crate::geom::{
    closest_point_on_triangle, ray_triangle, triangle_box_overlap, Aabb, Pt3, RayHit, Vec3,
};
use crate::mesh::{is_watertight, TriangleMesh};

const LEAF_SIZE: usize = 4;

#[derive(Clone, Debug)]
struct Node {
    aabb: Aabb,
    /// Child indices; `left == u32::MAX` marks a leaf.
    left: u32,
    right: u32,
    start: u32,
    count: u32,
}

/// A triangle hit along a ray.
#[derive(Clone, Copy, Debug)]
pub struct TriangleHit {
    pub triangle: u32,
    pub hit: RayHit,
}

/// Closest surface point to a query point.
#[derive(Clone, Copy, Debug)]
pub struct SurfacePoint {
    pub triangle: u32,
    pub point: Pt3,
    pub distance: f64,
}

#[derive(Clone, Debug)]
pub struct TriangleBvh {
    mesh: TriangleMesh,
    nodes: Vec<Node>,
    order: Vec<u32>,
    watertight: bool,
}

impl TriangleBvh {
    pub fn build(mesh: TriangleMesh) -> Self {
        let n = mesh.triangle_count();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let boxes: Vec<Aabb> = (0..n)
            .map(|i| {
                let (a, b, c) = mesh.triangle_vertices(i);
                let mut bb = Aabb::empty();
                bb.grow(a);
                bb.grow(b);
                bb.grow(c);
                bb
            })
            .collect();
        let centroids: Vec<Pt3> = (0..n)
            .map(|i| {
                let (a, b, c) = mesh.triangle_vertices(i);
                Pt3::from((a.coords + b.coords + c.coords) / 3.0)
            })
            .collect();

        let mut nodes = Vec::with_capacity(2 * n);
        build_recursive(&boxes, &centroids, &mut order, 0, n, &mut nodes);
        let watertight = is_watertight(&mesh);
        TriangleBvh {
            mesh,
            nodes,
            order,
            watertight,
        }
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn is_watertight(&self) -> bool {
        self.watertight
    }

    pub fn aabb(&self) -> Aabb {
        self.nodes[0].aabb
    }

    /// All forward intersections of the ray with the surface (`0 < t <= t_max`,
    /// in units of `dir`). Order is unspecified.
    pub fn ray_hits(&self, origin: &Pt3, dir: &Vec3, t_max: f64) -> Vec<TriangleHit> {
        let inv_dir = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut hits = Vec::new();
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node.aabb.ray_interval(origin, &inv_dir, t_max).is_none() {
                continue;
            }
            if node.left == u32::MAX {
                for k in node.start..node.start + node.count {
                    let tri = self.order[k as usize];
                    let (a, b, c) = self.mesh.triangle_vertices(tri as usize);
                    if let Some(hit) = ray_triangle(origin, dir, a, b, c) {
                        if hit.t <= t_max {
                            hits.push(TriangleHit { triangle: tri, hit });
                        }
                    }
                }
            } else {
                stack.push(node.left);
                stack.push(node.right);
            }
        }
        hits
    }

    /// Nearest forward intersection.
    pub fn first_hit(&self, origin: &Pt3, dir: &Vec3, t_max: f64) -> Option<TriangleHit> {
        let inv_dir = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<TriangleHit> = None;
        let mut best_t = t_max;
        // Stack of (node, entry t); visit near child first.
        let mut stack: Vec<(u32, f64)> = Vec::with_capacity(64);
        if let Some((t0, _)) = self.nodes[0].aabb.ray_interval(origin, &inv_dir, best_t) {
            stack.push((0, t0));
        }
        while let Some((ni, t_entry)) = stack.pop() {
            if t_entry > best_t {
                continue;
            }
            let node = &self.nodes[ni as usize];
            if node.left == u32::MAX {
                for k in node.start..node.start + node.count {
                    let tri = self.order[k as usize];
                    let (a, b, c) = self.mesh.triangle_vertices(tri as usize);
                    if let Some(hit) = ray_triangle(origin, dir, a, b, c) {
                        if hit.t < best_t {
                            best_t = hit.t;
                            best = Some(TriangleHit { triangle: tri, hit });
                        }
                    }
                }
            } else {
                let l = node.left as usize;
                let r = node.right as usize;
                let tl = self.nodes[l].aabb.ray_interval(origin, &inv_dir, best_t);
                let tr = self.nodes[r].aabb.ray_interval(origin, &inv_dir, best_t);
                match (tl, tr) {
                    (Some((a, _)), Some((b, _))) => {
                        if a < b {
                            stack.push((r as u32, b));
                            stack.push((l as u32, a));
                        } else {
                            stack.push((l as u32, a));
                            stack.push((r as u32, b));
                        }
                    }
                    (Some((a, _)), None) => stack.push((l as u32, a)),
                    (None, Some((b, _))) => stack.push((r as u32, b)),
                    (None, None) => {}
                }
            }
        }
        best
    }

    /// Closest point on the surface within `cap` of `p`; `None` if the surface
    /// is farther than `cap`.
    pub fn nearest_point(&self, p: &Pt3, cap: f64) -> Option<SurfacePoint> {
        let mut best: Option<SurfacePoint> = None;
        let mut best_d2 = cap * cap;
        self.nearest_recursive(0, p, &mut best_d2, &mut best);
        best
    }

    fn nearest_recursive(
        &self,
        ni: u32,
        p: &Pt3,
        best_d2: &mut f64,
        best: &mut Option<SurfacePoint>,
    ) {
        let node = &self.nodes[ni as usize];
        if node.aabb.distance_sq(p) > *best_d2 {
            return;
        }
        if node.left == u32::MAX {
            for k in node.start..node.start + node.count {
                let tri = self.order[k as usize];
                let (a, b, c) = self.mesh.triangle_vertices(tri as usize);
                let q = closest_point_on_triangle(p, a, b, c);
                let d2 = (q - p).norm_squared();
                if d2 <= *best_d2 {
                    *best_d2 = d2;
                    *best = Some(SurfacePoint {
                        triangle: tri,
                        point: q,
                        distance: d2.sqrt(),
                    });
                }
            }
        } else {
            let l = node.left;
            let r = node.right;
            let dl = self.nodes[l as usize].aabb.distance_sq(p);
            let dr = self.nodes[r as usize].aabb.distance_sq(p);
            if dl < dr {
                self.nearest_recursive(l, p, best_d2, best);
                self.nearest_recursive(r, p, best_d2, best);
            } else {
                self.nearest_recursive(r, p, best_d2, best);
                self.nearest_recursive(l, p, best_d2, best);
            }
        }
    }

    /// True if any triangle intersects the oriented box given by
    /// `box_to_object` and half-extents.
    pub fn intersects_obb(&self, box_to_object: &Isometry3<f64>, half_extents: &Vec3) -> bool {
        // Conservative world-space AABB of the OBB for tree pruning.
        let mut world = Aabb::empty();
        for i in 0..8 {
            let corner = Pt3::new(
                if i & 1 != 0 { half_extents.x } else { -half_extents.x },
                if i & 2 != 0 { half_extents.y } else { -half_extents.y },
                if i & 4 != 0 { half_extents.z } else { -half_extents.z },
            );
            world.grow(&box_to_object.transform_point(&corner));
        }
        let inv = box_to_object.inverse();
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if !node.aabb.overlaps(&world) {
                continue;
            }
            if node.left == u32::MAX {
                for k in node.start..node.start + node.count {
                    let tri = self.order[k as usize];
                    let (a, b, c) = self.mesh.triangle_vertices(tri as usize);
                    let va = inv.transform_point(a).coords;
                    let vb = inv.transform_point(b).coords;
                    let vc = inv.transform_point(c).coords;
                    if triangle_box_overlap(half_extents, &va, &vb, &vc) {
                        return true;
                    }
                }
            } else {
                stack.push(node.left);
                stack.push(node.right);
            }
        }
        false
    }
}

fn build_recursive(
    boxes: &[Aabb],
    centroids: &[Pt3],
    order: &mut [u32],
    start: usize,
    count: usize,
    nodes: &mut Vec<Node>,
) -> u32 {
    let mut aabb = Aabb::empty();
    for &t in &order[start..start + count] {
        aabb.merge(&boxes[t as usize]);
    }
    let index = nodes.len() as u32;
    nodes.push(Node {
        aabb,
        left: u32::MAX,
        right: u32::MAX,
        start: start as u32,
        count: count as u32,
    });
    if count <= LEAF_SIZE {
        return index;
    }

    let mut cb = Aabb::empty();
    for &t in &order[start..start + count] {
        cb.grow(&centroids[t as usize]);
    }
    let ext = cb.extents();
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    if ext[axis] <= 0.0 {
        return index; // all centroids coincide; keep as oversized leaf
    }

    let mid = start + count / 2;
    order[start..start + count].select_nth_unstable_by(count / 2, |&a, &b| {
        centroids[a as usize][axis]
            .partial_cmp(&centroids[b as usize][axis])
            .unwrap()
            .then(a.cmp(&b))
    });

    let left = build_recursive(boxes, centroids, order, start, mid - start, nodes);
    let right = build_recursive(boxes, centroids, order, mid, start + count - mid, nodes);
    nodes[index as usize].left = left;
    nodes[index as usize].right = right;
    nodes[index as usize].start = 0;
    nodes[index as usize].count = 0;
    index
}
