//! 3D convex hulls (incremental construction) with point-containment tests.

use std::collections::HashMap;

use crate::error::{CoreError, Result};
use crate::geom::{Pt3, Vec3};

#[derive(Clone, Debug)]
struct Facet {
    vertices: [u32; 3],
    normal: Vec3,
    offset: f64,
}

/// Convex hull of a 3D point set, stored as outward-oriented facets.
#[derive(Clone, Debug)]
pub struct ConvexHull3 {
    points: Vec<Pt3>,
    facets: Vec<Facet>,
    centroid: Pt3,
}

impl ConvexHull3 {
    /// Builds the hull; fails when all points are coplanar (or fewer than 4).
    pub fn build(points: &[Pt3]) -> Result<Self> {
        if points.len() < 4 {
            return Err(CoreError::DegenerateGeometry(format!(
                "convex hull needs >= 4 points, got {}",
                points.len()
            )));
        }
        let scale = {
            let bb = crate::geom::Aabb::from_points(points.iter());
            bb.extents().norm().max(1e-12)
        };
        let eps = 1e-10 * scale;

        // Initial tetrahedron from extreme points.
        let (i0, i1) = farthest_pair(points);
        let d01 = points[i1 as usize] - points[i0 as usize];
        if d01.norm() < eps {
            return Err(CoreError::DegenerateGeometry(
                "all hull points coincide".into(),
            ));
        }
        let i2 = (0..points.len() as u32)
            .max_by(|&a, &b| {
                let da = d01
                    .cross(&(points[a as usize] - points[i0 as usize]))
                    .norm();
                let db = d01
                    .cross(&(points[b as usize] - points[i0 as usize]))
                    .norm();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        let plane_n = d01
            .cross(&(points[i2 as usize] - points[i0 as usize]));
        if plane_n.norm() < eps {
            return Err(CoreError::DegenerateGeometry(
                "hull points are collinear".into(),
            ));
        }
        let plane_n = plane_n.normalize();
        let i3 = (0..points.len() as u32)
            .max_by(|&a, &b| {
                let da = plane_n
                    .dot(&(points[a as usize] - points[i0 as usize]))
                    .abs();
                let db = plane_n
                    .dot(&(points[b as usize] - points[i0 as usize]))
                    .abs();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        let h3 = plane_n.dot(&(points[i3 as usize] - points[i0 as usize]));
        if h3.abs() < eps {
            return Err(CoreError::DegenerateGeometry(
                "hull points are coplanar".into(),
            ));
        }

        let centroid = Pt3::from(
            (points[i0 as usize].coords
                + points[i1 as usize].coords
                + points[i2 as usize].coords
                + points[i3 as usize].coords)
                / 4.0,
        );

        let mut hull = ConvexHull3 {
            points: points.to_vec(),
            facets: Vec::new(),
            centroid,
        };
        for tri in [
            [i0, i1, i2],
            [i0, i2, i3],
            [i0, i3, i1],
            [i1, i3, i2],
        ] {
            hull.push_facet(tri);
        }

        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        order.retain(|i| *i != i0 && *i != i1 && *i != i2 && *i != i3);
        for p in order {
            hull.insert(p, eps);
        }
        hull.centroid = hull.facet_vertex_centroid();
        Ok(hull)
    }

    fn push_facet(&mut self, mut tri: [u32; 3]) {
        let a = self.points[tri[0] as usize];
        let b = self.points[tri[1] as usize];
        let c = self.points[tri[2] as usize];
        let mut normal = (b - a).cross(&(c - a));
        if normal.norm() < 1e-300 {
            normal = Vec3::new(0.0, 0.0, 1.0);
        } else {
            normal = normal.normalize();
        }
        // Orient away from the interior.
        if normal.dot(&(a - self.centroid)) < 0.0 {
            normal = -normal;
            tri.swap(1, 2);
        }
        let offset = normal.dot(&a.coords);
        self.facets.push(Facet {
            vertices: tri,
            normal,
            offset,
        });
    }

    fn insert(&mut self, p: u32, eps: f64) {
        let pos = self.points[p as usize];
        let visible: Vec<usize> = self
            .facets
            .iter()
            .enumerate()
            .filter(|(_, f)| f.normal.dot(&pos.coords) - f.offset > eps)
            .map(|(i, _)| i)
            .collect();
        if visible.is_empty() {
            return; // interior point
        }
        // Horizon: edges shared by exactly one visible facet.
        let mut edge_count: HashMap<(u32, u32), (u32, u32)> = HashMap::new();
        for &fi in &visible {
            let f = &self.facets[fi];
            for k in 0..3 {
                let a = f.vertices[k];
                let b = f.vertices[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                let entry = edge_count.entry(key).or_insert((0, 0));
                entry.0 += 1;
                // remember the directed orientation seen from the visible side
                if a < b {
                    entry.1 = 1;
                }
            }
        }
        let mut horizon: Vec<(u32, u32)> = Vec::new();
        for &fi in &visible {
            let f = &self.facets[fi];
            for k in 0..3 {
                let a = f.vertices[k];
                let b = f.vertices[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                if edge_count[&key].0 == 1 {
                    horizon.push((a, b));
                }
            }
        }
        // Remove visible facets (descending index to keep indices valid).
        let mut visible_sorted = visible;
        visible_sorted.sort_unstable_by(|a, b| b.cmp(a));
        for fi in visible_sorted {
            self.facets.swap_remove(fi);
        }
        // New facets from the horizon to p; keep the horizon's winding so
        // the new facets face outward.
        for (a, b) in horizon {
            self.push_facet([a, b, p]);
        }
    }

    fn facet_vertex_centroid(&self) -> Pt3 {
        let mut used: Vec<u32> = self
            .facets
            .iter()
            .flat_map(|f| f.vertices.iter().copied())
            .collect();
        used.sort_unstable();
        used.dedup();
        let sum = used
            .iter()
            .fold(Vec3::zeros(), |acc, i| acc + self.points[*i as usize].coords);
        Pt3::from(sum / used.len() as f64)
    }

    pub fn centroid(&self) -> Pt3 {
        self.centroid
    }

    pub fn facet_count(&self) -> usize {
        self.facets.len()
    }

    /// Outward facet planes as (unit normal, offset): `n . x <= d` inside.
    pub fn planes(&self) -> Vec<(Vec3, f64)> {
        self.facets.iter().map(|f| (f.normal, f.offset)).collect()
    }

    /// Half-space containment test with tolerance `eps` (positive `eps`
    /// accepts points slightly outside).
    pub fn contains(&self, p: &Pt3, eps: f64) -> bool {
        self.facets
            .iter()
            .all(|f| f.normal.dot(&p.coords) - f.offset <= eps)
    }

    /// Scales the hull about its centroid.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(CoreError::Precondition(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        let c = self.centroid;
        let points: Vec<Pt3> = self
            .points
            .iter()
            .map(|p| Pt3::from(c.coords + (p - c) * factor))
            .collect();
        let facets = self
            .facets
            .iter()
            .map(|f| {
                let a = points[f.vertices[0] as usize];
                Facet {
                    vertices: f.vertices,
                    normal: f.normal,
                    offset: f.normal.dot(&a.coords),
                }
            })
            .collect();
        Ok(ConvexHull3 {
            points,
            facets,
            centroid: c,
        })
    }

    /// Translates the hull.
    pub fn translated(&self, delta: &Vec3) -> Self {
        let points: Vec<Pt3> = self.points.iter().map(|p| p + delta).collect();
        let facets = self
            .facets
            .iter()
            .map(|f| Facet {
                vertices: f.vertices,
                normal: f.normal,
                offset: f.offset + f.normal.dot(delta),
            })
            .collect();
        ConvexHull3 {
            points,
            facets,
            centroid: self.centroid + delta,
        }
    }
}

fn farthest_pair(points: &[Pt3]) -> (u32, u32) {
    // Extremes along each axis, then the farthest pair among them.
    let mut extremes = Vec::new();
    for axis in 0..3 {
        let lo = (0..points.len() as u32)
            .min_by(|&a, &b| {
                points[a as usize][axis]
                    .partial_cmp(&points[b as usize][axis])
                    .unwrap()
            })
            .unwrap();
        let hi = (0..points.len() as u32)
            .max_by(|&a, &b| {
                points[a as usize][axis]
                    .partial_cmp(&points[b as usize][axis])
                    .unwrap()
            })
            .unwrap();
        extremes.push(lo);
        extremes.push(hi);
    }
    let mut best = (extremes[0], extremes[1]);
    let mut best_d = -1.0;
    for &a in &extremes {
        for &b in &extremes {
            let d = (points[a as usize] - points[b as usize]).norm_squared();
            if d > best_d {
                best_d = d;
                best = (a, b);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    #[test]
    fn hull_of_cube_corners() {
        let mut pts = Vec::new();
        for i in 0..8 {
            pts.push(Pt3::new(
                f64::from(i & 1),
                f64::from((i >> 1) & 1),
                f64::from((i >> 2) & 1),
            ));
        }
        // plus interior points that must not affect containment
        pts.push(Pt3::new(0.5, 0.5, 0.5));
        pts.push(Pt3::new(0.2, 0.7, 0.3));
        let hull = ConvexHull3::build(&pts).unwrap();
        assert!(hull.contains(&Pt3::new(0.5, 0.5, 0.5), 1e-9));
        assert!(hull.contains(&Pt3::new(0.999, 0.001, 0.5), 1e-9));
        assert!(!hull.contains(&Pt3::new(1.2, 0.5, 0.5), 1e-9));
        assert!(!hull.contains(&Pt3::new(-0.01, 0.5, 0.5), 1e-9));
    }

    #[test]
    fn containment_matches_brute_force_half_spaces() {
        let mut r = rng::stream(2, "hull");
        let pts: Vec<Pt3> = (0..200)
            .map(|_| Pt3::new(r.gen::<f64>(), r.gen::<f64>(), r.gen::<f64>()))
            .collect();
        let hull = ConvexHull3::build(&pts).unwrap();
        let planes = hull.planes();
        for _ in 0..500 {
            let q = Pt3::new(
                r.gen::<f64>() * 1.4 - 0.2,
                r.gen::<f64>() * 1.4 - 0.2,
                r.gen::<f64>() * 1.4 - 0.2,
            );
            let brute = planes.iter().all(|(n, d)| n.dot(&q.coords) - d <= 1e-9);
            assert_eq!(hull.contains(&q, 1e-9), brute);
        }
        // All input points are inside their own hull.
        for p in &pts {
            assert!(hull.contains(p, 1e-9));
        }
    }

    #[test]
    fn coplanar_points_are_degenerate() {
        let pts: Vec<Pt3> = (0..10)
            .map(|i| Pt3::new(f64::from(i), f64::from(i * i % 7), 0.0))
            .collect();
        assert!(matches!(
            ConvexHull3::build(&pts),
            Err(CoreError::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn scaling_grows_containment() {
        let pts = vec![
            Pt3::new(0.0, 0.0, 0.0),
            Pt3::new(1.0, 0.0, 0.0),
            Pt3::new(0.0, 1.0, 0.0),
            Pt3::new(0.0, 0.0, 1.0),
        ];
        let hull = ConvexHull3::build(&pts).unwrap();
        // Just past the diagonal face x+y+z = 1; scaling by 1.5 about the
        // centroid moves that face out to x+y+z = 1.125.
        let outside = Pt3::new(0.35, 0.35, 0.35);
        assert!(!hull.contains(&outside, 1e-9));
        let grown = hull.scaled(1.5).unwrap();
        assert!(grown.contains(&outside, 1e-9));
        // Shrinking pushes boundary points out.
        let shrunk = hull.scaled(0.5).unwrap();
        assert!(!shrunk.contains(&Pt3::new(0.9, 0.0, 0.0), 1e-9));
    }

    #[test]
    fn translation_moves_containment() {
        let pts = vec![
            Pt3::new(0.0, 0.0, 0.0),
            Pt3::new(1.0, 0.0, 0.0),
            Pt3::new(0.0, 1.0, 0.0),
            Pt3::new(0.0, 0.0, 1.0),
            Pt3::new(1.0, 1.0, 1.0),
        ];
        let hull = ConvexHull3::build(&pts).unwrap();
        let moved = hull.translated(&Vec3::new(0.0, 0.0, -0.5));
        assert!(moved.contains(&Pt3::new(0.5, 0.5, -0.2), 1e-9));
        assert!(!moved.contains(&Pt3::new(0.5, 0.5, 0.9), 1e-9));
    }
}
