//! Real-scan object extraction: table-plane fitting and convex-hull mask
//! segmentation.
//!
//! Cutting everything below the fitted table plane also removes object
//! points near the surface (bowl bottoms); those are recovered by masking
//! the table region with a slightly inflated convex hull of the object
//! points, translated toward the table.

use nalgebra::Matrix3;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geom::{Pt3, Vec3};
use crate::hull::ConvexHull3;
use crate::rng;

/// Oriented plane `normal . x = offset` with its inlier tolerance.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Plane {
    pub normal: Vec3,
    pub offset: f64,
    pub tolerance: f64,
}

impl Plane {
    #[inline]
    pub fn signed_distance(&self, p: &Pt3) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }
}

pub const DEFAULT_PLANE_TOLERANCE: f64 = 0.005;
pub const DEFAULT_RANSAC_ITERATIONS: usize = 1000;

/// RANSAC plane fit: maximizes the inlier count within `tolerance`, refines
/// by least squares over the inliers, and orients the normal toward the
/// sensor (origin). Hypothesis evaluation parallelizes over iterations with
/// a deterministic reduction (best count, ties to the lower iteration).
pub fn fit_plane_ransac(
    points: &[Pt3],
    tolerance: f64,
    iterations: usize,
    seed: u64,
) -> Result<Plane> {
    if points.len() < 3 {
        return Err(CoreError::PlaneFit(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if !(tolerance > 0.0) || iterations == 0 {
        return Err(CoreError::Precondition(
            "tolerance must be positive and iterations >= 1".into(),
        ));
    }

    let hypotheses: Vec<(usize, usize)> = (0..iterations)
        .into_par_iter()
        .filter_map(|iter| {
            let mut r = rng::stream(rng::derive_seed_index(seed, "ransac", iter as u64), "triple");
            let a = r.gen_range(0..points.len());
            let b = r.gen_range(0..points.len());
            let c = r.gen_range(0..points.len());
            if a == b || b == c || a == c {
                return None;
            }
            let n = (points[b] - points[a]).cross(&(points[c] - points[a]));
            let len = n.norm();
            if len < 1e-12 {
                return None;
            }
            let n = n / len;
            let d = n.dot(&points[a].coords);
            let count = points
                .iter()
                .filter(|p| (n.dot(&p.coords) - d).abs() <= tolerance)
                .count();
            Some((iter, count))
        })
        .collect();

    let best = hypotheses
        .iter()
        .max_by(|(ia, ca), (ib, cb)| ca.cmp(cb).then(ib.cmp(ia)))
        .copied();
    let Some((best_iter, best_count)) = best else {
        return Err(CoreError::PlaneFit("no valid hypothesis drawn".into()));
    };
    if best_count < 3 {
        return Err(CoreError::PlaneFit(format!(
            "best hypothesis has only {best_count} inliers"
        )));
    }

    // Re-derive the winning hypothesis, then refine on its inliers.
    let mut r = rng::stream(
        rng::derive_seed_index(seed, "ransac", best_iter as u64),
        "triple",
    );
    let a = r.gen_range(0..points.len());
    let b = r.gen_range(0..points.len());
    let c = r.gen_range(0..points.len());
    let n = (points[b] - points[a])
        .cross(&(points[c] - points[a]))
        .normalize();
    let d = n.dot(&points[a].coords);

    let inliers: Vec<&Pt3> = points
        .iter()
        .filter(|p| (n.dot(&p.coords) - d).abs() <= tolerance)
        .collect();
    let (mut normal, mut offset) = least_squares_plane(&inliers)?;

    // Orient toward the sensor at the origin.
    if normal.dot(&(Pt3::origin() - centroid(&inliers))) < 0.0 {
        normal = -normal;
        offset = -offset;
    }
    Ok(Plane {
        normal,
        offset,
        tolerance,
    })
}

fn centroid(points: &[&Pt3]) -> Pt3 {
    let sum = points
        .iter()
        .fold(Vec3::zeros(), |acc, p| acc + p.coords);
    Pt3::from(sum / points.len() as f64)
}

fn least_squares_plane(points: &[&Pt3]) -> Result<(Vec3, f64)> {
    let c = centroid(points);
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = *p - c;
        cov += d * d.transpose();
    }
    let eig = nalgebra::SymmetricEigen::new(cov);
    let mut min_i = 0;
    for i in 1..3 {
        if eig.eigenvalues[i] < eig.eigenvalues[min_i] {
            min_i = i;
        }
    }
    let normal = eig.eigenvectors.column(min_i).into_owned();
    let len = normal.norm();
    if !(len > 0.0) {
        return Err(CoreError::PlaneFit("degenerate inlier covariance".into()));
    }
    let normal = normal / len;
    Ok((normal, normal.dot(&c.coords)))
}

/// Segments object points from a table scene: keep points above the plane,
/// then reintroduce discarded points that fall inside the object's convex
/// hull after inflating it by `hull_inflation` about its centroid and
/// shifting it `hull_shift` toward the table.
pub fn segment_object(
    points: &[Pt3],
    plane: &Plane,
    hull_inflation: f64,
    hull_shift: f64,
) -> Result<Vec<Pt3>> {
    let mut above = Vec::new();
    let mut discarded = Vec::new();
    for p in points {
        if plane.signed_distance(p) > plane.tolerance {
            above.push(*p);
        } else {
            discarded.push(*p);
        }
    }
    if above.is_empty() {
        return Err(CoreError::EmptyObject);
    }
    let hull = ConvexHull3::build(&above)?
        .scaled(hull_inflation)?
        .translated(&(-plane.normal * hull_shift));

    let mut out = above;
    for p in discarded {
        if hull.contains(&p, 0.0) {
            out.push(p);
        }
    }
    Ok(out)
}
