//! Small geometric primitives shared across the crate.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

pub type Vec3 = Vector3<f64>;
pub type Pt3 = Point3<f64>;

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Pt3,
    pub max: Pt3,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Pt3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Pt3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Pt3>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Pt3) {
        for i in 0..3 {
            self.min[i] = self.min[i].min(p[i]);
            self.max[i] = self.max[i].max(p[i]);
        }
    }

    pub fn merge(&mut self, other: &Aabb) {
        for i in 0..3 {
            self.min[i] = self.min[i].min(other.min[i]);
            self.max[i] = self.max[i].max(other.max[i]);
        }
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|i| self.min[i] > self.max[i])
    }

    pub fn center(&self) -> Pt3 {
        Pt3::from((self.min.coords + self.max.coords) * 0.5)
    }

    pub fn extents(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn longest_side(&self) -> f64 {
        let e = self.extents();
        e.x.max(e.y).max(e.z)
    }

    pub fn half_diagonal(&self) -> f64 {
        self.extents().norm() * 0.5
    }

    pub fn contains(&self, p: &Pt3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Squared distance from `p` to this box (0 inside).
    pub fn distance_sq(&self, p: &Pt3) -> f64 {
        let mut d2 = 0.0;
        for i in 0..3 {
            let v = p[i];
            if v < self.min[i] {
                d2 += (self.min[i] - v) * (self.min[i] - v);
            } else if v > self.max[i] {
                d2 += (v - self.max[i]) * (v - self.max[i]);
            }
        }
        d2
    }

    /// Slab test; returns the parametric entry/exit interval clipped to [0, t_max].
    pub fn ray_interval(&self, origin: &Pt3, inv_dir: &Vec3, t_max: f64) -> Option<(f64, f64)> {
        let mut t0 = 0.0_f64;
        let mut t1 = t_max;
        for i in 0..3 {
            let mut near = (self.min[i] - origin[i]) * inv_dir[i];
            let mut far = (self.max[i] - origin[i]) * inv_dir[i];
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            t0 = t0.max(near);
            t1 = t1.min(far);
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && self.max[i] >= other.min[i])
    }
}

/// Translation followed by a per-axis scale: `p' = scale .* (p + translation)`.
///
/// The uniform case covers mesh and input normalization; the per-axis case
/// exists for upright-axis scale augmentation. Closed under composition and
/// inversion.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct RigidScaleTransform {
    pub translation: Vec3,
    pub scale: Vec3,
}

impl RigidScaleTransform {
    pub fn identity() -> Self {
        RigidScaleTransform {
            translation: Vec3::zeros(),
            scale: Vec3::new(1.0, 1.0, 1.0),
        }
    }

    pub fn uniform(translation: Vec3, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(CoreError::DegenerateGeometry(format!(
                "scale must be positive and finite, got {scale}"
            )));
        }
        Ok(RigidScaleTransform {
            translation,
            scale: Vec3::new(scale, scale, scale),
        })
    }

    pub fn per_axis(translation: Vec3, scale: Vec3) -> Result<Self> {
        if scale.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(CoreError::DegenerateGeometry(format!(
                "per-axis scale must be positive, got {scale:?}"
            )));
        }
        Ok(RigidScaleTransform { translation, scale })
    }

    #[inline]
    pub fn apply(&self, p: &Pt3) -> Pt3 {
        Pt3::new(
            (p.x + self.translation.x) * self.scale.x,
            (p.y + self.translation.y) * self.scale.y,
            (p.z + self.translation.z) * self.scale.z,
        )
    }

    #[inline]
    pub fn apply_inverse(&self, p: &Pt3) -> Pt3 {
        Pt3::new(
            p.x / self.scale.x - self.translation.x,
            p.y / self.scale.y - self.translation.y,
            p.z / self.scale.z - self.translation.z,
        )
    }

    pub fn inverse(&self) -> Self {
        RigidScaleTransform {
            translation: Vec3::new(
                -self.translation.x * self.scale.x,
                -self.translation.y * self.scale.y,
                -self.translation.z * self.scale.z,
            ),
            scale: Vec3::new(1.0 / self.scale.x, 1.0 / self.scale.y, 1.0 / self.scale.z),
        }
    }

    /// `self` first, then `next`.
    pub fn then(&self, next: &Self) -> Self {
        RigidScaleTransform {
            translation: Vec3::new(
                self.translation.x + next.translation.x / self.scale.x,
                self.translation.y + next.translation.y / self.scale.y,
                self.translation.z + next.translation.z / self.scale.z,
            ),
            scale: self.scale.component_mul(&next.scale),
        }
    }
}

/// Intersection of a ray with a triangle.
#[derive(Clone, Copy, Debug)]
pub struct RayHit {
    pub t: f64,
    pub u: f64,
    pub v: f64,
    /// The hit lies near a triangle edge/vertex or the ray is near-parallel;
    /// parity counting must not trust it.
    pub grazing: bool,
}

const PARALLEL_EPS: f64 = 1e-12;
const BARY_EPS: f64 = 1e-9;

/// Möller–Trumbore ray/triangle intersection. `dir` need not be unit length;
/// `t` is expressed in units of `dir`.
#[inline]
pub fn ray_triangle(origin: &Pt3, dir: &Vec3, a: &Pt3, b: &Pt3, c: &Pt3) -> Option<RayHit> {
    let e1 = b - a;
    let e2 = c - a;
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < PARALLEL_EPS {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = origin - a;
    let u = tvec.dot(&pvec) * inv_det;
    if !(-BARY_EPS..=1.0 + BARY_EPS).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv_det;
    if v < -BARY_EPS || u + v > 1.0 + BARY_EPS {
        return None;
    }
    let t = e2.dot(&qvec) * inv_det;
    if t <= 0.0 {
        return None;
    }
    let grazing = u < BARY_EPS || v < BARY_EPS || u + v > 1.0 - BARY_EPS || det.abs() < 1e-9;
    Some(RayHit { t, u, v, grazing })
}

pub fn triangle_area(a: &Pt3, b: &Pt3, c: &Pt3) -> f64 {
    (b - a).cross(&(c - a)).norm() * 0.5
}

pub fn triangle_normal(a: &Pt3, b: &Pt3, c: &Pt3) -> Vec3 {
    let n = (b - a).cross(&(c - a));
    let len = n.norm();
    if len > 0.0 {
        n / len
    } else {
        Vec3::zeros()
    }
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision Detection).
pub fn closest_point_on_triangle(p: &Pt3, a: &Pt3, b: &Pt3, c: &Pt3) -> Pt3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }

    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }

    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }

    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Separating-axis test between a triangle and an axis-aligned box centered at
/// the origin with half-extents `h` (Akenine-Möller).
pub fn triangle_box_overlap(h: &Vec3, v0: &Vec3, v1: &Vec3, v2: &Vec3) -> bool {
    // Box face normals.
    for i in 0..3 {
        let lo = v0[i].min(v1[i]).min(v2[i]);
        let hi = v0[i].max(v1[i]).max(v2[i]);
        if lo > h[i] || hi < -h[i] {
            return false;
        }
    }

    // Triangle plane.
    let e0 = v1 - v0;
    let e1 = v2 - v1;
    let n = e0.cross(&e1);
    let d = n.dot(v0);
    let r = h.x * n.x.abs() + h.y * n.y.abs() + h.z * n.z.abs();
    if d.abs() > r {
        return false;
    }

    // Nine cross-product axes.
    let e2 = v0 - v2;
    let edges = [e0, e1, e2];
    for e in &edges {
        for axis in 0..3 {
            let mut a = Vec3::zeros();
            // axis unit vector cross edge
            let (i, j) = match axis {
                0 => (1, 2),
                1 => (2, 0),
                _ => (0, 1),
            };
            a[i] = -e[j];
            a[j] = e[i];
            if a.norm_squared() < 1e-14 {
                continue;
            }
            let p0 = a.dot(v0);
            let p1 = a.dot(v1);
            let p2 = a.dot(v2);
            let lo = p0.min(p1).min(p2);
            let hi = p0.max(p1).max(p2);
            let rad = h.x * a.x.abs() + h.y * a.y.abs() + h.z * a.z.abs();
            if lo > rad || hi < -rad {
                return false;
            }
        }
    }
    true
}
