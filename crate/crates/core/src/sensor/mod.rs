//! Depth-sensor simulation: pinhole rendering, hemisphere view sampling,
//! structured-light noise, back-projection, and input-cloud augmentation.

pub mod kinect;
pub mod pfm;
pub mod render;

use nalgebra::{Isometry3, Matrix3, Rotation3, UnitQuaternion};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geom::{Aabb, Pt3, RigidScaleTransform, Vec3};
use crate::rng;

pub use kinect::{simulate_kinect, KinectNoiseParams};
pub use render::render_depth;

/// Default intrinsics of a typical structured-light sensor.
pub const DEFAULT_WIDTH: u32 = 640;
pub const DEFAULT_HEIGHT: u32 = 480;
pub const DEFAULT_FOCAL: f64 = 575.0;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PinholeCamera {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// camera -> world. Camera convention: +x right, +y down, +z forward.
    pub pose: Isometry3<f64>,
}

impl PinholeCamera {
    pub fn new(
        width: u32,
        height: u32,
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        pose: Isometry3<f64>,
    ) -> Result<Self> {
        if fx <= 0.0 || fy <= 0.0 {
            return Err(CoreError::Precondition(format!(
                "focal lengths must be positive: fx={fx}, fy={fy}"
            )));
        }
        if !(0.0..f64::from(width)).contains(&cx) || !(0.0..f64::from(height)).contains(&cy) {
            return Err(CoreError::Precondition(format!(
                "principal point ({cx}, {cy}) outside image {width}x{height}"
            )));
        }
        Ok(PinholeCamera {
            width,
            height,
            fx,
            fy,
            cx,
            cy,
            pose,
        })
    }

    pub fn default_intrinsics(pose: Isometry3<f64>) -> Self {
        PinholeCamera::new(
            DEFAULT_WIDTH,
            DEFAULT_HEIGHT,
            DEFAULT_FOCAL,
            DEFAULT_FOCAL,
            f64::from(DEFAULT_WIDTH) / 2.0 - 0.5,
            f64::from(DEFAULT_HEIGHT) / 2.0 - 0.5,
            pose,
        )
        .expect("default intrinsics are valid")
    }

    /// Camera-frame ray direction through pixel (u, v), z component = 1.
    #[inline]
    pub fn pixel_ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// Back-projects a pixel with z-depth `d` to the camera frame.
    #[inline]
    pub fn unproject(&self, u: f64, v: f64, d: f64) -> Pt3 {
        Pt3::new((u - self.cx) * d / self.fx, (v - self.cy) * d / self.fy, d)
    }

    /// Projects a camera-frame point to pixel coordinates.
    #[inline]
    pub fn project(&self, p: &Pt3) -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    /// Pose looking from `eye` toward `target` with +y roughly downward.
    pub fn look_at(eye: Pt3, target: Pt3, up_hint: Vec3) -> Isometry3<f64> {
        let forward = (target - eye).normalize();
        let up = if up_hint.cross(&forward).norm() < 1e-6 {
            // degenerate hint; pick any perpendicular axis
            if forward.x.abs() < 0.9 {
                Vec3::new(1.0, 0.0, 0.0)
            } else {
                Vec3::new(0.0, 1.0, 0.0)
            }
        } else {
            up_hint
        };
        let right = up.cross(&forward).normalize();
        let down = forward.cross(&right);
        let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[right, down, forward]));
        Isometry3::from_parts(
            eye.coords.into(),
            UnitQuaternion::from_rotation_matrix(&rot),
        )
    }
}

/// Range image: per-pixel depth along the optical axis in meters; missing
/// pixels are `+inf`.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    depths: Vec<f32>,
}

pub const MISSING_DEPTH: f32 = f32::INFINITY;

impl DepthImage {
    pub fn new_missing(width: u32, height: u32) -> Self {
        DepthImage {
            width,
            height,
            depths: vec![MISSING_DEPTH; (width * height) as usize],
        }
    }

    pub fn from_values(width: u32, height: u32, depths: Vec<f32>) -> Result<Self> {
        if depths.len() != (width * height) as usize {
            return Err(CoreError::DimensionMismatch(format!(
                "{} values for {width}x{height} image",
                depths.len()
            )));
        }
        if depths.iter().any(|d| d.is_finite() && *d <= 0.0) {
            return Err(CoreError::Precondition(
                "finite depths must be positive".into(),
            ));
        }
        Ok(DepthImage {
            width,
            height,
            depths,
        })
    }

    #[inline]
    pub fn get(&self, u: u32, v: u32) -> f32 {
        self.depths[(v * self.width + u) as usize]
    }

    #[inline]
    pub fn set(&mut self, u: u32, v: u32, d: f32) {
        self.depths[(v * self.width + u) as usize] = d;
    }

    #[inline]
    pub fn is_missing(&self, u: u32, v: u32) -> bool {
        !self.get(u, v).is_finite()
    }

    pub fn values(&self) -> &[f32] {
        &self.depths
    }

    pub fn finite_count(&self) -> usize {
        self.depths.iter().filter(|d| d.is_finite()).count()
    }
}

/// Per-pixel unit surface normals in the camera frame; zeros where missing.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalImage {
    pub width: u32,
    pub height: u32,
    normals: Vec<[f32; 3]>,
}

impl NormalImage {
    pub fn new_missing(width: u32, height: u32) -> Self {
        NormalImage {
            width,
            height,
            normals: vec![[0.0; 3]; (width * height) as usize],
        }
    }

    #[inline]
    pub fn get(&self, u: u32, v: u32) -> [f32; 3] {
        self.normals[(v * self.width + u) as usize]
    }

    #[inline]
    pub fn set(&mut self, u: u32, v: u32, n: [f32; 3]) {
        self.normals[(v * self.width + u) as usize] = n;
    }

    pub fn values(&self) -> &[[f32; 3]] {
        &self.normals
    }
}

/// Cameras on the upper hemisphere (z >= 0), optical axis through the
/// origin, position uniform over the hemisphere surface and distance uniform
/// in `distance_range`.
pub fn sample_views(n: usize, distance_range: (f64, f64), seed: u64) -> Result<Vec<PinholeCamera>> {
    let (d_min, d_max) = distance_range;
    if n == 0 {
        return Err(CoreError::Precondition("view count must be >= 1".into()));
    }
    if !(0.0 < d_min && d_min <= d_max) {
        return Err(CoreError::Precondition(format!(
            "invalid distance range [{d_min}, {d_max}]"
        )));
    }
    let mut r = rng::stream(seed, "views");
    let mut cameras = Vec::with_capacity(n);
    for _ in 0..n {
        // Uniform over hemisphere area: z uniform in [0,1], azimuth uniform.
        let z = r.gen::<f64>();
        let azimuth = r.gen::<f64>() * std::f64::consts::TAU;
        let distance = d_min + r.gen::<f64>() * (d_max - d_min);
        let s = (1.0 - z * z).max(0.0).sqrt();
        let dir = Vec3::new(s * azimuth.cos(), s * azimuth.sin(), z);
        let eye = Pt3::from(dir * distance);
        let pose = PinholeCamera::look_at(eye, Pt3::origin(), Vec3::new(0.0, 0.0, 1.0));
        cameras.push(PinholeCamera::default_intrinsics(pose));
    }
    Ok(cameras)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Camera,
    World,
}

/// One point per finite pixel, row-major pixel order.
pub fn depth_to_pointcloud(depth: &DepthImage, camera: &PinholeCamera, frame: Frame) -> Vec<Pt3> {
    let mut points = Vec::with_capacity(depth.finite_count());
    for v in 0..depth.height {
        for u in 0..depth.width {
            let d = depth.get(u, v);
            if !d.is_finite() {
                continue;
            }
            let p = camera.unproject(f64::from(u), f64::from(v), f64::from(d));
            points.push(match frame {
                Frame::Camera => p,
                Frame::World => camera.pose.transform_point(&p),
            });
        }
    }
    points
}

/// Marks pixels whose depth jumps by more than `threshold` to any
/// 4-neighbor, or that border missing data.
pub fn detect_depth_edges(depth: &DepthImage, threshold: f64) -> Vec<bool> {
    let w = depth.width as i64;
    let h = depth.height as i64;
    let mut edges = vec![false; (w * h) as usize];
    for v in 0..h {
        for u in 0..w {
            let d = depth.get(u as u32, v as u32);
            if !d.is_finite() {
                continue;
            }
            let mut is_edge = false;
            for (du, dv) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (nu, nv) = (u + du, v + dv);
                if nu < 0 || nv < 0 || nu >= w || nv >= h {
                    continue;
                }
                let nd = depth.get(nu as u32, nv as u32);
                if !nd.is_finite() || f64::from((nd - d).abs()) > threshold {
                    is_edge = true;
                    break;
                }
            }
            edges[(v * w + u) as usize] = is_edge;
        }
    }
    edges
}

/// Point cloud with the per-point metadata the augmentation stage needs.
#[derive(Clone, Debug)]
pub struct InputCloud {
    pub points: Vec<Pt3>,
    pub edge_flags: Vec<bool>,
    /// Unit view-ray directions, same frame as `points`.
    pub rays: Vec<Vec3>,
}

/// Back-projects a depth image keeping per-point edge flags and view rays.
pub fn project_input(
    depth: &DepthImage,
    camera: &PinholeCamera,
    frame: Frame,
    edge_threshold: f64,
) -> InputCloud {
    let edges = detect_depth_edges(depth, edge_threshold);
    let mut cloud = InputCloud {
        points: Vec::new(),
        edge_flags: Vec::new(),
        rays: Vec::new(),
    };
    for v in 0..depth.height {
        for u in 0..depth.width {
            let d = depth.get(u, v);
            if !d.is_finite() {
                continue;
            }
            let p = camera.unproject(f64::from(u), f64::from(v), f64::from(d));
            let ray = p.coords.normalize();
            match frame {
                Frame::Camera => {
                    cloud.points.push(p);
                    cloud.rays.push(ray);
                }
                Frame::World => {
                    cloud.points.push(camera.pose.transform_point(&p));
                    cloud.rays.push(camera.pose.rotation.transform_vector(&ray));
                }
            }
            cloud.edge_flags.push(edges[(v * depth.width + u) as usize]);
        }
    }
    cloud
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct AugmentParams {
    /// Isotropic jitter applied to every point (meters).
    pub global_std: f64,
    /// Extra along-ray jitter for edge points (meters).
    pub edge_std: f64,
    /// Fraction of edge points removed.
    pub edge_removal_fraction: f64,
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams {
            global_std: 0.002,
            edge_std: 0.006,
            edge_removal_fraction: 0.5,
        }
    }
}

/// Applies jitter and edge-point removal. Zero parameters are the identity.
pub fn augment_input(cloud: &InputCloud, params: &AugmentParams, seed: u64) -> Result<InputCloud> {
    if cloud.points.is_empty() {
        return Err(CoreError::EmptyGeometry("empty input cloud".into()));
    }
    if cloud.points.len() != cloud.edge_flags.len() || cloud.points.len() != cloud.rays.len() {
        return Err(CoreError::DimensionMismatch(
            "points, edge flags, and rays must have equal length".into(),
        ));
    }
    if !(0.0..=1.0).contains(&params.edge_removal_fraction) {
        return Err(CoreError::Precondition(
            "edge_removal_fraction must be in [0,1]".into(),
        ));
    }
    let mut out = InputCloud {
        points: Vec::with_capacity(cloud.points.len()),
        edge_flags: Vec::with_capacity(cloud.points.len()),
        rays: Vec::with_capacity(cloud.points.len()),
    };
    let mut r = rng::stream(seed, "augment");
    let global = (params.global_std > 0.0)
        .then(|| Normal::new(0.0, params.global_std).expect("finite std"));
    let edge = (params.edge_std > 0.0)
        .then(|| Normal::new(0.0, params.edge_std).expect("finite std"));
    for i in 0..cloud.points.len() {
        let is_edge = cloud.edge_flags[i];
        if is_edge && params.edge_removal_fraction > 0.0 {
            let u: f64 = r.gen();
            if u < params.edge_removal_fraction {
                continue;
            }
        }
        let mut p = cloud.points[i];
        if let Some(g) = &global {
            p.x += g.sample(&mut r);
            p.y += g.sample(&mut r);
            p.z += g.sample(&mut r);
        }
        if is_edge {
            if let Some(e) = &edge {
                p += cloud.rays[i] * e.sample(&mut r);
            }
        }
        out.points.push(p);
        out.edge_flags.push(is_edge);
        out.rays.push(cloud.rays[i]);
    }
    Ok(out)
}

/// Centers the cloud's bounding box at the origin and scales the longest side
/// to 1; returns the transform for aligning matched query points.
pub fn normalize_input(points: &[Pt3]) -> Result<(Vec<Pt3>, RigidScaleTransform)> {
    if points.len() < 2 {
        return Err(CoreError::Precondition(
            "need at least 2 points to normalize".into(),
        ));
    }
    let bb = Aabb::from_points(points.iter());
    let longest = bb.longest_side();
    if longest <= 0.0 {
        return Err(CoreError::DegenerateGeometry(
            "input cloud has zero extent".into(),
        ));
    }
    let transform = RigidScaleTransform::uniform(-bb.center().coords, 1.0 / longest)?;
    Ok((
        points.iter().map(|p| transform.apply(p)).collect(),
        transform,
    ))
}
