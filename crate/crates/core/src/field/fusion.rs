//! Depth-fusion watertight-ification.
//!
//! Renders the input geometry from cameras on a surrounding sphere, fuses
//! the depth images into a TSDF, and extracts the 0.5-occupancy surface.
//! Works on arbitrary triangle soup; the output passes the edge-manifold
//! watertightness check.

use crate::error::{CoreError, Result};
use crate::field::marching_cubes::marching_cubes;
use crate::field::tsdf::TsdfVolume;
use crate::geom::{Pt3, Vec3};
use crate::mesh::bvh::TriangleBvh;
use crate::mesh::TriangleMesh;
use crate::sensor::{render_depth, PinholeCamera};

pub const DEFAULT_FUSION_VIEWS: usize = 100;
pub const DEFAULT_FUSION_RESOLUTION: u32 = 256;
/// Truncation band in voxels.
pub const TRUNCATION_VOXELS: f64 = 3.0;
/// The fused volume is a cube this much larger than the input's longest side.
const VOLUME_INFLATION: f64 = 1.3;
/// Camera distance as a multiple of the volume side; keeps the entire volume
/// inside every view frustum at the default intrinsics.
const CAMERA_DISTANCE_FACTOR: f64 = 2.4;

/// Evenly distributed directions on the full sphere (Fibonacci spiral).
pub fn sphere_directions(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let a = golden * i as f64;
            Vec3::new(r * a.cos(), r * a.sin(), z)
        })
        .collect()
}

/// Cameras for fusion: `n` views on a sphere around `center`, all covering a
/// cube of side `side`.
pub fn fusion_cameras(center: Pt3, side: f64, n: usize) -> Vec<PinholeCamera> {
    let distance = CAMERA_DISTANCE_FACTOR * side;
    sphere_directions(n)
        .into_iter()
        .map(|dir| {
            let eye = center + dir * distance;
            let pose = PinholeCamera::look_at(eye, center, Vec3::new(0.0, 0.0, 1.0));
            PinholeCamera::default_intrinsics(pose)
        })
        .collect()
}

/// Fuses `n_views` rendered depth maps into a TSDF at `resolution`^3 and
/// extracts a closed surface.
pub fn make_watertight(mesh: &TriangleMesh, n_views: usize, resolution: u32) -> Result<TriangleMesh> {
    if n_views == 0 {
        return Err(CoreError::Precondition("need at least one view".into()));
    }
    if resolution < 8 {
        return Err(CoreError::Precondition(
            "fusion resolution must be at least 8".into(),
        ));
    }
    let bb = mesh.aabb();
    let longest = bb.longest_side();
    if longest <= 0.0 {
        return Err(CoreError::DegenerateGeometry(
            "cannot fuse zero-extent geometry".into(),
        ));
    }
    let center = bb.center();
    let side = longest * VOLUME_INFLATION;
    let voxel = side / f64::from(resolution);
    let origin = Pt3::new(
        center.x - side / 2.0,
        center.y - side / 2.0,
        center.z - side / 2.0,
    );
    let mut volume = TsdfVolume::new(
        [resolution, resolution, resolution],
        origin,
        voxel,
        TRUNCATION_VOXELS * voxel,
    )?;

    let bvh = TriangleBvh::build(mesh.clone());
    for camera in fusion_cameras(center, side, n_views) {
        let (depth, _) = render_depth(&bvh, &camera);
        volume.integrate(&depth, &camera);
    }

    match marching_cubes(&volume.occupancy_grid(), 0.5)? {
        Some(fused) => Ok(fused),
        None => Err(CoreError::EmptyGeometry(
            "fusion produced no surface".into(),
        )),
    }
}
