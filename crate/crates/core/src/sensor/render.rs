//! Depth and normal rendering by BVH ray casting.

use rayon::prelude::*;

use crate::geom::Pt3;
use crate::mesh::bvh::TriangleBvh;
use crate::sensor::{DepthImage, NormalImage, PinholeCamera, MISSING_DEPTH};

/// Renders per-pixel nearest-intersection depth (along the optical axis) and
/// unit surface normals in the camera frame, flipped toward the camera.
/// Background pixels are missing.
pub fn render_depth(bvh: &TriangleBvh, camera: &PinholeCamera) -> (DepthImage, NormalImage) {
    let width = camera.width;
    let height = camera.height;
    let origin = Pt3::from(camera.pose.translation.vector);
    let rot = camera.pose.rotation;
    let inv_rot = rot.inverse();

    let rows: Vec<(Vec<f32>, Vec<[f32; 3]>)> = (0..height)
        .into_par_iter()
        .map(|v| {
            let mut drow = vec![MISSING_DEPTH; width as usize];
            let mut nrow = vec![[0.0f32; 3]; width as usize];
            for u in 0..width {
                let dir_cam = camera.pixel_ray(f64::from(u), f64::from(v));
                let dir_world = rot.transform_vector(&dir_cam);
                if let Some(hit) = bvh.first_hit(&origin, &dir_world, f64::INFINITY) {
                    // dir has unit z in the camera frame, so t is the z-depth.
                    drow[u as usize] = hit.hit.t as f32;
                    let n_world = bvh.mesh().triangle_normal(hit.triangle as usize);
                    let mut n_cam = inv_rot.transform_vector(&n_world);
                    if n_cam.dot(&dir_cam) > 0.0 {
                        n_cam = -n_cam;
                    }
                    nrow[u as usize] = [n_cam.x as f32, n_cam.y as f32, n_cam.z as f32];
                }
            }
            (drow, nrow)
        })
        .collect();

    let mut depth = DepthImage::new_missing(width, height);
    let mut normals = NormalImage::new_missing(width, height);
    for (v, (drow, nrow)) in rows.into_iter().enumerate() {
        for u in 0..width as usize {
            if drow[u].is_finite() {
                depth.set(u as u32, v as u32, drow[u]);
                normals.set(u as u32, v as u32, nrow[u]);
            }
        }
    }
    (depth, normals)
}
