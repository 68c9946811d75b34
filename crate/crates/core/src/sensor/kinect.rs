//! Structured-light depth noise simulation.
//!
//! Parametric model of the dominant artifacts of a projector/camera depth
//! sensor, applied in a fixed order: grazing-angle dropout, dropout around
//! depth discontinuities, projector shadowing, lateral pixel jitter, axial
//! Gaussian noise with a quadratic depth profile, and disparity quantization.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::rng;
use crate::sensor::{DepthImage, NormalImage, MISSING_DEPTH};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct KinectNoiseParams {
    /// Axial std in meters: `a0 + a1 * (d - a2)^2`.
    pub axial_coeffs: [f64; 3],
    /// Lateral jitter std in pixels.
    pub lateral_std_px: f64,
    /// Disparity quantization step in pixels (0 disables).
    pub quantization_step_px: f64,
    /// Incidence angle beyond which returns drop out, degrees; 90 disables.
    pub grazing_dropout_deg: f64,
    /// Dilation radius of the dropout band around depth discontinuities.
    pub discontinuity_radius_px: u32,
    /// Depth jump that counts as a discontinuity (also the occlusion
    /// tolerance of the shadow test), meters.
    pub discontinuity_jump_m: f64,
    /// Distance between the simulated projector and the camera along +x,
    /// meters (0 disables shadowing and quantization).
    pub baseline_m: f64,
    /// Focal length used by the disparity model, pixels.
    pub focal_px: f64,
}

impl Default for KinectNoiseParams {
    fn default() -> Self {
        KinectNoiseParams {
            axial_coeffs: [0.0012, 0.0019, 0.4],
            lateral_std_px: 0.5,
            quantization_step_px: 0.125,
            grazing_dropout_deg: 82.0,
            discontinuity_radius_px: 2,
            discontinuity_jump_m: 0.03,
            baseline_m: 0.075,
            focal_px: crate::sensor::DEFAULT_FOCAL,
        }
    }
}

impl KinectNoiseParams {
    /// All effects disabled; `simulate_kinect` becomes the identity.
    pub fn zero_noise() -> Self {
        KinectNoiseParams {
            axial_coeffs: [0.0, 0.0, 0.0],
            lateral_std_px: 0.0,
            quantization_step_px: 0.0,
            grazing_dropout_deg: 90.0,
            discontinuity_radius_px: 0,
            discontinuity_jump_m: f64::INFINITY,
            baseline_m: 0.0,
            focal_px: crate::sensor::DEFAULT_FOCAL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.axial_coeffs.iter().all(|c| *c >= 0.0)
            && self.lateral_std_px >= 0.0
            && self.quantization_step_px >= 0.0
            && self.discontinuity_jump_m >= 0.0
            && self.baseline_m >= 0.0
            && self.focal_px > 0.0;
        if !ok {
            return Err(CoreError::Precondition(
                "kinect noise parameters must be non-negative".into(),
            ));
        }
        if !(self.grazing_dropout_deg > 0.0 && self.grazing_dropout_deg <= 90.0) {
            return Err(CoreError::Precondition(format!(
                "grazing dropout threshold must be in (0, 90], got {}",
                self.grazing_dropout_deg
            )));
        }
        Ok(())
    }

    /// Depth step produced by one disparity quantum at depth `d`; grows
    /// quadratically with depth.
    pub fn quantization_step_at(&self, d: f64) -> f64 {
        if self.quantization_step_px <= 0.0 || self.baseline_m <= 0.0 {
            return 0.0;
        }
        d * d * self.quantization_step_px / (self.focal_px * self.baseline_m)
    }
}

/// Applies the sensor model to a rendered depth/normal pair.
pub fn simulate_kinect(
    depth: &DepthImage,
    normals: &NormalImage,
    params: &KinectNoiseParams,
    seed: u64,
) -> Result<DepthImage> {
    if depth.width != normals.width || depth.height != normals.height {
        return Err(CoreError::DimensionMismatch(format!(
            "depth {}x{} vs normals {}x{}",
            depth.width, depth.height, normals.width, normals.height
        )));
    }
    params.validate()?;
    let w = depth.width;
    let h = depth.height;
    let mut out = depth.clone();

    // 1. Grazing-angle dropout.
    if params.grazing_dropout_deg < 90.0 {
        let cos_threshold = params.grazing_dropout_deg.to_radians().cos();
        let cx = f64::from(w) / 2.0 - 0.5;
        let cy = f64::from(h) / 2.0 - 0.5;
        for v in 0..h {
            for u in 0..w {
                if out.is_missing(u, v) {
                    continue;
                }
                let n = normals.get(u, v);
                let ray = nalgebra::Vector3::new(
                    (f64::from(u) - cx) / params.focal_px,
                    (f64::from(v) - cy) / params.focal_px,
                    1.0,
                )
                .normalize();
                let cos_inc =
                    -(ray.x * f64::from(n[0]) + ray.y * f64::from(n[1]) + ray.z * f64::from(n[2]));
                if cos_inc < cos_threshold {
                    out.set(u, v, MISSING_DEPTH);
                }
            }
        }
    }

    // 2. Dropout around depth discontinuities.
    if params.discontinuity_radius_px > 0 && params.discontinuity_jump_m.is_finite() {
        let mut jump = vec![false; (w * h) as usize];
        for v in 0..h {
            for u in 0..w {
                let d = out.get(u, v);
                if !d.is_finite() {
                    continue;
                }
                for (du, dv) in [(1i64, 0i64), (0, 1)] {
                    let nu = u as i64 + du;
                    let nv = v as i64 + dv;
                    if nu >= w as i64 || nv >= h as i64 {
                        continue;
                    }
                    let nd = out.get(nu as u32, nv as u32);
                    if nd.is_finite()
                        && f64::from((nd - d).abs()) > params.discontinuity_jump_m
                    {
                        jump[(v * w + u) as usize] = true;
                        jump[(nv as u32 * w + nu as u32) as usize] = true;
                    }
                }
            }
        }
        let r = params.discontinuity_radius_px as i64;
        for v in 0..h as i64 {
            for u in 0..w as i64 {
                if !jump[(v as u32 * w + u as u32) as usize] {
                    continue;
                }
                for dv in -r..=r {
                    for du in -r..=r {
                        let (nu, nv) = (u + du, v + dv);
                        if nu < 0 || nv < 0 || nu >= w as i64 || nv >= h as i64 {
                            continue;
                        }
                        out.set(nu as u32, nv as u32, MISSING_DEPTH);
                    }
                }
            }
        }
    }

    // 3. Projector shadow: a pixel whose projector ray is blocked by a
    // nearer surface receives no pattern. Scanline per row in projector
    // column space; the projector sits at +baseline along +x.
    if params.baseline_m > 0.0 {
        let disparity = |d: f64| params.focal_px * params.baseline_m / d;
        let margin = 256usize;
        let buf_len = w as usize + 2 * margin;
        let mut column_depth = vec![f32::INFINITY; buf_len];
        for v in 0..h {
            column_depth.fill(f32::INFINITY);
            for u in 0..w {
                let d = out.get(u, v);
                if !d.is_finite() {
                    continue;
                }
                let xp = f64::from(u) - disparity(f64::from(d));
                let col = (xp.round() as i64 + margin as i64).clamp(0, buf_len as i64 - 1) as usize;
                for c in [col, (col + 1).min(buf_len - 1)] {
                    if d < column_depth[c] {
                        column_depth[c] = d;
                    }
                }
            }
            for u in 0..w {
                let d = out.get(u, v);
                if !d.is_finite() {
                    continue;
                }
                let xp = f64::from(u) - disparity(f64::from(d));
                let col = (xp.round() as i64 + margin as i64).clamp(0, buf_len as i64 - 1) as usize;
                if f64::from(d - column_depth[col]) > params.discontinuity_jump_m {
                    out.set(u, v, MISSING_DEPTH);
                }
            }
        }
    }

    // 4. Lateral pixel jitter.
    if params.lateral_std_px > 0.0 {
        let normal = Normal::new(0.0, params.lateral_std_px).expect("finite std");
        let mut r = rng::stream(seed, "kinect/lateral");
        let src = out.clone();
        for v in 0..h {
            for u in 0..w {
                let du: f64 = normal.sample(&mut r);
                let dv: f64 = normal.sample(&mut r);
                if src.is_missing(u, v) {
                    continue;
                }
                let nu = (f64::from(u) + du).round() as i64;
                let nv = (f64::from(v) + dv).round() as i64;
                let d = if nu < 0 || nv < 0 || nu >= w as i64 || nv >= h as i64 {
                    MISSING_DEPTH
                } else {
                    src.get(nu as u32, nv as u32)
                };
                out.set(u, v, d);
            }
        }
    }

    // 5. Axial noise, std quadratic in depth.
    if params.axial_coeffs[0] > 0.0 || params.axial_coeffs[1] > 0.0 {
        let mut r = rng::stream(seed, "kinect/axial");
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        for v in 0..h {
            for u in 0..w {
                let d = out.get(u, v);
                let g: f64 = unit.sample(&mut r);
                if !d.is_finite() {
                    continue;
                }
                let [a0, a1, a2] = params.axial_coeffs;
                let sigma = a0 + a1 * (f64::from(d) - a2).powi(2);
                let nd = f64::from(d) + sigma * g;
                out.set(u, v, if nd > 0.0 { nd as f32 } else { MISSING_DEPTH });
            }
        }
    }

    // 6. Disparity quantization.
    if params.quantization_step_px > 0.0 && params.baseline_m > 0.0 {
        let fb = params.focal_px * params.baseline_m;
        for v in 0..h {
            for u in 0..w {
                let d = out.get(u, v);
                if !d.is_finite() {
                    continue;
                }
                let disparity = fb / f64::from(d);
                let q = (disparity / params.quantization_step_px).round()
                    * params.quantization_step_px;
                if q <= 0.0 {
                    out.set(u, v, MISSING_DEPTH);
                } else {
                    out.set(u, v, (fb / q) as f32);
                }
            }
        }
    }

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensor::{render_depth, PinholeCamera};
    use crate::shapes;
    use crate::Pt3;
    use nalgebra::Isometry3;

    fn wall_scene(z: f64) -> (DepthImage, NormalImage) {
        let quad = shapes::quad(
            Pt3::new(-20.0, -20.0, z),
            Pt3::new(20.0, -20.0, z),
            Pt3::new(20.0, 20.0, z),
            Pt3::new(-20.0, 20.0, z),
        );
        let bvh = crate::TriangleBvh::build(quad);
        let cam = PinholeCamera::default_intrinsics(Isometry3::identity());
        render_depth(&bvh, &cam)
    }

    #[test]
    fn zero_noise_is_identity() {
        let (depth, normals) = wall_scene(2.0);
        let out = simulate_kinect(&depth, &normals, &KinectNoiseParams::zero_noise(), 3).unwrap();
        assert_eq!(out, depth);
    }

    #[test]
    fn quantization_makes_discrete_steps() {
        let (depth, normals) = wall_scene(2.0);
        let params = KinectNoiseParams {
            axial_coeffs: [0.0, 0.0, 0.0],
            lateral_std_px: 0.0,
            grazing_dropout_deg: 90.0,
            discontinuity_radius_px: 0,
            ..KinectNoiseParams::default()
        };
        let out = simulate_kinect(&depth, &normals, &params, 3).unwrap();
        let mut values: Vec<f32> = out.values().iter().copied().filter(|d| d.is_finite()).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        // A flat 2 m wall spans few disparity quanta.
        assert!(!values.is_empty() && values.len() <= 8, "{} levels", values.len());
        // Steps grow with depth^2: compare predicted step sizes.
        let step2 = params.quantization_step_at(2.0);
        let step1 = params.quantization_step_at(1.0);
        assert!((step2 / step1 - 4.0).abs() < 1e-9);
        if values.len() >= 2 {
            let observed = f64::from(values[1] - values[0]);
            assert!((observed - step2).abs() / step2 < 0.1, "step {observed} vs {step2}");
        }
    }

    #[test]
    fn step_edge_gets_missing_band() {
        // Two quads at different depths with a vertical seam near the image
        // center.
        let near = shapes::quad(
            Pt3::new(-5.0, -5.0, 1.0),
            Pt3::new(0.0, -5.0, 1.0),
            Pt3::new(0.0, 5.0, 1.0),
            Pt3::new(-5.0, 5.0, 1.0),
        );
        let far = shapes::quad(
            Pt3::new(0.0, -10.0, 2.0),
            Pt3::new(10.0, -10.0, 2.0),
            Pt3::new(10.0, 10.0, 2.0),
            Pt3::new(0.0, 10.0, 2.0),
        );
        let merged = shapes::merge(&[&near, &far]);
        let bvh = crate::TriangleBvh::build(merged);
        let cam = PinholeCamera::default_intrinsics(Isometry3::identity());
        let (depth, normals) = render_depth(&bvh, &cam);
        let params = KinectNoiseParams {
            axial_coeffs: [0.0, 0.0, 0.0],
            lateral_std_px: 0.0,
            quantization_step_px: 0.0,
            baseline_m: 0.0,
            grazing_dropout_deg: 90.0,
            discontinuity_radius_px: 2,
            ..KinectNoiseParams::default()
        };
        let out = simulate_kinect(&depth, &normals, &params, 9).unwrap();
        // The seam projects at u where x=0 crosses: u = cx (319.5); pixels
        // around it must be missing, but the flat interiors must survive.
        let v = 240;
        let seam = 319i64;
        let mut band_missing = true;
        for u in (seam - 1)..=(seam + 2) {
            band_missing &= out.is_missing(u as u32, v);
        }
        assert!(band_missing);
        assert!(!out.is_missing(100, v));
        assert!(!out.is_missing(540, v));
        assert_eq!(out.get(100, v), depth.get(100, v));
    }

    #[test]
    fn grazing_wall_drops_out() {
        // A wall rotated 85 degrees about y: normals make an 85-degree angle
        // with the central view ray; threshold 80 drops everything.
        let t = 85.0f64.to_radians();
        let quad = shapes::quad(
            Pt3::new(-20.0 * t.cos(), -20.0, 2.0 - -20.0 * t.sin()),
            Pt3::new(20.0 * t.cos(), -20.0, 2.0 - 20.0 * t.sin()),
            Pt3::new(20.0 * t.cos(), 20.0, 2.0 - 20.0 * t.sin()),
            Pt3::new(-20.0 * t.cos(), 20.0, 2.0 - -20.0 * t.sin()),
        );
        let bvh = crate::TriangleBvh::build(quad);
        // Narrow field of view so every ray meets the wall past the
        // threshold (a wide camera would see lower incidence at the
        // periphery).
        let mut cam = PinholeCamera::default_intrinsics(Isometry3::identity());
        cam.fx = 5750.0;
        cam.fy = 5750.0;
        let (depth, normals) = render_depth(&bvh, &cam);
        assert!(depth.finite_count() > 0);
        let params = KinectNoiseParams {
            axial_coeffs: [0.0, 0.0, 0.0],
            lateral_std_px: 0.0,
            quantization_step_px: 0.0,
            baseline_m: 0.0,
            discontinuity_radius_px: 0,
            grazing_dropout_deg: 80.0,
            focal_px: 5750.0,
            ..KinectNoiseParams::default()
        };
        let out = simulate_kinect(&depth, &normals, &params, 1).unwrap();
        assert_eq!(out.finite_count(), 0);
    }

    #[test]
    fn axial_noise_std_grows_with_depth() {
        let params = KinectNoiseParams {
            lateral_std_px: 0.0,
            quantization_step_px: 0.0,
            baseline_m: 0.0,
            grazing_dropout_deg: 90.0,
            discontinuity_radius_px: 0,
            ..KinectNoiseParams::default()
        };
        let mut stds = Vec::new();
        for (i, z) in [1.0f64, 1.5, 2.0, 2.5].iter().enumerate() {
            let (depth, normals) = wall_scene(*z);
            let out = simulate_kinect(&depth, &normals, &params, 100 + i as u64).unwrap();
            let diffs: Vec<f64> = out
                .values()
                .iter()
                .zip(depth.values())
                .filter(|(o, d)| o.is_finite() && d.is_finite())
                .map(|(o, d)| f64::from(o - d))
                .collect();
            assert!(diffs.len() > 100_000);
            let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
            let var = diffs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
                / (diffs.len() - 1) as f64;
            stds.push(var.sqrt());
            // Matches the configured profile within 2%.
            let expected = params.axial_coeffs[0]
                + params.axial_coeffs[1] * (z - params.axial_coeffs[2]).powi(2);
            assert!(
                (var.sqrt() - expected).abs() / expected < 0.02,
                "std {} vs {expected}",
                var.sqrt()
            );
        }
        for k in 1..stds.len() {
            assert!(stds[k] > stds[k - 1]);
        }
    }

    #[test]
    fn shadow_band_appears_left_of_occluder() {
        // Near plate on the right half occludes the projector (at +x) from
        // seeing far pixels just left of the plate edge.
        let near = shapes::quad(
            Pt3::new(0.0, -5.0, 1.0),
            Pt3::new(5.0, -5.0, 1.0),
            Pt3::new(5.0, 5.0, 1.0),
            Pt3::new(0.0, 5.0, 1.0),
        );
        let far = shapes::quad(
            Pt3::new(-20.0, -20.0, 2.0),
            Pt3::new(20.0, -20.0, 2.0),
            Pt3::new(20.0, 20.0, 2.0),
            Pt3::new(-20.0, 20.0, 2.0),
        );
        let merged = shapes::merge(&[&near, &far]);
        let bvh = crate::TriangleBvh::build(merged);
        let cam = PinholeCamera::default_intrinsics(Isometry3::identity());
        let (depth, normals) = render_depth(&bvh, &cam);
        let params = KinectNoiseParams {
            axial_coeffs: [0.0, 0.0, 0.0],
            lateral_std_px: 0.0,
            quantization_step_px: 0.0,
            grazing_dropout_deg: 90.0,
            discontinuity_radius_px: 0,
            ..KinectNoiseParams::default()
        };
        let out = simulate_kinect(&depth, &normals, &params, 5).unwrap();
        // Disparity difference between 1 m and 2 m: f*b*(1/1 - 1/2) ~ 21.6 px;
        // shadow band sits just left of the occluder edge at u ~ cx.
        let v = 240u32;
        let mut shadowed = 0;
        for u in 290..318 {
            if out.is_missing(u, v) && depth.get(u, v).is_finite() {
                shadowed += 1;
            }
        }
        assert!(shadowed > 10, "only {shadowed} shadowed pixels");
        // Far from the edge the background survives.
        assert!(!out.is_missing(100, v));
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let (depth, _) = wall_scene(2.0);
        let normals = NormalImage::new_missing(4, 4);
        assert!(matches!(
            simulate_kinect(&depth, &normals, &KinectNoiseParams::default(), 1),
            Err(CoreError::DimensionMismatch(_))
        ));
    }
}
