//! PFM image I/O (float32, scale -1.0 = little endian, rows bottom-up) with
//! JSON sidecars carrying intrinsics, pose, and simulation parameters.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::sensor::{DepthImage, KinectNoiseParams, NormalImage, PinholeCamera};

fn malformed(path: &Path, message: impl Into<String>) -> CoreError {
    CoreError::MalformedFile {
        path: path.to_path_buf(),
        line: 0,
        message: message.into(),
    }
}

pub fn write_depth_pfm(path: impl AsRef<Path>, depth: &DepthImage) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "Pf\n{} {}\n-1.0\n", depth.width, depth.height)?;
    // PFM rows run bottom to top.
    for v in (0..depth.height).rev() {
        for u in 0..depth.width {
            w.write_all(&depth.get(u, v).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_depth_pfm(path: impl AsRef<Path>) -> Result<DepthImage> {
    let path = path.as_ref();
    let (width, height, channels, data) = read_pfm_raw(path)?;
    if channels != 1 {
        return Err(malformed(path, "expected single-channel Pf"));
    }
    let mut depth = DepthImage::new_missing(width, height);
    for v in 0..height {
        let src_row = height - 1 - v;
        for u in 0..width {
            depth.set(u, v, data[(src_row * width + u) as usize]);
        }
    }
    Ok(depth)
}

pub fn write_normals_pfm(path: impl AsRef<Path>, normals: &NormalImage) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "PF\n{} {}\n-1.0\n", normals.width, normals.height)?;
    for v in (0..normals.height).rev() {
        for u in 0..normals.width {
            let n = normals.get(u, v);
            for c in n {
                w.write_all(&c.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_normals_pfm(path: impl AsRef<Path>) -> Result<NormalImage> {
    let path = path.as_ref();
    let (width, height, channels, data) = read_pfm_raw(path)?;
    if channels != 3 {
        return Err(malformed(path, "expected three-channel PF"));
    }
    let mut normals = NormalImage::new_missing(width, height);
    for v in 0..height {
        let src_row = height - 1 - v;
        for u in 0..width {
            let base = ((src_row * width + u) * 3) as usize;
            normals.set(u, v, [data[base], data[base + 1], data[base + 2]]);
        }
    }
    Ok(normals)
}

fn read_pfm_raw(path: &Path) -> Result<(u32, u32, u32, Vec<f32>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = String::new();
    r.read_line(&mut magic)?;
    let channels = match magic.trim() {
        "Pf" => 1u32,
        "PF" => 3u32,
        other => return Err(malformed(path, format!("bad PFM magic {other:?}"))),
    };
    let mut dims = String::new();
    r.read_line(&mut dims)?;
    let mut it = dims.split_whitespace();
    let width: u32 = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| malformed(path, "bad width"))?;
    let height: u32 = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| malformed(path, "bad height"))?;
    let mut scale_line = String::new();
    r.read_line(&mut scale_line)?;
    let scale: f64 = scale_line
        .trim()
        .parse()
        .map_err(|_| malformed(path, "bad scale"))?;
    if scale >= 0.0 {
        return Err(malformed(path, "big-endian PFM not supported"));
    }
    let count = (width * height * channels) as usize;
    let mut bytes = vec![0u8; count * 4];
    r.read_exact(&mut bytes)
        .map_err(|_| malformed(path, "pixel payload truncated"))?;
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((width, height, channels, data))
}

/// Sidecar describing a rendered or simulated view.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ViewSidecar {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// camera -> world, 4x4 row-major.
    pub pose: [[f64; 4]; 4],
    pub seed: u64,
    /// Upright-axis scale applied to the object before rendering.
    pub object_scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kinect: Option<KinectNoiseParams>,
}

impl ViewSidecar {
    pub fn new(camera: &PinholeCamera, seed: u64, object_scale: f64) -> Self {
        let m = camera.pose.to_homogeneous();
        let mut pose = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                pose[i][j] = m[(i, j)];
            }
        }
        ViewSidecar {
            width: camera.width,
            height: camera.height,
            fx: camera.fx,
            fy: camera.fy,
            cx: camera.cx,
            cy: camera.cy,
            pose,
            seed,
            object_scale,
            kinect: None,
        }
    }

    pub fn camera(&self) -> Result<PinholeCamera> {
        let mut m = nalgebra::Matrix4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                m[(i, j)] = self.pose[i][j];
            }
        }
        let iso = nalgebra::try_convert::<_, nalgebra::Isometry3<f64>>(m).ok_or_else(|| {
            CoreError::Precondition("sidecar pose is not a rigid transform".into())
        })?;
        PinholeCamera::new(
            self.width,
            self.height,
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            iso,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensor::MISSING_DEPTH;
    use nalgebra::Isometry3;

    #[test]
    fn depth_pfm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.pfm");
        let mut depth = DepthImage::new_missing(5, 3);
        depth.set(0, 0, 1.25);
        depth.set(4, 2, 3.5);
        depth.set(2, 1, 0.75);
        write_depth_pfm(&p, &depth).unwrap();
        let loaded = read_depth_pfm(&p).unwrap();
        assert_eq!(loaded, depth);
        assert_eq!(loaded.get(1, 1), MISSING_DEPTH);
    }

    #[test]
    fn normals_pfm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("n.pfm");
        let mut normals = NormalImage::new_missing(4, 4);
        normals.set(1, 2, [0.0, 0.0, -1.0]);
        normals.set(3, 0, [0.5, 0.5, -0.707]);
        write_normals_pfm(&p, &normals).unwrap();
        let loaded = read_normals_pfm(&p).unwrap();
        assert_eq!(loaded, normals);
    }

    #[test]
    fn sidecar_pose_round_trip() {
        let pose = PinholeCamera::look_at(
            crate::Pt3::new(1.0, 2.0, 3.0),
            crate::Pt3::origin(),
            crate::Vec3::new(0.0, 0.0, 1.0),
        );
        let cam = PinholeCamera::default_intrinsics(pose);
        let side = ViewSidecar::new(&cam, 42, 1.0);
        let restored = side.camera().unwrap();
        let d = (restored.pose.to_homogeneous() - cam.pose.to_homogeneous()).abs().max();
        assert!(d < 1e-12);
    }

    #[test]
    fn writes_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut depth = DepthImage::new_missing(8, 8);
        depth.set(3, 3, 2.0);
        let p1 = dir.path().join("a.pfm");
        let p2 = dir.path().join("b.pfm");
        write_depth_pfm(&p1, &depth).unwrap();
        write_depth_pfm(&p2, &depth).unwrap();
        assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
    }

    #[test]
    fn identity_pose_sidecar() {
        let cam = PinholeCamera::default_intrinsics(Isometry3::identity());
        let side = ViewSidecar::new(&cam, 0, 1.0);
        assert_eq!(side.pose[0][0], 1.0);
        assert_eq!(side.pose[3][3], 1.0);
        assert_eq!(side.pose[0][3], 0.0);
    }
}
