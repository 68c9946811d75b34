//! Implicit occupancy fields, dense grid evaluation, and volumetric fusion.

pub mod fusion;
pub mod marching_cubes;
pub mod tsdf;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geom::{Aabb, Pt3, Vec3};
use crate::io_util;
use crate::mesh::bvh::TriangleBvh;
use crate::occupancy;

pub use fusion::make_watertight;
pub use marching_cubes::marching_cubes;
pub use tsdf::TsdfVolume;

/// An occupancy-probability field over 3D space.
///
/// Implementations must be deterministic and safe for concurrent read-only
/// use; outputs lie in [0, 1]. The surface is conventionally the 0.5 level
/// set.
pub trait ImplicitField: Sync {
    fn query(&self, points: &[Pt3]) -> Vec<f64>;
}

/// Exact occupancy of a watertight mesh; the stand-in for a trained
/// completion network in end-to-end pipeline tests.
pub struct GroundTruthField {
    bvh: TriangleBvh,
}

impl GroundTruthField {
    pub fn new(bvh: TriangleBvh) -> Result<Self> {
        if !bvh.is_watertight() {
            let (b, nm) = crate::mesh::watertight_report(bvh.mesh());
            return Err(CoreError::NotWatertight {
                boundary_edges: b,
                nonmanifold_edges: nm,
            });
        }
        Ok(GroundTruthField { bvh })
    }

    pub fn bvh(&self) -> &TriangleBvh {
        &self.bvh
    }
}

impl ImplicitField for GroundTruthField {
    fn query(&self, points: &[Pt3]) -> Vec<f64> {
        points
            .par_iter()
            .map(|p| {
                if occupancy::occupancy_unchecked(&self.bvh, p) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Dense scalar grid sampled at voxel centers.
///
/// Layout is x-fastest: `index = x + nx * (y + ny * z)`. The voxel center of
/// cell (x, y, z) is `origin + (coord + 0.5) * voxel_size` per axis, with
/// `origin` the minimum corner of the covered volume.
#[derive(Clone, Debug)]
pub struct OccupancyGrid {
    resolution: [u32; 3],
    origin: Pt3,
    voxel_size: Vec3,
    values: Vec<f32>,
}

pub const GRID_AXIS_ORDER: &str = "x-fastest";

impl OccupancyGrid {
    pub fn new(
        resolution: [u32; 3],
        origin: Pt3,
        voxel_size: Vec3,
        values: Vec<f32>,
    ) -> Result<Self> {
        let count = resolution.iter().map(|r| *r as usize).product::<usize>();
        if values.len() != count {
            return Err(CoreError::DimensionMismatch(format!(
                "{} values for resolution {resolution:?}",
                values.len()
            )));
        }
        if voxel_size.iter().any(|s| !(*s > 0.0)) {
            return Err(CoreError::Precondition(
                "voxel size must be positive".into(),
            ));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(CoreError::Precondition(
                "grid values must lie in [0, 1]".into(),
            ));
        }
        Ok(OccupancyGrid {
            resolution,
            origin,
            voxel_size,
            values,
        })
    }

    pub fn resolution(&self) -> [u32; 3] {
        self.resolution
    }

    pub fn origin(&self) -> Pt3 {
        self.origin
    }

    pub fn voxel_size(&self) -> Vec3 {
        self.voxel_size
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32, z: u32) -> usize {
        (x + self.resolution[0] * (y + self.resolution[1] * z)) as usize
    }

    #[inline]
    pub fn value(&self, x: u32, y: u32, z: u32) -> f32 {
        self.values[self.index(x, y, z)]
    }

    #[inline]
    pub fn voxel_center(&self, x: u32, y: u32, z: u32) -> Pt3 {
        Pt3::new(
            self.origin.x + (f64::from(x) + 0.5) * self.voxel_size.x,
            self.origin.y + (f64::from(y) + 0.5) * self.voxel_size.y,
            self.origin.z + (f64::from(z) + 0.5) * self.voxel_size.z,
        )
    }

    /// Fraction of voxels above the iso level.
    pub fn occupied_fraction(&self, iso: f32) -> f64 {
        self.values.iter().filter(|v| **v > iso).count() as f64 / self.values.len() as f64
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        use std::io::Write;
        let path = path.as_ref();
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        io_util::write_json(
            path.with_extension("json"),
            &GridHeader {
                resolution: self.resolution,
                origin: [self.origin.x, self.origin.y, self.origin.z],
                voxel_size: [self.voxel_size.x, self.voxel_size.y, self.voxel_size.z],
                axis_order: GRID_AXIS_ORDER.to_string(),
            },
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        use std::io::Read;
        let path = path.as_ref();
        let header: GridHeader = io_util::read_json(path.with_extension("json"))?;
        if header.axis_order != GRID_AXIS_ORDER {
            return Err(CoreError::Config(format!(
                "unsupported axis order '{}'",
                header.axis_order
            )));
        }
        let mut bytes = Vec::new();
        std::io::BufReader::new(std::fs::File::open(path)?).read_to_end(&mut bytes)?;
        if bytes.len() % 4 != 0 {
            return Err(CoreError::MalformedFile {
                path: path.to_path_buf(),
                line: 0,
                message: "grid blob length is not a multiple of 4".into(),
            });
        }
        let values: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        OccupancyGrid::new(
            header.resolution,
            Pt3::new(header.origin[0], header.origin[1], header.origin[2]),
            Vec3::new(
                header.voxel_size[0],
                header.voxel_size[1],
                header.voxel_size[2],
            ),
            values,
        )
    }
}

#[derive(Serialize, Deserialize)]
struct GridHeader {
    resolution: [u32; 3],
    origin: [f64; 3],
    voxel_size: [f64; 3],
    axis_order: String,
}

/// Trilinear interpolation between voxel centers (clamped at the border);
/// this is how an externally predicted grid plugs in as a field.
impl ImplicitField for OccupancyGrid {
    fn query(&self, points: &[Pt3]) -> Vec<f64> {
        let [nx, ny, nz] = self.resolution;
        points
            .iter()
            .map(|p| {
                let gx = ((p.x - self.origin.x) / self.voxel_size.x - 0.5)
                    .clamp(0.0, f64::from(nx - 1));
                let gy = ((p.y - self.origin.y) / self.voxel_size.y - 0.5)
                    .clamp(0.0, f64::from(ny - 1));
                let gz = ((p.z - self.origin.z) / self.voxel_size.z - 0.5)
                    .clamp(0.0, f64::from(nz - 1));
                let (x0, y0, z0) = (gx.floor() as u32, gy.floor() as u32, gz.floor() as u32);
                let (x1, y1, z1) = (
                    (x0 + 1).min(nx - 1),
                    (y0 + 1).min(ny - 1),
                    (z0 + 1).min(nz - 1),
                );
                let (tx, ty, tz) = (
                    gx - f64::from(x0),
                    gy - f64::from(y0),
                    gz - f64::from(z0),
                );
                let v = |x: u32, y: u32, z: u32| f64::from(self.value(x, y, z));
                let c00 = v(x0, y0, z0) * (1.0 - tx) + v(x1, y0, z0) * tx;
                let c10 = v(x0, y1, z0) * (1.0 - tx) + v(x1, y1, z0) * tx;
                let c01 = v(x0, y0, z1) * (1.0 - tx) + v(x1, y0, z1) * tx;
                let c11 = v(x0, y1, z1) * (1.0 - tx) + v(x1, y1, z1) * tx;
                let c0 = c00 * (1.0 - ty) + c10 * ty;
                let c1 = c01 * (1.0 - ty) + c11 * ty;
                c0 * (1.0 - tz) + c1 * tz
            })
            .collect()
    }
}

/// Samples `field` at the voxel centers of a grid spanning `bounds`.
pub fn evaluate_grid(
    field: &dyn ImplicitField,
    resolution: [u32; 3],
    bounds: &Aabb,
) -> Result<OccupancyGrid> {
    if resolution.iter().any(|r| *r < 2) {
        return Err(CoreError::Precondition(format!(
            "resolution must be >= 2 per axis, got {resolution:?}"
        )));
    }
    let ext = bounds.extents();
    let voxel_size = Vec3::new(
        ext.x / f64::from(resolution[0]),
        ext.y / f64::from(resolution[1]),
        ext.z / f64::from(resolution[2]),
    );
    let [nx, ny, nz] = resolution;
    let origin = bounds.min;

    let slabs: Vec<Vec<f32>> = (0..nz)
        .into_par_iter()
        .map(|z| {
            let mut points = Vec::with_capacity((nx * ny) as usize);
            for y in 0..ny {
                for x in 0..nx {
                    points.push(Pt3::new(
                        origin.x + (f64::from(x) + 0.5) * voxel_size.x,
                        origin.y + (f64::from(y) + 0.5) * voxel_size.y,
                        origin.z + (f64::from(z) + 0.5) * voxel_size.z,
                    ));
                }
            }
            field
                .query(&points)
                .into_iter()
                .map(|v| v as f32)
                .collect()
        })
        .collect();

    let mut values = Vec::with_capacity((nx * ny * nz) as usize);
    for slab in slabs {
        values.extend(slab);
    }
    OccupancyGrid::new(resolution, origin, voxel_size, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    struct Constant(f64);
    impl ImplicitField for Constant {
        fn query(&self, points: &[Pt3]) -> Vec<f64> {
            vec![self.0; points.len()]
        }
    }

    fn unit_bounds() -> Aabb {
        Aabb {
            min: Pt3::new(-0.5, -0.5, -0.5),
            max: Pt3::new(0.5, 0.5, 0.5),
        }
    }

    #[test]
    fn constant_field_fills_grid() {
        let g = evaluate_grid(&Constant(0.7), [8, 8, 8], &unit_bounds()).unwrap();
        assert!(g.values().iter().all(|v| (*v - 0.7).abs() < 1e-6));
    }

    #[test]
    fn res2_samples_are_at_voxel_centers() {
        let g = evaluate_grid(&Constant(0.5), [2, 2, 2], &unit_bounds()).unwrap();
        assert_eq!(g.values().len(), 8);
        assert_eq!(g.voxel_center(0, 0, 0), Pt3::new(-0.25, -0.25, -0.25));
        assert_eq!(g.voxel_center(1, 1, 1), Pt3::new(0.25, 0.25, 0.25));
    }

    #[test]
    fn gt_field_matches_point_occupancy() {
        let bvh = TriangleBvh::build(shapes::icosphere(2, 0.4));
        let field = GroundTruthField::new(TriangleBvh::build(shapes::icosphere(2, 0.4))).unwrap();
        let mut pts = Vec::new();
        let mut r = crate::rng::stream(4, "gt");
        use rand::Rng;
        for _ in 0..10_000 {
            pts.push(Pt3::new(
                r.gen::<f64>() - 0.5,
                r.gen::<f64>() - 0.5,
                r.gen::<f64>() - 0.5,
            ));
        }
        let vals = field.query(&pts);
        for (p, v) in pts.iter().zip(vals) {
            let expect = crate::occupancy::point_occupancy(&bvh, p).unwrap();
            assert_eq!(v > 0.5, expect);
        }
        assert!(field.query(&[Pt3::origin()])[0] > 0.5);
        assert!(field.query(&[Pt3::new(5.0, 0.0, 0.0)])[0] < 0.5);
    }

    #[test]
    fn gt_field_requires_watertight() {
        let bvh = TriangleBvh::build(shapes::open_box(
            Pt3::new(0.0, 0.0, 0.0),
            Pt3::new(1.0, 1.0, 1.0),
        ));
        assert!(GroundTruthField::new(bvh).is_err());
    }

    #[test]
    fn sphere_grid_volume_fraction() {
        let field = GroundTruthField::new(TriangleBvh::build(shapes::icosphere(3, 0.4))).unwrap();
        let g = evaluate_grid(&field, [64, 64, 64], &unit_bounds()).unwrap();
        let occupied = g.occupied_fraction(0.5);
        let analytic = 4.0 / 3.0 * std::f64::consts::PI * 0.4f64.powi(3);
        // Within 2 voxel shells of the analytic ratio.
        let shell = 4.0 * std::f64::consts::PI * 0.4f64.powi(2) * (2.0 / 64.0);
        assert!(
            (occupied - analytic).abs() < shell,
            "occupied {occupied} vs analytic {analytic}"
        );
    }

    #[test]
    fn grid_save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("grid.bin");
        let g = evaluate_grid(&Constant(0.25), [4, 6, 8], &unit_bounds()).unwrap();
        g.save(&p).unwrap();
        let loaded = OccupancyGrid::load(&p).unwrap();
        assert_eq!(loaded.resolution(), g.resolution());
        assert_eq!(loaded.values(), g.values());
        assert_eq!(loaded.voxel_center(1, 2, 3), g.voxel_center(1, 2, 3));
    }

    #[test]
    fn trilinear_field_interpolates() {
        let g = evaluate_grid(&Constant(1.0), [4, 4, 4], &unit_bounds()).unwrap();
        let vals = g.query(&[Pt3::origin(), Pt3::new(0.49, 0.49, 0.49)]);
        assert!((vals[0] - 1.0).abs() < 1e-9);
        assert!((vals[1] - 1.0).abs() < 1e-9);
    }
}
