//! Exact point-in-mesh testing and query-point generation/labeling.
//!
//! Occupancy is decided by ray-crossing parity against a watertight surface.
//! Rays that graze a vertex or edge are detected and retried along a
//! different direction, so the result is direction-independent away from the
//! surface itself.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geom::{Pt3, RigidScaleTransform, Vec3};
use crate::io_util;
use crate::mesh::bvh::TriangleBvh;
use crate::mesh::TriangleMesh;
use crate::rng;

/// How a query-point set was produced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QueryStrategy {
    /// Uniform in the padded unit cube.
    UniformCube,
    /// Surface samples with additive Gaussian noise.
    NoisySurface { std: f64 },
    /// Uniform on an origin-centered sphere.
    SphereShell { radius: f64 },
}

/// Labeled spatial points with sampling provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryPointSet {
    pub points: Vec<Pt3>,
    /// One label per point; `false` until `label_queries` has run.
    pub labels: Vec<bool>,
    pub strategy: QueryStrategy,
    pub seed: u64,
}

/// Counts and parameters of the query-generation scheme.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct QuerySpec {
    pub uniform_count: usize,
    /// Padding added to each side of the unit cube.
    pub cube_padding: f64,
    pub noisy_total: usize,
    pub noise_stds: Vec<f64>,
    pub sphere_total: usize,
    pub sphere_radii: Vec<f64>,
}

impl Default for QuerySpec {
    fn default() -> Self {
        QuerySpec {
            uniform_count: 100_000,
            cube_padding: 0.1,
            noisy_total: 100_000,
            noise_stds: log_spaced(1e-3, 0.25, 10),
            sphere_total: 100_000,
            sphere_radii: log_spaced(0.6, 3.0_f64.sqrt(), 5),
        }
    }
}

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

/// Fixed, well-spread retry directions for parity rays.
fn ray_direction(attempt: u64) -> Vec3 {
    if attempt == 0 {
        // Irrational components; avoids axis/grid alignment in common meshes.
        return Vec3::new(0.577_215_664_901, 0.318_309_886_184, 0.693_147_180_559).normalize();
    }
    let mut k = attempt;
    loop {
        let v = Vec3::new(
            rng::counter_uniform(0xDA7A_0D1E, k * 3) * 2.0 - 1.0,
            rng::counter_uniform(0xDA7A_0D1E, k * 3 + 1) * 2.0 - 1.0,
            rng::counter_uniform(0xDA7A_0D1E, k * 3 + 2) * 2.0 - 1.0,
        );
        let n = v.norm();
        if n > 0.1 {
            return v / n;
        }
        k += 97;
    }
}

const MAX_RAY_ATTEMPTS: u64 = 32;

/// True iff `p` lies inside the closed surface.
pub fn point_occupancy(bvh: &TriangleBvh, p: &Pt3) -> Result<bool> {
    if !bvh.is_watertight() {
        let (b, nm) = crate::mesh::watertight_report(bvh.mesh());
        return Err(CoreError::NotWatertight {
            boundary_edges: b,
            nonmanifold_edges: nm,
        });
    }
    Ok(occupancy_unchecked(bvh, p))
}

/// Parity test without the watertightness precondition check; callers must
/// have validated the mesh.
pub(crate) fn occupancy_unchecked(bvh: &TriangleBvh, p: &Pt3) -> bool {
    let mut last = false;
    for attempt in 0..MAX_RAY_ATTEMPTS {
        let dir = ray_direction(attempt);
        match parity_along(bvh, p, &dir) {
            Ok(inside) => return inside,
            Err(inside_guess) => last = inside_guess,
        }
    }
    last
}

/// Parity along one direction; `Err` carries the best guess when the ray
/// grazed a vertex or edge.
pub(crate) fn parity_along(bvh: &TriangleBvh, p: &Pt3, dir: &Vec3) -> std::result::Result<bool, bool> {
    let hits = bvh.ray_hits(p, dir, f64::INFINITY);
    let inside = hits.len() % 2 == 1;
    if hits.iter().any(|h| h.hit.grazing) {
        Err(inside)
    } else {
        Ok(inside)
    }
}

fn require_normalized(mesh: &TriangleMesh) -> Result<()> {
    let bb = mesh.aabb();
    let side = bb.longest_side();
    let center = bb.center().coords.norm();
    if (side - 1.0).abs() > 1e-6 || center > 1e-6 {
        return Err(CoreError::Precondition(format!(
            "mesh must be normalized (longest side 1, centered); got side {side}, center offset {center}"
        )));
    }
    Ok(())
}

/// Generates the full set of query points for a normalized mesh: one uniform
/// cube set, one noisy-surface set per configured std, and one shell set per
/// configured radius. Labels are left unset.
pub fn generate_query_points(
    mesh: &TriangleMesh,
    spec: &QuerySpec,
    seed: u64,
) -> Result<Vec<QueryPointSet>> {
    require_normalized(mesh)?;
    let mut sets = Vec::with_capacity(1 + spec.noise_stds.len() + spec.sphere_radii.len());

    let half = 0.5 + spec.cube_padding;
    let uniform_seed = rng::derive_seed(seed, "queries/uniform");
    let mut r = rng::stream(uniform_seed, "points");
    let points: Vec<Pt3> = (0..spec.uniform_count)
        .map(|_| {
            Pt3::new(
                r.gen::<f64>() * 2.0 * half - half,
                r.gen::<f64>() * 2.0 * half - half,
                r.gen::<f64>() * 2.0 * half - half,
            )
        })
        .collect();
    sets.push(QueryPointSet {
        labels: vec![false; points.len()],
        points,
        strategy: QueryStrategy::UniformCube,
        seed: uniform_seed,
    });

    if !spec.noise_stds.is_empty() {
        let per_std = spec.noisy_total / spec.noise_stds.len();
        for (i, &std) in spec.noise_stds.iter().enumerate() {
            let set_seed = rng::derive_seed_index(seed, "queries/noisy", i as u64);
            let mut points = crate::mesh::sample_surface(mesh, per_std, set_seed)?;
            if std > 0.0 {
                let normal = Normal::new(0.0, std).expect("std is finite and non-negative");
                let mut nr = rng::stream(set_seed, "noise");
                for p in &mut points {
                    p.x += normal.sample(&mut nr);
                    p.y += normal.sample(&mut nr);
                    p.z += normal.sample(&mut nr);
                }
            }
            sets.push(QueryPointSet {
                labels: vec![false; points.len()],
                points,
                strategy: QueryStrategy::NoisySurface { std },
                seed: set_seed,
            });
        }
    }

    if !spec.sphere_radii.is_empty() {
        let per_radius = spec.sphere_total / spec.sphere_radii.len();
        for (i, &radius) in spec.sphere_radii.iter().enumerate() {
            let set_seed = rng::derive_seed_index(seed, "queries/sphere", i as u64);
            let mut r = rng::stream(set_seed, "points");
            let points: Vec<Pt3> = (0..per_radius)
                .map(|_| {
                    // Rejection-sample a direction in the unit ball, then
                    // project onto the shell.
                    loop {
                        let v = Vec3::new(
                            r.gen::<f64>() * 2.0 - 1.0,
                            r.gen::<f64>() * 2.0 - 1.0,
                            r.gen::<f64>() * 2.0 - 1.0,
                        );
                        let n2 = v.norm_squared();
                        if n2 > 1e-12 && n2 <= 1.0 {
                            break Pt3::from(v * (radius / n2.sqrt()));
                        }
                    }
                })
                .collect();
            sets.push(QueryPointSet {
                labels: vec![false; points.len()],
                points,
                strategy: QueryStrategy::SphereShell { radius },
                seed: set_seed,
            });
        }
    }

    Ok(sets)
}

/// Fills occupancy labels. Parallel over points, output in input order.
pub fn label_queries(bvh: &TriangleBvh, qps: &QueryPointSet) -> Result<QueryPointSet> {
    if !bvh.is_watertight() {
        let (b, nm) = crate::mesh::watertight_report(bvh.mesh());
        return Err(CoreError::NotWatertight {
            boundary_edges: b,
            nonmanifold_edges: nm,
        });
    }
    let labels: Vec<bool> = qps
        .points
        .par_iter()
        .map(|p| occupancy_unchecked(bvh, p))
        .collect();
    Ok(QueryPointSet {
        points: qps.points.clone(),
        labels,
        strategy: qps.strategy,
        seed: qps.seed,
    })
}

/// Applies `transform`, crops to the centered cube of side `crop_cube`, and
/// draws a uniform subsample of size `n` without replacement.
pub fn subsample_transform(
    qps: &QueryPointSet,
    n: usize,
    transform: &RigidScaleTransform,
    crop_cube: f64,
) -> Result<QueryPointSet> {
    let half = crop_cube * 0.5;
    let mut kept: Vec<(Pt3, bool)> = Vec::new();
    for (p, &l) in qps.points.iter().zip(&qps.labels) {
        let q = transform.apply(p);
        if q.x.abs() <= half && q.y.abs() <= half && q.z.abs() <= half {
            kept.push((q, l));
        }
    }
    if kept.len() < n {
        return Err(CoreError::Shortage {
            needed: n,
            available: kept.len(),
        });
    }
    // Partial Fisher-Yates: the first n entries become the sample.
    let mut r = rng::stream(qps.seed, "subsample");
    let len = kept.len();
    for i in 0..n {
        let j = i + (r.gen::<f64>() * (len - i) as f64) as usize;
        let j = j.min(len - 1);
        kept.swap(i, j);
    }
    kept.truncate(n);
    Ok(QueryPointSet {
        points: kept.iter().map(|(p, _)| *p).collect(),
        labels: kept.iter().map(|(_, l)| *l).collect(),
        strategy: qps.strategy,
        seed: qps.seed,
    })
}

/// Sidecar for labeled query files.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct QuerySidecar {
    pub count: usize,
    pub strategy: QueryStrategy,
    pub seed: u64,
    pub source_mesh_sha256: String,
}

/// Binary records: little-endian f32 x, y, z + u8 label, plus a JSON sidecar
/// at the same stem.
pub fn write_query_set(
    path: impl AsRef<Path>,
    set: &QueryPointSet,
    source_mesh_sha256: &str,
) -> Result<()> {
    use std::io::Write;
    let path = path.as_ref();
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (p, &l) in set.points.iter().zip(&set.labels) {
        for c in [p.x as f32, p.y as f32, p.z as f32] {
            w.write_all(&c.to_le_bytes())?;
        }
        w.write_all(&[u8::from(l)])?;
    }
    w.flush()?;
    io_util::write_json(
        path.with_extension("json"),
        &QuerySidecar {
            count: set.points.len(),
            strategy: set.strategy,
            seed: set.seed,
            source_mesh_sha256: source_mesh_sha256.to_string(),
        },
    )
}

pub fn read_query_set(path: impl AsRef<Path>) -> Result<QueryPointSet> {
    use std::io::Read;
    let path = path.as_ref();
    let sidecar: QuerySidecar = io_util::read_json(path.with_extension("json"))?;
    let mut bytes = Vec::new();
    std::io::BufReader::new(std::fs::File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() % 13 != 0 {
        return Err(CoreError::MalformedFile {
            path: path.to_path_buf(),
            line: 0,
            message: format!("query file length {} is not a multiple of 13", bytes.len()),
        });
    }
    let mut points = Vec::with_capacity(bytes.len() / 13);
    let mut labels = Vec::with_capacity(bytes.len() / 13);
    for rec in bytes.chunks_exact(13) {
        let x = f32::from_le_bytes(rec[0..4].try_into().unwrap());
        let y = f32::from_le_bytes(rec[4..8].try_into().unwrap());
        let z = f32::from_le_bytes(rec[8..12].try_into().unwrap());
        points.push(Pt3::new(f64::from(x), f64::from(y), f64::from(z)));
        labels.push(rec[12] != 0);
    }
    Ok(QueryPointSet {
        points,
        labels,
        strategy: sidecar.strategy,
        seed: sidecar.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::normalize_unit_cube;
    use crate::shapes;

    fn unit_cube_bvh() -> TriangleBvh {
        TriangleBvh::build(shapes::box_mesh(
            Pt3::new(-0.5, -0.5, -0.5),
            Pt3::new(0.5, 0.5, 0.5),
        ))
    }

    #[test]
    fn cube_center_inside_far_point_outside() {
        let bvh = unit_cube_bvh();
        assert!(point_occupancy(&bvh, &Pt3::origin()).unwrap());
        assert!(!point_occupancy(&bvh, &Pt3::new(2.0, 0.0, 0.0)).unwrap());
    }

    #[test]
    fn non_watertight_mesh_is_rejected() {
        let bvh = TriangleBvh::build(shapes::open_box(
            Pt3::new(0.0, 0.0, 0.0),
            Pt3::new(1.0, 1.0, 1.0),
        ));
        assert!(matches!(
            point_occupancy(&bvh, &Pt3::origin()),
            Err(CoreError::NotWatertight { .. })
        ));
    }

    #[test]
    fn parity_is_direction_independent() {
        let bvh = TriangleBvh::build(shapes::icosphere(2, 0.4));
        let mut r = rng::stream(3, "dirs");
        use rand::Rng;
        for i in 0..200 {
            let p = Pt3::new(
                r.gen::<f64>() - 0.5,
                r.gen::<f64>() - 0.5,
                r.gen::<f64>() - 0.5,
            );
            if let Some(sp) = bvh.nearest_point(&p, f64::INFINITY) {
                if sp.distance < 1e-4 {
                    continue;
                }
            }
            let reference = occupancy_unchecked(&bvh, &p);
            for k in 0..16u64 {
                let dir = ray_direction(1000 + 17 * i + k);
                if let Ok(inside) = parity_along(&bvh, &p, &dir) {
                    assert_eq!(inside, reference, "point {p:?} dir {dir:?}");
                }
            }
        }
    }

    #[test]
    fn default_spec_counts_and_ranges() {
        let (mesh, _) = normalize_unit_cube(&shapes::icosphere(1, 0.4)).unwrap();
        let sets = generate_query_points(&mesh, &QuerySpec::default(), 9).unwrap();
        assert_eq!(sets.len(), 1 + 10 + 5);

        let uniform = &sets[0];
        assert_eq!(uniform.strategy, QueryStrategy::UniformCube);
        assert_eq!(uniform.points.len(), 100_000);
        for p in &uniform.points {
            assert!(p.x.abs() <= 0.6 && p.y.abs() <= 0.6 && p.z.abs() <= 0.6);
        }

        let noisy_count: usize = sets
            .iter()
            .filter(|s| matches!(s.strategy, QueryStrategy::NoisySurface { .. }))
            .map(|s| s.points.len())
            .sum();
        assert_eq!(noisy_count, 100_000);

        let shell_count: usize = sets
            .iter()
            .filter(|s| matches!(s.strategy, QueryStrategy::SphereShell { .. }))
            .map(|s| s.points.len())
            .sum();
        assert_eq!(shell_count, 100_000);
    }

    #[test]
    fn zero_noise_points_lie_on_surface() {
        let (mesh, _) = normalize_unit_cube(&shapes::icosphere(2, 0.4)).unwrap();
        let spec = QuerySpec {
            noise_stds: vec![0.0],
            noisy_total: 1000,
            sphere_radii: vec![],
            sphere_total: 0,
            uniform_count: 10,
            ..QuerySpec::default()
        };
        let sets = generate_query_points(&mesh, &spec, 5).unwrap();
        let bvh = TriangleBvh::build(mesh);
        for s in &sets {
            if let QueryStrategy::NoisySurface { std } = s.strategy {
                assert_eq!(std, 0.0);
                for p in &s.points {
                    let d = bvh.nearest_point(p, 1.0).unwrap().distance;
                    assert!(d < 1e-9, "distance {d}");
                }
            }
        }
    }

    #[test]
    fn shell_points_have_exact_radius() {
        let (mesh, _) = normalize_unit_cube(&shapes::icosphere(1, 0.4)).unwrap();
        let spec = QuerySpec {
            sphere_radii: vec![0.87],
            sphere_total: 5000,
            noise_stds: vec![],
            noisy_total: 0,
            uniform_count: 10,
            ..QuerySpec::default()
        };
        let sets = generate_query_points(&mesh, &spec, 5).unwrap();
        let shells: Vec<_> = sets
            .iter()
            .filter(|s| matches!(s.strategy, QueryStrategy::SphereShell { .. }))
            .collect();
        assert_eq!(shells.len(), 1);
        for p in &shells[0].points {
            assert!((p.coords.norm() - 0.87).abs() < 1e-6);
        }
    }

    #[test]
    fn unnormalized_mesh_is_rejected() {
        let mesh = shapes::box_mesh(Pt3::new(0.0, 0.0, 0.0), Pt3::new(2.0, 2.0, 2.0));
        assert!(matches!(
            generate_query_points(&mesh, &QuerySpec::default(), 1),
            Err(CoreError::Precondition(_))
        ));
    }

    #[test]
    fn occupied_fraction_matches_analytic_volume() {
        // Box [-0.25, 0.25]^3 inside the padded cube: volume ratio
        // 0.125 / 1.728 = 0.07233..., binomial bound at 1e6 samples.
        let mesh = shapes::box_mesh(Pt3::new(-0.25, -0.25, -0.25), Pt3::new(0.25, 0.25, 0.25));
        let bvh = TriangleBvh::build(mesh.clone());
        let spec = QuerySpec {
            uniform_count: 1_000_000,
            noise_stds: vec![],
            noisy_total: 0,
            sphere_radii: vec![],
            sphere_total: 0,
            ..QuerySpec::default()
        };
        // The box itself is 0.5 wide, not normalized; use a normalized stand-in
        // for generation and label against the real box.
        let (normalized, _) = normalize_unit_cube(&shapes::box_mesh(
            Pt3::new(-0.5, -0.5, -0.5),
            Pt3::new(0.5, 0.5, 0.5),
        ))
        .unwrap();
        let sets = generate_query_points(&normalized, &spec, 123).unwrap();
        let labeled = label_queries(&bvh, &sets[0]).unwrap();
        let occupied = labeled.labels.iter().filter(|l| **l).count() as f64;
        let fraction = occupied / labeled.labels.len() as f64;
        assert!((fraction - 0.125 / 1.728).abs() < 0.001, "fraction {fraction}");
    }

    #[test]
    fn far_shells_label_false_and_surface_mixed() {
        let (mesh, _) = normalize_unit_cube(&shapes::icosphere(2, 0.4)).unwrap();
        let bvh = TriangleBvh::build(mesh.clone());
        let spec = QuerySpec {
            uniform_count: 10,
            noise_stds: vec![0.0],
            noisy_total: 2000,
            sphere_radii: vec![1.5],
            sphere_total: 2000,
            ..QuerySpec::default()
        };
        let sets = generate_query_points(&mesh, &spec, 77).unwrap();
        for s in &sets {
            let labeled = label_queries(&bvh, s).unwrap();
            match s.strategy {
                QueryStrategy::SphereShell { .. } => {
                    assert!(labeled.labels.iter().all(|l| !l));
                }
                QueryStrategy::NoisySurface { .. } => {
                    let inside = labeled.labels.iter().filter(|l| **l).count();
                    assert!(inside > 0 && inside < labeled.labels.len());
                }
                QueryStrategy::UniformCube => {}
            }
        }
    }

    #[test]
    fn label_order_independence() {
        let (mesh, _) = normalize_unit_cube(&shapes::icosphere(1, 0.45)).unwrap();
        let bvh = TriangleBvh::build(mesh.clone());
        let spec = QuerySpec {
            uniform_count: 2000,
            noise_stds: vec![],
            noisy_total: 0,
            sphere_radii: vec![],
            sphere_total: 0,
            ..QuerySpec::default()
        };
        let sets = generate_query_points(&mesh, &spec, 31).unwrap();
        let labeled = label_queries(&bvh, &sets[0]).unwrap();
        let mut permuted = sets[0].clone();
        permuted.points.reverse();
        let labeled_rev = label_queries(&bvh, &permuted).unwrap();
        let mut expect = labeled.labels.clone();
        expect.reverse();
        assert_eq!(labeled_rev.labels, expect);
    }

    #[test]
    fn subsample_crops_and_counts() {
        let labels = vec![true, false, true, false];
        let points = vec![
            Pt3::new(0.2, 0.0, 0.0),
            Pt3::new(0.7, 0.0, 0.0), // cropped
            Pt3::new(-0.4, 0.4, 0.1),
            Pt3::new(0.0, 0.0, -0.49),
        ];
        let qps = QueryPointSet {
            points,
            labels,
            strategy: QueryStrategy::UniformCube,
            seed: 5,
        };
        let out =
            subsample_transform(&qps, 3, &RigidScaleTransform::identity(), 1.0).unwrap();
        assert_eq!(out.points.len(), 3);
        for p in &out.points {
            assert!(p.x.abs() <= 0.5 && p.y.abs() <= 0.5 && p.z.abs() <= 0.5);
        }
        assert!(matches!(
            subsample_transform(&qps, 4, &RigidScaleTransform::identity(), 1.0),
            Err(CoreError::Shortage {
                needed: 4,
                available: 3
            })
        ));
    }

    #[test]
    fn subsample_full_size_is_permutation() {
        let mut r = rng::stream(9, "perm");
        use rand::Rng;
        let points: Vec<Pt3> = (0..100)
            .map(|_| {
                Pt3::new(
                    r.gen::<f64>() - 0.5,
                    r.gen::<f64>() - 0.5,
                    r.gen::<f64>() - 0.5,
                )
            })
            .collect();
        let qps = QueryPointSet {
            labels: vec![false; points.len()],
            points,
            strategy: QueryStrategy::UniformCube,
            seed: 2,
        };
        let out = subsample_transform(&qps, 100, &RigidScaleTransform::identity(), 1.0).unwrap();
        let mut a: Vec<_> = qps.points.iter().map(|p| format!("{:?}", p)).collect();
        let mut b: Vec<_> = out.points.iter().map(|p| format!("{:?}", p)).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn shell_crop_respects_half_diagonal() {
        // Shell at radius beyond sqrt(3)/2 is fully cropped by the unit cube.
        let (mesh, _) = normalize_unit_cube(&shapes::icosphere(1, 0.4)).unwrap();
        let spec = QuerySpec {
            uniform_count: 10,
            noise_stds: vec![],
            noisy_total: 0,
            sphere_radii: vec![0.9],
            sphere_total: 4000,
            ..QuerySpec::default()
        };
        let sets = generate_query_points(&mesh, &spec, 3).unwrap();
        let shell = sets
            .iter()
            .find(|s| matches!(s.strategy, QueryStrategy::SphereShell { .. }))
            .unwrap();
        let out = subsample_transform(shell, 1, &RigidScaleTransform::identity(), 1.0);
        if let Ok(set) = &out {
            for p in &set.points {
                assert!(p.coords.norm() <= 3.0_f64.sqrt() / 2.0 + 1e-9);
            }
        }
        // Count survivors explicitly.
        let survivors = shell
            .points
            .iter()
            .filter(|p| p.x.abs() <= 0.5 && p.y.abs() <= 0.5 && p.z.abs() <= 0.5)
            .count();
        for p in shell.points.iter().filter(|p| p.coords.norm() > 3.0_f64.sqrt() / 2.0 + 1e-9) {
            assert!(!(p.x.abs() <= 0.5 && p.y.abs() <= 0.5 && p.z.abs() <= 0.5));
        }
        // radius 0.9 > sqrt(3)/2 ~ 0.866: nothing survives
        assert_eq!(survivors, 0);
    }

    #[test]
    fn query_file_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (mesh, _) = normalize_unit_cube(&shapes::icosphere(1, 0.45)).unwrap();
        let bvh = TriangleBvh::build(mesh.clone());
        let spec = QuerySpec {
            uniform_count: 500,
            noise_stds: vec![],
            noisy_total: 0,
            sphere_radii: vec![],
            sphere_total: 0,
            ..QuerySpec::default()
        };
        let sets = generate_query_points(&mesh, &spec, 17).unwrap();
        let labeled = label_queries(&bvh, &sets[0]).unwrap();
        let p1 = dir.path().join("a.qry");
        let p2 = dir.path().join("b.qry");
        write_query_set(&p1, &labeled, "hash").unwrap();
        write_query_set(&p2, &labeled, "hash").unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        let loaded = read_query_set(&p1).unwrap();
        assert_eq!(loaded.labels, labeled.labels);
        assert_eq!(loaded.strategy, labeled.strategy);
    }
}
