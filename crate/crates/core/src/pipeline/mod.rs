//! Corpus orchestration: watertight preprocessing, query generation and
//! labeling, view rendering with sensor simulation, grasp annotation, and
//! train/validation splitting.
//!
//! Per-object work is independent and seed-derived (seeds hash the global
//! seed with the object id and view index), so objects may be processed in
//! any order or in parallel and still produce byte-identical artifacts.
//! Failures are isolated per object: a corrupt input marks its record failed
//! and the corpus run continues.

pub mod sampling;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::field::make_watertight;
use crate::geom::RigidScaleTransform;
use crate::grasp::{self, PlanParams};
use crate::io_util;
use crate::mesh::bvh::TriangleBvh;
use crate::mesh::io::{load_mesh, save_mesh, MeshFormat};
use crate::mesh::{self, decimate::decimate, normalize_unit_cube, remove_small_components};
use crate::occupancy::{self, QuerySpec, QueryStrategy};
use crate::rng;
use crate::sensor::{pfm, render_depth, simulate_kinect, KinectNoiseParams, PinholeCamera};
use crate::shapes;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub fusion_views: usize,
    pub fusion_resolution: u32,
    pub decimate_fraction: f64,
    pub min_component_fraction: f64,
    pub surface_samples: usize,
    pub query: QuerySpec,
    pub views_per_object: usize,
    pub view_distance: (f64, f64),
    pub scale_augment: bool,
    pub scale_range: (f64, f64),
    pub kinect: KinectNoiseParams,
    pub train_fraction: f64,
    /// Grasps planned per object; 0 skips grasp annotation.
    pub grasps_per_object: usize,
    /// Physical size (meters) given to the normalized mesh for planning.
    pub grasp_scale: f64,
    pub plan: PlanParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            fusion_views: 100,
            fusion_resolution: 256,
            decimate_fraction: 0.05,
            min_component_fraction: 0.02,
            surface_samples: 100_000,
            query: QuerySpec::default(),
            views_per_object: 100,
            view_distance: (1.0, 2.5),
            scale_augment: false,
            scale_range: (0.8, 1.2),
            kinect: KinectNoiseParams::default(),
            train_fraction: 0.9,
            grasps_per_object: 0,
            grasp_scale: 0.15,
            plan: PlanParams::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RecordStatus {
    Ok,
    Failed { stage: String, message: String },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
}

/// Paths are relative to the output root.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub id: String,
    pub category: String,
    pub raw_path: String,
    pub status: RecordStatus,
    #[serde(default)]
    pub watertight_path: Option<String>,
    #[serde(default)]
    pub processed_path: Option<String>,
    #[serde(default)]
    pub surface_points_path: Option<String>,
    #[serde(default)]
    pub query_paths: Vec<String>,
    #[serde(default)]
    pub view_dir: Option<String>,
    #[serde(default)]
    pub view_count: usize,
    #[serde(default)]
    pub grasp_path: Option<String>,
    /// sha256 of every artifact, keyed by relative path.
    #[serde(default)]
    pub hashes: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config: PipelineConfig,
    pub records: Vec<ObjectRecord>,
    pub split: BTreeMap<String, Split>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Manifest {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io_util::write_json(path, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        io_util::read_json(path)
    }

    pub fn failed_count(&self) -> usize {
        self.records
            .iter()
            .filter(|r| !matches!(r.status, RecordStatus::Ok))
            .count()
    }
}

/// One input mesh of a corpus.
#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub id: String,
    pub category: String,
    pub path: PathBuf,
}

/// Finds mesh files under `corpus_dir`. Files directly in the root get
/// category "default"; files in subdirectories use the directory name.
/// Sorted by id for deterministic processing.
pub fn discover_corpus(corpus_dir: impl AsRef<Path>) -> Result<Vec<CorpusEntry>> {
    let root = corpus_dir.as_ref();
    let mut entries = Vec::new();
    discover_into(root, root, &mut entries)?;
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    if entries.is_empty() {
        return Err(CoreError::EmptyGeometry(format!(
            "no mesh files under {}",
            root.display()
        )));
    }
    Ok(entries)
}

fn discover_into(root: &Path, dir: &Path, out: &mut Vec<CorpusEntry>) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            discover_into(root, &path, out)?;
            continue;
        }
        if MeshFormat::from_extension(&path).is_err() {
            continue;
        }
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_default();
        let category = path
            .parent()
            .filter(|p| *p != root)
            .and_then(|p| p.file_name())
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| "default".to_string());
        out.push(CorpusEntry { id, category, path });
    }
    Ok(())
}

fn object_seed(seed: u64, id: &str) -> u64 {
    rng::derive_seed(seed, &format!("object/{id}"))
}

/// Runs the preprocessing stages of one object and writes all artifacts
/// under `<out_root>/<id>/`.
pub fn preprocess_object(
    entry: &CorpusEntry,
    out_root: &Path,
    config: &PipelineConfig,
    seed: u64,
) -> ObjectRecord {
    let mut record = ObjectRecord {
        id: entry.id.clone(),
        category: entry.category.clone(),
        raw_path: entry.path.to_string_lossy().to_string(),
        status: RecordStatus::Ok,
        watertight_path: None,
        processed_path: None,
        surface_points_path: None,
        query_paths: Vec::new(),
        view_dir: None,
        view_count: 0,
        grasp_path: None,
        hashes: BTreeMap::new(),
    };
    match run_object(entry, out_root, config, seed, &mut record) {
        Ok(()) => record,
        Err((stage, err)) => {
            record.status = RecordStatus::Failed {
                stage: stage.to_string(),
                message: err.to_string(),
            };
            record
        }
    }
}

type StageResult = std::result::Result<(), (&'static str, CoreError)>;

fn stage<T>(name: &'static str, r: Result<T>) -> std::result::Result<T, (&'static str, CoreError)> {
    r.map_err(|e| (name, e))
}

fn run_object(
    entry: &CorpusEntry,
    out_root: &Path,
    config: &PipelineConfig,
    seed: u64,
    record: &mut ObjectRecord,
) -> StageResult {
    let obj_seed = object_seed(seed, &entry.id);
    let obj_dir = out_root.join(&entry.id);
    let mesh_dir = obj_dir.join("mesh");
    let query_dir = obj_dir.join("queries");
    stage("setup", std::fs::create_dir_all(&mesh_dir).map_err(CoreError::from))?;
    stage("setup", std::fs::create_dir_all(&query_dir).map_err(CoreError::from))?;

    let rel = |p: &Path| -> String {
        p.strip_prefix(out_root)
            .expect("artifact under out_root")
            .to_string_lossy()
            .replace('\\', "/")
    };
    let register = |record: &mut ObjectRecord, p: &Path| -> StageResult {
        let h = stage("hash", io_util::sha256_file(p))?;
        record.hashes.insert(rel(p), h);
        Ok(())
    };

    // Watertight-ification by depth fusion.
    let raw = stage("load", load_mesh(&entry.path))?;
    let fused = stage(
        "fusion",
        make_watertight(&raw, config.fusion_views, config.fusion_resolution),
    )?;
    let watertight_path = mesh_dir.join("watertight.ply");
    stage("write", save_mesh(&fused, &watertight_path, MeshFormat::PlyBinary))?;
    register(record, &watertight_path)?;
    record.watertight_path = Some(rel(&watertight_path));

    // Decimation, artifact cleanup, normalization.
    let decimated = stage("decimate", decimate(&fused, config.decimate_fraction))?.mesh;
    let cleaned = stage(
        "components",
        remove_small_components(&decimated, config.min_component_fraction),
    )?;
    let (processed, _transform) = stage("normalize", normalize_unit_cube(&cleaned))?;
    let processed_path = mesh_dir.join("processed.ply");
    stage("write", save_mesh(&processed, &processed_path, MeshFormat::PlyBinary))?;
    register(record, &processed_path)?;
    record.processed_path = Some(rel(&processed_path));
    let mesh_hash = record.hashes[&rel(&processed_path)].clone();

    // Surface samples.
    let surface = stage(
        "surface-samples",
        mesh::sample_surface(&processed, config.surface_samples, obj_seed),
    )?;
    let surface_path = mesh_dir.join("surface.pts");
    stage(
        "write",
        io_util::write_point_set(&surface_path, &surface, "object-normalized", obj_seed, "surface"),
    )?;
    register(record, &surface_path)?;
    register(record, &surface_path.with_extension("json"))?;
    record.surface_points_path = Some(rel(&surface_path));

    // Query generation and occupancy labeling.
    let bvh = TriangleBvh::build(processed.clone());
    let sets = stage(
        "queries",
        occupancy::generate_query_points(&processed, &config.query, obj_seed),
    )?;
    let mut noisy_index = 0usize;
    let mut shell_index = 0usize;
    for set in &sets {
        let labeled = stage("labeling", occupancy::label_queries(&bvh, set))?;
        let name = match set.strategy {
            QueryStrategy::UniformCube => "uniform.qry".to_string(),
            QueryStrategy::NoisySurface { .. } => {
                noisy_index += 1;
                format!("noisy_{:02}.qry", noisy_index - 1)
            }
            QueryStrategy::SphereShell { .. } => {
                shell_index += 1;
                format!("sphere_{:02}.qry", shell_index - 1)
            }
        };
        let path = query_dir.join(name);
        stage("write", occupancy::write_query_set(&path, &labeled, &mesh_hash))?;
        register(record, &path)?;
        register(record, &path.with_extension("json"))?;
        record.query_paths.push(rel(&path));
    }

    // Rendered views with sensor simulation.
    if config.views_per_object > 0 {
        let view_dir = obj_dir.join("views");
        stage("setup", std::fs::create_dir_all(&view_dir).map_err(CoreError::from))?;
        stage(
            "views",
            generate_views(&processed, &entry.id, &view_dir, config, seed),
        )?;
        for v in 0..config.views_per_object {
            for suffix in ["", "_normal", "_kinect"] {
                register(record, &view_dir.join(format!("{v:03}{suffix}.pfm")))?;
            }
            register(record, &view_dir.join(format!("{v:03}.json")))?;
        }
        record.view_dir = Some(rel(&view_dir));
        record.view_count = config.views_per_object;
    }

    // Grasp annotation on the physically scaled mesh.
    if config.grasps_per_object > 0 {
        let scaled = stage(
            "grasping",
            RigidScaleTransform::uniform(crate::Vec3::zeros(), config.grasp_scale)
                .and_then(|t| processed.transformed(&t)),
        )?;
        let grasp_bvh = TriangleBvh::build(scaled);
        let hand = crate::grasp::hand::default_hand();
        let result = stage(
            "grasping",
            grasp::plan_grasps(
                &hand,
                &grasp_bvh,
                config.grasps_per_object,
                rng::derive_seed(obj_seed, "grasps"),
                &config.plan,
            ),
        )?;
        let grasp_path = obj_dir.join("grasps.json");
        stage("write", grasp::planner::write_grasps(&grasp_path, &result.grasps))?;
        register(record, &grasp_path)?;
        record.grasp_path = Some(rel(&grasp_path));
    }

    Ok(())
}

/// Renders `views_per_object` depth/normal/simulated-depth triplets. Per-view
/// seeds derive from (seed, object id, view index), so view order never
/// matters.
pub fn generate_views(
    mesh: &mesh::TriangleMesh,
    object_id: &str,
    view_dir: &Path,
    config: &PipelineConfig,
    seed: u64,
) -> Result<()> {
    use rand::Rng;
    (0..config.views_per_object)
        .into_par_iter()
        .try_for_each(|v| -> Result<()> {
            let view_seed = rng::derive_seed_index(seed, &format!("view/{object_id}"), v as u64);
            let mut r = rng::stream(view_seed, "camera");

            let scale = if config.scale_augment {
                config.scale_range.0
                    + r.gen::<f64>() * (config.scale_range.1 - config.scale_range.0)
            } else {
                1.0
            };
            let scaled;
            let render_mesh = if scale == 1.0 {
                mesh
            } else {
                scaled = mesh::scale_axis(mesh, 2, scale)?;
                &scaled
            };
            let bvh = TriangleBvh::build(render_mesh.clone());

            // Hemisphere view at a random distance.
            let z: f64 = r.gen();
            let azimuth = r.gen::<f64>() * std::f64::consts::TAU;
            let (d_min, d_max) = config.view_distance;
            let distance = d_min + r.gen::<f64>() * (d_max - d_min);
            let s = (1.0 - z * z).max(0.0).sqrt();
            let eye = crate::Pt3::from(
                crate::Vec3::new(s * azimuth.cos(), s * azimuth.sin(), z) * distance,
            );
            let pose = PinholeCamera::look_at(eye, crate::Pt3::origin(), crate::Vec3::z());
            let camera = PinholeCamera::default_intrinsics(pose);

            let (depth, normals) = render_depth(&bvh, &camera);
            let simulated = simulate_kinect(&depth, &normals, &config.kinect, view_seed)?;

            pfm::write_depth_pfm(view_dir.join(format!("{v:03}.pfm")), &depth)?;
            pfm::write_normals_pfm(view_dir.join(format!("{v:03}_normal.pfm")), &normals)?;
            pfm::write_depth_pfm(view_dir.join(format!("{v:03}_kinect.pfm")), &simulated)?;
            let mut sidecar = pfm::ViewSidecar::new(&camera, view_seed, scale);
            sidecar.kinect = Some(config.kinect.clone());
            io_util::write_json(view_dir.join(format!("{v:03}.json")), &sidecar)?;
            Ok(())
        })
}

/// Per-category 90/10-style split. Every category with at least two objects
/// contributes `round((1 - fraction) * count)` validation objects (at least
/// one); singleton categories go to training with a warning.
pub fn split_dataset(
    items: &[(String, String)], // (id, category)
    train_fraction: f64,
    seed: u64,
) -> Result<(BTreeMap<String, Split>, Vec<String>)> {
    if !(0.0 < train_fraction && train_fraction < 1.0) {
        return Err(CoreError::Precondition(format!(
            "train fraction must be in (0,1), got {train_fraction}"
        )));
    }
    let mut by_category: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (id, cat) in items {
        by_category.entry(cat).or_default().push(id);
    }
    let mut split = BTreeMap::new();
    let mut warnings = Vec::new();
    for (category, mut ids) in by_category {
        ids.sort();
        if ids.len() < 2 {
            warnings.push(format!(
                "category '{category}' has a single object; assigned to training"
            ));
            for id in ids {
                split.insert(id.to_string(), Split::Train);
            }
            continue;
        }
        // Seeded shuffle, deterministic per category.
        use rand::seq::SliceRandom;
        let mut r = rng::stream(seed, &format!("split/{category}"));
        ids.shuffle(&mut r);
        let val = (((1.0 - train_fraction) * ids.len() as f64).round() as usize)
            .max(1)
            .min(ids.len() - 1);
        for (i, id) in ids.iter().enumerate() {
            split.insert(
                id.to_string(),
                if i < val { Split::Validation } else { Split::Train },
            );
        }
    }
    Ok((split, warnings))
}

/// Processes a corpus end to end and writes `manifest.json` in `out_root`.
pub fn run_corpus(
    corpus_dir: impl AsRef<Path>,
    out_root: impl AsRef<Path>,
    config: &PipelineConfig,
    seed: u64,
) -> Result<Manifest> {
    let out_root = out_root.as_ref();
    std::fs::create_dir_all(out_root)?;
    let entries = discover_corpus(corpus_dir)?;

    let records: Vec<ObjectRecord> = entries
        .par_iter()
        .map(|e| preprocess_object(e, out_root, config, seed))
        .collect();

    let ok_items: Vec<(String, String)> = records
        .iter()
        .filter(|r| matches!(r.status, RecordStatus::Ok))
        .map(|r| (r.id.clone(), r.category.clone()))
        .collect();
    let (split, warnings) = split_dataset(&ok_items, config.train_fraction, seed)?;

    let manifest = Manifest {
        seed,
        config: config.clone(),
        records,
        split,
        warnings,
    };
    manifest.save(out_root.join("manifest.json"))?;
    Ok(manifest)
}

/// Writes a small procedural corpus; used by tests and demos.
pub fn write_toy_corpus(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let meshes: Vec<(&str, mesh::TriangleMesh)> = vec![
        ("box", shapes::box_mesh(crate::Pt3::new(-0.3, -0.2, -0.25), crate::Pt3::new(0.3, 0.2, 0.25))),
        ("sphere", shapes::icosphere(2, 0.35)),
        ("torus", shapes::torus(0.3, 0.12, 20, 10)),
        ("open_box", shapes::open_box(crate::Pt3::new(-0.25, -0.25, -0.2), crate::Pt3::new(0.25, 0.25, 0.2))),
        ("cylinder", shapes::cylinder(0.2, 0.5, 18)),
    ];
    let mut paths = Vec::new();
    for (name, m) in meshes {
        let p = dir.join(format!("{name}.off"));
        save_mesh(&m, &p, MeshFormat::Off)?;
        paths.push(p);
    }
    Ok(paths)
}
