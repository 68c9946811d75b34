//! Random-restart local-search grasp planner.
//!
//! Each restart samples an approach pose on an inflated bounding sphere,
//! advances until the hand base meets the object, resolves the collision by
//! retreating, closes the fingers, and scores the grasp by its
//! robustness-devalued epsilon quality. Gaussian pose perturbations then
//! hill-climb that score. Restarts are independent and seed-derived, so the
//! planner parallelizes without changing its output.

use nalgebra::{Isometry3, Translation3, UnitQuaternion};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geom::{Pt3, Vec3};
use crate::grasp::hand::HandModel;
use crate::grasp::kinematics::{base_collides, close_fingers, detect_contacts, retreat_hand};
use crate::grasp::quality::epsilon_quality;
use crate::grasp::robust::{robust_quality, RobustnessParams};
use crate::grasp::wrench::contact_wrenches;
use crate::grasp::{Grasp, GraspRecord};
use crate::mesh::bvh::TriangleBvh;
use crate::rng;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct PlanParams {
    pub hillclimb_iters: usize,
    /// Pose perturbation stds for hill climbing.
    pub translation_std: f64,
    pub rotation_std: f64,
    pub friction: f64,
    pub cone_edges: u32,
    /// Step used when advancing the palm toward the object, meters.
    pub approach_step: f64,
    pub robustness: RobustnessParams,
}

impl Default for PlanParams {
    fn default() -> Self {
        PlanParams {
            hillclimb_iters: 12,
            translation_std: 0.008,
            rotation_std: 0.12,
            friction: 0.8,
            cone_edges: 8,
            approach_step: 0.002,
            robustness: RobustnessParams::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct PlanStats {
    pub attempted: usize,
    pub base_collision_failures: usize,
    pub no_contact: usize,
    pub zero_quality: usize,
}

/// A planned grasp with its quality provenance.
#[derive(Clone, Debug)]
pub struct PlannedGrasp {
    pub grasp: Grasp,
    pub raw_epsilon: f64,
    pub devalued: bool,
    pub restart: usize,
}

impl PlannedGrasp {
    pub fn record(&self) -> GraspRecord {
        GraspRecord::new(&self.grasp, self.raw_epsilon, self.devalued)
    }
}

#[derive(Clone, Debug)]
pub struct PlanResult {
    /// Feasible grasps, sorted by devalued quality descending (ties to the
    /// lower restart index).
    pub grasps: Vec<PlannedGrasp>,
    pub stats: PlanStats,
}

struct Candidate {
    grasp: Grasp,
    raw_epsilon: f64,
    devalued: bool,
}

/// Plans up to `n` grasps (one per restart) on a watertight object mesh.
pub fn plan_grasps(
    hand: &HandModel,
    bvh: &TriangleBvh,
    n: usize,
    seed: u64,
    params: &PlanParams,
) -> Result<PlanResult> {
    hand.validate()?;
    params.robustness.validate()?;
    if !bvh.is_watertight() {
        let (b, nm) = crate::mesh::watertight_report(bvh.mesh());
        return Err(CoreError::NotWatertight {
            boundary_edges: b,
            nonmanifold_edges: nm,
        });
    }

    let bb = bvh.mesh().aabb();
    let centroid = bb.center();
    let max_radius = bvh
        .mesh()
        .vertices()
        .iter()
        .map(|v| (v - centroid).norm())
        .fold(0.0, f64::max);
    let torque_scale = 1.0 / max_radius.max(1e-9);

    let outcomes: Vec<std::result::Result<Candidate, &'static str>> = (0..n)
        .into_par_iter()
        .map(|restart| {
            run_restart(
                hand,
                bvh,
                &centroid,
                max_radius,
                torque_scale,
                restart,
                rng::derive_seed_index(seed, "plan/restart", restart as u64),
                params,
            )
        })
        .collect();

    let mut stats = PlanStats {
        attempted: n,
        ..PlanStats::default()
    };
    let mut grasps = Vec::new();
    for (restart, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(c) => grasps.push(PlannedGrasp {
                grasp: c.grasp,
                raw_epsilon: c.raw_epsilon,
                devalued: c.devalued,
                restart,
            }),
            Err("collision") => stats.base_collision_failures += 1,
            Err("no_contact") => stats.no_contact += 1,
            Err(_) => stats.zero_quality += 1,
        }
    }
    grasps.sort_by(|a, b| {
        b.grasp
            .s
            .total_cmp(&a.grasp.s)
            .then(a.restart.cmp(&b.restart))
    });
    Ok(PlanResult { grasps, stats })
}

fn run_restart(
    hand: &HandModel,
    bvh: &TriangleBvh,
    centroid: &Pt3,
    max_radius: f64,
    torque_scale: f64,
    restart: usize,
    seed: u64,
    params: &PlanParams,
) -> std::result::Result<Candidate, &'static str> {
    let mut r = rng::stream(seed, "restart");

    // Approach pose on the inflated bounding sphere, palm +z toward the
    // object center. The first six restarts take the principal axes with
    // zero roll; later ones sample direction and roll at random.
    let (dir, roll_angle) = if restart < 6 {
        let axis = restart / 2;
        let sign = if restart % 2 == 0 { 1.0 } else { -1.0 };
        let mut d = Vec3::zeros();
        d[axis] = sign;
        (d, 0.0)
    } else {
        (random_unit(&mut r), r.gen::<f64>() * std::f64::consts::TAU)
    };
    let standoff = max_radius * 1.5 + 0.15;
    let eye = centroid + dir * standoff;
    let base = crate::sensor::PinholeCamera::look_at(eye, *centroid, Vec3::z());
    let roll = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), roll_angle);
    let pose = Isometry3::from_parts(base.translation, base.rotation * roll);

    // Advance until the base meets the object, then resolve the collision.
    let approach_world = pose.rotation * hand.approach_dir();
    let mut advanced = pose;
    let max_steps = ((standoff + max_radius) / params.approach_step).ceil() as usize;
    let mut hit = false;
    for _ in 0..max_steps {
        if base_collides(hand, &advanced, bvh) {
            hit = true;
            break;
        }
        advanced = Isometry3::from_parts(
            Translation3::from(advanced.translation.vector + approach_world * params.approach_step),
            advanced.rotation,
        );
    }
    if !hit {
        // Never touched: aim the palm plane at the centroid and hope the
        // fingers reach.
        advanced = Isometry3::from_parts(Translation3::from(centroid.coords), pose.rotation);
    }
    let Ok(start_pose) = retreat_hand(hand, &advanced, bvh) else {
        return Err("collision");
    };

    let mut best = match score_pose(hand, bvh, centroid, torque_scale, &start_pose, params) {
        Some(c) => c,
        None => return Err("no_contact"),
    };

    for _ in 0..params.hillclimb_iters {
        let delta_t = Vec3::new(
            gaussian(&mut r) * params.translation_std,
            gaussian(&mut r) * params.translation_std,
            gaussian(&mut r) * params.translation_std,
        );
        let axis = random_unit(&mut r);
        let angle = gaussian(&mut r) * params.rotation_std;
        let rot = UnitQuaternion::from_scaled_axis(axis * angle);
        let perturbed = Isometry3::from_parts(
            Translation3::from(best.grasp.pose.translation.vector + delta_t),
            rot * best.grasp.pose.rotation,
        );
        let Ok(resolved) = retreat_hand(hand, &perturbed, bvh) else {
            continue;
        };
        if let Some(c) = score_pose(hand, bvh, centroid, torque_scale, &resolved, params) {
            let better = (c.grasp.s, c.raw_epsilon) > (best.grasp.s, best.raw_epsilon);
            if better {
                best = c;
            }
        }
    }

    if best.raw_epsilon > 0.0 {
        Ok(best)
    } else {
        Err("zero_quality")
    }
}

fn score_pose(
    hand: &HandModel,
    bvh: &TriangleBvh,
    centroid: &Pt3,
    torque_scale: f64,
    pose: &Isometry3<f64>,
    params: &PlanParams,
) -> Option<Candidate> {
    let q = close_fingers(hand, pose, &hand.preshape_vector(), bvh).ok()?;
    let contacts = detect_contacts(hand, pose, &q, bvh).ok()?;
    if contacts.is_empty() {
        return None;
    }
    let ws = contact_wrenches(
        &contacts,
        params.friction,
        params.cone_edges,
        torque_scale,
        centroid,
    )
    .ok()?;
    let eps = epsilon_quality(&ws);
    let grasp = Grasp {
        pose: *pose,
        q,
        s: eps,
    };
    let outcome = robust_quality(hand, &grasp, bvh, &params.robustness).ok()?;
    Some(Candidate {
        grasp: Grasp {
            pose: *pose,
            q,
            s: outcome.score,
        },
        raw_epsilon: eps,
        devalued: outcome.devalued,
    })
}

fn random_unit(r: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            r.gen::<f64>() * 2.0 - 1.0,
            r.gen::<f64>() * 2.0 - 1.0,
            r.gen::<f64>() * 2.0 - 1.0,
        );
        let n = v.norm_squared();
        if n > 1e-4 && n <= 1.0 {
            return v / n.sqrt();
        }
    }
}

fn gaussian(r: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = r.gen::<f64>().max(1e-12);
    let u2: f64 = r.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Writes grasps as a JSON list of records.
pub fn write_grasps(path: impl AsRef<std::path::Path>, grasps: &[PlannedGrasp]) -> Result<()> {
    let records: Vec<GraspRecord> = grasps.iter().map(|g| g.record()).collect();
    crate::io_util::write_json(path, &records)
}

pub fn read_grasps(path: impl AsRef<std::path::Path>) -> Result<Vec<GraspRecord>> {
    crate::io_util::read_json(path)
}
