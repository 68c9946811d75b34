//! Analytic grasp stack: hand model, contact detection, wrench-space quality,
//! pose-uncertainty robustness, and a random-restart grasp planner.

pub mod hand;
pub mod kinematics;
pub mod planner;
pub mod quality;
pub mod robust;
pub mod wrench;

use nalgebra::Isometry3;
use serde::{Deserialize, Serialize};

use crate::geom::{Pt3, Vec3};

pub use hand::{ContactPoint, FingerModel, HandModel};
pub use planner::{plan_grasps, PlanParams, PlanResult, PlanStats};
pub use quality::epsilon_quality;
pub use robust::{robust_quality, RobustnessOutcome, RobustnessParams};
pub use wrench::{contact_wrenches, WrenchSet};

/// Number of actuated joints: 4 fingers x 3 joints.
pub const JOINT_COUNT: usize = 12;
pub const FINGER_COUNT: usize = 4;

pub type JointVector = [f64; JOINT_COUNT];

/// A grasp: 6D hand pose (palm -> object frame), joint configuration, and a
/// scalar quality. `s` stores the robustness-adjusted quality; the raw
/// epsilon is tracked alongside wherever both matter.
#[derive(Clone, Debug)]
pub struct Grasp {
    pub pose: Isometry3<f64>,
    pub q: JointVector,
    pub s: f64,
}

/// A detected finger-object contact.
#[derive(Clone, Copy, Debug)]
pub struct Contact {
    /// On the object surface, object frame.
    pub position: Pt3,
    /// Unit normal pointing into the object.
    pub normal: Vec3,
    pub finger: u8,
    pub link: u8,
    pub is_central: bool,
}

/// Serialized grasp record (pose as a 4x4 row-major matrix).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraspRecord {
    pub pose: [[f64; 4]; 4],
    pub q: Vec<f64>,
    pub s: f64,
    pub raw_epsilon: f64,
    pub devalued: bool,
}

impl GraspRecord {
    pub fn new(grasp: &Grasp, raw_epsilon: f64, devalued: bool) -> Self {
        let m = grasp.pose.to_homogeneous();
        let mut pose = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                pose[i][j] = m[(i, j)];
            }
        }
        GraspRecord {
            pose,
            q: grasp.q.to_vec(),
            s: grasp.s,
            raw_epsilon,
            devalued,
        }
    }

    pub fn grasp(&self) -> crate::error::Result<Grasp> {
        let mut m = nalgebra::Matrix4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                m[(i, j)] = self.pose[i][j];
            }
        }
        let pose = nalgebra::try_convert::<_, Isometry3<f64>>(m).ok_or_else(|| {
            crate::error::CoreError::Precondition("grasp pose is not rigid".into())
        })?;
        if self.q.len() != JOINT_COUNT {
            return Err(crate::error::CoreError::DimensionMismatch(format!(
                "grasp has {} joints, expected {JOINT_COUNT}",
                self.q.len()
            )));
        }
        let mut q = [0.0; JOINT_COUNT];
        q.copy_from_slice(&self.q);
        Ok(Grasp {
            pose,
            q,
            s: self.s,
        })
    }
}
