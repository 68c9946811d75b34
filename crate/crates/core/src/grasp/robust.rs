//! Pose-uncertainty robustness scoring.
//!
//! A grasp is re-simulated under six axis-aligned object translations; if
//! any perturbation bends a joint too far from the original configuration or
//! costs an originally-contacting finger its central contact, the quality is
//! devalued to a fraction of its baseline. Planners that maximize the
//! devalued score therefore avoid grasps that live on object edges.

use nalgebra::{Isometry3, Translation3};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geom::Vec3;
use crate::grasp::hand::HandModel;
use crate::grasp::kinematics::{close_fingers, detect_contacts, fingers_in_contact, retreat_hand};
use crate::grasp::Grasp;
use crate::mesh::bvh::TriangleBvh;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct RobustnessParams {
    /// Object translation magnitude per axis, meters.
    pub translation: f64,
    /// Maximum allowed |q' - q| per joint, radians.
    pub joint_tolerance: f64,
    /// Quality multiplier when any perturbation check fails.
    pub devaluation: f64,
}

impl Default for RobustnessParams {
    fn default() -> Self {
        RobustnessParams {
            translation: 0.02,
            joint_tolerance: 23.0_f64.to_radians(),
            devaluation: 0.3,
        }
    }
}

impl RobustnessParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.translation > 0.0 && self.joint_tolerance > 0.0) {
            return Err(CoreError::Precondition(
                "translation and joint tolerance must be positive".into(),
            ));
        }
        if !(self.devaluation > 0.0 && self.devaluation <= 1.0) {
            return Err(CoreError::Precondition(format!(
                "devaluation must be in (0, 1], got {}",
                self.devaluation
            )));
        }
        Ok(())
    }

    /// The six object translations: one axis, both directions each.
    pub fn translations(&self) -> [Vec3; 6] {
        let t = self.translation;
        [
            Vec3::new(t, 0.0, 0.0),
            Vec3::new(-t, 0.0, 0.0),
            Vec3::new(0.0, t, 0.0),
            Vec3::new(0.0, -t, 0.0),
            Vec3::new(0.0, 0.0, t),
            Vec3::new(0.0, 0.0, -t),
        ]
    }
}

/// Outcome of one perturbation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PerturbationCheck {
    pub translation: [f64; 3],
    pub joint_delta_exceeded: bool,
    pub central_contact_lost: bool,
    pub max_joint_delta: f64,
}

impl PerturbationCheck {
    pub fn failed(&self) -> bool {
        self.joint_delta_exceeded || self.central_contact_lost
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RobustnessOutcome {
    /// Baseline epsilon quality the checks started from.
    pub baseline: f64,
    /// `baseline` when all checks pass, `devaluation * baseline` otherwise.
    pub score: f64,
    pub devalued: bool,
    pub checks: Vec<PerturbationCheck>,
}

/// Runs the six-translation robustness procedure. `grasp.s` is the baseline
/// (raw epsilon) quality; the returned score is either that value or its
/// devaluation, nothing else.
pub fn robust_quality(
    hand: &HandModel,
    grasp: &Grasp,
    bvh: &TriangleBvh,
    params: &RobustnessParams,
) -> Result<RobustnessOutcome> {
    params.validate()?;
    let original_contacts = detect_contacts(hand, &grasp.pose, &grasp.q, bvh)?;
    let original_fingers = fingers_in_contact(&original_contacts, hand.fingers.len());

    let mut checks = Vec::with_capacity(6);
    let mut devalued = false;
    for delta in params.translations() {
        // Translating the object by +delta equals translating the hand by
        // -delta in the object frame.
        let shifted = Isometry3::from_parts(
            Translation3::from(grasp.pose.translation.vector - delta),
            grasp.pose.rotation,
        );
        let resolved = retreat_hand(hand, &shifted, bvh)?;
        let q_new = close_fingers(hand, &resolved, &hand.preshape_vector(), bvh)?;

        let mut max_delta = 0.0f64;
        for (a, b) in q_new.iter().zip(&grasp.q) {
            max_delta = max_delta.max((a - b).abs());
        }
        let joint_delta_exceeded = max_delta >= params.joint_tolerance;

        let contacts_new = detect_contacts(hand, &resolved, &q_new, bvh)?;
        let mut central = vec![false; hand.fingers.len()];
        for c in &contacts_new {
            if c.is_central {
                central[usize::from(c.finger)] = true;
            }
        }
        let central_contact_lost = original_fingers
            .iter()
            .enumerate()
            .any(|(f, had)| *had && !central[f]);

        let check = PerturbationCheck {
            translation: [delta.x, delta.y, delta.z],
            joint_delta_exceeded,
            central_contact_lost,
            max_joint_delta: max_delta,
        };
        devalued |= check.failed();
        checks.push(check);
    }

    let score = if devalued {
        params.devaluation * grasp.s
    } else {
        grasp.s
    };
    Ok(RobustnessOutcome {
        baseline: grasp.s,
        score,
        devalued,
        checks,
    })
}
