//! Parametric four-finger, twelve-joint hand model.
//!
//! Palm frame convention: +z is the approach direction, fingers attach at
//! z = 0 and point along +z when their joints are at zero. Each finger has
//! three revolute joints curling about its local +y axis, so positive angles
//! close the finger toward the opposing side. Contact points live on the
//! inner pad (+x in link frames); pad centerline points carry `is_central`,
//! lateral points do not.

use nalgebra::{Isometry3, Matrix3, Rotation3, Translation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geom::Vec3;
use crate::grasp::{JointVector, FINGER_COUNT, JOINT_COUNT};
use crate::io_util;

pub const JOINTS_PER_FINGER: usize = 3;

/// A potential contact point in its link frame.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ContactPoint {
    pub link: u8,
    pub position: [f64; 3],
    pub is_central: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FingerModel {
    /// palm -> finger-base, 4x4 row-major.
    pub base: [[f64; 4]; 4],
    pub link_lengths: [f64; JOINTS_PER_FINGER],
    /// (lower, upper) per joint, radians.
    pub joint_limits: [(f64, f64); JOINTS_PER_FINGER],
    pub contacts: Vec<ContactPoint>,
}

impl FingerModel {
    pub fn base_isometry(&self) -> Result<Isometry3<f64>> {
        iso_from_rows(&self.base)
            .ok_or_else(|| CoreError::Precondition("finger base is not a rigid transform".into()))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HandModel {
    pub fingers: Vec<FingerModel>,
    /// Approach direction in the palm frame (unit).
    pub approach: [f64; 3],
    /// Collision proxy: box half-extents and palm -> box-center transform.
    pub base_half_extents: [f64; 3],
    pub base_offset: [[f64; 4]; 4],
    /// Joint configuration the planner opens to before closing.
    pub preshape: Vec<f64>,
    /// Closing step per joint per iteration, radians.
    pub closing_step: f64,
    /// A contact point within this distance of the surface counts as
    /// touching, meters.
    pub contact_tolerance: f64,
}

impl HandModel {
    pub fn validate(&self) -> Result<()> {
        if self.fingers.len() != FINGER_COUNT {
            return Err(CoreError::Precondition(format!(
                "hand must have {FINGER_COUNT} fingers, got {}",
                self.fingers.len()
            )));
        }
        if self.preshape.len() != JOINT_COUNT {
            return Err(CoreError::Precondition(format!(
                "preshape must have {JOINT_COUNT} joints"
            )));
        }
        for (fi, f) in self.fingers.iter().enumerate() {
            f.base_isometry()?;
            for (j, (lo, hi)) in f.joint_limits.iter().enumerate() {
                if !(lo < hi) {
                    return Err(CoreError::Precondition(format!(
                        "finger {fi} joint {j}: limits [{lo}, {hi}] invalid"
                    )));
                }
            }
            if !f.contacts.iter().any(|c| c.is_central) {
                return Err(CoreError::Precondition(format!(
                    "finger {fi} has no central contact point"
                )));
            }
            if f.contacts.iter().any(|c| usize::from(c.link) >= JOINTS_PER_FINGER) {
                return Err(CoreError::Precondition(format!(
                    "finger {fi} has a contact on a non-existent link"
                )));
            }
        }
        let a = Vec3::new(self.approach[0], self.approach[1], self.approach[2]);
        if (a.norm() - 1.0).abs() > 1e-9 {
            return Err(CoreError::Precondition(
                "approach direction must be unit length".into(),
            ));
        }
        if !(self.closing_step > 0.0) || !(self.contact_tolerance > 0.0) {
            return Err(CoreError::Precondition(
                "closing step and contact tolerance must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn approach_dir(&self) -> Vec3 {
        Vec3::new(self.approach[0], self.approach[1], self.approach[2])
    }

    pub fn base_offset_isometry(&self) -> Isometry3<f64> {
        iso_from_rows(&self.base_offset).expect("validated on construction")
    }

    pub fn preshape_vector(&self) -> JointVector {
        let mut q = [0.0; JOINT_COUNT];
        q.copy_from_slice(&self.preshape);
        q
    }

    pub fn joint_limits(&self, joint: usize) -> (f64, f64) {
        let finger = joint / JOINTS_PER_FINGER;
        let j = joint % JOINTS_PER_FINGER;
        self.fingers[finger].joint_limits[j]
    }

    pub fn clamp_joints(&self, q: &JointVector) -> JointVector {
        let mut out = *q;
        for (i, v) in out.iter_mut().enumerate() {
            let (lo, hi) = self.joint_limits(i);
            *v = v.clamp(lo, hi);
        }
        out
    }

    pub fn joints_in_limits(&self, q: &JointVector) -> Result<()> {
        for (i, v) in q.iter().enumerate() {
            let (lo, hi) = self.joint_limits(i);
            if *v < lo - 1e-12 || *v > hi + 1e-12 {
                return Err(CoreError::JointOutOfLimits {
                    joint: i,
                    value: *v,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        io_util::write_json(path, self)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let hand: HandModel = io_util::read_json(path)?;
        hand.validate()?;
        Ok(hand)
    }
}

fn rows_from_iso(iso: &Isometry3<f64>) -> [[f64; 4]; 4] {
    let m = iso.to_homogeneous();
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = m[(i, j)];
        }
    }
    out
}

fn iso_from_rows(rows: &[[f64; 4]; 4]) -> Option<Isometry3<f64>> {
    let mut m = nalgebra::Matrix4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            m[(i, j)] = rows[i][j];
        }
    }
    nalgebra::try_convert(m)
}

/// Contact layout of one link: front-pad points (central - they represent
/// full pad engagement) and side-surface points (non-central - a finger
/// touching only through them is sliding along the object with its side).
fn link_contacts(link: u8, length: f64, pad_offset: f64, half_width: f64) -> Vec<ContactPoint> {
    vec![
        ContactPoint {
            link,
            position: [pad_offset, 0.0, 0.5 * length],
            is_central: true,
        },
        ContactPoint {
            link,
            position: [pad_offset, half_width * 0.4, 0.5 * length],
            is_central: false,
        },
        ContactPoint {
            link,
            position: [pad_offset, -half_width * 0.4, 0.5 * length],
            is_central: false,
        },
        ContactPoint {
            link,
            position: [0.002, half_width, 0.5 * length],
            is_central: false,
        },
        ContactPoint {
            link,
            position: [0.002, -half_width, 0.5 * length],
            is_central: false,
        },
    ]
}

/// Default hand: three fingers opposing a thumb, 5/3/2.5 cm links.
pub fn default_hand() -> HandModel {
    let link_lengths = [0.05, 0.03, 0.025];
    let joint_limits = [(-0.17, 1.75); 3];
    let pad = 0.008;
    let half_width = 0.0075;

    let mut contacts = Vec::new();
    for (link, len) in link_lengths.iter().enumerate() {
        contacts.extend(link_contacts(link as u8, *len, pad, half_width));
    }
    // Fingertip point on the distal pad.
    contacts.push(ContactPoint {
        link: 2,
        position: [pad, 0.0, 0.9 * link_lengths[2]],
        is_central: true,
    });

    // Three fingers on +x curling toward -x (base rotated 180 degrees about
    // z), thumb on -x curling toward +x.
    let spread = 0.03;
    let mount = 0.038;
    let flip = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(
        Matrix3::from_columns(&[
            -Vec3::new(1.0, 0.0, 0.0),
            -Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ]),
    ));
    let mut fingers = Vec::new();
    for y in [-spread, 0.0, spread] {
        let iso = Isometry3::from_parts(Translation3::new(mount, y, 0.0), flip);
        fingers.push(FingerModel {
            base: rows_from_iso(&iso),
            link_lengths,
            joint_limits,
            contacts: contacts.clone(),
        });
    }
    let thumb = Isometry3::from_parts(
        Translation3::new(-mount, 0.0, 0.0),
        UnitQuaternion::identity(),
    );
    fingers.push(FingerModel {
        base: rows_from_iso(&thumb),
        link_lengths,
        joint_limits,
        contacts,
    });

    let base_box = Isometry3::translation(0.0, 0.0, -0.012);
    let hand = HandModel {
        fingers,
        approach: [0.0, 0.0, 1.0],
        base_half_extents: [0.055, 0.045, 0.012],
        base_offset: rows_from_iso(&base_box),
        // Splayed open: widens the catch window before closing.
        preshape: vec![-0.17; JOINT_COUNT],
        closing_step: 0.5_f64.to_radians(),
        contact_tolerance: 0.001,
    };
    hand.validate().expect("default hand is valid");
    hand
}
