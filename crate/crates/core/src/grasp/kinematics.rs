//! Serial-chain kinematics, contact detection, finger closing, and hand-base
//! collision handling.

use nalgebra::{Isometry3, Translation3, UnitQuaternion};

use crate::error::{CoreError, Result};
use crate::geom::{Pt3, Vec3};
use crate::grasp::hand::{HandModel, JOINTS_PER_FINGER};
use crate::grasp::{Contact, JointVector};
use crate::mesh::bvh::TriangleBvh;

/// A hand contact point placed in the object frame, with the pad's pressing
/// direction.
#[derive(Clone, Copy, Debug)]
pub struct PlacedContact {
    pub position: Pt3,
    /// Unit direction the pad presses along (link +x), object frame.
    pub pad_normal: Vec3,
    pub finger: u8,
    pub link: u8,
    pub is_central: bool,
}

/// Joint frames of one finger: `frames[j]` maps link-j coordinates to the
/// object frame (after the joint-j rotation).
fn finger_frames(
    hand: &HandModel,
    finger: usize,
    pose: &Isometry3<f64>,
    q: &JointVector,
) -> [Isometry3<f64>; JOINTS_PER_FINGER] {
    let f = &hand.fingers[finger];
    let mut t = pose * f.base_isometry().expect("validated hand");
    let mut frames = [Isometry3::identity(); JOINTS_PER_FINGER];
    for j in 0..JOINTS_PER_FINGER {
        let angle = q[finger * JOINTS_PER_FINGER + j];
        t *= Isometry3::from_parts(
            Translation3::identity(),
            UnitQuaternion::from_axis_angle(&Vec3::y_axis(), angle),
        );
        frames[j] = t;
        t *= Isometry3::translation(0.0, 0.0, f.link_lengths[j]);
    }
    frames
}

/// Positions all contact points of the hand in the object frame.
pub fn forward_kinematics(
    hand: &HandModel,
    pose: &Isometry3<f64>,
    q: &JointVector,
) -> Result<Vec<PlacedContact>> {
    hand.joints_in_limits(q)?;
    let mut out = Vec::new();
    for finger in 0..hand.fingers.len() {
        let frames = finger_frames(hand, finger, pose, q);
        for c in &hand.fingers[finger].contacts {
            let frame = &frames[usize::from(c.link)];
            out.push(PlacedContact {
                position: frame
                    .transform_point(&Pt3::new(c.position[0], c.position[1], c.position[2])),
                pad_normal: frame.transform_vector(&Vec3::x()),
                finger: finger as u8,
                link: c.link,
                is_central: c.is_central,
            });
        }
    }
    Ok(out)
}

/// Contacts currently touching the surface (pad point within the hand's
/// contact tolerance). Positions snap to the surface and normals point into
/// the object.
pub fn detect_contacts(
    hand: &HandModel,
    pose: &Isometry3<f64>,
    q: &JointVector,
    bvh: &TriangleBvh,
) -> Result<Vec<Contact>> {
    let placed = forward_kinematics(hand, pose, q)?;
    let tol = hand.contact_tolerance;
    let mut out = Vec::new();
    for p in placed {
        if let Some(sp) = bvh.nearest_point(&p.position, tol) {
            let tri_n = bvh.mesh().triangle_normal(sp.triangle as usize);
            let toward_pad = p.position - sp.point;
            let normal = if tri_n.dot(&toward_pad) > 0.0 { -tri_n } else { tri_n };
            out.push(Contact {
                position: sp.point,
                normal,
                finger: p.finger,
                link: p.link,
                is_central: p.is_central,
            });
        }
    }
    Ok(out)
}

/// Which fingers have at least one touching contact.
pub fn fingers_in_contact(contacts: &[Contact], n_fingers: usize) -> Vec<bool> {
    let mut out = vec![false; n_fingers];
    for c in contacts {
        out[usize::from(c.finger)] = true;
    }
    out
}

/// Closes the fingers joint by joint, proximal to distal, in fixed angular
/// steps. A joint stops advancing as soon as any contact point on the links
/// it drives touches the surface (or its limit is reached); more distal
/// joints keep curling, so the hand wraps the object.
pub fn close_fingers(
    hand: &HandModel,
    pose: &Isometry3<f64>,
    q_start: &JointVector,
    bvh: &TriangleBvh,
) -> Result<JointVector> {
    hand.joints_in_limits(q_start)?;
    let tol = hand.contact_tolerance;
    let mut q = *q_start;

    for finger in 0..hand.fingers.len() {
        let f = &hand.fingers[finger];
        for j in 0..JOINTS_PER_FINGER {
            let joint = finger * JOINTS_PER_FINGER + j;
            let (_, upper) = f.joint_limits[j];
            loop {
                if suffix_touches(hand, finger, j, pose, &q, bvh, tol) {
                    break;
                }
                if q[joint] >= upper {
                    break;
                }
                q[joint] = (q[joint] + hand.closing_step).min(upper);
            }
        }
    }
    Ok(q)
}

/// True when any contact point on links >= `from_link` of `finger` is within
/// `tol` of the surface.
fn suffix_touches(
    hand: &HandModel,
    finger: usize,
    from_link: usize,
    pose: &Isometry3<f64>,
    q: &JointVector,
    bvh: &TriangleBvh,
    tol: f64,
) -> bool {
    let frames = finger_frames(hand, finger, pose, q);
    for c in &hand.fingers[finger].contacts {
        if usize::from(c.link) < from_link {
            continue;
        }
        let p = frames[usize::from(c.link)]
            .transform_point(&Pt3::new(c.position[0], c.position[1], c.position[2]));
        if bvh.nearest_point(&p, tol).is_some() {
            return true;
        }
    }
    false
}

/// True when the hand-base collision box intersects (or is inside) the
/// object.
pub fn base_collides(hand: &HandModel, pose: &Isometry3<f64>, bvh: &TriangleBvh) -> bool {
    let box_pose = pose * hand.base_offset_isometry();
    let he = hand.base_half_extents;
    if bvh.intersects_obb(&box_pose, &Vec3::new(he[0], he[1], he[2])) {
        return true;
    }
    // Fully-contained case: no triangle crosses the box.
    if bvh.is_watertight() {
        let center = Pt3::from(box_pose.translation.vector);
        return crate::occupancy::occupancy_unchecked(bvh, &center);
    }
    false
}

pub const RETREAT_STEP: f64 = 0.001;
pub const MAX_RETREAT: f64 = 0.5;

/// Moves the hand backward along its approach direction in 1 mm steps until
/// the base no longer collides with the object.
pub fn retreat_hand(
    hand: &HandModel,
    pose: &Isometry3<f64>,
    bvh: &TriangleBvh,
) -> Result<Isometry3<f64>> {
    let back = -(pose.rotation * hand.approach_dir());
    let max_steps = (MAX_RETREAT / RETREAT_STEP).round() as usize;
    for k in 0..=max_steps {
        let candidate = Isometry3::from_parts(
            Translation3::from(pose.translation.vector + back * (k as f64 * RETREAT_STEP)),
            pose.rotation,
        );
        if !base_collides(hand, &candidate, bvh) {
            return Ok(candidate);
        }
    }
    Err(CoreError::NoClearance {
        max_retreat: MAX_RETREAT,
    })
}
