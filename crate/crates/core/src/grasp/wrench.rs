//! Contact wrench construction under the hard-finger Coulomb model.

use nalgebra::Vector6;

use crate::error::{CoreError, Result};
use crate::geom::{Pt3, Vec3};
use crate::grasp::Contact;

/// Discretized grasp wrench set: `m` friction-cone edge wrenches per contact
/// (a single normal wrench when frictionless), torques scaled by `lambda`.
#[derive(Clone, Debug)]
pub struct WrenchSet {
    pub wrenches: Vec<Vector6<f64>>,
    pub friction: f64,
    pub cone_edges: u32,
    pub torque_scale: f64,
}

/// Builds the wrench set of a contact configuration about `origin`.
///
/// Each contact contributes unit forces on its friction-cone boundary; the
/// paired torque is `lambda * ((p - origin) x f)`.
pub fn contact_wrenches(
    contacts: &[Contact],
    friction: f64,
    cone_edges: u32,
    torque_scale: f64,
    origin: &Pt3,
) -> Result<WrenchSet> {
    if friction < 0.0 {
        return Err(CoreError::Precondition(format!(
            "friction coefficient must be non-negative, got {friction}"
        )));
    }
    if friction > 0.0 && cone_edges < 3 {
        return Err(CoreError::Precondition(format!(
            "need at least 3 cone edges, got {cone_edges}"
        )));
    }
    let mut wrenches = Vec::new();
    for c in contacts {
        let n = c.normal;
        let arm = c.position - origin;
        let mut push = |f: Vec3| {
            let torque = arm.cross(&f) * torque_scale;
            wrenches.push(Vector6::new(f.x, f.y, f.z, torque.x, torque.y, torque.z));
        };
        if friction == 0.0 {
            push(n);
            continue;
        }
        let (t1, t2) = tangent_basis(&n);
        let scale = 1.0 / (1.0 + friction * friction).sqrt();
        for k in 0..cone_edges {
            let phi = std::f64::consts::TAU * f64::from(k) / f64::from(cone_edges);
            let f = (n + (t1 * phi.cos() + t2 * phi.sin()) * friction) * scale;
            push(f);
        }
    }
    Ok(WrenchSet {
        wrenches,
        friction,
        cone_edges,
        torque_scale,
    })
}

/// Deterministic orthonormal basis of the plane perpendicular to `n`.
pub fn tangent_basis(n: &Vec3) -> (Vec3, Vec3) {
    let helper = if n.x.abs() < 0.9 {
        Vec3::x()
    } else {
        Vec3::y()
    };
    let t1 = n.cross(&helper).normalize();
    let t2 = n.cross(&t1);
    (t1, t2)
}
