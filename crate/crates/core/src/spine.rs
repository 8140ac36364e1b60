//! Five-joint torso: product-of-links forward kinematics, a damped
//! least-squares position solver, and the yaw/pitch command split.
//!
//! Base frame at the pelvis, x toward the head, y to the right, z down.
//! Joints 1, 3, 5 bend laterally (positive = head to the right), joints 2
//! and 4 bend sagittally (positive = head up).

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, Vector3, Vector5};
use serde::{Deserialize, Serialize};

use crate::dh::{chain_fk, jacobian_numeric, JointRow, KinematicChain, Transform4};
use crate::{Error, Result};

pub const YAW_JOINTS: [usize; 3] = [0, 2, 4];
pub const PITCH_JOINTS: [usize; 2] = [1, 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpineGeometry {
    /// `a_prev` of each row (mm).
    pub links: [f64; 5],
    /// `alpha_prev` of each row (rad).
    pub twists: [f64; 5],
    pub limits: [(f64, f64); 5],
}

impl Default for SpineGeometry {
    fn default() -> Self {
        Self {
            links: [50.5, 60.5, 60.5, 60.5, 60.5],
            twists: [0.0, -FRAC_PI_2, FRAC_PI_2, -FRAC_PI_2, FRAC_PI_2],
            limits: [(-0.5, 0.5); 5],
        }
    }
}

impl SpineGeometry {
    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.links.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidParameter(format!("spine link length {l} must be > 0")));
        }
        if self.limits.iter().any(|(lo, hi)| !(lo <= hi)) {
            return Err(Error::InvalidParameter("spine limits inverted".into()));
        }
        Ok(())
    }

    pub fn chain(&self) -> KinematicChain {
        let rows = self.links.iter().zip(self.twists).map(|(&a, alpha)| JointRow::revolute(a, alpha)).collect();
        KinematicChain::new(rows, self.limits.to_vec()).expect("spine rows are well formed")
    }

    pub fn total_length(&self) -> f64 {
        self.links.iter().sum()
    }

    /// Largest |yaw| and |pitch| totals the equal split can realize.
    pub fn command_bounds(&self) -> (f64, f64) {
        let reach = |idx: &[usize]| {
            idx.iter().map(|&i| self.limits[i].0.abs().min(self.limits[i].1.abs())).fold(f64::INFINITY, f64::min)
                * idx.len() as f64
        };
        (reach(&YAW_JOINTS), reach(&PITCH_JOINTS))
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { links: self.links.map(|l| l * k), ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpineAngles(pub [f64; 5]);

impl SpineAngles {
    pub fn yaw_total(&self) -> f64 {
        YAW_JOINTS.iter().map(|&i| self.0[i]).sum()
    }

    pub fn pitch_total(&self) -> f64 {
        PITCH_JOINTS.iter().map(|&i| self.0[i]).sum()
    }
}

/// Whole-spine bend request; positive yaw bends right, positive pitch lifts
/// the head.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpineCommand {
    pub yaw_total: f64,
    pub pitch_total: f64,
}

/// Head-end frame of the torso.
pub fn spine_fk(geom: &SpineGeometry, q: &SpineAngles) -> Transform4 {
    chain_fk(&geom.chain(), &q.0).expect("five joint values")
}

/// Term-by-term polynomial for the head position as it circulates in print
/// for this torso (link 60.5 mm, base 50.5 mm). It disagrees with the chain
/// product and is kept only to quantify that disagreement.
pub fn printed_head_position(q: &SpineAngles) -> Vector3<f64> {
    let [t1, t2, t3, t4, _] = q.0;
    let (s1, c1) = t1.sin_cos();
    let (s2, c2) = t2.sin_cos();
    let (s3, c3) = t3.sin_cos();
    let (s4, c4) = t4.sin_cos();
    let px = 60.5 * (c1 + c1 * c2 - s1 * s3 - c1 * s2 * s3 - c1 * s2 * s4 + c1 * c2 * c3) + 0.5 * c1 * c2 * c3 + 50.5;
    let py = 60.5 * (s1 + s1 * c2 + c1 * s3 + c1 * c4 * s3 - s1 * s2 * s4 + c2 * c3 * s1) + 0.5 * c1 * c3 * s1;
    let pz = 60.5 * (-s2 - s2 * c3 - c2 * s4 - c3 * c4 * s2);
    Vector3::new(px, py, pz)
}

/// Max head-position deviation of [`printed_head_position`] from the
/// product over `samples`.
pub fn printed_form_deviation(geom: &SpineGeometry, samples: &[SpineAngles]) -> f64 {
    samples.iter().map(|q| (printed_head_position(q) - spine_fk(geom, q).translation()).norm()).fold(0.0, f64::max)
}

/// Split a whole-spine command equally over the yaw and pitch joints.
pub fn command_to_angles(geom: &SpineGeometry, cmd: &SpineCommand) -> Result<SpineAngles> {
    let mut q = [0.0; 5];
    let yaw = cmd.yaw_total / YAW_JOINTS.len() as f64;
    let pitch = cmd.pitch_total / PITCH_JOINTS.len() as f64;
    for &i in &YAW_JOINTS {
        q[i] = yaw;
    }
    for &i in &PITCH_JOINTS {
        q[i] = pitch;
    }
    for (i, v) in q.iter().enumerate() {
        let (min, max) = geom.limits[i];
        if !v.is_finite() || *v < min || *v > max {
            return Err(Error::JointLimit { joint: format!("spine_{}", i + 1), value: *v, min, max });
        }
    }
    Ok(SpineAngles(q))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpineIkResult {
    pub angles: SpineAngles,
    pub converged: bool,
    pub error_mm: f64,
    pub iterations: usize,
}

pub const IK_TOLERANCE_MM: f64 = 1e-3;
pub const IK_MAX_ITERATIONS: usize = 200;

/// Damped least squares on the numeric position Jacobian, with an adaptive
/// damping factor (start 1 mm, halve on improvement, double and retry on
/// regression). Joint values are kept inside their limits.
pub fn spine_ik(geom: &SpineGeometry, target: &Vector3<f64>, seed: &SpineAngles) -> Result<SpineIkResult> {
    if !target.iter().all(|v| v.is_finite()) || !seed.0.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite spine IK input".into()));
    }
    let reach = geom.total_length();
    if target.norm() > reach {
        return Err(Error::Domain(format!(
            "target {:.3} mm from the base exceeds spine length {reach:.3} mm",
            target.norm()
        )));
    }
    let chain = geom.chain();
    let clamp = |q: &mut [f64; 5]| {
        for (v, (lo, hi)) in q.iter_mut().zip(geom.limits) {
            *v = v.clamp(lo, hi);
        }
    };
    let mut q = seed.0;
    clamp(&mut q);
    let err_of = |q: &[f64; 5]| -> Result<Vector3<f64>> { Ok(target - chain_fk(&chain, q)?.translation()) };

    let mut e = err_of(&q)?;
    let mut lambda = 1.0;
    let mut it = 0;
    while e.norm() >= IK_TOLERANCE_MM && it < IK_MAX_ITERATIONS {
        it += 1;
        let mut j = jacobian_numeric(&chain, &q)?;
        // joints resting on a limit and pushed outward are frozen for this step
        let mut dq = Vector5::zeros();
        for _ in 0..5 {
            let jjt: Matrix3<f64> = &j * j.transpose() + Matrix3::identity() * (lambda * lambda);
            let inv = jjt.try_inverse().expect("damped normal matrix is positive definite");
            dq = Vector5::from_iterator((j.transpose() * inv * e).iter().copied());
            let mut frozen = false;
            for (i, (lo, hi)) in geom.limits.iter().enumerate() {
                let blocked = (q[i] <= *lo && dq[i] < 0.0) || (q[i] >= *hi && dq[i] > 0.0);
                if blocked && j.column(i).iter().any(|v| *v != 0.0) {
                    j.column_mut(i).fill(0.0);
                    frozen = true;
                }
            }
            if !frozen {
                break;
            }
        }
        let mut trial = q;
        for (v, d) in trial.iter_mut().zip(dq.iter()) {
            *v += d;
        }
        clamp(&mut trial);
        let trial_e = err_of(&trial)?;
        if trial_e.norm() < e.norm() {
            q = trial;
            e = trial_e;
            lambda *= 0.5;
        } else {
            lambda *= 2.0;
        }
    }
    Ok(SpineIkResult {
        angles: SpineAngles(q),
        converged: e.norm() < IK_TOLERANCE_MM,
        error_mm: e.norm(),
        iterations: it,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_spine() {
        let t = spine_fk(&SpineGeometry::default(), &SpineAngles::default());
        assert!((t.translation() - Vector3::new(292.5, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn joint_roles_follow_twists() {
        let g = SpineGeometry::default();
        for &i in &YAW_JOINTS {
            let mut q = [0.0; 5];
            q[i] = 0.01;
            let p = spine_fk(&g, &SpineAngles(q)).translation();
            assert!(p.z.abs() < 1e-9);
            if i < 4 {
                assert!(p.y > 0.0, "yaw joint {i} bends right");
            }
        }
        for &i in &PITCH_JOINTS {
            let mut q = [0.0; 5];
            q[i] = 0.01;
            let p = spine_fk(&g, &SpineAngles(q)).translation();
            assert!(p.y.abs() < 1e-9);
            assert!(p.z < 0.0, "pitch joint {i} lifts the head (z down)");
        }
    }

    #[test]
    fn equal_split() {
        let g = SpineGeometry::default();
        let q = command_to_angles(&g, &SpineCommand { yaw_total: 0.3, pitch_total: 0.0 }).unwrap();
        for &i in &YAW_JOINTS {
            assert!((q.0[i] - 0.1).abs() < 1e-15);
        }
        for &i in &PITCH_JOINTS {
            assert_eq!(q.0[i], 0.0);
        }
        assert_eq!(command_to_angles(&g, &SpineCommand::default()).unwrap(), SpineAngles::default());
    }

    #[test]
    fn command_sign_convention() {
        let g = SpineGeometry::default();
        let q = command_to_angles(&g, &SpineCommand { yaw_total: 0.3, pitch_total: 0.2 }).unwrap();
        let p = spine_fk(&g, &q).translation();
        assert!(p.y > 0.0);
        assert!(p.z < 0.0);
    }

    #[test]
    fn command_out_of_range() {
        let g = SpineGeometry::default();
        let err = command_to_angles(&g, &SpineCommand { yaw_total: 0.0, pitch_total: 1.2 }).unwrap_err();
        assert!(matches!(err, Error::JointLimit { ref joint, .. } if joint == "spine_2"));
    }

    #[test]
    fn command_is_linear() {
        let g = SpineGeometry::default();
        let c = SpineCommand { yaw_total: 0.21, pitch_total: -0.17 };
        let a = command_to_angles(&g, &c).unwrap();
        let b = command_to_angles(&g, &SpineCommand { yaw_total: 0.42, pitch_total: -0.34 }).unwrap();
        for i in 0..5 {
            assert!((2.0 * a.0[i] - b.0[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn ik_fixed_point() {
        let g = SpineGeometry::default();
        let r = spine_ik(&g, &Vector3::new(292.5, 0.0, 0.0), &SpineAngles::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 0);
        assert!(r.angles.0.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn ik_rejects_far_target() {
        let g = SpineGeometry::default();
        let err = spine_ik(&g, &Vector3::new(400.0, 0.0, 0.0), &SpineAngles::default()).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn printed_form_disagrees_with_product() {
        let g = SpineGeometry::default();
        // already off by 60 mm with the spine straight
        let d = printed_form_deviation(&g, &[SpineAngles::default()]);
        assert!((d - 60.0).abs() < 1e-9);
    }
}
