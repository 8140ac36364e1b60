//! Whole-robot assembly: places every chain in the body and world frames.
//!
//! Body frame: origin at the pelvis (spine base, between the hind hips),
//! x forward, y left, z up. World frame: same axes, ground plane at z = 0.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::dh::Transform4;
use crate::leg::{leg_fk, LegAngles, LegGeometry, LegId};
use crate::spine::{spine_fk, SpineAngles, SpineGeometry};
use crate::tail::{pitch_points, tail_joint_positions, tail_tip, TailGeometry};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BodyLayout {
    /// Lateral distance of each leg attachment from the spine axis (mm).
    pub hip_half_width: f64,
    /// Tail root distance behind the pelvis (mm).
    pub tail_root_offset: f64,
    pub head_len: f64,
    /// Height of the skull top above the spine axis (mm).
    pub head_top: f64,
}

impl Default for BodyLayout {
    fn default() -> Self {
        Self { hip_half_width: 40.0, tail_root_offset: 20.0, head_len: 120.0, head_top: 30.0 }
    }
}

/// Segment masses in kg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Masses {
    pub head: f64,
    pub torso: [f64; 5],
    /// LQ, RQ, LH, RH.
    pub legs: [f64; 4],
    pub tail_driven: f64,
    pub tail_tip: f64,
}

impl Default for Masses {
    fn default() -> Self {
        Self { head: 0.4, torso: [0.3; 5], legs: [0.15; 4], tail_driven: 0.35, tail_tip: 0.1 }
    }
}

impl Masses {
    pub fn all(&self) -> Vec<f64> {
        let mut v = vec![self.head];
        v.extend(self.torso);
        v.extend(self.legs);
        v.push(self.tail_driven);
        v.push(self.tail_tip);
        v
    }

    pub fn total(&self) -> f64 {
        self.all().iter().sum()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            head: self.head * k,
            torso: self.torso.map(|m| m * k),
            legs: self.legs.map(|m| m * k),
            tail_driven: self.tail_driven * k,
            tail_tip: self.tail_tip * k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotModel {
    pub leg: LegGeometry,
    pub spine: SpineGeometry,
    pub tail: TailGeometry,
    pub layout: BodyLayout,
    pub masses: Masses,
}

impl RobotModel {
    pub fn validate(&self) -> Result<()> {
        self.leg.validate()?;
        self.spine.validate()?;
        self.tail.validate()?;
        if let Some(m) = self.masses.all().into_iter().find(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidParameter(format!("segment mass {m} must be > 0")));
        }
        let l = &self.layout;
        if [l.hip_half_width, l.tail_root_offset, l.head_len, l.head_top].iter().any(|v| !(*v >= 0.0 && v.is_finite()))
        {
            return Err(Error::InvalidParameter("body layout lengths must be ≥ 0".into()));
        }
        Ok(())
    }

    /// Every length multiplied by `k`; angles and masses unchanged.
    pub fn scaled(&self, k: f64) -> Self {
        let mut tail = self.tail;
        tail.anchor_offset *= k;
        tail.hinge_gap *= k;
        tail.segment_len *= k;
        tail.pulley_radius *= k;
        tail.cable_len *= k;
        tail.underdrive_len *= k;
        Self {
            leg: self.leg.scaled(k),
            spine: self.spine.scaled(k),
            tail,
            layout: BodyLayout {
                hip_half_width: self.layout.hip_half_width * k,
                tail_root_offset: self.layout.tail_root_offset * k,
                head_len: self.layout.head_len * k,
                head_top: self.layout.head_top * k,
            },
            masses: self.masses,
        }
    }
}

/// Pelvis placement in the world. Pitch is nose-up positive, roll is about
/// the body x axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BasePose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub height: f64,
    pub pitch: f64,
}

impl BasePose {
    pub fn transform(&self) -> Transform4 {
        Transform4::translation_of(Vector3::new(self.x, self.y, self.height))
            * Transform4::rot_z(self.heading)
            * Transform4::rot_y(-self.pitch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Posture {
    pub legs: [LegAngles; 4],
    pub spine: SpineAngles,
    pub tail_yaw: f64,
    pub tail_pitch: f64,
}

/// Rotation taking the z-down kinematic convention (x fwd, y right, z down)
/// to the body convention (x fwd, y left, z up).
fn flip() -> Transform4 {
    Transform4::rot_x(std::f64::consts::PI)
}

/// Columns are the leg base axes expressed in its attachment frame.
fn leg_base_rotation(leg: LegId) -> Matrix3<f64> {
    let s = if leg.is_right() { -1.0 } else { 1.0 };
    #[rustfmt::skip]
    let m = Matrix3::new(
        0.0, s,   0.0,
        s,   0.0, 0.0,
        0.0, 0.0, -1.0,
    );
    m
}

/// Spine frames `⁰T₁ … ⁰T₅` converted to the body convention.
pub fn spine_frames_body(geom: &SpineGeometry, q: &SpineAngles) -> Vec<Transform4> {
    let f = flip();
    geom.chain().frames(&q.0).expect("five spine values").into_iter().map(|t| f * t * f).collect()
}

/// Shoulder girdle frame: head-end position, heading only (kept level).
pub fn girdle_frame(geom: &SpineGeometry, q: &SpineAngles) -> Transform4 {
    let f = flip();
    let head = f * spine_fk(geom, q) * f;
    let r = head.rotation();
    let heading = r[(1, 0)].atan2(r[(0, 0)]);
    Transform4::translation_of(head.translation()) * Transform4::rot_z(heading)
}

/// Leg base frame (the D-H base of that leg) in the body frame.
pub fn leg_base_frame(model: &RobotModel, spine: &SpineAngles, leg: LegId) -> Transform4 {
    let side = if leg.is_right() { -1.0 } else { 1.0 };
    let mount = if leg.is_front() { girdle_frame(&model.spine, spine) } else { Transform4::identity() };
    mount * Transform4::from_parts(leg_base_rotation(leg), Vector3::new(0.0, side * model.layout.hip_half_width, 0.0))
}

/// Tail root frame in the body frame: X backward, Y right, Z up.
pub fn tail_root_frame(model: &RobotModel) -> Transform4 {
    #[rustfmt::skip]
    let r = Matrix3::new(
        -1.0, 0.0, 0.0,
        0.0, -1.0, 0.0,
        0.0, 0.0, 1.0,
    );
    Transform4::from_parts(r, Vector3::new(-model.layout.tail_root_offset, 0.0, 0.0))
}

/// World-frame points of a posed robot.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyPoints {
    pub feet: [Vector3<f64>; 4],
    pub hips: [Vector3<f64>; 4],
    /// Pelvis, then the five spine joints.
    pub spine_nodes: Vec<Vector3<f64>>,
    /// Spine end, head tip, and the two skull-top corners.
    pub head: [Vector3<f64>; 4],
    pub tail_root: Vector3<f64>,
    pub tail_joints: Vec<Vector3<f64>>,
    pub tail_tip: Vector3<f64>,
    /// Segment centroids in the order of [`Masses::all`].
    pub centroids: Vec<Vector3<f64>>,
}

impl BodyPoints {
    /// Highest point of the skull.
    pub fn head_top_height(&self) -> f64 {
        self.head.iter().map(|p| p.z).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn pose_robot(model: &RobotModel, posture: &Posture, base: &BasePose) -> Result<BodyPoints> {
    let world = base.transform();
    let frames = spine_frames_body(&model.spine, &posture.spine);

    let mut spine_nodes = vec![world.translation()];
    spine_nodes.extend(frames.iter().map(|t| world.transform_point(&t.translation())));

    let head_end = world * *frames.last().expect("five frames");
    let (hl, ht) = (model.layout.head_len, model.layout.head_top);
    let head = [
        head_end.translation(),
        head_end.transform_point(&Vector3::new(hl, 0.0, 0.0)),
        head_end.transform_point(&Vector3::new(0.0, 0.0, ht)),
        head_end.transform_point(&Vector3::new(hl, 0.0, ht)),
    ];

    let mut feet = [Vector3::zeros(); 4];
    let mut hips = [Vector3::zeros(); 4];
    let mut leg_centroids = [Vector3::zeros(); 4];
    let g = &model.leg;
    for leg in LegId::ALL {
        let i = leg.index();
        let q = &posture.legs[i];
        let base_t = world * leg_base_frame(model, &posture.spine, leg);
        let axis = Vector3::new(g.hip_offset, 0.0, 0.0);
        let knee_local = {
            let (s1, c1) = q.hip_yaw.sin_cos();
            let (s2, c2) = q.hip_pitch.sin_cos();
            Vector3::new(g.hip_offset + c1 * g.femur * c2, s1 * g.femur * c2, g.femur * s2)
        };
        let foot_local = leg_fk(g, q).position.to_vector();
        let pts = [Vector3::zeros(), axis, knee_local, foot_local];
        let lens = [g.hip_offset, g.femur, g.tibia];
        let total: f64 = lens.iter().sum();
        let mut c = Vector3::zeros();
        for k in 0..3 {
            c += (pts[k] + pts[k + 1]) * 0.5 * lens[k] / total;
        }
        hips[i] = base_t.translation();
        feet[i] = base_t.transform_point(&foot_local);
        leg_centroids[i] = base_t.transform_point(&c);
    }

    let tail_t = world * tail_root_frame(model);
    let planar = tail_joint_positions(&model.tail, posture.tail_yaw)?;
    let tip_planar = tail_tip(&model.tail, posture.tail_yaw)?;
    let tail_joints: Vec<_> =
        pitch_points(&planar, posture.tail_pitch).iter().map(|p| tail_t.transform_point(p)).collect();
    let tail_tip = tail_t.transform_point(&pitch_points(&[tip_planar], posture.tail_pitch)[0]);
    let tail_root = tail_t.translation();

    let mut centroids = Vec::with_capacity(13);
    centroids.push((head[0] + head[1]) * 0.5);
    for w in spine_nodes.windows(2) {
        centroids.push((w[0] + w[1]) * 0.5);
    }
    centroids.extend(leg_centroids);
    let mut driven = tail_root;
    for p in &tail_joints {
        driven += p;
    }
    centroids.push(driven / (tail_joints.len() + 1) as f64);
    let last = *tail_joints.last().expect("at least one tail joint");
    centroids.push((last + tail_tip) * 0.5);

    Ok(BodyPoints { feet, hips, spine_nodes, head, tail_root, tail_joints, tail_tip, centroids })
}

/// World height of the tail root and the pitch already imposed on it.
pub fn tail_root_height(model: &RobotModel, base: &BasePose) -> f64 {
    (base.transform() * tail_root_frame(model)).translation().z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leg::{leg_ik, AnklePolicy, FootPosition};

    fn crawl_posture(model: &RobotModel) -> Posture {
        let q = *leg_ik(&model.leg, &FootPosition::new(156.0, 0.0, 89.0), AnklePolicy::FootFlat).unwrap().primary();
        Posture { legs: [q; 4], ..Default::default() }
    }

    #[test]
    fn neutral_feet_on_ground_and_outboard() {
        let model = RobotModel::default();
        let base = BasePose { height: 89.0, ..Default::default() };
        let pts = pose_robot(&model, &crawl_posture(&model), &base).unwrap();
        for leg in LegId::ALL {
            let f = pts.feet[leg.index()];
            assert!(f.z.abs() < 1e-9, "{leg:?} foot z {}", f.z);
            let lateral = if leg.is_right() { -f.y } else { f.y };
            assert!((lateral - (40.0 + 156.0)).abs() < 1e-9);
            let x = if leg.is_front() { 292.5 } else { 0.0 };
            assert!((f.x - x).abs() < 1e-9);
        }
        assert!((pts.head_top_height() - (89.0 + 30.0)).abs() < 1e-9);
        assert!((pts.tail_tip.x + 20.0 + 22.0 + 5.0 * 44.0 + 120.0).abs() < 1e-9);
        assert_eq!(pts.centroids.len(), model.masses.all().len());
    }

    #[test]
    fn right_bend_moves_head_right() {
        let model = RobotModel::default();
        let mut p = crawl_posture(&model);
        p.spine = SpineAngles([0.1, 0.0, 0.1, 0.0, 0.1]);
        let pts = pose_robot(&model, &p, &BasePose::default()).unwrap();
        assert!(pts.head[0].y < 0.0);
        // left shoulder swings forward on a right bend
        assert!(pts.hips[LegId::LQ.index()].x > pts.hips[LegId::RQ.index()].x);
    }

    #[test]
    fn tail_pitch_lowers_tip() {
        let model = RobotModel::default();
        let mut p = crawl_posture(&model);
        p.tail_pitch = 0.2;
        let pts = pose_robot(&model, &p, &BasePose::default()).unwrap();
        assert!(pts.tail_tip.z < 0.0);
        p.tail_yaw = 0.3;
        let pts = pose_robot(&model, &p, &BasePose::default()).unwrap();
        // positive tail bend swings the tip to the robot's right
        assert!(pts.tail_tip.y < 0.0);
    }

    #[test]
    fn nose_up_pitch_raises_head() {
        let model = RobotModel::default();
        let p = crawl_posture(&model);
        let base = BasePose { pitch: 0.3, ..Default::default() };
        let pts = pose_robot(&model, &p, &base).unwrap();
        assert!((pts.head[0].z - 292.5 * 0.3f64.sin()).abs() < 1e-9);
        assert!((tail_root_height(&model, &base) + 20.0 * 0.3f64.sin()).abs() < 1e-9);
    }
}
