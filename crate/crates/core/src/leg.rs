//! Forward and closed-form inverse kinematics of one leg.
//!
//! The leg base frame sits at the body attachment point with x pointing
//! outward, z pointing down and y = z × x (forward for left legs, rearward
//! for right legs). The coincident hip yaw and hip pitch axes sit
//! `hip_offset` out along x; then come femur, knee pitch, tibia and an ankle
//! pitch that orients the sole without moving the foot point.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::dh::{chain_fk, JointRow, KinematicChain, Transform4};
use crate::{Error, Result};

/// Slack allowed on arccos arguments before a target counts as unreachable.
pub const ACOS_CLAMP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LegId {
    /// left front
    LQ,
    /// right front
    RQ,
    /// left hind
    LH,
    /// right hind
    RH,
}

impl LegId {
    pub const ALL: [LegId; 4] = [LegId::LQ, LegId::RQ, LegId::LH, LegId::RH];

    pub fn index(self) -> usize {
        match self {
            LegId::LQ => 0,
            LegId::RQ => 1,
            LegId::LH => 2,
            LegId::RH => 3,
        }
    }

    pub fn is_right(self) -> bool {
        matches!(self, LegId::RQ | LegId::RH)
    }

    pub fn is_front(self) -> bool {
        matches!(self, LegId::LQ | LegId::RQ)
    }

    pub fn name(self) -> &'static str {
        match self {
            LegId::LQ => "LQ",
            LegId::RQ => "RQ",
            LegId::LH => "LH",
            LegId::RH => "RH",
        }
    }

    pub fn parse(s: &str) -> Option<LegId> {
        LegId::ALL.into_iter().find(|l| l.name().eq_ignore_ascii_case(s))
    }

    /// Maps a position between the left-leg convention and this leg's own
    /// base frame. Right legs negate y; the map is its own inverse.
    pub fn mirror_position(self, p: FootPosition) -> FootPosition {
        if self.is_right() {
            FootPosition::new(p.x, -p.y, p.z)
        } else {
            p
        }
    }

    /// Same as [`LegId::mirror_position`] for joint angles: right legs negate
    /// the hip yaw.
    pub fn mirror_angles(self, q: LegAngles) -> LegAngles {
        if self.is_right() {
            LegAngles { hip_yaw: -q.hip_yaw, ..q }
        } else {
            q
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LegGeometry {
    /// Body attachment point to the hip yaw/pitch axes (mm).
    pub hip_offset: f64,
    pub femur: f64,
    pub tibia: f64,
    /// `[min, max]` per joint: hip yaw, hip pitch, knee, ankle (rad).
    pub limits: [(f64, f64); 4],
}

impl Default for LegGeometry {
    fn default() -> Self {
        Self {
            hip_offset: 70.0,
            femur: 86.0,
            tibia: 89.0,
            limits: [(-FRAC_PI_2, FRAC_PI_2), (-FRAC_PI_2, FRAC_PI_2), (-2.6, 2.6), (-PI, PI)],
        }
    }
}

impl LegGeometry {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("hip_offset", self.hip_offset), ("femur", self.femur), ("tibia", self.tibia)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("leg {name} must be > 0, got {v}")));
            }
        }
        for (i, (lo, hi)) in self.limits.iter().enumerate() {
            if !(lo <= hi) {
                return Err(Error::InvalidParameter(format!("leg joint {} limits inverted", i + 1)));
            }
        }
        Ok(())
    }

    /// D-H rows: hip offset then yaw, a quarter twist into the
    /// pitch plane, femur and tibia.
    pub fn chain(&self) -> KinematicChain {
        KinematicChain::new(
            vec![
                JointRow::revolute(self.hip_offset, 0.0),
                JointRow::revolute(0.0, FRAC_PI_2),
                JointRow::revolute(self.femur, 0.0),
                JointRow::revolute(self.tibia, 0.0),
            ],
            self.limits.to_vec(),
        )
        .expect("leg chain rows are well formed")
    }

    pub fn max_reach(&self) -> f64 {
        self.femur + self.tibia
    }

    pub fn min_reach(&self) -> f64 {
        (self.femur - self.tibia).abs()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { hip_offset: self.hip_offset * k, femur: self.femur * k, tibia: self.tibia * k, limits: self.limits }
    }

    fn within_limits(&self, q: &LegAngles) -> Option<(usize, f64)> {
        q.to_array()
            .into_iter()
            .zip(self.limits)
            .enumerate()
            .find(|(_, (v, (lo, hi)))| v < lo || v > hi)
            .map(|(i, (v, _))| (i, v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LegAngles {
    pub hip_yaw: f64,
    pub hip_pitch: f64,
    pub knee: f64,
    pub ankle: f64,
}

impl LegAngles {
    pub const JOINT_NAMES: [&'static str; 4] = ["hip_yaw", "hip_pitch", "knee", "ankle"];

    pub fn new(hip_yaw: f64, hip_pitch: f64, knee: f64, ankle: f64) -> Self {
        Self { hip_yaw, hip_pitch, knee, ankle }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.hip_yaw, self.hip_pitch, self.knee, self.ankle]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FootPosition {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl FootPosition {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn distance(&self, other: &FootPosition) -> f64 {
        (self.to_vector() - other.to_vector()).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegPose {
    pub position: FootPosition,
    pub transform: Transform4,
}

/// Closed-form foot pose; agrees with the D-H product of [`LegGeometry::chain`].
pub fn leg_fk(geom: &LegGeometry, q: &LegAngles) -> LegPose {
    let (s1, c1) = q.hip_yaw.sin_cos();
    let (s2, c2) = q.hip_pitch.sin_cos();
    let (s23, c23) = (q.hip_pitch + q.knee).sin_cos();
    let (s234, c234) = (q.hip_pitch + q.knee + q.ankle).sin_cos();

    let planar = geom.femur * c2 + geom.tibia * c23;
    let p = Vector3::new(geom.hip_offset + c1 * planar, s1 * planar, geom.femur * s2 + geom.tibia * s23);
    #[rustfmt::skip]
    let r = Matrix3::new(
        c1 * c234, -c1 * s234,  s1,
        s1 * c234, -s1 * s234, -c1,
        s234,       c234,       0.0,
    );
    LegPose { position: FootPosition::from_vector(&p), transform: Transform4::from_parts(r, p) }
}

/// Per-term deviation between the closed form and the D-H chain product.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExpansionReport {
    pub samples: usize,
    /// Max |closed form − product| for n_x … p_z, in that order.
    pub max_term_deviation: [f64; 9],
}

impl ExpansionReport {
    pub const TERMS: [&'static str; 9] = ["n_x", "n_y", "n_z", "o_x", "o_y", "o_z", "p_x", "p_y", "p_z"];

    pub fn max_position_deviation(&self) -> f64 {
        self.max_term_deviation[6..].iter().copied().fold(0.0, f64::max)
    }

    pub fn max_deviation(&self) -> f64 {
        self.max_term_deviation.iter().copied().fold(0.0, f64::max)
    }
}

pub fn expansion_report(geom: &LegGeometry, configs: &[LegAngles]) -> Result<ExpansionReport> {
    let chain = geom.chain();
    let mut out = ExpansionReport { samples: configs.len(), ..Default::default() };
    for q in configs {
        let a = leg_fk(geom, q).transform;
        let b = chain_fk(&chain, &q.to_array())?;
        let (ma, mb) = (a.matrix(), b.matrix());
        let idx = [(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (2, 1), (0, 3), (1, 3), (2, 3)];
        for (k, rc) in idx.into_iter().enumerate() {
            let d = (ma[rc] - mb[rc]).abs();
            out.max_term_deviation[k] = out.max_term_deviation[k].max(d);
        }
    }
    Ok(out)
}

/// How the ankle angle, which does not move the foot point, is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AnklePolicy {
    Fixed(f64),
    /// Keep the sole parallel to the hip-pitch plane: θ₄ = −(θ₂ + θ₃).
    FootFlat,
}

impl Default for AnklePolicy {
    fn default() -> Self {
        AnklePolicy::Fixed(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LegIkSolution {
    /// Knee-positive branch first, then the mirrored knee branch when it is
    /// distinct and inside the limits.
    pub solutions: Vec<LegAngles>,
    /// Foot on the hip-yaw axis; hip yaw was set to zero.
    pub singular: bool,
}

impl LegIkSolution {
    pub fn primary(&self) -> &LegAngles {
        &self.solutions[0]
    }

    /// Solution closest (max-abs joint difference) to `reference`.
    pub fn closest_to(&self, reference: &LegAngles) -> &LegAngles {
        let dist = |q: &LegAngles| {
            q.to_array().iter().zip(reference.to_array()).take(3).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        self.solutions.iter().min_by(|a, b| dist(a).total_cmp(&dist(b))).expect("at least one solution")
    }
}

fn clamped_acos(arg: f64, distance: f64, geom: &LegGeometry) -> Result<f64> {
    if !(-1.0 - ACOS_CLAMP_TOL..=1.0 + ACOS_CLAMP_TOL).contains(&arg) {
        return Err(Error::Unreachable { distance, min: geom.min_reach(), max: geom.max_reach() });
    }
    Ok(arg.clamp(-1.0, 1.0).acos())
}

/// Geometric inverse: hip yaw from the horizontal offset, then the
/// femur/tibia triangle in the vertical plane through hip pitch and foot.
pub fn leg_ik(geom: &LegGeometry, p: &FootPosition, ankle: AnklePolicy) -> Result<LegIkSolution> {
    if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite foot target {p:?}")));
    }
    let (a2, a3) = (geom.femur, geom.tibia);
    let dx = p.x - geom.hip_offset;
    let dy = p.y;
    let horizontal = dx.hypot(dy);
    let singular = horizontal == 0.0;
    let hip_yaw = if singular { 0.0 } else { dy.atan2(dx) };

    let ac_sq = horizontal * horizontal + p.z * p.z;
    let ac = ac_sq.sqrt();
    if ac == 0.0 {
        return Err(Error::Unreachable { distance: 0.0, min: geom.min_reach(), max: geom.max_reach() });
    }
    // interior knee angle ABC and the angle CAB at the hip
    let abc = clamped_acos((a2 * a2 + a3 * a3 - ac_sq) / (2.0 * a2 * a3), ac, geom)?;
    let cab = clamped_acos((a2 * a2 - a3 * a3 + ac_sq) / (2.0 * a2 * ac), ac, geom)?;
    let elevation = p.z.atan2(horizontal);

    let knee = PI - abc;
    let branches = [(elevation - cab, knee), (elevation + cab, -knee)];
    let distinct = knee.abs() > 1e-12;

    let mut solutions = Vec::with_capacity(2);
    let mut first_violation = None;
    for (i, &(hip_pitch, knee)) in branches.iter().enumerate() {
        if i == 1 && !distinct {
            break;
        }
        let ankle = match ankle {
            AnklePolicy::Fixed(v) => v,
            AnklePolicy::FootFlat => -(hip_pitch + knee),
        };
        let q = LegAngles::new(hip_yaw, hip_pitch, knee, ankle);
        match geom.within_limits(&q) {
            None => solutions.push(q),
            Some(v) => {
                first_violation.get_or_insert(v);
            }
        }
    }
    if solutions.is_empty() {
        let (j, value) = first_violation.expect("a branch was rejected");
        let (min, max) = geom.limits[j];
        return Err(Error::JointLimit { joint: LegAngles::JOINT_NAMES[j].to_string(), value, min, max });
    }
    Ok(LegIkSolution { solutions, singular })
}

/// Annulus test on the hip-pitch-to-foot distance; limits are not checked.
pub fn workspace_contains(geom: &LegGeometry, p: &FootPosition) -> bool {
    let dx = p.x - geom.hip_offset;
    let ac = (dx * dx + p.y * p.y + p.z * p.z).sqrt();
    let tol = ACOS_CLAMP_TOL * geom.max_reach();
    ac >= geom.min_reach() - tol && ac <= geom.max_reach() + tol
}

/// Pulls a target back onto the reachable annulus along the ray from the
/// hip-pitch joint. Returns the target and whether it moved.
pub fn clip_to_workspace(geom: &LegGeometry, p: &FootPosition) -> (FootPosition, bool) {
    if workspace_contains(geom, p) {
        return (*p, false);
    }
    let origin = Vector3::new(geom.hip_offset, 0.0, 0.0);
    let v = p.to_vector() - origin;
    let n = v.norm();
    let dir = if n > 0.0 { v / n } else { Vector3::x() };
    let r = n.clamp(geom.min_reach(), geom.max_reach());
    (FootPosition::from_vector(&(origin + dir * r)), true)
}
