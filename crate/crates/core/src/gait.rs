//! Whole-body coordination: limb phases, foot paths, spine and tail signals,
//! the tripod stand sequence, and the swimming midline wave.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::body::{girdle_frame, leg_base_frame, tail_root_height, BasePose, Posture, RobotModel};
use crate::leg::{clip_to_workspace, leg_ik, AnklePolicy, FootPosition, LegAngles, LegGeometry, LegId};
use crate::spine::{command_to_angles, SpineAngles, SpineCommand};
use crate::tail::{ground_contact_pitch, servo_angle};
use crate::{Error, Result};

/// How the trunk helps a leg that has lost a joint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Compensation {
    #[default]
    None,
    /// Leg is held clear of the ground for the whole cycle.
    Carry,
    /// The girdle above the leg is raised during its swing (spine pitch in
    /// front, tail strut behind) so the foot clears the ground.
    GirdleLift,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitParams {
    /// Cycle period (s).
    pub period: f64,
    /// Duty factor.
    pub beta: f64,
    /// Phase offsets for LQ, RQ, LH, RH (cycle fraction).
    pub offsets: [f64; 4],
    pub step_length: f64,
    pub step_height: f64,
    pub spine_yaw_amp: f64,
    pub spine_pitch_amp: f64,
    pub tail_yaw_amp: f64,
    /// Phase of the spine yaw wave relative to the limb cycle (rad).
    pub spine_phase: f64,
    pub tail_drag: bool,
    /// Hip height above ground in the crawl (mm).
    pub body_height: f64,
    /// Outward foot distance from the hip in the leg base frame (mm).
    pub stance_width: f64,
    pub compensation: [Compensation; 4],
}

impl Default for GaitParams {
    fn default() -> Self {
        Self {
            period: 4.0,
            beta: 0.6,
            offsets: [0.0, 0.5, 0.5, 0.0],
            step_length: 60.0,
            step_height: 25.0,
            spine_yaw_amp: 0.26,
            spine_pitch_amp: 0.0,
            tail_yaw_amp: 0.35,
            spine_phase: 0.0,
            tail_drag: true,
            body_height: 89.0,
            stance_width: 156.0,
            compensation: [Compensation::None; 4],
        }
    }
}

impl GaitParams {
    /// Same gait with the spine and tail held still and the tail lifted.
    pub fn locked_trunk(&self) -> Self {
        Self {
            spine_yaw_amp: 0.0,
            spine_pitch_amp: 0.0,
            tail_yaw_amp: 0.0,
            tail_drag: false,
            compensation: [Compensation::None; 4],
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.period > 0.0 && self.period.is_finite()) {
            return bad("period must be > 0");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta must lie in (0, 1)");
        }
        if self.offsets.iter().any(|o| !(*o >= 0.0 && *o < 1.0)) {
            return bad("phase offsets must lie in [0, 1)");
        }
        let lengths = [self.step_length, self.step_height, self.body_height, self.stance_width];
        if lengths.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("gait lengths must be finite and ≥ 0");
        }
        let angles = [self.spine_yaw_amp, self.spine_pitch_amp, self.tail_yaw_amp, self.spine_phase];
        if angles.iter().any(|v| !v.is_finite()) {
            return bad("gait angles must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LegPhase {
    pub stance: bool,
    /// Progress through the current stance or swing window, in [0, 1).
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LimbPhase {
    pub legs: [LegPhase; 4],
}

pub fn limb_phase(params: &GaitParams, t: f64) -> LimbPhase {
    let cycle = t / params.period;
    let legs = params.offsets.map(|off| {
        let u = (cycle - off).rem_euclid(1.0);
        if u < params.beta {
            LegPhase { stance: true, phase: u / params.beta }
        } else {
            LegPhase { stance: false, phase: (u - params.beta) / (1.0 - params.beta) }
        }
    });
    LimbPhase { legs }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootTarget {
    /// In the leg's own base frame.
    pub position: FootPosition,
    pub clipped: bool,
}

/// Foot target for one leg. Stance sweeps the foot straight back by
/// `step_length` at hip height; swing returns it on a half-ellipse of apex
/// `step_height`.
pub fn foot_trajectory(
    params: &GaitParams,
    geom: &LegGeometry,
    leg: LegId,
    phase: LegPhase,
    hip_height: f64,
) -> FootTarget {
    let (l, s) = (params.step_length, phase.phase);
    let (fwd, down) = match params.compensation[leg.index()] {
        Compensation::Carry => (0.0, hip_height - params.step_height),
        _ if phase.stance => (l / 2.0 - l * s, hip_height),
        _ => (-(l / 2.0) * (PI * s).cos(), hip_height - params.step_height * (PI * s).sin()),
    };
    let canonical = FootPosition::new(params.stance_width, fwd, down);
    let (position, clipped) = clip_to_workspace(geom, &leg.mirror_position(canonical));
    if clipped {
        log::debug!("{} foot target clipped to workspace", leg.name());
    }
    FootTarget { position, clipped }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrunkSignals {
    pub spine_yaw: f64,
    pub spine_pitch: f64,
    pub tail_yaw: f64,
    pub tail_pitch: f64,
}

pub fn spine_tail_signals(params: &GaitParams, t: f64) -> TrunkSignals {
    let arg = 2.0 * PI * (t / params.period).rem_euclid(1.0) + params.spine_phase;
    TrunkSignals {
        spine_yaw: params.spine_yaw_amp * arg.sin(),
        spine_pitch: params.spine_pitch_amp * arg.sin(),
        tail_yaw: params.tail_yaw_amp * (arg + PI).sin(),
        tail_pitch: 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordinationFrame {
    pub t: f64,
    pub phase: LimbPhase,
    pub foot_targets: [FootPosition; 4],
    pub clipped: [bool; 4],
    pub leg_angles: [LegAngles; 4],
    /// Legs commanded to bear load.
    pub support: [bool; 4],
    pub spine_command: SpineCommand,
    pub spine_angles: SpineAngles,
    pub tail_yaw: f64,
    pub tail_pitch: f64,
    pub tail_servo_deg: f64,
    pub tail_contact: bool,
    pub pelvis_height: f64,
    /// Nose-up pelvis pitch (rad).
    pub body_pitch: f64,
}

impl CoordinationFrame {
    pub fn posture(&self) -> Posture {
        Posture {
            legs: self.leg_angles,
            spine: self.spine_angles,
            tail_yaw: self.tail_yaw,
            tail_pitch: self.tail_pitch,
        }
    }

    pub fn base(&self) -> BasePose {
        BasePose { height: self.pelvis_height, pitch: self.body_pitch, ..Default::default() }
    }
}

/// Posture the gait treats as neutral for every leg.
pub fn neutral_leg_angles(geom: &LegGeometry, params: &GaitParams) -> Result<LegAngles> {
    let p = FootPosition::new(params.stance_width, 0.0, params.body_height);
    Ok(*leg_ik(geom, &p, AnklePolicy::FootFlat)?.primary())
}

fn solve_leg(geom: &LegGeometry, target: &FootPosition, reference: &LegAngles) -> Result<LegAngles> {
    Ok(*leg_ik(geom, target, AnklePolicy::FootFlat)?.closest_to(reference))
}

/// Raise of the girdle above `leg` demanded by a lift compensation.
fn lift(params: &GaitParams, phase: &LimbPhase, leg: LegId) -> f64 {
    let p = phase.legs[leg.index()];
    if params.compensation[leg.index()] == Compensation::GirdleLift && !p.stance {
        params.step_height * (PI * p.phase).sin()
    } else {
        0.0
    }
}

/// Spine pitch total that puts the girdle `rise` mm above the pelvis.
fn spine_pitch_for_rise(model: &RobotModel, yaw: f64, rise: f64) -> Result<f64> {
    let (_, pitch_max) = model.spine.command_bounds();
    let height = |pitch: f64| -> Result<f64> {
        let q = command_to_angles(&model.spine, &SpineCommand { yaw_total: yaw, pitch_total: pitch })?;
        Ok(girdle_frame(&model.spine, &q).translation().z)
    };
    let (mut lo, mut hi) = (-pitch_max, pitch_max);
    if rise < height(lo)? || rise > height(hi)? {
        return Err(Error::Infeasible(format!("spine cannot raise the girdle by {rise:.1} mm")));
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if height(mid)? < rise {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn coordination_frame(params: &GaitParams, model: &RobotModel, t: f64) -> Result<CoordinationFrame> {
    let phase = limb_phase(params, t);
    let sig = spine_tail_signals(params, t);

    let front_lift = lift(params, &phase, LegId::LQ).max(lift(params, &phase, LegId::RQ));
    let hind_lift = lift(params, &phase, LegId::LH).max(lift(params, &phase, LegId::RH));
    let pelvis_height = params.body_height + hind_lift;

    let mut pitch_total = sig.spine_pitch;
    if front_lift > 0.0 || hind_lift > 0.0 {
        pitch_total += spine_pitch_for_rise(model, sig.spine_yaw, front_lift - hind_lift)?;
    }
    let spine_command = SpineCommand { yaw_total: sig.spine_yaw, pitch_total };
    let spine_angles = command_to_angles(&model.spine, &spine_command)?;
    let girdle_height = pelvis_height + girdle_frame(&model.spine, &spine_angles).translation().z;

    let neutral = neutral_leg_angles(&model.leg, params)?;
    let mut foot_targets = [FootPosition::default(); 4];
    let mut clipped = [false; 4];
    let mut leg_angles = [LegAngles::default(); 4];
    let mut support = [false; 4];
    for leg in LegId::ALL {
        let i = leg.index();
        let hip = if leg.is_front() { girdle_height } else { pelvis_height };
        let target = foot_trajectory(params, &model.leg, leg, phase.legs[i], hip);
        foot_targets[i] = target.position;
        clipped[i] = target.clipped;
        leg_angles[i] = solve_leg(&model.leg, &target.position, &leg.mirror_angles(neutral))?;
        support[i] = phase.legs[i].stance && params.compensation[i] != Compensation::Carry;
    }

    let tail_pitch = if params.tail_drag {
        let base = BasePose { height: pelvis_height, ..Default::default() };
        ground_contact_pitch(&model.tail, sig.tail_yaw, tail_root_height(model, &base), 0.0)?
    } else {
        sig.tail_pitch
    };

    Ok(CoordinationFrame {
        t,
        phase,
        foot_targets,
        clipped,
        leg_angles,
        support,
        spine_command,
        spine_angles,
        tail_yaw: sig.tail_yaw,
        tail_pitch,
        tail_servo_deg: servo_angle(&model.tail, sig.tail_yaw)?,
        tail_contact: params.tail_drag,
        pelvis_height,
        body_pitch: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwimWaveParams {
    pub c1: f64,
    pub c2: f64,
    pub k: f64,
    /// Angular frequency (rad/s).
    pub omega: f64,
    /// Midline length from head (x = 0) to tail tip (mm).
    pub body_length: f64,
}

impl Default for SwimWaveParams {
    fn default() -> Self {
        Self { c1: 0.027, c2: 0.30, k: 0.023, omega: 2.0 * PI, body_length: 800.0 }
    }
}

impl SwimWaveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.body_length > 0.0 && self.body_length.is_finite()) {
            return Err(Error::InvalidParameter("swim body_length must be > 0".into()));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidParameter("swim omega must be > 0".into()));
        }
        if ![self.c1, self.c2, self.k].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("swim coefficients must be finite".into()));
        }
        Ok(())
    }

    /// Wave period 2π/ω (s).
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    /// Amplitude envelope at `x` mm, in mm.
    pub fn envelope(&self, x: f64) -> f64 {
        let xm = x / 1000.0;
        1000.0 * (self.c1 * xm + self.c2 * xm * xm)
    }
}

/// Lateral midline offset (mm) at `x` mm behind the head. The coefficients
/// are taken in SI units, so `x` is converted to meters internally.
pub fn swim_midline(params: &SwimWaveParams, x: f64, t: f64) -> Result<f64> {
    if !(0.0..=params.body_length).contains(&x) {
        return Err(Error::Domain(format!("x = {x} mm outside the body [0, {}]", params.body_length)));
    }
    let xm = x / 1000.0;
    Ok(params.envelope(x) * (params.k * xm + params.omega * t).sin())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StandParams {
    pub pelvis_height: f64,
    /// Final nose-up pelvis pitch (rad).
    pub pelvis_pitch: f64,
    /// Hind foot placement relative to its hip in the world (mm).
    pub foot_forward: f64,
    pub foot_lateral: f64,
    /// Carried front foot depth below the girdle (mm).
    pub front_tuck: f64,
    pub keyframes: usize,
}

impl Default for StandParams {
    fn default() -> Self {
        Self {
            pelvis_height: 130.0,
            pelvis_pitch: 0.5,
            foot_forward: 80.0,
            foot_lateral: 130.0,
            front_tuck: 40.0,
            keyframes: 11,
        }
    }
}

impl StandParams {
    pub fn validate(&self) -> Result<()> {
        if self.keyframes < 2 {
            return Err(Error::InvalidParameter("stand needs at least 2 keyframes".into()));
        }
        let v = [self.pelvis_height, self.pelvis_pitch, self.foot_forward, self.foot_lateral, self.front_tuck];
        if v.iter().any(|x| !x.is_finite()) || self.pelvis_height <= 0.0 {
            return Err(Error::InvalidParameter("stand parameters must be finite, height > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandSequence {
    pub keyframes: Vec<CoordinationFrame>,
}

impl StandSequence {
    pub fn first(&self) -> &CoordinationFrame {
        &self.keyframes[0]
    }

    pub fn last(&self) -> &CoordinationFrame {
        self.keyframes.last().expect("at least two keyframes")
    }
}

fn smoothstep(s: f64) -> f64 {
    s * s * (3.0 - 2.0 * s)
}

fn lerp(a: f64, b: f64, s: f64) -> f64 {
    a + (b - a) * s
}

/// Keyframes from the neutral crawl to a tripod stand on the hind feet and
/// the tail tip, evenly spaced over `duration` seconds.
pub fn stand_sequence(
    model: &RobotModel,
    gait: &GaitParams,
    stand: &StandParams,
    duration: f64,
) -> Result<StandSequence> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidParameter("stand duration must be > 0".into()));
    }
    stand.validate()?;
    let infeasible = |e: Error| match e {
        Error::Infeasible(_) => e,
        other => Error::Infeasible(format!("stand posture not reachable: {other}")),
    };
    let neutral = neutral_leg_angles(&model.leg, gait)?;
    let (_, pitch_max) = model.spine.command_bounds();
    let n = stand.keyframes;
    let mut keyframes = Vec::with_capacity(n);
    for k in 0..n {
        let u = k as f64 / (n - 1) as f64;
        let s = smoothstep(u);
        let base = BasePose {
            height: lerp(gait.body_height, stand.pelvis_height, s),
            pitch: s * stand.pelvis_pitch,
            ..Default::default()
        };
        let spine_command = SpineCommand { yaw_total: 0.0, pitch_total: s * pitch_max };
        let spine_angles = command_to_angles(&model.spine, &spine_command).map_err(infeasible)?;
        let world = base.transform();
        let girdle_height = (world * girdle_frame(&model.spine, &spine_angles)).translation().z;

        let mut foot_targets = [FootPosition::default(); 4];
        let mut leg_angles = [LegAngles::default(); 4];
        let mut clipped = [false; 4];
        let mut support = [k == 0; 4];
        for leg in LegId::ALL {
            let i = leg.index();
            let reference = leg.mirror_angles(neutral);
            let target = if leg.is_front() {
                // the girdle is kept level, so its leg frame depth is vertical
                let down = if k == 0 { girdle_height } else { lerp(gait.body_height, stand.front_tuck, s) };
                leg.mirror_position(FootPosition::new(gait.stance_width, 0.0, down))
            } else {
                support[i] = true;
                let side = if leg.is_right() { -1.0 } else { 1.0 };
                let w = model.layout.hip_half_width;
                let world_foot = Vector3::new(
                    s * stand.foot_forward,
                    side * (w + lerp(gait.stance_width, stand.foot_lateral, s)),
                    0.0,
                );
                let frame = world * leg_base_frame(model, &spine_angles, leg);
                FootPosition::from_vector(&frame.inverse().transform_point(&world_foot))
            };
            foot_targets[i] = target;
            let (p, c) = clip_to_workspace(&model.leg, &target);
            clipped[i] = c;
            if c && !leg.is_front() {
                return Err(Error::Infeasible(format!("{} cannot reach its stand foothold", leg.name())));
            }
            leg_angles[i] = solve_leg(&model.leg, &p, &reference).map_err(infeasible)?;
        }
        let tail_pitch =
            ground_contact_pitch(&model.tail, 0.0, tail_root_height(model, &base), base.pitch).map_err(infeasible)?;
        keyframes.push(CoordinationFrame {
            t: u * duration,
            phase: LimbPhase::default(),
            foot_targets,
            clipped,
            leg_angles,
            support,
            spine_command,
            spine_angles,
            tail_yaw: 0.0,
            tail_pitch,
            tail_servo_deg: 0.0,
            tail_contact: true,
            pelvis_height: base.height,
            body_pitch: base.pitch,
        });
    }
    Ok(StandSequence { keyframes })
}
