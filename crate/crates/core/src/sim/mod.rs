//! Quasi-static whole-robot simulation on flat ground.
//!
//! Each step poses the robot from a coordination frame, keeps loaded feet
//! pinned to their ground anchors by a weighted planar rigid fit of the body,
//! and scores static stability from the support polygon. There is no inertia
//! and no friction model: a foot either holds its anchor or is re-anchored.

pub mod scenario;
pub mod support;

use nalgebra::{Rotation2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::body::{pose_robot, BasePose, BodyPoints, Posture, RobotModel};
use crate::gait::{coordination_frame, neutral_leg_angles, stand_sequence, CoordinationFrame, GaitParams, StandParams};
use crate::leg::{LegAngles, LegId};
use crate::{Error, Result};

pub use support::{
    polygon_area, stability_margin, stability_report, support_polygon, weighted_centroid, StabilityReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    /// Integration step (s).
    pub dt: f64,
    /// Run length (s).
    pub duration: f64,
    /// Fractional loss of forward advance per mm of negative margin.
    pub tilt_coefficient: f64,
    pub tilt_penalty: bool,
    /// Body roll reached when the mass centre is far off the support (rad).
    pub max_tilt: f64,
    /// Roll per mm of negative margin before saturation (rad/mm).
    pub tilt_gain: f64,
    /// Feet lower than this count as touching the ground (mm).
    pub contact_clearance: f64,
    /// A touching swing foot short of its command by more than this is
    /// dragging (mm).
    pub stuck_tolerance: f64,
    /// Fit weight of a dragging foot relative to a stance foot.
    pub stuck_weight: f64,
    /// Fit residual above which an anchored foot slips (mm).
    pub slip_tolerance: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: 0.02,
            duration: 8.0,
            tilt_coefficient: 0.02,
            tilt_penalty: true,
            max_tilt: 0.15,
            tilt_gain: 0.02,
            contact_clearance: 5.0,
            stuck_tolerance: 1.0,
            stuck_weight: 1000.0,
            slip_tolerance: 5.0,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.dt, self.duration, self.contact_clearance, self.stuck_weight, self.slip_tolerance];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(
                "dt, duration, clearance, stuck weight and slip tolerance must be > 0".into(),
            ));
        }
        let non_negative = [self.tilt_coefficient, self.max_tilt, self.tilt_gain, self.stuck_tolerance];
        if non_negative.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter("tilt and stuck parameters must be ≥ 0".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultJoint {
    /// Hip yaw, θ₁.
    Rotational,
    /// Hip pitch, θ₂.
    Pitching,
}

/// A leg joint that ignores commands and stays at its neutral crawl angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub leg: LegId,
    pub joint: FaultJoint,
}

impl FaultSpec {
    /// Parses `LEG:JOINT`, e.g. `LQ:rotational` or `rh:pitching`.
    pub fn parse(s: &str) -> Result<Self> {
        let (leg, joint) = s.split_once(':').ok_or_else(|| Error::Config(format!("fault `{s}` is not LEG:JOINT")))?;
        let leg = LegId::parse(leg.trim()).ok_or_else(|| Error::Config(format!("unknown leg `{leg}`")))?;
        let joint = match joint.trim().to_ascii_lowercase().as_str() {
            "rotational" | "yaw" => FaultJoint::Rotational,
            "pitching" | "pitch" => FaultJoint::Pitching,
            other => return Err(Error::Config(format!("unknown joint role `{other}`"))),
        };
        Ok(Self { leg, joint })
    }

    pub fn label(&self) -> String {
        let joint = match self.joint {
            FaultJoint::Rotational => "rotational",
            FaultJoint::Pitching => "pitching",
        };
        format!("{}:{joint}", self.leg.name())
    }
}

/// Replaces each faulted joint command with the leg's neutral value.
pub fn apply_fault(frame: &CoordinationFrame, faults: &[FaultSpec], neutral: &LegAngles) -> CoordinationFrame {
    let mut out = *frame;
    for f in faults {
        let locked = f.leg.mirror_angles(*neutral);
        let q = &mut out.leg_angles[f.leg.index()];
        match f.joint {
            FaultJoint::Rotational => q.hip_yaw = locked.hip_yaw,
            FaultJoint::Pitching => q.hip_pitch = locked.hip_pitch,
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub t: f64,
    /// Pelvis pose; x, y, heading come from the contact fit.
    pub base: BasePose,
    pub posture: Posture,
    pub feet: [Vector3<f64>; 4],
    /// Feet bearing load (stance or dragging).
    pub contact: [bool; 4],
    /// Swing feet that failed to leave the ground.
    pub stuck: [bool; 4],
    pub anchors: [Option<Vector2<f64>>; 4],
    pub tail_contact: bool,
    pub tail_point: Vector3<f64>,
    pub cog: Vector3<f64>,
    pub margin: f64,
    /// Roll toward the unsupported side (rad).
    pub tilt: f64,
    /// Largest anchor mismatch left by the rigid fit this step (mm).
    pub fit_residual: f64,
    /// Forward progress integrated along the heading (mm).
    pub odometer: f64,
    pub fallen: bool,
}

impl WorldState {
    /// Ground contact points (z = 0).
    pub fn contact_points(&self) -> Vec<Vector3<f64>> {
        let mut v: Vec<_> = (0..4)
            .filter(|i| self.contact[*i])
            .map(|i| {
                let a = self.anchors[i].unwrap_or_else(|| self.feet[i].xy());
                Vector3::new(a.x, a.y, 0.0)
            })
            .collect();
        if self.tail_contact {
            v.push(Vector3::new(self.tail_point.x, self.tail_point.y, 0.0));
        }
        v
    }

    /// Mass-centre height after the tilt toward the unsupported side.
    pub fn cog_height(&self) -> f64 {
        if self.margin < 0.0 {
            self.cog.z * self.tilt.cos() - self.margin.abs() * self.tilt.sin()
        } else {
            self.cog.z
        }
    }

    pub fn stability(&self) -> Result<StabilityReport> {
        let pts: Vec<_> = self.contact_points().iter().map(|p| p.xy()).collect();
        stability_report(self.cog, &pts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Planar {
    x: f64,
    y: f64,
    heading: f64,
}

impl Planar {
    fn of(base: &BasePose) -> Self {
        Self { x: base.x, y: base.y, heading: base.heading }
    }

    fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let q = Rotation2::new(self.heading) * p.xy();
        Vector3::new(q.x + self.x, q.y + self.y, p.z)
    }

    fn lerp(&self, to: &Planar, s: f64) -> Planar {
        Planar {
            x: self.x + s * (to.x - self.x),
            y: self.y + s * (to.y - self.y),
            heading: self.heading + s * (to.heading - self.heading),
        }
    }
}

/// Weighted least-squares planar pose taking body points `p` onto world
/// anchors `a`. With one point the heading is held at `heading`.
fn rigid_fit(p: &[Vector2<f64>], a: &[Vector2<f64>], w: &[f64], heading: f64) -> Planar {
    let total: f64 = w.iter().sum();
    let pc = p.iter().zip(w).fold(Vector2::zeros(), |s, (v, w)| s + v * *w) / total;
    let ac = a.iter().zip(w).fold(Vector2::zeros(), |s, (v, w)| s + v * *w) / total;
    let heading = if p.len() < 2 {
        heading
    } else {
        let (mut sin, mut cos) = (0.0, 0.0);
        for ((pi, ai), wi) in p.iter().zip(a).zip(w) {
            let (dp, da) = (pi - pc, ai - ac);
            sin += wi * (dp.x * da.y - dp.y * da.x);
            cos += wi * (dp.x * da.x + dp.y * da.y);
        }
        sin.atan2(cos)
    };
    let t = ac - Rotation2::new(heading) * pc;
    Planar { x: t.x, y: t.y, heading }
}

fn pose(model: &RobotModel, frame: &CoordinationFrame) -> Result<BodyPoints> {
    pose_robot(model, &frame.posture(), &frame.base())
}

fn finish(
    model: &RobotModel,
    sim: &SimParams,
    frame: &CoordinationFrame,
    pts: &BodyPoints,
    mut state: WorldState,
    at: Planar,
) -> WorldState {
    let place = |pl: &Planar, st: &mut WorldState| {
        st.base.x = pl.x;
        st.base.y = pl.y;
        st.base.heading = pl.heading;
        for i in 0..4 {
            st.feet[i] = pl.apply(&pts.feet[i]);
        }
        st.tail_point = pl.apply(&pts.tail_tip);
        st.cog = pl.apply(&weighted_centroid(&model.masses.all(), &pts.centroids));
    };
    place(&at, &mut state);
    state.tail_contact = frame.tail_contact && pts.tail_tip.z < sim.contact_clearance;
    let support: Vec<_> = state.contact_points().iter().map(|p| p.xy()).collect();
    if support.is_empty() {
        state.fallen = true;
        state.margin = f64::NEG_INFINITY;
        state.tilt = sim.max_tilt;
        return state;
    }
    let margin = stability_margin(&state.cog.xy(), &support_polygon(&support).expect("non-empty"));
    state.margin = margin;
    state.tilt = if margin < 0.0 { sim.max_tilt * (sim.tilt_gain * -margin).min(1.0) } else { 0.0 };
    state
}

/// State at the first frame: the body sits at the world origin and every
/// loaded foot is anchored where it stands.
pub fn initial_state(model: &RobotModel, sim: &SimParams, frame: &CoordinationFrame) -> Result<WorldState> {
    let pts = pose(model, frame)?;
    let mut contact = [false; 4];
    let mut anchors = [None; 4];
    for i in 0..4 {
        contact[i] = frame.support[i] && pts.feet[i].z < sim.contact_clearance;
        if contact[i] {
            anchors[i] = Some(pts.feet[i].xy());
        }
    }
    let state = WorldState {
        t: frame.t,
        base: frame.base(),
        posture: frame.posture(),
        feet: pts.feet,
        contact,
        stuck: [false; 4],
        anchors,
        tail_contact: false,
        tail_point: pts.tail_tip,
        cog: Vector3::zeros(),
        margin: 0.0,
        tilt: 0.0,
        fit_residual: 0.0,
        odometer: 0.0,
        fallen: false,
    };
    Ok(finish(model, sim, frame, &pts, state, Planar::of(&frame.base())))
}

/// Advances the world to `frame` (the joint values actually reached).
/// `commanded` is the frame before faults; a swing foot that stays on the
/// ground short of its commanded height drags and loads the fit heavily.
pub fn step_quasi_static(
    model: &RobotModel,
    sim: &SimParams,
    state: &WorldState,
    frame: &CoordinationFrame,
    commanded: &CoordinationFrame,
) -> Result<WorldState> {
    let pts = pose(model, frame)?;
    let cmd_z = if frame == commanded { pts.feet.map(|f| f.z) } else { pose(model, commanded)?.feet.map(|f| f.z) };
    let prev = Planar::of(&state.base);

    let mut contact = [false; 4];
    let mut stuck = [false; 4];
    let mut weight = [0.0; 4];
    for i in 0..4 {
        let z = pts.feet[i].z;
        let touching = z < sim.contact_clearance;
        if frame.support[i] && touching {
            contact[i] = true;
            weight[i] = 1.0;
        } else if !frame.support[i] && touching && cmd_z[i] - z > sim.stuck_tolerance {
            contact[i] = true;
            stuck[i] = true;
            weight[i] = sim.stuck_weight;
        }
    }

    let held: Vec<usize> = (0..4).filter(|i| contact[*i] && state.anchors[*i].is_some()).collect();
    let fitted = if held.is_empty() {
        prev
    } else {
        let p: Vec<_> = held.iter().map(|i| pts.feet[*i].xy()).collect();
        let a: Vec<_> = held.iter().map(|i| state.anchors[*i].expect("held")).collect();
        let w: Vec<_> = held.iter().map(|i| weight[*i]).collect();
        rigid_fit(&p, &a, &w, prev.heading)
    };

    let mut anchors = [None; 4];
    let mut fit_residual: f64 = 0.0;
    for i in 0..4 {
        if !contact[i] {
            continue;
        }
        let here = fitted.apply(&pts.feet[i]).xy();
        anchors[i] = match state.anchors[i] {
            Some(a) => {
                let r = (here - a).norm();
                fit_residual = fit_residual.max(r);
                if r > sim.slip_tolerance {
                    log::debug!("{} slips by {r:.2} mm at t = {:.3}", LegId::ALL[i].name(), frame.t);
                    Some(here)
                } else {
                    Some(a)
                }
            }
            None => Some(here),
        };
    }

    let mut next = WorldState {
        t: frame.t,
        base: BasePose { height: frame.pelvis_height, pitch: frame.body_pitch, ..state.base },
        posture: frame.posture(),
        feet: pts.feet,
        contact,
        stuck,
        anchors,
        tail_contact: false,
        tail_point: pts.tail_tip,
        cog: Vector3::zeros(),
        margin: 0.0,
        tilt: 0.0,
        fit_residual,
        odometer: state.odometer,
        fallen: false,
    };
    next = finish(model, sim, frame, &pts, next, fitted);

    let forward = (fitted.x - prev.x) * prev.heading.cos() + (fitted.y - prev.y) * prev.heading.sin();
    if next.margin < 0.0 && sim.tilt_penalty && !next.fallen && forward > 0.0 {
        let keep = (1.0 - sim.tilt_coefficient * next.margin.abs()).max(0.0);
        let damped = prev.lerp(&fitted, keep);
        for ((anchor, foot), touching) in next.anchors.iter_mut().zip(&pts.feet).zip(contact) {
            if touching {
                *anchor = Some(damped.apply(foot).xy());
            }
        }
        next = finish(model, sim, frame, &pts, next, damped);
    }
    let (dx, dy) = (next.base.x - prev.x, next.base.y - prev.y);
    next.odometer += dx * prev.heading.cos() + dy * prev.heading.sin();
    for i in 0..4 {
        if let Some(a) = next.anchors[i] {
            next.feet[i] = Vector3::new(a.x, a.y, next.feet[i].z);
        }
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    /// Pelvis progress along its heading (mm).
    pub displacement_mm: f64,
    pub cog_height_mm: f64,
    pub margin_mm: f64,
}

impl Sample {
    pub fn of(state: &WorldState) -> Self {
        Self { t: state.t, displacement_mm: state.odometer, cog_height_mm: state.cog_height(), margin_mm: state.margin }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub total_displacement_m: f64,
    pub cog_height_amplitude_mm: f64,
    pub min_margin_mm: f64,
    /// Time at which every contact was lost, if it happened.
    pub fell_at: Option<f64>,
}

impl RunSummary {
    pub fn from_series(series: &[Sample], fell_at: Option<f64>) -> Self {
        let last = series.last().map_or(0.0, |s| s.displacement_mm);
        let first = series.first().map_or(0.0, |s| s.displacement_mm);
        let (lo, hi) = series
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.cog_height_mm), hi.max(s.cog_height_mm)));
        Self {
            total_displacement_m: (last - first) / 1000.0,
            cog_height_amplitude_mm: if series.is_empty() { 0.0 } else { hi - lo },
            min_margin_mm: series.iter().map(|s| s.margin_mm).fold(f64::INFINITY, f64::min),
            fell_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub series: Vec<Sample>,
    pub summary: RunSummary,
}

impl RunResult {
    pub fn displacement_mm(&self) -> f64 {
        self.summary.total_displacement_m * 1000.0
    }
}

/// Integrates the gait from t = 0 over `duration` seconds at `sim.dt`.
/// Loss of all contacts ends the run early and is recorded in the summary.
pub fn run_scenario(
    model: &RobotModel,
    gait: &GaitParams,
    sim: &SimParams,
    faults: &[FaultSpec],
    duration: f64,
) -> Result<RunResult> {
    model.validate()?;
    gait.validate()?;
    sim.validate()?;
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidParameter("duration must be > 0".into()));
    }
    let neutral = neutral_leg_angles(&model.leg, gait)?;
    let n = (duration / sim.dt).round() as usize;

    let cmd = coordination_frame(gait, model, 0.0)?;
    let mut state = initial_state(model, sim, &apply_fault(&cmd, faults, &neutral))?;
    let mut series = Vec::with_capacity(n + 1);
    series.push(Sample::of(&state));
    let mut fell_at = None;
    for k in 1..=n {
        let t = k as f64 * sim.dt;
        let cmd = coordination_frame(gait, model, t)?;
        let act = apply_fault(&cmd, faults, &neutral);
        state = step_quasi_static(model, sim, &state, &act, &cmd)?;
        if state.fallen {
            log::warn!("lost all contacts at t = {t:.3} s");
            fell_at = Some(t);
            break;
        }
        series.push(Sample::of(&state));
    }
    let summary = RunSummary::from_series(&series, fell_at);
    Ok(RunResult { series, summary })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReachPosture {
    Crawl,
    Stand,
}

/// Highest skull point above the ground in the neutral crawl or at the end
/// of the stand sequence.
pub fn reach_height(model: &RobotModel, gait: &GaitParams, stand: &StandParams, posture: ReachPosture) -> Result<f64> {
    let frame = match posture {
        ReachPosture::Crawl => coordination_frame(&gait.locked_trunk(), model, 0.0).map(|mut f| {
            let q = neutral_leg_angles(&model.leg, gait);
            if let Ok(q) = q {
                f.leg_angles = LegId::ALL.map(|l| l.mirror_angles(q));
            }
            f
        })?,
        ReachPosture::Stand => *stand_sequence(model, gait, stand, 1.0)?.last(),
    };
    Ok(pose(model, &frame)?.head_top_height())
}
