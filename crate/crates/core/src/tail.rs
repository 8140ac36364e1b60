//! Cable-driven tail: antagonistic cord length changes, drive pulley angle,
//! and constant-curvature placement of the driven joints.
//!
//! Symbols: `segment_len` (H) is the rigid length of one vertebra, `hinge_gap`
//! (h) the gap between vertebrae that the cords span, `anchor_offset` (d) the
//! lateral distance of each cord from the neutral axis. Each of the N joints
//! turns by θ/N.
//!
//! Planar tail frame: origin at the first vertebra plate, X pointing away
//! from the body, Y to the robot's right, Z up.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TailGeometry {
    pub joints: usize,
    pub anchor_offset: f64,
    pub hinge_gap: f64,
    pub segment_len: f64,
    pub pulley_radius: f64,
    pub cable_len: f64,
    /// Rigid passive tip beyond the last driven joint.
    pub underdrive_len: f64,
    pub max_bend: f64,
    /// Range of the single tail pitch servo (rad, positive = tip down).
    pub pitch_limits: (f64, f64),
}

impl Default for TailGeometry {
    fn default() -> Self {
        Self {
            joints: 6,
            anchor_offset: 20.0,
            hinge_gap: 4.0,
            segment_len: 40.0,
            pulley_radius: 10.0,
            cable_len: 300.0,
            underdrive_len: 120.0,
            max_bend: FRAC_PI_2,
            pitch_limits: (-0.3, 1.2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CableState {
    /// Shortened cord (≤ 0 for θ ≥ 0).
    pub delta_short: f64,
    /// Lengthened cord.
    pub delta_long: f64,
    /// Drive pulley angle, degrees.
    pub servo_deg: f64,
}

impl TailGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.joints < 1 {
            return Err(Error::InvalidParameter("tail needs at least one joint".into()));
        }
        for (name, v) in [
            ("anchor_offset", self.anchor_offset),
            ("hinge_gap", self.hinge_gap),
            ("segment_len", self.segment_len),
            ("pulley_radius", self.pulley_radius),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("tail {name} must be > 0, got {v}")));
            }
        }
        if !(self.cable_len > self.joints as f64 * self.pitch()) {
            return Err(Error::InvalidParameter(format!(
                "cable length {} must exceed N·(H+h) = {}",
                self.cable_len,
                self.joints as f64 * self.pitch()
            )));
        }
        if !(self.underdrive_len >= 0.0) {
            return Err(Error::InvalidParameter("underdrive_len must be ≥ 0".into()));
        }
        // keeps θ/2N inside (−π/2, π/2) so the pulley map stays monotone
        if !(self.max_bend > 0.0 && self.max_bend < PI * self.joints as f64) {
            return Err(Error::InvalidParameter("max_bend out of range".into()));
        }
        if !(self.pitch_limits.0 <= self.pitch_limits.1) {
            return Err(Error::InvalidParameter("tail pitch limits inverted".into()));
        }
        Ok(())
    }

    /// Joint-to-joint spacing H + h.
    pub fn pitch(&self) -> f64 {
        self.segment_len + self.hinge_gap
    }

    fn n(&self) -> f64 {
        self.joints as f64
    }

    fn check_bend(&self, theta: f64) -> Result<()> {
        if !theta.is_finite() || theta.abs() > self.max_bend {
            return Err(Error::Domain(format!("tail bend {theta} outside ±{}", self.max_bend)));
        }
        Ok(())
    }
}

/// Cord length changes including the hinge-gap term.
pub fn cable_deltas_exact(geom: &TailGeometry, theta: f64) -> Result<(f64, f64)> {
    geom.check_bend(theta)?;
    let n = geom.n();
    let lin = geom.anchor_offset * (theta / (2.0 * n)).sin();
    let quad = 2.0 * geom.hinge_gap * (theta / (4.0 * n)).sin().powi(2);
    Ok((-(lin + quad), lin - quad))
}

/// Small-angle form without the hinge-gap term.
pub fn cable_deltas_approx(geom: &TailGeometry, theta: f64) -> Result<(f64, f64)> {
    geom.check_bend(theta)?;
    let lin = geom.anchor_offset * (theta / (2.0 * geom.n())).sin();
    Ok((-lin, lin))
}

/// Pulley rotation in degrees that winds the approximate cord change.
pub fn servo_angle(geom: &TailGeometry, theta: f64) -> Result<f64> {
    geom.check_bend(theta)?;
    let n = geom.n();
    Ok(180.0 / (PI * geom.pulley_radius) * n * geom.anchor_offset * (theta / (2.0 * n)).sin())
}

pub fn cable_state(geom: &TailGeometry, theta: f64) -> Result<CableState> {
    let (delta_short, delta_long) = cable_deltas_exact(geom, theta)?;
    Ok(CableState { delta_short, delta_long, servo_deg: servo_angle(geom, theta)? })
}

/// Driven joint positions in the planar tail frame. Joint 1 sits half a
/// pitch out along X; each following joint is one pitch further along a
/// heading that has turned by θ/N at every joint passed.
pub fn tail_joint_positions(geom: &TailGeometry, theta: f64) -> Result<Vec<(f64, f64)>> {
    geom.check_bend(theta)?;
    let step = theta / geom.n();
    let mut p = (geom.pitch() / 2.0, 0.0);
    let mut out = Vec::with_capacity(geom.joints);
    out.push(p);
    for j in 1..geom.joints {
        let heading = j as f64 * step;
        p = (p.0 + geom.pitch() * heading.cos(), p.1 + geom.pitch() * heading.sin());
        out.push(p);
    }
    Ok(out)
}

/// Tip of the rigid passive extension, tangent to the heading after the
/// last driven joint.
pub fn tail_tip(geom: &TailGeometry, theta: f64) -> Result<(f64, f64)> {
    let joints = tail_joint_positions(geom, theta)?;
    let last = *joints.last().expect("at least one joint");
    Ok((last.0 + geom.underdrive_len * theta.cos(), last.1 + geom.underdrive_len * theta.sin()))
}

/// Lifts planar points into 3-D after pitching the tail plane by `pitch`
/// (positive drives X downward).
pub fn pitch_points(points: &[(f64, f64)], pitch: f64) -> Vec<Vector3<f64>> {
    let (s, c) = pitch.sin_cos();
    points.iter().map(|&(x, y)| Vector3::new(x * c, y, -x * s)).collect()
}

/// Pitch that puts the tip on the ground when the tail root is `root_height`
/// above it and the root frame is already pitched by `root_pitch` (same sign
/// convention).
pub fn ground_contact_pitch(geom: &TailGeometry, theta: f64, root_height: f64, root_pitch: f64) -> Result<f64> {
    let (tip_x, _) = tail_tip(geom, theta)?;
    if !(root_height >= 0.0) || root_height > tip_x {
        return Err(Error::Infeasible(format!(
            "tail tip reach {tip_x:.1} mm cannot touch ground {root_height:.1} mm below the root"
        )));
    }
    let pitch = (root_height / tip_x).asin() - root_pitch;
    let (lo, hi) = geom.pitch_limits;
    if pitch < lo || pitch > hi {
        return Err(Error::Infeasible(format!("tail contact pitch {pitch:.3} rad outside [{lo}, {hi}]")));
    }
    Ok(pitch)
}
