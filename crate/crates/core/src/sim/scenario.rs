//! Paired runs behind the land experiments: tail support, trunk
//! coordination, and single-joint faults.

use serde::{Deserialize, Serialize};

use super::{run_scenario, FaultJoint, FaultSpec, RunResult, SimParams};
use crate::body::RobotModel;
use crate::gait::{swim_midline, Compensation, GaitParams, SwimWaveParams};
use crate::leg::LegId;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub on: RunResult,
    pub off: RunResult,
}

/// Same gait with the tail dragged on the ground and with it lifted.
pub fn stability_comparison(model: &RobotModel, gait: &GaitParams, sim: &SimParams) -> Result<Comparison> {
    let on = GaitParams { tail_drag: true, ..*gait };
    let off = GaitParams { tail_drag: false, ..*gait };
    Ok(Comparison {
        on: run_scenario(model, &on, sim, &[], sim.duration)?,
        off: run_scenario(model, &off, sim, &[], sim.duration)?,
    })
}

/// Gait with the spine and tail coordinating versus the trunk held still.
pub fn displacement_comparison(model: &RobotModel, gait: &GaitParams, sim: &SimParams) -> Result<Comparison> {
    Ok(Comparison {
        on: run_scenario(model, gait, sim, &[], sim.duration)?,
        off: run_scenario(model, &gait.locked_trunk(), sim, &[], sim.duration)?,
    })
}

/// Front and hind leg, each with a locked hip yaw and a locked hip pitch.
pub fn fault_cases() -> [FaultSpec; 4] {
    [
        FaultSpec { leg: LegId::LQ, joint: FaultJoint::Rotational },
        FaultSpec { leg: LegId::LQ, joint: FaultJoint::Pitching },
        FaultSpec { leg: LegId::LH, joint: FaultJoint::Rotational },
        FaultSpec { leg: LegId::LH, joint: FaultJoint::Pitching },
    ]
}

/// Gait used when the trunk compensates `fault`: a leg that cannot yaw is
/// carried, a leg that cannot pitch is lifted by the girdle.
pub fn compensated_gait(gait: &GaitParams, fault: &FaultSpec) -> GaitParams {
    let mut g = *gait;
    g.compensation[fault.leg.index()] = match fault.joint {
        FaultJoint::Rotational => Compensation::Carry,
        FaultJoint::Pitching => Compensation::GirdleLift,
    };
    g
}

pub fn run_fault_case(
    model: &RobotModel,
    gait: &GaitParams,
    sim: &SimParams,
    fault: &FaultSpec,
    trunk_on: bool,
) -> Result<RunResult> {
    let g = if trunk_on { compensated_gait(gait, fault) } else { gait.locked_trunk() };
    run_scenario(model, &g, sim, &[*fault], sim.duration)
}

/// Percentage of the baseline displacement lost.
pub fn reduction_pct(baseline_mm: f64, run_mm: f64) -> f64 {
    100.0 * (1.0 - run_mm / baseline_mm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultOutcome {
    pub fault: FaultSpec,
    pub trunk_on: RunResult,
    pub trunk_off: RunResult,
    pub reduction_on_pct: f64,
    pub reduction_off_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultMatrix {
    /// Intact robot with the trunk coordinating.
    pub baseline: RunResult,
    pub cases: Vec<FaultOutcome>,
}

impl FaultMatrix {
    pub fn assemble(baseline: RunResult, runs: Vec<(FaultSpec, RunResult, RunResult)>) -> Self {
        let b = baseline.displacement_mm();
        let cases = runs
            .into_iter()
            .map(|(fault, on, off)| FaultOutcome {
                fault,
                reduction_on_pct: reduction_pct(b, on.displacement_mm()),
                reduction_off_pct: reduction_pct(b, off.displacement_mm()),
                trunk_on: on,
                trunk_off: off,
            })
            .collect();
        Self { baseline, cases }
    }
}

pub fn fault_matrix(model: &RobotModel, gait: &GaitParams, sim: &SimParams) -> Result<FaultMatrix> {
    let baseline = run_scenario(model, gait, sim, &[], sim.duration)?;
    let runs = fault_cases()
        .iter()
        .map(|f| Ok((*f, run_fault_case(model, gait, sim, f, true)?, run_fault_case(model, gait, sim, f, false)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(FaultMatrix::assemble(baseline, runs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwimSample {
    pub t: f64,
    pub x_mm: f64,
    pub y_mm: f64,
    pub envelope_mm: f64,
}

/// Midline samples on an `nx` × `nt` grid over the body and one wave period.
pub fn swim_samples(params: &SwimWaveParams, nx: usize, nt: usize) -> Result<Vec<SwimSample>> {
    params.validate()?;
    let mut out = Vec::with_capacity(nx * nt);
    for j in 0..nt {
        let t = params.period() * j as f64 / nt as f64;
        for i in 0..nx {
            let x = params.body_length * i as f64 / (nx.max(2) - 1) as f64;
            out.push(SwimSample { t, x_mm: x, y_mm: swim_midline(params, x, t)?, envelope_mm: params.envelope(x) });
        }
    }
    Ok(out)
}
