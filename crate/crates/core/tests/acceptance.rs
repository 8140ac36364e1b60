//! End-to-end acceptance checks. Runs without the libtest harness so the
//! verdict lines are always printed; exits non-zero if any check fails.

use std::f64::consts::{FRAC_PI_2, PI};
use std::time::Instant;

use croc_kin::body::RobotModel;
use croc_kin::config::ConfigDocument;
use croc_kin::dh::chain_fk;
use croc_kin::gait::{swim_midline, GaitParams, StandParams, SwimWaveParams};
use croc_kin::leg::{expansion_report, leg_fk, leg_ik, AnklePolicy, LegAngles, LegGeometry};
use croc_kin::sim::scenario::{displacement_comparison, fault_matrix, stability_comparison};
use croc_kin::sim::{reach_height, run_scenario, FaultJoint, ReachPosture, SimParams};
use croc_kin::tail::{cable_deltas_approx, cable_deltas_exact, servo_angle, tail_joint_positions, TailGeometry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn random_leg(rng: &mut ChaCha8Rng, g: &LegGeometry) -> LegAngles {
    let l = g.limits;
    LegAngles::new(
        rng.gen_range(l[0].0..l[0].1),
        rng.gen_range(l[1].0..l[1].1),
        rng.gen_range(l[2].0..l[2].1),
        rng.gen_range(l[3].0..l[3].1),
    )
}

fn fk_equivalence() -> Verdict {
    let g = LegGeometry::default();
    let chain = g.chain();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let qs: Vec<_> = (0..1000).map(|_| random_leg(&mut rng, &g)).collect();
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for q in &qs {
        let prod = chain_fk(&chain, &q.to_array()).expect("four joints");
        let closed = leg_fk(&g, q);
        worst = worst.max((prod.translation() - closed.position.to_vector()).norm());
    }
    let elapsed = start.elapsed().as_secs_f64();
    let report = expansion_report(&g, &qs).expect("four joints");
    Verdict {
        pass: worst < 1e-9 && elapsed < 1.0,
        detail: format!(
            "max |closed - product| = {worst:.2e} mm over 1000 configs in {elapsed:.3} s; \
             printed expansion max term deviation {:.2e}",
            report.max_deviation()
        ),
    }
}

fn ik_round_trip() -> Verdict {
    let g = LegGeometry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut qs = Vec::with_capacity(1000);
    while qs.len() < 1000 {
        let q = random_leg(&mut rng, &g);
        // one branch per sample: the foot stays on the outward side of the yaw axis
        if g.femur * q.hip_pitch.cos() + g.tibia * (q.hip_pitch + q.knee).cos() > 1.0 {
            qs.push(q);
        }
    }
    let start = Instant::now();
    let (mut pos_err, mut joint_err): (f64, f64) = (0.0, 0.0);
    let mut failures = 0;
    for q in &qs {
        let p = leg_fk(&g, q).position;
        match leg_ik(&g, &p, AnklePolicy::Fixed(q.ankle)) {
            Ok(sol) => {
                for s in &sol.solutions {
                    pos_err = pos_err.max(leg_fk(&g, s).position.distance(&p));
                }
                let best = sol.closest_to(q);
                for (a, b) in best.to_array().iter().zip(q.to_array()) {
                    joint_err = joint_err.max((a - b).abs());
                }
            }
            Err(_) => failures += 1,
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    Verdict {
        pass: failures == 0 && pos_err < 1e-6 && joint_err < 1e-6 && elapsed < 1.0,
        detail: format!(
            "1000 targets: max foot error {pos_err:.2e} mm, max joint error {joint_err:.2e} rad, \
             {failures} failures, {elapsed:.3} s"
        ),
    }
}

fn tail_algebra() -> Verdict {
    let g = TailGeometry::default();
    let n = g.joints as f64;
    let steps = 10_000;
    let (mut worst, mut seg): (f64, f64) = (0.0, 0.0);
    for i in 0..=steps {
        let theta = -FRAC_PI_2 + PI * i as f64 / steps as f64;
        let (es, el) = cable_deltas_exact(&g, theta).expect("in range");
        let (as_, al) = cable_deltas_approx(&g, theta).expect("in range");
        let term = 2.0 * g.hinge_gap * (theta / (4.0 * n)).sin().powi(2);
        worst = worst.max(((es - as_).abs() - term).abs()).max(((el - al).abs() - term).abs());
        let pts = tail_joint_positions(&g, theta).expect("in range");
        for w in pts.windows(2) {
            let d = ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
            seg = seg.max((d - g.pitch()).abs());
        }
    }
    let phi0 = servo_angle(&g, 0.0).expect("zero");
    let mut monotone = true;
    let mut prev = phi0;
    for i in 1..=steps {
        let phi = servo_angle(&g, FRAC_PI_2 * i as f64 / steps as f64).expect("in range");
        monotone &= phi > prev;
        prev = phi;
    }
    Verdict {
        pass: worst < 1e-12 && phi0 == 0.0 && monotone && seg < 1e-9,
        detail: format!(
            "cord-model gap error {worst:.2e}, φ(0) = {phi0}, φ strictly increasing: {monotone}, \
             segment length error {seg:.2e} mm, φ(π/2) = {prev:.3}°"
        ),
    }
}

fn swim_wave() -> Verdict {
    let s = SwimWaveParams::default();
    let (c1, c2, k) = (0.027, 0.30, 0.023);
    let params_ok = s.c1 == c1 && s.c2 == c2 && s.k == k;
    let (mut excess, mut period_err): (f64, f64) = (f64::NEG_INFINITY, 0.0);
    for i in 0..200 {
        let x = s.body_length * i as f64 / 199.0;
        let xm = x / 1000.0;
        let bound = c1 * xm + c2 * xm * xm;
        for j in 0..200 {
            let t = s.period() * j as f64 / 200.0;
            let y = swim_midline(&s, x, t).expect("on body") / 1000.0;
            excess = excess.max(y.abs() - bound);
            let y2 = swim_midline(&s, x, t + 2.0 * PI / s.omega).expect("on body") / 1000.0;
            period_err = period_err.max((y2 - y).abs());
        }
    }
    Verdict {
        pass: params_ok && excess <= 0.0 && period_err < 1e-12,
        detail: format!("200×200 grid: max(|y| - envelope) = {excess:.2e} m, period discrepancy {period_err:.2e} m"),
    }
}

fn stability_direction(m: &RobotModel, g: &GaitParams, sim: &SimParams) -> Verdict {
    let c = stability_comparison(m, g, sim).expect("runs");
    let (on, off) = (c.on.summary, c.off.summary);
    Verdict {
        pass: on.min_margin_mm >= off.min_margin_mm && on.cog_height_amplitude_mm < off.cog_height_amplitude_mm,
        detail: format!(
            "min margin tail on {:.2} mm vs off {:.2} mm; cog-height amplitude on {:.2} mm vs off {:.2} mm",
            on.min_margin_mm, off.min_margin_mm, on.cog_height_amplitude_mm, off.cog_height_amplitude_mm
        ),
    }
}

fn displacement_direction(m: &RobotModel, g: &GaitParams, sim: &SimParams) -> Verdict {
    let c = displacement_comparison(m, g, sim).expect("runs");
    let ratio = c.on.displacement_mm() / c.off.displacement_mm();
    Verdict {
        pass: ratio > 1.0,
        detail: format!(
            "trunk on {:.1} mm, off {:.1} mm, ratio {ratio:.2} (reference 0.73 m / 0.16 m ≈ 4.6)",
            c.on.displacement_mm(),
            c.off.displacement_mm()
        ),
    }
}

fn fault_ordering(m: &RobotModel, g: &GaitParams, sim: &SimParams) -> Verdict {
    let fm = fault_matrix(m, g, sim).expect("runs");
    let base = fm.baseline.displacement_mm();
    let mut ordered = true;
    let mut near_zero = true;
    let mut parts = vec![format!("baseline {base:.1} mm")];
    for c in &fm.cases {
        ordered &= c.reduction_on_pct < c.reduction_off_pct;
        let mut line = format!("{} on {:.1}% < off {:.1}%", c.fault.label(), c.reduction_on_pct, c.reduction_off_pct);
        if c.fault.leg.is_front() && c.fault.joint == FaultJoint::Pitching {
            let frac = c.trunk_off.displacement_mm().abs() / base;
            near_zero = frac < 0.10;
            line.push_str(&format!(" (uncoordinated keeps {:.1}% of baseline, need < 10%)", 100.0 * frac));
        }
        parts.push(line);
    }
    parts.push("reference: 22<80, 17<75, ≈0<55".into());
    Verdict { pass: ordered && near_zero, detail: parts.join("; ") }
}

fn reach_ratio(m: &RobotModel, g: &GaitParams) -> Verdict {
    let s = StandParams::default();
    let crawl = reach_height(m, g, &s, ReachPosture::Crawl).expect("crawl");
    let stand = reach_height(m, g, &s, ReachPosture::Stand).expect("stand");
    let ratio = stand / crawl;
    Verdict {
        pass: ratio > 3.0,
        detail: format!("crawl {crawl:.1} mm, stand {stand:.1} mm, ratio {ratio:.2} (reference 4.25)"),
    }
}

fn determinism(m: &RobotModel, g: &GaitParams, sim: &SimParams) -> Verdict {
    let a = serde_json::to_string(&run_scenario(m, g, sim, &[], sim.duration).expect("run")).expect("json");
    let b = serde_json::to_string(&run_scenario(m, g, sim, &[], sim.duration).expect("run")).expect("json");
    let doc = ConfigDocument::default();
    let echo = doc.to_json();
    let back = ConfigDocument::from_json(&echo).expect("echo parses");
    let round = back == doc && back.to_json() == echo;
    Verdict {
        pass: a == b && round,
        detail: format!(
            "repeated run identical: {} ({} bytes); config echo round trip exact: {round}",
            a == b,
            a.len()
        ),
    }
}

fn main() {
    let m = RobotModel::default();
    let g = GaitParams::default();
    let sim = SimParams::default();
    let start = Instant::now();
    let checks: Vec<(&str, Verdict)> = vec![
        ("FK oracle equivalence", fk_equivalence()),
        ("IK round trip", ik_round_trip()),
        ("tail algebra", tail_algebra()),
        ("swim wave", swim_wave()),
        ("stability direction", stability_direction(&m, &g, &sim)),
        ("displacement direction", displacement_direction(&m, &g, &sim)),
        ("fault-tolerance ordering", fault_ordering(&m, &g, &sim)),
        ("reach height", reach_ratio(&m, &g)),
        ("determinism and config round trip", determinism(&m, &g, &sim)),
    ];
    let mut failed = 0;
    for (i, (name, v)) in checks.iter().enumerate() {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!v.pass);
        println!("criterion {} {tag} {name}: {}", i + 1, v.detail);
    }
    println!("acceptance: {} passed, {failed} failed in {:.1} s", checks.len() - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
