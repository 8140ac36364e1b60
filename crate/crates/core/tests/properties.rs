use std::f64::consts::{FRAC_PI_2, PI};

use croc_kin::body::RobotModel;
use croc_kin::dh::{chain_fk, link_transform, JointRow, KinematicChain, Transform4};
use croc_kin::gait::{
    coordination_frame, foot_trajectory, limb_phase, spine_tail_signals, swim_midline, GaitParams, LegPhase,
    SwimWaveParams,
};
use croc_kin::leg::{leg_fk, leg_ik, workspace_contains, AnklePolicy, FootPosition, LegAngles, LegGeometry, LegId};
use croc_kin::sim::{stability_margin, support_polygon, weighted_centroid};
use croc_kin::spine::{command_to_angles, spine_fk, spine_ik, SpineAngles, SpineCommand, SpineGeometry};
use croc_kin::tail::{cable_deltas_approx, cable_deltas_exact, servo_angle, tail_joint_positions, TailGeometry};
use nalgebra::{Vector2, Vector3};
use proptest::prelude::*;

fn leg_angles() -> impl Strategy<Value = LegAngles> {
    let g = LegGeometry::default();
    let l = g.limits;
    (l[0].0..l[0].1, l[1].0..l[1].1, l[2].0..l[2].1, l[3].0..l[3].1).prop_map(|(a, b, c, d)| LegAngles::new(a, b, c, d))
}

fn spine_angles() -> impl Strategy<Value = SpineAngles> {
    prop::array::uniform5(-0.5f64..0.5).prop_map(SpineAngles)
}

proptest! {
    #[test]
    fn link_rotation_is_orthonormal(theta in -10.0f64..10.0, d in -500.0f64..500.0,
                                    a in -500.0f64..500.0, alpha in -PI..PI) {
        let row = JointRow { theta, d, a_prev: a, alpha_prev: alpha };
        let t = link_transform(&row).unwrap();
        prop_assert!(t.orthonormality_error() < 1e-9);
        let t2 = link_transform(&JointRow { theta: theta + 2.0 * PI, ..row }).unwrap();
        prop_assert!(t.max_abs_diff(&t2) < 1e-9);
    }

    #[test]
    fn chain_split_composition(q in prop::array::uniform5(-PI..PI), k in 0usize..=5) {
        let chain = SpineGeometry::default().chain();
        let full = chain_fk(&chain, &q).unwrap();
        let rows: Vec<_> = chain.rows().iter().zip(q).map(|(r, v)| r.with_theta(v)).collect();
        let prod = |rs: &[JointRow]| rs.iter().fold(Transform4::identity(), |acc, r| acc * link_transform(r).unwrap());
        let split = prod(&rows[..k]) * prod(&rows[k..]);
        prop_assert!(full.max_abs_diff(&split) < 1e-9);
    }

    #[test]
    fn leg_closed_form_matches_chain(q in leg_angles()) {
        let g = LegGeometry::default();
        let chain: KinematicChain = g.chain();
        let prod = chain_fk(&chain, &q.to_array()).unwrap();
        let closed = leg_fk(&g, &q).transform;
        prop_assert!(prod.max_abs_diff(&closed) < 1e-9);
    }

    #[test]
    fn leg_ik_round_trip(q in leg_angles()) {
        let g = LegGeometry::default();
        let planar = g.femur * q.hip_pitch.cos() + g.tibia * (q.hip_pitch + q.knee).cos();
        prop_assume!(planar > 1e-3);
        let p = leg_fk(&g, &q).position;
        let sol = leg_ik(&g, &p, AnklePolicy::Fixed(q.ankle)).unwrap();
        let best = sol.closest_to(&q);
        for (a, b) in best.to_array().iter().zip(q.to_array()) {
            prop_assert!((a - b).abs() < 1e-6, "{:?} vs {:?}", best, q);
        }
        for s in &sol.solutions {
            prop_assert!(leg_fk(&g, s).position.distance(&p) < 1e-6);
        }
    }

    #[test]
    fn hip_yaw_ignores_radial_scale(q in leg_angles(), k in 0.5f64..1.0) {
        let g = LegGeometry::default();
        let p = leg_fk(&g, &q).position;
        let scaled = FootPosition::new(g.hip_offset + k * (p.x - g.hip_offset), k * p.y, p.z);
        if let (Ok(a), Ok(b)) = (leg_ik(&g, &p, AnklePolicy::default()), leg_ik(&g, &scaled, AnklePolicy::default())) {
            prop_assume!(!a.singular && !b.singular);
            prop_assert!((a.primary().hip_yaw - b.primary().hip_yaw).abs() < 1e-9);
        }
    }

    #[test]
    fn mirror_is_involution(x in -300.0f64..300.0, y in -300.0f64..300.0, z in -300.0f64..300.0) {
        let p = FootPosition::new(x, y, z);
        for leg in LegId::ALL {
            prop_assert_eq!(leg.mirror_position(leg.mirror_position(p)), p);
        }
    }

    #[test]
    fn spine_command_linear(yaw in -0.7f64..0.7, pitch in -0.45f64..0.45) {
        let g = SpineGeometry::default();
        let one = command_to_angles(&g, &SpineCommand { yaw_total: yaw, pitch_total: pitch }).unwrap();
        let two = command_to_angles(&g, &SpineCommand { yaw_total: 2.0 * yaw, pitch_total: 2.0 * pitch }).unwrap();
        for i in 0..5 {
            prop_assert!((two.0[i] - 2.0 * one.0[i]).abs() < 1e-12);
        }
        prop_assert!((one.yaw_total() - yaw).abs() < 1e-12);
        prop_assert!((one.pitch_total() - pitch).abs() < 1e-12);
    }

    #[test]
    fn spine_planar_commands(v in -1.0f64..1.0) {
        let g = SpineGeometry::default();
        let yaw = command_to_angles(&g, &SpineCommand { yaw_total: 1.4 * v, pitch_total: 0.0 }).unwrap();
        prop_assert!(spine_fk(&g, &yaw).translation().z.abs() < 1e-9);
        let pitch = command_to_angles(&g, &SpineCommand { yaw_total: 0.0, pitch_total: 0.9 * v }).unwrap();
        prop_assert!(spine_fk(&g, &pitch).translation().y.abs() < 1e-9);
    }

    #[test]
    fn spine_ik_warm_round_trip(q in spine_angles(), noise in prop::array::uniform5(-0.05f64..0.05)) {
        let g = SpineGeometry::default();
        let target = spine_fk(&g, &q).translation();
        let mut seed = q;
        for (s, n) in seed.0.iter_mut().zip(noise) {
            *s = (*s + n).clamp(-0.5, 0.5);
        }
        let r = spine_ik(&g, &target, &seed).unwrap();
        prop_assert!(r.error_mm < 1e-3, "error {}", r.error_mm);
        prop_assert!((spine_fk(&g, &r.angles).translation() - target).norm() < 1e-3);
    }

    #[test]
    fn cable_model_difference(theta in -FRAC_PI_2..FRAC_PI_2) {
        let g = TailGeometry::default();
        let n = g.joints as f64;
        let (es, el) = cable_deltas_exact(&g, theta).unwrap();
        let (as_, al) = cable_deltas_approx(&g, theta).unwrap();
        let term = 2.0 * g.hinge_gap * (theta / (4.0 * n)).sin().powi(2);
        prop_assert!(((as_ - es) - term).abs() < 1e-12);
        prop_assert!(((al - el) - term).abs() < 1e-12);
        let phi = servo_angle(&g, theta).unwrap();
        prop_assert_eq!(servo_angle(&g, -theta).unwrap(), -phi);
    }

    #[test]
    fn tail_joints_on_arc(theta in -FRAC_PI_2..FRAC_PI_2) {
        prop_assume!(theta.abs() > 1e-3);
        let g = TailGeometry::default();
        let pts = tail_joint_positions(&g, theta).unwrap();
        for w in pts.windows(2) {
            let d = ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
            prop_assert!((d - g.pitch()).abs() < 1e-9);
        }
        // circumcentre of the first three joints
        let (a, b, c) = (pts[0], pts[1], pts[2]);
        let dd = 2.0 * (a.0 * (b.1 - c.1) + b.0 * (c.1 - a.1) + c.0 * (a.1 - b.1));
        let sq = |p: (f64, f64)| p.0 * p.0 + p.1 * p.1;
        let ux = (sq(a) * (b.1 - c.1) + sq(b) * (c.1 - a.1) + sq(c) * (a.1 - b.1)) / dd;
        let uy = (sq(a) * (c.0 - b.0) + sq(b) * (a.0 - c.0) + sq(c) * (b.0 - a.0)) / dd;
        let r = ((a.0 - ux).powi(2) + (a.1 - uy).powi(2)).sqrt();
        for p in &pts {
            let rp = ((p.0 - ux).powi(2) + (p.1 - uy).powi(2)).sqrt();
            prop_assert!((rp - r).abs() < 1e-6);
        }
    }

    #[test]
    fn gait_signals_periodic(t in 0.0f64..100.0) {
        let p = GaitParams::default();
        prop_assert_eq!(limb_phase(&p, t).legs.map(|l| l.stance), limb_phase(&p, t + p.period).legs.map(|l| l.stance));
        let a = spine_tail_signals(&p, t);
        let b = spine_tail_signals(&p, t + p.period);
        prop_assert!((a.spine_yaw - b.spine_yaw).abs() < 1e-12);
        prop_assert!((a.tail_yaw - b.tail_yaw).abs() < 1e-12);
        let ph = limb_phase(&p, t);
        prop_assert_eq!(ph.legs[0].stance, ph.legs[3].stance);
        prop_assert_eq!(ph.legs[1].stance, ph.legs[2].stance);
    }

    #[test]
    fn foot_targets_in_workspace(t in 0.0f64..8.0) {
        let p = GaitParams::default();
        let m = RobotModel::default();
        let f = coordination_frame(&p, &m, t).unwrap();
        for i in 0..4 {
            prop_assert!(workspace_contains(&m.leg, &f.foot_targets[i]));
        }
    }

    #[test]
    fn foot_path_closed(beta in 0.2f64..0.9, len in 0.0f64..80.0, h in 0.0f64..40.0) {
        let p = GaitParams { beta, step_length: len, step_height: h, ..GaitParams::default() };
        let g = LegGeometry::default();
        for leg in LegId::ALL {
            let start = foot_trajectory(&p, &g, leg, LegPhase { stance: true, phase: 0.0 }, 89.0).position;
            let end = foot_trajectory(&p, &g, leg, LegPhase { stance: false, phase: 1.0 }, 89.0).position;
            prop_assert!(start.distance(&end) < 1e-9);
        }
    }

    #[test]
    fn swim_envelope_bound(x in 0.0f64..800.0, t in -10.0f64..10.0) {
        let s = SwimWaveParams::default();
        let y = swim_midline(&s, x, t).unwrap();
        prop_assert!(y.abs() <= s.envelope(x) + 1e-12);
    }

    #[test]
    fn margin_sign_matches_containment(pts in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..8),
                                       q in (-150.0f64..150.0, -150.0f64..150.0)) {
        let pts: Vec<_> = pts.into_iter().map(|(x, y)| Vector2::new(x, y)).collect();
        let hull = support_polygon(&pts).unwrap();
        prop_assume!(hull.len() >= 3);
        let n = hull.len();
        for i in 0..n {
            let (a, b, c) = (hull[i], hull[(i + 1) % n], hull[(i + 2) % n]);
            prop_assert!((b - a).perp(&(c - b)) > 0.0, "hull not strictly convex ccw");
        }
        let q = Vector2::new(q.0, q.1);
        let inside = (0..n).all(|i| (hull[(i + 1) % n] - hull[i]).perp(&(q - hull[i])) >= 0.0);
        let m = stability_margin(&q, &hull);
        prop_assert_eq!(m >= 0.0, inside);
        for p in &pts {
            prop_assert!(stability_margin(p, &hull) >= -1e-9);
        }
    }

    #[test]
    fn cog_is_scale_invariant(ms in prop::collection::vec(0.01f64..5.0, 2..6), k in 0.1f64..10.0) {
        let cs: Vec<_> = (0..ms.len()).map(|i| Vector3::new(i as f64 * 10.0, (i * i) as f64, -(i as f64))).collect();
        let a = weighted_centroid(&ms, &cs);
        let scaled: Vec<_> = ms.iter().map(|m| m * k).collect();
        prop_assert!((weighted_centroid(&scaled, &cs) - a).norm() < 1e-9);
    }
}
