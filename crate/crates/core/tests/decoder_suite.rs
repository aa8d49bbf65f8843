use std::path::PathBuf;
use std::time::Instant;

use proptest::prelude::*;

use lfo_core::contact::{SemanticConstraint, TaskType};
use lfo_core::decoder::ik::arm_directions;
use lfo_core::decoder::world::{box_world, fridge_world, garbage_world, shelf_world};
use lfo_core::decoder::{
    arm_symbols, bundled_robots, mobile7, run_program, runtime_localize, solve_ik_role_division,
    verify_postconditions, Attachment, ExecutionTrace, FrameStatus, IkOptions, PostureTarget, Session, SimConfig,
    SnapshotPhase, TerminationReason, TraceRecord, ViewConfig, WorldState,
};
use lfo_core::grasp::{ClosureType, GripperSpec};
use lfo_core::laban::canonical_direction;
use lfo_core::linalg::{Mat3, Pose, Vec3};
use lfo_core::taskmodel::{parse_program, GMRProgram};
use lfo_core::Error;

fn program(name: &str) -> GMRProgram {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../fixtures/{name}.program.json"));
    parse_program(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn without_plate() -> WorldState {
    let mut w = box_world();
    w.supports.retain(|s| s.name != "plate");
    w
}

/// Nothing below the place position: no plate, and the table ends short of it.
fn nothing_below() -> WorldState {
    let mut w = without_plate();
    w.supports[0].max[1] = 0.0;
    w
}

/// The first `n` frames of a program.
fn head(p: &GMRProgram, n: usize) -> GMRProgram {
    let mut p = p.clone();
    p.frames.truncate(n);
    p
}

fn assert_terminations(trace: &ExecutionTrace, prog: &GMRProgram, threshold: f64) {
    for (i, frame) in prog.frames.iter().enumerate() {
        let e = trace.termination(i).unwrap();
        let steps = trace.frame_steps(i);
        match frame.task {
            TaskType::PTG13 | TaskType::PTG33 | TaskType::PTG53 => {
                assert_eq!(e.reason, TerminationReason::DragOnset);
                let (last, prior) = steps.split_last().unwrap();
                assert!(last.drag_force > threshold);
                assert!(prior.iter().all(|s| s.drag_force <= threshold));
            }
            TaskType::PTG11 | TaskType::PTG31 | TaskType::PTG51 => {
                assert_eq!(e.reason, TerminationReason::ForceFreeAndReached);
                assert_eq!(steps.last().unwrap().drag_force, 0.0);
                assert!(e.goal_error.unwrap() <= 1e-3);
            }
            TaskType::Grasp => assert_eq!(e.reason, TerminationReason::FingertipForce),
            TaskType::Release => assert_eq!(e.reason, TerminationReason::Departed),
            TaskType::STG12 => assert_eq!(e.reason, TerminationReason::ForceFreeAndReached),
        }
    }
}

#[test]
fn box_demo_runs_on_both_robots() {
    let prog = program("box_demo");
    let cfg = SimConfig::default();
    let t0 = Instant::now();
    for robot in bundled_robots() {
        let out = run_program(&prog, &box_world(), &robot, &cfg).unwrap();
        assert!(out.error.is_none(), "{}: {:?}", robot.name, out.error);
        let b = out.world.object("box").unwrap();
        assert_eq!(b.attachment, Attachment::OnSurface { support: "plate".into() }, "{}", robot.name);
        assert!((b.base_z() - 0.72).abs() < 1e-6);
        assert!(out.trace.max_position_error() <= 1e-3);
        assert!(out.trace.max_angle_error_deg() <= 1.0);
        out.trace.check_invariants().unwrap();
        assert_terminations(&out.trace, &prog, cfg.drag_threshold);
        let report = verify_postconditions(&out.trace, &prog, &out.world);
        assert!(report.passed, "{}: {report:?}", robot.name);
    }
    assert!(t0.elapsed().as_secs_f64() < 30.0, "{:?}", t0.elapsed());
}

#[test]
fn every_demo_runs_on_both_robots() {
    let cases = [("shelf_demo", shelf_world(), "cup"), ("garbage_demo", garbage_world(), "can"), ("fridge_demo", fridge_world(), "handle")];
    for (name, world, object) in cases {
        let prog = program(name);
        for robot in bundled_robots() {
            let out = run_program(&prog, &world, &robot, &SimConfig::default()).unwrap();
            assert!(out.error.is_none(), "{name} on {}: {:?}", robot.name, out.error);
            assert!(verify_postconditions(&out.trace, &prog, &out.world).passed, "{name} on {}", robot.name);
            assert!(out.trace.max_position_error() <= 1e-3);
            // arm symbol agreement is reported for every frame
            assert_eq!(out.trace.verdicts().filter(|v| v.laban_match.is_some()).count(), prog.frames.len());
            let att = &out.world.object(object).unwrap().attachment;
            match name {
                "shelf_demo" => assert_eq!(*att, Attachment::OnSurface { support: "shelf".into() }),
                "garbage_demo" => assert_eq!(*att, Attachment::OnSurface { support: "bin".into() }),
                _ => {}
            }
        }
    }
}

#[test]
fn fridge_door_opens() {
    let prog = program("fridge_demo");
    let out = run_program(&prog, &fridge_world(), &mobile7(), &SimConfig::default()).unwrap();
    let Attachment::Hinged { angle, .. } = out.world.object("handle").unwrap().attachment else { panic!() };
    assert!(angle > 0.0, "{angle}");
}

#[test]
fn place_without_a_surface_fails_at_that_frame() {
    let prog = program("box_demo");
    let out = run_program(&prog, &nothing_below(), &bundled_robots()[0], &SimConfig::default()).unwrap();
    match out.error {
        Some(Error::AtFrame { frame: 3, ref source }) => assert!(matches!(**source, Error::Precondition(_)), "{source}"),
        ref other => panic!("{other:?}"),
    }
    assert_eq!(out.trace.termination(3).unwrap().reason, TerminationReason::Error);
    assert!(out.trace.termination(4).is_none());
    let report = verify_postconditions(&out.trace, &prog, &out.world);
    assert!(matches!(report.frames[3].status, FrameStatus::Fail { .. }));
    assert_eq!(report.frames[4].status, FrameStatus::NotExecuted);
}

#[test]
fn place_stops_at_table_height() {
    // Grasp, pick, place straight back down onto the table
    let box_prog = program("box_demo");
    let mut prog = head(&box_prog, 2);
    prog.frames.push(box_prog.frames[3].clone());
    for robot in bundled_robots() {
        let out = run_program(&prog, &box_world(), &robot, &SimConfig::default()).unwrap();
        assert!(out.error.is_none(), "{:?}", out.error);
        let b = out.world.object("box").unwrap();
        assert!((b.base_z() - 0.70).abs() <= 1e-3, "{}", b.base_z());
        assert_eq!(b.attachment, Attachment::OnSurface { support: "table".into() });
        assert_eq!(out.trace.termination(2).unwrap().reason, TerminationReason::DragOnset);
    }
}

#[test]
fn pick_rises_by_detach_distance() {
    let prog = head(&program("box_demo"), 2);
    let d = prog.frames[1].slots.detach_distance.unwrap();
    let out = run_program(&prog, &box_world(), &bundled_robots()[0], &SimConfig::default()).unwrap();
    assert!(out.error.is_none());
    let b = out.world.object("box").unwrap();
    assert!((b.base_z() - (0.70 + d)).abs() <= 1e-3, "{}", b.base_z());
    let e = out.trace.termination(1).unwrap();
    assert_eq!(e.reason, TerminationReason::ForceFreeAndReached);
    assert_eq!(e.drag_force, 0.0);
    assert!(out.trace.frame_steps(1).iter().all(|s| s.drag_force == 0.0));
}

#[test]
fn lifting_inside_a_wall_slab_violates_it() {
    let box_prog = program("box_demo");
    let mut prog = head(&box_prog, 3);
    let z = 0.75 + box_prog.frames[1].slots.detach_distance.unwrap();
    prog.frames[2].slots.displacement = Some(Vec3::new(0.0, 0.0, 0.05));
    prog.frames[2].slots.constraint =
        Some(SemanticConstraint::Wall { normal: Vec3::unit_z(), offset: z - 0.005, thickness: 0.01 });
    let out = run_program(&prog, &box_world(), &bundled_robots()[0], &SimConfig::default()).unwrap();
    match out.error {
        Some(Error::AtFrame { frame: 2, ref source }) => {
            assert!(matches!(**source, Error::SemanticViolation { .. }), "{source}")
        }
        ref other => panic!("{other:?}"),
    }
    assert_eq!(out.trace.termination(2).unwrap().error_kind.as_deref(), Some("semantic_violation"));
}

#[test]
fn truncated_trace_reports_not_executed() {
    let prog = program("box_demo");
    let out = run_program(&prog, &box_world(), &bundled_robots()[0], &SimConfig::default()).unwrap();
    let cut = out
        .trace
        .records
        .iter()
        .position(|r| matches!(r, TraceRecord::Snapshot { frame: 2, phase: SnapshotPhase::Before, .. }))
        .unwrap();
    let truncated = ExecutionTrace { records: out.trace.records[..cut].to_vec() };
    let report = verify_postconditions(&truncated, &prog, &out.world);
    assert!(!report.passed);
    assert_eq!(report.frames[0].status, FrameStatus::Pass);
    assert_eq!(report.frames[1].status, FrameStatus::Pass);
    for f in &report.frames[2..] {
        assert_eq!(f.status, FrameStatus::NotExecuted);
    }
}

#[test]
fn removed_surface_fails_the_place_check() {
    let prog = program("box_demo");
    let robot = &bundled_robots()[0];
    // world edited after the run: the plate the box landed on is gone
    let out = run_program(&prog, &box_world(), robot, &SimConfig::default()).unwrap();
    let report = verify_postconditions(&out.trace, &prog, &without_plate());
    assert!(matches!(report.frames[3].status, FrameStatus::Fail { .. }), "{:?}", report.frames[3]);
    assert_eq!(report.frames[1].status, FrameStatus::Pass);

    // plate removed mid-run, after the place
    let mut s = Session::new(robot, box_world(), SimConfig::default(), &prog.provenance).unwrap();
    for (i, f) in prog.frames[..4].iter().enumerate() {
        s.execute_frame(i, f).unwrap();
    }
    s.world.supports.retain(|x| x.name != "plate");
    s.execute_frame(4, &prog.frames[4]).unwrap();
    let (trace, world) = s.finish();
    let report = verify_postconditions(&trace, &prog, &world);
    assert!(matches!(report.frames[3].status, FrameStatus::Fail { .. }));
    assert_eq!(report.frames[4].status, FrameStatus::Pass);
}

#[test]
fn contact_web_follows_a_displaced_cup() {
    let view = ViewConfig::from_camera(Vec3::new(0.05, -0.05, 1.45));
    let g = GripperSpec::default();
    let w0 = shelf_world();
    let mut w1 = shelf_world();
    w1.objects[0].pose.translation.x += 0.03;
    let a = runtime_localize(&w0, "cup", &view, ClosureType::PassiveForce, &Vec3::unit_x(), &g).unwrap();
    let b = runtime_localize(&w1, "cup", &view, ClosureType::PassiveForce, &Vec3::unit_x(), &g).unwrap();
    let shift = b.params.pose.translation - a.params.pose.translation;
    assert!((shift - Vec3::new(0.03, 0.0, 0.0)).norm() < 3e-3, "{shift:?}");
    // same web relative to the fitted object; its spin about the axis of
    // symmetry is arbitrary, so compare radii and heights
    let local = |l: &lfo_core::decoder::Localization, p: &Vec3<f64>| l.params.pose.inverse_transform_point(p);
    let mut ra: Vec<(f64, f64)> = a.web.contacts.iter().map(|c| local(&a, &c.point)).map(|p| (p.x.hypot(p.y), p.z)).collect();
    let mut rb: Vec<(f64, f64)> = b.web.contacts.iter().map(|c| local(&b, &c.point)).map(|p| (p.x.hypot(p.y), p.z)).collect();
    ra.sort_by(|x, y| x.partial_cmp(y).unwrap());
    rb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    for (x, y) in ra.iter().zip(&rb) {
        assert!((x.0 - y.0).abs() < 1e-3 && (x.1 - y.1).abs() < 1e-3, "{x:?} {y:?}");
    }
    let centroid = |l: &lfo_core::decoder::Localization| {
        l.web.contacts.iter().fold(Vec3::zero(), |acc, c| acc + c.point) * (1.0 / l.web.contacts.len() as f64)
    };
    let d = centroid(&b) - centroid(&a);
    assert!((d - Vec3::new(0.03, 0.0, 0.0)).norm() < 3e-3, "{d:?}");
    // and the displaced cup is still picked up
    let prog = head(&program("shelf_demo"), 2);
    let out = run_program(&prog, &w1, &bundled_robots()[0], &SimConfig::default()).unwrap();
    assert!(out.error.is_none(), "{:?}", out.error);
    assert_eq!(out.world.held(), Some("cup"));
}

#[test]
fn fitted_axes_match_the_true_axes() {
    let view = ViewConfig::from_camera(Vec3::new(0.05, -0.05, 1.45));
    let g = GripperSpec::default();
    for (world, name) in [(box_world(), "box"), (shelf_world(), "cup"), (garbage_world(), "can")] {
        let loc = runtime_localize(&world, name, &view, ClosureType::ActiveForce, &-Vec3::unit_z(), &g).unwrap();
        let truth = world.object(name).unwrap().pose.rotation;
        let fitted = loc.fit.params.pose.rotation;
        let cos = 10f64.to_radians().cos();
        let p = &loc.fit.params;
        // a round cross-section leaves only the axis of symmetry defined
        let round = (p.a1 - p.a2).abs() < 1e-3 && (p.e2 - 1.0).abs() < 0.05;
        let axes = if round { 2..3 } else { 0..3 };
        for j in axes {
            let best = (0..3).map(|k| fitted.column(j).dot(&truth.column(k)).abs()).fold(0.0, f64::max);
            assert!(best >= cos, "{name} axis {j}: {best}");
        }
    }
}

#[test]
fn redundant_arm_picks_the_demonstrated_elbow() {
    let robot = mobile7();
    let opts = IkOptions::default();
    let target = Pose::new(Mat3::from_z_and_hint(&-Vec3::unit_z(), &Vec3::unit_x()), Vec3::new(0.40, -0.10, 0.85));
    let row_like = |q: &[f64]| {
        let s = arm_symbols(&robot, q).unwrap();
        PostureTarget { upper: canonical_direction(&s.upper), forearm: canonical_direction(&s.forearm) }
    };
    // two demonstrations: elbow out to the side and elbow hanging down
    let side = PostureTarget { upper: Vec3::new(0.3, -0.9, -0.3).normalize(), forearm: Vec3::new(0.6, 0.6, -0.5).normalize() };
    let down = PostureTarget { upper: Vec3::new(0.2, 0.0, -1.0).normalize(), forearm: Vec3::new(1.0, 0.0, 0.1).normalize() };
    let a = solve_ik_role_division(&target, Some(&side), &robot, None, &opts).unwrap();
    let b = solve_ik_role_division(&target, Some(&down), &robot, None, &opts).unwrap();
    let (sa, sb) = (arm_symbols(&robot, &a.q).unwrap(), arm_symbols(&robot, &b.q).unwrap());
    assert_ne!(sa, sb, "the target must admit two distinct arm postures");
    for q in [&a.q, &b.q] {
        let demo = arm_symbols(&robot, q).unwrap();
        let sol = solve_ik_role_division(&target, Some(&row_like(q)), &robot, None, &opts).unwrap();
        assert_eq!(arm_symbols(&robot, &sol.q).unwrap(), demo);
        assert!(robot.tcp(&sol.q).translation.distance(&target.translation) <= 1e-3);
    }
}

#[test]
fn drag_below_threshold_never_ends_a_place() {
    let prog = program("box_demo");
    let cfg = SimConfig { drag_threshold: 10.0, max_steps: 2000, ..SimConfig::default() };
    let out = run_program(&prog, &box_world(), &bundled_robots()[0], &cfg).unwrap();
    match out.error {
        Some(Error::AtFrame { frame: 3, ref source }) => assert!(matches!(**source, Error::Timeout { steps: 2000 })),
        ref other => panic!("{other:?}"),
    }
}

#[test]
fn trace_round_trips_as_ndjson() {
    let prog = program("box_demo");
    let out = run_program(&prog, &box_world(), &bundled_robots()[1], &SimConfig::default()).unwrap();
    let text = out.trace.to_ndjson();
    assert_eq!(text.lines().count(), out.trace.records.len());
    let back = ExecutionTrace::from_ndjson(&text).unwrap();
    assert_eq!(back, out.trace);
    assert_eq!(back.final_world(), Some(&out.world));
    assert!(verify_postconditions(&back, &prog, back.final_world().unwrap()).passed);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    /// Posture refinement never costs hand accuracy.
    #[test]
    fn posture_never_degrades_the_hand(
        yaw in -0.6f64..0.6, pitch in 0.2f64..1.0, elbow in 0.4f64..1.6, wrist in -0.8f64..0.8,
        az in 0.0f64..6.28, el in -1.2f64..0.3,
    ) {
        for robot in bundled_robots() {
            let mut q = robot.home();
            let m = robot.markers;
            q[m.shoulder - 1] = yaw;
            q[m.shoulder] = pitch;
            q[m.elbow] = elbow;
            q[m.wrist + 1] = wrist;
            robot.clamp(&mut q);
            let target = robot.tcp(&q);
            let posture = PostureTarget {
                upper: Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()),
                forearm: Vec3::unit_x(),
            };
            let sol = solve_ik_role_division(&target, Some(&posture), &robot, None, &IkOptions::default()).unwrap();
            let got = robot.tcp(&sol.q);
            prop_assert!(got.translation.distance(&target.translation) <= 1e-3);
            prop_assert!(got.rotation.mul_mat(&target.rotation.transpose()).rotation_angle() <= 1f64.to_radians());
            let (u, f) = arm_directions(&robot, &robot.fk(&sol.q));
            let cost = (1.0 - u.dot(&posture.upper)) + (1.0 - f.dot(&posture.forearm));
            prop_assert!((cost - sol.posture_cost).abs() < 1e-9);
        }
    }
}
