//! Quasi-static execution of task frames.
//!
//! Every step moves the commanded hand by at most one step length (or step
//! angle), updates the world, and solves IK for the new hand pose. The drag
//! force is binary: the configured magnitude when the environment blocks the
//! held object on that step, zero otherwise. Skills only see it through the
//! threshold.

use crate::contact::{check_semantic_constraint, ConstraintTolerance, MotionKind, TaskRegistry, TaskType, TimedPose};
use crate::error::{Error, Result};
use crate::grasp::ClosureType;
use crate::linalg::{Mat3, Pose, Vec3};
use crate::taskmodel::{GMRProgram, TaskFrame};

use super::ik::{arm_symbols, solve_ik_role_division, ArmSymbols, IkOptions, PostureTarget};
use super::localize::{runtime_localize, ViewConfig};
use super::robot::{JointKind, RobotSpec};
use super::skill::{Controller, DirectionSlot, Hints, Motion, Observation, Policy, ScriptedPolicy, SkillLibrary};
use super::trace::{
    ExecutionTrace, SkillVerdict, SnapshotPhase, StepRecord, TerminationEvent, TerminationReason, TraceHeader,
    TraceRecord,
};
use super::world::{contact_class_of, Attachment, Grip, WorldState, CONTACT_TOL};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    /// Hand travel per step (m).
    pub step_length: f64,
    /// Rotation per step (rad).
    pub step_angle: f64,
    pub max_steps: usize,
    /// Simulated time per step (s).
    pub dt: f64,
    /// Reaction force reported while the environment blocks the object (N).
    pub drag_magnitude: f64,
    pub drag_threshold: f64,
    /// Hand position tolerance for reached-goal terminations.
    pub position_tol: f64,
    /// Fingertip clearance outside the contact web before closing.
    pub finger_gap: f64,
    /// Travel past the web contact after which a finger gives up.
    pub finger_overtravel: f64,
    pub ik: IkOptions,
    /// Camera for re-observation; `None` uses the robot's camera.
    pub view: Option<ViewConfig>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            step_length: 1e-3,
            step_angle: 0.5f64.to_radians(),
            max_steps: 10_000,
            dt: 0.01,
            drag_magnitude: 5.0,
            drag_threshold: 1.0,
            position_tol: 1e-3,
            finger_gap: 0.03,
            finger_overtravel: 0.02,
            ik: IkOptions::default(),
            view: None,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Finger {
    contact: Vec3<f64>,
    inward: Vec3<f64>,
    travel: f64,
    touching: bool,
}

/// Robot, world and trace of one program run.
pub struct Session<'a> {
    pub robot: &'a RobotSpec,
    pub cfg: SimConfig,
    pub library: SkillLibrary,
    pub registry: TaskRegistry,
    pub world: WorldState,
    pub q: Vec<f64>,
    pub time: f64,
    pub trace: ExecutionTrace,
    /// Commanded TCP pose.
    hand: Pose<f64>,
    fingers: Vec<Finger>,
    /// Joint-space transit goal and the posture it is solved under.
    transit: Option<(Pose<f64>, Vec<f64>)>,
    transit_posture: Option<PostureTarget>,
}

struct Outcome {
    reason: TerminationReason,
    steps: usize,
    goal_error: Option<f64>,
}

fn unit(v: Option<Vec3<f64>>, slot: &str) -> Result<Vec3<f64>> {
    v.and_then(|v| v.try_normalize(1e-9)).ok_or_else(|| Error::Precondition(format!("slot `{slot}` is empty or zero")))
}

impl<'a> Session<'a> {
    pub fn new(robot: &'a RobotSpec, world: WorldState, cfg: SimConfig, program: &str) -> Result<Self> {
        robot.validate()?;
        world.validate()?;
        let q = robot.home();
        let hand = robot.tcp(&q);
        let header = TraceHeader {
            robot: robot.name.clone(),
            world: world.name.clone(),
            program: program.to_string(),
            drag_threshold: cfg.drag_threshold,
            position_tol: cfg.position_tol,
            joint_names: robot.joints.iter().map(|j| j.name.clone()).collect(),
        };
        Ok(Session {
            robot,
            cfg,
            library: SkillLibrary::default(),
            registry: TaskRegistry::default(),
            world,
            q,
            time: 0.0,
            trace: ExecutionTrace { records: vec![TraceRecord::Header(header)] },
            hand,
            fingers: Vec::new(),
            transit: None,
            transit_posture: None,
        })
    }

    pub fn hand(&self) -> Pose<f64> {
        self.hand
    }

    /// Re-solves IK at the current hand pose for a new posture, choosing the
    /// arm branch closest to it.
    pub fn settle(&mut self, posture: Option<&PostureTarget>, frame: usize, task: TaskType) -> Result<()> {
        let sol = solve_ik_role_division(&self.hand, posture, self.robot, None, &self.cfg.ik)?;
        self.q = sol.q;
        self.record_step(frame, task, 0.0);
        Ok(())
    }

    fn record_step(&mut self, frame: usize, task: TaskType, drag: f64) {
        let tcp = self.robot.tcp(&self.q);
        let angle = self.hand.rotation.mul_mat(&tcp.rotation.transpose()).rotation_angle();
        let fingertip_forces = self
            .fingers
            .iter()
            .map(|f| if f.touching { self.cfg.drag_magnitude } else { 0.0 })
            .collect();
        self.trace.records.push(TraceRecord::Step(StepRecord {
            t: self.time,
            frame,
            task,
            q: self.q.clone(),
            hand: tcp.translation,
            hand_rotation: tcp.rotation.log(),
            target: self.hand.translation,
            position_error: tcp.translation.distance(&self.hand.translation),
            angle_error_deg: angle.to_degrees(),
            drag_force: drag,
            fingertip_forces,
        }));
    }

    fn snapshot(&mut self, frame: usize, phase: SnapshotPhase) {
        let world = self.world.snapshot();
        self.trace.records.push(TraceRecord::Snapshot { t: self.time, frame, phase, world });
    }

    /// Runs one frame and records its termination event, world snapshots and
    /// verdict. Errors are returned unwrapped; [`run_program`] tags the frame.
    pub fn execute_frame(&mut self, index: usize, frame: &TaskFrame) -> Result<()> {
        self.snapshot(index, SnapshotPhase::Before);
        let start = self.trace.records.len();
        let result = self.run_skill(index, frame);
        let steps = self.trace.records[start..].iter().filter(|r| matches!(r, TraceRecord::Step(_))).count();
        let drag_force = self.trace.frame_steps(index).last().map_or(0.0, |s| s.drag_force);
        let event = match &result {
            Ok(o) => TerminationEvent {
                t: self.time,
                frame: index,
                task: frame.task,
                reason: o.reason,
                steps: o.steps,
                drag_force,
                goal_error: o.goal_error,
                error_kind: None,
                message: None,
            },
            Err(e) => TerminationEvent {
                t: self.time,
                frame: index,
                task: frame.task,
                reason: TerminationReason::Error,
                steps,
                drag_force,
                goal_error: None,
                error_kind: Some(e.kind().to_string()),
                message: Some(e.to_string()),
            },
        };
        self.trace.records.push(TraceRecord::Termination(event));
        self.snapshot(index, SnapshotPhase::After);
        let (arm, laban_match) = match (arm_symbols(self.robot, &self.q), frame.slots.last_laban.as_ref()) {
            (Ok(arm), Some(row)) => {
                let m = ArmSymbols::from_row(row, frame.actor).ok().map(|d| [d.upper == arm.upper, d.forearm == arm.forearm]);
                (Some(arm), m)
            }
            (Ok(arm), None) => (Some(arm), None),
            _ => (None, None),
        };
        self.trace.records.push(TraceRecord::Verdict(SkillVerdict {
            frame: index,
            task: frame.task,
            completed: result.is_ok(),
            arm,
            laban_match,
        }));
        result.map(|_| ())
    }

    fn check_preconditions(&self, frame: &TaskFrame) -> Result<()> {
        let missing = frame.missing_slots();
        if !missing.is_empty() {
            let names: Vec<&str> = missing.iter().map(|s| s.as_str()).collect();
            return Err(Error::Precondition(format!("unfilled slots: {}", names.join(", "))));
        }
        let problems = frame.slots.value_problems();
        if !problems.is_empty() {
            return Err(Error::Precondition(problems.join("; ")));
        }
        let obj = self.world.object(&frame.object)?;
        let held = self.world.held();
        match frame.task {
            TaskType::Grasp => {
                if let Some(h) = held {
                    return Err(Error::Precondition(format!("hand already holds `{h}`")));
                }
            }
            _ if held != Some(frame.object.as_str()) => {
                return Err(Error::Precondition(format!("hand does not hold `{}`", frame.object)));
            }
            _ => {}
        }
        if frame.task.is_hand_task() {
            return Ok(());
        }
        let entry = self.registry.entry(frame.task).ok_or_else(|| Error::UnregisteredTask(frame.task.to_string()))?;
        let kind_ok = match entry.motion {
            MotionKind::Translation if matches!(frame.task, TaskType::PTG31 | TaskType::PTG33) => {
                matches!(obj.attachment, Attachment::Prismatic { .. })
            }
            MotionKind::Rotation => matches!(obj.attachment, Attachment::Hinged { .. }),
            _ => matches!(obj.attachment, Attachment::Free | Attachment::OnSurface { .. } | Attachment::InHand),
        };
        if !kind_ok {
            return Err(Error::Precondition(format!(
                "{} cannot act on a {} object",
                frame.task,
                obj.attachment.kind()
            )));
        }
        let class = contact_class_of(&obj.attachment, &self.world.supports);
        if class != entry.before {
            return Err(Error::Precondition(format!(
                "`{}` is in contact state {class}, {} needs {}",
                frame.object, frame.task, entry.before
            )));
        }
        Ok(())
    }

    /// Distance along `dir` to the first support surface under the object.
    fn support_along(&self, object: &str, dir: &Vec3<f64>) -> Result<Option<f64>> {
        let obj = self.world.object(object)?;
        if dir.z >= -1e-9 {
            return Ok(None);
        }
        let (c, base) = (obj.pose.translation, obj.base_z());
        Ok(self
            .world
            .supports
            .iter()
            .filter_map(|s| {
                let t = (base - s.top) / -dir.z;
                (t >= -CONTACT_TOL && s.covers(&(c + *dir * t))).then_some(t)
            })
            .reduce(f64::min))
    }

    fn observe(&self, step: usize, drag: f64, rotated: f64) -> Observation {
        Observation {
            step,
            hand: self.hand,
            drag: drag > self.cfg.drag_threshold,
            fingertips: self.fingers.len(),
            fingertips_touching: self.fingers.iter().filter(|f| f.touching).count(),
            holding: self.world.grip.is_some(),
            rotated,
        }
    }

    fn run_skill(&mut self, index: usize, frame: &TaskFrame) -> Result<Outcome> {
        let skill = *self.library.for_task(frame.task)?;
        self.check_preconditions(frame)?;
        let slots = &frame.slots;
        let first = PostureTarget::from_row(slots.first_laban.as_ref().expect("checked"), frame.actor)?;
        let last = PostureTarget::from_row(slots.last_laban.as_ref().expect("checked"), frame.actor)?;
        let start = self.hand.translation;

        let (hints, nominal) = match skill.controller {
            Controller::ReachAndClose => {
                let closure = slots.grasp_closure.unwrap_or(ClosureType::ActiveForce);
                let demo = unit(slots.approach_dir, "approach_dir")?;
                let view = self.cfg.view.unwrap_or_else(|| ViewConfig::from_camera(self.robot.camera));
                let loc = runtime_localize(&self.world, &frame.object, &view, closure, &demo, &self.robot.gripper)?;
                let pts: Vec<Vec3<f64>> = loc.web.contacts.iter().map(|c| c.point).collect();
                let centroid = pts.iter().fold(Vec3::zero(), |a, p| a + *p) * (1.0 / pts.len() as f64);
                let thumb = pts[0] - centroid;
                let hint = if thumb.cross(&loc.approach).norm() > 1e-6 { thumb } else { loc.approach.any_orthonormal() };
                let rot = Mat3::from_z_and_hint(&loc.approach, &hint);
                let d = slots.approach_distance.unwrap_or(0.1).clamp(0.03, 0.25);
                let grasp = Pose::new(rot, centroid);
                let pre = Pose::new(rot, centroid - loc.approach * d);
                self.fingers = loc
                    .web
                    .contacts
                    .iter()
                    .map(|c| Finger { contact: c.point, inward: c.normal, travel: 0.0, touching: false })
                    .collect();
                let hints = Hints { direction: loc.approach, goal: None, angle: None, pregrasp: Some(pre), grasp: Some(grasp) };
                let nominal = start.distance(&pre.translation) + d;
                self.transit = None;
                self.transit_posture = Some(first.blend(&last, (nominal - d) / nominal.max(1e-9)));
                (hints, nominal)
            }
            Controller::Translate { along } => {
                let (dir, goal, nominal) = match along {
                    DirectionSlot::Detach => {
                        let dir = unit(slots.detach_dir, "detach_dir")?;
                        let dist = slots.detach_distance.unwrap_or(0.0);
                        (dir, Some(start + dir * dist), dist)
                    }
                    DirectionSlot::Approach => {
                        let dir = unit(slots.approach_dir, "approach_dir")?;
                        if frame.task == TaskType::PTG13 && self.support_along(&frame.object, &dir)?.is_none() {
                            return Err(Error::Precondition(format!(
                                "no support surface below `{}` along the approach direction",
                                frame.object
                            )));
                        }
                        (dir, None, slots.approach_distance.unwrap_or(0.1))
                    }
                    DirectionSlot::Displacement => {
                        let disp = slots.displacement.unwrap_or_else(Vec3::zero);
                        (disp.try_normalize(1e-12).unwrap_or_else(Vec3::zero), Some(start + disp), disp.norm())
                    }
                };
                (Hints::along(dir, goal), nominal)
            }
            Controller::Rotate => {
                let obj = self.world.object(&frame.object)?;
                let Attachment::Hinged { point, axis, .. } = obj.attachment else { unreachable!("checked") };
                let sign = unit(slots.rotation_axis, "rotation_axis")?.dot(&axis);
                if sign.abs() < 1e-6 {
                    return Err(Error::Precondition("rotation axis is perpendicular to the hinge".into()));
                }
                let magnitude = slots.rotation_angle.unwrap_or(0.0).abs();
                let (angle, goal) = if frame.task == TaskType::PTG51 {
                    let a = sign.signum() * magnitude;
                    let r = Mat3::from_axis_angle(&axis, a);
                    (a, Some(point + r.mul_vec(&(start - point))))
                } else {
                    (sign.signum() * f64::INFINITY, None)
                };
                let hints = Hints { direction: axis * sign.signum(), goal, angle: Some(angle), pregrasp: None, grasp: None };
                (hints, magnitude)
            }
            Controller::OpenAndDepart => {
                let dir = unit(slots.detach_dir, "detach_dir")?;
                let dist = slots.detach_distance.unwrap_or(0.0);
                (Hints::along(dir, Some(start + dir * dist)), dist)
            }
        };

        let mut policy = ScriptedPolicy::new(skill.controller, self.cfg.step_length, self.cfg.step_angle);
        let constraint = (frame.task == TaskType::STG12).then(|| slots.constraint.clone()).flatten();
        let obj_start = TimedPose { time: self.time, pose: self.world.object(&frame.object)?.pose };
        let (mut steps, mut drag, mut rotated, mut travelled) = (0usize, 0.0, 0.0, 0.0);
        loop {
            let obs = self.observe(steps, drag, rotated);
            if skill.termination.satisfied(&obs, &hints, self.cfg.position_tol) {
                let goal_error = hints.goal.map(|g| self.hand.translation.distance(&g));
                if frame.task == TaskType::Grasp || frame.task == TaskType::Release {
                    self.fingers.clear();
                }
                return Ok(Outcome { reason: skill.termination.into(), steps, goal_error });
            }
            if steps >= self.cfg.max_steps {
                return Err(Error::Timeout { steps });
            }
            let motion = policy.act(&obs, &hints);
            let (d, progress) = self.apply(motion, &frame.object)?;
            drag = d;
            match motion {
                Motion::Rotate(a) => rotated += progress.copysign(a),
                _ => travelled += progress,
            }
            steps += 1;
            self.time += self.cfg.dt;
            let done = if nominal > 1e-9 {
                ((travelled + rotated.abs()) / nominal).clamp(0.0, 1.0)
            } else {
                1.0
            };
            if !matches!(motion, Motion::Transit(_)) {
                let posture = first.blend(&last, done);
                let sol = solve_ik_role_division(&self.hand, Some(&posture), self.robot, Some(&self.q), &self.cfg.ik)?;
                self.q = sol.q;
            }
            self.record_step(index, frame.task, drag);
            if let Some(c) = &constraint {
                let now = TimedPose { time: self.time, pose: self.world.object(&frame.object)?.pose };
                check_semantic_constraint(&[obj_start, now], c, &ConstraintTolerance::default())?.into_result()?;
            }
        }
    }

    /// Applies one motion; returns the drag force and the distance (or
    /// angle) actually travelled.
    fn apply(&mut self, motion: Motion, object: &str) -> Result<(f64, f64)> {
        match motion {
            Motion::Transit(p) => {
                if self.world.grip.is_some() {
                    return Err(Error::invalid("free-space transit while holding an object"));
                }
                if self.transit.as_ref().is_none_or(|(t, _)| *t != p) {
                    let sol = solve_ik_role_division(&p, self.transit_posture.as_ref(), self.robot, None, &self.cfg.ik)?;
                    self.transit = Some((p, sol.q));
                }
                let goal = &self.transit.as_ref().expect("set above").1;
                let n = self
                    .robot
                    .joints
                    .iter()
                    .zip(goal.iter().zip(&self.q))
                    .map(|(j, (g, q))| {
                        let unit = if j.kind == JointKind::Prismatic { self.cfg.step_length } else { self.cfg.step_angle };
                        ((g - q).abs() / unit).ceil()
                    })
                    .fold(0.0, f64::max)
                    .max(1.0);
                let before = self.hand.translation;
                if n <= 1.0 {
                    self.q = goal.clone();
                    self.hand = p;
                } else {
                    for (q, g) in self.q.iter_mut().zip(goal) {
                        *q += (g - *q) / n;
                    }
                    self.hand = self.robot.tcp(&self.q);
                }
                Ok((0.0, before.distance(&self.hand.translation)))
            }
            Motion::Translate(delta) => match self.world.grip.clone() {
                None => {
                    self.hand.translation += delta;
                    Ok((0.0, delta.norm()))
                }
                Some(grip) => self.move_held(&grip, delta),
            },
            Motion::Rotate(da) => {
                let grip = self.world.grip.clone().ok_or_else(|| Error::Precondition("rotation without a grip".into()))?;
                let obj = self.world.object_mut(&grip.object)?;
                let Attachment::Hinged { angle, range, .. } = &mut obj.attachment else {
                    return Err(Error::Precondition(format!("`{}` has no hinge", grip.object)));
                };
                let new = (*angle + da).clamp(range[0], range[1]);
                let applied = new - *angle;
                *angle = new;
                let pose = obj.attachment.joint_pose().expect("hinged");
                obj.pose = pose;
                self.hand = pose.compose(&grip.offset.inverse());
                let blocked = applied.abs() < da.abs() - 1e-12;
                Ok((if blocked { self.cfg.drag_magnitude } else { 0.0 }, applied.abs()))
            }
            Motion::CloseFingers => {
                self.close_fingers(object)?;
                Ok((0.0, 0.0))
            }
            Motion::OpenFingers => {
                self.open_fingers()?;
                Ok((0.0, 0.0))
            }
        }
    }

    /// Moves the held object with the hand. Free objects stop exactly on
    /// the first support top they would cross; jointed objects follow their
    /// joint and stop at its limits.
    fn move_held(&mut self, grip: &Grip, delta: Vec3<f64>) -> Result<(f64, f64)> {
        let supports = self.world.supports.clone();
        let drag = self.cfg.drag_magnitude;
        let obj = self.world.object_mut(&grip.object)?;
        match &mut obj.attachment {
            Attachment::Prismatic { axis, position, range, .. } => {
                let ds = delta.dot(axis);
                let new = (*position + ds).clamp(range[0], range[1]);
                let applied = new - *position;
                *position = new;
                obj.pose = obj.attachment.joint_pose().expect("prismatic");
                self.hand = obj.pose.compose(&grip.offset.inverse());
                let blocked = delta.norm() > 1e-12 && applied.abs() < delta.norm() - 1e-12;
                Ok((if blocked { drag } else { 0.0 }, applied.abs()))
            }
            Attachment::Hinged { .. } => {
                Err(Error::Precondition(format!("`{}` is hinged and cannot be translated", grip.object)))
            }
            _ => {
                let base = obj.base_z();
                let moved = obj.pose.translation + delta;
                let mut scale = 1.0;
                let mut landed = None;
                if delta.z < 0.0 {
                    let new_base = base + delta.z;
                    for s in &supports {
                        if s.covers(&moved) && s.top > new_base && s.top <= base + CONTACT_TOL {
                            let f = ((base - s.top) / -delta.z).clamp(0.0, 1.0);
                            if f < scale || landed.is_none() {
                                scale = scale.min(f);
                                landed = Some(s.name.clone());
                            }
                        }
                    }
                }
                let applied = delta * scale;
                obj.pose.translation += applied;
                self.hand.translation += applied;
                let new_base = obj.base_z();
                let blocked = landed.is_some();
                if let Some(name) = landed {
                    let top = supports.iter().find(|s| s.name == name).expect("support").top;
                    obj.pose.translation.z += top - new_base;
                    obj.attachment = Attachment::OnSurface { support: name };
                } else if let Attachment::OnSurface { support } = &obj.attachment {
                    let still = supports
                        .iter()
                        .find(|s| &s.name == support)
                        .is_some_and(|s| s.covers(&obj.pose.translation) && (new_base - s.top).abs() <= CONTACT_TOL);
                    if !still {
                        obj.attachment = Attachment::InHand;
                    }
                } else if matches!(obj.attachment, Attachment::Free) {
                    obj.attachment = Attachment::InHand;
                }
                Ok((if blocked { drag } else { 0.0 }, applied.norm()))
            }
        }
    }

    /// Advances every open finger one step along its contact normal,
    /// stopping exactly on the true object surface.
    fn close_fingers(&mut self, object: &str) -> Result<()> {
        let obj = self.world.object(object)?.clone();
        let (step, gap, limit) = (self.cfg.step_length, self.cfg.finger_gap, self.cfg.finger_gap + self.cfg.finger_overtravel);
        let at = |f: &Finger, t: f64| f.contact - f.inward * (gap - t);
        for f in self.fingers.iter_mut().filter(|f| !f.touching) {
            let next = f.travel + step;
            if obj.shape.contains(&obj.pose, &at(f, next)) {
                let (mut lo, mut hi) = (f.travel, next);
                for _ in 0..40 {
                    let mid = 0.5 * (lo + hi);
                    if obj.shape.contains(&obj.pose, &at(f, mid)) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                f.travel = hi;
                f.touching = true;
            } else if next > limit {
                return Err(Error::InfeasibleGrasp(format!(
                    "a finger closed {:.1} mm without touching `{object}`",
                    next * 1e3
                )));
            } else {
                f.travel = next;
            }
        }
        if self.fingers.iter().all(|f| f.touching) {
            let offset = self.hand.inverse().compose(&obj.pose);
            self.world.grip = Some(Grip { object: object.to_string(), offset });
        }
        Ok(())
    }

    /// Lets go; an object only the hand was holding drops onto the highest
    /// support below it.
    fn open_fingers(&mut self) -> Result<()> {
        let Some(grip) = self.world.grip.take() else { return Ok(()) };
        self.fingers.clear();
        let supports = self.world.supports.clone();
        let obj = self.world.object_mut(&grip.object)?;
        if matches!(obj.attachment, Attachment::InHand | Attachment::Free) {
            let (c, base) = (obj.pose.translation, obj.base_z());
            let below = supports
                .iter()
                .filter(|s| s.covers(&c) && s.top <= base + CONTACT_TOL)
                .max_by(|a, b| a.top.total_cmp(&b.top));
            match below {
                Some(s) => {
                    obj.pose.translation.z += s.top - base;
                    obj.attachment = Attachment::OnSurface { support: s.name.clone() };
                }
                None => obj.attachment = Attachment::Free,
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> (ExecutionTrace, WorldState) {
        self.trace.records.push(TraceRecord::FinalWorld { t: self.time, world: self.world.clone() });
        (self.trace, self.world)
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub trace: ExecutionTrace,
    pub world: WorldState,
    pub q: Vec<f64>,
    /// First error, tagged with its frame; execution halts there.
    pub error: Option<Error>,
}

impl RunOutcome {
    pub fn into_result(self) -> Result<(ExecutionTrace, WorldState)> {
        match self.error {
            Some(e) => Err(e),
            None => Ok((self.trace, self.world)),
        }
    }
}

/// Executes `program` frame by frame and halts on the first failing skill.
/// The trace is kept up to and including the failure.
pub fn run_program(program: &GMRProgram, world: &WorldState, robot: &RobotSpec, cfg: &SimConfig) -> Result<RunOutcome> {
    let mut session = Session::new(robot, world.clone(), *cfg, &program.provenance)?;
    let mut error = None;
    if let Some(f0) = program.frames.first() {
        let posture = f0.slots.first_laban.as_ref().map(|r| PostureTarget::from_row(r, f0.actor)).transpose();
        match posture.and_then(|p| session.settle(p.as_ref(), 0, f0.task)) {
            Ok(()) => {}
            Err(e) => error = Some(e.at_frame(0)),
        }
    }
    if error.is_none() {
        for (i, frame) in program.frames.iter().enumerate() {
            if let Err(e) = session.execute_frame(i, frame) {
                error = Some(e.at_frame(i));
                break;
            }
        }
    }
    let q = session.q.clone();
    let (trace, world) = session.finish();
    Ok(RunOutcome { trace, world, q, error })
}
