//! Skill library: one scripted controller and termination rule per task.
//!
//! Controllers follow the hint-in, thresholded-force-in, hand-motion-out
//! interface, so a learned policy can replace a [`ScriptedPolicy`] without
//! touching the executor.

use serde::{Deserialize, Serialize};

use crate::contact::{TaskRegistry, TaskType};
use crate::error::{Error, Result};
use crate::linalg::{Mat3, Pose, Vec3};

/// Slot that supplies the direction of a straight hand motion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionSlot {
    Detach,
    Approach,
    Displacement,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Controller {
    /// Transit to a pre-grasp pose, approach the re-observed object, close
    /// the fingers onto the contact web.
    ReachAndClose,
    Translate { along: DirectionSlot },
    /// Rotation of the held object about its hinge.
    Rotate,
    /// Open the fingers, then depart along the detach direction.
    OpenAndDepart,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Every fingertip reports drag force.
    FingertipForce,
    /// The environment pushes back on the held object.
    DragOnset,
    /// No drag force and the hand is at the demonstrated position.
    ForceFreeAndReached,
    /// Fingers open, no drag force and the hand is at the departure position.
    Departed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skill {
    pub task: TaskType,
    pub controller: Controller,
    pub termination: Termination,
}

/// What a policy is told at the start of a skill.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hints {
    /// Unit direction of straight motion, or of the approach for grasps.
    pub direction: Vec3<f64>,
    /// Hand position that ends the skill, when the skill has one.
    pub goal: Option<Vec3<f64>>,
    /// Signed rotation about the hinge; open-ended rotations carry only the
    /// sign (±∞).
    pub angle: Option<f64>,
    pub pregrasp: Option<Pose<f64>>,
    pub grasp: Option<Pose<f64>>,
}

impl Hints {
    pub fn along(direction: Vec3<f64>, goal: Option<Vec3<f64>>) -> Self {
        Hints { direction, goal, angle: None, pregrasp: None, grasp: None }
    }
}

/// What a policy sees each step. Forces arrive only as threshold flags.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub step: usize,
    pub hand: Pose<f64>,
    pub drag: bool,
    pub fingertips: usize,
    pub fingertips_touching: usize,
    pub holding: bool,
    /// Hinge rotation applied so far in this skill.
    pub rotated: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Motion {
    /// Free-space move toward a TCP pose, interpolated in joint space; the
    /// executor decides the step.
    Transit(Pose<f64>),
    Translate(Vec3<f64>),
    /// Rotation of the held object about its hinge.
    Rotate(f64),
    CloseFingers,
    OpenFingers,
}

pub trait Policy {
    fn act(&mut self, obs: &Observation, hints: &Hints) -> Motion;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Transit,
    Approach,
    Close,
}

/// Interpolation between two poses: translation linearly, rotation along
/// the geodesic.
pub fn pose_towards(from: &Pose<f64>, to: &Pose<f64>, s: f64) -> Pose<f64> {
    let rel = from.rotation.transpose().mul_mat(&to.rotation);
    let rot = from.rotation.mul_mat(&Mat3::exp(&(rel.log() * s)));
    Pose::new(rot, from.translation.lerp(&to.translation, s))
}

/// Straight step of at most `len` toward `goal`.
fn step_toward(from: &Vec3<f64>, goal: &Vec3<f64>, len: f64) -> Vec3<f64> {
    let d = *goal - *from;
    let n = d.norm();
    if n <= len {
        d
    } else {
        d * (len / n)
    }
}

pub struct ScriptedPolicy {
    controller: Controller,
    step_length: f64,
    step_angle: f64,
    phase: Phase,
}

impl ScriptedPolicy {
    pub fn new(controller: Controller, step_length: f64, step_angle: f64) -> Self {
        ScriptedPolicy { controller, step_length, step_angle, phase: Phase::Transit }
    }
}

impl Policy for ScriptedPolicy {
    fn act(&mut self, obs: &Observation, hints: &Hints) -> Motion {
        match self.controller {
            Controller::ReachAndClose => {
                let (pre, grasp) = (hints.pregrasp.expect("grasp hints"), hints.grasp.expect("grasp hints"));
                if self.phase == Phase::Transit {
                    let dp = obs.hand.translation.distance(&pre.translation);
                    let da = pre.rotation.mul_mat(&obs.hand.rotation.transpose()).rotation_angle();
                    if dp > 1e-12 || da > 1e-12 {
                        return Motion::Transit(pre);
                    }
                    self.phase = Phase::Approach;
                }
                if self.phase == Phase::Approach {
                    if obs.hand.translation.distance(&grasp.translation) > 1e-12 {
                        return Motion::Translate(step_toward(&obs.hand.translation, &grasp.translation, self.step_length));
                    }
                    self.phase = Phase::Close;
                }
                Motion::CloseFingers
            }
            Controller::Translate { .. } => match hints.goal {
                Some(g) => Motion::Translate(step_toward(&obs.hand.translation, &g, self.step_length)),
                None => Motion::Translate(hints.direction * self.step_length),
            },
            Controller::Rotate => {
                let target = hints.angle.expect("rotation hint");
                let remaining = target - obs.rotated;
                Motion::Rotate(remaining.signum() * remaining.abs().min(self.step_angle))
            }
            Controller::OpenAndDepart => {
                if obs.holding {
                    return Motion::OpenFingers;
                }
                let g = hints.goal.expect("departure goal");
                Motion::Translate(step_toward(&obs.hand.translation, &g, self.step_length))
            }
        }
    }
}

impl Termination {
    pub fn satisfied(&self, obs: &Observation, hints: &Hints, position_tol: f64) -> bool {
        let reached = || hints.goal.is_some_and(|g| obs.hand.translation.distance(&g) <= position_tol);
        match self {
            Termination::FingertipForce => obs.fingertips > 0 && obs.fingertips_touching == obs.fingertips,
            Termination::DragOnset => obs.drag,
            Termination::ForceFreeAndReached => !obs.drag && reached(),
            Termination::Departed => !obs.holding && !obs.drag && reached(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkillLibrary {
    skills: Vec<Skill>,
}

impl SkillLibrary {
    /// Requires exactly one skill for every task in the registry.
    pub fn new(skills: Vec<Skill>, registry: &TaskRegistry) -> Result<Self> {
        for e in registry.entries() {
            let n = skills.iter().filter(|s| s.task == e.task).count();
            if n != 1 {
                return Err(Error::invalid(format!("task {} has {n} skills, expected exactly one", e.task)));
            }
        }
        if let Some(s) = skills.iter().find(|s| registry.entry(s.task).is_none()) {
            return Err(Error::UnregisteredTask(s.task.to_string()));
        }
        Ok(SkillLibrary { skills })
    }

    pub fn skills(&self) -> &[Skill] {
        &self.skills
    }

    pub fn for_task(&self, task: TaskType) -> Result<&Skill> {
        self.skills.iter().find(|s| s.task == task).ok_or_else(|| Error::UnregisteredTask(task.to_string()))
    }
}

impl Default for SkillLibrary {
    fn default() -> Self {
        use Controller::*;
        use DirectionSlot::*;
        use Termination::*;
        let s = |task, controller, termination| Skill { task, controller, termination };
        SkillLibrary::new(
            vec![
                s(TaskType::Grasp, ReachAndClose, FingertipForce),
                s(TaskType::Release, OpenAndDepart, Departed),
                s(TaskType::PTG11, Translate { along: Detach }, ForceFreeAndReached),
                s(TaskType::PTG13, Translate { along: Approach }, DragOnset),
                s(TaskType::PTG31, Translate { along: Detach }, ForceFreeAndReached),
                s(TaskType::PTG33, Translate { along: Approach }, DragOnset),
                s(TaskType::PTG51, Rotate, ForceFreeAndReached),
                s(TaskType::PTG53, Rotate, DragOnset),
                s(TaskType::STG12, Translate { along: Displacement }, ForceFreeAndReached),
            ],
            &TaskRegistry::default(),
        )
        .expect("built-in library covers the registry")
    }
}
