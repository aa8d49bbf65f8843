//! Task frames: one instantiated task model with its skill-parameter slots.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::contact::{ContactStateClass, SemanticConstraint, TaskRegistry, TaskType};
use crate::error::{Error, Result};
use crate::grasp::ClosureType;
use crate::laban::LabanRow;
use crate::linalg::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hand {
    Left,
    Right,
}

impl Hand {
    pub fn as_str(&self) -> &'static str {
        match self {
            Hand::Left => "left",
            Hand::Right => "right",
        }
    }
}

impl fmt::Display for Hand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Hand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" => Ok(Hand::Left),
            "right" => Ok(Hand::Right),
            other => Err(Error::invalid(format!("unknown hand `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotName {
    FirstLaban,
    LastLaban,
    InitialPosition,
    ApproachDir,
    ApproachDistance,
    DetachDir,
    DetachDistance,
    GraspClosure,
    Displacement,
    RotationAxis,
    RotationAngle,
    Constraint,
}

impl SlotName {
    pub fn as_str(&self) -> &'static str {
        match self {
            SlotName::FirstLaban => "first_laban",
            SlotName::LastLaban => "last_laban",
            SlotName::InitialPosition => "initial_position",
            SlotName::ApproachDir => "approach_dir",
            SlotName::ApproachDistance => "approach_distance",
            SlotName::DetachDir => "detach_dir",
            SlotName::DetachDistance => "detach_distance",
            SlotName::GraspClosure => "grasp_closure",
            SlotName::Displacement => "displacement",
            SlotName::RotationAxis => "rotation_axis",
            SlotName::RotationAngle => "rotation_angle",
            SlotName::Constraint => "constraint",
        }
    }
}

impl fmt::Display for SlotName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Skill parameters. Unfilled slots are absent from the serialized form.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Slots {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_laban: Option<LabanRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_laban: Option<LabanRow>,
    /// Object position at the start of the task, world frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_position: Option<Vec3<f64>>,
    /// Direction of hand travel just before the task ends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approach_dir: Option<Vec3<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approach_distance: Option<f64>,
    /// Direction of hand travel just after the task starts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detach_dir: Option<Vec3<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detach_distance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grasp_closure: Option<ClosureType>,
    /// Net hand displacement over the task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub displacement: Option<Vec3<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation_axis: Option<Vec3<f64>>,
    /// Radians, positive about `rotation_axis`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation_angle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<SemanticConstraint<f64>>,
}

impl Slots {
    pub fn is_filled(&self, slot: SlotName) -> bool {
        match slot {
            SlotName::FirstLaban => self.first_laban.is_some(),
            SlotName::LastLaban => self.last_laban.is_some(),
            SlotName::InitialPosition => self.initial_position.is_some(),
            SlotName::ApproachDir => self.approach_dir.is_some(),
            SlotName::ApproachDistance => self.approach_distance.is_some(),
            SlotName::DetachDir => self.detach_dir.is_some(),
            SlotName::DetachDistance => self.detach_distance.is_some(),
            SlotName::GraspClosure => self.grasp_closure.is_some(),
            SlotName::Displacement => self.displacement.is_some(),
            SlotName::RotationAxis => self.rotation_axis.is_some(),
            SlotName::RotationAngle => self.rotation_angle.is_some(),
            SlotName::Constraint => self.constraint.is_some(),
        }
    }

    /// Problems with filled values: non-unit directions, negative or
    /// non-finite distances, malformed constraints.
    pub fn value_problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let dirs = [
            (SlotName::ApproachDir, self.approach_dir),
            (SlotName::DetachDir, self.detach_dir),
            (SlotName::RotationAxis, self.rotation_axis),
        ];
        for (name, d) in dirs {
            if let Some(d) = d {
                if !d.is_finite() || (d.norm() - 1.0).abs() > 1e-6 {
                    out.push(format!("{name} is not a unit vector"));
                }
            }
        }
        for (name, v) in [(SlotName::ApproachDistance, self.approach_distance), (SlotName::DetachDistance, self.detach_distance)] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    out.push(format!("{name} must be a non-negative distance, got {v}"));
                }
            }
        }
        for (name, v) in [(SlotName::InitialPosition, self.initial_position), (SlotName::Displacement, self.displacement)] {
            if v.is_some_and(|v| !v.is_finite()) {
                out.push(format!("{name} is not finite"));
            }
        }
        if self.rotation_angle.is_some_and(|a| !a.is_finite()) {
            out.push("rotation_angle is not finite".into());
        }
        if let Some(Err(e)) = self.constraint.as_ref().map(|c| c.validate()) {
            out.push(format!("constraint: {e}"));
        }
        out
    }
}

/// Slot-filling procedures attached to a frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Daemon {
    /// Posture at the segment start → first_laban.
    LabanAtStart,
    /// Posture at the segment end → last_laban.
    LabanAtEnd,
    /// Annotated object track at the segment start → initial_position.
    ObjectTrack,
    /// Hand motion right after motion onset → detach_dir, detach_distance.
    DepartureWindow,
    /// Hand motion right before motion end → approach_dir, approach_distance.
    ArrivalWindow,
    /// Net hand displacement → displacement.
    NetDisplacement,
    /// Circle through the hand path → rotation_axis, rotation_angle.
    Circumcircle,
    /// Affordance table lookup → grasp_closure.
    Affordance,
    /// Default upright-orientation constraint → constraint.
    DefaultConstraint,
}

impl Daemon {
    pub fn slots(&self) -> &'static [SlotName] {
        use SlotName::*;
        match self {
            Daemon::LabanAtStart => &[FirstLaban],
            Daemon::LabanAtEnd => &[LastLaban],
            Daemon::ObjectTrack => &[InitialPosition],
            Daemon::DepartureWindow => &[DetachDir, DetachDistance],
            Daemon::ArrivalWindow => &[ApproachDir, ApproachDistance],
            Daemon::NetDisplacement => &[Displacement],
            Daemon::Circumcircle => &[RotationAxis, RotationAngle],
            Daemon::Affordance => &[GraspClosure],
            Daemon::DefaultConstraint => &[Constraint],
        }
    }
}

/// Daemons run for each task type, in order.
pub fn daemons_for(task: TaskType) -> Vec<Daemon> {
    use Daemon::*;
    let mut out = vec![LabanAtStart, LabanAtEnd];
    out.extend_from_slice(match task {
        TaskType::Grasp => &[ObjectTrack, ArrivalWindow, Affordance][..],
        TaskType::Release => &[DepartureWindow],
        TaskType::PTG11 | TaskType::PTG31 => &[ObjectTrack, DepartureWindow],
        TaskType::PTG13 => &[ArrivalWindow, NetDisplacement],
        TaskType::PTG33 => &[ArrivalWindow],
        TaskType::PTG51 => &[ObjectTrack, Circumcircle, DepartureWindow],
        TaskType::PTG53 => &[Circumcircle, ArrivalWindow],
        TaskType::STG12 => &[NetDisplacement, DefaultConstraint],
    });
    out
}

/// Slots that must be filled for a frame of this type to be complete.
pub fn required_slots(task: TaskType) -> Vec<SlotName> {
    use SlotName::*;
    let mut out = vec![FirstLaban, LastLaban];
    out.extend_from_slice(match task {
        TaskType::Grasp => &[InitialPosition, ApproachDir, ApproachDistance, GraspClosure][..],
        TaskType::Release => &[DetachDir, DetachDistance],
        TaskType::PTG11 | TaskType::PTG31 => &[InitialPosition, DetachDir, DetachDistance],
        TaskType::PTG13 => &[ApproachDir, ApproachDistance, Displacement],
        TaskType::PTG33 => &[ApproachDir, ApproachDistance],
        TaskType::PTG51 => &[InitialPosition, RotationAxis, RotationAngle, DetachDir],
        TaskType::PTG53 => &[RotationAxis, RotationAngle, ApproachDir],
        TaskType::STG12 => &[Displacement, Constraint],
    });
    out
}

/// Object contact state before and after the task. Informational only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    pub before: ContactStateClass,
    pub after: ContactStateClass,
}

/// Left for a human to settle, e.g. an instruction that matched two tasks
/// equally well.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReviewMarker {
    pub phrase: String,
    pub candidates: Vec<TaskType>,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskFrame {
    pub task: TaskType,
    /// Absent for hand tasks, whose transition concerns the hand rather than
    /// the environment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<Transition>,
    pub actor: Hand,
    pub object: String,
    pub slots: Slots,
    pub daemons: Vec<Daemon>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub review: Option<ReviewMarker>,
}

impl TaskFrame {
    pub fn transition_labels(&self) -> Option<(&'static str, &'static str)> {
        self.transition.map(|t| (t.before.label(), t.after.label()))
    }

    pub fn missing_slots(&self) -> Vec<SlotName> {
        required_slots(self.task).into_iter().filter(|s| !self.slots.is_filled(*s)).collect()
    }
}

/// A frame with empty slots and the task's daemons attached.
pub fn instantiate_frame(registry: &TaskRegistry, task: TaskType, object: &str, actor: Hand) -> Result<TaskFrame> {
    let entry = registry.entry(task).ok_or_else(|| Error::UnregisteredTask(task.to_string()))?;
    let transition = (!task.is_hand_task()).then_some(Transition { before: entry.before, after: entry.after });
    Ok(TaskFrame {
        task,
        transition,
        actor,
        object: object.to_string(),
        slots: Slots::default(),
        daemons: daemons_for(task),
        review: None,
    })
}
