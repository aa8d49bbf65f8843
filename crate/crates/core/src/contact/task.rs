//! Task types and the registry mapping contact-state transitions to them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::cone::{ContactStateClass, FeasibleCone};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskType {
    Grasp,
    Release,
    PTG11,
    PTG13,
    PTG31,
    PTG33,
    PTG51,
    PTG53,
    STG12,
}

impl TaskType {
    pub const ALL: [TaskType; 9] = [
        TaskType::Grasp,
        TaskType::Release,
        TaskType::PTG11,
        TaskType::PTG13,
        TaskType::PTG31,
        TaskType::PTG33,
        TaskType::PTG51,
        TaskType::PTG53,
        TaskType::STG12,
    ];

    pub fn display_name(&self) -> &'static str {
        match self {
            TaskType::Grasp => "Grasp",
            TaskType::Release => "Release",
            TaskType::PTG11 => "Pick",
            TaskType::PTG13 => "Place",
            TaskType::PTG31 => "Drawer-open",
            TaskType::PTG33 => "Drawer-close",
            TaskType::PTG51 => "Door-open",
            TaskType::PTG53 => "Door-close",
            TaskType::STG12 => "Bring-carefully",
        }
    }

    pub fn is_hand_task(&self) -> bool {
        matches!(self, TaskType::Grasp | TaskType::Release)
    }

    pub fn is_physical(&self) -> bool {
        matches!(
            self,
            TaskType::PTG11 | TaskType::PTG13 | TaskType::PTG31 | TaskType::PTG33 | TaskType::PTG51 | TaskType::PTG53
        )
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for TaskType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskType::ALL
            .iter()
            .find(|t| t.to_string().eq_ignore_ascii_case(s) || t.display_name().eq_ignore_ascii_case(s))
            .copied()
            .ok_or_else(|| Error::UnregisteredTask(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    Translation,
    Rotation,
    Semantic,
    Hand,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskEntry {
    pub task: TaskType,
    pub motion: MotionKind,
    /// Environment contact state of the object before and after the task.
    pub before: ContactStateClass,
    pub after: ContactStateClass,
    pub inverse: Option<TaskType>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskMatch {
    Task(TaskType),
    Unknown,
}

/// Immutable table of task definitions.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskRegistry {
    entries: Vec<TaskEntry>,
}

impl TaskRegistry {
    /// Validates uniqueness of task keys and of (motion, before, after)
    /// triples, and that each physical task declares a registered inverse whose
    /// transition is the reverse of its own.
    pub fn new(entries: Vec<TaskEntry>) -> Result<Self> {
        for (i, e) in entries.iter().enumerate() {
            for f in &entries[i + 1..] {
                if e.task == f.task {
                    return Err(Error::invalid(format!("task {} registered twice", e.task)));
                }
                if e.motion != MotionKind::Hand && (e.motion, e.before, e.after) == (f.motion, f.before, f.after) {
                    return Err(Error::invalid(format!(
                        "tasks {} and {} share the same transition",
                        e.task, f.task
                    )));
                }
            }
        }
        let reg = TaskRegistry { entries };
        for e in &reg.entries {
            if !e.task.is_physical() {
                continue;
            }
            let inv = e
                .inverse
                .ok_or_else(|| Error::invalid(format!("task {} lacks an inverse", e.task)))?;
            let ie = reg
                .entry(inv)
                .ok_or_else(|| Error::invalid(format!("inverse {inv} of {} is not registered", e.task)))?;
            if ie.inverse != Some(e.task) || ie.before != e.after || ie.after != e.before || ie.motion != e.motion {
                return Err(Error::invalid(format!("{} and {inv} are not mutual inverses", e.task)));
            }
        }
        Ok(reg)
    }

    pub fn entries(&self) -> &[TaskEntry] {
        &self.entries
    }

    pub fn entry(&self, task: TaskType) -> Option<&TaskEntry> {
        self.entries.iter().find(|e| e.task == task)
    }

    pub fn lookup(&self, motion: MotionKind, before: ContactStateClass, after: ContactStateClass) -> TaskMatch {
        self.entries
            .iter()
            .find(|e| e.motion == motion && e.before == before && e.after == after && motion != MotionKind::Hand)
            .map(|e| TaskMatch::Task(e.task))
            .unwrap_or(TaskMatch::Unknown)
    }
}

impl Default for TaskRegistry {
    fn default() -> Self {
        use ContactStateClass::*;
        use MotionKind::*;
        let e = |task, motion, before, after, inverse| TaskEntry { task, motion, before, after, inverse };
        TaskRegistry::new(vec![
            e(TaskType::PTG11, Translation, Hemisphere, FullSphere, Some(TaskType::PTG13)),
            e(TaskType::PTG13, Translation, FullSphere, Hemisphere, Some(TaskType::PTG11)),
            e(TaskType::PTG31, Translation, SinglePoint, AntipodalPair, Some(TaskType::PTG33)),
            e(TaskType::PTG33, Translation, AntipodalPair, SinglePoint, Some(TaskType::PTG31)),
            e(TaskType::PTG51, Rotation, SinglePoint, AntipodalPair, Some(TaskType::PTG53)),
            e(TaskType::PTG53, Rotation, AntipodalPair, SinglePoint, Some(TaskType::PTG51)),
            e(TaskType::STG12, Semantic, FullSphere, FullSphere, None),
            e(TaskType::Grasp, Hand, FullSphere, FullSphere, Some(TaskType::Release)),
            e(TaskType::Release, Hand, FullSphere, FullSphere, Some(TaskType::Grasp)),
        ])
        .expect("built-in registry is consistent")
    }
}

/// Looks up the task realizing a change of contact state.
pub fn classify_transition<T: Real>(
    registry: &TaskRegistry,
    before: &FeasibleCone<T>,
    after: &FeasibleCone<T>,
    motion: MotionKind,
) -> TaskMatch {
    registry.lookup(motion, before.class, after.class)
}
