//! Execution traces and postcondition checks.

use serde::{Deserialize, Serialize};

use crate::contact::{MotionKind, TaskMatch, TaskRegistry, TaskType};
use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::taskmodel::GMRProgram;

use super::ik::ArmSymbols;
use super::skill::{SkillLibrary, Termination};
use super::world::{contact_class_of, WorldSnapshot, WorldState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub robot: String,
    pub world: String,
    pub program: String,
    pub drag_threshold: f64,
    pub position_tol: f64,
    pub joint_names: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub frame: usize,
    pub task: TaskType,
    pub q: Vec<f64>,
    /// Achieved TCP position and rotation vector.
    pub hand: Vec3<f64>,
    pub hand_rotation: Vec3<f64>,
    /// Commanded TCP position.
    pub target: Vec3<f64>,
    pub position_error: f64,
    pub angle_error_deg: f64,
    /// Environment reaction on the held object (N).
    pub drag_force: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fingertip_forces: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    FingertipForce,
    DragOnset,
    ForceFreeAndReached,
    Departed,
    Error,
}

impl From<Termination> for TerminationReason {
    fn from(t: Termination) -> Self {
        match t {
            Termination::FingertipForce => TerminationReason::FingertipForce,
            Termination::DragOnset => TerminationReason::DragOnset,
            Termination::ForceFreeAndReached => TerminationReason::ForceFreeAndReached,
            Termination::Departed => TerminationReason::Departed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerminationEvent {
    pub t: f64,
    pub frame: usize,
    pub task: TaskType,
    pub reason: TerminationReason,
    pub steps: usize,
    pub drag_force: f64,
    /// Distance from the hand to the skill's goal position, if it has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotPhase {
    Before,
    After,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkillVerdict {
    pub frame: usize,
    pub task: TaskType,
    pub completed: bool,
    /// Robot arm symbols at the end of the skill and whether they equal the
    /// frame's final Laban row (upper arm, forearm).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm: Option<ArmSymbols>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laban_match: Option<[bool; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TraceRecord {
    Header(TraceHeader),
    Step(StepRecord),
    Snapshot { t: f64, frame: usize, phase: SnapshotPhase, world: WorldSnapshot },
    Termination(TerminationEvent),
    Verdict(SkillVerdict),
    FinalWorld { t: f64, world: WorldState },
}

impl TraceRecord {
    pub fn time(&self) -> Option<f64> {
        match self {
            TraceRecord::Header(_) | TraceRecord::Verdict(_) => None,
            TraceRecord::Step(s) => Some(s.t),
            TraceRecord::Snapshot { t, .. } | TraceRecord::FinalWorld { t, .. } => Some(*t),
            TraceRecord::Termination(e) => Some(e.t),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub records: Vec<TraceRecord>,
}

impl ExecutionTrace {
    pub fn header(&self) -> Option<&TraceHeader> {
        self.records.iter().find_map(|r| match r {
            TraceRecord::Header(h) => Some(h),
            _ => None,
        })
    }

    pub fn steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter_map(|r| match r {
            TraceRecord::Step(s) => Some(s),
            _ => None,
        })
    }

    pub fn frame_steps(&self, frame: usize) -> Vec<&StepRecord> {
        self.steps().filter(|s| s.frame == frame).collect()
    }

    pub fn terminations(&self) -> impl Iterator<Item = &TerminationEvent> {
        self.records.iter().filter_map(|r| match r {
            TraceRecord::Termination(e) => Some(e),
            _ => None,
        })
    }

    pub fn termination(&self, frame: usize) -> Option<&TerminationEvent> {
        self.terminations().find(|e| e.frame == frame)
    }

    pub fn verdicts(&self) -> impl Iterator<Item = &SkillVerdict> {
        self.records.iter().filter_map(|r| match r {
            TraceRecord::Verdict(v) => Some(v),
            _ => None,
        })
    }

    pub fn snapshot(&self, frame: usize, phase: SnapshotPhase) -> Option<&WorldSnapshot> {
        self.records.iter().find_map(|r| match r {
            TraceRecord::Snapshot { frame: f, phase: p, world, .. } if *f == frame && *p == phase => Some(world),
            _ => None,
        })
    }

    pub fn final_world(&self) -> Option<&WorldState> {
        self.records.iter().rev().find_map(|r| match r {
            TraceRecord::FinalWorld { world, .. } => Some(world),
            _ => None,
        })
    }

    /// Largest achieved-versus-commanded hand position error.
    pub fn max_position_error(&self) -> f64 {
        self.steps().map(|s| s.position_error).fold(0.0, f64::max)
    }

    pub fn max_angle_error_deg(&self) -> f64 {
        self.steps().map(|s| s.angle_error_deg).fold(0.0, f64::max)
    }

    /// Monotone time and one termination event per executed skill.
    pub fn check_invariants(&self) -> Result<()> {
        let mut last = f64::NEG_INFINITY;
        for r in &self.records {
            if let Some(t) = r.time() {
                if t < last {
                    return Err(Error::invalid(format!("trace time goes backwards at t={t}")));
                }
                last = t;
            }
        }
        let mut frames: Vec<usize> = self.steps().map(|s| s.frame).collect();
        frames.dedup();
        for f in frames {
            let n = self.terminations().filter(|e| e.frame == f).count();
            if n != 1 {
                return Err(Error::invalid(format!("frame {f} has {n} termination events")));
            }
        }
        Ok(())
    }

    /// Newline-delimited JSON, one record per line.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("trace record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_ndjson(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: TraceRecord = serde_json::from_str(line)
                .map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
            records.push(r);
        }
        Ok(ExecutionTrace { records })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FrameStatus {
    Pass,
    Fail { reasons: Vec<String> },
    NotExecuted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameCheck {
    pub frame: usize,
    pub task: TaskType,
    #[serde(flatten)]
    pub status: FrameStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub frames: Vec<FrameCheck>,
    pub passed: bool,
}

fn attachment_class(s: &WorldSnapshot, object: &str, world: &WorldState) -> Option<crate::contact::ContactStateClass> {
    s.attachments
        .iter()
        .find(|(n, _)| n == object)
        .map(|(_, a)| contact_class_of(a, &world.supports))
}

/// Re-checks each frame against the trace: the object's contact classes
/// before and after (from the recorded attachments, resolved against the
/// supports of `world`) must equal the registry's transition, hand tasks
/// must take or let go of the object, and each skill must have ended the way
/// its termination rule demands.
pub fn verify_postconditions(trace: &ExecutionTrace, program: &GMRProgram, world: &WorldState) -> VerificationReport {
    let registry = TaskRegistry::default();
    let library = SkillLibrary::default();
    let (threshold, tol) = trace.header().map_or((1.0, 1e-3), |h| (h.drag_threshold, h.position_tol));
    let mut frames = Vec::with_capacity(program.frames.len());
    for (i, frame) in program.frames.iter().enumerate() {
        let Some(event) = trace.termination(i) else {
            frames.push(FrameCheck { frame: i, task: frame.task, status: FrameStatus::NotExecuted });
            continue;
        };
        let mut reasons = Vec::new();
        if event.reason == TerminationReason::Error {
            reasons.push(format!("skill failed: {}", event.message.as_deref().unwrap_or("unknown error")));
        }
        let before = trace.snapshot(i, SnapshotPhase::Before);
        let after = trace.snapshot(i, SnapshotPhase::After);
        match (before, after) {
            (Some(b), Some(a)) if reasons.is_empty() => match frame.task {
                TaskType::Grasp => {
                    if b.held.is_some() || a.held.as_deref() != Some(frame.object.as_str()) {
                        reasons.push(format!("hand does not take `{}`", frame.object));
                    }
                }
                TaskType::Release => {
                    if b.held.as_deref() != Some(frame.object.as_str()) || a.held.is_some() {
                        reasons.push(format!("hand does not let go of `{}`", frame.object));
                    }
                }
                task => {
                    let entry = registry.entry(task).expect("default registry");
                    let cb = attachment_class(b, &frame.object, world);
                    let ca = attachment_class(a, &frame.object, world);
                    if cb != Some(entry.before) || ca != Some(entry.after) {
                        reasons.push(format!(
                            "transition {} → {} differs from {} → {}",
                            cb.map_or("missing".to_string(), |c| c.to_string()),
                            ca.map_or("missing".to_string(), |c| c.to_string()),
                            entry.before,
                            entry.after
                        ));
                    } else if entry.motion != MotionKind::Semantic
                        && cb.zip(ca).map(|(b, a)| registry.lookup(entry.motion, b, a)) != Some(TaskMatch::Task(task))
                    {
                        reasons.push(format!("transition does not classify as {task}"));
                    }
                }
            },
            (_, _) if reasons.is_empty() => reasons.push("world snapshots missing".into()),
            _ => {}
        }
        if reasons.is_empty() {
            let expected: TerminationReason =
                library.for_task(frame.task).map(|s| s.termination.into()).unwrap_or(TerminationReason::Error);
            let steps = trace.frame_steps(i);
            if event.reason != expected {
                reasons.push(format!("terminated by {:?}, expected {:?}", event.reason, expected));
            }
            match expected {
                TerminationReason::DragOnset => {
                    let last = steps.last().map_or(0.0, |s| s.drag_force);
                    if !(last > threshold) {
                        reasons.push(format!("final drag force {last} does not exceed {threshold}"));
                    }
                    if steps.len() > 1 && steps[..steps.len() - 1].iter().any(|s| s.drag_force > threshold) {
                        reasons.push("drag force above threshold before the final step".into());
                    }
                }
                TerminationReason::ForceFreeAndReached | TerminationReason::Departed => {
                    if event.drag_force > threshold {
                        reasons.push(format!("drag force {} at termination", event.drag_force));
                    }
                    match event.goal_error {
                        Some(e) if e <= tol => {}
                        other => reasons.push(format!("goal not reached (error {other:?})")),
                    }
                }
                _ => {}
            }
        }
        let status = if reasons.is_empty() { FrameStatus::Pass } else { FrameStatus::Fail { reasons } };
        frames.push(FrameCheck { frame: i, task: frame.task, status });
    }
    let passed = frames.iter().all(|f| f.status == FrameStatus::Pass);
    VerificationReport { frames, passed }
}
