//! GMR programs: grammar checks and the JSON program format.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::contact::TaskType;
use crate::error::{Error, Result};

use super::frame::{Hand, TaskFrame, Transition};

pub const PROGRAM_VERSION: u32 = 1;

/// One Grasp, any number of manipulations, one Release, all on the same
/// object with the same hand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GMRProgram {
    pub version: u32,
    pub actor: Hand,
    pub object: String,
    /// Id of the demonstration the program was encoded from.
    pub provenance: String,
    pub frames: Vec<TaskFrame>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Offending frame, if the violation concerns one.
    pub frame: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.frame {
            Some(i) => write!(f, "frame {i}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

fn violation(frame: Option<usize>, message: impl Into<String>) -> Violation {
    Violation { frame, message: message.into() }
}

/// Door and drawer operations may end a sequence without a Release: the hand
/// stays on the handle.
pub fn may_end_without_release(task: TaskType) -> bool {
    matches!(task, TaskType::PTG31 | TaskType::PTG33 | TaskType::PTG51 | TaskType::PTG53)
}

/// Shape check on the task sequence alone.
pub fn grammar_violations(tasks: &[TaskType]) -> Vec<Violation> {
    let mut out = Vec::new();
    let Some((&last, _)) = tasks.split_last() else {
        return vec![violation(None, "empty task sequence")];
    };
    if tasks[0] != TaskType::Grasp {
        out.push(violation(Some(0), format!("sequence must begin with Grasp, found {}", tasks[0])));
    }
    let n = tasks.len();
    for (i, t) in tasks.iter().enumerate() {
        let at_start = i == 0 && *t == TaskType::Grasp;
        let at_end = i == n - 1 && *t == TaskType::Release && n > 1;
        if t.is_hand_task() && !at_start && !at_end {
            out.push(violation(Some(i), format!("{t} is only allowed at the {}", if *t == TaskType::Grasp { "start" } else { "end" })));
        }
    }
    if last != TaskType::Release && !may_end_without_release(last) && !(n == 1 && last != TaskType::Grasp) {
        out.push(violation(Some(n - 1), format!("sequence must end with Release, found {last}")));
    }
    out
}

/// Grammar, actor/object consistency and slot completeness, all violations
/// at once.
pub fn validate_gmr(frames: &[TaskFrame]) -> Result<(), Vec<Violation>> {
    let tasks: Vec<TaskType> = frames.iter().map(|f| f.task).collect();
    let mut out = grammar_violations(&tasks);
    if let Some(first) = frames.first() {
        for (i, f) in frames.iter().enumerate().skip(1) {
            if f.object != first.object {
                out.push(violation(Some(i), format!("object switches from `{}` to `{}`", first.object, f.object)));
            }
            if f.actor != first.actor {
                out.push(violation(Some(i), format!("actor switches from {} to {}", first.actor, f.actor)));
            }
        }
    }
    // each manipulation starts in the contact state the previous one left
    let mut left: Option<(usize, Transition)> = None;
    for (i, f) in frames.iter().enumerate() {
        let Some(t) = f.transition else { continue };
        if let Some((j, prev)) = left {
            if prev.after != t.before {
                out.push(violation(
                    Some(i),
                    format!(
                        "{} starts from {} but frame {j} leaves the object in {}",
                        f.task,
                        t.before.label(),
                        prev.after.label()
                    ),
                ));
            }
        }
        left = Some((i, t));
    }
    for (i, f) in frames.iter().enumerate() {
        let missing = f.missing_slots();
        if !missing.is_empty() {
            let names: Vec<&str> = missing.iter().map(|s| s.as_str()).collect();
            out.push(violation(Some(i), format!("{} is missing slots: {}", f.task, names.join(", "))));
        }
        for p in f.slots.value_problems() {
            out.push(violation(Some(i), p));
        }
    }
    if out.is_empty() { Ok(()) } else { Err(out) }
}

/// Frame checks plus agreement of the program header with its frames.
pub fn validate_program(p: &GMRProgram) -> Result<(), Vec<Violation>> {
    let mut out = validate_gmr(&p.frames).err().unwrap_or_default();
    if p.version != PROGRAM_VERSION {
        out.push(violation(None, format!("unsupported version {}", p.version)));
    }
    for (i, f) in p.frames.iter().enumerate() {
        if f.object != p.object {
            out.push(violation(Some(i), format!("frame object `{}` differs from program object `{}`", f.object, p.object)));
        }
        if f.actor != p.actor {
            out.push(violation(Some(i), format!("frame actor {} differs from program actor {}", f.actor, p.actor)));
        }
    }
    if out.is_empty() { Ok(()) } else { Err(out) }
}

pub fn violations_error(v: &[Violation]) -> Error {
    Error::Grammar(v.iter().map(|v| v.to_string()).collect())
}

/// Canonical text of a valid program: pretty JSON in declaration order with a
/// trailing newline.
pub fn serialize_program(p: &GMRProgram) -> Result<String> {
    validate_program(p).map_err(|v| violations_error(&v))?;
    Ok(to_canonical(p))
}

/// Canonical text without validation, for drafts under review.
pub fn to_canonical(p: &GMRProgram) -> String {
    let mut s = serde_json::to_string_pretty(p).expect("program serializes");
    s.push('\n');
    s
}

/// Parses program text. Only the schema is checked; grammar is left to
/// [`validate_program`].
pub fn parse_program(text: &str) -> Result<GMRProgram> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let p: GMRProgram = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() {
            Error::Parse { line: inner.line(), message: inner.to_string() }
        } else {
            Error::Schema { path, message: inner.to_string() }
        }
    })?;
    if p.version != PROGRAM_VERSION {
        return Err(Error::Schema { path: "version".into(), message: format!("unsupported version {}", p.version) });
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use TaskType::*;

    #[test]
    fn shapes() {
        assert!(grammar_violations(&[Grasp, PTG11, STG12, PTG13, Release]).is_empty());
        assert!(grammar_violations(&[Grasp, PTG11, STG12, STG12, STG12, PTG13, Release]).is_empty());
        assert!(grammar_violations(&[Grasp, PTG51]).is_empty());
        assert!(grammar_violations(&[Grasp, PTG31]).is_empty());
        let v = grammar_violations(&[PTG11, Release]);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].frame, Some(0));
        assert!(!grammar_violations(&[Grasp, PTG11]).is_empty());
        assert!(!grammar_violations(&[Grasp]).is_empty());
        assert!(!grammar_violations(&[Grasp, Release, PTG11, Release]).is_empty());
        assert!(!grammar_violations(&[Grasp, Grasp, Release]).is_empty());
        assert!(!grammar_violations(&[]).is_empty());
        assert!(!grammar_violations(&[Release]).is_empty());
    }

    #[test]
    fn manipulations_chain_contact_states() {
        use crate::contact::TaskRegistry;
        use crate::taskmodel::instantiate_frame;
        let reg = TaskRegistry::default();
        let frames = |tasks: &[TaskType]| -> Vec<TaskFrame> {
            tasks.iter().map(|t| instantiate_frame(&reg, *t, "box", Hand::Right).unwrap()).collect()
        };
        let chained = |v: &[Violation]| v.iter().filter(|v| v.message.contains("leaves the object")).count();
        let ok = validate_gmr(&frames(&[Grasp, PTG11, STG12, PTG13, Release])).unwrap_err();
        assert_eq!(chained(&ok), 0);
        // a place straight after a place
        let v = validate_gmr(&frames(&[Grasp, PTG11, PTG13, PTG13, Release])).unwrap_err();
        assert_eq!(chained(&v), 1);
        assert!(v.iter().any(|v| v.frame == Some(3) && v.message.contains("leaves the object")));
        // carrying an object that was never picked up
        let v = validate_gmr(&frames(&[Grasp, STG12, PTG13, Release])).unwrap_err();
        assert_eq!(chained(&v), 0, "grasp leaves the transition chain unopened");
        // place, then pick up again
        let v = validate_gmr(&frames(&[Grasp, PTG11, PTG13, PTG11, STG12, PTG13, Release])).unwrap_err();
        assert_eq!(chained(&v), 0);
        let v = validate_gmr(&frames(&[Grasp, PTG11, PTG11, Release])).unwrap_err();
        assert_eq!(chained(&v), 1);
    }

    #[test]
    fn schema_error_names_value() {
        let text = r#"{"version":1,"actor":"right","object":"box","provenance":"x","frames":[{"task":"PTG99","actor":"right","object":"box","slots":{},"daemons":[]}]}"#;
        match parse_program(text) {
            Err(Error::Schema { path, message }) => {
                assert_eq!(path, "frames[0].task");
                assert!(message.contains("PTG99"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_line() {
        assert!(matches!(parse_program("{\n\"version\": 1,\n oops"), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn version_checked() {
        let text = r#"{"version":2,"actor":"right","object":"box","provenance":"x","frames":[]}"#;
        assert!(matches!(parse_program(text), Err(Error::Schema { .. })));
    }
}
