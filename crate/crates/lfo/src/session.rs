//! Review sessions: an encoded draft plus an append-only log of user edits.
//!
//! A session lives beside its recording: `<id>.rec.json` holds the
//! demonstration and `<id>.edits.ndjson` one edit per line. The draft is never
//! stored; it is rebuilt by encoding the recording and replaying the log, so
//! replay on a fresh process gives the same draft.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use lfo_core::contact::{TaskRegistry, TaskType};
use lfo_core::encoder::{
    default_purpose, draft_program, parse_recording, segment_demonstration, DemonstrationRecording, EncoderConfig, Segment,
};
use lfo_core::laban::{encode_skeleton, LabanScore};
use lfo_core::taskmodel::{
    instantiate_frame, run_daemons, to_canonical, validate_program, GMRProgram, ReviewMarker, SegmentData, Slots, TaskFrame,
    Violation,
};
use lfo_core::{Error, Result};

pub const RECORDING_SUFFIX: &str = ".rec.json";
pub const EDITS_SUFFIX: &str = ".edits.ndjson";
pub const TRACE_SUFFIX: &str = ".trace.ndjson";
pub const EXPORT_SUFFIX: &str = ".program.json";

/// Requested change to one frame. A task change re-instantiates the frame for
/// the new task, refills its slots from the segment's recording and clears
/// its review marker; when the new task's daemons cannot run there, the old
/// slot values stay. Slot keys are applied after that; `null` clears one.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FramePatch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slots: Option<Map<String, Value>>,
}

/// One line of the edit log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edit {
    pub seq: usize,
    /// Seconds since the Unix epoch.
    pub at: f64,
    pub frame: usize,
    #[serde(flatten)]
    pub patch: FramePatch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendingReview {
    pub frame: usize,
    pub marker: ReviewMarker,
}

/// Forced export of a program that still has violations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcedExport {
    pub warnings: Vec<Violation>,
    pub program: GMRProgram,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Export {
    /// Canonical program text.
    Clean(String),
    /// Canonical text of a [`ForcedExport`].
    Forced(String),
}

#[derive(Clone, Debug)]
pub struct Session {
    pub id: String,
    pub recording_path: PathBuf,
    pub recording: DemonstrationRecording,
    pub segments: Vec<Segment>,
    pub draft: GMRProgram,
    pub edits: Vec<Edit>,
    registry: TaskRegistry,
    columns: Vec<String>,
}

/// Session ids are file stems; anything that could escape the directory is
/// rejected.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

pub fn session_path(dir: &Path, id: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{id}{suffix}"))
}

/// Ids of all recordings in `dir`, sorted.
pub fn list_ids(dir: &Path) -> Result<Vec<String>> {
    let mut ids: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(RECORDING_SUFFIX)).map(String::from))
        .filter(|id| valid_id(id))
        .collect();
    ids.sort();
    Ok(ids)
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

impl Session {
    /// Encodes a recording into an unedited draft. Grammar violations do not
    /// stop the draft; they are what the reviewer fixes.
    pub fn from_recording(id: &str, recording_path: PathBuf, recording: DemonstrationRecording) -> Result<Self> {
        let cfg = EncoderConfig::default();
        let segments = segment_demonstration(&recording, &cfg.pause)?;
        let draft = draft_program(&recording, &segments, &cfg)?;
        Ok(Session {
            id: id.to_string(),
            recording_path,
            recording,
            segments,
            draft,
            edits: Vec::new(),
            registry: cfg.registry,
            columns: cfg.columns,
        })
    }

    /// Loads `<id>.rec.json` from `dir` and replays `<id>.edits.ndjson`.
    pub fn open(dir: &Path, id: &str) -> Result<Self> {
        if !valid_id(id) {
            return Err(Error::invalid(format!("invalid session id `{id}`")));
        }
        let path = session_path(dir, id, RECORDING_SUFFIX);
        let rec = parse_recording(&fs::read_to_string(&path)?)?;
        let mut s = Session::from_recording(id, path, rec)?;
        let log = session_path(dir, id, EDITS_SUFFIX);
        if log.exists() {
            let text = fs::read_to_string(&log)?;
            s.replay(&parse_edit_log(&text)?)?;
        }
        Ok(s)
    }

    /// Applies logged edits in order.
    pub fn replay(&mut self, edits: &[Edit]) -> Result<()> {
        for e in edits {
            let f = self.patched(e.frame, &e.patch)?;
            self.draft.frames[e.frame] = f;
            self.edits.push(e.clone());
        }
        Ok(())
    }

    fn checked_frame(&self, frame: usize) -> Result<usize> {
        if frame >= self.draft.frames.len() {
            return Err(Error::invalid(format!("frame {frame} out of range (program has {})", self.draft.frames.len())));
        }
        Ok(frame)
    }

    /// The frame after `patch`, or the field-level reason it is rejected.
    pub fn patched(&self, frame: usize, patch: &FramePatch) -> Result<TaskFrame> {
        let old = &self.draft.frames[self.checked_frame(frame)?];
        let mut f = match patch.task {
            Some(task) => {
                let fresh = instantiate_frame(&self.registry, task, &old.object, old.actor)?;
                self.refilled(frame, task, &fresh).unwrap_or_else(|_| TaskFrame { slots: old.slots.clone(), ..fresh })
            }
            None => old.clone(),
        };
        if let Some(changes) = &patch.slots {
            let Value::Object(mut obj) = serde_json::to_value(&f.slots).expect("slots serialize") else {
                unreachable!("slots serialize to an object")
            };
            for (k, v) in changes {
                if v.is_null() {
                    obj.remove(k);
                } else {
                    obj.insert(k.clone(), v.clone());
                }
            }
            f.slots = serde_path_to_error::deserialize::<_, Slots>(Value::Object(obj))
                .map_err(|e| Error::Schema { path: format!("slots.{}", e.path()), message: e.into_inner().to_string() })?;
        }
        let problems = f.slots.value_problems();
        if !problems.is_empty() {
            return Err(Error::Schema { path: "slots".into(), message: problems.join("; ") });
        }
        Ok(f)
    }

    fn refilled(&self, frame: usize, task: TaskType, fresh: &TaskFrame) -> Result<TaskFrame> {
        let seg = &self.segments[frame];
        let mut tasks: Vec<TaskType> = self.draft.frames.iter().map(|f| f.task).collect();
        tasks[frame] = task;
        let purpose = self.recording.metadata.grasp_purpose.clone().unwrap_or_else(|| default_purpose(&tasks).to_string());
        let (skeleton, hand) = (self.recording.skeleton(), self.recording.hand_track());
        let data = SegmentData {
            t_start: seg.t_start,
            t_end: seg.t_end,
            skeleton: &skeleton,
            columns: &self.columns,
            hand: &hand,
            object_track: self.recording.object_tracks.get(&fresh.object).map(|v| v.as_slice()),
            grasp_purpose: Some(&purpose),
        };
        run_daemons(fresh, &data)
    }

    /// Validates, appends to `log` (when given), then applies. Nothing changes
    /// when any step fails.
    pub fn edit(&mut self, frame: usize, patch: FramePatch, log: Option<&Path>) -> Result<&TaskFrame> {
        let f = self.patched(frame, &patch)?;
        let e = Edit { seq: self.edits.len(), at: now(), frame, patch };
        if let Some(path) = log {
            let mut line = serde_json::to_string(&e).expect("edit serializes");
            line.push('\n');
            OpenOptions::new().create(true).append(true).open(path)?.write_all(line.as_bytes())?;
        }
        self.draft.frames[frame] = f;
        self.edits.push(e);
        Ok(&self.draft.frames[frame])
    }

    pub fn validation(&self) -> ValidationReport {
        let violations = validate_program(&self.draft).err().unwrap_or_default();
        ValidationReport { ok: violations.is_empty(), violations }
    }

    pub fn pending_reviews(&self) -> Vec<PendingReview> {
        self.draft
            .frames
            .iter()
            .enumerate()
            .filter_map(|(i, f)| f.review.clone().map(|marker| PendingReview { frame: i, marker }))
            .collect()
    }

    /// Canonical export; refused with the report while violations exist
    /// unless forced.
    pub fn export(&self, force: bool) -> std::result::Result<Export, ValidationReport> {
        let report = self.validation();
        if report.ok {
            Ok(Export::Clean(to_canonical(&self.draft)))
        } else if force {
            let forced = ForcedExport { warnings: report.violations, program: self.draft.clone() };
            let mut s = serde_json::to_string_pretty(&forced).expect("export serializes");
            s.push('\n');
            Ok(Export::Forced(s))
        } else {
            Err(report)
        }
    }

    /// Posture score with one row per stop.
    pub fn laban(&self) -> Result<LabanScore> {
        let pauses: Vec<f64> = self.segments.iter().map(|s| s.t_end).collect();
        encode_skeleton(&self.recording.skeleton(), &pauses, &self.columns, 1.0)
    }
}

pub fn parse_edit_log(text: &str) -> Result<Vec<Edit>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let e: Edit = serde_json::from_str(line).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        if e.seq != out.len() {
            return Err(Error::Parse { line: i + 1, message: format!("edit sequence {} out of order", e.seq) });
        }
        out.push(e);
    }
    Ok(out)
}
