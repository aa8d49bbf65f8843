//! Demonstration recording file format.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laban::{activity_from_frames, ActivitySignal, GrayFrame, SkeletonFrame};
use crate::linalg::Vec3;
use crate::taskmodel::{Hand, TrackSample};

pub const RECORDING_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordedFrame {
    pub timestamp: f64,
    pub joints: BTreeMap<String, Vec3<f64>>,
    /// Position of the acting hand.
    pub hand: Vec3<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstructionEvent {
    /// Utterance onset, seconds on the frame clock.
    pub time: f64,
    pub phrase: String,
    #[serde(default = "default_utterance")]
    pub duration: f64,
}

fn default_utterance() -> f64 {
    1.0
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordingMetadata {
    /// Why the object is grasped ("carry", "place", "open", ...).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grasp_purpose: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemonstrationRecording {
    pub version: u32,
    pub id: String,
    pub actor: Hand,
    pub frames: Vec<RecordedFrame>,
    /// Precomputed activity; wins over `gray_frames` when both are present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activity: Option<ActivitySignal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gray_frames: Option<Vec<GrayFrame>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_rate: Option<f64>,
    pub instructions: Vec<InstructionEvent>,
    #[serde(default)]
    pub object_tracks: BTreeMap<String, Vec<TrackSample>>,
    #[serde(default)]
    pub metadata: RecordingMetadata,
}

impl DemonstrationRecording {
    pub fn validate(&self) -> Result<()> {
        if self.version != RECORDING_VERSION {
            return Err(Error::Schema { path: "version".into(), message: format!("unsupported version {}", self.version) });
        }
        if self.frames.len() < 2 {
            return Err(Error::invalid("recording needs at least two frames"));
        }
        if let Some(i) = self.frames.windows(2).position(|w| w[1].timestamp <= w[0].timestamp) {
            return Err(Error::invalid(format!("frame timestamps must increase (frame {})", i + 1)));
        }
        if self.instructions.is_empty() {
            return Err(Error::invalid("recording has no instructions"));
        }
        for (k, track) in &self.object_tracks {
            if track.windows(2).any(|w| w[1].time <= w[0].time) {
                return Err(Error::invalid(format!("track `{k}` timestamps must increase")));
            }
        }
        let activity = self.activity_signal()?;
        let span = self.end_time() - self.start_time();
        if activity.duration() + 1.5 / activity.sample_rate < span {
            return Err(Error::invalid(format!(
                "activity covers {:.3} s but frames span {span:.3} s",
                activity.duration()
            )));
        }
        Ok(())
    }

    pub fn start_time(&self) -> f64 {
        self.frames[0].timestamp
    }

    pub fn end_time(&self) -> f64 {
        self.frames.last().map_or(0.0, |f| f.timestamp)
    }

    /// Activity as given, or computed from the grayscale frames.
    pub fn activity_signal(&self) -> Result<ActivitySignal> {
        if let Some(a) = &self.activity {
            a.validate()?;
            return Ok(a.clone());
        }
        match (&self.gray_frames, self.frame_rate) {
            (Some(g), Some(rate)) => activity_from_frames(g, rate),
            (Some(_), None) => Err(Error::invalid("gray_frames given without frame_rate")),
            _ => Err(Error::invalid("recording has neither activity nor gray_frames")),
        }
    }

    pub fn skeleton(&self) -> Vec<SkeletonFrame> {
        self.frames.iter().map(|f| SkeletonFrame { timestamp: f.timestamp, joints: f.joints.clone() }).collect()
    }

    pub fn hand_track(&self) -> Vec<TrackSample> {
        self.frames.iter().map(|f| TrackSample { time: f.timestamp, position: f.hand }).collect()
    }
}

/// Parses and validates a recording, with path-precise schema errors.
pub fn parse_recording(text: &str) -> Result<DemonstrationRecording> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let rec: DemonstrationRecording = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() {
            Error::Parse { line: inner.line(), message: inner.to_string() }
        } else {
            Error::Schema { path, message: inner.to_string() }
        }
    })?;
    rec.validate()?;
    Ok(rec)
}

pub fn serialize_recording(rec: &DemonstrationRecording) -> String {
    let mut s = serde_json::to_string(rec).expect("recording serializes");
    s.push('\n');
    s
}
