//! Stop-and-go segmentation and the encode pipeline.

use serde::{Deserialize, Serialize};

use crate::contact::{TaskRegistry, TaskType};
use crate::error::{Error, Result};
use crate::laban::{default_column_names, detect_pauses, PauseConfig};
use crate::taskmodel::{
    instantiate_frame, match_instruction, run_daemons, validate_gmr, violations_error, GMRProgram, InstructionMatch,
    Lexicon, ReviewMarker, SegmentData, TaskFrame, PROGRAM_VERSION,
};

use super::recording::DemonstrationRecording;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub index: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub instruction: String,
    /// Index of the assigned instruction event in the recording.
    pub instruction_index: usize,
    /// Range of recorded frames inside the segment.
    pub frame_range: (usize, usize),
}

/// Stop timestamps on the frame clock.
pub fn recording_pauses(rec: &DemonstrationRecording, cfg: &PauseConfig) -> Result<Vec<f64>> {
    let activity = rec.activity_signal()?;
    let t0 = rec.start_time();
    Ok(detect_pauses(&activity, cfg)?.into_iter().map(|t| t + t0).collect())
}

fn overlap(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.1.min(b.1) - a.0.max(b.0)).max(0.0)
}

fn gap(t: (f64, f64), seg: (f64, f64)) -> f64 {
    if t.1 < seg.0 {
        seg.0 - t.1
    } else if t.0 > seg.1 {
        t.0 - seg.1
    } else {
        0.0
    }
}

/// Index of the span that overlaps `t` most; ties go to the earlier span.
/// Without any overlap the nearest span wins.
pub fn assign_span(t: (f64, f64), spans: &[(f64, f64)]) -> usize {
    let mut best = 0;
    for (i, s) in spans.iter().enumerate().skip(1) {
        let (o, ob) = (overlap(t, *s), overlap(t, spans[best]));
        if o > ob || (o == ob && o == 0.0 && gap(t, *s) < gap(t, spans[best])) {
            best = i;
        }
    }
    best
}

/// Splits the recording at its stops: segment k runs from stop k−1 (the first
/// frame for k = 0) to stop k. Each instruction goes to the segment its
/// utterance overlaps most.
pub fn segment_demonstration(rec: &DemonstrationRecording, cfg: &PauseConfig) -> Result<Vec<Segment>> {
    rec.validate()?;
    let pauses = recording_pauses(rec, cfg)?;
    if pauses.len() != rec.instructions.len() {
        return Err(Error::Segmentation { pauses: pauses.len(), instructions: rec.instructions.len() });
    }
    let mut bounds = vec![rec.start_time()];
    bounds.extend(pauses.iter().copied());
    let spans: Vec<(f64, f64)> = bounds.windows(2).map(|w| (w[0], w[1])).collect();
    if let Some(i) = spans.iter().position(|s| s.1 <= s.0) {
        return Err(Error::invalid("stop at the first frame").at_segment(i));
    }
    let mut owner: Vec<Option<usize>> = vec![None; spans.len()];
    for (j, ins) in rec.instructions.iter().enumerate() {
        let k = assign_span((ins.time, ins.time + ins.duration.max(0.0)), &spans);
        if let Some(prev) = owner[k] {
            return Err(Error::invalid(format!(
                "instructions `{}` and `{}` both fall in this segment",
                rec.instructions[prev].phrase, ins.phrase
            ))
            .at_segment(k));
        }
        owner[k] = Some(j);
    }
    Ok(spans
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            let j = owner[k].expect("counts match and assignment is injective");
            let lo = rec.frames.partition_point(|f| f.timestamp < a);
            let hi = rec.frames.partition_point(|f| f.timestamp <= b);
            Segment {
                index: k,
                t_start: a,
                t_end: b,
                instruction: rec.instructions[j].phrase.clone(),
                instruction_index: j,
                frame_range: (lo, hi),
            }
        })
        .collect())
}

/// Purpose assumed when the recording does not state one.
pub fn default_purpose(tasks: &[TaskType]) -> &'static str {
    if tasks.iter().any(|t| matches!(t, TaskType::PTG31 | TaskType::PTG51)) {
        "open"
    } else if tasks.contains(&TaskType::PTG13) {
        "place"
    } else {
        "carry"
    }
}

#[derive(Clone, Debug)]
pub struct EncoderConfig {
    pub pause: PauseConfig,
    pub registry: TaskRegistry,
    pub lexicon: Lexicon,
    pub columns: Vec<String>,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            pause: PauseConfig::default(),
            registry: TaskRegistry::default(),
            lexicon: Lexicon::default(),
            columns: default_column_names(),
        }
    }
}

/// Everything the encoder produced, for inspection and review.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Encoding {
    pub segments: Vec<Segment>,
    pub program: GMRProgram,
}

/// Recognition, frame instantiation and daemon runs for every segment, without
/// the final grammar check.
pub fn draft_program(rec: &DemonstrationRecording, segments: &[Segment], cfg: &EncoderConfig) -> Result<GMRProgram> {
    let mut recognized = Vec::with_capacity(segments.len());
    let mut context: Option<String> = None;
    for seg in segments {
        let m = match_instruction(&seg.instruction, &cfg.lexicon).map_err(|e| e.at_segment(seg.index))?;
        let (task, named) = m.primary();
        let object = match named.or_else(|| context.clone()) {
            Some(o) => o,
            None => {
                return Err(Error::invalid(format!("`{}` names no object and none is in context", seg.instruction))
                    .at_segment(seg.index))
            }
        };
        context.get_or_insert_with(|| object.clone());
        let review = match &m {
            InstructionMatch::Ambiguous { candidates, .. } => Some(ReviewMarker {
                phrase: seg.instruction.clone(),
                candidates: candidates.iter().map(|c| c.0).collect(),
                reason: "instruction matches several tasks equally well".into(),
            }),
            InstructionMatch::Recognized { .. } => None,
        };
        recognized.push((task, object, review));
    }
    let tasks: Vec<TaskType> = recognized.iter().map(|r| r.0).collect();
    let purpose = rec.metadata.grasp_purpose.clone().unwrap_or_else(|| default_purpose(&tasks).to_string());
    let skeleton = rec.skeleton();
    let hand = rec.hand_track();
    let mut frames: Vec<TaskFrame> = Vec::with_capacity(segments.len());
    for (seg, (task, object, review)) in segments.iter().zip(recognized) {
        let mut frame = instantiate_frame(&cfg.registry, task, &object, rec.actor).map_err(|e| e.at_segment(seg.index))?;
        let data = SegmentData {
            t_start: seg.t_start,
            t_end: seg.t_end,
            skeleton: &skeleton,
            columns: &cfg.columns,
            hand: &hand,
            object_track: rec.object_tracks.get(&object).map(|v| v.as_slice()),
            grasp_purpose: Some(&purpose),
        };
        frame = run_daemons(&frame, &data).map_err(|e| e.at_segment(seg.index))?;
        frame.review = review;
        frames.push(frame);
    }
    Ok(GMRProgram {
        version: PROGRAM_VERSION,
        actor: rec.actor,
        object: frames.first().map(|f| f.object.clone()).unwrap_or_default(),
        provenance: rec.id.clone(),
        frames,
    })
}

/// segment → recognize → instantiate → run daemons → validate.
pub fn encode(rec: &DemonstrationRecording, cfg: &EncoderConfig) -> Result<Encoding> {
    let segments = segment_demonstration(rec, &cfg.pause)?;
    let program = draft_program(rec, &segments, cfg)?;
    validate_gmr(&program.frames).map_err(|v| {
        // violations carry frame indices, which equal segment indices here
        violations_error(&v)
    })?;
    Ok(Encoding { segments, program })
}
