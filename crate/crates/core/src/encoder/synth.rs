//! Scripted stop-and-go demonstrations with known stop times, and the four
//! household demos used as fixtures.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laban::{ActivitySignal, GrayFrame};
use crate::linalg::{Mat3, Vec3};
use crate::taskmodel::{Hand, TrackSample};

use super::recording::{DemonstrationRecording, InstructionEvent, RecordedFrame, RecordingMetadata, RECORDING_VERSION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HandPath {
    Line { target: Vec3<f64> },
    /// Rotation of the hand position about an axis through `center`.
    Arc { center: Vec3<f64>, axis: Vec3<f64>, angle_deg: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptStep {
    pub phrase: String,
    pub path: HandPath,
    /// The object moves rigidly with the hand during this step.
    pub carry: bool,
    /// Utterance onset relative to the start of the step's motion.
    #[serde(default)]
    pub speech_offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub rate: f64,
    pub lead: f64,
    pub motion: f64,
    pub stop: f64,
    pub tail: f64,
}

impl Default for Timing {
    fn default() -> Self {
        Timing { rate: 30.0, lead: 0.3, motion: 2.0, stop: 1.0, tail: 0.5 }
    }
}

/// Body dimensions of the synthetic demonstrator, meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Body {
    pub shoulder_height: f64,
    pub shoulder_half_width: f64,
    pub upper_arm: f64,
    pub forearm: f64,
}

impl Default for Body {
    fn default() -> Self {
        Body { shoulder_height: 1.1, shoulder_half_width: 0.2, upper_arm: 0.32, forearm: 0.30 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScript {
    pub id: String,
    pub actor: Hand,
    pub object: String,
    pub object_start: Vec3<f64>,
    pub hand_start: Vec3<f64>,
    pub purpose: Option<String>,
    pub steps: Vec<ScriptStep>,
    /// Where the hand goes after the last stop, so that stop is followed by
    /// motion like every other.
    pub retreat: Vec3<f64>,
    pub timing: Timing,
    pub body: Body,
    /// Uniform activity noise amplitude.
    pub noise: f64,
    pub seed: u64,
}

/// A recording plus the ground truth it was generated from.
#[derive(Clone, Debug, PartialEq)]
pub struct Synthetic {
    pub recording: DemonstrationRecording,
    /// Centers of the planted stops, seconds.
    pub stops: Vec<f64>,
    /// Hand position at the end of each step.
    pub waypoints: Vec<Vec3<f64>>,
}

fn ease(s: f64) -> f64 {
    0.5 - 0.5 * (PI * s.clamp(0.0, 1.0)).cos()
}

/// Elbow position for a two-link arm, bent downward.
fn elbow(shoulder: Vec3<f64>, hand: Vec3<f64>, l1: f64, l2: f64) -> Result<Vec3<f64>> {
    let d_vec = hand - shoulder;
    let d = d_vec.norm();
    if d > l1 + l2 - 1e-6 || d < (l1 - l2).abs() + 1e-6 {
        return Err(Error::invalid(format!("hand target {hand:?} outside the demonstrator's reach")));
    }
    let u = d_vec * (1.0 / d);
    let a = (l1 * l1 - l2 * l2 + d * d) / (2.0 * d);
    let r = (l1 * l1 - a * a).max(0.0).sqrt();
    let down = -Vec3::unit_z();
    let perp = (down - u * u.dot(&down)).try_normalize(1e-9).unwrap_or_else(|| u.any_orthonormal());
    Ok(shoulder + u * a + perp * r)
}

struct Piece {
    t0: f64,
    duration: f64,
    from: Vec3<f64>,
    path: HandPath,
    carry: bool,
}

impl Piece {
    fn position(&self, t: f64) -> Vec3<f64> {
        let s = ease((t - self.t0) / self.duration);
        match &self.path {
            HandPath::Line { target } => self.from.lerp(target, s),
            HandPath::Arc { center, axis, angle_deg } => {
                let r = Mat3::from_axis_angle(&axis.normalize(), angle_deg.to_radians() * s);
                *center + r.mul_vec(&(self.from - *center))
            }
        }
    }

    fn end(&self) -> Vec3<f64> {
        self.position(self.t0 + self.duration)
    }

    fn speed(&self, t: f64) -> f64 {
        if t <= self.t0 || t >= self.t0 + self.duration {
            return 0.0;
        }
        (PI * (t - self.t0) / self.duration).sin()
    }
}

pub fn synthesize(script: &SyntheticScript) -> Result<Synthetic> {
    let tm = &script.timing;
    if !(tm.rate > 0.0 && tm.motion > 0.0 && tm.stop > 0.0 && tm.lead >= 0.0 && tm.tail >= 0.0) {
        return Err(Error::invalid("timing values must be positive"));
    }
    if script.steps.is_empty() {
        return Err(Error::invalid("script has no steps"));
    }
    let mut pieces = Vec::new();
    let mut stops = Vec::new();
    let mut waypoints = Vec::new();
    let mut instructions = Vec::new();
    let mut t = tm.lead;
    let mut at = script.hand_start;
    for step in &script.steps {
        let p = Piece { t0: t, duration: tm.motion, from: at, path: step.path.clone(), carry: step.carry };
        at = p.end();
        waypoints.push(at);
        instructions.push(InstructionEvent { time: t + step.speech_offset, phrase: step.phrase.clone(), duration: 1.0 });
        pieces.push(p);
        stops.push(t + tm.motion + 0.5 * tm.stop);
        t += tm.motion + tm.stop;
    }
    pieces.push(Piece {
        t0: t,
        duration: tm.motion,
        from: at,
        path: HandPath::Line { target: script.retreat },
        carry: false,
    });
    let end = t + tm.motion + tm.tail;
    let n = (end * tm.rate).round() as usize + 1;

    let side = if script.actor == Hand::Right { -1.0 } else { 1.0 };
    let other = match script.actor {
        Hand::Right => "left",
        Hand::Left => "right",
    };
    let me = script.actor.as_str();
    let b = &script.body;
    let shoulder = Vec3::new(0.0, side * b.shoulder_half_width, b.shoulder_height);
    let rest_shoulder = Vec3::new(0.0, -side * b.shoulder_half_width, b.shoulder_height);

    let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
    let mut frames = Vec::with_capacity(n);
    let mut activity = Vec::with_capacity(n);
    let mut track = Vec::with_capacity(n);
    let mut object = script.object_start;
    let mut offset: Option<Vec3<f64>> = None;
    let mut piece = usize::MAX;
    for i in 0..n {
        let time = i as f64 / tm.rate;
        let mut next = if piece == usize::MAX { 0 } else { piece };
        while next + 1 < pieces.len() && time >= pieces[next + 1].t0 {
            next += 1;
        }
        if next != piece {
            piece = next;
            // grip taken where the object rests when the step begins
            offset = pieces[piece].carry.then(|| object - pieces[piece].from);
        }
        let cur = &pieces[piece];
        let hand = if time < cur.t0 { cur.from } else { cur.position(time) };
        if let Some(off) = offset {
            object = hand + off;
        }
        let el = elbow(shoulder, hand, b.upper_arm, b.forearm).map_err(|e| Error::invalid(format!("t={time:.2}: {e}")))?;
        let mut joints = BTreeMap::new();
        joints.insert(format!("{me}_shoulder"), shoulder);
        joints.insert(format!("{me}_elbow"), el);
        joints.insert(format!("{me}_wrist"), hand);
        joints.insert(format!("{other}_shoulder"), rest_shoulder);
        joints.insert(format!("{other}_elbow"), rest_shoulder - Vec3::unit_z() * b.upper_arm);
        joints.insert(format!("{other}_wrist"), rest_shoulder - Vec3::unit_z() * (b.upper_arm + b.forearm));
        frames.push(RecordedFrame { timestamp: time, joints, hand });
        let noise = if script.noise > 0.0 { rng.random_range(0.0..script.noise) } else { 0.0 };
        activity.push(10.0 * cur.speed(time) + noise);
        track.push(TrackSample { time, position: object });
    }
    let mut object_tracks = BTreeMap::new();
    object_tracks.insert(script.object.clone(), track);
    let recording = DemonstrationRecording {
        version: RECORDING_VERSION,
        id: script.id.clone(),
        actor: script.actor,
        frames,
        activity: Some(ActivitySignal::new(activity, tm.rate)?),
        gray_frames: None,
        frame_rate: None,
        instructions,
        object_tracks,
        metadata: RecordingMetadata { grasp_purpose: script.purpose.clone() },
    };
    Ok(Synthetic { recording, stops, waypoints })
}

/// Uniform-brightness frames whose frame-to-frame change reproduces the
/// activity samples (one fewer sample than frames).
pub fn gray_frames_for(activity: &[f64], width: usize, height: usize) -> Vec<GrayFrame> {
    let mut level = 128.0;
    let mut out = vec![GrayFrame::filled(width, height, level)];
    for (k, a) in activity.iter().enumerate() {
        level += if k % 2 == 0 { *a } else { -*a };
        out.push(GrayFrame::filled(width, height, level));
    }
    out
}

fn step(phrase: &str, target: [f64; 3], carry: bool) -> ScriptStep {
    ScriptStep { phrase: phrase.into(), path: HandPath::Line { target: Vec3::from(target) }, carry, speech_offset: 0.2 }
}

fn script(id: &str, object: &str, object_start: [f64; 3], hand_start: [f64; 3], purpose: &str, steps: Vec<ScriptStep>, retreat: [f64; 3]) -> SyntheticScript {
    SyntheticScript {
        id: id.into(),
        actor: Hand::Right,
        object: object.into(),
        object_start: Vec3::from(object_start),
        hand_start: Vec3::from(hand_start),
        purpose: Some(purpose.into()),
        steps,
        retreat: Vec3::from(retreat),
        timing: Timing::default(),
        body: Body::default(),
        noise: 0.05,
        seed: 1,
    }
}

/// Box moved from the desk onto a plate.
pub fn box_demo() -> SyntheticScript {
    script(
        "box_demo",
        "box",
        [0.40, -0.10, 0.75],
        [0.40, -0.10, 1.00],
        "place",
        vec![
            step("grasp the box", [0.40, -0.10, 0.85], false),
            step("pick up the box from the desk", [0.40, -0.10, 0.95], true),
            step("bring the box carefully", [0.40, 0.15, 0.95], true),
            step("place the box on a plate", [0.40, 0.15, 0.81], true),
            step("release the box", [0.40, 0.15, 0.95], false),
        ],
        [0.25, -0.25, 1.00],
    )
}

/// Cup carried from the desk onto a shelf in three careful moves.
pub fn shelf_demo() -> SyntheticScript {
    script(
        "shelf_demo",
        "cup",
        [0.35, -0.15, 0.80],
        [0.20, -0.15, 0.80],
        "carry",
        vec![
            step("grasp the cup", [0.35, -0.15, 0.80], false),
            step("pick up the cup", [0.35, -0.15, 0.90], true),
            step("bring it carefully", [0.35, 0.00, 1.05], true),
            step("bring it carefully", [0.45, 0.00, 1.05], true),
            step("bring it carefully", [0.45, 0.10, 1.05], true),
            step("place the cup", [0.45, 0.10, 1.00], true),
            step("release the cup", [0.30, 0.10, 1.00], false),
        ],
        [0.20, -0.20, 0.90],
    )
}

/// Can dropped into a bin: released in the air, no place.
pub fn garbage_demo() -> SyntheticScript {
    script(
        "garbage_demo",
        "can",
        [0.35, -0.10, 0.78],
        [0.35, -0.10, 0.95],
        "dispose",
        vec![
            step("grasp the can", [0.35, -0.10, 0.82], false),
            step("pick up the can", [0.35, -0.10, 0.95], true),
            step("bring the can", [0.30, 0.20, 0.95], true),
            step("release the can", [0.25, 0.20, 1.00], false),
        ],
        [0.20, -0.20, 0.90],
    )
}

/// Refrigerator door opened by its handle, ending with the hand on the door.
pub fn fridge_demo() -> SyntheticScript {
    let mut s = script(
        "fridge_demo",
        "handle",
        [0.48, -0.05, 0.95],
        [0.30, -0.05, 0.95],
        "open",
        vec![step("grasp the handle", [0.48, -0.05, 0.95], false)],
        [0.05, -0.30, 0.90],
    );
    s.steps.push(ScriptStep {
        phrase: "open the refrigerator".into(),
        path: HandPath::Arc { center: Vec3::new(0.48, -0.45, 0.95), axis: Vec3::unit_z(), angle_deg: 60.0 },
        carry: true,
        speech_offset: 0.2,
    });
    s
}

pub fn demo_scripts() -> Vec<SyntheticScript> {
    vec![box_demo(), shelf_demo(), garbage_demo(), fridge_demo()]
}
