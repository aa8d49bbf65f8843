//! Slot-filling daemons: each observes one channel of a demonstration segment.

use serde::{Deserialize, Serialize};

use crate::contact::SemanticConstraint;
use crate::error::{Error, Result};
use crate::grasp::select_closure;
use crate::laban::{frame_at, posture_row, SkeletonFrame};
use crate::linalg::Vec3;

use super::frame::{Daemon, SlotName, TaskFrame};

/// Longest direction window in seconds and in samples; the shorter applies.
pub const WINDOW_SECONDS: f64 = 0.5;
pub const WINDOW_SAMPLES: usize = 15;
/// Motion onset/end is where hand speed crosses this share of its peak.
pub const ONSET_SPEED_RATIO: f64 = 0.1;
/// Below this peak speed (m/s) the hand is treated as still.
pub const MIN_PEAK_SPEED: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackSample {
    pub time: f64,
    pub position: Vec3<f64>,
}

/// Position on a time-ordered track, linearly interpolated.
pub fn track_at(track: &[TrackSample], t: f64) -> Option<Vec3<f64>> {
    let first = track.first()?;
    let last = track.last()?;
    if t < first.time - 1e-9 || t > last.time + 1e-9 {
        return None;
    }
    let idx = track.partition_point(|s| s.time <= t);
    if idx == 0 {
        return Some(first.position);
    }
    if idx >= track.len() {
        return Some(last.position);
    }
    let (a, b) = (&track[idx - 1], &track[idx]);
    let span = b.time - a.time;
    let s = if span > 0.0 { (t - a.time) / span } else { 0.0 };
    Some(a.position.lerp(&b.position, s))
}

/// Observation channels for one segment. Channels may be empty; a daemon that
/// needs an empty channel fails with a slot-fill error.
#[derive(Clone, Copy, Debug)]
pub struct SegmentData<'a> {
    pub t_start: f64,
    pub t_end: f64,
    pub skeleton: &'a [SkeletonFrame],
    pub columns: &'a [String],
    pub hand: &'a [TrackSample],
    pub object_track: Option<&'a [TrackSample]>,
    pub grasp_purpose: Option<&'a str>,
}

fn slot_err(slot: SlotName, reason: impl Into<String>) -> Error {
    Error::SlotFill { slot: slot.to_string(), reason: reason.into() }
}

/// Hand path restricted to the segment, with the boundary positions
/// interpolated in, plus the motion onset and end indices.
struct HandPath {
    samples: Vec<TrackSample>,
    onset: usize,
    end: usize,
}

impl HandPath {
    fn new(seg: &SegmentData, slot: SlotName) -> Result<Self> {
        let start = track_at(seg.hand, seg.t_start).ok_or_else(|| slot_err(slot, "no hand samples at segment start"))?;
        let stop = track_at(seg.hand, seg.t_end).ok_or_else(|| slot_err(slot, "no hand samples at segment end"))?;
        let mut samples = vec![TrackSample { time: seg.t_start, position: start }];
        samples.extend(seg.hand.iter().filter(|s| s.time > seg.t_start && s.time < seg.t_end).copied());
        samples.push(TrackSample { time: seg.t_end, position: stop });
        let speeds: Vec<f64> = samples
            .windows(2)
            .map(|w| {
                let dt = w[1].time - w[0].time;
                if dt > 0.0 { w[1].position.distance(&w[0].position) / dt } else { 0.0 }
            })
            .collect();
        let peak = speeds.iter().copied().fold(0.0, f64::max);
        if peak < MIN_PEAK_SPEED {
            return Err(slot_err(slot, "hand does not move during the segment"));
        }
        let thr = ONSET_SPEED_RATIO * peak;
        let onset = speeds.iter().position(|&v| v > thr).unwrap();
        let end = speeds.iter().rposition(|&v| v > thr).unwrap() + 1;
        Ok(HandPath { samples, onset, end })
    }

    fn at(&self, t: f64) -> Vec3<f64> {
        track_at(&self.samples, t).unwrap()
    }

    fn net(&self) -> Vec3<f64> {
        self.samples.last().unwrap().position - self.samples[0].position
    }

    fn departure(&self) -> (Vec3<f64>, Vec3<f64>) {
        let t0 = self.samples[self.onset].time;
        let mut j = self.onset;
        while j < self.end && j - self.onset < WINDOW_SAMPLES && self.samples[j + 1].time <= t0 + WINDOW_SECONDS + 1e-9 {
            j += 1;
        }
        (self.samples[self.onset].position, self.samples[j.max(self.onset + 1)].position)
    }

    fn arrival(&self) -> (Vec3<f64>, Vec3<f64>) {
        let t1 = self.samples[self.end].time;
        let mut j = self.end;
        while j > self.onset && self.end - j < WINDOW_SAMPLES && self.samples[j - 1].time >= t1 - WINDOW_SECONDS - 1e-9 {
            j -= 1;
        }
        (self.samples[j.min(self.end - 1)].position, self.samples[self.end].position)
    }
}

fn direction(from: Vec3<f64>, to: Vec3<f64>, slot: SlotName) -> Result<Vec3<f64>> {
    (to - from).try_normalize(1e-9).ok_or_else(|| slot_err(slot, "no displacement inside the window"))
}

/// Angle from `u` to `v` about `axis`, in [0, 2π).
pub fn angle_about(u: Vec3<f64>, v: Vec3<f64>, axis: Vec3<f64>) -> f64 {
    let a = u.cross(&v).dot(&axis).atan2(u.dot(&v));
    if a < 0.0 { a + std::f64::consts::TAU } else { a }
}

/// Axis, swept angle and center of the circular arc through `a`, `b`, `c`
/// (in travel order). The axis is oriented so the travel is a positive
/// rotation.
pub fn arc_through(a: Vec3<f64>, b: Vec3<f64>, c: Vec3<f64>) -> Option<(Vec3<f64>, f64, Vec3<f64>)> {
    let ab = b - a;
    let ac = c - a;
    let n = ab.cross(&ac);
    let n2 = n.norm_squared();
    if n2 <= 1e-12 * ab.norm_squared() * ac.norm_squared() || n2 == 0.0 {
        return None;
    }
    let center = a + (n.cross(&ab) * ac.norm_squared() + ac.cross(&n) * ab.norm_squared()) * (0.5 / n2);
    let axis = n.normalize();
    // a → b → c is counter-clockwise about n
    Some((axis, angle_about(a - center, c - center, axis), center))
}

/// Fills the frame's slots from the segment and checks that every required
/// slot ended up filled.
pub fn run_daemons(frame: &TaskFrame, seg: &SegmentData) -> Result<TaskFrame> {
    if !(seg.t_end > seg.t_start) {
        return Err(Error::invalid(format!("segment [{}, {}] is empty", seg.t_start, seg.t_end)));
    }
    let mut out = frame.clone();
    let duration = seg.t_end - seg.t_start;
    for daemon in &frame.daemons {
        let s = &mut out.slots;
        match daemon {
            Daemon::LabanAtStart | Daemon::LabanAtEnd => {
                let (slot, t) = if *daemon == Daemon::LabanAtStart {
                    (SlotName::FirstLaban, seg.t_start)
                } else {
                    (SlotName::LastLaban, seg.t_end)
                };
                if seg.skeleton.is_empty() {
                    return Err(slot_err(slot, "no skeleton frames"));
                }
                let pose = frame_at(seg.skeleton, t).map_err(|e| slot_err(slot, e.to_string()))?;
                let row = posture_row(&pose, seg.columns, duration).map_err(|e| slot_err(slot, e.to_string()))?;
                if slot == SlotName::FirstLaban {
                    s.first_laban = Some(row);
                } else {
                    s.last_laban = Some(row);
                }
            }
            Daemon::ObjectTrack => {
                let track = seg
                    .object_track
                    .ok_or_else(|| slot_err(SlotName::InitialPosition, format!("no track for `{}`", frame.object)))?;
                let p = track_at(track, seg.t_start)
                    .ok_or_else(|| slot_err(SlotName::InitialPosition, "object track does not cover the segment start"))?;
                s.initial_position = Some(p);
            }
            Daemon::DepartureWindow => {
                let path = HandPath::new(seg, SlotName::DetachDir)?;
                let (p, q) = path.departure();
                let dir = direction(p, q, SlotName::DetachDir)?;
                s.detach_dir = Some(dir);
                s.detach_distance = Some(dir.dot(&path.net()).max(0.0));
            }
            Daemon::ArrivalWindow => {
                let path = HandPath::new(seg, SlotName::ApproachDir)?;
                let (p, q) = path.arrival();
                let dir = direction(p, q, SlotName::ApproachDir)?;
                s.approach_dir = Some(dir);
                s.approach_distance = Some(dir.dot(&path.net()).max(0.0));
            }
            Daemon::NetDisplacement => {
                let a = track_at(seg.hand, seg.t_start);
                let b = track_at(seg.hand, seg.t_end);
                match (a, b) {
                    (Some(a), Some(b)) => s.displacement = Some(b - a),
                    _ => return Err(slot_err(SlotName::Displacement, "hand track does not cover the segment")),
                }
            }
            Daemon::Circumcircle => {
                let path = HandPath::new(seg, SlotName::RotationAxis)?;
                let t0 = path.samples[path.onset].time;
                let t1 = path.samples[path.end].time;
                let (axis, _, center) = arc_through(path.at(t0), path.at(0.5 * (t0 + t1)), path.at(t1))
                    .ok_or_else(|| slot_err(SlotName::RotationAxis, "hand path is straight"))?;
                // the circle comes from the moving part; the angle spans the
                // whole segment
                let first = path.samples[0].position;
                let last = path.samples.last().unwrap().position;
                s.rotation_axis = Some(axis);
                s.rotation_angle = Some(angle_about(first - center, last - center, axis));
            }
            Daemon::Affordance => {
                s.grasp_closure = Some(select_closure(&frame.object, seg.grasp_purpose.unwrap_or("")));
            }
            Daemon::DefaultConstraint => {
                if s.constraint.is_none() {
                    s.constraint = Some(SemanticConstraint::Ping { axis: Vec3::unit_z() });
                }
            }
        }
    }
    if let Some(slot) = out.missing_slots().first() {
        return Err(slot_err(*slot, "no daemon produced a value"));
    }
    Ok(out)
}
