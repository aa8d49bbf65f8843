//! Scores: time-ordered rows of per-limb direction symbols.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::direction::{canonical_direction, digitize_direction, LabanDirection};
use crate::error::{Error, Result};
use crate::linalg::Vec3;

/// A score column: the limb segment running from `proximal` to `distal`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnDef {
    pub name: &'static str,
    pub proximal: &'static str,
    pub distal: &'static str,
}

/// The columns recorded by default: upper arm and forearm of each side.
pub const DEFAULT_COLUMNS: [ColumnDef; 4] = [
    ColumnDef { name: "right_elbow", proximal: "right_shoulder", distal: "right_elbow" },
    ColumnDef { name: "right_wrist", proximal: "right_elbow", distal: "right_wrist" },
    ColumnDef { name: "left_elbow", proximal: "left_shoulder", distal: "left_elbow" },
    ColumnDef { name: "left_wrist", proximal: "left_elbow", distal: "left_wrist" },
];

pub fn column_def(name: &str) -> Option<&'static ColumnDef> {
    DEFAULT_COLUMNS.iter().find(|c| c.name == name)
}

pub fn default_column_names() -> Vec<String> {
    DEFAULT_COLUMNS.iter().map(|c| c.name.to_string()).collect()
}

/// Joint positions at one instant, meters, +z up and +x forward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkeletonFrame {
    pub timestamp: f64,
    pub joints: BTreeMap<String, Vec3<f64>>,
}

impl SkeletonFrame {
    pub fn joint(&self, name: &str) -> Result<Vec3<f64>> {
        let p = self
            .joints
            .get(name)
            .ok_or_else(|| Error::invalid(format!("frame at t={} lacks joint `{name}`", self.timestamp)))?;
        if !p.is_finite() {
            return Err(Error::invalid(format!("joint `{name}` is not finite")));
        }
        Ok(*p)
    }

    /// Linear blend of two frames' joints (joints present in both).
    pub fn lerp(&self, other: &SkeletonFrame, t: f64) -> SkeletonFrame {
        let s = if other.timestamp > self.timestamp {
            ((t - self.timestamp) / (other.timestamp - self.timestamp)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let joints = self
            .joints
            .iter()
            .filter_map(|(k, a)| other.joints.get(k).map(|b| (k.clone(), a.lerp(b, s))))
            .collect();
        SkeletonFrame { timestamp: t, joints }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabanSymbol {
    pub column: String,
    pub direction: LabanDirection,
    /// Seconds spent moving into this posture from the previous one.
    pub duration: f64,
}

/// One keyframe: a symbol per column, in column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabanRow {
    pub time: f64,
    pub symbols: Vec<LabanSymbol>,
}

impl LabanRow {
    pub fn get(&self, column: &str) -> Option<&LabanSymbol> {
        self.symbols.iter().find(|s| s.column == column)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabanScore {
    pub columns: Vec<String>,
    pub rows: Vec<LabanRow>,
    pub beat_duration: f64,
}

impl LabanScore {
    pub fn new(columns: Vec<String>, beat_duration: f64) -> Self {
        LabanScore { columns, rows: Vec::new(), beat_duration }
    }

    /// Checks time ordering, column coverage and symbol durations.
    pub fn validate(&self) -> Result<()> {
        for c in &self.columns {
            if column_def(c).is_none() {
                return Err(Error::invalid(format!("unknown column `{c}`")));
            }
        }
        if !(self.beat_duration > 0.0 && self.beat_duration.is_finite()) {
            return Err(Error::invalid("beat duration must be positive"));
        }
        let mut last = f64::NEG_INFINITY;
        for (i, row) in self.rows.iter().enumerate() {
            if row.time <= last || !row.time.is_finite() {
                return Err(Error::invalid(format!("row {i} is not strictly after the previous row")));
            }
            last = row.time;
            if row.symbols.len() != self.columns.len()
                || row.symbols.iter().zip(&self.columns).any(|(s, c)| &s.column != c)
            {
                return Err(Error::invalid(format!("row {i} does not cover the columns in order")));
            }
            if let Some(s) = row.symbols.iter().find(|s| !(s.duration > 0.0 && s.duration.is_finite())) {
                return Err(Error::invalid(format!("row {i}: non-positive duration in `{}`", s.column)));
            }
        }
        Ok(())
    }
}

fn check_columns(columns: &[String]) -> Result<Vec<&'static ColumnDef>> {
    columns
        .iter()
        .map(|c| column_def(c).ok_or_else(|| Error::invalid(format!("unknown column `{c}`"))))
        .collect()
}

/// Digitizes the posture of one frame into a row.
pub fn posture_row(frame: &SkeletonFrame, columns: &[String], duration: f64) -> Result<LabanRow> {
    if !(duration > 0.0) {
        return Err(Error::invalid("symbol duration must be positive"));
    }
    let defs = check_columns(columns)?;
    let mut symbols = Vec::with_capacity(defs.len());
    for def in defs {
        let limb = frame.joint(def.distal)? - frame.joint(def.proximal)?;
        let dir = limb
            .try_normalize(1e-9)
            .ok_or_else(|| Error::invalid(format!("degenerate limb for column `{}`", def.name)))?;
        symbols.push(LabanSymbol {
            column: def.name.to_string(),
            direction: digitize_direction(&dir)?,
            duration,
        });
    }
    Ok(LabanRow { time: frame.timestamp, symbols })
}

/// Skeleton pose at time `t`, linearly interpolated between recorded frames.
pub fn frame_at(frames: &[SkeletonFrame], t: f64) -> Result<SkeletonFrame> {
    let first = frames.first().ok_or_else(|| Error::invalid("no skeleton frames"))?;
    let last = frames.last().unwrap();
    if t < first.timestamp - 1e-9 || t > last.timestamp + 1e-9 {
        return Err(Error::invalid(format!(
            "time {t} outside frame range [{}, {}]",
            first.timestamp, last.timestamp
        )));
    }
    let idx = frames.partition_point(|f| f.timestamp <= t);
    if idx == 0 {
        return Ok(SkeletonFrame { timestamp: t, ..first.clone() });
    }
    if idx >= frames.len() {
        return Ok(SkeletonFrame { timestamp: t, ..last.clone() });
    }
    Ok(frames[idx - 1].lerp(&frames[idx], t))
}

/// Builds a score with one row per pause. Each symbol's duration is the time
/// since the previous pause (the first row measures from the first frame).
pub fn encode_skeleton(
    frames: &[SkeletonFrame],
    pauses: &[f64],
    columns: &[String],
    beat_duration: f64,
) -> Result<LabanScore> {
    let start = frames.first().ok_or_else(|| Error::invalid("no skeleton frames"))?.timestamp;
    if frames.windows(2).any(|w| w[1].timestamp <= w[0].timestamp) {
        return Err(Error::invalid("skeleton timestamps must increase"));
    }
    let mut score = LabanScore::new(columns.to_vec(), beat_duration);
    let mut prev = start;
    for &p in pauses {
        let frame = frame_at(frames, p)?;
        let duration = p - prev;
        if duration <= 0.0 {
            return Err(Error::invalid(format!("pause at {p} does not follow the previous keyframe")));
        }
        score.rows.push(posture_row(&frame, columns, duration)?);
        prev = p;
    }
    Ok(score)
}

/// Segment lengths for decoding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimbLengths {
    pub lengths: BTreeMap<String, f64>,
}

impl LimbLengths {
    /// Same upper-arm and forearm length on both sides.
    pub fn symmetric(upper: f64, forearm: f64) -> Self {
        let mut lengths = BTreeMap::new();
        lengths.insert("right_elbow".to_string(), upper);
        lengths.insert("left_elbow".to_string(), upper);
        lengths.insert("right_wrist".to_string(), forearm);
        lengths.insert("left_wrist".to_string(), forearm);
        LimbLengths { lengths }
    }

    pub fn scaled(&self, s: f64) -> Self {
        LimbLengths { lengths: self.lengths.iter().map(|(k, v)| (k.clone(), v * s)).collect() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Keyframe {
    pub time: f64,
    pub joints: BTreeMap<String, Vec3<f64>>,
}

/// Turns a score into joint targets for a body with the given limb lengths.
///
/// `anchors` fixes the root joints (shoulders). Keyframe times are cumulative
/// symbol durations from zero.
pub fn decode_score(
    score: &LabanScore,
    limbs: &LimbLengths,
    anchors: &BTreeMap<String, Vec3<f64>>,
) -> Result<Vec<Keyframe>> {
    let defs = check_columns(&score.columns)?;
    for def in &defs {
        match limbs.lengths.get(def.name) {
            Some(l) if *l > 0.0 && l.is_finite() => {}
            Some(_) => return Err(Error::invalid(format!("limb length for `{}` must be positive", def.name))),
            None => return Err(Error::invalid(format!("missing limb length for `{}`", def.name))),
        }
    }
    let mut out = Vec::with_capacity(score.rows.len());
    let mut t = 0.0;
    for row in &score.rows {
        let mut joints = anchors.clone();
        // columns may be listed in any order; resolve parents first
        let mut pending: Vec<&ColumnDef> = defs.clone();
        while !pending.is_empty() {
            let before = pending.len();
            pending.retain(|def| {
                let Some(base) = joints.get(def.proximal).copied() else { return true };
                let sym = row.get(def.name).expect("validated row");
                let dir = canonical_direction::<f64>(&sym.direction);
                joints.insert(def.distal.to_string(), base + dir * limbs.lengths[def.name]);
                false
            });
            if pending.len() == before {
                return Err(Error::invalid(format!(
                    "no anchor for column `{}` (needs `{}`)",
                    pending[0].name, pending[0].proximal
                )));
            }
        }
        let dur = row.symbols.first().map_or(0.0, |s| s.duration);
        t += dur;
        out.push(Keyframe { time: t, joints });
    }
    Ok(out)
}

/// Joint targets at time `t` under linear interpolation between keyframes.
pub fn interpolate_keyframes(keys: &[Keyframe], t: f64) -> Option<BTreeMap<String, Vec3<f64>>> {
    let first = keys.first()?;
    if t <= first.time {
        return Some(first.joints.clone());
    }
    let idx = keys.partition_point(|k| k.time <= t);
    if idx >= keys.len() {
        return Some(keys.last()?.joints.clone());
    }
    let (a, b) = (&keys[idx - 1], &keys[idx]);
    let s = (t - a.time) / (b.time - a.time);
    Some(
        a.joints
            .iter()
            .filter_map(|(k, pa)| b.joints.get(k).map(|pb| (k.clone(), pa.lerp(pb, s))))
            .collect(),
    )
}

/// Renders a score in the line-oriented text format.
pub fn serialize_score(score: &LabanScore) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "columns: {}", score.columns.join(","));
    let _ = writeln!(out, "beat: {}", score.beat_duration);
    for row in &score.rows {
        let _ = write!(out, "t={}", row.time);
        for s in &row.symbols {
            let _ = write!(out, " | {}={}:{}", s.column, s.direction.token(), s.duration);
        }
        out.push('\n');
    }
    out
}

/// Parses the text format written by [`serialize_score`]. Blank lines and
/// `#` comments are skipped; `beat:` is optional and defaults to one second.
pub fn parse_score(text: &str) -> Result<LabanScore> {
    let perr = |line: usize, message: String| Error::Parse { line, message };
    let mut columns: Option<Vec<String>> = None;
    let mut beat = 1.0;
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("columns:") {
            if columns.is_some() {
                return Err(perr(ln, "duplicate columns header".into()));
            }
            let cols: Vec<String> = rest.split(',').map(|c| c.trim().to_string()).collect();
            for c in &cols {
                if column_def(c).is_none() {
                    return Err(perr(ln, format!("unknown column `{c}`")));
                }
            }
            columns = Some(cols);
            continue;
        }
        if let Some(rest) = line.strip_prefix("beat:") {
            beat = rest
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|b| *b > 0.0 && b.is_finite())
                .ok_or_else(|| perr(ln, format!("bad beat duration `{}`", rest.trim())))?;
            continue;
        }
        let cols = columns.as_ref().ok_or_else(|| perr(ln, "row before columns header".into()))?;
        let mut parts = line.split('|').map(str::trim);
        let tpart = parts.next().unwrap_or_default();
        let time = tpart
            .strip_prefix("t=")
            .and_then(|t| t.parse::<f64>().ok())
            .filter(|t| t.is_finite())
            .ok_or_else(|| perr(ln, format!("bad time field `{tpart}`")))?;
        let mut symbols: BTreeMap<String, LabanSymbol> = BTreeMap::new();
        for part in parts {
            let (col, rest) =
                part.split_once('=').ok_or_else(|| perr(ln, format!("bad symbol `{part}`")))?;
            let col = col.trim();
            if !cols.iter().any(|c| c == col) {
                return Err(perr(ln, format!("column `{col}` not declared")));
            }
            let (tok, dur) =
                rest.split_once(':').ok_or_else(|| perr(ln, format!("symbol `{part}` lacks duration")))?;
            let direction: LabanDirection =
                tok.trim().parse().map_err(|e: Error| perr(ln, e.to_string()))?;
            let duration = dur
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|d| *d > 0.0 && d.is_finite())
                .ok_or_else(|| perr(ln, format!("non-positive or malformed duration `{}`", dur.trim())))?;
            if symbols
                .insert(col.to_string(), LabanSymbol { column: col.to_string(), direction, duration })
                .is_some()
            {
                return Err(perr(ln, format!("column `{col}` repeated")));
            }
        }
        let mut ordered = Vec::with_capacity(cols.len());
        for c in cols {
            ordered.push(symbols.remove(c).ok_or_else(|| perr(ln, format!("row misses column `{c}`")))?);
        }
        rows.push((ln, LabanRow { time, symbols: ordered }));
    }
    let columns = columns.ok_or_else(|| perr(0, "missing columns header".into()))?;
    let mut last = f64::NEG_INFINITY;
    for (ln, row) in &rows {
        if row.time <= last {
            return Err(perr(*ln, "rows must be strictly increasing in time".into()));
        }
        last = row.time;
    }
    Ok(LabanScore { columns, rows: rows.into_iter().map(|(_, r)| r).collect(), beat_duration: beat })
}
