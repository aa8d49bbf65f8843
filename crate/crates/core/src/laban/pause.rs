//! Stop detection from a brightness-perturbation signal.
//!
//! The chain is: 50×50 box filter on luminance, mean absolute difference of
//! consecutive filtered frames, robust outlier replacement, zero-phase
//! low-pass, then local minima under a fraction of the median.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BOX_WINDOW: usize = 50;

/// Luminance image, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrayFrame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::invalid(format!(
                "frame has {} pixels, expected {}×{}",
                pixels.len(),
                width,
                height
            )));
        }
        Ok(GrayFrame { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        GrayFrame { width, height, pixels: vec![value; width * height] }
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }
}

/// Luma from RGB (BT.601 weights, the Y of YUV).
pub fn luma(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivitySignal {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
}

impl ActivitySignal {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        let s = ActivitySignal { samples, sample_rate };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if let Some(i) = self.samples.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(format!("activity sample {i} is negative or not finite")));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}

/// Mean over each fully-contained `BOX_WINDOW`² window ("valid" region).
fn box_filter(frame: &GrayFrame) -> Vec<f64> {
    let (w, h) = (frame.width, frame.height);
    // summed-area table with a zero border
    let mut sat = vec![0.0; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += frame.at(x, y);
            sat[(y + 1) * (w + 1) + x + 1] = sat[y * (w + 1) + x + 1] + row;
        }
    }
    let k = BOX_WINDOW;
    let area = (k * k) as f64;
    let (ow, oh) = (w - k + 1, h - k + 1);
    let mut out = Vec::with_capacity(ow * oh);
    for y in 0..oh {
        for x in 0..ow {
            let s = sat[(y + k) * (w + 1) + x + k] - sat[y * (w + 1) + x + k]
                - sat[(y + k) * (w + 1) + x]
                + sat[y * (w + 1) + x];
            out.push(s / area);
        }
    }
    out
}

/// One activity sample per adjacent frame pair.
pub fn activity_from_frames(frames: &[GrayFrame], sample_rate: f64) -> Result<ActivitySignal> {
    if frames.len() < 2 {
        return Err(Error::invalid("need at least two frames"));
    }
    let (w, h) = (frames[0].width, frames[0].height);
    if w < BOX_WINDOW || h < BOX_WINDOW {
        return Err(Error::invalid(format!("frames must be at least {BOX_WINDOW}×{BOX_WINDOW}")));
    }
    if let Some(i) = frames.iter().position(|f| f.width != w || f.height != h || f.pixels.len() != w * h) {
        return Err(Error::invalid(format!("frame {i} dimensions differ from frame 0")));
    }
    let filtered: Vec<Vec<f64>> = frames.iter().map(box_filter).collect();
    let samples = filtered
        .windows(2)
        .map(|p| {
            let n = p[0].len() as f64;
            p[0].iter().zip(&p[1]).map(|(a, b)| (a - b).abs()).sum::<f64>() / n
        })
        .collect();
    ActivitySignal::new(samples, sample_rate)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauseConfig {
    pub cutoff_hz: f64,
    /// Modified z-score above which a sample counts as an outlier.
    pub mad_threshold: f64,
    /// Minima must lie below this fraction of the filtered signal's median.
    pub median_fraction: f64,
}

impl Default for PauseConfig {
    fn default() -> Self {
        PauseConfig { cutoff_hz: 0.5, mad_threshold: 3.5, median_fraction: 0.5 }
    }
}

pub(crate) fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Replaces samples whose modified z-score exceeds `threshold` by linear
/// interpolation between the nearest retained neighbours.
///
/// Only upward outliers count. Stops are the low extremes of the signal, and
/// while motion is steady the MAD is small enough that a two-sided rule would
/// flatten them.
pub fn remove_outliers(x: &[f64], threshold: f64) -> Vec<f64> {
    let med = median(x);
    let dev: Vec<f64> = x.iter().map(|v| (v - med).abs()).collect();
    let mad = median(&dev);
    if mad <= 0.0 {
        return x.to_vec();
    }
    let keep: Vec<bool> = x.iter().map(|v| 0.6745 * (v - med) / mad <= threshold).collect();
    let mut out = x.to_vec();
    let kept: Vec<usize> = (0..x.len()).filter(|&i| keep[i]).collect();
    if kept.is_empty() {
        return out;
    }
    for i in 0..x.len() {
        if keep[i] {
            continue;
        }
        let right = kept.partition_point(|&k| k < i);
        out[i] = match (right.checked_sub(1).map(|l| kept[l]), kept.get(right)) {
            (Some(l), Some(&r)) => {
                let s = (i - l) as f64 / (r - l) as f64;
                x[l] + s * (x[r] - x[l])
            }
            (Some(l), None) => x[l],
            (None, Some(&r)) => x[r],
            (None, None) => med,
        };
    }
    out
}

/// Second-order Butterworth low-pass coefficients `(b, a)` with `a[0] = 1`.
pub fn butterworth_lowpass(cutoff_hz: f64, sample_rate: f64) -> ([f64; 3], [f64; 3]) {
    let k = (std::f64::consts::PI * cutoff_hz / sample_rate).tan();
    let q = std::f64::consts::SQRT_2;
    let norm = 1.0 / (1.0 + q * k + k * k);
    let b0 = k * k * norm;
    (
        [b0, 2.0 * b0, b0],
        [1.0, 2.0 * (k * k - 1.0) * norm, (1.0 - q * k + k * k) * norm],
    )
}

fn lfilter(b: &[f64; 3], a: &[f64; 3], x: &[f64], zi: [f64; 2]) -> Vec<f64> {
    let (mut z1, mut z2) = (zi[0], zi[1]);
    x.iter()
        .map(|&xn| {
            let y = b[0] * xn + z1;
            z1 = b[1] * xn - a[1] * y + z2;
            z2 = b[2] * xn - a[2] * y;
            y
        })
        .collect()
}

/// Number of reflected samples padded on each side by [`filtfilt`].
pub fn filtfilt_padlen(cutoff_hz: f64, sample_rate: f64) -> usize {
    (sample_rate / cutoff_hz).ceil() as usize
}

/// Forward-backward filtering with odd reflection padding and steady-state
/// initial conditions.
pub fn filtfilt(b: &[f64; 3], a: &[f64; 3], x: &[f64], padlen: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if n <= padlen {
        return Err(Error::invalid(format!(
            "signal of {n} samples is shorter than the filter warm-up ({padlen} samples)"
        )));
    }
    let zi = [1.0 - b[0], b[2] - a[2]];
    let mut ext = Vec::with_capacity(n + 2 * padlen);
    for i in (1..=padlen).rev() {
        ext.push(2.0 * x[0] - x[i]);
    }
    ext.extend_from_slice(x);
    for i in 1..=padlen {
        ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
    }
    let x0 = ext[0];
    let mut y = lfilter(b, a, &ext, [zi[0] * x0, zi[1] * x0]);
    y.reverse();
    let y0 = y[0];
    let mut y = lfilter(b, a, &y, [zi[0] * y0, zi[1] * y0]);
    y.reverse();
    Ok(y[padlen..padlen + n].to_vec())
}

/// The cleaned and low-passed activity used for stop detection.
pub fn smooth_activity(signal: &ActivitySignal, cfg: &PauseConfig) -> Result<Vec<f64>> {
    signal.validate()?;
    if signal.sample_rate < 4.0 * cfg.cutoff_hz {
        return Err(Error::invalid(format!(
            "sample rate {} Hz too low for a {} Hz cutoff",
            signal.sample_rate, cfg.cutoff_hz
        )));
    }
    let cleaned = remove_outliers(&signal.samples, cfg.mad_threshold);
    let (b, a) = butterworth_lowpass(cfg.cutoff_hz, signal.sample_rate);
    filtfilt(&b, &a, &cleaned, filtfilt_padlen(cfg.cutoff_hz, signal.sample_rate))
}

/// Sample indices of the detected stops.
pub fn detect_pause_indices(signal: &ActivitySignal, cfg: &PauseConfig) -> Result<Vec<usize>> {
    let y = smooth_activity(signal, cfg)?;
    let limit = cfg.median_fraction * median(&y);
    Ok((1..y.len().saturating_sub(1))
        .filter(|&i| y[i] < y[i - 1] && y[i] < y[i + 1] && y[i] < limit)
        .collect())
}

/// Stop timestamps in seconds from the first sample.
pub fn detect_pauses(signal: &ActivitySignal, cfg: &PauseConfig) -> Result<Vec<f64>> {
    Ok(detect_pause_indices(signal, cfg)?
        .into_iter()
        .map(|i| i as f64 / signal.sample_rate)
        .collect())
}
