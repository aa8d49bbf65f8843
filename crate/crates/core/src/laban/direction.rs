//! Quantized limb directions: eight azimuth sectors by five zenith levels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::scalar::Real;

/// Azimuth sector names, clockwise from the demonstrator's forward direction.
pub const AZIMUTH_TOKENS: [&str; 8] = ["F", "RF", "R", "RB", "B", "LB", "L", "LF"];
pub const AZIMUTH_NAMES: [&str; 8] = [
    "Forward",
    "Right-Forward",
    "Right",
    "Right-Back",
    "Back",
    "Left-Back",
    "Left",
    "Left-Forward",
];
/// Zenith level tokens, from straight up (0) to straight down (4).
pub const ZENITH_TOKENS: [&str; 5] = ["H", "HH", "M", "LL", "L"];
pub const PLACE_TOKEN: &str = "PL";

const SECTOR_DEG: f64 = 45.0;
const ZENITH_BOUNDARIES_DEG: [f64; 4] = [22.5, 67.5, 112.5, 157.5];

/// One cell of the direction grid.
///
/// `azimuth_bin` counts 45° sectors clockwise from forward (+x) seen from
/// above, so bin 2 is the demonstrator's right (−y). `zenith_level` counts 45°
/// steps down from vertical. Directions within 22.5° of vertical have no
/// azimuth and are stored as "place" symbols with `azimuth_bin == 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabanDirection {
    azimuth_bin: u8,
    zenith_level: u8,
    place_flag: bool,
}

impl LabanDirection {
    pub const PLACE_HIGH: LabanDirection =
        LabanDirection { azimuth_bin: 0, zenith_level: 0, place_flag: true };
    pub const PLACE_LOW: LabanDirection =
        LabanDirection { azimuth_bin: 0, zenith_level: 4, place_flag: true };

    /// A non-vertical direction. `zenith_level` must be 1, 2 or 3.
    pub fn new(azimuth_bin: u8, zenith_level: u8) -> Result<Self> {
        if azimuth_bin > 7 {
            return Err(Error::invalid(format!("azimuth bin {azimuth_bin} out of range 0..=7")));
        }
        if !(1..=3).contains(&zenith_level) {
            return Err(Error::invalid(format!(
                "zenith level {zenith_level} needs a place symbol or is out of range"
            )));
        }
        Ok(LabanDirection { azimuth_bin, zenith_level, place_flag: false })
    }

    pub fn azimuth_bin(&self) -> u8 {
        self.azimuth_bin
    }

    pub fn zenith_level(&self) -> u8 {
        self.zenith_level
    }

    pub fn is_place(&self) -> bool {
        self.place_flag
    }

    /// Every representable direction: 8 × 3 non-vertical cells plus the two
    /// place symbols.
    pub fn all() -> Vec<LabanDirection> {
        let mut out = vec![Self::PLACE_HIGH];
        for level in 1..=3 {
            for az in 0..8 {
                out.push(LabanDirection { azimuth_bin: az, zenith_level: level, place_flag: false });
            }
        }
        out.push(Self::PLACE_LOW);
        out
    }

    /// Human-readable name, e.g. "Forward Low" or "Place High".
    pub fn name(&self) -> String {
        let level = ["High", "High", "Middle", "Low", "Low"][self.zenith_level as usize];
        if self.place_flag {
            format!("Place {level}")
        } else {
            format!("{} {level}", AZIMUTH_NAMES[self.azimuth_bin as usize])
        }
    }

    pub fn token(&self) -> String {
        let az = if self.place_flag { PLACE_TOKEN } else { AZIMUTH_TOKENS[self.azimuth_bin as usize] };
        format!("{az}-{}", ZENITH_TOKENS[self.zenith_level as usize])
    }
}

impl fmt::Display for LabanDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token())
    }
}

impl FromStr for LabanDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (az, zen) = s
            .split_once('-')
            .ok_or_else(|| Error::invalid(format!("direction token `{s}` lacks `-`")))?;
        let level = ZENITH_TOKENS
            .iter()
            .position(|t| *t == zen)
            .ok_or_else(|| Error::invalid(format!("unknown zenith token `{zen}`")))? as u8;
        if az == PLACE_TOKEN {
            return match level {
                0 => Ok(Self::PLACE_HIGH),
                4 => Ok(Self::PLACE_LOW),
                _ => Err(Error::invalid(format!("place symbol needs H or L, got `{zen}`"))),
            };
        }
        let bin = AZIMUTH_TOKENS
            .iter()
            .position(|t| *t == az)
            .ok_or_else(|| Error::invalid(format!("unknown azimuth token `{az}`")))? as u8;
        LabanDirection::new(bin, level)
    }
}

impl Serialize for LabanDirection {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.token())
    }
}

impl<'de> Deserialize<'de> for LabanDirection {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Quantizes a unit direction into its grid cell.
///
/// Ties on an azimuth sector boundary go to the lower bin index; ties on a
/// zenith boundary go to the level nearer the top.
pub fn digitize_direction<T: Real>(v: &Vec3<T>) -> Result<LabanDirection> {
    if !v.is_finite() {
        return Err(Error::invalid("direction has non-finite components"));
    }
    let n = v.norm().to_f64_lossy();
    let unit_tol = if std::mem::size_of::<T>() >= 8 { 1e-6 } else { 1e-4 };
    if (n - 1.0).abs() > unit_tol {
        return Err(Error::invalid(format!("direction is not unit length (|v| = {n})")));
    }
    let (x, y, z) = (v.x.to_f64_lossy(), v.y.to_f64_lossy(), v.z.to_f64_lossy());
    let zenith = (x.hypot(y)).atan2(z).to_degrees();
    let level = ZENITH_BOUNDARIES_DEG.iter().filter(|b| zenith > **b).count() as u8;
    if level == 0 {
        return Ok(LabanDirection::PLACE_HIGH);
    }
    if level == 4 {
        return Ok(LabanDirection::PLACE_LOW);
    }
    // clockwise angle from +x seen from above
    let mut cw = (-y).atan2(x).to_degrees();
    if cw < 0.0 {
        cw += 360.0;
    }
    let pos = cw / SECTOR_DEG;
    let lower = pos.floor();
    let frac = pos - lower;
    let bin = if frac > 0.5 + 1e-9 {
        (lower as i64 + 1).rem_euclid(8)
    } else if frac < 0.5 - 1e-9 {
        (lower as i64).rem_euclid(8)
    } else {
        let a = (lower as i64).rem_euclid(8);
        let b = (lower as i64 + 1).rem_euclid(8);
        a.min(b)
    };
    LabanDirection::new(bin as u8, level)
}

/// Cell-center unit vector of a direction.
pub fn canonical_direction<T: Real>(d: &LabanDirection) -> Vec3<T> {
    if d.place_flag {
        return if d.zenith_level == 0 { Vec3::unit_z() } else { -Vec3::unit_z() };
    }
    let zenith = (d.zenith_level as f64 * 45.0).to_radians();
    let cw = (d.azimuth_bin as f64 * SECTOR_DEG).to_radians();
    let (sz, cz) = zenith.sin_cos();
    let (sa, ca) = cw.sin_cos();
    Vec3::new(T::lit(sz * ca), T::lit(-sz * sa), T::lit(cz))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64, z: f64) -> Vec3<f64> {
        Vec3::new(x, y, z)
    }

    #[test]
    fn pole_is_place_high() {
        assert_eq!(digitize_direction(&v(0.0, 0.0, 1.0)).unwrap(), LabanDirection::PLACE_HIGH);
        assert_eq!(digitize_direction(&v(0.0, 0.0, -1.0)).unwrap(), LabanDirection::PLACE_LOW);
    }

    #[test]
    fn forward_level() {
        let d = digitize_direction(&v(1.0, 0.0, 0.0)).unwrap();
        assert_eq!((d.azimuth_bin(), d.zenith_level(), d.is_place()), (0, 2, false));
        assert_eq!(d.name(), "Forward Middle");
    }

    #[test]
    fn forward_low_wrist_posture() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let d = digitize_direction(&v(h, 0.0, -h)).unwrap();
        assert_eq!(d.name(), "Forward Low");
        assert_eq!(d.token(), "F-LL");
    }

    #[test]
    fn right_is_minus_y() {
        let d = digitize_direction(&v(0.0, -1.0, 0.0)).unwrap();
        assert_eq!(d.name(), "Right Middle");
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let rl = canonical_direction::<f64>(&LabanDirection::new(2, 3).unwrap());
        assert!((rl - v(0.0, -h, -h)).norm() < 1e-12);
    }

    #[test]
    fn azimuth_tie_goes_to_lower_bin() {
        let a = 22.5f64.to_radians();
        // clockwise 22.5° between Forward (0) and Right-Forward (1)
        let d = digitize_direction(&v(a.cos(), -a.sin(), 0.0)).unwrap();
        assert_eq!(d.azimuth_bin(), 0);
    }

    #[test]
    fn rejects_non_unit_and_nan() {
        assert!(digitize_direction(&v(2.0, 0.0, 0.0)).is_err());
        assert!(digitize_direction(&v(f64::NAN, 0.0, 0.0)).is_err());
    }

    #[test]
    fn tokens_parse_back() {
        for d in LabanDirection::all() {
            assert_eq!(d.token().parse::<LabanDirection>().unwrap(), d);
        }
        assert!("PL-M".parse::<LabanDirection>().is_err());
        assert!("F-H".parse::<LabanDirection>().is_err());
        assert!("X-M".parse::<LabanDirection>().is_err());
    }

    #[test]
    fn representable_cell_count() {
        assert_eq!(LabanDirection::all().len(), 26);
    }

    #[test]
    fn works_in_f32() {
        let d = digitize_direction(&Vec3::<f32>::new(0.0, 1.0, 0.0)).unwrap();
        assert_eq!(d.name(), "Left Middle");
        let c: Vec3<f32> = canonical_direction(&d);
        assert_eq!(digitize_direction(&c).unwrap(), d);
    }
}
