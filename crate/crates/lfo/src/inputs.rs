//! Loading inputs named on the command line or in requests.

use std::fs;
use std::path::Path;

use lfo_core::decoder::{bundled_robots, bundled_worlds, parse_robot, parse_world, RobotSpec, WorldState};
use lfo_core::linalg::Vec3;
use lfo_core::{Error, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// A world file, or the name of a bundled world.
pub fn load_world(arg: &str) -> Result<WorldState> {
    let p = Path::new(arg);
    if p.is_file() {
        return parse_world(&read_text(p)?);
    }
    let all = bundled_worlds();
    let names: Vec<String> = all.iter().map(|w| w.name.clone()).collect();
    all.into_iter()
        .find(|w| w.name == arg)
        .ok_or_else(|| Error::invalid(format!("`{arg}` is neither a world file nor a bundled world ({})", names.join(", "))))
}

/// A robot file, or the name of a bundled robot.
pub fn load_robot(arg: &str) -> Result<RobotSpec> {
    let p = Path::new(arg);
    if p.is_file() {
        return parse_robot(&read_text(p)?);
    }
    let all = bundled_robots();
    let names: Vec<String> = all.iter().map(|r| r.name.clone()).collect();
    all.into_iter()
        .find(|r| r.name == arg)
        .ok_or_else(|| Error::invalid(format!("`{arg}` is neither a robot file nor a bundled robot ({})", names.join(", "))))
}

/// Point cloud text: one `x y z` per line, `#` comments and blank lines
/// skipped.
pub fn parse_cloud(text: &str) -> Result<Vec<Vec3<f64>>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
        match vals[..] {
            [x, y, z] if x.is_finite() && y.is_finite() && z.is_finite() => out.push(Vec3::new(x, y, z)),
            _ => return Err(Error::Parse { line: i + 1, message: "expected three finite numbers".into() }),
        }
    }
    Ok(out)
}

pub fn format_cloud(points: &[Vec3<f64>]) -> String {
    points.iter().map(|p| format!("{} {} {}\n", p.x, p.y, p.z)).collect()
}
