//! Virtual constraint surfaces that a semantically constrained motion must
//! respect, and trajectory checks against them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Pose, Vec3};
use crate::scalar::{deg, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub enum SemanticConstraint<T> {
    /// Orientation may only change by rotation about `axis` (e.g. gravity for
    /// a glass of water).
    Ping { axis: Vec3<T> },
    /// Positions stay in the slab `0 ≤ n·p − offset ≤ thickness`.
    Wall { normal: Vec3<T>, offset: T, thickness: T },
    Tube { path: Vec<Vec3<T>>, radius: T },
    /// Radial distance from `center` stays in `[inner, inner + shell]`.
    Sphere { center: Vec3<T>, inner: T, shell: T },
    /// Every pose is a rotation of the first about the fixed axis.
    Hinge { point: Vec3<T>, axis: Vec3<T> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct TimedPose<T> {
    pub time: T,
    pub pose: Pose<T>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintTolerance<T> {
    pub angular: T,
    pub linear: T,
    /// Slack on exact boundaries such as the wall slab faces.
    pub boundary: T,
}

impl<T: Real> Default for ConstraintTolerance<T> {
    fn default() -> Self {
        ConstraintTolerance { angular: deg(5.0), linear: T::lit(1e-3), boundary: T::geom_eps() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ConstraintReport {
    Ok,
    Violation { time: f64, reason: String },
}

impl ConstraintReport {
    pub fn is_ok(&self) -> bool {
        matches!(self, ConstraintReport::Ok)
    }

    pub fn into_result(self) -> Result<()> {
        match self {
            ConstraintReport::Ok => Ok(()),
            ConstraintReport::Violation { time, reason } => Err(Error::SemanticViolation { time, reason }),
        }
    }
}

fn unit<T: Real>(v: &Vec3<T>, what: &str) -> Result<()> {
    if !v.is_finite() || (v.norm() - T::one()).abs() > T::geom_eps() {
        return Err(Error::invalid(format!("{what} must be a unit vector")));
    }
    Ok(())
}

fn positive<T: Real>(v: T, what: &str) -> Result<()> {
    if !(v > T::zero()) {
        return Err(Error::invalid(format!("{what} must be positive")));
    }
    Ok(())
}

impl<T: Real> SemanticConstraint<T> {
    pub fn name(&self) -> &'static str {
        match self {
            SemanticConstraint::Ping { .. } => "ping",
            SemanticConstraint::Wall { .. } => "wall",
            SemanticConstraint::Tube { .. } => "tube",
            SemanticConstraint::Sphere { .. } => "sphere",
            SemanticConstraint::Hinge { .. } => "hinge",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SemanticConstraint::Ping { axis } => unit(axis, "ping axis"),
            SemanticConstraint::Wall { normal, thickness, .. } => {
                unit(normal, "wall normal")?;
                positive(*thickness, "wall thickness")
            }
            SemanticConstraint::Tube { path, radius } => {
                if path.is_empty() {
                    return Err(Error::invalid("tube path is empty"));
                }
                positive(*radius, "tube radius")
            }
            SemanticConstraint::Sphere { inner, shell, .. } => {
                if *inner < T::zero() {
                    return Err(Error::invalid("sphere inner radius is negative"));
                }
                positive(*shell, "sphere shell thickness")
            }
            SemanticConstraint::Hinge { axis, .. } => unit(axis, "hinge axis"),
        }
    }
}

fn distance_to_segment<T: Real>(p: &Vec3<T>, a: &Vec3<T>, b: &Vec3<T>) -> T {
    let ab = *b - *a;
    let l2 = ab.norm_squared();
    if l2 <= T::zero() {
        return p.distance(a);
    }
    let s = ((*p - *a).dot(&ab) / l2).max(T::zero()).min(T::one());
    p.distance(&(*a + ab * s))
}

fn distance_to_polyline<T: Real>(p: &Vec3<T>, path: &[Vec3<T>]) -> T {
    if path.len() == 1 {
        return p.distance(&path[0]);
    }
    path.windows(2)
        .map(|w| distance_to_segment(p, &w[0], &w[1]))
        .fold(T::infinity(), T::min)
}

/// Checks every pose of a trajectory; reports the first violation.
pub fn check_semantic_constraint<T: Real>(
    trajectory: &[TimedPose<T>],
    c: &SemanticConstraint<T>,
    tol: &ConstraintTolerance<T>,
) -> Result<ConstraintReport> {
    c.validate()?;
    let first = trajectory.first().ok_or_else(|| Error::invalid("trajectory is empty"))?;
    let first_inv = first.pose.inverse();
    for tp in trajectory {
        let p = tp.pose.translation;
        let reason = match c {
            SemanticConstraint::Wall { normal, offset, thickness } => {
                let d = normal.dot(&p) - *offset;
                (d < -tol.boundary || d > *thickness + tol.boundary)
                    .then(|| format!("signed distance {:.4} m outside [0, {:.4}]", d.to_f64_lossy(), thickness.to_f64_lossy()))
            }
            SemanticConstraint::Tube { path, radius } => {
                let d = distance_to_polyline(&p, path);
                (d > *radius + tol.boundary)
                    .then(|| format!("{:.4} m from path, radius {:.4}", d.to_f64_lossy(), radius.to_f64_lossy()))
            }
            SemanticConstraint::Sphere { center, inner, shell } => {
                let r = p.distance(center);
                (r < *inner - tol.boundary || r > *inner + *shell + tol.boundary).then(|| {
                    format!(
                        "radial distance {:.4} m outside [{:.4}, {:.4}]",
                        r.to_f64_lossy(),
                        inner.to_f64_lossy(),
                        (*inner + *shell).to_f64_lossy()
                    )
                })
            }
            SemanticConstraint::Ping { axis } => {
                let rel = tp.pose.rotation.mul_mat(&first.pose.rotation.transpose());
                let tilt = rel.mul_vec(axis).angle_to(axis);
                (tilt > tol.angular).then(|| format!("axis tilted by {:.2}°", tilt.to_f64_lossy().to_degrees()))
            }
            SemanticConstraint::Hinge { point, axis } => {
                let rel = tp.pose.compose(&first_inv);
                let tilt = rel.rotation.mul_vec(axis).angle_to(axis);
                let drift = rel.transform_point(point).distance(point);
                if tilt > tol.angular {
                    Some(format!("rotation leaves hinge axis by {:.2}°", tilt.to_f64_lossy().to_degrees()))
                } else if drift > tol.linear {
                    Some(format!("hinge point drifts {:.4} m", drift.to_f64_lossy()))
                } else {
                    None
                }
            }
        };
        if let Some(reason) = reason {
            return Ok(ConstraintReport::Violation { time: tp.time.to_f64_lossy(), reason });
        }
    }
    Ok(ConstraintReport::Ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat3;

    fn at(t: f64, p: Vec3<f64>) -> TimedPose<f64> {
        TimedPose { time: t, pose: Pose::from_translation(p) }
    }

    #[test]
    fn wipe_on_table() {
        let wall = SemanticConstraint::Wall { normal: Vec3::unit_z(), offset: 0.7, thickness: 0.01 };
        let ok: Vec<_> = (0..10).map(|i| at(i as f64 * 0.1, Vec3::new(i as f64 * 0.05, 0.0, 0.705))).collect();
        assert!(check_semantic_constraint(&ok, &wall, &Default::default()).unwrap().is_ok());
        let mut lifted = ok.clone();
        lifted[5].pose.translation.z = 0.75;
        match check_semantic_constraint(&lifted, &wall, &Default::default()).unwrap() {
            ConstraintReport::Violation { time, .. } => assert!((time - 0.5).abs() < 1e-12),
            r => panic!("{r:?}"),
        }
    }

    #[test]
    fn tilted_glass() {
        let ping = SemanticConstraint::Ping { axis: Vec3::unit_z() };
        let traj: Vec<_> = (0..=10)
            .map(|i| TimedPose {
                time: i as f64,
                pose: Pose::new(Mat3::from_axis_angle(&Vec3::unit_x(), (i as f64).to_radians()), Vec3::zero()),
            })
            .collect();
        let r = check_semantic_constraint(&traj, &ping, &Default::default()).unwrap();
        assert!(matches!(r, ConstraintReport::Violation { time, .. } if time == 6.0));
    }

    #[test]
    fn invalid_parameters() {
        let c = SemanticConstraint::Tube { path: vec![Vec3::<f64>::zero()], radius: 0.0 };
        assert!(check_semantic_constraint(&[at(0.0, Vec3::zero())], &c, &Default::default()).is_err());
        let c = SemanticConstraint::Ping { axis: Vec3::<f64>::new(0.0, 0.0, 2.0) };
        assert!(c.validate().is_err());
        let c = SemanticConstraint::Ping { axis: Vec3::<f64>::unit_z() };
        assert!(check_semantic_constraint(&[], &c, &Default::default()).is_err());
    }

    #[test]
    fn unknown_variant_fails_to_parse() {
        let r: std::result::Result<SemanticConstraint<f64>, _> = serde_json::from_str(r#"{"kind":"cone"}"#);
        assert!(r.is_err());
        let c: SemanticConstraint<f64> = serde_json::from_str(r#"{"kind":"ping","axis":[0,0,1]}"#).unwrap();
        assert_eq!(c, SemanticConstraint::Ping { axis: Vec3::unit_z() });
    }
}
