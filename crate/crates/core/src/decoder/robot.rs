//! Robot descriptions and forward kinematics.
//!
//! A robot is a serial chain. Base joints (planar translation, lift) come
//! first and must be prismatic; the arm follows. Joint `i` first translates by
//! `origin` in its parent frame, then moves about or along `axis`. The tool
//! center point (TCP) is `hand` in the last joint frame; its z axis is the
//! direction the palm faces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grasp::GripperSpec;
use crate::linalg::{Mat3, Pose, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Revolute,
    Prismatic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointRole {
    Base,
    Arm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub name: String,
    pub kind: JointKind,
    pub role: JointRole,
    pub axis: Vec3<f64>,
    pub origin: Vec3<f64>,
    /// Radians for revolute joints, meters for prismatic ones.
    pub lower: f64,
    pub upper: f64,
    pub home: f64,
}

impl JointSpec {
    pub fn clamp(&self, q: f64) -> f64 {
        q.clamp(self.lower, self.upper)
    }
}

/// Joints whose frame origins mark the shoulder, elbow and wrist.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmMarkers {
    pub shoulder: usize,
    pub elbow: usize,
    pub wrist: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// World placement of the chain root.
    pub mount: Pose<f64>,
    pub joints: Vec<JointSpec>,
    pub hand: Pose<f64>,
    pub markers: ArmMarkers,
    pub gripper: GripperSpec,
    /// World position of the depth camera used for re-observation.
    pub camera: Vec3<f64>,
}

/// World frames of every joint and the TCP for one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Kinematics {
    pub joints: Vec<Pose<f64>>,
    pub tcp: Pose<f64>,
}

impl Kinematics {
    pub fn point(&self, joint: usize) -> Vec3<f64> {
        self.joints[joint].translation
    }
}

fn unit(v: &Vec3<f64>) -> bool {
    v.is_finite() && (v.norm() - 1.0).abs() < 1e-9
}

impl RobotSpec {
    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn base_dof(&self) -> usize {
        self.joints.iter().take_while(|j| j.role == JointRole::Base).count()
    }

    pub fn home(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.home).collect()
    }

    pub fn clamp(&self, q: &mut [f64]) {
        for (v, j) in q.iter_mut().zip(&self.joints) {
            *v = j.clamp(*v);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(format!("robot `{}`: {m}", self.name)));
        if self.joints.is_empty() {
            return bad("no joints".into());
        }
        let nb = self.base_dof();
        for (i, j) in self.joints.iter().enumerate() {
            if !unit(&j.axis) {
                return bad(format!("joint `{}` axis is not a unit vector", j.name));
            }
            if !j.origin.is_finite() {
                return bad(format!("joint `{}` origin is not finite", j.name));
            }
            if !(j.lower < j.upper) || !(j.lower <= j.home && j.home <= j.upper) {
                return bad(format!("joint `{}` limits must satisfy lower < upper and contain home", j.name));
            }
            if j.role == JointRole::Base {
                if i >= nb {
                    return bad(format!("base joint `{}` follows an arm joint", j.name));
                }
                if j.kind != JointKind::Prismatic {
                    return bad(format!("base joint `{}` must be prismatic", j.name));
                }
            }
        }
        for (i, a) in self.joints[..nb].iter().enumerate() {
            for b in &self.joints[i + 1..nb] {
                if a.axis.dot(&b.axis).abs() > 1e-9 {
                    return bad(format!("base axes `{}` and `{}` are not orthogonal", a.name, b.name));
                }
            }
        }
        let m = self.markers;
        if !(nb <= m.shoulder && m.shoulder < m.elbow && m.elbow < m.wrist && m.wrist < self.dof()) {
            return bad("markers must be ordered arm joints: shoulder < elbow < wrist".into());
        }
        let k = self.fk(&self.home());
        let (upper, fore) = self.link_lengths_at(&k);
        if !(upper > 1e-6 && fore > 1e-6 && self.hand.translation.norm() > 1e-6) {
            return bad("upper arm, forearm and hand lengths must be positive".into());
        }
        let r = self.hand.rotation;
        if (r.mul_mat(&r.transpose()).m.iter().flatten().zip(Mat3::<f64>::identity().m.iter().flatten()))
            .any(|(a, b)| (a - b).abs() > 1e-9)
            || (r.determinant() - 1.0).abs() > 1e-9
        {
            return bad("hand rotation is not a rotation matrix".into());
        }
        self.gripper.validate()?;
        if !self.camera.is_finite() {
            return bad("camera position is not finite".into());
        }
        Ok(())
    }

    pub fn fk(&self, q: &[f64]) -> Kinematics {
        debug_assert_eq!(q.len(), self.dof());
        let mut t = self.mount;
        let mut joints = Vec::with_capacity(q.len());
        for (j, &v) in self.joints.iter().zip(q) {
            t = t.compose(&Pose::from_translation(j.origin));
            let motion = match j.kind {
                JointKind::Revolute => Pose::new(Mat3::from_axis_angle(&j.axis, v), Vec3::zero()),
                JointKind::Prismatic => Pose::from_translation(j.axis * v),
            };
            t = t.compose(&motion);
            joints.push(t);
        }
        let tcp = t.compose(&self.hand);
        Kinematics { joints, tcp }
    }

    pub fn tcp(&self, q: &[f64]) -> Pose<f64> {
        self.fk(q).tcp
    }

    fn link_lengths_at(&self, k: &Kinematics) -> (f64, f64) {
        let m = self.markers;
        (k.point(m.elbow).distance(&k.point(m.shoulder)), k.point(m.wrist).distance(&k.point(m.elbow)))
    }

    /// Upper-arm and forearm lengths.
    pub fn link_lengths(&self) -> (f64, f64) {
        self.link_lengths_at(&self.fk(&self.home()))
    }

    /// Upper arm plus forearm plus hand.
    pub fn reach(&self) -> f64 {
        let (u, f) = self.link_lengths();
        u + f + self.hand.translation.norm()
    }

    /// World-frame 6×n Jacobian of the TCP (linear rows first). Columns of
    /// joints not in `free` are zero.
    pub fn jacobian(&self, k: &Kinematics, free: &[bool]) -> Vec<[f64; 6]> {
        let p = k.tcp.translation;
        self.joints
            .iter()
            .zip(&k.joints)
            .zip(free)
            .map(|((j, frame), &f)| {
                if !f {
                    return [0.0; 6];
                }
                let a = frame.rotation.mul_vec(&j.axis);
                match j.kind {
                    JointKind::Revolute => {
                        let v = a.cross(&(p - frame.translation));
                        [v.x, v.y, v.z, a.x, a.y, a.z]
                    }
                    JointKind::Prismatic => [a.x, a.y, a.z, 0.0, 0.0, 0.0],
                }
            })
            .collect()
    }

    /// Shoulder position with all base joints at zero, and the world
    /// direction each base joint moves it.
    pub fn base_geometry(&self) -> (Vec3<f64>, Vec<Vec3<f64>>) {
        let mut q = self.home();
        let nb = self.base_dof();
        q[..nb].iter_mut().for_each(|v| *v = 0.0);
        let k = self.fk(&q);
        let dirs = (0..nb).map(|i| k.joints[i].rotation.mul_vec(&self.joints[i].axis)).collect();
        (k.point(self.markers.shoulder), dirs)
    }
}

/// TCP offset for a last link pointing along its local x: the palm faces +x.
fn palm_along_x(length: f64) -> Pose<f64> {
    Pose::new(
        Mat3::from_columns(Vec3::unit_z(), -Vec3::unit_y(), Vec3::unit_x()),
        Vec3::new(length, 0.0, 0.0),
    )
}

fn joint(name: &str, kind: JointKind, role: JointRole, axis: Vec3<f64>, origin: [f64; 3], lim: (f64, f64), home: f64) -> JointSpec {
    JointSpec { name: name.into(), kind, role, axis, origin: Vec3::from(origin), lower: lim.0, upper: lim.1, home }
}

fn rev(name: &str, axis: Vec3<f64>, origin: [f64; 3], lim_deg: (f64, f64), home_deg: f64) -> JointSpec {
    joint(
        name,
        JointKind::Revolute,
        JointRole::Arm,
        axis,
        origin,
        (lim_deg.0.to_radians(), lim_deg.1.to_radians()),
        home_deg.to_radians(),
    )
}

/// Six-joint arm on a fixed torso (yaw, pitch, elbow, spherical wrist).
/// Dimensions are invented, chosen to cover a desk in front of the torso.
pub fn fixed6() -> RobotSpec {
    let (x, y, z) = (Vec3::unit_x(), Vec3::unit_y(), Vec3::unit_z());
    RobotSpec {
        name: "fixed6".into(),
        description: "6-DOF arm on a fixed torso; invented dimensions".into(),
        mount: Pose::from_translation(Vec3::new(0.0, -0.22, 0.80)),
        joints: vec![
            rev("shoulder_yaw", z, [0.0, 0.0, 0.25], (-170.0, 170.0), 0.0),
            rev("shoulder_pitch", y, [0.0, 0.0, 0.0], (-100.0, 135.0), 30.0),
            rev("elbow", y, [0.32, 0.0, 0.0], (-160.0, 160.0), 60.0),
            rev("forearm_roll", x, [0.30, 0.0, 0.0], (-175.0, 175.0), 0.0),
            rev("wrist_pitch", y, [0.0, 0.0, 0.0], (-125.0, 125.0), 30.0),
            rev("wrist_roll", x, [0.0, 0.0, 0.0], (-175.0, 175.0), 0.0),
        ],
        hand: palm_along_x(0.10),
        markers: ArmMarkers { shoulder: 1, elbow: 2, wrist: 3 },
        gripper: GripperSpec::default(),
        camera: Vec3::new(0.05, -0.05, 1.45),
    }
}

/// Seven-joint arm on a lift and a planar base (x, y). Dimensions are
/// invented.
pub fn mobile7() -> RobotSpec {
    let (x, y, z) = (Vec3::unit_x(), Vec3::unit_y(), Vec3::unit_z());
    let base = |name: &str, axis, origin, lim| joint(name, JointKind::Prismatic, JointRole::Base, axis, origin, lim, 0.0);
    let mut lift = base("lift", z, [0.0, 0.0, 0.0], (0.0, 0.45));
    lift.home = 0.2;
    RobotSpec {
        name: "mobile7".into(),
        description: "7-DOF arm on a lift and a planar base; invented dimensions".into(),
        mount: Pose::from_translation(Vec3::new(-0.30, -0.25, 0.0)),
        joints: vec![
            base("base_x", x, [0.0, 0.0, 0.0], (-0.8, 0.8)),
            base("base_y", y, [0.0, 0.0, 0.0], (-0.8, 0.8)),
            lift,
            rev("shoulder_yaw", z, [0.10, 0.0, 0.78], (-160.0, 160.0), 0.0),
            rev("shoulder_pitch", y, [0.0, 0.0, 0.0], (-90.0, 135.0), 30.0),
            rev("upper_arm_roll", x, [0.0, 0.0, 0.0], (-175.0, 175.0), 0.0),
            rev("elbow", y, [0.34, 0.0, 0.0], (-150.0, 150.0), 60.0),
            rev("forearm_roll", x, [0.31, 0.0, 0.0], (-175.0, 175.0), 0.0),
            rev("wrist_pitch", y, [0.0, 0.0, 0.0], (-125.0, 125.0), 30.0),
            rev("wrist_roll", x, [0.0, 0.0, 0.0], (-175.0, 175.0), 0.0),
        ],
        hand: palm_along_x(0.12),
        markers: ArmMarkers { shoulder: 4, elbow: 6, wrist: 7 },
        gripper: GripperSpec::default(),
        camera: Vec3::new(0.0, -0.25, 1.50),
    }
}

pub fn bundled_robots() -> Vec<RobotSpec> {
    vec![fixed6(), mobile7()]
}

pub fn bundled_robot(name: &str) -> Option<RobotSpec> {
    bundled_robots().into_iter().find(|r| r.name == name)
}

pub fn parse_robot(text: &str) -> Result<RobotSpec> {
    let r: RobotSpec = crate::decoder::parse_json(text)?;
    r.validate()?;
    Ok(r)
}
