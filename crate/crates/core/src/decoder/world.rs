//! Simulated world: rigid objects, horizontal support surfaces and the
//! contact relation of each object with its environment.

use serde::{Deserialize, Serialize};

use crate::contact::{feasible_cone, ContactStateClass};
use crate::error::{Error, Result};
use crate::grasp::{implicit_value, SuperquadricParams};
use crate::linalg::{Mat3, Pose, Vec3};

pub const WORLD_VERSION: u32 = 1;

/// Contact tolerance for resting and joint-limit states.
pub const CONTACT_TOL: f64 = 1e-6;

/// Exponent used when a box is handed to the superquadric machinery.
pub const BOX_EXPONENT: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Superquadric { size: [f64; 3], e1: f64, e2: f64 },
    Box { half: [f64; 3] },
}

impl Shape {
    pub fn superquadric(&self, pose: Pose<f64>) -> SuperquadricParams<f64> {
        match self {
            Shape::Superquadric { size, e1, e2 } => SuperquadricParams::new(*size, *e1, *e2).with_pose(pose),
            Shape::Box { half } => SuperquadricParams::new(*half, BOX_EXPONENT, BOX_EXPONENT).with_pose(pose),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Shape::Superquadric { .. } => self.superquadric(Pose::identity()).validate(),
            Shape::Box { half } => {
                if half.iter().all(|h| h.is_finite() && *h > 0.0) {
                    Ok(())
                } else {
                    Err(Error::invalid("box half sizes must be positive"))
                }
            }
        }
    }

    /// Whether a world point is inside or on the surface.
    pub fn contains(&self, pose: &Pose<f64>, p: &Vec3<f64>) -> bool {
        let local = pose.inverse_transform_point(p);
        match self {
            Shape::Box { half } => (0..3).all(|i| local[i].abs() <= half[i]),
            Shape::Superquadric { .. } => implicit_value(&self.superquadric(Pose::identity()), &local) <= 1.0,
        }
    }

    /// Lowest world z of the surface.
    pub fn lowest_z(&self, pose: &Pose<f64>) -> f64 {
        match self {
            Shape::Box { half } => {
                let r = pose.rotation.row(2);
                pose.translation.z - (0..3).map(|i| r[i].abs() * half[i]).sum::<f64>()
            }
            Shape::Superquadric { .. } => {
                let q = self.superquadric(Pose::identity());
                // support point of the convex surface in direction −z, found
                // by a coarse search over radial directions then refined
                let down = pose.rotation.transpose().mul_vec(&-Vec3::unit_z());
                let depth = |d: &Vec3<f64>| q.radial_projection_local(&d.normalize()).dot(&down);
                let mut best = down;
                let mut best_v = depth(&down);
                for d in crate::contact::fibonacci_sphere::<f64>(400) {
                    let v = depth(&d);
                    if v > best_v {
                        best_v = v;
                        best = d;
                    }
                }
                let mut step = 0.05;
                while step > 1e-7 {
                    let mut improved = false;
                    for axis in 0..3 {
                        for sgn in [-1.0, 1.0] {
                            let mut c = best;
                            c[axis] += sgn * step;
                            let v = depth(&c);
                            if v > best_v {
                                best_v = v;
                                best = c.normalize();
                                improved = true;
                            }
                        }
                    }
                    if !improved {
                        step *= 0.5;
                    }
                }
                pose.translation.z - best_v
            }
        }
    }

    /// Largest semi-axis.
    pub fn radius(&self) -> f64 {
        let s = match self {
            Shape::Superquadric { size, .. } => size,
            Shape::Box { half } => half,
        };
        s.iter().fold(0.0, |m: f64, v| m.max(*v))
    }
}

/// How an object is held by its environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Attachment {
    Free,
    OnSurface {
        support: String,
    },
    InHand,
    /// Revolute joint; `angle` is measured from `rest` about `axis` through
    /// `point`.
    Hinged {
        point: Vec3<f64>,
        axis: Vec3<f64>,
        angle: f64,
        range: [f64; 2],
        rest: Pose<f64>,
    },
    /// Prismatic joint; `position` is the travel from `rest` along `axis`.
    Prismatic {
        axis: Vec3<f64>,
        position: f64,
        range: [f64; 2],
        rest: Pose<f64>,
    },
}

impl Attachment {
    pub fn kind(&self) -> &'static str {
        match self {
            Attachment::Free => "free",
            Attachment::OnSurface { .. } => "on_surface",
            Attachment::InHand => "in_hand",
            Attachment::Hinged { .. } => "hinged",
            Attachment::Prismatic { .. } => "prismatic",
        }
    }

    /// Pose of a jointed object at its current joint value.
    pub fn joint_pose(&self) -> Option<Pose<f64>> {
        match self {
            Attachment::Hinged { point, axis, angle, rest, .. } => {
                let r = Mat3::from_axis_angle(axis, *angle);
                Some(Pose::new(r.mul_mat(&rest.rotation), *point + r.mul_vec(&(rest.translation - *point))))
            }
            Attachment::Prismatic { axis, position, rest, .. } => {
                Some(Pose::new(rest.rotation, rest.translation + *axis * *position))
            }
            _ => None,
        }
    }
}

/// Horizontal support surface: the rectangle `min..max` at height `top`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Support {
    pub name: String,
    pub top: f64,
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Support {
    pub fn covers(&self, p: &Vec3<f64>) -> bool {
        (self.min[0]..=self.max[0]).contains(&p.x) && (self.min[1]..=self.max[1]).contains(&p.y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldObject {
    pub name: String,
    pub shape: Shape,
    pub pose: Pose<f64>,
    pub attachment: Attachment,
}

impl WorldObject {
    pub fn superquadric(&self) -> SuperquadricParams<f64> {
        self.shape.superquadric(self.pose)
    }

    pub fn base_z(&self) -> f64 {
        self.shape.lowest_z(&self.pose)
    }
}

/// The object held by the hand and its pose in the TCP frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grip {
    pub object: String,
    pub offset: Pose<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldState {
    pub version: u32,
    pub name: String,
    pub supports: Vec<Support>,
    pub objects: Vec<WorldObject>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grip: Option<Grip>,
}

/// Attachments only, as recorded in execution traces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldSnapshot {
    pub attachments: Vec<(String, Attachment)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held: Option<String>,
}

impl WorldState {
    pub fn object(&self, name: &str) -> Result<&WorldObject> {
        self.objects
            .iter()
            .find(|o| o.name == name)
            .ok_or_else(|| Error::Precondition(format!("no object `{name}` in the world")))
    }

    pub fn object_mut(&mut self, name: &str) -> Result<&mut WorldObject> {
        self.objects
            .iter_mut()
            .find(|o| o.name == name)
            .ok_or_else(|| Error::Precondition(format!("no object `{name}` in the world")))
    }

    pub fn support(&self, name: &str) -> Option<&Support> {
        self.supports.iter().find(|s| s.name == name)
    }

    /// Highest support under `p` whose top is at or below `z`.
    pub fn support_below(&self, p: &Vec3<f64>, z: f64) -> Option<&Support> {
        self.supports
            .iter()
            .filter(|s| s.covers(p) && s.top <= z + CONTACT_TOL)
            .max_by(|a, b| a.top.total_cmp(&b.top))
    }

    pub fn held(&self) -> Option<&str> {
        self.grip.as_ref().map(|g| g.object.as_str())
    }

    pub fn snapshot(&self) -> WorldSnapshot {
        WorldSnapshot {
            attachments: self.objects.iter().map(|o| (o.name.clone(), o.attachment.clone())).collect(),
            held: self.grip.as_ref().map(|g| g.object.clone()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != WORLD_VERSION {
            return Err(Error::Schema { path: "version".into(), message: format!("unsupported version {}", self.version) });
        }
        for (i, s) in self.supports.iter().enumerate() {
            if self.supports[..i].iter().any(|t| t.name == s.name) {
                return Err(Error::invalid(format!("support `{}` defined twice", s.name)));
            }
            if !(s.min[0] < s.max[0] && s.min[1] < s.max[1]) || !s.top.is_finite() {
                return Err(Error::invalid(format!("support `{}` has an empty or non-finite extent", s.name)));
            }
        }
        for (i, o) in self.objects.iter().enumerate() {
            let bad = |m: String| Err(Error::invalid(format!("object `{}`: {m}", o.name)));
            if self.objects[..i].iter().any(|p| p.name == o.name) {
                return bad("defined twice".into());
            }
            o.shape.validate()?;
            if !o.pose.translation.is_finite() {
                return bad("pose is not finite".into());
            }
            match &o.attachment {
                Attachment::OnSurface { support } => {
                    let Some(s) = self.support(support) else {
                        return bad(format!("rests on unknown support `{support}`"));
                    };
                    let gap = o.base_z() - s.top;
                    if gap.abs() > CONTACT_TOL || !s.covers(&o.pose.translation) {
                        return bad(format!("not in contact with `{support}` (gap {gap:.2e} m)"));
                    }
                }
                Attachment::Hinged { axis, angle, range, .. } | Attachment::Prismatic { axis, position: angle, range, .. } => {
                    if (axis.norm() - 1.0).abs() > 1e-9 {
                        return bad("joint axis is not a unit vector".into());
                    }
                    if !(range[0] < range[1]) || *angle < range[0] - CONTACT_TOL || *angle > range[1] + CONTACT_TOL {
                        return bad("joint value outside its range".into());
                    }
                    let expect = o.attachment.joint_pose().expect("jointed");
                    if expect.translation.distance(&o.pose.translation) > CONTACT_TOL {
                        return bad("pose disagrees with the joint value".into());
                    }
                }
                Attachment::InHand => {
                    if self.held() != Some(o.name.as_str()) {
                        return bad("in hand but not held".into());
                    }
                }
                Attachment::Free => {}
            }
        }
        if let Some(g) = &self.grip {
            self.object(&g.object).map_err(|_| Error::invalid(format!("grip on unknown object `{}`", g.object)))?;
        }
        Ok(())
    }
}

fn joint_normals(axis: &Vec3<f64>, value: f64, range: &[f64; 2]) -> Vec<Vec3<f64>> {
    let u = axis.any_orthonormal();
    let v = axis.cross(&u);
    let mut n = vec![u, -u, v, -v];
    if value <= range[0] + CONTACT_TOL {
        n.push(*axis);
    }
    if value >= range[1] - CONTACT_TOL {
        n.push(-*axis);
    }
    n
}

/// Contact-state class of an object's environment contacts, recomputed from
/// its attachment. The hand does not count as environment. Jointed objects
/// are classified in their joint's motion space (translation for prismatic,
/// rotation for hinged): the rails or hinge leave one line of motion, and
/// a joint limit halves it. A support that no longer exists gives no contact.
pub fn contact_class_of(attachment: &Attachment, supports: &[Support]) -> ContactStateClass {
    let normals = match attachment {
        Attachment::Free | Attachment::InHand => vec![],
        Attachment::OnSurface { support } => {
            if supports.iter().any(|s| &s.name == support) {
                vec![Vec3::unit_z()]
            } else {
                vec![]
            }
        }
        Attachment::Hinged { axis, angle, range, .. } => joint_normals(axis, *angle, range),
        Attachment::Prismatic { axis, position, range, .. } => joint_normals(axis, *position, range),
    };
    feasible_cone(&normals).expect("unit normals").class
}

pub fn contact_class(world: &WorldState, object: &str) -> Result<ContactStateClass> {
    Ok(contact_class_of(&world.object(object)?.attachment, &world.supports))
}

pub fn parse_world(text: &str) -> Result<WorldState> {
    let w: WorldState = crate::decoder::parse_json(text)?;
    w.validate()?;
    Ok(w)
}

pub fn serialize_world(w: &WorldState) -> String {
    let mut s = serde_json::to_string_pretty(w).expect("world serializes");
    s.push('\n');
    s
}

fn table(top: f64) -> Support {
    Support { name: "table".into(), top, min: [0.10, -0.60], max: [0.90, 0.60] }
}

fn resting(name: &str, shape: Shape, xy: [f64; 2], support: &Support) -> WorldObject {
    let mut o = WorldObject {
        name: name.into(),
        shape,
        pose: Pose::from_translation(Vec3::new(xy[0], xy[1], 0.0)),
        attachment: Attachment::OnSurface { support: support.name.clone() },
    };
    o.pose.translation.z = support.top - o.base_z();
    o
}

/// Table with a plate; the box sits at its demonstration position.
pub fn box_world() -> WorldState {
    let table = table(0.70);
    let plate = Support { name: "plate".into(), top: 0.72, min: [0.32, 0.07], max: [0.48, 0.23] };
    let boxed = resting("box", Shape::Box { half: [0.04, 0.04, 0.05] }, [0.40, -0.10], &table);
    WorldState { version: WORLD_VERSION, name: "box_world".into(), supports: vec![table, plate], objects: vec![boxed], grip: None }
}

/// Desk with a cup and a raised shelf.
pub fn shelf_world() -> WorldState {
    let table = table(0.75);
    let shelf = Support { name: "shelf".into(), top: 0.95, min: [0.38, 0.04], max: [0.60, 0.30] };
    let cup = resting("cup", Shape::Superquadric { size: [0.035, 0.035, 0.05], e1: 0.2, e2: 1.0 }, [0.35, -0.15], &table);
    WorldState { version: WORLD_VERSION, name: "shelf_world".into(), supports: vec![table, shelf], objects: vec![cup], grip: None }
}

/// Desk with a can and a low bin beside it.
pub fn garbage_world() -> WorldState {
    let mut table = table(0.72);
    table.max[1] = 0.0;
    let bin = Support { name: "bin".into(), top: 0.45, min: [0.15, 0.05], max: [0.45, 0.35] };
    let can = resting("can", Shape::Superquadric { size: [0.033, 0.033, 0.06], e1: 0.2, e2: 1.0 }, [0.35, -0.10], &table);
    WorldState { version: WORLD_VERSION, name: "garbage_world".into(), supports: vec![table, bin], objects: vec![can], grip: None }
}

/// Refrigerator door handle on a vertical hinge; the door is closed.
pub fn fridge_world() -> WorldState {
    let rest = Pose::from_translation(Vec3::new(0.48, -0.05, 0.95));
    let attachment = Attachment::Hinged {
        point: Vec3::new(0.48, -0.45, 0.95),
        axis: Vec3::unit_z(),
        angle: 0.0,
        range: [0.0, 110f64.to_radians()],
        rest,
    };
    let handle = WorldObject { name: "handle".into(), shape: Shape::Box { half: [0.015, 0.015, 0.08] }, pose: rest, attachment };
    WorldState { version: WORLD_VERSION, name: "fridge_world".into(), supports: vec![], objects: vec![handle], grip: None }
}

/// Closed drawer pulled along +x.
pub fn drawer_world() -> WorldState {
    let rest = Pose::from_translation(Vec3::new(0.35, -0.05, 0.85));
    let attachment = Attachment::Prismatic { axis: Vec3::unit_x(), position: 0.0, range: [0.0, 0.30], rest };
    let drawer = WorldObject { name: "drawer".into(), shape: Shape::Box { half: [0.015, 0.06, 0.015] }, pose: rest, attachment };
    WorldState { version: WORLD_VERSION, name: "drawer_world".into(), supports: vec![], objects: vec![drawer], grip: None }
}

pub fn bundled_worlds() -> Vec<WorldState> {
    vec![box_world(), shelf_world(), garbage_world(), fridge_world(), drawer_world()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_worlds_are_valid_and_round_trip() {
        for w in bundled_worlds() {
            w.validate().unwrap();
            assert_eq!(parse_world(&serialize_world(&w)).unwrap(), w);
        }
    }

    #[test]
    fn lowest_points() {
        let b = Shape::Box { half: [0.1, 0.2, 0.3] };
        assert!((b.lowest_z(&Pose::from_translation(Vec3::new(0.0, 0.0, 1.0))) - 0.7).abs() < 1e-12);
        let tilted = Pose::new(Mat3::from_axis_angle(&Vec3::unit_x(), std::f64::consts::FRAC_PI_2), Vec3::zero());
        assert!((b.lowest_z(&tilted) + 0.2).abs() < 1e-12);
        let s = Shape::Superquadric { size: [0.1, 0.1, 0.2], e1: 1.0, e2: 1.0 };
        assert!((s.lowest_z(&Pose::identity()) + 0.2).abs() < 1e-6);
        assert!((s.lowest_z(&tilted) + 0.1).abs() < 1e-6);
    }

    #[test]
    fn classes_follow_attachments() {
        use ContactStateClass::*;
        let w = box_world();
        assert_eq!(contact_class(&w, "box").unwrap(), Hemisphere);
        assert_eq!(contact_class_of(&Attachment::InHand, &[]), FullSphere);
        let f = fridge_world();
        assert_eq!(contact_class(&f, "handle").unwrap(), SinglePoint);
        let mut open = f.objects[0].attachment.clone();
        if let Attachment::Hinged { angle, .. } = &mut open {
            *angle = 0.5;
        }
        assert_eq!(contact_class_of(&open, &[]), AntipodalPair);
        assert_eq!(contact_class(&drawer_world(), "drawer").unwrap(), SinglePoint);
        // a support that disappeared leaves no contact
        assert_eq!(contact_class_of(&Attachment::OnSurface { support: "gone".into() }, &w.supports), FullSphere);
    }

    #[test]
    fn floating_object_rejected() {
        let mut w = box_world();
        w.objects[0].pose.translation.z += 0.01;
        assert!(w.validate().is_err());
    }
}
