//! Closures, contact webs and the force-closure test.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{nnls, Matrix, Vec3};
use crate::scalar::Real;

use super::superquadric::SuperquadricParams;

/// Grasp objective: cage by shape, immobilize by squeezing, or hold with the
/// fingertips while keeping the object manipulable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClosureType {
    PassiveForm,
    PassiveForce,
    ActiveForce,
}

impl ClosureType {
    pub const ALL: [ClosureType; 3] = [ClosureType::PassiveForm, ClosureType::PassiveForce, ClosureType::ActiveForce];

    pub fn as_str(&self) -> &'static str {
        match self {
            ClosureType::PassiveForm => "passive-form",
            ClosureType::PassiveForce => "passive-force",
            ClosureType::ActiveForce => "active-force",
        }
    }
}

impl fmt::Display for ClosureType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClosureType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['_', ' '], "-");
        let key = key.strip_suffix("-closure").unwrap_or(&key);
        match key {
            "passive-form" => Ok(ClosureType::PassiveForm),
            // the handle grasp in the fridge demo is a loose caging grasp
            "loose" => Ok(ClosureType::PassiveForm),
            "passive-force" => Ok(ClosureType::PassiveForce),
            "active-force" => Ok(ClosureType::ActiveForce),
            _ => Err(Error::invalid(format!("unknown closure `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GripperSpec {
    /// Thumb plus fingers.
    pub fingers: usize,
    /// Largest distance between two contacts the hand can reach (m).
    pub span: f64,
    pub fingertip_radius: f64,
}

impl Default for GripperSpec {
    fn default() -> Self {
        GripperSpec { fingers: 3, span: 0.25, fingertip_radius: 0.01 }
    }
}

impl GripperSpec {
    pub fn validate(&self) -> Result<()> {
        if self.fingers < 2 {
            return Err(Error::invalid("gripper needs at least 2 fingers"));
        }
        if !(self.span > 0.0) || !(self.fingertip_radius >= 0.0) {
            return Err(Error::invalid("gripper span must be positive and fingertip radius non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct WebContact<T> {
    pub point: Vec3<T>,
    /// Unit normal pointing into the object.
    pub normal: Vec3<T>,
}

/// Contact points realizing a closure on a particular object, in world
/// coordinates. The first contact is the thumb.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct ContactWeb<T> {
    pub closure: ClosureType,
    pub contacts: Vec<WebContact<T>>,
    /// Side from which the hand comes: the normalized sum of the outward
    /// contact normals, or the object's +z when they cancel.
    pub approach: Vec3<T>,
    /// Reference point for torques.
    pub center: Vec3<T>,
    pub fingertip_radius: T,
}

impl<T: Real> ContactWeb<T> {
    /// Largest `|F − 1|` over the contacts.
    pub fn surface_error(&self, q: &SuperquadricParams<T>) -> T {
        self.contacts
            .iter()
            .map(|c| (super::superquadric::implicit_value(q, &c.point) - T::one()).abs())
            .fold(T::zero(), T::max)
    }

    pub fn max_contact_distance(&self) -> T {
        let mut best = T::zero();
        for (i, a) in self.contacts.iter().enumerate() {
            for b in &self.contacts[i + 1..] {
                best = best.max(a.point.distance(&b.point));
            }
        }
        best
    }
}

/// Surface point and inward normal along a local direction.
fn place<T: Real>(q: &SuperquadricParams<T>, d: Vec3<T>) -> WebContact<T> {
    let p = q.radial_projection_local(&d.normalize());
    WebContact { point: p, normal: -q.normal_local(&p) }
}

fn ring<T: Real>(q: &SuperquadricParams<T>, count: usize, elevation: T) -> Vec<WebContact<T>> {
    let (se, ce) = elevation.sin_cos();
    (0..count)
        .map(|k| {
            let phi = T::lit(2.0 * std::f64::consts::PI * k as f64 / count as f64);
            place(q, Vec3::new(q.a1 * ce * phi.cos(), q.a2 * ce * phi.sin(), q.a3 * se))
        })
        .collect()
}

/// Places the contacts of a closure on the object analytically.
///
/// Passive force: thumb and fingers evenly spaced around the equator.
/// Passive form: thumb on the center of one face across the narrower
/// horizontal axis, fingers on the opposite face. Active force: the same ring
/// raised to 45° elevation, so the fingertips hold the upper part.
pub fn compute_contact_web<T: Real>(
    q: &SuperquadricParams<T>,
    closure: ClosureType,
    g: &GripperSpec,
) -> Result<ContactWeb<T>> {
    q.validate()?;
    g.validate()?;
    let local = match closure {
        ClosureType::PassiveForce => ring(q, g.fingers, T::zero()),
        ClosureType::ActiveForce => ring(q, g.fingers, T::FRAC_PI_4()),
        ClosureType::PassiveForm => {
            let (axis, other) = if q.a1 <= q.a2 { (0, 1) } else { (1, 0) };
            let mut out = vec![place(q, Vec3::axis(axis))];
            let fingers = g.fingers - 1;
            for k in 0..fingers {
                let mut d = -Vec3::<T>::axis(axis) * q.sizes()[axis];
                if fingers > 1 {
                    let s = T::lit(-0.3 + 0.6 * k as f64 / (fingers - 1) as f64);
                    d = d + Vec3::axis(other) * (s * q.sizes()[other]);
                }
                out.push(place(q, d));
            }
            out
        }
    };
    let outward = local.iter().fold(Vec3::zero(), |acc, c| acc - c.normal);
    let approach_local = outward.try_normalize(T::lit(1e-6)).unwrap_or(Vec3::unit_z());
    let contacts: Vec<WebContact<T>> = local
        .iter()
        .map(|c| WebContact {
            point: q.pose.transform_point(&c.point),
            normal: q.pose.transform_vector(&c.normal).normalize(),
        })
        .collect();
    let web = ContactWeb {
        closure,
        contacts,
        approach: q.pose.transform_vector(&approach_local).normalize(),
        center: q.pose.translation,
        fingertip_radius: T::lit(g.fingertip_radius),
    };
    let reach = web.max_contact_distance();
    if reach > T::lit(g.span) {
        return Err(Error::InfeasibleGrasp(format!(
            "contacts {:.3} m apart exceed gripper span {:.3} m",
            reach.to_f64_lossy(),
            g.span
        )));
    }
    Ok(web)
}

/// Whether the contacts can resist any external wrench.
///
/// Each contact's friction cone is replaced by `m` edge forces; with a
/// positive fingertip radius the contact is soft and can also resist torque
/// about its normal up to `μ · r` times the normal force. The test passes when
/// every signed 6D unit wrench is a non-negative combination of the contact
/// wrenches, i.e. the origin is strictly inside their convex hull.
pub fn check_force_closure<T: Real>(web: &ContactWeb<T>, friction_mu: T, m: usize) -> Result<bool> {
    if m < 4 {
        return Err(Error::invalid("friction cones need at least 4 edges"));
    }
    if !(friction_mu >= T::zero()) {
        return Err(Error::invalid("friction coefficient must be non-negative"));
    }
    if web.contacts.is_empty() {
        return Ok(false);
    }
    let scale = web
        .contacts
        .iter()
        .map(|c| c.point.distance(&web.center))
        .fold(T::zero(), T::max);
    let scale = if scale > T::zero() { scale } else { T::one() };
    let torsion = friction_mu * web.fingertip_radius / scale;
    let mut cols: Vec<[T; 6]> = Vec::new();
    for c in &web.contacts {
        let r = c.point - web.center;
        let t1 = c.normal.any_orthonormal();
        let t2 = c.normal.cross(&t1);
        let mut push = |f: Vec3<T>, extra: Vec3<T>| {
            let tau = r.cross(&f) * (T::one() / scale) + extra;
            cols.push([f.x, f.y, f.z, tau.x, tau.y, tau.z]);
        };
        for j in 0..m {
            let th = T::lit(2.0 * std::f64::consts::PI * j as f64 / m as f64);
            push(c.normal + (t1 * th.cos() + t2 * th.sin()) * friction_mu, Vec3::zero());
        }
        if torsion > T::zero() {
            push(c.normal, c.normal * torsion);
            push(c.normal, -c.normal * torsion);
        }
    }
    let mut w = Matrix::zeros(6, cols.len());
    for (j, col) in cols.iter().enumerate() {
        for i in 0..6 {
            w[(i, j)] = col[i];
        }
    }
    let tol = T::lit(1e-9).max(T::loose_eps());
    for i in 0..6 {
        for sign in [T::one(), -T::one()] {
            let mut b = [T::zero(); 6];
            b[i] = sign;
            let (_, residual) = nnls(&w, &b);
            if residual > tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Object and purpose tags to closure, replacing a learned grasp recognizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffordanceTable {
    pub pairs: BTreeMap<String, ClosureType>,
    pub purposes: BTreeMap<String, ClosureType>,
    pub objects: BTreeMap<String, ClosureType>,
}

fn pair_key(object: &str, purpose: &str) -> String {
    format!("{}/{}", object.trim().to_ascii_lowercase(), purpose.trim().to_ascii_lowercase())
}

impl Default for AffordanceTable {
    fn default() -> Self {
        use ClosureType::*;
        let map = |items: &[(&str, ClosureType)]| items.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        AffordanceTable {
            pairs: map(&[
                ("cup/carry", PassiveForce),
                ("box/place", ActiveForce),
                ("pen/write", ActiveForce),
                ("pen/push", PassiveForce),
                ("pen/point", ActiveForce),
                ("handle/open", PassiveForm),
            ]),
            purposes: map(&[
                ("write", ActiveForce),
                ("push", PassiveForce),
                ("point", ActiveForce),
                ("carry", PassiveForce),
                ("place", ActiveForce),
                ("open", PassiveForm),
            ]),
            objects: map(&[
                ("cup", PassiveForce),
                ("box", ActiveForce),
                ("can", ActiveForce),
                ("handle", PassiveForm),
                ("pen", ActiveForce),
            ]),
        }
    }
}

impl AffordanceTable {
    /// Exact pair, then purpose, then object, then passive force.
    pub fn select(&self, object: &str, purpose: &str) -> ClosureType {
        let lower = |s: &str| s.trim().to_ascii_lowercase();
        self.pairs
            .get(&pair_key(object, purpose))
            .or_else(|| self.purposes.get(&lower(purpose)))
            .or_else(|| self.objects.get(&lower(object)))
            .copied()
            .unwrap_or(ClosureType::PassiveForce)
    }
}

pub fn select_closure(object_tag: &str, purpose_tag: &str) -> ClosureType {
    AffordanceTable::default().select(object_tag, purpose_tag)
}

/// Collapses grasp-taxonomy labels onto the three closures.
pub fn closure_for_grasp_type(label: &str) -> Option<ClosureType> {
    use ClosureType::*;
    Some(match label.trim().to_ascii_lowercase().as_str() {
        "large-diameter" | "small-diameter" | "medium-wrap" | "power-sphere" | "power-disk" | "adducted-thumb" => {
            PassiveForce
        }
        "hook" | "platform" | "lateral-tripod" | "parallel-extension" => PassiveForm,
        "thumb-2" | "thumb-3" | "thumb-4" | "tripod" | "precision-sphere" | "precision-disk" | "lateral-pinch"
        | "writing-tripod" => ActiveForce,
        _ => return None,
    })
}
