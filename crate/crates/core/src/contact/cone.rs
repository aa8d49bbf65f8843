//! Feasible infinitesimal motions under unilateral contacts.
//!
//! Each contact with normal `N` restricts a motion direction `X` to
//! `N · X ≥ 0`. The solution set is a polyhedral cone; its linear span and its
//! lineality space (the directions free in both senses) determine one of eight
//! contact-state classes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{nnls, rank3, symmetric_eigen, Matrix, Vec3};
use crate::scalar::Real;

/// A unilateral contact constraint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct ContactElement<T> {
    /// Points from the environment into the object's free half-space.
    pub normal: Vec3<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec3<T>>,
}

impl<T: Real> ContactElement<T> {
    pub fn new(normal: Vec3<T>) -> Result<Self> {
        check_unit(&normal)?;
        Ok(ContactElement { normal, point: None })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ContactStateClass {
    FullSphere,
    Hemisphere,
    ConvexRegion,
    GreatCircle,
    HalfGreatCircle,
    AntipodalPair,
    SinglePoint,
    Empty,
}

impl ContactStateClass {
    pub const ALL: [ContactStateClass; 8] = [
        ContactStateClass::FullSphere,
        ContactStateClass::Hemisphere,
        ContactStateClass::ConvexRegion,
        ContactStateClass::GreatCircle,
        ContactStateClass::HalfGreatCircle,
        ContactStateClass::AntipodalPair,
        ContactStateClass::SinglePoint,
        ContactStateClass::Empty,
    ];

    /// Class from the dimension of the cone's span and of its lineality space.
    pub fn from_dims(span_dim: usize, lineality_dim: usize) -> Option<Self> {
        use ContactStateClass::*;
        Some(match (span_dim, lineality_dim) {
            (3, 3) => FullSphere,
            (3, 2) => Hemisphere,
            (3, 0 | 1) => ConvexRegion,
            (2, 2) => GreatCircle,
            (2, 0 | 1) => HalfGreatCircle,
            (1, 1) => AntipodalPair,
            (1, 0) => SinglePoint,
            (0, 0) => Empty,
            _ => return None,
        })
    }

    /// Short label used in task frames, e.g. `PC (partial contact)`.
    pub fn label(&self) -> &'static str {
        use ContactStateClass::*;
        match self {
            FullSphere => "NC (no contact)",
            Hemisphere => "PC (partial contact)",
            ConvexRegion => "MC (multiple contact)",
            GreatCircle => "PL (planar sliding)",
            HalfGreatCircle => "HP (half-planar)",
            AntipodalPair => "TD (two-directional)",
            SinglePoint => "OD (one-directional)",
            Empty => "FC (fully constrained)",
        }
    }
}

impl fmt::Display for ContactStateClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Solution set of a contact configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct FeasibleCone<T> {
    pub constraints: Vec<Vec3<T>>,
    pub class: ContactStateClass,
    /// Extreme directions; lineality directions appear with both signs.
    pub generators: Vec<Vec3<T>>,
    pub span_dim: usize,
    pub lineality_dim: usize,
}

impl<T: Real> FeasibleCone<T> {
    /// `N · x ≥ −tol` for every constraint.
    pub fn contains(&self, x: &Vec3<T>, tol: T) -> bool {
        self.constraints.iter().all(|n| n.dot(x) >= -tol)
    }
}

fn check_unit<T: Real>(n: &Vec3<T>) -> Result<()> {
    let tol = T::geom_eps();
    if !n.is_finite() || (n.norm() - T::one()).abs() > tol {
        return Err(Error::invalid(format!("contact normal {n:?} is not a unit vector")));
    }
    Ok(())
}

/// Orthonormal basis of `{x : N_i · x = 0 ∀i}` and the rank of the normals.
fn lineality_basis<T: Real>(normals: &[Vec3<T>]) -> (usize, Vec<Vec3<T>>) {
    let mut s: Matrix<T> = Matrix::zeros(3, 3);
    for n in normals {
        for i in 0..3 {
            for j in 0..3 {
                s[(i, j)] = s[(i, j)] + n[i] * n[j];
            }
        }
    }
    let (vals, vecs) = symmetric_eigen(&s);
    let tol = T::geom_eps();
    let rank = vals.iter().filter(|&&l| l > tol).count();
    let basis = (rank..3).map(|j| Vec3::new(vecs[(0, j)], vecs[(1, j)], vecs[(2, j)]).normalize()).collect();
    (rank, basis)
}

/// Indices of constraints that hold with equality on the whole cone: `i` such
/// that `−N_i` is a non-negative combination of the other normals.
fn implicit_equalities<T: Real>(normals: &[Vec3<T>]) -> Vec<usize> {
    let tol = T::lit(1e-7).max(T::loose_eps());
    (0..normals.len())
        .filter(|&i| {
            let others: Vec<&Vec3<T>> =
                normals.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, n)| n).collect();
            if others.is_empty() {
                return false;
            }
            let mut a = Matrix::zeros(3, others.len());
            for (c, n) in others.iter().enumerate() {
                for r in 0..3 {
                    a[(r, c)] = n[r];
                }
            }
            let target = -normals[i];
            let (_, residual) = nnls(&a, &[target.x, target.y, target.z]);
            residual <= tol
        })
        .collect()
}

fn push_unique<T: Real>(out: &mut Vec<Vec3<T>>, v: Vec3<T>) {
    let tol = T::lit(1e-9).max(T::loose_eps() * T::lit(0.01));
    if !out.iter().any(|u| (*u - v).norm() <= tol) {
        out.push(v);
    }
}

/// Extreme directions of the cone: `±b` for a lineality basis, plus the
/// extreme rays of the pointed part.
fn generators<T: Real>(normals: &[Vec3<T>], lineality: &[Vec3<T>]) -> Vec<Vec3<T>> {
    let eps = T::geom_eps();
    let feasible = |c: &Vec3<T>| normals.iter().all(|n| n.dot(c) >= -eps);
    let mut gens = Vec::new();
    for b in lineality {
        push_unique(&mut gens, *b);
        push_unique(&mut gens, -*b);
    }
    let mut candidates = Vec::new();
    match lineality.len() {
        0 => {
            for i in 0..normals.len() {
                for j in i + 1..normals.len() {
                    if let Some(c) = normals[i].cross(&normals[j]).try_normalize(eps) {
                        candidates.push(c);
                        candidates.push(-c);
                    }
                }
            }
        }
        1 => {
            for n in normals {
                if let Some(c) = lineality[0].cross(n).try_normalize(eps) {
                    candidates.push(c);
                    candidates.push(-c);
                }
            }
        }
        2 => {
            if let Some(n) = normals.first() {
                candidates.push(*n);
                candidates.push(-*n);
            }
        }
        _ => {}
    }
    for c in candidates {
        if !feasible(&c) {
            continue;
        }
        if lineality.is_empty() {
            let active: Vec<Vec3<T>> = normals.iter().filter(|n| n.dot(&c).abs() <= eps).copied().collect();
            if rank3(&active, eps) < 2 {
                continue;
            }
        }
        push_unique(&mut gens, c);
    }
    gens
}

/// Computes the feasible-motion cone of a set of unit contact normals.
pub fn feasible_cone<T: Real>(normals: &[Vec3<T>]) -> Result<FeasibleCone<T>> {
    for n in normals {
        check_unit(n)?;
    }
    let (rank, lineality) = lineality_basis(normals);
    let lineality_dim = 3 - rank;
    let implicit: Vec<Vec3<T>> = implicit_equalities(normals).into_iter().map(|i| normals[i]).collect();
    let (implicit_rank, _) = lineality_basis(&implicit);
    let span_dim = 3 - implicit_rank;
    let class = ContactStateClass::from_dims(span_dim, lineality_dim).ok_or_else(|| {
        Error::invalid(format!("inconsistent cone dimensions ({span_dim}, {lineality_dim})"))
    })?;
    Ok(FeasibleCone {
        constraints: normals.to_vec(),
        class,
        generators: generators(normals, &lineality),
        span_dim,
        lineality_dim,
    })
}

pub fn feasible_cone_of<T: Real>(elements: &[ContactElement<T>]) -> Result<FeasibleCone<T>> {
    let normals: Vec<Vec3<T>> = elements.iter().map(|e| e.normal).collect();
    feasible_cone(&normals)
}

/// Contact-state class of a cone.
pub fn classify_state<T: Real>(cone: &FeasibleCone<T>) -> ContactStateClass {
    ContactStateClass::from_dims(cone.span_dim, cone.lineality_dim).unwrap_or(cone.class)
}

/// `n` points spread over the unit sphere on a Fibonacci lattice.
pub fn fibonacci_sphere<T: Real>(n: usize) -> Vec<Vec3<T>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Vec3::new(T::lit(r * phi.cos()), T::lit(r * phi.sin()), T::lit(z))
        })
        .collect()
}

/// Brute-force membership: the Fibonacci-lattice directions satisfying every
/// constraint within `tol`.
pub fn sample_feasible_oracle_with_tol<T: Real>(normals: &[Vec3<T>], n: usize, tol: T) -> Vec<Vec3<T>> {
    fibonacci_sphere(n)
        .into_iter()
        .filter(|x| normals.iter().all(|nn| nn.dot(x) >= -tol))
        .collect()
}

pub fn sample_feasible_oracle<T: Real>(normals: &[Vec3<T>], n: usize) -> Vec<Vec3<T>> {
    sample_feasible_oracle_with_tol(normals, n, T::geom_eps())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ContactStateClass::*;

    fn v(x: f64, y: f64, z: f64) -> Vec3<f64> {
        Vec3::new(x, y, z)
    }

    fn class_of(ns: &[Vec3<f64>]) -> ContactStateClass {
        feasible_cone(ns).unwrap().class
    }

    #[test]
    fn no_contact_is_full_sphere() {
        let c = feasible_cone::<f64>(&[]).unwrap();
        assert_eq!(c.class, FullSphere);
        assert_eq!(c.generators.len(), 6);
    }

    #[test]
    fn table_contact_is_upper_hemisphere() {
        let c = feasible_cone(&[v(0.0, 0.0, 1.0)]).unwrap();
        assert_eq!(c.class, Hemisphere);
        assert!(c.generators.contains(&v(0.0, 0.0, 1.0)));
    }

    #[test]
    fn sandwich_is_great_circle() {
        assert_eq!(class_of(&[v(0.0, 0.0, 1.0), v(0.0, 0.0, -1.0)]), GreatCircle);
    }

    #[test]
    fn four_side_walls_leave_antipodal_pair() {
        let ns = [v(1.0, 0.0, 0.0), v(-1.0, 0.0, 0.0), v(0.0, 1.0, 0.0), v(0.0, -1.0, 0.0)];
        let c = feasible_cone(&ns).unwrap();
        assert_eq!(c.class, AntipodalPair);
        assert_eq!(c.generators.len(), 2);
        assert!(c.generators.iter().all(|g| g.z.abs() > 1.0 - 1e-12));
    }

    #[test]
    fn corner_is_convex_region() {
        let c = feasible_cone(&[v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0), v(0.0, 0.0, 1.0)]).unwrap();
        assert_eq!(c.class, ConvexRegion);
        assert_eq!(c.generators.len(), 3);
    }

    #[test]
    fn six_walls_immobilize() {
        let ns: Vec<_> = (0..3).flat_map(|i| [Vec3::axis(i), -Vec3::<f64>::axis(i)]).collect();
        let c = feasible_cone(&ns).unwrap();
        assert_eq!(c.class, Empty);
        assert!(c.generators.is_empty());
    }

    #[test]
    fn closed_drawer_is_single_point() {
        let ns = [v(0.0, 1.0, 0.0), v(0.0, -1.0, 0.0), v(0.0, 0.0, 1.0), v(0.0, 0.0, -1.0), v(1.0, 0.0, 0.0)];
        let c = feasible_cone(&ns).unwrap();
        assert_eq!(c.class, SinglePoint);
        assert_eq!(c.generators, vec![v(1.0, 0.0, 0.0)]);
    }

    #[test]
    fn half_plane_and_quarter_arc() {
        assert_eq!(class_of(&[v(0.0, 0.0, 1.0), v(0.0, 0.0, -1.0), v(1.0, 0.0, 0.0)]), HalfGreatCircle);
        assert_eq!(
            class_of(&[v(0.0, 0.0, 1.0), v(0.0, 0.0, -1.0), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0)]),
            HalfGreatCircle
        );
    }

    #[test]
    fn generators_satisfy_constraints() {
        let ns = [v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0), v(0.6, 0.0, 0.8)];
        let c = feasible_cone(&ns).unwrap();
        for g in &c.generators {
            assert!(c.contains(g, 1e-9));
        }
    }

    #[test]
    fn non_unit_normal_is_rejected() {
        assert!(feasible_cone(&[v(0.0, 0.0, 2.0)]).is_err());
    }

    #[test]
    fn oracle_counts() {
        assert_eq!(sample_feasible_oracle::<f64>(&[], 10_000).len(), 10_000);
        let half = sample_feasible_oracle(&[v(0.0, 0.0, 1.0)], 10_000).len() as f64;
        assert!((half - 5000.0).abs() <= 100.0);
        let ns: Vec<_> = (0..3).flat_map(|i| [Vec3::axis(i), -Vec3::<f64>::axis(i)]).collect();
        assert!(sample_feasible_oracle(&ns, 10_000).is_empty());
    }

    #[test]
    fn f32_cones() {
        let c = feasible_cone(&[Vec3::<f32>::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, -1.0)]).unwrap();
        assert_eq!(c.class, GreatCircle);
    }
}
