//! Superquadric shape model and synthetic visible-side point clouds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Pose, Vec3};
use crate::scalar::{deg, Real};

/// Superquadric `F(x, y, z) = 1` in its own frame, placed in the world by
/// `pose`. `e1` shapes the latitude profile (along z), `e2` the horizontal
/// cross-section.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct SuperquadricParams<T> {
    pub a1: T,
    pub a2: T,
    pub a3: T,
    pub e1: T,
    pub e2: T,
    pub pose: Pose<T>,
}

/// Ranges used when drawing random objects and viewpoints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomizationRanges {
    pub exponent: (f64, f64),
    pub size: (f64, f64),
    pub azimuth_deg: (f64, f64),
    pub zenith_deg: (f64, f64),
}

impl Default for RandomizationRanges {
    fn default() -> Self {
        RandomizationRanges {
            exponent: (0.0, 1.0),
            size: (0.10, 0.30),
            azimuth_deg: (-120.0, 120.0),
            zenith_deg: (0.0, 90.0),
        }
    }
}

/// Smallest exponent produced by random draws; `e = 0` is not a valid shape.
pub const MIN_RANDOM_EXPONENT: f64 = 0.01;

impl<T: Real> SuperquadricParams<T> {
    pub fn new(a: [T; 3], e1: T, e2: T) -> Self {
        SuperquadricParams { a1: a[0], a2: a[1], a3: a[2], e1, e2, pose: Pose::identity() }
    }

    pub fn sphere(r: T) -> Self {
        Self::new([r, r, r], T::one(), T::one())
    }

    pub fn with_pose(mut self, pose: Pose<T>) -> Self {
        self.pose = pose;
        self
    }

    pub fn sizes(&self) -> [T; 3] {
        [self.a1, self.a2, self.a3]
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.a1, self.a2, self.a3, self.e1, self.e2].iter().all(|v| v.is_finite());
        if !finite || self.sizes().iter().any(|a| *a <= T::zero()) {
            return Err(Error::invalid("superquadric sizes must be positive and finite"));
        }
        let two = T::lit(2.0);
        if self.e1 <= T::zero() || self.e1 > two || self.e2 <= T::zero() || self.e2 > two {
            return Err(Error::invalid("superquadric exponents must lie in (0, 2]"));
        }
        let r = self.pose.rotation;
        let rtr = r.transpose().mul_mat(&r);
        let tol = T::loose_eps();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { T::one() } else { T::zero() };
                if (rtr.m[i][j] - want).abs() > tol {
                    return Err(Error::invalid("superquadric rotation is not orthonormal"));
                }
            }
        }
        Ok(())
    }

    /// Draws sizes and exponents uniformly from `ranges`.
    pub fn random(rng: &mut impl Rng, ranges: &RandomizationRanges) -> Self {
        let mut a = [T::zero(); 3];
        for v in &mut a {
            *v = T::lit(rng.random_range(ranges.size.0..=ranges.size.1));
        }
        let mut e = || T::lit(rng.random_range(ranges.exponent.0..=ranges.exponent.1).max(MIN_RANDOM_EXPONENT));
        let e1 = e();
        let e2 = e();
        Self::new(a, e1, e2)
    }

    /// `F^e1` at a point given in the object frame, computed in the log
    /// domain so that small exponents neither overflow nor underflow.
    pub fn radial_value_local(&self, p: &Vec3<T>) -> T {
        let x = (p.x / self.a1).abs();
        let y = (p.y / self.a2).abs();
        let z = (p.z / self.a3).abs();
        let m = x.max(y);
        let big = m.max(z);
        if big == T::zero() {
            return T::zero();
        }
        let two = T::lit(2.0);
        let l1 = if m == T::zero() {
            T::neg_infinity()
        } else {
            let r = x.min(y) / m;
            (two / self.e1) * (m / big).ln() + (self.e2 / self.e1) * (r.powf(two / self.e2)).ln_1p()
        };
        let l2 = if z == T::zero() { T::neg_infinity() } else { (two / self.e1) * (z / big).ln() };
        let top = l1.max(l2);
        let lse = top + ((l1 - top).exp() + (l2 - top).exp()).ln();
        big * big * (self.e1 * lse).exp()
    }

    pub fn radial_value(&self, p: &Vec3<T>) -> T {
        self.radial_value_local(&self.pose.inverse_transform_point(p))
    }

    /// Outward unit normal at a local surface point.
    pub fn normal_local(&self, p: &Vec3<T>) -> Vec3<T> {
        let two = T::lit(2.0);
        let x = (p.x / self.a1).abs();
        let y = (p.y / self.a2).abs();
        let z = (p.z / self.a3).abs();
        let s = x.powf(two / self.e2) + y.powf(two / self.e2);
        let sign = |v: T| if v < T::zero() { -T::one() } else { T::one() };
        let (gx, gy) = if s > T::zero() {
            let f = s.powf(self.e2 / self.e1 - T::one());
            (
                f * x.powf(two / self.e2 - T::one()) * sign(p.x) / self.a1,
                f * y.powf(two / self.e2 - T::one()) * sign(p.y) / self.a2,
            )
        } else {
            (T::zero(), T::zero())
        };
        let gz = z.powf(two / self.e1 - T::one()) * sign(p.z) / self.a3;
        let g = Vec3::new(gx, gy, gz);
        match g.is_finite().then(|| g.try_normalize(T::zero())).flatten() {
            Some(n) => n,
            None => self.numeric_normal_local(p),
        }
    }

    fn numeric_normal_local(&self, p: &Vec3<T>) -> Vec3<T> {
        let h = T::lit(1e-6) * (self.a1.max(self.a2).max(self.a3));
        let mut g = Vec3::zero();
        for k in 0..3 {
            let d = Vec3::<T>::axis(k) * h;
            g[k] = self.radial_value_local(&(*p + d)) - self.radial_value_local(&(*p - d));
        }
        g.try_normalize(T::zero()).unwrap_or_else(|| p.try_normalize(T::zero()).unwrap_or(Vec3::unit_z()))
    }

    /// Surface point on the ray from the center through local direction `d`.
    pub fn radial_projection_local(&self, d: &Vec3<T>) -> Vec3<T> {
        let g = self.radial_value_local(d);
        *d * (T::one() / g.sqrt())
    }
}

/// Inside-outside function: `< 1` inside, `= 1` on the surface, `> 1` outside.
pub fn implicit_value<T: Real>(q: &SuperquadricParams<T>, p: &Vec3<T>) -> T {
    q.radial_value(p).powf(T::one() / q.e1)
}

/// Unit vector from the object toward a viewer at the given angles: zenith is
/// measured from +z, azimuth counterclockwise from +x.
pub fn view_direction<T: Real>(azimuth_deg: f64, zenith_deg: f64) -> Vec3<T> {
    let (az, zen): (T, T) = (deg(azimuth_deg), deg(zenith_deg));
    Vec3::new(zen.sin() * az.cos(), zen.sin() * az.sin(), zen.cos())
}

/// Draws a random viewpoint `(azimuth, zenith)` in degrees.
pub fn random_view(rng: &mut impl Rng, ranges: &RandomizationRanges) -> (f64, f64) {
    (
        rng.random_range(ranges.azimuth_deg.0..=ranges.azimuth_deg.1),
        rng.random_range(ranges.zenith_deg.0..=ranges.zenith_deg.1),
    )
}

/// `n` world-frame surface points on the side facing the viewer. Directions
/// are drawn uniformly, projected radially onto the surface, kept when the
/// outward normal faces the viewer, then offset along the normal by Gaussian
/// noise.
pub fn sample_cloud<T: Real>(
    q: &SuperquadricParams<T>,
    view_azimuth_deg: f64,
    view_zenith_deg: f64,
    n: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<Vec<Vec3<T>>> {
    q.validate()?;
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::invalid("noise sigma must be non-negative"));
    }
    let view_world: Vec3<T> = view_direction(view_azimuth_deg, view_zenith_deg);
    let view = q.pose.rotation.transpose().mul_vec(&view_world);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        if attempts > 1000 * n + 10_000 {
            return Err(Error::invalid("viewpoint sees no surface"));
        }
        let d: Vec3<f64> = Vec3::new(
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        );
        let Some(d) = d.try_normalize(1e-12) else { continue };
        let p = q.radial_projection_local(&d.cast());
        let nrm = q.normal_local(&p);
        if nrm.dot(&view) <= T::zero() {
            continue;
        }
        let offset = if noise_sigma > 0.0 { T::lit(noise.sample(&mut rng)) } else { T::zero() };
        out.push(q.pose.transform_point(&(p + nrm * offset)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_sphere_values() {
        let q = SuperquadricParams::<f64>::sphere(1.0);
        assert!((implicit_value(&q, &Vec3::new(1.0, 0.0, 0.0)) - 1.0).abs() < 1e-12);
        assert_eq!(implicit_value(&q, &Vec3::zero()), 0.0);
        assert!((implicit_value(&q, &Vec3::new(2.0, 0.0, 0.0)) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn matches_closed_form() {
        let q = SuperquadricParams::<f64>::new([0.2, 0.15, 0.1], 0.6, 0.3);
        let p = Vec3::new(0.05, -0.07, 0.04);
        let (x, y, z): (f64, f64, f64) = (p.x / 0.2, p.y / 0.15, p.z / 0.1);
        let f = (x.abs().powf(2.0 / 0.3) + y.abs().powf(2.0 / 0.3)).powf(0.3 / 0.6) + z.abs().powf(2.0 / 0.6);
        assert!((implicit_value(&q, &p) - f).abs() < 1e-12 * f.max(1.0));
    }

    #[test]
    fn tiny_exponents_stay_finite() {
        let q = SuperquadricParams::<f64>::new([0.1, 0.3, 0.2], 0.01, 0.01);
        let p = q.radial_projection_local(&Vec3::new(0.3, 0.5, -0.8).normalize());
        assert!((q.radial_value_local(&p) - 1.0).abs() < 1e-12);
        assert!(q.normal_local(&p).is_finite());
    }

    #[test]
    fn normal_matches_gradient() {
        let q = SuperquadricParams::<f64>::new([0.2, 0.15, 0.1], 0.7, 0.4);
        let p = q.radial_projection_local(&Vec3::new(0.4, 0.5, 0.3).normalize());
        let n = q.normal_local(&p);
        let m = q.numeric_normal_local(&p);
        assert!(n.angle_to(&m) < 1e-5);
    }

    #[test]
    fn cloud_on_surface_and_deterministic() {
        let q = SuperquadricParams::new([0.2, 0.1, 0.15], 0.4, 0.8);
        let a = sample_cloud::<f64>(&q, 30.0, 60.0, 200, 0.0, 3).unwrap();
        let b = sample_cloud::<f64>(&q, 30.0, 60.0, 200, 0.0, 3).unwrap();
        assert_eq!(a, b);
        for p in &a {
            assert!((implicit_value(&q, p) - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn invalid_params() {
        assert!(SuperquadricParams::new([0.1, -0.1, 0.1], 1.0, 1.0).validate().is_err());
        assert!(SuperquadricParams::new([0.1, 0.1, 0.1], 2.5, 1.0).validate().is_err());
    }
}
