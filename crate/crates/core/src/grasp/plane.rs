//! Dominant-plane segmentation by RANSAC.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{principal_axes, Vec3};
use crate::scalar::Real;

/// Minimum share of the cloud the best plane must explain.
pub const MIN_INLIER_RATIO: f64 = 0.2;

/// Plane `normal · p = offset`, normal oriented toward +z (then +y, +x).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct PlaneFit<T> {
    pub normal: Vec3<T>,
    pub offset: T,
    pub inliers: Vec<usize>,
}

impl<T: Real> PlaneFit<T> {
    pub fn signed_distance(&self, p: &Vec3<T>) -> T {
        self.normal.dot(p) - self.offset
    }
}

fn orient<T: Real>(n: Vec3<T>) -> Vec3<T> {
    let key = if n.z != T::zero() { n.z } else if n.y != T::zero() { n.y } else { n.x };
    if key < T::zero() { -n } else { n }
}

fn inliers_of<T: Real>(cloud: &[Vec3<T>], n: &Vec3<T>, d: T, threshold: T) -> Vec<usize> {
    cloud
        .iter()
        .enumerate()
        .filter(|(_, p)| (n.dot(p) - d).abs() <= threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Best-consensus plane over `iterations` random triples, refined by a
/// least-squares fit to its inliers.
pub fn ransac_plane<T: Real>(
    cloud: &[Vec3<T>],
    inlier_threshold: T,
    iterations: usize,
    seed: u64,
) -> Result<PlaneFit<T>> {
    if cloud.len() < 3 {
        return Err(Error::invalid(format!("plane fit needs 3 points, got {}", cloud.len())));
    }
    if !(inlier_threshold > T::zero()) || iterations == 0 {
        return Err(Error::invalid("threshold and iteration count must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(usize, Vec3<T>, T)> = None;
    for _ in 0..iterations {
        let i = rng.random_range(0..cloud.len());
        let j = rng.random_range(0..cloud.len());
        let k = rng.random_range(0..cloud.len());
        if i == j || j == k || i == k {
            continue;
        }
        let Some(n) = (cloud[j] - cloud[i]).cross(&(cloud[k] - cloud[i])).try_normalize(T::geom_eps()) else {
            continue;
        };
        let d = n.dot(&cloud[i]);
        let count = cloud.iter().filter(|p| (n.dot(p) - d).abs() <= inlier_threshold).count();
        if best.as_ref().is_none_or(|b| count > b.0) {
            best = Some((count, n, d));
        }
    }
    let (count, n, d) = best.ok_or(Error::NoDominantPlane { ratio: 0.0 })?;
    let ratio = count as f64 / cloud.len() as f64;
    if ratio < MIN_INLIER_RATIO {
        return Err(Error::NoDominantPlane { ratio });
    }
    let mut inliers = inliers_of(cloud, &n, d, inlier_threshold);
    let (mut normal, mut offset) = (n, d);
    // refine twice: the least-squares plane can pick up a few more inliers
    for _ in 0..2 {
        let pts: Vec<Vec3<T>> = inliers.iter().map(|&i| cloud[i]).collect();
        let (c, vals, axes) = principal_axes(&pts);
        if vals[1] <= T::zero() {
            break;
        }
        let mut refined = axes[2];
        if refined.dot(&normal) < T::zero() {
            refined = -refined;
        }
        let refined_inliers = inliers_of(cloud, &refined, refined.dot(&c), inlier_threshold);
        if refined_inliers.len() < inliers.len() {
            break;
        }
        normal = refined;
        offset = refined.dot(&c);
        inliers = refined_inliers;
    }
    let oriented = orient(normal);
    if oriented != normal {
        offset = -offset;
    }
    Ok(PlaneFit { normal: oriented, offset, inliers })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_plane() {
        let n = Vec3::new(0.1, -0.2, 0.9).normalize();
        let u = n.any_orthonormal();
        let w = n.cross(&u);
        let cloud: Vec<Vec3<f64>> = (0..200)
            .map(|i| n * 0.5 + u * ((i % 20) as f64 * 0.01) + w * ((i / 20) as f64 * 0.02))
            .collect();
        let fit = ransac_plane(&cloud, 1e-4, 100, 1).unwrap();
        assert!((fit.normal - n).norm() < 1e-6);
        assert!((fit.offset - 0.5).abs() < 1e-9);
        assert_eq!(fit.inliers.len(), 200);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(ransac_plane(&[Vec3::<f64>::zero(); 2], 0.01, 10, 0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn deterministic() {
        let cloud: Vec<Vec3<f64>> = (0..50).map(|i| Vec3::new(i as f64 * 0.1, (i * 7 % 11) as f64 * 0.1, 0.0)).collect();
        assert_eq!(ransac_plane(&cloud, 0.01, 50, 9).unwrap(), ransac_plane(&cloud, 0.01, 50, 9).unwrap());
    }
}
