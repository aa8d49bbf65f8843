//! Re-observation of the target object at grasp time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grasp::{
    compute_contact_web, fit_superquadric, ransac_plane, sample_cloud, ClosureType, ContactWeb, GripperSpec,
    PlaneFit, SuperquadricFit, SuperquadricParams, MIN_FIT_POINTS,
};
use crate::linalg::{Mat3, Pose, Vec3};

use super::world::{Support, WorldState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewConfig {
    /// World position of the camera.
    pub camera: Vec3<f64>,
    pub object_points: usize,
    /// Grid resolution of the support patch around the object.
    pub support_grid: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub plane_threshold: f64,
    pub ransac_iterations: usize,
}

impl ViewConfig {
    pub fn from_camera(camera: Vec3<f64>) -> Self {
        ViewConfig {
            camera,
            object_points: 400,
            support_grid: 24,
            noise_sigma: 0.0,
            seed: 11,
            plane_threshold: 0.003,
            ransac_iterations: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Localization {
    pub fit: SuperquadricFit<f64>,
    /// Fitted shape with its frame turned so that local +z faces the hand.
    pub params: SuperquadricParams<f64>,
    pub plane: Option<PlaneFit<f64>>,
    pub web: ContactWeb<f64>,
    /// Hand motion direction for the final approach, snapped to the fitted
    /// object axis closest to the demonstrated one.
    pub approach: Vec3<f64>,
    pub object_points: usize,
}

/// Whether the straight segment from `p` to the camera passes through a
/// support rectangle.
fn occluded(p: &Vec3<f64>, camera: &Vec3<f64>, supports: &[Support]) -> bool {
    supports.iter().any(|s| {
        let (a, b) = (p.z - s.top, camera.z - s.top);
        if a * b >= 0.0 || a.abs() < 1e-9 {
            return false;
        }
        let t = a / (a - b);
        s.covers(&p.lerp(camera, t))
    })
}

/// Turns the fitted frame so local +z is `toward_hand`'s closest axis. The
/// axis is swapped into z only when the two exponents agree closely enough
/// for the permuted superquadric to describe the same surface; otherwise the
/// fitted z is kept, facing the hand or, when that is ambiguous, upward.
fn canonical_frame(q: &SuperquadricParams<f64>, toward_hand: &Vec3<f64>) -> SuperquadricParams<f64> {
    let r = q.pose.rotation;
    let sizes = q.sizes();
    let cols = [r.column(0), r.column(1), r.column(2)];
    let k = (0..3)
        .max_by(|&a, &b| cols[a].dot(toward_hand).abs().total_cmp(&cols[b].dot(toward_hand).abs()))
        .unwrap();
    let k = if k != 2 && (q.e1 - q.e2).abs() > 0.25 { 2 } else { k };
    let (i, j) = ((k + 1) % 3, (k + 2) % 3);
    // a side approach to an axis that cannot be swapped: come from above
    let toward = if cols[k].dot(toward_hand).abs() < 0.3 { Vec3::unit_z() } else { *toward_hand };
    let z = if cols[k].dot(&toward) < 0.0 { -cols[k] } else { cols[k] };
    let x = cols[i];
    let rot = Mat3::from_columns(x, z.cross(&x), z);
    let (a1, a2, a3) = if k == 2 { (sizes[0], sizes[1], sizes[2]) } else { (sizes[i], sizes[j], sizes[k]) };
    SuperquadricParams { a1, a2, a3, e1: q.e1, e2: q.e2, pose: Pose::new(rot, q.pose.translation) }
}

/// Samples the visible side of the object and of the support patch around
/// it, segments the support plane away by RANSAC, fits a superquadric to the
/// rest and places the contact web for `closure` on the fit.
pub fn runtime_localize(
    world: &WorldState,
    object: &str,
    view: &ViewConfig,
    closure: ClosureType,
    demo_approach: &Vec3<f64>,
    gripper: &GripperSpec,
) -> Result<Localization> {
    let obj = world.object(object)?;
    let truth = obj.superquadric();
    let center = obj.pose.translation;
    let to_cam = (view.camera - center)
        .try_normalize(1e-9)
        .ok_or_else(|| Error::Localization("camera inside the object".into()))?;
    let zenith = to_cam.z.clamp(-1.0, 1.0).acos().to_degrees();
    let azimuth = to_cam.y.atan2(to_cam.x).to_degrees();
    let visible: Vec<Vec3<f64>> = sample_cloud(&truth, azimuth, zenith, view.object_points, view.noise_sigma, view.seed)?
        .into_iter()
        .filter(|p| !occluded(p, &view.camera, &world.supports))
        .collect();
    if visible.is_empty() {
        return Err(Error::Localization(format!("`{object}` is not visible from the camera")));
    }

    let base = obj.base_z();
    let support = world.support_below(&center, base).filter(|s| (base - s.top).abs() < 1e-3 && view.camera.z > s.top);
    let (cloud, plane) = match support {
        Some(s) => {
            let half = 2.5 * obj.shape.radius();
            let n = view.support_grid.max(2);
            let mut cloud = visible.clone();
            for a in 0..n {
                for b in 0..n {
                    let p = Vec3::new(
                        center.x - half + 2.0 * half * a as f64 / (n - 1) as f64,
                        center.y - half + 2.0 * half * b as f64 / (n - 1) as f64,
                        s.top,
                    );
                    // the object hides the surface beneath it
                    let above = Vec3::new(p.x, p.y, s.top + 1e-4);
                    if s.covers(&p) && !obj.shape.contains(&obj.pose, &above) {
                        cloud.push(p);
                    }
                }
            }
            let plane = ransac_plane(&cloud, view.plane_threshold, view.ransac_iterations, view.seed)?;
            let above: Vec<Vec3<f64>> = cloud
                .iter()
                .filter(|p| plane.signed_distance(p) > 2.0 * view.plane_threshold)
                .copied()
                .collect();
            (above, Some(plane))
        }
        None => (visible, None),
    };
    if cloud.len() < MIN_FIT_POINTS {
        return Err(Error::Localization(format!(
            "only {} points of `{object}` left after segmentation",
            cloud.len()
        )));
    }
    let fit = fit_superquadric(&cloud)?;
    let params = canonical_frame(&fit.params, &-*demo_approach);
    let approach = -params.pose.rotation.column(2);
    let web = compute_contact_web(&params, closure, gripper)?;
    Ok(Localization { fit, params, plane, web, approach, object_points: cloud.len() })
}
