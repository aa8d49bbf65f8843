//! Role-division inverse kinematics.
//!
//! The hand pose is the primary objective. The demonstrator's Labanotation
//! posture is secondary: base and lift joints put the shoulder where the
//! posture's canonical limb directions would place it relative to the wrist,
//! and the arm's redundancy is spent in the Jacobian null space pulling the
//! upper arm and forearm toward those directions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laban::{canonical_direction, digitize_direction, LabanDirection, LabanRow};
use crate::linalg::{Pose, Vec3};
use crate::taskmodel::Hand;

use super::robot::{Kinematics, RobotSpec};

/// Desired upper-arm and forearm directions (unit, world frame).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PostureTarget {
    pub upper: Vec3<f64>,
    pub forearm: Vec3<f64>,
}

/// Laban symbols of the acting arm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmSymbols {
    pub upper: LabanDirection,
    pub forearm: LabanDirection,
}

fn side(hand: Hand) -> &'static str {
    match hand {
        Hand::Left => "left",
        Hand::Right => "right",
    }
}

impl ArmSymbols {
    pub fn from_row(row: &LabanRow, hand: Hand) -> Result<Self> {
        let get = |joint: &str| {
            let col = format!("{}_{joint}", side(hand));
            row.get(&col)
                .map(|s| s.direction)
                .ok_or_else(|| Error::invalid(format!("Laban row lacks column `{col}`")))
        };
        Ok(ArmSymbols { upper: get("elbow")?, forearm: get("wrist")? })
    }
}

impl PostureTarget {
    pub fn from_symbols(s: &ArmSymbols) -> Self {
        PostureTarget { upper: canonical_direction(&s.upper), forearm: canonical_direction(&s.forearm) }
    }

    pub fn from_row(row: &LabanRow, hand: Hand) -> Result<Self> {
        Ok(Self::from_symbols(&ArmSymbols::from_row(row, hand)?))
    }

    /// Normalized blend; `s = 0` gives `self`.
    pub fn blend(&self, other: &Self, s: f64) -> Self {
        let mix = |a: &Vec3<f64>, b: &Vec3<f64>| a.lerp(b, s).try_normalize(1e-9).unwrap_or(if s < 0.5 { *a } else { *b });
        PostureTarget { upper: mix(&self.upper, &other.upper), forearm: mix(&self.forearm, &other.forearm) }
    }
}

/// Limb directions of a configuration.
pub fn arm_directions(robot: &RobotSpec, k: &Kinematics) -> (Vec3<f64>, Vec3<f64>) {
    let m = robot.markers;
    let (s, e, w) = (k.point(m.shoulder), k.point(m.elbow), k.point(m.wrist));
    ((e - s).normalize(), (w - e).normalize())
}

/// Digitized limb directions of a configuration.
pub fn arm_symbols(robot: &RobotSpec, q: &[f64]) -> Result<ArmSymbols> {
    let (u, f) = arm_directions(robot, &robot.fk(q));
    Ok(ArmSymbols { upper: digitize_direction(&u)?, forearm: digitize_direction(&f)? })
}

fn posture_cost(robot: &RobotSpec, k: &Kinematics, p: &PostureTarget) -> f64 {
    let (u, f) = arm_directions(robot, k);
    (1.0 - u.dot(&p.upper)) + (1.0 - f.dot(&p.forearm))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IkOptions {
    /// Acceptance tolerances on the hand pose.
    pub position_tol: f64,
    pub angle_tol: f64,
    /// Convergence thresholds of the primary iteration.
    pub converge_position: f64,
    pub converge_angle: f64,
    pub max_iterations: usize,
    pub posture_iterations: usize,
    pub posture_gain: f64,
    pub damping: f64,
    /// Largest joint change per iteration (rad or m).
    pub max_step: f64,
    /// Meters per radian when mixing position and orientation errors.
    pub rotation_weight: f64,
}

impl Default for IkOptions {
    fn default() -> Self {
        IkOptions {
            position_tol: 1e-3,
            angle_tol: 1f64.to_radians(),
            converge_position: 1e-7,
            converge_angle: 1e-6,
            max_iterations: 300,
            posture_iterations: 40,
            posture_gain: 0.5,
            damping: 1e-3,
            max_step: 0.2,
            rotation_weight: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IkSolution {
    pub q: Vec<f64>,
    pub position_error: f64,
    pub angle_error: f64,
    /// Posture cost `Σ (1 − cos)` over upper arm and forearm; 0 without a posture.
    pub posture_cost: f64,
}

fn pose_error(target: &Pose<f64>, actual: &Pose<f64>) -> (Vec3<f64>, Vec3<f64>) {
    let ep = target.translation - actual.translation;
    let er = target.rotation.mul_mat(&actual.rotation.transpose()).log();
    (ep, er)
}

/// Solves `(A + λ²I) x = b` for symmetric positive semi-definite `A` by
/// Cholesky factorization.
fn solve_spd6(a: &[[f64; 6]; 6], b: &[f64; 6]) -> [f64; 6] {
    let mut l = [[0.0f64; 6]; 6];
    for i in 0..6 {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = if i == j { s.max(1e-300).sqrt() } else { s / l[j][j] };
        }
    }
    let mut y = [0.0; 6];
    for i in 0..6 {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = [0.0; 6];
    for i in (0..6).rev() {
        let mut s = y[i];
        for k in i + 1..6 {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    x
}

struct Problem<'a> {
    robot: &'a RobotSpec,
    target: &'a Pose<f64>,
    posture: Option<&'a PostureTarget>,
    free: Vec<bool>,
    opts: &'a IkOptions,
}

struct Linearized {
    jac: Vec<[f64; 6]>,
    /// `J Jᵀ + λ² I`
    gram: [[f64; 6]; 6],
}

impl Problem<'_> {
    fn weighted_error(&self, k: &Kinematics) -> ([f64; 6], f64, f64) {
        let (ep, er) = pose_error(self.target, &k.tcp);
        let w = self.opts.rotation_weight;
        ([ep.x, ep.y, ep.z, w * er.x, w * er.y, w * er.z], ep.norm(), er.norm())
    }

    fn linearize(&self, k: &Kinematics) -> Linearized {
        let w = self.opts.rotation_weight;
        let mut jac = self.robot.jacobian(k, &self.free);
        for c in &mut jac {
            for v in &mut c[3..] {
                *v *= w;
            }
        }
        let mut gram = [[0.0; 6]; 6];
        for c in &jac {
            for i in 0..6 {
                for j in 0..6 {
                    gram[i][j] += c[i] * c[j];
                }
            }
        }
        for (i, row) in gram.iter_mut().enumerate() {
            row[i] += self.opts.damping * self.opts.damping;
        }
        Linearized { jac, gram }
    }

    /// `Jᵀ (J Jᵀ + λ²I)⁻¹ e`
    fn dls(&self, lin: &Linearized, e: &[f64; 6]) -> Vec<f64> {
        let y = solve_spd6(&lin.gram, e);
        lin.jac.iter().map(|c| c.iter().zip(&y).map(|(a, b)| a * b).sum()).collect()
    }

    fn apply(&self, q: &mut [f64], dq: &[f64]) {
        let n = dq.iter().map(|v| v * v).sum::<f64>().sqrt();
        let s = if n > self.opts.max_step { self.opts.max_step / n } else { 1.0 };
        for ((v, d), f) in q.iter_mut().zip(dq).zip(&self.free) {
            if *f {
                *v += s * d;
            }
        }
        self.robot.clamp(q);
    }

    /// Primary-only damped least squares. Returns the position and angle errors.
    fn primary(&self, q: &mut [f64], iterations: usize) -> (f64, f64) {
        let mut best = (f64::INFINITY, f64::INFINITY);
        let mut best_q = q.to_vec();
        for _ in 0..iterations {
            let k = self.robot.fk(q);
            let (e, pe, ae) = self.weighted_error(&k);
            if pe + self.opts.rotation_weight * ae < best.0 + self.opts.rotation_weight * best.1 {
                best = (pe, ae);
                best_q.copy_from_slice(q);
            }
            if pe < self.opts.converge_position && ae < self.opts.converge_angle {
                return (pe, ae);
            }
            let lin = self.linearize(&k);
            let dq = self.dls(&lin, &e);
            if dq.iter().all(|d| d.abs() < 1e-14) {
                break;
            }
            self.apply(q, &dq);
        }
        let k = self.robot.fk(q);
        let (_, pe, ae) = self.weighted_error(&k);
        if pe + self.opts.rotation_weight * ae > best.0 + self.opts.rotation_weight * best.1 {
            q.copy_from_slice(&best_q);
            return best;
        }
        (pe, ae)
    }

    fn cost(&self, q: &[f64]) -> f64 {
        self.posture.map_or(0.0, |p| posture_cost(self.robot, &self.robot.fk(q), p))
    }

    fn gradient(&self, q: &[f64]) -> Vec<f64> {
        let h0 = self.cost(q);
        let mut qp = q.to_vec();
        (0..q.len())
            .map(|i| {
                if !self.free[i] {
                    return 0.0;
                }
                let eps = 1e-6;
                qp[i] = q[i] + eps;
                let g = (self.cost(&qp) - h0) / eps;
                qp[i] = q[i];
                g
            })
            .collect()
    }

    /// Null-space descent on the posture cost with continued primary
    /// correction.
    fn posture_descent(&self, q: &mut [f64]) {
        for _ in 0..self.opts.posture_iterations {
            let k = self.robot.fk(q);
            let (e, _, _) = self.weighted_error(&k);
            let lin = self.linearize(&k);
            let g = self.gradient(q);
            // g − Jᵀ (JJᵀ + λ²I)⁻¹ J g
            let mut jg = [0.0; 6];
            for (c, gi) in lin.jac.iter().zip(&g) {
                for a in 0..6 {
                    jg[a] += c[a] * gi;
                }
            }
            let back = self.dls(&lin, &jg);
            let null: Vec<f64> = g.iter().zip(&back).map(|(a, b)| a - b).collect();
            let norm = null.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-5 {
                break;
            }
            let primary = self.dls(&lin, &e);
            let dq: Vec<f64> = primary.iter().zip(&null).map(|(p, n)| p - self.opts.posture_gain * n).collect();
            self.apply(q, &dq);
        }
    }

    fn accepts(&self, pe: f64, ae: f64) -> bool {
        pe <= self.opts.position_tol && ae <= self.opts.angle_tol
    }

    /// Primary, then posture refinement; the refinement is kept only if the
    /// primary still holds afterwards.
    fn solve(&self, seed: &[f64]) -> (Vec<f64>, f64, f64) {
        let mut q = seed.to_vec();
        self.robot.clamp(&mut q);
        let (pe, ae) = self.primary(&mut q, self.opts.max_iterations);
        if self.posture.is_none() || !self.accepts(pe, ae) {
            return (q, pe, ae);
        }
        let mut refined = q.clone();
        self.posture_descent(&mut refined);
        let (rpe, rae) = self.primary(&mut refined, 50);
        if self.accepts(rpe, rae) && self.cost(&refined) <= self.cost(&q) + 1e-12 {
            (refined, rpe, rae)
        } else {
            (q, pe, ae)
        }
    }
}

/// Base joint values putting the shoulder where the posture wants it.
pub fn role_division_base(robot: &RobotSpec, target: &Pose<f64>, posture: &PostureTarget) -> Vec<f64> {
    let (lu, lf) = robot.link_lengths();
    let hand = robot.hand;
    let wrist = target.translation - target.rotation.mul_vec(&hand.rotation.transpose().mul_vec(&hand.translation));
    let shoulder = wrist - posture.forearm * lf - posture.upper * lu;
    let (s0, dirs) = robot.base_geometry();
    dirs.iter()
        .zip(&robot.joints)
        .map(|(d, j)| j.clamp((shoulder - s0).dot(d)))
        .collect()
}

fn seeds(robot: &RobotSpec, base: &[f64]) -> Vec<Vec<f64>> {
    let nb = robot.base_dof();
    let m = robot.markers;
    let home = robot.home();
    let mut out = Vec::new();
    for yaw in [0.0, -0.7, 0.7] {
        for pitch in [0.3, 1.0, -0.4] {
            for elbow in [1.0, -1.0] {
                let mut q = home.clone();
                q[..nb].copy_from_slice(base);
                q[nb] = yaw;
                q[m.shoulder] = pitch;
                q[m.elbow] = elbow * home[m.elbow].abs().max(0.5);
                // wrist branches: forearm roll and wrist pitch flip
                for roll in [0.0, 1.6, -1.6] {
                    for flip in [1.0, -1.0] {
                        let mut q = q.clone();
                        q[m.wrist] = roll;
                        if m.wrist + 1 < q.len() {
                            q[m.wrist + 1] = flip * home[m.wrist + 1].abs().max(0.5);
                        }
                        robot.clamp(&mut q);
                        out.push(q);
                    }
                }
            }
        }
    }
    out
}

/// Hand pose first, Labanotation posture second.
///
/// With a `seed` (the current configuration during execution) the solver
/// starts there and keeps the branch; without one it tries a fixed set of
/// arm branches and keeps the solution closest to the posture. Base joints
/// are set by [`role_division_base`] and the arm solved with the base
/// frozen; if that fails, the base is released too.
pub fn solve_ik_role_division(
    target: &Pose<f64>,
    posture: Option<&PostureTarget>,
    robot: &RobotSpec,
    seed: Option<&[f64]>,
    opts: &IkOptions,
) -> Result<IkSolution> {
    if !target.translation.is_finite() {
        return Err(Error::invalid("IK target is not finite"));
    }
    let nb = robot.base_dof();
    let n = robot.dof();
    let base: Vec<f64> = match (posture, seed) {
        (Some(p), _) => role_division_base(robot, target, p),
        (None, Some(s)) => s[..nb].to_vec(),
        (None, None) => robot.home()[..nb].to_vec(),
    };
    let candidates: Vec<Vec<f64>> = match seed {
        Some(s) => {
            let mut q = s.to_vec();
            q[..nb].copy_from_slice(&base);
            vec![q]
        }
        None => seeds(robot, &base),
    };
    let arm_only: Vec<bool> = (0..n).map(|i| i >= nb).collect();
    let mut best: Option<IkSolution> = None;
    let mut closest = f64::INFINITY;
    let consider = |free: &[bool], seeds: &[Vec<f64>], best: &mut Option<IkSolution>, closest: &mut f64| {
        let problem = Problem { robot, target, posture, free: free.to_vec(), opts };
        for s in seeds {
            let (q, pe, ae) = problem.solve(s);
            *closest = closest.min(pe);
            if !problem.accepts(pe, ae) {
                continue;
            }
            let cost = problem.cost(&q);
            if best.as_ref().is_none_or(|b| cost < b.posture_cost - 1e-12) {
                *best = Some(IkSolution { q, position_error: pe, angle_error: ae, posture_cost: cost });
            }
        }
    };
    let all = vec![true; n];
    consider(&arm_only, &candidates, &mut best, &mut closest);
    if best.is_none() && nb > 0 {
        consider(&all, &candidates, &mut best, &mut closest);
    }
    if best.is_none() && seed.is_some() {
        // lost the branch: fall back to the full seed set
        let fallback = seeds(robot, &base);
        consider(&arm_only, &fallback, &mut best, &mut closest);
        if best.is_none() && nb > 0 {
            consider(&all, &fallback, &mut best, &mut closest);
        }
    }
    best.ok_or(Error::IkFailure { closest })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::robot::{fixed6, mobile7};
    use crate::linalg::Mat3;

    fn down(p: [f64; 3]) -> Pose<f64> {
        Pose::new(Mat3::from_z_and_hint(&-Vec3::unit_z(), &Vec3::unit_x()), Vec3::from(p))
    }

    #[test]
    fn reaches_desk_targets() {
        for r in [fixed6(), mobile7()] {
            for p in [[0.40, -0.10, 0.80], [0.40, 0.15, 0.90], [0.35, -0.15, 0.95]] {
                let t = down(p);
                let s = solve_ik_role_division(&t, None, &r, None, &IkOptions::default()).unwrap();
                let (ep, er) = pose_error(&t, &r.tcp(&s.q));
                assert!(ep.norm() < 1e-6 && er.norm() < 1e-5, "{} {p:?}", r.name);
            }
        }
    }

    #[test]
    fn unreachable_target_reports_closest_approach() {
        let r = fixed6();
        let shoulder = r.fk(&r.home()).point(r.markers.shoulder);
        // hand aligned with the reach ray, so orientation costs no reach
        let t = Pose::new(Mat3::from_z_and_hint(&Vec3::unit_x(), &Vec3::unit_z()), shoulder + Vec3::unit_x() * (2.0 * r.reach()));
        match solve_ik_role_division(&t, None, &r, None, &IkOptions::default()) {
            Err(Error::IkFailure { closest }) => {
                assert!((closest - r.reach()).abs() < 0.02, "{closest}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn base_places_shoulder() {
        let r = mobile7();
        let posture = PostureTarget { upper: Vec3::new(1.0, 0.0, -1.0).normalize(), forearm: Vec3::unit_x() };
        let t = down([0.40, -0.10, 0.80]);
        let s = solve_ik_role_division(&t, Some(&posture), &r, None, &IkOptions::default()).unwrap();
        let (u, f) = arm_directions(&r, &r.fk(&s.q));
        assert!(u.angle_to(&posture.upper) < 0.02 && f.angle_to(&posture.forearm) < 0.02, "{u:?} {f:?}");
        assert!(s.posture_cost < 1e-3);
    }
}
