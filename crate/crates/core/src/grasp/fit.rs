//! Superquadric recovery from a point cloud by multi-start
//! Levenberg–Marquardt on the residual `F(p)^e1 − 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{principal_axes, Mat3, Matrix, Pose, Vec3};
use crate::scalar::Real;

use super::superquadric::SuperquadricParams;

pub const MIN_FIT_POINTS: usize = 10;
const EXPONENT_BOUNDS: (f64, f64) = (0.01, 2.0);
const EXPONENT_STARTS: [f64; 3] = [0.2, 0.6, 1.0];
const SCREEN_ITERATIONS: usize = 15;
const SCREEN_POINTS: usize = 120;
const KEEP_AFTER_SCREEN: usize = 3;
const MAX_ITERATIONS: usize = 400;
const NPARAM: usize = 11;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct SuperquadricFit<T> {
    pub params: SuperquadricParams<T>,
    /// Root mean square of `F^e1 − 1` over the cloud.
    pub rms: T,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug)]
struct State<T> {
    center: Vec3<T>,
    rotation: Mat3<T>,
    log_size: [T; 3],
    e1: T,
    e2: T,
    /// Upper bound on each log size: no semi-axis of a convex object exceeds
    /// the diameter of any of its visible sides.
    max_log_size: T,
}

impl<T: Real> State<T> {
    fn params(&self) -> SuperquadricParams<T> {
        SuperquadricParams {
            a1: self.log_size[0].exp(),
            a2: self.log_size[1].exp(),
            a3: self.log_size[2].exp(),
            e1: self.e1,
            e2: self.e2,
            pose: Pose::new(self.rotation, self.center),
        }
    }

    /// Applies an update: translation, left rotation increment, log sizes,
    /// exponents. Exponents and sizes are kept inside their bounds.
    fn step(&self, d: &[T]) -> Self {
        let (lo, hi) = (T::lit(EXPONENT_BOUNDS.0), T::lit(EXPONENT_BOUNDS.1));
        let (smin, smax) = (T::lit(1e-3).ln(), self.max_log_size);
        let w = Vec3::new(d[3], d[4], d[5]);
        State {
            center: self.center + Vec3::new(d[0], d[1], d[2]),
            rotation: Mat3::exp(&w).mul_mat(&self.rotation).orthonormalized(),
            log_size: [
                (self.log_size[0] + d[6]).max(smin).min(smax),
                (self.log_size[1] + d[7]).max(smin).min(smax),
                (self.log_size[2] + d[8]).max(smin).min(smax),
            ],
            e1: (self.e1 + d[9]).max(lo).min(hi),
            e2: (self.e2 + d[10]).max(lo).min(hi),
            max_log_size: self.max_log_size,
        }
    }

    /// `F^e1 − 1` per point; with `weighted`, scaled by `sqrt(a1 a2 a3)` so
    /// that inflating the model to graze a partial cloud does not pay off.
    fn residuals(&self, cloud: &[Vec3<T>], weighted: bool, out: &mut [T]) {
        let q = self.params();
        let rt = self.rotation.transpose();
        let w = if weighted {
            ((self.log_size[0] + self.log_size[1] + self.log_size[2]) * T::lit(0.5)).exp()
        } else {
            T::one()
        };
        for (r, p) in out.iter_mut().zip(cloud) {
            *r = w * (q.radial_value_local(&rt.mul_vec(&(*p - self.center))) - T::one());
        }
    }
}

fn cost<T: Real>(r: &[T]) -> T {
    r.iter().fold(T::zero(), |acc, v| acc + *v * *v)
}

struct Run<T> {
    state: State<T>,
    weighted: bool,
    cost: T,
    lambda: T,
    iterations: usize,
    converged: bool,
}

fn lm_iterate<T: Real>(run: &mut Run<T>, cloud: &[Vec3<T>], max_iter: usize) {
    let n = cloud.len();
    let mut r = vec![T::zero(); n];
    let mut rp = vec![T::zero(); n];
    let mut jac: Matrix<T> = Matrix::zeros(n, NPARAM);
    let h = T::epsilon().sqrt();
    let upper = T::lit(EXPONENT_BOUNDS.1);
    let mut done = 0;
    while done < max_iter && !run.converged {
        done += 1;
        run.iterations += 1;
        run.state.residuals(cloud, run.weighted, &mut r);
        for k in 0..NPARAM {
            let mut d = [T::zero(); NPARAM];
            // difference inward at the upper exponent bound
            let at_top = (k == 9 && run.state.e1 + h > upper) || (k == 10 && run.state.e2 + h > upper);
            d[k] = if at_top { -h } else { h };
            run.state.step(&d).residuals(cloud, run.weighted, &mut rp);
            for i in 0..n {
                jac[(i, k)] = (rp[i] - r[i]) / d[k];
            }
        }
        let a = jac.gram();
        let g = jac.tr_mul_vec(&r);
        let mut improved = false;
        for _ in 0..12 {
            let mut m = a.clone();
            for k in 0..NPARAM {
                m[(k, k)] = a[(k, k)] * (T::one() + run.lambda) + T::lit(1e-12);
            }
            let neg: Vec<T> = g.iter().map(|v| -*v).collect();
            let Some(delta) = m.solve(&neg) else {
                run.lambda = run.lambda * T::lit(10.0);
                continue;
            };
            let cand = run.state.step(&delta);
            cand.residuals(cloud, run.weighted, &mut rp);
            let c = cost(&rp);
            if c.is_finite() && c < run.cost {
                let gain = run.cost - c;
                run.state = cand;
                run.lambda = (run.lambda / T::lit(3.0)).max(T::lit(1e-12));
                if gain <= T::lit(1e-12) * run.cost || c <= T::lit(1e-26) * T::lit(n as f64) {
                    run.converged = true;
                }
                run.cost = c;
                improved = true;
                break;
            }
            run.lambda = run.lambda * T::lit(5.0);
        }
        if !improved {
            run.converged = true;
        }
    }
}

/// Initial guesses: the cloud's principal axes with each axis in turn as the
/// superquadric z axis, twisted by 0° and 45° about it, crossed with a coarse
/// exponent grid.
fn starts<T: Real>(cloud: &[Vec3<T>]) -> Result<Vec<State<T>>> {
    let (_, vals, axes) = principal_axes(cloud);
    if !(vals[0] > T::zero()) || vals[2] <= vals[0] * T::lit(1e-10) {
        return Err(Error::Fit("point spread is rank deficient".into()));
    }
    let mut lo = cloud[0];
    let mut hi = cloud[0];
    for p in cloud {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let max_log_size = (hi - lo).norm().ln();
    let mut out = Vec::new();
    for zi in 0..3 {
        let z = axes[zi];
        // near-equal cross-section variances leave the in-plane axes arbitrary
        for twist in [T::zero(), T::FRAC_PI_4()] {
            let x = Mat3::from_axis_angle(&z, twist).mul_vec(&axes[(zi + 1) % 3]);
            let y = z.cross(&x);
            let rot = Mat3::from_columns(x, y, z);
            let local: Vec<Vec3<T>> = cloud.iter().map(|p| rot.transpose().mul_vec(p)).collect();
            let mut lo = local[0];
            let mut hi = local[0];
            for p in &local {
                for k in 0..3 {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
            let half = (hi - lo) * T::lit(0.5);
            let floor = half.max_abs() * T::lit(0.05);
            let center = rot.mul_vec(&((hi + lo) * T::lit(0.5)));
            let log_size = [half.x.max(floor).ln(), half.y.max(floor).ln(), half.z.max(floor).ln()];
            for e1 in EXPONENT_STARTS {
                for e2 in EXPONENT_STARTS {
                    out.push(State {
                        center,
                        rotation: rot,
                        log_size,
                        e1: T::lit(e1),
                        e2: T::lit(e2),
                        max_log_size,
                    });
                }
            }
        }
    }
    Ok(out)
}

fn cycled_variants<T: Real>(s: &State<T>) -> Vec<State<T>> {
    let c = [s.rotation.column(0), s.rotation.column(1), s.rotation.column(2)];
    let mut out = Vec::new();
    for shift in 1..3 {
        let rotation = Mat3::from_columns(c[shift % 3], c[(shift + 1) % 3], c[(shift + 2) % 3]);
        let log_size = [s.log_size[shift % 3], s.log_size[(shift + 1) % 3], s.log_size[(shift + 2) % 3]];
        for (e1, e2) in [(s.e1, s.e2), (s.e2, s.e1)] {
            out.push(State { rotation, log_size, e1, e2, ..*s });
        }
    }
    // a squarish cross-section seen 45° off looks like a diamond (e2 > 1)
    let z = c[2];
    let x = Mat3::from_axis_angle(&z, T::FRAC_PI_4()).mul_vec(&c[0]);
    let rotation = Mat3::from_columns(x, z.cross(&x), z);
    let mirrored = (T::lit(2.0) - s.e2).max(T::lit(EXPONENT_BOUNDS.0)).min(T::lit(EXPONENT_BOUNDS.1));
    for e2 in [s.e2, mirrored] {
        out.push(State { rotation, e2, ..*s });
    }
    out
}

/// Fits a superquadric to a point cloud.
pub fn fit_superquadric<T: Real>(cloud: &[Vec3<T>]) -> Result<SuperquadricFit<T>> {
    if cloud.len() < MIN_FIT_POINTS {
        return Err(Error::Fit(format!("need at least {MIN_FIT_POINTS} points, got {}", cloud.len())));
    }
    if cloud.iter().any(|p| !p.is_finite()) {
        return Err(Error::Fit("cloud has non-finite points".into()));
    }
    let mut r = vec![T::zero(); cloud.len()];
    let mut begin = |state: State<T>, weighted: bool| {
        state.residuals(cloud, weighted, &mut r);
        Run { state, weighted, cost: cost(&r), lambda: T::lit(1e-3), iterations: 0, converged: false }
    };
    let stride = cloud.len().div_ceil(SCREEN_POINTS);
    let coarse: Vec<Vec3<T>> = cloud.iter().step_by(stride).copied().collect();
    let mut screened: Vec<Run<T>> = starts(cloud)?
        .into_iter()
        .map(|state| {
            let mut rc = vec![T::zero(); coarse.len()];
            state.residuals(&coarse, true, &mut rc);
            Run { state, weighted: true, cost: cost(&rc), lambda: T::lit(1e-3), iterations: 0, converged: false }
        })
        .collect();
    for run in &mut screened {
        lm_iterate(run, &coarse, SCREEN_ITERATIONS);
    }
    screened.sort_by(|a, b| a.cost.partial_cmp(&b.cost).unwrap_or(std::cmp::Ordering::Equal));
    screened.truncate(KEEP_AFTER_SCREEN);
    let mut runs: Vec<Run<T>> = screened.into_iter().map(|run| begin(run.state, true)).collect();
    for run in &mut runs {
        lm_iterate(run, cloud, MAX_ITERATIONS);
    }
    // polish on the unweighted residual that the fit is judged by
    let mut runs: Vec<Run<T>> = runs
        .into_iter()
        .map(|run| {
            let mut polished = begin(run.state, false);
            polished.iterations = run.iterations;
            polished
        })
        .collect();
    for run in &mut runs {
        lm_iterate(run, cloud, MAX_ITERATIONS);
    }
    let by_cost = |a: &Run<T>, b: &Run<T>| a.cost.partial_cmp(&b.cost).unwrap_or(std::cmp::Ordering::Equal);
    let mut best = runs.into_iter().min_by(by_cost).ok_or_else(|| Error::Fit("no start converged".into()))?;
    // nearly isotropic clouds leave the principal axes ambiguous; retry with
    // the converged frame's axes cycled or twisted
    for variant in cycled_variants(&best.state) {
        let mut run = begin(variant, false);
        run.iterations = best.iterations;
        lm_iterate(&mut run, cloud, MAX_ITERATIONS);
        if by_cost(&run, &best).is_lt() {
            best = run;
        }
    }
    if !best.cost.is_finite() {
        return Err(Error::Fit("residual diverged".into()));
    }
    Ok(SuperquadricFit {
        params: best.state.params(),
        rms: (best.cost / T::lit(cloud.len() as f64)).sqrt(),
        iterations: best.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grasp::sample_cloud;

    #[test]
    fn too_few_points() {
        let pts = vec![Vec3::<f64>::new(0.1, 0.0, 0.0); 5];
        assert!(matches!(fit_superquadric(&pts), Err(Error::Fit(_))));
    }

    #[test]
    fn planar_cloud_is_rejected() {
        let pts: Vec<_> = (0..20).map(|i| Vec3::<f64>::new(i as f64 * 0.01, (i % 4) as f64 * 0.02, 0.0)).collect();
        assert!(matches!(fit_superquadric(&pts), Err(Error::Fit(_))));
    }

    #[test]
    fn sphere_recovered() {
        let q = SuperquadricParams::<f64>::sphere(0.15);
        let cloud = sample_cloud(&q, 20.0, 50.0, 300, 0.0, 1).unwrap();
        let fit = fit_superquadric(&cloud).unwrap();
        for a in fit.params.sizes() {
            assert!((a - 0.15).abs() < 0.0075, "{fit:?}");
        }
        assert!((fit.params.e1 - 1.0).abs() < 0.1 && (fit.params.e2 - 1.0).abs() < 0.1, "{fit:?}");
    }
}
