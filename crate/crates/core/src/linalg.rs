//! Small fixed and dynamic linear algebra used across the crate.
//!
//! Everything here is generic over [`Real`] so the geometric kernels run in
//! both `f32` and `f64`.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[T; 3]", into = "[T; 3]")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> From<[T; 3]> for Vec3<T> {
    fn from(a: [T; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl<T: Real> From<Vec3<T>> for [T; 3] {
    fn from(v: Vec3<T>) -> Self {
        [v.x, v.y, v.z]
    }
}

impl<T: Real> Vec3<T> {
    #[inline]
    pub const fn new(x: T, y: T, z: T) -> Self {
        Vec3 { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Vec3::new(T::zero(), T::zero(), T::zero())
    }

    pub fn unit_x() -> Self {
        Vec3::new(T::one(), T::zero(), T::zero())
    }

    pub fn unit_y() -> Self {
        Vec3::new(T::zero(), T::one(), T::zero())
    }

    pub fn unit_z() -> Self {
        Vec3::new(T::zero(), T::zero(), T::one())
    }

    pub fn from_f64(x: f64, y: f64, z: f64) -> Self {
        Vec3::new(T::lit(x), T::lit(y), T::lit(z))
    }

    pub fn axis(i: usize) -> Self {
        let mut v = Self::zero();
        v[i] = T::one();
        v
    }

    #[inline]
    pub fn dot(&self, o: &Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(&self, o: &Self) -> Self {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(&self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> T {
        self.norm_squared().sqrt()
    }

    /// Unit vector in the same direction, `None` for (near) zero vectors.
    pub fn try_normalize(&self, eps: T) -> Option<Self> {
        let n = self.norm();
        if n <= eps || !n.is_finite() {
            None
        } else {
            Some(*self * (T::one() / n))
        }
    }

    pub fn normalize(&self) -> Self {
        let n = self.norm();
        *self * (T::one() / n)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn scale(&self, s: T) -> Self {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn component_mul(&self, o: &Self) -> Self {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    pub fn abs(&self) -> Self {
        Vec3::new(self.x.abs(), self.y.abs(), self.z.abs())
    }

    pub fn max_abs(&self) -> T {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn distance(&self, o: &Self) -> T {
        (*self - *o).norm()
    }

    pub fn lerp(&self, o: &Self, s: T) -> Self {
        *self + (*o - *self) * s
    }

    /// Angle between two non-zero vectors, in radians.
    pub fn angle_to(&self, o: &Self) -> T {
        let c = self.cross(o).norm();
        let d = self.dot(o);
        c.atan2(d)
    }

    /// Some unit vector perpendicular to `self` (which must be non-zero).
    pub fn any_orthonormal(&self) -> Self {
        let a = self.abs();
        let helper = if a.x <= a.y && a.x <= a.z {
            Self::unit_x()
        } else if a.y <= a.z {
            Self::unit_y()
        } else {
            Self::unit_z()
        };
        self.cross(&helper).normalize()
    }

    pub fn cast<U: Real>(&self) -> Vec3<U> {
        Vec3::new(
            U::lit(self.x.to_f64_lossy()),
            U::lit(self.y.to_f64_lossy()),
            U::lit(self.z.to_f64_lossy()),
        )
    }

    pub fn to_array(&self) -> [T; 3] {
        [self.x, self.y, self.z]
    }
}

impl<T: Real> Index<usize> for Vec3<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl<T: Real> IndexMut<usize> for Vec3<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        match i {
            0 => &mut self.x,
            1 => &mut self.y,
            2 => &mut self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> SubAssign for Vec3<T> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        self.scale(s)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Row-major 3×3 matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[[T; 3]; 3]", into = "[[T; 3]; 3]")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct Mat3<T> {
    pub m: [[T; 3]; 3],
}

impl<T: Real> From<[[T; 3]; 3]> for Mat3<T> {
    fn from(m: [[T; 3]; 3]) -> Self {
        Mat3 { m }
    }
}

impl<T: Real> From<Mat3<T>> for [[T; 3]; 3] {
    fn from(m: Mat3<T>) -> Self {
        m.m
    }
}

impl<T: Real> Mat3<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Mat3 { m: [[o, z, z], [z, o, z], [z, z, o]] }
    }

    pub fn zero() -> Self {
        Mat3 { m: [[T::zero(); 3]; 3] }
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(c0: Vec3<T>, c1: Vec3<T>, c2: Vec3<T>) -> Self {
        Mat3 { m: [[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]] }
    }

    pub fn column(&self, j: usize) -> Vec3<T> {
        Vec3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    pub fn row(&self, i: usize) -> Vec3<T> {
        Vec3::new(self.m[i][0], self.m[i][1], self.m[i][2])
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                t.m[i][j] = self.m[j][i];
            }
        }
        t
    }

    pub fn mul_vec(&self, v: &Vec3<T>) -> Vec3<T> {
        Vec3::new(self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v))
    }

    pub fn mul_mat(&self, o: &Self) -> Self {
        let mut r = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = T::zero();
                for k in 0..3 {
                    s = s + self.m[i][k] * o.m[k][j];
                }
                r.m[i][j] = s;
            }
        }
        r
    }

    pub fn determinant(&self) -> T {
        self.row(0).dot(&self.row(1).cross(&self.row(2)))
    }

    pub fn skew(v: &Vec3<T>) -> Self {
        let z = T::zero();
        Mat3 { m: [[z, -v.z, v.y], [v.z, z, -v.x], [-v.y, v.x, z]] }
    }

    /// Rotation about a unit axis (Rodrigues).
    pub fn from_axis_angle(axis: &Vec3<T>, angle: T) -> Self {
        let k = Self::skew(axis);
        let k2 = k.mul_mat(&k);
        let (s, c) = angle.sin_cos();
        let mut r = Self::identity();
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] = r.m[i][j] + s * k.m[i][j] + (T::one() - c) * k2.m[i][j];
            }
        }
        r
    }

    /// Exponential map of a rotation vector.
    pub fn exp(w: &Vec3<T>) -> Self {
        let th = w.norm();
        if th <= T::epsilon() {
            let mut r = Self::identity();
            let k = Self::skew(w);
            for i in 0..3 {
                for j in 0..3 {
                    r.m[i][j] = r.m[i][j] + k.m[i][j];
                }
            }
            return r;
        }
        Self::from_axis_angle(&(*w * (T::one() / th)), th)
    }

    /// Rotation angle of an orthonormal matrix, in [0, π].
    pub fn rotation_angle(&self) -> T {
        let tr = self.m[0][0] + self.m[1][1] + self.m[2][2];
        let c = (tr - T::one()) / T::lit(2.0);
        // robust variant using the skew part for small angles
        let s = Vec3::new(
            self.m[2][1] - self.m[1][2],
            self.m[0][2] - self.m[2][0],
            self.m[1][0] - self.m[0][1],
        )
        .norm()
            / T::lit(2.0);
        s.atan2(c)
    }

    /// Rotation vector (axis · angle) of an orthonormal matrix.
    pub fn log(&self) -> Vec3<T> {
        let angle = self.rotation_angle();
        let v = Vec3::new(
            self.m[2][1] - self.m[1][2],
            self.m[0][2] - self.m[2][0],
            self.m[1][0] - self.m[0][1],
        );
        if angle <= T::lit(1e-7) {
            return v * T::lit(0.5);
        }
        let pi = T::PI();
        if pi - angle < T::lit(1e-4) {
            // near π: axis from the symmetric part
            let mut best = 0;
            for i in 1..3 {
                if self.m[i][i] > self.m[best][best] {
                    best = i;
                }
            }
            let ab = ((self.m[best][best] + T::one()) / T::lit(2.0)).max(T::zero()).sqrt();
            let mut axis = Vec3::zero();
            for i in 0..3 {
                axis[i] = (self.m[i][best] + self.m[best][i]) / (T::lit(4.0) * ab);
            }
            axis[best] = ab;
            let axis = axis.normalize();
            let axis = if axis.dot(&v) < T::zero() { -axis } else { axis };
            return axis * angle;
        }
        v * (angle / (T::lit(2.0) * angle.sin()))
    }

    /// Gram–Schmidt re-orthonormalization.
    pub fn orthonormalized(&self) -> Self {
        let c0 = self.column(0).normalize();
        let c1 = (self.column(1) - c0 * c0.dot(&self.column(1))).normalize();
        let c2 = c0.cross(&c1);
        Self::from_columns(c0, c1, c2)
    }

    /// Rotation whose third column is `z`, with the first column as close as
    /// possible to `x_hint`.
    pub fn from_z_and_hint(z: &Vec3<T>, x_hint: &Vec3<T>) -> Self {
        let z = z.normalize();
        let x = (*x_hint - z * z.dot(x_hint))
            .try_normalize(T::lit(1e-6))
            .unwrap_or_else(|| z.any_orthonormal());
        let y = z.cross(&x);
        Self::from_columns(x, y, z)
    }

    pub fn cast<U: Real>(&self) -> Mat3<U> {
        let mut r = Mat3::<U>::zero();
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] = U::lit(self.m[i][j].to_f64_lossy());
            }
        }
        r
    }
}

/// Rigid transform `p ↦ R p + t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct Pose<T> {
    pub rotation: Mat3<T>,
    pub translation: Vec3<T>,
}

impl<T: Real> Default for Pose<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Pose<T> {
    pub fn identity() -> Self {
        Pose { rotation: Mat3::identity(), translation: Vec3::zero() }
    }

    pub fn new(rotation: Mat3<T>, translation: Vec3<T>) -> Self {
        Pose { rotation, translation }
    }

    pub fn from_translation(t: Vec3<T>) -> Self {
        Pose { rotation: Mat3::identity(), translation: t }
    }

    pub fn transform_point(&self, p: &Vec3<T>) -> Vec3<T> {
        self.rotation.mul_vec(p) + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3<T>) -> Vec3<T> {
        self.rotation.mul_vec(v)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Pose { rotation: rt, translation: -rt.mul_vec(&self.translation) }
    }

    pub fn inverse_transform_point(&self, p: &Vec3<T>) -> Vec3<T> {
        self.rotation.transpose().mul_vec(&(*p - self.translation))
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        Pose {
            rotation: self.rotation.mul_mat(&other.rotation),
            translation: self.rotation.mul_vec(&other.translation) + self.translation,
        }
    }
}

/// Dense row-major matrix for the small least-squares problems in the crate.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.cols, o.rows, "dimension mismatch");
        let mut r = Self::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..o.cols {
                    r[(i, j)] = r[(i, j)] + a * o[(k, j)];
                }
            }
        }
        r
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "dimension mismatch");
        (0..self.rows)
            .map(|i| (0..self.cols).fold(T::zero(), |s, j| s + self[(i, j)] * v[j]))
            .collect()
    }

    /// `Aᵀ A`.
    pub fn gram(&self) -> Self {
        let mut g = Self::zeros(self.cols, self.cols);
        for r in 0..self.rows {
            for i in 0..self.cols {
                let a = self[(r, i)];
                if a == T::zero() {
                    continue;
                }
                for j in i..self.cols {
                    g[(i, j)] = g[(i, j)] + a * self[(r, j)];
                }
            }
        }
        for i in 0..self.cols {
            for j in 0..i {
                g[(i, j)] = g[(j, i)];
            }
        }
        g
    }

    /// `Aᵀ v`.
    pub fn tr_mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len(), "dimension mismatch");
        let mut out = vec![T::zero(); self.cols];
        for r in 0..self.rows {
            for (j, o) in out.iter_mut().enumerate() {
                *o = *o + self[(r, j)] * v[r];
            }
        }
        out
    }

    /// Solves `A x = b` by Gaussian elimination with partial pivoting.
    /// Returns `None` for (numerically) singular systems.
    pub fn solve(&self, b: &[T]) -> Option<Vec<T>> {
        assert_eq!(self.rows, self.cols, "solve needs a square matrix");
        assert_eq!(b.len(), self.rows);
        let n = self.rows;
        let mut a = self.clone();
        let mut x = b.to_vec();
        let scale = self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if scale == T::zero() {
            return None;
        }
        let tiny = scale * T::epsilon() * T::lit(16.0);
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if a[(r, col)].abs() > a[(piv, col)].abs() {
                    piv = r;
                }
            }
            if a[(piv, col)].abs() <= tiny {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    let t = a[(col, j)];
                    a[(col, j)] = a[(piv, j)];
                    a[(piv, j)] = t;
                }
                x.swap(col, piv);
            }
            let d = a[(col, col)];
            for r in col + 1..n {
                let f = a[(r, col)] / d;
                if f == T::zero() {
                    continue;
                }
                for j in col..n {
                    a[(r, j)] = a[(r, j)] - f * a[(col, j)];
                }
                x[r] = x[r] - f * x[col];
            }
        }
        for col in (0..n).rev() {
            let mut s = x[col];
            for j in col + 1..n {
                s = s - a[(col, j)] * x[j];
            }
            x[col] = s / a[(col, col)];
        }
        Some(x)
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// columns of the second matrix.
pub fn symmetric_eigen<T: Real>(a: &Matrix<T>) -> (Vec<T>, Matrix<T>) {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in i + 1..n {
                off = off + m[(i, j)] * m[(i, j)];
            }
        }
        if off <= T::epsilon() * T::epsilon() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].partial_cmp(&m[(i, i)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, new_j)] = v[(i, old_j)];
        }
    }
    (values, vectors)
}

/// Numerical rank of a set of vectors of dimension `dim`, by the eigenvalues
/// of their Gram (scatter) matrix relative to the largest one.
pub fn rank_of<T: Real>(vectors: &[Vec<T>], dim: usize, rel_tol: T) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let mut s: Matrix<T> = Matrix::zeros(dim, dim);
    for v in vectors {
        for i in 0..dim {
            for j in 0..dim {
                s[(i, j)] = s[(i, j)] + v[i] * v[j];
            }
        }
    }
    let (vals, _) = symmetric_eigen(&s);
    let top = vals.first().copied().unwrap_or(T::zero());
    if top <= T::zero() {
        return 0;
    }
    vals.iter().filter(|&&l| l > top * rel_tol).count()
}

/// Rank of a set of 3-vectors with an absolute eigenvalue tolerance on the
/// scatter matrix (vectors are expected to be roughly unit length).
pub fn rank3<T: Real>(vectors: &[Vec3<T>], abs_tol: T) -> usize {
    let mut s: Matrix<T> = Matrix::zeros(3, 3);
    for v in vectors {
        for i in 0..3 {
            for j in 0..3 {
                s[(i, j)] = s[(i, j)] + v[i] * v[j];
            }
        }
    }
    let (vals, _) = symmetric_eigen(&s);
    vals.iter().filter(|&&l| l > abs_tol).count()
}

/// Principal axes of a 3D point set: centroid, eigenvalues (descending) and
/// the matching unit axes.
pub fn principal_axes<T: Real>(points: &[Vec3<T>]) -> (Vec3<T>, [T; 3], [Vec3<T>; 3]) {
    let n = T::from_usize(points.len().max(1)).unwrap_or(T::one());
    let c = points.iter().fold(Vec3::zero(), |a, p| a + *p) * (T::one() / n);
    let mut s: Matrix<T> = Matrix::zeros(3, 3);
    for p in points {
        let d = *p - c;
        for i in 0..3 {
            for j in 0..3 {
                s[(i, j)] = s[(i, j)] + d[i] * d[j] / n;
            }
        }
    }
    let (vals, vecs) = symmetric_eigen(&s);
    let axis = |j: usize| Vec3::new(vecs[(0, j)], vecs[(1, j)], vecs[(2, j)]);
    (c, [vals[0], vals[1], vals[2]], [axis(0), axis(1), axis(2)])
}

/// Non-negative least squares (Lawson–Hanson active set):
/// `min ‖A x − b‖` subject to `x ≥ 0`. Returns the solution and the residual
/// norm.
pub fn nnls<T: Real>(a: &Matrix<T>, b: &[T]) -> (Vec<T>, T) {
    let m = a.rows();
    let n = a.cols();
    assert_eq!(b.len(), m);
    let mut x = vec![T::zero(); n];
    let mut passive = vec![false; n];
    let scale = b.iter().fold(T::one(), |s, v| s.max(v.abs()));
    let tol = T::lit(10.0) * T::epsilon() * T::from_usize(m.max(n)).unwrap_or(T::one()) * scale;

    let residual = |x: &[T]| -> Vec<T> {
        let ax = a.mul_vec(x);
        b.iter().zip(ax).map(|(bi, ai)| *bi - ai).collect()
    };

    let solve_passive = |passive: &[bool]| -> Option<Vec<T>> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let k = idx.len();
        let mut g = Matrix::zeros(k, k);
        let mut rhs = vec![T::zero(); k];
        for (ii, &i) in idx.iter().enumerate() {
            for (jj, &j) in idx.iter().enumerate() {
                let mut s = T::zero();
                for r in 0..m {
                    s = s + a[(r, i)] * a[(r, j)];
                }
                g[(ii, jj)] = s;
            }
            let mut s = T::zero();
            for r in 0..m {
                s = s + a[(r, i)] * b[r];
            }
            rhs[ii] = s;
        }
        let z = g.solve(&rhs)?;
        let mut full = vec![T::zero(); n];
        for (ii, &i) in idx.iter().enumerate() {
            full[i] = z[ii];
        }
        Some(full)
    };

    let max_outer = 3 * n + 10;
    for _ in 0..max_outer {
        let r = residual(&x);
        let w = a.tr_mul_vec(&r);
        let mut best: Option<usize> = None;
        for j in 0..n {
            if !passive[j] && w[j] > tol && best.is_none_or(|b| w[j] > w[b]) {
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        passive[j] = true;
        let mut inner = 0;
        loop {
            inner += 1;
            let Some(z) = solve_passive(&passive) else {
                passive[j] = false;
                break;
            };
            if (0..n).filter(|&i| passive[i]).all(|i| z[i] > T::zero()) {
                x = z;
                break;
            }
            let mut alpha = T::one();
            for i in 0..n {
                if passive[i] && z[i] <= T::zero() {
                    let d = x[i] - z[i];
                    if d > T::zero() {
                        alpha = alpha.min(x[i] / d);
                    }
                }
            }
            for i in 0..n {
                x[i] = x[i] + alpha * (z[i] - x[i]);
                if passive[i] && x[i] <= tol {
                    passive[i] = false;
                    x[i] = T::zero();
                }
            }
            if inner > 3 * n + 10 {
                break;
            }
        }
    }
    let r = residual(&x);
    let rn = r.iter().fold(T::zero(), |s, v| s + *v * *v).sqrt();
    (x, rn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cross_and_dot() {
        let x = Vec3::<f64>::unit_x();
        let y = Vec3::<f64>::unit_y();
        assert_eq!(x.cross(&y), Vec3::unit_z());
        assert_eq!(x.dot(&y), 0.0);
    }

    #[test]
    fn exp_log_round_trip() {
        let w = Vec3::new(0.3, -0.2, 0.9);
        let r = Mat3::<f64>::exp(&w);
        assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-12);
        let back = r.log();
        assert_relative_eq!((back - w).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn log_near_pi() {
        let axis = Vec3::new(1.0, 2.0, -1.0).normalize();
        let r = Mat3::<f64>::from_axis_angle(&axis, std::f64::consts::PI - 1e-6);
        let w = r.log();
        assert_relative_eq!(w.norm(), std::f64::consts::PI - 1e-6, epsilon = 1e-6);
        assert!(w.normalize().dot(&axis).abs() > 1.0 - 1e-6);
    }

    #[test]
    fn solve_small_system() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let x = a.solve(&[3.0, 5.0]).unwrap();
        assert_relative_eq!(x[0], 0.8, epsilon = 1e-12);
        assert_relative_eq!(x[1], 1.4, epsilon = 1e-12);
        let singular = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(singular.solve(&[1.0, 1.0]).is_none());
    }

    #[test]
    fn jacobi_eigen_diagonalizes() {
        let a = Matrix::from_rows(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, 0.2],
            vec![0.5, 0.2, 1.0],
        ]);
        let (vals, vecs) = symmetric_eigen(&a);
        for j in 0..3 {
            let v: Vec<f64> = (0..3).map(|i| vecs[(i, j)]).collect();
            let av = a.mul_vec(&v);
            for i in 0..3 {
                assert_relative_eq!(av[i], vals[j] * v[i], epsilon = 1e-10);
            }
        }
        assert!(vals[0] >= vals[1] && vals[1] >= vals[2]);
    }

    #[test]
    fn nnls_matches_known_solution() {
        // b inside the cone of the columns: exact, non-negative solution
        let a = Matrix::from_rows(&[vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0]]);
        let (x, r) = nnls(&a, &[2.0, 3.0]);
        assert!(r < 1e-10);
        assert!(x.iter().all(|v| *v >= 0.0));
        // b outside the cone: positive residual
        let (_, r) = nnls(&a, &[-1.0, 0.0]);
        assert_relative_eq!(r, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn rank_detects_plane() {
        let vs = vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), Vec3::new(1.0, 1.0, 0.0)];
        assert_eq!(rank3(&vs, 1e-9), 2);
    }
}
