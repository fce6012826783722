//! The rotation group `SO(n)` and its Lie algebra of skew-symmetric matrices.
//!
//! Tangent vectors are right-trivialized throughout: a velocity `v` at `g`
//! is represented by `v g^T`, an element of the algebra. The metric is the
//! plain Frobenius pairing `<A, B> = tr(A B^T)` ([`METRIC_SCALE`] = 1), which
//! is bi-invariant; the Killing-form metric `(n - 2) tr(A B^T)` differs from
//! it by a constant factor.
//!
//! `exp` and `log` both go through a symmetric eigendecomposition. For a
//! skew `W`, `-W^2` is symmetric positive semi-definite with eigenvalues
//! `theta_i^2`, and
//!
//! ```text
//! exp(W) = cos(Theta) + sinc(Theta) W
//! ```
//!
//! with the functions applied through that eigenbasis. For a rotation `g`,
//! the symmetric part `(g + g^T) / 2` has eigenvalues `cos theta_i` and the
//! skew part `K = (g - g^T) / 2` commutes with it, so
//! `log(g) = (theta / sin theta)(sym part) K`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Scale applied to the Frobenius pairing in [`inner`].
pub const METRIC_SCALE: f64 = 1.0;
/// Rotation angles within this distance of `pi` have no usable logarithm.
pub const CUT_MARGIN: f64 = 1e-6;
/// Orthogonality tolerance for [`GroupElement`].
pub const GROUP_TOLERANCE: f64 = 1e-9;
/// Skew-symmetry tolerance for [`AlgebraElement::new`].
pub const SKEW_TOLERANCE: f64 = 1e-10;
/// Skew residual tolerated by [`transport_to_identity`].
pub const TANGENT_TOLERANCE: f64 = 1e-8;

/// An orthogonal matrix, with its determinant sign.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    matrix: DMatrix<f64>,
    det_sign: i8,
}

impl GroupElement {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows != cols || rows == 0 {
            return Err(Error::NotSquare { rows, cols });
        }
        let deviation = (matrix.transpose() * &matrix - DMatrix::identity(rows, rows)).amax();
        if !(deviation < GROUP_TOLERANCE) {
            return Err(Error::NotOrthogonal { deviation });
        }
        let det_sign = if matrix.determinant() > 0.0 { 1 } else { -1 };
        Ok(GroupElement { matrix, det_sign })
    }

    pub(crate) fn from_rotation_unchecked(matrix: DMatrix<f64>) -> Self {
        GroupElement {
            matrix,
            det_sign: 1,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_rotation_unchecked(DMatrix::identity(dim, dim))
    }

    /// `diag(1, ..., 1, -1)`.
    pub fn reflection(dim: usize) -> Self {
        let mut m = DMatrix::identity(dim, dim);
        m[(dim - 1, dim - 1)] = -1.0;
        GroupElement {
            matrix: m,
            det_sign: -1,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn det_sign(&self) -> i8 {
        self.det_sign
    }

    pub fn is_rotation(&self) -> bool {
        self.det_sign == 1
    }

    pub fn transpose(&self) -> Self {
        GroupElement {
            matrix: self.matrix.transpose(),
            det_sign: self.det_sign,
        }
    }

    /// Group product `self * other`.
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        GroupElement {
            matrix: &self.matrix * &other.matrix,
            det_sign: self.det_sign * other.det_sign,
        }
    }

    /// Re-orthonormalizes via the polar factor, removing accumulated drift.
    pub fn renormalized(&self) -> Self {
        let svd = self.matrix.clone().svd(true, true);
        let m = svd.u.unwrap() * svd.v_t.unwrap();
        GroupElement {
            matrix: m,
            det_sign: self.det_sign,
        }
    }
}

/// A skew-symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    matrix: DMatrix<f64>,
}

impl AlgebraElement {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = matrix.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        let residual = (&matrix + matrix.transpose()).amax();
        if !(residual < SKEW_TOLERANCE) {
            return Err(Error::InvalidArgument(format!(
                "matrix is not skew-symmetric (residual {residual:e})"
            )));
        }
        Ok(project_skew(&matrix))
    }

    pub fn zero(dim: usize) -> Self {
        AlgebraElement {
            matrix: DMatrix::zeros(dim, dim),
        }
    }

    /// The generator of rotation in the `(i, j)` plane, `E_ji - E_ij`.
    pub fn generator(dim: usize, i: usize, j: usize) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        m[(j, i)] = 1.0;
        m[(i, j)] = -1.0;
        AlgebraElement { matrix: m }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn norm(&self) -> f64 {
        (METRIC_SCALE * self.matrix.norm_squared()).sqrt()
    }

    pub fn norm_squared(&self) -> f64 {
        METRIC_SCALE * self.matrix.norm_squared()
    }

    pub fn scale(&self, s: f64) -> Self {
        AlgebraElement {
            matrix: &self.matrix * s,
        }
    }

    /// Strict upper triangle, row by row; `n(n-1)/2` coordinates.
    pub fn coordinates(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push(self.matrix[(i, j)]);
            }
        }
        out
    }

    /// Inverse of [`AlgebraElement::coordinates`].
    pub fn from_coordinates(dim: usize, coords: &[f64]) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        let mut it = coords.iter();
        for i in 0..dim {
            for j in i + 1..dim {
                let v = *it.next().expect("coordinate count");
                m[(i, j)] = v;
                m[(j, i)] = -v;
            }
        }
        AlgebraElement { matrix: m }
    }
}

impl Add for &AlgebraElement {
    type Output = AlgebraElement;
    fn add(self, rhs: &AlgebraElement) -> AlgebraElement {
        AlgebraElement {
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl Sub for &AlgebraElement {
    type Output = AlgebraElement;
    fn sub(self, rhs: &AlgebraElement) -> AlgebraElement {
        AlgebraElement {
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

impl Mul<f64> for &AlgebraElement {
    type Output = AlgebraElement;
    fn mul(self, rhs: f64) -> AlgebraElement {
        self.scale(rhs)
    }
}

impl Neg for &AlgebraElement {
    type Output = AlgebraElement;
    fn neg(self) -> AlgebraElement {
        self.scale(-1.0)
    }
}

/// `(M - M^T) / 2`.
pub fn project_skew(m: &DMatrix<f64>) -> AlgebraElement {
    AlgebraElement {
        matrix: (m - m.transpose()) * 0.5,
    }
}

fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `cos(sqrt(x))` and `sin(sqrt(x)) / sqrt(x)` for `x >= 0`.
fn cos_sinc_of_square(x: f64) -> (f64, f64) {
    let x = x.max(0.0);
    if x < 1e-6 {
        let cos = 1.0 - x / 2.0 + x * x / 24.0 - x * x * x / 720.0;
        let sinc = 1.0 - x / 6.0 + x * x / 120.0 - x * x * x / 5040.0;
        (cos, sinc)
    } else {
        let t = x.sqrt();
        (t.cos(), t.sin() / t)
    }
}

/// Matrix exponential of a skew-symmetric matrix; always a rotation.
pub fn exp_group(omega: &AlgebraElement) -> GroupElement {
    let n = omega.dim();
    if n == 0 {
        return GroupElement::identity(0);
    }
    let w = &omega.matrix;
    let neg_sq = symmetric_part(&(-(w * w)));
    let eig = SymmetricEigen::new(neg_sq);
    let v = &eig.eigenvectors;
    let mut cos_diag = eig.eigenvalues.clone();
    let mut sinc_diag = eig.eigenvalues.clone();
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        let (c, s) = cos_sinc_of_square(lam);
        cos_diag[i] = c;
        sinc_diag[i] = s;
    }
    let cos_part = v * DMatrix::from_diagonal(&cos_diag) * v.transpose();
    let sinc_part = v * DMatrix::from_diagonal(&sinc_diag) * v.transpose();
    GroupElement::from_rotation_unchecked(cos_part + sinc_part * w)
}

/// Principal logarithm of a rotation.
///
/// Fails with [`Error::WrongComponent`] for determinant `-1` and with
/// [`Error::NearCutLocus`] when some rotation angle is within
/// [`CUT_MARGIN`] of `pi`.
pub fn log_group(g: &GroupElement) -> Result<AlgebraElement> {
    if !g.is_rotation() {
        return Err(Error::WrongComponent);
    }
    let n = g.dim();
    let m = &g.matrix;
    let sym = symmetric_part(m);
    let skew = (m - m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let v = &eig.eigenvectors;
    let mut h = eig.eigenvalues.clone();
    for i in 0..n {
        let c = eig.eigenvalues[i];
        let s = (&skew * v.column(i)).norm();
        let theta = s.atan2(c);
        if theta >= std::f64::consts::PI - CUT_MARGIN {
            return Err(Error::NearCutLocus { angle: theta });
        }
        h[i] = if theta < 1e-4 {
            let t2 = theta * theta;
            1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0
        } else {
            theta / s
        };
    }
    let scaled = v * DMatrix::from_diagonal(&h) * v.transpose();
    Ok(project_skew(&(scaled * skew)))
}

/// `log(g1 g0^T)`, the right-trivialized step from `g0` to `g1`.
pub fn log_between(g0: &GroupElement, g1: &GroupElement) -> Result<AlgebraElement> {
    log_group(&g1.compose(&g0.transpose()))
}

/// Geodesic distance `|log(g1 g0^T)|`.
pub fn distance(g0: &GroupElement, g1: &GroupElement) -> Result<f64> {
    Ok(log_between(g0, g1)?.norm())
}

/// `METRIC_SCALE * tr(A B^T)`.
pub fn inner(a: &AlgebraElement, b: &AlgebraElement) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(METRIC_SCALE * a.matrix.dot(&b.matrix))
}

/// Moves a tangent vector `v` at `g` to the algebra: `v g^T`.
pub fn transport_to_identity(g: &GroupElement, v: &DMatrix<f64>) -> Result<AlgebraElement> {
    if v.shape() != g.matrix.shape() {
        return Err(Error::DimMismatch {
            left: g.dim(),
            right: v.nrows(),
        });
    }
    let w = v * g.matrix.transpose();
    let residual = (&w + w.transpose()).amax();
    if !(residual <= TANGENT_TOLERANCE) {
        return Err(Error::NotTangent { residual });
    }
    Ok(project_skew(&w))
}

/// Point at parameter `s` on the geodesic from `g0` to `g1`:
/// `exp(s log(g1 g0^T)) g0`.
pub fn geodesic(g0: &GroupElement, g1: &GroupElement, s: f64) -> Result<GroupElement> {
    if g0.dim() != g1.dim() {
        return Err(Error::DimMismatch {
            left: g0.dim(),
            right: g1.dim(),
        });
    }
    let step = log_between(g0, g1)?;
    Ok(exp_group(&step.scale(s)).compose(g0))
}

/// Lie bracket `AB - BA`.
pub fn bracket(a: &AlgebraElement, b: &AlgebraElement) -> Result<AlgebraElement> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let c = &a.matrix * &b.matrix - &b.matrix * &a.matrix;
    Ok(project_skew(&c))
}

/// Basis of `so(n)` orthonormal under the Frobenius pairing.
pub fn orthonormal_basis(dim: usize) -> Vec<AlgebraElement> {
    let mut out = Vec::new();
    for i in 0..dim {
        for j in i + 1..dim {
            out.push(AlgebraElement::generator(dim, i, j).scale(std::f64::consts::FRAC_1_SQRT_2));
        }
    }
    out
}

/// `tr(ad_A o ad_B)` computed on an orthonormal basis of `so(n)`.
pub fn killing_form(a: &AlgebraElement, b: &AlgebraElement) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let mut trace = 0.0;
    for e in orthonormal_basis(a.dim()) {
        let image = bracket(a, &bracket(b, &e)?)?;
        trace += e.matrix.dot(&image.matrix);
    }
    Ok(trace)
}
