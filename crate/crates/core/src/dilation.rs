//! Schur parameters of a correlation matrix and the rotation matrices that
//! dilate it.
//!
//! A correlation matrix `R` of size `n` is in one-to-one correspondence with
//! a strictly upper-triangular family of contractions `gamma(k, j)`, the
//! partial correlation of `X_k` and `X_j` given everything strictly between
//! them. Each entry satisfies
//!
//! ```text
//! R(k, j) = L(k, j-1) . U(k+1, j-1) . C(k+1, j)
//!         + prod_l D(gamma(k, l)) * gamma(k, j) * prod_l D(gamma(l, j))
//! ```
//!
//! with `D(g) = sqrt(1 - g^2)` the scalar defect, `L` the row contraction of
//! row `k`, `C` the column contraction of column `j` and `U` an orthogonal
//! block built from the parameters strictly inside `(k, j)`. Both products
//! run over `k < l < j`.
//!
//! The same parameters, laid out as products of Givens blocks, give rotation
//! matrices `W_i` with `R(i, j) = e1' W_i W_{i+1} ... W_{j-1} e1` whenever
//! `j - i` fits in the truncation window.
//!
//! Indices in this module are zero-based.

use nalgebra::{DMatrix, DVector};

use crate::corr::CorrelationMatrix;
use crate::error::{Error, Result};

/// Defect products below this value leave the parameter undetermined.
pub const DEFECT_FLOOR: f64 = 1e-8;
/// Slack on `|gamma| <= 1` when solving for a parameter.
pub const CONTRACTION_SLACK: f64 = 1e-9;
/// Tolerance for flagging a contraction as lying on the unit circle.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

/// Scalar defect `sqrt(1 - gamma^2)`.
pub fn defect(gamma: f64) -> Result<f64> {
    if !(gamma.abs() <= 1.0) {
        return Err(Error::OutOfRange { value: gamma });
    }
    Ok(defect_unchecked(gamma))
}

#[inline]
fn defect_unchecked(gamma: f64) -> f64 {
    ((1.0 - gamma) * (1.0 + gamma)).max(0.0).sqrt()
}

/// The `dim x dim` Givens block for `gamma` at rows/columns
/// `(position - 1, position)`, i.e. the one-based pair `(position, position + 1)`.
///
/// The block is `[[g, D(g)], [D(g), -g]]`, so the matrix is a reflection
/// with determinant `-1`.
pub fn givens(gamma: f64, position: usize, dim: usize) -> Result<DMatrix<f64>> {
    if position == 0 || position >= dim {
        return Err(Error::BadPosition { position, dim });
    }
    let d = defect(gamma)?;
    let mut g = DMatrix::identity(dim, dim);
    let p = position - 1;
    g[(p, p)] = gamma;
    g[(p, p + 1)] = d;
    g[(p + 1, p)] = d;
    g[(p + 1, p + 1)] = -gamma;
    Ok(g)
}

/// A contraction solved from a positive 2x2 block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contraction {
    pub value: f64,
    pub boundary: bool,
}

/// Solves `y = sqrt(x) * gamma * sqrt(z)` for the scalar contraction `gamma`.
pub fn extract_contraction(x: f64, y: f64, z: f64) -> Result<Contraction> {
    if !(x > 0.0) || !(z > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "diagonal blocks must be positive, got x = {x}, z = {z}"
        )));
    }
    let value = y / (x.sqrt() * z.sqrt());
    if value.abs() > 1.0 + BOUNDARY_TOLERANCE {
        return Err(Error::NotAContraction {
            i: 0,
            j: 1,
            value: value.abs(),
        });
    }
    let boundary = (value.abs() - 1.0).abs() <= BOUNDARY_TOLERANCE;
    Ok(Contraction {
        value: value.clamp(-1.0, 1.0),
        boundary,
    })
}

/// Strictly upper-triangular family of scalar contractions `gamma(i, j)`,
/// `0 <= i < j < n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchurParams {
    n: usize,
    gamma: Vec<f64>,
    degenerate: Vec<(usize, usize)>,
}

impl SchurParams {
    /// All-zero parameters (the identity correlation).
    pub fn zeros(n: usize) -> Self {
        SchurParams {
            n,
            gamma: vec![0.0; n * n.saturating_sub(1) / 2],
            degenerate: Vec::new(),
        }
    }

    /// Builds from `(i, j, value)` triples; unspecified entries are zero.
    pub fn from_entries(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut p = Self::zeros(n);
        for &(i, j, v) in entries {
            p.set(i, j, v)?;
        }
        Ok(p)
    }

    /// Stationary parameters: `gamma(k, k + l) = parcors[l - 1]`, zero past
    /// the end of `parcors`.
    pub fn stationary(parcors: &[f64], n: usize) -> Result<Self> {
        let mut p = Self::zeros(n);
        for k in 0..n {
            for j in k + 1..n {
                let v = parcors.get(j - k - 1).copied().unwrap_or(0.0);
                p.set(k, j, v)?;
            }
        }
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        // row-major packing of the strict upper triangle
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    fn check_index(&self, i: usize, j: usize) -> Result<()> {
        if i < j && j < self.n {
            Ok(())
        } else {
            Err(Error::IndexError { i, j, n: self.n })
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Result<f64> {
        self.check_index(i, j)?;
        Ok(self.gamma[self.offset(i, j)])
    }

    /// `gamma(i, j)`, or zero outside the triangle.
    #[inline]
    pub fn get_or_zero(&self, i: usize, j: usize) -> f64 {
        if i < j && j < self.n {
            self.gamma[self.offset(i, j)]
        } else {
            0.0
        }
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        self.check_index(i, j)?;
        if !(value.abs() <= 1.0) {
            return Err(Error::OutOfRange { value });
        }
        let o = self.offset(i, j);
        self.gamma[o] = value;
        Ok(())
    }

    /// All `(i, j, gamma)` triples, row by row.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.gamma.len());
        for i in 0..self.n {
            for j in i + 1..self.n {
                out.push((i, j, self.gamma[self.offset(i, j)]));
            }
        }
        out
    }

    /// Entries left at zero because their defect product underflowed.
    pub fn degenerate(&self) -> &[(usize, usize)] {
        &self.degenerate
    }

    /// Entries on the unit circle, `|gamma| = 1`.
    pub fn boundary(&self) -> Vec<(usize, usize)> {
        self.entries()
            .into_iter()
            .filter(|&(_, _, v)| (v.abs() - 1.0).abs() <= BOUNDARY_TOLERANCE)
            .map(|(i, j, _)| (i, j))
            .collect()
    }

    /// `prod_{l=k+1}^{j-1} D(gamma(k, l))`, the forward prediction error of
    /// `X_k` given the samples strictly between `k` and `j`.
    pub fn row_defect_product(&self, k: usize, j: usize) -> f64 {
        (k + 1..j)
            .map(|l| defect_unchecked(self.get_or_zero(k, l)))
            .product()
    }

    /// `prod_{l=k+1}^{j-1} D(gamma(l, j))`.
    pub fn column_defect_product(&self, k: usize, j: usize) -> f64 {
        (k + 1..j)
            .map(|l| defect_unchecked(self.get_or_zero(l, j)))
            .product()
    }

    /// Row contraction `L(k, j)` over the parameters `gamma(k, m)`,
    /// `k < m <= j`: entry `m` is `gamma(k, m) prod_{k<l<m} D(gamma(k, l))`.
    pub fn row_contraction(&self, k: usize, j: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(j.saturating_sub(k));
        let mut prod = 1.0;
        for m in k + 1..=j {
            let g = self.get_or_zero(k, m);
            out.push(prod * g);
            prod *= defect_unchecked(g);
        }
        out
    }

    /// Column contraction `C(k, j)` over `gamma(m, j)`, ordered
    /// `m = j-1, j-2, ..., k`: entry `m` is `gamma(m, j) prod_{m<l<j} D(gamma(l, j))`.
    pub fn column_contraction(&self, k: usize, j: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(j.saturating_sub(k));
        let mut prod = 1.0;
        for m in (k..j).rev() {
            let g = self.get_or_zero(m, j);
            out.push(prod * g);
            prod *= defect_unchecked(g);
        }
        out
    }

    /// Multiplies the row vector `row` (length `b - a + 1`) on the right by
    /// the orthogonal block `U(a, b)`.
    ///
    /// `U(a, b) = G_1(gamma(a, a+1)) ... G_{s-1}(gamma(a, b)) (U(a+1, b) (+) 1)`
    /// with `s = b - a + 1` and `U(b, b) = [1]`.
    fn apply_unitary_block(&self, row: &mut [f64], a: usize, b: usize) {
        let s = b + 1 - a;
        debug_assert_eq!(row.len(), s);
        if s <= 1 {
            return;
        }
        for l in 1..s {
            let g = self.get_or_zero(a, a + l);
            let d = defect_unchecked(g);
            let (x, y) = (row[l - 1], row[l]);
            row[l - 1] = g * x + d * y;
            row[l] = d * x - g * y;
        }
        self.apply_unitary_block(&mut row[..s - 1], a + 1, b);
    }

    /// The orthogonal block `U(a, b)` as an explicit matrix.
    pub fn unitary_block(&self, a: usize, b: usize) -> DMatrix<f64> {
        let s = b + 1 - a;
        let mut u = DMatrix::identity(s, s);
        for r in 0..s {
            let mut row: Vec<f64> = u.row(r).iter().copied().collect();
            self.apply_unitary_block(&mut row, a, b);
            for (c, v) in row.into_iter().enumerate() {
                u[(r, c)] = v;
            }
        }
        u
    }

    /// `L(k, j-1) U(k+1, j-1) C(k+1, j)`: the part of `R(k, j)` explained
    /// by the samples strictly between `k` and `j`.
    fn projected_term(&self, k: usize, j: usize) -> f64 {
        if j <= k + 1 {
            return 0.0;
        }
        let mut row = self.row_contraction(k, j - 1);
        self.apply_unitary_block(&mut row, k + 1, j - 1);
        let col = self.column_contraction(k + 1, j);
        row.iter().zip(&col).map(|(a, b)| a * b).sum()
    }

    fn reconstruct_unchecked(&self, k: usize, j: usize) -> f64 {
        let g = self.get_or_zero(k, j);
        if j == k + 1 {
            return g;
        }
        self.projected_term(k, j)
            + self.row_defect_product(k, j) * g * self.column_defect_product(k, j)
    }

    /// Rebuilds the full correlation matrix.
    pub fn to_correlation(&self) -> CorrelationMatrix {
        let n = self.n;
        let mut m = DMatrix::identity(n, n);
        for k in 0..n {
            for j in k + 1..n {
                let v = self.reconstruct_unchecked(k, j);
                m[(k, j)] = v;
                m[(j, k)] = v;
            }
        }
        CorrelationMatrix::from_trusted(m)
    }
}

/// `R(k, j)` from the parameters alone.
pub fn schur_reconstruct_entry(params: &SchurParams, k: usize, j: usize) -> Result<f64> {
    params.check_index(k, j)?;
    Ok(params.reconstruct_unchecked(k, j))
}

/// Inverts [`schur_reconstruct_entry`], lag by lag.
///
/// For `j = k + 1` the parameter is `R(k, k+1)`. For longer lags it is
/// `(R(k, j) - L U C) / (prod of defects)`, which only needs parameters of
/// shorter lag. A defect product below [`DEFECT_FLOOR`] leaves the entry at
/// zero and records it in [`SchurParams::degenerate`].
pub fn extract_schur_params(r: &CorrelationMatrix) -> Result<SchurParams> {
    let n = r.n();
    let mut p = SchurParams::zeros(n);
    for lag in 1..n {
        for k in 0..n - lag {
            let j = k + lag;
            let value = if lag == 1 {
                r.get(k, j)
            } else {
                let denom = p.row_defect_product(k, j) * p.column_defect_product(k, j);
                if denom < DEFECT_FLOOR {
                    p.degenerate.push((k, j));
                    continue;
                }
                (r.get(k, j) - p.projected_term(k, j)) / denom
            };
            if value.abs() > 1.0 + CONTRACTION_SLACK {
                return Err(Error::NotAContraction {
                    i: k,
                    j,
                    value: value.abs(),
                });
            }
            let o = p.offset(k, j);
            p.gamma[o] = value.clamp(-1.0, 1.0);
        }
    }
    Ok(p)
}

/// Rotation matrices `W_0 ... W_{n-2}` of a parameter family.
#[derive(Debug, Clone, PartialEq)]
pub struct DilationSequence {
    dim: usize,
    matrices: Vec<DMatrix<f64>>,
    complete: usize,
}

/// Orthogonality tolerance checked on every stored matrix.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-10;

impl DilationSequence {
    /// Wraps externally supplied orthogonal matrices.
    pub fn new(matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let Some(first) = matrices.first() else {
            return Err(Error::InvalidArgument("empty dilation sequence".into()));
        };
        let dim = first.nrows();
        for m in &matrices {
            if m.nrows() != m.ncols() {
                return Err(Error::NotSquare {
                    rows: m.nrows(),
                    cols: m.ncols(),
                });
            }
            if m.nrows() != dim {
                return Err(Error::DimMismatch {
                    left: dim,
                    right: m.nrows(),
                });
            }
            let dev = orthogonality_defect(m);
            if dev >= ORTHOGONALITY_TOLERANCE {
                return Err(Error::NotOrthogonal { deviation: dev });
            }
        }
        let complete = matrices.len();
        Ok(DilationSequence {
            dim,
            matrices,
            complete,
        })
    }

    /// Like [`DilationSequence::new`], marking only the first `complete`
    /// matrices as trajectory samples.
    pub fn with_complete(matrices: Vec<DMatrix<f64>>, complete: usize) -> Result<Self> {
        let mut seq = Self::new(matrices)?;
        if complete == 0 || complete > seq.matrices.len() {
            return Err(Error::InvalidArgument(format!(
                "complete count {complete} outside 1..={}",
                seq.matrices.len()
            )));
        }
        seq.complete = complete;
        Ok(seq)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    /// Number of leading matrices built from a full window of parameters.
    ///
    /// The trailing matrices use zeros for parameters past the end of the
    /// triangle; they are needed for reconstruction but are not samples of
    /// the process trajectory.
    pub fn complete(&self) -> usize {
        self.complete
    }

    /// The leading matrices with a full window of parameters.
    pub fn trajectory(&self) -> &[DMatrix<f64>] {
        &self.matrices[..self.complete]
    }

    /// `e1' W_i ... W_{j-1} e1`.
    pub fn reconstruct(&self, i: usize, j: usize) -> Result<f64> {
        reconstruct_correlation(self, i, j)
    }

    /// Every entry reachable within the truncation window; `None` elsewhere.
    #[allow(clippy::needless_range_loop)]
    pub fn to_partial_matrix(&self) -> Vec<Vec<Option<f64>>> {
        let n = self.matrices.len() + 1;
        let mut out = vec![vec![None; n]; n];
        for i in 0..n {
            out[i][i] = Some(1.0);
            for j in i + 1..n {
                if let Ok(v) = self.reconstruct(i, j) {
                    out[i][j] = Some(v);
                    out[j][i] = Some(v);
                }
            }
        }
        out
    }
}

/// `max |W'W - I|`.
pub fn orthogonality_defect(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    (m.transpose() * m - DMatrix::<f64>::identity(n, n)).amax()
}

/// Right-multiplies `m` in place by the Givens block at `position`.
fn apply_givens_right(m: &mut DMatrix<f64>, gamma: f64, position: usize) {
    let d = defect_unchecked(gamma);
    let (p, q) = (position - 1, position);
    for r in 0..m.nrows() {
        let (x, y) = (m[(r, p)], m[(r, q)]);
        m[(r, p)] = gamma * x + d * y;
        m[(r, q)] = d * x - gamma * y;
    }
}

/// `W_i = G_1(gamma(i, i+1)) G_2(gamma(i, i+2)) ... G_{dim-1}(gamma(i, i+dim-1))`
/// for `i = 0 ..= n-2`, with parameters beyond the triangle taken as zero.
pub fn build_dilation_sequence(params: &SchurParams, dim: usize) -> Result<DilationSequence> {
    let n = params.n();
    if dim < 2 || dim > n {
        return Err(Error::BadDim { dim, n });
    }
    let matrices: Vec<DMatrix<f64>> = (0..n - 1)
        .map(|i| {
            let mut w = DMatrix::identity(dim, dim);
            for l in 1..dim {
                apply_givens_right(&mut w, params.get_or_zero(i, i + l), l);
            }
            w
        })
        .collect();
    for w in &matrices {
        let dev = orthogonality_defect(w);
        if dev >= ORTHOGONALITY_TOLERANCE {
            return Err(Error::NotOrthogonal { deviation: dev });
        }
    }
    Ok(DilationSequence {
        dim,
        matrices,
        complete: n + 1 - dim,
    })
}

/// Closed-form Naimark dilation of a stationary parcor sequence.
///
/// With `D_l = D(g_l)` and the convention `g_dim = 1`:
///
/// ```text
/// U[0][c]   =  D_1 ... D_c g_{c+1}
/// U[r][r-1] =  D_r
/// U[r][c]   = -g_r D_{r+1} ... D_c g_{c+1}      (c >= r >= 1)
/// ```
///
/// and zero below the subdiagonal. Missing parcors are zero; parcors past
/// `dim - 1` are ignored.
pub fn naimark_matrix(parcors: &[f64], dim: usize) -> Result<DMatrix<f64>> {
    if dim < 1 {
        return Err(Error::BadDim {
            dim,
            n: parcors.len() + 1,
        });
    }
    for &g in parcors {
        if !(g.abs() <= 1.0) {
            return Err(Error::OutOfRange { value: g });
        }
    }
    // g[l] for l = 1..=dim, with g[dim] = 1
    let g = |l: usize| -> f64 {
        if l == dim {
            1.0
        } else {
            parcors.get(l - 1).copied().unwrap_or(0.0)
        }
    };
    let d = |l: usize| defect_unchecked(g(l));
    let mut u = DMatrix::zeros(dim, dim);
    for c in 0..dim {
        let mut prod = 1.0;
        for l in 1..=c {
            prod *= d(l);
        }
        u[(0, c)] = prod * g(c + 1);
    }
    for r in 1..dim {
        u[(r, r - 1)] = d(r);
        for c in r..dim {
            let mut prod = 1.0;
            for l in r + 1..=c {
                prod *= d(l);
            }
            u[(r, c)] = -g(r) * prod * g(c + 1);
        }
    }
    Ok(u)
}

/// `e1' W_i W_{i+1} ... W_{j-1} e1`.
pub fn reconstruct_correlation(seq: &DilationSequence, i: usize, j: usize) -> Result<f64> {
    if i >= j || j > seq.len() {
        return Err(Error::IndexError {
            i,
            j,
            n: seq.len() + 1,
        });
    }
    if j - i > seq.dim - 1 {
        return Err(Error::TruncationWindowExceeded {
            lag: j - i,
            dim: seq.dim,
        });
    }
    let mut v = DVector::zeros(seq.dim);
    v[0] = 1.0;
    for w in seq.matrices[i..j].iter().rev() {
        v = w * v;
    }
    Ok(v[0])
}

/// Output of [`levinson`].
#[derive(Debug, Clone, PartialEq)]
pub struct Levinson {
    /// Reflection coefficients `k_1 ... k_{n-1}`, with `k_1 = r_1`.
    pub reflection: Vec<f64>,
    /// Prediction error after each order, `E_l = E_{l-1} (1 - k_l^2)`.
    pub prediction_error: Vec<f64>,
    /// Final-order predictor `x_t ~ sum_i a_i x_{t-i}`.
    pub coefficients: Vec<f64>,
}

/// Levinson-Durbin recursion on a Toeplitz first row `(1, r_1, ..., r_{n-1})`.
pub fn levinson(toeplitz_row: &[f64]) -> Result<Levinson> {
    let Some(&r0) = toeplitz_row.first() else {
        return Err(Error::InvalidArgument("empty toeplitz row".into()));
    };
    if (r0 - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "toeplitz row must start with 1, got {r0}"
        )));
    }
    let order = toeplitz_row.len() - 1;
    let r = toeplitz_row;
    let mut a: Vec<f64> = Vec::with_capacity(order);
    let mut reflection = Vec::with_capacity(order);
    let mut prediction_error = Vec::with_capacity(order);
    let mut err = 1.0;
    for l in 1..=order {
        let acc: f64 = (1..l).map(|i| a[i - 1] * r[l - i]).sum();
        let k = (r[l] - acc) / err;
        let prev = a.clone();
        for i in 1..l {
            a[i - 1] = prev[i - 1] - k * prev[l - i - 1];
        }
        a.push(k);
        err *= (1.0 - k) * (1.0 + k);
        if !(err > 0.0) {
            return Err(Error::SingularStep {
                step: l,
                error: err,
            });
        }
        reflection.push(k);
        prediction_error.push(err);
    }
    Ok(Levinson {
        reflection,
        prediction_error,
        coefficients: a,
    })
}
