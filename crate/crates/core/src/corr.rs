//! Correlation matrices: validation, ensemble estimation from realizations,
//! and synthetic stationary / periodically correlated generators.
//!
//! All random generation goes through [`ChaCha8Rng`] seeded with
//! `seed_from_u64`, so a given seed reproduces the same samples bit for bit
//! on every platform.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Default threshold on the smallest eigenvalue of an accepted matrix.
pub const PSD_TOLERANCE: f64 = 1e-10;
/// Eigenvalue floor applied when the estimation path repairs a matrix.
pub const CLIP_FLOOR: f64 = 1e-8;
/// Relative asymmetry tolerated before a matrix is rejected.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// A real symmetric positive-definite matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    entries: DMatrix<f64>,
}

impl CorrelationMatrix {
    /// Validates with the default [`PSD_TOLERANCE`].
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        validate_spd(&matrix, PSD_TOLERANCE)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?)
    }

    pub fn identity(n: usize) -> Self {
        CorrelationMatrix {
            entries: DMatrix::identity(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.entries)
    }

    /// True when every diagonal `R[i][i+l]` varies by at most `tol`.
    pub fn is_toeplitz(&self, tol: f64) -> bool {
        is_toeplitz(self, tol)
    }

    /// Largest spread (max minus min) over the diagonals of the matrix.
    pub fn toeplitz_deviation(&self) -> f64 {
        let n = self.n();
        let mut worst = 0.0f64;
        for lag in 1..n {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for i in 0..n - lag {
                let v = self.entries[(i, i + lag)];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            worst = worst.max(hi - lo);
        }
        worst
    }

    /// First row `(1, R_1, ..., R_{n-1})`.
    pub fn first_row(&self) -> Vec<f64> {
        self.entries.row(0).iter().copied().collect()
    }

    /// Toeplitz matrix built from a first row `(1, r_1, r_2, ...)`.
    pub fn toeplitz(row: &[f64]) -> Result<Self> {
        let n = row.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty toeplitz row".into()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| row[i.abs_diff(j)]);
        Self::new(m)
    }

    pub(crate) fn from_trusted(entries: DMatrix<f64>) -> Self {
        CorrelationMatrix { entries }
    }
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse("rows have unequal lengths".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Validates a user-supplied matrix as a correlation matrix.
///
/// The matrix must be square and symmetric up to a relative `1e-10`. A
/// positive diagonal different from one is normalized away with
/// `D^{-1/2} R D^{-1/2}`. The result is never repaired: a smallest
/// eigenvalue at or below `psd_tolerance` is an error.
pub fn validate_spd(matrix: &DMatrix<f64>, psd_tolerance: f64) -> Result<CorrelationMatrix> {
    let (rows, cols) = matrix.shape();
    if rows != cols || rows == 0 {
        return Err(Error::NotSquare { rows, cols });
    }
    if !(psd_tolerance >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "psd tolerance must be non-negative, got {psd_tolerance}"
        )));
    }
    let n = rows;
    for i in 0..n {
        let d = matrix[(i, i)];
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NonPositiveDiagonal { index: i, value: d });
        }
    }
    let scale = matrix.amax().max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in i + 1..n {
            let gap = (matrix[(i, j)] - matrix[(j, i)]).abs();
            if !(gap <= SYMMETRY_TOLERANCE * scale) {
                return Err(Error::NotSymmetric { i, j, gap });
            }
        }
    }
    let r = normalize_unit_diagonal(&symmetrize(matrix));
    let min_eig = min_eigenvalue(&r);
    if !(min_eig > psd_tolerance) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min_eig,
            tolerance: psd_tolerance,
        });
    }
    Ok(CorrelationMatrix { entries: r })
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn normalize_unit_diagonal(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let inv_sqrt: Vec<f64> = (0..n).map(|i| 1.0 / m[(i, i)].sqrt()).collect();
    DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (i.min(j), i.max(j));
        if a == b {
            1.0
        } else {
            m[(a, b)] * inv_sqrt[a] * inv_sqrt[b]
        }
    })
}

/// True iff on every diagonal the spread `max - min` is at most `tol`.
pub fn is_toeplitz(r: &CorrelationMatrix, tol: f64) -> bool {
    r.toeplitz_deviation() <= tol
}

/// Independent realizations of a scalar process, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationSet {
    samples: Vec<Vec<f64>>,
}

impl RealizationSet {
    pub fn new(samples: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::InsufficientRealizations {
                required: 1,
                got: 0,
            });
        };
        let length = first.len();
        if length == 0 {
            return Err(Error::InvalidArgument("realizations are empty".into()));
        }
        if samples.iter().any(|r| r.len() != length) {
            return Err(Error::InvalidArgument(
                "realizations have unequal lengths".into(),
            ));
        }
        Ok(RealizationSet { samples })
    }

    pub fn count(&self) -> usize {
        self.samples.len()
    }

    pub fn length(&self) -> usize {
        self.samples[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.samples
    }

    /// Multiplies every sample by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        RealizationSet {
            samples: self
                .samples
                .iter()
                .map(|r| r.iter().map(|x| x * factor).collect())
                .collect(),
        }
    }
}

/// Raw ensemble second moments `E[x_i x_j]` over the first `n` samples.
pub fn estimate_ensemble_covariance(data: &RealizationSet, n: usize) -> Result<DMatrix<f64>> {
    if data.count() < 2 {
        return Err(Error::InsufficientRealizations {
            required: 2,
            got: data.count(),
        });
    }
    if n == 0 || n > data.length() {
        return Err(Error::InvalidArgument(format!(
            "requested size {n} but realizations have length {}",
            data.length()
        )));
    }
    let mut acc = DMatrix::<f64>::zeros(n, n);
    for row in data.rows() {
        for i in 0..n {
            let xi = row[i];
            for j in i..n {
                acc[(i, j)] += xi * row[j];
            }
        }
    }
    let inv = 1.0 / data.count() as f64;
    for i in 0..n {
        for j in i..n {
            let v = acc[(i, j)] * inv;
            acc[(i, j)] = v;
            acc[(j, i)] = v;
        }
    }
    Ok(acc)
}

/// Knobs for [`estimate_ensemble_correlation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub psd_tolerance: f64,
    /// Clip eigenvalues at [`CLIP_FLOOR`] when the raw estimate is not PD.
    pub repair: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            psd_tolerance: PSD_TOLERANCE,
            repair: true,
        }
    }
}

/// An estimated correlation matrix and whether it had to be repaired.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub matrix: CorrelationMatrix,
    pub repaired: bool,
}

/// Ensemble correlation over realizations, normalized to unit diagonal.
///
/// Sampling noise can leave the estimate slightly indefinite. With
/// `options.repair` set, such a matrix has its eigenvalues clipped at
/// [`CLIP_FLOOR`], is re-normalized, and is returned with `repaired = true`.
pub fn estimate_ensemble_correlation(
    data: &RealizationSet,
    n: usize,
    options: EstimateOptions,
) -> Result<Estimate> {
    let cov = estimate_ensemble_covariance(data, n)?;
    for i in 0..n {
        let v = cov[(i, i)];
        if !(v > 0.0) {
            return Err(Error::DegenerateVariance { index: i, value: v });
        }
    }
    let r = normalize_unit_diagonal(&cov);
    match validate_spd(&r, options.psd_tolerance) {
        Ok(matrix) => Ok(Estimate {
            matrix,
            repaired: false,
        }),
        Err(Error::NotPositiveDefinite { .. }) if options.repair => {
            let repaired = clip_eigenvalues(&r, CLIP_FLOOR);
            let matrix = validate_spd(&repaired, options.psd_tolerance)?;
            Ok(Estimate {
                matrix,
                repaired: true,
            })
        }
        Err(e) => Err(e),
    }
}

fn clip_eigenvalues(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let vals = eig.eigenvalues.map(|v| v.max(floor));
    let v = &eig.eigenvectors;
    let rebuilt = v * DMatrix::from_diagonal(&vals) * v.transpose();
    normalize_unit_diagonal(&symmetrize(&rebuilt))
}

/// Correlation matrix of a unit-variance AR(1) process: `R[i][j] = a^|i-j|`.
pub fn gen_stationary_ar(coefficient: f64, n: usize) -> Result<CorrelationMatrix> {
    if !(coefficient.abs() < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "AR coefficient must lie in (-1, 1), got {coefficient}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("size must be positive".into()));
    }
    let m = DMatrix::from_fn(n, n, |i, j| coefficient.powi(i.abs_diff(j) as i32));
    Ok(CorrelationMatrix::from_trusted(m))
}

/// A periodically correlated AR(1) model.
///
/// The process is `x_t = a x_{t-1} + sqrt(1 - a^2) m(t) e_t` with white
/// Gaussian `e_t` and periodic innovation gain
/// `m(t) = 1 + depth * cos(2 pi t / period)`. With `depth = 0` it is the
/// unit-variance stationary AR(1) process. For `depth > 0` the variance is
/// periodic in `t`, so lag correlations `a sqrt(var_t / var_{t+1})` are too.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcProcess {
    pub base_coefficient: f64,
    pub period: usize,
    pub depth: f64,
}

impl PcProcess {
    pub fn new(base_coefficient: f64, period: usize, depth: f64) -> Result<Self> {
        if !(base_coefficient.abs() < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "base coefficient must lie in (-1, 1), got {base_coefficient}"
            )));
        }
        if period < 2 {
            return Err(Error::InvalidArgument(format!(
                "period must be at least 2, got {period}"
            )));
        }
        if !(0.0..1.0).contains(&depth) {
            return Err(Error::InvalidArgument(format!(
                "modulation depth must lie in [0, 1), got {depth}"
            )));
        }
        Ok(PcProcess {
            base_coefficient,
            period,
            depth,
        })
    }

    pub fn modulation(&self, t: i64) -> f64 {
        let phase = (t.rem_euclid(self.period as i64)) as f64 / self.period as f64;
        1.0 + self.depth * (2.0 * std::f64::consts::PI * phase).cos()
    }

    fn burn_in(&self) -> usize {
        let p = self.period;
        200usize.div_ceil(p) * p
    }

    /// `count` realizations of length `n`, deterministic in `seed`.
    pub fn realizations(&self, n: usize, count: usize, seed: u64) -> Result<RealizationSet> {
        if n == 0 || count == 0 {
            return Err(Error::InvalidArgument(
                "length and count must be positive".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = self.base_coefficient;
        let gain = (1.0 - a * a).sqrt();
        let burn = self.burn_in() as i64;
        let mut samples = Vec::with_capacity(count);
        for _ in 0..count {
            let mut x: f64 = StandardNormal.sample(&mut rng);
            for t in -burn..0 {
                let e: f64 = StandardNormal.sample(&mut rng);
                x = a * x + gain * self.modulation(t) * e;
            }
            let mut row = Vec::with_capacity(n);
            for t in 0..n as i64 {
                let e: f64 = StandardNormal.sample(&mut rng);
                x = a * x + gain * self.modulation(t) * e;
                row.push(x);
            }
            samples.push(row);
        }
        RealizationSet::new(samples)
    }
}

/// Convenience wrapper over [`PcProcess::realizations`].
pub fn gen_pc_process(
    base_coefficient: f64,
    period: usize,
    depth: f64,
    n: usize,
    count: usize,
    seed: u64,
) -> Result<RealizationSet> {
    PcProcess::new(base_coefficient, period, depth)?.realizations(n, count, seed)
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn assert_invariants(r: &CorrelationMatrix) {
        let n = r.n();
        for i in 0..n {
            assert_eq!(r.get(i, i), 1.0);
            for j in 0..n {
                assert_eq!(r.get(i, j), r.get(j, i));
                assert!(r.get(i, j).abs() <= 1.0);
            }
        }
        assert!(r.min_eigenvalue() > PSD_TOLERANCE);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn outputs_satisfy_type_invariants(
            a in -0.95f64..0.95,
            n in 2usize..8,
            seed in 0u64..1000,
            depth in 0.0f64..0.9,
        ) {
            assert_invariants(&gen_stationary_ar(a, n).unwrap());
            let data = gen_pc_process(a, 3, depth, n, 64, seed).unwrap();
            let est = estimate_ensemble_correlation(&data, n, EstimateOptions::default()).unwrap();
            assert_invariants(&est.matrix);
            // global scaling is invisible after normalization
            let scaled = estimate_ensemble_correlation(&data.scaled(3.7), n, EstimateOptions::default()).unwrap();
            let gap = (scaled.matrix.as_matrix() - est.matrix.as_matrix()).amax();
            prop_assert!(gap < 1e-12);
        }

        #[test]
        fn random_gram_matrices_validate(rows in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 6), 4)) {
            // B^T B + I is PD for any B
            let b = DMatrix::from_fn(4, 6, |i, j| rows[i][j]);
            let g = b.transpose() * &b + DMatrix::identity(6, 6);
            let r = validate_spd(&g, PSD_TOLERANCE).unwrap();
            assert_invariants(&r);
        }
    }
}
