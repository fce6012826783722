//! Discrete curves `x_0, ..., x_N` on the rotation group, sampled on the
//! uniform grid `t_k = k / N`.
//!
//! Velocities are right-trivialized: the step from `x_k` to `x_{k+1}` is the
//! algebra element `log(x_{k+1} x_k^T)`, and `N` times that step is the
//! discrete velocity on segment `k`.

use nalgebra::DMatrix;

use crate::dilation::DilationSequence;
use crate::error::{Error, Result};
use crate::liegroup::{distance, exp_group, log_between, AlgebraElement, GroupElement};
use crate::shape::tsrv_lenient;

/// Endpoint gap below which a curve already counts as closed.
pub const CLOSURE_TOLERANCE: f64 = 1e-9;

/// A discrete curve on `SO(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldCurve {
    points: Vec<GroupElement>,
    closed: bool,
}

impl ManifoldCurve {
    /// Every point must be a rotation of a common dimension.
    ///
    /// A `closed` curve need not end where it starts; see [`close_curve`].
    pub fn new(points: Vec<GroupElement>, closed: bool) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::DegenerateCurve("curve has no points".into()));
        };
        let dim = first.dim();
        for p in &points {
            if p.dim() != dim {
                return Err(Error::DimMismatch {
                    left: dim,
                    right: p.dim(),
                });
            }
            if !p.is_rotation() {
                return Err(Error::WrongComponent);
            }
        }
        Ok(ManifoldCurve { points, closed })
    }

    /// Builds a curve from orthogonal matrices.
    ///
    /// If every matrix has determinant `-1` the whole sequence is
    /// right-multiplied by [`GroupElement::reflection`], which is returned
    /// alongside the curve. Mixed determinants are rejected.
    pub fn from_matrices(
        matrices: Vec<DMatrix<f64>>,
        closed: bool,
    ) -> Result<(Self, Option<GroupElement>)> {
        let elements = matrices
            .into_iter()
            .map(GroupElement::new)
            .collect::<Result<Vec<_>>>()?;
        let Some(first) = elements.first() else {
            return Err(Error::DegenerateCurve("curve has no points".into()));
        };
        if first.is_rotation() {
            return Ok((Self::new(elements, closed)?, None));
        }
        if elements.iter().any(|g| g.is_rotation()) {
            return Err(Error::WrongComponent);
        }
        let r = GroupElement::reflection(first.dim());
        let points = elements.iter().map(|g| g.compose(&r)).collect();
        Ok((Self::new(points, closed)?, Some(r)))
    }

    pub(crate) fn from_points_unchecked(points: Vec<GroupElement>, closed: bool) -> Self {
        ManifoldCurve { points, closed }
    }

    /// A constant curve with `segments + 1` copies of `g`.
    pub fn constant(g: GroupElement, segments: usize) -> Self {
        ManifoldCurve {
            points: vec![g; segments + 1],
            closed: false,
        }
    }

    pub fn points(&self) -> &[GroupElement] {
        &self.points
    }

    pub fn point(&self, k: usize) -> &GroupElement {
        &self.points[k]
    }

    /// Number of segments `N`.
    pub fn segments(&self) -> usize {
        self.points.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn start(&self) -> &GroupElement {
        &self.points[0]
    }

    pub fn end(&self) -> &GroupElement {
        &self.points[self.points.len() - 1]
    }

    pub fn with_closed(mut self, closed: bool) -> Self {
        self.closed = closed;
        self
    }

    /// `x_k x_0^T`, so the curve starts at the identity.
    pub fn translated_to_identity(&self) -> Self {
        let inv = self.points[0].transpose();
        let points = self.points.iter().map(|p| p.compose(&inv)).collect();
        ManifoldCurve {
            points,
            closed: self.closed,
        }
    }

    /// The same points in reverse order.
    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        ManifoldCurve {
            points,
            closed: self.closed,
        }
    }

    pub fn starts_at_identity(&self, tol: f64) -> bool {
        let n = self.dim();
        (self.points[0].matrix() - DMatrix::<f64>::identity(n, n)).amax() <= tol
    }

    pub fn matrices(&self) -> Vec<DMatrix<f64>> {
        self.points.iter().map(|p| p.matrix().clone()).collect()
    }
}

/// Right-trivialized velocities `v_0, ..., v_{N-1}` of a curve.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentCurve {
    values: Vec<AlgebraElement>,
}

impl TangentCurve {
    pub fn new(values: Vec<AlgebraElement>) -> Self {
        TangentCurve { values }
    }

    pub fn values(&self) -> &[AlgebraElement] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Parameter step `1 / N`.
    pub fn step(&self) -> f64 {
        1.0 / self.values.len() as f64
    }
}

/// The trajectory of a dilation sequence as a curve starting at the
/// identity: `x_k = W_k W_0^T` over the full-window matrices.
///
/// Every `W_k` has the same determinant, so the translated points are all
/// rotations. The dropped factor is [`dilation_translation`].
pub fn from_dilation(seq: &DilationSequence, closed: bool) -> ManifoldCurve {
    let traj = seq.trajectory();
    let inv = traj[0].transpose();
    let mut points: Vec<GroupElement> = traj
        .iter()
        .map(|w| GroupElement::from_rotation_unchecked(w * &inv))
        .collect();
    points[0] = GroupElement::identity(seq.dim());
    ManifoldCurve { points, closed }
}

/// `W_0`, so that `W_k = x_k W_0` for the curve from [`from_dilation`].
pub fn dilation_translation(seq: &DilationSequence) -> DMatrix<f64> {
    seq.trajectory()[0].clone()
}

/// Makes the last point equal the first.
///
/// A curve whose endpoints are already within [`CLOSURE_TOLERANCE`] has its
/// last point replaced by the first; otherwise the first point is appended.
pub fn close_curve(c: &ManifoldCurve) -> Result<ManifoldCurve> {
    let mut points = c.points.clone();
    if points.len() > 1 && distance(c.start(), c.end())? <= CLOSURE_TOLERANCE {
        let last = points.len() - 1;
        points[last] = points[0].clone();
    } else {
        points.push(points[0].clone());
    }
    Ok(ManifoldCurve {
        points,
        closed: true,
    })
}

/// Index of the `step`-th neighbour of knot `k`, wrapping for closed loops.
fn neighbour(c: &ManifoldCurve, k: usize, step: isize) -> Option<usize> {
    let n = c.segments() as isize;
    let idx = k as isize + step;
    if (0..=n).contains(&idx) {
        return Some(idx as usize);
    }
    let looped = c.closed && n >= 2 && c.points[0] == c.points[n as usize];
    looped.then(|| idx.rem_euclid(n) as usize)
}

/// Cubic Hermite segment from `x_k` to `x_{k+1}`, lifted to the chart at `x_k`.
struct Segment {
    p1: AlgebraElement,
    m0: AlgebraElement,
    m1: AlgebraElement,
}

impl Segment {
    fn new(c: &ManifoldCurve, k: usize) -> Result<Self> {
        let base = &c.points[k];
        let lift = |j: usize| log_between(base, &c.points[j]);
        let p1 = lift(k + 1)?;
        // central differences inside, second-order one-sided at open ends
        let m0 = match (neighbour(c, k, -1), neighbour(c, k, 2)) {
            (Some(j), _) => (&p1 - &lift(j)?).scale(0.5),
            (None, Some(j)) => &p1.scale(2.0) - &lift(j)?.scale(0.5),
            (None, None) => p1.clone(),
        };
        let m1 = match (neighbour(c, k, 2), neighbour(c, k, -1)) {
            (Some(j), _) => lift(j)?.scale(0.5),
            (None, Some(j)) => &p1.scale(1.5) + &lift(j)?.scale(0.5),
            (None, None) => p1.clone(),
        };
        Ok(Segment { p1, m0, m1 })
    }

    fn eval(&self, base: &GroupElement, u: f64) -> GroupElement {
        if u == 0.0 {
            return base.clone();
        }
        let u2 = u * u;
        let u3 = u2 * u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h10 = u3 - 2.0 * u2 + u;
        let h11 = u3 - u2;
        let lift = &(&self.p1.scale(h01) + &self.m0.scale(h10)) + &self.m1.scale(h11);
        exp_group(&lift).compose(base)
    }
}

/// Resamples onto `M + 1` uniform points with a segment-local cubic spline.
///
/// On segment `k` the neighbouring knots are lifted to the algebra by
/// `log(x_j x_k^T)` and interpolated by a Catmull-Rom cubic, then mapped
/// back with `exp(.) x_k`. Knots are reproduced exactly and a two-point
/// curve resamples onto its geodesic.
pub fn spline_resample(c: &ManifoldCurve, m: usize) -> Result<ManifoldCurve> {
    let n = c.segments();
    if m < n {
        return Err(Error::GridMismatch(format!(
            "cannot resample {n} segments onto {m}"
        )));
    }
    if n == 0 {
        return Ok(ManifoldCurve {
            points: vec![c.points[0].clone(); m + 1],
            closed: c.closed,
        });
    }
    let segments = (0..n)
        .map(|k| Segment::new(c, k))
        .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::with_capacity(m + 1);
    for j in 0..=m {
        // t = j / m lands on segment k at local parameter r / m
        let (k, r) = ((j * n) / m, (j * n) % m);
        if k == n {
            points.push(c.points[n].clone());
        } else {
            points.push(segments[k].eval(&c.points[k], r as f64 / m as f64));
        }
    }
    Ok(ManifoldCurve {
        points,
        closed: c.closed,
    })
}

/// Point at `t` on the piecewise geodesic through the samples:
/// `exp((tN - k) log(x_{k+1} x_k^T)) x_k` on segment `k`.
pub fn piecewise_geodesic(c: &ManifoldCurve, t: f64) -> Result<GroupElement> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("t = {t} outside [0, 1]")));
    }
    let n = c.segments();
    if n == 0 {
        return Ok(c.points[0].clone());
    }
    let x = t * n as f64;
    let nearest = x.round();
    if (x - nearest).abs() < 1e-12 {
        return Ok(c.points[nearest as usize].clone());
    }
    let k = (x.floor() as usize).min(n - 1);
    let step = log_between(&c.points[k], &c.points[k + 1])?;
    Ok(exp_group(&step.scale(x - k as f64)).compose(&c.points[k]))
}

/// Samples the piecewise geodesic at `M + 1` uniform parameters.
pub fn refine(c: &ManifoldCurve, m: usize) -> Result<ManifoldCurve> {
    if m == 0 {
        return Err(Error::InvalidArgument("refinement needs M >= 1".into()));
    }
    let points = (0..=m)
        .map(|j| piecewise_geodesic(c, j as f64 / m as f64))
        .collect::<Result<Vec<_>>>()?;
    Ok(ManifoldCurve {
        points,
        closed: c.closed,
    })
}

/// `v_k = N log(x_{k+1} x_k^T)`.
pub fn discrete_velocity(c: &ManifoldCurve) -> Result<TangentCurve> {
    let n = c.segments() as f64;
    let values = c
        .points
        .windows(2)
        .map(|w| Ok(log_between(&w[0], &w[1])?.scale(n)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TangentCurve { values })
}

/// Discrete energy of a path of curves `c_0, ..., c_S` with `ds = 1 / S`:
///
/// ```text
/// sum_s ( |log(start_{s+1} start_s^T)|^2 + (1/N) sum_k |q_{s+1,k} - q_{s,k}|^2 ) / ds
/// ```
///
/// where `q` is the transported square-root velocity.
pub fn path_energy(path: &[ManifoldCurve]) -> Result<f64> {
    let Some(first) = path.first() else {
        return Ok(0.0);
    };
    let (n, dim) = (first.segments(), first.dim());
    for c in path {
        if c.segments() != n {
            return Err(Error::GridMismatch(format!(
                "path mixes curves with {n} and {} segments",
                c.segments()
            )));
        }
        if c.dim() != dim {
            return Err(Error::DimMismatch {
                left: dim,
                right: c.dim(),
            });
        }
    }
    if path.len() < 2 {
        return Ok(0.0);
    }
    let ds = 1.0 / (path.len() - 1) as f64;
    let q = path.iter().map(tsrv_lenient).collect::<Result<Vec<_>>>()?;
    let mut energy = 0.0;
    for s in 0..path.len() - 1 {
        let start = log_between(path[s].start(), path[s + 1].start())?.norm_squared();
        let mut inner = 0.0;
        for (a, b) in q[s].values().iter().zip(q[s + 1].values()) {
            inner += (b - a).norm_squared();
        }
        if n > 0 {
            inner /= n as f64;
        }
        energy += (start + inner) / ds;
    }
    Ok(energy)
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn random_algebra(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> AlgebraElement {
        let k = dim * (dim - 1) / 2;
        let coords: Vec<f64> = (0..k)
            .map(|_| rng.random_range(-1.0..1.0) * scale)
            .collect();
        AlgebraElement::from_coordinates(dim, &coords)
    }

    /// Knots `x_{k+1} = exp(A_k) x_k` from the identity, with moderate steps.
    pub fn random_knots(seed: u64, dim: usize, count: usize, scale: f64) -> ManifoldCurve {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = vec![GroupElement::identity(dim)];
        for _ in 1..count {
            let a = random_algebra(&mut rng, dim, scale);
            let next = exp_group(&a).compose(points.last().unwrap());
            points.push(next);
        }
        ManifoldCurve::new(points, false).unwrap()
    }

    /// `c(t) = exp(t A) exp(t^2 B)`, with `c' c^T = A + exp(tA) (2tB) exp(-tA)`.
    pub struct Analytic {
        pub a: AlgebraElement,
        pub b: AlgebraElement,
    }

    impl Analytic {
        pub fn at(&self, t: f64) -> GroupElement {
            exp_group(&self.a.scale(t)).compose(&exp_group(&self.b.scale(t * t)))
        }

        pub fn velocity(&self, t: f64) -> AlgebraElement {
            let g = exp_group(&self.a.scale(t));
            let rotated = g.matrix() * self.b.matrix() * g.matrix().transpose() * (2.0 * t);
            AlgebraElement::new(self.a.matrix() + rotated).unwrap()
        }

        pub fn sample(&self, n: usize) -> ManifoldCurve {
            let points = (0..=n).map(|k| self.at(k as f64 / n as f64)).collect();
            ManifoldCurve::new(points, false).unwrap()
        }
    }
}
