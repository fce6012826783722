//! Transported square-root velocities and the elastic shape distance.
//!
//! A curve `c` on `SO(n)` maps to its start point and the algebra-valued
//! function
//!
//! ```text
//! q(t) = v(t) / sqrt(|v(t)|),    v(t) = c'(t) c(t)^T
//! ```
//!
//! sampled once per segment of a discrete curve. Curves with the same start
//! are compared in the flat `L^2` metric on `q`, and shapes by minimizing
//!
//! ```text
//! d^2 = int_0^1 | q0(t) - q1(phi(t)) sqrt(phi'(t)) |^2 dt
//! ```
//!
//! over increasing piecewise-linear warps `phi` on a lattice.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::curves::{discrete_velocity, piecewise_geodesic, ManifoldCurve};
use crate::error::{Error, Result};
use crate::liegroup::{exp_group, geodesic, AlgebraElement, GroupElement, METRIC_SCALE};

/// Velocities with norm below this are treated as vanishing.
pub const Q_FLOOR: f64 = 1e-10;
/// Default bound on the lattice steps `(a, b)`, `1 <= a, b <= MAX_STEP`,
/// tried by the alignment.
///
/// Each step has the constant slope `b / a`, so the bound sets how closely a
/// smooth warp can be followed. A mismatch of `e` in slope costs about
/// `(e / 2)^2 |q|^2`; with bound 3 the slopes next to 1 are 2/3 and 3/2,
/// which leaves warps of slope near 1.25 about 10% of `|q|` away. Cost
/// grows with the square of the bound.
pub const MAX_STEP: usize = 10;
/// Default stopping threshold for [`karcher_mean`].
pub const MEAN_TOLERANCE: f64 = 1e-8;

/// Start point and square-root velocities `q_0, ..., q_{N-1}` of a curve.
#[derive(Debug, Clone, PartialEq)]
pub struct TsrvCurve {
    start: GroupElement,
    values: Vec<AlgebraElement>,
    degenerate: Vec<usize>,
}

impl TsrvCurve {
    pub fn new(start: GroupElement, values: Vec<AlgebraElement>) -> Result<Self> {
        let dim = start.dim();
        if let Some(v) = values.iter().find(|v| v.dim() != dim) {
            return Err(Error::DimMismatch {
                left: dim,
                right: v.dim(),
            });
        }
        if !start.is_rotation() {
            return Err(Error::WrongComponent);
        }
        if values
            .iter()
            .any(|v| !v.matrix().iter().all(|x| x.is_finite()))
        {
            return Err(Error::InvalidArgument(
                "non-finite square-root velocity".into(),
            ));
        }
        let degenerate = flag_vanishing(&values);
        Ok(TsrvCurve {
            start,
            values,
            degenerate,
        })
    }

    pub fn start(&self) -> &GroupElement {
        &self.start
    }

    pub fn values(&self) -> &[AlgebraElement] {
        &self.values
    }

    pub fn segments(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.start.dim()
    }

    /// Segments whose velocity fell below [`Q_FLOOR`].
    pub fn degenerate(&self) -> &[usize] {
        &self.degenerate
    }

    /// `sqrt((1/N) sum_k |q_k - p_k|^2)`.
    pub fn l2_distance(&self, other: &TsrvCurve) -> Result<f64> {
        check_same_grid(self.segments(), other.segments())?;
        check_same_dim(self.dim(), other.dim())?;
        if self.values.is_empty() {
            return Ok(0.0);
        }
        let sum: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_squared())
            .sum();
        Ok((sum / self.values.len() as f64).sqrt())
    }

    /// `(1 - s) self + s other`, keeping the start of `self`.
    pub fn interpolate(&self, other: &TsrvCurve, s: f64) -> Result<TsrvCurve> {
        check_same_grid(self.segments(), other.segments())?;
        check_same_dim(self.dim(), other.dim())?;
        let values: Vec<AlgebraElement> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| &a.scale(1.0 - s) + &b.scale(s))
            .collect();
        let degenerate = flag_vanishing(&values);
        Ok(TsrvCurve {
            start: self.start.clone(),
            values,
            degenerate,
        })
    }
}

fn flag_vanishing(values: &[AlgebraElement]) -> Vec<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm_squared() < Q_FLOOR)
        .map(|(k, _)| k)
        .collect()
}

fn check_same_grid(n0: usize, n1: usize) -> Result<()> {
    if n0 != n1 {
        return Err(Error::GridMismatch(format!(
            "curves have {n0} and {n1} segments"
        )));
    }
    Ok(())
}

fn check_same_dim(d0: usize, d1: usize) -> Result<()> {
    if d0 != d1 {
        return Err(Error::DimMismatch {
            left: d0,
            right: d1,
        });
    }
    Ok(())
}

fn srv(v: &AlgebraElement) -> AlgebraElement {
    v.scale(1.0 / v.norm().sqrt())
}

/// `q_k = v_k / sqrt(|v_k|)` with `v` from [`discrete_velocity`].
///
/// Fails with [`Error::VanishingVelocity`] when some `|v_k|` is below
/// [`Q_FLOOR`].
pub fn tsrv(c: &ManifoldCurve) -> Result<TsrvCurve> {
    let v = discrete_velocity(c)?;
    let mut values = Vec::with_capacity(v.len());
    for (segment, vk) in v.values().iter().enumerate() {
        let norm = vk.norm();
        if norm < Q_FLOOR {
            return Err(Error::VanishingVelocity { segment, norm });
        }
        values.push(srv(vk));
    }
    Ok(TsrvCurve {
        start: c.start().clone(),
        values,
        degenerate: Vec::new(),
    })
}

/// Like [`tsrv`], but vanishing velocities map to `q_k = 0` and are listed
/// in [`TsrvCurve::degenerate`].
pub fn tsrv_lenient(c: &ManifoldCurve) -> Result<TsrvCurve> {
    let v = discrete_velocity(c)?;
    let mut degenerate = Vec::new();
    let values = v
        .values()
        .iter()
        .enumerate()
        .map(|(k, vk)| {
            if vk.norm() < Q_FLOOR {
                degenerate.push(k);
                AlgebraElement::zero(c.dim())
            } else {
                srv(vk)
            }
        })
        .collect();
    Ok(TsrvCurve {
        start: c.start().clone(),
        values,
        degenerate,
    })
}

/// Integrates `x_{k+1} = exp(q_k |q_k| / N) x_k` from the start point.
pub fn tsrv_inverse(q: &TsrvCurve) -> ManifoldCurve {
    let n = q.segments() as f64;
    let mut points = Vec::with_capacity(q.segments() + 1);
    points.push(q.start.clone());
    for qk in &q.values {
        let step = exp_group(&qk.scale(qk.norm() / n));
        let next = step.compose(points.last().expect("nonempty"));
        points.push(next);
    }
    ManifoldCurve::from_points_unchecked(points, false)
}

/// The curve at `s` on the shortest path from `c0` to `c1`: the inverse
/// transform of `(1 - s) q0 + s q1`, started on the geodesic between the
/// two start points.
///
/// Segments where the interpolated velocity vanishes contribute no motion.
pub fn geodesic_between(c0: &ManifoldCurve, c1: &ManifoldCurve, s: f64) -> Result<ManifoldCurve> {
    check_same_grid(c0.segments(), c1.segments())?;
    check_same_dim(c0.dim(), c1.dim())?;
    let q0 = tsrv_lenient(c0)?;
    let q1 = tsrv_lenient(c1)?;
    let mut q = q0.interpolate(&q1, s)?;
    q.start = geodesic(c0.start(), c1.start(), s)?;
    Ok(tsrv_inverse(&q).with_closed(c0.is_closed() && c1.is_closed()))
}

/// `steps + 1` curves evenly spaced along [`geodesic_between`].
pub fn geodesic_path(
    c0: &ManifoldCurve,
    c1: &ManifoldCurve,
    steps: usize,
) -> Result<Vec<ManifoldCurve>> {
    if steps == 0 {
        return Err(Error::InvalidArgument(
            "path needs at least one step".into(),
        ));
    }
    (0..=steps)
        .map(|i| geodesic_between(c0, c1, i as f64 / steps as f64))
        .collect()
}

/// `sqrt((1/N) sum_k |q0_k - q1_k|^2)`, the distance with `phi` fixed to
/// the identity. Start points are not compared.
pub fn curve_distance(c0: &ManifoldCurve, c1: &ManifoldCurve) -> Result<f64> {
    check_same_grid(c0.segments(), c1.segments())?;
    check_same_dim(c0.dim(), c1.dim())?;
    tsrv_lenient(c0)?.l2_distance(&tsrv_lenient(c1)?)
}

/// An increasing piecewise-linear map of `[0, 1]` onto itself, stored by its
/// knots `(t, phi(t))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reparametrization {
    knots: Vec<(f64, f64)>,
}

impl Reparametrization {
    /// Knots must start at `(0, 0)`, end at `(1, 1)`, and increase strictly
    /// in `t` and weakly in `phi`.
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        let ok_ends =
            knots.len() >= 2 && knots[0] == (0.0, 0.0) && knots[knots.len() - 1] == (1.0, 1.0);
        let ok_order = knots
            .windows(2)
            .all(|w| w[1].0 > w[0].0 && w[1].1 >= w[0].1);
        if !ok_ends || !ok_order {
            return Err(Error::InvalidArgument(
                "reparametrization knots must increase from (0, 0) to (1, 1)".into(),
            ));
        }
        Ok(Reparametrization { knots })
    }

    pub fn identity() -> Self {
        Reparametrization {
            knots: vec![(0.0, 0.0), (1.0, 1.0)],
        }
    }

    /// Tabulates an increasing `f` with `f(0) = 0`, `f(1) = 1` at
    /// `pieces + 1` uniform knots. The end values are pinned exactly.
    pub fn from_fn(pieces: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if pieces == 0 {
            return Err(Error::InvalidArgument("need at least one piece".into()));
        }
        let knots = (0..=pieces)
            .map(|i| match i {
                0 => (0.0, 0.0),
                _ if i == pieces => (1.0, 1.0),
                _ => {
                    let t = i as f64 / pieces as f64;
                    (t, f(t))
                }
            })
            .collect();
        Self::new(knots)
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn eval(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        let i = self
            .knots
            .partition_point(|k| k.0 <= t)
            .clamp(1, self.knots.len() - 1);
        let (t0, p0) = self.knots[i - 1];
        let (t1, p1) = self.knots[i];
        p0 + (p1 - p0) * (t - t0) / (t1 - t0)
    }

    /// `phi(k / n)` for `k = 0..=n`.
    pub fn sample(&self, n: usize) -> Vec<f64> {
        (0..=n).map(|k| self.eval(k as f64 / n as f64)).collect()
    }
}

/// Square-root velocities as flat coordinate rows scaled so the Euclidean
/// norm matches the algebra norm.
///
/// As a function of `t`, `q` interpolates linearly between the segment
/// midpoints `(k + 1/2) / N` and is constant on the two outer half segments.
struct Flat {
    dim: usize,
    rows: Vec<f64>,
    n: usize,
}

impl Flat {
    fn new(q: &TsrvCurve) -> Self {
        let w = (2.0 * METRIC_SCALE).sqrt();
        let k = q.dim() * q.dim().saturating_sub(1) / 2;
        let mut rows = Vec::with_capacity(k * q.segments());
        for v in q.values() {
            rows.extend(v.coordinates().into_iter().map(|x| x * w));
        }
        Flat {
            dim: k,
            rows,
            n: q.segments(),
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    fn locate(&self, t: f64) -> (usize, f64) {
        locate(self.n, t)
    }

    /// Interior interpolation knots as lattice coordinates in `(lo, hi)`.
    fn knots_between(&self, grid: usize, lo: usize, hi: usize, out: &mut Vec<f64>) {
        // knot k sits at (2k + 1) grid / (2n)
        let (g, n) = (grid, self.n);
        let mut k = (lo * n / g).saturating_sub(1);
        while k + 1 < n && (2 * k + 1) * g < 2 * hi * n {
            if (2 * k + 1) * g > 2 * lo * n {
                out.push(((2 * k + 1) * g) as f64 / (2 * n) as f64);
            }
            k += 1;
        }
    }
}

/// `(k, w)` with `q(t) = (1 - w) q_k + w q_{k+1}` for a curve of `n`
/// segments, interpolating between segment midpoints.
#[inline]
fn locate(n: usize, t: f64) -> (usize, f64) {
    let x = t * n as f64 - 0.5;
    if x <= 0.0 || n == 1 {
        return (0, 0.0);
    }
    let last = n - 1;
    if x >= last as f64 {
        return (last - 1, 1.0);
    }
    let k = x as usize;
    (k, x - k as f64)
}

/// `|(1 - w0) x_k + w0 x_{k+1} - r ((1 - w1) y_m + w1 y_{m+1})|^2`.
#[inline]
fn gap_squared(q0: &Flat, (k, w0): (usize, f64), q1: &Flat, (m, w1): (usize, f64), r: f64) -> f64 {
    let x0 = q0.row(k);
    let x1 = if q0.n > 1 { q0.row(k + 1) } else { x0 };
    let y0 = q1.row(m);
    let y1 = if q1.n > 1 { q1.row(m + 1) } else { y0 };
    let mut d2 = 0.0;
    for c in 0..q0.dim {
        let x = x0[c] + w0 * (x1[c] - x0[c]);
        let y = y0[c] + w1 * (y1[c] - y0[c]);
        let d = x - r * y;
        d2 += d * d;
    }
    d2
}

/// Lattice alignment problem between two square-root velocity curves.
struct Lattice<'a> {
    q0: &'a Flat,
    q1: &'a Flat,
    grid: usize,
    max_step: usize,
    scratch: Vec<f64>,
}

impl<'a> Lattice<'a> {
    fn new(q0: &'a Flat, q1: &'a Flat, grid: usize, max_step: usize) -> Self {
        Lattice {
            q0,
            q1,
            grid,
            max_step,
            scratch: Vec::with_capacity(16),
        }
    }

    /// `int |q0(t) - sqrt(s) q1(phi(t))|^2 dt` over the lattice edge
    /// `(i, j) -> (i + a, j + b)`, with `s = b / a`.
    ///
    /// The integrand is quadratic between interpolation knots, so Simpson's
    /// rule on each piece is exact.
    fn edge(&mut self, i: usize, j: usize, a: usize, b: usize) -> f64 {
        let g = self.grid as f64;
        let (af, bf) = (a as f64, b as f64);
        let slope = bf / af;
        let root = slope.sqrt();
        let (lo, hi) = (i as f64, (i + a) as f64);

        let mut cuts = std::mem::take(&mut self.scratch);
        cuts.clear();
        cuts.push(lo);
        self.q0.knots_between(self.grid, i, i + a, &mut cuts);
        let from = cuts.len();
        self.q1.knots_between(self.grid, j, j + b, &mut cuts);
        for c in &mut cuts[from..] {
            *c = lo + (*c - j as f64) / slope;
        }
        cuts.push(hi);
        cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite cut"));

        let f = |t: f64| {
            let u = j as f64 + (t - lo) * slope;
            gap_squared(
                self.q0,
                self.q0.locate(t / g),
                self.q1,
                self.q1.locate(u / g),
                root,
            )
        };
        let mut total = 0.0;
        let mut left = f(lo);
        for w in cuts.windows(2) {
            let len = w[1] - w[0];
            if len <= 0.0 {
                continue;
            }
            let right = f(w[1]);
            total += len * (left + 4.0 * f(0.5 * (w[0] + w[1])) + right) / 6.0;
            left = right;
        }
        self.scratch = cuts;
        total / g
    }

    fn steps(&self) -> Vec<(usize, usize)> {
        step_set(self.max_step)
    }

    /// Minimal accumulated cost to `(grid, grid)` and the lattice path.
    fn solve(&mut self) -> (f64, Vec<(usize, usize)>) {
        let g = self.grid;
        let steps = self.steps();
        let idx = |i: usize, j: usize| i * (g + 1) + j;
        let mut cost = vec![f64::INFINITY; (g + 1) * (g + 1)];
        let mut pred = vec![(0usize, 0usize); (g + 1) * (g + 1)];
        cost[0] = 0.0;
        for i in 1..=g {
            for j in 1..=g {
                let mut best = f64::INFINITY;
                let mut from = (0, 0);
                for &(a, b) in &steps {
                    if a > i || b > j {
                        continue;
                    }
                    let prev = cost[idx(i - a, j - b)];
                    if !prev.is_finite() {
                        continue;
                    }
                    let c = prev + self.edge(i - a, j - b, a, b);
                    if c < best {
                        best = c;
                        from = (i - a, j - b);
                    }
                }
                cost[idx(i, j)] = best;
                pred[idx(i, j)] = from;
            }
        }
        let mut path = vec![(g, g)];
        let mut at = (g, g);
        while at != (0, 0) {
            at = pred[idx(at.0, at.1)];
            path.push(at);
        }
        path.reverse();
        (cost[idx(g, g)], path)
    }

    /// Minimum over every monotone lattice path, by depth-first enumeration.
    fn exhaustive(&mut self) -> f64 {
        let steps = self.steps();
        let mut best = f64::INFINITY;
        let mut stack = vec![(0usize, 0usize, 0.0f64)];
        while let Some((i, j, acc)) = stack.pop() {
            if (i, j) == (self.grid, self.grid) {
                if acc < best {
                    best = acc;
                }
                continue;
            }
            for &(a, b) in &steps {
                if i + a <= self.grid && j + b <= self.grid {
                    let c = acc + self.edge(i, j, a, b);
                    stack.push((i + a, j + b, c));
                }
            }
        }
        best
    }
}

/// Coprime steps `(a, b)` with `1 <= a, b <= max_step`, diagonal first.
///
/// A step with a common factor crosses lattice points that coprime steps
/// already reach, at the same cost.
fn step_set(max_step: usize) -> Vec<(usize, usize)> {
    let mut out = vec![(1, 1)];
    for a in 1..=max_step {
        for b in 1..=max_step {
            if (a, b) != (1, 1) && gcd(a, b) == 1 {
                out.push((a, b));
            }
        }
    }
    out
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn alignment_inputs(q0: &TsrvCurve, q1: &TsrvCurve, grid: usize) -> Result<(Flat, Flat)> {
    check_same_dim(q0.dim(), q1.dim())?;
    if q0.segments() == 0 || q1.segments() == 0 {
        return Err(Error::DegenerateCurve("curve has a single point".into()));
    }
    let need = q0.segments().max(q1.segments());
    if grid < need {
        return Err(Error::GridMismatch(format!(
            "grid {grid} is coarser than the {need} curve segments"
        )));
    }
    Ok((Flat::new(q0), Flat::new(q1)))
}

/// Best warp of `q1` onto `q0` over the lattice, with the achieved distance.
pub fn align_tsrv(q0: &TsrvCurve, q1: &TsrvCurve, grid: usize) -> Result<(f64, Reparametrization)> {
    align_tsrv_with(q0, q1, grid, MAX_STEP)
}

/// [`align_tsrv`] with an explicit step bound.
pub fn align_tsrv_with(
    q0: &TsrvCurve,
    q1: &TsrvCurve,
    grid: usize,
    max_step: usize,
) -> Result<(f64, Reparametrization)> {
    if max_step == 0 {
        return Err(Error::InvalidArgument("step bound must be positive".into()));
    }
    let (f0, f1) = alignment_inputs(q0, q1, grid)?;
    let (cost, path) = Lattice::new(&f0, &f1, grid, max_step).solve();
    let g = grid as f64;
    let knots = path
        .into_iter()
        .map(|(i, j)| (i as f64 / g, j as f64 / g))
        .collect();
    Ok((cost.max(0.0).sqrt(), Reparametrization { knots }))
}

/// Elastic shape distance and the minimizing warp, found by dynamic
/// programming on a `(grid + 1) x (grid + 1)` lattice with steps
/// `(a, b)`, `1 <= a, b <=` [`MAX_STEP`].
///
/// The returned warp `phi` aligns `c1` to `c0`: the minimized integrand is
/// `|q0(t) - q1(phi(t)) sqrt(phi'(t))|^2`, with each `q` interpolated
/// linearly between segment midpoints. On the diagonal path the integral is
/// at most `curve_distance^2`. The curves may have different numbers of
/// segments; `grid` must be at least the larger.
pub fn shape_distance(
    c0: &ManifoldCurve,
    c1: &ManifoldCurve,
    grid: usize,
) -> Result<(f64, Reparametrization)> {
    shape_distance_with(c0, c1, grid, MAX_STEP)
}

/// [`shape_distance`] with an explicit step bound.
pub fn shape_distance_with(
    c0: &ManifoldCurve,
    c1: &ManifoldCurve,
    grid: usize,
    max_step: usize,
) -> Result<(f64, Reparametrization)> {
    align_tsrv_with(&tsrv_lenient(c0)?, &tsrv_lenient(c1)?, grid, max_step)
}

/// The lattice minimum by enumerating every path. Exponential in `grid`;
/// a reference for [`shape_distance_with`] on small problems.
pub fn shape_distance_exhaustive(
    c0: &ManifoldCurve,
    c1: &ManifoldCurve,
    grid: usize,
    max_step: usize,
) -> Result<f64> {
    let (f0, f1) = alignment_inputs(&tsrv_lenient(c0)?, &tsrv_lenient(c1)?, grid)?;
    let cost = Lattice::new(&f0, &f1, grid, max_step).exhaustive();
    Ok(cost.max(0.0).sqrt())
}

/// The closed curve started at sample `shift` instead of sample 0, then
/// translated back to start at the identity.
pub fn cyclic_shift(c: &ManifoldCurve, shift: usize) -> Result<ManifoldCurve> {
    if !c.is_closed() {
        return Err(Error::NotClosed);
    }
    let c = crate::curves::close_curve(c)?;
    let n = c.segments();
    if n == 0 {
        return Ok(c);
    }
    let base = c.point(shift % n).transpose();
    let points = (0..=n)
        .map(|k| c.point((k + shift) % n).compose(&base))
        .collect();
    Ok(ManifoldCurve::from_points_unchecked(points, true))
}

/// Shape distance minimized also over the starting sample of `c1`.
pub fn closed_shape_distance(c0: &ManifoldCurve, c1: &ManifoldCurve, grid: usize) -> Result<f64> {
    closed_shape_distance_with(c0, c1, grid, MAX_STEP)
}

/// [`closed_shape_distance`] with an explicit step bound.
pub fn closed_shape_distance_with(
    c0: &ManifoldCurve,
    c1: &ManifoldCurve,
    grid: usize,
    max_step: usize,
) -> Result<f64> {
    if !c0.is_closed() || !c1.is_closed() {
        return Err(Error::NotClosed);
    }
    let c0 = crate::curves::close_curve(c0)?.translated_to_identity();
    let c1 = crate::curves::close_curve(c1)?;
    let shifts = c1.segments().max(1);
    let q0 = tsrv_lenient(&c0)?;
    let distances = (0..shifts)
        .into_par_iter()
        .map(|s| {
            let shifted = cyclic_shift(&c1, s)?;
            Ok(align_tsrv_with(&q0, &tsrv_lenient(&shifted)?, grid, max_step)?.0)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(distances.into_iter().fold(f64::INFINITY, f64::min))
}

/// The square-root velocities of `c o phi`, sampled on `segments` uniform
/// segments: on segment `k` with midpoint `t_k`, `q(phi(t_k)) sqrt(s_k)`
/// where `s_k` is the mean slope of `phi` over the segment and `q` is
/// interpolated linearly between its segment midpoints.
pub fn warp_tsrv(q: &TsrvCurve, phi: &Reparametrization, segments: usize) -> Result<TsrvCurve> {
    if segments == 0 || q.segments() == 0 {
        return Err(Error::DegenerateCurve("cannot warp an empty curve".into()));
    }
    let n = segments as f64;
    let values: Vec<AlgebraElement> = (0..segments)
        .map(|k| {
            let (t0, t1) = (k as f64 / n, (k + 1) as f64 / n);
            let slope = (phi.eval(t1) - phi.eval(t0)) * n;
            let (m, w) = locate(q.segments(), phi.eval(0.5 * (t0 + t1)));
            let mut v = q.values[m].scale(1.0 - w);
            if w > 0.0 {
                v = &v + &q.values[m + 1].scale(w);
            }
            v.scale(slope.max(0.0).sqrt())
        })
        .collect();
    let degenerate = flag_vanishing(&values);
    Ok(TsrvCurve {
        start: q.start.clone(),
        values,
        degenerate,
    })
}

/// Samples `c(phi(k / N))` on the piecewise geodesic through `c`.
pub fn reparametrize(c: &ManifoldCurve, phi: &Reparametrization) -> Result<ManifoldCurve> {
    let points = phi
        .sample(c.segments())
        .into_iter()
        .map(|t| piecewise_geodesic(c, t))
        .collect::<Result<Vec<_>>>()?;
    ManifoldCurve::new(points, c.is_closed())
}

/// Outcome of [`karcher_mean`].
#[derive(Debug, Clone)]
pub struct KarcherMean {
    pub curve: ManifoldCurve,
    pub iterations: usize,
    /// Distance between the last two mean square-root velocities.
    pub change: f64,
}

/// Fixed-point mean in the square-root velocity domain.
///
/// Starting from the plain average, each round aligns every curve to the
/// current mean with [`align_tsrv`], warps it by the optimal `phi`, and
/// averages again, until the mean moves less than [`MEAN_TOLERANCE`] or
/// `iters` rounds have run. The mean starts where the first curve starts.
/// `grid` and `max_step` configure the alignment as in [`shape_distance_with`].
pub fn karcher_mean(
    curves: &[ManifoldCurve],
    iters: usize,
    grid: usize,
    max_step: usize,
) -> Result<KarcherMean> {
    let Some(first) = curves.first() else {
        return Err(Error::InvalidArgument("mean of no curves".into()));
    };
    let n = first.segments();
    for c in curves {
        check_same_grid(n, c.segments())?;
        check_same_dim(first.dim(), c.dim())?;
    }
    let qs = curves
        .iter()
        .map(tsrv_lenient)
        .collect::<Result<Vec<_>>>()?;
    let average = |items: &[TsrvCurve]| -> TsrvCurve {
        let w = 1.0 / items.len() as f64;
        let values: Vec<AlgebraElement> = (0..n)
            .map(|k| {
                let sum = items
                    .iter()
                    .fold(DMatrix::zeros(first.dim(), first.dim()), |acc, q| {
                        acc + q.values[k].matrix()
                    });
                AlgebraElement::new(sum * w).expect("average of skew matrices")
            })
            .collect();
        let degenerate = flag_vanishing(&values);
        TsrvCurve {
            start: first.start().clone(),
            values,
            degenerate,
        }
    };
    let mut mean = average(&qs);
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    if n > 0 {
        while iterations < iters {
            iterations += 1;
            let warped = qs
                .par_iter()
                .map(|q| {
                    let (_, phi) = align_tsrv_with(&mean, q, grid, max_step)?;
                    warp_tsrv(q, &phi, n)
                })
                .collect::<Result<Vec<_>>>()?;
            let next = average(&warped);
            change = next.l2_distance(&mean)?;
            mean = next;
            if change < MEAN_TOLERANCE {
                break;
            }
        }
    }
    Ok(KarcherMean {
        curve: tsrv_inverse(&mean),
        iterations,
        change,
    })
}

/// Which distance [`distance_matrix`] computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    Curve,
    Shape,
    ClosedShape,
}

/// Symmetric matrix of pairwise distances; entry `(i, j)` for `i < j` is
/// computed from `(curves[i], curves[j])` and mirrored.
pub fn distance_matrix(
    curves: &[ManifoldCurve],
    kind: DistanceKind,
    grid: usize,
    max_step: usize,
) -> Result<Vec<Vec<f64>>> {
    let n = curves.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = (&curves[i], &curves[j]);
            match kind {
                DistanceKind::Curve => curve_distance(a, b),
                DistanceKind::Shape => Ok(shape_distance_with(a, b, grid, max_step)?.0),
                DistanceKind::ClosedShape => closed_shape_distance_with(a, b, grid, max_step),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut out = vec![vec![0.0; n]; n];
    for (&(i, j), d) in pairs.iter().zip(values) {
        out[i][j] = d;
        out[j][i] = d;
    }
    Ok(out)
}
