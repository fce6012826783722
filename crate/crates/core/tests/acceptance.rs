//! The ten acceptance criteria. Each prints one PASS/FAIL line with the
//! measured quantity and its wall time; the process fails if any criterion
//! does.

#![allow(clippy::needless_range_loop)]

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dilation_curves::corr::{
    estimate_ensemble_correlation, gen_pc_process, CorrelationMatrix, EstimateOptions,
};
use dilation_curves::curves::{from_dilation, spline_resample, ManifoldCurve};
use dilation_curves::dilation::{
    build_dilation_sequence, extract_schur_params, levinson, naimark_matrix, SchurParams,
};
use dilation_curves::liegroup::{
    distance, exp_group, log_group, orthonormal_basis, AlgebraElement, GroupElement,
};
use dilation_curves::shape::{
    curve_distance, distance_matrix, geodesic_between, shape_distance_exhaustive,
    shape_distance_with, tsrv, tsrv_inverse, DistanceKind, MAX_STEP,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_params(rng: &mut ChaCha8Rng, n: usize) -> SchurParams {
    let mut p = SchurParams::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            p.set(i, j, rng.random_range(-0.95..0.95)).unwrap();
        }
    }
    p
}

/// Correlations from partial correlations by the vine recursion
/// `r_ij = a' S^-1 b + rho sqrt((1 - a' S^-1 a)(1 - b' S^-1 b))`, where `S`
/// is the block strictly between `i` and `j`.
fn vine_correlation(p: &SchurParams) -> DMatrix<f64> {
    let n = p.n();
    let mut r = DMatrix::<f64>::identity(n, n);
    for lag in 1..n {
        for i in 0..n - lag {
            let j = i + lag;
            let rho = p.get(i, j).unwrap();
            let v = if lag == 1 {
                rho
            } else {
                let s = r.view((i + 1, i + 1), (lag - 1, lag - 1)).into_owned();
                let a = r.view((i + 1, i), (lag - 1, 1)).into_owned();
                let b = r.view((i + 1, j), (lag - 1, 1)).into_owned();
                let s_inv = s.try_inverse().unwrap();
                let ab = (a.transpose() * &s_inv * &b)[(0, 0)];
                let aa = (a.transpose() * &s_inv * &a)[(0, 0)];
                let bb = (b.transpose() * &s_inv * &b)[(0, 0)];
                ab + rho * ((1.0 - aa) * (1.0 - bb)).sqrt()
            };
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    r
}

fn random_param_sets() -> Vec<SchurParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..100)
        .map(|_| {
            let n = rng.random_range(2..=8);
            random_params(&mut rng, n)
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let mut vine_err: f64 = 0.0;
    let mut round_err: f64 = 0.0;
    let mut param_err: f64 = 0.0;
    for p in random_param_sets() {
        let r = p.to_correlation();
        vine_err = vine_err.max((r.as_matrix() - vine_correlation(&p)).amax());
        let back = extract_schur_params(&r).map_err(|e| e.to_string())?;
        round_err = round_err.max((back.to_correlation().as_matrix() - r.as_matrix()).amax());
        for (a, b) in back.entries().iter().zip(p.entries()) {
            param_err = param_err.max((a.2 - b.2).abs());
        }
    }
    check(
        vine_err < 1e-9 && round_err < 1e-9 && param_err < 1e-9,
        format!("matrix round trip {round_err:.1e}, vs vine recursion {vine_err:.1e}, parameters {param_err:.1e}"),
    )
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for p in random_param_sets() {
        let r = p.to_correlation();
        for dim in 2..=p.n() {
            let seq = build_dilation_sequence(&p, dim).map_err(|e| e.to_string())?;
            for i in 0..p.n() {
                for j in i + 1..p.n().min(i + dim) {
                    // e1' W_i ... W_{j-1} e1 by explicit matrix products
                    let mut prod = DMatrix::identity(dim, dim);
                    for w in &seq.matrices()[i..j] {
                        prod *= w;
                    }
                    worst = worst.max((prod[(0, 0)] - r.get(i, j)).abs());
                    checked += 1;
                }
            }
        }
    }
    check(
        worst < 1e-9,
        format!("{checked} entries, max error {worst:.1e}"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut spread, mut vs_naimark, mut power_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..50 {
        let dim = rng.random_range(2..=6);
        let n = dim + rng.random_range(1..=4);
        let parcors: Vec<f64> = (1..dim).map(|_| rng.random_range(-0.95..0.95)).collect();
        let r = SchurParams::stationary(&parcors, n)
            .unwrap()
            .to_correlation();
        let p = extract_schur_params(&r).map_err(|e| e.to_string())?;
        let seq = build_dilation_sequence(&p, dim).map_err(|e| e.to_string())?;
        let u = naimark_matrix(&parcors, dim).map_err(|e| e.to_string())?;
        let traj = seq.trajectory();
        for w in traj {
            spread = spread.max((w - &traj[0]).amax());
            vs_naimark = vs_naimark.max((w - &u).amax());
        }
        let mut power = DMatrix::identity(dim, dim);
        for k in 1..dim {
            power = &power * &u;
            power_err = power_err.max((power[(0, 0)] - r.get(0, k)).abs());
        }
    }
    check(
        spread < 1e-12 && vs_naimark < 1e-12 && power_err < 1e-9,
        format!("W spread {spread:.1e}, vs closed form {vs_naimark:.1e}, powers {power_err:.1e}"),
    )
}

fn criterion_4() -> Outcome {
    let mut worst: f64 = 0.0;
    for a in [0.3, 0.5, 0.8] {
        let n = 8;
        let row: Vec<f64> = (0..n).map(|k| f64::powi(a, k as i32)).collect();
        let lev = levinson(&row).map_err(|e| e.to_string())?;
        for (l, k) in lev.reflection.iter().enumerate() {
            let want = if l == 0 { a } else { 0.0 };
            worst = worst.max((k - want).abs());
        }
        let r = CorrelationMatrix::toeplitz(&row).map_err(|e| e.to_string())?;
        let p = extract_schur_params(&r).map_err(|e| e.to_string())?;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((p.get(i, j).unwrap() - lev.reflection[j - i - 1]).abs());
            }
        }
    }
    check(worst < 1e-9, format!("max deviation {worst:.1e}"))
}

fn spectral_angle(a: &AlgebraElement) -> f64 {
    a.matrix().singular_values().max()
}

/// `tr(ad_A ad_B)` from the matrices of `ad` on an orthonormal basis.
fn killing_trace(a: &AlgebraElement, b: &AlgebraElement) -> f64 {
    let basis = orthonormal_basis(a.dim());
    let ad = |x: &AlgebraElement| {
        let m = basis.len();
        DMatrix::from_fn(m, m, |r, c| {
            let e = basis[c].matrix();
            let image = x.matrix() * e - e * x.matrix();
            basis[r].matrix().dot(&image)
        })
    };
    (ad(a) * ad(b)).trace()
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let limit = std::f64::consts::PI - 1e-3;
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let dim = 2 + k % 5;
        let m = dim * (dim - 1) / 2;
        let coords: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = AlgebraElement::from_coordinates(dim, &coords);
        let angle = rng.random_range(0.0..limit);
        let a = a.scale(angle / spectral_angle(&a));
        let back = log_group(&exp_group(&a)).map_err(|e| e.to_string())?;
        worst = worst.max((back.matrix() - a.matrix()).amax());
    }
    let mut killing: f64 = 0.0;
    for dim in 3..=5 {
        let m = dim * (dim - 1) / 2;
        for _ in 0..20 {
            let a = AlgebraElement::from_coordinates(
                dim,
                &(0..m)
                    .map(|_| rng.random_range(-2.0..2.0))
                    .collect::<Vec<_>>(),
            );
            let b = AlgebraElement::from_coordinates(
                dim,
                &(0..m)
                    .map(|_| rng.random_range(-2.0..2.0))
                    .collect::<Vec<_>>(),
            );
            let want = -((dim - 2) as f64) * (a.matrix() * b.matrix().transpose()).trace();
            killing = killing.max((killing_trace(&a, &b) - want).abs());
        }
    }
    check(
        worst < 1e-9 && killing < 1e-9,
        format!("exp/log round trip {worst:.1e}, Killing identity {killing:.1e}"),
    )
}

fn random_rotation(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> GroupElement {
    let m = dim * (dim - 1) / 2;
    let coords: Vec<f64> = (0..m).map(|_| rng.random_range(-scale..scale)).collect();
    exp_group(&AlgebraElement::from_coordinates(dim, &coords))
}

fn spline_through_knots(rng: &mut ChaCha8Rng, knots: usize, segments: usize) -> ManifoldCurve {
    let points = (0..knots).map(|_| random_rotation(rng, 3, 1.0)).collect();
    let coarse = ManifoldCurve::new(points, false).unwrap();
    spline_resample(&coarse, segments).unwrap()
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let c = spline_through_knots(&mut rng, 5, 200);
        let back = tsrv_inverse(&tsrv(&c).map_err(|e| e.to_string())?);
        for (a, b) in c.points().iter().zip(back.points()) {
            worst = worst.max(distance(a, b).map_err(|e| e.to_string())?);
        }
    }
    check(
        worst < 1e-4,
        format!("max pointwise error {worst:.1e} over 10 curves"),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut second, mut ends): (f64, f64) = (0.0, 0.0);
    for _ in 0..5 {
        let c0 = spline_through_knots(&mut rng, 5, 50);
        let c1 = spline_through_knots(&mut rng, 5, 50);
        let steps = 10;
        let qs = (0..=steps)
            .map(|i| tsrv(&geodesic_between(&c0, &c1, i as f64 / steps as f64)?))
            .collect::<dilation_curves::Result<Vec<_>>>()
            .map_err(|e| e.to_string())?;
        for w in qs.windows(3) {
            for k in 0..w[0].segments() {
                let d = w[0].values()[k].matrix() - w[1].values()[k].matrix() * 2.0
                    + w[2].values()[k].matrix();
                second = second.max(d.amax());
            }
        }
        for (s, c) in [(0.0, &c0), (1.0, &c1)] {
            let g = geodesic_between(&c0, &c1, s).map_err(|e| e.to_string())?;
            for (a, b) in g.points().iter().zip(c.points()) {
                ends = ends.max(distance(a, b).map_err(|e| e.to_string())?);
            }
        }
    }
    check(
        second < 1e-12 && ends < 1e-6,
        format!("second difference {second:.1e}, endpoint error {ends:.1e}"),
    )
}

/// `exp(2t A) exp(3t^2 B)` sampled at `warp(k / n)`.
fn analytic_curve(n: usize, warp: impl Fn(f64) -> f64) -> ManifoldCurve {
    let a = AlgebraElement::from_coordinates(3, &[1.0, -2.0, 0.5]);
    let b = AlgebraElement::from_coordinates(3, &[0.3, 0.8, -1.5]);
    let points = (0..=n)
        .map(|k| {
            let t = warp(k as f64 / n as f64);
            exp_group(&a.scale(2.0 * t)).compose(&exp_group(&b.scale(3.0 * t * t)))
        })
        .collect();
    ManifoldCurve::new(points, false).unwrap()
}

fn criterion_8() -> Outcome {
    let c = analytic_curve(100, |t| t);
    let warps: [fn(f64) -> f64; 3] = [
        |t| t + 0.4 * t * (1.0 - t),
        |t| (t.exp() - 1.0) / (std::f64::consts::E - 1.0),
        |t| (t + t * t) / 2.0,
    ];
    let mut ratios = Vec::new();
    for warp in warps {
        let cw = analytic_curve(100, warp);
        let dc = curve_distance(&c, &cw).map_err(|e| e.to_string())?;
        let (ds, _) = shape_distance_with(&c, &cw, 200, MAX_STEP).map_err(|e| e.to_string())?;
        ratios.push(ds / dc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut mismatches = 0;
    let mut compared = 0;
    for n0 in 2..=8 {
        for n1 in [2, n0] {
            let c0 = ManifoldCurve::new(
                (0..=n0)
                    .map(|_| random_rotation(&mut rng, 3, 0.8))
                    .collect(),
                false,
            )
            .unwrap();
            let c1 = ManifoldCurve::new(
                (0..=n1)
                    .map(|_| random_rotation(&mut rng, 3, 0.8))
                    .collect(),
                false,
            )
            .unwrap();
            let grid = n0.max(n1);
            for step in [1, 3, MAX_STEP] {
                let (dp, _) =
                    shape_distance_with(&c0, &c1, grid, step).map_err(|e| e.to_string())?;
                let ex =
                    shape_distance_exhaustive(&c0, &c1, grid, step).map_err(|e| e.to_string())?;
                compared += 1;
                if dp != ex {
                    mismatches += 1;
                }
            }
        }
    }
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    check(
        worst < 0.05 && mismatches == 0,
        format!(
            "shape/curve ratios {:.3} {:.3} {:.3}; DP vs exhaustive {}/{} identical",
            ratios[0],
            ratios[1],
            ratios[2],
            compared - mismatches,
            compared
        ),
    )
}

fn planar(n: usize, theta: impl Fn(f64) -> f64) -> ManifoldCurve {
    let points = (0..=n)
        .map(|k| {
            exp_group(&AlgebraElement::from_coordinates(
                2,
                &[theta(k as f64 / n as f64)],
            ))
        })
        .collect();
    ManifoldCurve::new(points, false).unwrap()
}

/// Closed-form distance between planar curves given by angle samples:
/// `|q0 - q1|^2 = sqrt(2) (srv0 - srv1)^2` with `srv = sign(h) sqrt|h|`,
/// `h = N dtheta`.
fn flat_curve_distance(n: usize, t0: impl Fn(f64) -> f64, t1: impl Fn(f64) -> f64) -> f64 {
    let srv = |h: f64| h.signum() * h.abs().sqrt();
    let nf = n as f64;
    let sum: f64 = (0..n)
        .map(|k| {
            let (a, b) = (k as f64 / nf, (k + 1) as f64 / nf);
            let d = srv(nf * (t0(b) - t0(a))) - srv(nf * (t1(b) - t1(a)));
            std::f64::consts::SQRT_2 * d * d
        })
        .sum();
    (sum / nf).sqrt()
}

fn criterion_9() -> Outcome {
    let n = 100;
    let th0 = |t: f64| 2.0 * t + 0.2 * (2.0 * std::f64::consts::PI * t).sin();
    let th1 = |t: f64| 1.2 * t * t;
    let th2 = |t: f64| -0.8 * t + 0.5 * t * t * t;
    let c0 = planar(n, th0);
    let c1 = planar(n, th1);
    let c2 = planar(n, th2);
    let mut curve_err: f64 = 0.0;
    for (a, b, fa, fb) in [
        (
            &c0,
            &c1,
            &th0 as &dyn Fn(f64) -> f64,
            &th1 as &dyn Fn(f64) -> f64,
        ),
        (&c0, &c2, &th0, &th2),
        (&c1, &c2, &th1, &th2),
    ] {
        let got = curve_distance(a, b).map_err(|e| e.to_string())?;
        curve_err = curve_err.max((got - flat_curve_distance(n, fa, fb)).abs());
    }
    // increasing angle functions of total turn L: the elastic distance is
    // 2^(1/4) |sqrt(L0) - sqrt(L1)|
    let th3 = |t: f64| 1.2 * (t + t * t) / 2.0;
    let th4 = |t: f64| 0.5 * t + 0.5 * t * t * t;
    let mut rel: f64 = 0.0;
    let mut got = Vec::new();
    for (f, l) in [(&th3 as &dyn Fn(f64) -> f64, 1.2f64), (&th4, 1.0)] {
        let want = 2f64.powf(0.25) * (2f64.sqrt() - l.sqrt()).abs();
        let (d, _) =
            shape_distance_with(&c0, &planar(n, f), 200, MAX_STEP).map_err(|e| e.to_string())?;
        rel = rel.max((d - want).abs() / want);
        got.push(format!("{d:.5} vs {want:.5}"));
    }
    check(
        curve_err < 1e-6 && rel < 0.02,
        format!(
            "curve distance error {curve_err:.1e}, shape distances {} (worst {:.2}%)",
            got.join(", "),
            100.0 * rel
        ),
    )
}

fn process_curve(depth: f64, seed: u64) -> dilation_curves::Result<ManifoldCurve> {
    let set = gen_pc_process(0.5, 4, depth, 19, 4000, seed)?;
    let r = estimate_ensemble_correlation(&set, 19, EstimateOptions::default())?.matrix;
    let seq = build_dilation_sequence(&extract_schur_params(&r)?, 3)?;
    spline_resample(&from_dilation(&seq, false), 64)
}

fn criterion_10() -> Outcome {
    let mut curves = Vec::new();
    for s in 0..10 {
        curves.push(process_curve(0.5, 100 + s).map_err(|e| e.to_string())?);
    }
    for s in 0..10 {
        curves.push(process_curve(0.0, 200 + s).map_err(|e| e.to_string())?);
    }
    let d =
        distance_matrix(&curves, DistanceKind::Shape, 64, MAX_STEP).map_err(|e| e.to_string())?;
    let (mut within, mut nw, mut between, mut nb) = (0.0, 0, 0.0, 0);
    for i in 0..20 {
        for j in i + 1..20 {
            if (i < 10) == (j < 10) {
                within += d[i][j];
                nw += 1;
            } else {
                between += d[i][j];
                nb += 1;
            }
        }
    }
    let (within, between) = (within / nw as f64, between / nb as f64);
    check(
        between > within,
        format!(
            "between {between:.4}, within {within:.4}, margin {:.4}",
            between - within
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        (
            "SPD and Schur parameter round trip",
            criterion_1,
            Some(Duration::from_secs(5)),
        ),
        ("dilation reconstruction identity", criterion_2, None),
        ("Naimark consistency", criterion_3, None),
        ("Levinson equivalence", criterion_4, None),
        ("Lie group kernel", criterion_5, None),
        ("TSRV round trip", criterion_6, None),
        ("geodesic linearity", criterion_7, None),
        (
            "shape distance invariance",
            criterion_8,
            Some(Duration::from_secs(30)),
        ),
        ("flat case oracle", criterion_9, None),
        (
            "PC vs stationary discrimination",
            criterion_10,
            Some(Duration::from_secs(120)),
        ),
    ];
    let mut failed = 0;
    for (k, (name, run, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let over = budget.is_some_and(|b| elapsed > b);
        let (status, detail) = match outcome {
            Ok(d) if !over => ("PASS", d),
            Ok(d) => (
                "FAIL",
                format!("{d}; over the {:?} budget", budget.unwrap()),
            ),
            Err(d) => ("FAIL", d),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("{status} {:>2} {name}: {detail} [{:.2?}]", k + 1, elapsed);
    }
    if failed > 0 {
        println!("{failed} of 10 criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
