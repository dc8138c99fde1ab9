//! Sampled checks of the comparison geometry behind the certificates: the
//! Hessian comparison for `r = d(x, ·)`, the bound `½∇²(r²) ≥ (1 − Kr²)g`, the
//! scalar inequality `|1 − t·cot t| ≤ t²/2`, convexity of small balls and the
//! closed-form distance Hessian on the sphere.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{fd_hessian_fn, point_coords, SampleGrid};
use crate::manifold::{theta_cot_theta, ManifoldSpec, Point, SymBilinearForm, Vec3};

pub const CLOSED_FORM_TOL: f64 = 1e-8;

/// Number of grid points used as the base point `x` of pair checks.
pub const PAIR_CENTERS: usize = 8;

/// Samples closer than this to either end of the admissible radius range are skipped.
pub const RADIUS_GUARD: f64 = 1e-6;

/// The sphere identity is checked on `r ∈ [c·R, (π − c)·R]`: closer to the
/// center or its antipode the fourth derivative of `r` swamps the `h²` term.
pub const IDENTITY_BAND: f64 = 0.5;

/// Default tolerance for checks against a finite-difference oracle with step `h`.
pub fn fd_tol(h: f64) -> f64 {
    (10.0 * h * h).max(1e-6)
}

/// Where the most negative margin was attained.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sample {
    None,
    Pair { x: Vec<f64>, y: Vec<f64>, distance: f64 },
    Parameter { t: f64 },
    Geodesic { p: Vec<f64>, q: Vec<f64>, t: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub check: String,
    pub samples: usize,
    /// Most negative slack of the asserted inequality.
    pub min_margin: f64,
    pub worst: Sample,
    pub tol: f64,
    pub pass: bool,
    /// `error(h) / error(h/2)` for checks against finite differences.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence_ratio: Option<f64>,
}

impl ComparisonReport {
    fn new(check: &str, samples: usize, min_margin: f64, worst: Sample, tol: f64) -> Self {
        Self {
            check: check.to_string(),
            samples,
            min_margin,
            worst,
            tol,
            pass: min_margin >= -tol,
            convergence_ratio: None,
        }
    }
}

/// Deterministic argmin of `(margin, index)`.
fn worst_of<T>(items: Vec<(f64, T)>) -> Option<(f64, T)> {
    items.into_iter().fold(None, |best, (m, t)| match best {
        Some((bm, _)) if bm <= m => best,
        _ => Some((m, t)),
    })
}

/// Every `(x, y)` pair with `x` among `PAIR_CENTERS` evenly spaced grid
/// points, `y` in the grid and `lo < d(x, y) < hi`.
fn pairs(grid: &SampleGrid, lo: f64, hi: f64) -> Vec<(Point, Point, f64)> {
    let m = &grid.manifold;
    let n = grid.len();
    let k = PAIR_CENTERS.min(n);
    let mut out = Vec::new();
    for c in 0..k {
        let x = grid.points[c * n / k];
        for y in &grid.points {
            let r = m.distance(&x, y);
            if r > lo && r < hi {
                out.push((x, *y, r));
            }
        }
    }
    out
}

fn pair_sample(m: &ManifoldSpec, x: &Point, y: &Point, r: f64) -> Sample {
    Sample::Pair { x: point_coords(m, x), y: point_coords(m, y), distance: r }
}

/// `∇²r` at `y` for `r = d(x, ·)`, from the ambient chain rule applied to the
/// extrinsic distance formula (independent of the log map).
fn extrinsic_hessian_r(m: &ManifoldSpec, x: &Point, y: &Point) -> SymBilinearForm {
    let frame = m.frame(y);
    let ambient = match m {
        ManifoldSpec::Sphere { radius } => {
            // r = R·acos(u), u = ⟨x,y⟩/R², sin of the angle s = |x×y|/R²
            let r2 = radius * radius;
            let (xc, yc) = (x.coords(), y.coords());
            let u = xc.dot(yc) / r2;
            let s = xc.cross(yc).norm() / r2;
            let du = -radius / s;
            let d2u = -radius * u / (s * s * s);
            let grad_u = xc / r2;
            let grad = grad_u * du;
            let hess_amb = grad_u * grad_u.transpose() * d2u;
            let n = yc / *radius;
            let proj = Matrix3::identity() - n * n.transpose();
            proj * hess_amb * proj - proj * (grad.dot(yc) / r2)
        }
        _ => {
            let v: Vec3 = m.log_map(x, y).expect("inside injectivity radius").vector;
            let r = v.norm();
            let u = v / r;
            (Matrix3::identity() - u * u.transpose()) / r
        }
    };
    SymBilinearForm::from_ambient(frame, &ambient)
}

/// `∇²r − c_K(r)(g − dr⊗dr)` with `c_K(r) = √K·cot(√K r)` (`1/r` for `K = 0`),
/// for sampled pairs with `d(x, y) < min(π/√K, inj)`.
pub fn check_hessian_comparison(m: &ManifoldSpec, grid: &SampleGrid, tol: f64) -> ComparisonReport {
    let c = m.constants();
    let bound = if c.curvature > 0.0 { PI / c.curvature.sqrt() } else { f64::INFINITY }.min(c.injectivity_radius);
    let pairs = pairs(grid, RADIUS_GUARD, bound - RADIUS_GUARD);
    let margins: Vec<(f64, usize)> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (x, y, r))| {
            let lhs = extrinsic_hessian_r(m, x, y);
            let dr = m.distance_gradient(x, y).expect("away from center and cut locus");
            let coef = comparison_coefficient(c.curvature, *r);
            let g = m.metric_form(y);
            let rhs = g.sub(&m.tensor_square(&dr)).scale(coef);
            (lhs.sub(&rhs).min_eigenvalue(), i)
        })
        .collect();
    report_pairs(m, "hessian_comparison", &pairs, margins, tol)
}

/// `√K·cot(√K r)`, or `1/r` when `K = 0`.
pub fn comparison_coefficient(curvature: f64, r: f64) -> f64 {
    if curvature > 0.0 {
        theta_cot_theta(curvature.sqrt() * r) / r
    } else {
        1.0 / r
    }
}

fn report_pairs(
    m: &ManifoldSpec,
    check: &str,
    pairs: &[(Point, Point, f64)],
    margins: Vec<(f64, usize)>,
    tol: f64,
) -> ComparisonReport {
    match worst_of(margins) {
        Some((margin, i)) => {
            let (x, y, r) = &pairs[i];
            ComparisonReport::new(check, pairs.len(), margin, pair_sample(m, x, y, *r), tol)
        }
        None => ComparisonReport::new(check, 0, f64::INFINITY, Sample::None, tol),
    }
}

/// `½∇²(r²) − (1 − Kr²)g` for sampled pairs with `r < min(1/√K, inj)`.
pub fn check_half_square_bound(m: &ManifoldSpec, grid: &SampleGrid, tol: f64) -> ComparisonReport {
    let c = m.constants();
    let bound = if c.curvature > 0.0 { 1.0 / c.curvature.sqrt() } else { f64::INFINITY }.min(c.injectivity_radius);
    let pairs = pairs(grid, 0.0, bound - RADIUS_GUARD);
    let margins: Vec<(f64, usize)> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (x, y, r))| (half_square_slack(m, x, y, *r), i))
        .collect();
    report_pairs(m, "half_square_bound", &pairs, margins, tol)
}

fn half_square_slack(m: &ManifoldSpec, x: &Point, y: &Point, r: f64) -> f64 {
    let k = m.constants().curvature;
    let lhs = m.hessian_half_r2(x, y).expect("inside injectivity radius");
    let rhs = m.metric_form(y).scale(1.0 - k * r * r);
    lhs.sub(&rhs).min_eigenvalue()
}

/// Slack of the half-square bound along one geodesic from the pole.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlackProfile {
    pub radii: Vec<f64>,
    pub slack: Vec<f64>,
    pub nondecreasing: bool,
    pub nonincreasing: bool,
}

/// Samples the slack at `n` radii in `(0, min(1/√K, inj))` along the first frame axis at the pole.
pub fn half_square_slack_profile(m: &ManifoldSpec, n: usize) -> SlackProfile {
    let c = m.constants();
    let mut bound = if c.curvature > 0.0 { 1.0 / c.curvature.sqrt() } else { f64::INFINITY }.min(c.injectivity_radius);
    if !bound.is_finite() {
        bound = c.diameter;
    }
    let x = m.pole();
    let e = m.frame(&x).axes()[0];
    let radii: Vec<f64> = (1..=n).map(|i| bound * i as f64 / (n + 1) as f64).collect();
    let slack: Vec<f64> = radii.iter().map(|r| half_square_slack(m, &x, &m.exp_map(&x, &(e * *r)), *r)).collect();
    let nondecreasing = slack.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let nonincreasing = slack.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    SlackProfile { radii, slack, nondecreasing, nonincreasing }
}

/// `α(t) = t·cot t`, with `α(0) = 1`.
pub fn alpha(t: f64) -> f64 {
    theta_cot_theta(t)
}

/// `t²/2 − |1 − α(t)|` over `t_grid ⊂ [0, 1)`.
pub fn check_alpha_inequality(t_grid: &[f64], tol: f64) -> Result<ComparisonReport> {
    if let Some(t) = t_grid.iter().find(|t| !(0.0..1.0).contains(*t)) {
        return Err(Error::InvalidArgument(format!("t = {t} outside [0, 1)")));
    }
    let margins = t_grid.iter().map(|&t| (0.5 * t * t - (1.0 - alpha(t)).abs(), t)).collect();
    Ok(match worst_of(margins) {
        Some((m, t)) => ComparisonReport::new("alpha_inequality", t_grid.len(), m, Sample::Parameter { t }, tol),
        None => ComparisonReport::new("alpha_inequality", 0, f64::INFINITY, Sample::None, tol),
    })
}

/// `n` equally spaced parameters `0, 1/n, …, (n−1)/n`.
pub fn default_t_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / n as f64).collect()
}

/// Largest radius for which balls are guaranteed convex: `min(inj/2, π/(2√K))`.
pub fn convexity_radius_bound(m: &ManifoldSpec) -> f64 {
    let c = m.constants();
    let k = if c.curvature > 0.0 { PI / (2.0 * c.curvature.sqrt()) } else { f64::INFINITY };
    (0.5 * c.injectivity_radius).min(k)
}

/// Checks that minimizing geodesics between sampled points of `B(x, δ)` stay in
/// the ball. Refuses radii above [`convexity_radius_bound`].
pub fn check_convexity_radius(
    m: &ManifoldSpec,
    x: &Point,
    delta: f64,
    pair_samples: usize,
    seed: u64,
    tol: f64,
) -> Result<ComparisonReport> {
    let bound = convexity_radius_bound(m);
    if !(delta > 0.0 && delta <= bound) {
        return Err(Error::InvalidRadius { delta, bound });
    }
    Ok(probe_convexity(m, x, delta, pair_samples, seed, tol))
}

/// Geodesic parameters probed per pair.
const GEODESIC_STEPS: usize = 32;

/// [`check_convexity_radius`] without the radius precondition, for probing
/// balls that are too large.
pub fn probe_convexity(m: &ManifoldSpec, x: &Point, delta: f64, pair_samples: usize, seed: u64, tol: f64) -> ComparisonReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ball_point = |rng: &mut ChaCha8Rng| {
        // area-uniform in the flat case
        let r = delta * rng.gen::<f64>().sqrt();
        let dir = m.random_unit_tangent(x, rng);
        m.exp_map(x, &(dir.vector * r))
    };
    let pairs: Vec<(Point, Point)> = (0..pair_samples).map(|_| (ball_point(&mut rng), ball_point(&mut rng))).collect();
    let inj = m.constants().injectivity_radius;
    let margins: Vec<(f64, (usize, f64))> = pairs
        .par_iter()
        .enumerate()
        .filter_map(|(i, (p, q))| {
            if m.distance(p, q) >= inj * (1.0 - 1e-6) {
                return None;
            }
            let v = m.log_map(p, q).ok()?.vector;
            let mut best = (f64::INFINITY, 0.0);
            for k in 0..=GEODESIC_STEPS {
                let t = k as f64 / GEODESIC_STEPS as f64;
                let margin = delta - m.distance(x, &m.exp_map(p, &(v * t)));
                if margin < best.0 {
                    best = (margin, t);
                }
            }
            Some((best.0, (i, best.1)))
        })
        .collect();
    let samples = margins.len();
    match worst_of(margins) {
        Some((margin, (i, t))) => {
            let (p, q) = &pairs[i];
            let worst = Sample::Geodesic { p: point_coords(m, p), q: point_coords(m, q), t };
            ComparisonReport::new("convexity_radius", samples, margin, worst, tol)
        }
        None => ComparisonReport::new("convexity_radius", 0, f64::INFINITY, Sample::None, tol),
    }
}

/// Max entrywise error of the FD Hessians of `r` and `½r²` against the closed
/// forms over the sample band, at step `h`.
fn identity_error(m: &ManifoldSpec, pairs: &[(Point, Point, f64)], h: f64) -> Vec<(f64, usize)> {
    pairs
        .par_iter()
        .enumerate()
        .map(|(i, (x, y, _))| {
            let fd_r = fd_hessian_fn(m, |q| m.distance(x, q), y, h);
            let fd_half = fd_hessian_fn(m, |q| m.cost(x, q), y, h);
            let er = fd_r.max_abs_diff(&m.hessian_r(x, y).expect("inside band"));
            let eh = fd_half.max_abs_diff(&m.hessian_half_r2(x, y).expect("inside band"));
            (-er.max(eh), i)
        })
        .collect()
}

/// Compares the closed forms `∇²r = (1/R)cot(r/R)(g − dr⊗dr)` and
/// `½∇²(r²) = θcotθ·g + (1 − θcotθ)dr⊗dr` with FD Hessians on the sphere of
/// radius `radius`. The margin is minus the largest entrywise error.
pub fn check_sphere_identity(radius: f64, grid: &SampleGrid, h: f64, tol: f64) -> Result<ComparisonReport> {
    let m = ManifoldSpec::sphere(radius)?;
    if grid.manifold != m {
        return Err(Error::InvalidArgument("grid does not live on the requested sphere".into()));
    }
    let pairs = pairs(grid, IDENTITY_BAND * radius, (PI - IDENTITY_BAND) * radius);
    let coarse = worst_of(identity_error(&m, &pairs, h));
    let fine = worst_of(identity_error(&m, &pairs, 0.5 * h));
    let mut report = report_pairs(&m, "sphere_identity", &pairs, identity_error(&m, &pairs, h), tol);
    if let (Some((a, _)), Some((b, _))) = (coarse, fine) {
        report.convergence_ratio = Some(a / b);
    }
    Ok(report)
}
