//! Certificates for c-concavity of `f` with respect to `c = ½d²`, and the
//! direct argmin test: `f` is c-concave as soon as every `x` minimizes
//! `h = c(x*, ·) − f` for `x* = exp_x(−∇f(x))`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{point_coords, summarize, FieldSpec, FieldSummary, SampleGrid, ScalarField};
use crate::manifold::{ManifoldConstants, ManifoldSpec, Point};

/// Default tolerance for value comparisons.
pub const VALUE_TOL: f64 = 1e-7;

/// Relative slack when comparing `δ` with its budget, so that a gradient bound
/// of exactly `C*` still certifies after rounding.
const DELTA_REL_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    FailedDelta,
    FailedHessian,
}

/// Which certifier produced a certificate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hypotheses {
    /// `δ ≤ min(inj/2, 1/√K)` and `∇²f ≤ (1 − Kδ²)g`.
    Technical,
    /// `‖∇f‖∞ ≤ min(ε/(3K·diam), C*)` and `∇²f ≤ (1 − ε)g`.
    Main {
        epsilon: f64,
        #[serde(serialize_with = "crate::report::ser_f64")]
        c_star: f64,
        #[serde(serialize_with = "crate::report::ser_f64")]
        eps_bound: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridInfo {
    pub samples: usize,
    pub spacing: f64,
    pub seed: u64,
}

impl From<&SampleGrid> for GridInfo {
    fn from(g: &SampleGrid) -> Self {
        Self { samples: g.len(), spacing: g.spacing, seed: g.seed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub manifold: ManifoldSpec,
    pub field: FieldSpec,
    pub grid: GridInfo,
    pub constants: ManifoldConstants,
    pub hypotheses: Hypotheses,
    /// Certified upper bound on `‖∇f‖∞`.
    pub grad_bound: f64,
    pub delta: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub delta_budget: f64,
    /// Slack of the gradient hypothesis: `delta_budget − delta` for the
    /// technical variant, `min(C*, eps_bound) − grad_bound` for the main one.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub gradient_margin: f64,
    /// `min_y λ_min(κ·g − ∇²f(y))` over the grid, with `κ = 1 − Kδ²` or `1 − ε`.
    pub hess_margin: f64,
    /// Grid point where `∇²f` has its largest eigenvalue.
    pub hess_worst_point: Vec<f64>,
    pub tol: f64,
    pub verdict: Verdict,
}

impl Certificate {
    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }
}

/// `√(2·diam·G + G²)`.
pub fn delta_from_gradient(diameter: f64, grad_bound: f64) -> f64 {
    (2.0 * diameter * grad_bound + grad_bound * grad_bound).sqrt()
}

/// `δ` for `f`, from the certified bound on `‖∇f‖∞` over `grid`.
pub fn delta_of(f: &ScalarField, grid: &SampleGrid) -> Result<f64> {
    let g = summarize(f, grid)?.grad_bound();
    Ok(delta_from_gradient(f.manifold().constants().diameter, g))
}

/// `min(inj/2, 1/√K)`.
pub fn delta_budget(c: &ManifoldConstants) -> f64 {
    let k = if c.curvature > 0.0 { 1.0 / c.curvature.sqrt() } else { f64::INFINITY };
    (0.5 * c.injectivity_radius).min(k)
}

/// `(C*, eps_bound)` with `C*` the gradient bound at which `δ` reaches
/// `min(inj/2, 1/√K)` and `eps_bound = ε/(3K·diam)` (`∞` for `K = 0`).
pub fn admissible_gradient_bound(curvature: f64, inj: f64, diameter: f64, epsilon: f64) -> Result<(f64, f64)> {
    if !(inj > 0.0) || !(diameter > 0.0 && diameter.is_finite()) {
        return Err(Error::InvalidArgument(format!("need inj > 0 and finite diam > 0, got inj = {inj}, diam = {diameter}")));
    }
    if !(curvature >= 0.0 && curvature.is_finite()) {
        return Err(Error::InvalidArgument(format!("need finite K >= 0, got {curvature}")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("need epsilon > 0, got {epsilon}")));
    }
    let budget = delta_budget(&ManifoldConstants { curvature, injectivity_radius: inj, diameter });
    // positive root of t² + 2·diam·t − budget², without cancellation
    let c_star = if budget.is_finite() {
        budget * budget / (diameter + (diameter * diameter + budget * budget).sqrt())
    } else {
        f64::INFINITY
    };
    let eps_bound = if curvature > 0.0 { epsilon / (3.0 * curvature * diameter) } else { f64::INFINITY };
    Ok((c_star, eps_bound))
}

fn certificate(
    f: &ScalarField,
    grid: &SampleGrid,
    summary: &FieldSummary,
    hypotheses: Hypotheses,
    gradient_margin: f64,
    hess_level: f64,
    tol: f64,
) -> Certificate {
    let m = f.manifold();
    let constants = m.constants();
    let grad_bound = summary.grad_bound();
    let hess_margin = hess_level - summary.hess_eig_max;
    let verdict = if gradient_margin < 0.0 {
        Verdict::FailedDelta
    } else if hess_margin < -tol {
        Verdict::FailedHessian
    } else {
        Verdict::Certified
    };
    Certificate {
        manifold: m.clone(),
        field: f.spec().clone(),
        grid: grid.into(),
        constants,
        hypotheses,
        grad_bound,
        delta: delta_from_gradient(constants.diameter, grad_bound),
        delta_budget: delta_budget(&constants),
        gradient_margin,
        hess_margin,
        hess_worst_point: point_coords(m, &grid.points[summary.hess_eig_argmax]),
        tol,
        verdict,
    }
}

fn nonempty(grid: &SampleGrid) -> Result<()> {
    if grid.is_empty() {
        Err(Error::InvalidArgument("empty sample grid".into()))
    } else {
        Ok(())
    }
}

/// Checks `δ ≤ min(inj/2, 1/√K)` and `∇²f ≤ (1 − Kδ²)g` on `grid`.
pub fn certify_technical(f: &ScalarField, grid: &SampleGrid, tol: f64) -> Result<Certificate> {
    nonempty(grid)?;
    let summary = summarize(f, grid)?;
    Ok(technical_from_summary(f, grid, &summary, tol))
}

fn technical_from_summary(f: &ScalarField, grid: &SampleGrid, summary: &FieldSummary, tol: f64) -> Certificate {
    let c = f.manifold().constants();
    let delta = delta_from_gradient(c.diameter, summary.grad_bound());
    let budget = delta_budget(&c);
    let margin = if delta <= budget * (1.0 + DELTA_REL_SLACK) { (budget - delta).max(0.0) } else { budget - delta };
    certificate(f, grid, summary, Hypotheses::Technical, margin, 1.0 - c.curvature * delta * delta, tol)
}

/// Checks `‖∇f‖∞ ≤ min(ε/(3K·diam), C*)` and `∇²f ≤ (1 − ε)g` on `grid`.
///
/// A certificate issued here is re-derived with [`certify_technical`] on the
/// same samples; disagreement is reported as `VerificationFailed`.
pub fn certify_main(f: &ScalarField, epsilon: f64, grid: &SampleGrid, tol: f64) -> Result<Certificate> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    nonempty(grid)?;
    let c = f.manifold().constants();
    let (c_star, eps_bound) = admissible_gradient_bound(c.curvature, c.injectivity_radius, c.diameter, epsilon)?;
    let summary = summarize(f, grid)?;
    let margin = c_star.min(eps_bound) - summary.grad_bound();
    let cert = certificate(f, grid, &summary, Hypotheses::Main { epsilon, c_star, eps_bound }, margin, 1.0 - epsilon, tol);
    if cert.is_certified() {
        let technical = technical_from_summary(f, grid, &summary, tol);
        if !technical.is_certified() {
            return Err(Error::VerificationFailed(format!(
                "main hypotheses hold but the technical ones do not ({:?})",
                technical.verdict
            )));
        }
    }
    Ok(cert)
}

/// A point `x` that does not minimize `h = ½d²(x*, ·) − f`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ViolationWitness {
    pub x: Vec<f64>,
    pub x_star: Vec<f64>,
    pub y: Vec<f64>,
    /// `h(x) − h(y)`.
    pub violation: f64,
}

impl ViolationWitness {
    /// `h(x) − h(y)` from fresh field evaluations at the stored points.
    pub fn recompute(&self, f: &ScalarField) -> Result<f64> {
        let m = f.manifold();
        let (x, xs, y) = (m.point(&self.x)?, m.point(&self.x_star)?, m.point(&self.y)?);
        Ok(m.cost(&xs, &x) - f.eval(&x) - (m.cost(&xs, &y) - f.eval(&y)))
    }
}

/// Smallness of `f` relative to the manifold, deciding whether a failed
/// argmin test also rules out c-concavity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Regime {
    pub oscillation: f64,
    pub grad_bound: f64,
    /// `osc(f) + ½‖∇f‖∞²`.
    pub size: f64,
    /// `½·min(inj/2, π/(2√K))²`.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub threshold: f64,
    pub small: bool,
}

pub fn regime(f: &ScalarField, grid: &SampleGrid) -> Result<Regime> {
    Ok(regime_from_summary(&f.manifold().constants(), &summarize(f, grid)?))
}

fn regime_from_summary(c: &ManifoldConstants, s: &FieldSummary) -> Regime {
    let k = if c.curvature > 0.0 { PI / (2.0 * c.curvature.sqrt()) } else { f64::INFINITY };
    let r = (0.5 * c.injectivity_radius).min(k);
    let oscillation = s.oscillation_bound();
    let grad_bound = s.grad_bound();
    let size = oscillation + 0.5 * grad_bound * grad_bound;
    let threshold = 0.5 * r * r;
    Regime { oscillation, grad_bound, size, threshold, small: size <= threshold }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalReport {
    pub x_samples: usize,
    pub y_grid: GridInfo,
    pub tol: f64,
    /// Largest `h(x) − min_y h(y)` found, over all `x`.
    pub max_violation: f64,
    pub pass: bool,
    pub witness: Option<ViolationWitness>,
    pub regime: Regime,
}

/// Descent iterations per refinement start.
const DESCENT_ITERS: usize = 2000;
/// Armijo halvings per step.
const BACKTRACKS: usize = 40;

/// Minimizes `h` from `y0` by Riemannian gradient descent with backtracking.
fn descend(f: &ScalarField, x_star: &Point, y0: Point, h0: f64) -> (Point, f64) {
    let m = f.manifold();
    let h = |y: &Point| m.cost(x_star, y) - f.eval(y);
    let (mut y, mut hy) = (y0, h0);
    let max_step = PI * m.length_scale();
    let mut step: f64 = 1.0;
    for _ in 0..DESCENT_ITERS {
        let Ok(log) = m.log_map(&y, x_star) else { break };
        let Ok(grad_f) = f.grad(&y) else { break };
        let grad = -log.vector - grad_f.vector;
        let g2 = grad.norm_squared();
        if g2 < 1e-24 {
            break;
        }
        let mut accepted = false;
        step = (2.0 * step).min(max_step);
        for _ in 0..BACKTRACKS {
            let cand = m.exp_map(&y, &(grad * -step));
            let hc = h(&cand);
            if hc <= hy - 1e-4 * step * g2 {
                y = cand;
                hy = hc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (y, hy)
}

/// Worst violation `h(x) − h(y)` found for a single `x`, or `None` if `h(x)`
/// is the smallest value seen.
fn worst_for_x(f: &ScalarField, x: &Point, y_grid: &SampleGrid) -> Result<Option<ViolationWitness>> {
    let m = f.manifold();
    let grad = f.grad(x)?;
    let inj = m.constants().injectivity_radius;
    if grad.norm() >= inj {
        return Err(Error::CutLocus { distance: grad.norm(), inj });
    }
    let x_star = m.exp_map(x, &(-grad.vector));
    let h = |y: &Point| m.cost(&x_star, y) - f.eval(y);
    let hx = h(x);

    let mut best = (hx, *x);
    for y in &y_grid.points {
        let hy = h(y);
        if hy < best.0 {
            best = (hy, *y);
        }
    }
    let mut starts = vec![best.1];
    // second-order violations: leave x along the most negative direction of ∇²h
    if let (Ok(hc), Ok(hf)) = (m.hessian_half_r2(&x_star, x), f.hess(x)) {
        let (lambda, e) = hc.sub(&hf).min_eigenpair();
        if lambda < 0.0 {
            let s = 1e-3 * m.length_scale();
            starts.push(m.exp_map(x, &(e * s)));
            starts.push(m.exp_map(x, &(e * -s)));
        }
    }
    for y0 in starts {
        let (y, hy) = descend(f, &x_star, y0, h(&y0));
        if hy < best.0 {
            best = (hy, y);
        }
    }
    if best.0 < hx {
        Ok(Some(ViolationWitness {
            x: point_coords(m, x),
            x_star: point_coords(m, &x_star),
            y: point_coords(m, &best.1),
            violation: hx - best.0,
        }))
    } else {
        Ok(None)
    }
}

/// Tests, for every `x` in `x_grid`, whether `x` minimizes
/// `h = ½d²(x*, ·) − f` with `x* = exp_x(−∇f(x))`, searching `y_grid` and then
/// refining by descent. All values are exact evaluations, so a witness with
/// `violation > tol` is a genuine violation; a pass only covers what was sampled.
pub fn empirical_cconcavity(
    f: &ScalarField,
    x_grid: &SampleGrid,
    y_grid: &SampleGrid,
    tol: f64,
) -> Result<EmpiricalReport> {
    let witnesses: Vec<Option<ViolationWitness>> =
        x_grid.points.par_iter().map(|x| worst_for_x(f, x, y_grid)).collect::<Result<_>>()?;
    let mut worst: Option<ViolationWitness> = None;
    for w in witnesses.into_iter().flatten() {
        if worst.as_ref().is_none_or(|b| w.violation > b.violation) {
            worst = Some(w);
        }
    }
    let max_violation = worst.as_ref().map_or(0.0, |w| w.violation);
    let pass = max_violation <= tol;
    let summary = summarize(f, y_grid)?;
    Ok(EmpiricalReport {
        x_samples: x_grid.len(),
        y_grid: y_grid.into(),
        tol,
        max_violation,
        pass,
        witness: if pass { None } else { worst },
        regime: regime_from_summary(&f.manifold().constants(), &summary),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClaimReport {
    pub margin: f64,
    pub samples: usize,
    pub pass: bool,
}

impl ClaimReport {
    fn new(margin: f64, samples: usize, tol: f64) -> Self {
        Self { margin, samples, pass: margin >= -tol }
    }
}

/// The three steps showing that `x` minimizes `h` when the technical
/// hypotheses hold: `h(y) ≥ h(x)` outside `B(x*, δ)`, `∇h(x) = 0`, and `h`
/// convex on `B(x*, δ)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThreeClaims {
    pub x: Vec<f64>,
    pub x_star: Vec<f64>,
    pub delta: f64,
    /// `min (h(y) − h(x))` over samples with `d(x*, y) ≥ δ`.
    pub far: ClaimReport,
    /// `−|γ'(1) − ∇f(x)|` for the geodesic `γ` from `x*` to `x`.
    pub critical: ClaimReport,
    /// `min λ_min(∇²h)` over samples in `B(x*, δ)`, including `x`.
    pub convex: ClaimReport,
    /// `½δ² − diam·‖∇f‖∞ − ½‖∇f‖∞²`, the lower bound for `h(y) − h(x)` off the ball.
    pub far_lower_bound: f64,
    pub pass: bool,
}

pub fn check_three_claims(f: &ScalarField, x: &Point, grid: &SampleGrid, tol: f64) -> Result<ThreeClaims> {
    nonempty(grid)?;
    let m = f.manifold();
    let c = m.constants();
    let grad = f.grad(x)?;
    let x_star = m.exp_map(x, &(-grad.vector));
    let d = m.distance(x, &x_star);
    if grad.norm() >= c.injectivity_radius * (1.0 - crate::manifold::CUT_LOCUS_TOL) {
        return Err(Error::CutLocus { distance: grad.norm(), inj: c.injectivity_radius });
    }
    let g_inf = summarize(f, grid)?.grad_bound();
    let delta = delta_from_gradient(c.diameter, g_inf);
    let h = |y: &Point| m.cost(&x_star, y) - f.eval(y);
    let hx = h(x);

    let far: Vec<f64> = grid.points.iter().filter(|y| m.distance(&x_star, y) >= delta).map(|y| h(y) - hx).collect();
    let far = ClaimReport::new(far.iter().copied().fold(f64::INFINITY, f64::min), far.len(), tol);

    // γ(t) = exp_{x*}(t·log_{x*} x) has velocity −log_x(x*) at t = 1
    let velocity = if d > 0.0 { -m.log_map(x, &x_star)?.vector } else { grad.vector * 0.0 };
    let critical = ClaimReport::new(-(velocity - grad.vector).norm(), 1, tol);

    let hess_h = |y: &Point| -> Result<f64> { Ok(m.hessian_half_r2(&x_star, y)?.sub(&f.hess(y)?).min_eigenvalue()) };
    let mut convex_min = hess_h(x)?;
    let mut convex_n = 1;
    for y in grid.within(&x_star, delta) {
        convex_min = convex_min.min(hess_h(y)?);
        convex_n += 1;
    }
    let convex = ClaimReport::new(convex_min, convex_n, tol);

    let far_lower_bound = 0.5 * delta * delta - c.diameter * g_inf - 0.5 * g_inf * g_inf;
    let pass = far.pass && critical.pass && convex.pass;
    Ok(ThreeClaims {
        x: point_coords(m, x),
        x_star: point_coords(m, &x_star),
        delta,
        far,
        critical,
        convex,
        far_lower_bound,
        pass,
    })
}
