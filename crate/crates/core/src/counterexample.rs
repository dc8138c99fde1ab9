//! A function on the unit sphere with `∇²f ≤ g` that is not c-concave.
//!
//! `f = f₁ + ε·f₂` where `f₁ = ρ(½d²(N, ·))` has `∇f₁(N) = 0`, `∇²f₁(N) = g`,
//! and `f₂ = a·u₁ − c·|u|³` in normal coordinates `u` at `N` (cut off radially)
//! has `∇f₂(N) = a·e₁`, `∇²f₂(N) = 0` and `∇²f₂ ≤ 0` near `N`. At `x = N` the
//! point `x* = exp_N(−∇f(N))` lies at distance `r* = ε·a`, and `∇²h(N)` for
//! `h = ½d²(x*, ·) − f` has the negative eigenvalue `r*·cot r* − 1`, so `N`
//! does not minimize `h`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cconcavity::{empirical_cconcavity, EmpiricalReport, ViolationWitness};
use crate::error::{Error, Result};
use crate::field::{point_coords, NormalCoordKind, RampProfile, SampleGrid, ScalarField};
use crate::manifold::{ManifoldSpec, Point, Vec3};

/// Smallest acceptable radius of the verified concavity neighbourhood of `f₂`.
pub const MIN_R0: f64 = 1e-2;

/// Radial steps and directions of the `r₀` scan.
const R0_STEPS: usize = 2000;
const R0_DIRECTIONS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleConfig {
    /// Coefficient `ε` of `f₂`.
    pub eps_mix: f64,
    /// Ramp knots of `f₁`.
    pub t0: f64,
    pub t1: f64,
    /// Linear coefficient of `f₂`.
    pub a: f64,
    /// Cubic coefficient of `f₂`.
    pub c: f64,
    /// `f₂` is cut off between these radii.
    pub taper_start: f64,
    pub cutoff: f64,
    /// Points of the global Hessian scan.
    pub scan_points: usize,
    /// Worst scan points refined by local search.
    pub refine: usize,
    /// Base points `x` of the argmin test: `N` plus this many points near it.
    pub x_points: usize,
    /// Radius of the disc around `N` holding the extra base points.
    pub x_radius: f64,
    /// Coarse candidates `y` of the argmin test.
    pub y_points: usize,
    pub seed: u64,
    /// Tolerance of the Hessian bound.
    pub hess_tol: f64,
    /// Tolerance of value comparisons; the witness must exceed ten times this.
    pub value_tol: f64,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        Self {
            eps_mix: 0.05,
            t0: 0.02,
            t1: 0.1,
            a: 4.0,
            c: 1.0,
            taper_start: 0.2,
            cutoff: 1.5,
            scan_points: 16_384,
            refine: 20,
            x_points: 64,
            x_radius: 0.1,
            y_points: 4096,
            seed: 0,
            hess_tol: 1e-8,
            value_tol: 1e-7,
        }
    }
}

impl CounterexampleConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.eps_mix >= 0.0 && self.eps_mix.is_finite()) {
            return bad(format!("eps_mix must be >= 0, got {}", self.eps_mix));
        }
        if !(self.c > 0.0 && self.c.is_finite()) || !(self.a != 0.0 && self.a.is_finite()) {
            return bad(format!("need a != 0 and c > 0, got a = {}, c = {}", self.a, self.c));
        }
        if !(0.0 < self.taper_start && self.taper_start < self.cutoff && self.cutoff < FRAC_PI_2) {
            return bad(format!(
                "need 0 < taper_start < cutoff < pi/2, got {}, {}",
                self.taper_start, self.cutoff
            ));
        }
        if self.scan_points == 0 || self.y_points == 0 {
            return bad("grid sizes must be positive".into());
        }
        RampProfile::smooth(self.t0, self.t1)?;
        Ok(())
    }

    /// Grid sizes divided by `factor` (at least 64 points each).
    pub fn shrunk(&self, factor: usize) -> Self {
        Self {
            scan_points: (self.scan_points / factor).max(64),
            x_points: (self.x_points / factor).max(8),
            y_points: (self.y_points / factor).max(64),
            ..self.clone()
        }
    }
}

fn sphere() -> ManifoldSpec {
    ManifoldSpec::unit_sphere()
}

/// `f₁ = ρ(½d²(N, ·))` on the unit sphere.
pub fn build_f1(t0: f64, t1: f64) -> Result<ScalarField> {
    let m = sphere();
    // keep the plateau well inside the injectivity radius
    let limit = 0.5 * (PI - 0.5).powi(2);
    if t1 >= limit {
        return Err(Error::InvalidRamp(format!("plateau t1 = {t1} must be below {limit}")));
    }
    ScalarField::dist_sq_potential(&m, &m.pole(), RampProfile::smooth(t0, t1)?)
}

/// `f₂` with the radius `r₀` up to which `∇²f₂ ≤ 0` was verified.
#[derive(Clone, Debug)]
pub struct F2 {
    pub field: ScalarField,
    pub r0: f64,
}

/// `f₂ = a·u₁ − c·|u|³` in normal coordinates at `N`, cut off between
/// `taper_start` and `cutoff`.
pub fn build_f2(a: f64, c: f64, taper_start: f64, cutoff: f64) -> Result<F2> {
    if !(c > 0.0) || a == 0.0 || !(cutoff < FRAC_PI_2) {
        return Err(Error::InvalidArgument(format!("need a != 0, c > 0, cutoff < pi/2; got {a}, {c}, {cutoff}")));
    }
    let m = sphere();
    let n = m.pole();
    let lin = ScalarField::normal_coord(&m, &n, NormalCoordKind::Linear { a }, taper_start, cutoff)?;
    let cub = ScalarField::normal_coord(&m, &n, NormalCoordKind::Cubic { c }, taper_start, cutoff)?;
    let field = ScalarField::sum(&m, &[(1.0, &lin), (1.0, &cub)])?;
    let r0 = concavity_radius(&field, cutoff)?;
    if r0 < MIN_R0 {
        return Err(Error::ConstructionFailed(format!(
            "hess f2 <= 0 only verified up to r0 = {r0} (need {MIN_R0}); increase c relative to a"
        )));
    }
    Ok(F2 { field, r0 })
}

/// Largest scanned radius `r₀` such that `λ_max(∇²f₂) ≤ 0` on every scanned
/// point with `r ≤ r₀`.
fn concavity_radius(f2: &ScalarField, cutoff: f64) -> Result<f64> {
    let m = f2.manifold();
    let n = m.pole();
    let frame = m.frame(&n);
    let first_bad = (1..=R0_STEPS)
        .into_par_iter()
        .map(|i| {
            let r = cutoff * i as f64 / R0_STEPS as f64;
            for k in 0..R0_DIRECTIONS {
                let phi = 2.0 * PI * k as f64 / R0_DIRECTIONS as f64;
                let v = frame.axes()[0] * phi.cos() + frame.axes()[1] * phi.sin();
                let y = m.exp_map(&n, &(v * r));
                if f2.hess(&y)?.max_eigenvalue() > 1e-12 {
                    return Ok(Some(i));
                }
            }
            Ok(None)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .min();
    Ok(match first_bad {
        Some(i) => cutoff * (i - 1) as f64 / R0_STEPS as f64,
        None => cutoff,
    })
}

/// Minimum over the scan of `λ_min(g − ∇²f)`, with its location.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HessianScan {
    pub samples: usize,
    pub refined: usize,
    pub min_margin: f64,
    pub worst_point: Vec<f64>,
    pub worst_distance_to_pole: f64,
}

fn margin_at(f: &ScalarField, y: &Point) -> Result<f64> {
    Ok(1.0 - f.hess(y)?.max_eigenvalue())
}

/// Pattern search minimizing the margin from `y`, starting with step `step`.
fn refine_margin(f: &ScalarField, mut y: Point, mut value: f64, mut step: f64) -> Result<(Point, f64)> {
    let m = f.manifold();
    while step > 1e-9 {
        let frame = m.frame(&y);
        let (e1, e2) = (frame.axes()[0], frame.axes()[1]);
        let mut improved = false;
        for v in [e1, -e1, e2, -e2, e1 + e2, e1 - e2, -e1 + e2, -e1 - e2] {
            let cand = m.exp_map(&y, &(v.normalize() * step));
            let mc = margin_at(f, &cand)?;
            if mc < value {
                y = cand;
                value = mc;
                improved = true;
                break;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok((y, value))
}

/// Grid scan of `λ_min(g − ∇²f)` on the unit sphere, refining the `refine` worst points.
pub fn scan_hessian_bound(f: &ScalarField, points: usize, refine: usize, seed: u64) -> Result<HessianScan> {
    let m = f.manifold();
    let grid = SampleGrid::uniform(m, points, seed);
    let margins: Vec<f64> = grid.points.par_iter().map(|y| margin_at(f, y)).collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..margins.len()).collect();
    order.sort_by(|&i, &j| margins[i].total_cmp(&margins[j]).then(i.cmp(&j)));
    order.truncate(refine);
    let mut starts: Vec<(Point, f64)> = order.iter().map(|&i| (grid.points[i], margins[i])).collect();
    // N is the equality point and always worth refining around
    let n = m.pole();
    starts.push((n, margin_at(f, &n)?));
    let refined: Vec<(Point, f64)> = starts
        .par_iter()
        .map(|(y, v)| refine_margin(f, *y, *v, grid.spacing))
        .collect::<Result<_>>()?;
    let mut best = (grid.points[order[0]], margins[order[0]]);
    for r in refined {
        if r.1 < best.1 {
            best = r;
        }
    }
    Ok(HessianScan {
        samples: grid.len(),
        refined: starts.len(),
        min_margin: best.1,
        worst_point: point_coords(m, &best.0),
        worst_distance_to_pole: m.distance(&n, &best.0),
    })
}

#[derive(Clone, Debug)]
pub struct Counterexample {
    pub config: CounterexampleConfig,
    pub field: ScalarField,
    pub f1: ScalarField,
    pub f2: F2,
    pub scan: HessianScan,
}

/// Builds `f = f₁ + eps_mix·f₂` and checks `∇²f ≤ g` on the configured scan.
pub fn build_counterexample(config: &CounterexampleConfig) -> Result<Counterexample> {
    config.validate()?;
    let m = sphere();
    let f1 = build_f1(config.t0, config.t1)?;
    let f2 = build_f2(config.a, config.c, config.taper_start, config.cutoff)?;
    let field = ScalarField::sum(&m, &[(1.0, &f1), (config.eps_mix, &f2.field)])?;
    let scan = scan_hessian_bound(&field, config.scan_points, config.refine, config.seed)?;
    if scan.min_margin < -config.hess_tol {
        return Err(Error::MixTooLarge { margin: scan.min_margin, distance: scan.worst_distance_to_pole });
    }
    Ok(Counterexample { config: config.clone(), field, f1, f2, scan })
}

/// `∇²h` at `N` for `h = ½d²(x*, ·) − f`, `x* = exp_N(−∇f(N))`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Mechanism {
    pub x_star: Vec<f64>,
    pub r_star: f64,
    pub hess_h_min_eigenvalue: f64,
    /// `r*·cot r* − 1`.
    pub predicted: f64,
    pub tangent_direction: Vec<f64>,
}

pub fn mechanism(f: &ScalarField) -> Result<Mechanism> {
    let m = f.manifold();
    let n = m.pole();
    let grad = f.grad(&n)?;
    let x_star = m.exp_map(&n, &(-grad.vector));
    let r_star = m.distance(&n, &x_star);
    let hess_h = m.hessian_half_r2(&x_star, &n)?.sub(&f.hess(&n)?);
    let (lambda, dir) = hess_h.min_eigenpair();
    Ok(Mechanism {
        x_star: point_coords(m, &x_star),
        r_star,
        hess_h_min_eigenvalue: lambda,
        predicted: crate::manifold::theta_cot_theta(r_star) - 1.0,
        tangent_direction: dir.as_slice().to_vec(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CounterexampleReport {
    pub config: CounterexampleConfig,
    pub grad_at_pole: Vec<f64>,
    pub hess_at_pole_eigenvalues: Vec<f64>,
    pub r0: f64,
    /// Clause (i): `∇²f ≤ g` on the refined scan.
    pub hessian_bound: HessianScan,
    pub hessian_bound_holds: bool,
    /// Clause (ii): the argmin test on base points near `N`.
    pub empirical: EmpiricalReport,
    pub witness_distance_to_pole: Option<f64>,
    /// `d(x, N) ≤ 3·eps_mix·|a|` for the witness.
    pub witness_local: Option<bool>,
    pub violation_found: bool,
    /// Clause (iii): `∇²h(N)` has a negative eigenvalue.
    pub mechanism: Mechanism,
    pub mechanism_holds: bool,
    pub pass: bool,
}

/// Base points for the argmin test: `N` and a Fibonacci cap of radius `radius` around it.
fn base_points(m: &ManifoldSpec, count: usize, radius: f64) -> SampleGrid {
    let n = m.pole();
    let frame = m.frame(&n);
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut points = vec![n];
    for i in 0..count {
        let r = radius * ((i as f64 + 0.5) / count as f64).sqrt();
        let phi = golden * i as f64;
        let v: Vec3 = frame.axes()[0] * phi.cos() + frame.axes()[1] * phi.sin();
        points.push(m.exp_map(&n, &(v * r)));
    }
    SampleGrid::from_points(m, points, radius / (count.max(1) as f64).sqrt())
}

/// Runs the argmin test and the mechanism check on a built counterexample.
/// Returns the report whether or not the clauses hold.
pub fn analyze(ce: &Counterexample) -> Result<CounterexampleReport> {
    let cfg = &ce.config;
    let f = &ce.field;
    let m = f.manifold();
    let n = m.pole();
    let xs = base_points(m, cfg.x_points, cfg.x_radius);
    let ys = SampleGrid::uniform(m, cfg.y_points, cfg.seed.wrapping_add(1));
    let empirical = empirical_cconcavity(f, &xs, &ys, cfg.value_tol)?;
    let witness_distance_to_pole = match &empirical.witness {
        Some(w) => Some(m.distance(&n, &m.point(&w.x)?)),
        None => None,
    };
    let violation_found = empirical.max_violation > 10.0 * cfg.value_tol;
    let mechanism = mechanism(f)?;
    let mechanism_holds = mechanism.hess_h_min_eigenvalue < 0.0;
    let hessian_bound_holds = ce.scan.min_margin >= -cfg.hess_tol;
    Ok(CounterexampleReport {
        config: cfg.clone(),
        grad_at_pole: f.grad(&n)?.vector.as_slice().to_vec(),
        hess_at_pole_eigenvalues: f.hess(&n)?.eigenvalues(),
        r0: ce.f2.r0,
        hessian_bound: ce.scan.clone(),
        hessian_bound_holds,
        witness_distance_to_pole,
        witness_local: witness_distance_to_pole.map(|d| d <= 3.0 * cfg.eps_mix * cfg.a.abs()),
        empirical,
        violation_found,
        mechanism,
        mechanism_holds,
        pass: hessian_bound_holds && violation_found && mechanism_holds,
    })
}

/// [`analyze`], failing with the first clause that does not hold.
pub fn verify_counterexample(ce: &Counterexample) -> Result<CounterexampleReport> {
    let report = analyze(ce)?;
    if !report.hessian_bound_holds {
        return Err(Error::VerificationFailed(format!(
            "(i) min eigenvalue of g - hess f is {}",
            report.hessian_bound.min_margin
        )));
    }
    if !report.violation_found {
        return Err(Error::VerificationFailed(format!(
            "(ii) largest argmin violation {} does not exceed {}",
            report.empirical.max_violation,
            10.0 * ce.config.value_tol
        )));
    }
    if !report.mechanism_holds {
        return Err(Error::VerificationFailed(format!(
            "(iii) hess h at N has min eigenvalue {}",
            report.mechanism.hess_h_min_eigenvalue
        )));
    }
    Ok(report)
}

/// One row of the plotting table: a point, `λ_min(g − ∇²f)` there and
/// `h(x) − h(y)` for the reference pair `(x, x*)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CsvRow {
    pub point: Vec<f64>,
    pub hess_margin: f64,
    pub h_violation: f64,
}

/// Rows over a grid of `points` samples. The reference pair is the witness if
/// there is one and `(N, exp_N(−∇f(N)))` otherwise.
pub fn csv_rows(f: &ScalarField, witness: Option<&ViolationWitness>, points: usize, seed: u64) -> Result<Vec<CsvRow>> {
    let m = f.manifold();
    let (x, x_star) = match witness {
        Some(w) => (m.point(&w.x)?, m.point(&w.x_star)?),
        None => {
            let n = m.pole();
            (n, m.exp_map(&n, &(-f.grad(&n)?.vector)))
        }
    };
    let hx = m.cost(&x_star, &x) - f.eval(&x);
    SampleGrid::uniform(m, points, seed)
        .points
        .par_iter()
        .map(|y| {
            Ok(CsvRow {
                point: point_coords(m, y),
                hess_margin: margin_at(f, y)?,
                h_violation: hx - (m.cost(&x_star, y) - f.eval(y)),
            })
        })
        .collect()
}

pub fn write_csv<W: Write>(rows: &[CsvRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "x,y,z,hess_margin,h_violation")?;
    for r in rows {
        writeln!(out, "{},{},{},{:e},{:e}", r.point[0], r.point[1], r.point[2], r.hess_margin, r.h_violation)?;
    }
    Ok(())
}
