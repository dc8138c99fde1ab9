//! Closed-form Riemannian geometry on three model manifolds: the round
//! sphere of radius `R`, a Euclidean box, and the flat square torus.
//!
//! Points are stored as ambient 3-vectors. On the sphere they are renormalised
//! to radius `R` after every operation; on the torus they are reduced modulo the
//! period; the unused third coordinate of 2-dimensional flat spaces is zero.
//!
//! | manifold  | K     | inj  | diam        |
//! |-----------|-------|------|-------------|
//! | sphere R  | 1/R²  | πR   | πR          |
//! | torus L   | 0     | L/2  | L·√2/2      |
//! | box       | 0     | ∞    | box diagonal|

mod form;

pub use form::{OrthonormalFrame, SymBilinearForm};

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Relative distance to the injectivity radius at which log is refused.
pub const CUT_LOCUS_TOL: f64 = 1e-9;

/// Below this distance the second-order expansion of `½∇²(r²)` is exactly `g`.
pub const SMALL_RADIUS: f64 = 1e-7;

/// Descriptor of a model manifold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifoldSpec {
    Sphere { radius: f64 },
    /// Flat `R^dim`. The box bounds only define `diam` and where to sample.
    Euclidean { dim: usize, lower: Vec<f64>, upper: Vec<f64> },
    /// The square torus `R²/(L·Z²)`.
    FlatTorus { period: f64 },
}

/// Global constants entering the certification bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ManifoldConstants {
    /// Supremum of the positive part of the sectional curvature.
    pub curvature: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub injectivity_radius: f64,
    pub diameter: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    coords: Vec3,
}

impl Point {
    pub fn coords(&self) -> &Vec3 {
        &self.coords
    }

    pub(crate) fn raw(coords: Vec3) -> Self {
        Self { coords }
    }
}

/// A tangent vector in ambient coordinates. On the sphere it is orthogonal to
/// the base point's position vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentVector {
    pub base: Point,
    pub vector: Vec3,
}

impl TangentVector {
    pub fn new(base: Point, vector: Vec3) -> Self {
        Self { base, vector }
    }

    pub fn zero(base: Point) -> Self {
        Self { base, vector: Vec3::zeros() }
    }

    pub fn norm(&self) -> f64 {
        self.vector.norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { base: self.base, vector: self.vector * s }
    }
}

fn wrap(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Representative of `x` in `[-L/2, L/2)`.
fn wrap_centered(x: f64, period: f64) -> f64 {
    let half = 0.5 * period;
    (x + half).rem_euclid(period) - half
}

/// `θ·cot θ`, with its Taylor expansion near zero.
pub fn theta_cot_theta(theta: f64) -> f64 {
    if theta.abs() < 1e-4 {
        let t2 = theta * theta;
        1.0 - t2 / 3.0 - t2 * t2 / 45.0
    } else {
        theta * theta.cos() / theta.sin()
    }
}

impl ManifoldSpec {
    pub fn sphere(radius: f64) -> Result<Self> {
        let m = Self::Sphere { radius };
        m.validate()?;
        Ok(m)
    }

    pub fn unit_sphere() -> Self {
        Self::Sphere { radius: 1.0 }
    }

    pub fn flat_torus(period: f64) -> Result<Self> {
        let m = Self::FlatTorus { period };
        m.validate()?;
        Ok(m)
    }

    pub fn euclidean_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let m = Self::Euclidean { dim: lower.len(), lower, upper };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Sphere { radius } if !(radius.is_finite() && *radius > 0.0) => {
                Err(Error::InvalidArgument(format!("sphere radius must be positive, got {radius}")))
            }
            Self::FlatTorus { period } if !(period.is_finite() && *period > 0.0) => {
                Err(Error::InvalidArgument(format!("torus period must be positive, got {period}")))
            }
            Self::Euclidean { dim, lower, upper } => {
                if !(2..=3).contains(dim) || lower.len() != *dim || upper.len() != *dim {
                    return Err(Error::InvalidArgument(format!(
                        "euclidean box needs dim 2 or 3 with matching bounds, got dim {dim}"
                    )));
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u)) {
                    return Err(Error::InvalidArgument("euclidean box bounds must satisfy lower < upper".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn constants(&self) -> ManifoldConstants {
        match self {
            Self::Sphere { radius } => ManifoldConstants {
                curvature: 1.0 / (radius * radius),
                injectivity_radius: PI * radius,
                diameter: PI * radius,
            },
            Self::FlatTorus { period } => ManifoldConstants {
                curvature: 0.0,
                injectivity_radius: 0.5 * period,
                diameter: period * std::f64::consts::SQRT_2 / 2.0,
            },
            Self::Euclidean { lower, upper, .. } => ManifoldConstants {
                curvature: 0.0,
                injectivity_radius: f64::INFINITY,
                diameter: lower.iter().zip(upper).map(|(l, u)| (u - l) * (u - l)).sum::<f64>().sqrt(),
            },
        }
    }

    /// Intrinsic dimension.
    pub fn dim(&self) -> usize {
        match self {
            Self::Sphere { .. } | Self::FlatTorus { .. } => 2,
            Self::Euclidean { dim, .. } => *dim,
        }
    }

    /// Number of meaningful ambient coordinates.
    pub fn ambient_dim(&self) -> usize {
        match self {
            Self::Sphere { .. } => 3,
            _ => self.dim(),
        }
    }

    /// Builds a point from coordinates: sphere inputs are projected radially,
    /// torus inputs reduced modulo the period.
    pub fn point(&self, coords: &[f64]) -> Result<Point> {
        if coords.len() != self.ambient_dim() {
            return Err(Error::SizeMismatch { left: coords.len(), right: self.ambient_dim() });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("point coordinates must be finite".into()));
        }
        let mut v = Vec3::zeros();
        v.as_mut_slice()[..coords.len()].copy_from_slice(coords);
        match self {
            Self::Sphere { radius } => {
                let n = v.norm();
                if n == 0.0 {
                    return Err(Error::InvalidArgument("the origin is not a sphere point".into()));
                }
                Ok(Point::raw(v * (radius / n)))
            }
            Self::FlatTorus { period } => Ok(Point::raw(Vec3::new(wrap(v.x, *period), wrap(v.y, *period), 0.0))),
            Self::Euclidean { .. } => Ok(Point::raw(v)),
        }
    }

    /// North pole `(0,0,R)` on the sphere, the origin elsewhere.
    pub fn pole(&self) -> Point {
        match self {
            Self::Sphere { radius } => Point::raw(Vec3::new(0.0, 0.0, *radius)),
            _ => Point::raw(Vec3::zeros()),
        }
    }

    /// Whether `p` satisfies this manifold's representation invariants.
    pub fn contains(&self, p: &Point) -> bool {
        match self {
            Self::Sphere { radius } => ((p.coords.norm() - radius) / radius).abs() <= 1e-12,
            Self::FlatTorus { period } => {
                p.coords.z == 0.0 && (0.0..*period).contains(&p.coords.x) && (0.0..*period).contains(&p.coords.y)
            }
            Self::Euclidean { dim, .. } => p.coords.iter().skip(*dim).all(|c| *c == 0.0),
        }
    }

    fn normalize(&self, v: Vec3) -> Point {
        match self {
            Self::Sphere { radius } => Point::raw(v * (radius / v.norm())),
            Self::FlatTorus { period } => Point::raw(Vec3::new(wrap(v.x, *period), wrap(v.y, *period), 0.0)),
            Self::Euclidean { .. } => Point::raw(v),
        }
    }

    /// Projects an ambient vector onto `T_p M`.
    pub fn project_tangent(&self, p: &Point, v: &Vec3) -> Vec3 {
        match self {
            Self::Sphere { radius } => v - p.coords * (p.coords.dot(v) / (radius * radius)),
            Self::FlatTorus { .. } => Vec3::new(v.x, v.y, 0.0),
            Self::Euclidean { dim, .. } => {
                let mut w = *v;
                for c in w.iter_mut().skip(*dim) {
                    *c = 0.0;
                }
                w
            }
        }
    }

    /// Flat displacement `q − p` (shortest representative on the torus).
    fn displacement(&self, p: &Point, q: &Point) -> Vec3 {
        match self {
            Self::FlatTorus { period } => Vec3::new(
                wrap_centered(q.coords.x - p.coords.x, *period),
                wrap_centered(q.coords.y - p.coords.y, *period),
                0.0,
            ),
            _ => q.coords - p.coords,
        }
    }

    pub fn distance(&self, p: &Point, q: &Point) -> f64 {
        match self {
            Self::Sphere { radius } => {
                let cross = p.coords.cross(&q.coords).norm();
                radius * cross.atan2(p.coords.dot(&q.coords))
            }
            _ => self.displacement(p, q).norm(),
        }
    }

    /// Half squared distance: the quadratic transport cost.
    pub fn cost(&self, p: &Point, q: &Point) -> f64 {
        let d = self.distance(p, q);
        0.5 * d * d
    }

    pub fn exp_map(&self, p: &Point, v: &Vec3) -> Point {
        match self {
            Self::Sphere { radius } => {
                let v = self.project_tangent(p, v);
                let s = v.norm();
                if s == 0.0 {
                    return *p;
                }
                let theta = s / radius;
                self.normalize(p.coords * theta.cos() + v * (radius * theta.sin() / s))
            }
            _ => self.normalize(p.coords + self.project_tangent(p, v)),
        }
    }

    pub fn exp(&self, v: &TangentVector) -> Point {
        self.exp_map(&v.base, &v.vector)
    }

    /// Inverse of `exp_p` inside the injectivity radius.
    pub fn log_map(&self, p: &Point, q: &Point) -> Result<TangentVector> {
        let inj = self.constants().injectivity_radius;
        let d = self.distance(p, q);
        if inj.is_finite() && d >= inj * (1.0 - CUT_LOCUS_TOL) {
            return Err(Error::CutLocus { distance: d, inj });
        }
        let v = match self {
            Self::Sphere { radius } => {
                let w = q.coords - p.coords * (p.coords.dot(&q.coords) / (radius * radius));
                let nw = w.norm();
                if nw == 0.0 || d == 0.0 {
                    Vec3::zeros()
                } else {
                    w * (d / nw)
                }
            }
            _ => self.displacement(p, q),
        };
        Ok(TangentVector::new(*p, v))
    }

    /// `∇r` at `y` for `r = d(center, ·)`: the unit vector pointing away from `center`.
    pub fn distance_gradient(&self, center: &Point, y: &Point) -> Result<TangentVector> {
        let log = self.log_map(y, center)?;
        let d = log.norm();
        if d <= f64::EPSILON * self.length_scale() {
            return Err(Error::Degenerate("distance gradient at the center"));
        }
        Ok(log.scale(-1.0 / d))
    }

    /// Coefficient `c(r)` with `∇²r = c(r)(g − dr⊗dr)`: `(1/R)cot(r/R)` or `1/r`.
    pub fn hessian_r_coefficient(&self, r: f64) -> f64 {
        match self {
            Self::Sphere { radius } => {
                let t = r / radius;
                t.cos() / (t.sin() * radius)
            }
            _ => 1.0 / r,
        }
    }

    /// `r·c(r)`: `θcotθ` on the sphere (θ = r/R) and `1` in flat spaces.
    pub fn radial_factor(&self, r: f64) -> f64 {
        match self {
            Self::Sphere { radius } => theta_cot_theta(r / radius),
            _ => 1.0,
        }
    }

    /// Hessian of `r = d(center, ·)` at `y`.
    pub fn hessian_r(&self, center: &Point, y: &Point) -> Result<SymBilinearForm> {
        let grad = self.distance_gradient(center, y)?;
        let r = self.distance(center, y);
        let frame = self.frame(y);
        let g = SymBilinearForm::identity(frame);
        let drdr = SymBilinearForm::outer(frame, &grad.vector);
        Ok(g.sub(&drdr).scale(self.hessian_r_coefficient(r)))
    }

    /// Hessian of `½r²` at `y`; equals `g` when `y` is (numerically) the center.
    pub fn hessian_half_r2(&self, center: &Point, y: &Point) -> Result<SymBilinearForm> {
        let frame = self.frame(y);
        let log = self.log_map(y, center)?;
        let r = log.norm();
        let g = SymBilinearForm::identity(frame);
        if r < SMALL_RADIUS * self.length_scale() {
            return Ok(g);
        }
        let k = self.radial_factor(r);
        let dr = log.vector / r;
        Ok(g.scale(k).add(&SymBilinearForm::outer(frame, &dr).scale(1.0 - k)))
    }

    pub fn metric_form(&self, p: &Point) -> SymBilinearForm {
        SymBilinearForm::identity(self.frame(p))
    }

    /// `v ⊗ v` for a tangent vector.
    pub fn tensor_square(&self, v: &TangentVector) -> SymBilinearForm {
        SymBilinearForm::outer(self.frame(&v.base), &v.vector)
    }

    /// Deterministic orthonormal frame at `p`. On the sphere the first axis is
    /// the projection of the coordinate axis least aligned with `p` and the
    /// second completes a right-handed basis with the outward normal.
    pub fn frame(&self, p: &Point) -> OrthonormalFrame {
        match self {
            Self::Sphere { radius } => {
                let n = p.coords / *radius;
                let mut k = 0;
                for i in 1..3 {
                    if n[i].abs() < n[k].abs() {
                        k = i;
                    }
                }
                let mut e = Vec3::zeros();
                e[k] = 1.0;
                let e1 = (e - n * n[k]).normalize();
                let e2 = n.cross(&e1);
                OrthonormalFrame::new(*p, [e1, e2, Vec3::zeros()], 2)
            }
            _ => OrthonormalFrame::new(*p, [Vec3::x(), Vec3::y(), Vec3::z()], self.dim()),
        }
    }

    /// Typical length used to scale absolute tolerances.
    pub fn length_scale(&self) -> f64 {
        match self {
            Self::Sphere { radius } => *radius,
            Self::FlatTorus { period } => *period,
            Self::Euclidean { .. } => self.constants().diameter.max(1.0),
        }
    }

    /// Uniform random point (area measure; box-uniform for Euclidean).
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match self {
            Self::Sphere { radius } => {
                let z: f64 = rng.gen_range(-1.0..=1.0);
                let phi: f64 = rng.gen_range(0.0..2.0 * PI);
                let s = (1.0 - z * z).max(0.0).sqrt();
                self.normalize(Vec3::new(s * phi.cos(), s * phi.sin(), z) * *radius)
            }
            Self::FlatTorus { period } => {
                Point::raw(Vec3::new(rng.gen_range(0.0..*period), rng.gen_range(0.0..*period), 0.0))
            }
            Self::Euclidean { lower, upper, .. } => {
                let mut v = Vec3::zeros();
                for (i, (l, u)) in lower.iter().zip(upper).enumerate() {
                    v[i] = rng.gen_range(*l..*u);
                }
                Point::raw(v)
            }
        }
    }

    /// Random unit tangent vector at `p`.
    pub fn random_unit_tangent<R: Rng + ?Sized>(&self, p: &Point, rng: &mut R) -> TangentVector {
        let frame = self.frame(p);
        loop {
            let c: Vec<f64> = (0..frame.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n2: f64 = c.iter().map(|x| x * x).sum();
            if n2 > 1e-6 && n2 <= 1.0 {
                let v = frame.axes().iter().zip(&c).fold(Vec3::zeros(), |acc, (a, x)| acc + a * *x);
                return TangentVector::new(*p, v / n2.sqrt());
            }
        }
    }
}
