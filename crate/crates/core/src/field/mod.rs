//! A closed algebra of C² scalar fields with analytic gradients and Hessians.
//!
//! Every constructor is a radial profile around a center, a restriction of an
//! ambient linear function, or a product of such pieces, so derivatives are
//! assembled from three rules:
//!
//! * radial: `∇²F(r) = F'' dr⊗dr + (F'/r)·(r∇²r)`, with `r∇²r = κ(r)(g − dr⊗dr)`
//!   and `κ = θcotθ` on the sphere, `1` in flat spaces;
//! * product: `∇²(ab) = a∇²b + b∇²a + ∇a⊗∇b + ∇b⊗∇a`;
//! * composition: `∇²(ρ∘s) = ρ'' ds⊗ds + ρ' ∇²s`.
//!
//! Using `F'/r` instead of `F'` keeps every formula finite at the center.

mod bounds;
mod fd;
mod grid;
mod ramp;

pub use bounds::{oscillation, summarize, sup_gradient_norm, FieldSummary};
pub use fd::{fd_gradient, fd_gradient_fn, fd_hessian, fd_hessian_fn};
pub use grid::SampleGrid;
pub use ramp::RampProfile;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{ManifoldSpec, Point, SymBilinearForm, TangentVector, Vec3, SMALL_RADIUS};

pub type Mat3 = Matrix3<f64>;

/// Which polynomial in normal coordinates `u` a [`FieldSpec::NormalCoord`] carries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormalCoordKind {
    /// `a·u₁`, with `u₁` along the first frame axis at the center.
    Linear { a: f64 },
    /// `−c·|u|³`.
    Cubic { c: f64 },
}

/// Serializable constructor tree of a field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FieldSpec {
    Constant { value: f64 },
    /// `ρ(½d²(center, ·))`.
    DistSqPotential { center: Vec<f64>, ramp: RampProfile },
    /// `x ↦ ⟨x, vector⟩` restricted to the sphere.
    AmbientLinear { vector: Vec<f64> },
    /// Polynomial in normal coordinates at `center`, multiplied by a radial
    /// cutoff that is `1` up to `taper_start` and `0` from `cutoff` on.
    NormalCoord { center: Vec<f64>, kind: NormalCoordKind, taper_start: f64, cutoff: f64 },
    Sum { terms: Vec<Term> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coefficient: f64,
    pub field: FieldSpec,
}

/// Value, gradient and Hessian at one point. The gradient is an ambient
/// tangent vector, the Hessian an ambient matrix acting on tangent vectors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vec3,
    pub hess: Mat3,
}

impl Jet {
    fn constant(value: f64) -> Self {
        Self { value, grad: Vec3::zeros(), hess: Mat3::zeros() }
    }

    fn scale(self, s: f64) -> Self {
        Self { value: self.value * s, grad: self.grad * s, hess: self.hess * s }
    }

    fn add_scaled(&mut self, s: f64, other: &Self) {
        self.value += s * other.value;
        self.grad += other.grad * s;
        self.hess += other.hess * s;
    }

    fn mul(&self, other: &Self) -> Self {
        let cross = self.grad * other.grad.transpose();
        Self {
            value: self.value * other.value,
            grad: self.grad * other.value + other.grad * self.value,
            hess: self.hess * other.value + other.hess * self.value + cross + cross.transpose(),
        }
    }
}

/// Distance to a center with its unit gradient and the curvature factor `κ(r)`.
struct Radial {
    r: f64,
    /// `r·∇r = −log_y(center)`.
    rvec: Vec3,
    dr: Vec3,
    kappa: f64,
    proj: Mat3,
}

impl Radial {
    fn new(m: &ManifoldSpec, center: &Point, y: &Point) -> Result<Self> {
        let log = m.log_map(y, center)?;
        let r = log.norm();
        let proj = tangent_projector(m, y);
        let rvec = -log.vector;
        if r < SMALL_RADIUS * m.length_scale() {
            return Ok(Self { r, rvec, dr: Vec3::zeros(), kappa: 1.0, proj });
        }
        Ok(Self { r, rvec, dr: rvec / r, kappa: m.radial_factor(r), proj })
    }

    /// Jet of `F(r)` from `F, F'/r, F''`.
    fn jet(&self, f: f64, df_over_r: f64, d2f: f64) -> Jet {
        let drdr = self.dr * self.dr.transpose();
        Jet { value: f, grad: self.rvec * df_over_r, hess: drdr * d2f + (self.proj - drdr) * (df_over_r * self.kappa) }
    }
}

pub(crate) fn tangent_projector(m: &ManifoldSpec, y: &Point) -> Mat3 {
    match m {
        ManifoldSpec::Sphere { radius } => {
            let n = y.coords() / *radius;
            Mat3::identity() - n * n.transpose()
        }
        _ => {
            let mut p = Mat3::zeros();
            for i in 0..m.dim() {
                p[(i, i)] = 1.0;
            }
            p
        }
    }
}

/// `(q, q'/θ, q'')` for `q(θ) = θ/sinθ`.
fn theta_over_sin(theta: f64) -> (f64, f64, f64) {
    if theta < 1e-2 {
        let t2 = theta * theta;
        let t4 = t2 * t2;
        (
            1.0 + t2 / 6.0 + 7.0 * t4 / 360.0 + 31.0 * t4 * t2 / 15120.0,
            1.0 / 3.0 + 7.0 * t2 / 90.0 + 31.0 * t4 / 2520.0,
            1.0 / 3.0 + 7.0 * t2 / 30.0 + 31.0 * t4 / 504.0,
        )
    } else {
        let (s, c) = theta.sin_cos();
        let q = theta / s;
        let dq_over = (s - theta * c) / (theta * s * s);
        let d2q = (theta * (1.0 + c * c) - 2.0 * s * c) / (s * s * s);
        (q, dq_over, d2q)
    }
}

#[derive(Clone, Debug)]
enum Node {
    Constant(f64),
    DistSq { center: Point, ramp: RampProfile },
    AmbientLinear { vector: Vec3 },
    NormalCoord { center: Point, axis: Vec3, kind: NormalCoordKind, taper_start: f64, cutoff: f64 },
    Sum(Vec<(f64, Node)>),
}

/// A C² function on a model manifold.
#[derive(Clone, Debug)]
pub struct ScalarField {
    manifold: ManifoldSpec,
    spec: FieldSpec,
    node: Node,
}

impl PartialEq for ScalarField {
    fn eq(&self, other: &Self) -> bool {
        self.manifold == other.manifold && self.spec == other.spec
    }
}

/// Coordinates of a point in the form accepted by [`ManifoldSpec::point`].
pub fn point_coords(m: &ManifoldSpec, p: &Point) -> Vec<f64> {
    p.coords().as_slice()[..m.ambient_dim()].to_vec()
}

impl ScalarField {
    pub fn new(manifold: ManifoldSpec, spec: FieldSpec) -> Result<Self> {
        manifold.validate()?;
        let node = compile(&manifold, &spec)?;
        Ok(Self { manifold, spec, node })
    }

    pub fn constant(m: &ManifoldSpec, value: f64) -> Self {
        Self::new(m.clone(), FieldSpec::Constant { value }).expect("constant field")
    }

    pub fn dist_sq_potential(m: &ManifoldSpec, center: &Point, ramp: RampProfile) -> Result<Self> {
        Self::new(m.clone(), FieldSpec::DistSqPotential { center: point_coords(m, center), ramp })
    }

    /// `½d²(center, ·)`. Not differentiable on the cut locus of `center`.
    pub fn half_sq_distance(m: &ManifoldSpec, center: &Point) -> Self {
        Self::dist_sq_potential(m, center, RampProfile::Identity).expect("identity ramp")
    }

    pub fn ambient_linear(m: &ManifoldSpec, vector: Vec3) -> Result<Self> {
        Self::new(m.clone(), FieldSpec::AmbientLinear { vector: vector.as_slice().to_vec() })
    }

    pub fn normal_coord(
        m: &ManifoldSpec,
        center: &Point,
        kind: NormalCoordKind,
        taper_start: f64,
        cutoff: f64,
    ) -> Result<Self> {
        Self::new(m.clone(), FieldSpec::NormalCoord { center: point_coords(m, center), kind, taper_start, cutoff })
    }

    /// `Σ cᵢ fᵢ`; all parts must live on the same manifold.
    pub fn sum(m: &ManifoldSpec, terms: &[(f64, &ScalarField)]) -> Result<Self> {
        if let Some((_, f)) = terms.iter().find(|(_, f)| f.manifold != *m) {
            return Err(Error::InvalidArgument(format!("field on {:?} added to a sum on {m:?}", f.manifold)));
        }
        let terms = terms.iter().map(|(c, f)| Term { coefficient: *c, field: f.spec.clone() }).collect();
        Self::new(m.clone(), FieldSpec::Sum { terms })
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::sum(&self.manifold, &[(s, self)]).expect("same manifold")
    }

    pub fn manifold(&self) -> &ManifoldSpec {
        &self.manifold
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    pub fn eval(&self, p: &Point) -> f64 {
        value(&self.manifold, &self.node, p)
    }

    pub fn jet(&self, p: &Point) -> Result<Jet> {
        jet(&self.manifold, &self.node, p)
    }

    pub fn grad(&self, p: &Point) -> Result<TangentVector> {
        Ok(TangentVector::new(*p, self.jet(p)?.grad))
    }

    pub fn hess(&self, p: &Point) -> Result<SymBilinearForm> {
        Ok(self.hess_form(p, &self.jet(p)?.hess))
    }

    /// Expresses an ambient Hessian in the manifold's frame at `p`.
    pub fn hess_form(&self, p: &Point, hess: &Mat3) -> SymBilinearForm {
        SymBilinearForm::from_ambient(self.manifold.frame(p), hess)
    }
}

fn compile(m: &ManifoldSpec, spec: &FieldSpec) -> Result<Node> {
    let inj = m.constants().injectivity_radius;
    let finite = |x: f64, what: &str| {
        if x.is_finite() {
            Ok(x)
        } else {
            Err(Error::InvalidArgument(format!("{what} must be finite")))
        }
    };
    Ok(match spec {
        FieldSpec::Constant { value } => Node::Constant(finite(*value, "constant")?),
        FieldSpec::DistSqPotential { center, ramp } => {
            ramp.validate()?;
            let t1 = ramp.plateau_start();
            if t1.is_finite() && inj.is_finite() {
                let limit = 0.5 * (inj * (1.0 - 1e-6)).powi(2);
                if t1 >= limit {
                    return Err(Error::InvalidRamp(format!(
                        "plateau start {t1} must be below ½inj² = {limit} for the potential to be C²"
                    )));
                }
            }
            Node::DistSq { center: m.point(center)?, ramp: *ramp }
        }
        FieldSpec::AmbientLinear { vector } => {
            if !matches!(m, ManifoldSpec::Sphere { .. }) {
                return Err(Error::InvalidArgument("ambient linear fields are defined on the sphere only".into()));
            }
            if vector.len() != 3 || vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument("ambient vector must have 3 finite entries".into()));
            }
            Node::AmbientLinear { vector: Vec3::new(vector[0], vector[1], vector[2]) }
        }
        FieldSpec::NormalCoord { center, kind, taper_start, cutoff } => {
            if !(0.0 < *taper_start && taper_start < cutoff && *cutoff < inj) {
                return Err(Error::InvalidArgument(format!(
                    "normal-coordinate cutoff needs 0 < taper_start < cutoff < inj, got {taper_start}, {cutoff}, {inj}"
                )));
            }
            match kind {
                NormalCoordKind::Linear { a } => finite(*a, "linear coefficient")?,
                NormalCoordKind::Cubic { c } => finite(*c, "cubic coefficient")?,
            };
            let center = m.point(center)?;
            let axis = m.frame(&center).axes()[0];
            Node::NormalCoord { center, axis, kind: *kind, taper_start: *taper_start, cutoff: *cutoff }
        }
        FieldSpec::Sum { terms } => Node::Sum(
            terms
                .iter()
                .map(|t| Ok((finite(t.coefficient, "coefficient")?, compile(m, &t.field)?)))
                .collect::<Result<_>>()?,
        ),
    })
}

fn value(m: &ManifoldSpec, node: &Node, y: &Point) -> f64 {
    match node {
        Node::Constant(c) => *c,
        Node::DistSq { center, ramp } => ramp.value(m.cost(center, y)),
        Node::AmbientLinear { vector } => y.coords().dot(vector),
        Node::NormalCoord { center, axis, kind, taper_start, cutoff } => {
            let r = m.distance(center, y);
            if r >= *cutoff {
                return 0.0;
            }
            let (chi, _, _) = ramp::cutoff(r, *taper_start, *cutoff);
            let base = match kind {
                NormalCoordKind::Linear { a } => {
                    let u = m.log_map(center, y).expect("inside cutoff < inj").vector;
                    a * u.dot(axis)
                }
                NormalCoordKind::Cubic { c } => -c * r * r * r,
            };
            chi * base
        }
        Node::Sum(terms) => terms.iter().map(|(c, n)| c * value(m, n, y)).sum(),
    }
}

fn jet(m: &ManifoldSpec, node: &Node, y: &Point) -> Result<Jet> {
    match node {
        Node::Constant(c) => Ok(Jet::constant(*c)),
        Node::DistSq { center, ramp } => {
            let s = m.cost(center, y);
            if s >= ramp.plateau_start() {
                return Ok(Jet::constant(ramp.value(s)));
            }
            let rad = Radial::new(m, center, y)?;
            let (rho, d1, d2) = ramp.eval(0.5 * rad.r * rad.r);
            Ok(rad.jet(rho, d1, d2 * rad.r * rad.r + d1))
        }
        Node::AmbientLinear { vector } => Ok(ambient_linear_jet(m, y, vector)),
        Node::NormalCoord { center, axis, kind, taper_start, cutoff } => {
            if m.distance(center, y) >= *cutoff {
                return Ok(Jet::constant(0.0));
            }
            let rad = Radial::new(m, center, y)?;
            let r = rad.r;
            let (chi, dchi, d2chi) = ramp::cutoff(r, *taper_start, *cutoff);
            let chi = rad.jet(chi, if dchi == 0.0 { 0.0 } else { dchi / r }, d2chi);
            let base = match kind {
                NormalCoordKind::Linear { a } => linear_normal_coordinate(m, center, axis, y, &rad)?.scale(*a),
                NormalCoordKind::Cubic { c } => rad.jet(-c * r * r * r, -3.0 * c * r, -6.0 * c * r),
            };
            Ok(base.mul(&chi))
        }
        Node::Sum(terms) => {
            let mut acc = Jet::constant(0.0);
            for (c, n) in terms {
                acc.add_scaled(*c, &jet(m, n, y)?);
            }
            Ok(acc)
        }
    }
}

fn ambient_linear_jet(m: &ManifoldSpec, y: &Point, vector: &Vec3) -> Jet {
    let value = y.coords().dot(vector);
    let proj = tangent_projector(m, y);
    let hess = match m {
        ManifoldSpec::Sphere { radius } => proj * (-value / (radius * radius)),
        _ => Mat3::zeros(),
    };
    Jet { value, grad: proj * vector, hess }
}

/// `u₁ = ⟨log_center(y), axis⟩`. On the sphere `u₁ = q(r)·⟨axis, y⟩` with
/// `q = θ/sinθ`; in flat spaces it is affine.
fn linear_normal_coordinate(m: &ManifoldSpec, center: &Point, axis: &Vec3, y: &Point, rad: &Radial) -> Result<Jet> {
    match m {
        ManifoldSpec::Sphere { radius } => {
            let (q, dq_over, d2q) = theta_over_sin(rad.r / radius);
            let r2 = radius * radius;
            let q = rad.jet(q, dq_over / r2, d2q / r2);
            Ok(q.mul(&ambient_linear_jet(m, y, axis)))
        }
        _ => {
            let u = m.log_map(center, y)?.vector;
            Ok(Jet { value: u.dot(axis), grad: tangent_projector(m, y) * axis, hess: Mat3::zeros() })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sphere() -> ManifoldSpec {
        ManifoldSpec::unit_sphere()
    }

    #[test]
    fn constant_field_is_flat() {
        let m = sphere();
        let f = ScalarField::constant(&m, 3.0);
        let p = m.point(&[0.3, -0.2, 0.9]).unwrap();
        assert_eq!(f.eval(&p), 3.0);
        assert_eq!(f.grad(&p).unwrap().norm(), 0.0);
        assert_eq!(f.hess(&p).unwrap().operator_norm(), 0.0);
    }

    #[test]
    fn ambient_linear_hessian_is_minus_value_times_metric() {
        let m = sphere();
        let v = Vec3::new(0.3, -1.2, 0.5);
        let f = ScalarField::ambient_linear(&m, v).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let p = m.random_point(&mut rng);
            let h = f.hess(&p).unwrap();
            let expect = m.metric_form(&p).scale(-p.coords().dot(&v));
            assert!(h.max_abs_diff(&expect) < 1e-14);
        }
        let t = ManifoldSpec::flat_torus(1.0).unwrap();
        assert!(ScalarField::ambient_linear(&t, v).is_err());
    }

    #[test]
    fn half_square_distance_matches_geometry() {
        let m = sphere();
        let n = m.pole();
        let f = ScalarField::half_sq_distance(&m, &n);
        let y = m.exp_map(&n, &Vec3::new(0.5, 0.0, 0.0));
        let ev = f.hess(&y).unwrap().eigenvalues();
        assert!((ev[0] - 0.915243860856226).abs() < 1e-12);
        assert!((ev[1] - 1.0).abs() < 1e-12);
        let g = f.grad(&y).unwrap();
        let expect = m.log_map(&y, &n).unwrap().vector * -1.0;
        assert!((g.vector - expect).norm() < 1e-14);
        assert_eq!(f.hess(&n).unwrap(), m.metric_form(&n));
    }

    #[test]
    fn potential_vanishes_beyond_plateau() {
        let m = sphere();
        let n = m.pole();
        let ramp = RampProfile::smooth(0.05, 0.1).unwrap();
        let f = ScalarField::dist_sq_potential(&m, &n, ramp).unwrap();
        let y = m.exp_map(&n, &Vec3::new(1.0, 0.0, 0.0));
        assert!((f.eval(&y) - 0.075).abs() < 1e-16);
        assert_eq!(f.grad(&y).unwrap().norm(), 0.0);
        assert_eq!(f.hess(&y).unwrap().operator_norm(), 0.0);
        let s = m.point(&[0.0, 0.0, -1.0]).unwrap();
        assert!(f.hess(&s).is_ok());
    }

    #[test]
    fn plateau_must_precede_cut_locus() {
        let m = sphere();
        let ramp = RampProfile::smooth(1.0, 5.0).unwrap();
        assert!(matches!(ScalarField::dist_sq_potential(&m, &m.pole(), ramp), Err(Error::InvalidRamp(_))));
    }

    #[test]
    fn normal_coordinate_linear_term_at_center() {
        let m = sphere();
        let n = m.pole();
        let f = ScalarField::normal_coord(&m, &n, NormalCoordKind::Linear { a: 1.5 }, 0.5, 1.0).unwrap();
        let g = f.grad(&n).unwrap();
        assert!((g.vector - Vec3::new(1.5, 0.0, 0.0)).norm() < 1e-15);
        assert!(f.hess(&n).unwrap().operator_norm() < 1e-15);
        // u₁ equals the first normal coordinate
        let y = m.exp_map(&n, &Vec3::new(0.2, -0.1, 0.0));
        assert!((f.eval(&y) - 1.5 * 0.2).abs() < 1e-14);
        assert!((f.jet(&y).unwrap().value - 1.5 * 0.2).abs() < 1e-14);
    }

    #[test]
    fn normal_coordinate_rejects_bad_cutoff() {
        let m = sphere();
        let n = m.pole();
        let k = NormalCoordKind::Cubic { c: 1.0 };
        assert!(ScalarField::normal_coord(&m, &n, k, 1.0, 0.5).is_err());
        assert!(ScalarField::normal_coord(&m, &n, k, 1.0, 4.0).is_err());
    }

    #[test]
    fn sum_is_linear() {
        let m = sphere();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = m.random_point(&mut rng);
        let a = ScalarField::half_sq_distance(&m, &p);
        let b = ScalarField::ambient_linear(&m, Vec3::new(1.0, 2.0, 3.0)).unwrap();
        let s = ScalarField::sum(&m, &[(2.0, &a), (-0.5, &b)]).unwrap();
        for _ in 0..20 {
            let y = m.random_point(&mut rng);
            if m.distance(&p, &y) > 3.0 {
                continue;
            }
            let (ja, jb, js) = (a.jet(&y).unwrap(), b.jet(&y).unwrap(), s.jet(&y).unwrap());
            assert!((js.value - (2.0 * ja.value - 0.5 * jb.value)).abs() < 1e-14);
            assert!((js.grad - (ja.grad * 2.0 - jb.grad * 0.5)).amax() < 1e-14);
            assert!((js.hess - (ja.hess * 2.0 - jb.hess * 0.5)).amax() < 1e-14);
        }
    }

    #[test]
    fn spec_round_trips_through_json() {
        let m = sphere();
        let n = m.pole();
        let f1 = ScalarField::dist_sq_potential(&m, &n, RampProfile::smooth(0.05, 0.1).unwrap()).unwrap();
        let f2 = ScalarField::normal_coord(&m, &n, NormalCoordKind::Cubic { c: 2.0 }, 0.5, 1.0).unwrap();
        let f = ScalarField::sum(&m, &[(1.0, &f1), (0.02, &f2)]).unwrap();
        let json = serde_json::to_string(f.spec()).unwrap();
        let back: FieldSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(ScalarField::new(m, back).unwrap(), f);
    }

    #[test]
    fn theta_over_sin_branches_agree() {
        let a = theta_over_sin(1e-2 * (1.0 - 1e-12));
        let b = theta_over_sin(1e-2 * (1.0 + 1e-12));
        assert!((a.0 - b.0).abs() < 1e-13 && (a.1 - b.1).abs() < 1e-11 && (a.2 - b.2).abs() < 1e-10, "{a:?} {b:?}");
    }
}
