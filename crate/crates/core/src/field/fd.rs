//! Finite-difference derivatives along geodesics, independent of the
//! analytic evaluators.

use nalgebra::DMatrix;

use super::ScalarField;
use crate::manifold::{ManifoldSpec, Point, SymBilinearForm, TangentVector, Vec3};

/// `d/dt f(exp_p(t·e_i))` at `t = 0` by central differences, per frame axis.
pub fn fd_gradient(f: &ScalarField, p: &Point, h: f64) -> TangentVector {
    fd_gradient_fn(f.manifold(), |q| f.eval(q), p, h)
}

/// Hessian from geodesic second differences `Q(v)`; off-diagonal entries by
/// polarization `¼[Q(u+v) − Q(u−v)]`.
pub fn fd_hessian(f: &ScalarField, p: &Point, h: f64) -> SymBilinearForm {
    fd_hessian_fn(f.manifold(), |q| f.eval(q), p, h)
}

/// [`fd_gradient`] for an arbitrary function on `m`.
pub fn fd_gradient_fn(m: &ManifoldSpec, f: impl Fn(&Point) -> f64, p: &Point, h: f64) -> TangentVector {
    let frame = m.frame(p);
    let grad = frame.axes().iter().fold(Vec3::zeros(), |acc, e| {
        let plus = f(&m.exp_map(p, &(e * h)));
        let minus = f(&m.exp_map(p, &(e * -h)));
        acc + e * ((plus - minus) / (2.0 * h))
    });
    TangentVector::new(*p, grad)
}

/// [`fd_hessian`] for an arbitrary function on `m`.
pub fn fd_hessian_fn(m: &ManifoldSpec, f: impl Fn(&Point) -> f64, p: &Point, h: f64) -> SymBilinearForm {
    let frame = m.frame(p);
    let axes = frame.axes();
    let d = axes.len();
    let center = f(p);
    let second = |v: &Vec3| (f(&m.exp_map(p, &(v * h))) - 2.0 * center + f(&m.exp_map(p, &(v * -h)))) / (h * h);
    let mut mat = DMatrix::zeros(d, d);
    for i in 0..d {
        mat[(i, i)] = second(&axes[i]);
        for j in 0..i {
            let v = 0.25 * (second(&(axes[i] + axes[j])) - second(&(axes[i] - axes[j])));
            mat[(i, j)] = v;
            mat[(j, i)] = v;
        }
    }
    SymBilinearForm::new(frame, mat)
}
