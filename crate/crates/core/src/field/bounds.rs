//! Certified suprema over `M` from grid samples plus a Lipschitz inflation.

use rayon::prelude::*;
use serde::Serialize;

use super::{SampleGrid, ScalarField};
use crate::error::Result;

/// Grid extrema of a field and its first two derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FieldSummary {
    pub samples: usize,
    pub spacing: f64,
    pub value_min: f64,
    pub value_max: f64,
    pub grad_norm_max: f64,
    pub hess_norm_max: f64,
    /// Largest eigenvalue of `∇²f` over the grid.
    pub hess_eig_max: f64,
    /// Index of the sample attaining `hess_eig_max`.
    pub hess_eig_argmax: usize,
}

impl FieldSummary {
    /// `grid max |∇f| + h · grid max ‖∇²f‖`.
    pub fn grad_bound(&self) -> f64 {
        self.grad_norm_max + self.spacing * self.hess_norm_max
    }

    /// `grid (max f − min f) + 2h · grad_bound`: each extreme may sit up to `h`
    /// away from the nearest sample.
    pub fn oscillation_bound(&self) -> f64 {
        (self.value_max - self.value_min) + 2.0 * self.spacing * self.grad_bound()
    }
}

pub fn summarize(f: &ScalarField, grid: &SampleGrid) -> Result<FieldSummary> {
    let per_point: Vec<(f64, f64, f64, f64)> = grid
        .points
        .par_iter()
        .map(|p| {
            let jet = f.jet(p)?;
            let form = f.hess_form(p, &jet.hess);
            let ev = form.eigenvalues();
            let (lo, hi) = (ev[0], ev[ev.len() - 1]);
            Ok((jet.value, jet.grad.norm(), lo.abs().max(hi.abs()), hi))
        })
        .collect::<Result<_>>()?;
    let mut s = FieldSummary {
        samples: per_point.len(),
        spacing: grid.spacing,
        value_min: f64::INFINITY,
        value_max: f64::NEG_INFINITY,
        grad_norm_max: 0.0,
        hess_norm_max: 0.0,
        hess_eig_max: f64::NEG_INFINITY,
        hess_eig_argmax: 0,
    };
    for (i, (v, g, h, e)) in per_point.into_iter().enumerate() {
        s.value_min = s.value_min.min(v);
        s.value_max = s.value_max.max(v);
        s.grad_norm_max = s.grad_norm_max.max(g);
        s.hess_norm_max = s.hess_norm_max.max(h);
        if e > s.hess_eig_max {
            s.hess_eig_max = e;
            s.hess_eig_argmax = i;
        }
    }
    Ok(s)
}

/// Upper bound on `‖∇f‖∞`.
pub fn sup_gradient_norm(f: &ScalarField, grid: &SampleGrid) -> Result<f64> {
    Ok(summarize(f, grid)?.grad_bound())
}

/// Upper bound on `sup f − inf f`.
pub fn oscillation(f: &ScalarField, grid: &SampleGrid) -> Result<f64> {
    Ok(summarize(f, grid)?.oscillation_bound())
}
