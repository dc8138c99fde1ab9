//! Orthonormal frames and symmetric bilinear forms on a single tangent space.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};

use super::{Point, TangentVector, Vec3};

/// `dim` orthonormal tangent vectors at `base`, stored in ambient coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrthonormalFrame {
    base: Point,
    axes: [Vec3; 3],
    dim: usize,
}

impl OrthonormalFrame {
    pub(crate) fn new(base: Point, axes: [Vec3; 3], dim: usize) -> Self {
        debug_assert!((1..=3).contains(&dim));
        Self { base, axes, dim }
    }

    pub fn base(&self) -> Point {
        self.base
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn axes(&self) -> &[Vec3] {
        &self.axes[..self.dim]
    }

    pub fn axis(&self, i: usize) -> TangentVector {
        TangentVector::new(self.base, self.axes()[i])
    }

    /// Coordinates of an ambient tangent vector in this frame.
    pub fn components(&self, v: &Vec3) -> DVector<f64> {
        DVector::from_iterator(self.dim, self.axes().iter().map(|a| a.dot(v)))
    }

    /// Ambient vector with the given frame coordinates.
    pub fn vector(&self, components: &DVector<f64>) -> Vec3 {
        self.axes()
            .iter()
            .zip(components.iter())
            .fold(Vec3::zeros(), |acc, (a, c)| acc + a * *c)
    }

    /// Largest deviation of the axes' Gram matrix from the identity.
    pub fn gram_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in self.axes().iter().enumerate() {
            for (j, b) in self.axes().iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((a.dot(b) - target).abs());
            }
        }
        worst
    }
}

/// A symmetric bilinear form on `T_p M`, as a matrix in an orthonormal frame.
#[derive(Clone, Debug, PartialEq)]
pub struct SymBilinearForm {
    frame: OrthonormalFrame,
    matrix: DMatrix<f64>,
}

impl SymBilinearForm {
    /// Wraps `matrix`, symmetrising it. Panics if the shape does not match the frame.
    pub fn new(frame: OrthonormalFrame, matrix: DMatrix<f64>) -> Self {
        assert_eq!(matrix.nrows(), frame.dim());
        assert_eq!(matrix.ncols(), frame.dim());
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        Self { frame, matrix }
    }

    pub fn zero(frame: OrthonormalFrame) -> Self {
        let d = frame.dim();
        Self { frame, matrix: DMatrix::zeros(d, d) }
    }

    /// The metric `g`: identity in any orthonormal frame.
    pub fn identity(frame: OrthonormalFrame) -> Self {
        let d = frame.dim();
        Self { frame, matrix: DMatrix::identity(d, d) }
    }

    /// `v ⊗ v` for a tangent vector given in ambient coordinates.
    pub fn outer(frame: OrthonormalFrame, v: &Vec3) -> Self {
        let c = frame.components(v);
        let matrix = &c * c.transpose();
        Self { frame, matrix }
    }

    /// Restriction of an ambient `3×3` bilinear form to the frame's span.
    pub fn from_ambient(frame: OrthonormalFrame, ambient: &Matrix3<f64>) -> Self {
        let axes = frame.axes();
        let d = axes.len();
        let matrix = DMatrix::from_fn(d, d, |i, j| axes[i].dot(&(ambient * axes[j])));
        Self::new(frame, matrix)
    }

    pub fn frame(&self) -> &OrthonormalFrame {
        &self.frame
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.frame.dim()
    }

    pub fn bilinear(&self, u: &Vec3, v: &Vec3) -> f64 {
        let cu = self.frame.components(u);
        let cv = self.frame.components(v);
        cu.dot(&(&self.matrix * cv))
    }

    pub fn quadratic(&self, v: &Vec3) -> f64 {
        self.bilinear(v, v)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = if self.dim() == 2 {
            let (a, b, c) = (self.matrix[(0, 0)], self.matrix[(0, 1)], self.matrix[(1, 1)]);
            let mean = 0.5 * (a + c);
            let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            vec![mean - rad, mean + rad]
        } else {
            SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().copied().collect()
        };
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Smallest eigenvalue with a unit eigenvector in ambient coordinates.
    pub fn min_eigenpair(&self) -> (f64, Vec3) {
        let eig = SymmetricEigen::new(self.matrix.clone());
        let i = eig.eigenvalues.imin();
        let v = self.frame.vector(&eig.eigenvectors.column(i).into_owned());
        (eig.eigenvalues[i], v.normalize())
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues().last().expect("non-empty form")
    }

    /// Spectral norm.
    pub fn operator_norm(&self) -> f64 {
        let ev = self.eigenvalues();
        ev[0].abs().max(ev[ev.len() - 1].abs())
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { frame: self.frame, matrix: &self.matrix * s }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_frame(other);
        Self { frame: self.frame, matrix: &self.matrix + &other.matrix }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.check_frame(other);
        Self { frame: self.frame, matrix: &self.matrix - &other.matrix }
    }

    /// `self ≤ other` in the Loewner order, up to `tol` on the smallest eigenvalue of `other − self`.
    pub fn le(&self, other: &Self, tol: f64) -> bool {
        other.sub(self).min_eigenvalue() >= -tol
    }

    /// Largest entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.check_frame(other);
        (&self.matrix - &other.matrix).amax()
    }

    fn check_frame(&self, other: &Self) {
        debug_assert!(
            (self.frame.base().coords() - other.frame.base().coords()).amax() < 1e-12
                && self
                    .frame
                    .axes()
                    .iter()
                    .zip(other.frame.axes())
                    .all(|(a, b)| (a - b).amax() < 1e-12),
            "forms expressed in different frames"
        );
    }
}
