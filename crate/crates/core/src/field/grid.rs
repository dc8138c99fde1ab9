use std::f64::consts::PI;

use nalgebra::{Rotation3, Unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::manifold::{ManifoldSpec, Point, Vec3};

/// Covering radius of the `n`-point Fibonacci lattice, in units of `R·√(4π/n)`.
/// Measured at ≈ 0.63 for n between 256 and 16384; rounded up generously.
const FIBONACCI_COVER: f64 = 0.9;

/// A finite set of sample points with a covering radius `spacing`.
#[derive(Clone, Debug)]
pub struct SampleGrid {
    pub manifold: ManifoldSpec,
    pub points: Vec<Point>,
    /// Every point of `M` (of the box, for Euclidean space) lies within
    /// `spacing` of some sample.
    pub spacing: f64,
    pub seed: u64,
}

impl SampleGrid {
    /// Deterministic quasi-uniform grid with about `n` points: a randomly rotated
    /// Fibonacci lattice on the sphere, shifted square lattices on the torus
    /// and in boxes.
    pub fn uniform(m: &ManifoldSpec, n: usize, seed: u64) -> Self {
        let n = n.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match m {
            ManifoldSpec::Sphere { radius } => {
                let axis = Unit::new_normalize(m.random_point(&mut rng).coords() / *radius);
                let rot = Rotation3::from_axis_angle(&axis, rng.gen_range(0.0..2.0 * PI));
                let golden = PI * (3.0 - 5f64.sqrt());
                let points = (0..n)
                    .map(|i| {
                        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                        let s = (1.0 - z * z).max(0.0).sqrt();
                        let phi = golden * i as f64;
                        let v = rot * Vec3::new(s * phi.cos(), s * phi.sin(), z);
                        m.point(v.as_slice()).expect("nonzero")
                    })
                    .collect();
                let spacing = FIBONACCI_COVER * radius * (4.0 * PI / n as f64).sqrt();
                Self { manifold: m.clone(), points, spacing, seed }
            }
            ManifoldSpec::FlatTorus { period } => {
                let k = (n as f64).sqrt().ceil() as usize;
                let step = period / k as f64;
                let (ox, oy) = (rng.gen_range(0.0..step), rng.gen_range(0.0..step));
                let mut points = Vec::with_capacity(k * k);
                for i in 0..k {
                    for j in 0..k {
                        points.push(m.point(&[ox + i as f64 * step, oy + j as f64 * step]).expect("finite"));
                    }
                }
                Self { manifold: m.clone(), points, spacing: step * std::f64::consts::FRAC_1_SQRT_2, seed }
            }
            ManifoldSpec::Euclidean { dim, lower, upper } => {
                let k = (n as f64).powf(1.0 / *dim as f64).ceil() as usize;
                let steps: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| (u - l) / k as f64).collect();
                let total = k.pow(*dim as u32);
                let points = (0..total)
                    .map(|mut idx| {
                        let coords: Vec<f64> = (0..*dim)
                            .map(|d| {
                                let i = idx % k;
                                idx /= k;
                                lower[d] + (i as f64 + 0.5) * steps[d]
                            })
                            .collect();
                        m.point(&coords).expect("finite")
                    })
                    .collect();
                let spacing = 0.5 * steps.iter().map(|s| s * s).sum::<f64>().sqrt();
                Self { manifold: m.clone(), points, spacing, seed }
            }
        }
    }

    /// `n` independent uniform samples. `spacing` is an estimate only.
    pub fn random(m: &ManifoldSpec, n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<Point> = (0..n).map(|_| m.random_point(&mut rng)).collect();
        let mut grid = Self { manifold: m.clone(), points, spacing: f64::NAN, seed };
        grid.spacing = grid.covering_radius_estimate(256, seed ^ 0x5eed);
        grid
    }

    pub fn from_points(m: &ManifoldSpec, points: Vec<Point>, spacing: f64) -> Self {
        Self { manifold: m.clone(), points, spacing, seed: 0 }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest distance from `probes` random points to the nearest sample.
    pub fn covering_radius_estimate(&self, probes: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..probes)
            .map(|_| {
                let q = self.manifold.random_point(&mut rng);
                self.points.iter().map(|p| self.manifold.distance(p, &q)).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    /// Samples within distance `radius` of `center`.
    pub fn within(&self, center: &Point, radius: f64) -> impl Iterator<Item = &Point> + '_ {
        let c = *center;
        self.points.iter().filter(move |p| self.manifold.distance(&c, p) <= radius)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fibonacci_grid_covers_sphere() {
        for (n, seed) in [(256, 1), (4096, 2)] {
            let m = ManifoldSpec::unit_sphere();
            let g = SampleGrid::uniform(&m, n, seed);
            assert_eq!(g.len(), n);
            let est = g.covering_radius_estimate(1000, 99);
            assert!(est <= g.spacing, "n = {n}: {est} > {}", g.spacing);
            assert!(g.points.iter().all(|p| m.contains(p)));
        }
    }

    #[test]
    fn torus_and_box_grids_cover() {
        let t = ManifoldSpec::flat_torus(1.0).unwrap();
        let g = SampleGrid::uniform(&t, 1000, 4);
        assert!(g.covering_radius_estimate(1000, 5) <= g.spacing);
        let e = ManifoldSpec::euclidean_box(vec![-1.0, 0.0, 0.0], vec![1.0, 1.0, 2.0]).unwrap();
        let g = SampleGrid::uniform(&e, 1000, 4);
        assert_eq!(g.len(), 1000);
        assert!(g.covering_radius_estimate(1000, 5) <= g.spacing);
    }

    #[test]
    fn grids_are_deterministic_in_the_seed() {
        let m = ManifoldSpec::unit_sphere();
        let a = SampleGrid::uniform(&m, 100, 7);
        let b = SampleGrid::uniform(&m, 100, 7);
        let c = SampleGrid::uniform(&m, 100, 8);
        assert_eq!(a.points, b.points);
        assert_ne!(a.points, c.points);
    }
}
