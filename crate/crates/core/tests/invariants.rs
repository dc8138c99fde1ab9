//! Property tests for the geometric and algebraic invariants.

use cconcave::cconcavity::{certify_technical, VALUE_TOL};
use cconcave::comparison::alpha;
use cconcave::field::{summarize, NormalCoordKind, RampProfile, SampleGrid, ScalarField};
use cconcave::manifold::{ManifoldSpec, Point, Vec3};
use cconcave::transport::{assignment_cost, optimal_assignment};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn manifolds() -> Vec<ManifoldSpec> {
    vec![
        ManifoldSpec::unit_sphere(),
        ManifoldSpec::sphere(2.5).unwrap(),
        ManifoldSpec::flat_torus(1.7).unwrap(),
        ManifoldSpec::euclidean_box(vec![-1.0, 0.0], vec![1.0, 3.0]).unwrap(),
        ManifoldSpec::euclidean_box(vec![-1.0; 3], vec![2.0; 3]).unwrap(),
    ]
}

fn manifold() -> impl Strategy<Value = ManifoldSpec> {
    (0..manifolds().len()).prop_map(|i| manifolds()[i].clone())
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A tangent vector at `p` with norm `fraction · (inj − 1e-6)` (diameter for infinite inj).
fn tangent(m: &ManifoldSpec, p: &Point, fraction: f64, rng: &mut ChaCha8Rng) -> Vec3 {
    let c = m.constants();
    let reach = if c.injectivity_radius.is_finite() { c.injectivity_radius - 1e-6 } else { c.diameter };
    m.random_unit_tangent(p, rng).vector * (fraction * reach)
}

fn round_trip(m: &ManifoldSpec, seed: u64, fraction: f64) -> std::result::Result<(), TestCaseError> {
    let mut r = rng(seed);
    let p = m.random_point(&mut r);
    let v = tangent(m, &p, fraction, &mut r);
    let q = m.exp_map(&p, &v);
    let back = m.log_map(&p, &q).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert!((back.vector - v).norm() <= 1e-8, "{m:?}: {v:?} -> {:?}", back.vector);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn exp_log_round_trip_sphere(seed: u64, fraction in 0.0..1.0f64) {
        round_trip(&manifolds()[0], seed, fraction)?;
        round_trip(&manifolds()[1], seed, fraction)?;
    }

    #[test]
    fn exp_log_round_trip_torus(seed: u64, fraction in 0.0..1.0f64) {
        round_trip(&manifolds()[2], seed, fraction)?;
    }

    #[test]
    fn exp_log_round_trip_box(seed: u64, fraction in 0.0..1.0f64) {
        round_trip(&manifolds()[3], seed, fraction)?;
        round_trip(&manifolds()[4], seed, fraction)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn triangle_inequality(m in manifold(), seed: u64) {
        // 100 triples per case
        let mut r = rng(seed);
        for _ in 0..100 {
            let [a, b, c] = [(); 3].map(|_| m.random_point(&mut r));
            let slack = m.distance(&a, &b) + m.distance(&b, &c) - m.distance(&a, &c);
            prop_assert!(slack >= -1e-12, "{slack}");
        }
    }

    #[test]
    fn points_and_tangents_are_well_formed(m in manifold(), seed: u64, fraction in 0.0..1.0f64) {
        let mut r = rng(seed);
        let p = m.random_point(&mut r);
        let v = tangent(&m, &p, fraction, &mut r);
        let q = m.exp_map(&p, &v);
        prop_assert!(m.contains(&p) && m.contains(&q));
        if let ManifoldSpec::Sphere { radius } = m {
            prop_assert!(((q.coords().norm() - radius) / radius).abs() <= 1e-12);
            prop_assert!(v.dot(p.coords()).abs() <= 1e-12 * radius * v.norm().max(1.0));
        }
        if let ManifoldSpec::FlatTorus { period } = m {
            prop_assert!((0.0..period).contains(&q.coords().x) && (0.0..period).contains(&q.coords().y));
        }
        prop_assert!(m.frame(&q).gram_error() <= 1e-10);
    }

    #[test]
    fn radial_eigenvalue_of_half_square_is_one(seed: u64, radius in 0.3..3.0f64) {
        let m = ManifoldSpec::sphere(radius).unwrap();
        let mut r = rng(seed);
        let c = m.random_point(&mut r);
        let y = m.random_point(&mut r);
        let d = m.distance(&c, &y);
        prop_assume!(d > 1e-6 && d < (std::f64::consts::PI - 1e-6) * radius);
        let hess = m.hessian_half_r2(&c, &y).unwrap();
        let radial = m.distance_gradient(&c, &y).unwrap().vector;
        prop_assert!((hess.quadratic(&radial) - 1.0).abs() <= 1e-10);
        prop_assert!(hess.asymmetry() <= 1e-12);
    }

    #[test]
    fn unit_tensor_square_is_below_the_metric(m in manifold(), seed: u64) {
        let mut r = rng(seed);
        let p = m.random_point(&mut r);
        let v = m.random_unit_tangent(&p, &mut r);
        let t = m.tensor_square(&v);
        prop_assert!(t.asymmetry() <= 1e-12);
        prop_assert!(t.le(&m.metric_form(&p), 1e-12));
    }

    #[test]
    fn ramp_is_concave_and_one_lipschitz(t0 in 0.0..2.0f64, width in 1e-3..3.0f64, seed: u64) {
        let ramp = RampProfile::smooth(t0, t0 + width).unwrap();
        let mut r = rng(seed);
        for _ in 0..10 {
            let t = r.gen_range(0.0..t0 + 2.0 * width);
            let (_, d1, d2) = ramp.eval(t);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&d1), "rho'({t}) = {d1}");
            prop_assert!(d2 <= 1e-12, "rho''({t}) = {d2}");
        }
    }

    #[test]
    fn alpha_is_close_to_one(t in 0.0..1.0f64) {
        prop_assert!((1.0 - alpha(t)).abs() <= 0.5 * t * t + 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sum_is_linear(seed: u64, a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let m = ManifoldSpec::unit_sphere();
        let mut r = rng(seed);
        let c = m.random_point(&mut r);
        let f = ScalarField::dist_sq_potential(&m, &c, RampProfile::smooth(0.1, 0.6).unwrap()).unwrap();
        let g = ScalarField::normal_coord(&m, &c, NormalCoordKind::Cubic { c: 1.0 }, 0.4, 1.0).unwrap();
        let s = ScalarField::sum(&m, &[(a, &f), (b, &g)]).unwrap();
        let y = m.random_point(&mut r);
        prop_assume!(m.distance(&c, &y) < 3.0);
        let expect = f.grad(&y).unwrap().vector * a + g.grad(&y).unwrap().vector * b;
        prop_assert!((s.grad(&y).unwrap().vector - expect).norm() <= 1e-12);
        let expect = f.hess(&y).unwrap().scale(a).add(&g.hess(&y).unwrap().scale(b));
        prop_assert!(s.hess(&y).unwrap().max_abs_diff(&expect) <= 1e-12);
    }

    #[test]
    fn oscillation_is_bounded_by_diameter_times_gradient(seed: u64, lambda in 0.0..2.0f64) {
        let m = ManifoldSpec::unit_sphere();
        let mut r = rng(seed);
        let c = m.random_point(&mut r);
        let f = ScalarField::dist_sq_potential(&m, &c, RampProfile::smooth(0.2, 1.0).unwrap()).unwrap().scaled(lambda);
        let s = summarize(&f, &SampleGrid::uniform(&m, 256, seed)).unwrap();
        let diam = m.constants().diameter;
        prop_assert!(s.value_max - s.value_min <= diam * s.grad_bound() + 1e-12);
    }

    #[test]
    fn assignment_is_a_bijection_with_recomputable_cost(seed: u64, n in 1usize..40) {
        let mut r = rng(seed);
        let c = DMatrix::from_fn(n, n, |_, _| r.gen_range(0.0..5.0));
        let a = optimal_assignment(&c).unwrap();
        let mut seen = a.sigma.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
        prop_assert!((assignment_cost(&c, &a.sigma).unwrap() - a.cost).abs() <= 1e-10);
        let mut other: Vec<usize> = (0..n).collect();
        other.shuffle(&mut r);
        prop_assert!(a.cost <= assignment_cost(&c, &other).unwrap() + 1e-10);
        let id: Vec<usize> = (0..n).collect();
        let diag: f64 = (0..n).map(|i| c[(i, i)]).sum();
        prop_assert_eq!(assignment_cost(&c, &id).unwrap(), diag);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn certification_survives_shrinking(seed: u64, lambda in 0.0..0.1f64) {
        let m = ManifoldSpec::unit_sphere();
        let c = m.random_point(&mut rng(seed));
        let f = ScalarField::dist_sq_potential(&m, &c, RampProfile::smooth(0.1, 0.4).unwrap()).unwrap().scaled(lambda);
        let grid = SampleGrid::uniform(&m, 512, seed);
        prop_assume!(certify_technical(&f, &grid, VALUE_TOL).unwrap().is_certified());
        for s in [0.5, 0.1] {
            prop_assert!(certify_technical(&f.scaled(s), &grid, VALUE_TOL).unwrap().is_certified());
        }
    }
}
