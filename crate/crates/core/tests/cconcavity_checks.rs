use std::f64::consts::PI;

use cconcave::cconcavity::*;
use cconcave::field::{RampProfile, SampleGrid, ScalarField};
use cconcave::manifold::ManifoldSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bump(m: &ManifoldSpec, lambda: f64) -> ScalarField {
    let p = m.point(&[0.3, -0.2, 0.9]).unwrap();
    ScalarField::dist_sq_potential(m, &p, RampProfile::smooth(0.1, 0.3).unwrap()).unwrap().scaled(lambda)
}

#[test]
fn small_potential_is_certified_and_large_one_fails_delta() {
    let m = ManifoldSpec::unit_sphere();
    let g = SampleGrid::uniform(&m, 4096, 1);
    let small = certify_technical(&bump(&m, 0.05), &g, VALUE_TOL).unwrap();
    println!("{}", serde_json::to_string_pretty(&small).unwrap());
    assert_eq!(small.verdict, Verdict::Certified);
    assert!(small.delta <= 1.0 && small.hess_margin >= 0.0);
    let large = certify_technical(&bump(&m, 1.0), &g, VALUE_TOL).unwrap();
    assert_eq!(large.verdict, Verdict::FailedDelta);
    assert!(large.delta > 1.0);
}

#[test]
fn main_certifier_fails_hessian_above_one_minus_epsilon() {
    // ½d²(p,·) scaled to have Hessian eigenvalue 0.9 at p, with tiny gradient nearby
    let m = ManifoldSpec::unit_sphere();
    let p = m.pole();
    let f = ScalarField::dist_sq_potential(&m, &p, RampProfile::smooth(1e-4, 2e-4).unwrap()).unwrap().scaled(0.9);
    let mut pts = vec![p];
    pts.extend(SampleGrid::uniform(&m, 64, 2).points);
    let g = SampleGrid::from_points(&m, pts, 0.0);
    let cert = certify_main(&f, 0.2, &g, VALUE_TOL).unwrap();
    assert!((cert.hess_margin - (0.8 - 0.9)).abs() < 1e-12, "{}", cert.hess_margin);
    assert_eq!(cert.verdict, Verdict::FailedHessian);
}

#[test]
fn admissible_bounds_imply_the_technical_hypotheses() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let k: f64 = if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.01..10.0) };
        let diam = rng.gen_range(0.1..10.0);
        let inj = rng.gen_range(0.05..=1.0) * diam;
        let eps = rng.gen_range(1e-3..0.999);
        let (c_star, eps_bound) = admissible_gradient_bound(k, inj, diam, eps).unwrap();
        let g = c_star.min(eps_bound) * rng.gen_range(0.0..=1.0);
        let delta = delta_from_gradient(diam, g);
        let budget = (inj / 2.0).min(if k > 0.0 { 1.0 / k.sqrt() } else { f64::INFINITY });
        assert!(delta <= budget * (1.0 + 1e-12), "{delta} > {budget}");
        assert!(k * delta * delta <= eps * (1.0 + 1e-12));
    }
}

#[test]
fn main_certificate_implies_technical_on_random_fields() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let m = ManifoldSpec::unit_sphere();
    let g = SampleGrid::uniform(&m, 1024, 5);
    let mut certified = 0;
    for _ in 0..50 {
        let c = m.random_point(&mut rng);
        let t0 = rng.gen_range(0.01..0.2);
        let t1 = t0 + rng.gen_range(0.05..0.5);
        let lambda = rng.gen_range(0.0..0.1);
        let f = ScalarField::dist_sq_potential(&m, &c, RampProfile::smooth(t0, t1).unwrap()).unwrap().scaled(lambda);
        let main = certify_main(&f, 0.5, &g, VALUE_TOL).unwrap();
        let tech = certify_technical(&f, &g, VALUE_TOL).unwrap();
        if main.is_certified() {
            certified += 1;
            assert!(tech.is_certified());
        }
    }
    assert!(certified >= 10, "{certified}");
}

#[test]
fn certified_fields_pass_the_argmin_test_and_the_three_claims() {
    let m = ManifoldSpec::unit_sphere();
    let g = SampleGrid::uniform(&m, 4096, 6);
    let xs = SampleGrid::uniform(&m, 256, 7);
    for lambda in [0.05, 0.025, 0.005] {
        let f = bump(&m, lambda);
        assert!(certify_technical(&f, &g, VALUE_TOL).unwrap().is_certified(), "{lambda}");
        let report = empirical_cconcavity(&f, &xs, &g, VALUE_TOL).unwrap();
        assert!(report.pass, "{lambda}: {report:?}");
        assert!(report.regime.small);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let x = m.random_point(&mut rng);
            let claims = check_three_claims(&f, &x, &g, VALUE_TOL).unwrap();
            assert!(claims.pass, "{claims:?}");
            assert!(claims.far_lower_bound.abs() < 1e-12);
        }
    }
}

#[test]
fn half_square_distance_and_constants_pass_the_argmin_test() {
    let m = ManifoldSpec::unit_sphere();
    let g = SampleGrid::uniform(&m, 1024, 9);
    let xs = SampleGrid::uniform(&m, 64, 10);
    let c = ScalarField::constant(&m, 1.0);
    assert!(empirical_cconcavity(&c, &xs, &g, VALUE_TOL).unwrap().pass);
    let claims = check_three_claims(&c, &m.pole(), &g, VALUE_TOL).unwrap();
    assert_eq!(claims.critical.margin, 0.0);

    let p = m.point(&[0.0, 1.0, 0.0]).unwrap();
    let f = ScalarField::half_sq_distance(&m, &p);
    let xs = SampleGrid::from_points(&m, xs.points.into_iter().filter(|x| m.distance(x, &p) < PI - 0.3).collect(), 0.0);
    let r = empirical_cconcavity(&f, &xs, &g, VALUE_TOL).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn non_cconcave_field_yields_a_valid_witness() {
    // 2·½d²(p,·) near p has ∇²f = 2g, far from c-concave
    let m = ManifoldSpec::unit_sphere();
    let p = m.pole();
    let f = ScalarField::dist_sq_potential(&m, &p, RampProfile::smooth(0.02, 0.08).unwrap()).unwrap().scaled(2.0);
    let g = SampleGrid::uniform(&m, 1024, 11);
    let xs = SampleGrid::from_points(&m, vec![m.point(&[0.05, 0.02, 1.0]).unwrap()], 0.0);
    let r = empirical_cconcavity(&f, &xs, &g, VALUE_TOL).unwrap();
    assert!(!r.pass);
    println!("{r:?}");
    let w = r.witness.unwrap();
    let again = w.recompute(&f).unwrap();
    assert!((again - w.violation).abs() < 1e-12 && again > VALUE_TOL);
}
