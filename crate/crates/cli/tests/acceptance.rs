//! Acceptance suite: one pass/fail line per criterion, non-zero exit if any fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use cconcave::cconcavity::{admissible_gradient_bound, certify_main, certify_technical, empirical_cconcavity, VALUE_TOL};
use cconcave::comparison::{
    check_alpha_inequality, check_half_square_bound, check_hessian_comparison, check_sphere_identity, default_t_grid,
};
use cconcave::counterexample::{analyze, build_counterexample, CounterexampleConfig};
use cconcave::field::{RampProfile, SampleGrid, ScalarField};
use cconcave::manifold::ManifoldSpec;
use cconcave::transport::{
    brute_force_assignment, check_cyclical_monotonicity, mccann_map, optimal_assignment, verify_optimality, PointCloud,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const GRID: usize = 4096;

type Criterion = (&'static str, fn() -> Outcome, Duration);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn sphere_identity() -> Outcome {
    let h = 1e-3;
    let bound = 10.0 * h * h;
    let g = SampleGrid::uniform(&ManifoldSpec::unit_sphere(), GRID, 0);
    let r = check_sphere_identity(1.0, &g, h, bound).unwrap();
    let error = -r.min_margin;
    let ratio = r.convergence_ratio.unwrap_or(f64::NAN);
    outcome(
        error < bound && r.samples >= GRID && (3.5..=4.5).contains(&ratio),
        format!("max error {error:.3e} < {bound:.1e} over {} pairs, h-halving ratio {ratio:.3}", r.samples),
    )
}

fn comparison_suite() -> Outcome {
    let tol = 1e-8;
    let mut pass = true;
    let mut parts = Vec::new();
    let manifolds = [
        ManifoldSpec::unit_sphere(),
        ManifoldSpec::sphere(2.0).unwrap(),
        ManifoldSpec::flat_torus(1.0).unwrap(),
        ManifoldSpec::euclidean_box(vec![0.0; 3], vec![1.0; 3]).unwrap(),
    ];
    let mut worst = f64::INFINITY;
    let mut sphere_excess = 0.0f64;
    for m in &manifolds {
        let g = SampleGrid::uniform(m, GRID, 0);
        let hc = check_hessian_comparison(m, &g, tol);
        let hs = check_half_square_bound(m, &g, tol);
        pass &= hc.pass && hs.pass;
        worst = worst.min(hc.min_margin).min(hs.min_margin);
        if matches!(m, ManifoldSpec::Sphere { .. }) {
            sphere_excess = sphere_excess.max(hc.min_margin.abs());
        }
    }
    let alpha = check_alpha_inequality(&default_t_grid(1000), tol).unwrap();
    pass &= alpha.pass && sphere_excess <= tol;
    worst = worst.min(alpha.min_margin);
    parts.push(format!("min margin {worst:.3e} >= -{tol:.0e}"));
    parts.push(format!("sphere equality |margin| {sphere_excess:.3e} <= {tol:.0e}"));
    outcome(pass, parts.join(", "))
}

fn certifier_soundness() -> Outcome {
    let m = ManifoldSpec::unit_sphere();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cert_grid = SampleGrid::uniform(&m, GRID, 1);
    let x_grid = SampleGrid::uniform(&m, GRID, 2);
    let y_grid = SampleGrid::uniform(&m, GRID, 3);
    let mut fields = 0;
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut draws = 0;
    while fields < 50 {
        draws += 1;
        let p = m.random_point(&mut rng);
        let t0 = rng.gen_range(0.01..0.3);
        let t1 = t0 + rng.gen_range(0.05..1.0);
        let lambda = rng.gen_range(0.0..0.2);
        let f = ScalarField::dist_sq_potential(&m, &p, RampProfile::smooth(t0, t1).unwrap()).unwrap().scaled(lambda);
        if !certify_technical(&f, &cert_grid, VALUE_TOL).unwrap().is_certified() {
            continue;
        }
        fields += 1;
        let r = empirical_cconcavity(&f, &x_grid, &y_grid, VALUE_TOL).unwrap();
        worst = worst.max(r.max_violation);
        failures += usize::from(!r.pass);
    }
    outcome(
        failures == 0,
        format!("{fields} certified fields ({draws} drawn), {failures} with witnesses, max violation {worst:.3e} <= {VALUE_TOL:.0e}"),
    )
}

fn certifier_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let manifolds = [ManifoldSpec::unit_sphere(), ManifoldSpec::sphere(0.5).unwrap(), ManifoldSpec::flat_torus(2.0).unwrap()];
    let mut main_certified = 0;
    let mut violations = 0;
    for i in 0..150 {
        let m = &manifolds[i % manifolds.len()];
        let g = SampleGrid::uniform(m, 1024, i as u64);
        let p = m.random_point(&mut rng);
        let limit = 0.5 * m.constants().injectivity_radius.powi(2);
        let t0 = rng.gen_range(0.01..0.4) * limit;
        let t1 = t0 + rng.gen_range(0.05..0.5) * limit;
        let lambda = rng.gen_range(0.0..0.15);
        let eps = rng.gen_range(0.05..0.95);
        let f = ScalarField::dist_sq_potential(m, &p, RampProfile::smooth(t0, t1).unwrap()).unwrap().scaled(lambda);
        match certify_main(&f, eps, &g, VALUE_TOL) {
            Ok(c) if c.is_certified() => {
                main_certified += 1;
                violations += usize::from(!certify_technical(&f, &g, VALUE_TOL).unwrap().is_certified());
            }
            Ok(_) => {}
            Err(_) => violations += 1,
        }
    }
    // C* solves c² + 2·diam·c = budget² with diam = π, budget = 1
    let (c_star, _) = admissible_gradient_bound(1.0, PI, PI, 0.5).unwrap();
    let oracle = (PI * PI + 1.0).sqrt() - PI;
    let err = (c_star - oracle).abs();
    outcome(
        violations == 0 && main_certified >= 10 && err <= 1e-12,
        format!(
            "{main_certified} main certificates, {violations} without a technical one; C* = {c_star:.12} (oracle {oracle:.12}, |diff| {err:.1e})"
        ),
    )
}

fn counterexample() -> Outcome {
    let cfg = CounterexampleConfig::default();
    let ce = match build_counterexample(&cfg) {
        Ok(ce) => ce,
        Err(e) => return outcome(false, format!("construction failed: {e}")),
    };
    let r = analyze(&ce).unwrap();
    let mech = &r.mechanism;
    let mech_err = (mech.hess_h_min_eigenvalue - mech.predicted).abs();
    let pass = r.hessian_bound.samples >= 16_384
        && r.hessian_bound.min_margin >= -1e-8
        && r.empirical.max_violation > 1e-6
        && mech.hess_h_min_eigenvalue < 0.0
        && mech_err <= 1e-4;
    outcome(
        pass,
        format!(
            "hessian margin {:.3e} on {} points, violation {:.3e} > 1e-6, tangential eigenvalue {:.6} vs r*cot(r*)-1 = {:.6}",
            r.hessian_bound.min_margin, r.hessian_bound.samples, r.empirical.max_violation, mech.hess_h_min_eigenvalue, mech.predicted
        ),
    )
}

fn transport_optimality() -> Outcome {
    let m = ManifoldSpec::unit_sphere();
    let tol = 1e-9;
    let grid = SampleGrid::uniform(&m, 1024, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst_gap = 0.0f64;
    let mut optimal = true;
    let mut worst_slack = f64::INFINITY;
    for (k, n) in [8usize, 32, 64].into_iter().enumerate() {
        for s in 0..20u64 {
            let seed = 1000 * k as u64 + s;
            let p = m.random_point(&mut rng);
            let lambda = rng.gen_range(0.01..0.08);
            let f = ScalarField::dist_sq_potential(&m, &p, RampProfile::smooth(0.1, 0.4).unwrap()).unwrap().scaled(lambda);
            let cloud = PointCloud::random(&m, n, seed).unwrap();
            match verify_optimality(&f, &cloud, &grid, tol, false) {
                Ok(r) => {
                    optimal &= r.pass;
                    worst_gap = worst_gap.max(r.gap.abs());
                }
                Err(_) => optimal = false,
            }
            let images = mccann_map(&f, &cloud).unwrap();
            let mono = check_cyclical_monotonicity(&cloud, &images, 1000, seed, tol).unwrap();
            worst_slack = worst_slack.min(mono.min_slack);
        }
    }
    let mut mismatches = 0;
    for t in 0..200 {
        let n = 1 + t % 8;
        let c = DMatrix::from_fn(n, n, |_, _| rng.gen_range(0.0..1.0));
        if optimal_assignment(&c).unwrap().cost != brute_force_assignment(&c).unwrap().cost {
            mismatches += 1;
        }
    }
    outcome(
        optimal && worst_gap <= tol && mismatches == 0 && worst_slack >= -tol,
        format!(
            "60 clouds, max |paired - optimal| {worst_gap:.1e}; {mismatches}/200 brute-force mismatches; min monotonicity slack {worst_slack:.3e}"
        ),
    )
}

fn strip_timestamp(path: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("timestamp");
    v
}

fn determinism() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let commands = ["compare", "certify", "check-cconcavity", "counterexample", "transport-verify", "sweep"];
    let mut differing = Vec::new();
    for cmd in commands {
        for d in &dirs {
            let status = Command::new(env!("CARGO_BIN_EXE_cconcave"))
                .args([cmd, "--seed", "42", "--out"])
                .arg(d.path())
                .env_remove("CCONCAVE_CONFIG")
                .env_remove("CCONCAVE_QUICK")
                .output()
                .unwrap()
                .status;
            if status.code() != Some(0) {
                differing.push(format!("{cmd} exited {status}"));
            }
        }
        let name = format!("{cmd}.json");
        if strip_timestamp(&dirs[0].path().join(&name)) != strip_timestamp(&dirs[1].path().join(&name)) {
            differing.push(name);
        }
    }
    for entry in std::fs::read_dir(dirs[0].path()).unwrap() {
        let name = entry.unwrap().file_name();
        if name.to_string_lossy().ends_with(".csv")
            && std::fs::read(dirs[0].path().join(&name)).unwrap() != std::fs::read(dirs[1].path().join(&name)).unwrap()
        {
            differing.push(name.to_string_lossy().into_owned());
        }
    }
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} subcommands run twice with seed 42, identical reports and data files", commands.len())
        } else {
            format!("differences: {}", differing.join(", "))
        },
    )
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("sphere identity", sphere_identity, Duration::from_secs(30)),
        ("comparison suite", comparison_suite, Duration::MAX),
        ("certifier soundness", certifier_soundness, Duration::from_secs(600)),
        ("certifier consistency", certifier_consistency, Duration::MAX),
        ("counterexample", counterexample, Duration::from_secs(300)),
        ("transport optimality", transport_optimality, Duration::MAX),
        ("determinism", determinism, Duration::MAX),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let elapsed = start.elapsed();
        let pass = o.pass && elapsed <= budget;
        failed += usize::from(!pass);
        let limit = if budget == Duration::MAX { String::new() } else { format!(" (limit {}s)", budget.as_secs()) };
        println!(
            "criterion {} {name}: {} | {} | {:.1}s{limit}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
