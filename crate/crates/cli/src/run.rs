//! Subcommand bodies. Each returns a JSON report, the names of failed checks
//! and any extra files to write next to the report.

use std::io::BufReader;

use anyhow::Context;
use cconcave::cconcavity::{certify_main, certify_technical, empirical_cconcavity, regime};
use cconcave::comparison::{
    check_alpha_inequality, check_convexity_radius, check_half_square_bound, check_hessian_comparison,
    check_sphere_identity, convexity_radius_bound, default_t_grid, fd_tol, half_square_slack_profile,
    ComparisonReport,
};
use cconcave::counterexample::{analyze, build_counterexample, csv_rows, write_csv};
use cconcave::error::Error;
use cconcave::field::SampleGrid;
use cconcave::manifold::ManifoldSpec;
use cconcave::transport::{check_cyclical_monotonicity, mccann_map, verify_optimality, PointCloud};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{CertifyMode, RunConfig, SweepParameter};

/// Result of one subcommand.
pub struct Outcome {
    pub report: Value,
    pub failures: Vec<String>,
    /// `(file name, contents)` written to the output directory.
    pub files: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    fn new(report: impl Serialize) -> anyhow::Result<Self> {
        Ok(Self { report: serde_json::to_value(report)?, failures: Vec::new(), files: Vec::new() })
    }

    fn require(&mut self, name: &str, pass: bool) {
        if !pass {
            self.failures.push(name.to_string());
        }
    }
}

fn grid(cfg: &RunConfig, samples: usize) -> SampleGrid {
    SampleGrid::uniform(&cfg.manifold, samples, cfg.seed)
}

pub fn compare(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let m = &cfg.manifold;
    let g = grid(cfg, cfg.grid.samples);
    let tol = cfg.tolerances.closed_form;
    let hessian = check_hessian_comparison(m, &g, tol);
    let half_square = check_half_square_bound(m, &g, tol);
    let alpha = check_alpha_inequality(&default_t_grid(cfg.compare.t_samples), tol)?;
    let reach = convexity_radius_bound(m).min(m.constants().diameter);
    let convexity = check_convexity_radius(
        m,
        &g.points[0],
        cfg.compare.convexity_fraction * reach,
        cfg.compare.convexity_pairs,
        cfg.seed,
        tol,
    )?;
    let (identity, slack) = match m {
        ManifoldSpec::Sphere { radius } => {
            let h = cfg.compare.fd_step;
            (Some(check_sphere_identity(*radius, &g, h, fd_tol(h))?), Some(half_square_slack_profile(m, 64)))
        }
        _ => (None, None),
    };
    let checks: Vec<&ComparisonReport> =
        [Some(&hessian), Some(&half_square), Some(&alpha), Some(&convexity), identity.as_ref()].into_iter().flatten().collect();
    let mut out = Outcome::new(json!({
        "hessian_comparison": hessian,
        "half_square_bound": half_square,
        "alpha_inequality": alpha,
        "convexity_radius": convexity,
        "sphere_identity": identity,
        "half_square_slack_profile": slack,
    }))?;
    for c in checks {
        out.require(&c.check, c.pass);
    }
    Ok(out)
}

pub fn certify(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let f = cfg.scalar_field()?;
    let g = grid(cfg, cfg.grid.samples);
    let cert = match cfg.certify.mode {
        CertifyMode::Technical => certify_technical(&f, &g, cfg.tolerances.value)?,
        CertifyMode::Main => certify_main(&f, cfg.certify.epsilon, &g, cfg.tolerances.value)?,
    };
    let mut out = Outcome::new(&cert)?;
    out.require("certificate", cert.is_certified());
    Ok(out)
}

pub fn check_cconcavity(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let f = cfg.scalar_field()?;
    let xs = grid(cfg, cfg.cconcavity.x_samples);
    let ys = SampleGrid::uniform(&cfg.manifold, cfg.cconcavity.y_samples, cfg.seed.wrapping_add(1));
    let certificate = certify_technical(&f, &ys, cfg.tolerances.value)?;
    let empirical = empirical_cconcavity(&f, &xs, &ys, cfg.tolerances.value)?;
    let mut out = Outcome::new(json!({ "certificate": certificate, "empirical": empirical }))?;
    out.require("empirical_cconcavity", empirical.pass);
    Ok(out)
}

pub fn counterexample(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let ce_cfg = cconcave::counterexample::CounterexampleConfig { seed: cfg.seed, ..cfg.counterexample.clone() };
    let ce = build_counterexample(&ce_cfg)?;
    let report = analyze(&ce)?;
    let rows = csv_rows(&ce.field, report.empirical.witness.as_ref(), ce_cfg.y_points, ce_cfg.seed)?;
    let mut csv = Vec::new();
    write_csv(&rows, &mut csv)?;
    let mut out = Outcome::new(json!({ "field": ce.field.spec(), "analysis": &report }))?;
    out.require("hessian_bound", report.hessian_bound_holds);
    out.require("violation", report.violation_found);
    out.require("mechanism", report.mechanism_holds);
    out.files.push(("counterexample.csv".into(), csv));
    Ok(out)
}

pub fn transport_verify(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let f = cfg.scalar_field()?;
    let cloud = match &cfg.transport.cloud {
        Some(path) => {
            let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let cloud = PointCloud::read_csv(BufReader::new(file))?;
            if cloud.manifold() != &cfg.manifold {
                return Err(Error::InvalidArgument("point cloud manifold differs from the configured one".into()).into());
            }
            cloud
        }
        None => PointCloud::random(&cfg.manifold, cfg.transport.n, cfg.seed)?,
    };
    let g = grid(cfg, cfg.grid.samples);
    let tol = cfg.tolerances.transport;
    let optimality = verify_optimality(&f, &cloud, &g, tol, cfg.transport.skip_certification)?;
    let images = mccann_map(&f, &cloud)?;
    let monotonicity = check_cyclical_monotonicity(&cloud, &images, cfg.transport.trials, cfg.seed, tol)?;
    let mut out = Outcome::new(json!({ "optimality": optimality, "monotonicity": monotonicity }))?;
    out.require("optimality", optimality.pass);
    out.require("cyclical_monotonicity", monotonicity.pass);
    for (name, c) in [("sources.csv", &cloud), ("images.csv", &images)] {
        let mut buf = Vec::new();
        c.write_csv(&mut buf)?;
        out.files.push((name.into(), buf));
    }
    Ok(out)
}

#[derive(Serialize)]
struct LambdaRow {
    lambda: f64,
    verdict: cconcave::cconcavity::Verdict,
    grad_bound: f64,
    delta: f64,
    gradient_margin: f64,
    hess_margin: f64,
    oscillation: f64,
    small_regime: bool,
    max_violation: f64,
}

#[derive(Serialize)]
struct MixRow {
    eps_mix: f64,
    error: Option<String>,
    hess_margin: Option<f64>,
    max_violation: Option<f64>,
    hess_h_min_eigenvalue: Option<f64>,
    predicted: Option<f64>,
}

pub fn sweep(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let mut csv = String::new();
    let mut out = match cfg.sweep.parameter {
        SweepParameter::Lambda => {
            let f = cfg.scalar_field()?;
            let g = grid(cfg, cfg.sweep.samples);
            let tol = cfg.tolerances.value;
            let mut rows = Vec::new();
            let mut sound = true;
            csv.push_str("lambda,verdict,delta,gradient_margin,hess_margin,max_violation\n");
            for &lambda in &cfg.sweep.values {
                let fl = f.scaled(lambda);
                let cert = certify_technical(&fl, &g, tol)?;
                let reg = regime(&fl, &g)?;
                let emp = empirical_cconcavity(&fl, &g, &g, tol)?;
                sound &= !cert.is_certified() || emp.pass;
                csv.push_str(&format!(
                    "{lambda},{:?},{:e},{:e},{:e},{:e}\n",
                    cert.verdict, cert.delta, cert.gradient_margin, cert.hess_margin, emp.max_violation
                ));
                rows.push(LambdaRow {
                    lambda,
                    verdict: cert.verdict,
                    grad_bound: cert.grad_bound,
                    delta: cert.delta,
                    gradient_margin: cert.gradient_margin,
                    hess_margin: cert.hess_margin,
                    oscillation: reg.oscillation,
                    small_regime: reg.small,
                    max_violation: emp.max_violation,
                });
            }
            let mut out = Outcome::new(json!({ "parameter": "lambda", "rows": rows }))?;
            out.require("certified_rows_pass_argmin_test", sound);
            out
        }
        SweepParameter::EpsMix => {
            let mut rows = Vec::new();
            let mut bound_holds = true;
            csv.push_str("eps_mix,hess_margin,max_violation,hess_h_min_eigenvalue,predicted\n");
            for &eps_mix in &cfg.sweep.values {
                let ce_cfg = cconcave::counterexample::CounterexampleConfig {
                    eps_mix,
                    seed: cfg.seed,
                    ..cfg.counterexample.clone()
                };
                let row = match build_counterexample(&ce_cfg) {
                    Ok(ce) => {
                        let r = analyze(&ce)?;
                        bound_holds &= r.hessian_bound_holds;
                        MixRow {
                            eps_mix,
                            error: None,
                            hess_margin: Some(r.hessian_bound.min_margin),
                            max_violation: Some(r.empirical.max_violation),
                            hess_h_min_eigenvalue: Some(r.mechanism.hess_h_min_eigenvalue),
                            predicted: Some(r.mechanism.predicted),
                        }
                    }
                    Err(e @ (Error::MixTooLarge { .. } | Error::ConstructionFailed(_))) => MixRow {
                        eps_mix,
                        error: Some(e.to_string()),
                        hess_margin: None,
                        max_violation: None,
                        hess_h_min_eigenvalue: None,
                        predicted: None,
                    },
                    Err(e) => return Err(e.into()),
                };
                let cell = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:e}"));
                csv.push_str(&format!(
                    "{eps_mix},{},{},{},{}\n",
                    cell(row.hess_margin),
                    cell(row.max_violation),
                    cell(row.hess_h_min_eigenvalue),
                    cell(row.predicted)
                ));
                rows.push(row);
            }
            let mut out = Outcome::new(json!({ "parameter": "eps_mix", "rows": rows }))?;
            out.require("hessian_bound", bound_holds);
            out
        }
    };
    out.files.push(("sweep.csv".into(), csv.into_bytes()));
    Ok(out)
}
