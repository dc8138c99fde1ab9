//! Discrete optimal transport for the cost `½d²`: McCann maps
//! `T = exp(−∇f)`, an exact assignment solver and c-cyclical monotonicity
//! sampling.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cconcavity::{certify_technical, Verdict};
use crate::error::{Error, Result};
use crate::field::{point_coords, SampleGrid, ScalarField};
use crate::manifold::{ManifoldSpec, Point};

/// Largest problem accepted by [`optimal_assignment`].
pub const MAX_POINTS: usize = 512;

/// Largest problem accepted by the enumeration oracle.
pub const MAX_BRUTE_FORCE: usize = 10;

/// Largest subset whose permutations are enumerated in monotonicity trials.
pub const MAX_CYCLE: usize = 6;

const WEIGHT_TOL: f64 = 1e-12;

/// Finitely many points on a manifold with optional probability weights.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    manifold: ManifoldSpec,
    points: Vec<Point>,
    weights: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn new(manifold: &ManifoldSpec, points: Vec<Point>, weights: Option<Vec<f64>>) -> Result<Self> {
        if points.len() > MAX_POINTS {
            return Err(Error::SizeLimit { n: points.len(), limit: MAX_POINTS });
        }
        if let Some(p) = points.iter().find(|p| !manifold.contains(p)) {
            return Err(Error::InvalidArgument(format!("point {:?} is not on the manifold", p.coords())));
        }
        if let Some(w) = &weights {
            if w.len() != points.len() {
                return Err(Error::SizeMismatch { left: points.len(), right: w.len() });
            }
            let sum: f64 = w.iter().sum();
            if w.iter().any(|x| !(*x >= 0.0)) || (sum - 1.0).abs() > WEIGHT_TOL {
                return Err(Error::InvalidArgument(format!("weights must be non-negative and sum to 1, sum = {sum}")));
            }
        }
        Ok(Self { manifold: manifold.clone(), points, weights })
    }

    /// `n` uniform random points.
    pub fn random(manifold: &ManifoldSpec, n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..n).map(|_| manifold.random_point(&mut rng)).collect();
        Self::new(manifold, points, None)
    }

    /// `n` random points within distance `radius` of `center`.
    pub fn random_in_ball(manifold: &ManifoldSpec, center: &Point, radius: f64, n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..n)
            .map(|_| {
                let r = radius * rng.gen::<f64>().sqrt();
                let dir = manifold.random_unit_tangent(center, &mut rng);
                manifold.exp_map(center, &(dir.vector * r))
            })
            .collect();
        Self::new(manifold, points, None)
    }

    pub fn manifold(&self) -> &ManifoldSpec {
        &self.manifold
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Weight of point `i` (`1/n` when no weights were given).
    pub fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i],
            None => 1.0 / self.points.len() as f64,
        }
    }

    pub fn has_uniform_weights(&self) -> bool {
        let n = self.points.len() as f64;
        self.weights.as_ref().is_none_or(|w| w.iter().all(|x| (x - 1.0 / n).abs() <= WEIGHT_TOL))
    }

    /// CSV with the manifold as JSON on a leading `#` line, then a column header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# {}", serde_json::to_string(&self.manifold).map_err(std::io::Error::other)?)?;
        let d = self.manifold.ambient_dim();
        let mut header: Vec<String> = ["x", "y", "z"][..d].iter().map(|s| s.to_string()).collect();
        if self.weights.is_some() {
            header.push("weight".into());
        }
        writeln!(out, "{}", header.join(","))?;
        for (i, p) in self.points.iter().enumerate() {
            let mut row: Vec<String> = point_coords(&self.manifold, p).iter().map(|x| format!("{x:?}")).collect();
            if let Some(w) = &self.weights {
                row.push(format!("{:?}", w[i]));
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let bad = |msg: String| Error::InvalidArgument(format!("point cloud csv: {msg}"));
        let mut lines = input.lines();
        let mut next = || lines.next().transpose().map_err(|e| bad(e.to_string()));
        let first = next()?.ok_or_else(|| bad("empty input".into()))?;
        let json = first.strip_prefix('#').ok_or_else(|| bad("missing '# <manifold json>' line".into()))?;
        let manifold: ManifoldSpec = serde_json::from_str(json.trim()).map_err(|e| bad(e.to_string()))?;
        manifold.validate()?;
        let header = next()?.ok_or_else(|| bad("missing column header".into()))?;
        let columns: Vec<&str> = header.split(',').map(str::trim).collect();
        let d = manifold.ambient_dim();
        let weighted = match columns.len() {
            n if n == d => false,
            n if n == d + 1 && columns[d] == "weight" => true,
            _ => return Err(bad(format!("unexpected header {header:?}"))),
        };
        let mut points = Vec::new();
        let mut weights = Vec::new();
        while let Some(line) = next()? {
            if line.trim().is_empty() {
                continue;
            }
            let values: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|e| bad(format!("{e} in {line:?}"))))
                .collect::<Result<_>>()?;
            if values.len() != columns.len() {
                return Err(bad(format!("row {line:?} has {} fields, expected {}", values.len(), columns.len())));
            }
            points.push(manifold.point(&values[..d])?);
            if weighted {
                weights.push(values[d]);
            }
        }
        Self::new(&manifold, points, weighted.then_some(weights))
    }
}

/// `Tᵢ = exp_{xᵢ}(−∇f(xᵢ))`, carrying the weights over.
pub fn mccann_map(f: &ScalarField, cloud: &PointCloud) -> Result<PointCloud> {
    let m = f.manifold();
    if m != cloud.manifold() {
        return Err(Error::InvalidArgument("field and cloud live on different manifolds".into()));
    }
    let inj = m.constants().injectivity_radius;
    let images = cloud
        .points
        .iter()
        .map(|x| {
            let g = f.grad(x)?;
            if g.norm() >= inj {
                return Err(Error::CutLocus { distance: g.norm(), inj });
            }
            Ok(m.exp_map(x, &(-g.vector)))
        })
        .collect::<Result<_>>()?;
    Ok(PointCloud { manifold: m.clone(), points: images, weights: cloud.weights.clone() })
}

/// `Cᵢⱼ = ½d²(xᵢ, yⱼ)`.
pub fn cost_matrix(sources: &PointCloud, targets: &PointCloud) -> Result<DMatrix<f64>> {
    if sources.len() != targets.len() {
        return Err(Error::SizeMismatch { left: sources.len(), right: targets.len() });
    }
    if sources.manifold != targets.manifold {
        return Err(Error::InvalidArgument("clouds live on different manifolds".into()));
    }
    let m = &sources.manifold;
    let n = sources.len();
    let rows: Vec<Vec<f64>> =
        sources.points.par_iter().map(|x| targets.points.iter().map(|y| m.cost(x, y)).collect()).collect();
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// A permutation with its total cost.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assignment {
    /// `sigma[i]` is the column matched to row `i`.
    pub sigma: Vec<usize>,
    pub cost: f64,
}

/// `Σᵢ C[i, σ(i)]`, summed in row order.
pub fn assignment_cost(matrix: &DMatrix<f64>, sigma: &[usize]) -> Result<f64> {
    if matrix.nrows() != matrix.ncols() || sigma.len() != matrix.nrows() {
        return Err(Error::SizeMismatch { left: matrix.nrows(), right: sigma.len() });
    }
    let mut seen = vec![false; sigma.len()];
    for &j in sigma {
        if j >= sigma.len() || std::mem::replace(&mut seen[j], true) {
            return Err(Error::InvalidArgument(format!("{sigma:?} is not a permutation")));
        }
    }
    Ok(sigma.iter().enumerate().map(|(i, &j)| matrix[(i, j)]).sum())
}

fn check_square(matrix: &DMatrix<f64>, limit: usize) -> Result<usize> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::SizeMismatch { left: n, right: matrix.ncols() });
    }
    if n > limit {
        return Err(Error::SizeLimit { n, limit });
    }
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("cost matrix has non-finite entries".into()));
    }
    Ok(n)
}

/// Minimum-cost perfect matching by the Hungarian method with potentials, O(n³).
pub fn optimal_assignment(matrix: &DMatrix<f64>) -> Result<Assignment> {
    let n = check_square(matrix, MAX_POINTS)?;
    if n == 0 {
        return Ok(Assignment { sigma: Vec::new(), cost: 0.0 });
    }
    // 1-based arrays; row_of[j] is the row matched to column j, column 0 is a sentinel
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = matrix[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut sigma = vec![0; n];
    for j in 1..=n {
        sigma[row_of[j] - 1] = j - 1;
    }
    let cost = assignment_cost(matrix, &sigma)?;
    Ok(Assignment { sigma, cost })
}

/// Next permutation in lexicographic order; `false` after the last one.
fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else { return false };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).expect("exists");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Enumerates all permutations; among minimizers returns the lexicographically smallest.
pub fn brute_force_assignment(matrix: &DMatrix<f64>) -> Result<Assignment> {
    let n = check_square(matrix, MAX_BRUTE_FORCE)?;
    let mut p: Vec<usize> = (0..n).collect();
    let mut best = Assignment { sigma: p.clone(), cost: assignment_cost(matrix, &p)? };
    while next_permutation(&mut p) {
        let c = assignment_cost(matrix, &p)?;
        if c < best.cost {
            best = Assignment { sigma: p.clone(), cost: c };
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub trials: usize,
    pub permutations_checked: usize,
    /// `min (Σ c(xᵢ, T_{σ(i)}) − Σ c(xᵢ, Tᵢ))` over sampled subsets and `σ`.
    pub min_slack: f64,
    pub worst_subset: Vec<usize>,
    /// `worst_sigma[k]` is the position in `worst_subset` whose target is paired with `worst_subset[k]`.
    pub worst_sigma: Vec<usize>,
    pub tol: f64,
    pub pass: bool,
}

/// Samples subsets of size at most [`MAX_CYCLE`] and enumerates all their
/// permutations; every tenth trial instead applies a random permutation of all points.
pub fn check_cyclical_monotonicity(
    sources: &PointCloud,
    targets: &PointCloud,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<MonotonicityReport> {
    let c = cost_matrix(sources, targets)?;
    let n = c.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = MonotonicityReport {
        trials,
        permutations_checked: 0,
        min_slack: f64::INFINITY,
        worst_subset: Vec::new(),
        worst_sigma: Vec::new(),
        tol,
        pass: true,
    };
    if n == 0 {
        return Ok(report);
    }
    let all: Vec<usize> = (0..n).collect();
    let record = |subset: &[usize], sigma: &[usize], report: &mut MonotonicityReport| {
        let paired: f64 = subset.iter().map(|&i| c[(i, i)]).sum();
        let permuted: f64 = subset.iter().zip(sigma).map(|(&i, &k)| c[(i, subset[k])]).sum();
        report.permutations_checked += 1;
        let slack = permuted - paired;
        if slack < report.min_slack {
            report.min_slack = slack;
            report.worst_subset = subset.to_vec();
            report.worst_sigma = sigma.to_vec();
        }
    };
    for t in 0..trials {
        if t % 10 == 9 {
            let mut sigma = all.clone();
            sigma.shuffle(&mut rng);
            record(&all, &sigma, &mut report);
            continue;
        }
        let k = rng.gen_range(1..=MAX_CYCLE.min(n));
        let subset: Vec<usize> = all.choose_multiple(&mut rng, k).copied().collect();
        let mut sigma: Vec<usize> = (0..k).collect();
        loop {
            record(&subset, &sigma, &mut report);
            if !next_permutation(&mut sigma) {
                break;
            }
        }
    }
    report.pass = report.min_slack >= -tol;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimalityReport {
    pub n: usize,
    /// Verdict of the technical certificate on the given grid, if one was requested.
    pub certificate: Option<Verdict>,
    /// `Σ c(xᵢ, Tᵢ)`.
    pub paired_cost: f64,
    pub optimal: Assignment,
    /// `paired_cost − optimal.cost`.
    pub gap: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Checks that pairing each `xᵢ` with `Tᵢ` is an optimal assignment.
///
/// Unless `skip_certification` is set, `f` must be certified by
/// [`certify_technical`] on `grid` first.
pub fn verify_optimality(
    f: &ScalarField,
    cloud: &PointCloud,
    grid: &SampleGrid,
    tol: f64,
    skip_certification: bool,
) -> Result<OptimalityReport> {
    if !cloud.has_uniform_weights() {
        return Err(Error::InvalidArgument("assignment verification needs uniform weights".into()));
    }
    let certificate = if skip_certification {
        None
    } else {
        let cert = certify_technical(f, grid, tol.max(crate::cconcavity::VALUE_TOL))?;
        if !cert.is_certified() {
            return Err(Error::VerificationFailed(format!("field is not certified ({:?})", cert.verdict)));
        }
        Some(cert.verdict)
    };
    let images = mccann_map(f, cloud)?;
    let c = cost_matrix(cloud, &images)?;
    let n = c.nrows();
    let identity: Vec<usize> = (0..n).collect();
    let paired_cost = assignment_cost(&c, &identity)?;
    let optimal = optimal_assignment(&c)?;
    let gap = paired_cost - optimal.cost;
    Ok(OptimalityReport { n, certificate, paired_cost, optimal, gap, tol, pass: gap <= tol })
}
