//! Subgradient certificates for cluster membership.
//!
//! For a candidate index set `C` with centroid `a_C`, look for multipliers
//! `z_ij` (`i, j` in `C`, `i != j`) with
//!
//! ```text
//!   a_i - a_C = lambda * sum_{j in C, j != i} z_ij   for all i in C
//!   |z_ij| <= 1,   z_ij = -z_ji
//! ```
//!
//! If such multipliers exist, every point of `C` has the same representative in
//! the sum-of-norms optimizer at `lambda`, whatever the remaining points are.
//! Conversely, a set that is exactly one cluster of the optimizer always admits
//! them. The converse only covers exact clusters, so a feasible certificate
//! says nothing about whether `C` is maximal.
//!
//! Multipliers are stored once per unordered pair (`i < j` in the order of
//! `C`); `z_ji` is the negation, which makes antisymmetry structural.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{norm, Dataset};
use crate::solver::{pair_count, pair_index, SonSolution};

pub const DEFAULT_CERT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_REFINE_ITERATIONS: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateConfig {
    /// Slack on both the unit-norm bound and the equality residual.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for CertificateConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_CERT_TOLERANCE,
            max_iterations: DEFAULT_REFINE_ITERATIONS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    /// Dataset indices of the candidate set, in the order used for pair storage.
    pub cluster: Vec<usize>,
    pub dim: usize,
    /// `z_ij` for local pairs `i < j`, row-major, lexicographic.
    pub z: Vec<f64>,
    pub lambda: f64,
    pub max_norm: f64,
    pub equality_residual: f64,
}

impl Multipliers {
    /// `z_ij` for local positions `i != j` in `cluster`.
    pub fn get(&self, i: usize, j: usize) -> Vec<f64> {
        let k = self.cluster.len();
        let d = self.dim;
        if i < j {
            self.z[pair_index(k, i, j) * d..][..d].to_vec()
        } else {
            self.z[pair_index(k, j, i) * d..][..d]
                .iter()
                .map(|v| -v)
                .collect()
        }
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.max_norm <= 1.0 + tol && self.equality_residual <= tol
    }

    fn refresh(&mut self, dataset: &Dataset) {
        self.max_norm = max_pair_norm(&self.z, self.dim);
        self.equality_residual = equality_residual(dataset, &self.cluster, &self.z, self.lambda);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateStatus {
    FeasibleByLeastSquares,
    FeasibleByRefinement,
    /// Inconclusive: running out of iterations does not prove infeasibility.
    InfeasibleAtRefinementLimit,
}

impl CertificateStatus {
    pub fn is_feasible(self) -> bool {
        !matches!(self, Self::InfeasibleAtRefinementLimit)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateResult {
    pub status: CertificateStatus,
    pub multipliers: Multipliers,
    pub iterations_used: usize,
}

fn validate_cluster(dataset: &Dataset, cluster: &[usize]) -> Result<()> {
    if cluster.is_empty() {
        return Err(invalid("candidate cluster must be nonempty"));
    }
    let mut seen = vec![false; dataset.len()];
    for &i in cluster {
        if i >= dataset.len() {
            return Err(invalid(format!(
                "index {i} out of range for n={}",
                dataset.len()
            )));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(invalid(format!("duplicate index {i} in candidate cluster")));
        }
    }
    Ok(())
}

fn validate_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    Ok(())
}

fn centroid(dataset: &Dataset, cluster: &[usize]) -> Vec<f64> {
    let mut c = vec![0.0; dataset.dim()];
    for &i in cluster {
        for (s, v) in c.iter_mut().zip(dataset.point(i)) {
            *s += v;
        }
    }
    let k = cluster.len() as f64;
    c.iter_mut().for_each(|s| *s /= k);
    c
}

fn max_pair_norm(z: &[f64], d: usize) -> f64 {
    z.chunks_exact(d).map(norm).fold(0.0, f64::max)
}

/// `sum_{j != i} z_ij` for every local `i`, row-major `k x d`.
fn row_sums(z: &[f64], k: usize, d: usize) -> Vec<f64> {
    let mut sums = vec![0.0; k * d];
    let mut p = 0;
    for i in 0..k {
        for j in (i + 1)..k {
            for c in 0..d {
                let v = z[p * d + c];
                sums[i * d + c] += v;
                sums[j * d + c] -= v;
            }
            p += 1;
        }
    }
    sums
}

fn equality_residual(dataset: &Dataset, cluster: &[usize], z: &[f64], lambda: f64) -> f64 {
    let (k, d) = (cluster.len(), dataset.dim());
    let center = centroid(dataset, cluster);
    let sums = row_sums(z, k, d);
    cluster
        .iter()
        .enumerate()
        .map(|(local, &i)| {
            let r: Vec<f64> = (0..d)
                .map(|c| dataset.point(i)[c] - center[c] - lambda * sums[local * d + c])
                .collect();
            norm(&r)
        })
        .fold(0.0, f64::max)
}

/// Closed-form minimum-norm solution of the equalities:
/// `z_ij = (a_i - a_j) / (lambda * |C|)`.
pub fn least_squares_multipliers(
    dataset: &Dataset,
    cluster: &[usize],
    lambda: f64,
) -> Result<Multipliers> {
    validate_cluster(dataset, cluster)?;
    validate_lambda(lambda)?;
    let (k, d) = (cluster.len(), dataset.dim());
    let scale = 1.0 / (lambda * k as f64);
    let mut z = Vec::with_capacity(pair_count(k) * d);
    for (p, &i) in cluster.iter().enumerate() {
        for &j in &cluster[p + 1..] {
            z.extend(
                dataset
                    .point(i)
                    .iter()
                    .zip(dataset.point(j))
                    .map(|(a, b)| (a - b) * scale),
            );
        }
    }
    let mut m = Multipliers {
        cluster: cluster.to_vec(),
        dim: d,
        z,
        lambda,
        max_norm: 0.0,
        equality_residual: 0.0,
    };
    m.refresh(dataset);
    Ok(m)
}

/// Per-pair radial clip onto the unit ball.
fn project_unit_balls(z: &mut [f64], d: usize) {
    for pair in z.chunks_exact_mut(d) {
        let len = norm(pair);
        if len > 1.0 {
            pair.iter_mut().for_each(|v| *v /= len);
        }
    }
}

/// Orthogonal projection onto the antisymmetric solutions of the equalities:
/// `z_ij -= (r_i - r_j) / |C|` with `r` the row-sum residual.
fn project_affine(z: &mut [f64], target: &[f64], k: usize, d: usize) {
    let mut r = row_sums(z, k, d);
    r.iter_mut().zip(target).for_each(|(r, t)| *r -= t);
    let inv_k = 1.0 / k as f64;
    let mut p = 0;
    for i in 0..k {
        for j in (i + 1)..k {
            for c in 0..d {
                z[p * d + c] -= (r[i * d + c] - r[j * d + c]) * inv_k;
            }
            p += 1;
        }
    }
}

/// Dykstra alternating projections between the equality set and the product
/// of unit balls, started from the least-squares point.
///
/// Returns the iterate (taken after the equality projection) with the smallest
/// `max_norm`.
pub fn refine_multipliers(
    dataset: &Dataset,
    cluster: &[usize],
    lambda: f64,
    max_iterations: usize,
) -> Result<CertificateResult> {
    refine_multipliers_with(
        dataset,
        cluster,
        lambda,
        &CertificateConfig {
            max_iterations,
            ..CertificateConfig::default()
        },
    )
}

pub fn refine_multipliers_with(
    dataset: &Dataset,
    cluster: &[usize],
    lambda: f64,
    config: &CertificateConfig,
) -> Result<CertificateResult> {
    if cluster.len() < 2 {
        return Err(invalid("refinement needs at least two indices"));
    }
    let ls = least_squares_multipliers(dataset, cluster, lambda)?;
    if ls.is_feasible(config.tol) {
        return Ok(CertificateResult {
            status: CertificateStatus::FeasibleByLeastSquares,
            multipliers: ls,
            iterations_used: 0,
        });
    }

    let (k, d) = (cluster.len(), dataset.dim());
    let center = centroid(dataset, cluster);
    let target: Vec<f64> = cluster
        .iter()
        .flat_map(|&i| {
            dataset
                .point(i)
                .iter()
                .zip(&center)
                .map(|(a, c)| (a - c) / lambda)
                .collect::<Vec<_>>()
        })
        .collect();

    let mut best = ls.clone();
    let mut z = ls.z;
    // Dykstra increment for the ball constraint; the affine set needs none.
    let mut increment = vec![0.0; z.len()];
    let mut shifted = vec![0.0; z.len()];
    for iteration in 1..=config.max_iterations {
        for ((s, z), q) in shifted.iter_mut().zip(&z).zip(&increment) {
            *s = z + q;
        }
        z.copy_from_slice(&shifted);
        project_unit_balls(&mut z, d);
        for ((q, s), z) in increment.iter_mut().zip(&shifted).zip(&z) {
            *q = s - z;
        }
        project_affine(&mut z, &target, k, d);

        let max_norm = max_pair_norm(&z, d);
        if max_norm < best.max_norm {
            best.z.copy_from_slice(&z);
            best.refresh(dataset);
            if best.is_feasible(config.tol) {
                return Ok(CertificateResult {
                    status: CertificateStatus::FeasibleByRefinement,
                    multipliers: best,
                    iterations_used: iteration,
                });
            }
        }
    }
    Ok(CertificateResult {
        status: CertificateStatus::InfeasibleAtRefinementLimit,
        multipliers: best,
        iterations_used: config.max_iterations,
    })
}

/// Least-squares multipliers if they already satisfy the norm bound, else refinement.
pub fn check_sufficient(
    dataset: &Dataset,
    cluster: &[usize],
    lambda: f64,
) -> Result<CertificateResult> {
    check_sufficient_with(dataset, cluster, lambda, &CertificateConfig::default())
}

pub fn check_sufficient_with(
    dataset: &Dataset,
    cluster: &[usize],
    lambda: f64,
    config: &CertificateConfig,
) -> Result<CertificateResult> {
    let ls = least_squares_multipliers(dataset, cluster, lambda)?;
    if ls.is_feasible(config.tol) || cluster.len() < 2 {
        let status = if ls.is_feasible(config.tol) {
            CertificateStatus::FeasibleByLeastSquares
        } else {
            CertificateStatus::InfeasibleAtRefinementLimit
        };
        return Ok(CertificateResult {
            status,
            multipliers: ls,
            iterations_used: 0,
        });
    }
    refine_multipliers_with(dataset, cluster, lambda, config)
}

fn vacuous(dataset: &Dataset, i: usize, lambda: f64) -> CertificateResult {
    CertificateResult {
        status: CertificateStatus::FeasibleByLeastSquares,
        multipliers: Multipliers {
            cluster: vec![i],
            dim: dataset.dim(),
            z: Vec::new(),
            lambda,
            max_norm: 0.0,
            equality_residual: 0.0,
        },
        iterations_used: 0,
    }
}

/// Certificate for each cluster of a solver output, in cluster-id order.
///
/// Every exact cluster of the optimizer admits multipliers, so an infeasible
/// entry points at solver inaccuracy or at clusters merged by the extraction
/// tolerance.
pub fn certify_partition(
    dataset: &Dataset,
    solution: &SonSolution,
) -> Result<Vec<CertificateResult>> {
    certify_partition_with(dataset, solution, &CertificateConfig::default())
}

pub fn certify_partition_with(
    dataset: &Dataset,
    solution: &SonSolution,
    config: &CertificateConfig,
) -> Result<Vec<CertificateResult>> {
    if solution.partition.len() != dataset.len() {
        return Err(invalid("solution does not match dataset size"));
    }
    solution
        .partition
        .clusters()
        .par_iter()
        .map(|members| match members.as_slice() {
            [single] => Ok(vacuous(dataset, *single, solution.lambda)),
            _ => check_sufficient_with(dataset, members, solution.lambda, config),
        })
        .collect()
}

/// Multipliers valid at `lambda` rescaled to `lambda_bar >= lambda`:
/// `z' = z * lambda / lambda_bar`. The equalities keep holding and every norm
/// shrinks, so feasibility carries over to larger `lambda`.
pub fn rescale_certificate(m: &Multipliers, lambda_bar: f64) -> Result<Multipliers> {
    if !(lambda_bar >= m.lambda) || !lambda_bar.is_finite() {
        return Err(invalid(format!(
            "lambda_bar ({lambda_bar}) must be at least the certificate's lambda ({})",
            m.lambda
        )));
    }
    let factor = m.lambda / lambda_bar;
    Ok(Multipliers {
        cluster: m.cluster.clone(),
        dim: m.dim,
        z: m.z.iter().map(|v| v * factor).collect(),
        lambda: lambda_bar,
        max_norm: m.max_norm * factor,
        equality_residual: m.equality_residual,
    })
}
