//! Spherical Gaussian mixtures and recovery of their high-density cores.
//!
//! For component `m` let `V_m` be the samples within `theta * sigma_m` of
//! `mu_m`. With `F(theta, d)` the probability that a sample lands within
//! `theta` standard deviations of its mean ([`chi2_cdf`]):
//!
//! - every `V_m` is fused once
//!   `lambda >= 2 theta sigma_m / ((F(theta, d) w_m - eps) n)`, with
//!   probability exponentially close to 1 in `n`;
//! - `V_m` and `V_m'` stay apart while `lambda < |mu_m - mu_m'| / (2 (n - 1))`.
//!
//! The window is nonempty for all components at once when the means are
//! further apart than `16 d sigma_max / (c_d w_min)` with `c_d = F(2d, d)`
//! (taking `theta = 2d`, `eps = c_d w_min / 2`).

mod chi2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use chi2::{chi2_cdf, gamma_p, ln_gamma};

use crate::error::{invalid, Error, Result};
use crate::model::{distance, Dataset, Partition, Points};
use crate::solver::{solve, SolverConfig};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixture")]
pub struct MixtureModel {
    pub means: Vec<Vec<f64>>,
    /// Standard deviations of the spherical components.
    pub sigmas: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMixture {
    means: Vec<Vec<f64>>,
    sigmas: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawMixture> for MixtureModel {
    type Error = Error;

    fn try_from(raw: RawMixture) -> Result<Self> {
        Self::new(raw.means, raw.sigmas, raw.weights)
    }
}

impl MixtureModel {
    pub fn new(means: Vec<Vec<f64>>, sigmas: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let k = means.len();
        if k == 0 {
            return Err(invalid("mixture needs at least one component"));
        }
        if sigmas.len() != k || weights.len() != k {
            return Err(invalid(format!(
                "mixture has {k} means but {} sigmas and {} weights",
                sigmas.len(),
                weights.len()
            )));
        }
        let d = means[0].len();
        if d == 0 || means.iter().any(|m| m.len() != d) {
            return Err(invalid("means must share one positive dimension"));
        }
        if means.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("means must be finite"));
        }
        if sigmas.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(invalid("standard deviations must be positive and finite"));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(invalid("weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(Self {
            means,
            sigmas,
            weights,
        })
    }

    /// Equal-weight mixture with a shared standard deviation.
    pub fn uniform(means: Vec<Vec<f64>>, sigma: f64) -> Result<Self> {
        let k = means.len();
        Self::new(means, vec![sigma; k], vec![1.0 / k as f64; k])
    }

    pub fn components(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigmas.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn weight_min(&self) -> f64 {
        self.weights.iter().copied().fold(f64::MAX, f64::min)
    }

    /// Same model with every mean shifted by `offset`.
    pub fn translated(&self, offset: &[f64]) -> Result<Self> {
        if offset.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: offset.len(),
            });
        }
        let means = self
            .means
            .iter()
            .map(|m| m.iter().zip(offset).map(|(a, b)| a + b).collect())
            .collect();
        Self::new(means, self.sigmas.clone(), self.weights.clone())
    }
}

/// Box–Muller pair from two uniforms; `u1` must lie in `(0, 1]`.
#[inline]
fn box_muller(u1: f64, u2: f64) -> (f64, f64) {
    let r = (-2.0 * u1.ln()).sqrt();
    let angle = std::f64::consts::TAU * u2;
    (r * angle.cos(), r * angle.sin())
}

/// Draws `n` i.i.d. samples with their component labels.
///
/// Generator: ChaCha8 seeded with `seed`. Per sample, one uniform picks the
/// component by inverse CDF over the weights, then coordinates are filled in
/// pairs by Box–Muller on `(1 - U1, U2)`; for odd `d` the last pair's second
/// deviate is discarded.
pub fn sample_mixture(model: &MixtureModel, n: usize, seed: u64) -> (Points, Vec<usize>) {
    let d = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    let last = model.components() - 1;
    for _ in 0..n {
        let pick: f64 = rng.random();
        let mut acc = 0.0;
        let m = model
            .weights
            .iter()
            .position(|w| {
                acc += w;
                pick < acc
            })
            .unwrap_or(last);
        labels.push(m);
        let (mean, sigma) = (&model.means[m], model.sigmas[m]);
        let mut c = 0;
        while c < d {
            let u1 = 1.0 - rng.random::<f64>();
            let (z0, z1) = box_muller(u1, rng.random());
            data.push(mean[c] + sigma * z0);
            if c + 1 < d {
                data.push(mean[c + 1] + sigma * z1);
            }
            c += 2;
        }
    }
    let points = Points::new(n, d, data).expect("samples are finite");
    (points, labels)
}

/// `V_m` for every component: indices within `theta * sigma_m` of the true mean `mu_m`.
/// Sets may overlap.
pub fn core_sets(model: &MixtureModel, points: &Points, theta: f64) -> Vec<Vec<usize>> {
    model
        .means
        .iter()
        .zip(&model.sigmas)
        .map(|(mu, sigma)| {
            (0..points.len())
                .filter(|&i| distance(points.row(i), mu) <= theta * sigma)
                .collect()
        })
        .collect()
}

/// Smallest `lambda` at which `V_m` is guaranteed (with high probability) to fuse:
/// `2 theta sigma_m / ((F(theta, d) w_m - eps) n)`.
pub fn lambda_lower_bound(
    model: &MixtureModel,
    m: usize,
    theta: f64,
    epsilon: f64,
    n: usize,
) -> Result<f64> {
    if m >= model.components() {
        return Err(invalid(format!("component {m} out of range")));
    }
    if !(theta > 0.0) || n == 0 {
        return Err(invalid("lower bound needs theta > 0 and n >= 1"));
    }
    let mass = chi2_cdf(theta, model.dim()) * model.weights[m];
    if !(epsilon < mass) {
        return Err(invalid(format!(
            "epsilon ({epsilon}) must be below F(theta, d) * w_m = {mass}"
        )));
    }
    Ok(2.0 * theta * model.sigmas[m] / ((mass - epsilon) * n as f64))
}

/// `min_{m < m'} |mu_m - mu_m'| / (2 (n - 1))`; any smaller `lambda` keeps the cores apart.
pub fn lambda_upper_bound(model: &MixtureModel, n: usize) -> Result<f64> {
    let k = model.components();
    if k < 2 {
        return Err(invalid("upper bound needs at least two components"));
    }
    if n < 2 {
        return Err(invalid("upper bound needs n >= 2"));
    }
    let mut closest = f64::INFINITY;
    for m in 0..k {
        for q in (m + 1)..k {
            closest = closest.min(distance(&model.means[m], &model.means[q]));
        }
    }
    Ok(closest / (2.0 * (n - 1) as f64))
}

/// `c_d = F(2d, d)`.
pub fn separation_constant(d: usize) -> f64 {
    chi2_cdf(2.0 * d as f64, d)
}

/// Minimum mean separation `16 d sigma_max / (c_d w_min)` above which a single
/// `lambda` recovers every core.
pub fn separation_bound(model: &MixtureModel) -> f64 {
    let d = model.dim();
    16.0 * d as f64 * model.sigma_max() / (separation_constant(d) * model.weight_min())
}

/// `c_d w_min / 2`.
pub fn default_epsilon(model: &MixtureModel) -> f64 {
    0.5 * separation_constant(model.dim()) * model.weight_min()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaBounds {
    pub lower: Vec<f64>,
    /// `None` for a single component.
    pub upper: Option<f64>,
}

impl LambdaBounds {
    pub fn compute(model: &MixtureModel, n: usize, theta: f64, epsilon: f64) -> Result<Self> {
        let lower = (0..model.components())
            .map(|m| lambda_lower_bound(model, m, theta, epsilon, n))
            .collect::<Result<Vec<_>>>()?;
        let upper = if model.components() >= 2 {
            Some(lambda_upper_bound(model, n)?)
        } else {
            None
        };
        Ok(Self { lower, upper })
    }

    pub fn max_lower(&self) -> f64 {
        self.lower.iter().copied().fold(0.0, f64::max)
    }

    /// Geometric mean of the largest lower bound and the upper bound.
    pub fn midpoint(&self) -> Result<f64> {
        let upper = self
            .upper
            .ok_or_else(|| invalid("midpoint needs at least two components"))?;
        let lower = self.max_lower();
        if lower >= upper {
            return Err(Error::EmptyLambdaWindow { lower, upper });
        }
        Ok((lower * upper).sqrt())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaPolicy {
    Explicit(f64),
    MidpointOfBounds,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialStatus {
    Solved,
    /// Largest lower bound is not below the upper bound; nothing was solved.
    InfeasibleLambdaWindow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    /// `|V_m|`
    pub core_size: usize,
    /// All of `V_m` shares one solver cluster (vacuous for empty sets).
    pub coherent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub trial: usize,
    pub seed: u64,
    pub status: TrialStatus,
    pub lambda_used: Option<f64>,
    pub bounds: LambdaBounds,
    pub components: Vec<ComponentReport>,
    /// `distinct[m][q]`: the clusters touched by `V_m` and `V_q` are disjoint.
    /// The diagonal is `false`.
    pub distinct: Vec<Vec<bool>>,
    pub num_clusters: Option<usize>,
    pub solver_converged: Option<bool>,
}

impl RecoveryReport {
    /// Solved, every core coherent, every pair of cores distinct.
    pub fn recovered(&self) -> bool {
        let k = self.components.len();
        self.status == TrialStatus::Solved
            && self.components.iter().all(|c| c.coherent)
            && (0..k).all(|m| (0..k).all(|q| m == q || self.distinct[m][q]))
    }
}

fn cluster_ids(partition: &Partition, members: &[usize]) -> Vec<usize> {
    let mut ids: Vec<usize> = members.iter().map(|&i| partition.cluster_of(i)).collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// Full configuration of a seeded recovery experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryExperiment {
    pub model: MixtureModel,
    pub n: usize,
    pub theta: f64,
    pub epsilon: f64,
    pub policy: LambdaPolicy,
    pub trials: usize,
    pub seed: u64,
    /// `lambda` is overwritten per trial.
    pub solver: SolverConfig,
}

impl RecoveryExperiment {
    /// Runs the trials, possibly in parallel; trial `t` samples with seed
    /// `seed + t`, so every report is independent of scheduling.
    pub fn run(&self) -> Result<Vec<RecoveryReport>> {
        if self.trials == 0 {
            return Err(invalid("experiment needs at least one trial"));
        }
        if !(self.theta > 0.0) {
            return Err(invalid("theta must be positive"));
        }
        let bounds = LambdaBounds::compute(&self.model, self.n, self.theta, self.epsilon)?;
        let lambda = match self.policy {
            LambdaPolicy::Explicit(l) if !(l >= 0.0) || !l.is_finite() => {
                return Err(invalid(format!(
                    "explicit lambda must be finite and >= 0, got {l}"
                )))
            }
            LambdaPolicy::Explicit(l) => Some(l),
            LambdaPolicy::MidpointOfBounds => match bounds.midpoint() {
                Ok(l) => Some(l),
                Err(Error::EmptyLambdaWindow { .. }) => None,
                Err(e) => return Err(e),
            },
        };
        (0..self.trials)
            .into_par_iter()
            .map(|trial| self.run_trial(trial, lambda, &bounds))
            .collect()
    }

    fn run_trial(
        &self,
        trial: usize,
        lambda: Option<f64>,
        bounds: &LambdaBounds,
    ) -> Result<RecoveryReport> {
        let k = self.model.components();
        let seed = self.seed.wrapping_add(trial as u64);
        let (points, _) = sample_mixture(&self.model, self.n, seed);
        let cores = core_sets(&self.model, &points, self.theta);
        let mut report = RecoveryReport {
            trial,
            seed,
            status: TrialStatus::InfeasibleLambdaWindow,
            lambda_used: lambda,
            bounds: bounds.clone(),
            components: cores
                .iter()
                .map(|c| ComponentReport {
                    core_size: c.len(),
                    coherent: false,
                })
                .collect(),
            distinct: vec![vec![false; k]; k],
            num_clusters: None,
            solver_converged: None,
        };
        let Some(lambda) = lambda else {
            return Ok(report);
        };
        let dataset = Dataset::new(points)?;
        let solution = solve(
            &dataset,
            &SolverConfig {
                lambda,
                ..self.solver.clone()
            },
            None,
        )?;
        let ids: Vec<Vec<usize>> = cores
            .iter()
            .map(|c| cluster_ids(&solution.partition, c))
            .collect();
        for (comp, ids) in report.components.iter_mut().zip(&ids) {
            comp.coherent = ids.len() <= 1;
        }
        for m in 0..k {
            for q in 0..k {
                report.distinct[m][q] = m != q && ids[m].iter().all(|id| !ids[q].contains(id));
            }
        }
        report.status = TrialStatus::Solved;
        report.num_clusters = Some(solution.partition.num_clusters());
        report.solver_converged = Some(solution.converged);
        Ok(report)
    }
}

/// [`RecoveryExperiment::run`] with default solver settings.
pub fn run_recovery_experiment(
    model: &MixtureModel,
    n: usize,
    theta: f64,
    epsilon: f64,
    policy: LambdaPolicy,
    trials: usize,
    seed: u64,
) -> Result<Vec<RecoveryReport>> {
    RecoveryExperiment {
        model: model.clone(),
        n,
        theta,
        epsilon,
        policy,
        trials,
        seed,
        solver: SolverConfig::default(),
    }
    .run()
}
