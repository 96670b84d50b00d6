//! Warm-started sweeps over a `lambda` grid.
//!
//! With equal weights, clusters only merge as `lambda` grows, so the
//! partitions along a path form a hierarchy. [`check_agglomeration`] verifies
//! that numerically and [`merge_tree`] turns a verified path into a dendrogram.
//! Merges are only observed at grid points; merges that happen between two grid
//! points show up as one event at the larger one.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{is_refinement, Dataset, Partition, Points};
use crate::solver::{solve, solve_with_state, SolverConfig, SplittingState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridSpacing {
    Linear,
    Geometric,
}

/// `start:stop:count:geometric|linear`, endpoints included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub spacing: GridSpacing,
}

impl LambdaGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let Self {
            start,
            stop,
            count,
            spacing,
        } = *self;
        if count == 0 {
            return Err(invalid("grid needs at least one point"));
        }
        if !(start >= 0.0) || !stop.is_finite() || !(stop >= start) {
            return Err(invalid(format!(
                "grid needs 0 <= start <= stop, got {start}..{stop}"
            )));
        }
        if count == 1 {
            return Ok(vec![start]);
        }
        let steps = (count - 1) as f64;
        let values: Vec<f64> = match spacing {
            GridSpacing::Linear => (0..count)
                .map(|k| start + (stop - start) * k as f64 / steps)
                .collect(),
            GridSpacing::Geometric => {
                if !(start > 0.0) {
                    return Err(invalid("geometric grid needs start > 0"));
                }
                let ratio = (stop / start).ln() / steps;
                (0..count)
                    .map(|k| start * (ratio * k as f64).exp())
                    .collect()
            }
        };
        let mut values = values;
        *values.last_mut().unwrap() = stop;
        validate_grid(&values)?;
        Ok(values)
    }
}

impl FromStr for LambdaGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, count, spacing] = parts.as_slice() else {
            return Err(invalid(format!(
                "lambda grid `{s}` is not start:stop:count:geometric|linear"
            )));
        };
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| invalid(format!("bad grid value `{v}`: {e}")))
        };
        let grid = Self {
            start: num(start)?,
            stop: num(stop)?,
            count: count
                .trim()
                .parse()
                .map_err(|e| invalid(format!("bad grid count `{count}`: {e}")))?,
            spacing: match spacing.trim() {
                "geometric" => GridSpacing::Geometric,
                "linear" => GridSpacing::Linear,
                other => return Err(invalid(format!("unknown grid spacing `{other}`"))),
            },
        };
        grid.values()?;
        Ok(grid)
    }
}

fn validate_grid(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(invalid("lambda grid is empty"));
    }
    if lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(invalid("lambda grid values must be finite and nonnegative"));
    }
    if let Some(w) = lambdas.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(invalid(format!(
            "lambda grid not strictly increasing at {} -> {}",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// Solver diagnostics for one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective_value: f64,
    pub converged: bool,
    pub x_star: Points,
}

/// Clusters of grid index `lambda_index - 1` that share one cluster at `lambda_index`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeEvent {
    pub lambda_index: usize,
    pub lambda: f64,
    pub children: Vec<Vec<usize>>,
    pub parent: Vec<usize>,
    /// Bisected merge threshold, when requested via [`refine_merge_lambdas`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refined_lambda: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterPath {
    pub lambdas: Vec<f64>,
    pub partitions: Vec<Partition>,
    pub merge_events: Vec<MergeEvent>,
    pub solutions_meta: Vec<PathPoint>,
}

impl ClusterPath {
    pub fn cluster_counts(&self) -> Vec<usize> {
        self.partitions
            .iter()
            .map(Partition::num_clusters)
            .collect()
    }
}

fn merge_events(lambdas: &[f64], partitions: &[Partition]) -> Vec<MergeEvent> {
    let mut events = Vec::new();
    for k in 1..partitions.len() {
        let (prev, next) = (&partitions[k - 1], &partitions[k]);
        let prev_clusters = prev.clusters();
        for parent in next.clusters() {
            let mut child_ids: Vec<usize> = parent.iter().map(|&i| prev.cluster_of(i)).collect();
            child_ids.sort_unstable();
            child_ids.dedup();
            if child_ids.len() > 1 {
                events.push(MergeEvent {
                    lambda_index: k,
                    lambda: lambdas[k],
                    children: child_ids
                        .iter()
                        .map(|&c| prev_clusters[c].clone())
                        .collect(),
                    parent,
                    refined_lambda: None,
                });
            }
        }
    }
    events
}

/// Factor applied to the scaled duals when moving from `prev` to `next`:
/// `prev / next`, the same rescaling that carries a fusion certificate from
/// `prev` to `next`.
fn dual_warm_factor(prev: f64, next: f64) -> f64 {
    prev / next
}

/// Solves at every grid value in ascending order, warm-starting each solve
/// from the previous splitting state.
pub fn compute_path(
    dataset: &Dataset,
    lambdas: &[f64],
    config: &SolverConfig,
) -> Result<ClusterPath> {
    validate_grid(lambdas)?;
    config.validate()?;
    let mut partitions = Vec::with_capacity(lambdas.len());
    let mut meta = Vec::with_capacity(lambdas.len());
    let mut state: Option<SplittingState> = None;
    let mut prev_lambda = 0.0;
    for &lambda in lambdas {
        if let Some(s) = state.as_mut() {
            s.scale_duals(dual_warm_factor(prev_lambda, lambda));
        }
        let cfg = SolverConfig {
            lambda,
            ..config.clone()
        };
        let (sol, next) = solve_with_state(dataset, &cfg, state.as_ref())?;
        partitions.push(sol.partition);
        meta.push(PathPoint {
            iterations: sol.iterations,
            primal_residual: sol.primal_residual,
            dual_residual: sol.dual_residual,
            objective_value: sol.objective_value,
            converged: sol.converged,
            x_star: sol.x_star,
        });
        state = Some(next);
        prev_lambda = lambda;
    }
    Ok(ClusterPath {
        merge_events: merge_events(lambdas, &partitions),
        lambdas: lambdas.to_vec(),
        partitions,
        solutions_meta: meta,
    })
}

/// Consecutive grid indices `(k, k + 1)` whose partitions are not nested.
pub fn check_agglomeration(path: &ClusterPath) -> Vec<(usize, usize)> {
    path.partitions
        .windows(2)
        .enumerate()
        .filter(|(_, w)| !is_refinement(&w[0], &w[1]).unwrap_or(false))
        .map(|(k, _)| (k, k + 1))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeNode {
    /// Grid value at which the children are first seen in one cluster.
    pub lambda: f64,
    pub children: Vec<Vec<usize>>,
    pub parent: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    /// Clusters at the smallest grid value.
    pub leaves: Vec<Vec<usize>>,
    /// Merge nodes in increasing `lambda`.
    pub nodes: Vec<MergeNode>,
}

/// Hierarchy induced by a path; fails if the path is not agglomerative.
pub fn merge_tree(path: &ClusterPath) -> Result<Dendrogram> {
    let violations = check_agglomeration(path);
    if !violations.is_empty() {
        return Err(Error::AgglomerationViolated { violations });
    }
    let leaves = path
        .partitions
        .first()
        .map(Partition::clusters)
        .unwrap_or_default();
    let nodes = path
        .merge_events
        .iter()
        .map(|e| MergeNode {
            lambda: e.lambda,
            children: e.children.clone(),
            parent: e.parent.clone(),
        })
        .collect();
    Ok(Dendrogram { leaves, nodes })
}

/// Bisects each merge event between its two bracketing grid values until the
/// bracket is narrower than `tol`, storing the smallest `lambda` found at
/// which the parent set is co-clustered.
pub fn refine_merge_lambdas(
    dataset: &Dataset,
    path: &mut ClusterPath,
    config: &SolverConfig,
    tol: f64,
) -> Result<()> {
    if !(tol > 0.0) {
        return Err(invalid(format!(
            "bisection tolerance must be positive, got {tol}"
        )));
    }
    for event in &mut path.merge_events {
        let mut lo = path.lambdas[event.lambda_index - 1];
        let mut hi = event.lambda;
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            let sol = solve(
                dataset,
                &SolverConfig {
                    lambda: mid,
                    ..config.clone()
                },
                None,
            )?;
            if sol.partition.co_clustered(&event.parent) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        event.refined_lambda = Some(hi);
    }
    Ok(())
}

/// Default bisection tolerance: `1e-6 * diameter / n`.
pub fn default_refine_tolerance(dataset: &Dataset) -> f64 {
    let scale = dataset.diameter() / dataset.len() as f64;
    1e-6 * if scale > 0.0 { scale } else { 1.0 }
}
