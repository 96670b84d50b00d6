//! Operator-splitting solver for the sum-of-norms objective.
//!
//! Every pair `i < j` gets a split variable `u_ij` standing in for
//! `x_i - x_j` and a scaled dual `y_ij`. One sweep runs
//!
//! 1. x-update, closed form on the complete fusion graph:
//!    `x_i = (a_i + rho * b_i + rho * sum_l a_l) / (1 + rho * n)`
//!    where `b_i = sum_{j != i} s_ij` and `s_ij = u_ij - y_ij` (negated for `i > j`);
//! 2. u-update: `u_ij = prox(x_i - x_j + y_ij, lambda / rho)` (block soft threshold);
//! 3. y-update: `y_ij += x_i - x_j - u_ij`.
//!
//! `sum_i b_i = 0` by antisymmetry, so every iterate has the same centroid as
//! the data.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{default_delta, extract_clusters, norm, objective, Dataset, Partition, Points};

/// Merge tolerance handed to [`extract_clusters`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterDelta {
    /// [`default_delta`] of the data. The iterate's own diameter shrinks to
    /// residual level once everything fuses, so it cannot set the scale.
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub lambda: f64,
    pub rho: f64,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub max_iterations: usize,
    pub cluster_delta: ClusterDelta,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            rho: 1.0,
            tol_primal: 1e-8,
            tol_dual: 1e-8,
            max_iterations: 100_000,
            cluster_delta: ClusterDelta::Auto,
        }
    }
}

impl SolverConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn tolerance(mut self, tol: f64) -> Self {
        self.tol_primal = tol;
        self.tol_dual = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(invalid(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(invalid(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.tol_primal > 0.0) || !(self.tol_dual > 0.0) {
            return Err(invalid("tolerances must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations must be at least 1"));
        }
        if let ClusterDelta::Fixed(delta) = self.cluster_delta {
            if !(delta > 0.0) {
                return Err(invalid(format!(
                    "cluster delta must be positive, got {delta}"
                )));
            }
        }
        Ok(())
    }
}

/// Number of unordered pairs among `n` points.
#[inline]
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Position of pair `(i, j)`, `i < j`, in lexicographic pair order.
#[inline]
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// Iterate of the splitting method. Pair quantities are stored row-major in
/// lexicographic `(i, j)`, `i < j` order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplittingState {
    pub x: Points,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
}

impl SplittingState {
    /// `x = a`, `u_ij = a_i - a_j`, `y = 0`.
    pub fn cold(dataset: &Dataset) -> Self {
        let (n, d) = (dataset.len(), dataset.dim());
        let mut u = Vec::with_capacity(pair_count(n) * d);
        for i in 0..n {
            for j in (i + 1)..n {
                u.extend(
                    dataset
                        .point(i)
                        .iter()
                        .zip(dataset.point(j))
                        .map(|(a, b)| a - b),
                );
            }
        }
        Self {
            x: dataset.points().clone(),
            u,
            y: vec![0.0; pair_count(n) * d],
        }
    }

    pub fn check_shape(&self, dataset: &Dataset) -> Result<()> {
        let (n, d) = (dataset.len(), dataset.dim());
        if self.x.len() != n || self.x.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                found: self.x.len() * self.x.dim(),
            });
        }
        let pairs = pair_count(n) * d;
        for found in [self.u.len(), self.y.len()] {
            if found != pairs {
                return Err(Error::DimensionMismatch {
                    expected: pairs,
                    found,
                });
            }
        }
        Ok(())
    }

    /// Multiplies every scaled dual by `factor`.
    pub fn scale_duals(&mut self, factor: f64) {
        self.y.iter_mut().for_each(|y| *y *= factor);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `max_{i<j} |x_i - x_j - u_ij|`
    pub primal: f64,
    /// `rho * max_{i<j} |u_ij - u_ij_prev|`
    pub dual: f64,
}

/// Result of [`solve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SonSolution {
    pub x_star: Points,
    pub partition: Partition,
    pub lambda: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective_value: f64,
    /// Both residuals fell below their tolerances before the iteration cap.
    pub converged: bool,
}

/// Proximal operator of `kappa * |.|`: radial shrink by `kappa`, zero inside the ball.
pub fn prox_group_norm(v: &[f64], kappa: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    shrink_in_place(&mut out, kappa);
    out
}

#[inline]
fn shrink_in_place(v: &mut [f64], kappa: f64) {
    let len = norm(v);
    if len <= kappa {
        v.iter_mut().for_each(|c| *c = 0.0);
    } else if kappa > 0.0 {
        let scale = 1.0 - kappa / len;
        v.iter_mut().for_each(|c| *c *= scale);
    }
}

/// One x/u/y sweep, updating `state` in place.
///
/// The state must be shaped for `dataset`; see [`SplittingState::check_shape`].
pub fn splitting_step(
    dataset: &Dataset,
    state: &mut SplittingState,
    config: &SolverConfig,
) -> Residuals {
    let (n, d) = (dataset.len(), dataset.dim());
    let rho = config.rho;
    let kappa = config.lambda / rho;

    // x-update; b accumulated in fixed pair order.
    let mut b = vec![0.0; n * d];
    let mut p = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let (u, y) = (&state.u[p * d..(p + 1) * d], &state.y[p * d..(p + 1) * d]);
            for k in 0..d {
                let s = u[k] - y[k];
                b[i * d + k] += s;
                b[j * d + k] -= s;
            }
            p += 1;
        }
    }
    let sum_a = dataset.column_sums();
    let denom = 1.0 + rho * n as f64;
    let a = dataset.as_slice();
    for (idx, x) in state.x.as_mut_slice().iter_mut().enumerate() {
        *x = (a[idx] + rho * b[idx] + rho * sum_a[idx % d]) / denom;
    }

    // u- and y-updates.
    let x = state.x.as_slice();
    let mut v = vec![0.0; d];
    let mut primal = 0.0_f64;
    let mut dual = 0.0_f64;
    let mut p = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let (xi, xj) = (&x[i * d..(i + 1) * d], &x[j * d..(j + 1) * d]);
            let range = p * d..(p + 1) * d;
            let y = &mut state.y[range.clone()];
            for k in 0..d {
                v[k] = xi[k] - xj[k] + y[k];
            }
            shrink_in_place(&mut v, kappa);
            let u = &mut state.u[range];
            let mut r2 = 0.0;
            let mut du2 = 0.0;
            for k in 0..d {
                let r = xi[k] - xj[k] - v[k];
                y[k] += r;
                r2 += r * r;
                let du = v[k] - u[k];
                du2 += du * du;
                u[k] = v[k];
            }
            primal = primal.max(r2);
            dual = dual.max(du2);
            p += 1;
        }
    }
    Residuals {
        primal: primal.sqrt(),
        dual: rho * dual.sqrt(),
    }
}

/// Minimizes the sum-of-norms objective, cold-started unless `warm_start` is given.
///
/// Hitting `max_iterations` is not an error; the returned solution carries its
/// residuals and `converged == false`.
pub fn solve(
    dataset: &Dataset,
    config: &SolverConfig,
    warm_start: Option<&SplittingState>,
) -> Result<SonSolution> {
    solve_with_state(dataset, config, warm_start).map(|(sol, _)| sol)
}

/// Like [`solve`], also returning the final splitting state for warm starts.
pub fn solve_with_state(
    dataset: &Dataset,
    config: &SolverConfig,
    warm_start: Option<&SplittingState>,
) -> Result<(SonSolution, SplittingState)> {
    config.validate()?;
    let mut state = match warm_start {
        Some(s) => {
            s.check_shape(dataset)?;
            s.clone()
        }
        None => SplittingState::cold(dataset),
    };

    let mut residuals = Residuals {
        primal: f64::INFINITY,
        dual: f64::INFINITY,
    };
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iterations {
        residuals = splitting_step(dataset, &mut state, config);
        iterations += 1;
        if residuals.primal <= config.tol_primal && residuals.dual <= config.tol_dual {
            converged = true;
            break;
        }
    }

    let delta = match config.cluster_delta {
        ClusterDelta::Auto => default_delta(dataset.points()),
        ClusterDelta::Fixed(delta) => delta,
    };
    let solution = SonSolution {
        partition: extract_clusters(&state.x, delta)?,
        objective_value: objective(dataset, &state.x, config.lambda)?,
        x_star: state.x.clone(),
        lambda: config.lambda,
        iterations,
        primal_residual: residuals.primal,
        dual_residual: residuals.dual,
        converged,
    };
    Ok((solution, state))
}
