//! Soft clustering by alternating stationary-distribution and membership
//! updates.
//!
//! Each cluster is represented by a personalization vector over the object
//! nodes. One iteration solves the damped Katz equation per cluster, reads
//! the object-block distribution, normalizes per object across clusters to
//! get memberships, and rescales centralities by memberships to get the next
//! personalization vectors. At the fixed point the stationary distributions
//! reproduce the personalization vectors.

use rayon::prelude::*;

use crate::centrality::{object_distribution, solve_stationary, SolverConfig};
use crate::error::{Error, Result};
use crate::graph::GraphView;
use crate::sampling::RandomSource;

#[derive(Debug, Clone, Copy)]
pub struct ClusterConfig {
    /// Damping for the per-cluster solves. Smaller values give crisper
    /// clusters.
    pub damping: f64,
    /// Convergence threshold on the largest single personalization change.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Step tolerance for the inner stationary solves.
    pub solver_tolerance: f64,
    pub solver_max_iterations: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            damping: 0.85,
            tolerance: 1e-7,
            max_iterations: 300,
            solver_tolerance: 1e-9,
            solver_max_iterations: 1000,
        }
    }
}

impl ClusterConfig {
    fn solver(&self) -> SolverConfig {
        SolverConfig {
            damping: self.damping,
            tolerance: self.solver_tolerance,
            max_iterations: self.solver_max_iterations,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClusterState {
    /// `N x K` membership matrix; every row sums to 1.
    pub memberships: Vec<Vec<f64>>,
    /// `K` personalization vectors over the object nodes; each sums to 1.
    pub thetas: Vec<Vec<f64>>,
    pub damping: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Clusters reseeded after collapsing to an empty personalization.
    pub restarts: usize,
    /// Largest deviation of any membership row sum from 1 seen across all
    /// iterations.
    pub max_membership_sum_error: f64,
    /// Largest deviation of any personalization sum from 1 seen across all
    /// iterations.
    pub max_theta_sum_error: f64,
}

impl ClusterState {
    pub fn k(&self) -> usize {
        self.thetas.len()
    }

    /// Hard labels by greatest membership; ties break toward the lower
    /// cluster index.
    pub fn hard_labels(&self) -> Vec<usize> {
        self.memberships
            .iter()
            .map(|row| {
                let mut best = 0;
                for (k, &m) in row.iter().enumerate() {
                    if m > row[best] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }
}

/// One full update: solve per cluster, read object distributions, update
/// memberships and personalization vectors.
pub struct ClusterIteration {
    pub thetas: Vec<Vec<f64>>,
    pub memberships: Vec<Vec<f64>>,
    /// Object-block stationary distributions per cluster.
    pub centralities: Vec<Vec<f64>>,
    /// Largest single personalization change against the input.
    pub delta: f64,
    /// Clusters whose personalization collapsed to zero mass this iteration.
    pub collapsed: Vec<usize>,
}

pub fn cluster_iterate(
    view: GraphView<'_>,
    thetas: &[Vec<f64>],
    config: &ClusterConfig,
) -> Result<ClusterIteration> {
    let n = view.n_objects();
    let k = thetas.len();
    let solver = config.solver();

    let centralities: Vec<Vec<f64>> = thetas
        .par_iter()
        .map(|theta| {
            let mut full = vec![0.0; view.len()];
            full[..n].copy_from_slice(theta);
            let solved = solve_stationary(view, &full, &solver)?;
            if !solved.converged {
                return Err(Error::NoConvergence {
                    iterations: solved.iterations,
                    residual: solved.residual,
                });
            }
            object_distribution(&solved.values, n)
        })
        .collect::<Result<Vec<_>>>()?;

    // memberships: normalize per object across clusters
    let mut memberships = vec![vec![0.0; k]; n];
    for (i, row) in memberships.iter_mut().enumerate() {
        let total: f64 = centralities.iter().map(|c| c[i]).sum();
        if total > 0.0 {
            for (j, c) in centralities.iter().enumerate() {
                row[j] = c[i] / total;
            }
        } else {
            // object unreachable from every cluster (e.g. masked or all-missing row)
            row.iter_mut().for_each(|m| *m = 1.0 / k as f64);
        }
    }

    // personalization update: centrality scaled by membership, normalized per cluster
    let mut next_thetas = vec![vec![0.0; n]; k];
    let mut collapsed = Vec::new();
    let mut delta: f64 = 0.0;
    for j in 0..k {
        let weights: Vec<f64> =
            (0..n).map(|i| centralities[j][i] * memberships[i][j]).collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            collapsed.push(j);
            next_thetas[j] = thetas[j].clone();
            continue;
        }
        for (i, w) in weights.iter().enumerate() {
            let t = w / total;
            delta = delta.max((t - thetas[j][i]).abs());
            next_thetas[j][i] = t;
        }
    }

    Ok(ClusterIteration { thetas: next_thetas, memberships, centralities, delta, collapsed })
}

/// Uniform-positive random personalization over the object nodes.
pub fn random_theta(n: usize, rng: &mut RandomSource) -> Vec<f64> {
    let mut theta: Vec<f64> = (0..n).map(|_| rng.next_unit() + f64::MIN_POSITIVE).collect();
    let sum: f64 = theta.iter().sum();
    theta.iter_mut().for_each(|x| *x /= sum);
    theta
}

/// Runs the clustering loop from random personalization vectors until the
/// largest personalization change drops below the tolerance. Collapsed
/// clusters are reseeded from fresh random vectors and counted.
pub fn cluster(
    view: GraphView<'_>,
    k: usize,
    config: &ClusterConfig,
    rng: &mut RandomSource,
) -> Result<ClusterState> {
    if k == 0 {
        return Err(Error::Config("cluster count must be at least 1".into()));
    }
    if view.n_objects() == 0 {
        return Err(Error::NoRows);
    }
    let n = view.n_objects();
    let mut thetas: Vec<Vec<f64>> = (0..k).map(|_| random_theta(n, rng)).collect();
    let mut memberships = vec![vec![1.0 / k as f64; k]; n];
    let mut restarts = 0usize;
    let mut max_membership_sum_error: f64 = 0.0;
    let mut max_theta_sum_error: f64 = 0.0;

    for iteration in 1..=config.max_iterations {
        let step = cluster_iterate(view, &thetas, config)?;
        for j in &step.collapsed {
            thetas[*j] = random_theta(n, rng);
            restarts += 1;
        }
        let reseeded = !step.collapsed.is_empty();
        for (j, theta) in step.thetas.into_iter().enumerate() {
            if !step.collapsed.contains(&j) {
                thetas[j] = theta;
            }
        }
        memberships = step.memberships;

        for row in &memberships {
            max_membership_sum_error =
                max_membership_sum_error.max((row.iter().sum::<f64>() - 1.0).abs());
        }
        for theta in &thetas {
            max_theta_sum_error = max_theta_sum_error.max((theta.iter().sum::<f64>() - 1.0).abs());
        }

        if !reseeded && step.delta <= config.tolerance {
            return Ok(ClusterState {
                memberships,
                thetas,
                damping: config.damping,
                iterations: iteration,
                converged: true,
                restarts,
                max_membership_sum_error,
                max_theta_sum_error,
            });
        }
    }
    Ok(ClusterState {
        memberships,
        thetas,
        damping: config.damping,
        iterations: config.max_iterations,
        converged: false,
        restarts,
        max_membership_sum_error,
        max_theta_sum_error,
    })
}
