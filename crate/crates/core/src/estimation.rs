//! Conditional and joint probability estimation.
//!
//! Discrete conditionals sharpen the ratio of normalized centralities to
//! marginal probabilities with an exponent `alpha`; continuous conditionals
//! decode the centrality block into a mean and wrap it in a Beta density of
//! total concentration `beta`. Chaining conditionals in reverse column order
//! gives joint log-probabilities, whose sum over the dataset is the log
//! likelihood maximized by the `(alpha, beta)` grid search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::centrality::{
    attribute_distribution, build_personalization, solve_stationary, Evidence, SolverConfig,
};
use crate::error::{Error, Result};
use crate::graph::{AttributeLayout, BipartiteGraph, GraphView};
use crate::schema::{AttributeKind, BasisCenters, Cell, Dataset, Schema};

/// Clamp for unit-interval quantities before ratios and logs.
pub const UNIT_EPS: f64 = 1e-3;

const VARIANCE_FLOOR: f64 = 1e-6;
const VARIANCE_CAP: f64 = 0.999;

/// Peakedness of discrete conditionals (`alpha`) and concentration of
/// continuous conditionals (`beta = p + q`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub alpha: f64,
    pub beta: f64,
}

impl HyperParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be >= 0, got {alpha}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Config(format!("beta must be > 0, got {beta}")));
        }
        Ok(HyperParams { alpha, beta })
    }
}

/// Beta distribution parameters with `p, q > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaSpec {
    pub p: f64,
    pub q: f64,
}

impl BetaSpec {
    pub fn mean(&self) -> f64 {
        self.p / (self.p + self.q)
    }

    pub fn variance(&self) -> f64 {
        let s = self.p + self.q;
        self.p * self.q / (s * s * (s + 1.0))
    }

    /// Log density at `x`, evaluated at `clamp(x, eps, 1 - eps)` so boundary
    /// observations stay finite.
    pub fn log_density(&self, x: f64) -> f64 {
        let x = x.clamp(UNIT_EPS, 1.0 - UNIT_EPS);
        (self.p - 1.0) * x.ln() + (self.q - 1.0) * (1.0 - x).ln() - ln_beta(self.p, self.q)
    }
}

pub fn ln_beta(p: f64, q: f64) -> f64 {
    ln_gamma(p) + ln_gamma(q) - ln_gamma(p + q)
}

/// Beta spec with the given mean and total concentration `beta = p + q`.
/// The mean is clamped into `[eps, 1 - eps]` so both parameters stay positive.
pub fn beta_from_mean(mean: f64, beta: f64) -> BetaSpec {
    let mean = mean.clamp(UNIT_EPS, 1.0 - UNIT_EPS);
    BetaSpec { p: beta * mean, q: beta * (1.0 - mean) }
}

/// Marginal distribution of one attribute: Laplace-smoothed frequencies for
/// discrete attributes, moments of the normalized values plus a
/// method-of-moments Beta fit for continuous ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AttributeMarginal {
    Discrete { pmf: Vec<f64> },
    Continuous { mean: f64, variance: f64, beta: BetaSpec },
}

impl AttributeMarginal {
    pub fn pmf(&self) -> Option<&[f64]> {
        match self {
            AttributeMarginal::Discrete { pmf } => Some(pmf),
            _ => None,
        }
    }

    pub fn moments(&self) -> Option<(f64, f64)> {
        match self {
            AttributeMarginal::Continuous { mean, variance, .. } => Some((*mean, *variance)),
            _ => None,
        }
    }

    pub fn beta_spec(&self) -> Option<BetaSpec> {
        match self {
            AttributeMarginal::Continuous { beta, .. } => Some(*beta),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalModel {
    pub attributes: Vec<AttributeMarginal>,
}

impl MarginalModel {
    pub fn attr(&self, index: usize) -> &AttributeMarginal {
        &self.attributes[index]
    }
}

/// Marginals estimated directly from the dataset.
pub fn compute_marginals(dataset: &Dataset) -> Result<MarginalModel> {
    if dataset.n_rows() == 0 {
        return Err(Error::NoRows);
    }
    let mut attributes = Vec::with_capacity(dataset.n_attrs());
    for (attr, spec) in dataset.schema.attributes.iter().enumerate() {
        match &spec.kind {
            AttributeKind::Discrete { values } => {
                let mut counts = vec![0usize; values.len()];
                let mut observed = 0usize;
                for row in dataset.rows() {
                    if let Cell::Category(i) = row[attr] {
                        counts[i] += 1;
                        observed += 1;
                    }
                }
                if observed == 0 {
                    return Err(Error::AllMissing(spec.name.clone()));
                }
                let denom = (observed + values.len()) as f64;
                let pmf = counts.iter().map(|&c| (c as f64 + 1.0) / denom).collect();
                attributes.push(AttributeMarginal::Discrete { pmf });
            }
            AttributeKind::Continuous { .. } => {
                let mut values = Vec::new();
                for row in dataset.rows() {
                    if let Cell::Real(x) = row[attr] {
                        values.push(spec.normalize(x));
                    }
                }
                if values.is_empty() {
                    return Err(Error::AllMissing(spec.name.clone()));
                }
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let variance = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                attributes.push(AttributeMarginal::Continuous {
                    mean,
                    variance,
                    beta: beta_from_moments(mean, variance),
                });
            }
        }
    }
    Ok(MarginalModel { attributes })
}

/// Method-of-moments Beta fit with the mean and variance clamped away from
/// the degenerate boundary.
fn beta_from_moments(mean: f64, variance: f64) -> BetaSpec {
    let mean = mean.clamp(UNIT_EPS, 1.0 - UNIT_EPS);
    let cap = VARIANCE_CAP * mean * (1.0 - mean);
    let variance = variance.clamp(VARIANCE_FLOOR.min(cap), cap);
    let nu = mean * (1.0 - mean) / variance - 1.0;
    BetaSpec { p: mean * nu, q: (1.0 - mean) * nu }
}

/// Conditional probability mass function of one discrete attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalPmf {
    pub attribute: usize,
    pub probabilities: Vec<f64>,
}

impl ConditionalPmf {
    pub fn argmax(&self) -> usize {
        // ties break toward the lower value index
        let mut best = 0;
        for (i, &p) in self.probabilities.iter().enumerate() {
            if p > self.probabilities[best] {
                best = i;
            }
        }
        best
    }
}

/// The sharpening rule: probabilities proportional to `m_j * (c_j / m_j)^alpha`,
/// renormalized. `alpha = 0` returns the marginals exactly; `alpha = 1` the
/// normalized centralities exactly; zero centrality entries get probability
/// zero for any `alpha > 0`.
pub fn sharpen_pmf(block: &[f64], marginal: &[f64], alpha: f64) -> Vec<f64> {
    debug_assert_eq!(block.len(), marginal.len());
    let block_sum: f64 = block.iter().sum();
    debug_assert!(block_sum > 0.0, "centrality block must have positive sum");
    let weights: Vec<f64> = if alpha == 0.0 {
        marginal.to_vec()
    } else {
        block
            .iter()
            .zip(marginal)
            .map(|(&c, &m)| {
                let c = c / block_sum;
                if c == 0.0 {
                    0.0
                } else {
                    m * (c / m).powf(alpha)
                }
            })
            .collect()
    };
    let sum: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / sum).collect()
}

pub fn conditional_pmf(
    attribute: usize,
    block: &[f64],
    marginal: &[f64],
    alpha: f64,
) -> Result<ConditionalPmf> {
    if block.len() != marginal.len() {
        return Err(Error::DimensionMismatch { expected: marginal.len(), got: block.len() });
    }
    if marginal.iter().any(|&m| m <= 0.0) {
        return Err(Error::Config("marginal probabilities must be strictly positive".into()));
    }
    if block.iter().any(|&c| c < 0.0) || block.iter().sum::<f64>() <= 0.0 {
        return Err(Error::ZeroBlock(format!("attribute {attribute}")));
    }
    Ok(ConditionalPmf { attribute, probabilities: sharpen_pmf(block, marginal, alpha) })
}

/// Conditional mean of a continuous attribute: the normalized centrality
/// block decoded against the basis centers. No sharpening is applied to
/// continuous blocks; `beta` alone shapes the density.
pub fn conditional_mean(block: &[f64], centers: &BasisCenters) -> Result<f64> {
    crate::schema::decode_membership(block, centers)
}

/// Everything needed to estimate probabilities against one graph.
#[derive(Clone, Copy)]
pub struct EstimationContext<'a> {
    pub schema: &'a Schema,
    pub layout: &'a AttributeLayout,
    pub marginals: &'a MarginalModel,
    pub hyper: HyperParams,
    pub solver: SolverConfig,
}

impl<'a> EstimationContext<'a> {
    /// Solves the fixed point for the given evidence. Solver non-convergence
    /// propagates as an error at this level.
    pub fn solve(&self, view: GraphView<'_>, evidence: &Evidence, targets: &[usize]) -> Result<Vec<f64>> {
        let theta =
            build_personalization(evidence, self.schema, self.layout, view.n_objects(), targets)?;
        let solved = solve_stationary(view, &theta, &self.solver)?;
        if !solved.converged {
            return Err(Error::NoConvergence {
                iterations: solved.iterations,
                residual: solved.residual,
            });
        }
        Ok(solved.values)
    }

    /// Normalized centrality block of a discrete target. Empty evidence and
    /// evidence disconnected from every value of the target both degrade to
    /// the marginal pmf (the latter with a warning).
    pub fn discrete_block(
        &self,
        view: GraphView<'_>,
        evidence: &Evidence,
        target: usize,
    ) -> Result<Vec<f64>> {
        let marginal = self.marginal_pmf(target)?;
        if evidence.is_empty() {
            return Ok(marginal.to_vec());
        }
        let c = self.solve(view, evidence, &[target])?;
        match attribute_distribution(&c, target, self.layout, view.n_objects()) {
            Ok(block) => Ok(block),
            Err(Error::ZeroBlock(_)) => {
                log::warn!(
                    "evidence disconnected from every value of {:?}; using its marginal",
                    self.schema.attr(target).name
                );
                Ok(marginal.to_vec())
            }
            Err(e) => Err(e),
        }
    }

    /// Sharpened conditional pmf of a discrete target given the evidence.
    pub fn conditional_pmf(
        &self,
        view: GraphView<'_>,
        evidence: &Evidence,
        target: usize,
    ) -> Result<ConditionalPmf> {
        let block = self.discrete_block(view, evidence, target)?;
        conditional_pmf(target, &block, self.marginal_pmf(target)?, self.hyper.alpha)
    }

    /// Conditional mean of a continuous target, normalized. `None` means the
    /// evidence gave no signal (empty or disconnected); callers fall back to
    /// the attribute's marginal.
    pub fn conditional_mean(
        &self,
        view: GraphView<'_>,
        evidence: &Evidence,
        target: usize,
    ) -> Result<Option<f64>> {
        if evidence.is_empty() {
            return Ok(None);
        }
        let c = self.solve(view, evidence, &[target])?;
        match attribute_distribution(&c, target, self.layout, view.n_objects()) {
            Ok(block) => {
                let centers = BasisCenters::new(block.len());
                Ok(Some(conditional_mean(&block, &centers)?))
            }
            Err(Error::ZeroBlock(_)) => {
                log::warn!(
                    "evidence disconnected from every value of {:?}; using its marginal",
                    self.schema.attr(target).name
                );
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }

    /// Log probability (or log density) of the target's observed value given
    /// the listed evidence attributes of `point`.
    pub fn conditional_log_prob(
        &self,
        view: GraphView<'_>,
        point: &[Cell],
        target: usize,
        evidence_attrs: &[usize],
    ) -> Result<f64> {
        let mut evidence = Evidence::new();
        for &attr in evidence_attrs {
            match point[attr] {
                Cell::Category(i) => {
                    evidence.set(attr, crate::centrality::EvidenceValue::Category(i));
                }
                Cell::Real(x) => {
                    evidence.set(attr, crate::centrality::EvidenceValue::Real(x));
                }
                Cell::Missing => {
                    return Err(Error::MissingValue {
                        attribute: self.schema.attr(attr).name.clone(),
                    })
                }
            }
        }
        let term = self.chain_term(view, point, target, &evidence)?;
        Ok(term.eval(self.marginals, self.hyper.alpha, self.hyper.beta))
    }

    /// Chain-rule joint log probability of a fully observed point: attribute
    /// `i` conditioned on attributes `i+1..d`, with the last attribute
    /// contributing its marginal.
    pub fn joint_log_prob(&self, view: GraphView<'_>, point: &[Cell]) -> Result<f64> {
        let terms = self.row_terms(view, point)?;
        Ok(terms
            .iter()
            .map(|t| t.eval(self.marginals, self.hyper.alpha, self.hyper.beta))
            .sum())
    }

    fn marginal_pmf(&self, attr: usize) -> Result<&'a [f64]> {
        self.marginals
            .attr(attr)
            .pmf()
            .ok_or_else(|| Error::Schema(format!("attribute {attr} is not discrete")))
    }

    /// One position of the probability chain, with the solve already done but
    /// the hyperparameter arithmetic deferred.
    fn chain_term(
        &self,
        view: GraphView<'_>,
        point: &[Cell],
        target: usize,
        evidence: &Evidence,
    ) -> Result<ChainTerm> {
        let spec = self.schema.attr(target);
        match (&spec.kind, point[target]) {
            (AttributeKind::Discrete { .. }, Cell::Category(observed)) => {
                if evidence.is_empty() {
                    let m = self.marginal_pmf(target)?;
                    Ok(ChainTerm::LogConst(m[observed].ln()))
                } else {
                    let block = self.discrete_block(view, evidence, target)?;
                    Ok(ChainTerm::Discrete { attribute: target, block, observed })
                }
            }
            (AttributeKind::Continuous { .. }, Cell::Real(raw)) => {
                let observed = spec.normalize(raw);
                match self.conditional_mean(view, evidence, target)? {
                    Some(mean) => Ok(ChainTerm::Continuous { mean, observed }),
                    None => {
                        let spec = self
                            .marginals
                            .attr(target)
                            .beta_spec()
                            .expect("continuous attribute carries a Beta marginal");
                        Ok(ChainTerm::LogConst(spec.log_density(observed)))
                    }
                }
            }
            (_, Cell::Missing) => {
                Err(Error::MissingValue { attribute: spec.name.clone() })
            }
            _ => Err(Error::Schema(format!("cell type mismatch for {:?}", spec.name))),
        }
    }

    /// All chain terms of a fully observed row. The solves behind these terms
    /// do not depend on `(alpha, beta)`, which is what makes the fit's grid
    /// sweep cacheable.
    pub(crate) fn row_terms(&self, view: GraphView<'_>, point: &[Cell]) -> Result<Vec<ChainTerm>> {
        if point.len() != self.schema.len() {
            return Err(Error::DimensionMismatch { expected: self.schema.len(), got: point.len() });
        }
        let d = self.schema.len();
        let mut terms = Vec::with_capacity(d);
        for target in 0..d {
            let evidence_attrs: Vec<usize> = (target + 1..d).collect();
            let mut evidence = Evidence::new();
            for &attr in &evidence_attrs {
                match point[attr] {
                    Cell::Category(i) => {
                        evidence.set(attr, crate::centrality::EvidenceValue::Category(i));
                    }
                    Cell::Real(x) => {
                        evidence.set(attr, crate::centrality::EvidenceValue::Real(x));
                    }
                    Cell::Missing => {
                        return Err(Error::MissingValue {
                            attribute: self.schema.attr(attr).name.clone(),
                        })
                    }
                }
            }
            terms.push(self.chain_term(view, point, target, &evidence)?);
        }
        Ok(terms)
    }
}

/// A cached position of the probability chain: everything that required a
/// solve, with only the `(alpha, beta)` arithmetic left to do.
#[derive(Debug, Clone)]
pub(crate) enum ChainTerm {
    Discrete { attribute: usize, block: Vec<f64>, observed: usize },
    Continuous { mean: f64, observed: f64 },
    LogConst(f64),
}

impl ChainTerm {
    pub(crate) fn eval(&self, marginals: &MarginalModel, alpha: f64, beta: f64) -> f64 {
        match self {
            ChainTerm::Discrete { attribute, block, observed } => {
                let m = marginals.attr(*attribute).pmf().expect("discrete marginal");
                sharpen_pmf(block, m, alpha)[*observed].ln()
            }
            ChainTerm::Continuous { mean, observed } => {
                beta_from_mean(*mean, beta).log_density(*observed)
            }
            ChainTerm::LogConst(v) => *v,
        }
    }
}

/// Sum of joint log probabilities over the dataset (Eq. 11). With `loo` set,
/// each row is scored on the graph with its own object node masked so stored
/// points cannot vote for themselves.
pub fn log_likelihood(
    graph: &BipartiteGraph,
    dataset: &Dataset,
    ctx: &EstimationContext<'_>,
    loo: bool,
) -> Result<f64> {
    let per_row: Vec<f64> = (0..dataset.n_rows())
        .into_par_iter()
        .map(|n| {
            let view = if loo { graph.masked(n)? } else { graph.view() };
            ctx.joint_log_prob(view, dataset.row(n))
        })
        .collect::<Result<Vec<_>>>()?;
    // sequential sum keeps the result independent of thread scheduling
    Ok(per_row.iter().sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub alpha: f64,
    pub beta: f64,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub hyper: HyperParams,
    pub surface: Vec<SurfacePoint>,
}

pub fn default_alpha_grid() -> Vec<f64> {
    (0..=15).map(|a| a as f64).collect()
}

pub fn default_beta_grid() -> Vec<f64> {
    (1..=15).map(|b| b as f64).collect()
}

/// Maximum-likelihood grid search for `(alpha, beta)`.
///
/// The centrality solves are independent of the hyperparameters, so every
/// per-(row, chain-position) block is computed once and the whole grid is
/// swept with pure arithmetic against that cache. Ties break toward the
/// smaller `(alpha, beta)` pair in lexicographic order.
pub fn fit_hyperparams(
    graph: &BipartiteGraph,
    dataset: &Dataset,
    marginals: &MarginalModel,
    solver: SolverConfig,
    alpha_grid: &[f64],
    beta_grid: &[f64],
    loo: bool,
) -> Result<FitResult> {
    if alpha_grid.is_empty() || beta_grid.is_empty() {
        return Err(Error::Config("hyperparameter grids must be nonempty".into()));
    }
    // hyper values in the context are irrelevant to the cached terms
    let ctx = EstimationContext {
        schema: &dataset.schema,
        layout: graph.layout(),
        marginals,
        hyper: HyperParams { alpha: 1.0, beta: 1.0 },
        solver,
    };
    let cache: Vec<Vec<ChainTerm>> = (0..dataset.n_rows())
        .into_par_iter()
        .map(|n| {
            let view = if loo { graph.masked(n)? } else { graph.view() };
            ctx.row_terms(view, dataset.row(n))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut surface = Vec::with_capacity(alpha_grid.len() * beta_grid.len());
    let mut best: Option<SurfacePoint> = None;
    for &alpha in alpha_grid {
        for &beta in beta_grid {
            HyperParams::new(alpha, beta)?;
            let value: f64 = cache
                .iter()
                .map(|terms| terms.iter().map(|t| t.eval(marginals, alpha, beta)).sum::<f64>())
                .sum();
            let point = SurfacePoint { alpha, beta, log_likelihood: value };
            surface.push(point);
            let improves = match &best {
                None => true,
                Some(b) => value > b.log_likelihood,
            };
            if improves {
                best = Some(point);
            }
        }
    }
    let best = best.expect("nonempty grid");
    Ok(FitResult {
        hyper: HyperParams { alpha: best.alpha, beta: best.beta },
        surface,
    })
}
