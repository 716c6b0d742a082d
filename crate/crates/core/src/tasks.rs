//! Applications of the estimated distributions: classification, regression,
//! missing-value imputation, outlier scoring, random vector generation, and
//! leave-one-out cross-validation.

use rayon::prelude::*;

use crate::centrality::Evidence;
use crate::error::{Error, Result};
use crate::estimation::ConditionalPmf;
use crate::graph::GraphView;
use crate::model::Model;
use crate::sampling::{gibbs_run, sample_conditional, GibbsConfig, GibbsInit, RandomSource};
use crate::schema::{AttributeKind, Cell, Dataset};

#[derive(Debug, Clone)]
pub struct Classification {
    pub predicted: usize,
    pub pmf: ConditionalPmf,
}

/// Most likely value of a discrete target given the point's observed cells.
pub fn classify(model: &Model, point: &[Cell], target: usize) -> Result<Classification> {
    classify_on(model.graph().view(), model, point, target)
}

/// Classification against a masked graph view (used for leave-one-out).
pub fn classify_masked(
    model: &Model,
    point: &[Cell],
    target: usize,
    masked_object: usize,
) -> Result<Classification> {
    classify_on(model.graph().masked(masked_object)?, model, point, target)
}

fn classify_on(
    view: GraphView<'_>,
    model: &Model,
    point: &[Cell],
    target: usize,
) -> Result<Classification> {
    check_point(model, point)?;
    if !model.schema().attr(target).is_discrete() {
        return Err(Error::Schema(format!(
            "classification target {:?} is not discrete",
            model.schema().attr(target).name
        )));
    }
    let evidence = Evidence::from_row(point, &[target]);
    let pmf = model.context().conditional_pmf(view, &evidence, target)?;
    Ok(Classification { predicted: pmf.argmax(), pmf })
}

/// Conditional-mean prediction for a continuous target, denormalized.
pub fn regress(model: &Model, point: &[Cell], target: usize) -> Result<f64> {
    check_point(model, point)?;
    let spec = model.schema().attr(target);
    if !spec.is_continuous() {
        return Err(Error::Schema(format!(
            "regression target {:?} is not continuous",
            spec.name
        )));
    }
    let evidence = Evidence::from_row(point, &[target]);
    let ctx = model.context();
    let mean = match ctx.conditional_mean(model.graph().view(), &evidence, target)? {
        Some(mean) => mean,
        None => {
            let (mean, _) = ctx.marginals.attr(target).moments().expect("continuous marginal");
            mean
        }
    };
    Ok(spec.denormalize(mean))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImputeMode {
    /// Each missing attribute filled independently with the most likely value
    /// given the observed cells only.
    MostLikely,
    /// Sequential sampling in descending column order, each draw joining the
    /// evidence of the next.
    Random,
}

/// Fills every missing cell of the point. Classification and regression are
/// the single-attribute special cases of the most-likely mode.
pub fn impute(
    model: &Model,
    point: &[Cell],
    mode: ImputeMode,
    rng: &mut RandomSource,
) -> Result<Vec<Cell>> {
    check_point(model, point)?;
    let missing: Vec<usize> = point
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_missing())
        .map(|(i, _)| i)
        .collect();
    if missing.is_empty() {
        return Err(Error::Config("point has no missing cells to impute".into()));
    }
    let view = model.graph().view();
    let ctx = model.context();
    let mut completed = point.to_vec();

    match mode {
        ImputeMode::MostLikely => {
            let observed = Evidence::from_row(point, &missing);
            for &attr in &missing {
                let spec = model.schema().attr(attr);
                completed[attr] = match &spec.kind {
                    AttributeKind::Discrete { .. } => {
                        let pmf = ctx.conditional_pmf(view, &observed, attr)?;
                        Cell::Category(pmf.argmax())
                    }
                    AttributeKind::Continuous { .. } => {
                        let mean = match ctx.conditional_mean(view, &observed, attr)? {
                            Some(mean) => mean,
                            None => ctx.marginals.attr(attr).moments().expect("moments").0,
                        };
                        Cell::Real(spec.denormalize(mean))
                    }
                };
            }
        }
        ImputeMode::Random => {
            let clamped = Evidence::from_row(point, &missing);
            let sampled = sample_conditional(view, &ctx, &clamped, rng)?;
            for &attr in &missing {
                completed[attr] = sampled[attr];
            }
        }
    }
    Ok(completed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct OutlierReport {
    /// Leave-one-out joint log probability per row.
    pub scores: Vec<f64>,
    pub threshold: f64,
    /// Rows scoring strictly below the threshold.
    pub flagged: Vec<usize>,
    pub histogram: Vec<HistogramBin>,
}

/// Scores every stored row by its joint log probability with its own object
/// node masked. The default threshold is the empirical 1st percentile.
pub fn outlier_scores(
    model: &Model,
    threshold: Option<f64>,
    histogram_bins: usize,
) -> Result<OutlierReport> {
    let ctx = model.context();
    let dataset = model.dataset();
    let scores: Vec<f64> = (0..dataset.n_rows())
        .into_par_iter()
        .map(|n| ctx.joint_log_prob(model.graph().masked(n)?, dataset.row(n)))
        .collect::<Result<Vec<_>>>()?;

    let threshold = threshold.unwrap_or_else(|| percentile(&scores, 0.01));
    let flagged: Vec<usize> = scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s < threshold)
        .map(|(i, _)| i)
        .collect();
    let histogram = build_histogram(&scores, histogram_bins.max(1));
    Ok(OutlierReport { scores, threshold, flagged, histogram })
}

/// Nearest-rank percentile, `q` in (0, 1].
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn build_histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !min.is_finite() || !max.is_finite() || min == max {
        return vec![HistogramBin { left: min, right: max, count: values.len() }];
    }
    let width = (max - min) / bins as f64;
    let mut histogram: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            left: min + i as f64 * width,
            right: min + (i + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for &v in values {
        let idx = (((v - min) / width) as usize).min(bins - 1);
        histogram[idx].count += 1;
    }
    histogram
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenerationMethod {
    /// Independent chain-rule draws, one substream per row.
    Chain,
    /// One systematic-scan Gibbs chain.
    Gibbs { burn_in: usize, thinning: usize },
}

/// Draws `n` schema-compatible rows. Chain generation parallelizes across
/// per-row substreams of the seed; identical seeds reproduce identical rows.
pub fn generate(model: &Model, n: usize, method: GenerationMethod, seed: u64) -> Result<Dataset> {
    let ctx = model.context();
    let view = model.graph().view();
    let rows: Vec<Vec<Cell>> = match method {
        GenerationMethod::Chain => (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = RandomSource::substream(seed, i as u64);
                sample_conditional(view, &ctx, &Evidence::new(), &mut rng)
            })
            .collect::<Result<Vec<_>>>()?,
        GenerationMethod::Gibbs { burn_in, thinning } => {
            let config = GibbsConfig {
                sweeps: burn_in + n * thinning,
                burn_in,
                thinning,
                init: GibbsInit::ChainSample,
            };
            let mut rng = RandomSource::from_seed(seed);
            gibbs_run(view, &ctx, &config, &mut rng)?
        }
    };
    Dataset::new(model.schema().clone(), rows)
}

#[derive(Debug, Clone)]
pub struct LooPrediction {
    pub actual: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone)]
pub struct LooReport {
    pub predictions: Vec<LooPrediction>,
    pub correct: usize,
}

impl LooReport {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.predictions.len() as f64
    }
}

/// Leave-one-out cross-validation of the classifier: each row is predicted
/// from its other attributes with its own object node masked.
pub fn loo_cross_validate(model: &Model, target: usize) -> Result<LooReport> {
    let dataset = model.dataset();
    if !model.schema().attr(target).is_discrete() {
        return Err(Error::Schema(format!(
            "cross-validation target {:?} is not discrete",
            model.schema().attr(target).name
        )));
    }
    let predictions: Vec<LooPrediction> = (0..dataset.n_rows())
        .into_par_iter()
        .map(|n| {
            let actual = match dataset.cell(n, target) {
                Cell::Category(i) => i,
                _ => {
                    return Err(Error::MissingValue {
                        attribute: model.schema().attr(target).name.clone(),
                    })
                }
            };
            let result = classify_masked(model, dataset.row(n), target, n)?;
            Ok(LooPrediction { actual, predicted: result.predicted })
        })
        .collect::<Result<Vec<_>>>()?;
    let correct = predictions.iter().filter(|p| p.actual == p.predicted).count();
    Ok(LooReport { predictions, correct })
}

fn check_point(model: &Model, point: &[Cell]) -> Result<()> {
    if point.len() != model.schema().len() {
        return Err(Error::DimensionMismatch {
            expected: model.schema().len(),
            got: point.len(),
        });
    }
    Ok(())
}
