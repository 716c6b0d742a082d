//! The fitted model bundle and its persistence format.
//!
//! The method is memory-based: the dataset is the model. A model file
//! therefore stores the resolved schema, hyperparameters, solver settings,
//! chain order and marginals, plus either a reference to the dataset (path
//! and content digest) or the embedded rows. Loading verifies the digest so
//! predictions reproduce bit for bit against the same bytes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::centrality::SolverConfig;
use crate::error::{Error, Result};
use crate::estimation::{
    compute_marginals, fit_hyperparams, EstimationContext, FitResult, HyperParams, MarginalModel,
};
use crate::graph::BipartiteGraph;
use crate::schema::{load_dataset, Dataset, Schema};

pub const FORMAT_VERSION: u32 = 1;

/// A dataset, its graph, and everything needed to answer queries.
#[derive(Debug, Clone)]
pub struct Model {
    dataset: Dataset,
    graph: BipartiteGraph,
    marginals: MarginalModel,
    pub hyper: HyperParams,
    pub solver: SolverConfig,
}

impl Model {
    pub fn from_dataset(dataset: Dataset, hyper: HyperParams, solver: SolverConfig) -> Result<Self> {
        let marginals = compute_marginals(&dataset)?;
        Self::from_parts(dataset, marginals, hyper, solver)
    }

    /// Assembles a model from persisted marginals without recomputing them.
    pub fn from_parts(
        dataset: Dataset,
        marginals: MarginalModel,
        hyper: HyperParams,
        solver: SolverConfig,
    ) -> Result<Self> {
        solver.validate()?;
        if marginals.attributes.len() != dataset.schema.len() {
            return Err(Error::DimensionMismatch {
                expected: dataset.schema.len(),
                got: marginals.attributes.len(),
            });
        }
        let graph = BipartiteGraph::build(&dataset);
        Ok(Model { dataset, graph, marginals, hyper, solver })
    }

    /// Fits `(alpha, beta)` by the likelihood grid search and returns the
    /// model at the argmax together with the full surface.
    pub fn fit(
        dataset: Dataset,
        solver: SolverConfig,
        alpha_grid: &[f64],
        beta_grid: &[f64],
        loo: bool,
    ) -> Result<(Self, FitResult)> {
        let marginals = compute_marginals(&dataset)?;
        let graph = BipartiteGraph::build(&dataset);
        let fit = fit_hyperparams(&graph, &dataset, &marginals, solver, alpha_grid, beta_grid, loo)?;
        let model = Model { dataset, graph, marginals, hyper: fit.hyper, solver };
        Ok((model, fit))
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn schema(&self) -> &Schema {
        &self.dataset.schema
    }

    pub fn graph(&self) -> &BipartiteGraph {
        &self.graph
    }

    pub fn marginals(&self) -> &MarginalModel {
        &self.marginals
    }

    pub fn context(&self) -> EstimationContext<'_> {
        EstimationContext {
            schema: &self.dataset.schema,
            layout: self.graph.layout(),
            marginals: &self.marginals,
            hyper: self.hyper,
            solver: self.solver,
        }
    }

    /// Context with different hyperparameters, for query-time overrides.
    pub fn context_with(&self, hyper: HyperParams) -> EstimationContext<'_> {
        EstimationContext { hyper, ..self.context() }
    }

    pub fn to_model_file(&self, dataset: DatasetSource) -> ModelFile {
        ModelFile {
            format_version: FORMAT_VERSION,
            schema: self.dataset.schema.clone(),
            hyper: self.hyper,
            solver: self.solver,
            chain_order: (0..self.dataset.schema.len()).rev().collect(),
            marginals: self.marginals.clone(),
            dataset,
        }
    }
}

/// Where the model's dataset lives.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Reference { path: String, sha256: String },
    Embedded { csv: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub schema: Schema,
    pub hyper: HyperParams,
    pub solver: SolverConfig,
    /// Conditioning order of the probability chain, most-conditioned first.
    pub chain_order: Vec<usize>,
    pub marginals: MarginalModel,
    pub dataset: DatasetSource,
}

pub fn dataset_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn save_model(file: &ModelFile, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(file)?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let json = fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&json)?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(file.format_version));
    }
    let expected: Vec<usize> = (0..file.schema.len()).rev().collect();
    if file.chain_order != expected {
        return Err(Error::Schema(
            "model file declares an unsupported chain order".into(),
        ));
    }
    Ok(file)
}

/// Rebuilds the full model from a model file. Referenced dataset paths are
/// resolved against the working directory first, then against `base_dir`
/// (normally the model file's directory); the content digest must match.
pub fn model_from_file(file: ModelFile, base_dir: Option<&Path>) -> Result<Model> {
    let csv = match &file.dataset {
        DatasetSource::Embedded { csv } => csv.clone(),
        DatasetSource::Reference { path, sha256 } => {
            let candidate = Path::new(path);
            let bytes = match fs::read(candidate) {
                Ok(bytes) => bytes,
                Err(primary) => match base_dir {
                    Some(dir) if candidate.is_relative() => fs::read(dir.join(candidate))?,
                    _ => return Err(primary.into()),
                },
            };
            let found = dataset_digest(&bytes);
            if &found != sha256 {
                return Err(Error::DigestMismatch { expected: sha256.clone(), found });
            }
            String::from_utf8(bytes)
                .map_err(|e| Error::Schema(format!("dataset is not valid utf-8: {e}")))?
        }
    };
    let dataset = load_dataset(&csv, &file.schema)?;
    Model::from_parts(dataset, file.marginals, file.hyper, file.solver)
}
