//! Memory-based probability estimation over mixed discrete/continuous tabular
//! data.
//!
//! The dataset is represented as a bipartite graph of object nodes and
//! attribute-value nodes. Conditioning evidence becomes a personalization
//! vector; solving the damped Katz fixed-point equation yields a stationary
//! distribution whose normalized blocks estimate conditional pmfs (discrete
//! targets) and conditional means for Beta densities (continuous targets).
//! Chain-rule products of those conditionals give joint probabilities, which
//! drive classification, regression, imputation, outlier scoring, synthetic
//! row generation, and soft clustering.

pub mod centrality;
pub mod cluster;
pub mod error;
pub mod estimation;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod sampling;
pub mod schema;
pub mod tasks;

pub use centrality::{
    attribute_distribution, build_personalization, object_distribution, solve_stationary,
    CentralityVector, Evidence, EvidenceValue, SolverConfig,
};
pub use cluster::{cluster, ClusterConfig, ClusterState};
pub use error::{Error, Result};
pub use estimation::{
    beta_from_mean, compute_marginals, conditional_mean, conditional_pmf, fit_hyperparams,
    log_likelihood, BetaSpec, ConditionalPmf, EstimationContext, FitResult, HyperParams,
    MarginalModel, SurfacePoint,
};
pub use graph::{AttributeLayout, BipartiteGraph, GraphView, ObjectAttributeMatrix};
pub use metrics::{pairwise_f_measure, rand_index, v_measure};
pub use model::{
    dataset_digest, load_model, model_from_file, save_model, DatasetSource, Model, ModelFile,
};
pub use sampling::{
    gibbs_run, sample_beta, sample_conditional, sample_gamma, sample_pmf, sample_vector,
    GibbsConfig, GibbsInit, RandomSource,
};
pub use schema::{
    decode_membership, encode_membership, load_dataset, parse_schema_file, resolve_schema,
    AttributeKind, AttributeSpec, BasisCenters, Cell, Dataset, Schema,
};
pub use tasks::{
    classify, classify_masked, generate, impute, loo_cross_validate, outlier_scores, regress,
    Classification, GenerationMethod, HistogramBin, ImputeMode, LooReport, OutlierReport,
};
