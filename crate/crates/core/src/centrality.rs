//! Personalization vectors and the damped Katz fixed-point solver.
//!
//! The solver iterates `c <- d * Wh * c + (1 - d) * theta` where `Wh` is the
//! adjacency operator scaled by the reciprocal of its estimated spectral
//! radius. With `0 < d < 1` the iteration is a contraction with factor at
//! most `d`, so the fixed point is unique and reached geometrically from any
//! start; we warm-start at `theta`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{AttributeLayout, GraphView};
use crate::schema::{AttributeKind, Cell, Schema};

/// Observed values for a subset of attributes, keyed by attribute index.
/// Discrete evidence carries a category index, continuous evidence the raw
/// (unnormalized) value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvidenceValue {
    Category(usize),
    Real(f64),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Evidence {
    values: BTreeMap<usize, EvidenceValue>,
}

impl Evidence {
    pub fn new() -> Self {
        Evidence::default()
    }

    pub fn set(&mut self, attr: usize, value: EvidenceValue) -> &mut Self {
        self.values.insert(attr, value);
        self
    }

    /// Collects every observed cell of a row except the listed attributes.
    pub fn from_row(row: &[Cell], exclude: &[usize]) -> Self {
        let mut evidence = Evidence::new();
        for (attr, cell) in row.iter().enumerate() {
            if exclude.contains(&attr) {
                continue;
            }
            match cell {
                Cell::Category(i) => {
                    evidence.set(attr, EvidenceValue::Category(*i));
                }
                Cell::Real(x) => {
                    evidence.set(attr, EvidenceValue::Real(*x));
                }
                Cell::Missing => {}
            }
        }
        evidence
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, attr: usize) -> bool {
        self.values.contains_key(&attr)
    }

    pub fn get(&self, attr: usize) -> Option<EvidenceValue> {
        self.values.get(&attr).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, EvidenceValue)> + '_ {
        self.values.iter().map(|(k, v)| (*k, *v))
    }
}

/// Builds the restart distribution for a query: object components zero,
/// evidence attribute blocks carry the value indicator (discrete) or the
/// membership weights (continuous), target blocks stay zero, and the vector
/// is normalized to sum to 1.
pub fn build_personalization(
    evidence: &Evidence,
    schema: &Schema,
    layout: &AttributeLayout,
    n_objects: usize,
    targets: &[usize],
) -> Result<Vec<f64>> {
    if evidence.is_empty() {
        return Err(Error::EmptyEvidence);
    }
    let mut theta = vec![0.0; n_objects + layout.total_width()];
    for (attr, value) in evidence.iter() {
        if attr >= schema.len() {
            return Err(Error::Schema(format!("evidence attribute {attr} out of range")));
        }
        if targets.contains(&attr) {
            return Err(Error::Schema(format!(
                "attribute {:?} appears as both evidence and target",
                schema.attr(attr).name
            )));
        }
        let spec = schema.attr(attr);
        let offset = n_objects + layout.offset(attr);
        match (value, &spec.kind) {
            (EvidenceValue::Category(i), AttributeKind::Discrete { values }) => {
                if i >= values.len() {
                    return Err(Error::Schema(format!(
                        "category index {i} out of range for {:?}",
                        spec.name
                    )));
                }
                theta[offset + i] = 1.0;
            }
            (EvidenceValue::Real(x), AttributeKind::Continuous { .. }) => {
                if !x.is_finite() {
                    return Err(Error::Schema(format!("non-finite evidence for {:?}", spec.name)));
                }
                for (j, w) in spec.encode(x).into_iter().enumerate() {
                    theta[offset + j] = w;
                }
            }
            _ => {
                return Err(Error::Schema(format!(
                    "evidence type does not match attribute {:?}",
                    spec.name
                )))
            }
        }
    }
    let sum: f64 = theta.iter().sum();
    if sum <= 0.0 {
        return Err(Error::EmptyEvidence);
    }
    theta.iter_mut().for_each(|x| *x /= sum);
    Ok(theta)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            damping: 0.15,
            tolerance: 1e-9,
            max_iterations: 1000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::Config(format!(
                "damping must lie in (0, 1), got {}",
                self.damping
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Fixed point of the damped Katz equation together with iteration stats.
#[derive(Debug, Clone)]
pub struct CentralityVector {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Power iteration for `c = d * Wh * c + (1 - d) * theta`, stopping when the
/// L1 step change drops below the configured tolerance. Non-convergence
/// returns the best iterate with `converged = false`.
pub fn solve_stationary(
    view: GraphView<'_>,
    theta: &[f64],
    config: &SolverConfig,
) -> Result<CentralityVector> {
    config.validate()?;
    if theta.len() != view.len() {
        return Err(Error::DimensionMismatch { expected: view.len(), got: theta.len() });
    }
    let rho = view.spectral_radius();
    let scale = if rho > 0.0 { config.damping / rho } else { 0.0 };
    let restart = 1.0 - config.damping;

    let mut c = theta.to_vec();
    let mut buf = vec![0.0; theta.len()];
    let mut residual = f64::INFINITY;
    for iter in 1..=config.max_iterations {
        view.matvec_into(&c, &mut buf);
        residual = 0.0;
        for ((ci, bi), ti) in c.iter_mut().zip(&buf).zip(theta) {
            let next = scale * bi + restart * ti;
            residual += (next - *ci).abs();
            *ci = next;
        }
        if residual <= config.tolerance {
            return Ok(CentralityVector { values: c, iterations: iter, residual, converged: true });
        }
    }
    Ok(CentralityVector {
        values: c,
        iterations: config.max_iterations,
        residual,
        converged: false,
    })
}

/// Extracts one attribute's block of the centrality vector and normalizes it
/// to sum to 1. An all-zero block signals evidence disconnected from every
/// value of the attribute and is reported as an error; estimation-level
/// callers degrade to the marginal.
pub fn attribute_distribution(
    c: &[f64],
    attr: usize,
    layout: &AttributeLayout,
    n_objects: usize,
) -> Result<Vec<f64>> {
    let block = layout.block(attr);
    let slice = &c[n_objects + block.start..n_objects + block.end];
    let sum: f64 = slice.iter().sum();
    if sum <= 0.0 {
        return Err(Error::ZeroBlock(format!("attribute {attr}")));
    }
    Ok(slice.iter().map(|x| x / sum).collect())
}

/// Normalized object-node components of the centrality vector.
pub fn object_distribution(c: &[f64], n_objects: usize) -> Result<Vec<f64>> {
    let slice = &c[..n_objects];
    let sum: f64 = slice.iter().sum();
    if sum <= 0.0 {
        return Err(Error::ZeroBlock("object block".into()));
    }
    Ok(slice.iter().map(|x| x / sum).collect())
}
