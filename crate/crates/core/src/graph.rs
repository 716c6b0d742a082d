//! The bipartite object/attribute-value graph.
//!
//! The object-attribute matrix `B` (N rows, M attribute-value columns) is the
//! only thing stored; the symmetric adjacency `W = [[0, B], [B', 0]]` is
//! applied blockwise and never materialized. Masked views zero out one
//! object's row for leave-one-out work without touching the shared matrix.

use crate::error::{Error, Result};
use crate::schema::{AttributeKind, Cell, Dataset, Schema};

/// Column layout of the attribute-value nodes: one contiguous block per
/// attribute, width `n_m` for discrete attributes and the basis size for
/// continuous ones.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeLayout {
    offsets: Vec<usize>,
    widths: Vec<usize>,
    total: usize,
}

impl AttributeLayout {
    pub fn from_schema(schema: &Schema) -> Self {
        let mut offsets = Vec::with_capacity(schema.len());
        let mut widths = Vec::with_capacity(schema.len());
        let mut total = 0;
        for spec in &schema.attributes {
            offsets.push(total);
            widths.push(spec.width());
            total += spec.width();
        }
        AttributeLayout { offsets, widths, total }
    }

    pub fn offset(&self, attr: usize) -> usize {
        self.offsets[attr]
    }

    pub fn width(&self, attr: usize) -> usize {
        self.widths[attr]
    }

    pub fn block(&self, attr: usize) -> std::ops::Range<usize> {
        self.offsets[attr]..self.offsets[attr] + self.widths[attr]
    }

    /// Total number of attribute-value nodes, `M`.
    pub fn total_width(&self) -> usize {
        self.total
    }

    pub fn n_attrs(&self) -> usize {
        self.widths.len()
    }
}

/// Sparse nonnegative `N x M` matrix `B`: per row, one unit entry per observed
/// discrete attribute and the membership weights of each observed continuous
/// attribute. Missing cells contribute nothing.
#[derive(Debug, Clone)]
pub struct ObjectAttributeMatrix {
    rows: Vec<Vec<(u32, f64)>>,
    n_cols: usize,
}

impl ObjectAttributeMatrix {
    pub fn build(dataset: &Dataset, layout: &AttributeLayout) -> Self {
        let mut rows = Vec::with_capacity(dataset.n_rows());
        for row in dataset.rows() {
            let mut entries: Vec<(u32, f64)> = Vec::new();
            for (attr, cell) in row.iter().enumerate() {
                let offset = layout.offset(attr);
                match (cell, &dataset.schema.attr(attr).kind) {
                    (Cell::Category(i), AttributeKind::Discrete { .. }) => {
                        entries.push(((offset + i) as u32, 1.0));
                    }
                    (Cell::Real(x), AttributeKind::Continuous { .. }) => {
                        let weights = dataset.schema.attr(attr).encode(*x);
                        for (j, w) in weights.into_iter().enumerate() {
                            if w > 0.0 {
                                entries.push(((offset + j) as u32, w));
                            }
                        }
                    }
                    (Cell::Missing, _) => {}
                    _ => unreachable!("dataset invariants guarantee matching cell types"),
                }
            }
            rows.push(entries);
        }
        ObjectAttributeMatrix {
            rows,
            n_cols: layout.total_width(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.rows[i]
    }

    /// Dense copy of one row, mostly for inspection and tests.
    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols];
        for &(j, w) in &self.rows[i] {
            out[j as usize] = w;
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }
}

/// Power-iteration estimate of the spectral radius `rho(W) = sigma_max(B)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub const SPECTRAL_TOL: f64 = 1e-7;
pub const SPECTRAL_MAX_ITER: usize = 1000;

/// Estimates `sigma_max(B)` by power iteration on `B B'` restricted to the
/// object block. Convergence is declared on the eigen-residual
/// `||B B' u - lambda u|| <= tol * lambda`, which for a symmetric operator
/// bounds the eigenvalue error by `tol * lambda`. Non-convergence reports the
/// best estimate with a flag.
pub fn estimate_spectral_radius(
    b: &ObjectAttributeMatrix,
    tol: f64,
    max_iter: usize,
) -> SpectralEstimate {
    let n = b.n_rows();
    if n == 0 || b.nnz() == 0 {
        return SpectralEstimate { value: 0.0, iterations: 0, converged: true };
    }

    // All-ones start has positive overlap with the Perron vector of B B'.
    let mut u = vec![1.0 / (n as f64).sqrt(); n];
    let mut t = vec![0.0; b.n_cols()];
    let mut w = vec![0.0; n];
    let mut sigma = 0.0;

    for iter in 1..=max_iter {
        t.iter_mut().for_each(|x| *x = 0.0);
        for (i, ui) in u.iter().enumerate() {
            if *ui != 0.0 {
                for &(j, bij) in b.row(i) {
                    t[j as usize] += bij * ui;
                }
            }
        }
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = b.row(i).iter().map(|&(j, bij)| bij * t[j as usize]).sum();
        }

        // Rayleigh quotient for B B' with ||u|| = 1.
        let lambda: f64 = u.iter().zip(&w).map(|(a, b)| a * b).sum();
        sigma = lambda.max(0.0).sqrt();
        let residual = u
            .iter()
            .zip(&w)
            .map(|(ui, wi)| (wi - lambda * ui).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return SpectralEstimate { value: 0.0, iterations: iter, converged: true };
        }
        u.iter_mut().zip(&w).for_each(|(ui, wi)| *ui = wi / norm);

        if residual <= tol * lambda.max(f64::MIN_POSITIVE) {
            return SpectralEstimate { value: sigma, iterations: iter, converged: true };
        }
    }
    SpectralEstimate { value: sigma, iterations: max_iter, converged: false }
}

/// Immutable bipartite graph: `B`, its layout, and the spectral radius
/// estimate used to scale the solver's adjacency operator.
#[derive(Debug, Clone)]
pub struct BipartiteGraph {
    b: ObjectAttributeMatrix,
    layout: AttributeLayout,
    spectral: SpectralEstimate,
}

impl BipartiteGraph {
    pub fn build(dataset: &Dataset) -> Self {
        Self::with_spectral_options(dataset, SPECTRAL_TOL, SPECTRAL_MAX_ITER)
    }

    pub fn with_spectral_options(dataset: &Dataset, tol: f64, max_iter: usize) -> Self {
        let layout = AttributeLayout::from_schema(&dataset.schema);
        let b = ObjectAttributeMatrix::build(dataset, &layout);
        let spectral = estimate_spectral_radius(&b, tol, max_iter);
        BipartiteGraph { b, layout, spectral }
    }

    pub fn matrix(&self) -> &ObjectAttributeMatrix {
        &self.b
    }

    pub fn layout(&self) -> &AttributeLayout {
        &self.layout
    }

    /// Number of object nodes, `N`.
    pub fn n_objects(&self) -> usize {
        self.b.n_rows()
    }

    /// Number of attribute-value nodes, `M`.
    pub fn n_values(&self) -> usize {
        self.b.n_cols()
    }

    /// Total node count, `N + M`.
    pub fn len(&self) -> usize {
        self.n_objects() + self.n_values()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spectral_radius(&self) -> f64 {
        self.spectral.value
    }

    pub fn spectral_estimate(&self) -> SpectralEstimate {
        self.spectral
    }

    pub fn view(&self) -> GraphView<'_> {
        GraphView { graph: self, masked: None }
    }

    /// View with one object's `B`-row zeroed: subsequent matvecs behave as if
    /// that row were absent. The spectral radius is not re-estimated; the
    /// unmasked value is an upper bound, which preserves solver contraction.
    pub fn masked(&self, object: usize) -> Result<GraphView<'_>> {
        if object >= self.n_objects() {
            return Err(Error::ObjectOutOfRange { index: object, len: self.n_objects() });
        }
        Ok(GraphView { graph: self, masked: Some(object) })
    }
}

/// Cheap, copyable view over an immutable graph, optionally masking one object.
#[derive(Debug, Clone, Copy)]
pub struct GraphView<'a> {
    graph: &'a BipartiteGraph,
    masked: Option<usize>,
}

impl<'a> GraphView<'a> {
    pub fn graph(&self) -> &'a BipartiteGraph {
        self.graph
    }

    pub fn masked_object(&self) -> Option<usize> {
        self.masked
    }

    pub fn n_objects(&self) -> usize {
        self.graph.n_objects()
    }

    pub fn n_values(&self) -> usize {
        self.graph.n_values()
    }

    pub fn len(&self) -> usize {
        self.graph.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graph.is_empty()
    }

    pub fn layout(&self) -> &'a AttributeLayout {
        self.graph.layout()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.graph.spectral_radius()
    }

    /// `W v` computed blockwise: the object part receives `B v_attr` and the
    /// attribute part receives `B' v_obj`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: v.len() });
        }
        let mut out = vec![0.0; v.len()];
        self.matvec_into(v, &mut out);
        Ok(out)
    }

    pub fn matvec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.len());
        debug_assert_eq!(out.len(), self.len());
        let n = self.n_objects();
        let b = &self.graph.b;
        let (out_obj, out_attr) = out.split_at_mut(n);
        out_attr.iter_mut().for_each(|x| *x = 0.0);
        let v_obj = &v[..n];
        let v_attr = &v[n..];
        for i in 0..n {
            if self.masked == Some(i) {
                out_obj[i] = 0.0;
                continue;
            }
            let row = b.row(i);
            out_obj[i] = row.iter().map(|&(j, w)| w * v_attr[j as usize]).sum();
            let vi = v_obj[i];
            if vi != 0.0 {
                for &(j, w) in row {
                    out_attr[j as usize] += w * vi;
                }
            }
        }
    }
}
