//! Dataset schema, CSV ingestion, min-max normalization, and the distributed
//! (membership-function) encoding of continuous values.
//!
//! A continuous value is normalized to `[0, 1]` against the training bounds and
//! spread over `k` basis nodes with overlapping triangular membership functions.
//! The encoding is lossless: the dot product of the weights with the basis
//! centers recovers the original normalized value.

use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};

/// Default number of basis nodes for a continuous attribute.
pub const DEFAULT_BASIS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum AttributeKind {
    /// Ordered, duplicate-free category labels.
    Discrete { values: Vec<String> },
    /// Normalization bounds observed at training time plus basis size.
    Continuous { min: f64, max: f64, basis: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: AttributeKind,
}

impl AttributeSpec {
    pub fn discrete(name: impl Into<String>, values: &[&str]) -> Self {
        AttributeSpec {
            name: name.into(),
            kind: AttributeKind::Discrete {
                values: values.iter().map(|v| v.to_string()).collect(),
            },
        }
    }

    pub fn continuous(name: impl Into<String>, min: f64, max: f64, basis: usize) -> Self {
        AttributeSpec {
            name: name.into(),
            kind: AttributeKind::Continuous { min, max, basis },
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, AttributeKind::Discrete { .. })
    }

    pub fn is_continuous(&self) -> bool {
        !self.is_discrete()
    }

    /// Number of attribute-value nodes this attribute contributes to the graph.
    pub fn width(&self) -> usize {
        match &self.kind {
            AttributeKind::Discrete { values } => values.len(),
            AttributeKind::Continuous { basis, .. } => *basis,
        }
    }

    pub fn values(&self) -> Option<&[String]> {
        match &self.kind {
            AttributeKind::Discrete { values } => Some(values),
            AttributeKind::Continuous { .. } => None,
        }
    }

    /// Maps a raw value into `[0, 1]` against the stored bounds. Out-of-range
    /// raws clamp; that is the documented extrapolation behavior for query
    /// points outside the training range.
    ///
    /// Panics if the attribute is discrete.
    pub fn normalize(&self, raw: f64) -> f64 {
        match self.kind {
            AttributeKind::Continuous { min, max, .. } => ((raw - min) / (max - min)).clamp(0.0, 1.0),
            AttributeKind::Discrete { .. } => panic!("normalize called on discrete attribute {:?}", self.name),
        }
    }

    /// Inverse of [`AttributeSpec::normalize`] on `[min, max]`.
    pub fn denormalize(&self, unit: f64) -> f64 {
        match self.kind {
            AttributeKind::Continuous { min, max, .. } => min + unit * (max - min),
            AttributeKind::Discrete { .. } => panic!("denormalize called on discrete attribute {:?}", self.name),
        }
    }

    /// Distributed representation of a raw continuous value.
    pub fn encode(&self, raw: f64) -> Vec<f64> {
        match self.kind {
            AttributeKind::Continuous { basis, .. } => encode_membership(self.normalize(raw), basis),
            AttributeKind::Discrete { .. } => panic!("encode called on discrete attribute {:?}", self.name),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Schema("attribute name is empty".into()));
        }
        match &self.kind {
            AttributeKind::Discrete { values } => {
                if values.is_empty() {
                    return Err(Error::Schema(format!(
                        "discrete attribute {:?} has no values",
                        self.name
                    )));
                }
                let mut seen = HashSet::new();
                for v in values {
                    if !seen.insert(v) {
                        return Err(Error::Schema(format!(
                            "discrete attribute {:?} lists value {:?} twice",
                            self.name, v
                        )));
                    }
                }
            }
            AttributeKind::Continuous { min, max, basis } => {
                if !min.is_finite() || !max.is_finite() || min >= max {
                    return Err(Error::Schema(format!(
                        "continuous attribute {:?} needs finite min < max (got {min}..{max})",
                        self.name
                    )));
                }
                if *basis < 2 {
                    return Err(Error::Schema(format!(
                        "continuous attribute {:?} needs at least 2 basis nodes",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub attributes: Vec<AttributeSpec>,
}

impl Schema {
    pub fn new(attributes: Vec<AttributeSpec>) -> Result<Self> {
        if attributes.is_empty() {
            return Err(Error::Schema("schema has no attributes".into()));
        }
        let mut names = HashSet::new();
        for spec in &attributes {
            spec.validate()?;
            if !names.insert(spec.name.as_str()) {
                return Err(Error::Schema(format!(
                    "duplicate attribute name {:?}",
                    spec.name
                )));
            }
        }
        Ok(Schema { attributes })
    }

    /// Number of columns, `d`.
    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn attr(&self, index: usize) -> &AttributeSpec {
        &self.attributes[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }
}

/// One cell of a dataset row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Category(usize),
    Real(f64),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn category(&self) -> Option<usize> {
        match self {
            Cell::Category(i) => Some(*i),
            _ => None,
        }
    }

    pub fn real(&self) -> Option<f64> {
        match self {
            Cell::Real(x) => Some(*x),
            _ => None,
        }
    }
}

/// An in-memory dataset: the schema plus an `N x d` grid of cells.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub schema: Schema,
    rows: Vec<Vec<Cell>>,
}

impl Dataset {
    /// Builds a dataset from parsed rows, checking the cell invariants.
    /// Zero rows are allowed here (generated output can be empty); ingestion
    /// via [`load_dataset`] rejects empty bodies.
    pub fn new(schema: Schema, rows: Vec<Vec<Cell>>) -> Result<Self> {
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(Error::DimensionMismatch {
                    expected: schema.len(),
                    got: row.len(),
                });
            }
            for (c, cell) in row.iter().enumerate() {
                let spec = schema.attr(c);
                match (cell, &spec.kind) {
                    (Cell::Category(i), AttributeKind::Discrete { values }) => {
                        if *i >= values.len() {
                            return Err(Error::Schema(format!(
                                "row {r}: category index {i} out of range for {:?}",
                                spec.name
                            )));
                        }
                    }
                    (Cell::Real(x), AttributeKind::Continuous { .. }) => {
                        if !x.is_finite() {
                            return Err(Error::Schema(format!(
                                "row {r}: non-finite value for {:?}",
                                spec.name
                            )));
                        }
                    }
                    (Cell::Missing, _) => {}
                    _ => {
                        return Err(Error::Schema(format!(
                            "row {r}: cell type does not match attribute {:?}",
                            spec.name
                        )));
                    }
                }
            }
        }
        Ok(Dataset { schema, rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_attrs(&self) -> usize {
        self.schema.len()
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn row(&self, n: usize) -> &[Cell] {
        &self.rows[n]
    }

    pub fn cell(&self, row: usize, col: usize) -> Cell {
        self.rows[row][col]
    }

    /// Dataset with one attribute column removed (e.g. a ground-truth label
    /// column that must not inform the graph).
    pub fn without_attribute(&self, attr: usize) -> Result<Dataset> {
        if attr >= self.schema.len() {
            return Err(Error::Schema(format!("attribute index {attr} out of range")));
        }
        let mut attributes = self.schema.attributes.clone();
        attributes.remove(attr);
        let schema = Schema::new(attributes)?;
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut row = row.clone();
                row.remove(attr);
                row
            })
            .collect();
        Dataset::new(schema, rows)
    }

    /// Serializes the rows back into the ingestion CSV dialect.
    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(self.schema.attributes.iter().map(|a| a.name.as_str()))?;
        for row in &self.rows {
            let record: Vec<String> = row
                .iter()
                .zip(&self.schema.attributes)
                .map(|(cell, spec)| format_cell(cell, spec))
                .collect();
            writer.write_record(&record)?;
        }
        let bytes = writer.into_inner().map_err(|e| Error::Schema(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub fn format_cell(cell: &Cell, spec: &AttributeSpec) -> String {
    match cell {
        Cell::Missing => String::new(),
        Cell::Category(i) => spec.values().expect("category cell on discrete attribute")[*i].clone(),
        Cell::Real(x) => format!("{x}"),
    }
}

/// Parses a CSV stream against a fully resolved schema. The header row must
/// match the schema attribute names in order; empty cells become missing.
pub fn load_dataset(csv_text: &str, schema: &Schema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(csv_text.as_bytes());

    let headers = reader.headers()?.clone();
    check_header(&headers, schema)?;

    // Label -> index maps for the discrete attributes.
    let lookups: Vec<Option<HashMap<&str, usize>>> = schema
        .attributes
        .iter()
        .map(|spec| {
            spec.values()
                .map(|vs| vs.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect())
        })
        .collect();

    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != schema.len() {
            return Err(Error::DimensionMismatch {
                expected: schema.len(),
                got: record.len(),
            });
        }
        let mut row = Vec::with_capacity(schema.len());
        for (c, field) in record.iter().enumerate() {
            let spec = schema.attr(c);
            if field.is_empty() {
                row.push(Cell::Missing);
                continue;
            }
            match &lookups[c] {
                Some(lookup) => match lookup.get(field) {
                    Some(&i) => row.push(Cell::Category(i)),
                    None => {
                        return Err(Error::UnknownCategory {
                            row: r,
                            column: spec.name.clone(),
                            value: field.to_string(),
                        })
                    }
                },
                None => match field.parse::<f64>() {
                    Ok(x) if x.is_finite() => row.push(Cell::Real(x)),
                    _ => {
                        return Err(Error::MalformedNumber {
                            row: r,
                            column: spec.name.clone(),
                            value: field.to_string(),
                        })
                    }
                },
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::NoRows);
    }
    Dataset::new(schema.clone(), rows)
}

fn check_header(headers: &csv::StringRecord, schema: &Schema) -> Result<()> {
    if headers.len() != schema.len() {
        return Err(Error::DimensionMismatch {
            expected: schema.len(),
            got: headers.len(),
        });
    }
    for (i, (found, spec)) in headers.iter().zip(&schema.attributes).enumerate() {
        if found != spec.name {
            return Err(Error::HeaderMismatch {
                position: i,
                expected: spec.name.clone(),
                found: found.to_string(),
            });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Schema files
// ---------------------------------------------------------------------------

/// One entry of a user-supplied schema file. Omitted `values`, `min`, `max`
/// and `basis` are inferred from the data by [`resolve_schema`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaFileEntry {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<usize>,
}

pub fn parse_schema_file(json: &str) -> Result<Vec<SchemaFileEntry>> {
    Ok(serde_json::from_str(json)?)
}

/// Fills in omitted schema fields by scanning the CSV body: category lists in
/// first-appearance order, continuous bounds as observed per-column min/max.
pub fn resolve_schema(entries: &[SchemaFileEntry], csv_text: &str) -> Result<Schema> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(csv_text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.len() != entries.len() {
        return Err(Error::DimensionMismatch {
            expected: entries.len(),
            got: headers.len(),
        });
    }
    for (i, (found, entry)) in headers.iter().zip(entries).enumerate() {
        if found != entry.name {
            return Err(Error::HeaderMismatch {
                position: i,
                expected: entry.name.clone(),
                found: found.to_string(),
            });
        }
    }

    let needs_scan = entries.iter().any(|e| match e.kind.as_str() {
        "discrete" => e.values.is_none(),
        _ => e.min.is_none() || e.max.is_none(),
    });

    let mut seen_values: Vec<Vec<String>> = vec![Vec::new(); entries.len()];
    let mut bounds: Vec<(f64, f64)> = vec![(f64::INFINITY, f64::NEG_INFINITY); entries.len()];
    if needs_scan {
        for (r, record) in reader.records().enumerate() {
            let record = record?;
            for (c, field) in record.iter().enumerate() {
                if field.is_empty() {
                    continue;
                }
                match entries[c].kind.as_str() {
                    "discrete" => {
                        if entries[c].values.is_none()
                            && !seen_values[c].iter().any(|v| v == field)
                        {
                            seen_values[c].push(field.to_string());
                        }
                    }
                    _ => {
                        if entries[c].min.is_none() || entries[c].max.is_none() {
                            let x: f64 = field.parse().map_err(|_| Error::MalformedNumber {
                                row: r,
                                column: entries[c].name.clone(),
                                value: field.to_string(),
                            })?;
                            bounds[c].0 = bounds[c].0.min(x);
                            bounds[c].1 = bounds[c].1.max(x);
                        }
                    }
                }
            }
        }
    }

    let mut attributes = Vec::with_capacity(entries.len());
    for (c, entry) in entries.iter().enumerate() {
        let kind = match entry.kind.as_str() {
            "discrete" => {
                let values = match &entry.values {
                    Some(v) => v.clone(),
                    None => {
                        if seen_values[c].is_empty() {
                            return Err(Error::AllMissing(entry.name.clone()));
                        }
                        std::mem::take(&mut seen_values[c])
                    }
                };
                AttributeKind::Discrete { values }
            }
            "continuous" => {
                let min = entry.min.unwrap_or(bounds[c].0);
                let max = entry.max.unwrap_or(bounds[c].1);
                if !min.is_finite() || !max.is_finite() {
                    return Err(Error::AllMissing(entry.name.clone()));
                }
                AttributeKind::Continuous {
                    min,
                    max,
                    basis: entry.basis.unwrap_or(DEFAULT_BASIS),
                }
            }
            other => {
                return Err(Error::Schema(format!(
                    "attribute {:?}: unknown type {other:?}",
                    entry.name
                )))
            }
        };
        attributes.push(AttributeSpec {
            name: entry.name.clone(),
            kind,
        });
    }
    Schema::new(attributes)
}

// ---------------------------------------------------------------------------
// Distributed representation
// ---------------------------------------------------------------------------

/// Basis centers for the membership functions: `1 - j/(k-1)` for `j = 0..k`,
/// strictly descending from 1 to 0. For `k = 3` this is `[1.0, 0.5, 0.0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisCenters {
    centers: Vec<f64>,
}

impl BasisCenters {
    pub fn new(k: usize) -> Self {
        assert!(k >= 2, "basis needs at least 2 nodes");
        let centers = (0..k).map(|j| 1.0 - j as f64 / (k - 1) as f64).collect();
        BasisCenters { centers }
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// Triangular membership weights of a normalized value over `k` equally
/// spaced basis nodes. The weights sum to 1 and at most two adjacent entries
/// are nonzero.
pub fn encode_membership(u: f64, k: usize) -> Vec<f64> {
    assert!((0.0..=1.0).contains(&u), "value {u} outside [0, 1]");
    let centers = BasisCenters::new(k);
    let scale = (k - 1) as f64;
    centers
        .centers()
        .iter()
        .map(|&c| (1.0 - (u - c).abs() * scale).max(0.0))
        .collect()
}

/// Recovers the normalized value from membership weights: the weights are
/// normalized to sum to 1, then dotted with the centers.
pub fn decode_membership(weights: &[f64], centers: &BasisCenters) -> Result<f64> {
    if weights.len() != centers.len() {
        return Err(Error::DimensionMismatch {
            expected: centers.len(),
            got: weights.len(),
        });
    }
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return Err(Error::ZeroBlock("membership weights".into()));
    }
    Ok(weights
        .iter()
        .zip(centers.centers())
        .map(|(w, c)| w / sum * c)
        .sum())
}
