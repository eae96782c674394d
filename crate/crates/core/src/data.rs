//! Tabular data model, CSV ingestion and block-mapping ingestion.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

pub const GROUP_COLUMN: &str = "group_id";
pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed CSV in {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("malformed block mapping in {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("non-numeric value {value:?} at row {row}, column `{column}`")]
    NonNumericCell { row: usize, column: String, value: String },
    #[error("missing value at row {row}, column `{column}`")]
    MissingValue { row: usize, column: String },
    #[error("label {value:?} at row {row} is not 0 or 1")]
    NonBinaryLabel { row: usize, value: String },
    #[error("non-finite value {value} at row {row}, column `{column}`")]
    NonFiniteValue { row: usize, column: String, value: f64 },
    #[error("table has no rows or no feature columns")]
    EmptyTable,
    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),
    #[error("row {row} has {got} fields, expected {expected}")]
    RaggedRow { row: usize, got: usize, expected: usize },
    #[error("length mismatch: {0}")]
    Shape(String),
    #[error("block mapping references unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("feature `{0}` is assigned to more than one block")]
    DuplicateFeatureAssignment(String),
    #[error("block name `{0}` is used more than once")]
    DuplicateBlockName(String),
    #[error("block `{0}` has no features")]
    EmptyBlock(String),
}

/// Observations x numeric features, with binary labels and group identifiers.
///
/// Immutable after construction; all values are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    values: Matrix,
    labels: Vec<u8>,
    group_ids: Vec<String>,
}

impl FeatureTable {
    pub fn new(values: Matrix, labels: Vec<u8>, group_ids: Vec<String>) -> Result<Self, DataError> {
        if values.n_rows() != labels.len() || labels.len() != group_ids.len() {
            return Err(DataError::Shape(format!(
                "{} value rows, {} labels, {} group ids",
                values.n_rows(),
                labels.len(),
                group_ids.len()
            )));
        }
        if values.n_rows() == 0 || values.n_cols() == 0 {
            return Err(DataError::EmptyTable);
        }
        let mut seen = HashSet::new();
        for name in values.names() {
            if !seen.insert(name.as_str()) {
                return Err(DataError::DuplicateFeature(name.clone()));
            }
        }
        for (row, &l) in labels.iter().enumerate() {
            if l > 1 {
                return Err(DataError::NonBinaryLabel { row: row + 1, value: l.to_string() });
            }
        }
        for c in 0..values.n_cols() {
            if let Some((row, &v)) = values.column(c).iter().enumerate().find(|(_, v)| !v.is_finite()) {
                return Err(DataError::NonFiniteValue { row: row + 1, column: values.names()[c].clone(), value: v });
            }
        }
        Ok(FeatureTable { values, labels, group_ids })
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn feature_names(&self) -> &[String] {
        self.values.names()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn group_ids(&self) -> &[String] {
        &self.group_ids
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.values.n_cols()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names().iter().position(|n| n == name)
    }

    /// Writes the table in the ingestion format (`group_id,label,<features...>`).
    pub fn write_csv(&self, path: &Path) -> Result<(), DataError> {
        let file = File::create(path).map_err(|source| DataError::Io { path: path.to_owned(), source })?;
        let mut w = csv::Writer::from_writer(file);
        let csv_err = |source| DataError::Csv { path: path.to_owned(), source };
        let mut header = vec![GROUP_COLUMN.to_string(), LABEL_COLUMN.to_string()];
        header.extend(self.feature_names().iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for r in 0..self.n_rows() {
            let mut rec = Vec::with_capacity(header.len());
            rec.push(self.group_ids[r].clone());
            rec.push(self.labels[r].to_string());
            rec.extend((0..self.n_features()).map(|c| self.values.get(r, c).to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|source| DataError::Io { path: path.to_owned(), source })
    }
}

/// Reads a comma-separated file with a header row containing `group_id`,
/// `label` and numeric feature columns (in file order).
pub fn load_csv(path: &Path) -> Result<FeatureTable, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io { path: path.to_owned(), source })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(BufReader::new(file));
    let csv_err = |source| DataError::Csv { path: path.to_owned(), source };

    let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(|h| h.trim().to_string()).collect();
    let group_col = header.iter().position(|h| h == GROUP_COLUMN).ok_or(DataError::MissingColumn(GROUP_COLUMN))?;
    let label_col = header.iter().position(|h| h == LABEL_COLUMN).ok_or(DataError::MissingColumn(LABEL_COLUMN))?;
    let feature_cols: Vec<usize> = (0..header.len()).filter(|&c| c != group_col && c != label_col).collect();
    let names: Vec<String> = feature_cols.iter().map(|&c| header[c].clone()).collect();

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); feature_cols.len()];
    let mut labels = Vec::new();
    let mut group_ids = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row = i + 1;
        if record.len() != header.len() {
            return Err(DataError::RaggedRow { row, got: record.len(), expected: header.len() });
        }
        group_ids.push(record[group_col].to_string());
        let raw_label = record[label_col].trim();
        labels.push(match raw_label {
            "0" => 0,
            "1" => 1,
            other => return Err(DataError::NonBinaryLabel { row, value: other.to_string() }),
        });
        for (k, &c) in feature_cols.iter().enumerate() {
            let cell = record[c].trim();
            if cell.is_empty() {
                return Err(DataError::MissingValue { row, column: names[k].clone() });
            }
            let v: f64 = cell.parse().map_err(|_| DataError::NonNumericCell {
                row,
                column: names[k].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DataError::NonFiniteValue { row, column: names[k].clone(), value: v });
            }
            columns[k].push(v);
        }
    }
    if labels.is_empty() || names.is_empty() {
        return Err(DataError::EmptyTable);
    }
    FeatureTable::new(Matrix::from_columns(names, columns), labels, group_ids)
}

/// A named set of features treated as one unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub features: Vec<String>,
}

impl Block {
    /// Column indices of this block's features in `table`.
    pub fn columns(&self, table: &FeatureTable) -> Result<Vec<usize>, DataError> {
        self.features
            .iter()
            .map(|f| table.feature_index(f).ok_or_else(|| DataError::UnknownFeature(f.clone())))
            .collect()
    }
}

/// Disjoint preliminary blocks covering every feature of a table.
///
/// Explicit blocks come first in mapping order, followed by singleton blocks
/// (named after their feature) for unlisted features in table order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PreliminaryBlocks {
    pub blocks: Vec<Block>,
}

#[derive(Debug, Deserialize, Serialize)]
pub struct BlockMapping {
    pub blocks: Vec<Block>,
}

impl PreliminaryBlocks {
    /// Validates an explicit mapping against `table` and fills in singletons.
    pub fn from_mapping(mapping: Vec<Block>, table: &FeatureTable) -> Result<Self, DataError> {
        let known: HashSet<&str> = table.feature_names().iter().map(String::as_str).collect();
        let mut names = HashSet::new();
        let mut assigned: HashMap<String, usize> = HashMap::new();
        for (i, b) in mapping.iter().enumerate() {
            if !names.insert(b.name.clone()) {
                return Err(DataError::DuplicateBlockName(b.name.clone()));
            }
            if b.features.is_empty() {
                return Err(DataError::EmptyBlock(b.name.clone()));
            }
            for f in &b.features {
                if !known.contains(f.as_str()) {
                    return Err(DataError::UnknownFeature(f.clone()));
                }
                if assigned.insert(f.clone(), i).is_some() {
                    return Err(DataError::DuplicateFeatureAssignment(f.clone()));
                }
            }
        }
        let mut blocks = mapping;
        for f in table.feature_names() {
            if !assigned.contains_key(f) {
                if !names.insert(f.clone()) {
                    return Err(DataError::DuplicateBlockName(f.clone()));
                }
                blocks.push(Block { name: f.clone(), features: vec![f.clone()] });
            }
        }
        Ok(PreliminaryBlocks { blocks })
    }

    /// Every feature in its own block.
    pub fn singletons(table: &FeatureTable) -> Self {
        Self::from_mapping(Vec::new(), table).expect("singleton blocks are always valid")
    }

    pub fn names(&self) -> Vec<String> {
        self.blocks.iter().map(|b| b.name.clone()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

/// Reads a `{ "blocks": [ { "name": ..., "features": [...] } ] }` document.
pub fn load_blocks(path: &Path, table: &FeatureTable) -> Result<PreliminaryBlocks, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io { path: path.to_owned(), source })?;
    let mapping: BlockMapping =
        serde_json::from_reader(BufReader::new(file)).map_err(|source| DataError::Json { path: path.to_owned(), source })?;
    PreliminaryBlocks::from_mapping(mapping.blocks, table)
}

pub fn write_blocks(path: &Path, blocks: &[Block]) -> Result<(), DataError> {
    let doc = BlockMapping { blocks: blocks.to_vec() };
    let mut file = File::create(path).map_err(|source| DataError::Io { path: path.to_owned(), source })?;
    let text = serde_json::to_string_pretty(&doc).expect("block mapping serializes");
    writeln!(file, "{text}").map_err(|source| DataError::Io { path: path.to_owned(), source })
}
