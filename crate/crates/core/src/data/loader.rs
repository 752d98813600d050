use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TabularDataset;
use crate::error::{Error, Result};

/// How to turn a CSV table into a [`TabularDataset`].
///
/// Stored as JSON with keys `label_column`, `positive_label_value`,
/// `attribute_column`, `protected_value`, `drop_columns`,
/// `categorical_columns` and the optional `feature_columns`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub label_column: String,
    pub positive_label_value: String,
    pub attribute_column: String,
    /// Value of the attribute column that maps to attribute = 1.
    pub protected_value: String,
    #[serde(default)]
    pub drop_columns: Vec<String>,
    #[serde(default)]
    pub categorical_columns: Vec<String>,
    /// Explicit feature list; when absent every remaining column is used.
    #[serde(default)]
    pub feature_columns: Option<Vec<String>>,
}

impl DatasetSchema {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

enum ColumnKind {
    Numeric,
    /// Sorted levels; one output column per level.
    Categorical(Vec<String>),
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty()
        || cell == "?"
        || cell.eq_ignore_ascii_case("na")
        || cell.eq_ignore_ascii_case("n/a")
        || cell.eq_ignore_ascii_case("nan")
}

/// Binary mapping for the label and attribute columns: `positive` maps to 1,
/// the single other value seen maps to 0, anything else is an error.
fn binary_column(
    values: &[&str],
    column: &str,
    positive: &str,
    first_row: usize,
) -> Result<Vec<u8>> {
    let mut negative: Option<&str> = None;
    let mut out = Vec::with_capacity(values.len());
    for (i, &v) in values.iter().enumerate() {
        if is_missing(v) {
            return Err(Error::MissingValue {
                row: first_row + i,
                column: column.to_string(),
            });
        }
        if v == positive {
            out.push(1);
            continue;
        }
        match negative {
            None => {
                negative = Some(v);
                out.push(0);
            }
            Some(n) if n == v => out.push(0),
            Some(n) => {
                return Err(Error::Schema(format!(
                    "column `{column}` has a third value {v:?} (row {}); expected only {positive:?} and {n:?}",
                    first_row + i
                )))
            }
        }
    }
    Ok(out)
}

pub fn load_csv(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<TabularDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_csv_reader(file, schema)
}

/// Parse CSV text (header row, comma delimiter, RFC 4180 quoting).
pub fn load_csv_reader<R: Read>(reader: R, schema: &DatasetSchema) -> Result<TabularDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::EmptyInput("CSV has no header row".into()));
    }
    let position: BTreeMap<&str, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.as_str(), i))
        .collect();
    let locate = |name: &str| {
        position
            .get(name)
            .copied()
            .ok_or_else(|| Error::Schema(format!("column `{name}` not found in header")))
    };

    if schema.label_column == schema.attribute_column {
        return Err(Error::Schema(format!(
            "label and attribute column are both `{}`",
            schema.label_column
        )));
    }
    let label_idx = locate(&schema.label_column)?;
    let attr_idx = locate(&schema.attribute_column)?;
    for c in schema.drop_columns.iter().chain(&schema.categorical_columns) {
        locate(c)?;
    }

    let feature_idx: Vec<usize> = match &schema.feature_columns {
        Some(cols) => {
            let mut idx = Vec::with_capacity(cols.len());
            for c in cols {
                let i = locate(c)?;
                if i == label_idx || i == attr_idx {
                    return Err(Error::Schema(format!(
                        "column `{c}` cannot be both a feature and the label/attribute"
                    )));
                }
                idx.push(i);
            }
            idx
        }
        None => {
            let dropped: BTreeSet<&str> = schema.drop_columns.iter().map(String::as_str).collect();
            (0..headers.len())
                .filter(|&i| {
                    i != label_idx && i != attr_idx && !dropped.contains(headers[i].as_str())
                })
                .collect()
        }
    };

    let records: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
    if records.is_empty() {
        return Err(Error::EmptyInput("CSV has a header but no data rows".into()));
    }

    let categorical: BTreeSet<&str> = schema
        .categorical_columns
        .iter()
        .map(String::as_str)
        .collect();
    let mut kinds = Vec::with_capacity(feature_idx.len());
    for &fi in &feature_idx {
        let name = headers[fi].as_str();
        if categorical.contains(name) {
            let mut levels = BTreeSet::new();
            for (r, rec) in records.iter().enumerate() {
                let cell = &rec[fi];
                if is_missing(cell) {
                    return Err(Error::MissingValue {
                        row: r,
                        column: name.to_string(),
                    });
                }
                levels.insert(cell.to_string());
            }
            kinds.push(ColumnKind::Categorical(levels.into_iter().collect()));
        } else {
            kinds.push(ColumnKind::Numeric);
        }
    }

    let mut names = Vec::new();
    for (&fi, kind) in feature_idx.iter().zip(&kinds) {
        match kind {
            ColumnKind::Numeric => names.push(headers[fi].clone()),
            ColumnKind::Categorical(levels) => {
                names.extend(levels.iter().map(|l| format!("{}={}", headers[fi], l)))
            }
        }
    }
    let width = names.len();

    let mut features = Vec::with_capacity(records.len() * width);
    for (r, rec) in records.iter().enumerate() {
        for (&fi, kind) in feature_idx.iter().zip(&kinds) {
            let cell = &rec[fi];
            match kind {
                ColumnKind::Numeric => {
                    if is_missing(cell) {
                        return Err(Error::MissingValue {
                            row: r,
                            column: headers[fi].clone(),
                        });
                    }
                    let v: f64 = cell.parse().map_err(|_| Error::Parse {
                        row: r,
                        column: headers[fi].clone(),
                        value: cell.to_string(),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Parse {
                            row: r,
                            column: headers[fi].clone(),
                            value: cell.to_string(),
                        });
                    }
                    features.push(v);
                }
                ColumnKind::Categorical(levels) => {
                    features.extend(levels.iter().map(|l| if l == cell { 1.0 } else { 0.0 }))
                }
            }
        }
    }

    let label_cells: Vec<&str> = records.iter().map(|r| &r[label_idx]).collect();
    let attr_cells: Vec<&str> = records.iter().map(|r| &r[attr_idx]).collect();
    let labels = binary_column(
        &label_cells,
        &schema.label_column,
        &schema.positive_label_value,
        0,
    )?;
    let attribute = binary_column(
        &attr_cells,
        &schema.attribute_column,
        &schema.protected_value,
        0,
    )?;

    TabularDataset::from_flat(features, width, labels, attribute)?.with_column_names(names)
}
