//! Schema-checked tabular data: ingestion, canonical CSV output,
//! z-score standardization and numeric encoding for models.
//!
//! Cells equal to `?`, the empty string or whitespace are read as
//! [`Cell::Missing`]. Surrounding spaces and tabs are stripped from every
//! token before it is interpreted, so `"\t?"` and `"ckd\t"` behave as `?` and
//! `ckd`.

use std::collections::{BTreeMap, HashSet};
use std::io::Read;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{stats, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Nominal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Ordered category labels. An empty list on a nominal column means the
    /// order is learned from first appearance during ingestion.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

impl ColumnSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Numeric,
            categories: Vec::new(),
        }
    }

    pub fn nominal<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Nominal,
            categories: categories.into_iter().map(Into::into).collect(),
        }
    }

    fn category_index(&self, token: &str) -> Option<usize> {
        if let Some(i) = self.categories.iter().position(|c| c == token) {
            return Some(i);
        }
        // "1.02" and "1.020" name the same level
        let value: f64 = token.parse().ok()?;
        self.categories
            .iter()
            .position(|c| c.parse::<f64>().is_ok_and(|v| v == value))
    }

    /// Numeric value each category takes after encoding: the label itself
    /// when every label is a number, otherwise the category index.
    pub fn levels(&self) -> Vec<f64> {
        let parsed: Option<Vec<f64>> = self.categories.iter().map(|c| c.parse().ok()).collect();
        parsed.unwrap_or_else(|| (0..self.categories.len()).map(|i| i as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub target: String,
    pub columns: Vec<ColumnSpec>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>, target: impl Into<String>) -> Result<Self> {
        let schema = Self {
            target: target.into(),
            columns,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let schema: Schema = toml::from_str(s).map_err(|e| Error::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("schema is always representable as TOML")
    }

    fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::DuplicateColumn(c.name.clone()));
            }
            if c.kind == ColumnKind::Numeric && !c.categories.is_empty() {
                return Err(Error::Schema(format!("numeric column `{}` lists categories", c.name)));
            }
            let mut cats = HashSet::new();
            if !c.categories.iter().all(|x| cats.insert(x)) {
                return Err(Error::Schema(format!("column `{}` repeats a category", c.name)));
            }
        }
        match self.columns.iter().find(|c| c.name == self.target) {
            Some(c) if c.kind == ColumnKind::Nominal => Ok(()),
            Some(_) => Err(Error::Schema(format!("target `{}` must be nominal", self.target))),
            None => Err(Error::Schema(format!("target `{}` is not a column", self.target))),
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn target_index(&self) -> usize {
        self.index_of(&self.target).expect("validated")
    }

    /// Column indices of every non-target column, in schema order.
    pub fn feature_indices(&self) -> Vec<usize> {
        let t = self.target_index();
        (0..self.columns.len()).filter(|&i| i != t).collect()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.feature_indices()
            .into_iter()
            .map(|i| self.columns[i].name.clone())
            .collect()
    }

    /// Stable SHA-256 over the canonical JSON form of the schema.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("schema serializes");
        let digest = Sha256::digest(&canonical);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Number(f64),
    Category(usize),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }
}

/// Immutable table of typed cells; every row has one cell per schema column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataTable {
    schema: Schema,
    rows: Vec<Vec<Cell>>,
}

impl DataTable {
    pub fn new(schema: Schema, rows: Vec<Vec<Cell>>) -> Result<Self> {
        schema.validate()?;
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.columns.len() {
                return Err(Error::RaggedRow {
                    line: r + 2,
                    expected: schema.columns.len(),
                    found: row.len(),
                });
            }
            for (cell, spec) in row.iter().zip(&schema.columns) {
                match (cell, spec.kind) {
                    (Cell::Missing, _) => {}
                    (Cell::Number(x), ColumnKind::Numeric) if x.is_finite() => {}
                    (Cell::Category(i), ColumnKind::Nominal) if *i < spec.categories.len() => {}
                    _ => {
                        return Err(Error::Schema(format!(
                            "row {r}: cell {cell:?} is invalid for column `{}`",
                            spec.name
                        )))
                    }
                }
            }
        }
        Ok(Self { schema, rows })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn cell(&self, row: usize, col: usize) -> Cell {
        self.rows[row][col]
    }

    pub fn missing_count(&self) -> usize {
        self.rows.iter().flatten().filter(|c| c.is_missing()).count()
    }

    /// Count of rows per target class, in category order.
    pub fn class_counts(&self) -> Vec<usize> {
        let t = self.schema.target_index();
        let mut counts = vec![0; self.schema.columns[t].categories.len()];
        for row in &self.rows {
            if let Cell::Category(c) = row[t] {
                counts[c] += 1;
            }
        }
        counts
    }

    /// New table with the given rows (indices may repeat).
    pub fn select_rows(&self, indices: &[usize]) -> DataTable {
        DataTable {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Keeps the listed feature columns (plus the target), in the given order.
    pub fn select_columns(&self, names: &[&str]) -> Result<DataTable> {
        let mut idx = Vec::with_capacity(names.len() + 1);
        for n in names {
            idx.push(self.schema.index_of(n).ok_or_else(|| Error::UnknownFeature(n.to_string()))?);
        }
        let t = self.schema.target_index();
        if !idx.contains(&t) {
            idx.push(t);
        }
        let columns = idx.iter().map(|&i| self.schema.columns[i].clone()).collect();
        let schema = Schema::new(columns, self.schema.target.clone())?;
        let rows = self
            .rows
            .iter()
            .map(|row| idx.iter().map(|&i| row[i]).collect())
            .collect();
        Ok(DataTable { schema, rows })
    }

    /// Numeric view of one column; `None` marks a missing cell. Nominal cells
    /// use their encoding level.
    pub fn numeric_column(&self, col: usize) -> Vec<Option<f64>> {
        let levels = self.schema.columns[col].levels();
        self.rows
            .iter()
            .map(|row| match row[col] {
                Cell::Number(x) => Some(x),
                Cell::Category(c) => Some(levels[c]),
                Cell::Missing => None,
            })
            .collect()
    }

    /// Feature cells (target excluded) as numbers with explicit gaps.
    pub fn features_with_missing(&self) -> (Vec<String>, Vec<Vec<Option<f64>>>) {
        let idx = self.schema.feature_indices();
        let cols: Vec<Vec<Option<f64>>> = idx.iter().map(|&c| self.numeric_column(c)).collect();
        let rows = (0..self.n_rows())
            .map(|r| cols.iter().map(|col| col[r]).collect())
            .collect();
        (self.schema.feature_names(), rows)
    }

    /// Canonical CSV: schema column order, `?` for missing cells, numbers in
    /// shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let names: Vec<&str> = self.schema.columns.iter().map(|c| c.name.as_str()).collect();
        out.push_str(&names.join(","));
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row
                .iter()
                .zip(&self.schema.columns)
                .map(|(cell, spec)| format_cell(cell, spec))
                .collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

fn format_cell(cell: &Cell, spec: &ColumnSpec) -> String {
    match cell {
        Cell::Number(x) => format!("{x}"),
        Cell::Category(c) => spec.categories[*c].clone(),
        Cell::Missing => "?".to_string(),
    }
}

fn is_missing_token(token: &str) -> bool {
    token.is_empty() || token == "?"
}

/// Parses comma-delimited text with a header row against `schema`.
///
/// Header columns may appear in any order; the resulting table uses schema
/// order. Nominal columns without declared categories learn them in
/// first-seen order.
pub fn parse_dataset(input: &str, schema: &Schema) -> Result<DataTable> {
    parse_reader(input.as_bytes(), schema)
}

pub fn parse_reader<R: Read>(reader: R, schema: &Schema) -> Result<DataTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::None)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();

    let mut position = vec![usize::MAX; schema.columns.len()];
    for (i, h) in header.iter().enumerate() {
        let c = schema.index_of(h).ok_or_else(|| Error::UnknownColumn(h.clone()))?;
        if position[c] != usize::MAX {
            return Err(Error::DuplicateColumn(h.clone()));
        }
        position[c] = i;
    }
    if let Some(c) = position.iter().position(|&p| p == usize::MAX) {
        return Err(Error::MissingColumn(schema.columns[c].name.clone()));
    }

    let mut schema = schema.clone();
    let learn: Vec<bool> = schema
        .columns
        .iter()
        .map(|c| c.kind == ColumnKind::Nominal && c.categories.is_empty())
        .collect();
    let mut rows = Vec::new();
    let mut missing_variants = BTreeMap::<String, usize>::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let line = r + 2;
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                line,
                expected: header.len(),
                found: record.len(),
            });
        }
        let mut row = Vec::with_capacity(schema.columns.len());
        for (c, spec) in schema.columns.iter_mut().enumerate() {
            let raw = &record[position[c]];
            let token = raw.trim();
            if is_missing_token(token) {
                if raw != "?" {
                    *missing_variants.entry(format!("{raw:?}")).or_default() += 1;
                }
                row.push(Cell::Missing);
                continue;
            }
            let cell = match spec.kind {
                ColumnKind::Numeric => {
                    let x: f64 = token.parse().map_err(|_| Error::NonNumeric {
                        line,
                        column: spec.name.clone(),
                        token: token.to_string(),
                    })?;
                    if !x.is_finite() {
                        return Err(Error::NonNumeric {
                            line,
                            column: spec.name.clone(),
                            token: token.to_string(),
                        });
                    }
                    Cell::Number(x)
                }
                ColumnKind::Nominal => match spec.category_index(token) {
                    Some(i) => Cell::Category(i),
                    None if learn[c] => {
                        spec.categories.push(token.to_string());
                        Cell::Category(spec.categories.len() - 1)
                    }
                    None => {
                        return Err(Error::UnknownCategory {
                            line,
                            column: spec.name.clone(),
                            token: token.to_string(),
                        })
                    }
                },
            };
            row.push(cell);
        }
        rows.push(row);
    }
    if !missing_variants.is_empty() {
        tracing::info!(?missing_variants, "non-canonical missing markers read as missing");
    }
    for spec in &schema.columns {
        if spec.kind == ColumnKind::Nominal && spec.categories.len() < 2 {
            return Err(Error::Schema(format!(
                "nominal column `{}` has fewer than two categories",
                spec.name
            )));
        }
    }
    DataTable::new(schema, rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub columns: Vec<ColumnStats>,
}

#[derive(Debug, Clone, Copy)]
pub enum Standardize<'a> {
    /// Estimate mean and population std from observed cells.
    Fit,
    Apply(&'a StandardizationParams),
}

/// Z-score standardization of numeric feature columns: `x' = (x - mean) / std`.
/// Missing cells stay missing.
pub fn standardize(table: &DataTable, mode: Standardize<'_>) -> Result<(DataTable, StandardizationParams)> {
    let schema = table.schema();
    let params = match mode {
        Standardize::Apply(p) => {
            for c in &p.columns {
                match schema.index_of(&c.name) {
                    Some(i) if schema.columns[i].kind == ColumnKind::Numeric => {}
                    Some(_) => return Err(Error::invalid(format!("column `{}` is not numeric", c.name))),
                    None => return Err(Error::UnknownColumn(c.name.clone())),
                }
                if !(c.std > 0.0) {
                    return Err(Error::ZeroVariance(c.name.clone()));
                }
            }
            p.clone()
        }
        Standardize::Fit => {
            let mut columns = Vec::new();
            for i in schema.feature_indices() {
                let spec = &schema.columns[i];
                if spec.kind != ColumnKind::Numeric {
                    continue;
                }
                let observed: Vec<f64> = table.numeric_column(i).into_iter().flatten().collect();
                if observed.is_empty() {
                    return Err(Error::ZeroVariance(spec.name.clone()));
                }
                let mean = stats::mean(&observed);
                let std = stats::std_dev(&observed);
                if !(std > 0.0) {
                    return Err(Error::ZeroVariance(spec.name.clone()));
                }
                columns.push(ColumnStats {
                    name: spec.name.clone(),
                    mean,
                    std,
                });
            }
            StandardizationParams { columns }
        }
    };
    let targets: Vec<(usize, f64, f64)> = params
        .columns
        .iter()
        .map(|c| (schema.index_of(&c.name).expect("checked"), c.mean, c.std))
        .collect();
    let rows = table
        .rows()
        .iter()
        .map(|row| {
            let mut row = row.clone();
            for &(i, m, s) in &targets {
                if let Cell::Number(x) = row[i] {
                    row[i] = Cell::Number((x - m) / s);
                }
            }
            row
        })
        .collect();
    Ok((DataTable::new(schema.clone(), rows)?, params))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    /// Encoded values each category can take.
    Nominal { levels: Vec<f64> },
}

impl FeatureKind {
    pub fn is_nominal(&self) -> bool {
        matches!(self, FeatureKind::Nominal { .. })
    }
}

/// Dense numeric design matrix with binary labels, ready for models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub kinds: Vec<FeatureKind>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(
        names: Vec<String>,
        kinds: Vec<FeatureKind>,
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if names.len() != kinds.len() {
            return Err(Error::invalid("names and kinds differ in length"));
        }
        if rows.len() != labels.len() {
            return Err(Error::invalid("rows and labels differ in length"));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != names.len() {
                return Err(Error::RaggedRow {
                    line: i,
                    expected: names.len(),
                    found: r.len(),
                });
            }
            if r.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("row {i}")));
            }
        }
        if labels.iter().any(|&l| l >= class_names.len()) {
            return Err(Error::invalid("label outside class range"));
        }
        Ok(Self {
            names,
            kinds,
            rows,
            labels,
            class_names,
        })
    }

    /// All-numeric matrix with two generic classes; handy for fixtures.
    pub fn numeric(names: &[&str], rows: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        Self::new(
            names.iter().map(|s| s.to_string()).collect(),
            vec![FeatureKind::Numeric; names.len()],
            rows,
            labels,
            vec!["0".into(), "1".into()],
        )
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len().max(2)];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn subset_rows(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            names: self.names.clone(),
            kinds: self.kinds.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    /// Keeps the named features, in the given order.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<FeatureMatrix> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.feature_index(n.as_ref())
                    .ok_or_else(|| Error::UnknownFeature(n.as_ref().to_string()))
            })
            .collect::<Result<_>>()?;
        Ok(self.select_indices(&idx))
    }

    pub fn select_indices(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            names: idx.iter().map(|&j| self.names[j].clone()).collect(),
            kinds: idx.iter().map(|&j| self.kinds[j].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| idx.iter().map(|&j| r[j]).collect())
                .collect(),
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoding {
    pub name: String,
    pub kind: ColumnKind,
    /// `(label, encoded value)` for nominal features.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingMap {
    pub features: Vec<FeatureEncoding>,
    pub target: String,
    pub classes: Vec<String>,
}

/// Encodes a complete table as a numeric matrix plus labels.
///
/// Nominal columns become ordinal codes in stored category order, except that
/// columns whose labels are all numbers (`sg`, `al`, `su`) keep those numbers,
/// so binary `{no, yes}` maps to `{0, 1}` and `al` keeps its 0-5 grade.
pub fn encode_for_model(table: &DataTable) -> Result<(FeatureMatrix, EncodingMap)> {
    let schema = table.schema();
    let t = schema.target_index();
    let idx = schema.feature_indices();
    let levels: Vec<Vec<f64>> = schema.columns.iter().map(|c| c.levels()).collect();
    let mut rows = Vec::with_capacity(table.n_rows());
    let mut labels = Vec::with_capacity(table.n_rows());
    for (r, row) in table.rows().iter().enumerate() {
        let mut out = Vec::with_capacity(idx.len());
        for &c in &idx {
            out.push(match row[c] {
                Cell::Number(x) => x,
                Cell::Category(k) => levels[c][k],
                Cell::Missing => {
                    return Err(Error::MissingCell {
                        row: r,
                        column: schema.columns[c].name.clone(),
                    })
                }
            });
        }
        match row[t] {
            Cell::Category(k) => labels.push(k),
            _ => {
                return Err(Error::MissingCell {
                    row: r,
                    column: schema.target.clone(),
                })
            }
        }
        rows.push(out);
    }
    let mut names = Vec::new();
    let mut kinds = Vec::new();
    let mut features = Vec::new();
    for &c in &idx {
        let spec = &schema.columns[c];
        names.push(spec.name.clone());
        match spec.kind {
            ColumnKind::Numeric => {
                kinds.push(FeatureKind::Numeric);
                features.push(FeatureEncoding {
                    name: spec.name.clone(),
                    kind: ColumnKind::Numeric,
                    levels: Vec::new(),
                });
            }
            ColumnKind::Nominal => {
                kinds.push(FeatureKind::Nominal {
                    levels: levels[c].clone(),
                });
                features.push(FeatureEncoding {
                    name: spec.name.clone(),
                    kind: ColumnKind::Nominal,
                    levels: spec.categories.iter().cloned().zip(levels[c].iter().copied()).collect(),
                });
            }
        }
    }
    let classes = schema.columns[t].categories.clone();
    let matrix = FeatureMatrix::new(names, kinds, rows, labels, classes.clone())?;
    Ok((
        matrix,
        EncodingMap {
            features,
            target: schema.target.clone(),
            classes,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_schema() -> Schema {
        Schema::new(
            vec![
                ColumnSpec::numeric("age"),
                ColumnSpec::nominal("rbc", ["abnormal", "normal"]),
                ColumnSpec::nominal("htn", ["no", "yes"]),
                ColumnSpec::nominal("class", ["ckd", "notckd"]),
            ],
            "class",
        )
        .unwrap()
    }

    #[test]
    fn tab_prefixed_question_mark_is_missing() {
        let t = parse_dataset("age,rbc,htn,class\n48,\t?,yes,ckd\n", &small_schema()).unwrap();
        assert_eq!(t.cell(0, 1), Cell::Missing);
        assert_eq!(t.cell(0, 2), Cell::Category(1));
    }

    #[test]
    fn empty_and_whitespace_cells_are_missing() {
        let t = parse_dataset("age,rbc,htn,class\n ,normal,  ,notckd\n", &small_schema()).unwrap();
        assert_eq!(t.missing_count(), 2);
        assert_eq!(t.cell(0, 3), Cell::Category(1));
    }

    #[test]
    fn numeric_row_round_trips() {
        let schema = Schema::new(
            vec![
                ColumnSpec::numeric("a"),
                ColumnSpec::numeric("b"),
                ColumnSpec::nominal("y", ["p", "q"]),
            ],
            "y",
        )
        .unwrap();
        let csv = "a,b,y\n1.5,-2,p\n0.1,1e3,q\n";
        let t = parse_dataset(csv, &schema).unwrap();
        assert_eq!(t.cell(0, 0), Cell::Number(1.5));
        assert_eq!(t.cell(1, 1), Cell::Number(1000.0));
        assert_eq!(t.to_csv(), "a,b,y\n1.5,-2,p\n0.1,1000,q\n");
    }

    #[test]
    fn errors_are_specific() {
        let s = small_schema();
        assert!(matches!(
            parse_dataset("age,rbc,htn,class,extra\n1,normal,no,ckd,1\n", &s),
            Err(Error::UnknownColumn(c)) if c == "extra"
        ));
        assert!(matches!(
            parse_dataset("age,rbc,htn,class\nold,normal,no,ckd\n", &s),
            Err(Error::NonNumeric { line: 2, .. })
        ));
        assert!(matches!(
            parse_dataset("age,rbc,htn,class\n1,normal,no\n", &s),
            Err(Error::RaggedRow { line: 2, expected: 4, found: 3 })
        ));
        assert!(matches!(
            parse_dataset("age,rbc,htn,class\n1,weird,no,ckd\n", &s),
            Err(Error::UnknownCategory { .. })
        ));
        assert!(matches!(
            parse_dataset("age,rbc,class\n1,normal,ckd\n", &s),
            Err(Error::MissingColumn(c)) if c == "htn"
        ));
    }

    #[test]
    fn header_order_is_free() {
        let t = parse_dataset("class,htn,rbc,age\nckd,no,normal,3\n", &small_schema()).unwrap();
        assert_eq!(t.cell(0, 0), Cell::Number(3.0));
        assert_eq!(t.cell(0, 3), Cell::Category(0));
    }

    #[test]
    fn learned_categories_follow_first_appearance() {
        let schema = Schema::new(
            vec![
                ColumnSpec::nominal("c", Vec::<String>::new()),
                ColumnSpec::nominal("y", ["a", "b"]),
            ],
            "y",
        )
        .unwrap();
        let t = parse_dataset("c,y\nz,a\nx,b\nz,a\n", &schema).unwrap();
        assert_eq!(t.schema().columns[0].categories, vec!["z", "x"]);
        assert!(parse_dataset("c,y\nz,a\n", &schema).is_err());
    }

    #[test]
    fn numeric_category_labels_match_by_value() {
        let schema = Schema::new(
            vec![
                ColumnSpec::nominal("sg", ["1.005", "1.010", "1.020"]),
                ColumnSpec::nominal("y", ["a", "b"]),
            ],
            "y",
        )
        .unwrap();
        let t = parse_dataset("sg,y\n1.01,a\n1.020,b\n", &schema).unwrap();
        assert_eq!(t.cell(0, 0), Cell::Category(1));
        let (m, _) = encode_for_model(&t).unwrap();
        assert_eq!(m.rows[1][0], 1.02);
    }

    #[test]
    fn standardize_examples() {
        let schema = Schema::new(vec![ColumnSpec::numeric("x"), ColumnSpec::nominal("y", ["a", "b"])], "y").unwrap();
        let t = parse_dataset("x,y\n2,a\n4,b\n6,a\n", &schema).unwrap();
        let (z, p) = standardize(&t, Standardize::Fit).unwrap();
        assert_eq!(p.columns[0].mean, 4.0);
        assert_eq!(z.cell(1, 0), Cell::Number(0.0));
        let t = parse_dataset("x,y\n1,a\n3,b\n?,a\n", &schema).unwrap();
        let (z, p) = standardize(&t, Standardize::Fit).unwrap();
        assert_eq!(p.columns[0].std, 1.0);
        assert_eq!(z.cell(0, 0), Cell::Number(-1.0));
        assert_eq!(z.cell(1, 0), Cell::Number(1.0));
        assert_eq!(z.missing_count(), 1);
    }

    #[test]
    fn zero_variance_reports_column() {
        let schema = Schema::new(vec![ColumnSpec::numeric("flat"), ColumnSpec::nominal("y", ["a", "b"])], "y").unwrap();
        let t = parse_dataset("flat,y\n5,a\n5,b\n", &schema).unwrap();
        assert!(matches!(standardize(&t, Standardize::Fit), Err(Error::ZeroVariance(c)) if c == "flat"));
    }

    #[test]
    fn binary_nominal_encodes_to_zero_one() {
        let t = parse_dataset("age,rbc,htn,class\n40,normal,no,ckd\n50,abnormal,yes,notckd\n", &small_schema()).unwrap();
        let (m, map) = encode_for_model(&t).unwrap();
        assert_eq!(m.column(2), vec![0.0, 1.0]);
        assert_eq!(m.column(0), vec![40.0, 50.0]);
        assert_eq!(m.labels, vec![0, 1]);
        assert_eq!(map.features[2].levels, vec![("no".to_string(), 0.0), ("yes".to_string(), 1.0)]);
    }

    #[test]
    fn encoding_rejects_missing() {
        let t = parse_dataset("age,rbc,htn,class\n?,normal,no,ckd\n", &small_schema()).unwrap();
        assert!(matches!(encode_for_model(&t), Err(Error::MissingCell { row: 0, .. })));
    }

    #[test]
    fn fingerprint_changes_with_schema() {
        let a = small_schema();
        let mut b = a.clone();
        b.columns[0].name = "years".into();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), small_schema().fingerprint());
        assert_eq!(Schema::from_toml_str(&a.to_toml_string()).unwrap(), a);
    }
}
