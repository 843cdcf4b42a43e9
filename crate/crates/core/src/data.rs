//! Tabular datasets: a feature matrix, a per-column schema and binary risk labels.
//!
//! On disk a dataset is a header CSV whose label column is named by the
//! schema (default `risk`) plus a JSON schema document mapping each column to
//! `{kind, domain}`.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_LABEL: &str = "risk";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Binary,
    Categorical { levels: usize },
    Continuous,
}

impl FeatureKind {
    /// Number of discrete levels, `None` for continuous features.
    pub fn levels(&self) -> Option<usize> {
        match *self {
            FeatureKind::Binary => Some(2),
            FeatureKind::Categorical { levels } => Some(levels),
            FeatureKind::Continuous => None,
        }
    }

    pub fn is_discrete(&self) -> bool {
        self.levels().is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Inclusive `[low, high]` bounds of admissible values.
    pub domain: (f64, f64),
}

impl FeatureSpec {
    pub fn binary(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Binary,
            domain: (0.0, 1.0),
        }
    }

    pub fn categorical(name: impl Into<String>, levels: usize) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Categorical { levels },
            domain: (0.0, levels.saturating_sub(1) as f64),
        }
    }

    pub fn continuous(name: impl Into<String>, low: f64, high: f64) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Continuous,
            domain: (low, high),
        }
    }

    pub fn check_value(&self, value: f64) -> Result<()> {
        let out = || Error::OutOfDomain {
            feature: self.name.clone(),
            value,
        };
        if !value.is_finite() || value < self.domain.0 || value > self.domain.1 {
            return Err(out());
        }
        if self.kind.is_discrete() && value.fract() != 0.0 {
            return Err(out());
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.domain;
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(Error::Schema(format!("feature {} has an invalid domain", self.name)));
        }
        match self.kind {
            FeatureKind::Binary if (lo, hi) != (0.0, 1.0) => {
                Err(Error::Schema(format!("binary feature {} must have domain [0, 1]", self.name)))
            }
            FeatureKind::Categorical { levels } if levels < 2 || (lo, hi) != (0.0, (levels - 1) as f64) => Err(
                Error::Schema(format!("categorical feature {} must have domain [0, levels-1]", self.name)),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Schema {
    pub features: Vec<FeatureSpec>,
    pub label: String,
    /// Set on datasets produced by distillation.
    pub distilled: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ColumnDoc {
    kind: KindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    levels: Option<usize>,
    domain: [f64; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum KindName {
    Binary,
    Categorical,
    Continuous,
}

impl ColumnDoc {
    fn from_spec(f: &FeatureSpec) -> Self {
        let (kind, levels) = match f.kind {
            FeatureKind::Binary => (KindName::Binary, None),
            FeatureKind::Categorical { levels } => (KindName::Categorical, Some(levels)),
            FeatureKind::Continuous => (KindName::Continuous, None),
        };
        Self {
            kind,
            levels,
            domain: [f.domain.0, f.domain.1],
        }
    }

    fn feature_kind(&self, name: &str) -> Result<FeatureKind> {
        match (&self.kind, self.levels) {
            (KindName::Binary, None) => Ok(FeatureKind::Binary),
            (KindName::Continuous, None) => Ok(FeatureKind::Continuous),
            (KindName::Categorical, Some(levels)) => Ok(FeatureKind::Categorical { levels }),
            _ => Err(Error::Schema(format!(
                "column {name}: `levels` is required for categorical columns and only allowed there"
            ))),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaDoc {
    label: String,
    #[serde(default)]
    distilled: bool,
    #[serde(default)]
    feature_order: Option<Vec<String>>,
    columns: BTreeMap<String, ColumnDoc>,
}

impl Schema {
    pub fn new(features: Vec<FeatureSpec>) -> Result<Self> {
        let schema = Self {
            features,
            label: DEFAULT_LABEL.to_string(),
            distilled: false,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::Schema("schema has no features".into()));
        }
        let mut names = std::collections::HashSet::new();
        for f in &self.features {
            f.validate()?;
            if f.name == self.label || !names.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name {}", f.name)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = SchemaDoc {
            label: self.label.clone(),
            distilled: self.distilled,
            feature_order: Some(self.names()),
            columns: self
                .features
                .iter()
                .map(|f| (f.name.clone(), ColumnDoc::from_spec(f)))
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut doc: SchemaDoc = serde_json::from_str(text)?;
        let order = match doc.feature_order.take() {
            Some(order) => order,
            None => doc.columns.keys().cloned().collect(),
        };
        if order.len() != doc.columns.len() {
            return Err(Error::Schema("feature_order does not list every column".into()));
        }
        let features = order
            .into_iter()
            .map(|name| {
                let col = doc
                    .columns
                    .remove(&name)
                    .ok_or_else(|| Error::Schema(format!("feature_order names unknown column {name}")))?;
                Ok(FeatureSpec {
                    kind: col.feature_kind(&name)?,
                    name,
                    domain: (col.domain[0], col.domain[1]),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let schema = Self {
            features,
            label: doc.label,
            distilled: doc.distilled,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Reorders the schema to match a CSV header (label column excluded).
    fn aligned_to(&self, header: &[String]) -> Result<Self> {
        let features = header
            .iter()
            .map(|name| {
                self.features
                    .iter()
                    .find(|f| &f.name == name)
                    .cloned()
                    .ok_or_else(|| Error::Schema(format!("column {name} missing from schema")))
            })
            .collect::<Result<Vec<_>>>()?;
        if features.len() != self.features.len() {
            return Err(Error::Schema("CSV header does not cover every schema column".into()));
        }
        Ok(Self {
            features,
            label: self.label.clone(),
            distilled: self.distilled,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    schema: Schema,
    values: Vec<f64>,
    labels: Vec<u8>,
}

impl Dataset {
    /// Row-major `values` of shape `(labels.len(), schema.len())`.
    pub fn new(schema: Schema, values: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        schema.validate()?;
        let d = schema.len();
        if values.len() != labels.len() * d {
            return Err(Error::DimensionMismatch {
                what: "dataset values",
                expected: labels.len() * d,
                found: values.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::InvalidInput(format!("label {bad} is not binary")));
        }
        for row in values.chunks(d) {
            for (spec, &v) in schema.features.iter().zip(row) {
                spec.check_value(v)?;
            }
        }
        Ok(Self { schema, values, labels })
    }

    pub fn from_rows(schema: Schema, rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self> {
        if rows.iter().any(|r| r.len() != schema.len()) {
            return Err(Error::InvalidInput("ragged rows".into()));
        }
        Self::new(schema, rows.concat(), labels)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_features();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n_features())
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_features() + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    pub fn is_distilled(&self) -> bool {
        self.schema.distilled
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.n_features());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self {
            schema: self.schema.clone(),
            values,
            labels,
        }
    }

    /// Same features, new labels.
    pub fn with_labels(&self, labels: Vec<u8>) -> Result<Self> {
        Self::new(self.schema.clone(), self.values.clone(), labels)
    }

    /// Requires both classes to be present.
    pub fn check_binary_labels(&self) -> Result<()> {
        let pos = self.positives();
        if self.labels.is_empty() || pos == 0 || pos == self.labels.len() {
            return Err(Error::DegenerateLabels(format!(
                "{pos} positives among {} rows",
                self.labels.len()
            )));
        }
        Ok(())
    }

    /// Label-stratified split into `(train, test)` row indices.
    pub fn stratified_split(&self, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::InvalidInput("test fraction must lie in (0, 1)".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut train = Vec::new();
        let mut test = Vec::new();
        for class in [0u8, 1] {
            let mut idx: Vec<usize> = (0..self.n_rows()).filter(|&i| self.labels[i] == class).collect();
            idx.shuffle(&mut rng);
            let n_test = (idx.len() as f64 * test_fraction).round() as usize;
            test.extend_from_slice(&idx[..n_test]);
            train.extend_from_slice(&idx[n_test..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        Ok((train, test))
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let mut header = self.schema.names();
        header.push(self.schema.label.clone());
        writer.write_record(&header)?;
        for (row, &y) in self.rows().zip(&self.labels) {
            let mut record: Vec<String> = row.iter().map(|v| format_value(*v)).collect();
            record.push(y.to_string());
            writer.write_record(&record)?;
        }
        let bytes = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    pub fn from_csv_str(text: &str, schema: &Schema) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
        let label_pos = header
            .iter()
            .position(|h| h == &schema.label)
            .ok_or_else(|| Error::Schema(format!("label column {} missing from CSV", schema.label)))?;
        let feature_cols: Vec<String> = header
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != label_pos)
            .map(|(_, h)| h.clone())
            .collect();
        let schema = schema.aligned_to(&feature_cols)?;
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            for (i, field) in record.iter().enumerate() {
                let parsed: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("row {}: cannot parse {field:?}", line + 1)))?;
                if i == label_pos {
                    if parsed != 0.0 && parsed != 1.0 {
                        return Err(Error::InvalidInput(format!("row {}: label {field} is not 0/1", line + 1)));
                    }
                    labels.push(parsed as u8);
                } else {
                    values.push(parsed);
                }
            }
        }
        Self::new(schema, values, labels)
    }

    pub fn load(csv_path: &Path, schema_path: &Path) -> Result<Self> {
        let schema = Schema::load(schema_path)?;
        Self::from_csv_str(&std::fs::read_to_string(csv_path)?, &schema)
    }

    pub fn save(&self, csv_path: &Path, schema_path: &Path) -> Result<()> {
        std::fs::write(csv_path, self.to_csv_string()?)?;
        self.schema.save(schema_path)
    }
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn format_value(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Dataset {
        let schema = Schema::new(vec![
            FeatureSpec::binary("a"),
            FeatureSpec::categorical("b", 3),
            FeatureSpec::continuous("c", -1.0, 1.0),
        ])
        .unwrap();
        Dataset::from_rows(
            schema,
            &[
                vec![0.0, 2.0, 0.25],
                vec![1.0, 0.0, -0.125],
                vec![1.0, 1.0, 0.1],
                vec![0.0, 1.0, 1.0],
            ],
            vec![0, 1, 0, 1],
        )
        .unwrap()
    }

    #[test]
    fn csv_roundtrip_preserves_values() {
        let data = small();
        let text = data.to_csv_string().unwrap();
        assert!(text.starts_with("a,b,c,risk\n"));
        let back = Dataset::from_csv_str(&text, data.schema()).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn schema_json_roundtrip_and_header_reordering() {
        let data = small();
        let schema = Schema::from_json(&data.schema().to_json().unwrap()).unwrap();
        assert_eq!(&schema, data.schema());
        let reordered = "c,risk,a,b\n0.5,1,1,2\n";
        let back = Dataset::from_csv_str(reordered, &schema).unwrap();
        assert_eq!(back.schema().names(), vec!["c", "a", "b"]);
        assert_eq!(back.row(0), &[0.5, 1.0, 2.0]);
    }

    #[test]
    fn rejects_out_of_domain_and_bad_labels() {
        let schema = small().schema().clone();
        assert!(Dataset::from_rows(schema.clone(), &[vec![0.0, 3.0, 0.0]], vec![0]).is_err());
        assert!(Dataset::from_rows(schema.clone(), &[vec![0.5, 0.0, 0.0]], vec![0]).is_err());
        assert!(Dataset::from_rows(schema, &[vec![0.0, 0.0, 0.0]], vec![2]).is_err());
    }

    #[test]
    fn unknown_schema_keys_rejected() {
        let text = r#"{"label":"risk","columns":{"a":{"kind":"binary","domain":[0,1],"oops":1}}}"#;
        assert!(Schema::from_json(text).is_err());
    }

    #[test]
    fn stratified_split_keeps_class_ratio() {
        let schema = Schema::new(vec![FeatureSpec::continuous("x", 0.0, 1000.0)]).unwrap();
        let rows: Vec<Vec<f64>> = (0..1000).map(|i| vec![i as f64]).collect();
        let labels = (0..1000).map(|i| u8::from(i % 10 == 0)).collect();
        let data = Dataset::from_rows(schema, &rows, labels).unwrap();
        let (train, test) = data.stratified_split(0.2, 3).unwrap();
        assert_eq!(train.len() + test.len(), 1000);
        assert_eq!(test.iter().filter(|&&i| data.labels()[i] == 1).count(), 20);
        assert_eq!(data.stratified_split(0.2, 3).unwrap(), (train, test));
    }
}
