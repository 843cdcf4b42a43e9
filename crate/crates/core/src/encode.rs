//! Numeric encoding of raw feature rows for network input.
//!
//! Continuous columns are z-scored, binary columns pass through as 0/1 and
//! categorical columns are one-hot encoded. All encoded columns of one raw
//! feature share a single first-layer group.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnEncoding {
    Standardized { mean: f64, sd: f64 },
    Binary,
    OneHot { levels: usize },
}

impl ColumnEncoding {
    pub fn width(&self) -> usize {
        match self {
            ColumnEncoding::OneHot { levels } => *levels,
            _ => 1,
        }
    }

    pub fn encode_into(&self, value: f64, out: &mut Vec<f64>) {
        match *self {
            ColumnEncoding::Standardized { mean, sd } => out.push((value - mean) / sd),
            ColumnEncoding::Binary => out.push(value),
            ColumnEncoding::OneHot { levels } => {
                let level = value as usize;
                out.extend((0..levels).map(|k| if k == level { 1.0 } else { 0.0 }));
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    columns: Vec<ColumnEncoding>,
}

impl Encoder {
    /// Fits column statistics on `data`.
    pub fn fit(data: &Dataset) -> Self {
        let n = data.n_rows().max(1) as f64;
        let columns = data
            .schema()
            .features
            .iter()
            .enumerate()
            .map(|(j, spec)| match spec.kind {
                FeatureKind::Binary => ColumnEncoding::Binary,
                FeatureKind::Categorical { levels } => ColumnEncoding::OneHot { levels },
                FeatureKind::Continuous => {
                    let col = data.column(j);
                    let mean = col.iter().sum::<f64>() / n;
                    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                    let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
                    ColumnEncoding::Standardized { mean, sd }
                }
            })
            .collect();
        Self { columns }
    }

    pub fn from_columns(columns: Vec<ColumnEncoding>) -> Self {
        Self { columns }
    }

    pub fn columns(&self) -> &[ColumnEncoding] {
        &self.columns
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    /// Encoded width of all features except `exclude`.
    pub fn width(&self, exclude: Option<usize>) -> usize {
        self.columns
            .iter()
            .enumerate()
            .filter(|(j, _)| Some(*j) != exclude)
            .map(|(_, c)| c.width())
            .sum()
    }

    /// First-layer groups over the encoded columns, one per retained feature.
    pub fn groups(&self, exclude: Option<usize>) -> Vec<Vec<usize>> {
        let mut offset = 0;
        let mut groups = Vec::new();
        for (j, c) in self.columns.iter().enumerate() {
            if Some(j) == exclude {
                continue;
            }
            groups.push((offset..offset + c.width()).collect());
            offset += c.width();
        }
        groups
    }

    pub fn encode_row_into(&self, row: &[f64], exclude: Option<usize>, out: &mut Vec<f64>) {
        for (j, (c, &v)) in self.columns.iter().zip(row).enumerate() {
            if Some(j) != exclude {
                c.encode_into(v, out);
            }
        }
    }

    pub fn encode_row(&self, row: &[f64], exclude: Option<usize>) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width(exclude));
        self.encode_row_into(row, exclude, &mut out);
        out
    }

    /// Row-major encoding of every row of `data`.
    pub fn encode_dataset(&self, data: &Dataset, exclude: Option<usize>) -> Vec<f64> {
        let mut out = Vec::with_capacity(data.n_rows() * self.width(exclude));
        for row in data.rows() {
            self.encode_row_into(row, exclude, &mut out);
        }
        out
    }

    /// Encoding of a single value of feature `j`.
    pub fn encode_value(&self, j: usize, value: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.columns[j].width());
        self.columns[j].encode_into(value, &mut out);
        out
    }
}
