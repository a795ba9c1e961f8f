//! Observational data, CSV ingestion and covariate design construction.
//!
//! Rows are stored treated-first (stable within each arm) so that index
//! ranges `0..n1` and `n1..n` address the two arms directly. The original
//! row index is kept alongside for reporting.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("treatment value {value} on row {row} is not 0 or 1")]
    NonBinaryTreatment { row: usize, value: String },
    #[error("non-numeric value `{value}` in column `{column}` on row {row}")]
    NonNumericValue { row: usize, column: String, value: String },
    #[error("need at least one treated and one control unit (n1 = {n1}, n0 = {n0})")]
    AllTreatedOrAllControl { n1: usize, n0: usize },
    #[error("rank-deficient design: {0}")]
    RankDeficientDesign(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub y: f64,
    pub z: u8,
    pub x: Vec<f64>,
}

/// One derived design column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity(String),
    /// Centred and scaled by the pooled mean and standard deviation.
    Standardize(String),
    Product(String, String),
}

impl Transform {
    fn columns(&self) -> Vec<&str> {
        match self {
            Transform::Identity(a) | Transform::Standardize(a) => vec![a],
            Transform::Product(a, b) => vec![a, b],
        }
    }

    pub fn label(&self) -> String {
        match self {
            Transform::Identity(a) => a.clone(),
            Transform::Standardize(a) => format!("std({a})"),
            Transform::Product(a, b) => format!("{a}*{b}"),
        }
    }
}

/// Which columns feed the propensity design `s(x)` and the balance design `g(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TransformSpec {
    pub s_columns: Vec<Transform>,
    pub g_columns: Vec<Transform>,
}

impl TransformSpec {
    /// Identity transform of every covariate in both designs.
    pub fn identity(names: &[String]) -> Self {
        let cols: Vec<Transform> = names.iter().cloned().map(Transform::Identity).collect();
        TransformSpec { s_columns: cols.clone(), g_columns: cols }
    }
}

/// Column names used when reading a CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub y: String,
    pub z: String,
    /// Covariate columns; empty means every remaining column.
    #[serde(default)]
    pub x: Vec<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_delimiter() -> char {
    ','
}

impl CsvSchema {
    pub fn new(y: &str, z: &str, x: &[&str]) -> Self {
        CsvSchema { y: y.to_string(), z: z.to_string(), x: x.iter().map(|s| s.to_string()).collect(), delimiter: ',' }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub observations: Vec<Observation>,
    pub covariate_names: Vec<String>,
    /// Original (0-based) row index of each stored observation.
    pub original_index: Vec<usize>,
    pub n1: usize,
    pub n0: usize,
    /// n x (1 + dim s), intercept first. Empty until [`Dataset::build_designs`].
    pub s_design: DMatrix<f64>,
    pub g_design: DMatrix<f64>,
    pub s_labels: Vec<String>,
    pub g_labels: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from rows in their original order, reordering treated first.
    pub fn from_observations(observations: Vec<Observation>, covariate_names: Vec<String>) -> Result<Self, DataError> {
        let p = covariate_names.len();
        for (row, o) in observations.iter().enumerate() {
            if o.z > 1 {
                return Err(DataError::NonBinaryTreatment { row, value: o.z.to_string() });
            }
            if o.x.len() != p {
                return Err(DataError::DimensionMismatch(format!(
                    "row {row} has {} covariates, expected {p}",
                    o.x.len()
                )));
            }
            if !o.y.is_finite() || o.x.iter().any(|v| !v.is_finite()) {
                return Err(DataError::NonNumericValue { row, column: "<row>".into(), value: "non-finite".into() });
            }
        }
        let mut order: Vec<usize> = (0..observations.len()).collect();
        order.sort_by_key(|&i| 1 - observations[i].z);
        let n1 = observations.iter().filter(|o| o.z == 1).count();
        let n0 = observations.len() - n1;
        if n1 == 0 || n0 == 0 {
            return Err(DataError::AllTreatedOrAllControl { n1, n0 });
        }
        let mut slots: Vec<Option<Observation>> = observations.into_iter().map(Some).collect();
        let observations = order.iter().map(|&i| slots[i].take().expect("permutation")).collect();
        let n = n1 + n0;
        Ok(Dataset {
            observations,
            covariate_names,
            original_index: order,
            n1,
            n0,
            s_design: DMatrix::from_element(n, 1, 1.0),
            g_design: DMatrix::zeros(n, 0),
            s_labels: vec!["(intercept)".into()],
            g_labels: Vec::new(),
        })
    }

    pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Self, DataError> {
        let path = path.as_ref();
        let file =
            std::fs::File::open(path).map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
        Self::read_csv(file, schema)
    }

    pub fn read_csv<R: std::io::Read>(reader: R, schema: &CsvSchema) -> Result<Self, DataError> {
        let mut rdr =
            csv::ReaderBuilder::new().delimiter(schema.delimiter as u8).trim(csv::Trim::All).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let find = |name: &str| {
            headers.iter().position(|h| h == name).ok_or_else(|| DataError::MissingColumn(name.to_string()))
        };
        let yi = find(&schema.y)?;
        let zi = find(&schema.z)?;
        let x_names: Vec<String> = if schema.x.is_empty() {
            headers.iter().filter(|h| **h != schema.y && **h != schema.z).cloned().collect()
        } else {
            schema.x.clone()
        };
        let xi: Vec<usize> = x_names.iter().map(|c| find(c)).collect::<Result<_, _>>()?;

        let mut obs = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let num = |col: usize| -> Result<f64, DataError> {
                let raw = rec.get(col).unwrap_or("");
                raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| DataError::NonNumericValue {
                    row,
                    column: headers[col].clone(),
                    value: raw.to_string(),
                })
            };
            let zraw = rec.get(zi).unwrap_or("");
            let z = match zraw.parse::<f64>() {
                Ok(v) if v == 0.0 => 0,
                Ok(v) if v == 1.0 => 1,
                _ => return Err(DataError::NonBinaryTreatment { row, value: zraw.to_string() }),
            };
            obs.push(Observation { y: num(yi)?, z, x: xi.iter().map(|&c| num(c)).collect::<Result<_, _>>()? });
        }
        Self::from_observations(obs, x_names)
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }

    pub fn y(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.y).collect()
    }

    pub fn z(&self) -> Vec<u8> {
        self.observations.iter().map(|o| o.z).collect()
    }

    /// Number of units in arm `z`.
    pub fn arm_size(&self, z: u8) -> usize {
        if z == 1 {
            self.n1
        } else {
            self.n0
        }
    }

    fn column(&self, name: &str) -> Result<DVector<f64>, DataError> {
        let c = self
            .covariate_names
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))?;
        Ok(DVector::from_iterator(self.n(), self.observations.iter().map(|o| o.x[c])))
    }

    fn evaluate(&self, t: &Transform) -> Result<DVector<f64>, DataError> {
        match t {
            Transform::Identity(a) => self.column(a),
            Transform::Product(a, b) => Ok(self.column(a)?.component_mul(&self.column(b)?)),
            Transform::Standardize(a) => {
                let v = self.column(a)?;
                let n = v.len() as f64;
                let mean = v.sum() / n;
                let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                let sd = var.sqrt();
                if !(sd > 0.0) {
                    return Err(DataError::RankDeficientDesign(format!("column `{a}` has zero variance")));
                }
                Ok(v.map(|x| (x - mean) / sd))
            }
        }
    }

    /// Populates `s_design` (intercept prepended) and `g_design` from `spec`.
    pub fn build_designs(mut self, spec: &TransformSpec) -> Result<Self, DataError> {
        for t in spec.s_columns.iter().chain(&spec.g_columns) {
            for c in t.columns() {
                if !self.covariate_names.iter().any(|h| h == c) {
                    return Err(DataError::MissingColumn(c.to_string()));
                }
            }
        }
        let n = self.n();
        let mut s = DMatrix::from_element(n, 1 + spec.s_columns.len(), 1.0);
        for (k, t) in spec.s_columns.iter().enumerate() {
            s.set_column(k + 1, &self.evaluate(t)?);
        }
        let mut g = DMatrix::zeros(n, spec.g_columns.len());
        for (k, t) in spec.g_columns.iter().enumerate() {
            g.set_column(k, &self.evaluate(t)?);
        }
        if numerical_rank(&s) < s.ncols() {
            return Err(DataError::RankDeficientDesign(format!(
                "propensity design with {} columns is not of full column rank",
                s.ncols()
            )));
        }
        self.s_labels =
            std::iter::once("(intercept)".to_string()).chain(spec.s_columns.iter().map(Transform::label)).collect();
        self.g_labels = spec.g_columns.iter().map(Transform::label).collect();
        self.s_design = s;
        self.g_design = g;
        if !self.g_in_span_of_s() {
            log::warn!(
                "balance covariates are not all in the span of the propensity design; \
                 bounds at Lambda = 1, delta = 0 may be infeasible"
            );
        }
        Ok(self)
    }

    /// Whether every balance column lies (numerically) in the column span of `s`.
    pub fn g_in_span_of_s(&self) -> bool {
        if self.g_design.ncols() == 0 {
            return true;
        }
        let s = &self.s_design;
        let qr = s.clone().qr();
        let q = qr.q();
        for k in 0..self.g_design.ncols() {
            let g = self.g_design.column(k).into_owned();
            let proj = &q * (q.transpose() * &g);
            let scale = g.norm().max(1e-300);
            if (g - proj).norm() / scale > 1e-8 {
                return false;
            }
        }
        true
    }

    /// Rows of the dataset in the original input order.
    pub fn in_original_order(&self) -> Vec<&Observation> {
        let mut out: Vec<Option<&Observation>> = vec![None; self.n()];
        for (pos, &orig) in self.original_index.iter().enumerate() {
            out[orig] = Some(&self.observations[pos]);
        }
        out.into_iter().map(|o| o.expect("permutation")).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), DataError> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["y".to_string(), "z".to_string()];
        header.extend(self.covariate_names.iter().cloned());
        wtr.write_record(&header)?;
        for o in self.in_original_order() {
            let mut rec = vec![format!("{}", o.y), format!("{}", o.z)];
            rec.extend(o.x.iter().map(|v| format!("{v}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|source| DataError::Io { path: "<writer>".into(), source })?;
        Ok(())
    }
}

/// Rank with singular values above `1e-10 * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-10 * smax).count()
}

/// Covariate names keyed for quick lookup; convenience for config code.
pub fn column_index(names: &[String]) -> HashMap<&str, usize> {
    names.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()
}
