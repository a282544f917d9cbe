use std::collections::HashSet;
use std::io::{Read, Write};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::Observation;
use crate::Scalar;

/// Version written into dataset metadata sidecars.
pub const DATASET_META_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Treatment,
    #[default]
    Control,
    Intercept,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnKind {
    Numeric,
    Dummy,
    Interaction,
    MissingIndicator,
    Intercept,
}

/// Mean and standard deviation removed from a continuous column at encode time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub sd: f64,
}

impl Standardization {
    /// Maps a coefficient on the standardized scale back to the original units.
    pub fn unscale_slope(&self, coef: f64) -> f64 {
        coef / self.sd
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub role: Role,
    pub kind: ColumnKind,
    /// Source variable; for interactions, `left:right` of the parents' sources.
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardization: Option<Standardization>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parents: Option<[String; 2]>,
}

impl ColumnMeta {
    pub fn numeric(name: impl Into<String>, role: Role) -> Self {
        let name = name.into();
        ColumnMeta {
            source: name.clone(),
            name,
            role,
            kind: ColumnKind::Numeric,
            level: None,
            standardization: None,
            parents: None,
        }
    }
}

/// A product column request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub left: String,
    pub right: String,
    #[serde(default)]
    pub role: Role,
}

impl Interaction {
    pub fn new(left: impl Into<String>, right: impl Into<String>, role: Role) -> Self {
        Interaction {
            left: left.into(),
            right: right.into(),
            role,
        }
    }

    pub fn product_name(&self) -> String {
        format!("{}:{}", self.left, self.right)
    }
}

/// Sidecar document describing an exported design matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub version: u32,
    pub outcome: String,
    pub n: usize,
    pub p: usize,
    #[serde(default)]
    pub dropped_rows: usize,
    pub columns: Vec<ColumnMeta>,
}

/// Immutable encoded design: outcome vector, `n x p` matrix, per-column metadata.
///
/// The intercept is implicit in every estimator and is not stored as a column
/// unless a caller adds one with [`Role::Intercept`], which estimators then skip.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    outcome: String,
    y: Array1<T>,
    x: Array2<T>,
    columns: Vec<ColumnMeta>,
    dropped_rows: usize,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        outcome: impl Into<String>,
        y: Array1<T>,
        x: Array2<T>,
        columns: Vec<ColumnMeta>,
    ) -> Result<Self> {
        let (n, p) = x.dim();
        if y.len() != n {
            return Err(Error::invalid(format!(
                "outcome has {} rows, design has {n}",
                y.len()
            )));
        }
        if columns.len() != p {
            return Err(Error::invalid(format!(
                "{} column descriptions for {p} columns",
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!(
                    "duplicate design column `{}`",
                    c.name
                )));
            }
        }
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset contains non-finite values"));
        }
        for (j, c) in columns.iter().enumerate() {
            if c.role == Role::Intercept && x.column(j).iter().any(|&v| v != T::one()) {
                return Err(Error::invalid(format!(
                    "intercept column `{}` is not all ones",
                    c.name
                )));
            }
        }
        Ok(Dataset {
            outcome: outcome.into(),
            y,
            x,
            columns,
            dropped_rows: 0,
        })
    }

    pub(crate) fn with_dropped_rows(mut self, dropped: usize) -> Self {
        self.dropped_rows = dropped;
        self
    }

    pub fn outcome_name(&self) -> &str {
        &self.outcome
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    pub fn y(&self) -> ArrayView1<'_, T> {
        self.y.view()
    }

    pub fn x(&self) -> ArrayView2<'_, T> {
        self.x.view()
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, T> {
        self.x.column(j)
    }

    pub fn columns(&self) -> &[ColumnMeta] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn indices_with_role(&self, role: Role) -> Vec<usize> {
        (0..self.p())
            .filter(|&j| self.columns[j].role == role)
            .collect()
    }

    pub fn treatment_indices(&self) -> Vec<usize> {
        self.indices_with_role(Role::Treatment)
    }

    pub fn control_indices(&self) -> Vec<usize> {
        self.indices_with_role(Role::Control)
    }

    /// Every non-intercept column except `exclude`, in column order.
    pub fn regressors_except(&self, exclude: usize) -> Vec<usize> {
        (0..self.p())
            .filter(|&j| j != exclude && self.columns[j].role != Role::Intercept)
            .collect()
    }

    /// Dataset restricted to `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&j| j >= self.p()) {
            return Err(Error::invalid(format!("column index {bad} out of range")));
        }
        Ok(Dataset {
            outcome: self.outcome.clone(),
            y: self.y.clone(),
            x: self.x.select(Axis(1), indices),
            columns: indices.iter().map(|&j| self.columns[j].clone()).collect(),
            dropped_rows: self.dropped_rows,
        })
    }

    /// Copy of the dataset with column `j` re-tagged.
    pub fn with_role(&self, j: usize, role: Role) -> Result<Self> {
        if j >= self.p() {
            return Err(Error::invalid(format!("column index {j} out of range")));
        }
        let mut out = self.clone();
        out.columns[j].role = role;
        Ok(out)
    }

    pub fn is_binary_outcome(&self) -> bool {
        self.y.iter().all(|&v| v == T::zero() || v == T::one())
    }

    /// Appends one product column per pair; parents must be existing design columns.
    pub fn interact(&self, pairs: &[Interaction]) -> Result<Self> {
        let mut names: HashSet<String> = self.columns.iter().map(|c| c.name.clone()).collect();
        let mut new_cols = Vec::with_capacity(pairs.len());
        let mut new_meta = Vec::with_capacity(pairs.len());
        for pair in pairs {
            let l = self.column_index(&pair.left).ok_or_else(|| {
                Error::invalid(format!("unknown interaction parent `{}`", pair.left))
            })?;
            let r = self.column_index(&pair.right).ok_or_else(|| {
                Error::invalid(format!("unknown interaction parent `{}`", pair.right))
            })?;
            let name = pair.product_name();
            if !names.insert(name.clone()) {
                return Err(Error::invalid(format!(
                    "interaction column `{name}` already present"
                )));
            }
            new_cols.push(&self.x.column(l) * &self.x.column(r));
            new_meta.push(ColumnMeta {
                name,
                role: pair.role,
                kind: ColumnKind::Interaction,
                source: format!("{}:{}", self.columns[l].source, self.columns[r].source),
                level: None,
                standardization: None,
                parents: Some([pair.left.clone(), pair.right.clone()]),
            });
        }
        let mut x = Array2::zeros((self.n(), self.p() + new_cols.len()));
        x.slice_mut(ndarray::s![.., ..self.p()]).assign(&self.x);
        for (k, col) in new_cols.iter().enumerate() {
            x.column_mut(self.p() + k).assign(col);
        }
        let mut columns = self.columns.clone();
        columns.extend(new_meta);
        Ok(Dataset {
            outcome: self.outcome.clone(),
            y: self.y.clone(),
            x,
            columns,
            dropped_rows: self.dropped_rows,
        })
    }

    /// Rows as observations with `treatment` split out and the remaining regressors as controls.
    pub fn observations(&self, treatment: usize) -> Vec<Observation<T>> {
        let controls = self.regressors_except(treatment);
        (0..self.n())
            .map(|i| Observation {
                y: self.y[i],
                d: self.x[[i, treatment]],
                x: controls.iter().map(|&j| self.x[[i, j]]).collect(),
            })
            .collect()
    }

    pub fn metadata(&self) -> DatasetMeta {
        DatasetMeta {
            version: DATASET_META_VERSION,
            outcome: self.outcome.clone(),
            n: self.n(),
            p: self.p(),
            dropped_rows: self.dropped_rows,
            columns: self.columns.clone(),
        }
    }

    /// Writes the outcome followed by the design columns as comma-delimited text.
    pub fn write_matrix<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_writer(out);
        let mut header = vec![self.outcome.clone()];
        header.extend(self.column_names());
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(self.p() + 1);
        for i in 0..self.n() {
            record.clear();
            record.push(format!("{}", self.y[i]));
            record.extend(self.x.row(i).iter().map(|v| format!("{v}")));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_metadata<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(toml::to_string(&self.metadata())?.as_bytes())?;
        Ok(())
    }

    /// Reads a matrix written by [`Dataset::write_matrix`] together with its sidecar.
    pub fn read<R: Read>(matrix: R, meta: &DatasetMeta) -> Result<Self> {
        if meta.version != DATASET_META_VERSION {
            return Err(Error::Schema(format!(
                "unsupported dataset metadata version {}",
                meta.version
            )));
        }
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(matrix);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.first() != Some(&meta.outcome) {
            return Err(Error::Schema(format!(
                "matrix must start with outcome column `{}`",
                meta.outcome
            )));
        }
        let names: Vec<&str> = meta.columns.iter().map(|c| c.name.as_str()).collect();
        if header[1..]
            .iter()
            .map(String::as_str)
            .ne(names.iter().copied())
        {
            return Err(Error::Schema(
                "matrix header does not match metadata columns".into(),
            ));
        }
        let p = meta.columns.len();
        let mut y = Vec::new();
        let mut x = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != p + 1 {
                return Err(Error::Parse {
                    row: i + 1,
                    message: format!("expected {} cells, found {}", p + 1, rec.len()),
                });
            }
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                    row: i + 1,
                    message: format!("non-numeric cell `{field}`"),
                })?;
                if j == 0 {
                    y.push(T::of(v));
                } else {
                    x.push(T::of(v));
                }
            }
        }
        let n = y.len();
        let x = Array2::from_shape_vec((n, p), x).map_err(|e| Error::invalid(e.to_string()))?;
        Ok(Dataset::new(
            meta.outcome.clone(),
            Array1::from(y),
            x,
            meta.columns.clone(),
        )?
        .with_dropped_rows(meta.dropped_rows))
    }

    /// SHA-256 over the outcome and design values (as `f64` bit patterns, row-major) and shape.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n() as u64).to_le_bytes());
        h.update((self.p() as u64).to_le_bytes());
        for i in 0..self.n() {
            h.update(self.y[i].as_f64().to_bits().to_le_bytes());
            for v in self.x.row(i) {
                h.update(v.as_f64().to_bits().to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toy() -> Dataset<f64> {
        let x = array![
            [1.0, 0.0, 2.0],
            [0.0, 1.0, -1.0],
            [1.0, 1.0, 0.5],
            [0.0, 0.0, 3.0]
        ];
        let cols = vec![
            ColumnMeta::numeric("online", Role::Treatment),
            ColumnMeta::numeric("female", Role::Treatment),
            ColumnMeta::numeric("age_std", Role::Control),
        ];
        Dataset::new("y", array![0.0, 1.0, 1.0, 0.0], x, cols).unwrap()
    }

    #[test]
    fn interaction_with_zero_parent_is_zero() {
        let d = toy()
            .interact(&[Interaction::new("age_std", "online", Role::Treatment)])
            .unwrap();
        let j = d.column_index("age_std:online").unwrap();
        assert_eq!(d.column(j).to_vec(), vec![2.0, 0.0, 0.5, 0.0]);
        assert_eq!(d.columns()[j].role, Role::Treatment);
    }

    #[test]
    fn interaction_of_indicators_is_and() {
        let d = toy()
            .interact(&[Interaction::new("online", "female", Role::Control)])
            .unwrap();
        let j = d.column_index("online:female").unwrap();
        assert_eq!(d.column(j).to_vec(), vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn interaction_errors() {
        let d = toy();
        assert!(d
            .interact(&[Interaction::new("nope", "online", Role::Control)])
            .is_err());
        let pair = Interaction::new("online", "female", Role::Control);
        assert!(d.interact(&[pair.clone(), pair]).is_err());
    }

    #[test]
    fn export_round_trip() {
        let d = toy()
            .interact(&[Interaction::new("online", "age_std", Role::Control)])
            .unwrap();
        let mut m = Vec::new();
        d.write_matrix(&mut m).unwrap();
        let mut meta = Vec::new();
        d.write_metadata(&mut meta).unwrap();
        let meta: DatasetMeta = toml::from_str(std::str::from_utf8(&meta).unwrap()).unwrap();
        let back = Dataset::<f64>::read(m.as_slice(), &meta).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.checksum(), d.checksum());
    }

    #[test]
    fn intercept_column_must_be_ones() {
        let mut cols = vec![ColumnMeta::numeric("const", Role::Intercept)];
        cols[0].kind = ColumnKind::Intercept;
        assert!(Dataset::new("y", array![1.0, 0.0], array![[1.0], [2.0]], cols).is_err());
    }
}
