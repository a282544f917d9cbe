use std::collections::HashMap;

use ndarray::{Array1, Array2};

use super::dataset::{ColumnKind, ColumnMeta, Dataset, Interaction, Role, Standardization};
use super::spec::{dummy_name, EncodingSpec, MissingPolicy, RuleKind, VariableRule};
use super::table::{Cell, RawTable};
use crate::error::{Error, Result};
use crate::Scalar;

/// Value of one variable in one row before column expansion.
#[derive(Clone, Copy)]
enum Value {
    Number(f64),
    Level(usize),
    Missing,
}

fn numeric_cell(cell: &Cell, var: &str, row: usize) -> Result<Option<f64>> {
    match cell {
        Cell::Number(v) => Ok(Some(*v)),
        Cell::Missing => Ok(None),
        Cell::Text(s) => Err(Error::Encoding(format!(
            "variable `{var}`, row {}: expected a number, found `{s}`",
            row + 1
        ))),
    }
}

fn rule_values(rule: &VariableRule, table: &RawTable, col: usize) -> Result<Vec<Value>> {
    let var = rule.output_name();
    let mut out = Vec::with_capacity(table.n_rows());
    match &rule.kind {
        RuleKind::Numeric { transform, .. } => {
            for (i, row) in table.rows().iter().enumerate() {
                out.push(match numeric_cell(&row[col], var, i)? {
                    None => Value::Missing,
                    Some(v) => match transform {
                        None => Value::Number(v),
                        Some(t) => Value::Number(t.apply(v).ok_or_else(|| {
                            Error::Encoding(format!(
                                "variable `{var}`, row {}: transform of {v} is not finite",
                                i + 1
                            ))
                        })?),
                    },
                });
            }
        }
        RuleKind::Derived { transform, .. } => {
            for (i, row) in table.rows().iter().enumerate() {
                out.push(match numeric_cell(&row[col], var, i)? {
                    None => Value::Missing,
                    Some(v) => Value::Number(transform.apply(v).ok_or_else(|| {
                        Error::Encoding(format!(
                            "variable `{var}`, row {}: transform of {v} is not finite",
                            i + 1
                        ))
                    })?),
                });
            }
        }
        RuleKind::Categorical { levels, merge, .. } => {
            let index: HashMap<&str, usize> = levels
                .iter()
                .enumerate()
                .map(|(k, l)| (l.as_str(), k))
                .collect();
            for (i, row) in table.rows().iter().enumerate() {
                out.push(match row[col].label() {
                    None => Value::Missing,
                    Some(raw) => {
                        let level = merge.get(&raw).map(String::as_str).unwrap_or(raw.as_str());
                        match index.get(level) {
                            Some(&k) => Value::Level(k),
                            None => return Err(Error::Encoding(format!(
                                "variable `{var}`, row {}: unseen level `{raw}` with no merge rule",
                                i + 1
                            ))),
                        }
                    }
                });
            }
        }
    }
    Ok(out)
}

fn outcome_values(spec: &EncodingSpec, table: &RawTable, col: usize) -> Result<Vec<Option<f64>>> {
    table
        .rows()
        .iter()
        .enumerate()
        .map(|(i, row)| match (&spec.outcome.positive, &row[col]) {
            (_, Cell::Missing) => Ok(None),
            (Some(pos), cell) => Ok(Some(if cell.label().as_deref() == Some(pos.as_str()) {
                1.0
            } else {
                0.0
            })),
            (None, cell) => numeric_cell(cell, &spec.outcome.column, i),
        })
        .collect()
}

/// Population mean and standard deviation; a constant column keeps unit scale.
fn standardization(values: &[f64]) -> Standardization {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    Standardization {
        mean,
        sd: if sd > 0.0 { sd } else { 1.0 },
    }
}

/// Expands an interaction side: an output variable name becomes all of its design columns.
fn expand_side(name: &str, spec: &EncodingSpec) -> Vec<String> {
    spec.variables
        .iter()
        .find(|r| r.output_name() == name)
        .map(VariableRule::design_names)
        .unwrap_or_else(|| vec![name.to_string()])
}

/// Encodes a raw table into a design matrix according to `spec`.
///
/// Rows missing the outcome are always dropped; other missing cells follow the
/// spec's missing-data policy. Continuous variables are standardized after row
/// deletion; interactions are formed from the encoded parents.
pub fn encode<T: Scalar>(raw: &RawTable, spec: &EncodingSpec) -> Result<Dataset<T>> {
    spec.validate()?;
    let locate = |name: &str| {
        raw.column_index(name)
            .ok_or_else(|| Error::Schema(format!("column `{name}` not found in table")))
    };
    let outcome_col = locate(&spec.outcome.column)?;
    let rule_cols = spec
        .variables
        .iter()
        .map(|r| locate(&r.column))
        .collect::<Result<Vec<_>>>()?;

    let y_raw = outcome_values(spec, raw, outcome_col)?;
    let values = spec
        .variables
        .iter()
        .zip(&rule_cols)
        .map(|(r, &c)| rule_values(r, raw, c))
        .collect::<Result<Vec<_>>>()?;

    let keep: Vec<usize> = (0..raw.n_rows())
        .filter(|&i| {
            y_raw[i].is_some()
                && (spec.missing == MissingPolicy::ImputeZeroIndicator
                    || values.iter().all(|v| !matches!(v[i], Value::Missing)))
        })
        .collect();
    let dropped = raw.n_rows() - keep.len();
    if keep.is_empty() {
        return Err(Error::EmptyDataset { dropped });
    }
    let n = keep.len();

    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut meta: Vec<ColumnMeta> = Vec::new();
    for (rule, vals) in spec.variables.iter().zip(&values) {
        let name = rule.output_name();
        let kept: Vec<Value> = keep.iter().map(|&i| vals[i]).collect();
        let any_missing = kept.iter().any(|v| matches!(v, Value::Missing));
        match &rule.kind {
            RuleKind::Numeric { standardize, .. } | RuleKind::Derived { standardize, .. } => {
                let observed: Vec<f64> = kept
                    .iter()
                    .filter_map(|v| {
                        if let Value::Number(x) = v {
                            Some(*x)
                        } else {
                            None
                        }
                    })
                    .collect();
                let st = (*standardize && !observed.is_empty()).then(|| standardization(&observed));
                let col = kept
                    .iter()
                    .map(|v| match (v, st) {
                        (Value::Number(x), Some(s)) => (x - s.mean) / s.sd,
                        (Value::Number(x), None) => *x,
                        _ => 0.0,
                    })
                    .collect();
                cols.push(col);
                let mut m = ColumnMeta::numeric(name, rule.role);
                m.standardization = st;
                meta.push(m);
            }
            RuleKind::Categorical {
                levels, baseline, ..
            } => {
                for (k, level) in levels.iter().enumerate() {
                    if level == baseline {
                        continue;
                    }
                    cols.push(
                        kept.iter()
                            .map(|v| {
                                if matches!(v, Value::Level(l) if *l == k) {
                                    1.0
                                } else {
                                    0.0
                                }
                            })
                            .collect(),
                    );
                    meta.push(ColumnMeta {
                        name: dummy_name(name, level),
                        role: rule.role,
                        kind: ColumnKind::Dummy,
                        source: name.to_string(),
                        level: Some(level.clone()),
                        standardization: None,
                        parents: None,
                    });
                }
            }
        }
        if any_missing {
            cols.push(
                kept.iter()
                    .map(|v| {
                        if matches!(v, Value::Missing) {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect(),
            );
            meta.push(ColumnMeta {
                name: dummy_name(name, "missing"),
                role: Role::Control,
                kind: ColumnKind::MissingIndicator,
                source: name.to_string(),
                level: Some("missing".to_string()),
                standardization: None,
                parents: None,
            });
        }
    }

    let p = cols.len();
    let mut x = Array2::<T>::zeros((n, p));
    for (j, col) in cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            x[[i, j]] = T::of(v);
        }
    }
    let y = Array1::from_iter(keep.iter().map(|&i| T::of(y_raw[i].unwrap_or_default())));
    let base = Dataset::new(spec.outcome.column.clone(), y, x, meta)?;

    let pairs: Vec<Interaction> = spec
        .interactions
        .iter()
        .flat_map(|rule| {
            let rights = expand_side(&rule.right, spec);
            expand_side(&rule.left, spec)
                .into_iter()
                .flat_map(move |l| {
                    rights
                        .clone()
                        .into_iter()
                        .map(move |r| Interaction::new(l.clone(), r, rule.role))
                })
        })
        .collect();
    Ok(base.interact(&pairs)?.with_dropped_rows(dropped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_matrix::{load_table, TableFormat};

    fn spec(text: &str) -> EncodingSpec {
        EncodingSpec::from_toml(text).unwrap()
    }

    const GENDER: &str = r#"
version = 1
[outcome]
column = "y"
[[variables]]
column = "gender"
role = "treatment"
kind = "categorical"
levels = ["Male", "Female"]
baseline = "Male"
"#;

    #[test]
    fn baseline_level_encodes_as_zero() {
        let t = load_table(
            "y,gender\n1,Male\n0,Female\n".as_bytes(),
            &TableFormat::default(),
        )
        .unwrap();
        let d: Dataset<f64> = encode(&t, &spec(GENDER)).unwrap();
        assert_eq!(d.column_names(), vec!["gender[Female]"]);
        assert_eq!(d.column(0).to_vec(), vec![0.0, 1.0]);
        assert_eq!(d.columns()[0].role, Role::Treatment);
    }

    #[test]
    fn unseen_level_is_an_error() {
        let t = load_table(
            "y,gender\n1,Male\n0,Diverse\n".as_bytes(),
            &TableFormat::default(),
        )
        .unwrap();
        let err = encode::<f64>(&t, &spec(GENDER)).unwrap_err();
        assert!(err.to_string().contains("Diverse"), "{err}");
    }

    #[test]
    fn listwise_deletion_counts_rows() {
        let t = load_table(
            "y,gender\n1,Male\nNA,Female\n0,\n1,Female\n".as_bytes(),
            &TableFormat::default(),
        )
        .unwrap();
        let d: Dataset<f64> = encode(&t, &spec(GENDER)).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.dropped_rows(), 2);
    }

    #[test]
    fn all_rows_dropped() {
        let t = load_table("y,gender\n1,\n,Male\n".as_bytes(), &TableFormat::default()).unwrap();
        assert!(matches!(
            encode::<f64>(&t, &spec(GENDER)),
            Err(Error::EmptyDataset { dropped: 2 })
        ));
    }

    #[test]
    fn impute_adds_indicator() {
        let text = GENDER.replace(
            "version = 1",
            "version = 1\nmissing = \"impute-zero-indicator\"",
        );
        let t = load_table(
            "y,gender\n1,Female\n0,\n1,Male\n".as_bytes(),
            &TableFormat::default(),
        )
        .unwrap();
        let d: Dataset<f64> = encode(&t, &spec(&text)).unwrap();
        assert_eq!(d.column_names(), vec!["gender[Female]", "gender[missing]"]);
        assert_eq!(d.column(0).to_vec(), vec![1.0, 0.0, 0.0]);
        assert_eq!(d.column(1).to_vec(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn missing_column_is_schema_error() {
        let t = load_table("y,sex\n1,Male\n".as_bytes(), &TableFormat::default()).unwrap();
        let err = encode::<f64>(&t, &spec(GENDER)).unwrap_err();
        assert!(matches!(err, Error::Schema(ref m) if m.contains("gender")));
    }

    #[test]
    fn standardizes_numeric_columns() {
        let text = r#"
version = 1
[outcome]
column = "y"
[[variables]]
column = "income"
kind = "numeric"
"#;
        let t = load_table(
            "y,income\n1,10\n0,20\n1,30\n".as_bytes(),
            &TableFormat::default(),
        )
        .unwrap();
        let d: Dataset<f64> = encode(&t, &spec(text)).unwrap();
        let col = d.column(0);
        assert!(col.sum().abs() < 1e-12);
        assert!((col.mapv(|v| v * v).sum() / 3.0 - 1.0).abs() < 1e-12);
        let st = d.columns()[0].standardization.unwrap();
        assert_eq!(st.mean, 20.0);
    }

    #[test]
    fn text_outcome_with_positive_label() {
        let text = GENDER.replace("column = \"y\"", "column = \"y\"\npositive = \"yes\"");
        let t = load_table(
            "y,gender\nyes,Male\nno,Female\n".as_bytes(),
            &TableFormat::default(),
        )
        .unwrap();
        let d: Dataset<f64> = encode(&t, &spec(&text)).unwrap();
        assert_eq!(d.y().to_vec(), vec![1.0, 0.0]);
    }
}
