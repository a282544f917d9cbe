use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::logistic::logistic_mle;
use crate::error::{Error, Result};
use crate::numerics::wls_fit;
use crate::Scalar;

/// Loss used by [`post_refit`].
#[derive(Debug, Clone, PartialEq)]
pub enum RefitFamily<T> {
    Logistic,
    /// Least squares with row weights `scale_i^2`.
    LinearWeighted {
        scale: Array1<T>,
    },
}

/// Unpenalized fit on a selected support; coefficients outside `columns` are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Refit<T> {
    pub intercept: T,
    pub coef: Array1<T>,
    /// Columns entering the refit, ascending.
    pub columns: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Refits on `{intercept} ∪ support ∪ keep` without penalty.
///
/// A rank-deficient refit design fails with the offending columns labelled `col j`
/// by their index in `x`.
pub fn post_refit<T: Scalar>(
    support: &[usize],
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    family: &RefitFamily<T>,
    keep: &[usize],
) -> Result<Refit<T>> {
    let (n, p) = x.dim();
    let mut columns: Vec<usize> = support.iter().chain(keep).copied().collect();
    columns.sort_unstable();
    columns.dedup();
    if let Some(&j) = columns.iter().find(|&&j| j >= p) {
        return Err(Error::invalid(format!(
            "refit column {j} out of range for {p} columns"
        )));
    }
    if columns.len() + 1 > n {
        return Err(Error::invalid(format!(
            "refit on {} columns plus intercept needs more than {n} observations",
            columns.len()
        )));
    }
    let sub = x.select(Axis(1), &columns);
    // Labels from the refit design back to `x`: intercept is position 0.
    let relabel = |e: Error| match e {
        Error::RankDeficient { columns: bad } => Error::RankDeficient {
            columns: bad
                .into_iter()
                .map(
                    |c| match c.strip_prefix("col ").and_then(|i| i.parse::<usize>().ok()) {
                        Some(0) => "intercept".to_string(),
                        Some(k) => format!("col {}", columns[k - 1]),
                        None => c,
                    },
                )
                .collect(),
        },
        other => other,
    };
    let (intercept, local, warnings) = match family {
        RefitFamily::Logistic => {
            let mle = logistic_mle(sub.view(), y).map_err(relabel)?;
            (mle.intercept, mle.coef, mle.warnings)
        }
        RefitFamily::LinearWeighted { scale } => {
            if scale.len() != n || y.len() != n {
                return Err(Error::invalid(
                    "refit row scales or outcome length mismatch",
                ));
            }
            let mut design = Array2::<T>::ones((n, columns.len() + 1));
            design.slice_mut(ndarray::s![.., 1..]).assign(&sub);
            let w = scale.mapv(|s| s * s);
            let b = wls_fit(design.view(), y, w.view()).map_err(relabel)?;
            (b[0], b.slice(ndarray::s![1..]).to_owned(), Vec::new())
        }
    };
    let mut coef = Array1::zeros(p);
    for (k, &j) in columns.iter().enumerate() {
        coef[j] = local[k];
    }
    Ok(Refit {
        intercept,
        coef,
        columns,
        warnings,
    })
}

impl<T: Scalar> Refit<T> {
    /// Linear index `intercept + x' coef` for every row of `x`.
    pub fn index(&self, x: ArrayView2<T>) -> Array1<T> {
        x.dot(&self.coef) + self.intercept
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn empty_logistic_support_is_intercept_only() {
        let x = array![[1.0], [2.0], [3.0], [4.0]];
        let y = array![1.0, 0.0, 0.0, 0.0];
        let r = post_refit(&[], x.view(), y.view(), &RefitFamily::Logistic, &[]).unwrap();
        assert!((r.intercept - (1.0f64 / 3.0).ln()).abs() < 1e-9);
        assert_eq!(r.coef[0], 0.0);
    }

    #[test]
    fn collinear_support_names_original_column() {
        let x = array![
            [1.0, 0.0, 2.0],
            [2.0, 1.0, 4.0],
            [3.0, 0.0, 6.0],
            [4.0, 1.0, 8.0],
            [5.0, 0.0, 10.0]
        ];
        let y = array![1.0, 2.0, 2.5, 4.0, 5.5];
        let fam = RefitFamily::LinearWeighted {
            scale: Array1::ones(5),
        };
        match post_refit(&[0, 2], x.view(), y.view(), &fam, &[]) {
            Err(Error::RankDeficient { columns }) => {
                assert!(
                    columns.iter().any(|c| c == "col 0" || c == "col 2"),
                    "{columns:?}"
                )
            }
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn refit_is_idempotent() {
        let x = array![
            [0.1, 1.0],
            [0.7, -1.0],
            [1.3, 0.5],
            [2.0, 0.0],
            [-0.4, 2.0],
            [0.9, -0.3]
        ];
        let y = array![0.3, 1.1, 1.9, 3.2, 0.1, 1.4];
        let fam = RefitFamily::LinearWeighted {
            scale: array![1.0, 0.5, 2.0, 1.0, 1.5, 0.8],
        };
        let a = post_refit(&[1], x.view(), y.view(), &fam, &[0]).unwrap();
        let b = post_refit(&a.columns, x.view(), y.view(), &fam, &[]).unwrap();
        assert_eq!(a, b);
    }
}
