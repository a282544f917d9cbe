use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::{check_treatment, normal_inference, DmlConfig, DmlDiagnostics, DmlEstimate, Family};
use crate::error::{Error, Result};
use crate::lasso::select_wls;
use crate::linalg::{cholesky, cholesky_solve, weighted_gram};
use crate::model_matrix::Dataset;
use crate::numerics::wls_fit;
use crate::Scalar;

/// Ordinary least squares with classical and HC1 standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit<T> {
    pub coef: Array1<T>,
    pub resid: Array1<T>,
    /// `sqrt(diag(s^2 (X'X)^{-1}))`, `s^2 = e'e / (n - k)`.
    pub se_classical: Array1<T>,
    /// `sqrt(diag(n/(n-k) (X'X)^{-1} X' diag(e^2) X (X'X)^{-1}))`.
    pub se_hc1: Array1<T>,
}

/// OLS of `y` on the columns of `x` (no intercept is added). Rank errors label columns `col j`.
pub fn ols_hc1<T: Scalar>(x: ArrayView2<T>, y: ArrayView1<T>) -> Result<OlsFit<T>> {
    let (n, k) = x.dim();
    if n <= k {
        return Err(Error::invalid(format!(
            "OLS with {k} columns needs more than {n} observations"
        )));
    }
    let ones = Array1::<T>::ones(n);
    let coef = wls_fit(x, y, ones.view())?;
    let resid = &y - &x.dot(&coef);
    let gram = weighted_gram(x, ones.view());
    let l = cholesky(gram.view()).ok_or_else(|| Error::RankDeficient {
        columns: vec!["design".to_string()],
    })?;
    let mut inv = Array2::<T>::zeros((k, k));
    for j in 0..k {
        let mut e = Array1::<T>::zeros(k);
        e[j] = T::one();
        inv.column_mut(j).assign(&cholesky_solve(&l, e.view()));
    }
    let dof = T::of((n - k) as f64);
    let s2 = resid.mapv(|r| r * r).sum() / dof;
    let meat = weighted_gram(x, resid.mapv(|r| r * r).view());
    let sandwich = inv.dot(&meat).dot(&inv) * (T::of(n as f64) / dof);
    let se_classical = inv.diag().mapv(|v| (v * s2).sqrt());
    let se_hc1 = sandwich.diag().mapv(|v| v.max(T::zero()).sqrt());
    Ok(OlsFit {
        coef,
        resid,
        se_classical,
        se_hc1,
    })
}

/// Double-selection estimate for a real outcome.
///
/// Lasso of `y` on the controls and of `d` on the controls select two supports; the
/// estimate is the OLS coefficient of `d` in a regression of `y` on the intercept, `d`
/// and the union of both supports, with an HC1 standard error.
pub fn dml_linear<T: Scalar>(
    data: &Dataset<T>,
    treatment: usize,
    config: &DmlConfig,
) -> Result<DmlEstimate> {
    config.validate()?;
    check_treatment(data, treatment)?;
    let n = data.n();
    let y = data.y();
    let d = data.column(treatment);
    let controls = data.regressors_except(treatment);
    let xc = data.x().select(Axis(1), &controls);
    let ones = Array1::<T>::ones(n);
    let mut warnings = Vec::new();

    let sel_y = select_wls(xc.view(), y, ones.view(), &[], &config.penalty, config.seed)?;
    let sel_d = select_wls(xc.view(), d, ones.view(), &[], &config.penalty, config.seed)?;
    for w in sel_y.warnings.iter().chain(&sel_d.warnings) {
        if !warnings.contains(w) {
            warnings.push(w.clone());
        }
    }
    let mut union: Vec<usize> = sel_y
        .fit
        .support
        .iter()
        .chain(&sel_d.fit.support)
        .copied()
        .collect();
    union.sort_unstable();
    union.dedup();
    if n <= union.len() + 2 + 10 {
        return Err(Error::invalid(format!(
            "{n} observations are too few for a selected union of {} controls",
            union.len()
        )));
    }

    let mut design = Array2::<T>::ones((n, union.len() + 2));
    design.column_mut(1).assign(&d);
    design
        .slice_mut(s![.., 2..])
        .assign(&xc.select(Axis(1), &union));
    let names: Vec<String> = [
        "intercept".to_string(),
        data.columns()[treatment].name.clone(),
    ]
    .into_iter()
    .chain(
        union
            .iter()
            .map(|&j| data.columns()[controls[j]].name.clone()),
    )
    .collect();

    // The treatment must keep variation after partialling out the selected controls.
    let mut aux = Array2::<T>::ones((n, union.len() + 1));
    aux.slice_mut(s![.., 1..])
        .assign(&design.slice(s![.., 2..]));
    let gamma = wls_fit(aux.view(), d, ones.view()).map_err(|e| {
        let mut aux_names = vec![names[0].clone()];
        aux_names.extend(names[2..].iter().cloned());
        e.rename_rank_columns(&aux_names)
    })?;
    let r = &d - &aux.dot(&gamma);
    let nf = T::of(n as f64);
    let d_bar = d.sum() / nf;
    let d_var = d.mapv(|v| (v - d_bar) * (v - d_bar)).sum() / nf;
    let r_var = r.mapv(|v| v * v).sum() / nf;
    if !(r_var > T::of(1e-10) * d_var) {
        return Err(Error::WeakInstrument {
            mean_z2: r_var.as_f64(),
        });
    }

    let ols = ols_hc1(design.view(), y).map_err(|e| e.rename_rank_columns(&names))?;
    let alpha = ols.coef[1].as_f64();
    let std_error = ols.se_hc1[1].as_f64();
    if !(std_error > 0.0 && std_error.is_finite()) {
        return Err(Error::DegenerateMoment);
    }
    let (ci_low, ci_high, p_value) = normal_inference(alpha, std_error, config.level)?;
    Ok(DmlEstimate {
        treatment: data.columns()[treatment].name.clone(),
        family: Family::Linear,
        alpha_check: alpha,
        std_error,
        ci_low,
        ci_high,
        p_value,
        level: config.level,
        n,
        step1_support: sel_y.fit.support.iter().map(|&j| controls[j]).collect(),
        step2_support: sel_d.fit.support.iter().map(|&j| controls[j]).collect(),
        diagnostics: DmlDiagnostics {
            lambda_outcome: sel_y.lambda.as_f64(),
            lambda_treatment: sel_d.lambda.as_f64(),
            alpha_tilde: alpha,
            search: None,
            weights: None,
        },
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn hc1_matches_hand_computation() {
        // y on intercept only: HC1 variance of the mean is n/(n-1) * sum(e^2) / n^2
        let x = Array2::<f64>::ones((4, 1));
        let y = array![1.0, 2.0, 4.0, 7.0];
        let fit = ols_hc1(x.view(), y.view()).unwrap();
        assert!((fit.coef[0] - 3.5).abs() < 1e-12);
        let e2: f64 = [6.25, 2.25, 0.25, 12.25].iter().sum();
        let want = (4.0 / 3.0 * e2 / 16.0f64).sqrt();
        assert!((fit.se_hc1[0] - want).abs() < 1e-12);
        let classical = (e2 / 3.0 / 4.0f64).sqrt();
        assert!((fit.se_classical[0] - classical).abs() < 1e-12);
    }
}
