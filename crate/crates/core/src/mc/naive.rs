use ndarray::{s, Array1, Array2, Axis};

use crate::dml::{ols_hc1, DmlConfig, DmlDiagnostics, DmlEstimate, Family};
use crate::error::{Error, Result};
use crate::lasso::{post_refit, select_logistic, select_wls, RefitFamily};
use crate::linalg::{cholesky, cholesky_solve, weighted_gram};
use crate::model_matrix::Dataset;
use crate::numerics::sigmoid_deriv;
use crate::Scalar;

/// Single-selection comparator: lasso on the outcome equation only (treatment unpenalized),
/// unpenalized refit of the outcome on the treatment and the selected controls, and the
/// conventional standard error of that refit (homoskedastic OLS or inverse information).
///
/// Controls that matter for the treatment but only weakly for the outcome are dropped,
/// which biases the treatment coefficient.
pub fn naive_fit<T: Scalar>(
    data: &Dataset<T>,
    treatment: usize,
    config: &DmlConfig,
) -> Result<DmlEstimate> {
    config.validate()?;
    if treatment >= data.p() {
        return Err(Error::invalid(format!(
            "treatment column {treatment} out of range"
        )));
    }
    let n = data.n();
    let y = data.y();
    let d = data.column(treatment);
    let controls = data.regressors_except(treatment);
    let mut design = Array2::<T>::zeros((n, controls.len() + 1));
    design.column_mut(0).assign(&d);
    design
        .slice_mut(s![.., 1..])
        .assign(&data.x().select(Axis(1), &controls));
    let names: Vec<String> = std::iter::once(treatment)
        .chain(controls.iter().copied())
        .map(|j| data.columns()[j].name.clone())
        .collect();

    let (alpha, se, lambda, support, warnings) = match config.family {
        Family::Linear => {
            let sel = select_wls(
                design.view(),
                y,
                Array1::ones(n).view(),
                &[0],
                &config.penalty,
                config.seed,
            )?;
            let cols = sel.fit.kept_columns();
            let mut x = Array2::<T>::ones((n, cols.len() + 1));
            x.slice_mut(s![.., 1..])
                .assign(&design.select(Axis(1), &cols));
            let ols = ols_hc1(x.view(), y).map_err(|e| {
                let mut labels = vec!["intercept".to_string()];
                labels.extend(cols.iter().map(|&j| names[j].clone()));
                e.rename_rank_columns(&labels)
            })?;
            let pos = 1 + cols.iter().position(|&j| j == 0).expect("treatment kept");
            (
                ols.coef[pos].as_f64(),
                ols.se_classical[pos].as_f64(),
                sel.lambda,
                sel.fit.support,
                sel.warnings,
            )
        }
        Family::Logit => {
            let sel = select_logistic(design.view(), y, &[0], &config.penalty, config.seed)?;
            let refit = post_refit(
                &sel.fit.support,
                design.view(),
                y,
                &RefitFamily::Logistic,
                &[0],
            )
            .map_err(|e| e.rename_rank_columns(&names))?;
            let cols = &refit.columns;
            let mut x = Array2::<T>::ones((n, cols.len() + 1));
            x.slice_mut(s![.., 1..])
                .assign(&design.select(Axis(1), cols));
            let w = refit.index(design.view()).mapv(sigmoid_deriv);
            let info = weighted_gram(x.view(), w.view());
            let l = cholesky(info.view()).ok_or(Error::RankDeficient {
                columns: vec!["information matrix".to_string()],
            })?;
            let pos = 1 + cols.iter().position(|&j| j == 0).expect("treatment kept");
            let mut e = Array1::<T>::zeros(cols.len() + 1);
            e[pos] = T::one();
            let var = cholesky_solve(&l, e.view())[pos];
            let mut warnings = sel.warnings;
            warnings.extend(refit.warnings.iter().cloned());
            (
                refit.coef[0].as_f64(),
                var.as_f64().sqrt(),
                sel.lambda,
                sel.fit.support,
                warnings,
            )
        }
    };
    if !(se > 0.0 && se.is_finite()) {
        return Err(Error::DegenerateMoment);
    }
    let (ci_low, ci_high, p_value) = crate::dml::normal_inference(alpha, se, config.level)?;
    Ok(DmlEstimate {
        treatment: data.columns()[treatment].name.clone(),
        family: config.family,
        alpha_check: alpha,
        std_error: se,
        ci_low,
        ci_high,
        p_value,
        level: config.level,
        n,
        step1_support: support
            .iter()
            .filter(|&&j| j > 0)
            .map(|&j| controls[j - 1])
            .collect(),
        step2_support: Vec::new(),
        diagnostics: DmlDiagnostics {
            lambda_outcome: lambda.as_f64(),
            lambda_treatment: 0.0,
            alpha_tilde: alpha,
            search: None,
            weights: None,
        },
        warnings,
    })
}
