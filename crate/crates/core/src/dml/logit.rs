use ndarray::{s, Array1, Array2, ArrayView1, Axis};

use super::{
    check_treatment, normal_inference, DmlConfig, DmlDiagnostics, DmlEstimate, Family,
    InstrumentScaling,
};
use super::{SearchDiagnostics, WeightSummary};
use crate::error::{Error, Result};
use crate::lasso::{post_refit, select_logistic, select_wls, RefitFamily};
use crate::model_matrix::Dataset;
use crate::numerics::{clamp_prob, sigmoid, sigmoid_deriv};
use crate::Scalar;

/// Per-observation quantities carried from the nuisance steps into the scoring step.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceArtifacts<T> {
    /// Treatment coefficient of the step-1 refit.
    pub alpha_tilde: T,
    /// Control part of the step-1 index, intercept included: `b0 + x_i' beta`.
    pub eta_tilde: Array1<T>,
    /// `G'(d_i alpha + eta_i)`
    pub w_hat: Array1<T>,
    /// `G(1 - G)` at the same index, with `G` clamped away from 0 and 1.
    pub sigma2_hat: Array1<T>,
    /// `w_i / sigma_i`
    pub f_hat: Array1<T>,
    /// `f_i (d_i - t0 - x_i' theta)`
    pub v_hat: Array1<T>,
    pub z_hat: Array1<T>,
    /// Dataset indices of the controls, in design order.
    pub controls: Vec<usize>,
    /// Step-1 control coefficients, aligned with `controls`.
    pub beta_tilde: Array1<T>,
    /// Step-2 intercept and coefficients, aligned with `controls`.
    pub theta_intercept: T,
    pub theta_tilde: Array1<T>,
}

/// `(E_n[r z])^2 / E_n[r^2 z^2]` with `r = y - G(d alpha + offset)`.
fn objective<T: Scalar>(
    alpha: T,
    y: ArrayView1<T>,
    d: ArrayView1<T>,
    offset: &Array1<T>,
    z: &Array1<T>,
) -> Result<T> {
    let n = T::of(y.len() as f64);
    let mut num = T::zero();
    let mut den = T::zero();
    for i in 0..y.len() {
        let r = y[i] - sigmoid(d[i] * alpha + offset[i]);
        num += r * z[i];
        den += r * r * z[i] * z[i];
    }
    let num = num / n;
    let den = den / n;
    if !(den.as_f64() >= 1e-300) {
        return Err(Error::DegenerateMoment);
    }
    Ok(num * num / den)
}

/// Scoring objective of the final step at `alpha`, for the given treatment column.
pub fn iv_logit_objective<T: Scalar>(
    alpha: T,
    artifacts: &NuisanceArtifacts<T>,
    data: &Dataset<T>,
    treatment: usize,
) -> Result<T> {
    if treatment >= data.p() {
        return Err(Error::invalid(format!(
            "treatment column {treatment} out of range"
        )));
    }
    if artifacts.eta_tilde.len() != data.n() || artifacts.z_hat.len() != data.n() {
        return Err(Error::invalid("artifacts do not match the dataset"));
    }
    objective(
        alpha,
        data.y(),
        data.column(treatment),
        &artifacts.eta_tilde,
        &artifacts.z_hat,
    )
}

fn golden<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

fn push_unique(out: &mut Vec<String>, items: impl IntoIterator<Item = String>) {
    for w in items {
        if !out.contains(&w) {
            out.push(w);
        }
    }
}

/// Debiased logistic estimate of the treatment coefficient; see [`dml_logit_detailed`].
pub fn dml_logit<T: Scalar>(
    data: &Dataset<T>,
    treatment: usize,
    config: &DmlConfig,
) -> Result<DmlEstimate> {
    dml_logit_detailed(data, treatment, config).map(|(est, _)| est)
}

/// Three-step debiased logistic regression, also returning the nuisance artifacts.
///
/// 1. Lasso-logistic of `y` on the treatment and controls (treatment unpenalized by default),
///    refit without penalty on the support: `alpha~`, `beta~`, weights
///    `w = G'(eta)`, `sigma^2 = G(1 - G)`, `f = w / sigma`.
/// 2. Weighted lasso of `d` on the controls with row scale `f`, refit on the support;
///    residual `v = f (d - x' theta~)` and instrument `z` from `v` (see [`InstrumentScaling`]).
/// 3. Minimize `L(alpha) = (E_n[(y - G(d alpha + x' beta~)) z])^2 / E_n[(y - G)^2 z^2]`
///    over `|alpha - alpha~| <= max(c0 / ln n, 10 se0)`, by a grid then golden section.
///
/// The standard error is the sandwich `sqrt(E_n[(y - G)^2 z^2]) / |E_n[G' d z]| / sqrt(n)`
/// evaluated at the estimate.
pub fn dml_logit_detailed<T: Scalar>(
    data: &Dataset<T>,
    treatment: usize,
    config: &DmlConfig,
) -> Result<(DmlEstimate, NuisanceArtifacts<T>)> {
    config.validate()?;
    check_treatment(data, treatment)?;
    if !data.is_binary_outcome() {
        return Err(Error::invalid("logistic estimation needs a 0/1 outcome"));
    }
    let n = data.n();
    let nf = T::of(n as f64);
    let y = data.y();
    let d = data.column(treatment);
    let controls = data.regressors_except(treatment);
    let k = controls.len();
    let mut design = Array2::<T>::zeros((n, k + 1));
    design.column_mut(0).assign(&d);
    design
        .slice_mut(s![.., 1..])
        .assign(&data.x().select(Axis(1), &controls));
    let names: Vec<String> = std::iter::once(treatment)
        .chain(controls.iter().copied())
        .map(|j| data.columns()[j].name.clone())
        .collect();
    let mut warnings = Vec::new();

    // Step 1: post-lasso logistic regression.
    let unpen: Vec<usize> = if config.penalize_treatment {
        vec![]
    } else {
        vec![0]
    };
    let sel1 = select_logistic(design.view(), y, &unpen, &config.penalty, config.seed)?;
    push_unique(&mut warnings, sel1.warnings.iter().cloned());
    let refit1 = post_refit(
        &sel1.fit.support,
        design.view(),
        y,
        &RefitFamily::Logistic,
        &[0],
    )
    .map_err(|e| e.rename_rank_columns(&names))?;
    push_unique(&mut warnings, refit1.warnings.iter().cloned());
    let alpha_tilde = refit1.coef[0];
    let beta_tilde = refit1.coef.slice(s![1..]).to_owned();
    let xc = design.slice(s![.., 1..]);
    let eta_tilde = xc.dot(&beta_tilde) + refit1.intercept;
    let index = &d * alpha_tilde + &eta_tilde;
    let w_hat = index.mapv(sigmoid_deriv);
    let sigma2_hat = index.mapv(|t| {
        let g = clamp_prob(sigmoid(t));
        g * (T::one() - g)
    });
    let sigma = sigma2_hat.mapv(|v| v.sqrt());
    let f_hat = &w_hat / &sigma;

    // Step 2: weighted post-lasso regression of the treatment on the controls.
    let sel2 = select_wls(xc, d, f_hat.view(), &[], &config.penalty, config.seed)?;
    push_unique(&mut warnings, sel2.warnings.iter().cloned());
    let refit2 = post_refit(
        &sel2.fit.support,
        xc,
        d,
        &RefitFamily::LinearWeighted {
            scale: f_hat.clone(),
        },
        &[],
    )
    .map_err(|e| e.rename_rank_columns(&names[1..]))?;
    let v_hat = &f_hat * &(&d - &(xc.dot(&refit2.coef) + refit2.intercept));
    let z_hat = match config.instrument {
        InstrumentScaling::InverseSd => &v_hat / &sigma,
        InstrumentScaling::InverseRootSd => &v_hat / &sigma.mapv(|s| s.sqrt()),
    };
    let mean_z2 = z_hat.mapv(|z| z * z).sum() / nf;
    let fsum = f_hat.mapv(|f| f * f).sum();
    let d_bar = (&f_hat * &f_hat * d).sum() / fsum;
    let d_var = (&f_hat * &f_hat * &d.mapv(|v| (v - d_bar) * (v - d_bar))).sum() / nf;
    let v_var = v_hat.mapv(|v| v * v).sum() / nf;
    if !(v_var > T::of(1e-10) * d_var) {
        return Err(Error::WeakInstrument {
            mean_z2: mean_z2.as_f64(),
        });
    }

    let step1_support: Vec<usize> = refit1
        .columns
        .iter()
        .filter(|&&j| j > 0)
        .map(|&j| controls[j - 1])
        .collect();
    let step2_support: Vec<usize> = refit2.columns.iter().map(|&j| controls[j]).collect();
    let used = step1_support.len().max(step2_support.len()) + 1;
    if n <= used + 10 {
        return Err(Error::invalid(format!(
            "{n} observations are too few for supports of size {} and {}",
            step1_support.len(),
            step2_support.len()
        )));
    }

    // Step 3: instrumental logistic scoring over the search interval.
    let moments = |alpha: T| -> (T, T) {
        let mut s2 = T::zero();
        let mut jac = T::zero();
        for i in 0..n {
            let t = d[i] * alpha + eta_tilde[i];
            let r = y[i] - sigmoid(t);
            s2 += r * r * z_hat[i] * z_hat[i];
            jac += sigmoid_deriv(t) * d[i] * z_hat[i];
        }
        (s2 / nf, jac / nf)
    };
    let (s2_0, jac_0) = moments(alpha_tilde);
    let se0 = if jac_0 != T::zero() {
        (s2_0.sqrt() / jac_0.abs() / nf.sqrt()).as_f64()
    } else {
        0.0
    };
    let a0 = alpha_tilde.as_f64();
    let radius = (config.search_c0 / (n as f64).ln()).max(10.0 * se0);
    let (low, high) = (a0 - radius, a0 + radius);
    let eval = |a: f64| -> f64 {
        objective(T::of(a), y, d, &eta_tilde, &z_hat)
            .map(|v| v.as_f64())
            .unwrap_or(f64::INFINITY)
    };
    let m = config.grid_points;
    let grid: Vec<f64> = (0..m)
        .map(|i| low + 2.0 * radius * i as f64 / (m - 1) as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&a| eval(a)).collect();
    let best = (0..m).fold(0, |b, i| if values[i] < values[b] { i } else { b });
    if !values[best].is_finite() {
        return Err(Error::DegenerateMoment);
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(m - 1)];
    let refined = golden(eval, lo, hi, 1e-10);
    let (alpha_check, objective_value) = if eval(refined) <= values[best] {
        (refined, eval(refined))
    } else {
        (grid[best], values[best])
    };
    let boundary_hit = best == 0 || best == m - 1;
    if boundary_hit {
        warnings.push(format!(
            "scoring minimum on the boundary of the search interval [{low:.4}, {high:.4}]"
        ));
    }

    let (s2, jac) = moments(T::of(alpha_check));
    let (s2, jac) = (s2.as_f64(), jac.as_f64());
    if !(jac * jac >= 1e-300) {
        return Err(Error::DegenerateMoment);
    }
    let std_error = (s2 / (jac * jac)).sqrt() / (n as f64).sqrt();
    if !(std_error > 0.0 && std_error.is_finite()) {
        return Err(Error::DegenerateMoment);
    }
    let (ci_low, ci_high, p_value) = normal_inference(alpha_check, std_error, config.level)?;

    let min_sigma2 = sigma2_hat
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(v.as_f64()));
    let max_sigma2 = sigma2_hat.iter().fold(0.0f64, |m, v| m.max(v.as_f64()));
    let estimate = DmlEstimate {
        treatment: data.columns()[treatment].name.clone(),
        family: Family::Logit,
        alpha_check,
        std_error,
        ci_low,
        ci_high,
        p_value,
        level: config.level,
        n,
        step1_support,
        step2_support,
        diagnostics: DmlDiagnostics {
            lambda_outcome: sel1.lambda.as_f64(),
            lambda_treatment: sel2.lambda.as_f64(),
            alpha_tilde: a0,
            search: Some(SearchDiagnostics {
                low,
                high,
                objective: objective_value,
                boundary_hit,
            }),
            weights: Some(WeightSummary {
                mean_w: (w_hat.sum() / nf).as_f64(),
                min_sigma2,
                max_sigma2,
                mean_z2: mean_z2.as_f64(),
            }),
        },
        warnings,
    };
    let artifacts = NuisanceArtifacts {
        alpha_tilde,
        eta_tilde,
        w_hat,
        sigma2_hat,
        f_hat,
        v_hat,
        z_hat,
        controls,
        beta_tilde,
        theta_intercept: refit2.intercept,
        theta_tilde: refit2.coef,
    };
    Ok((estimate, artifacts))
}
