//! Penalty level and loadings for a single selection step.
//!
//! Plug-in: the logistic loss has score `mean[(G(eta) - y) x_j]`, so the level is
//! `lambda = c sqrt(n) Phi^{-1}(1 - gamma/(2p))` with loading `sqrt(mean[x_j^2 e^2])`
//! for residual `e`. The least-squares objective carries a factor 2 on its score,
//! hence twice that level with loading `sqrt(mean[(s x_j)^2 (s e)^2])`.
//! Pilot loadings use the intercept-only residual scale times the weighted column norm;
//! each refinement recomputes them from post-lasso residuals.

use ndarray::{Array1, ArrayView1, ArrayView2};

use super::cv::{cv_lambda_logistic, cv_lambda_wls};
use super::logistic::lasso_logistic;
use super::refit::{post_refit, RefitFamily};
use super::wls::{lasso_wls, null_residual_wls};
use super::{plugin_lambda, LassoFit, Penalty, PenaltyConfig, PenaltyMethod, SolverOptions};
use crate::error::Result;
use crate::numerics::sigmoid;
use crate::Scalar;

/// Outcome of a selection step.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection<T> {
    pub fit: LassoFit<T>,
    pub lambda: T,
    pub loadings: Array1<T>,
    pub warnings: Vec<String>,
}

fn penalized_count(p: usize, unpenalized: &[usize]) -> usize {
    (0..p).filter(|j| !unpenalized.contains(j)).count().max(1)
}

/// `sqrt(mean[(s x_j)^2 e^2])` per column; unpenalized and all-zero columns get 1.
fn hetero_loadings<T: Scalar>(
    x: ArrayView2<T>,
    scale: ArrayView1<T>,
    e: &Array1<T>,
    unpenalized: &[usize],
) -> Array1<T> {
    let n = T::of(x.nrows() as f64);
    let e2: Array1<T> = (0..x.nrows()).map(|i| (scale[i] * e[i]).powi(2)).collect();
    Array1::from_iter((0..x.ncols()).map(|j| {
        if unpenalized.contains(&j) {
            return T::one();
        }
        let l = (0..x.nrows())
            .map(|i| (scale[i] * x[[i, j]]).powi(2) * e2[i])
            .sum::<T>()
            / n;
        if l > T::zero() {
            l.sqrt()
        } else {
            T::one()
        }
    }))
}

/// Weighted column norm times residual scale: the homoskedastic pilot.
fn pilot_loadings<T: Scalar>(
    x: ArrayView2<T>,
    scale: ArrayView1<T>,
    e: &Array1<T>,
    unpenalized: &[usize],
) -> Array1<T> {
    let n = T::of(x.nrows() as f64);
    let sigma = ((0..x.nrows()).map(|i| (scale[i] * e[i]).powi(2)).sum::<T>() / n).sqrt();
    let sigma = if sigma > T::zero() { sigma } else { T::one() };
    Array1::from_iter((0..x.ncols()).map(|j| {
        if unpenalized.contains(&j) {
            return T::one();
        }
        let norm = ((0..x.nrows())
            .map(|i| (scale[i] * x[[i, j]]).powi(2))
            .sum::<T>()
            / n)
            .sqrt();
        if norm > T::zero() {
            norm * sigma
        } else {
            T::one()
        }
    }))
}

/// Lasso-logistic selection of `y` on `x` with `unpenalized` columns always retained.
pub fn select_logistic<T: Scalar>(
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    unpenalized: &[usize],
    config: &PenaltyConfig,
    seed: u64,
) -> Result<Selection<T>> {
    let (n, p) = x.dim();
    let opts = SolverOptions::default();
    let ones = Array1::<T>::ones(n);
    let mut warnings = config.warnings();
    let ybar = y.sum() / T::of(n as f64);
    let e0 = y.mapv(|v| v - ybar);

    if config.lambda.is_none() && config.method == PenaltyMethod::CrossValidation {
        let loadings = pilot_loadings(x, ones.view(), &Array1::ones(n), unpenalized);
        let cv = cv_lambda_logistic(
            x,
            y,
            loadings.view(),
            unpenalized,
            config.folds,
            config.one_se,
            seed,
        )?;
        let pen = Penalty::new(cv.lambda, loadings.clone()).with_unpenalized(unpenalized.to_vec());
        let fit = lasso_logistic(x, y, &pen, &opts)?;
        warnings.extend(fit.warnings.iter().cloned());
        return Ok(Selection {
            lambda: cv.lambda,
            fit,
            loadings,
            warnings,
        });
    }

    let lambda = match config.lambda {
        Some(l) => T::of(l),
        None => T::of(plugin_lambda(n, penalized_count(p, unpenalized), config)?),
    };
    let mut loadings = pilot_loadings(x, ones.view(), &e0, unpenalized);
    let mut fit = lasso_logistic(
        x,
        y,
        &Penalty::new(lambda, loadings.clone()).with_unpenalized(unpenalized.to_vec()),
        &opts,
    )?;
    for _ in 0..config.refinements {
        let eta = match post_refit(&fit.support, x, y, &RefitFamily::Logistic, unpenalized) {
            Ok(r) => r.index(x),
            Err(_) => x.dot(&fit.coef) + fit.intercept,
        };
        let resid = Array1::from_iter(y.iter().zip(eta.iter()).map(|(&yi, &e)| yi - sigmoid(e)));
        loadings = hetero_loadings(x, ones.view(), &resid, unpenalized);
        let pen = Penalty::new(lambda, loadings.clone()).with_unpenalized(unpenalized.to_vec());
        fit = super::logistic::lasso_logistic_from(
            x,
            y,
            &pen,
            &opts,
            Some((fit.intercept, &fit.coef)),
        )?;
    }
    warnings.extend(fit.warnings.iter().cloned());
    Ok(Selection {
        fit,
        lambda,
        loadings,
        warnings,
    })
}

/// Weighted least-squares lasso selection of `y` on `x` (row scales `scale`).
pub fn select_wls<T: Scalar>(
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    scale: ArrayView1<T>,
    unpenalized: &[usize],
    config: &PenaltyConfig,
    seed: u64,
) -> Result<Selection<T>> {
    let (n, p) = x.dim();
    let opts = SolverOptions::default();
    let mut warnings = config.warnings();
    let e0 = null_residual_wls(x, y, scale, unpenalized)?;

    if config.lambda.is_none() && config.method == PenaltyMethod::CrossValidation {
        let loadings = pilot_loadings(x, scale, &Array1::ones(n), unpenalized);
        let cv = cv_lambda_wls(
            x,
            y,
            scale,
            loadings.view(),
            unpenalized,
            config.folds,
            config.one_se,
            seed,
        )?;
        let pen = Penalty::new(cv.lambda, loadings.clone()).with_unpenalized(unpenalized.to_vec());
        let fit = lasso_wls(x, y, scale, &pen, &opts)?;
        warnings.extend(fit.warnings.iter().cloned());
        return Ok(Selection {
            lambda: cv.lambda,
            fit,
            loadings,
            warnings,
        });
    }

    let lambda = match config.lambda {
        Some(l) => T::of(l),
        None => T::of(2.0 * plugin_lambda(n, penalized_count(p, unpenalized), config)?),
    };
    let mut loadings = pilot_loadings(x, scale, &e0, unpenalized);
    let mut fit = lasso_wls(
        x,
        y,
        scale,
        &Penalty::new(lambda, loadings.clone()).with_unpenalized(unpenalized.to_vec()),
        &opts,
    )?;
    let family = RefitFamily::LinearWeighted {
        scale: scale.to_owned(),
    };
    for _ in 0..config.refinements {
        let pred = match post_refit(&fit.support, x, y, &family, unpenalized) {
            Ok(r) => r.index(x),
            Err(_) => x.dot(&fit.coef) + fit.intercept,
        };
        let resid = &y - &pred;
        loadings = hetero_loadings(x, scale, &resid, unpenalized);
        let pen = Penalty::new(lambda, loadings.clone()).with_unpenalized(unpenalized.to_vec());
        fit =
            super::wls::lasso_wls_from(x, y, scale, &pen, &opts, Some((fit.intercept, &fit.coef)))?;
    }
    warnings.extend(fit.warnings.iter().cloned());
    Ok(Selection {
        fit,
        lambda,
        loadings,
        warnings,
    })
}
