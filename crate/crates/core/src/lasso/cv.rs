use ndarray::{Array1, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::logistic::{lambda_max_logistic, lasso_logistic_from};
use super::wls::{lambda_max_wls, lasso_wls_from};
use super::{Penalty, SolverOptions};
use crate::error::{Error, Result};
use crate::numerics::softplus;
use crate::Scalar;

const GRID_POINTS: usize = 50;

/// Fold label in `0..k` for each of `n` rows: a seeded shuffle dealt round-robin,
/// so fold sizes differ by at most one.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || k > n {
        return Err(Error::invalid(format!(
            "need 2 <= folds <= n, got {k} folds for {n} rows"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    let mut folds = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        folds[i] = pos % k;
    }
    Ok(folds)
}

/// Cross-validation path over a decreasing log-spaced penalty grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult<T> {
    pub lambdas: Vec<T>,
    /// Held-out loss per grid point, averaged over folds.
    pub mean_loss: Vec<T>,
    /// Standard error of the fold losses per grid point.
    pub se_loss: Vec<T>,
    /// Index of the smallest mean loss.
    pub best: usize,
    /// Index actually chosen (equals `best` unless the one-standard-error rule is on).
    pub chosen: usize,
    pub lambda: T,
}

fn grid<T: Scalar>(lmax: T, n: usize, p: usize) -> Vec<T> {
    let ratio: f64 = if n > p { 1e-4 } else { 1e-2 };
    let top = if lmax > T::zero() { lmax } else { T::one() };
    (0..GRID_POINTS)
        .map(|k| top * T::of(ratio.powf(k as f64 / (GRID_POINTS - 1) as f64)))
        .collect()
}

fn summarize<T: Scalar>(lambdas: Vec<T>, losses: Vec<Vec<T>>, one_se: bool) -> CvResult<T> {
    let k = T::of(losses.len() as f64);
    let m = lambdas.len();
    let mut mean_loss = vec![T::zero(); m];
    let mut se_loss = vec![T::zero(); m];
    for g in 0..m {
        let mean = losses.iter().map(|f| f[g]).sum::<T>() / k;
        let var =
            losses.iter().map(|f| (f[g] - mean).powi(2)).sum::<T>() / (k - T::one()).max(T::one());
        mean_loss[g] = mean;
        se_loss[g] = (var / k).sqrt();
    }
    let best = (0..m).fold(0, |b, g| if mean_loss[g] < mean_loss[b] { g } else { b });
    let chosen = if one_se {
        let bound = mean_loss[best] + se_loss[best];
        (0..=best).find(|&g| mean_loss[g] <= bound).unwrap_or(best)
    } else {
        best
    };
    CvResult {
        lambda: lambdas[chosen],
        lambdas,
        mean_loss,
        se_loss,
        best,
        chosen,
    }
}

fn split<T: Scalar>(folds: &[usize], fold: usize, v: ArrayView1<T>) -> (Array1<T>, Array1<T>) {
    let tr: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] != fold).collect();
    let te: Vec<usize> = (0..folds.len()).filter(|&i| folds[i] == fold).collect();
    (v.select(Axis(0), &tr), v.select(Axis(0), &te))
}

fn rows<T: Scalar>(
    folds: &[usize],
    fold: usize,
    keep: bool,
    x: ArrayView2<T>,
) -> ndarray::Array2<T> {
    let idx: Vec<usize> = (0..folds.len())
        .filter(|&i| (folds[i] == fold) != keep)
        .collect();
    x.select(Axis(0), &idx)
}

/// K-fold cross-validated penalty level for [`super::lasso_logistic`] under held-out deviance.
pub fn cv_lambda_logistic<T: Scalar>(
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    loadings: ArrayView1<T>,
    unpenalized: &[usize],
    folds: usize,
    one_se: bool,
    seed: u64,
) -> Result<CvResult<T>> {
    let (n, p) = x.dim();
    let assignment = fold_assignment(n, folds, seed)?;
    let lambdas = grid(lambda_max_logistic(x, y, loadings, unpenalized)?, n, p);
    let opts = SolverOptions::default();
    let mut losses = Vec::with_capacity(folds);
    for f in 0..folds {
        let (xtr, xte) = (
            rows(&assignment, f, true, x),
            rows(&assignment, f, false, x),
        );
        let (ytr, yte) = split(&assignment, f, y);
        let mut warm: Option<(T, Array1<T>)> = None;
        let mut fold_loss = Vec::with_capacity(lambdas.len());
        for &lambda in &lambdas {
            let pen =
                Penalty::new(lambda, loadings.to_owned()).with_unpenalized(unpenalized.to_vec());
            let fit = lasso_logistic_from(
                xtr.view(),
                ytr.view(),
                &pen,
                &opts,
                warm.as_ref().map(|(b, t)| (*b, t)),
            )?;
            let eta = xte.dot(&fit.coef) + fit.intercept;
            let dev = eta
                .iter()
                .zip(yte.iter())
                .map(|(&e, &yi)| softplus(e) - yi * e)
                .sum::<T>()
                * T::of(2.0)
                / T::of(yte.len() as f64);
            fold_loss.push(dev);
            warm = Some((fit.intercept, fit.coef));
        }
        losses.push(fold_loss);
    }
    Ok(summarize(lambdas, losses, one_se))
}

/// K-fold cross-validated penalty level for [`super::lasso_wls`] under held-out weighted squared error.
#[allow(clippy::too_many_arguments)]
pub fn cv_lambda_wls<T: Scalar>(
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    scale: ArrayView1<T>,
    loadings: ArrayView1<T>,
    unpenalized: &[usize],
    folds: usize,
    one_se: bool,
    seed: u64,
) -> Result<CvResult<T>> {
    let (n, p) = x.dim();
    let assignment = fold_assignment(n, folds, seed)?;
    let lambdas = grid(lambda_max_wls(x, y, scale, loadings, unpenalized)?, n, p);
    let opts = SolverOptions::default();
    let mut losses = Vec::with_capacity(folds);
    for f in 0..folds {
        let (xtr, xte) = (
            rows(&assignment, f, true, x),
            rows(&assignment, f, false, x),
        );
        let (ytr, yte) = split(&assignment, f, y);
        let (str_, ste) = split(&assignment, f, scale);
        let mut warm: Option<(T, Array1<T>)> = None;
        let mut fold_loss = Vec::with_capacity(lambdas.len());
        for &lambda in &lambdas {
            let pen =
                Penalty::new(lambda, loadings.to_owned()).with_unpenalized(unpenalized.to_vec());
            let fit = lasso_wls_from(
                xtr.view(),
                ytr.view(),
                str_.view(),
                &pen,
                &opts,
                warm.as_ref().map(|(b, t)| (*b, t)),
            )?;
            let pred = xte.dot(&fit.coef) + fit.intercept;
            let loss = pred
                .iter()
                .zip(yte.iter())
                .zip(ste.iter())
                .map(|((&e, &yi), &s)| (s * (yi - e)).powi(2))
                .sum::<T>()
                / T::of(yte.len() as f64);
            fold_loss.push(loss);
            warm = Some((fit.intercept, fit.coef));
        }
        losses.push(fold_loss);
    }
    Ok(summarize(lambdas, losses, one_se))
}
