//! l1-penalized estimation: coordinate-descent lasso for weighted least squares,
//! penalized logistic regression, plug-in and cross-validated penalty levels
//! with heteroskedasticity-consistent loadings, and post-lasso refits.

mod cd;
mod cv;
mod logistic;
mod refit;
mod select;
mod wls;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::normal_quantile;
use crate::Scalar;

pub use cv::{cv_lambda_logistic, cv_lambda_wls, fold_assignment, CvResult};
pub use logistic::{kkt_logistic, lambda_max_logistic, lasso_logistic, logistic_mle, MleFit};
pub use refit::{post_refit, Refit, RefitFamily};
pub use select::{select_logistic, select_wls, Selection};
pub use wls::{kkt_wls, lambda_max_wls, lasso_wls, Kkt};

/// Penalty level, per-coefficient loadings, and coordinates exempt from the penalty.
///
/// The penalty term is `(lambda / n) * sum_j loadings_j |theta_j|` over penalized `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Penalty<T> {
    pub lambda: T,
    pub loadings: Array1<T>,
    pub unpenalized: Vec<usize>,
}

impl<T: Scalar> Penalty<T> {
    pub fn new(lambda: T, loadings: Array1<T>) -> Self {
        Penalty {
            lambda,
            loadings,
            unpenalized: Vec::new(),
        }
    }

    /// Unit loadings on `p` coefficients.
    pub fn uniform(lambda: T, p: usize) -> Self {
        Self::new(lambda, Array1::ones(p))
    }

    pub fn with_unpenalized(mut self, unpenalized: Vec<usize>) -> Self {
        self.unpenalized = unpenalized;
        self
    }

    pub(crate) fn validate(&self, p: usize) -> Result<()> {
        if !(self.lambda >= T::zero()) || !self.lambda.is_finite() {
            return Err(Error::invalid(format!(
                "penalty level must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        if self.loadings.len() != p {
            return Err(Error::invalid(format!(
                "{} loadings for {p} coefficients",
                self.loadings.len()
            )));
        }
        if self
            .loadings
            .iter()
            .any(|&l| !(l > T::zero()) || !l.is_finite())
        {
            return Err(Error::invalid(
                "penalty loadings must be positive and finite",
            ));
        }
        if let Some(&j) = self.unpenalized.iter().find(|&&j| j >= p) {
            return Err(Error::invalid(format!(
                "unpenalized index {j} out of range"
            )));
        }
        Ok(())
    }

    pub(crate) fn is_penalized(&self, j: usize) -> bool {
        !self.unpenalized.contains(&j)
    }

    /// Per-coordinate thresholds `factor * lambda * loading_j / n`, `None` where unpenalized.
    pub(crate) fn thresholds(&self, n: usize, factor: T) -> Vec<Option<T>> {
        let scale = factor * self.lambda / T::of(n as f64);
        (0..self.loadings.len())
            .map(|j| self.is_penalized(j).then(|| scale * self.loadings[j]))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    /// Stop once a full sweep changes no coefficient by this much.
    pub tol: T,
    pub max_sweeps: usize,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        SolverOptions {
            tol: T::solver_tol(),
            max_sweeps: 10_000,
        }
    }
}

/// A penalized solution.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit<T> {
    pub intercept: T,
    pub coef: Array1<T>,
    /// Nonzero penalized coordinates, ascending.
    pub support: Vec<usize>,
    pub penalty: T,
    pub loadings: Array1<T>,
    pub unpenalized: Vec<usize>,
    /// Sweeps (least squares) or outer Newton steps (logistic).
    pub iterations: usize,
    pub converged: bool,
    pub objective: T,
    /// Objective after every iteration; nonincreasing.
    pub objective_path: Vec<T>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> LassoFit<T> {
    pub(crate) fn support_of(coef: &Array1<T>, penalty: &Penalty<T>) -> Vec<usize> {
        (0..coef.len())
            .filter(|&j| coef[j] != T::zero() && penalty.is_penalized(j))
            .collect()
    }

    /// Support together with the unpenalized coordinates, ascending.
    pub fn kept_columns(&self) -> Vec<usize> {
        let mut cols: Vec<usize> = self
            .support
            .iter()
            .chain(&self.unpenalized)
            .copied()
            .collect();
        cols.sort_unstable();
        cols.dedup();
        cols
    }
}

/// Proximal map of `t |.|`: `sign(z) * max(|z| - t, 0)`.
pub fn soft_threshold<T: Scalar>(z: T, t: T) -> Result<T> {
    if !(t >= T::zero()) {
        return Err(Error::invalid(format!(
            "threshold must be nonnegative, got {t}"
        )));
    }
    Ok(cd::shrink(z, t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyMethod {
    #[default]
    Plugin,
    CrossValidation,
}

fn default_c() -> f64 {
    1.1
}

fn default_folds() -> usize {
    10
}

fn default_refinements() -> usize {
    1
}

/// How penalty levels and loadings are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    #[serde(default)]
    pub method: PenaltyMethod,
    /// Plug-in scaling constant.
    #[serde(default = "default_c")]
    pub c: f64,
    /// Plug-in confidence parameter; `None` means `0.1 / ln(n)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Loading-refinement iterations after the pilot fit (plug-in only).
    #[serde(default = "default_refinements")]
    pub refinements: usize,
    /// Cross-validation: pick the largest level within one standard error of the best.
    #[serde(default)]
    pub one_se: bool,
    /// Fixed penalty level overriding both methods; loadings are still computed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            method: PenaltyMethod::Plugin,
            c: default_c(),
            gamma: None,
            folds: default_folds(),
            refinements: default_refinements(),
            one_se: false,
            lambda: None,
        }
    }
}

impl PenaltyConfig {
    pub fn cross_validation() -> Self {
        PenaltyConfig {
            method: PenaltyMethod::CrossValidation,
            ..Default::default()
        }
    }

    /// Every selection runs at the fixed level `lambda`.
    pub fn fixed(lambda: f64) -> Self {
        PenaltyConfig {
            lambda: Some(lambda),
            ..Default::default()
        }
    }

    pub fn gamma_for(&self, n: usize) -> f64 {
        self.gamma.unwrap_or_else(|| 0.1 / (n as f64).ln())
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.lambda.is_none() && self.method == PenaltyMethod::Plugin && self.c < 1.0 {
            out.push(format!(
                "plug-in constant c = {} is below 1; the score bound is not dominated",
                self.c
            ));
        }
        out
    }
}

/// Score-bound plug-in level `c * sqrt(n) * Phi^{-1}(1 - gamma / (2p))`.
pub fn plugin_lambda(n: usize, p: usize, config: &PenaltyConfig) -> Result<f64> {
    if n == 0 || p == 0 {
        return Err(Error::invalid(format!(
            "plug-in level needs n >= 1 and p >= 1, got n={n}, p={p}"
        )));
    }
    let gamma = config.gamma_for(n);
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid(format!(
            "plug-in gamma must lie in (0, 1), got {gamma}"
        )));
    }
    if !(config.c >= 0.0) {
        return Err(Error::invalid(format!(
            "plug-in constant must be nonnegative, got {}",
            config.c
        )));
    }
    Ok(config.c * (n as f64).sqrt() * normal_quantile(1.0 - gamma / (2.0 * p as f64))?)
}

/// Columns of an `n x p` view as owned vectors.
pub(crate) fn columns<T: Scalar>(x: ndarray::ArrayView2<T>) -> Vec<Vec<T>> {
    x.columns().into_iter().map(|c| c.to_vec()).collect()
}
