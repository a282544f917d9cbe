//! Debiased treatment-effect inference.
//!
//! [`dml_logit`] runs the three-step procedure for a binary outcome: post-lasso logistic
//! regression, a weighted post-lasso regression of the treatment on the controls that
//! produces an orthogonalized instrument, and an instrumental logistic scoring step whose
//! minimizer carries a normal confidence interval. [`dml_linear`] is double selection for a
//! real outcome. [`dml_multi`] loops either over several treatments.

mod linear;
mod logit;
mod multi;

use serde::{Deserialize, Serialize};

use crate::lasso::PenaltyConfig;

pub use linear::{dml_linear, ols_hc1, OlsFit};
pub use logit::{dml_logit, dml_logit_detailed, iv_logit_objective, NuisanceArtifacts};
pub use multi::{dml_multi, ResultRow, ResultTable, TreatmentOutcome, RESULT_TABLE_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    #[default]
    Logit,
    Linear,
}

impl Family {
    pub fn label(self) -> &'static str {
        match self {
            Family::Logit => "logit",
            Family::Linear => "linear",
        }
    }
}

/// How the step-2 residual is turned into the step-3 instrument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstrumentScaling {
    /// `z = v / sigma`. With `f = w / sigma = sigma` this is the weighted treatment residual
    /// itself, the choice under which the score is orthogonal to the control coefficients.
    #[default]
    InverseSd,
    /// `z = v / sqrt(sigma)`, the form printed in the original algorithm statement.
    InverseRootSd,
}

impl InstrumentScaling {
    pub fn label(self) -> &'static str {
        match self {
            InstrumentScaling::InverseSd => "inverse-sd",
            InstrumentScaling::InverseRootSd => "inverse-root-sd",
        }
    }
}

fn default_level() -> f64 {
    0.05
}

fn default_c0() -> f64 {
    1.0
}

fn default_grid() -> usize {
    401
}

fn default_jobs() -> usize {
    1
}

/// Estimator settings shared by every treatment of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmlConfig {
    #[serde(default)]
    pub family: Family,
    #[serde(default)]
    pub penalty: PenaltyConfig,
    /// Significance level; intervals have coverage `1 - level`.
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub instrument: InstrumentScaling,
    /// Penalize the treatment coefficient in the step-1 lasso, as the joint-penalty display reads.
    #[serde(default)]
    pub penalize_treatment: bool,
    /// Search half-width is `max(c0 / ln n, 10 * pilot se)`.
    #[serde(default = "default_c0")]
    pub search_c0: f64,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    /// Seeds cross-validation folds.
    #[serde(default)]
    pub seed: u64,
    /// Worker threads for multi-treatment runs.
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default)]
    pub fail_fast: bool,
}

impl Default for DmlConfig {
    fn default() -> Self {
        DmlConfig {
            family: Family::Logit,
            penalty: PenaltyConfig::default(),
            level: default_level(),
            instrument: InstrumentScaling::default(),
            penalize_treatment: false,
            search_c0: default_c0(),
            grid_points: default_grid(),
            seed: 0,
            jobs: default_jobs(),
            fail_fast: false,
        }
    }
}

impl DmlConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(crate::Error::invalid(format!(
                "level must lie in (0, 1), got {}",
                self.level
            )));
        }
        if self.grid_points < 3 {
            return Err(crate::Error::invalid("search grid needs at least 3 points"));
        }
        if !(self.search_c0 > 0.0) {
            return Err(crate::Error::invalid("search constant must be positive"));
        }
        if self.jobs == 0 {
            return Err(crate::Error::invalid("jobs must be at least 1"));
        }
        Ok(())
    }

    /// Short description of the estimator variant, for provenance lines.
    pub fn fingerprint(&self) -> String {
        let pen = &self.penalty;
        let method = match (pen.lambda, pen.method) {
            (Some(l), _) => format!("fixed lambda={l}"),
            (None, crate::lasso::PenaltyMethod::Plugin) => format!(
                "plugin c={} gamma={} refinements={}",
                pen.c,
                pen.gamma.map_or("0.1/ln(n)".to_string(), |g| g.to_string()),
                pen.refinements
            ),
            (None, crate::lasso::PenaltyMethod::CrossValidation) => {
                format!("cv folds={} one-se={}", pen.folds, pen.one_se)
            }
        };
        format!(
            "instrument={} penalty=[{method}] treatment-penalized={} search-c0={} grid={}",
            self.instrument.label(),
            self.penalize_treatment,
            self.search_c0,
            self.grid_points
        )
    }
}

/// Search interval and objective of the scoring step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchDiagnostics {
    pub low: f64,
    pub high: f64,
    /// Scoring objective at the estimate.
    pub objective: f64,
    /// The minimizer sits on the edge of the search interval.
    pub boundary_hit: bool,
}

/// Summaries of the step-1 weights and the instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSummary {
    pub mean_w: f64,
    pub min_sigma2: f64,
    pub max_sigma2: f64,
    pub mean_z2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmlDiagnostics {
    /// Penalty level of the outcome-equation lasso.
    pub lambda_outcome: f64,
    /// Penalty level of the treatment-equation lasso.
    pub lambda_treatment: f64,
    /// Treatment coefficient of the outcome-equation refit.
    pub alpha_tilde: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchDiagnostics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightSummary>,
}

/// Debiased estimate of one treatment coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmlEstimate {
    pub treatment: String,
    pub family: Family,
    pub alpha_check: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    pub level: f64,
    pub n: usize,
    /// Dataset column indices selected in the outcome equation.
    pub step1_support: Vec<usize>,
    /// Dataset column indices selected in the treatment equation.
    pub step2_support: Vec<usize>,
    pub diagnostics: DmlDiagnostics,
    pub warnings: Vec<String>,
}

impl DmlEstimate {
    pub fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }

    pub fn rejects(&self) -> bool {
        self.p_value < self.level
    }
}

/// Normal interval and two-sided p-value around `estimate`.
pub(crate) fn normal_inference(
    estimate: f64,
    se: f64,
    level: f64,
) -> crate::Result<(f64, f64, f64)> {
    let q = crate::numerics::normal_quantile(1.0 - level / 2.0)?;
    let p = (2.0 * crate::numerics::normal_sf(estimate.abs() / se)).min(1.0);
    Ok((estimate - q * se, estimate + q * se, p))
}

fn check_treatment<T: crate::Scalar>(
    data: &crate::model_matrix::Dataset<T>,
    treatment: usize,
) -> crate::Result<()> {
    if treatment >= data.p() {
        return Err(crate::Error::invalid(format!(
            "treatment column {treatment} out of range"
        )));
    }
    let d = data.column(treatment);
    if d.iter().all(|&v| v == d[0]) {
        return Err(crate::Error::DegenerateTreatment(
            data.columns()[treatment].name.clone(),
        ));
    }
    let y = data.y();
    if y.iter().all(|&v| v == y[0]) {
        return Err(crate::Error::DegenerateOutcome);
    }
    Ok(())
}
