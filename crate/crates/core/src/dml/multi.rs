use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{dml_linear, dml_logit, DmlConfig, DmlEstimate, Family};
use crate::error::{Error, Result};
use crate::model_matrix::Dataset;
use crate::Scalar;

/// Result for one requested treatment.
#[derive(Debug)]
pub struct TreatmentOutcome {
    pub treatment: String,
    pub column: usize,
    /// Errors are wrapped in [`Error::Treatment`].
    pub result: Result<DmlEstimate>,
}

fn estimate<T: Scalar>(
    data: &Dataset<T>,
    treatment: usize,
    config: &DmlConfig,
) -> Result<DmlEstimate> {
    match config.family {
        Family::Logit => dml_logit(data, treatment, config),
        Family::Linear => dml_linear(data, treatment, config),
    }
}

/// Estimates every listed treatment in turn, the remaining treatments acting as controls.
///
/// Results keep the requested order whatever `config.jobs` is. Per-treatment failures are
/// reported in place; with `config.fail_fast` the first failure in request order is returned
/// as the error instead. No multiplicity adjustment is applied.
pub fn dml_multi<T: Scalar>(
    data: &Dataset<T>,
    treatments: &[usize],
    config: &DmlConfig,
) -> Result<Vec<TreatmentOutcome>> {
    config.validate()?;
    if treatments.is_empty() {
        return Err(Error::invalid("no treatments requested"));
    }
    for (k, &t) in treatments.iter().enumerate() {
        if t >= data.p() {
            return Err(Error::invalid(format!("treatment column {t} out of range")));
        }
        if treatments[..k].contains(&t) {
            return Err(Error::invalid(format!(
                "treatment `{}` requested more than once",
                data.columns()[t].name
            )));
        }
    }
    let run = |&t: &usize| -> TreatmentOutcome {
        let name = data.columns()[t].name.clone();
        let result = estimate(data, t, config).map_err(|e| Error::Treatment {
            treatment: name.clone(),
            source: Box::new(e),
        });
        TreatmentOutcome {
            treatment: name,
            column: t,
            result,
        }
    };
    let outcomes: Vec<TreatmentOutcome> = if config.jobs <= 1 {
        treatments.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
        pool.install(|| treatments.par_iter().map(run).collect())
    };
    if config.fail_fast {
        if let Some(pos) = outcomes.iter().position(|o| o.result.is_err()) {
            return Err(outcomes
                .into_iter()
                .nth(pos)
                .and_then(|o| o.result.err())
                .expect("error present"));
        }
    }
    Ok(outcomes)
}

/// Version written into serialized result tables.
pub const RESULT_TABLE_VERSION: u32 = 1;

/// One row of a regression table; numeric fields are absent when estimation failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub treatment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_high: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    #[serde(default)]
    pub outcome_support: usize,
    #[serde(default)]
    pub treatment_support: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Treatment-effect table for one outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub version: u32,
    pub outcome: String,
    pub family: Family,
    pub level: f64,
    pub n: usize,
    /// Estimator settings that produced the table.
    pub estimator: String,
    /// Always false: p-values and intervals are per treatment.
    pub multiplicity_adjusted: bool,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new<T: Scalar>(
        data: &Dataset<T>,
        config: &DmlConfig,
        outcomes: &[TreatmentOutcome],
    ) -> Self {
        let rows = outcomes
            .iter()
            .map(|o| match &o.result {
                Ok(e) => ResultRow {
                    treatment: o.treatment.clone(),
                    coefficient: Some(e.alpha_check),
                    p_value: Some(e.p_value),
                    ci_low: Some(e.ci_low),
                    ci_high: Some(e.ci_high),
                    std_error: Some(e.std_error),
                    outcome_support: e.step1_support.len(),
                    treatment_support: e.step2_support.len(),
                    warnings: e.warnings.clone(),
                    error: None,
                },
                Err(err) => ResultRow {
                    treatment: o.treatment.clone(),
                    coefficient: None,
                    p_value: None,
                    ci_low: None,
                    ci_high: None,
                    std_error: None,
                    outcome_support: 0,
                    treatment_support: 0,
                    warnings: Vec::new(),
                    error: Some(match err {
                        Error::Treatment { source, .. } => source.to_string(),
                        other => other.to_string(),
                    }),
                },
            })
            .collect();
        ResultTable {
            version: RESULT_TABLE_VERSION,
            outcome: data.outcome_name().to_string(),
            family: config.family,
            level: config.level,
            n: data.n(),
            estimator: config.fingerprint(),
            multiplicity_adjusted: false,
            rows,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let table: ResultTable = toml::from_str(text)?;
        if table.version != RESULT_TABLE_VERSION {
            return Err(Error::Schema(format!(
                "unsupported result table version {}",
                table.version
            )));
        }
        Ok(table)
    }
}
