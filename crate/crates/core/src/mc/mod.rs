//! Monte Carlo laboratory: synthetic designs with known truth, the single-selection
//! comparator, and replicated studies of bias and interval coverage.
//!
//! Replication `r` of a study draws its data from seed `base_seed + r` for every method,
//! so methods are compared on identical samples. Replications may run on several threads;
//! results are always aggregated in replication order.

mod dgp;
mod naive;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dml::{dml_linear, dml_logit, DmlConfig, DmlEstimate, Family};
use crate::error::{Error, Result};

pub use dgp::{gen_dgp, CoefPattern, Correlation, DgpSpec, TreatmentEquation, Truth};
pub use naive::naive_fit;

/// Version of the study and report documents.
pub const STUDY_SPEC_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// The debiased estimator of the DGP's family.
    Dml,
    /// Single selection on the outcome equation.
    Naive,
}

impl Method {
    pub fn label(self, family: Family) -> String {
        match self {
            Method::Dml => format!("dml-{}", family.label()),
            Method::Naive => format!("naive-{}", family.label()),
        }
    }
}

fn default_level() -> f64 {
    0.05
}

fn default_failure_rate() -> f64 {
    0.05
}

fn default_jobs() -> usize {
    1
}

/// A replicated study of one DGP under several methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub version: u32,
    pub reps: usize,
    pub methods: Vec<Method>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub base_seed: u64,
    /// Largest tolerated share of failed replications per method.
    #[serde(default = "default_failure_rate")]
    pub max_failure_rate: f64,
    /// Optional acceptance band for the coverage of every method.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage_band: Option<[f64; 2]>,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    pub dgp: DgpSpec,
    /// Estimator settings; the family and level are taken from the study.
    #[serde(default)]
    pub estimator: DmlConfig,
}

impl StudySpec {
    pub fn new(dgp: DgpSpec, reps: usize, methods: Vec<Method>) -> Self {
        StudySpec {
            version: STUDY_SPEC_VERSION,
            reps,
            methods,
            level: default_level(),
            base_seed: 0,
            max_failure_rate: default_failure_rate(),
            coverage_band: None,
            jobs: 1,
            dgp,
            estimator: DmlConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: StudySpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != STUDY_SPEC_VERSION {
            return Err(Error::Schema(format!(
                "unsupported study version {}",
                self.version
            )));
        }
        if self.reps == 0 {
            return Err(Error::invalid("a study needs at least one replication"));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("a study needs at least one method"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::invalid(format!(
                "level must lie in (0, 1), got {}",
                self.level
            )));
        }
        if !(0.0..=1.0).contains(&self.max_failure_rate) {
            return Err(Error::invalid("failure-rate ceiling must lie in [0, 1]"));
        }
        if self.jobs == 0 {
            return Err(Error::invalid("jobs must be at least 1"));
        }
        self.dgp.validate()?;
        self.config().validate()
    }

    /// Estimator configuration with the study's family and level, single-threaded.
    pub fn config(&self) -> DmlConfig {
        DmlConfig {
            family: self.dgp.family,
            level: self.level,
            jobs: 1,
            fail_fast: false,
            ..self.estimator.clone()
        }
    }
}

/// One method on one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub method: Method,
    /// Checksum of the dataset the method saw.
    pub checksum: String,
    pub result: std::result::Result<DmlEstimate, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub index: usize,
    pub seed: u64,
    pub runs: Vec<MethodRun>,
}

/// Summary of one method across a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub method: String,
    pub alpha0: f64,
    pub level: f64,
    pub reps: usize,
    pub successes: usize,
    pub failures: usize,
    /// Failure messages with their counts.
    #[serde(default)]
    pub failure_reasons: BTreeMap<String, usize>,
    pub mean_bias: f64,
    pub median_bias: f64,
    /// Empirical standard deviation of the estimates.
    pub sd: f64,
    pub mean_se: f64,
    /// Share of successful replications whose interval contains `alpha0`.
    pub coverage: f64,
    /// Coverage counting every failure as a miss.
    pub coverage_with_failures: f64,
    pub mean_ci_width: f64,
    /// Share of successful replications rejecting `alpha = 0` at `level`.
    pub rejection_rate: f64,
}

impl CoverageReport {
    pub fn failure_rate(&self) -> f64 {
        self.failures as f64 / self.reps as f64
    }

    /// One-line verdict: coverage, mean bias and failures.
    pub fn verdict(&self, band: Option<[f64; 2]>) -> String {
        let mut line = format!(
            "{}: coverage {:.3} over {} successes, mean bias {:+.4}, failures {}/{}",
            self.method, self.coverage, self.successes, self.mean_bias, self.failures, self.reps
        );
        if let Some([lo, hi]) = band {
            let ok = self.coverage >= lo && self.coverage <= hi;
            let _ = write!(
                line,
                ", {} band [{lo}, {hi}]",
                if ok { "inside" } else { "outside" }
            );
        }
        line
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

fn summarize(label: String, alpha0: f64, level: f64, runs: &[&MethodRun]) -> CoverageReport {
    let ok: Vec<&DmlEstimate> = runs.iter().filter_map(|r| r.result.as_ref().ok()).collect();
    let mut failure_reasons = BTreeMap::new();
    for r in runs {
        if let Err(msg) = &r.result {
            *failure_reasons.entry(msg.clone()).or_insert(0) += 1;
        }
    }
    let k = ok.len() as f64;
    let mean = |f: &dyn Fn(&DmlEstimate) -> f64| ok.iter().map(|e| f(e)).sum::<f64>() / k;
    let mean_est = mean(&|e| e.alpha_check);
    let sd = if ok.len() > 1 {
        (ok.iter()
            .map(|e| (e.alpha_check - mean_est).powi(2))
            .sum::<f64>()
            / (k - 1.0))
            .sqrt()
    } else {
        0.0
    };
    let covered = ok.iter().filter(|e| e.covers(alpha0)).count();
    CoverageReport {
        method: label,
        alpha0,
        level,
        reps: runs.len(),
        successes: ok.len(),
        failures: runs.len() - ok.len(),
        failure_reasons,
        mean_bias: mean_est - alpha0,
        median_bias: median(ok.iter().map(|e| e.alpha_check - alpha0).collect()),
        sd,
        mean_se: mean(&|e| e.std_error),
        coverage: covered as f64 / k,
        coverage_with_failures: covered as f64 / runs.len() as f64,
        mean_ci_width: mean(&|e| e.ci_high - e.ci_low),
        rejection_rate: ok.iter().filter(|e| e.rejects()).count() as f64 / k,
    }
}

fn run_method(
    spec: &StudySpec,
    config: &DmlConfig,
    method: Method,
    seed: u64,
) -> Result<MethodRun> {
    let (data, _) = gen_dgp::<f64>(&spec.dgp, seed)?;
    let checksum = data.checksum();
    let result = match (method, spec.dgp.family) {
        (Method::Dml, Family::Logit) => dml_logit(&data, 0, config),
        (Method::Dml, Family::Linear) => dml_linear(&data, 0, config),
        (Method::Naive, _) => naive_fit(&data, 0, config),
    };
    Ok(MethodRun {
        method,
        checksum,
        result: result.map_err(|e| e.to_string()),
    })
}

/// Runs every replication and keeps the per-method results.
pub fn run_study_detailed(spec: &StudySpec) -> Result<(Vec<CoverageReport>, Vec<Replication>)> {
    spec.validate()?;
    let config = spec.config();
    let replicate = |r: usize| -> Result<Replication> {
        let seed = spec.base_seed.wrapping_add(r as u64);
        let runs = spec
            .methods
            .iter()
            .map(|&m| run_method(spec, &config, m, seed))
            .collect::<Result<Vec<_>>>()?;
        Ok(Replication {
            index: r,
            seed,
            runs,
        })
    };
    let reps: Vec<Replication> = if spec.jobs <= 1 {
        (0..spec.reps).map(replicate).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.jobs)
            .build()
            .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
        pool.install(|| {
            (0..spec.reps)
                .into_par_iter()
                .map(replicate)
                .collect::<Result<_>>()
        })?
    };
    let reports = spec
        .methods
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let runs: Vec<&MethodRun> = reps.iter().map(|r| &r.runs[k]).collect();
            summarize(m.label(spec.dgp.family), spec.dgp.alpha0, spec.level, &runs)
        })
        .collect();
    Ok((reports, reps))
}

/// Runs a study and summarizes each method.
pub fn run_study(spec: &StudySpec) -> Result<Vec<CoverageReport>> {
    run_study_detailed(spec).map(|(reports, _)| reports)
}

#[derive(Serialize, Deserialize)]
struct ReportFile {
    version: u32,
    reports: Vec<CoverageReport>,
}

pub fn reports_to_toml(reports: &[CoverageReport]) -> Result<String> {
    Ok(toml::to_string(&ReportFile {
        version: STUDY_SPEC_VERSION,
        reports: reports.to_vec(),
    })?)
}

pub fn reports_from_toml(text: &str) -> Result<Vec<CoverageReport>> {
    let file: ReportFile = toml::from_str(text)?;
    if file.version != STUDY_SPEC_VERSION {
        return Err(Error::Schema(format!(
            "unsupported report version {}",
            file.version
        )));
    }
    Ok(file.reports)
}

/// Aligned plain-text table, one row per method.
pub fn render_reports(reports: &[CoverageReport]) -> String {
    let header = [
        "method",
        "reps",
        "failed",
        "mean bias",
        "median bias",
        "sd",
        "mean se",
        "coverage",
        "width",
        "reject",
    ];
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.method.clone(),
                r.reps.to_string(),
                r.failures.to_string(),
                format!("{:.4}", r.mean_bias),
                format!("{:.4}", r.median_bias),
                format!("{:.4}", r.sd),
                format!("{:.4}", r.mean_se),
                format!("{:.3}", r.coverage),
                format!("{:.4}", r.mean_ci_width),
                format!("{:.3}", r.rejection_rate),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            rows.iter()
                .map(|r| r[c].len())
                .chain([header[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(header.to_vec(), &mut out);
    for r in &rows {
        line(r.iter().map(String::as_str).collect(), &mut out);
    }
    out
}
