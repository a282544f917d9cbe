use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use doublelasso::dml::{dml_multi, DmlConfig, Family, ResultTable};
use doublelasso::lasso::PenaltyConfig;
use doublelasso::mc::{render_reports, reports_to_toml, run_study, CoverageReport, StudySpec};
use doublelasso::model_matrix::{
    encode, load_table, ColumnMeta, DatasetMeta, EncodingSpec, TableFormat,
};
use doublelasso::Dataset64;

use crate::args::{EncodeArgs, FamilyArg, FitArgs, Format, PenaltyArg, SimulateArgs};
use crate::failure::{io_error, Failure};
use crate::table::{render_text, render_tsv};

pub fn sidecar_path(matrix: &Path) -> PathBuf {
    let mut s = matrix.as_os_str().to_owned();
    s.push(".meta.toml");
    PathBuf::from(s)
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| io_error(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::Input(format!("standard output: {e}")))
        }
    }
}

fn encode_file(data: &Path, spec: &Path, outcome: Option<&str>) -> Result<Dataset64, Failure> {
    let mut spec = EncodingSpec::from_toml(&read(spec)?)
        .map_err(|e| Failure::Input(format!("{}: {e}", spec.display())))?;
    if let Some(o) = outcome {
        spec.outcome.column = o.to_string();
    }
    let file = fs::File::open(data).map_err(|e| io_error(data, e))?;
    let raw = load_table(std::io::BufReader::new(file), &TableFormat::default())
        .map_err(|e| Failure::Input(format!("{}: {e}", data.display())))?;
    Ok(encode(&raw, &spec)?)
}

pub fn cmd_encode(args: &EncodeArgs) -> Result<(), Failure> {
    let data = encode_file(&args.data, &args.spec, None)?;
    let mut matrix = Vec::new();
    data.write_matrix(&mut matrix)?;
    let mut meta = Vec::new();
    data.write_metadata(&mut meta)?;
    fs::write(&args.out, matrix).map_err(|e| io_error(&args.out, e))?;
    let side = sidecar_path(&args.out);
    fs::write(&side, meta).map_err(|e| io_error(&side, e))?;
    println!(
        "n = {}, p = {} ({} treatment, {} control), dropped rows = {}",
        data.n(),
        data.p(),
        data.treatment_indices().len(),
        data.control_indices().len(),
        data.dropped_rows()
    );
    Ok(())
}

fn matches(selector: &str, col: &ColumnMeta) -> bool {
    match selector.strip_suffix('*') {
        Some(prefix) => col.name.starts_with(prefix),
        None => col.name == selector || col.source == selector,
    }
}

/// Column indices matched by `selectors`, in selector order, without repeats.
fn resolve(
    selectors: &[String],
    columns: &[ColumnMeta],
    what: &str,
) -> Result<Vec<usize>, Failure> {
    let mut out = Vec::new();
    for sel in selectors.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        let hits: Vec<usize> = (0..columns.len())
            .filter(|&j| matches(sel, &columns[j]))
            .collect();
        if hits.is_empty() {
            return Err(Failure::Input(format!(
                "{what} selector `{sel}` matches no column"
            )));
        }
        for j in hits {
            if !out.contains(&j) {
                out.push(j);
            }
        }
    }
    Ok(out)
}

fn load_fit_data(args: &FitArgs) -> Result<Dataset64, Failure> {
    if let Some(spec) = &args.spec {
        return encode_file(&args.data, spec, args.outcome.as_deref());
    }
    let side = sidecar_path(&args.data);
    let meta: DatasetMeta = toml::from_str(&read(&side)?)
        .map_err(|e| Failure::Input(format!("{}: {e}", side.display())))?;
    let file = fs::File::open(&args.data).map_err(|e| io_error(&args.data, e))?;
    let data = Dataset64::read(std::io::BufReader::new(file), &meta)
        .map_err(|e| Failure::Input(format!("{}: {e}", args.data.display())))?;
    if let Some(o) = &args.outcome {
        if o != data.outcome_name() {
            return Err(Failure::Input(format!(
                "outcome `{o}` requested but the encoded dataset's outcome is `{}`",
                data.outcome_name()
            )));
        }
    }
    Ok(data)
}

fn fit_config(args: &FitArgs) -> Result<DmlConfig, Failure> {
    let config = DmlConfig {
        family: match args.family {
            FamilyArg::Logit => Family::Logit,
            FamilyArg::Linear => Family::Linear,
        },
        penalty: match args.penalty {
            PenaltyArg::Plugin => PenaltyConfig::default(),
            PenaltyArg::Cv => PenaltyConfig::cross_validation(),
        },
        level: args.level,
        seed: args.seed,
        jobs: args.jobs.unwrap_or(1),
        fail_fast: args.fail_fast,
        ..DmlConfig::default()
    };
    config.validate()?;
    Ok(config)
}

pub fn cmd_fit(args: &FitArgs) -> Result<(), Failure> {
    let config = fit_config(args)?;
    let data = load_fit_data(args)?;
    let treatments = if args.treatments.is_empty() {
        data.treatment_indices()
    } else {
        resolve(&args.treatments, data.columns(), "treatment")?
    };
    if treatments.is_empty() {
        return Err(Failure::Input(
            "no treatment columns: pass --treatments".into(),
        ));
    }
    let (data, treatments) = if args.controls.is_empty() {
        (data, treatments)
    } else {
        let controls = resolve(&args.controls, data.columns(), "control")?;
        let keep: Vec<usize> = (0..data.p())
            .filter(|j| treatments.contains(j) || controls.contains(j))
            .collect();
        let remap = treatments
            .iter()
            .map(|t| keep.iter().position(|k| k == t).expect("treatment kept"))
            .collect();
        (data.select(&keep)?, remap)
    };
    if config.family == Family::Logit && !data.is_binary_outcome() {
        return Err(Failure::Input(format!(
            "outcome `{}` is not 0/1; use --family linear for a continuous outcome",
            data.outcome_name()
        )));
    }
    let outcomes = dml_multi(&data, &treatments, &config)?;
    let table = ResultTable::new(&data, &config, &outcomes);
    let text = match args.format {
        Format::Text => render_text(&table, args.precision),
        Format::Tsv => render_tsv(&table, args.precision),
        Format::Toml => table.to_toml()?,
    };
    write_output(args.out.as_deref(), &text)
}

fn reports_tsv(reports: &[CoverageReport]) -> String {
    let mut out = String::from(
        "method\treps\tfailures\tmean_bias\tmedian_bias\tsd\tmean_se\tcoverage\tcoverage_with_failures\tmean_ci_width\trejection_rate\n",
    );
    for r in reports {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.method,
            r.reps,
            r.failures,
            r.mean_bias,
            r.median_bias,
            r.sd,
            r.mean_se,
            r.coverage,
            r.coverage_with_failures,
            r.mean_ci_width,
            r.rejection_rate
        ));
    }
    out
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let text = read(&args.spec)?;
    let mut study = StudySpec::from_toml(&text)
        .map_err(|e| Failure::Input(format!("{}: {e}", args.spec.display())))?;
    if let Some(seed) = args.seed {
        study.base_seed = seed;
    }
    if let Some(jobs) = args.jobs {
        study.jobs = jobs;
    }
    study.validate()?;
    let reports = run_study(&study)?;
    let rendered = match args.format {
        Format::Text => render_reports(&reports),
        Format::Tsv => reports_tsv(&reports),
        Format::Toml => reports_to_toml(&reports)?,
    };
    write_output(args.out.as_deref(), &rendered)?;

    let mut problems = Vec::new();
    for r in &reports {
        eprintln!("{}", r.verdict(study.coverage_band));
        if r.failure_rate() > study.max_failure_rate {
            problems.push(format!(
                "{}: failure rate {:.3} exceeds the ceiling {}",
                r.method,
                r.failure_rate(),
                study.max_failure_rate
            ));
        }
        if let Some([lo, hi]) = study.coverage_band {
            if !(r.coverage >= lo && r.coverage <= hi) {
                problems.push(format!(
                    "{}: coverage {:.3} outside [{lo}, {hi}]",
                    r.method, r.coverage
                ));
            }
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Failure::Quality(problems.join("; ")))
    }
}
