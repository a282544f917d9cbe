use std::fmt::Write;

use doublelasso::dml::{ResultRow, ResultTable};

/// Bound label for a quantile `q`: `0.025` becomes `2.5%`.
fn pct(q: f64) -> String {
    let s = format!("{:.4}", q * 100.0);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    format!("{s}%")
}

pub fn header(level: f64) -> Vec<String> {
    vec![
        "Treatment".into(),
        "Coefficient".into(),
        "p-value".into(),
        pct(level / 2.0),
        pct(1.0 - level / 2.0),
        "Std. error".into(),
        "Warnings".into(),
    ]
}

fn num(v: Option<f64>, precision: usize) -> String {
    match v {
        // avoid printing -0.000
        Some(x) => {
            let s = format!("{x:.precision$}");
            if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
                s[1..].to_string()
            } else {
                s
            }
        }
        None => "-".into(),
    }
}

fn numbers(row: &ResultRow, precision: usize) -> [String; 5] {
    [
        num(row.coefficient, precision),
        num(row.p_value, precision),
        num(row.ci_low, precision),
        num(row.ci_high, precision),
        num(row.std_error, precision),
    ]
}

/// Messages attached to a row: its warnings, then its error.
fn messages(row: &ResultRow) -> Vec<String> {
    let mut out = row.warnings.clone();
    if let Some(e) = &row.error {
        out.push(format!("error: {e}"));
    }
    out
}

/// Aligned table with numbered notes below it; each row message is printed once.
pub fn render_text(table: &ResultTable, precision: usize) -> String {
    let mut notes = Vec::new();
    let mut rows = vec![header(table.level)];
    for row in &table.rows {
        let mut cells = vec![row.treatment.clone()];
        cells.extend(numbers(row, precision));
        let marks: Vec<String> = messages(row)
            .into_iter()
            .map(|m| {
                notes.push((row.treatment.clone(), m));
                format!("[{}]", notes.len())
            })
            .collect();
        cells.push(marks.join(""));
        rows.push(cells);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();

    let mut out = String::new();
    let _ = writeln!(
        out,
        "Outcome: {}   n = {}   family: {}   level: {}",
        table.outcome,
        table.n,
        table.family.label(),
        table.level
    );
    let _ = writeln!(out, "Estimator: {}", table.estimator);
    for (k, r) in rows.iter().enumerate() {
        let mut line = String::new();
        for (c, cell) in r.iter().enumerate() {
            if c == 0 {
                let _ = write!(line, "{cell:<w$}", w = widths[c]);
            } else if c == r.len() - 1 {
                let _ = write!(line, "  {cell}");
            } else {
                let _ = write!(line, "  {cell:>w$}", w = widths[c]);
            }
        }
        let _ = writeln!(out, "{}", line.trim_end());
        if k == 0 {
            let _ = writeln!(
                out,
                "{}",
                "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1))
            );
        }
    }
    let _ = writeln!(
        out,
        "p-values and intervals are not adjusted for multiple treatments."
    );
    for (k, (treatment, msg)) in notes.iter().enumerate() {
        let _ = writeln!(out, "[{}] {treatment}: {msg}", k + 1);
    }
    out
}

/// Tab-delimited table; messages of a row are joined with ` | `.
pub fn render_tsv(table: &ResultTable, precision: usize) -> String {
    let mut out = header(table.level).join("\t");
    out.push('\n');
    for row in &table.rows {
        let mut cells = vec![row.treatment.clone()];
        cells.extend(numbers(row, precision));
        cells.push(messages(row).join(" | ").replace(['\t', '\n'], " "));
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    out
}
