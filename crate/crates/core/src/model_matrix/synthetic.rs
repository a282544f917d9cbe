//! A synthetic survey schema with the shape of the recruitment-interview
//! nonresponse model: 63 raw regressors that expand to 26 treatment columns and
//! 303 control columns. The treatment block follows the published answer
//! coding; the control block is made up, only its size is meaningful.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::dataset::{Interaction, Role};
use super::spec::{
    EncodingSpec, MissingPolicy, OutcomeRule, RuleKind, Transform, VariableRule,
    ENCODING_SPEC_VERSION,
};
use super::table::{Cell, RawTable};

const EDUCATION_RAW: [(&str, &str); 9] = [
    ("Still in school", "High"),
    ("Left school without degree", "Low"),
    ("Lower secondary degree", "Low"),
    ("Secondary degree", "Medium"),
    (
        "Polytechnical secondary degree (GDR) 8th or 9th grade",
        "Low",
    ),
    ("Polytechnical secondary degree (GDR) 10th grade", "Medium"),
    ("Advanced technical college certificate", "High"),
    ("General qualification for university entrance", "High"),
    ("Other degree", "Other"),
];

const LIVING_RAW: [(&str, &str); 5] = [
    ("Not married, no partner", "No partner"),
    (
        "Not married with partner, separate households",
        "Partner not in household",
    ),
    (
        "Not married with partner, joint household",
        "Partner in household",
    ),
    ("Married living together", "Married living together"),
    ("Married living apart", "Married living apart"),
];

const WILLINGNESS_RAW: [&str; 5] = [
    "Good",
    "Medium",
    "Bad",
    "Good in the beginning but got worse",
    "Bad in the beginning but got better",
];

const PERSUADE_RAW: [&str; 4] = [
    "Very difficult",
    "Rather difficult",
    "Rather easy",
    "Very easy",
];
const LIKELIHOOD_RAW: [&str; 4] = [
    "Very likely",
    "Rather likely",
    "Rather unlikely",
    "Very unlikely",
];
const CITIZENSHIP_RAW: [&str; 4] = ["Germany", "EU28", "Rest of Europe", "Other"];

const NUMERIC_CONTROLS: usize = 30;
const SMALL_CATEGORICALS: usize = 21;
const SMALL_LEVELS: usize = 12;
const LARGE_CATEGORICALS: usize = 2;
const LARGE_LEVELS: usize = 22;

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn categorical(
    column: &str,
    role: Role,
    levels: &[&str],
    baseline: &str,
    merge: &[(&str, &str)],
) -> VariableRule {
    VariableRule {
        column: column.to_string(),
        name: None,
        role,
        kind: RuleKind::Categorical {
            levels: strings(levels),
            baseline: baseline.to_string(),
            merge: merge
                .iter()
                .filter(|(from, to)| from != to)
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect::<BTreeMap<_, _>>(),
        },
    }
}

fn control_levels(k: usize) -> Vec<String> {
    (1..=k).map(|l| format!("L{l:02}")).collect()
}

fn numeric_name(i: usize) -> String {
    format!("ctrl_num_{i:02}")
}

fn cat_name(i: usize) -> String {
    format!("ctrl_cat_{i:02}")
}

/// Encoding spec for the synthetic survey.
pub fn survey_schema() -> EncodingSpec {
    let t = Role::Treatment;
    let mut variables = vec![
        categorical("mode", t, &["Offline", "Online"], "Offline", &[]),
        categorical(
            "willingness",
            t,
            &["Bad", "Good"],
            "Bad",
            &[
                ("Medium", "Bad"),
                ("Good in the beginning but got worse", "Bad"),
                ("Bad in the beginning but got better", "Bad"),
            ],
        ),
        categorical(
            "persuade_interview",
            t,
            &["Difficult", "Rather easy", "Very easy"],
            "Difficult",
            &[
                ("Very difficult", "Difficult"),
                ("Rather difficult", "Difficult"),
            ],
        ),
        categorical(
            "persuade_followup",
            t,
            &["Difficult", "Rather easy", "Very easy"],
            "Difficult",
            &[
                ("Very difficult", "Difficult"),
                ("Rather difficult", "Difficult"),
            ],
        ),
        categorical(
            "likelihood",
            t,
            &["Unlikely", "Rather likely", "Very likely"],
            "Unlikely",
            &[
                ("Rather unlikely", "Unlikely"),
                ("Very unlikely", "Unlikely"),
            ],
        ),
        categorical(
            "education",
            t,
            &["Low", "Medium", "High", "Other"],
            "Low",
            &EDUCATION_RAW,
        ),
        categorical("gender", t, &["Male", "Female"], "Male", &[]),
        categorical(
            "citizenship",
            t,
            &["Germany", "Other"],
            "Germany",
            &[("EU28", "Other"), ("Rest of Europe", "Other")],
        ),
        VariableRule {
            column: "year_of_birth".into(),
            name: Some("age".into()),
            role: t,
            kind: RuleKind::Derived {
                transform: Transform::Affine {
                    scale: -1.0,
                    offset: 2013.0,
                },
                standardize: true,
            },
        },
        categorical(
            "living",
            t,
            &[
                "No partner",
                "Partner not in household",
                "Partner in household",
                "Married living together",
                "Married living apart",
            ],
            "No partner",
            &LIVING_RAW,
        ),
    ];
    for i in 1..=NUMERIC_CONTROLS {
        variables.push(VariableRule {
            column: numeric_name(i),
            name: None,
            role: Role::Control,
            kind: RuleKind::Numeric {
                transform: None,
                standardize: true,
            },
        });
    }
    for (i, k) in (1..=SMALL_CATEGORICALS).map(|i| (i, SMALL_LEVELS)).chain(
        (SMALL_CATEGORICALS + 1..=SMALL_CATEGORICALS + LARGE_CATEGORICALS)
            .map(|i| (i, LARGE_LEVELS)),
    ) {
        let levels = control_levels(k);
        variables.push(VariableRule {
            column: cat_name(i),
            name: None,
            role: Role::Control,
            kind: RuleKind::Categorical {
                baseline: levels[0].clone(),
                levels,
                merge: BTreeMap::new(),
            },
        });
    }
    let interactions = ["age", "education", "living"]
        .iter()
        .map(|v| Interaction::new(*v, "mode", Role::Treatment))
        .collect();
    EncodingSpec {
        version: ENCODING_SPEC_VERSION,
        outcome: OutcomeRule {
            column: "dropout".into(),
            positive: None,
        },
        missing: MissingPolicy::DropListwise,
        variables,
        interactions,
    }
}

fn pick<'a>(rng: &mut ChaCha20Rng, xs: &[&'a str]) -> &'a str {
    xs[rng.random_range(0..xs.len())]
}

/// Random raw table matching [`survey_schema`]; each non-outcome cell is
/// independently missing with probability `missing_rate`.
pub fn survey_table(n: usize, seed: u64, missing_rate: f64) -> RawTable {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let spec = survey_schema();
    let columns: Vec<String> = spec
        .referenced_columns()
        .iter()
        .map(|s| s.to_string())
        .collect();
    let education: Vec<&str> = EDUCATION_RAW.iter().map(|e| e.0).collect();
    let living: Vec<&str> = LIVING_RAW.iter().map(|e| e.0).collect();
    let small = control_levels(SMALL_LEVELS);
    let large = control_levels(LARGE_LEVELS);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = Vec::with_capacity(columns.len());
        row.push(Cell::Number(if rng.random::<f64>() < 0.2 {
            1.0
        } else {
            0.0
        }));
        let text = |s: &str| Cell::Text(s.to_string());
        row.push(text(pick(&mut rng, &["Offline", "Online"])));
        row.push(text(pick(&mut rng, &WILLINGNESS_RAW)));
        row.push(text(pick(&mut rng, &PERSUADE_RAW)));
        row.push(text(pick(&mut rng, &PERSUADE_RAW)));
        row.push(text(pick(&mut rng, &LIKELIHOOD_RAW)));
        row.push(text(pick(&mut rng, &education)));
        row.push(text(pick(&mut rng, &["Male", "Female"])));
        row.push(text(pick(&mut rng, &CITIZENSHIP_RAW)));
        row.push(Cell::Number(rng.random_range(1943..=1995) as f64));
        row.push(text(pick(&mut rng, &living)));
        for _ in 0..NUMERIC_CONTROLS {
            row.push(Cell::Number(rng.sample(StandardNormal)));
        }
        for i in 0..SMALL_CATEGORICALS + LARGE_CATEGORICALS {
            let levels = if i < SMALL_CATEGORICALS {
                &small
            } else {
                &large
            };
            row.push(Cell::Text(
                levels[rng.random_range(0..levels.len())].clone(),
            ));
        }
        for cell in row.iter_mut().skip(1) {
            if missing_rate > 0.0 && rng.random::<f64>() < missing_rate {
                *cell = Cell::Missing;
            }
        }
        rows.push(row);
    }
    RawTable::new(columns, rows).expect("synthetic table is rectangular")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_declares_sixty_three_regressors() {
        let spec = survey_schema();
        spec.validate().unwrap();
        assert_eq!(spec.variables.len(), 63);
    }

    #[test]
    fn table_is_deterministic() {
        assert_eq!(survey_table(20, 3, 0.01), survey_table(20, 3, 0.01));
    }
}
