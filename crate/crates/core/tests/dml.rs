mod common;

use doublelasso::dml::{
    dml_linear, dml_logit, dml_logit_detailed, dml_multi, iv_logit_objective, DmlConfig, Family,
    InstrumentScaling, NuisanceArtifacts, ResultTable,
};
use doublelasso::lasso::PenaltyConfig;
use doublelasso::mc::{gen_dgp, naive_fit, CoefPattern, Correlation, DgpSpec, TreatmentEquation};
use doublelasso::model_matrix::synthetic::{survey_schema, survey_table};
use doublelasso::model_matrix::{encode, ColumnMeta, Dataset, Role};
use doublelasso::numerics::normal_quantile;
use doublelasso::Error;
use ndarray::{array, Array1, Array2};

fn logit() -> DmlConfig {
    DmlConfig::default()
}

fn linear() -> DmlConfig {
    DmlConfig {
        family: Family::Linear,
        ..DmlConfig::default()
    }
}

fn irrelevant_controls(n: usize, p: usize, alpha0: f64) -> DgpSpec {
    DgpSpec {
        family: Family::Logit,
        n,
        p,
        alpha0,
        intercept: 0.0,
        beta: CoefPattern::zero(),
        treatment: TreatmentEquation {
            gamma: CoefPattern::zero(),
            noise: 1.0,
        },
        correlation: Correlation::Independent,
        noise: 1.0,
    }
}

#[test]
fn irrelevant_controls_recover_the_effect() {
    let spec = irrelevant_controls(2000, 50, 0.5);
    let (mut sum, mut covered) = (0.0, 0);
    for seed in 0..200 {
        let (data, _) = gen_dgp::<f64>(&spec, seed).unwrap();
        let est = dml_logit(&data, 0, &logit()).unwrap();
        sum += est.alpha_check;
        covered += est.covers(0.5) as usize;
    }
    let mean = sum / 200.0;
    assert!((mean - 0.5).abs() <= 0.05, "mean estimate {mean}");
    assert!(covered >= 180, "covered {covered}/200");
}

#[test]
fn null_p_values_are_uniform() {
    let spec = DgpSpec::sparse(Family::Logit, 500, 20, 5, 0.0);
    let p: Vec<f64> = (0..500)
        .map(|seed| {
            dml_logit(
                &gen_dgp::<f64>(&spec, 50_000 + seed).unwrap().0,
                0,
                &logit(),
            )
            .unwrap()
            .p_value
        })
        .collect();
    let ks = common::ks_uniform(&p);
    assert!(ks < 0.1, "KS distance {ks}");
}

#[test]
fn algorithm_identities_hold_on_every_fit() {
    for seed in 0..20 {
        let spec = DgpSpec::sparse(Family::Logit, 400, 60, 5, 0.5);
        let (data, _) = gen_dgp::<f64>(&spec, seed).unwrap();
        for instrument in [
            InstrumentScaling::InverseSd,
            InstrumentScaling::InverseRootSd,
        ] {
            let config = DmlConfig {
                instrument,
                ..logit()
            };
            let (est, art) = dml_logit_detailed(&data, 0, &config).unwrap();

            for i in 0..data.n() {
                let (f, s2, w) = (art.f_hat[i], art.sigma2_hat[i], art.w_hat[i]);
                assert!(s2 > 0.0 && s2 <= 0.25);
                assert!((f * f * s2 - w * w).abs() <= 1e-12);
            }

            let v2 = art.v_hat.mapv(|v| v * v).mean().unwrap();
            for &j in &est.step2_support {
                let fx = &art.f_hat * &data.column(j);
                let g = (&art.v_hat * &fx).mean().unwrap();
                let scale = (v2 * fx.mapv(|v| v * v).mean().unwrap()).sqrt();
                assert!(g.abs() <= 1e-6 * scale, "seed {seed} column {j}: {g}");
            }

            let search = est.diagnostics.search.clone().unwrap();
            let at = iv_logit_objective(est.alpha_check, &art, &data, 0).unwrap();
            assert_eq!(at, search.objective);
            for k in 0..401 {
                let a = search.low + (search.high - search.low) * k as f64 / 400.0;
                assert!(
                    at <= iv_logit_objective(a, &art, &data, 0).unwrap() + 1e-15,
                    "seed {seed} grid point {k}"
                );
            }

            let q = normal_quantile(1.0 - est.level / 2.0).unwrap();
            assert!(((est.ci_high - est.ci_low) - 2.0 * q * est.std_error).abs() <= 1e-10);
            assert!(est.ci_low <= est.alpha_check && est.alpha_check <= est.ci_high);
            let excluded = est.ci_low > 0.0 || est.ci_high < 0.0;
            assert_eq!(est.p_value < est.level, excluded);
        }
    }
}

#[test]
fn instrument_scaling_does_not_move_the_estimate_much() {
    let (data, _) = gen_dgp::<f64>(&DgpSpec::sparse(Family::Logit, 800, 40, 5, 0.5), 3).unwrap();
    let a = dml_logit(&data, 0, &logit()).unwrap();
    let b = dml_logit(
        &data,
        0,
        &DmlConfig {
            instrument: InstrumentScaling::InverseRootSd,
            ..logit()
        },
    )
    .unwrap();
    assert!((a.alpha_check - b.alpha_check).abs() < a.std_error);
}

fn one_observation() -> (Dataset<f64>, NuisanceArtifacts<f64>) {
    let data = Dataset::new(
        "y",
        array![1.0],
        Array2::zeros((1, 1)),
        vec![ColumnMeta::numeric("d", Role::Treatment)],
    )
    .unwrap();
    let one = |v: f64| Array1::from(vec![v]);
    let art = NuisanceArtifacts {
        alpha_tilde: 0.0,
        eta_tilde: one(3f64.ln()),
        w_hat: one(0.1875),
        sigma2_hat: one(0.1875),
        f_hat: one(0.1875f64.sqrt()),
        v_hat: one(1.0),
        z_hat: one(2.0),
        controls: vec![],
        beta_tilde: Array1::zeros(0),
        theta_intercept: 0.0,
        theta_tilde: Array1::zeros(0),
    };
    (data, art)
}

#[test]
fn scoring_objective_hand_values() {
    let (data, mut art) = one_observation();
    // G = 3/4, residual 1/4, z = 2
    assert!((iv_logit_objective(0.0, &art, &data, 0).unwrap() - 1.0).abs() < 1e-15);
    art.z_hat[0] = 0.0;
    assert!(matches!(
        iv_logit_objective(0.0, &art, &data, 0),
        Err(Error::DegenerateMoment)
    ));
}

#[test]
fn scoring_objective_is_scale_invariant_and_vanishes_at_a_root() {
    let (data, _) = gen_dgp::<f64>(&DgpSpec::sparse(Family::Logit, 300, 10, 3, 0.5), 9).unwrap();
    let (est, mut art) = dml_logit_detailed(&data, 0, &logit()).unwrap();
    let base = iv_logit_objective(0.3, &art, &data, 0).unwrap();
    art.z_hat.mapv_inplace(|z| -3.7 * z);
    let scaled = iv_logit_objective(0.3, &art, &data, 0).unwrap();
    assert!((base - scaled).abs() <= 1e-12 * base.max(1e-300));
    assert!(iv_logit_objective(est.alpha_check, &art, &data, 0).unwrap() < 1e-12);
}

#[test]
fn degenerate_inputs_are_rejected() {
    let (data, _) = gen_dgp::<f64>(&DgpSpec::sparse(Family::Logit, 200, 10, 3, 0.5), 1).unwrap();
    let mut x = data.x().to_owned();
    x.column_mut(0).fill(2.0);
    let flat = Dataset::new("y", data.y().to_owned(), x.clone(), data.columns().to_vec()).unwrap();
    assert!(matches!(
        dml_logit(&flat, 0, &logit()),
        Err(Error::DegenerateTreatment(_))
    ));
    assert!(matches!(
        dml_linear(&flat, 0, &linear()),
        Err(Error::DegenerateTreatment(_))
    ));

    let ones = Dataset::new(
        "y",
        Array1::ones(200),
        data.x().to_owned(),
        data.columns().to_vec(),
    )
    .unwrap();
    assert!(matches!(
        dml_logit(&ones, 0, &logit()),
        Err(Error::DegenerateOutcome)
    ));

    // treatment identical to a control
    let mut x = data.x().to_owned();
    let c = x.column(3).to_owned();
    x.column_mut(0).assign(&c);
    let copy = Dataset::new("y", data.y().to_owned(), x, data.columns().to_vec()).unwrap();
    let none = DmlConfig {
        penalty: PenaltyConfig::fixed(1e-3),
        ..logit()
    };
    assert!(matches!(
        dml_logit(&copy, 0, &none),
        Err(Error::WeakInstrument { .. }) | Err(Error::RankDeficient { .. })
    ));
    let none = DmlConfig {
        family: Family::Linear,
        ..none
    };
    assert!(matches!(
        dml_linear(&copy, 0, &none),
        Err(Error::WeakInstrument { .. }) | Err(Error::RankDeficient { .. })
    ));

    let spec = DgpSpec {
        family: Family::Linear,
        ..DgpSpec::sparse(Family::Linear, 100, 5, 2, 0.5)
    };
    let (lin, _) = gen_dgp::<f64>(&spec, 2).unwrap();
    assert!(dml_logit(&lin, 0, &logit()).is_err());
}

#[test]
fn zero_penalty_double_selection_is_full_ols() {
    for seed in 0..5 {
        let (data, _) =
            gen_dgp::<f64>(&DgpSpec::sparse(Family::Linear, 120, 8, 3, 0.7), seed).unwrap();
        let config = DmlConfig {
            penalty: PenaltyConfig::fixed(0.0),
            ..linear()
        };
        let est = dml_linear(&data, 0, &config).unwrap();
        let full = common::ols(&data.x().to_owned(), &data.y().to_owned());
        assert!((est.alpha_check - full[1]).abs() <= 1e-10, "seed {seed}");
        let naive = naive_fit(&data, 0, &config).unwrap();
        assert!((naive.alpha_check - full[1]).abs() <= 1e-10);
    }
}

#[test]
fn double_selection_beats_single_selection_under_confounding() {
    let spec = DgpSpec::confounded(500, 200, 0.5);
    let (mut dml, mut naive) = (0.0, 0.0);
    for seed in 0..100 {
        let (data, _) = gen_dgp::<f64>(&spec, seed).unwrap();
        dml += dml_linear(&data, 0, &linear()).unwrap().alpha_check - 0.5;
        naive += naive_fit(&data, 0, &linear()).unwrap().alpha_check - 0.5;
    }
    assert!(
        (naive / 100.0).abs() >= 2.0 * (dml / 100.0).abs(),
        "naive {naive}, dml {dml}"
    );
}

#[test]
fn estimates_are_bit_reproducible() {
    let (data, _) = gen_dgp::<f64>(&DgpSpec::sparse(Family::Logit, 300, 30, 5, 0.5), 4).unwrap();
    assert_eq!(
        dml_logit(&data, 0, &logit()).unwrap(),
        dml_logit(&data, 0, &logit()).unwrap()
    );
    let cv = DmlConfig {
        penalty: PenaltyConfig::cross_validation(),
        seed: 17,
        ..logit()
    };
    assert_eq!(
        dml_logit(&data, 0, &cv).unwrap(),
        dml_logit(&data, 0, &cv).unwrap()
    );
}

#[test]
fn single_treatment_list_reduces_to_the_single_call() {
    let (data, _) = gen_dgp::<f64>(&DgpSpec::sparse(Family::Logit, 300, 20, 3, 0.5), 5).unwrap();
    let out = dml_multi(&data, &[0], &logit()).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(
        out[0].result.as_ref().unwrap(),
        &dml_logit(&data, 0, &logit()).unwrap()
    );
    assert!(matches!(
        dml_multi(&data, &[0, 0], &logit()),
        Err(Error::InvalidArgument(_))
    ));
    assert!(matches!(
        dml_multi(&data, &[], &logit()),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn failures_are_tagged_and_fail_fast_stops() {
    let (data, _) = gen_dgp::<f64>(&DgpSpec::sparse(Family::Logit, 300, 6, 3, 0.5), 6).unwrap();
    let mut x = data.x().to_owned();
    x.column_mut(2).fill(1.0);
    let data = Dataset::new("y", data.y().to_owned(), x, data.columns().to_vec()).unwrap();
    let out = dml_multi(&data, &[0, 2], &logit()).unwrap();
    assert!(out[0].result.is_ok());
    let err = out[1].result.as_ref().unwrap_err().to_string();
    assert!(err.starts_with("treatment `x2`"), "{err}");
    let ff = DmlConfig {
        fail_fast: true,
        ..logit()
    };
    assert!(matches!(
        dml_multi(&data, &[0, 2], &ff),
        Err(Error::Treatment { .. })
    ));
}

#[test]
fn survey_layout_gives_a_26_row_table_in_order() {
    let raw = survey_table(1500, 8, 0.0);
    let data: Dataset<f64> = encode(&raw, &survey_schema()).unwrap();
    let treatments = data.treatment_indices();
    assert_eq!(treatments.len(), 26);
    let serial = dml_multi(&data, &treatments, &logit()).unwrap();
    let parallel = dml_multi(&data, &treatments, &DmlConfig { jobs: 4, ..logit() }).unwrap();
    let table = ResultTable::new(&data, &logit(), &serial);
    assert_eq!(table.rows.len(), 26);
    assert!(!table.multiplicity_adjusted);
    for (row, &t) in table.rows.iter().zip(&treatments) {
        assert_eq!(row.treatment, data.columns()[t].name);
    }
    assert_eq!(table, ResultTable::new(&data, &logit(), &parallel));
    assert_eq!(
        ResultTable::from_toml(&table.to_toml().unwrap()).unwrap(),
        table
    );
}
