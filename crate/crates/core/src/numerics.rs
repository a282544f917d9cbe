//! Scalar and matrix primitives shared by every estimator: the logistic link,
//! the logistic negative log-likelihood, weighted least squares, and the
//! standard normal distribution.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, weighted_gram, PivotedQr};
use crate::Scalar;

/// Probabilities entering variance weights are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-10;

/// Relative floor on the weighted Gram spectrum below which a design is rank deficient.
pub const RIDGE_FLOOR: f64 = 1e-10;

/// One row of a treatment-effect problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation<T> {
    pub y: T,
    pub d: T,
    pub x: Vec<T>,
}

/// Intercept, treatment coefficient and control coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector<T> {
    pub intercept: T,
    pub alpha: T,
    pub beta: Vec<T>,
}

impl<T: Scalar> CoefficientVector<T> {
    pub fn zeros(p: usize) -> Self {
        CoefficientVector {
            intercept: T::zero(),
            alpha: T::zero(),
            beta: vec![T::zero(); p],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.intercept.is_finite()
            && self.alpha.is_finite()
            && self.beta.iter().all(|b| b.is_finite())
    }

    /// Linear index `intercept + d * alpha + x' beta`.
    pub fn index(&self, d: T, x: &[T]) -> T {
        self.intercept + d * self.alpha + x.iter().zip(&self.beta).map(|(&a, &b)| a * b).sum::<T>()
    }

    /// Convex combination `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &Self, lambda: T) -> Self {
        let mu = T::one() - lambda;
        CoefficientVector {
            intercept: lambda * self.intercept + mu * other.intercept,
            alpha: lambda * self.alpha + mu * other.alpha,
            beta: self
                .beta
                .iter()
                .zip(&other.beta)
                .map(|(&a, &b)| lambda * a + mu * b)
                .collect(),
        }
    }
}

fn finite<T: Scalar>(t: T, what: &str) -> Result<T> {
    if t.is_finite() {
        Ok(t)
    } else {
        Err(Error::invalid(format!("{what} must be finite, got {t}")))
    }
}

/// Logistic link `exp(t) / (1 + exp(t))`.
pub fn link<T: Scalar>(t: T) -> Result<T> {
    finite(t, "link argument")?;
    Ok(sigmoid(t))
}

/// Derivative of the logistic link, `G(t) (1 - G(t))`.
pub fn link_deriv<T: Scalar>(t: T) -> Result<T> {
    finite(t, "link argument")?;
    Ok(sigmoid_deriv(t))
}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(t: T) -> T {
    if t >= T::zero() {
        T::one() / (T::one() + (-t).exp())
    } else {
        let e = t.exp();
        e / (T::one() + e)
    }
}

#[inline]
pub(crate) fn sigmoid_deriv<T: Scalar>(t: T) -> T {
    let e = (-t.abs()).exp();
    let d = T::one() + e;
    e / (d * d)
}

/// `log(1 + exp(t))` without overflow.
#[inline]
pub(crate) fn softplus<T: Scalar>(t: T) -> T {
    t.max(T::zero()) + (-t.abs()).exp().ln_1p()
}

/// Clamps a probability into `[PROB_CLAMP, 1 - PROB_CLAMP]`.
#[inline]
pub fn clamp_prob<T: Scalar>(p: T) -> T {
    let eps = T::of(PROB_CLAMP);
    p.max(eps).min(T::one() - eps)
}

/// Mean logistic loss `log(1 + exp(eta)) - y * eta` over precomputed indices.
pub(crate) fn mean_logistic_loss<T: Scalar>(eta: &[T], y: ArrayView1<T>) -> T {
    let n = T::of(eta.len() as f64);
    eta.iter()
        .zip(y.iter())
        .map(|(&e, &yi)| softplus(e) - yi * e)
        .sum::<T>()
        / n
}

/// Empirical mean of the logistic negative log-likelihood.
///
/// Each term is `log(1 + exp(eta)) - y * eta` with
/// `eta = intercept + d * alpha + x' beta`.
pub fn neg_loglik<T: Scalar>(coeffs: &CoefficientVector<T>, data: &[Observation<T>]) -> Result<T> {
    if data.is_empty() {
        return Err(Error::invalid("neg_loglik needs at least one observation"));
    }
    let p = coeffs.beta.len();
    let mut total = T::zero();
    for (i, obs) in data.iter().enumerate() {
        if obs.x.len() != p {
            return Err(Error::invalid(format!(
                "observation {i} has {} controls, coefficients have {p}",
                obs.x.len()
            )));
        }
        let eta = coeffs.index(obs.d, &obs.x);
        total += softplus(eta) - obs.y * eta;
    }
    Ok(total / T::of(data.len() as f64))
}

/// What `wls_fit_with` does when the weighted design is numerically rank deficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankPolicy {
    /// Fail with the offending columns.
    #[default]
    Error,
    /// Add `RIDGE_FLOOR * trace / k` to the Gram diagonal and report it.
    RidgeFloor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WlsSolution<T> {
    pub coef: Array1<T>,
    /// Ridge added to the Gram diagonal, when the floor activated.
    pub ridge: Option<T>,
}

/// Weighted least squares: `argmin_b sum_i w_i (y_i - x_i' b)^2`.
pub fn wls_fit<T: Scalar>(
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    w: ArrayView1<T>,
) -> Result<Array1<T>> {
    wls_fit_with(x, y, w, RankPolicy::Error).map(|s| s.coef)
}

pub fn wls_fit_with<T: Scalar>(
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    w: ArrayView1<T>,
    policy: RankPolicy,
) -> Result<WlsSolution<T>> {
    let (n, k) = x.dim();
    if y.len() != n || w.len() != n {
        return Err(Error::invalid(format!(
            "wls_fit: design has {n} rows, response {} and weights {}",
            y.len(),
            w.len()
        )));
    }
    if w.iter().any(|&wi| !(wi >= T::zero()) || !wi.is_finite()) {
        return Err(Error::invalid(
            "wls_fit: weights must be finite and nonnegative",
        ));
    }
    if k == 0 {
        return Ok(WlsSolution {
            coef: Array1::zeros(0),
            ridge: None,
        });
    }
    let sw = w.mapv(|wi| wi.sqrt());
    let mut a = x.to_owned();
    for (mut row, &s) in a.rows_mut().into_iter().zip(sw.iter()) {
        row *= s;
    }
    let b = &y * &sw;
    let qr = PivotedQr::new(a.view(), T::of(RIDGE_FLOOR));
    if qr.rank() == k {
        return Ok(WlsSolution {
            coef: qr.solve(b.view()),
            ridge: None,
        });
    }
    match policy {
        RankPolicy::Error => Err(Error::RankDeficient {
            columns: qr
                .deficient_columns()
                .iter()
                .map(|j| format!("col {j}"))
                .collect(),
        }),
        RankPolicy::RidgeFloor => {
            let mut gram = weighted_gram(x, w);
            let tau = T::of(RIDGE_FLOOR) * qr.trace() / T::of(k as f64);
            let tau = if tau > T::zero() {
                tau
            } else {
                T::of(RIDGE_FLOOR)
            };
            for j in 0..k {
                gram[[j, j]] += tau;
            }
            let rhs = x.t().dot(&(&y * &w));
            let l = cholesky(gram.view()).ok_or_else(|| Error::RankDeficient {
                columns: qr
                    .deficient_columns()
                    .iter()
                    .map(|j| format!("col {j}"))
                    .collect(),
            })?;
            Ok(WlsSolution {
                coef: cholesky_solve(&l, rhs.view()),
                ridge: Some(tau),
            })
        }
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

/// Upper tail `1 - Phi(x)`, accurate far into the tail.
pub fn normal_sf(x: f64) -> f64 {
    std_normal().sf(x)
}

/// Standard normal quantile function.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!(
            "normal quantile needs p in (0, 1), got {p}"
        )));
    }
    Ok(std_normal().inverse_cdf(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    #[test]
    fn link_values() {
        assert_eq!(link(0.0).unwrap(), 0.5);
        assert_abs_diff_eq!(link(3f64.ln()).unwrap(), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(link(-(3f64.ln())).unwrap(), 0.25, epsilon = 1e-15);
        assert!(link(f64::NAN).is_err());
        assert!(link(f64::INFINITY).is_err());
        let hi = link(700.0f64).unwrap();
        let lo = link(-700.0f64).unwrap();
        assert!(hi.is_finite() && lo.is_finite() && lo > 0.0);
    }

    #[test]
    fn link_deriv_values() {
        assert_eq!(link_deriv(0.0).unwrap(), 0.25);
        assert_abs_diff_eq!(link_deriv(3f64.ln()).unwrap(), 0.1875, epsilon = 1e-15);
        // e^-50 / (1 + e^-50)^2 = 1.9287498479639178e-22 to double precision.
        let v = link_deriv(50.0).unwrap();
        assert!(v > 0.0 && v < 1e-20);
        assert_abs_diff_eq!(v, 1.928749847963918e-22, epsilon = 1e-35);
        assert!(link_deriv(f64::NAN).is_err());
    }

    #[test]
    fn clamping_keeps_variance_positive() {
        let p = clamp_prob(link(800.0).unwrap());
        assert!(p < 1.0 && p * (1.0 - p) > 0.0);
    }

    #[test]
    fn neg_loglik_values() {
        let data: Vec<Observation<f64>> = (0..7)
            .map(|i| Observation {
                y: (i % 2) as f64,
                d: i as f64 * 0.3,
                x: vec![1.0, -2.0 + i as f64],
            })
            .collect();
        let zero = CoefficientVector::zeros(2);
        assert_abs_diff_eq!(
            neg_loglik(&zero, &data).unwrap(),
            2f64.ln(),
            epsilon = 1e-15
        );

        let c = CoefficientVector {
            intercept: 3f64.ln(),
            alpha: 0.0,
            beta: vec![],
        };
        let one = [Observation {
            y: 1.0,
            d: 0.0,
            x: vec![],
        }];
        assert_abs_diff_eq!(
            neg_loglik(&c, &one).unwrap(),
            (4.0f64 / 3.0).ln(),
            epsilon = 1e-15
        );

        let c = CoefficientVector {
            intercept: -50.0,
            alpha: 0.0,
            beta: vec![],
        };
        let zero_obs = [Observation {
            y: 0.0,
            d: 0.0,
            x: vec![],
        }];
        // log1p(e^-50) = 1.9287498479639178e-22
        assert_abs_diff_eq!(
            neg_loglik(&c, &zero_obs).unwrap(),
            1.9287498479639178e-22,
            epsilon = 1e-35
        );

        assert!(neg_loglik(&CoefficientVector::zeros(3), &data).is_err());
        assert!(neg_loglik::<f64>(&CoefficientVector::zeros(3), &[]).is_err());
    }

    #[test]
    fn wls_examples() {
        let x = Array2::<f64>::eye(2);
        let b = wls_fit(x.view(), array![3.0, 4.0].view(), array![1.0, 1.0].view()).unwrap();
        assert_eq!(b, array![3.0, 4.0]);

        let ones = Array2::<f64>::ones((3, 1));
        let y = array![1.0, 2.0, 3.0];
        let b = wls_fit(ones.view(), y.view(), array![1.0, 1.0, 1.0].view()).unwrap();
        assert_abs_diff_eq!(b[0], 2.0, epsilon = 1e-14);
        let b = wls_fit(ones.view(), y.view(), array![1.0, 0.0, 0.0].view()).unwrap();
        assert_abs_diff_eq!(b[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn wls_rank_error_names_columns() {
        let x = array![
            [1.0f64, 2.0, 1.0],
            [1.0, 2.0, 0.0],
            [1.0, 2.0, 5.0],
            [1.0, 2.0, 3.0]
        ];
        let y = array![1.0, 2.0, 3.0, 4.0];
        let w = Array1::ones(4);
        match wls_fit(x.view(), y.view(), w.view()) {
            Err(Error::RankDeficient { columns }) => {
                assert_eq!(columns.len(), 1);
                assert!(columns[0] == "col 0" || columns[0] == "col 1");
            }
            other => panic!("expected rank error, got {other:?}"),
        }
        let sol = wls_fit_with(x.view(), y.view(), w.view(), RankPolicy::RidgeFloor).unwrap();
        assert!(sol.ridge.is_some());
        let fitted = x.dot(&sol.coef);
        let resid = &y - &fitted;
        // ridge solution still nearly satisfies the normal equations
        assert!(x.t().dot(&resid).iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn normal_quantile_bounds() {
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
        assert_abs_diff_eq!(
            normal_quantile(0.975).unwrap(),
            1.959963984540054,
            epsilon = 1e-12
        );
    }

    #[test]
    fn f32_link_is_usable() {
        assert_eq!(link(0.0f32).unwrap(), 0.5);
        assert!((link_deriv(1.0f32).unwrap() - 0.19661193).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn link_symmetry(t in -700.0f64..700.0) {
            let s = link(t).unwrap() + link(-t).unwrap();
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn link_deriv_matches_product(t in -40.0f64..40.0) {
            let g = link(t).unwrap();
            prop_assert!((link_deriv(t).unwrap() - g * (1.0 - g)).abs() <= 1e-12);
            prop_assert!(link_deriv(t).unwrap() <= 0.25);
        }

        #[test]
        fn neg_loglik_convex_on_segments(
            seed_a in proptest::collection::vec(-3.0f64..3.0, 5),
            seed_b in proptest::collection::vec(-3.0f64..3.0, 5),
            lam in 0.01f64..0.99,
            rows in proptest::collection::vec((0u8..2, -2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0), 1..20),
        ) {
            let data: Vec<Observation<f64>> = rows
                .iter()
                .map(|&(y, d, x1, x2)| Observation { y: y as f64, d, x: vec![x1, x2, x1 * x2] })
                .collect();
            let a = CoefficientVector { intercept: seed_a[0], alpha: seed_a[1], beta: seed_a[2..].to_vec() };
            let b = CoefficientVector { intercept: seed_b[0], alpha: seed_b[1], beta: seed_b[2..].to_vec() };
            let mid = neg_loglik(&a.mix(&b, lam), &data).unwrap();
            let chord = lam * neg_loglik(&a, &data).unwrap() + (1.0 - lam) * neg_loglik(&b, &data).unwrap();
            prop_assert!(mid <= chord + 1e-10);
        }
    }
}
