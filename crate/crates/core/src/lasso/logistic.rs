use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::cd::{CdState, Quadratic};
use super::{columns, LassoFit, Penalty, SolverOptions};
use crate::error::{Error, Result};
use crate::numerics::{mean_logistic_loss, sigmoid, softplus, wls_fit};
use crate::Scalar;

/// Working weights of the quadratic approximation never drop below this.
const WORKING_WEIGHT_FLOOR: f64 = 1e-6;
/// `|eta|` beyond this signals (quasi-)separation.
const SEPARATION_ETA: f64 = 30.0;

pub(crate) fn check_binary<T: Scalar>(y: ArrayView1<T>) -> Result<()> {
    if y.iter().any(|&v| v != T::zero() && v != T::one()) {
        return Err(Error::invalid("logistic outcome must be coded 0/1"));
    }
    Ok(())
}

fn logit<T: Scalar>(p: T) -> T {
    let eps = T::of(1e-6);
    let p = p.max(eps).min(T::one() - eps);
    (p / (T::one() - p)).ln()
}

struct Logistic<'a, T> {
    cols: &'a [Vec<T>],
    y: ArrayView1<'a, T>,
    kappa: &'a [Option<T>],
}

impl<T: Scalar> Logistic<'_, T> {
    fn eta(&self, b0: T, theta: &[T]) -> Vec<T> {
        let mut eta = vec![b0; self.y.len()];
        for (j, &t) in theta.iter().enumerate() {
            if t != T::zero() {
                for (e, &x) in eta.iter_mut().zip(&self.cols[j]) {
                    *e += t * x;
                }
            }
        }
        eta
    }

    fn objective(&self, eta: &[T], theta: &[T]) -> T {
        let loss = mean_logistic_loss(eta, self.y);
        let pen: T = theta
            .iter()
            .zip(self.kappa)
            .filter_map(|(&t, k)| k.map(|k| k * t.abs()))
            .sum();
        loss + pen
    }

    /// Minimizes the penalized weighted quadratic model around `eta`.
    fn quadratic_step(
        &self,
        eta: &[T],
        b0: T,
        theta: &[T],
        curvature: Option<T>,
        tol: T,
    ) -> (T, Vec<T>) {
        let floor = T::of(WORKING_WEIGHT_FLOOR);
        let (w, resid): (Vec<T>, Vec<T>) = eta
            .iter()
            .zip(self.y.iter())
            .map(|(&e, &y)| {
                let p = sigmoid(e);
                let w = curvature.unwrap_or_else(|| (p * (T::one() - p)).max(floor));
                (w, (y - p) / w)
            })
            .unzip();
        let quad = Quadratic {
            cols: self.cols,
            w: &w,
            kappa: self.kappa,
        };
        let mut st = CdState {
            intercept: b0,
            theta: theta.to_vec(),
            resid,
        };
        quad.solve(&mut st, tol, 1_000, None);
        (st.intercept, st.theta)
    }
}

pub(crate) fn lasso_logistic_from<T: Scalar>(
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    penalty: &Penalty<T>,
    opts: &SolverOptions<T>,
    init: Option<(T, &Array1<T>)>,
) -> Result<LassoFit<T>> {
    let (n, p) = x.dim();
    if y.len() != n || n == 0 {
        return Err(Error::invalid(format!(
            "design has {n} rows, outcome {}",
            y.len()
        )));
    }
    check_binary(y)?;
    penalty.validate(p)?;
    let cols = columns(x);
    let kappa = penalty.thresholds(n, T::one());
    let model = Logistic {
        cols: &cols,
        y,
        kappa: &kappa,
    };

    let (mut b0, mut theta) = match init {
        Some((b, t)) => (b, t.to_vec()),
        None => (logit(y.sum() / T::of(n as f64)), vec![T::zero(); p]),
    };
    let mut eta = model.eta(b0, &theta);
    let mut obj = model.objective(&eta, &theta);
    let mut path = vec![obj];
    let mut warnings = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let inner_tol = opts.tol * T::of(0.1);

    while iterations < opts.max_sweeps {
        iterations += 1;
        let (nb0, ntheta) = model.quadratic_step(&eta, b0, &theta, None, inner_tol);
        let db0 = nb0 - b0;
        let dtheta: Vec<T> = ntheta.iter().zip(&theta).map(|(&a, &b)| a - b).collect();
        let step = dtheta.iter().fold(db0.abs(), |m, d| m.max(d.abs()));
        if step < opts.tol {
            converged = true;
            break;
        }

        // Backtracking along the Newton direction; the objective may never increase.
        let mut accepted = None;
        let mut t = T::one();
        for _ in 0..40 {
            let cb0 = b0 + t * db0;
            let ctheta: Vec<T> = theta
                .iter()
                .zip(&dtheta)
                .map(|(&a, &d)| a + t * d)
                .collect();
            let ceta = model.eta(cb0, &ctheta);
            let cobj = model.objective(&ceta, &ctheta);
            if cobj <= obj {
                accepted = Some((cb0, ctheta, ceta, cobj));
                break;
            }
            t *= T::of(0.5);
        }
        let (cb0, ctheta, ceta, cobj) = match accepted {
            Some(a) => a,
            None => {
                // Majorize with the global curvature bound 1/4; the step cannot increase the objective.
                let (mb0, mtheta) =
                    model.quadratic_step(&eta, b0, &theta, Some(T::of(0.25)), inner_tol);
                let meta = model.eta(mb0, &mtheta);
                let mobj = model.objective(&meta, &mtheta);
                if mobj > obj {
                    warnings.push(
                        "penalized logistic solver stalled: no descent step found".to_string(),
                    );
                    break;
                }
                (mb0, mtheta, meta, mobj)
            }
        };
        let moved = ctheta
            .iter()
            .zip(&theta)
            .fold((cb0 - b0).abs(), |m, (&a, &b)| m.max((a - b).abs()));
        b0 = cb0;
        theta = ctheta;
        eta = ceta;
        obj = cobj;
        path.push(obj);
        if moved < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged && warnings.is_empty() {
        warnings.push(format!(
            "penalized logistic solver did not converge within {} iterations",
            opts.max_sweeps
        ));
    }
    let max_eta = eta.iter().fold(T::zero(), |m, e| m.max(e.abs()));
    if max_eta > T::of(SEPARATION_ETA) {
        warnings.push(format!(
            "possible separation: linear index reached |eta| = {:.1}; coefficients are held only by the penalty",
            max_eta.as_f64()
        ));
    }
    let coef = Array1::from(theta);
    Ok(LassoFit {
        intercept: b0,
        support: LassoFit::support_of(&coef, penalty),
        coef,
        penalty: penalty.lambda,
        loadings: penalty.loadings.clone(),
        unpenalized: penalty.unpenalized.clone(),
        iterations,
        converged,
        objective: obj,
        objective_path: path,
        warnings,
    })
}

/// l1-penalized logistic regression with an unpenalized intercept.
///
/// Minimizes `mean_i [log(1 + exp(eta_i)) - y_i eta_i] + (lambda/n) sum_j loading_j |theta_j|`
/// by proximal Newton steps (coordinate descent on the penalized quadratic model)
/// with backtracking, falling back to the curvature-1/4 majorizer when backtracking fails.
pub fn lasso_logistic<T: Scalar>(
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    penalty: &Penalty<T>,
    opts: &SolverOptions<T>,
) -> Result<LassoFit<T>> {
    lasso_logistic_from(x, y, penalty, opts, None)
}

/// Gradient of the mean logistic loss at `(intercept, coef)`, one entry per column.
fn logistic_gradient<T: Scalar>(
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    intercept: T,
    coef: &Array1<T>,
) -> Array1<T> {
    let n = T::of(x.nrows() as f64);
    let eta = x.dot(coef) + intercept;
    let g = Array1::from_iter(eta.iter().zip(y.iter()).map(|(&e, &yi)| sigmoid(e) - yi));
    x.t().dot(&g) / n
}

/// KKT certificate for [`lasso_logistic`] with gradient `mean[(G(eta_i) - y_i) x_ij]`.
pub fn kkt_logistic<T: Scalar>(
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    fit: &LassoFit<T>,
) -> super::wls::Kkt<T> {
    let n = T::of(x.nrows() as f64);
    let grad = logistic_gradient(x, y, fit.intercept, &fit.coef);
    let mut stationarity = T::zero();
    let mut outside_ratio = T::zero();
    for j in 0..x.ncols() {
        let pen = fit.penalty * fit.loadings[j] / n;
        let penalized = !fit.unpenalized.contains(&j);
        let scale = T::one().max(pen);
        if !penalized {
            stationarity = stationarity.max(grad[j].abs() / scale);
        } else if fit.coef[j] != T::zero() {
            stationarity = stationarity.max((grad[j] + pen * fit.coef[j].signum()).abs() / scale);
        } else if pen > T::zero() {
            outside_ratio = outside_ratio.max(grad[j].abs() / pen);
        } else if grad[j] != T::zero() {
            outside_ratio = T::infinity();
        }
    }
    super::wls::Kkt {
        stationarity,
        outside_ratio,
    }
}

/// Smallest penalty at which every penalized coefficient of [`lasso_logistic`] is zero.
pub fn lambda_max_logistic<T: Scalar>(
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    loadings: ArrayView1<T>,
    unpenalized: &[usize],
) -> Result<T> {
    check_binary(y)?;
    let n = x.nrows();
    let sub = x.select(ndarray::Axis(1), unpenalized);
    let null = logistic_mle(sub.view(), y)?;
    let mut coef = Array1::zeros(x.ncols());
    for (k, &j) in unpenalized.iter().enumerate() {
        coef[j] = null.coef[k];
    }
    let grad = logistic_gradient(x, y, null.intercept, &coef);
    let nn = T::of(n as f64);
    Ok((0..x.ncols())
        .filter(|j| !unpenalized.contains(j))
        .map(|j| grad[j].abs() * nn / loadings[j])
        .fold(T::zero(), T::max))
}

/// Unpenalized logistic fit with intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct MleFit<T> {
    pub intercept: T,
    pub coef: Array1<T>,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

/// Maximum-likelihood logistic regression of `y` on an intercept and the columns of `x`,
/// by Newton-Raphson with step halving. Rank errors label the intercept `col 0`
/// and column `j` of `x` as `col j+1`.
pub fn logistic_mle<T: Scalar>(x: ArrayView2<T>, y: ArrayView1<T>) -> Result<MleFit<T>> {
    let (n, k) = x.dim();
    if y.len() != n || n == 0 {
        return Err(Error::invalid(format!(
            "design has {n} rows, outcome {}",
            y.len()
        )));
    }
    check_binary(y)?;
    let mut design = Array2::<T>::ones((n, k + 1));
    design.slice_mut(ndarray::s![.., 1..]).assign(&x);
    let loss = |b: &Array1<T>| -> T {
        let eta = design.dot(b);
        eta.iter()
            .zip(y.iter())
            .map(|(&e, &yi)| softplus(e) - yi * e)
            .sum::<T>()
            / T::of(n as f64)
    };
    let mut b = Array1::<T>::zeros(k + 1);
    b[0] = logit(y.sum() / T::of(n as f64));
    let mut current = loss(&b);
    let tol = T::solver_tol() * T::of(0.01);
    let mut converged = false;
    let mut iterations = 0;
    let mut warnings = Vec::new();
    let floor = T::of(1e-10);
    while iterations < 100 {
        iterations += 1;
        let eta = design.dot(&b);
        let p = eta.mapv(sigmoid);
        let w = p.mapv(|pi| (pi * (T::one() - pi)).max(floor));
        let z = Array1::from_iter((0..n).map(|i| eta[i] + (y[i] - p[i]) / w[i]));
        let target = wls_fit(design.view(), z.view(), w.view())?;
        let dir = &target - &b;
        let step = dir.iter().fold(T::zero(), |m, d| m.max(d.abs()));
        let mut t = T::one();
        let mut moved = false;
        for _ in 0..40 {
            let cand = &b + &(&dir * t);
            let l = loss(&cand);
            if l <= current {
                b = cand;
                current = l;
                moved = true;
                break;
            }
            t *= T::of(0.5);
        }
        if step < tol || !moved {
            converged = step < tol || step * t < tol;
            break;
        }
    }
    if !converged {
        warnings.push(format!(
            "logistic refit did not converge in {iterations} Newton steps"
        ));
    }
    let max_eta = design.dot(&b).iter().fold(T::zero(), |m, e| m.max(e.abs()));
    if max_eta > T::of(SEPARATION_ETA) {
        warnings.push(format!(
            "possible separation in logistic refit: |eta| = {:.1}",
            max_eta.as_f64()
        ));
    }
    Ok(MleFit {
        intercept: b[0],
        coef: b.slice(ndarray::s![1..]).to_owned(),
        iterations,
        converged,
        warnings,
    })
}
