use ndarray::{Array1, ArrayView1, ArrayView2};

use super::cd::{CdState, Quadratic};
use super::{columns, LassoFit, Penalty, SolverOptions};
use crate::error::{Error, Result};
use crate::numerics::wls_fit;
use crate::Scalar;

fn check_dims<T: Scalar>(x: ArrayView2<T>, y: ArrayView1<T>, scale: ArrayView1<T>) -> Result<()> {
    let n = x.nrows();
    if y.len() != n || scale.len() != n {
        return Err(Error::invalid(format!(
            "design has {n} rows, response {} and row scales {}",
            y.len(),
            scale.len()
        )));
    }
    if n == 0 {
        return Err(Error::invalid("empty design"));
    }
    if scale.iter().any(|&s| !(s >= T::zero()) || !s.is_finite()) {
        return Err(Error::invalid("row scales must be finite and nonnegative"));
    }
    if scale.iter().all(|&s| s == T::zero()) {
        return Err(Error::invalid("all row scales are zero"));
    }
    Ok(())
}

pub(crate) fn lasso_wls_from<T: Scalar>(
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    scale: ArrayView1<T>,
    penalty: &Penalty<T>,
    opts: &SolverOptions<T>,
    init: Option<(T, &Array1<T>)>,
) -> Result<LassoFit<T>> {
    check_dims(x, y, scale)?;
    let (n, p) = x.dim();
    penalty.validate(p)?;
    let cols = columns(x);
    let w: Vec<T> = scale.iter().map(|&s| s * s).collect();
    let kappa = penalty.thresholds(n, T::of(0.5));
    let problem = Quadratic {
        cols: &cols,
        w: &w,
        kappa: &kappa,
    };

    let (intercept, theta) = match init {
        Some((b0, t)) => (b0, t.to_vec()),
        None => {
            let wsum: T = w.iter().copied().sum();
            let mean = w.iter().zip(y.iter()).map(|(&wi, &yi)| wi * yi).sum::<T>() / wsum;
            (mean, vec![T::zero(); p])
        }
    };
    let mut resid: Vec<T> = y.iter().map(|&yi| yi - intercept).collect();
    for (j, &t) in theta.iter().enumerate() {
        if t != T::zero() {
            for (r, &xv) in resid.iter_mut().zip(&cols[j]) {
                *r -= t * xv;
            }
        }
    }
    let mut state = CdState {
        intercept,
        theta,
        resid,
    };
    let mut path = Vec::new();
    let outcome = problem.solve(&mut state, opts.tol, opts.max_sweeps, Some(&mut path));

    let two = T::of(2.0);
    let objective_path: Vec<T> = path.into_iter().map(|v| v * two).collect();
    let coef = Array1::from(state.theta);
    let mut warnings = Vec::new();
    if !outcome.converged {
        warnings.push(format!(
            "least-squares lasso did not converge within {} sweeps",
            opts.max_sweeps
        ));
    }
    Ok(LassoFit {
        intercept: state.intercept,
        support: LassoFit::support_of(&coef, penalty),
        coef,
        penalty: penalty.lambda,
        loadings: penalty.loadings.clone(),
        unpenalized: penalty.unpenalized.clone(),
        iterations: outcome.sweeps,
        converged: outcome.converged,
        objective: objective_path.last().copied().unwrap_or_else(T::nan),
        objective_path,
        warnings,
    })
}

/// Weighted least-squares lasso with an unpenalized intercept.
///
/// Minimizes `mean_i scale_i^2 (y_i - b0 - x_i' theta)^2 + (lambda/n) sum_j loading_j |theta_j|`
/// by cyclic coordinate descent: a full sweep, then sweeps over the active set until
/// stable, repeated until a full sweep moves no coefficient by `opts.tol`.
pub fn lasso_wls<T: Scalar>(
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    scale: ArrayView1<T>,
    penalty: &Penalty<T>,
    opts: &SolverOptions<T>,
) -> Result<LassoFit<T>> {
    lasso_wls_from(x, y, scale, penalty, opts, None)
}

/// Residual `y - b0 - X b` after the unpenalized-only fit (intercept plus `unpenalized`).
pub(crate) fn null_residual_wls<T: Scalar>(
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    scale: ArrayView1<T>,
    unpenalized: &[usize],
) -> Result<Array1<T>> {
    let n = x.nrows();
    let mut design = ndarray::Array2::<T>::ones((n, unpenalized.len() + 1));
    for (k, &j) in unpenalized.iter().enumerate() {
        design.column_mut(k + 1).assign(&x.column(j));
    }
    let w = scale.mapv(|s| s * s);
    let b = wls_fit(design.view(), y, w.view())?;
    Ok(&y - &design.dot(&b))
}

/// Smallest penalty level at which every penalized coefficient is zero:
/// `max_j |2 sum_i scale_i^2 r_i x_ij| / loading_j` with `r` the unpenalized-only residual.
pub fn lambda_max_wls<T: Scalar>(
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    scale: ArrayView1<T>,
    loadings: ArrayView1<T>,
    unpenalized: &[usize],
) -> Result<T> {
    check_dims(x, y, scale)?;
    let r = null_residual_wls(x, y, scale, unpenalized)?;
    let w = scale.mapv(|s| s * s);
    let wr = &w * &r;
    let two = T::of(2.0);
    Ok((0..x.ncols())
        .filter(|j| !unpenalized.contains(j))
        .map(|j| (two * x.column(j).dot(&wr)).abs() / loadings[j])
        .fold(T::zero(), T::max))
}

/// Worst KKT violations of a least-squares lasso fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kkt<T> {
    /// Largest stationarity residual on the support and unpenalized coordinates,
    /// relative to the coordinate's gradient scale.
    pub stationarity: T,
    /// Largest `|gradient_j| / (lambda * loading_j)` off the support.
    pub outside_ratio: T,
}

/// KKT certificate for [`lasso_wls`] in sum form:
/// `2 sum_i scale_i^2 r_i x_ij = lambda loading_j sign(theta_j)` on the support and
/// `|2 sum_i scale_i^2 r_i x_ij| <= lambda loading_j` off it.
pub fn kkt_wls<T: Scalar>(
    x: ArrayView2<T>,
    y: ArrayView1<T>,
    scale: ArrayView1<T>,
    fit: &LassoFit<T>,
) -> Kkt<T> {
    let resid = &y - &(x.dot(&fit.coef) + fit.intercept);
    let w = scale.mapv(|s| s * s);
    let wr = &w * &resid;
    let r_norm = (&scale * &resid).mapv(|v| v * v).sum().sqrt();
    let two = T::of(2.0);
    let mut stationarity = T::zero();
    let mut outside_ratio = T::zero();
    for j in 0..x.ncols() {
        let grad = two * x.column(j).dot(&wr);
        let col_norm = (&scale * &x.column(j)).mapv(|v| v * v).sum().sqrt();
        let pen = fit.penalty * fit.loadings[j];
        let penalized = !fit.unpenalized.contains(&j);
        let scale_j = T::one().max(pen).max(two * col_norm * r_norm);
        if !penalized {
            stationarity = stationarity.max(grad.abs() / scale_j);
        } else if fit.coef[j] != T::zero() {
            let v = (grad - pen * fit.coef[j].signum()).abs() / scale_j;
            stationarity = stationarity.max(v);
        } else if pen > T::zero() {
            outside_ratio = outside_ratio.max(grad.abs() / pen);
        } else if grad != T::zero() {
            outside_ratio = T::infinity();
        }
    }
    Kkt {
        stationarity,
        outside_ratio,
    }
}
