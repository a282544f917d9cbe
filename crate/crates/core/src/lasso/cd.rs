//! Weighted-quadratic coordinate descent shared by the least-squares and logistic solvers.
//!
//! Minimizes `(1/2n) sum_i w_i (z_i - b0 - x_i' theta)^2 + sum_j kappa_j |theta_j|`
//! with an unpenalized intercept; `kappa_j = None` leaves coordinate `j` unpenalized.

use ndarray::{Array1, Array2};

use crate::linalg::{cholesky, cholesky_solve};
use crate::Scalar;

pub(crate) struct Quadratic<'a, T> {
    /// Design columns, each of length n.
    pub cols: &'a [Vec<T>],
    pub w: &'a [T],
    pub kappa: &'a [Option<T>],
}

pub(crate) struct CdState<T> {
    pub intercept: T,
    pub theta: Vec<T>,
    /// `z - b0 - X theta`
    pub resid: Vec<T>,
}

pub(crate) struct CdOutcome {
    pub sweeps: usize,
    pub converged: bool,
}

#[inline]
pub(crate) fn shrink<T: Scalar>(z: T, t: T) -> T {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        T::zero()
    }
}

impl<T: Scalar> Quadratic<'_, T> {
    fn n(&self) -> T {
        T::of(self.w.len() as f64)
    }

    /// Current value of the quadratic objective.
    pub fn objective(&self, st: &CdState<T>) -> T {
        let fit: T = st
            .resid
            .iter()
            .zip(self.w)
            .map(|(&r, &w)| w * r * r)
            .sum::<T>()
            / (T::of(2.0) * self.n());
        let pen: T = st
            .theta
            .iter()
            .zip(self.kappa)
            .filter_map(|(&t, k)| k.map(|k| k * t.abs()))
            .sum();
        fit + pen
    }

    /// Runs full/active-set cycling until a full sweep moves no coefficient by `tol` or more.
    ///
    /// When `trace` is given, the objective after every sweep is appended to it.
    pub fn solve(
        &self,
        st: &mut CdState<T>,
        tol: T,
        max_sweeps: usize,
        mut trace: Option<&mut Vec<T>>,
    ) -> CdOutcome {
        let n = self.n();
        let wsum: T = self.w.iter().copied().sum();
        let curv: Vec<T> = self
            .cols
            .iter()
            .map(|c| c.iter().zip(self.w).map(|(&x, &w)| w * x * x).sum::<T>() / n)
            .collect();
        let p = self.cols.len();
        let all: Vec<usize> = (0..p).collect();
        let mut sweeps = 0;

        let sweep = |st: &mut CdState<T>, coords: &[usize]| -> T {
            let mut change = T::zero();
            if wsum > T::zero() {
                let shift = st.resid.iter().zip(self.w).map(|(&r, &w)| w * r).sum::<T>() / wsum;
                if shift != T::zero() {
                    st.intercept += shift;
                    st.resid.iter_mut().for_each(|r| *r -= shift);
                    change = shift.abs();
                }
            }
            for &j in coords {
                let a = curv[j];
                if a <= T::zero() {
                    continue;
                }
                let col = &self.cols[j];
                let old = st.theta[j];
                let g = col
                    .iter()
                    .zip(self.w)
                    .zip(&st.resid)
                    .map(|((&x, &w), &r)| w * x * r)
                    .sum::<T>()
                    / n
                    + a * old;
                let new = match self.kappa[j] {
                    Some(k) => shrink(g, k) / a,
                    None => g / a,
                };
                let delta = new - old;
                if delta != T::zero() {
                    st.theta[j] = new;
                    for (r, &x) in st.resid.iter_mut().zip(col) {
                        *r -= delta * x;
                    }
                    change = change.max(delta.abs());
                }
            }
            change
        };

        loop {
            if sweeps >= max_sweeps {
                return CdOutcome {
                    sweeps,
                    converged: false,
                };
            }
            let change = sweep(st, &all);
            sweeps += 1;
            if let Some(t) = trace.as_deref_mut() {
                t.push(self.objective(st));
            }
            if change < tol {
                if self.polish(st) {
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(self.objective(st));
                    }
                }
                return CdOutcome {
                    sweeps,
                    converged: true,
                };
            }
            let active: Vec<usize> = (0..p)
                .filter(|&j| st.theta[j] != T::zero() || self.kappa[j].is_none())
                .collect();
            loop {
                if sweeps >= max_sweeps {
                    return CdOutcome {
                        sweeps,
                        converged: false,
                    };
                }
                let change = sweep(st, &active);
                sweeps += 1;
                if let Some(t) = trace.as_deref_mut() {
                    t.push(self.objective(st));
                }
                if change < tol {
                    break;
                }
            }
        }
    }

    /// Solves the stationarity equations exactly on the current support with signs held fixed.
    ///
    /// Coordinate descent stops on coefficient change, which leaves an error proportional to
    /// the contraction rate on correlated designs. The polished point is kept only when every
    /// sign survives and the objective does not rise, so it never leaves the solution set.
    fn polish(&self, st: &mut CdState<T>) -> bool {
        let n = self.n();
        let support: Vec<usize> = (0..self.cols.len())
            .filter(|&j| st.theta[j] != T::zero() || self.kappa[j].is_none())
            .collect();
        let k = support.len() + 1;
        let col = |a: usize| -> Option<&Vec<T>> { (a > 0).then(|| &self.cols[support[a - 1]]) };
        let mut gram = Array2::<T>::zeros((k, k));
        let mut grad = Array1::<T>::zeros(k);
        for a in 0..k {
            let ca = col(a);
            grad[a] = (0..self.w.len())
                .map(|i| self.w[i] * ca.map_or(T::one(), |c| c[i]) * st.resid[i])
                .sum::<T>()
                / n;
            if a > 0 {
                let j = support[a - 1];
                if let Some(kap) = self.kappa[j] {
                    grad[a] -= kap * st.theta[j].signum();
                }
            }
            for b in a..k {
                let cb = col(b);
                let v = (0..self.w.len())
                    .map(|i| {
                        self.w[i] * ca.map_or(T::one(), |c| c[i]) * cb.map_or(T::one(), |c| c[i])
                    })
                    .sum::<T>()
                    / n;
                gram[[a, b]] = v;
                gram[[b, a]] = v;
            }
        }
        let Some(l) = cholesky(gram.view()) else {
            return false;
        };
        let delta = cholesky_solve(&l, grad.view());
        if delta.iter().any(|d| !d.is_finite()) {
            return false;
        }
        for (a, &j) in support.iter().enumerate() {
            let new = st.theta[j] + delta[a + 1];
            if self.kappa[j].is_some() && (new == T::zero() || new.signum() != st.theta[j].signum())
            {
                return false;
            }
        }
        let before = self.objective(st);
        let mut cand = CdState {
            intercept: st.intercept + delta[0],
            theta: st.theta.clone(),
            resid: st.resid.clone(),
        };
        cand.resid.iter_mut().for_each(|r| *r -= delta[0]);
        for (a, &j) in support.iter().enumerate() {
            let d = delta[a + 1];
            cand.theta[j] += d;
            for (r, &x) in cand.resid.iter_mut().zip(&self.cols[j]) {
                *r -= d * x;
            }
        }
        if self.objective(&cand) > before {
            return false;
        }
        *st = cand;
        true
    }
}
