//! Reference implementations the estimators are checked against. Nothing here
//! calls into the crate's solvers.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha20Rng, n: usize, p: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, p), |_| rng.sample(StandardNormal))
}

pub fn gaussian_vector(rng: &mut ChaCha20Rng, n: usize) -> Array1<f64> {
    Array1::from_shape_fn(n, |_| rng.sample(StandardNormal))
}

pub fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

pub fn bernoulli(rng: &mut ChaCha20Rng, eta: &Array1<f64>) -> Array1<f64> {
    eta.mapv(|e| {
        if rng.random::<f64>() < sigmoid(e) {
            1.0
        } else {
            0.0
        }
    })
}

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

/// Gauss-Jordan elimination over the rationals; `a` is square and nonsingular.
fn solve_exact(mut a: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> Vec<BigRational> {
    let k = b.len();
    for col in 0..k {
        let piv = (col..k)
            .find(|&r| !a[r][col].is_zero())
            .expect("singular system");
        a.swap(col, piv);
        b.swap(col, piv);
        let inv = BigRational::one() / a[col][col].clone();
        for c in col..k {
            a[col][c] = &a[col][c] * &inv;
        }
        b[col] = &b[col] * &inv;
        for r in 0..k {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for c in col..k {
                let t = &f * &a[col][c];
                a[r][c] -= t;
            }
            let t = &f * &b[col];
            b[r] -= t;
        }
    }
    b
}

/// Weighted least squares from the normal equations in exact rational arithmetic.
pub fn rational_wls(x: &Array2<f64>, y: &Array1<f64>, w: &Array1<f64>) -> Vec<f64> {
    let (n, k) = x.dim();
    let xs: Vec<Vec<BigRational>> = (0..n)
        .map(|i| (0..k).map(|j| exact(x[[i, j]])).collect())
        .collect();
    let ys: Vec<BigRational> = y.iter().map(|&v| exact(v)).collect();
    let ws: Vec<BigRational> = w.iter().map(|&v| exact(v)).collect();
    let zero = || BigRational::from_integer(BigInt::zero());
    let mut gram = vec![vec![zero(); k]; k];
    let mut rhs = vec![zero(); k];
    for i in 0..n {
        for a in 0..k {
            let wa = &ws[i] * &xs[i][a];
            for b in 0..k {
                gram[a][b] += &wa * &xs[i][b];
            }
            rhs[a] += &wa * &ys[i];
        }
    }
    solve_exact(gram, rhs)
        .iter()
        .map(|v| v.to_f64().unwrap())
        .collect()
}

/// Dense solve by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Array2<f64>, mut b: Array1<f64>) -> Array1<f64> {
    let k = b.len();
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&r, &s| a[[r, col]].abs().total_cmp(&a[[s, col]].abs()))
            .unwrap();
        if piv != col {
            for c in 0..k {
                a.swap([col, c], [piv, c]);
            }
            b.swap(col, piv);
        }
        for r in col + 1..k {
            let f = a[[r, col]] / a[[col, col]];
            for c in col..k {
                a[[r, c]] -= f * a[[col, c]];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = Array1::zeros(k);
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|c| a[[r, c]] * x[c]).sum();
        x[r] = (b[r] - s) / a[[r, r]];
    }
    x
}

/// Prepends a column of ones.
pub fn with_intercept(x: &Array2<f64>) -> Array2<f64> {
    let (n, p) = x.dim();
    let mut out = Array2::ones((n, p + 1));
    out.slice_mut(ndarray::s![.., 1..]).assign(x);
    out
}

/// Ordinary least squares with intercept, returned as `[b0, b1, ..]`.
pub fn ols(x: &Array2<f64>, y: &Array1<f64>) -> Array1<f64> {
    let a = with_intercept(x);
    solve(a.t().dot(&a), a.t().dot(y))
}

/// Unpenalized logistic regression with intercept by iteratively reweighted least
/// squares, returned as `[b0, b1, ..]`.
pub fn irls(x: &Array2<f64>, y: &Array1<f64>) -> Array1<f64> {
    let a = with_intercept(x);
    let mut b = Array1::<f64>::zeros(a.ncols());
    for _ in 0..100 {
        let eta = a.dot(&b);
        let mu = eta.mapv(sigmoid);
        let w = mu.mapv(|m| m * (1.0 - m));
        let mut aw = a.clone();
        for (mut row, &wi) in aw.rows_mut().into_iter().zip(w.iter()) {
            row *= wi;
        }
        let z = &eta + &((y - &mu) / &w);
        let next = solve(a.t().dot(&aw), aw.t().dot(&z));
        let step = (&next - &b).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        b = next;
        if step < 1e-13 {
            break;
        }
    }
    b
}

/// Centered columns with `X'X = I`, by modified Gram-Schmidt applied twice.
pub fn centered_orthonormal(rng: &mut ChaCha20Rng, n: usize, p: usize) -> Array2<f64> {
    let mut x = gaussian_matrix(rng, n, p);
    for mut c in x.columns_mut() {
        let m = c.mean().unwrap();
        c -= m;
    }
    for _ in 0..2 {
        for j in 0..p {
            for k in 0..j {
                let proj = x.column(j).dot(&x.column(k));
                let ck = x.column(k).to_owned();
                x.column_mut(j).scaled_add(-proj, &ck);
            }
            let norm = x.column(j).dot(&x.column(j)).sqrt();
            x.column_mut(j).mapv_inplace(|v| v / norm);
        }
    }
    x
}

pub fn soft(z: f64, t: f64) -> f64 {
    z.signum() * (z.abs() - t).max(0.0)
}

/// Kolmogorov-Smirnov distance of a sample from the uniform distribution on [0, 1].
pub fn ks_uniform(sample: &[f64]) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &u)| ((i as f64 + 1.0) / n - u).max(u - i as f64 / n))
        .fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn abs_max(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
