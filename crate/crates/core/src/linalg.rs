//! Small dense decompositions used by the refits and variance estimators.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::Scalar;

/// Householder QR with column pivoting on an `m x k` matrix.
pub(crate) struct PivotedQr<T> {
    /// Column-major storage: Householder vectors on and below the diagonal,
    /// strict upper triangle of R above it.
    cols: Vec<Vec<T>>,
    beta: Vec<T>,
    diag: Vec<T>,
    perm: Vec<usize>,
    rank: usize,
    m: usize,
    trace: T,
}

impl<T: Scalar> PivotedQr<T> {
    /// Decomposes `a`, stopping once every remaining column has squared norm at or
    /// below `rel_floor * trace(a'a) / k`.
    pub fn new(a: ArrayView2<T>, rel_floor: T) -> Self {
        let (m, k) = a.dim();
        let mut cols: Vec<Vec<T>> = (0..k).map(|j| a.column(j).to_vec()).collect();
        let trace: T = cols
            .iter()
            .map(|c| c.iter().map(|&v| v * v).sum::<T>())
            .sum();
        let floor = if k > 0 {
            rel_floor * trace / T::of(k as f64)
        } else {
            T::zero()
        };
        let mut perm: Vec<usize> = (0..k).collect();
        let mut beta = vec![T::zero(); k];
        let mut diag = vec![T::zero(); k];
        let mut rank = 0;
        for j in 0..k.min(m) {
            let (best, best_norm) = (j..k)
                .map(|c| (c, cols[c][j..].iter().map(|&v| v * v).sum::<T>()))
                .fold(
                    (j, -T::one()),
                    |acc, cur| if cur.1 > acc.1 { cur } else { acc },
                );
            if best_norm <= floor {
                break;
            }
            cols.swap(j, best);
            perm.swap(j, best);

            let norm = best_norm.sqrt();
            let x0 = cols[j][j];
            let alpha = if x0 >= T::zero() { -norm } else { norm };
            cols[j][j] = x0 - alpha;
            let vtv: T = cols[j][j..].iter().map(|&v| v * v).sum();
            let b = if vtv > T::zero() {
                T::of(2.0) / vtv
            } else {
                T::zero()
            };
            beta[j] = b;
            diag[j] = alpha;
            let (head, tail) = cols.split_at_mut(j + 1);
            let v = &head[j][j..];
            for c in tail.iter_mut() {
                let s: T = v.iter().zip(&c[j..]).map(|(&vi, &ci)| vi * ci).sum::<T>() * b;
                for (ci, &vi) in c[j..].iter_mut().zip(v) {
                    *ci -= s * vi;
                }
            }
            rank = j + 1;
        }
        PivotedQr {
            cols,
            beta,
            diag,
            perm,
            rank,
            m,
            trace,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Original indices of the columns left out of the numerical rank.
    pub fn deficient_columns(&self) -> Vec<usize> {
        let mut out = self.perm[self.rank..].to_vec();
        out.sort_unstable();
        out
    }

    pub fn trace(&self) -> T {
        self.trace
    }

    /// Least-squares solution restricted to the rank-revealing columns; the rest are zero.
    pub fn solve(&self, b: ArrayView1<T>) -> Array1<T> {
        assert_eq!(b.len(), self.m);
        let mut qtb = b.to_vec();
        for j in 0..self.rank {
            let v = &self.cols[j][j..];
            let s: T = v.iter().zip(&qtb[j..]).map(|(&vi, &bi)| vi * bi).sum::<T>() * self.beta[j];
            for (bi, &vi) in qtb[j..].iter_mut().zip(v) {
                *bi -= s * vi;
            }
        }
        let r = self.rank;
        let mut z = vec![T::zero(); r];
        for i in (0..r).rev() {
            let mut acc = qtb[i];
            for (jj, zj) in z.iter().enumerate().skip(i + 1) {
                acc -= self.cols[jj][i] * *zj;
            }
            z[i] = acc / self.diag[i];
        }
        let mut out = Array1::zeros(self.perm.len());
        for (j, zj) in z.into_iter().enumerate() {
            out[self.perm[j]] = zj;
        }
        out
    }
}

/// Cholesky factor of a symmetric positive-definite matrix, `None` if a pivot is not positive.
pub(crate) fn cholesky<T: Scalar>(a: ArrayView2<T>) -> Option<Array2<T>> {
    let k = a.nrows();
    let mut l = Array2::<T>::zeros((k, k));
    for j in 0..k {
        let mut d = a[[j, j]];
        for s in 0..j {
            d -= l[[j, s]] * l[[j, s]];
        }
        if !(d > T::zero()) {
            return None;
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in j + 1..k {
            let mut v = a[[i, j]];
            for s in 0..j {
                v -= l[[i, s]] * l[[j, s]];
            }
            l[[i, j]] = v / d;
        }
    }
    Some(l)
}

/// Solves `L L' x = b` given the lower Cholesky factor.
pub(crate) fn cholesky_solve<T: Scalar>(l: &Array2<T>, b: ArrayView1<T>) -> Array1<T> {
    let k = l.nrows();
    let mut y = b.to_owned();
    for i in 0..k {
        let mut v = y[i];
        for s in 0..i {
            v -= l[[i, s]] * y[s];
        }
        y[i] = v / l[[i, i]];
    }
    for i in (0..k).rev() {
        let mut v = y[i];
        for s in i + 1..k {
            v -= l[[s, i]] * y[s];
        }
        y[i] = v / l[[i, i]];
    }
    y
}

/// `X' diag(w) X` for an `n x k` matrix.
pub(crate) fn weighted_gram<T: Scalar>(x: ArrayView2<T>, w: ArrayView1<T>) -> Array2<T> {
    let k = x.ncols();
    let mut g = Array2::<T>::zeros((k, k));
    for (row, &wi) in x.rows().into_iter().zip(w.iter()) {
        if wi == T::zero() {
            continue;
        }
        for a in 0..k {
            let ra = row[a] * wi;
            for b in 0..=a {
                g[[a, b]] += ra * row[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            g[[b, a]] = g[[a, b]];
        }
    }
    g
}
