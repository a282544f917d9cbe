use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dml::Family;
use crate::error::{Error, Result};
use crate::linalg::cholesky;
use crate::model_matrix::{ColumnMeta, Dataset, Role};
use crate::numerics::sigmoid;
use crate::Scalar;

/// Coefficient vector over the `p` controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "kebab-case")]
pub enum CoefPattern {
    /// `magnitude * decay^j` for `j < s`, zero after.
    FirstS {
        s: usize,
        magnitude: f64,
        #[serde(default = "one")]
        decay: f64,
    },
    /// `magnitude * rate^j` for every `j`.
    Geometric { magnitude: f64, rate: f64 },
    /// `magnitude / (j + 1)^2` for `j < s`, zero after.
    InverseSquare { s: usize, magnitude: f64 },
    /// Leading values; the rest are zero.
    Custom { values: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

impl CoefPattern {
    pub fn zero() -> Self {
        CoefPattern::Custom { values: Vec::new() }
    }

    pub fn expand(&self, p: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; p];
        match self {
            CoefPattern::FirstS {
                s,
                magnitude,
                decay,
            } => {
                if *s > p {
                    return Err(Error::invalid(format!("sparsity {s} exceeds p = {p}")));
                }
                for (j, v) in out.iter_mut().take(*s).enumerate() {
                    *v = magnitude * decay.powi(j as i32);
                }
            }
            CoefPattern::InverseSquare { s, magnitude } => {
                if *s > p {
                    return Err(Error::invalid(format!("sparsity {s} exceeds p = {p}")));
                }
                for (j, v) in out.iter_mut().take(*s).enumerate() {
                    *v = magnitude / ((j + 1) * (j + 1)) as f64;
                }
            }
            CoefPattern::Geometric { magnitude, rate } => {
                if !(rate.abs() < 1.0) {
                    return Err(Error::invalid(format!(
                        "geometric rate must lie in (-1, 1), got {rate}"
                    )));
                }
                for (j, v) in out.iter_mut().enumerate() {
                    *v = magnitude * rate.powi(j as i32);
                }
            }
            CoefPattern::Custom { values } => {
                if values.len() > p {
                    return Err(Error::invalid(format!(
                        "{} custom coefficients for p = {p}",
                        values.len()
                    )));
                }
                out[..values.len()].copy_from_slice(values);
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("coefficients must be finite"));
        }
        Ok(out)
    }
}

/// Correlation of the control vector; unit variances throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Correlation {
    Independent,
    Exchangeable { rho: f64 },
    Ar1 { rho: f64 },
}

impl Correlation {
    fn rho(self) -> f64 {
        match self {
            Correlation::Independent => 0.0,
            Correlation::Exchangeable { rho } | Correlation::Ar1 { rho } => rho,
        }
    }

    /// Target correlation matrix.
    pub fn matrix(self, p: usize) -> Array2<f64> {
        Array2::from_shape_fn((p, p), |(i, j)| {
            if i == j {
                return 1.0;
            }
            match self {
                Correlation::Independent => 0.0,
                Correlation::Exchangeable { rho } => rho,
                Correlation::Ar1 { rho } => rho.powi(i.abs_diff(j) as i32),
            }
        })
    }
}

fn default_scale() -> f64 {
    1.0
}

/// Treatment equation `d = x' gamma + nu * N(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentEquation {
    pub gamma: CoefPattern,
    #[serde(default = "default_scale")]
    pub noise: f64,
}

/// Synthetic data-generating process with known truth.
///
/// Linear: `y = intercept + alpha0 d + x' beta + noise * N(0, 1)`.
/// Logistic: `y ~ Bernoulli(G(intercept + alpha0 d + x' beta))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub family: Family,
    pub n: usize,
    pub p: usize,
    pub alpha0: f64,
    #[serde(default)]
    pub intercept: f64,
    pub beta: CoefPattern,
    pub treatment: TreatmentEquation,
    pub correlation: Correlation,
    /// Outcome noise scale (linear family).
    #[serde(default = "default_scale")]
    pub noise: f64,
}

/// Parameters behind a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub alpha0: f64,
    pub intercept: f64,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub treatment_noise: f64,
    pub noise: f64,
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid("DGP needs n >= 2"));
        }
        if !self.alpha0.is_finite() || !self.intercept.is_finite() {
            return Err(Error::invalid("alpha0 and intercept must be finite"));
        }
        let rho = self.correlation.rho();
        if !(rho > -1.0 && rho < 1.0) {
            return Err(Error::invalid(format!(
                "correlation must lie in (-1, 1), got {rho}"
            )));
        }
        if !(self.noise > 0.0) || !(self.treatment.noise > 0.0) {
            return Err(Error::invalid("noise scales must be positive"));
        }
        self.beta.expand(self.p)?;
        self.treatment.gamma.expand(self.p)?;
        Ok(())
    }

    /// Sparse benchmark: the first `s` controls enter the outcome with coefficients
    /// `1/j^2` and the treatment with `0.5/j^2`; AR(1) controls with correlation 0.5.
    pub fn sparse(family: Family, n: usize, p: usize, s: usize, alpha0: f64) -> Self {
        DgpSpec {
            family,
            n,
            p,
            alpha0,
            intercept: 0.0,
            beta: CoefPattern::InverseSquare { s, magnitude: 1.0 },
            treatment: TreatmentEquation {
                gamma: CoefPattern::InverseSquare { s, magnitude: 0.5 },
                noise: 1.0,
            },
            correlation: Correlation::Ar1 { rho: 0.5 },
            noise: 1.0,
        }
    }

    /// Confounded benchmark: `x1` drives the treatment (`corr(x1, d) = 0.8`) but has only a
    /// weak direct effect 0.15 on the outcome, next to four outcome-only controls with
    /// coefficients 0.5, 0.25, 0.125, 0.0625. Single selection on the outcome equation
    /// tends to drop `x1`.
    pub fn confounded(n: usize, p: usize, alpha0: f64) -> Self {
        DgpSpec {
            family: Family::Linear,
            n,
            p,
            alpha0,
            intercept: 0.0,
            beta: CoefPattern::Custom {
                values: vec![0.15, 0.5, 0.25, 0.125, 0.0625],
            },
            treatment: TreatmentEquation {
                gamma: CoefPattern::Custom {
                    values: vec![4.0 / 3.0],
                },
                noise: 1.0,
            },
            correlation: Correlation::Independent,
            noise: 1.0,
        }
    }
}

fn draw_controls(
    rng: &mut ChaCha20Rng,
    n: usize,
    p: usize,
    corr: Correlation,
) -> Result<Array2<f64>> {
    let mut x = Array2::<f64>::zeros((n, p));
    match corr {
        Correlation::Independent => x.iter_mut().for_each(|v| *v = rng.sample(StandardNormal)),
        Correlation::Ar1 { rho } => {
            let s = (1.0 - rho * rho).sqrt();
            for i in 0..n {
                for j in 0..p {
                    let z: f64 = rng.sample(StandardNormal);
                    x[[i, j]] = if j == 0 {
                        z
                    } else {
                        rho * x[[i, j - 1]] + s * z
                    };
                }
            }
        }
        Correlation::Exchangeable { rho } if rho >= 0.0 => {
            let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
            for i in 0..n {
                let common: f64 = rng.sample(StandardNormal);
                for j in 0..p {
                    let z: f64 = rng.sample(StandardNormal);
                    x[[i, j]] = a * common + b * z;
                }
            }
        }
        Correlation::Exchangeable { .. } => {
            let l = cholesky(corr.matrix(p).view()).ok_or_else(|| {
                Error::invalid("exchangeable correlation is not positive definite for this p")
            })?;
            for i in 0..n {
                let z: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
                for j in 0..p {
                    x[[i, j]] = (0..=j).map(|k| l[[j, k]] * z[k]).sum();
                }
            }
        }
    }
    Ok(x)
}

/// Draws a dataset from `spec`; identical `(spec, seed)` give bit-identical output.
///
/// Column 0 is the treatment `d`, columns `x1..xp` the controls; the outcome is `y`.
pub fn gen_dgp<T: Scalar>(spec: &DgpSpec, seed: u64) -> Result<(Dataset<T>, Truth)> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);
    let beta = spec.beta.expand(p)?;
    let gamma = spec.treatment.gamma.expand(p)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let x = draw_controls(&mut rng, n, p, spec.correlation)?;
    let beta_v = Array1::from(beta.clone());
    let gamma_v = Array1::from(gamma.clone());
    let nu: Array1<f64> = (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let d = x.dot(&gamma_v) + &(nu * spec.treatment.noise);
    let index = x.dot(&beta_v) + &(&d * spec.alpha0) + spec.intercept;
    let y: Array1<f64> = match spec.family {
        Family::Linear => index
            .iter()
            .map(|&m| m + spec.noise * rng.sample::<f64, _>(StandardNormal))
            .collect(),
        Family::Logit => index
            .iter()
            .map(|&m| {
                if rng.random::<f64>() < sigmoid(m) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect(),
    };

    let mut design = Array2::<T>::zeros((n, p + 1));
    for i in 0..n {
        design[[i, 0]] = T::of(d[i]);
        for j in 0..p {
            design[[i, j + 1]] = T::of(x[[i, j]]);
        }
    }
    let mut columns = vec![ColumnMeta::numeric("d", Role::Treatment)];
    columns.extend((1..=p).map(|j| ColumnMeta::numeric(format!("x{j}"), Role::Control)));
    let data = Dataset::new("y", y.mapv(T::of), design, columns)?;
    Ok((
        data,
        Truth {
            alpha0: spec.alpha0,
            intercept: spec.intercept,
            beta,
            gamma,
            treatment_noise: spec.treatment.noise,
            noise: spec.noise,
        },
    ))
}
