//! Plug-in Gaussian classifiers. All covariance estimates are maximum-likelihood
//! (divide by the sample count). Singular covariances get the variance floor
//! added to their diagonal instead of failing.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{chol_log_det, chol_quad_form, cholesky_floored};

fn class_stats(features: &[Vec<f64>], class_index: &[usize], n_classes: usize) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let dim = features[0].len();
    let mut counts = vec![0usize; n_classes];
    let mut means = vec![vec![0.0; dim]; n_classes];
    for (x, &c) in features.iter().zip(class_index) {
        counts[c] += 1;
        for (m, v) in means[c].iter_mut().zip(x) {
            *m += v;
        }
    }
    for (c, (m, &n)) in means.iter_mut().zip(&counts).enumerate() {
        if n == 0 {
            return Err(Error::EmptyClass(c));
        }
        m.iter_mut().for_each(|v| *v /= n as f64);
    }
    Ok((counts, means))
}

fn log_priors(counts: &[usize]) -> Vec<f64> {
    let total: usize = counts.iter().sum();
    counts.iter().map(|&n| (n as f64 / total as f64).ln()).collect()
}

/// Per-class naive (diagonal) Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianClass {
    pub log_prior: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnbParams {
    pub classes: Vec<GaussianClass>,
}

impl GnbParams {
    pub(crate) fn fit(features: &[Vec<f64>], class_index: &[usize], n_classes: usize, var_floor: f64) -> Result<Self> {
        let (counts, means) = class_stats(features, class_index, n_classes)?;
        let dim = features[0].len();
        let mut vars = vec![vec![0.0; dim]; n_classes];
        for (x, &c) in features.iter().zip(class_index) {
            for ((v, xi), mi) in vars[c].iter_mut().zip(x).zip(&means[c]) {
                *v += (xi - mi) * (xi - mi);
            }
        }
        let priors = log_priors(&counts);
        let classes = (0..n_classes)
            .map(|c| GaussianClass {
                log_prior: priors[c],
                mean: means[c].clone(),
                var: vars[c].iter().map(|v| (v / counts[c] as f64).max(var_floor)).collect(),
            })
            .collect();
        Ok(GnbParams { classes })
    }

    pub fn log_joint(&self, x: &[f64]) -> Vec<f64> {
        self.classes
            .iter()
            .map(|g| {
                let ll: f64 = x
                    .iter()
                    .zip(&g.mean)
                    .zip(&g.var)
                    .map(|((xi, mi), vi)| (2.0 * PI * vi).ln() + (xi - mi) * (xi - mi) / vi)
                    .sum();
                g.log_prior - 0.5 * ll
            })
            .collect()
    }
}

fn scatter_add(acc: &mut [f64], x: &[f64], mean: &[f64]) {
    let d = mean.len();
    for i in 0..d {
        let di = x[i] - mean[i];
        for j in 0..=i {
            acc[i * d + j] += di * (x[j] - mean[j]);
        }
    }
}

fn symmetrise(acc: &mut [f64], d: usize, n: f64) {
    for i in 0..d {
        for j in 0..=i {
            let v = acc[i * d + j] / n;
            acc[i * d + j] = v;
            acc[j * d + i] = v;
        }
    }
}

fn gaussian_log_density(x: &[f64], mean: &[f64], chol: &[f64], log_det: f64, scratch: &mut [f64]) -> f64 {
    let d = mean.len();
    let (diff, z) = scratch.split_at_mut(d);
    for ((o, a), b) in diff.iter_mut().zip(x).zip(mean) {
        *o = a - b;
    }
    let q = chol_quad_form(chol, d, diff, z);
    -0.5 * (d as f64 * (2.0 * PI).ln() + log_det + q)
}

/// Linear discriminant analysis: class means with one pooled covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub log_priors: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Lower Cholesky factor of the pooled covariance, row-major.
    pub chol: Vec<f64>,
    pub log_det: f64,
    pub floored: bool,
}

impl LdaParams {
    pub(crate) fn fit(features: &[Vec<f64>], class_index: &[usize], n_classes: usize, var_floor: f64) -> Result<Self> {
        let (counts, means) = class_stats(features, class_index, n_classes)?;
        let d = features[0].len();
        let mut pooled = vec![0.0; d * d];
        for (x, &c) in features.iter().zip(class_index) {
            scatter_add(&mut pooled, x, &means[c]);
        }
        symmetrise(&mut pooled, d, features.len() as f64);
        let (chol, floored) = cholesky_floored(&pooled, d, var_floor)
            .ok_or_else(|| Error::DegenerateCovariance("pooled covariance could not be regularised".into()))?;
        let log_det = chol_log_det(&chol, d);
        Ok(LdaParams { log_priors: log_priors(&counts), means, chol, log_det, floored })
    }

    pub fn log_joint(&self, x: &[f64]) -> Vec<f64> {
        let mut scratch = vec![0.0; 2 * x.len()];
        self.means
            .iter()
            .zip(&self.log_priors)
            .map(|(m, lp)| lp + gaussian_log_density(x, m, &self.chol, self.log_det, &mut scratch))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QdaClass {
    pub log_prior: f64,
    pub mean: Vec<f64>,
    pub chol: Vec<f64>,
    pub log_det: f64,
    pub floored: bool,
}

/// Quadratic discriminant analysis: per-class means and covariances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QdaParams {
    pub classes: Vec<QdaClass>,
}

impl QdaParams {
    pub(crate) fn fit(features: &[Vec<f64>], class_index: &[usize], n_classes: usize, var_floor: f64) -> Result<Self> {
        let (counts, means) = class_stats(features, class_index, n_classes)?;
        let d = features[0].len();
        let mut covs = vec![vec![0.0; d * d]; n_classes];
        for (x, &c) in features.iter().zip(class_index) {
            scatter_add(&mut covs[c], x, &means[c]);
        }
        let priors = log_priors(&counts);
        let mut classes = Vec::with_capacity(n_classes);
        for (c, mut cov) in covs.into_iter().enumerate() {
            symmetrise(&mut cov, d, counts[c] as f64);
            let (chol, floored) = cholesky_floored(&cov, d, var_floor)
                .ok_or_else(|| Error::DegenerateCovariance(format!("class {c} covariance could not be regularised")))?;
            let log_det = chol_log_det(&chol, d);
            classes.push(QdaClass { log_prior: priors[c], mean: means[c].clone(), chol, log_det, floored });
        }
        Ok(QdaParams { classes })
    }

    pub fn log_joint(&self, x: &[f64]) -> Vec<f64> {
        let mut scratch = vec![0.0; 2 * x.len()];
        self.classes
            .iter()
            .map(|c| c.log_prior + gaussian_log_density(x, &c.mean, &c.chol, c.log_det, &mut scratch))
            .collect()
    }
}
