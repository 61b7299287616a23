//! The classical discriminators: k-nearest neighbours (L1), an entropy decision
//! tree, Gaussian naive Bayes, and linear/quadratic discriminant analysis.
//!
//! All models share one contract: [`fit`] on an `M × D` feature matrix with
//! integer labels, then [`TrainedModel::predict`]. Argmax and vote ties always
//! resolve to the smallest label.

mod gaussian;
mod knn;
mod tree;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use gaussian::{GaussianClass, GnbParams, LdaParams, QdaParams};
pub use knn::{knn_predict_one, KnnParams};
pub use tree::{entropy, information_gain, Node, TreeParams};

use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_K: usize = 50;
pub const DEFAULT_MAX_DEPTH: usize = 20;
pub const DEFAULT_MIN_SAMPLES_SPLIT: usize = 2;
pub const DEFAULT_VAR_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Knn,
    Dtc,
    Gnb,
    Lda,
    Qda,
}

impl ClassifierKind {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::Dtc => "dtc",
            ClassifierKind::Gnb => "gnb",
            ClassifierKind::Lda => "lda",
            ClassifierKind::Qda => "qda",
        }
    }
}

fn default_k() -> usize {
    DEFAULT_K
}
fn default_max_depth() -> usize {
    DEFAULT_MAX_DEPTH
}
fn default_min_samples_split() -> usize {
    DEFAULT_MIN_SAMPLES_SPLIT
}
fn default_var_floor() -> f64 {
    DEFAULT_VAR_FLOOR
}

/// Model kind plus its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ClassifierSpec {
    Knn {
        #[serde(default = "default_k")]
        k: usize,
    },
    Dtc {
        #[serde(default = "default_max_depth")]
        max_depth: usize,
        #[serde(default = "default_min_samples_split")]
        min_samples_split: usize,
    },
    Gnb {
        #[serde(default = "default_var_floor")]
        var_floor: f64,
    },
    Lda {
        #[serde(default = "default_var_floor")]
        var_floor: f64,
    },
    Qda {
        #[serde(default = "default_var_floor")]
        var_floor: f64,
    },
}

impl ClassifierSpec {
    pub fn default_for(kind: ClassifierKind) -> Self {
        match kind {
            ClassifierKind::Knn => ClassifierSpec::Knn { k: DEFAULT_K },
            ClassifierKind::Dtc => {
                ClassifierSpec::Dtc { max_depth: DEFAULT_MAX_DEPTH, min_samples_split: DEFAULT_MIN_SAMPLES_SPLIT }
            }
            ClassifierKind::Gnb => ClassifierSpec::Gnb { var_floor: DEFAULT_VAR_FLOOR },
            ClassifierKind::Lda => ClassifierSpec::Lda { var_floor: DEFAULT_VAR_FLOOR },
            ClassifierKind::Qda => ClassifierSpec::Qda { var_floor: DEFAULT_VAR_FLOOR },
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            ClassifierSpec::Knn { .. } => ClassifierKind::Knn,
            ClassifierSpec::Dtc { .. } => ClassifierKind::Dtc,
            ClassifierSpec::Gnb { .. } => ClassifierKind::Gnb,
            ClassifierSpec::Lda { .. } => ClassifierKind::Lda,
            ClassifierSpec::Qda { .. } => ClassifierKind::Qda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ClassifierSpec::Knn { k: 0 } => Err(Error::invalid("knn: k must be at least 1")),
            ClassifierSpec::Dtc { max_depth: 0, .. } => Err(Error::invalid("dtc: max_depth must be at least 1")),
            ClassifierSpec::Gnb { var_floor }
            | ClassifierSpec::Lda { var_floor }
            | ClassifierSpec::Qda { var_floor }
                if !(var_floor > 0.0) =>
            {
                Err(Error::invalid("variance floor must be positive"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum ModelParams {
    Knn(KnnParams),
    Dtc(TreeParams),
    Gnb(GnbParams),
    Lda(LdaParams),
    Qda(QdaParams),
}

/// A fitted discriminator. Immutable; safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub spec: ClassifierSpec,
    /// Sorted distinct training labels.
    pub classes: Vec<usize>,
    pub dim: usize,
    pub params: ModelParams,
    /// Wall-clock fit time. Kept out of the serialised artifact so that refits
    /// with fixed seeds are byte-identical.
    #[serde(skip)]
    pub fit_wall_time: f64,
}

/// Row-major feature matrix check shared by fit and predict.
pub(crate) fn check_rows(rows: &[Vec<f64>], dim: usize) -> Result<()> {
    for r in rows {
        if r.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: r.len() });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("features"));
        }
    }
    Ok(())
}

/// Fit a discriminator on `features` (`M × D`) and `labels`.
pub fn fit(spec: &ClassifierSpec, features: &[Vec<f64>], labels: &[usize]) -> Result<TrainedModel> {
    spec.validate()?;
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: features.len(), got: labels.len() });
    }
    if features.is_empty() {
        return Err(Error::invalid("cannot fit on an empty training set"));
    }
    let dim = features[0].len();
    if dim == 0 {
        return Err(Error::invalid("feature dimension must be positive"));
    }
    check_rows(features, dim)?;
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let class_index: Vec<usize> = labels.iter().map(|l| classes.binary_search(l).unwrap()).collect();

    let start = Instant::now();
    let params = match *spec {
        ClassifierSpec::Knn { k } => ModelParams::Knn(KnnParams::fit(k, features, &class_index)),
        ClassifierSpec::Dtc { max_depth, min_samples_split } => {
            ModelParams::Dtc(TreeParams::fit(features, &class_index, classes.len(), max_depth, min_samples_split))
        }
        ClassifierSpec::Gnb { var_floor } => {
            ModelParams::Gnb(GnbParams::fit(features, &class_index, classes.len(), var_floor)?)
        }
        ClassifierSpec::Lda { var_floor } => {
            ModelParams::Lda(LdaParams::fit(features, &class_index, classes.len(), var_floor)?)
        }
        ClassifierSpec::Qda { var_floor } => {
            ModelParams::Qda(QdaParams::fit(features, &class_index, classes.len(), var_floor)?)
        }
    };
    let fit_wall_time = start.elapsed().as_secs_f64();
    Ok(TrainedModel { format_version: MODEL_FORMAT_VERSION, spec: *spec, classes, dim, params, fit_wall_time })
}

/// Index of the maximum; ties resolve to the first (smallest) index.
pub(crate) fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax of log-scores.
pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl TrainedModel {
    pub fn kind(&self) -> ClassifierKind {
        self.spec.kind()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Class index (into `classes`) for a single row; no validation.
    fn predict_index(&self, row: &[f64]) -> usize {
        match &self.params {
            ModelParams::Knn(p) => knn_predict_one(p, row, self.classes.len()),
            ModelParams::Dtc(p) => p.predict_one(row),
            ModelParams::Gnb(p) => argmax_first(&p.log_joint(row)),
            ModelParams::Lda(p) => argmax_first(&p.log_joint(row)),
            ModelParams::Qda(p) => argmax_first(&p.log_joint(row)),
        }
    }

    pub fn predict(&self, features: &[Vec<f64>]) -> Result<Vec<usize>> {
        use rayon::prelude::*;
        check_rows(features, self.dim)?;
        Ok(features.par_iter().map(|r| self.classes[self.predict_index(r)]).collect())
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<usize> {
        check_rows(std::slice::from_ref(&row.to_vec()), self.dim)?;
        Ok(self.classes[self.predict_index(row)])
    }

    /// Unnormalised log-joint `log p(class) + log p(x | class)` per class.
    pub fn log_joint(&self, row: &[f64]) -> Result<Vec<f64>> {
        match &self.params {
            ModelParams::Gnb(p) => Ok(p.log_joint(row)),
            ModelParams::Lda(p) => Ok(p.log_joint(row)),
            ModelParams::Qda(p) => Ok(p.log_joint(row)),
            ModelParams::Knn(_) | ModelParams::Dtc(_) => {
                Err(Error::Unsupported { op: "log_joint", kind: self.kind().name() })
            }
        }
    }

    /// Class posteriors, columns ordered as `classes`. Gaussian models only.
    pub fn predict_proba(&self, features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if matches!(self.params, ModelParams::Knn(_) | ModelParams::Dtc(_)) {
            return Err(Error::Unsupported { op: "predict_proba", kind: self.kind().name() });
        }
        check_rows(features, self.dim)?;
        features.iter().map(|r| Ok(softmax(&self.log_joint(r)?))).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialisation cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: TrainedModel = serde_json::from_str(text)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                what: "model",
                found: m.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        Ok(m)
    }
}
