use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Sym2;

/// 2×2 covariance `[[var_I, cov_IQ], [cov_IQ, var_Q]]`.
pub type Cov2 = [[f64; 2]; 2];

/// Default per-component variance when a covariance is omitted.
pub const DEFAULT_VARIANCE: f64 = 0.01;

/// Readout parameters for one qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitParams {
    /// Cluster centre `(I, Q)` per state.
    pub means: [[f64; 2]; 3],
    pub covs: [Cov2; 3],
    /// `decay[s][t]` is the probability that state `s` relaxes to `t < s` during
    /// readout. Entries with `t >= s` are zero.
    pub decay: [[f64; 3]; 3],
}

impl QubitParams {
    pub fn isotropic(means: [[f64; 2]; 3], variance: f64) -> Self {
        let cov = [[variance, 0.0], [0.0, variance]];
        QubitParams { means, covs: [cov; 3], decay: [[0.0; 3]; 3] }
    }

    pub fn with_decay(mut self, from: usize, to: usize, p: f64) -> Self {
        self.decay[from][to] = p;
        self
    }

    pub(crate) fn cov(&self, state: usize) -> Sym2 {
        let c = self.covs[state];
        Sym2 { a: c[0][0], b: c[0][1], c: c[1][1] }
    }
}

/// Ground-truth parameters of a simulated readout chain. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceModel {
    qubits: Vec<QubitParams>,
    /// `crosstalk[i][j]`: shift of qubit `i`'s I and Q per excitation level of qubit `j`.
    crosstalk: Vec<Vec<f64>>,
    seed: u64,
    /// Multiplier on the noise standard deviation; 0 yields noiseless shots.
    noise_scale: f64,
}

impl DeviceModel {
    pub fn new(qubits: Vec<QubitParams>, crosstalk: Option<Vec<Vec<f64>>>, seed: u64) -> Result<Self> {
        let n = qubits.len();
        let crosstalk = crosstalk.unwrap_or_else(|| vec![vec![0.0; n]; n]);
        let device = DeviceModel { qubits, crosstalk, seed, noise_scale: 1.0 };
        device.validate()?;
        Ok(device)
    }

    pub fn with_noise_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale >= 0.0) || !scale.is_finite() {
            return Err(Error::config("noise_scale", "must be finite and non-negative"));
        }
        self.noise_scale = scale;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn n_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn qubits(&self) -> &[QubitParams] {
        &self.qubits
    }

    pub fn qubit(&self, i: usize) -> &QubitParams {
        &self.qubits[i]
    }

    pub fn crosstalk(&self) -> &[Vec<f64>] {
        &self.crosstalk
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    fn validate(&self) -> Result<()> {
        let n = self.qubits.len();
        if n == 0 {
            return Err(Error::config("n_qubits", "must be positive"));
        }
        if n > crate::dataprep::labels::MAX_QUBITS {
            return Err(Error::config("n_qubits", "too many qubits"));
        }
        for (i, q) in self.qubits.iter().enumerate() {
            for s in 0..3 {
                if q.means[s].iter().any(|v| !v.is_finite()) {
                    return Err(Error::config(format!("qubits[{i}].means[{s}]"), "non-finite mean"));
                }
                let c = q.covs[s];
                let path = format!("qubits[{i}].covs[{s}]");
                if c.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::config(path, "non-finite covariance"));
                }
                if c[0][1] != c[1][0] {
                    return Err(Error::config(path, "covariance not symmetric"));
                }
                if !(q.cov(s).min_eigenvalue() > 0.0) {
                    return Err(Error::config(path, "covariance not positive definite"));
                }
                let mut total = 0.0;
                for t in 0..3 {
                    let p = q.decay[s][t];
                    if t >= s && p != 0.0 {
                        return Err(Error::config(
                            format!("qubits[{i}].decay.{s}->{t}"),
                            "decay must go to a lower state",
                        ));
                    }
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::config(format!("qubits[{i}].decay.{s}->{t}"), "probability outside [0, 1]"));
                    }
                    total += p;
                }
                if total > 1.0 + 1e-12 {
                    return Err(Error::config(
                        format!("qubits[{i}].decay"),
                        format!("decay probabilities from state {s} sum to {total} > 1"),
                    ));
                }
            }
        }
        if self.crosstalk.len() != n || self.crosstalk.iter().any(|row| row.len() != n) {
            return Err(Error::config("crosstalk", format!("must be a {n}x{n} matrix")));
        }
        for (i, row) in self.crosstalk.iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(format!("crosstalk[{i}]"), "non-finite coupling"));
            }
            if row[i] != 0.0 {
                return Err(Error::config(format!("crosstalk[{i}][{i}]"), "crosstalk diagonal must be zero"));
            }
        }
        Ok(())
    }

    /// Parse and validate a JSON device document.
    ///
    /// ```json
    /// {
    ///   "n_qubits": 2,
    ///   "seed": 7,
    ///   "default_variance": 0.01,          // optional
    ///   "noise_scale": 1.0,                // optional
    ///   "qubits": [
    ///     { "means": [[0,0],[1,0],[2,0]],
    ///       "covs": [null, [[0.02,0],[0,0.01]], null],   // optional, per state
    ///       "decay": {"1->0": 0.02, "2->1": 0.01} },       // optional
    ///     ...
    ///   ],
    ///   "crosstalk": [[0, 0.05], [0, 0]]   // optional
    /// }
    /// ```
    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawDevice = serde_json::from_str(text).map_err(|e| Error::config("<document>", e.to_string()))?;
        raw.build()
    }

    /// Serialise back to the document grammar accepted by [`DeviceModel::from_json_str`].
    pub fn to_json_string(&self) -> String {
        let raw = RawDevice {
            n_qubits: Some(self.n_qubits()),
            seed: Some(self.seed),
            default_variance: None,
            noise_scale: Some(self.noise_scale),
            qubits: Some(
                self.qubits
                    .iter()
                    .map(|q| {
                        let mut decay = BTreeMap::new();
                        for (s, t) in [(1, 0), (2, 0), (2, 1)] {
                            if q.decay[s][t] != 0.0 {
                                decay.insert(format!("{s}->{t}"), q.decay[s][t]);
                            }
                        }
                        RawQubit {
                            means: Some(q.means.to_vec()),
                            covs: Some(q.covs.iter().map(|c| Some(*c)).collect()),
                            decay: Some(decay),
                        }
                    })
                    .collect(),
            ),
            crosstalk: Some(self.crosstalk.clone()),
        };
        serde_json::to_string_pretty(&raw).expect("device serialisation cannot fail")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDevice {
    n_qubits: Option<usize>,
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    default_variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_scale: Option<f64>,
    qubits: Option<Vec<RawQubit>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    crosstalk: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQubit {
    means: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    covs: Option<Vec<Option<Cov2>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    decay: Option<BTreeMap<String, f64>>,
}

impl RawDevice {
    fn build(self) -> Result<DeviceModel> {
        let n = self.n_qubits.ok_or_else(|| Error::config("n_qubits", "missing required key"))?;
        if n == 0 {
            return Err(Error::config("n_qubits", "must be positive"));
        }
        let seed = self.seed.ok_or_else(|| Error::config("seed", "missing required key"))?;
        let variance = self.default_variance.unwrap_or(DEFAULT_VARIANCE);
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::config("default_variance", "must be positive"));
        }
        let raw_qubits = self.qubits.ok_or_else(|| Error::config("qubits", "missing required key"))?;
        if raw_qubits.len() != n {
            return Err(Error::config("qubits", format!("expected {n} entries, found {}", raw_qubits.len())));
        }
        let mut qubits = Vec::with_capacity(n);
        for (i, rq) in raw_qubits.into_iter().enumerate() {
            let means = rq.means.ok_or_else(|| Error::config(format!("qubits[{i}].means"), "missing required key"))?;
            let means: [[f64; 2]; 3] = means
                .try_into()
                .map_err(|_| Error::config(format!("qubits[{i}].means"), "expected exactly 3 (I, Q) pairs"))?;
            let mut q = QubitParams::isotropic(means, variance);
            if let Some(covs) = rq.covs {
                if covs.len() != 3 {
                    return Err(Error::config(format!("qubits[{i}].covs"), "expected 3 entries (null for default)"));
                }
                for (s, c) in covs.into_iter().enumerate() {
                    if let Some(c) = c {
                        q.covs[s] = c;
                    }
                }
            }
            for (key, p) in rq.decay.unwrap_or_default() {
                let path = format!("qubits[{i}].decay.{key}");
                let (from, to) = parse_transition(&key).ok_or_else(|| {
                    Error::config(path.clone(), "expected a transition key of the form \"s->t\" with t < s")
                })?;
                q.decay[from][to] = p;
            }
            qubits.push(q);
        }
        let device = DeviceModel::new(qubits, self.crosstalk, seed)?;
        match self.noise_scale {
            Some(s) => device.with_noise_scale(s),
            None => Ok(device),
        }
    }
}

fn parse_transition(key: &str) -> Option<(usize, usize)> {
    let (a, b) = key.split_once("->")?;
    let from: usize = a.trim().parse().ok()?;
    let to: usize = b.trim().parse().ok()?;
    (from <= 2 && to < from).then_some((from, to))
}
