use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard deviations below this are treated as constant columns.
pub const STD_FLOOR: f64 = 1e-12;
pub const SCALER_FORMAT_VERSION: u32 = 1;

/// Per-column standardisation `(x − mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub format_version: u32,
    pub mean: Vec<f64>,
    /// Always ≥ [`STD_FLOOR`]; constant columns store 1.
    pub std: Vec<f64>,
}

impl ScalerParams {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        if m < 2 {
            return Err(Error::invalid("scaler needs at least two rows"));
        }
        let d = rows[0].len();
        let mut mean = vec![0.0; d];
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: r.len() });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("scaler input"));
            }
            for (acc, v) in mean.iter_mut().zip(r) {
                *acc += v;
            }
        }
        mean.iter_mut().for_each(|v| *v /= m as f64);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((acc, v), mu) in var.iter_mut().zip(r).zip(&mean) {
                *acc += (v - mu) * (v - mu);
            }
        }
        let mut std = Vec::with_capacity(d);
        for (j, v) in var.into_iter().enumerate() {
            let s = (v / m as f64).sqrt();
            if s > STD_FLOOR {
                std.push(s);
            } else {
                // constant column: centre on an actual value so it maps to exact zeros
                if rows.iter().all(|r| r[j] == rows[0][j]) {
                    mean[j] = rows[0][j];
                }
                std.push(1.0);
            }
        }
        Ok(ScalerParams { format_version: SCALER_FORMAT_VERSION, mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.std).map(|((x, m), s)| (x - m) / s).collect()
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter()
            .map(|r| {
                if r.len() != self.dim() {
                    return Err(Error::DimensionMismatch { expected: self.dim(), got: r.len() });
                }
                Ok(self.transform_row(r))
            })
            .collect()
    }

    pub fn inverse_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.mean).zip(&self.std).map(|((z, m), s)| z * s + m).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scaler serialisation cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: ScalerParams = serde_json::from_str(text)?;
        if p.format_version != SCALER_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                what: "scaler",
                found: p.format_version,
                expected: SCALER_FORMAT_VERSION,
            });
        }
        if p.mean.len() != p.std.len() || p.std.iter().any(|s| !(*s >= STD_FLOOR)) {
            return Err(Error::invalid("scaler document is inconsistent"));
        }
        Ok(p)
    }
}
