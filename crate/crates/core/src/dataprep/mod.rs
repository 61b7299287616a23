//! Data preparation: outlier removal → stratified split → scaler fit on the
//! training part.

pub mod labels;
pub mod outliers;
mod scaler;
mod split;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use outliers::{outlier_count, remove_outliers, robust_fit, RobustFit};
pub use scaler::{ScalerParams, SCALER_FORMAT_VERSION, STD_FLOOR};
pub use split::{largest_remainder, split, SplitSpec};

use crate::error::Result;
use crate::sim::Dataset;

pub const DEFAULT_CONTAMINATION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrepConfig {
    pub contamination: f64,
    pub split: SplitSpec,
}

impl Default for PrepConfig {
    fn default() -> Self {
        PrepConfig { contamination: DEFAULT_CONTAMINATION, split: SplitSpec::default() }
    }
}

/// Outcome of outlier removal for one (qubit, prepared single-qubit state) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupOutliers {
    pub qubit: usize,
    pub state: u8,
    pub group_size: usize,
    /// Points flagged in this group; `None` when the group was skipped.
    pub flagged: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Prepared {
    /// Unscaled, outlier-filtered parts.
    pub train: Dataset,
    pub test: Dataset,
    pub validation: Dataset,
    pub scaler: ScalerParams,
    pub groups: Vec<GroupOutliers>,
    /// Records dropped because at least one of their qubit points was flagged.
    pub removed_records: usize,
}

/// Keep-mask over `dataset.records` after per-group elliptic-envelope removal.
/// Groups whose robust fit fails are skipped and reported, not fatal.
pub fn outlier_mask(dataset: &Dataset, contamination: f64) -> Result<(Vec<bool>, Vec<GroupOutliers>)> {
    if !(0.0..0.5).contains(&contamination) {
        return Err(crate::Error::invalid(format!("contamination {contamination} outside [0, 0.5)")));
    }
    let n = dataset.n_qubits;
    let groups: Vec<(usize, u8)> = (0..n).flat_map(|q| (0..3u8).map(move |s| (q, s))).collect();
    let results = groups
        .par_iter()
        .map(|&(q, s)| {
            let idx: Vec<usize> = dataset
                .records
                .iter()
                .enumerate()
                .filter(|(_, r)| labels::digit_of(r.prepared_label, q, n) == s)
                .map(|(i, _)| i)
                .collect();
            let pts: Vec<[f64; 2]> = idx
                .iter()
                .map(|&i| [dataset.records[i].features[2 * q], dataset.records[i].features[2 * q + 1]])
                .collect();
            let mut report = GroupOutliers { qubit: q, state: s, group_size: idx.len(), flagged: None, skipped: None };
            if pts.is_empty() {
                report.skipped = Some("empty group".into());
                return Ok((report, Vec::new()));
            }
            match remove_outliers(&pts, contamination) {
                Ok(keep) => {
                    let drop: Vec<usize> = idx.iter().zip(&keep).filter(|(_, k)| !**k).map(|(&i, _)| i).collect();
                    report.flagged = Some(drop.len());
                    Ok((report, drop))
                }
                Err(e) => {
                    report.skipped = Some(e.to_string());
                    Ok((report, Vec::new()))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut keep = vec![true; dataset.records.len()];
    let mut reports = Vec::with_capacity(results.len());
    for (report, drop) in results {
        for i in drop {
            keep[i] = false;
        }
        reports.push(report);
    }
    Ok((keep, reports))
}

pub fn prepare(dataset: &Dataset, config: &PrepConfig) -> Result<Prepared> {
    dataset.check()?;
    let (keep, groups) = outlier_mask(dataset, config.contamination)?;
    let kept: Vec<_> = dataset.records.iter().zip(&keep).filter(|(_, k)| **k).map(|(r, _)| r.clone()).collect();
    let removed_records = dataset.records.len() - kept.len();
    let cleaned = dataset.with_records(kept);
    let (train, test, validation) = split(&cleaned, &config.split)?;
    let scaler = ScalerParams::fit(&train.feature_rows())?;
    Ok(Prepared { train, test, validation, scaler, groups, removed_records })
}
