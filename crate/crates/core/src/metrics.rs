//! Assignment-fidelity metrics for multi-qubit three-state readout.
//!
//! - per-qubit fidelity: one minus the mean of the six off-diagonal entries of
//!   the row-normalised 3×3 confusion matrix,
//! - system fidelity: geometric mean of the per-qubit fidelities,
//! - cross-fidelity: `F_ij = −corr(e_i, x_j)` for `i ≠ j`, where `e_i` flags a
//!   misassignment of qubit `i` and `x_j ∈ {0,1,2}` is qubit `j`'s prepared level;
//!   the diagonal carries the per-qubit fidelities.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataprep::labels::{digit_of, num_states};
use crate::error::{Error, Result};

pub const REPORT_FORMAT_VERSION: u32 = 1;
/// Largest `3^N` for which the flat confusion matrix is embedded in a report.
pub const FLAT_CONFUSION_MAX_STATES: usize = 243;

/// Counts for one qubit: rows are prepared states, columns assigned states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QubitConfusion {
    pub counts: [[u64; 3]; 3],
}

impl QubitConfusion {
    pub fn row_total(&self, s: usize) -> u64 {
        self.counts[s].iter().sum()
    }

    /// Row-normalised conditional probabilities `P(assigned t | prepared s)`.
    pub fn normalized(&self) -> Result<[[f64; 3]; 3]> {
        let mut p = [[0.0; 3]; 3];
        for (s, row) in p.iter_mut().enumerate() {
            let total = self.row_total(s);
            if total == 0 {
                return Err(Error::Coverage(format!("prepared state {s} absent from evaluation set")));
            }
            for (v, &c) in row.iter_mut().zip(&self.counts[s]) {
                *v = c as f64 / total as f64;
            }
        }
        Ok(p)
    }
}

fn check_labels(prepared: &[usize], predicted: &[usize], n_qubits: usize) -> Result<()> {
    if prepared.len() != predicted.len() {
        return Err(Error::DimensionMismatch { expected: prepared.len(), got: predicted.len() });
    }
    let states = num_states(n_qubits);
    if let Some(&l) = prepared.iter().chain(predicted).find(|&&l| l >= states) {
        return Err(Error::LabelOutOfRange { label: l, n_qubits });
    }
    Ok(())
}

/// Per-qubit confusion, marginalised over the other qubits' preparations.
pub fn qubit_confusion(prepared: &[usize], predicted: &[usize], n_qubits: usize) -> Result<Vec<QubitConfusion>> {
    check_labels(prepared, predicted, n_qubits)?;
    let mut out = vec![QubitConfusion::default(); n_qubits];
    for (&p, &a) in prepared.iter().zip(predicted) {
        for (q, conf) in out.iter_mut().enumerate() {
            conf.counts[digit_of(p, q, n_qubits) as usize][digit_of(a, q, n_qubits) as usize] += 1;
        }
    }
    Ok(out)
}

pub fn qubit_fidelity(conf: &QubitConfusion) -> Result<f64> {
    let p = conf.normalized()?;
    let off: f64 =
        (0..3).flat_map(|s| (0..3).filter(move |&t| t != s).map(move |t| (s, t))).map(|(s, t)| p[s][t]).sum();
    Ok(1.0 - off / 6.0)
}

/// Geometric mean of per-qubit fidelities.
pub fn system_fidelity(fidelities: &[f64]) -> Result<f64> {
    if fidelities.is_empty() {
        return Err(Error::invalid("no fidelities given"));
    }
    if let Some(f) = fidelities.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::invalid(format!("fidelity {f} outside [0, 1]")));
    }
    let product: f64 = fidelities.iter().product();
    Ok(product.powf(1.0 / fidelities.len() as f64))
}

fn pearson(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (sab, saa, sbb)
}

/// `N × N` cross-fidelity matrix; hard assignments only.
pub fn cross_fidelity(prepared: &[usize], predicted: &[usize], n_qubits: usize) -> Result<Vec<Vec<f64>>> {
    let confusion = qubit_confusion(prepared, predicted, n_qubits)?;
    let diag = confusion.iter().map(qubit_fidelity).collect::<Result<Vec<_>>>()?;
    cross_fidelity_with_diagonal(prepared, predicted, n_qubits, &diag)
}

pub(crate) fn cross_fidelity_with_diagonal(
    prepared: &[usize],
    predicted: &[usize],
    n_qubits: usize,
    diagonal: &[f64],
) -> Result<Vec<Vec<f64>>> {
    check_labels(prepared, predicted, n_qubits)?;
    if prepared.is_empty() {
        return Err(Error::Coverage("empty evaluation set".into()));
    }
    let levels: Vec<Vec<f64>> =
        (0..n_qubits).map(|j| prepared.iter().map(|&p| digit_of(p, j, n_qubits) as f64).collect()).collect();
    let errors: Vec<Vec<f64>> = (0..n_qubits)
        .map(|i| {
            prepared
                .iter()
                .zip(predicted)
                .map(|(&p, &a)| f64::from(u8::from(digit_of(p, i, n_qubits) != digit_of(a, i, n_qubits))))
                .collect()
        })
        .collect();
    let mut m = vec![vec![0.0; n_qubits]; n_qubits];
    for i in 0..n_qubits {
        m[i][i] = diagonal[i];
        for j in (0..n_qubits).filter(|&j| j != i) {
            let (sab, see, sxx) = pearson(&errors[i], &levels[j]);
            if sxx == 0.0 {
                return Err(Error::Coverage(format!("qubit {j} is prepared in a single state")));
            }
            m[i][j] = if see == 0.0 { 0.0 } else { -(sab / (see.sqrt() * sxx.sqrt())).clamp(-1.0, 1.0) };
        }
    }
    Ok(m)
}

/// `log10(T / T_gnb)` per model; the GNB entry is exactly 0.
pub fn timing_ratios(fit_times: &[(String, f64)]) -> Result<Vec<(String, f64)>> {
    let gnb = fit_times
        .iter()
        .find(|(name, _)| name == "gnb")
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::invalid("timing ratios need a gnb baseline"))?;
    if !(gnb > 0.0) {
        return Err(Error::invalid("gnb fit time must be positive"));
    }
    Ok(fit_times
        .iter()
        .map(|(name, t)| {
            let r = if name == "gnb" { 0.0 } else { (t / gnb).log10() };
            (name.clone(), r)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// Each qubit judged on the states where every other qubit is in |0⟩.
    Single,
    /// All `3^N` prepared states.
    Multi,
}

impl EvalMode {
    /// Whether `label` belongs to the single-qubit family (at most one excited qubit).
    pub fn single_family(label: usize, n_qubits: usize) -> bool {
        (0..n_qubits).filter(|&q| digit_of(label, q, n_qubits) != 0).count() <= 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub fit_wall_time: f64,
    pub log10_ratio_vs_gnb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub format_version: u32,
    pub model: String,
    pub mode: EvalMode,
    pub n_qubits: usize,
    pub n_shots: usize,
    pub qubit_fidelities: Vec<f64>,
    pub system_fidelity: f64,
    pub cross_fidelity: Vec<Vec<f64>>,
    pub confusion: Vec<[[f64; 3]; 3]>,
    pub confusion_counts: Vec<QubitConfusion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flat_confusion: Option<Vec<Vec<u64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl FidelityReport {
    pub fn compute(
        model: &str,
        prepared: &[usize],
        predicted: &[usize],
        n_qubits: usize,
        mode: EvalMode,
    ) -> Result<Self> {
        check_labels(prepared, predicted, n_qubits)?;
        let (prepared, predicted): (Vec<usize>, Vec<usize>) = match mode {
            EvalMode::Multi => (prepared.to_vec(), predicted.to_vec()),
            EvalMode::Single => prepared
                .iter()
                .zip(predicted)
                .filter(|(&p, _)| EvalMode::single_family(p, n_qubits))
                .map(|(&p, &a)| (p, a))
                .unzip(),
        };
        let confusion_counts = match mode {
            EvalMode::Multi => qubit_confusion(&prepared, &predicted, n_qubits)?,
            EvalMode::Single => (0..n_qubits)
                .map(|q| {
                    // qubit q's family: every other qubit grounded
                    let (p, a): (Vec<usize>, Vec<usize>) = prepared
                        .iter()
                        .zip(&predicted)
                        .filter(|(&l, _)| (0..n_qubits).all(|j| j == q || digit_of(l, j, n_qubits) == 0))
                        .map(|(&l, &a)| (l, a))
                        .unzip();
                    Ok(qubit_confusion(&p, &a, n_qubits)?[q])
                })
                .collect::<Result<Vec<_>>>()?,
        };
        let confusion = confusion_counts.iter().map(|c| c.normalized()).collect::<Result<Vec<_>>>()?;
        let qubit_fidelities = confusion_counts.iter().map(qubit_fidelity).collect::<Result<Vec<_>>>()?;
        let system = system_fidelity(&qubit_fidelities)?;
        let cross = if n_qubits > 1 {
            cross_fidelity_with_diagonal(&prepared, &predicted, n_qubits, &qubit_fidelities)?
        } else {
            vec![vec![qubit_fidelities[0]]]
        };
        let states = num_states(n_qubits);
        let flat_confusion = (states <= FLAT_CONFUSION_MAX_STATES).then(|| {
            let mut m = vec![vec![0u64; states]; states];
            for (&p, &a) in prepared.iter().zip(&predicted) {
                m[p][a] += 1;
            }
            m
        });
        Ok(FidelityReport {
            format_version: REPORT_FORMAT_VERSION,
            model: model.to_string(),
            mode,
            n_qubits,
            n_shots: prepared.len(),
            qubit_fidelities,
            system_fidelity: system,
            cross_fidelity: cross,
            confusion,
            confusion_counts,
            flat_confusion,
            timing: None,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialisation cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: FidelityReport = serde_json::from_str(text)?;
        if r.format_version != REPORT_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                what: "report",
                found: r.format_version,
                expected: REPORT_FORMAT_VERSION,
            });
        }
        Ok(r)
    }

    /// Cross-fidelity matrix as comma-separated rows.
    pub fn cross_fidelity_csv(&self) -> String {
        matrix_csv(self.cross_fidelity.iter().map(|r| r.as_slice()))
    }

    /// Normalised confusion of one qubit as comma-separated rows.
    pub fn confusion_csv(&self, qubit: usize) -> String {
        matrix_csv(self.confusion[qubit].iter().map(|r| r.as_slice()))
    }
}

fn matrix_csv<'a>(rows: impl Iterator<Item = &'a [f64]>) -> String {
    let mut s = String::new();
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.9}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Side-by-side comparison: rows `F_1 … F_N, F_GM`, one column per report.
pub fn comparison_table(reports: &[FidelityReport]) -> Result<String> {
    let Some(first) = reports.first() else {
        return Err(Error::invalid("no reports to tabulate"));
    };
    if reports.iter().any(|r| r.n_qubits != first.n_qubits) {
        return Err(Error::invalid("reports cover different qubit counts"));
    }
    let mut s = String::from("metric");
    for r in reports {
        s.push(',');
        s.push_str(&r.model);
    }
    s.push('\n');
    for q in 0..first.n_qubits {
        let _ = write!(s, "F_{}", q + 1);
        for r in reports {
            let _ = write!(s, ",{:.6}", r.qubit_fidelities[q]);
        }
        s.push('\n');
    }
    s.push_str("F_GM");
    for r in reports {
        let _ = write!(s, ",{:.6}", r.system_fidelity);
    }
    s.push('\n');
    Ok(s)
}

/// `model,fit_seconds,log10_ratio_vs_gnb` rows.
pub fn timing_table(fit_times: &[(String, f64)]) -> Result<String> {
    let ratios = timing_ratios(fit_times)?;
    let mut s = String::from("model,fit_seconds,log10_ratio_vs_gnb\n");
    for ((name, t), (_, r)) in fit_times.iter().zip(&ratios) {
        let _ = writeln!(s, "{name},{t:.6},{r:.3}");
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_counted_confusion() {
        let c = qubit_confusion(&[0, 1, 2], &[1, 1, 2], 1).unwrap();
        assert_eq!(c[0].counts, [[0, 1, 0], [0, 1, 0], [0, 0, 1]]);
        let perfect = qubit_confusion(&[0, 5, 26, 13], &[0, 5, 26, 13], 3).unwrap();
        for q in perfect {
            for s in 0..3 {
                for t in 0..3 {
                    if s != t {
                        assert_eq!(q.counts[s][t], 0);
                    }
                }
            }
        }
        assert!(qubit_confusion(&[0], &[0, 1], 1).is_err());
    }

    #[test]
    fn confusion_matches_double_loop_recount() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 3;
        let prepared: Vec<usize> = (0..1000).map(|_| rng.random_range(0..27)).collect();
        let predicted: Vec<usize> = (0..1000).map(|_| rng.random_range(0..27)).collect();
        let got = qubit_confusion(&prepared, &predicted, n).unwrap();
        for q in 0..n {
            for s in 0..3u8 {
                for t in 0..3u8 {
                    let mut count = 0;
                    for k in 0..1000 {
                        let pd = crate::decode_label(prepared[k], n).unwrap();
                        let ad = crate::decode_label(predicted[k], n).unwrap();
                        if pd[q] == s && ad[q] == t {
                            count += 1;
                        }
                    }
                    assert_eq!(got[q].counts[s as usize][t as usize], count);
                }
            }
        }
    }

    #[test]
    fn fidelity_closed_forms() {
        let perfect = QubitConfusion { counts: [[5, 0, 0], [0, 5, 0], [0, 0, 5]] };
        assert_eq!(qubit_fidelity(&perfect).unwrap(), 1.0);
        let uniform = QubitConfusion { counts: [[4, 4, 4], [4, 4, 4], [4, 4, 4]] };
        assert!((qubit_fidelity(&uniform).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let c = QubitConfusion { counts: [[90, 10, 0], [5, 90, 5], [0, 10, 90]] };
        assert!((qubit_fidelity(&c).unwrap() - 0.95).abs() < 1e-12);
        let missing = QubitConfusion { counts: [[1, 0, 0], [0, 0, 0], [0, 0, 1]] };
        assert!(matches!(qubit_fidelity(&missing), Err(Error::Coverage(_))));
    }

    #[test]
    fn geometric_mean() {
        assert_eq!(system_fidelity(&[1.0; 5]).unwrap(), 1.0);
        assert!((system_fidelity(&[0.9; 4]).unwrap() - 0.9).abs() < 1e-15);
        let belem_fnn = system_fidelity(&[0.963, 0.964, 0.904, 0.993, 0.987]).unwrap();
        assert!((belem_fnn - 0.962).abs() <= 0.001);
        assert!(system_fidelity(&[0.5, -0.1]).is_err());
    }

    /// Pearson correlation from raw sums, independent of the library routine.
    fn oracle_corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
        let sab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let saa: f64 = a.iter().map(|x| x * x).sum();
        let sbb: f64 = b.iter().map(|y| y * y).sum();
        (n * sab - sa * sb) / ((n * saa - sa * sa).sqrt() * (n * sbb - sb * sb).sqrt())
    }

    #[test]
    fn cross_fidelity_constructed_case() {
        // Two qubits, full sweep of 9 states. Qubit 0 is misassigned exactly when
        // qubit 1 was prepared in |2⟩.
        let n = 2;
        let prepared: Vec<usize> = (0..9).collect();
        let predicted: Vec<usize> = prepared
            .iter()
            .map(|&l| {
                let mut d = crate::decode_label(l, n).unwrap();
                if d[1] == 2 {
                    d[0] = (d[0] + 1) % 3;
                }
                crate::encode_label(&d).unwrap()
            })
            .collect();
        let m = cross_fidelity(&prepared, &predicted, n).unwrap();
        let e: Vec<f64> = (0..9).map(|l| f64::from(u8::from(l % 3 == 2))).collect();
        let x: Vec<f64> = (0..9).map(|l| (l % 3) as f64).collect();
        let expected = -oracle_corr(&e, &x);
        assert!((expected + 3f64.sqrt() / 2.0).abs() < 1e-12);
        assert!((m[0][1] - expected).abs() < 1e-9);
        assert_eq!(m[1][0], 0.0);
        // each prepared row of qubit 0 leaks 1/3 to one neighbour: F = 1 − 1/6
        assert!((m[0][0] - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn cross_fidelity_perfect_and_coverage() {
        let all: Vec<usize> = (0..27).collect();
        let m = cross_fidelity(&all, &all, 3).unwrap();
        for (i, row) in m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(*v, if i == j { 1.0 } else { 0.0 });
            }
        }
        // qubit 1 always |0⟩ → no variance in its level
        let fixed: Vec<usize> = vec![0, 1, 2, 18, 19, 20, 9, 10, 11];
        assert!(cross_fidelity(&fixed, &fixed, 3).is_err());
    }

    #[test]
    fn timing() {
        let t = vec![("gnb".to_string(), 0.5), ("dtc".to_string(), 5.0), ("qda".to_string(), 0.5)];
        let r = timing_ratios(&t).unwrap();
        assert_eq!(r[0].1, 0.0);
        assert!((r[1].1 - 1.0).abs() < 1e-15);
        assert_eq!(r[2].1, 0.0);
        assert!(timing_ratios(&[("knn".to_string(), 1.0)]).is_err());
    }

    #[test]
    fn single_mode_uses_qubit_families() {
        let n = 2;
        // perfect predictions except on a doubly-excited state, which single mode ignores
        let prepared: Vec<usize> = (0..9).collect();
        let mut predicted = prepared.clone();
        predicted[4] = 0;
        let single = FidelityReport::compute("x", &prepared, &predicted, n, EvalMode::Single).unwrap();
        assert_eq!(single.qubit_fidelities, vec![1.0, 1.0]);
        assert_eq!(single.n_shots, 5);
        let multi = FidelityReport::compute("x", &prepared, &predicted, n, EvalMode::Multi).unwrap();
        assert!(multi.qubit_fidelities[0] < 1.0);
        assert_eq!(FidelityReport::from_json(&multi.to_json()).unwrap(), multi);
        let table = comparison_table(&[multi.clone(), single]).unwrap();
        assert_eq!(table.lines().count(), 4);
        assert!(table.starts_with("metric,x,x\nF_1,"));
    }

    proptest! {
        #[test]
        fn metrics_ignore_shot_order(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let prepared: Vec<usize> = (0..200).map(|k| k % 9).collect();
            let predicted: Vec<usize> = prepared.iter().map(|&l| if rng.random_bool(0.2) { rng.random_range(0..9) } else { l }).collect();
            let a = FidelityReport::compute("m", &prepared, &predicted, 2, EvalMode::Multi).unwrap();
            let mut idx: Vec<usize> = (0..200).collect();
            use rand::seq::SliceRandom;
            idx.shuffle(&mut rng);
            let p2: Vec<usize> = idx.iter().map(|&i| prepared[i]).collect();
            let a2: Vec<usize> = idx.iter().map(|&i| predicted[i]).collect();
            let b = FidelityReport::compute("m", &p2, &a2, 2, EvalMode::Multi).unwrap();
            prop_assert_eq!(&a.confusion_counts, &b.confusion_counts);
            prop_assert_eq!(a.qubit_fidelities, b.qubit_fidelities);
            for i in 0..2 { for j in 0..2 {
                prop_assert!((a.cross_fidelity[i][j] - b.cross_fidelity[i][j]).abs() < 1e-12);
            }}
            prop_assert!((a.system_fidelity - (a.confusion_counts.iter().map(|c| qubit_fidelity(c).unwrap()).product::<f64>()).sqrt()).abs() < 1e-12);
        }
    }
}
