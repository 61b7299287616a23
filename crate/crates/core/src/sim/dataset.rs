use std::io::{BufRead, Write};

use crate::dataprep::labels::num_states;
use crate::error::{Error, Result};

pub const DATASET_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "#esprd-dataset";

/// One measurement shot: `I_0, Q_0, …, I_{N-1}, Q_{N-1}` plus the prepared label.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotRecord {
    pub features: Vec<f64>,
    pub prepared_label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n_qubits: usize,
    /// Nominal shots per prepared state at acquisition time.
    pub shots_per_state: usize,
    pub seed: u64,
    pub provenance: String,
    pub records: Vec<ShotRecord>,
}

impl Dataset {
    pub fn feature_dim(&self) -> usize {
        2 * self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.records.len() == num_states(self.n_qubits) * self.shots_per_state
    }

    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.prepared_label).collect()
    }

    /// Features as an `M × 2N` row-major matrix.
    pub fn feature_rows(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.features.clone()).collect()
    }

    /// A dataset with the same metadata holding `records`.
    pub fn with_records(&self, records: Vec<ShotRecord>) -> Dataset {
        Dataset {
            n_qubits: self.n_qubits,
            shots_per_state: self.shots_per_state,
            seed: self.seed,
            provenance: self.provenance.clone(),
            records,
        }
    }

    pub fn check(&self) -> Result<()> {
        let dim = self.feature_dim();
        let states = num_states(self.n_qubits);
        for r in &self.records {
            if r.features.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: r.features.len() });
            }
            if r.prepared_label >= states {
                return Err(Error::LabelOutOfRange { label: r.prepared_label, n_qubits: self.n_qubits });
            }
        }
        Ok(())
    }

    /// Text format, version 1:
    ///
    /// ```text
    /// #esprd-dataset version=1 n_qubits=<N> shots_per_state=<S> seed=<u64> records=<M> provenance=<text to end of line>
    /// <label>,<I_0>,<Q_0>,...,<I_{N-1}>,<Q_{N-1}>
    /// ...
    /// ```
    ///
    /// Floats use the shortest decimal representation that round-trips exactly.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let provenance = self.provenance.replace(['\n', '\r'], " ");
        writeln!(
            w,
            "{MAGIC} version={DATASET_FORMAT_VERSION} n_qubits={} shots_per_state={} seed={} records={} provenance={provenance}",
            self.n_qubits,
            self.shots_per_state,
            self.seed,
            self.records.len()
        )?;
        let mut line = String::new();
        for r in &self.records {
            line.clear();
            line.push_str(&r.prepared_label.to_string());
            for v in &r.features {
                line.push(',');
                line.push_str(&v.to_string());
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Dataset> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| parse_err(1, "empty file"))??;
        let rest = header.strip_prefix(MAGIC).ok_or_else(|| parse_err(1, "missing dataset header"))?;
        let (fields, provenance) = match rest.split_once(" provenance=") {
            Some((f, p)) => (f, p.to_string()),
            None => (rest, String::new()),
        };
        let mut version = None;
        let (mut n_qubits, mut shots, mut seed, mut count) = (None, None, None, None);
        for kv in fields.split_whitespace() {
            let (k, v) = kv.split_once('=').ok_or_else(|| parse_err(1, "expected key=value"))?;
            let bad = |_| parse_err(1, &format!("bad value for {k}"));
            match k {
                "version" => version = Some(v.parse::<u32>().map_err(bad)?),
                "n_qubits" => n_qubits = Some(v.parse::<usize>().map_err(bad)?),
                "shots_per_state" => shots = Some(v.parse::<usize>().map_err(bad)?),
                "seed" => seed = Some(v.parse::<u64>().map_err(bad)?),
                "records" => count = Some(v.parse::<usize>().map_err(bad)?),
                _ => {}
            }
        }
        let version = version.ok_or_else(|| parse_err(1, "missing version"))?;
        if version != DATASET_FORMAT_VERSION {
            return Err(Error::FormatVersion { what: "dataset", found: version, expected: DATASET_FORMAT_VERSION });
        }
        let n_qubits = n_qubits.ok_or_else(|| parse_err(1, "missing n_qubits"))?;
        let dim = 2 * n_qubits;
        let mut records = Vec::with_capacity(count.unwrap_or(0));
        for (idx, line) in lines.enumerate() {
            let line = line?;
            let lineno = idx + 2;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let label =
                parts.next().and_then(|s| s.parse::<usize>().ok()).ok_or_else(|| parse_err(lineno, "bad label"))?;
            let features = parts
                .map(|s| s.parse::<f64>().map_err(|e| parse_err(lineno, &e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            if features.len() != dim {
                return Err(parse_err(lineno, &format!("expected {dim} features, found {}", features.len())));
            }
            records.push(ShotRecord { features, prepared_label: label });
        }
        if let Some(c) = count {
            if c != records.len() {
                return Err(parse_err(1, &format!("header declares {c} records, found {}", records.len())));
            }
        }
        let ds =
            Dataset { n_qubits, shots_per_state: shots.unwrap_or(0), seed: seed.unwrap_or(0), provenance, records };
        ds.check()?;
        Ok(ds)
    }
}

fn parse_err(line: usize, message: &str) -> Error {
    Error::Parse { what: "dataset", line, message: message.to_string() }
}
