use std::io::Write;
use std::path::PathBuf;

use esprd_core::dataprep::labels::digit_of;
use esprd_core::dataprep::{prepare, PrepConfig, SplitSpec};
use esprd_core::experiment::{evaluate, fit_model, restrict_to_mode, ExperimentManifest, ModelSpec};
use esprd_core::metrics::{comparison_table, timing_table, EvalMode, FidelityReport};
use esprd_core::sim::simulate_dataset;
use esprd_core::{encode_label, num_states, DeviceModel, Error, Result};
use serde::{Deserialize, Serialize};

use crate::artifacts::{self, Layout, DEFAULT_OUT_DIR, OUT_DIR_ENV};
use crate::{exit, Command, Common, Failure};

pub const TIMING_FORMAT_VERSION: u32 = 1;
pub const SUMMARY_FORMAT_VERSION: u32 = 1;
pub const SURFACE_FORMAT_VERSION: u32 = 1;
pub const HISTOGRAM_FORMAT_VERSION: u32 = 1;

/// Canonical column order for tables when no manifest fixes one.
const MODEL_ORDER: [&str; 6] = ["knn", "dtc", "gnb", "qda", "lda", "fnn"];

#[derive(Debug, Serialize, Deserialize)]
struct TimingRecord {
    format_version: u32,
    /// `(model, fit wall time in seconds)` in fit order.
    fit_wall_time: Vec<(String, f64)>,
}

#[derive(Debug, Serialize)]
struct PrepSummary<'a> {
    format_version: u32,
    contamination: f64,
    split: SplitSpec,
    input_records: usize,
    removed_records: usize,
    train: usize,
    test: usize,
    validation: usize,
    groups: &'a [esprd_core::dataprep::GroupOutliers],
}

/// Resolved invocation context.
struct Ctx {
    manifest: Option<ExperimentManifest>,
    layout: Layout,
    common: Common,
}

impl Ctx {
    fn new(common: Common) -> Result<Ctx> {
        let manifest = match &common.manifest {
            Some(p) => {
                let mut m = ExperimentManifest::load(p)?;
                if let Some(seed) = common.seed {
                    m.seed = seed;
                }
                if let Some(mode) = common.mode {
                    m.mode = mode.into();
                }
                Some(m)
            }
            None => None,
        };
        let root = common
            .out
            .clone()
            .or_else(|| manifest.as_ref().and_then(|m| m.out_dir.as_ref().map(|d| m.base_dir.join(d))))
            .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
        Ok(Ctx { manifest, layout: Layout::new(root), common })
    }

    fn manifest(&self) -> Result<&ExperimentManifest> {
        self.manifest.as_ref().ok_or_else(|| Error::config("--manifest", "this command needs a manifest"))
    }

    fn mode(&self) -> EvalMode {
        match (self.common.mode, &self.manifest) {
            (Some(m), _) => m.into(),
            (None, Some(m)) => m.mode,
            (None, None) => EvalMode::Multi,
        }
    }

    /// Manifest models, narrowed or extended by `--models`.
    fn model_specs(&self) -> Result<Vec<ModelSpec>> {
        let listed = self.manifest()?.models.clone();
        let Some(names) = &self.common.models else { return Ok(listed) };
        let mut out: Vec<ModelSpec> = Vec::new();
        for name in names {
            let name = name.trim();
            let spec = match listed.iter().find(|m| m.name() == name) {
                Some(m) => m.clone(),
                None => ModelSpec::parse_name(name)?,
            };
            if out.iter().any(|m| m.name() == spec.name()) {
                return Err(Error::config("--models", format!("duplicate model {name}")));
            }
            out.push(spec);
        }
        if out.is_empty() {
            return Err(Error::config("--models", "empty model list"));
        }
        Ok(out)
    }

    /// Model names for evaluate/report: flag, else manifest, else `default`.
    fn model_names(&self, default: impl FnOnce() -> Vec<String>) -> Result<Vec<String>> {
        if self.manifest.is_some() {
            return Ok(self.model_specs()?.iter().map(|m| m.name().to_string()).collect());
        }
        match &self.common.models {
            Some(names) => Ok(names.iter().map(|n| n.trim().to_string()).collect()),
            None => Ok(default()),
        }
    }
}

fn stage<T>(code: u8, r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|e| Failure::new(code, e))
}

pub fn run(command: Command, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    match command {
        Command::Simulate { common, shots } => stage(exit::DATA, simulate(Ctx::new(common)?, shots, out)),
        Command::Prep { common, split, contamination, data } => {
            stage(exit::DATA, prep(Ctx::new(common)?, split, contamination, data, out))
        }
        Command::Train { common } => train(stage(exit::FIT, Ctx::new(common))?, out),
        Command::Evaluate { common } => stage(exit::EVAL, evaluate_cmd(Ctx::new(common)?, out)),
        Command::DecisionSurface { common, model, qubit, i_range, q_range, cells } => {
            stage(exit::EVAL, decision_surface(Ctx::new(common)?, &model, qubit, i_range, q_range, &cells, out))
        }
        Command::Histogram { common, qubit, state, bins, data } => {
            stage(exit::DATA, histogram(Ctx::new(common)?, qubit, state, bins, data, out))
        }
        Command::Report { common } => stage(exit::EVAL, report(Ctx::new(common)?, out)),
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::new(exit::CONFIG, e)
    }
}

fn simulate(ctx: Ctx, shots: Option<usize>, out: &mut dyn Write) -> Result<()> {
    let m = ctx.manifest()?;
    let device_path = m.device_path();
    let text = std::fs::read_to_string(&device_path)
        .map_err(|e| Error::config("device", format!("{}: {e}", device_path.display())))?;
    let mut device = DeviceModel::from_json_str(&text)?;
    if let Some(seed) = ctx.common.seed {
        device = device.with_seed(seed);
    }
    let shots = shots.unwrap_or(m.shots_per_state);
    if shots == 0 {
        return Err(Error::config("--shots", "must be at least 1"));
    }
    let mut ds = simulate_dataset(&device, shots)?;
    ds.provenance = format!("device={}", m.device.display());
    let path = ctx.layout.dataset();
    let bytes = artifacts::write_dataset(&path, &ds)?;
    writeln!(
        out,
        "states={} shots_per_state={} records={} bytes={} path={}",
        num_states(ds.n_qubits),
        shots,
        ds.len(),
        bytes,
        path.display()
    )?;
    Ok(())
}

fn prep(
    ctx: Ctx,
    split: Option<Vec<f64>>,
    contamination: Option<f64>,
    data: Option<PathBuf>,
    out: &mut dyn Write,
) -> Result<()> {
    let m = ctx.manifest()?;
    let mut cfg: PrepConfig = m.prep_config();
    if let Some(f) = split {
        if f.len() != 3 {
            return Err(Error::config("--split", "expected train,test,validation"));
        }
        cfg.split =
            SplitSpec::new(f[0], f[1], f[2], cfg.split.seed).map_err(|e| Error::config("--split", e.to_string()))?;
    }
    if let Some(c) = contamination {
        if !(0.0..0.5).contains(&c) {
            return Err(Error::config("--contamination", "must lie in [0, 0.5)"));
        }
        cfg.contamination = c;
    }
    let ds = artifacts::read_dataset(&data.unwrap_or_else(|| ctx.layout.dataset()))?;
    let p = prepare(&ds, &cfg)?;
    for (part, split) in [("train", &p.train), ("test", &p.test), ("validation", &p.validation)] {
        artifacts::write_dataset(&ctx.layout.split(part), split)?;
    }
    artifacts::write_text(&ctx.layout.scaler(), &p.scaler.to_json())?;
    let summary = PrepSummary {
        format_version: SUMMARY_FORMAT_VERSION,
        contamination: cfg.contamination,
        split: cfg.split,
        input_records: ds.len(),
        removed_records: p.removed_records,
        train: p.train.len(),
        test: p.test.len(),
        validation: p.validation.len(),
        groups: &p.groups,
    };
    artifacts::write_text(&ctx.layout.prep_summary(), &serde_json::to_string_pretty(&summary)?)?;
    for g in &p.groups {
        match (&g.flagged, &g.skipped) {
            (Some(k), _) => {
                writeln!(out, "outliers qubit={} state={} flagged={} of {}", g.qubit, g.state, k, g.group_size)?
            }
            (None, reason) => writeln!(
                out,
                "outliers qubit={} state={} skipped: {}",
                g.qubit,
                g.state,
                reason.as_deref().unwrap_or("robust fit failed")
            )?,
        }
    }
    writeln!(
        out,
        "removed={} train={} test={} validation={}",
        p.removed_records,
        p.train.len(),
        p.test.len(),
        p.validation.len()
    )?;
    Ok(())
}

fn train(ctx: Ctx, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let fit = |e| Failure::new(exit::FIT, e);
    let m = ctx.manifest().map_err(fit)?;
    let specs = ctx.model_specs().map_err(fit)?;
    let mode = ctx.mode();
    let load =
        |part: &str| -> Result<_> { Ok(restrict_to_mode(&artifacts::read_dataset(&ctx.layout.split(part))?, mode)) };
    let train = load("train").map_err(|e| Failure::new(exit::DATA, e))?;
    let val = load("validation").map_err(|e| Failure::new(exit::DATA, e))?;
    let scaler = artifacts::read_scaler(&ctx.layout.scaler()).map_err(|e| Failure::new(exit::DATA, e))?;
    let tx = scaler.transform(&train.feature_rows()).map_err(fit)?;
    let vx = scaler.transform(&val.feature_rows()).map_err(fit)?;
    let (tl, vl) = (train.labels(), val.labels());

    let mut times = Vec::new();
    let mut failed = Vec::new();
    for spec in &specs {
        match fit_model(spec, train.n_qubits, (&tx, &tl), Some((&vx, &vl)), m.seed)
            .and_then(|model| artifacts::write_model(&ctx.layout, &model).map(|_| model))
        {
            Ok(model) => {
                writeln!(out, "fitted {} in {:.3}s", model.name(), model.fit_wall_time()).map_err(|e| fit(e.into()))?;
                times.push((model.name().to_string(), model.fit_wall_time()));
            }
            Err(e) => {
                writeln!(out, "failed {}: {e}", spec.name()).map_err(|e| fit(e.into()))?;
                failed.push((spec.name(), e));
            }
        }
    }
    let record = TimingRecord { format_version: TIMING_FORMAT_VERSION, fit_wall_time: times.clone() };
    let json = serde_json::to_string_pretty(&record).map_err(|e| fit(e.into()))?;
    artifacts::write_text(&ctx.layout.timing(), &json).map_err(fit)?;
    if let Ok(table) = timing_table(&times) {
        write!(out, "{table}").map_err(|e| fit(e.into()))?;
    }
    match failed.into_iter().next() {
        None => Ok(()),
        Some((name, e)) => Err(Failure { code: exit::FIT, error: Error::invalid(format!("{name}: {e}")) }),
    }
}

fn evaluate_cmd(ctx: Ctx, out: &mut dyn Write) -> Result<()> {
    ctx.manifest()?;
    let names = ctx.model_names(Vec::new)?;
    let mode = ctx.mode();
    let test = artifacts::read_dataset(&ctx.layout.split("test"))?;
    let scaler = artifacts::read_scaler(&ctx.layout.scaler())?;
    let mut reports = Vec::new();
    for name in &names {
        let model = artifacts::read_model(&ctx.layout, name)?;
        if model.input_dim() != test.feature_dim() {
            return Err(Error::DimensionMismatch { expected: test.feature_dim(), got: model.input_dim() });
        }
        let report = evaluate(&model, &scaler, &test, mode)?;
        write_report(&ctx.layout, &report)?;
        writeln!(out, "{} F_GM={:.6}", report.model, report.system_fidelity)?;
        reports.push(report);
    }
    let table = comparison_table(&reports)?;
    artifacts::write_text(&ctx.layout.reports_dir().join("table.csv"), &table)?;
    write!(out, "{table}")?;
    Ok(())
}

fn write_report(layout: &Layout, r: &FidelityReport) -> Result<()> {
    artifacts::write_text(&layout.report(&r.model), &r.to_json())?;
    let dir = layout.reports_dir();
    artifacts::write_text(&dir.join(format!("{}_cross_fidelity.csv", r.model)), &r.cross_fidelity_csv())?;
    for q in 0..r.n_qubits {
        artifacts::write_text(&dir.join(format!("{}_confusion_q{q}.csv", r.model)), &r.confusion_csv(q))?;
    }
    Ok(())
}

fn report(ctx: Ctx, out: &mut dyn Write) -> Result<()> {
    let dir = ctx.layout.reports_dir();
    let names = ctx.model_names(|| {
        MODEL_ORDER.iter().filter(|n| dir.join(format!("{n}.json")).exists()).map(|n| n.to_string()).collect()
    })?;
    let reports = names
        .iter()
        .map(|n| FidelityReport::from_json(&artifacts::read_text(&ctx.layout.report(n))?))
        .collect::<Result<Vec<_>>>()?;
    let table = comparison_table(&reports)?;
    artifacts::write_text(&dir.join("table.csv"), &table)?;
    write!(out, "{table}")?;
    let timing_path = ctx.layout.timing();
    if timing_path.exists() {
        let rec: TimingRecord = serde_json::from_str(&artifacts::read_text(&timing_path)?)?;
        if rec.format_version != TIMING_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                what: "timing",
                found: rec.format_version,
                expected: TIMING_FORMAT_VERSION,
            });
        }
        let times: Vec<(String, f64)> = rec.fit_wall_time.into_iter().filter(|(n, _)| names.contains(n)).collect();
        match timing_table(&times) {
            Ok(t) => {
                artifacts::write_text(&dir.join("timing.csv"), &t)?;
                write!(out, "{t}")?;
            }
            Err(e) => writeln!(out, "timing table skipped: {e}")?,
        }
    }
    Ok(())
}

/// Cell-centre coordinates of `n` equal cells spanning `[lo, hi]`.
pub fn cell_centres(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let w = (hi - lo) / n as f64;
    (0..n).map(|k| lo + (k as f64 + 0.5) * w).collect()
}

fn grid_axis(flag: &str, range: Option<Vec<f64>>, mean: f64, std: f64, n: usize) -> Result<Vec<f64>> {
    let (lo, hi) = match range.as_deref() {
        Some(&[lo, hi]) => (lo, hi),
        Some(_) => return Err(Error::config(flag, "expected lo,hi")),
        None => (mean - 4.0 * std, mean + 4.0 * std),
    };
    if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
        return Err(Error::config(flag, format!("grid has zero or negative extent [{lo}, {hi}]")));
    }
    if n == 0 {
        return Err(Error::config("--cells", "grid has zero cells"));
    }
    Ok(cell_centres(lo, hi, n))
}

fn decision_surface(
    ctx: Ctx,
    name: &str,
    qubit: usize,
    i_range: Option<Vec<f64>>,
    q_range: Option<Vec<f64>>,
    cells: &[usize],
    out: &mut dyn Write,
) -> Result<()> {
    let scaler = artifacts::read_scaler(&ctx.layout.scaler())?;
    let model = artifacts::read_model(&ctx.layout, name)?;
    let dim = scaler.dim();
    if model.input_dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: model.input_dim() });
    }
    let n_qubits = dim / 2;
    if qubit >= n_qubits {
        return Err(Error::config("--qubit", format!("qubit {qubit} out of range for {n_qubits} qubits")));
    }
    let &[nx, ny] = cells else {
        return Err(Error::config("--cells", "expected nx,ny"));
    };
    let (ci, cq) = (2 * qubit, 2 * qubit + 1);
    let is = grid_axis("--i-range", i_range, scaler.mean[ci], scaler.std[ci], nx)?;
    let qs = grid_axis("--q-range", q_range, scaler.mean[cq], scaler.std[cq], ny)?;

    // Other qubits sit at the training mean, i.e. at zero after scaling.
    let mut rows = Vec::with_capacity(is.len() * qs.len());
    for &q in &qs {
        for &i in &is {
            let mut raw = scaler.mean.clone();
            raw[ci] = i;
            raw[cq] = q;
            rows.push(scaler.transform_row(&raw));
        }
    }
    let labels = model.predict(&rows)?;
    let mut text = format!(
        "# esprd-surface version={SURFACE_FORMAT_VERSION} model={name} qubit={qubit} n_qubits={n_qubits} nx={} ny={}\ni,q,label,qubit_state\n",
        is.len(),
        qs.len()
    );
    for (k, label) in labels.iter().enumerate() {
        let (i, q) = (is[k % is.len()], qs[k / is.len()]);
        text.push_str(&format!("{i},{q},{label},{}\n", digit_of(*label, qubit, n_qubits)));
    }
    let path = ctx.layout.surfaces_dir().join(format!("{name}_q{qubit}.csv"));
    artifacts::write_text(&path, &text)?;
    writeln!(out, "cells={} path={}", labels.len(), path.display())?;
    Ok(())
}

/// Equal-width bins over the sample range. A zero-width range gets a unit-wide
/// window centred on the value.
pub fn histogram_bins(values: &[f64], bins: usize) -> (f64, f64, Vec<u64>) {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    (lo, width, counts)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (mean, (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt())
}

fn histogram(ctx: Ctx, qubit: usize, state: u8, bins: usize, data: Option<PathBuf>, out: &mut dyn Write) -> Result<()> {
    if bins == 0 {
        return Err(Error::config("--bins", "must be at least 1"));
    }
    if state > 2 {
        return Err(Error::config("--state", "must be 0, 1 or 2"));
    }
    let ds = artifacts::read_dataset(&data.unwrap_or_else(|| ctx.layout.dataset()))?;
    let n = ds.n_qubits;
    if qubit >= n {
        return Err(Error::config("--qubit", format!("qubit {qubit} out of range for {n} qubits")));
    }
    let mut digits = vec![0u8; n];
    digits[qubit] = state;
    let label = encode_label(&digits)?;
    let group: Vec<&[f64]> =
        ds.records.iter().filter(|r| r.prepared_label == label).map(|r| r.features.as_slice()).collect();
    if group.is_empty() {
        return Err(Error::Coverage(format!("no shots prepared in label {label} (qubit {qubit} in |{state}⟩)")));
    }
    let i: Vec<f64> = group.iter().map(|f| f[2 * qubit]).collect();
    let q: Vec<f64> = group.iter().map(|f| f[2 * qubit + 1]).collect();
    let (mi, si) = mean_std(&i);
    let (mq, sq) = mean_std(&q);
    let mut text = format!(
        "# esprd-histogram version={HISTOGRAM_FORMAT_VERSION} qubit={qubit} state={state} label={label} n={} mean_i={mi} std_i={si} mean_q={mq} std_q={sq}\ncomponent,bin,lo,hi,count\n",
        group.len()
    );
    for (component, v) in [("I", &i), ("Q", &q)] {
        let (lo, w, counts) = histogram_bins(v, bins);
        for (k, c) in counts.iter().enumerate() {
            text.push_str(&format!("{component},{k},{},{},{c}\n", lo + k as f64 * w, lo + (k + 1) as f64 * w));
        }
    }
    let path = ctx.layout.histograms_dir().join(format!("q{qubit}_s{state}.csv"));
    artifacts::write_text(&path, &text)?;
    writeln!(out, "shots={} path={}", group.len(), path.display())?;
    Ok(())
}
