//! Experiment manifests and the in-memory simulate → prep → train → evaluate
//! pipeline.

use std::path::{Path, PathBuf};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataprep::{prepare, PrepConfig, Prepared, ScalerParams, SplitSpec, DEFAULT_CONTAMINATION};
use crate::discriminators::{self, ClassifierSpec, TrainedModel};
use crate::error::{Error, Result};
use crate::metrics::{timing_ratios, EvalMode, FidelityReport, Timing};
use crate::neural::{self, FnnArchitecture, FnnModel, TrainConfig, DEFAULT_HIDDEN};
use crate::sim::{simulate_dataset, Dataset, DeviceModel};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

fn default_hidden() -> Vec<usize> {
    DEFAULT_HIDDEN.to_vec()
}

/// Network entry of a manifest. Unset seeds derive from the manifest seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FnnSpec {
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shuffle_seed: Option<u64>,
}

impl Default for FnnSpec {
    fn default() -> Self {
        FnnSpec {
            hidden: default_hidden(),
            epochs: None,
            batch_size: None,
            learning_rate: None,
            init_seed: None,
            shuffle_seed: None,
        }
    }
}

impl FnnSpec {
    pub fn train_config(&self, master_seed: u64) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            epochs: self.epochs.unwrap_or(d.epochs),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            init_seed: self.init_seed.unwrap_or_else(|| derive_seed(master_seed, 2)),
            shuffle_seed: self.shuffle_seed.unwrap_or_else(|| derive_seed(master_seed, 3)),
            ..d
        }
    }
}

/// One model listed in a manifest: a classical discriminator or the network.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Classical(ClassifierSpec),
    Fnn(FnnSpec),
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Classical(s) => s.kind().name(),
            ModelSpec::Fnn(_) => "fnn",
        }
    }

    /// The six models with their default hyperparameters.
    pub fn all_defaults() -> Vec<ModelSpec> {
        use crate::discriminators::ClassifierKind::*;
        let mut v: Vec<ModelSpec> = [Knn, Dtc, Gnb, Qda, Lda]
            .into_iter()
            .map(|k| ModelSpec::Classical(ClassifierSpec::default_for(k)))
            .collect();
        v.push(ModelSpec::Fnn(FnnSpec::default()));
        v
    }

    pub fn parse_name(name: &str) -> Result<ModelSpec> {
        let v = serde_json::json!({ "kind": name.trim() });
        serde_json::from_value(v).map_err(|e| Error::config("--models", e.to_string()))
    }
}

impl<'de> Deserialize<'de> for ModelSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let mut v = serde_json::Value::deserialize(d)?;
        match v.get("kind").and_then(|k| k.as_str()) {
            Some("fnn") => {
                v.as_object_mut().map(|o| o.remove("kind"));
                FnnSpec::deserialize(v).map(ModelSpec::Fnn).map_err(D::Error::custom)
            }
            Some(_) => ClassifierSpec::deserialize(v).map(ModelSpec::Classical).map_err(D::Error::custom),
            None => Err(D::Error::custom("model entry needs a \"kind\"")),
        }
    }
}

impl Serialize for ModelSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ModelSpec::Classical(c) => c.serialize(s),
            ModelSpec::Fnn(f) => {
                let mut v = serde_json::to_value(f).map_err(serde::ser::Error::custom)?;
                v.as_object_mut().expect("struct").insert("kind".into(), "fnn".into());
                v.serialize(s)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fractions {
    pub train: f64,
    pub test: f64,
    pub validation: f64,
}

impl Default for Fractions {
    fn default() -> Self {
        Fractions { train: 0.5, test: 0.3, validation: 0.2 }
    }
}

fn default_contamination() -> f64 {
    DEFAULT_CONTAMINATION
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepSettings {
    #[serde(default = "default_contamination")]
    pub contamination: f64,
    #[serde(default)]
    pub fractions: Fractions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_seed: Option<u64>,
}

impl Default for PrepSettings {
    fn default() -> Self {
        PrepSettings { contamination: DEFAULT_CONTAMINATION, fractions: Fractions::default(), split_seed: None }
    }
}

fn default_shots() -> usize {
    2048
}
fn default_mode() -> EvalMode {
    EvalMode::Multi
}
fn default_version() -> u32 {
    MANIFEST_FORMAT_VERSION
}

/// Experiment description (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    #[serde(default = "default_version")]
    pub format_version: u32,
    /// Device config path, relative to the manifest's directory.
    pub device: PathBuf,
    #[serde(default = "default_shots")]
    pub shots_per_state: usize,
    /// Master seed for splitting and network training.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub prep: PrepSettings,
    pub models: Vec<ModelSpec>,
    #[serde(default = "default_mode")]
    pub mode: EvalMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Directory the manifest was loaded from; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentManifest {
    pub fn from_json_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut m: ExperimentManifest =
            serde_json::from_str(text).map_err(|e| Error::config("<manifest>", e.to_string()))?;
        m.base_dir = base_dir.into();
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), format!("cannot read manifest: {e}")))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json_str(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != MANIFEST_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                what: "manifest",
                found: self.format_version,
                expected: MANIFEST_FORMAT_VERSION,
            });
        }
        if self.models.is_empty() {
            return Err(Error::config("models", "at least one model must be listed"));
        }
        for (i, m) in self.models.iter().enumerate() {
            if self.models[..i].iter().any(|o| o.name() == m.name()) {
                return Err(Error::config(format!("models[{i}]"), format!("duplicate model {}", m.name())));
            }
            if let ModelSpec::Classical(c) = m {
                c.validate().map_err(|e| Error::config(format!("models[{i}]"), e.to_string()))?;
            }
        }
        if self.shots_per_state == 0 {
            return Err(Error::config("shots_per_state", "must be at least 1"));
        }
        if !(0.0..0.5).contains(&self.prep.contamination) {
            return Err(Error::config("prep.contamination", "must lie in [0, 0.5)"));
        }
        self.split_spec().validate().map_err(|e| Error::config("prep.fractions", e.to_string()))?;
        Ok(())
    }

    pub fn device_path(&self) -> PathBuf {
        self.base_dir.join(&self.device)
    }

    pub fn split_spec(&self) -> SplitSpec {
        let f = self.prep.fractions;
        SplitSpec {
            train: f.train,
            test: f.test,
            validation: f.validation,
            seed: self.prep.split_seed.unwrap_or_else(|| derive_seed(self.seed, 1)),
        }
    }

    pub fn prep_config(&self) -> PrepConfig {
        PrepConfig { contamination: self.prep.contamination, split: self.split_spec() }
    }
}

/// SplitMix64 finaliser over `(seed, stream)`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A fitted model of either family.
#[derive(Debug, Clone)]
pub enum Discriminator {
    Classical(TrainedModel),
    Neural(FnnModel),
}

impl Discriminator {
    pub fn name(&self) -> &'static str {
        match self {
            Discriminator::Classical(m) => m.kind().name(),
            Discriminator::Neural(_) => "fnn",
        }
    }

    pub fn fit_wall_time(&self) -> f64 {
        match self {
            Discriminator::Classical(m) => m.fit_wall_time,
            Discriminator::Neural(m) => m.fit_wall_time,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Discriminator::Classical(m) => m.dim,
            Discriminator::Neural(m) => m.arch.input_dim,
        }
    }

    /// Flat labels for already-scaled feature rows.
    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>> {
        match self {
            Discriminator::Classical(m) => m.predict(rows),
            Discriminator::Neural(m) => m.predict_rows(rows),
        }
    }
}

/// Keep only the single-qubit family when `mode` is single.
pub fn restrict_to_mode(ds: &Dataset, mode: EvalMode) -> Dataset {
    match mode {
        EvalMode::Multi => ds.clone(),
        EvalMode::Single => ds.with_records(
            ds.records.iter().filter(|r| EvalMode::single_family(r.prepared_label, ds.n_qubits)).cloned().collect(),
        ),
    }
}

/// Fit one model on scaled training rows.
pub fn fit_model(
    spec: &ModelSpec,
    n_qubits: usize,
    train: (&[Vec<f64>], &[usize]),
    validation: Option<(&[Vec<f64>], &[usize])>,
    master_seed: u64,
) -> Result<Discriminator> {
    match spec {
        ModelSpec::Classical(c) => Ok(Discriminator::Classical(discriminators::fit(c, train.0, train.1)?)),
        ModelSpec::Fnn(f) => {
            let cfg = f.train_config(master_seed);
            let arch = FnnArchitecture::for_qubits(n_qubits).with_hidden(f.hidden.clone());
            let model = FnnModel::init(arch, cfg.init_seed)?;
            let x = neural::rows_to_array(train.0, 2 * n_qubits)?;
            let val = match validation {
                Some((vx, vl)) if !vx.is_empty() => Some((neural::rows_to_array(vx, 2 * n_qubits)?, vl)),
                _ => None,
            };
            let trained = neural::train(model, x.view(), train.1, val.as_ref().map(|(a, l)| (a.view(), *l)), &cfg)?;
            Ok(Discriminator::Neural(trained))
        }
    }
}

/// Fidelity report of a model on an unscaled evaluation split.
pub fn evaluate(
    model: &Discriminator,
    scaler: &ScalerParams,
    split: &Dataset,
    mode: EvalMode,
) -> Result<FidelityReport> {
    let eval = restrict_to_mode(split, mode);
    let x = scaler.transform(&eval.feature_rows())?;
    let predicted = model.predict(&x)?;
    FidelityReport::compute(model.name(), &eval.labels(), &predicted, split.n_qubits, mode)
}

#[derive(Debug)]
pub struct PipelineOutcome {
    pub prepared: Prepared,
    pub models: Vec<Discriminator>,
    /// One report per model on the test split, with timing attached.
    pub reports: Vec<FidelityReport>,
}

/// Simulate, prepare, fit every model on the same training split and evaluate on
/// the test split.
pub fn run_pipeline(
    device: &DeviceModel,
    shots_per_state: usize,
    prep: &PrepConfig,
    models: &[ModelSpec],
    mode: EvalMode,
    master_seed: u64,
) -> Result<PipelineOutcome> {
    let dataset = simulate_dataset(device, shots_per_state)?;
    let prepared = prepare(&dataset, prep)?;
    let n = dataset.n_qubits;
    let train = restrict_to_mode(&prepared.train, mode);
    let val = restrict_to_mode(&prepared.validation, mode);
    let tx = prepared.scaler.transform(&train.feature_rows())?;
    let vx = prepared.scaler.transform(&val.feature_rows())?;
    let (tl, vl) = (train.labels(), val.labels());
    let fitted = models
        .iter()
        .map(|spec| fit_model(spec, n, (&tx, &tl), Some((&vx, &vl)), master_seed))
        .collect::<Result<Vec<_>>>()?;
    let mut reports =
        fitted.iter().map(|m| evaluate(m, &prepared.scaler, &prepared.test, mode)).collect::<Result<Vec<_>>>()?;
    let times: Vec<(String, f64)> = fitted.iter().map(|m| (m.name().to_string(), m.fit_wall_time())).collect();
    if let Ok(ratios) = timing_ratios(&times) {
        for (r, ((_, t), (_, ratio))) in reports.iter_mut().zip(times.iter().zip(ratios)) {
            r.timing = Some(Timing { fit_wall_time: *t, log10_ratio_vs_gnb: ratio });
        }
    }
    Ok(PipelineOutcome { prepared, models: fitted, reports })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MANIFEST: &str = r#"{
        "device": "device.json",
        "shots_per_state": 64,
        "seed": 5,
        "prep": {"contamination": 0.0, "fractions": {"train": 0.6, "test": 0.2, "validation": 0.2}},
        "models": [{"kind": "knn", "k": 5}, {"kind": "gnb"}, {"kind": "fnn", "hidden": [8], "epochs": 2}],
        "mode": "single"
    }"#;

    #[test]
    fn manifest_parses_with_defaults() {
        let m = ExperimentManifest::from_json_str(MANIFEST, "/tmp/x").unwrap();
        assert_eq!(m.device_path(), PathBuf::from("/tmp/x/device.json"));
        assert_eq!(m.mode, EvalMode::Single);
        assert_eq!(m.models[0], ModelSpec::Classical(ClassifierSpec::Knn { k: 5 }));
        let ModelSpec::Fnn(f) = &m.models[2] else { panic!() };
        assert_eq!(f.hidden, vec![8]);
        let cfg = f.train_config(m.seed);
        assert_eq!((cfg.epochs, cfg.batch_size), (2, 256));
        assert_eq!(cfg.init_seed, derive_seed(5, 2));
        let back: ExperimentManifest = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back.models, m.models);
    }

    #[test]
    fn manifest_rejections_name_the_key() {
        let dup = MANIFEST.replace(r#"{"kind": "gnb"}"#, r#"{"kind": "knn"}"#);
        let e = ExperimentManifest::from_json_str(&dup, "").unwrap_err();
        assert!(e.to_string().starts_with("models[1]"), "{e}");
        let none = r#"{"device": "d.json", "models": []}"#;
        assert!(ExperimentManifest::from_json_str(none, "").unwrap_err().to_string().starts_with("models"));
        let bad = MANIFEST.replace("0.6", "0.7");
        assert!(ExperimentManifest::from_json_str(&bad, "").unwrap_err().to_string().starts_with("prep.fractions"));
    }

    #[test]
    fn model_names_parse() {
        assert_eq!(ModelSpec::parse_name("fnn").unwrap(), ModelSpec::Fnn(FnnSpec::default()));
        assert_eq!(ModelSpec::parse_name("qda").unwrap().name(), "qda");
        assert!(ModelSpec::parse_name("svm").is_err());
        let names: Vec<&str> = ModelSpec::all_defaults().iter().map(|m| m.name()).collect();
        assert_eq!(names, ["knn", "dtc", "gnb", "qda", "lda", "fnn"]);
    }
}
