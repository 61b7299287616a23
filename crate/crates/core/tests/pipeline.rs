use esprd_core::dataprep::{PrepConfig, SplitSpec};
use esprd_core::experiment::{run_pipeline, FnnSpec, ModelSpec};
use esprd_core::metrics::EvalMode;
use esprd_core::sim::{DeviceModel, QubitParams};
use esprd_core::{ClassifierKind, ClassifierSpec};

fn device() -> DeviceModel {
    let q =
        |dx: f64| QubitParams::isotropic([[dx, 0.0], [dx + 1.0, 0.0], [dx + 0.5, 0.9]], 0.02).with_decay(2, 1, 0.03);
    let xt = vec![vec![0.0, 0.02], vec![0.01, 0.0]];
    DeviceModel::new(vec![q(0.0), q(0.3)], Some(xt), 99).unwrap()
}

fn models() -> Vec<ModelSpec> {
    vec![
        ModelSpec::Classical(ClassifierSpec::default_for(ClassifierKind::Gnb)),
        ModelSpec::Classical(ClassifierSpec::Knn { k: 7 }),
        ModelSpec::Fnn(FnnSpec { hidden: vec![32], epochs: Some(30), batch_size: Some(32), ..FnnSpec::default() }),
    ]
}

fn prep() -> PrepConfig {
    PrepConfig { contamination: 0.01, split: SplitSpec::new(0.5, 0.3, 0.2, 4).unwrap() }
}

#[test]
fn multi_qubit_pipeline_end_to_end() {
    let out = run_pipeline(&device(), 200, &prep(), &models(), EvalMode::Multi, 1).unwrap();
    assert_eq!(out.reports.len(), 3);
    for r in &out.reports {
        assert_eq!(r.n_qubits, 2);
        assert!(r.system_fidelity > 0.8, "{}: {}", r.model, r.system_fidelity);
        assert!(r.timing.is_some());
    }
    assert_eq!(out.reports[0].timing.as_ref().unwrap().log10_ratio_vs_gnb, 0.0);
}

#[test]
fn pipeline_reports_are_reproducible() {
    let a = run_pipeline(&device(), 64, &prep(), &models(), EvalMode::Single, 1).unwrap();
    let b = run_pipeline(&device(), 64, &prep(), &models(), EvalMode::Single, 1).unwrap();
    for (x, y) in a.reports.iter().zip(&b.reports) {
        let (mut x, mut y) = (x.clone(), y.clone());
        x.timing = None;
        y.timing = None;
        assert_eq!(x.to_json(), y.to_json());
    }
}
