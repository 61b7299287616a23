use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use esprd_core::dataprep::largest_remainder;
use esprd_core::metrics::FidelityReport;
use esprd_core::{Dataset, ScalerParams};
use sha2::{Digest, Sha256};

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new(device: &str, manifest: &str) -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("device.json"), device).unwrap();
        std::fs::write(dir.path().join("manifest.json"), manifest).unwrap();
        Fixture { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn esprd(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_esprd"))
            .args(args)
            .arg("--manifest")
            .arg(self.path("manifest.json"))
            .env_remove("ESPRD_OUT_DIR")
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let o = self.esprd(args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    }

    fn out(&self, rel: &str) -> PathBuf {
        self.path("out").join(rel)
    }

    fn read(&self, rel: &str) -> String {
        std::fs::read_to_string(self.out(rel)).unwrap()
    }
}

fn sha(path: &Path) -> String {
    format!("{:x}", Sha256::digest(std::fs::read(path).unwrap()))
}

const TWO_QUBITS: &str = r#"{"n_qubits": 2, "seed": 4,
  "qubits": [{"means": [[0.0, 0.0], [1.0, 0.0], [0.5, 0.9]]}, {"means": [[0.0, 0.0], [1.0, 0.2], [0.3, 1.0]]}],
  "crosstalk": [[0.0, 0.02], [0.0, 0.0]]}"#;

fn manifest(models: &str, extra: &str) -> String {
    format!(
        r#"{{"device": "device.json", "shots_per_state": 200, "seed": 2, "out_dir": "out", "models": [{models}]{extra}}}"#
    )
}

#[test]
fn simulate_counts_and_is_reproducible() {
    let one = r#"{"n_qubits": 1, "seed": 1, "qubits": [{"means": [[0, 0], [1, 0], [0, 1]]}]}"#;
    let f = Fixture::new(
        one,
        &manifest(r#"{"kind": "gnb"}"#, r#", "shots_per_state": 1"#).replace(r#""shots_per_state": 200, "#, ""),
    );
    let stdout = f.ok(&["simulate"]);
    assert!(stdout.starts_with("states=3 shots_per_state=1 records=3 "), "{stdout}");
    let h1 = sha(&f.out("dataset.csv"));
    f.ok(&["simulate"]);
    assert_eq!(sha(&f.out("dataset.csv")), h1);
    let ds = Dataset::read_from(std::io::BufReader::new(std::fs::File::open(f.out("dataset.csv")).unwrap())).unwrap();
    assert_eq!(ds.len(), 3);
}

#[test]
fn prep_sizes_and_scaler() {
    let f = Fixture::new(TWO_QUBITS, &manifest(r#"{"kind": "gnb"}"#, r#", "prep": {"contamination": 0.0}"#));
    f.ok(&["simulate"]);
    let stdout = f.ok(&["prep"]);
    assert!(stdout.lines().filter(|l| l.starts_with("outliers")).all(|l| l.contains("flagged=0")), "{stdout}");
    // 200 shots per label, 50:30:20 by largest remainder, nine labels
    let [tr, te, va] = largest_remainder(200, [0.5, 0.3, 0.2]);
    assert!(stdout.contains(&format!("removed=0 train={} test={} validation={}", 9 * tr, 9 * te, 9 * va)), "{stdout}");

    let scaler = ScalerParams::from_json(&f.read("prep/scaler.json")).unwrap();
    let train = Dataset::read_from(f.read("prep/train.csv").as_bytes()).unwrap();
    let scaled = scaler.transform(&train.feature_rows()).unwrap();
    for c in 0..4 {
        let m = scaled.iter().map(|r| r[c]).sum::<f64>() / scaled.len() as f64;
        assert!(m.abs() < 1e-9, "column {c} mean {m}");
    }
}

#[test]
fn single_model_training_and_isolated_evaluation() {
    let f = Fixture::new(TWO_QUBITS, &manifest(r#"{"kind": "gnb"}"#, ""));
    f.ok(&["simulate"]);
    f.ok(&["prep"]);
    let stdout = f.ok(&["train"]);
    assert!(stdout.contains("gnb,") && stdout.contains(",0.000"), "{stdout}");
    assert!(f.out("models/gnb.json").exists());
    assert!(!f.out("models/knn.json").exists());
    let h = sha(&f.out("models/gnb.json"));
    f.ok(&["train"]);
    assert_eq!(sha(&f.out("models/gnb.json")), h);

    // evaluation must only need the prepared splits, never the raw dataset
    std::fs::remove_file(f.out("dataset.csv")).unwrap();
    f.ok(&["evaluate"]);
    let r = FidelityReport::from_json(&f.read("reports/gnb.json")).unwrap();
    assert_eq!(r.qubit_fidelities.len(), 2);
    assert_eq!(r.cross_fidelity.len(), 2);
    let table = f.read("reports/table.csv");
    let gm = table.lines().find(|l| l.starts_with("F_GM")).unwrap();
    let f_i: Vec<f64> = table
        .lines()
        .filter(|l| l.starts_with("F_") && !l.starts_with("F_GM"))
        .map(|l| l[4..].parse().unwrap())
        .collect();
    let recomputed = (f_i[0] * f_i[1]).sqrt();
    assert!((gm[5..].parse::<f64>().unwrap() - recomputed).abs() < 1e-3);
}

#[test]
fn perfect_separation_gives_unit_fidelity() {
    let far = r#"{"n_qubits": 2, "seed": 9, "default_variance": 0.0001,
      "qubits": [{"means": [[0, 0], [10, 0], [0, 10]]}, {"means": [[0, 0], [10, 0], [0, 10]]}]}"#;
    let models = r#"{"kind": "knn", "k": 5}, {"kind": "dtc"}, {"kind": "gnb"}, {"kind": "qda"}, {"kind": "lda"}, {"kind": "fnn", "hidden": [16], "epochs": 20, "batch_size": 32}"#;
    let f = Fixture::new(far, &manifest(models, ""));
    for verb in ["simulate", "prep", "train", "evaluate"] {
        f.ok(&[verb]);
    }
    for m in ["knn", "dtc", "gnb", "qda", "lda", "fnn"] {
        let r = FidelityReport::from_json(&f.read(&format!("reports/{m}.json"))).unwrap();
        assert!(r.qubit_fidelities.iter().all(|&x| x == 1.0), "{m}: {:?}", r.qubit_fidelities);
    }
    let stdout = f.ok(&["report"]);
    assert!(stdout.contains("log10_ratio_vs_gnb") && stdout.contains("gnb,"), "{stdout}");
    assert!(f.out("reports/timing.csv").exists());
}

#[test]
fn single_mode_only_scores_the_single_qubit_family() {
    let f = Fixture::new(
        TWO_QUBITS,
        &manifest(r#"{"kind": "lda"}"#, r#", "mode": "single", "prep": {"contamination": 0.0}"#),
    );
    for verb in ["simulate", "prep", "train", "evaluate"] {
        f.ok(&[verb]);
    }
    let r = FidelityReport::from_json(&f.read("reports/lda.json")).unwrap();
    // labels 0, 1, 2 (qubit 1 excited) and 3, 6 (qubit 0 excited): five of nine
    assert_eq!(r.n_shots, 5 * largest_remainder(200, [0.5, 0.3, 0.2])[1]);
}

fn surface(f: &Fixture, args: &[&str], name: &str) -> Vec<(f64, f64, usize)> {
    f.ok(args);
    f.read(name)
        .lines()
        .skip(2)
        .map(|l| {
            let v: Vec<&str> = l.split(',').collect();
            (v[0].parse().unwrap(), v[1].parse().unwrap(), v[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn decision_surfaces() {
    let one = r#"{"n_qubits": 1, "seed": 3, "qubits": [{"means": [[0, 0], [1, 0], [0.5, 0.9]]}]}"#;
    let f = Fixture::new(one, &manifest(r#"{"kind": "lda"}, {"kind": "knn", "k": 15}"#, ""));
    for verb in ["simulate", "prep", "train"] {
        f.ok(&[verb]);
    }
    let single = surface(
        &f,
        &["decision-surface", "--model", "lda", "--cells", "1,1", "--i-range", "-1,1", "--q-range", "-1,1"],
        "surfaces/lda_q0.csv",
    );
    assert_eq!(single.len(), 1);
    assert_eq!((single[0].0, single[0].1), (0.0, 0.0));

    // KNN: the cell at each cluster centre carries that cluster's label.
    for (label, (i, q)) in [(0usize, (0.0, 0.0)), (1, (1.0, 0.0)), (2, (0.5, 0.9))] {
        let (ir, qr) = (format!("{},{}", i - 0.01, i + 0.01), format!("{},{}", q - 0.01, q + 0.01));
        let s = surface(
            &f,
            &["decision-surface", "--model", "knn", "--cells", "1,1", "--i-range", &ir, "--q-range", &qr],
            "surfaces/knn_q0.csv",
        );
        assert_eq!(s[0].2, label);
    }

    // LDA between |0⟩ and |1⟩ along a strip: the boundary cells lie on a line.
    let n = 60;
    let cells = format!("{n},{n}");
    let grid = surface(
        &f,
        &["decision-surface", "--model", "lda", "--cells", &cells, "--i-range", "-0.5,1.5", "--q-range", "-0.6,0.3"],
        "surfaces/lda_q0.csv",
    );
    let (di, dq) = (2.0 / n as f64, 0.9 / n as f64);
    let mut boundary = Vec::new();
    for row in 0..n {
        let r = &grid[row * n..(row + 1) * n];
        if let Some(k) = (1..n).find(|&k| r[k].2 != r[k - 1].2 && r[k - 1].2 == 0 && r[k].2 == 1) {
            boundary.push(((r[k].0 + r[k - 1].0) / 2.0, r[k].1));
        }
    }
    assert!(boundary.len() > n / 2, "{} boundary rows", boundary.len());
    // least squares i = a + b q
    let m = boundary.len() as f64;
    let (sq, si) = boundary.iter().fold((0.0, 0.0), |(a, b), p| (a + p.1, b + p.0));
    let (mq, mi) = (sq / m, si / m);
    let sqq: f64 = boundary.iter().map(|p| (p.1 - mq).powi(2)).sum();
    let sqi: f64 = boundary.iter().map(|p| (p.1 - mq) * (p.0 - mi)).sum();
    let b = sqi / sqq;
    let worst = boundary.iter().map(|p| (p.0 - (mi + b * (p.1 - mq))).abs()).fold(0.0, f64::max);
    assert!(worst < di.max(dq), "residual {worst}");

    let o = f.esprd(&["decision-surface", "--model", "lda", "--i-range", "1,1"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn histograms() {
    let quiet =
        r#"{"n_qubits": 1, "seed": 3, "noise_scale": 0.0, "qubits": [{"means": [[0.2, 0.4], [1, 0], [0.5, 0.9]]}]}"#;
    let f = Fixture::new(quiet, &manifest(r#"{"kind": "gnb"}"#, ""));
    f.ok(&["simulate"]);
    f.ok(&["histogram", "--state", "0", "--bins", "7"]);
    let text = f.read("histograms/q0_s0.csv");
    for comp in ["I", "Q"] {
        let occupied =
            text.lines().filter(|l| l.starts_with(&format!("{comp},"))).filter(|l| !l.ends_with(",0")).count();
        assert_eq!(occupied, 1, "{text}");
    }

    let noisy = r#"{"n_qubits": 1, "seed": 3, "default_variance": 0.04, "qubits": [{"means": [[0.2, 0.4], [1, 0], [0.5, 0.9]]}]}"#;
    let f = Fixture::new(
        noisy,
        &manifest(r#"{"kind": "gnb"}"#, r#", "shots_per_state": 100000"#).replace(r#""shots_per_state": 200, "#, ""),
    );
    f.ok(&["simulate"]);
    f.ok(&["histogram", "--state", "2"]);
    let text = f.read("histograms/q0_s2.csv");
    let header = text.lines().next().unwrap();
    let field =
        |k: &str| -> f64 { header.split(' ').find_map(|t| t.strip_prefix(&format!("{k}="))).unwrap().parse().unwrap() };
    let bound = 4.0 * 0.2 / 100_000f64.sqrt();
    assert!((field("mean_i") - 0.5).abs() < bound && (field("mean_q") - 0.9).abs() < bound, "{header}");
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(2)
        .filter(|l| l.starts_with("I,"))
        .map(|l| l.split(',').skip(2).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 50);
    assert_eq!(rows.iter().map(|r| r[2]).sum::<f64>(), 100_000.0);
    // consecutive bins tile the range
    assert!(rows.windows(2).all(|w| w[0][1] == w[1][0]));

    let o = f.esprd(&["histogram", "--qubit", "3"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn exit_codes_and_output_precedence() {
    let f = Fixture::new(TWO_QUBITS, &manifest(r#"{"kind": "gnb"}"#, ""));
    // evaluation without artifacts is an evaluation failure
    assert_eq!(f.esprd(&["evaluate"]).status.code(), Some(6));
    assert_eq!(f.esprd(&["train"]).status.code(), Some(4));
    assert_eq!(f.esprd(&["prep", "--split", "0.5,0.5,0.5"]).status.code(), Some(3));
    assert_eq!(f.esprd(&["bogus"]).status.code(), Some(2));

    // flag > manifest > environment
    let env_dir = f.path("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_esprd"))
        .args(["simulate", "--manifest"])
        .arg(f.path("manifest.json"))
        .env("ESPRD_OUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(f.out("dataset.csv").exists() && !env_dir.exists());
    let flag_dir = f.path("from-flag");
    let o = Command::new(env!("CARGO_BIN_EXE_esprd"))
        .args(["simulate", "--out"])
        .arg(&flag_dir)
        .arg("--manifest")
        .arg(f.path("manifest.json"))
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(flag_dir.join("dataset.csv").exists());

    let no_out = Fixture::new(TWO_QUBITS, &manifest(r#"{"kind": "gnb"}"#, "").replace(r#""out_dir": "out", "#, ""));
    let o = Command::new(env!("CARGO_BIN_EXE_esprd"))
        .args(["simulate", "--manifest"])
        .arg(no_out.path("manifest.json"))
        .env("ESPRD_OUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(env_dir.join("dataset.csv").exists());
}

#[test]
fn seed_flag_changes_the_data() {
    let f = Fixture::new(TWO_QUBITS, &manifest(r#"{"kind": "gnb"}"#, ""));
    f.ok(&["simulate"]);
    let a = sha(&f.out("dataset.csv"));
    f.ok(&["simulate", "--seed", "99"]);
    assert_ne!(sha(&f.out("dataset.csv")), a);
}
