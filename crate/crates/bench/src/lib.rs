//! Shared fixtures for the benchmarks.

use esprd_core::sim::{simulate_dataset, DeviceModel, QubitParams};
use esprd_core::{Dataset, ScalerParams};

/// A small coupled device with decay on every qubit.
pub fn device(n_qubits: usize) -> DeviceModel {
    let qubits = (0..n_qubits)
        .map(|i| {
            let o = 0.1 * i as f64;
            QubitParams::isotropic([[o, 0.0], [o + 1.0, 0.1], [o + 0.4, 1.0]], 0.03).with_decay(2, 1, 0.03)
        })
        .collect();
    let xt = (0..n_qubits).map(|i| (0..n_qubits).map(|j| if i == j { 0.0 } else { 0.02 }).collect()).collect();
    DeviceModel::new(qubits, Some(xt), 1).expect("valid bench device")
}

/// Scaled features and labels for `shots` shots per state.
pub fn scaled(n_qubits: usize, shots: usize) -> (Dataset, Vec<Vec<f64>>, Vec<usize>) {
    let ds = simulate_dataset(&device(n_qubits), shots).expect("simulate");
    let rows = ds.feature_rows();
    let scaler = ScalerParams::fit(&rows).expect("scaler");
    let x = scaler.transform(&rows).expect("transform");
    let y = ds.labels();
    (ds, x, y)
}
