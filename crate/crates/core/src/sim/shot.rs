use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{Dataset, DeviceModel, ShotRecord};
use crate::dataprep::labels::{encode_label, num_states};
use crate::error::{Error, Result};

/// Upper bound on `3^N × shots_per_state` accepted by [`simulate_dataset`].
pub const DEFAULT_MAX_RECORDS: usize = 1 << 26;

/// Independent stream for one (device seed, label, shot, qubit) tuple.
fn shot_rng(seed: u64, label: usize, shot_index: u64, qubit: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(label as u64).to_le_bytes());
    key[16..24].copy_from_slice(&shot_index.to_le_bytes());
    key[24..].copy_from_slice(&(qubit as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Draw one readout shot for the prepared register state `digits` (qubit order).
pub fn simulate_shot(device: &DeviceModel, digits: &[u8], shot_index: u64) -> Result<ShotRecord> {
    let n = device.n_qubits();
    if digits.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: digits.len() });
    }
    let label = encode_label(digits)?;
    let mut features = Vec::with_capacity(2 * n);
    for (i, q) in device.qubits().iter().enumerate() {
        let s = digits[i] as usize;
        let mut rng = shot_rng(device.seed(), label, shot_index, i);
        let u: f64 = rng.random();
        let lambda: f64 = rng.random();
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);

        // Relaxation to a lower state partway through integration.
        let mut centre = q.means[s];
        let mut cumulative = 0.0;
        for t in (0..s).rev() {
            cumulative += q.decay[s][t];
            if u < cumulative {
                let target = q.means[t];
                centre =
                    [lambda * target[0] + (1.0 - lambda) * centre[0], lambda * target[1] + (1.0 - lambda) * centre[1]];
                break;
            }
        }

        let shift: f64 = device.crosstalk()[i].iter().zip(digits).map(|(c, &d)| c * d as f64).sum();

        let (l11, l21, l22) = q.cov(s).cholesky();
        let scale = device.noise_scale();
        features.push(centre[0] + shift + scale * (l11 * z0));
        features.push(centre[1] + shift + scale * (l21 * z0 + l22 * z1));
    }
    Ok(ShotRecord { features, prepared_label: label })
}

pub fn simulate_dataset(device: &DeviceModel, shots_per_state: usize) -> Result<Dataset> {
    simulate_dataset_with_limit(device, shots_per_state, DEFAULT_MAX_RECORDS)
}

/// Every label `0..3^N` with `shots_per_state` shots each, label-major.
pub fn simulate_dataset_with_limit(
    device: &DeviceModel,
    shots_per_state: usize,
    max_records: usize,
) -> Result<Dataset> {
    if shots_per_state == 0 {
        return Err(Error::invalid("shots_per_state must be at least 1"));
    }
    let n = device.n_qubits();
    let total = 3u128.pow(n as u32) * shots_per_state as u128;
    if total > max_records as u128 {
        return Err(Error::TooLarge { records: total, max: max_records });
    }
    let states = num_states(n);
    let records = (0..states * shots_per_state)
        .into_par_iter()
        .map(|k| {
            let label = k / shots_per_state;
            let shot = (k % shots_per_state) as u64;
            let digits = crate::dataprep::labels::decode_label(label, n)?;
            simulate_shot(device, &digits, shot)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        n_qubits: n,
        shots_per_state,
        seed: device.seed(),
        provenance: format!("simulated; {states} states x {shots_per_state} shots"),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::QubitParams;

    fn one_qubit(p10: f64, noise: f64) -> DeviceModel {
        let q = QubitParams::isotropic([[0.0, 0.0], [1.0, 0.0], [2.0, 1.0]], 0.04).with_decay(1, 0, p10);
        DeviceModel::new(vec![q], None, 11).unwrap().with_noise_scale(noise).unwrap()
    }

    #[test]
    fn noiseless_shot_sits_on_mean() {
        let d = one_qubit(0.0, 0.0);
        for s in 0..3u8 {
            let r = simulate_shot(&d, &[s], 5).unwrap();
            assert_eq!(r.features, d.qubit(0).means[s as usize].to_vec());
            assert_eq!(r.prepared_label, s as usize);
        }
    }

    #[test]
    fn repeated_calls_identical() {
        let d = one_qubit(0.3, 1.0);
        let a = simulate_shot(&d, &[2], 77).unwrap();
        let b = simulate_shot(&d, &[2], 77).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, simulate_shot(&d, &[2], 78).unwrap());
    }

    #[test]
    fn rejects_invalid_digit() {
        let d = one_qubit(0.0, 1.0);
        assert!(matches!(simulate_shot(&d, &[3], 0), Err(Error::InvalidDigit { .. })));
        assert!(simulate_shot(&d, &[0, 1], 0).is_err());
    }

    #[test]
    fn decay_fraction_matches_probability() {
        // Decayed shots land strictly inside the |1>→|0> segment unless λ hits exactly 0.
        let d = one_qubit(0.5, 0.0);
        let n = 100_000;
        let inside = (0..n)
            .filter(|&k| {
                let f = simulate_shot(&d, &[1], k).unwrap().features;
                f[1] == 0.0 && f[0] > 0.0 && f[0] < 1.0
            })
            .count();
        let frac = inside as f64 / n as f64;
        // binomial sd = sqrt(0.25 / 1e5) ≈ 0.0016
        assert!((frac - 0.5).abs() < 0.01, "fraction {frac}");
    }

    #[test]
    fn dataset_sizes_and_order() {
        let d = one_qubit(0.0, 1.0);
        let ds = simulate_dataset(&d, 1).unwrap();
        assert_eq!(ds.records.len(), 3);
        assert_eq!(ds.records.iter().map(|r| r.prepared_label).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(simulate_dataset(&d, 0).is_err());
        assert!(matches!(simulate_dataset_with_limit(&d, 10, 29), Err(Error::TooLarge { .. })));
    }
}
