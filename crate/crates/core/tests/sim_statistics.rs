use esprd_core::sim::{simulate_shot, DeviceModel, QubitParams};

const SHOTS: u64 = 100_000;

fn one_qubit(var: f64) -> QubitParams {
    QubitParams::isotropic([[0.0, 0.0], [1.0, 0.5], [-0.5, 1.0]], var)
}

fn moments(v: &[f64]) -> (f64, f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let m2 = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = v.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    (mean, m2, m4 / (m2 * m2) - 3.0)
}

#[test]
fn noise_is_gaussian_around_the_state_mean() {
    let var = 0.04;
    let device = DeviceModel::new(vec![one_qubit(var)], None, 17).unwrap();
    for s in 0..3u8 {
        let shots: Vec<Vec<f64>> = (0..SHOTS).map(|k| simulate_shot(&device, &[s], k).unwrap().features).collect();
        for axis in 0..2 {
            let col: Vec<f64> = shots.iter().map(|f| f[axis]).collect();
            let (mean, m2, kurt) = moments(&col);
            let want = device.qubit(0).means[s as usize][axis];
            let sigma = var.sqrt();
            assert!((mean - want).abs() < 4.0 * sigma / (SHOTS as f64).sqrt(), "state {s} axis {axis}: {mean}");
            assert!((m2 / var - 1.0).abs() < 0.02, "variance {m2}");
            assert!(kurt.abs() < 0.1, "excess kurtosis {kurt}");
        }
    }
}

#[test]
fn correlated_covariance_is_reproduced() {
    let mut q = one_qubit(0.01);
    q.covs[1] = [[0.02, 0.01], [0.01, 0.03]];
    let device = DeviceModel::new(vec![q], None, 5).unwrap();
    let shots: Vec<Vec<f64>> = (0..SHOTS).map(|k| simulate_shot(&device, &[1], k).unwrap().features).collect();
    let n = SHOTS as f64;
    let (mi, mq) = (shots.iter().map(|f| f[0]).sum::<f64>() / n, shots.iter().map(|f| f[1]).sum::<f64>() / n);
    let cov = shots.iter().map(|f| (f[0] - mi) * (f[1] - mq)).sum::<f64>() / n;
    assert!((cov - 0.01).abs() < 0.001, "{cov}");
}

#[test]
fn crosstalk_shift_is_linear_in_the_neighbour_level() {
    let c = 0.07;
    let xt = vec![vec![0.0, c], vec![0.0, 0.0]];
    let noiseless =
        DeviceModel::new(vec![one_qubit(0.01), one_qubit(0.01)], Some(xt), 1).unwrap().with_noise_scale(0.0).unwrap();
    let at = |s1: u8| simulate_shot(&noiseless, &[0, s1], 0).unwrap().features;
    let (f0, f1, f2) = (at(0), at(1), at(2));
    for axis in 0..2 {
        assert!((f1[axis] - f0[axis] - c).abs() < 1e-15);
        assert!((f2[axis] - f0[axis] - 2.0 * c).abs() < 1e-15);
    }
    // qubit 1 is not coupled back
    let q1 = |s0: u8| simulate_shot(&noiseless, &[s0, 0], 0).unwrap().features[2..].to_vec();
    assert_eq!(q1(0), q1(2));
}

#[test]
fn decay_fraction_matches_probability() {
    let p = 0.2;
    let q = QubitParams::isotropic([[0.0, 0.0], [10.0, 0.0], [20.0, 0.0]], 1e-4).with_decay(2, 1, p);
    let device = DeviceModel::new(vec![q], None, 3).unwrap();
    let n = 50_000u64;
    let decayed =
        (0..n).filter(|&k| simulate_shot(&device, &[2], k).unwrap().features[0] < 19.9).count() as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!((decayed - p).abs() < 4.0 * se, "{decayed}");
}
