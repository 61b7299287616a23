//! Elliptic-envelope outlier flagging on 2-D IQ clusters.
//!
//! A minimum-covariance-determinant style estimate is obtained by concentration
//! steps: starting from a median/MAD guess, the half-sample with the smallest
//! Mahalanobis distances is refitted until the covariance determinant stops
//! decreasing. The `⌈contamination · M⌉` points farthest from the final estimate
//! are flagged.

use crate::error::{Error, Result};
use crate::linalg::Sym2;

pub const MIN_POINTS: usize = 10;
pub const MAX_CSTEPS: usize = 30;

/// Robust location/scatter estimate of a 2-D point cloud.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustFit {
    pub center: [f64; 2],
    /// `[[a, b], [b, c]]`
    pub cov: [[f64; 2]; 2],
    pub iterations: usize,
}

impl RobustFit {
    fn sym(&self) -> Sym2 {
        Sym2 { a: self.cov[0][0], b: self.cov[0][1], c: self.cov[1][1] }
    }

    pub fn mahalanobis_sq(&self, p: [f64; 2]) -> f64 {
        self.sym().mahalanobis_sq(p[0] - self.center[0], p[1] - self.center[1])
    }
}

/// Number of points flagged for a given contamination, `⌈c · M⌉`.
pub fn outlier_count(contamination: f64, m: usize) -> usize {
    let x = contamination * m as f64;
    // products like 0.01 · 500 must not round up to 6
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r as usize
    } else {
        x.ceil() as usize
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn moments(points: &[[f64; 2]], idx: &[usize]) -> ([f64; 2], Sym2) {
    let n = idx.len() as f64;
    let (mut mx, mut my) = (0.0, 0.0);
    for &i in idx {
        mx += points[i][0];
        my += points[i][1];
    }
    mx /= n;
    my /= n;
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for &i in idx {
        let dx = points[i][0] - mx;
        let dy = points[i][1] - my;
        a += dx * dx;
        b += dx * dy;
        c += dy * dy;
    }
    ([mx, my], Sym2 { a: a / n, b: b / n, c: c / n })
}

fn degenerate(cov: &Sym2) -> bool {
    let max_eig = 0.5 * (cov.a + cov.c) + (0.25 * (cov.a - cov.c).powi(2) + cov.b * cov.b).sqrt();
    !(max_eig > 0.0) || !(cov.min_eigenvalue() > 1e-12 * max_eig)
}

/// Fit the robust centre and covariance.
pub fn robust_fit(points: &[[f64; 2]]) -> Result<RobustFit> {
    let m = points.len();
    if m < MIN_POINTS {
        return Err(Error::invalid(format!("outlier removal needs at least {MIN_POINTS} points, got {m}")));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("outlier input"));
    }
    let h = (m + 3) / 2;
    let all: Vec<usize> = (0..m).collect();

    let mut xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
    let mut ys: Vec<f64> = points.iter().map(|p| p[1]).collect();
    let (medx, medy) = (median(&mut xs), median(&mut ys));
    let mut devx: Vec<f64> = points.iter().map(|p| (p[0] - medx).abs()).collect();
    let mut devy: Vec<f64> = points.iter().map(|p| (p[1] - medy).abs()).collect();
    let (madx, mady) = (median(&mut devx) * 1.4826, median(&mut devy) * 1.4826);

    let (mut center, mut cov) = if madx > 0.0 && mady > 0.0 {
        ([medx, medy], Sym2 { a: madx * madx, b: 0.0, c: mady * mady })
    } else {
        moments(points, &all)
    };
    if degenerate(&cov) {
        return Err(Error::DegenerateCovariance("point cloud has no 2-D spread".into()));
    }

    let mut best_det = f64::INFINITY;
    let mut iterations = 0;
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(m);
    for _ in 0..MAX_CSTEPS {
        order.clear();
        order.extend(
            points.iter().enumerate().map(|(i, p)| (cov.mahalanobis_sq(p[0] - center[0], p[1] - center[1]), i)),
        );
        order.select_nth_unstable_by(h - 1, |x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let mut subset: Vec<usize> = order[..h].iter().map(|&(_, i)| i).collect();
        subset.sort_unstable();
        let (c, s) = moments(points, &subset);
        if degenerate(&s) {
            return Err(Error::DegenerateCovariance("half-sample covariance is singular (collinear points)".into()));
        }
        let det = s.det();
        iterations += 1;
        if det >= best_det {
            break;
        }
        best_det = det;
        center = c;
        cov = s;
    }
    Ok(RobustFit { center, cov: [[cov.a, cov.b], [cov.b, cov.c]], iterations })
}

/// Keep-mask over `points`: `false` marks one of the `⌈contamination · M⌉` points
/// with the largest robust Mahalanobis distance (ties flag the lower index first).
pub fn remove_outliers(points: &[[f64; 2]], contamination: f64) -> Result<Vec<bool>> {
    if !(0.0..0.5).contains(&contamination) {
        return Err(Error::invalid(format!("contamination {contamination} outside [0, 0.5)")));
    }
    if points.len() < MIN_POINTS {
        return Err(Error::invalid(format!(
            "outlier removal needs at least {MIN_POINTS} points, got {}",
            points.len()
        )));
    }
    let mut keep = vec![true; points.len()];
    if contamination == 0.0 {
        return Ok(keep);
    }
    let fit = robust_fit(points)?;
    let k = outlier_count(contamination, points.len());
    let mut ranked: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, &p)| (fit.mahalanobis_sq(p), i)).collect();
    ranked.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    for &(_, i) in &ranked[..k] {
        keep[i] = false;
    }
    Ok(keep)
}
