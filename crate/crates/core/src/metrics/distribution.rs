//! 1-D earth mover's distance and Gaussian kernel density estimation.

use crate::error::{Error, Result};

/// Wasserstein-1 distance between two empirical distributions, computed as
/// the exact integral of `|F_a - F_b|` over the merged support. Sample sizes
/// may differ.
pub fn emd_1d(samples_a: &[f64], samples_b: &[f64]) -> Result<f64> {
    if samples_a.is_empty() || samples_b.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut a = samples_a.to_vec();
    let mut b = samples_b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);

    let na = a.len() as f64;
    let nb = b.len() as f64;
    let mut ia = 0usize;
    let mut ib = 0usize;
    let mut distance = 0.0;
    let mut prev = f64::NAN;
    while ia < a.len() || ib < b.len() {
        let x = match (a.get(ia), b.get(ib)) {
            (Some(&va), Some(&vb)) => va.min(vb),
            (Some(&va), None) => va,
            (None, Some(&vb)) => vb,
            (None, None) => unreachable!(),
        };
        if !prev.is_nan() && x > prev {
            let fa = ia as f64 / na;
            let fb = ib as f64 / nb;
            distance += (fa - fb).abs() * (x - prev);
        }
        while ia < a.len() && a[ia] == x {
            ia += 1;
        }
        while ib < b.len() && b[ib] == x {
            ib += 1;
        }
        prev = x;
    }
    Ok(distance)
}

/// Scott's-rule bandwidth `std * n^(-1/5)` with the sample (n-1) standard
/// deviation, floored to stay positive for degenerate inputs.
pub fn scott_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 1e-8;
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let var = samples.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    (var.sqrt() * nf.powf(-0.2)).max(1e-8)
}

/// Gaussian KDE evaluated on a grid: the mean of normal densities centered
/// at each sample with the given bandwidth.
pub fn kde_gaussian(samples: &[f64], grid: &[f64], bandwidth: f64) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidValue(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let norm = 1.0 / (samples.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    Ok(grid
        .iter()
        .map(|&g| {
            let mut total = 0.0;
            for &x in samples {
                let z = (g - x) / bandwidth;
                total += (-0.5 * z * z).exp();
            }
            total * norm
        })
        .collect())
}

/// Evenly spaced grid covering `[lo, hi]` with `points >= 2` entries.
pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|i| lo + step * i as f64).collect()
}
