//! Binning analysis and least-squares helpers.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BinLevel {
    pub bin_size: usize,
    pub n_bins: usize,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimatorResult {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    /// Integrated autocorrelation time in samples (0.5 for independent data).
    pub autocorrelation_time: f64,
    pub ladder: Vec<BinLevel>,
}

pub const MIN_PLATEAU_BINS: usize = 16;

fn naive_se(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}

/// Mean and error bar of a correlated series. The error is the largest
/// binned error over levels that keep at least 16 bins.
pub fn estimate(series: &[f64]) -> Result<EstimatorResult> {
    if series.len() < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 samples, got {}", series.len())));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::InsufficientData("series contains non-finite values".into()));
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let mut ladder = Vec::new();
    let mut level: Vec<f64> = series.to_vec();
    let mut bin_size = 1;
    while level.len() >= 2 {
        ladder.push(BinLevel { bin_size, n_bins: level.len(), std_error: naive_se(&level) });
        if level.len() / 2 < MIN_PLATEAU_BINS {
            break;
        }
        level = level.chunks_exact(2).map(|c| 0.5 * (c[0] + c[1])).collect();
        bin_size *= 2;
    }
    let se0 = ladder[0].std_error;
    let std_error = ladder
        .iter()
        .filter(|l| l.n_bins >= MIN_PLATEAU_BINS || l.bin_size == 1)
        .map(|l| l.std_error)
        .fold(0.0, f64::max);
    let autocorrelation_time = if se0 > 0.0 { 0.5 * (std_error / se0).powi(2) } else { 0.5 };
    Ok(EstimatorResult { mean, std_error, n_samples: series.len(), autocorrelation_time, ladder })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 points for a fit, got {}", xs.len().min(ys.len()))));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(LinearFit { slope, intercept, r_squared, points: xs.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn iid_series_has_half_tau() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xs: Vec<f64> = (0..1 << 14).map(|_| rng.random::<f64>()).collect();
        let r = estimate(&xs).unwrap();
        assert!((r.mean - 0.5).abs() < 4.0 * r.std_error);
        assert!(r.autocorrelation_time < 1.0, "tau {}", r.autocorrelation_time);
    }

    #[test]
    fn correlated_series_inflates_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut x = 0.0;
        let xs: Vec<f64> = (0..1 << 14)
            .map(|_| {
                x = 0.9 * x + rng.random::<f64>() - 0.5;
                x
            })
            .collect();
        let r = estimate(&xs).unwrap();
        // AR(1) with φ = 0.9 has τ_int = (1+φ)/(2(1-φ)) = 9.5.
        assert!(r.autocorrelation_time > 5.0 && r.autocorrelation_time < 14.0, "tau {}", r.autocorrelation_time);
    }

    #[test]
    fn exact_line_fits() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, -1.0, -3.0, -5.0];
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }
}
