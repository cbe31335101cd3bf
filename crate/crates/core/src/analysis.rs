//! Rate-exponent fits and goodness-of-fit statistics.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub const MIN_FIT_POINTS: usize = 5;
pub const MIN_KS_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    /// Residual standard error of the regression.
    pub residual_se: f64,
    pub points: usize,
}

/// Ordinary least squares of `log value` on `log n`.
pub fn estimate_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} points, need at least {MIN_FIT_POINTS}",
            points.len()
        )));
    }
    if let Some(&(n, v)) = points.iter().find(|(n, v)| !(*v > 0.0) || !(*n > 0.0)) {
        return Err(Error::InsufficientData(format!(
            "cannot take logarithms of ({n}, {v})"
        )));
    }
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|(n, _)| n.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, v)| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all abscissae are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let residual_se = (rss / (k - 2.0)).sqrt();
    Ok(SlopeFit {
        slope,
        intercept,
        stderr: residual_se / sxx.sqrt(),
        residual_se,
        points: points.len(),
    })
}

/// CDF of `N(0, sigma2)`.
pub fn normal_cdf(x: f64, sigma2: f64) -> f64 {
    0.5 * erfc(-x / (2.0 * sigma2).sqrt())
}

/// Density of `N(0, sigma2)`.
pub fn normal_density(x: f64, sigma2: f64) -> f64 {
    (-x * x / (2.0 * sigma2)).exp() / (2.0 * std::f64::consts::PI * sigma2).sqrt()
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `samples` and
/// the centered normal CDF with variance `sigma2`.
pub fn ks_statistic(samples: &[f64], sigma2: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    if samples.len() < MIN_KS_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} samples, need at least {MIN_KS_SAMPLES}",
            samples.len()
        )));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::ParameterOutOfRange {
            name: "sigma2",
            value: sigma2,
            range: "(0, inf)",
        });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x, sigma2);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    Ok(d)
}

/// Asymptotic KS critical value `c(alpha) / sqrt(n)` with
/// `c(alpha) = sqrt(-ln(alpha/2) / 2)`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square test of observed counts against expected
/// probabilities. Cells with zero expected probability must be empty.
pub fn chi_square(observed: &[u64], expected_probs: &[f64]) -> Result<ChiSquareTest> {
    if observed.len() != expected_probs.len() {
        return Err(Error::Mismatch("observed and expected lengths differ".into()));
    }
    let total: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&o, &p) in observed.iter().zip(expected_probs) {
        if p == 0.0 {
            if o != 0 {
                return Ok(ChiSquareTest {
                    statistic: f64::INFINITY,
                    dof: 1,
                    p_value: 0.0,
                });
            }
            continue;
        }
        let e = p * total as f64;
        stat += (o as f64 - e).powi(2) / e;
        cells += 1;
    }
    let dof = cells.saturating_sub(1).max(1);
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Undefined(e.to_string()))?;
    Ok(ChiSquareTest {
        statistic: stat,
        dof,
        p_value: 1.0 - dist.cdf(stat),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;
    use rand_xoshiro::Xoshiro256PlusPlus;

    #[test]
    fn exact_power_laws() {
        let pts: Vec<_> = (10..20).map(|k| {
            let n = 2f64.powi(k);
            (n, n.powf(-0.5))
        }).collect();
        let fit = estimate_slope(&pts).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!(fit.stderr < 1e-10);

        let pts: Vec<_> = (1..9).map(|k| {
            let n = 10f64.powi(k);
            (n, 7.3 * n.powf(-1.0 / 3.0))
        }).collect();
        let fit = estimate_slope(&pts).unwrap();
        assert!((fit.slope + 1.0 / 3.0).abs() < 1e-12);
        assert!((fit.intercept - 7.3f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn noisy_power_law() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
        let pts: Vec<_> = (0..20).map(|k| {
            let n = 2f64.powf(10.0 + k as f64 * 0.5);
            (n, n.powf(-0.5) * rng.random_range(0.9..1.1))
        }).collect();
        let fit = estimate_slope(&pts).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.05);
    }

    #[test]
    fn slope_rejects_bad_input() {
        let pts = vec![(1.0, 1.0), (2.0, 0.5), (3.0, 0.0), (4.0, 0.2), (5.0, 0.1)];
        assert!(estimate_slope(&pts).is_err());
        assert!(estimate_slope(&pts[..4]).is_err());
    }

    #[test]
    fn normal_cdf_values() {
        assert!((normal_cdf(0.0, 1.0) - 0.5).abs() < 1e-15);
        // Phi(1.959963984540054) = 0.975
        assert!((normal_cdf(1.959963984540054, 1.0) - 0.975).abs() < 1e-9);
        assert!((normal_cdf(2.0 * 1.959963984540054, 4.0) - 0.975).abs() < 1e-9);
        assert!((normal_cdf(-1.0, 1.0) - 0.15865525393145707).abs() < 1e-9);
        assert!((normal_density(0.0, 1.0) - 0.3989422804014327).abs() < 1e-15);
        assert!((normal_density(1.0, 4.0) - 0.17603266338214976).abs() < 1e-15);
    }

    #[test]
    fn ks_on_matching_and_mismatched_normals() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        let sigma2: f64 = 0.75;
        let xs: Vec<f64> = (0..10_000).map(|_| rng.sample::<f64, _>(StandardNormal) * sigma2.sqrt()).collect();
        assert!(ks_statistic(&xs, sigma2).unwrap() < 0.02);
        let wide: Vec<f64> = (0..10_000).map(|_| rng.sample::<f64, _>(StandardNormal) * (4.0 * sigma2).sqrt()).collect();
        assert!(ks_statistic(&wide, sigma2).unwrap() > 0.05);
        let constant = vec![0.1; 200];
        assert!(ks_statistic(&constant, 1.0).unwrap() >= 0.5);
        assert!(ks_statistic(&[], 1.0).is_err());
        assert!(ks_statistic(&xs, 0.0).is_err());
    }

    #[test]
    fn ks_critical() {
        assert!((ks_critical_value(10_000, 0.01) * 100.0 - 1.6276).abs() < 1e-3);
    }

    #[test]
    fn chi_square_basics() {
        let t = chi_square(&[250, 250, 250, 250], &[0.25; 4]).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert!((t.p_value - 1.0).abs() < 1e-12);
        let t = chi_square(&[400, 200, 200, 200], &[0.25; 4]).unwrap();
        assert!(t.p_value < 1e-6);
        let t = chi_square(&[1, 0], &[0.0, 1.0]).unwrap();
        assert_eq!(t.p_value, 0.0);
    }
}
