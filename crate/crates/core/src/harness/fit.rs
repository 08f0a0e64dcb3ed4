//! Least-squares power-law fits.

use serde::Serialize;

use crate::error::{Error, Result};

/// `log y = intercept + slope·log x`, with the usual regression statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; zero for an exact fit.
    pub stderr: f64,
    pub r_squared: f64,
    pub points: usize,
}

impl SlopeFit {
    /// `slope ± 2·stderr`.
    pub fn interval(&self) -> (f64, f64) {
        (self.slope - 2.0 * self.stderr, self.slope + 2.0 * self.stderr)
    }
}

/// Fits `y ∝ x^slope` on log–log axes. Needs three or more positive points.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::domain(format!("{} abscissae but {} values", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(Error::config(format!("a slope fit needs at least 3 points, got {}", xs.len())));
    }
    if let Some(bad) = xs.iter().chain(ys).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::domain(format!("log-log fit needs positive finite data, got {bad}")));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("all abscissae coincide"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = (sse / (n - 2.0) / sxx).sqrt();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(SlopeFit {
        slope,
        intercept,
        stderr,
        r_squared,
        points: xs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let xs = [8.0, 16.0, 32.0, 64.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(0.75)).collect();
        let fit = fit_power_law(&xs, &ys).unwrap();
        assert!((fit.slope - 0.75).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(fit.stderr < 1e-12 && (fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_fit_statistics() {
        // Residuals ±0.1 in log space around slope 1 on x = e^{0,1,2,3}.
        let xs: Vec<f64> = (0..4).map(|k| (k as f64).exp()).collect();
        let noise = [0.1, -0.1, -0.1, 0.1];
        let ys: Vec<f64> = (0..4).map(|k| (k as f64 + noise[k]).exp()).collect();
        let fit = fit_power_law(&xs, &ys).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        // SSE = 0.04, Sxx = 5, n − 2 = 2.
        assert!((fit.stderr - (0.04f64 / 2.0 / 5.0).sqrt()).abs() < 1e-12);
        let (lo, hi) = fit.interval();
        assert!(lo < 1.0 && hi > 1.0);
        assert!(fit.r_squared < 1.0 && fit.r_squared > 0.9);
    }

    #[test]
    fn rejects_short_or_nonpositive_input() {
        assert!(matches!(fit_power_law(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::Config(_))));
        assert!(fit_power_law(&[1.0, 2.0, 3.0], &[1.0, 0.0, 2.0]).is_err());
        assert!(fit_power_law(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
    }
}
