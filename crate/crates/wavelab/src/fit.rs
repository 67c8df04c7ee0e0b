//! Small least-squares helpers for sweep regressions.

use crate::error::{Error, Result};

/// Ordinary least-squares line fit y = slope * x + intercept.
#[derive(Debug, Clone, Copy)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope (0 when the fit has no residual dof).
    pub slope_stderr: f64,
    pub r_squared: f64,
    pub n: usize,
}

impl LinearFit {
    /// Half-width of the ~95% confidence interval on the slope.
    pub fn slope_ci95(&self) -> f64 {
        1.96 * self.slope_stderr
    }
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    let n = xs.len();
    if n != ys.len() || n < 2 {
        return Err(Error::InvalidSweep(format!(
            "need at least 2 matched points for a line fit, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::InvalidSweep(
            "degenerate fit: all abscissae equal".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let slope_stderr = if n > 2 {
        (ss_res / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr,
        r_squared,
        n,
    })
}

/// Fitted exponent p in y = C * x^p over positive data; requires >= 3 points.
pub fn power_law_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    let pairs: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(&x, &y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    if pairs.len() < 3 {
        return Err(Error::InvalidSweep(format!(
            "power-law fit needs >= 3 positive points, got {}",
            pairs.len()
        )));
    }
    let lx: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ly: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    linear_fit(&lx, &ly)
}
