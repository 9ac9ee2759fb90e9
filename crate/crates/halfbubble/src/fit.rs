//! Least-squares slope estimation for log-log scaling data, with studentized
//! confidence intervals and a nested-model F comparison used to detect
//! logarithmic corrections.

use crate::special::{f_survival, t_quantile_two_sided};

/// Result of a straight-line fit y = intercept + slope·x.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// Half-width of the 95% studentized confidence interval on the slope.
    pub slope_ci95: f64,
    pub rss: f64,
}

/// Ordinary least squares for y = a + b·x. Needs at least 3 points.
pub fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    let m = x.len();
    assert_eq!(m, y.len());
    assert!(m >= 3, "need at least 3 points for a studentized fit");
    let mf = m as f64;
    let xbar = x.iter().sum::<f64>() / mf;
    let ybar = y.iter().sum::<f64>() / mf;
    let sxx: f64 = x.iter().map(|&xi| (xi - xbar) * (xi - xbar)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(&xi, &yi)| (xi - xbar) * (yi - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let e = yi - intercept - slope * xi;
            e * e
        })
        .sum();
    let dof = mf - 2.0;
    let sigma2 = rss / dof;
    let slope_stderr = (sigma2 / sxx).sqrt();
    let slope_ci95 = t_quantile_two_sided(0.05, dof) * slope_stderr;
    LineFit {
        slope,
        intercept,
        slope_stderr,
        slope_ci95,
        rss,
    }
}

/// Two-regressor least squares y = a + b·x1 + c·x2 via the normal equations.
fn fit_two(x1: &[f64], x2: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let m = y.len() as f64;
    let s = |v: &[f64]| v.iter().sum::<f64>();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(&p, &q)| p * q).sum::<f64>();
    // normal matrix [[m, Σx1, Σx2], [Σx1, Σx1², Σx1x2], [Σx2, Σx1x2, Σx2²]]
    let a = [
        [m, s(x1), s(x2)],
        [s(x1), dot(x1, x1), dot(x1, x2)],
        [s(x2), dot(x1, x2), dot(x2, x2)],
    ];
    let rhs = [s(y), dot(x1, y), dot(x2, y)];
    let sol = solve3(a, rhs);
    let rss: f64 = (0..y.len())
        .map(|i| {
            let e = y[i] - sol[0] - sol[1] * x1[i] - sol[2] * x2[i];
            e * e
        })
        .sum();
    (sol[0], sol[1], sol[2], rss)
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    // Gaussian elimination with partial pivoting on a 3x3 system.
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for k in row + 1..3 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

/// Comparison of the pure power law log Q = a + b·log ε against the
/// log-corrected model log Q = a + b·log ε + c·log|log ε|.
#[derive(Debug, Clone, Copy)]
pub struct LogCorrectionTest {
    /// Slope of the plain power-law fit.
    pub plain_slope: f64,
    pub plain_ci95: f64,
    /// Power coefficient of the log-corrected model.
    pub corrected_slope: f64,
    /// Coefficient of the log|log ε| regressor.
    pub log_coefficient: f64,
    /// F statistic of the nested comparison.
    pub f_statistic: f64,
    /// P(F > f) under the null of no log correction.
    pub p_value: f64,
    /// True when the correction improves the fit at the 5% level.
    pub significant: f64,
}

impl LogCorrectionTest {
    pub fn log_correction_detected(&self) -> bool {
        self.significant > 0.5
    }
}

/// Fit both models to (log ε, log Q) data and compare them.
///
/// `log_eps` must hold logs of quantities strictly inside (0, 1) so that
/// |log ε| > 0 and log|log ε| is well defined.
pub fn detect_log_correction(log_eps: &[f64], log_q: &[f64]) -> LogCorrectionTest {
    let m = log_eps.len();
    assert!(m >= 5, "need at least 5 points for the nested comparison");
    let plain = fit_line(log_eps, log_q);
    let loglog: Vec<f64> = log_eps.iter().map(|&le| (-le).ln()).collect();
    let (_a, b, c, rss2) = fit_two(log_eps, &loglog, log_q);
    let dof2 = (m - 3) as f64;
    // Guard the degenerate perfectly-fitting case.
    let denom = (rss2 / dof2).max(1e-300);
    let f_stat = ((plain.rss - rss2).max(0.0)) / denom;
    let p = f_survival(f_stat, 1.0, dof2);
    LogCorrectionTest {
        plain_slope: plain.slope,
        plain_ci95: plain.slope_ci95,
        corrected_slope: b,
        log_coefficient: c,
        f_statistic: f_stat,
        p_value: p,
        significant: if p < 0.05 { 1.0 } else { 0.0 },
    }
}
