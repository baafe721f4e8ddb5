//! Locally weighted regression (LOESS) and seasonal-trend decomposition.
//!
//! The decomposition follows the classic iterative scheme: each inner pass
//! detrends the series, smooths every cycle-subseries (all Januaries, all
//! Februaries, ...) with LOESS, removes the low-pass component of the result,
//! and re-estimates the trend from the deseasonalized series. An optional
//! outer loop re-weights observations with bisquare robustness weights from
//! the remainder. The remainder is always recomputed as the exact residual,
//! so `seasonal + trend + remainder` reproduces the input to rounding error.

use serde::{Deserialize, Serialize};

use crate::series::MonthlySeries;
use crate::{Error, Result};

/// Local regression settings: neighborhood size and polynomial degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoessConfig {
    /// Points in the local neighborhood; odd.
    pub window: usize,
    /// Local polynomial degree: 0, 1 or 2.
    pub degree: usize,
}

impl LoessConfig {
    pub fn new(window: usize, degree: usize) -> Result<Self> {
        let cfg = LoessConfig { window, degree };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree > 2 {
            return Err(Error::config(format!(
                "loess degree {} not in 0..=2",
                self.degree
            )));
        }
        if self.window.is_multiple_of(2) || self.window < self.degree + 2 {
            return Err(Error::config(format!(
                "loess window {} must be odd and at least degree+2",
                self.window
            )));
        }
        Ok(())
    }
}

/// Decomposition settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StlConfig {
    /// Seasonal cycle length; 12 for monthly data.
    pub period: usize,
    /// LOESS window for cycle-subseries smoothing; odd, at least 7.
    pub seasonal_window: usize,
    /// LOESS window for trend smoothing; odd, larger than `period`.
    pub trend_window: usize,
    /// Outer robustness passes (0 disables re-weighting).
    pub robust_iterations: usize,
    /// Inner seasonal/trend passes per outer pass.
    pub inner_iterations: usize,
}

impl Default for StlConfig {
    fn default() -> Self {
        StlConfig {
            period: 12,
            seasonal_window: 7,
            // smallest odd integer >= 1.5 * period / (1 - 1.5 / seasonal_window)
            trend_window: 23,
            robust_iterations: 1,
            inner_iterations: 2,
        }
    }
}

impl StlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.period < 2 {
            return Err(Error::config("period must be at least 2"));
        }
        if self.seasonal_window < 7 || self.seasonal_window.is_multiple_of(2) {
            return Err(Error::config(format!(
                "seasonal window {} must be odd and at least 7",
                self.seasonal_window
            )));
        }
        if self.trend_window <= self.period || self.trend_window.is_multiple_of(2) {
            return Err(Error::config(format!(
                "trend window {} must be odd and larger than period {}",
                self.trend_window, self.period
            )));
        }
        if self.inner_iterations == 0 {
            return Err(Error::config("at least one inner iteration required"));
        }
        Ok(())
    }
}

/// Aligned seasonal/trend/remainder split of a source series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub seasonal: MonthlySeries,
    pub trend: MonthlySeries,
    pub remainder: MonthlySeries,
    pub source: MonthlySeries,
}

impl Decomposition {
    /// Builds a decomposition, checking alignment and that the components
    /// sum back to the source within 1e-9 per point.
    pub fn new(
        seasonal: MonthlySeries,
        trend: MonthlySeries,
        remainder: MonthlySeries,
        source: MonthlySeries,
    ) -> Result<Self> {
        for (name, series) in [
            ("seasonal", &seasonal),
            ("trend", &trend),
            ("remainder", &remainder),
        ] {
            if !series.aligned_with(&source) {
                return Err(Error::alignment(format!(
                    "{name} component must share the source start and length"
                )));
            }
        }
        for i in 0..source.len() {
            let sum = seasonal.values()[i] + trend.values()[i] + remainder.values()[i];
            if (sum - source.values()[i]).abs() > 1e-9 {
                return Err(Error::alignment(format!(
                    "components sum to {sum} at index {i}, source has {}",
                    source.values()[i]
                )));
            }
        }
        Ok(Decomposition {
            seasonal,
            trend,
            remainder,
            source,
        })
    }

    /// CSV rendering with header `date,observed,seasonal,trend,remainder`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,observed,seasonal,trend,remainder\n");
        for (i, (month, observed)) in self.source.iter().enumerate() {
            out.push_str(&format!(
                "{month},{observed},{},{},{}\n",
                self.seasonal.values()[i],
                self.trend.values()[i],
                self.remainder.values()[i],
            ));
        }
        out
    }
}

/// Smooths `ys` over `xs` at each of `eval_points` with locally weighted
/// polynomial regression using tricube distance weights.
///
/// The neighborhood is the `window` nearest data points (clamped to the data
/// length when the window is larger); at the boundaries this yields one-sided
/// neighborhoods. Optional robustness weights multiply the distance weights.
/// A neighborhood whose weights all vanish falls back to the unweighted local
/// mean.
pub fn loess_smooth(
    xs: &[f64],
    ys: &[f64],
    eval_points: &[f64],
    config: &LoessConfig,
    robustness_weights: Option<&[f64]>,
) -> Result<Vec<f64>> {
    config.validate()?;
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::config("xs and ys must be nonempty and equal-length"));
    }
    if xs.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::config("xs must be strictly increasing"));
    }
    if let Some(w) = robustness_weights {
        if w.len() != xs.len() {
            return Err(Error::config("robustness weights length mismatch"));
        }
        if w.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::config("robustness weights must lie in [0,1]"));
        }
    }

    let n = xs.len();
    let window = config.window.min(n);
    let mut out = Vec::with_capacity(eval_points.len());
    for &x0 in eval_points {
        // Nearest `window` points: slide the window right while that brings
        // the far edge closer than the near edge.
        let mut lo = xs
            .partition_point(|&x| x < x0)
            .saturating_sub(window / 2 + 1);
        lo = lo.min(n - window);
        while lo + window < n && (x0 - xs[lo]) > (xs[lo + window] - x0) {
            lo += 1;
        }
        let hi = lo + window;

        let h = (x0 - xs[lo]).abs().max((xs[hi - 1] - x0).abs());
        let mut weights = Vec::with_capacity(window);
        for i in lo..hi {
            let mut w = if h > 0.0 {
                tricube((xs[i] - x0).abs() / h)
            } else {
                1.0
            };
            if let Some(rho) = robustness_weights {
                w *= rho[i];
            }
            weights.push(w);
        }

        out.push(fit_local(
            &xs[lo..hi],
            &ys[lo..hi],
            &weights,
            x0,
            config.degree,
        ));
    }
    Ok(out)
}

fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let t = 1.0 - u * u * u;
        t * t * t
    }
}

/// Weighted polynomial fit on a neighborhood, evaluated at `x0`.
///
/// Works in centered coordinates `u = x - x0`, so the fitted value is the
/// intercept. Falls back degree 1 -> 0 -> unweighted mean when the normal
/// equations are singular.
fn fit_local(xs: &[f64], ys: &[f64], weights: &[f64], x0: f64, degree: usize) -> f64 {
    let wsum: f64 = weights.iter().sum();
    if wsum <= 0.0 {
        // all weights zero: unweighted local mean
        return ys.iter().sum::<f64>() / ys.len() as f64;
    }
    if degree == 0 {
        let t0: f64 = weights.iter().zip(ys).map(|(w, y)| w * y).sum();
        return t0 / wsum;
    }

    // weighted moments of u = x - x0
    let mut s = [0.0f64; 5];
    let mut t = [0.0f64; 3];
    for ((&x, &y), &w) in xs.iter().zip(ys).zip(weights) {
        let u = x - x0;
        let mut up = 1.0;
        for sk in s.iter_mut().take(2 * degree + 1) {
            *sk += w * up;
            up *= u;
        }
        let mut up = 1.0;
        for tk in t.iter_mut().take(degree + 1) {
            *tk += w * y * up;
            up *= u;
        }
    }

    if degree == 1 {
        let det = s[0] * s[2] - s[1] * s[1];
        if relative_singular(det, s[0] * s[2]) {
            return fit_local(xs, ys, weights, x0, 0);
        }
        return (s[2] * t[0] - s[1] * t[1]) / det;
    }

    // degree 2: 3x3 normal equations via Cramer's rule
    let det = s[0] * (s[2] * s[4] - s[3] * s[3]) - s[1] * (s[1] * s[4] - s[3] * s[2])
        + s[2] * (s[1] * s[3] - s[2] * s[2]);
    if relative_singular(det, s[0] * s[2] * s[4]) {
        return fit_local(xs, ys, weights, x0, 1);
    }
    let det0 = t[0] * (s[2] * s[4] - s[3] * s[3]) - s[1] * (t[1] * s[4] - s[3] * t[2])
        + s[2] * (t[1] * s[3] - s[2] * t[2]);
    det0 / det
}

fn relative_singular(det: f64, scale: f64) -> bool {
    !det.is_finite() || det.abs() <= 1e-12 * scale.abs().max(f64::MIN_POSITIVE)
}

/// Centered moving average; output length shrinks by `k - 1`.
fn moving_average(values: &[f64], k: usize) -> Vec<f64> {
    debug_assert!(k >= 1 && values.len() >= k);
    let mut out = Vec::with_capacity(values.len() - k + 1);
    let mut acc: f64 = values[..k].iter().sum();
    out.push(acc / k as f64);
    for i in k..values.len() {
        acc += values[i] - values[i - k];
        out.push(acc / k as f64);
    }
    out
}

/// Splits a series into seasonal, trend and remainder components.
///
/// Requires at least two full cycles. The remainder is the exact residual
/// `source - seasonal - trend`.
pub fn stl_decompose(series: &MonthlySeries, config: &StlConfig) -> Result<Decomposition> {
    config.validate()?;
    let n = series.len();
    let p = config.period;
    if n < 2 * p {
        return Err(Error::InsufficientData {
            actual: n,
            required: 2 * p,
        });
    }

    let y = series.values();
    let seasonal_cfg = LoessConfig::new(config.seasonal_window, 1)?;
    let trend_cfg = LoessConfig::new(config.trend_window, 1)?;

    let mut seasonal = vec![0.0; n];
    let mut trend = vec![0.0; n];
    let mut rho = vec![1.0; n];

    for outer in 0..=config.robust_iterations {
        for _ in 0..config.inner_iterations {
            // detrend
            let detrended: Vec<f64> = y.iter().zip(&trend).map(|(a, b)| a - b).collect();

            // smooth each cycle-subseries, extending one cycle on each side
            // so the low-pass filter below lands back on n points
            let mut extended = vec![0.0; n + 2 * p];
            for r in 0..p {
                let idx: Vec<usize> = (r..n).step_by(p).collect();
                let sub_y: Vec<f64> = idx.iter().map(|&i| detrended[i]).collect();
                let sub_w: Vec<f64> = idx.iter().map(|&i| rho[i]).collect();
                let xs: Vec<f64> = (0..sub_y.len()).map(|k| k as f64).collect();
                let evals: Vec<f64> = (-1..=sub_y.len() as i64).map(|k| k as f64).collect();
                let smoothed = loess_smooth(&xs, &sub_y, &evals, &seasonal_cfg, Some(&sub_w))?;
                for (k, v) in smoothed.into_iter().enumerate() {
                    // eval index k spans cycle positions -1..=len, i.e. the
                    // extended timeline r - p, r, r + p, ...
                    extended[r + k * p] = v;
                }
            }

            // low-pass: two period-length moving averages then a length-3 one
            let low = moving_average(&moving_average(&moving_average(&extended, p), p), 3);
            debug_assert_eq!(low.len(), n);
            for i in 0..n {
                seasonal[i] = extended[p + i] - low[i];
            }

            // trend from the deseasonalized series
            let deseasonalized: Vec<f64> = y.iter().zip(&seasonal).map(|(a, s)| a - s).collect();
            let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
            trend = loess_smooth(&xs, &deseasonalized, &xs, &trend_cfg, Some(&rho))?;
        }

        if outer < config.robust_iterations {
            let residual: Vec<f64> = (0..n).map(|i| y[i] - seasonal[i] - trend[i]).collect();
            rho = robustness_weights(&residual);
        }
    }

    let remainder: Vec<f64> = (0..n).map(|i| y[i] - seasonal[i] - trend[i]).collect();
    let start = series.start();
    Decomposition::new(
        MonthlySeries::new(start, seasonal)?,
        MonthlySeries::new(start, trend)?,
        MonthlySeries::new(start, remainder)?,
        series.clone(),
    )
}

/// Bisquare weights on residual magnitude scaled by six times the median.
fn robustness_weights(residual: &[f64]) -> Vec<f64> {
    let mut abs: Vec<f64> = residual.iter().map(|r| r.abs()).collect();
    abs.sort_by(|a, b| a.total_cmp(b));
    let median = if abs.len() % 2 == 1 {
        abs[abs.len() / 2]
    } else {
        0.5 * (abs[abs.len() / 2 - 1] + abs[abs.len() / 2])
    };
    let cutoff = 6.0 * median;
    if cutoff <= 1e-12 * abs.last().copied().unwrap_or(0.0).max(1.0) {
        // essentially perfect fit: nothing to down-weight
        return vec![1.0; residual.len()];
    }
    residual
        .iter()
        .map(|r| {
            let u = r.abs() / cutoff;
            if u >= 1.0 {
                0.0
            } else {
                let t = 1.0 - u * u;
                t * t
            }
        })
        .collect()
}

/// Pointwise sum of aligned component forecasts.
pub fn reconstruct(
    s_hat: &MonthlySeries,
    t_hat: &MonthlySeries,
    r_hat: &MonthlySeries,
) -> Result<MonthlySeries> {
    if !s_hat.aligned_with(t_hat) || !s_hat.aligned_with(r_hat) {
        return Err(Error::alignment(format!(
            "components start/len ({}, {}), ({}, {}), ({}, {})",
            s_hat.start(),
            s_hat.len(),
            t_hat.start(),
            t_hat.len(),
            r_hat.start(),
            r_hat.len()
        )));
    }
    let values: Vec<f64> = (0..s_hat.len())
        .map(|i| s_hat.values()[i] + t_hat.values()[i] + r_hat.values()[i])
        .collect();
    MonthlySeries::new(s_hat.start(), values)
}
