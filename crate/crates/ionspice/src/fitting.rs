//! Shared single-exponential decay fitting.
//!
//! Both the transient post-processor and the calibration pipeline normalize
//! a settling signal to `(y - y_ss)/(y0 - y_ss)` and fit `ln` of the result
//! against time by least squares over the decade where the normalized value
//! lies in `[0.05, 0.9]`. That window excludes the switch-on region
//! (dominated by the access resistance) and the noise floor.

use thiserror::Error;

#[derive(Debug, Error)]
pub(crate) enum FitError {
    #[error("signal does not settle: final 5% of the window varies by {0:.2}% of the step")]
    NotSettled(f64),
    #[error("too few samples in the fit window ({0})")]
    TooFewPoints(usize),
    #[error("normalized signal is non-positive inside the fit window")]
    NonPositive,
    #[error("normalized signal is non-monotone beyond tolerance inside the fit window")]
    NonMonotone,
    #[error("step amplitude is zero; no transient to fit")]
    ZeroAmplitude,
}

const WINDOW_HIGH: f64 = 0.9;
const WINDOW_LOW: f64 = 0.05;
/// Fractional wiggle allowed before the normalized signal counts as
/// non-monotone. Applied to binned means, so it tolerates sample noise
/// while still rejecting oscillations.
const MONOTONE_SLACK: f64 = 0.02;
const MONOTONE_BINS: usize = 10;

/// Fits the time constant of `values` over `times`, where index 0 is the
/// event sample. Returns seconds.
///
/// The tail mean only approximates the steady state when the record is a
/// handful of time constants long, which biases the log fit. After the
/// first pass the steady value and amplitude are re-estimated by linear
/// least squares against `exp(-t/tau)` and the slope refit, iterating to
/// convergence; on exact exponentials this recovers `tau` to numerical
/// precision.
pub(crate) fn fit_decay(times: &[f64], values: &[f64]) -> Result<f64, FitError> {
    if times.len() < 4 {
        return Err(FitError::TooFewPoints(times.len()));
    }
    let t0 = times[0];
    let span = times[times.len() - 1] - t0;

    // Steady state from the final 5% of the window. Settling is judged by
    // the drift between the means of the tail's two halves, which is
    // insensitive to sample noise.
    let tail_start = times
        .iter()
        .position(|t| *t >= t0 + 0.95 * span)
        .unwrap_or(times.len() - 1);
    let tail = &values[tail_start..];
    let mut y_ss = tail.iter().sum::<f64>() / tail.len() as f64;
    let amplitude = values[0] - y_ss;
    if amplitude == 0.0 {
        return Err(FitError::ZeroAmplitude);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let drift = (mean(&tail[tail.len() / 2..]) - mean(&tail[..tail.len().div_ceil(2)])).abs();
    if drift > 0.01 * amplitude.abs() {
        return Err(FitError::NotSettled(100.0 * drift / amplitude.abs()));
    }
    let noise = (tail.iter().map(|v| (v - y_ss).powi(2)).sum::<f64>() / tail.len() as f64).sqrt()
        / amplitude.abs();

    let mut tau = log_slope_fit(times, values, y_ss, Some(noise))?;
    for _ in 0..25 {
        y_ss = refine_steady_state(times, values, tau).unwrap_or(y_ss);
        let refined = log_slope_fit(times, values, y_ss, None)?;
        let change = (refined - tau).abs();
        tau = refined;
        if change <= 1e-12 * tau {
            break;
        }
    }
    Ok(tau)
}

/// Least-squares slope of `ln` of the normalized signal over the value
/// window. When `shape_noise` is given (first pass), the windowed signal is
/// also checked for monotone decay: means over `MONOTONE_BINS` equal-count
/// bins must be non-increasing within the slack plus a noise allowance.
fn log_slope_fit(
    times: &[f64],
    values: &[f64],
    y_ss: f64,
    shape_noise: Option<f64>,
) -> Result<f64, FitError> {
    let t0 = times[0];
    let amplitude = values[0] - y_ss;
    if amplitude == 0.0 {
        return Err(FitError::ZeroAmplitude);
    }
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut window: Vec<f64> = Vec::new();
    for (t, y) in times.iter().zip(values) {
        let n = (y - y_ss) / amplitude;
        if !n.is_finite() {
            return Err(FitError::NonPositive);
        }
        if n > WINDOW_HIGH {
            continue;
        }
        if n < WINDOW_LOW {
            break;
        }
        window.push(n);
        points.push((t - t0, n.ln()));
    }
    if points.len() < 2 {
        return Err(FitError::TooFewPoints(points.len()));
    }

    if let Some(noise) = shape_noise {
        let bin_len = (window.len() / MONOTONE_BINS).max(1);
        let bin_means: Vec<f64> = window
            .chunks(bin_len)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();
        let slack = MONOTONE_SLACK + 4.0 * noise / (bin_len as f64).sqrt();
        if bin_means.windows(2).any(|w| w[1] > w[0] + slack) {
            return Err(FitError::NonMonotone);
        }
    }

    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|(x, _)| x).sum();
    let sy: f64 = points.iter().map(|(_, y)| y).sum();
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    if !(slope < 0.0) {
        return Err(FitError::NonMonotone);
    }
    Ok(-1.0 / slope)
}

/// Least-squares `(y_ss, a)` of `y = y_ss + a exp(-(t - t0)/tau)`.
fn refine_steady_state(times: &[f64], values: &[f64], tau: f64) -> Option<f64> {
    let t0 = times[0];
    let mut s_e = 0.0;
    let mut s_ee = 0.0;
    let mut s_y = 0.0;
    let mut s_ye = 0.0;
    let n = times.len() as f64;
    for (t, y) in times.iter().zip(values) {
        let e = (-(t - t0) / tau).exp();
        s_e += e;
        s_ee += e * e;
        s_y += y;
        s_ye += y * e;
    }
    let det = n * s_ee - s_e * s_e;
    if det.abs() < 1e-300 {
        return None;
    }
    let y_ss = (s_y * s_ee - s_ye * s_e) / det;
    y_ss.is_finite().then_some(y_ss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(t_end: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|k| k as f64 * t_end / n as f64).collect()
    }

    #[test]
    fn exact_exponential_recovers_tau() {
        for (tau, scale, offset) in [(10.0, 1.0, 0.0), (0.54, -1.8e-6, -2e-8), (71.0, 5.0, 2.0)] {
            let times = grid(8.0 * tau, 5000);
            let values: Vec<f64> = times
                .iter()
                .map(|t| offset + scale * (-t / tau).exp())
                .collect();
            let fitted = fit_decay(&times, &values).unwrap();
            assert_relative_eq!(fitted, tau, max_relative = 1e-6);
        }
    }

    #[test]
    fn non_settling_signal_is_rejected() {
        let times = grid(10.0, 1000);
        let values: Vec<f64> = times.iter().map(|t| (t * 3.0).sin()).collect();
        assert!(matches!(
            fit_decay(&times, &values),
            Err(FitError::NotSettled(_) | FitError::NonMonotone)
        ));
    }

    #[test]
    fn flat_signal_has_no_amplitude() {
        let times = grid(10.0, 100);
        let values = vec![2.5; times.len()];
        assert!(matches!(
            fit_decay(&times, &values),
            Err(FitError::ZeroAmplitude)
        ));
    }
}
