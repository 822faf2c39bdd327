use serde::Serialize;

use super::DiagnosticsError;
use crate::solver::Trace;

/// Shortest trace accepted by the rate fit.
pub const MIN_RATE_LEN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    /// Slope of `log A_k` against `log(k + 1)`.
    pub slope: f64,
    /// Intercept, so `A_k ≈ exp(constant) (k + 1)^slope`.
    pub constant: f64,
}

/// `A_k = (1/(k+1)) Σ_{j<=k} v_j`.
pub fn running_average(values: &[f64]) -> Vec<f64> {
    let mut sum = 0.0;
    values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            sum += v;
            sum / (k + 1) as f64
        })
        .collect()
}

/// Pointwise mean of equally long curves, summed in input order.
pub fn mean_curve(curves: &[Vec<f64>]) -> Vec<f64> {
    let len = curves.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|k| curves.iter().map(|c| c[k]).sum::<f64>() / curves.len() as f64)
        .collect()
}

/// Least-squares fit of `log A_k` on `log(k + 1)` over the second half of the
/// running average of `values`.
pub fn rate_fit_series(values: &[f64]) -> Result<RateFit, DiagnosticsError> {
    if values.len() < MIN_RATE_LEN {
        return Err(DiagnosticsError::TraceTooShort {
            len: values.len(),
            min: MIN_RATE_LEN,
        });
    }
    let averages = running_average(values);
    let start = averages.len() / 2;
    let mut xs = Vec::with_capacity(averages.len() - start);
    let mut ys = Vec::with_capacity(averages.len() - start);
    for (k, &a) in averages.iter().enumerate().skip(start) {
        if !(a > 0.0) {
            return Err(DiagnosticsError::NonPositiveAverage { index: k });
        }
        xs.push(((k + 1) as f64).ln());
        ys.push(a.ln());
    }
    let count = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / count;
    let my = ys.iter().sum::<f64>() / count;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    Ok(RateFit {
        slope,
        constant: my - slope * mx,
    })
}

/// Rate fit of `‖d_k‖ + ‖c_k‖` over a solver trace.
pub fn rate_fit(trace: &Trace) -> Result<RateFit, DiagnosticsError> {
    rate_fit_series(&trace.optimality_series())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_has_zero_slope() {
        let fit = rate_fit_series(&vec![2.5; 500]).unwrap();
        assert!(fit.slope.abs() < 1e-12);
        assert!((fit.constant - 2.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn inverse_square_root_series_has_half_slope() {
        // Σ_{j<=k} (j+1)^{-1/2} / (k+1) ≈ 2 (k+1)^{-1/2}.
        let values: Vec<f64> = (0..20_000).map(|j| ((j + 1) as f64).powf(-0.5)).collect();
        let fit = rate_fit_series(&values).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.01, "slope {}", fit.slope);
    }

    #[test]
    fn short_series_is_rejected() {
        assert!(matches!(
            rate_fit_series(&[1.0; 99]),
            Err(DiagnosticsError::TraceTooShort { len: 99, min: 100 })
        ));
    }

    #[test]
    fn mean_curve_averages_pointwise() {
        let m = mean_curve(&[vec![1.0, 2.0], vec![3.0, 6.0]]);
        assert_eq!(m, vec![2.0, 4.0]);
    }
}
