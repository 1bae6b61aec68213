//! Log-gamma helpers and the rising factorial in log space.

use statrs::function::gamma::ln_gamma;

/// Counts at or below this threshold use the explicit product form of the
/// rising factorial; larger counts switch to a log-gamma difference.
pub const RISING_PRODUCT_MAX: u64 = 16;

/// `ln Γ(x)` for `x > 0`.
#[inline]
pub fn lgamma(x: f64) -> f64 {
    ln_gamma(x)
}

/// `ln [x (x + 1) ... (x + n - 1)] = ln Γ(x + n) - ln Γ(x)`.
#[inline]
pub fn log_rising(x: f64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else if n <= RISING_PRODUCT_MAX {
        log_rising_product(x, n)
    } else {
        lgamma(x + n as f64) - lgamma(x)
    }
}

/// Rising factorial as an explicit sum of logs; one `ln` per factor.
pub fn log_rising_product(x: f64, n: u64) -> f64 {
    (0..n).map(|nu| (x + nu as f64).ln()).sum()
}

/// `ln Σ exp(v)` with max subtraction. Returns `-inf` on empty input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rising_matches_lgamma_difference() {
        for &x in &[1e-3, 0.37, 1.0, 2.5, 17.0] {
            for n in 0..40u64 {
                let prod = log_rising_product(x, n);
                let diff = lgamma(x + n as f64) - lgamma(x);
                assert_relative_eq!(prod, diff, epsilon = 1e-11, max_relative = 1e-12);
                assert_relative_eq!(log_rising(x, n), diff, epsilon = 1e-11, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn log_sum_exp_is_stable() {
        let v = [1000.0, 1000.0];
        assert_relative_eq!(log_sum_exp(&v), 1000.0 + 2f64.ln(), epsilon = 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }
}
