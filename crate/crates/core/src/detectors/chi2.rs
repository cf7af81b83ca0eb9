//! Chi-square tail quantiles for detector thresholds.

use statrs::function::gamma::{gamma_lr, gamma_ur};

use crate::error::{Error, Result};

/// `P(χ²(dof) ≤ x)`.
pub fn chi2_cdf(dof: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    gamma_lr(dof as f64 / 2.0, x / 2.0)
}

/// `P(χ²(dof) > x)`.
pub fn chi2_sf(dof: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_ur(dof as f64 / 2.0, x / 2.0)
}

/// The `1 − alpha` quantile of `χ²(dof)`, i.e. the threshold exceeded with probability `alpha`.
///
/// Bisection on the regularized incomplete gamma function; the tail that is
/// numerically smaller is the one matched, so both `alpha → 0` and `alpha → 1`
/// keep full relative precision.
pub fn chi2_threshold(dof: usize, alpha: f64) -> Result<f64> {
    if dof == 0 {
        return Err(Error::InvalidArgument(
            "chi-square degrees of freedom must be positive".into(),
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "false-alarm rate must lie in (0, 1), got {alpha}"
        )));
    }
    // g(x) is increasing in x with its root at the quantile
    let g = |x: f64| {
        if alpha < 0.5 {
            alpha - chi2_sf(dof, x)
        } else {
            chi2_cdf(dof, x) - (1.0 - alpha)
        }
    };
    let mut hi = dof as f64 + 1.0;
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
