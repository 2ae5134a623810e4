//! Reference distributions used for p-values.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

/// Upper-tail probability of a chi-squared variate with `df` degrees of freedom.
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    if !x.is_finite() {
        return if x > 0.0 { 0.0 } else { 1.0 };
    }
    if x <= 0.0 {
        return 1.0;
    }
    let dist = ChiSquared::new(df).expect("chi-squared df must be positive");
    dist.sf(x).clamp(0.0, 1.0)
}

/// Two-sided p-value of a t statistic.
pub fn t_two_sided(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return if t.is_nan() { f64::NAN } else { 0.0 };
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("t df must be positive");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

/// Two-sided p-value of a standard normal score.
pub fn normal_two_sided(z: f64) -> f64 {
    let dist = Normal::new(0.0, 1.0).unwrap();
    (2.0 * dist.sf(z.abs())).clamp(0.0, 1.0)
}

/// Upper quantile of the standard normal, e.g. 1.96 for `p = 0.025`.
pub fn normal_upper_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(1.0 - p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi2_df2_is_exponential() {
        for &x in &[0.5, 1.0, 3.7, 10.0] {
            assert!((chi2_sf(x, 2.0) - (-x / 2.0f64).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn chi2_df4_closed_form() {
        let x: f64 = 6.157;
        let closed = (-x / 2.0).exp() * (1.0 + x / 2.0);
        assert!((chi2_sf(x, 4.0) - closed).abs() < 1e-12);
    }

    #[test]
    fn t_and_normal_symmetry() {
        assert!((t_two_sided(0.0, 10.0) - 1.0).abs() < 1e-12);
        assert!((normal_two_sided(1.959963984540054) - 0.05).abs() < 1e-9);
        assert!((normal_upper_quantile(0.025) - 1.959963984540054).abs() < 1e-9);
    }
}
