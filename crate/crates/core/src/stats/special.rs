//! Special functions and distribution tails used for p-values. Thin,
//! domain-checked wrappers so every test statistic goes through one place.

use super::StatsError;

/// Error function.
pub fn erf(x: f64) -> f64 {
    statrs::function::erf::erf(x)
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> Result<f64, StatsError> {
    if !(a > 0.0) || !(b > 0.0) || !(0.0..=1.0).contains(&x) {
        return Err(StatsError::Domain(format!(
            "reg_inc_beta(a={a}, b={b}, x={x})"
        )));
    }
    Ok(statrs::function::beta::beta_reg(a, b, x))
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn reg_lower_gamma(a: f64, x: f64) -> Result<f64, StatsError> {
    if !(a > 0.0) || x < 0.0 {
        return Err(StatsError::Domain(format!("reg_lower_gamma(a={a}, x={x})")));
    }
    Ok(statrs::function::gamma::gamma_lr(a, x))
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// Two-sided p for a t statistic with `df` degrees of freedom:
/// `I_{df/(df+t²)}(df/2, 1/2)`.
pub fn t_two_sided_p(t: f64, df: f64) -> Result<f64, StatsError> {
    if !(df > 0.0) {
        return Err(StatsError::Domain(format!("t test df={df}")));
    }
    if !t.is_finite() {
        return Ok(0.0);
    }
    let x = df / (df + t * t);
    reg_inc_beta(df / 2.0, 0.5, x)
}

/// Survival function of the F distribution: `P(F_{d1,d2} > f)`.
pub fn f_sf(f: f64, d1: f64, d2: f64) -> Result<f64, StatsError> {
    if !(d1 > 0.0) || !(d2 > 0.0) || f < 0.0 {
        return Err(StatsError::Domain(format!("f_sf(f={f}, d1={d1}, d2={d2})")));
    }
    if !f.is_finite() {
        return Ok(0.0);
    }
    reg_inc_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
}
