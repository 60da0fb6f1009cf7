//! Gaussian kernels and the closed-form integrals built from them.
//!
//! All Gaussians carry unit mass: `gauss(x, σ) = (2πσ²)^(-d/2) exp(-|x|²/(2σ²))`.
//! Every function here is pure and safe to call from any thread.

use std::f64::consts::PI;

use errorfunctions::RealErrorFunctions;
use nalgebra::Vector2;

use crate::error::{require_positive, Error, Result};

/// Default number of wraps on each side for [`gauss_periodic`].
pub const DEFAULT_WRAPS: u32 = 4;

const SQRT_PI: f64 = 1.772_453_850_905_516;
const SQRT_2PI: f64 = 2.506_628_274_631_000_2;

/// Threshold above which `w` switches to its asymptotic series.
const W_ASYMPTOTIC_FROM: f64 = 8.0;

/// Isotropic Gaussian density in dimension 1, 2 or 4.
pub fn gauss(x: &[f64], sigma: f64) -> Result<f64> {
    require_positive("sigma", sigma)?;
    let d = x.len();
    if !matches!(d, 1 | 2 | 4) {
        return Err(Error::Domain(format!(
            "dimension must be 1, 2 or 4, got {d}"
        )));
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let norm = (2.0 * PI * sigma * sigma).powf(-(d as f64) / 2.0);
    Ok(norm * (-r2 / (2.0 * sigma * sigma)).exp())
}

/// 1D Gaussian density. `sigma` must be positive; not checked.
#[inline]
pub fn gauss1(x: f64, sigma: f64) -> f64 {
    (-x * x / (2.0 * sigma * sigma)).exp() / (SQRT_2PI * sigma)
}

/// Natural log of [`gauss1`].
#[inline]
pub fn log_gauss1(x: f64, sigma: f64) -> f64 {
    -x * x / (2.0 * sigma * sigma) - (SQRT_2PI * sigma).ln()
}

/// 2D isotropic Gaussian density. `sigma` must be positive; not checked.
#[inline]
pub fn gauss2(x: Vector2<f64>, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    (-x.norm_squared() / (2.0 * s2)).exp() / (2.0 * PI * s2)
}

/// Natural log of [`gauss2`].
#[inline]
pub fn log_gauss2(x: Vector2<f64>, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    -x.norm_squared() / (2.0 * s2) - (2.0 * PI * s2).ln()
}

/// Wrapped Gaussian on the circle, summed over `2·wraps + 1` periods.
///
/// The angle is first reduced to `[-π, π)`, so the truncation error is
/// bounded by `2·gauss(2π·wraps − π, σ)`.
pub fn gauss_periodic(phi: f64, sigma: f64, wraps: u32) -> Result<f64> {
    require_positive("sigma", sigma)?;
    if wraps < 1 {
        return Err(Error::Domain("wraps must be at least 1".into()));
    }
    if !phi.is_finite() {
        return Err(Error::Domain(format!("angle must be finite, got {phi}")));
    }
    Ok(periodic(phi, sigma, wraps))
}

/// Unchecked [`gauss_periodic`] for inner loops.
#[inline]
pub(crate) fn periodic(phi: f64, sigma: f64, wraps: u32) -> f64 {
    let phi = wrap_angle(phi);
    let w = wraps as i32;
    (-w..=w)
        .map(|k| gauss1(phi + 2.0 * PI * k as f64, sigma))
        .sum()
}

/// Reduce an angle to `[-π, π)`.
#[inline]
pub fn wrap_angle(phi: f64) -> f64 {
    let r = (phi + PI).rem_euclid(2.0 * PI) - PI;
    if r >= PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Scaled complementary error function `e^{x²} erfc(x)`.
///
/// Finite for every `x ≥ -26.6`; below that `e^{x²}` overflows and the
/// result is `+∞`.
pub fn erfcx(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Domain("erfcx of NaN".into()));
    }
    Ok(x.erfcx())
}

/// Error function.
#[inline]
pub fn erf(x: f64) -> f64 {
    RealErrorFunctions::erf(x)
}

/// Heat factor `w(x) = √π (1 + 2x²) erfcx(x) − 2x`.
///
/// Positive everywhere and `w(x) ~ 1/x³` as `x → ∞`. Large positive
/// arguments use the asymptotic series to avoid cancellation.
pub fn w(x: f64) -> f64 {
    if x > W_ASYMPTOTIC_FROM {
        w_asymptotic(x)
    } else {
        SQRT_PI * (1.0 + 2.0 * x * x) * x.erfcx() - 2.0 * x
    }
}

fn w_asymptotic(x: f64) -> f64 {
    // w = 2x Σ_{n≥2} (-1)^n (2n-3)!! (2n-2) q^n with q = 1/(2x²)
    let q = 1.0 / (2.0 * x * x);
    let mut qn = q * q;
    let mut dfact = 1.0;
    let mut sum = 0.0;
    let mut last = f64::INFINITY;
    for n in 2..60 {
        if n > 2 {
            dfact *= (2 * n - 3) as f64;
            qn *= q;
        }
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let term = sign * dfact * (2 * n - 2) as f64 * qn;
        if term.abs() >= last {
            break;
        }
        sum += term;
        last = term.abs();
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    2.0 * x * sum
}

/// `exp(log_scale) · w(x)` without intermediate overflow.
///
/// For negative `x`, `w(x)` grows like `e^{x²}`; the identity
/// `w(-u) = 2√π (1 + 2u²) e^{u²} − w(u)` folds that growth into the
/// exponent. The result is finite whenever `log_scale + x² < 709`.
pub fn w_scaled(log_scale: f64, x: f64) -> f64 {
    if x >= 0.0 {
        log_scale.exp() * w(x)
    } else {
        let u = -x;
        2.0 * SQRT_PI * (1.0 + 2.0 * u * u) * (log_scale + u * u).exp() - log_scale.exp() * w(u)
    }
}

/// Second moment of a Gaussian profile over the half line,
/// `∫₀^∞ r² exp(-(r − a1)²/(2 a2²)) dr`.
///
/// Evaluated as `(a2³/√2) e^{-m²} w(m)` with `m = -a1/(√2 a2)`, which is
/// algebraically equal to the textbook form
/// `a1 a2² e^{-a1²/(2a2²)} + √(π/2) a2 (a1² + a2²)(1 + erf(a1/(√2 a2)))`
/// but does not cancel catastrophically for negative `a1`.
pub fn gauss_halfline_moment2(a1: f64, a2: f64) -> Result<f64> {
    require_positive("a2", a2)?;
    if !a1.is_finite() {
        return Err(Error::Domain(format!("a1 must be finite, got {a1}")));
    }
    let m = -a1 / (std::f64::consts::SQRT_2 * a2);
    Ok(a2.powi(3) / std::f64::consts::SQRT_2 * w_scaled(-m * m, m))
}

/// Closed form of `∫₀^∞ r² gauss1(r c1 + c2, σ1) gauss2(r c3 + c4, σ2) dr`.
///
/// Completing the square in `r` gives
/// `e^{-C} w(t2) / (8√2 π^{3/2} σ1 σ2² t1³)` with
/// `t1 = √(c1²/(2σ1²) + |c3|²/(2σ2²))`,
/// `t2 = (c1 c2/σ1² + c3·c4/σ2²)/(2 t1)` and
/// `C = c2²/(2σ1²) + |c4|²/(2σ2²)`.
pub fn radial_profile_integral(
    c1: f64,
    c2: f64,
    sigma1: f64,
    c3: Vector2<f64>,
    c4: Vector2<f64>,
    sigma2: f64,
) -> Result<f64> {
    require_positive("sigma1", sigma1)?;
    require_positive("sigma2", sigma2)?;
    let s1 = sigma1 * sigma1;
    let s2 = sigma2 * sigma2;
    let t1 = (c1 * c1 / (2.0 * s1) + c3.norm_squared() / (2.0 * s2)).sqrt();
    if t1 == 0.0 || !t1.is_finite() {
        return Err(Error::Domain(
            "degenerate radial direction: c1 and c3 are both zero".into(),
        ));
    }
    let t2 = (c1 * c2 / s1 + c3.dot(&c4) / s2) / (2.0 * t1);
    let big_c = c2 * c2 / (2.0 * s1) + c4.norm_squared() / (2.0 * s2);
    let denom = 8.0 * std::f64::consts::SQRT_2 * PI.powf(1.5) * sigma1 * s2 * t1.powi(3);
    Ok(w_scaled(-big_c, t2) / denom)
}
