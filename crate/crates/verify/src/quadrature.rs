//! Adaptive Simpson quadrature with a tolerance relative to the integral of `|f|`.

const PANELS: usize = 256;
const MAX_DEPTH: u32 = 40;

/// Integrates `f` over `[a, b]`.
///
/// The interval is first split into fixed panels; each panel is refined
/// adaptively until the local error estimate is below its share of
/// `rel_tol · ∫|f|`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    integrate_with_mass(&f, a, b, rel_tol).0
}

/// Like [`integrate`] but also returns the estimate of `∫|f|`.
pub fn integrate_with_mass<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    let h = (b - a) / PANELS as f64;
    let mut panels = Vec::with_capacity(PANELS);
    let mut mass = 0.0;
    for i in 0..PANELS {
        let lo = a + i as f64 * h;
        let hi = if i + 1 == PANELS { b } else { lo + h };
        let mid = 0.5 * (lo + hi);
        let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
        let whole = simpson(lo, hi, flo, fmid, fhi);
        mass += (hi - lo) / 6.0 * (flo.abs() + 4.0 * fmid.abs() + fhi.abs());
        panels.push((lo, hi, flo, fmid, fhi, whole));
    }
    let tol = (rel_tol * mass).max(f64::MIN_POSITIVE) / PANELS as f64;
    let total = panels
        .into_iter()
        .map(|(lo, hi, flo, fmid, fhi, whole)| {
            refine(f, lo, hi, flo, fmid, fhi, whole, tol, MAX_DEPTH)
        })
        .sum();
    (total, mass)
}

/// Integrates `f` over `[a, ∞)` via `r = a + t/(1 − t)`.
pub fn integrate_half_line<F: Fn(f64) -> f64>(f: F, a: f64, rel_tol: f64) -> f64 {
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let u = 1.0 - t;
        let v = f(a + t / u) / (u * u);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, 0.0, 1.0, rel_tol)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    let noise = 32.0 * f64::EPSILON * (left.abs() + right.abs());
    if depth == 0 || delta.abs() <= (15.0 * tol).max(noise) {
        return left + right + delta / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = integrate(|x| x * x * x - 2.0 * x, 0.0, 3.0, 1e-12);
        assert!((v - (81.0 / 4.0 - 9.0)).abs() < 1e-12);
    }

    #[test]
    fn gaussian_half_line() {
        let v = integrate_half_line(|x| (-x * x / 2.0).exp(), 0.0, 1e-12);
        assert!((v - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-11);
    }

    #[test]
    fn narrow_peak() {
        let s = 0.01;
        let v = integrate(
            |x| (-(x - 0.3) * (x - 0.3) / (2.0 * s * s)).exp(),
            -1.0,
            1.0,
            1e-12,
        );
        let exact = s * (2.0 * std::f64::consts::PI).sqrt();
        assert!((v / exact - 1.0).abs() < 1e-10);
    }

    #[test]
    fn tolerance_below_roundoff_terminates() {
        let v = integrate(|x| x.exp(), 0.0, 1.0, 1e-18);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn oscillating_sign() {
        let v = integrate(|x| x.sin(), 0.0, 2.0 * std::f64::consts::PI, 1e-12);
        assert!(v.abs() < 1e-10);
    }
}
