//! Seeded identity suites comparing closed forms against independent oracles.
//!
//! The oracle integrands are written out here from scratch and integrated
//! numerically; only the closed forms come from `diffdesc`.

use std::f64::consts::PI;

use diffdesc::{descriptors, kernels};
use nalgebra::{Matrix4, Vector2};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::quadrature::{integrate, integrate_with_mass};

const QUAD_TOL: f64 = 1e-12;

/// One compared value.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityRow {
    pub identity: &'static str,
    pub params: serde_json::Value,
    pub closed_form: f64,
    pub oracle: f64,
    pub rel_err: f64,
    pub tolerance: f64,
}

impl IdentityRow {
    pub fn passed(&self) -> bool {
        self.rel_err <= self.tolerance
    }

    /// Error as a multiple of the tolerance; NaN counts as infinitely bad.
    pub fn severity(&self) -> f64 {
        if self.rel_err.is_nan() {
            f64::INFINITY
        } else {
            self.rel_err / self.tolerance
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Radial,
    Moment,
    InnerLinearized,
    BothLinearized,
    HeatAssembly,
    Rotation,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Radial,
        Suite::Moment,
        Suite::InnerLinearized,
        Suite::BothLinearized,
        Suite::HeatAssembly,
        Suite::Rotation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Radial => "radial_profile_integral",
            Suite::Moment => "gauss_halfline_moment2",
            Suite::InnerLinearized => "inner_linearized_factor",
            Suite::BothLinearized => "both_linearized_factor",
            Suite::HeatAssembly => "heat_assembly",
            Suite::Rotation => "affine_rotation_orthogonality",
        }
    }

    pub fn tolerance(self) -> f64 {
        match self {
            Suite::Radial => 1e-5,
            Suite::Moment => 1e-8,
            Suite::InnerLinearized | Suite::BothLinearized | Suite::HeatAssembly => 1e-6,
            Suite::Rotation => 1e-12,
        }
    }

    fn stream(self) -> u64 {
        Suite::ALL.iter().position(|s| *s == self).unwrap() as u64
    }

    /// Runs `count` draws from a generator seeded by `seed` and the suite.
    pub fn run(self, seed: u64, count: usize) -> Vec<IdentityRow> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(self.stream());
        (0..count)
            .map(|_| match self {
                Suite::Radial => radial_row(&mut rng),
                Suite::Moment => moment_row(&mut rng),
                Suite::InnerLinearized => inner_linearized_row(&mut rng),
                Suite::BothLinearized => both_row(&mut rng),
                Suite::HeatAssembly => heat_row(&mut rng),
                Suite::Rotation => rotation_row(&mut rng),
            })
            .collect()
    }
}

/// All suites, in [`Suite::ALL`] order.
pub fn run_all(seed: u64, count: usize) -> Vec<IdentityRow> {
    Suite::ALL.iter().flat_map(|s| s.run(seed, count)).collect()
}

/// Row with the largest error relative to its tolerance.
pub fn worst(rows: &[IdentityRow]) -> Option<&IdentityRow> {
    rows.iter()
        .max_by(|a, b| a.severity().total_cmp(&b.severity()))
}

/// CSV with columns `identity,params,closed_form,oracle,rel_err`.
pub fn to_csv(rows: &[IdentityRow]) -> String {
    let mut out = String::from("identity,params,closed_form,oracle,rel_err\n");
    for r in rows {
        let params = r.params.to_string().replace('"', "\"\"");
        out.push_str(&format!(
            "{},\"{}\",{:e},{:e},{:e}\n",
            r.identity, params, r.closed_form, r.oracle, r.rel_err
        ));
    }
    out
}

fn rel_err(closed: f64, oracle: f64, scale: f64) -> f64 {
    if closed == oracle {
        0.0
    } else {
        (closed - oracle).abs() / scale
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

fn vec2(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vector2<f64> {
    Vector2::new(uniform(rng, lo, hi), uniform(rng, lo, hi))
}

fn nonzero(rng: &mut ChaCha8Rng, lo: f64, hi: f64, min_abs: f64) -> f64 {
    loop {
        let v = uniform(rng, lo, hi);
        if v.abs() >= min_abs {
            return v;
        }
    }
}

fn normal_pdf(z: f64, sigma: f64) -> f64 {
    (-z * z / (2.0 * sigma * sigma)).exp() / ((2.0 * PI).sqrt() * sigma)
}

fn normal_pdf2(z: Vector2<f64>, sigma: f64) -> f64 {
    (-z.norm_squared() / (2.0 * sigma * sigma)).exp() / (2.0 * PI * sigma * sigma)
}

/// `∫₀^∞ r² gauss1(r c1 + c2, σ1) gauss2(r c3 + c4, σ2) dr` by quadrature.
///
/// The integrand is a Gaussian in `r` times `r²`; the window spans 14
/// standard deviations either side of its centre, clipped at zero.
pub fn radial_oracle(
    c1: f64,
    c2: f64,
    sigma1: f64,
    c3: Vector2<f64>,
    c4: Vector2<f64>,
    sigma2: f64,
) -> f64 {
    let (s1, s2) = (sigma1 * sigma1, sigma2 * sigma2);
    let curv = c1 * c1 / s1 + c3.norm_squared() / s2;
    let centre = -(c1 * c2 / s1 + c3.dot(&c4) / s2) / curv;
    let sd = curv.sqrt().recip();
    let lo = (centre - 14.0 * sd).max(0.0);
    let hi = centre.max(0.0) + 14.0 * sd;
    integrate(
        |r| r * r * normal_pdf(r * c1 + c2, sigma1) * normal_pdf2(r * c3 + c4, sigma2),
        lo,
        hi,
        QUAD_TOL,
    )
}

fn radial_row(rng: &mut ChaCha8Rng) -> IdentityRow {
    let c1 = uniform(rng, -2.0, 2.0);
    let c2 = uniform(rng, -2.0, 2.0);
    let sigma1 = uniform(rng, 0.2, 3.0);
    let c3 = vec2(rng, -2.0, 2.0);
    let c4 = vec2(rng, -2.0, 2.0);
    let sigma2 = uniform(rng, 0.2, 3.0);
    let closed =
        kernels::radial_profile_integral(c1, c2, sigma1, c3, c4, sigma2).unwrap_or(f64::NAN);
    let oracle = radial_oracle(c1, c2, sigma1, c3, c4, sigma2);
    IdentityRow {
        identity: Suite::Radial.name(),
        params: json!({"c1": c1, "c2": c2, "sigma1": sigma1, "c3": [c3.x, c3.y], "c4": [c4.x, c4.y], "sigma2": sigma2}),
        closed_form: closed,
        oracle,
        rel_err: rel_err(closed, oracle, oracle.abs()),
        tolerance: Suite::Radial.tolerance(),
    }
}

/// `∫₀^∞ r² exp(−(r − a1)²/(2 a2²)) dr` by quadrature on `[0, max(a1, 0) + 14 a2]`.
pub fn moment_oracle(a1: f64, a2: f64) -> f64 {
    let hi = a1.max(0.0) + 14.0 * a2;
    integrate(
        |r| r * r * (-(r - a1) * (r - a1) / (2.0 * a2 * a2)).exp(),
        0.0,
        hi,
        1e-14,
    )
}

fn moment_row(rng: &mut ChaCha8Rng) -> IdentityRow {
    let a1 = uniform(rng, -3.0, 3.0);
    let a2 = uniform(rng, 0.2, 3.0);
    let closed = kernels::gauss_halfline_moment2(a1, a2).unwrap_or(f64::NAN);
    let oracle = moment_oracle(a1, a2);
    IdentityRow {
        identity: Suite::Moment.name(),
        params: json!({"a1": a1, "a2": a2}),
        closed_form: closed,
        oracle,
        rel_err: rel_err(closed, oracle, oracle.abs()),
        tolerance: Suite::Moment.tolerance(),
    }
}

/// Centre and standard deviation of the Gaussian-in-`u` part of the
/// scale-pooling integrands, with `e^u` replaced by `e^{lin·u}`.
fn scale_window(
    x: Vector2<f64>,
    y: Vector2<f64>,
    sigma_d: f64,
    sigma_s: f64,
    lin: f64,
) -> (f64, f64) {
    let d2 = sigma_d * sigma_d;
    let prec = 1.0 / (sigma_s * sigma_s) + x.norm_squared() / d2;
    let centre = (lin + x.dot(&(y - x)) / d2) / prec;
    (centre, prec.sqrt().recip())
}

/// `∫ e^u gauss2(y − (1+u)x, σ_d) gauss1(u, σ_s) du` by quadrature.
pub fn inner_linearized_oracle(
    x: Vector2<f64>,
    y: Vector2<f64>,
    sigma_d: f64,
    sigma_s: f64,
) -> f64 {
    let (c, sd) = scale_window(x, y, sigma_d, sigma_s, 1.0);
    integrate(
        |u| u.exp() * normal_pdf2(y - (1.0 + u) * x, sigma_d) * normal_pdf(u, sigma_s),
        c - 14.0 * sd,
        c + 14.0 * sd,
        QUAD_TOL,
    )
}

/// `∫ (1+u) gauss2(y − (1+u)x, σ_d) gauss1(u, σ_s) du` by quadrature,
/// together with `∫ |…| du`.
pub fn both_linearized_oracle(
    x: Vector2<f64>,
    y: Vector2<f64>,
    sigma_d: f64,
    sigma_s: f64,
) -> (f64, f64) {
    let (c, sd) = scale_window(x, y, sigma_d, sigma_s, 0.0);
    let lo = (c - 14.0 * sd).min(-1.0 - sd);
    let hi = (c + 14.0 * sd).max(-1.0 + sd);
    integrate_with_mass(
        &|u: f64| (1.0 + u) * normal_pdf2(y - (1.0 + u) * x, sigma_d) * normal_pdf(u, sigma_s),
        lo,
        hi,
        QUAD_TOL,
    )
}

fn pooling_draw(rng: &mut ChaCha8Rng) -> (Vector2<f64>, Vector2<f64>, f64, f64) {
    let x = vec2(rng, -2.0, 2.0);
    let y = vec2(rng, -2.0, 2.0);
    let sigma_d = uniform(rng, 0.5, 3.0);
    let sigma_s = uniform(rng, 0.05, 0.5);
    (x, y, sigma_d, sigma_s)
}

fn pooling_params(
    x: Vector2<f64>,
    y: Vector2<f64>,
    sigma_d: f64,
    sigma_s: f64,
) -> serde_json::Value {
    json!({"x": [x.x, x.y], "y": [y.x, y.y], "sigma_d": sigma_d, "sigma_s": sigma_s})
}

fn inner_linearized_row(rng: &mut ChaCha8Rng) -> IdentityRow {
    let (x, y, sigma_d, sigma_s) = pooling_draw(rng);
    let closed = descriptors::inner_linearized_factor(x, y, sigma_d, sigma_s);
    let oracle = inner_linearized_oracle(x, y, sigma_d, sigma_s);
    IdentityRow {
        identity: Suite::InnerLinearized.name(),
        params: pooling_params(x, y, sigma_d, sigma_s),
        closed_form: closed,
        oracle,
        rel_err: rel_err(closed, oracle, oracle.abs()),
        tolerance: Suite::InnerLinearized.tolerance(),
    }
}

/// The integrand changes sign at `u = −1`, so the error is measured
/// against `∫|integrand|` rather than the possibly cancelling signed value.
fn both_row(rng: &mut ChaCha8Rng) -> IdentityRow {
    let (x, y, sigma_d, sigma_s) = pooling_draw(rng);
    let closed = descriptors::both_linearized_factor(x, y, sigma_d, sigma_s);
    let (oracle, mass) = both_linearized_oracle(x, y, sigma_d, sigma_s);
    IdentityRow {
        identity: Suite::BothLinearized.name(),
        params: pooling_params(x, y, sigma_d, sigma_s),
        closed_form: closed,
        oracle,
        rel_err: rel_err(closed, oracle, mass.max(oracle.abs())),
        tolerance: Suite::BothLinearized.tolerance(),
    }
}

/// Heat term rebuilt from the radial integral and the perpendicular Gaussian.
pub fn heat_composition(
    x: Vector2<f64>,
    y: Vector2<f64>,
    beta: f64,
    g: Vector2<f64>,
    sigma_d: f64,
    sigma_a: f64,
) -> f64 {
    let m = g.norm();
    let n = g / m;
    let v = Vector2::new(beta.cos(), beta.sin());
    let radial =
        kernels::radial_profile_integral(x.dot(&v) / m, -y.dot(&n), sigma_d, v, -g, sigma_a * m)
            .unwrap_or(f64::NAN);
    let r = x - y;
    let perp = (g.x * r.y - g.y * r.x) / m;
    radial
        * normal_pdf(
            perp,
            (sigma_d * sigma_d + sigma_a * sigma_a * x.norm_squared()).sqrt(),
        )
}

fn heat_row(rng: &mut ChaCha8Rng) -> IdentityRow {
    let x = vec2(rng, -6.0, 6.0);
    let y = vec2(rng, -6.0, 6.0);
    let beta = uniform(rng, 0.0, 2.0 * PI);
    let sigma_d = uniform(rng, 1.0, 4.0);
    let sigma_a = uniform(rng, 0.2, 1.0);
    let g = loop {
        let g = vec2(rng, -1.0, 1.0);
        if g.norm() >= 0.05 {
            break g;
        }
    };
    let closed = descriptors::heat_integrand(x, y, beta, g, sigma_d, sigma_a)
        * descriptors::heat_full_constant(sigma_d, sigma_a);
    let oracle = heat_composition(x, y, beta, g, sigma_d, sigma_a);
    IdentityRow {
        identity: Suite::HeatAssembly.name(),
        params: json!({"x": [x.x, x.y], "y": [y.x, y.y], "beta": beta, "g": [g.x, g.y], "sigma_d": sigma_d, "sigma_a": sigma_a}),
        closed_form: closed,
        oracle,
        rel_err: rel_err(closed, oracle, oracle.abs()),
        tolerance: Suite::HeatAssembly.tolerance(),
    }
}

/// Reports `max |RᵀR − I|` as both the closed form and the error.
fn rotation_row(rng: &mut ChaCha8Rng) -> IdentityRow {
    let g = Vector2::new(nonzero(rng, -2.0, 2.0, 0.05), nonzero(rng, -2.0, 2.0, 0.05));
    let x = Vector2::new(nonzero(rng, -2.0, 2.0, 0.05), nonzero(rng, -2.0, 2.0, 0.05));
    let dev = descriptors::affine_rotation(g, x)
        .map(|r| (r.transpose() * r - Matrix4::identity()).amax())
        .unwrap_or(f64::NAN);
    IdentityRow {
        identity: Suite::Rotation.name(),
        params: json!({"g": [g.x, g.y], "x": [x.x, x.y]}),
        closed_form: dev,
        oracle: 0.0,
        rel_err: dev,
        tolerance: Suite::Rotation.tolerance(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let a = Suite::Radial.run(7, 3);
        let b = Suite::Radial.run(7, 3);
        assert_eq!(to_csv(&a), to_csv(&b));
        let c = Suite::Radial.run(8, 3);
        assert_ne!(to_csv(&a), to_csv(&c));
    }

    #[test]
    fn single_row_is_prefix() {
        let one = Suite::Moment.run(42, 1);
        let many = Suite::Moment.run(42, 5);
        assert_eq!(one[0].params, many[0].params);
    }

    #[test]
    fn moment_symmetric_case() {
        assert!((moment_oracle(0.0, 1.0) - (PI / 2.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn worst_prefers_nan() {
        let mut rows = Suite::Rotation.run(1, 3);
        rows[1].rel_err = f64::NAN;
        assert!(worst(&rows).unwrap().rel_err.is_nan());
    }

    #[test]
    fn csv_header_and_rows() {
        let rows = Suite::InnerLinearized.run(3, 2);
        let csv = to_csv(&rows);
        assert!(csv.starts_with("identity,params,closed_form,oracle,rel_err\n"));
        assert_eq!(csv.lines().count(), 3);
    }
}
