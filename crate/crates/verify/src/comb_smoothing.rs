//! Quality of the partial-comb smoothing approximation on a straight edge.
//!
//! The field is a smoothed step along the first axis, so every gradient
//! points along `+e₁`. The reference is the orientation density of that
//! field convolved over rotations `α` and translations `b`; for this field
//! the translation part has a closed form per gradient sample, leaving a sum
//! over samples. The approximation smooths the orientation comb only.

use std::f64::consts::PI;

use diffdesc::descriptors::{gradient_points, similarity_smoothed_density, GradientPoint};
use diffdesc::field::{rotation, GridSpec, ScalarField};
use diffdesc::kernels::erf;
use nalgebra::Vector2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombSmoothingCase {
    /// Edge width of the step.
    pub omega: f64,
    pub sigma_d: f64,
    pub sigma_r: f64,
    pub grid_half_width: usize,
    pub spacing: f64,
    pub n_alpha: usize,
    pub n_beta: usize,
    /// Number of points per axis of the `x` grid on `[-σ_d/2, σ_d/2]²`.
    pub n_x: usize,
}

impl Default for CombSmoothingCase {
    fn default() -> Self {
        Self {
            omega: 2.0,
            sigma_d: 2.0,
            sigma_r: 2.0 * PI / 8.0,
            grid_half_width: 24,
            spacing: 0.5,
            n_alpha: 64,
            n_beta: 8,
            n_x: 9,
        }
    }
}

impl CombSmoothingCase {
    pub fn field(&self) -> ScalarField {
        let n = 2 * self.grid_half_width + 1;
        let grid = GridSpec::centered(n, n, self.spacing);
        let s = std::f64::consts::SQRT_2 * self.omega;
        ScalarField::from_fn(grid, |y| 0.5 + 0.45 * erf(y.x / s))
            .expect("edge values lie in [0, 1]")
    }

    fn x_grid(&self) -> Vec<Vector2<f64>> {
        let half = self.sigma_d / 2.0;
        let at = |i: usize| -half + 2.0 * half * i as f64 / (self.n_x - 1) as f64;
        (0..self.n_x)
            .flat_map(|i| (0..self.n_x).map(move |j| Vector2::new(at(j), at(i))))
            .collect()
    }
}

fn wrapped(phi: f64, sigma: f64) -> f64 {
    (-8..=8)
        .map(|k| {
            let z = phi + 2.0 * PI * k as f64;
            (-z * z / (2.0 * sigma * sigma)).exp()
        })
        .sum::<f64>()
        / ((2.0 * PI).sqrt() * sigma)
}

fn gauss2(z: Vector2<f64>, sigma: f64) -> f64 {
    (-z.norm_squared() / (2.0 * sigma * sigma)).exp() / (2.0 * PI * sigma * sigma)
}

/// Fully smoothed density at `(α, β, x)`, summed directly over samples.
pub fn reference_density(
    points: &[GradientPoint],
    alpha: f64,
    beta: f64,
    x: Vector2<f64>,
    sigma_r: f64,
    sigma_d: f64,
) -> f64 {
    points
        .iter()
        .map(|p| {
            let theta = p.grad.orientation;
            wrapped(alpha - theta + beta, sigma_r)
                * p.grad.magnitude
                * gauss2(p.y - rotation(theta - beta) * x, sigma_d)
                * p.weight
        })
        .sum()
}

/// Relative L2 difference between [`similarity_smoothed_density`] and
/// [`reference_density`] over the case's `(α, β, x)` grid.
pub fn relative_error(case: &CombSmoothingCase) -> f64 {
    let field = case.field();
    let points = gradient_points(&field, None, 1e-9);
    let xs = case.x_grid();
    let (mut num, mut den) = (0.0, 0.0);
    for ia in 0..case.n_alpha {
        let alpha = 2.0 * PI * ia as f64 / case.n_alpha as f64;
        for ib in 0..case.n_beta {
            let beta = 2.0 * PI * ib as f64 / case.n_beta as f64;
            for x in &xs {
                let exact = reference_density(&points, alpha, beta, *x, case.sigma_r, case.sigma_d);
                let approx = similarity_smoothed_density(
                    &points,
                    alpha,
                    beta,
                    *x,
                    case.sigma_r,
                    case.sigma_d,
                );
                num += (exact - approx).powi(2);
                den += exact * exact;
            }
        }
    }
    (num / den).sqrt()
}
