//! Orientation densities `h(β, x)` sampled on an orientation × spatial grid.
//!
//! Every descriptor is a Riemann sum over field pixels `y` with weight
//! `spacing²`. Pixels on the one-pixel border (or next to uncovered pixels
//! of a warped field) carry no gradient and are skipped.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use gauss_quad::GaussLegendre;
use nalgebra::{Matrix4, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::field::{rotation, GradientSample, GridSpec, ScalarField, WarpedField};
use crate::kernels::{self, gauss1, gauss2, log_gauss1, log_gauss2, periodic, DEFAULT_WRAPS};

/// Grid points closer than this to the keypoint use the plain SIFT
/// integrand in [`inner_linearized_factor`].
pub const EPS_X: f64 = 1e-6;

/// Descriptor variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DescriptorKind {
    Sift,
    DspSampled,
    DspClosedInner,
    DspClosedBoth,
    Heat,
    Df,
    RawDensity,
}

impl DescriptorKind {
    pub const ALL: [DescriptorKind; 7] = [
        DescriptorKind::Sift,
        DescriptorKind::DspSampled,
        DescriptorKind::DspClosedInner,
        DescriptorKind::DspClosedBoth,
        DescriptorKind::Heat,
        DescriptorKind::Df,
        DescriptorKind::RawDensity,
    ];

    /// Command-line spelling.
    pub fn name(self) -> &'static str {
        match self {
            DescriptorKind::Sift => "sift",
            DescriptorKind::DspSampled => "dsp-sampled",
            DescriptorKind::DspClosedInner => "dsp-closed-inner",
            DescriptorKind::DspClosedBoth => "dsp-closed-both",
            DescriptorKind::Heat => "heat",
            DescriptorKind::Df => "df",
            DescriptorKind::RawDensity => "raw-density",
        }
    }

    /// Whether the first axis is a periodic orientation axis.
    pub fn periodic_axis(self) -> bool {
        self != DescriptorKind::Df
    }

    /// Whether values are guaranteed non-negative.
    pub fn nonnegative(self) -> bool {
        !matches!(
            self,
            DescriptorKind::DspClosedInner | DescriptorKind::DspClosedBoth
        )
    }
}

impl fmt::Display for DescriptorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DescriptorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DescriptorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown descriptor kind {s:?}")))
    }
}

/// Parameters shared by all descriptor variants.
///
/// `sigma_s` is the std of the pooled support size in world units for
/// [`dsp_sampled`], and the std of the log-scale `s` for the closed forms
/// [`dsp_closed_inner`] and [`dsp_closed_both`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescriptorParams {
    /// Angular smoothing std, radians.
    pub sigma_r: f64,
    /// Spatial pooling std.
    pub sigma_d: f64,
    /// Nominal support size pooled around by `dsp_sampled`.
    pub sigma_d0: f64,
    pub sigma_s: f64,
    /// Affine-diffusion std, heat only.
    pub sigma_a: f64,
    /// Intensity-pooling std, distribution fields only.
    pub sigma_l: f64,
    pub n_beta_bins: usize,
    /// Spatial sample grid; `None` means 16×16 over `[-3σ_d0, 3σ_d0]²`.
    pub grid: Option<GridSpec>,
    pub n_scale_samples: usize,
    /// Gradient magnitudes below this are treated as zero.
    pub eps_grad: f64,
    /// Number of intensity levels for distribution fields.
    pub n_levels: usize,
    /// Multiply heat values by the full closed-form constant.
    pub heat_full_constant: bool,
}

impl Default for DescriptorParams {
    fn default() -> Self {
        Self {
            sigma_r: 2.0 * PI / 8.0,
            sigma_d: 3.0,
            sigma_d0: 3.0,
            sigma_s: 0.2,
            sigma_a: 0.5,
            sigma_l: 0.1,
            n_beta_bins: 8,
            grid: None,
            n_scale_samples: 9,
            eps_grad: 1e-6,
            n_levels: 16,
            heat_full_constant: false,
        }
    }
}

impl DescriptorParams {
    /// The spatial grid actually used.
    pub fn spatial_grid(&self) -> GridSpec {
        self.grid
            .unwrap_or_else(|| GridSpec::square_span(16, 3.0 * self.sigma_d0))
    }

    /// Check the parameters the given kind depends on.
    pub fn validate_for(&self, kind: DescriptorKind) -> Result<()> {
        use DescriptorKind::*;
        if kind != Df && self.n_beta_bins < 2 {
            return Err(Error::Domain("n_beta_bins must be at least 2".into()));
        }
        let mut checks: Vec<(&str, f64)> = Vec::new();
        match kind {
            Sift | DspClosedInner | DspClosedBoth => checks.push(("sigma_d", self.sigma_d)),
            DspSampled => checks.push(("sigma_d0", self.sigma_d0)),
            Heat => checks.extend([("sigma_d", self.sigma_d), ("sigma_a", self.sigma_a)]),
            Df => checks.extend([("sigma_d", self.sigma_d), ("sigma_l", self.sigma_l)]),
            RawDensity => {}
        }
        if matches!(kind, Sift | DspSampled | DspClosedInner | DspClosedBoth) {
            checks.push(("sigma_r", self.sigma_r));
        }
        if matches!(kind, DspSampled | DspClosedInner | DspClosedBoth) {
            checks.push(("sigma_s", self.sigma_s));
        }
        for (name, v) in checks {
            require_positive(name, v)?;
        }
        if kind == DspSampled && self.n_scale_samples < 3 {
            return Err(Error::Domain("n_scale_samples must be at least 3".into()));
        }
        if kind == Df && self.n_levels < 2 {
            return Err(Error::Domain("n_levels must be at least 2".into()));
        }
        if !(self.eps_grad >= 0.0 && self.eps_grad.is_finite()) {
            return Err(Error::Domain("eps_grad must be non-negative".into()));
        }
        self.spatial_grid().validate()
    }
}

/// A sampled density `h(β, x)`, stored `[beta][row][col]`.
///
/// For distribution fields the first axis holds intensity levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub kind: DescriptorKind,
    pub params: DescriptorParams,
    pub grid: GridSpec,
    pub beta_centers: Vec<f64>,
    #[serde(skip)]
    pub values: Vec<f64>,
}

/// JSON header written next to the binary payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescriptorHeader {
    pub kind: DescriptorKind,
    pub params: DescriptorParams,
    pub grid: GridSpec,
    pub beta_centers: Vec<f64>,
    /// `[n_beta, height, width]`.
    pub shape: [usize; 3],
    pub payload: String,
}

impl Descriptor {
    pub fn n_beta(&self) -> usize {
        self.beta_centers.len()
    }

    #[inline]
    pub fn index(&self, b: usize, row: usize, col: usize) -> usize {
        (b * self.grid.height + row) * self.grid.width + col
    }

    pub fn value(&self, b: usize, row: usize, col: usize) -> f64 {
        self.values[self.index(b, row, col)]
    }

    /// Spacing of the first axis.
    pub fn axis_step(&self) -> f64 {
        if self.kind.periodic_axis() {
            2.0 * PI / self.n_beta() as f64
        } else if self.n_beta() > 1 {
            self.beta_centers[1] - self.beta_centers[0]
        } else {
            1.0
        }
    }

    /// Riemann weight `Δβ · Δx²` of one cell.
    pub fn cell_weight(&self) -> f64 {
        self.axis_step() * self.grid.cell_area()
    }

    /// β-profile at one spatial sample.
    pub fn profile(&self, row: usize, col: usize) -> Vec<f64> {
        (0..self.n_beta())
            .map(|b| self.value(b, row, col))
            .collect()
    }

    pub fn header(&self) -> DescriptorHeader {
        DescriptorHeader {
            kind: self.kind,
            params: self.params,
            grid: self.grid,
            beta_centers: self.beta_centers.clone(),
            shape: [self.n_beta(), self.grid.height, self.grid.width],
            payload: "f32le".into(),
        }
    }

    /// Little-endian `f32` payload in `[beta][row][col]` order.
    pub fn payload_bytes(&self) -> Vec<u8> {
        self.values
            .iter()
            .flat_map(|v| (*v as f32).to_le_bytes())
            .collect()
    }

    /// Rebuild from a header and payload (values are rounded to `f32`).
    pub fn from_parts(header: DescriptorHeader, payload: &[u8]) -> Result<Self> {
        let [nb, h, w] = header.shape;
        if nb != header.beta_centers.len() || h != header.grid.height || w != header.grid.width {
            return Err(Error::Contract(
                "header shape disagrees with grid or beta axis".into(),
            ));
        }
        if payload.len() != 4 * nb * h * w {
            return Err(Error::Parse {
                offset: payload.len(),
                message: format!("expected {} payload bytes", 4 * nb * h * w),
            });
        }
        let values = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Ok(Self {
            kind: header.kind,
            params: header.params,
            grid: header.grid,
            beta_centers: header.beta_centers,
            values,
        })
    }

    /// CSV with header `beta,y,x,value`, one row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("beta,y,x,value\n");
        for (b, beta) in self.beta_centers.iter().enumerate() {
            for row in 0..self.grid.height {
                for col in 0..self.grid.width {
                    let p = self.grid.world(col, row);
                    out.push_str(&format!(
                        "{beta},{},{},{}\n",
                        p.y,
                        p.x,
                        self.value(b, row, col)
                    ));
                }
            }
        }
        out
    }
}

/// Bin centers `2πb/n`; bin `b` covers `[2πb/n − π/n, 2πb/n + π/n)`.
pub fn beta_centers(n_beta_bins: usize) -> Vec<f64> {
    (0..n_beta_bins)
        .map(|b| 2.0 * PI * b as f64 / n_beta_bins as f64)
        .collect()
}

/// Orientation bin containing `angle`.
pub fn beta_bin(angle: f64, n_beta_bins: usize) -> usize {
    let width = 2.0 * PI / n_beta_bins as f64;
    ((angle / width).round() as i64).rem_euclid(n_beta_bins as i64) as usize
}

/// One gradient sample of a field with its Riemann weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientPoint {
    pub y: Vector2<f64>,
    pub grad: GradientSample,
    pub weight: f64,
}

/// Gradient samples at every interior pixel with magnitude at least `eps_grad`.
///
/// With a coverage mask, pixels whose stencil touches an uncovered pixel
/// are skipped.
pub fn gradient_points(
    field: &ScalarField,
    coverage: Option<&[bool]>,
    eps_grad: f64,
) -> Vec<GradientPoint> {
    let g = field.grid();
    let weight = g.cell_area();
    let covered = |c: usize, r: usize| coverage.is_none_or(|m| m[r * g.width + c]);
    let mut out = Vec::new();
    for row in 1..g.height.saturating_sub(1) {
        for col in 1..g.width.saturating_sub(1) {
            if !(covered(col, row)
                && covered(col - 1, row)
                && covered(col + 1, row)
                && covered(col, row - 1)
                && covered(col, row + 1))
            {
                continue;
            }
            if let Some(grad) = field.gradient_at_pixel(col, row) {
                if grad.magnitude >= eps_grad && grad.magnitude > 0.0 {
                    out.push(GradientPoint {
                        y: g.world(col, row),
                        grad,
                        weight,
                    });
                }
            }
        }
    }
    out
}

/// Binned realisation of the raw orientation density at one point.
///
/// The gradient at `x` goes entirely to the bin containing its orientation
/// with value `|∇f| / bin_width`.
pub fn raw_density(
    patch: &ScalarField,
    beta: f64,
    x: Vector2<f64>,
    n_beta_bins: usize,
    eps_grad: f64,
) -> Result<f64> {
    let g = patch.gradient(x)?;
    if g.magnitude < eps_grad || g.magnitude == 0.0 {
        return Ok(0.0);
    }
    if beta_bin(g.orientation, n_beta_bins) == beta_bin(beta, n_beta_bins) {
        Ok(g.magnitude / (2.0 * PI / n_beta_bins as f64))
    } else {
        Ok(0.0)
    }
}

fn empty(kind: DescriptorKind, params: &DescriptorParams) -> Descriptor {
    let grid = params.spatial_grid();
    let beta_centers = if kind == DescriptorKind::Df {
        let l = params.n_levels;
        (0..l).map(|k| k as f64 / (l - 1) as f64).collect()
    } else {
        beta_centers(params.n_beta_bins)
    };
    let values = vec![0.0; beta_centers.len() * grid.len()];
    Descriptor {
        kind,
        params: *params,
        grid,
        beta_centers,
        values,
    }
}

/// Raw density sampled on the descriptor grid; points without a gradient give 0.
pub fn raw_density_descriptor(
    patch: &ScalarField,
    params: &DescriptorParams,
) -> Result<Descriptor> {
    params.validate_for(DescriptorKind::RawDensity)?;
    let mut d = empty(DescriptorKind::RawDensity, params);
    let width = 2.0 * PI / params.n_beta_bins as f64;
    for (i, x) in d.grid.points().into_iter().enumerate() {
        if let Ok(g) = patch.gradient(x) {
            if g.magnitude >= params.eps_grad && g.magnitude > 0.0 {
                let b = beta_bin(g.orientation, params.n_beta_bins);
                d.values[b * d.grid.len() + i] = g.magnitude / width;
            }
        }
    }
    Ok(d)
}

/// Fill a descriptor as `Σ_y k̃(β − ∠∇f(y)) |∇f(y)| S(x, y) w_y`.
fn orientation_pooled(
    kind: DescriptorKind,
    params: &DescriptorParams,
    points: &[GradientPoint],
    spatial: impl Fn(Vector2<f64>, Vector2<f64>) -> f64 + Sync,
) -> Descriptor {
    let mut d = empty(kind, params);
    let nb = d.n_beta();
    let table: Vec<f64> = d
        .beta_centers
        .iter()
        .flat_map(|&beta| {
            points.iter().map(move |p| {
                periodic(beta - p.grad.orientation, params.sigma_r, DEFAULT_WRAPS)
                    * p.grad.magnitude
                    * p.weight
            })
        })
        .collect();
    let n = points.len();
    let cells: Vec<Vec<f64>> = d
        .grid
        .points()
        .par_iter()
        .map(|&x| {
            let s: Vec<f64> = points.iter().map(|p| spatial(x, p.y)).collect();
            (0..nb)
                .map(|b| {
                    table[b * n..(b + 1) * n]
                        .iter()
                        .zip(&s)
                        .map(|(k, v)| k * v)
                        .sum()
                })
                .collect()
        })
        .collect();
    scatter(&mut d, cells);
    d
}

fn scatter(d: &mut Descriptor, cells: Vec<Vec<f64>>) {
    let m = d.grid.len();
    for (i, cell) in cells.into_iter().enumerate() {
        for (b, v) in cell.into_iter().enumerate() {
            d.values[b * m + i] = v;
        }
    }
}

/// Continuous SIFT: orientation-smoothed, Gaussian-pooled gradient density.
pub fn sift(field: &ScalarField, params: &DescriptorParams) -> Result<Descriptor> {
    compute_masked(DescriptorKind::Sift, field, None, params)
}

/// Domain-size pooling by Gauss–Legendre sampling of `σ_d` around `σ_d0`.
///
/// The scale weights `gauss1(σ_d − σ_d0, σ_s)·w_i` are renormalised to
/// sum to one so the pooled kernel keeps unit mass.
pub fn dsp_sampled(field: &ScalarField, params: &DescriptorParams) -> Result<Descriptor> {
    compute_masked(DescriptorKind::DspSampled, field, None, params)
}

/// Domain-size pooling with the inner `e^s` linearised (three-factor form).
pub fn dsp_closed_inner(field: &ScalarField, params: &DescriptorParams) -> Result<Descriptor> {
    compute_masked(DescriptorKind::DspClosedInner, field, None, params)
}

/// Domain-size pooling with both `e^s` factors linearised.
pub fn dsp_closed_both(field: &ScalarField, params: &DescriptorParams) -> Result<Descriptor> {
    compute_masked(DescriptorKind::DspClosedBoth, field, None, params)
}

/// Heat descriptor: exact affine diffusion of the raw density.
pub fn heat(field: &ScalarField, params: &DescriptorParams) -> Result<Descriptor> {
    compute_masked(DescriptorKind::Heat, field, None, params)
}

/// Distribution field: intensity histogram pooled in space.
pub fn df(field: &ScalarField, params: &DescriptorParams) -> Result<Descriptor> {
    compute_masked(DescriptorKind::Df, field, None, params)
}

/// Any descriptor kind.
pub fn compute(
    kind: DescriptorKind,
    field: &ScalarField,
    params: &DescriptorParams,
) -> Result<Descriptor> {
    compute_masked(kind, field, None, params)
}

/// Any descriptor kind over the covered part of a warped field.
pub fn compute_warped(
    kind: DescriptorKind,
    warped: &WarpedField,
    params: &DescriptorParams,
) -> Result<Descriptor> {
    compute_masked(kind, &warped.field, Some(&warped.coverage), params)
}

fn compute_masked(
    kind: DescriptorKind,
    field: &ScalarField,
    coverage: Option<&[bool]>,
    params: &DescriptorParams,
) -> Result<Descriptor> {
    params.validate_for(kind)?;
    if let Some(mask) = coverage {
        if mask.len() != field.grid().len() {
            return Err(Error::Contract(
                "coverage mask size differs from field".into(),
            ));
        }
    }
    let sd = params.sigma_d;
    let ss = params.sigma_s;
    let d = match kind {
        DescriptorKind::RawDensity => raw_density_descriptor(field, params)?,
        DescriptorKind::Df => df_masked(field, coverage, params),
        DescriptorKind::Heat => heat_masked(field, coverage, params),
        DescriptorKind::Sift => {
            let pts = gradient_points(field, coverage, params.eps_grad);
            orientation_pooled(kind, params, &pts, |x, y| gauss2(y - x, sd))
        }
        DescriptorKind::DspSampled => {
            let (sigmas, weights) = scale_samples(params)?;
            let pts = gradient_points(field, coverage, params.eps_grad);
            orientation_pooled(kind, params, &pts, |x, y| {
                sigmas
                    .iter()
                    .zip(&weights)
                    .map(|(s, w)| w * gauss2(y - x, *s))
                    .sum()
            })
        }
        DescriptorKind::DspClosedInner => {
            let pts = gradient_points(field, coverage, params.eps_grad);
            orientation_pooled(kind, params, &pts, |x, y| {
                inner_linearized_factor(x, y, sd, ss)
            })
        }
        DescriptorKind::DspClosedBoth => {
            let pts = gradient_points(field, coverage, params.eps_grad);
            orientation_pooled(kind, params, &pts, |x, y| {
                both_linearized_factor(x, y, sd, ss)
            })
        }
    };
    Ok(d)
}

/// Gauss–Legendre support sizes and normalised weights for `dsp_sampled`.
pub fn scale_samples(params: &DescriptorParams) -> Result<(Vec<f64>, Vec<f64>)> {
    let c = params.sigma_d0;
    let s = params.sigma_s;
    let hi = c + 3.0 * s;
    let lo = (c - 3.0 * s).max(0.0);
    if hi <= 0.0 {
        return Err(Error::Domain(
            "scale interval lies entirely at or below zero".into(),
        ));
    }
    let n = std::num::NonZeroUsize::new(params.n_scale_samples)
        .ok_or_else(|| Error::Domain("n_scale_samples must be positive".into()))?;
    let rule = GaussLegendre::new(n);
    let half = (hi - lo) / 2.0;
    let mid = (hi + lo) / 2.0;
    let (sigmas, mut weights): (Vec<f64>, Vec<f64>) = rule
        .iter()
        .map(|(t, w)| {
            let sd = mid + half * t;
            (sd, half * w * gauss1(sd - c, s))
        })
        .unzip();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Domain("scale weights vanish".into()));
    }
    weights.iter_mut().for_each(|w| *w /= total);
    Ok((sigmas, weights))
}

/// Scale-pooled spatial factor with the inner `e^s` linearised.
///
/// Equals `∫ e^u gauss2(y − (1+u)x, σ_d) gauss1(u, σ_s) du`, written as
/// `gauss2(y − x, σ_d) · gauss1(a, σ_d/|x|)⁻¹ · gauss1(a, √(σ_s² + σ_d²/|x|²))`
/// with `a = 1 − (xᵀy + σ_d²)/|x|²`, evaluated in the log domain.
/// For `|x| <` [`EPS_X`] the `s` dependence vanishes and the plain Gaussian
/// is returned.
pub fn inner_linearized_factor(
    x: Vector2<f64>,
    y: Vector2<f64>,
    sigma_d: f64,
    sigma_s: f64,
) -> f64 {
    let n2 = x.norm_squared();
    if n2.sqrt() < EPS_X {
        return gauss2(y - x, sigma_d);
    }
    let a = 1.0 - (x.dot(&y) + sigma_d * sigma_d) / n2;
    let inner = sigma_d / n2.sqrt();
    let outer = (sigma_s * sigma_s + sigma_d * sigma_d / n2).sqrt();
    (log_gauss2(y - x, sigma_d) - log_gauss1(a, inner) + log_gauss1(a, outer)).exp()
}

/// Scale-pooled spatial factor with both `e^s` factors linearised:
/// `∫ (1+u) gauss2(y − (1+u)x, σ_d) gauss1(u, σ_s) du`.
///
/// Negative when `xᵀy < −σ_d²/σ_s²`.
pub fn both_linearized_factor(x: Vector2<f64>, y: Vector2<f64>, sigma_d: f64, sigma_s: f64) -> f64 {
    let d2 = sigma_d * sigma_d;
    let s2 = sigma_s * sigma_s;
    let q = d2 + s2 * x.norm_squared();
    let cross = x.x * y.y - x.y * y.x;
    let expo = -(d2 * (y - x).norm_squared() + s2 * cross * cross) / (2.0 * d2 * q);
    (d2 + s2 * x.dot(&y)) / (2.0 * PI * sigma_d * q.powf(1.5)) * expo.exp()
}

/// One term of the heat descriptor sum for gradient `g` at `y`.
///
/// With `n = g/|g|`, `ṽ = (cos β, sin β)/|g|` and
/// `t = √((xᵀṽ)²/(2σ_d²) + 1/(2σ_a²|g|²))`, the term is
/// `e^{-(yᵀn)²/(2σ_d²)} w(−[(nᵀy)(xᵀṽ)/σ_d² + nᵀṽ/σ_a²]/(2t)) / (|g|² t³)`
/// times `gauss1(gᵀ(x − y)⊥/|g|, √(σ_d² + σ_a²|x|²))` with `(a, b)⊥ = (b, −a)`.
pub fn heat_integrand(
    x: Vector2<f64>,
    y: Vector2<f64>,
    beta: f64,
    g: Vector2<f64>,
    sigma_d: f64,
    sigma_a: f64,
) -> f64 {
    let m = g.norm();
    let n = g / m;
    let v = Vector2::new(beta.cos(), beta.sin()) / m;
    let d2 = sigma_d * sigma_d;
    let a2 = sigma_a * sigma_a;
    let xv = x.dot(&v);
    let t = (xv * xv / (2.0 * d2) + 1.0 / (2.0 * a2 * m * m)).sqrt();
    let yn = y.dot(&n);
    let arg = -(yn * xv / d2 + n.dot(&v) / a2) / (2.0 * t);
    let radial = kernels::w_scaled(-yn * yn / (2.0 * d2), arg) / (m * m * t.powi(3));
    let r = x - y;
    let perp = (g.x * r.y - g.y * r.x) / m;
    radial * gauss1(perp, (d2 + a2 * x.norm_squared()).sqrt())
}

/// Constant that turns [`heat_integrand`] into the exact affine-diffused
/// density at `A = I`, `b = 0`: `e^{-1/(2σ_a²)} / (8√2 π^{3/2} σ_d σ_a²)`.
pub fn heat_full_constant(sigma_d: f64, sigma_a: f64) -> f64 {
    (-1.0 / (2.0 * sigma_a * sigma_a)).exp()
        / (8.0 * std::f64::consts::SQRT_2 * PI.powf(1.5) * sigma_d * sigma_a * sigma_a)
}

fn heat_masked(
    field: &ScalarField,
    coverage: Option<&[bool]>,
    params: &DescriptorParams,
) -> Descriptor {
    let mut d = empty(DescriptorKind::Heat, params);
    let pts = gradient_points(field, coverage, params.eps_grad);
    let (sd, sa) = (params.sigma_d, params.sigma_a);
    let scale = if params.heat_full_constant {
        heat_full_constant(sd, sa)
    } else {
        1.0
    };
    let betas = d.beta_centers.clone();
    let cells: Vec<Vec<f64>> = d
        .grid
        .points()
        .par_iter()
        .map(|&x| {
            betas
                .iter()
                .map(|&beta| {
                    scale
                        * pts
                            .iter()
                            .map(|p| {
                                p.weight * heat_integrand(x, p.y, beta, p.grad.vector(), sd, sa)
                            })
                            .sum::<f64>()
                })
                .collect()
        })
        .collect();
    scatter(&mut d, cells);
    d
}

fn df_masked(
    field: &ScalarField,
    coverage: Option<&[bool]>,
    params: &DescriptorParams,
) -> Descriptor {
    let mut d = empty(DescriptorKind::Df, params);
    let g = field.grid();
    let area = g.cell_area();
    let samples: Vec<(Vector2<f64>, f64)> = (0..g.len())
        .filter(|&i| coverage.is_none_or(|m| m[i]))
        .map(|i| (g.world(i % g.width, i / g.width), field.values()[i]))
        .collect();
    let levels = d.beta_centers.clone();
    let (sd, sl) = (params.sigma_d, params.sigma_l);
    let table: Vec<Vec<f64>> = levels
        .iter()
        .map(|&l| {
            samples
                .iter()
                .map(|(_, v)| gauss1(l - v, sl) * area)
                .collect()
        })
        .collect();
    let cells: Vec<Vec<f64>> = d
        .grid
        .points()
        .par_iter()
        .map(|&x| {
            let s: Vec<f64> = samples.iter().map(|(y, _)| gauss2(y - x, sd)).collect();
            table
                .iter()
                .map(|row| row.iter().zip(&s).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    scatter(&mut d, cells);
    d
}

/// Continuous SIFT evaluated at a single `(β, x)`.
pub fn sift_at(
    points: &[GradientPoint],
    beta: f64,
    x: Vector2<f64>,
    sigma_r: f64,
    sigma_d: f64,
) -> f64 {
    points
        .iter()
        .map(|p| {
            periodic(beta - p.grad.orientation, sigma_r, DEFAULT_WRAPS)
                * p.grad.magnitude
                * gauss2(p.y - x, sigma_d)
                * p.weight
        })
        .sum()
}

/// Raw density of `f ∘ τ_{α,b}` smoothed over `(α, b)` with the angular
/// kernel applied to the orientation comb only.
///
/// The result is `Σ_y k̃(∠∇f(y) − α − β) |∇f(y)| gauss2(y − R_α x, σ_d)`,
/// i.e. the continuous SIFT of `f` at `(α + β, R_α x)`.
pub fn similarity_smoothed_density(
    points: &[GradientPoint],
    alpha: f64,
    beta: f64,
    x: Vector2<f64>,
    sigma_r: f64,
    sigma_d: f64,
) -> f64 {
    sift_at(points, alpha + beta, rotation(alpha) * x, sigma_r, sigma_d)
}

/// 4×4 rotation that aligns the affine smoothing coordinates with `g` and `x`.
///
/// Requires every component of `g` and `x` to be non-zero.
pub fn affine_rotation(g: Vector2<f64>, x: Vector2<f64>) -> Result<Matrix4<f64>> {
    let (g1, g2, x1, x2) = (g.x, g.y, x.x, x.y);
    if [g1, g2, x1, x2].iter().any(|v| *v == 0.0 || !v.is_finite()) {
        return Err(Error::Domain(
            "all components of g and x must be non-zero".into(),
        ));
    }
    let sg = f64::signum;
    let m = Matrix4::new(
        g2 * x2 * sg(g1 * x1),
        -g2 * x1.abs() * sg(g1),
        -x2 * g1.abs() * sg(x1),
        (g1 * x1).abs(),
        -g1 * x2 * sg(g2 * x1),
        g1 * x1.abs() * sg(g2),
        -x2 * g2.abs() * sg(x1),
        (g2 * x1).abs(),
        -g2 * x1 * sg(g1 * x2),
        -g2 * x2.abs() * sg(g1),
        x1 * g1.abs() * sg(x2),
        (g1 * x2).abs(),
        g1 * x1 * sg(g2 * x2),
        g1 * x2.abs() * sg(g2),
        x1 * g2.abs() * sg(x2),
        (g2 * x2).abs(),
    );
    Ok(m / (x.norm() * g.norm()))
}
