//! Sampled grayscale fields, bilinear sampling, gradients and warps.
//!
//! World coordinates: pixel `(col, row)` sits at `origin + spacing·(col, row)`.
//! Rows grow along +y. Fields built with [`GridSpec::centered`] put the
//! image center at the world origin.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};

/// Regular sampling lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    /// World units per pixel.
    pub spacing: f64,
    /// World coordinates of pixel (0, 0).
    pub origin: Vector2<f64>,
}

impl GridSpec {
    /// Grid whose center lies at the world origin.
    pub fn centered(width: usize, height: usize, spacing: f64) -> Self {
        let origin =
            -spacing * Vector2::new((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
        Self {
            width,
            height,
            spacing,
            origin,
        }
    }

    /// Square grid of `n × n` points spanning `[-half_extent, half_extent]²`.
    pub fn square_span(n: usize, half_extent: f64) -> Self {
        let spacing = if n > 1 {
            2.0 * half_extent / (n as f64 - 1.0)
        } else {
            1.0
        };
        Self::centered(n, n, spacing)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Domain("grid must have at least one pixel".into()));
        }
        require_positive("spacing", self.spacing)?;
        if !(self.origin.x.is_finite() && self.origin.y.is_finite()) {
            return Err(Error::Domain("grid origin must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn world(&self, col: usize, row: usize) -> Vector2<f64> {
        self.origin + self.spacing * Vector2::new(col as f64, row as f64)
    }

    /// Fractional pixel coordinates of a world point.
    #[inline]
    pub fn to_pixel(&self, p: Vector2<f64>) -> Vector2<f64> {
        (p - self.origin) / self.spacing
    }

    /// World coordinates of every grid point in row-major order.
    pub fn points(&self) -> Vec<Vector2<f64>> {
        (0..self.height)
            .flat_map(|r| (0..self.width).map(move |c| (c, r)))
            .map(|(c, r)| self.world(c, r))
            .collect()
    }

    /// Lower and upper corners of the covered rectangle.
    pub fn bounds(&self) -> (Vector2<f64>, Vector2<f64>) {
        let hi = self.world(self.width - 1, self.height - 1);
        (self.origin, hi)
    }

    /// Cell area used as the Riemann-sum weight.
    pub fn cell_area(&self) -> f64 {
        self.spacing * self.spacing
    }
}

/// Grayscale image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

/// Result of [`ScalarField::sample_bilinear`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub value: f64,
    pub inside: bool,
}

/// Image gradient at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientSample {
    pub gx: f64,
    pub gy: f64,
    pub magnitude: f64,
    /// `atan2(gy, gx)` reduced to `[0, 2π)`.
    pub orientation: f64,
}

impl GradientSample {
    pub fn new(gx: f64, gy: f64) -> Self {
        let magnitude = gx.hypot(gy);
        let orientation = gy.atan2(gx).rem_euclid(2.0 * PI);
        let orientation = if orientation >= 2.0 * PI {
            0.0
        } else {
            orientation
        };
        Self {
            gx,
            gy,
            magnitude,
            orientation,
        }
    }

    pub fn vector(&self) -> Vector2<f64> {
        Vector2::new(self.gx, self.gy)
    }
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(Error::Domain(format!(
                "expected {} values for a {}x{} grid, got {}",
                grid.len(),
                grid.width,
                grid.height,
                values.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::Domain(format!(
                "value {v} at index {i} is outside [0, 1]"
            )));
        }
        Ok(Self { grid, values })
    }

    /// Sample `f` at every grid point.
    pub fn from_fn(grid: GridSpec, f: impl Fn(Vector2<f64>) -> f64) -> Result<Self> {
        grid.validate()?;
        let values = grid.points().into_iter().map(f).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn width(&self) -> usize {
        self.grid.width
    }

    pub fn height(&self) -> usize {
        self.grid.height
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.grid.width + col]
    }

    /// Bilinear interpolation; points outside the grid rectangle give `0`.
    pub fn sample_bilinear(&self, p: Vector2<f64>) -> Sample {
        let q = self.grid.to_pixel(p);
        let (w, h) = (self.grid.width, self.grid.height);
        let tol = 1e-9;
        if !(q.x >= -tol
            && q.y >= -tol
            && q.x <= (w - 1) as f64 + tol
            && q.y <= (h - 1) as f64 + tol)
        {
            return Sample {
                value: 0.0,
                inside: false,
            };
        }
        let x = q.x.clamp(0.0, (w - 1) as f64);
        let y = q.y.clamp(0.0, (h - 1) as f64);
        let c0 = (x.floor() as usize).min(w.saturating_sub(2));
        let r0 = (y.floor() as usize).min(h.saturating_sub(2));
        let c1 = (c0 + 1).min(w - 1);
        let r1 = (r0 + 1).min(h - 1);
        let fx = x - c0 as f64;
        let fy = y - r0 as f64;
        let top = self.get(c0, r0) * (1.0 - fx) + self.get(c1, r0) * fx;
        let bottom = self.get(c0, r1) * (1.0 - fx) + self.get(c1, r1) * fx;
        Sample {
            value: top * (1.0 - fy) + bottom * fy,
            inside: true,
        }
    }

    /// Central-difference gradient of the bilinear interpolant, step = spacing.
    pub fn gradient(&self, p: Vector2<f64>) -> Result<GradientSample> {
        let h = self.grid.spacing;
        let ex = Vector2::new(h, 0.0);
        let ey = Vector2::new(0.0, h);
        let probes = [p + ex, p - ex, p + ey, p - ey].map(|q| self.sample_bilinear(q));
        if probes.iter().any(|s| !s.inside) {
            return Err(Error::Border { x: p.x, y: p.y });
        }
        let gx = (probes[0].value - probes[1].value) / (2.0 * h);
        let gy = (probes[2].value - probes[3].value) / (2.0 * h);
        Ok(GradientSample::new(gx, gy))
    }

    /// Gradient at a grid node; `None` on the one-pixel border.
    pub fn gradient_at_pixel(&self, col: usize, row: usize) -> Option<GradientSample> {
        if col == 0 || row == 0 || col + 1 >= self.grid.width || row + 1 >= self.grid.height {
            return None;
        }
        let h = self.grid.spacing;
        let gx = (self.get(col + 1, row) - self.get(col - 1, row)) / (2.0 * h);
        let gy = (self.get(col, row + 1) - self.get(col, row - 1)) / (2.0 * h);
        Some(GradientSample::new(gx, gy))
    }

    /// Plain-text PGM (P2) with the given maxval.
    pub fn to_pgm_p2(&self, maxval: u16) -> String {
        let mut out = format!("P2\n{} {}\n{}\n", self.grid.width, self.grid.height, maxval);
        for row in 0..self.grid.height {
            let line: Vec<String> = (0..self.grid.width)
                .map(|c| ((self.get(c, row) * maxval as f64).round() as u32).to_string())
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// CSV with header `x,y,value`, one row per pixel in world coordinates.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,value\n");
        for row in 0..self.grid.height {
            for col in 0..self.grid.width {
                let p = self.grid.world(col, row);
                out.push_str(&format!("{},{},{}\n", p.x, p.y, self.get(col, row)));
            }
        }
        out
    }
}

/// Parse a binary (P5) or plain (P2) PGM image.
///
/// Intensities are divided by maxval; the result has spacing 1 and is
/// centered on the world origin.
pub fn load_pgm(bytes: &[u8]) -> Result<ScalarField> {
    let mut cur = PgmCursor { bytes, pos: 0 };
    let magic = cur.token()?;
    let binary = match magic.as_str() {
        "P5" => true,
        "P2" => false,
        _ => {
            return Err(Error::Parse {
                offset: 0,
                message: format!("unsupported magic {magic:?}"),
            })
        }
    };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Parse {
            offset: cur.pos,
            message: "zero image dimension".into(),
        });
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Parse {
            offset: cur.pos,
            message: format!("maxval {maxval} outside 1..=65535"),
        });
    }
    let n = width * height;
    let mut raw = Vec::with_capacity(n);
    if binary {
        // exactly one whitespace byte separates the header from the payload
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(Error::Parse {
                offset: cur.pos,
                message: "missing whitespace before payload".into(),
            });
        }
        let start = cur.pos + 1;
        let bpp = if maxval > 255 { 2 } else { 1 };
        let end = start + n * bpp;
        if bytes.len() < end {
            return Err(Error::Parse {
                offset: bytes.len(),
                message: format!(
                    "payload truncated: need {} bytes, found {}",
                    n * bpp,
                    bytes.len() - start
                ),
            });
        }
        for i in 0..n {
            let v = if bpp == 1 {
                bytes[start + i] as usize
            } else {
                u16::from_be_bytes([bytes[start + 2 * i], bytes[start + 2 * i + 1]]) as usize
            };
            if v > maxval {
                return Err(Error::Parse {
                    offset: start + i * bpp,
                    message: format!("sample {v} exceeds maxval"),
                });
            }
            raw.push(v);
        }
    } else {
        for _ in 0..n {
            let offset = cur.pos;
            let v = cur.number("sample")?;
            if v > maxval {
                return Err(Error::Parse {
                    offset,
                    message: format!("sample {v} exceeds maxval"),
                });
            }
            raw.push(v);
        }
    }
    let values = raw.into_iter().map(|v| v as f64 / maxval as f64).collect();
    ScalarField::new(GridSpec::centered(width, height, 1.0), values)
}

struct PgmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PgmCursor<'_> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<String> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && !self.bytes[self.pos].is_ascii_whitespace()
            && self.bytes[self.pos] != b'#'
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Parse {
                offset: start,
                message: "unexpected end of header".into(),
            });
        }
        Ok(String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned())
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let offset = self.pos;
        let tok = self.token().map_err(|_| Error::Parse {
            offset,
            message: format!("missing {what}"),
        })?;
        tok.parse().map_err(|_| Error::Parse {
            offset,
            message: format!("invalid {what} {tok:?}"),
        })
    }
}

/// Similarity `τ(x) = e^s R_α x + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimilarityTransform {
    pub alpha: f64,
    /// Log-scale.
    pub s: f64,
    pub b: Vector2<f64>,
}

/// Rotation by `alpha`.
pub fn rotation(alpha: f64) -> Matrix2<f64> {
    let (s, c) = alpha.sin_cos();
    Matrix2::new(c, -s, s, c)
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self {
            alpha: 0.0,
            s: 0.0,
            b: Vector2::zeros(),
        }
    }

    pub fn translation(b: Vector2<f64>) -> Self {
        Self {
            alpha: 0.0,
            s: 0.0,
            b,
        }
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        self.s.exp() * rotation(self.alpha)
    }

    pub fn apply(&self, x: Vector2<f64>) -> Vector2<f64> {
        self.matrix() * x + self.b
    }

    pub fn inverse(&self) -> Self {
        let b = -((-self.s).exp() * rotation(-self.alpha) * self.b);
        Self {
            alpha: -self.alpha,
            s: -self.s,
            b,
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            alpha: self.alpha + other.alpha,
            s: self.s + other.s,
            b: self.matrix() * other.b + self.b,
        }
    }

    pub fn to_affine(&self) -> AffineTransform {
        AffineTransform {
            a: self.matrix(),
            b: self.b,
        }
    }
}

/// Affine map `τ(x) = A x + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "AffineRepr", into = "AffineRepr")]
pub struct AffineTransform {
    pub a: Matrix2<f64>,
    pub b: Vector2<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AffineRepr {
    /// Row-major.
    a: [[f64; 2]; 2],
    b: [f64; 2],
}

impl From<AffineRepr> for AffineTransform {
    fn from(r: AffineRepr) -> Self {
        Self {
            a: Matrix2::new(r.a[0][0], r.a[0][1], r.a[1][0], r.a[1][1]),
            b: Vector2::new(r.b[0], r.b[1]),
        }
    }
}

impl From<AffineTransform> for AffineRepr {
    fn from(t: AffineTransform) -> Self {
        Self {
            a: [[t.a[(0, 0)], t.a[(0, 1)]], [t.a[(1, 0)], t.a[(1, 1)]]],
            b: [t.b.x, t.b.y],
        }
    }
}

impl AffineTransform {
    pub fn identity() -> Self {
        Self {
            a: Matrix2::identity(),
            b: Vector2::zeros(),
        }
    }

    pub fn apply(&self, x: Vector2<f64>) -> Vector2<f64> {
        self.a * x + self.b
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .a
            .try_inverse()
            .filter(|m| m.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::Domain("affine matrix is singular".into()))?;
        Ok(Self {
            a: inv,
            b: -(inv * self.b),
        })
    }
}

/// Either kind of warp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Transform {
    Similarity(SimilarityTransform),
    Affine(AffineTransform),
}

impl Transform {
    pub fn apply(&self, x: Vector2<f64>) -> Vector2<f64> {
        match self {
            Transform::Similarity(t) => t.apply(x),
            Transform::Affine(t) => t.apply(x),
        }
    }

    pub fn inverse(&self) -> Result<Self> {
        Ok(match self {
            Transform::Similarity(t) => Transform::Similarity(t.inverse()),
            Transform::Affine(t) => Transform::Affine(t.inverse()?),
        })
    }

    fn check(&self) -> Result<()> {
        if let Transform::Affine(t) = self {
            let det = t.a.determinant();
            if det == 0.0 || !det.is_finite() {
                return Err(Error::Domain("affine matrix is singular".into()));
            }
        }
        Ok(())
    }
}

impl From<SimilarityTransform> for Transform {
    fn from(t: SimilarityTransform) -> Self {
        Transform::Similarity(t)
    }
}

impl From<AffineTransform> for Transform {
    fn from(t: AffineTransform) -> Self {
        Transform::Affine(t)
    }
}

/// A warped field together with the pixels that sampled inside the source.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpedField {
    pub field: ScalarField,
    pub coverage: Vec<bool>,
}

impl WarpedField {
    pub fn covered_fraction(&self) -> f64 {
        self.coverage.iter().filter(|&&c| c).count() as f64 / self.coverage.len() as f64
    }
}

/// `f ∘ τ` sampled on `out_spec`: the output pixel at world `x` stores `f(τ(x))`.
pub fn warp(field: &ScalarField, t: &Transform, out_spec: &GridSpec) -> Result<WarpedField> {
    t.check()?;
    out_spec.validate()?;
    let mut values = Vec::with_capacity(out_spec.len());
    let mut coverage = Vec::with_capacity(out_spec.len());
    for p in out_spec.points() {
        let s = field.sample_bilinear(t.apply(p));
        values.push(s.value);
        coverage.push(s.inside);
    }
    Ok(WarpedField {
        field: ScalarField::new(*out_spec, values)?,
        coverage,
    })
}
