//! Synthetic stroke glyphs rendered under small random affine jitter.
//!
//! "A" and "B" share a left diagonal/stem and a horizontal bar region, which
//! makes them easy to confuse for purely local orientation statistics.

use diffdesc::field::{GridSpec, ScalarField};
use nalgebra::{Matrix2, Vector2};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Segment = (Vector2<f64>, Vector2<f64>);

const STROKE_HALF_WIDTH: f64 = 1.6;
const SUPERSAMPLE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Glyph {
    A,
    B,
}

impl Glyph {
    pub fn segments(self) -> Vec<Segment> {
        let p = Vector2::new;
        match self {
            Glyph::A => vec![
                (p(-6.0, 10.0), p(0.0, -11.0)),
                (p(0.0, -11.0), p(6.0, 10.0)),
                (p(-3.5, 2.0), p(3.5, 2.0)),
            ],
            Glyph::B => {
                let mut segs = vec![(p(-5.0, -10.0), p(-5.0, 10.0))];
                for cy in [-5.0, 5.0] {
                    let r = 5.0;
                    let mut pts = vec![p(-5.0, cy - r)];
                    for i in 0..12 {
                        let t =
                            -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * i as f64 / 11.0;
                        pts.push(p(-5.0 + (r + 1.5) * t.cos() * 0.9, cy + r * t.sin()));
                    }
                    pts.push(p(-5.0, cy + r));
                    segs.extend(pts.windows(2).map(|w| (w[0], w[1])));
                }
                segs
            }
        }
    }
}

/// Affine map `u ↦ a u + b` from glyph to image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jitter {
    pub a: Matrix2<f64>,
    pub b: Vector2<f64>,
}

impl Jitter {
    pub fn identity() -> Self {
        Self {
            a: Matrix2::identity(),
            b: Vector2::zeros(),
        }
    }

    /// Rotation ±0.08 rad, log-scale ±0.05, shear ±0.05, translation ±0.5 px.
    pub fn draw(rng: &mut ChaCha8Rng) -> Self {
        let angle: f64 = rng.random_range(-0.08..0.08);
        let scale = rng.random_range(-0.05f64..0.05).exp();
        let shear: f64 = rng.random_range(-0.05..0.05);
        let rot = diffdesc::field::rotation(angle);
        let a = scale * rot * Matrix2::new(1.0, shear, 0.0, 1.0);
        let b = Vector2::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        Self { a, b }
    }
}

fn segment_distance(p: Vector2<f64>, (a, b): &Segment) -> f64 {
    let d = b - a;
    let t = ((p - a).dot(&d) / d.norm_squared().max(1e-12)).clamp(0.0, 1.0);
    (p - a - t * d).norm()
}

/// Renders `glyph` under `jitter` on an `n × n` grid of unit pixels
/// centred at the origin, with 4×4 supersampling. Values lie in `[0.1, 0.9]`.
pub fn render(glyph: Glyph, jitter: &Jitter, n: usize) -> ScalarField {
    let segs = glyph.segments();
    let inv = jitter.a.try_inverse().expect("jitter matrix is invertible");
    let grid = GridSpec::centered(n, n, 1.0);
    let half = n as f64 / 2.0;
    let mut values = vec![0.0; n * n];
    for row in 0..n {
        for col in 0..n {
            let mut acc = 0.0;
            for sy in 0..SUPERSAMPLE {
                for sx in 0..SUPERSAMPLE {
                    let x = (col * SUPERSAMPLE + sx) as f64 / SUPERSAMPLE as f64
                        + 0.5 / SUPERSAMPLE as f64
                        - half;
                    let y = (row * SUPERSAMPLE + sy) as f64 / SUPERSAMPLE as f64
                        + 0.5 / SUPERSAMPLE as f64
                        - half;
                    let u = inv * (Vector2::new(x, y) - jitter.b);
                    let d = segs
                        .iter()
                        .map(|s| segment_distance(u, s))
                        .fold(f64::INFINITY, f64::min);
                    acc += (0.5 + STROKE_HALF_WIDTH - d).clamp(0.0, 1.0) * 0.8 + 0.1;
                }
            }
            values[row * n + col] = acc / (SUPERSAMPLE * SUPERSAMPLE) as f64;
        }
    }
    ScalarField::new(grid, values).expect("rendered values lie in [0, 1]")
}

/// Two independently jittered renders of each glyph: `[A1, B1, A2, B2]`.
pub fn jittered_set(seed: u64, n: usize) -> [ScalarField; 4] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = [Glyph::A, Glyph::B, Glyph::A, Glyph::B];
    order.map(|g| {
        let j = Jitter::draw(&mut rng);
        render(g, &j, n)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_range_and_shape() {
        let f = render(Glyph::A, &Jitter::identity(), 32);
        assert_eq!(f.width(), 32);
        let (lo, hi) = f
            .values()
            .iter()
            .fold((1.0f64, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
        assert!((lo - 0.1).abs() < 1e-12);
        assert!((hi - 0.9).abs() < 1e-12);
    }

    #[test]
    fn glyphs_differ() {
        let a = render(Glyph::A, &Jitter::identity(), 32);
        let b = render(Glyph::B, &Jitter::identity(), 32);
        let diff: f64 = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).abs())
            .sum();
        assert!(diff > 50.0);
    }

    #[test]
    fn jitter_is_seeded() {
        let s1 = jittered_set(3, 16);
        let s2 = jittered_set(3, 16);
        assert_eq!(s1[0].values(), s2[0].values());
        assert_ne!(s1[0].values(), s1[2].values());
    }
}
