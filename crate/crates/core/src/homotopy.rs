//! Gaussian diffusion of cost landscapes and continuation minimisation.
//!
//! The toy problem matches two 1D templates against a shifted signal:
//! `cost(c1, θ) = c1² E1(θ) + (1 − c1)² E2(θ) + λ (c1 (1 − c1))²` with
//! `E_k(θ) = ∫ (f(x − θ) − p_k(x))² dx`. The landscape is sampled on a
//! grid, smoothed with Gaussians of decreasing width, and minimised by
//! following the minimiser from the widest smoothing down to none.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Uniformly sampled 1D signal on `[x_min, x_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Signal {
    pub x_min: f64,
    pub x_max: f64,
    pub values: Vec<f64>,
}

impl Signal {
    pub fn validate(&self) -> Result<()> {
        if self.values.len() < 2 || !(self.x_max > self.x_min) {
            return Err(Error::Domain(
                "signal needs at least two samples on a non-empty interval".into(),
            ));
        }
        if self.values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Domain("signal values must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.x_max - self.x_min) / (self.values.len() - 1) as f64
    }

    pub fn position(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.step()
    }

    /// Linear interpolation, zero outside the domain.
    pub fn sample(&self, x: f64) -> f64 {
        let u = (x - self.x_min) / self.step();
        let last = (self.values.len() - 1) as f64;
        if !(u >= -1e-9 && u <= last + 1e-9) {
            return 0.0;
        }
        let u = u.clamp(0.0, last);
        let i = (u.floor() as usize).min(self.values.len() - 2);
        let t = u - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }
}

/// Signal, two templates and the penalty weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyProblem {
    pub f: Signal,
    pub p1: Signal,
    pub p2: Signal,
    pub lambda: f64,
}

/// Which template an energy refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Template {
    P1,
    P2,
}

impl ToyProblem {
    /// The instance shipped in `data/toy_instance.json`.
    ///
    /// `f` is a broad bump with two narrow side bumps on `[-2, 2]`;
    /// `p1 = f(· − 0.25)` on `[-1.2, 1.2]`; `p2` resembles `f` near the
    /// origin but replaces one side bump by a distractor.
    pub fn shipped() -> Self {
        Self::from_json(include_str!("../data/toy_instance.json"))
            .expect("shipped toy instance is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: ToyProblem = serde_json::from_str(text).map_err(|e| Error::Parse {
            offset: e.column(),
            message: e.to_string(),
        })?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.f.validate()?;
        self.p1.validate()?;
        self.p2.validate()?;
        require_positive("lambda", self.lambda)
    }

    fn template(&self, k: Template) -> &Signal {
        match k {
            Template::P1 => &self.p1,
            Template::P2 => &self.p2,
        }
    }

    /// `E_k(θ) = ∫_{X_k} (f(x − θ) − p_k(x))² dx` by the trapezoid rule.
    pub fn energy(&self, k: Template, theta: f64) -> f64 {
        let p = self.template(k);
        let n = p.values.len();
        let sum: f64 = (0..n)
            .map(|i| {
                let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                w * (self.f.sample(p.position(i) - theta) - p.values[i]).powi(2)
            })
            .sum();
        sum * p.step()
    }
}

/// Penalised two-template cost.
pub fn toy_cost(problem: &ToyProblem, c1: f64, theta: f64) -> f64 {
    combine(
        problem.lambda,
        c1,
        problem.energy(Template::P1, theta),
        problem.energy(Template::P2, theta),
    )
}

fn combine(lambda: f64, c1: f64, e1: f64, e2: f64) -> f64 {
    c1 * c1 * e1 + (1.0 - c1).powi(2) * e2 + lambda * (c1 * (1.0 - c1)).powi(2)
}

/// Uniform axis with `n` samples from `min` to `max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.min + i as f64 * self.step())
            .collect()
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.n - 1) as f64
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.n < 2 || !(self.max > self.min) {
            return Err(Error::Domain(format!(
                "{name} axis must have n >= 2 and max > min"
            )));
        }
        Ok(())
    }
}

/// Sampling grid of the `(c1, θ)` landscape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeSpec {
    pub c1: Axis,
    pub theta: Axis,
}

impl Default for LandscapeSpec {
    fn default() -> Self {
        Self {
            c1: Axis {
                min: -0.5,
                max: 1.5,
                n: 81,
            },
            theta: Axis {
                min: -1.0,
                max: 1.0,
                n: 201,
            },
        }
    }
}

impl LandscapeSpec {
    pub fn validate(&self) -> Result<()> {
        self.c1.validate("c1")?;
        self.theta.validate("theta")
    }
}

/// Sampled cost over `(c1, θ)`, stored `[c1 index][θ index]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostGrid {
    pub c1_axis: Vec<f64>,
    pub theta_axis: Vec<f64>,
    pub values: Vec<f64>,
    /// Total Gaussian smoothing applied (0 for the raw landscape).
    pub sigma: f64,
}

impl CostGrid {
    pub fn new(
        c1_axis: Vec<f64>,
        theta_axis: Vec<f64>,
        values: Vec<f64>,
        sigma: f64,
    ) -> Result<Self> {
        let increasing = |a: &[f64]| a.len() >= 2 && a.windows(2).all(|w| w[1] > w[0]);
        if !increasing(&c1_axis) || !increasing(&theta_axis) {
            return Err(Error::Domain(
                "axes must be strictly increasing with at least two samples".into(),
            ));
        }
        if values.len() != c1_axis.len() * theta_axis.len() || values.iter().any(|v| !v.is_finite())
        {
            return Err(Error::Domain(
                "values must be finite and match the axes".into(),
            ));
        }
        Ok(Self {
            c1_axis,
            theta_axis,
            values,
            sigma,
        })
    }

    pub fn n_c1(&self) -> usize {
        self.c1_axis.len()
    }

    pub fn n_theta(&self) -> usize {
        self.theta_axis.len()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_theta() + j]
    }

    fn steps(&self) -> (f64, f64) {
        (
            self.c1_axis[1] - self.c1_axis[0],
            self.theta_axis[1] - self.theta_axis[0],
        )
    }

    /// Grid points strictly below all of their (up to 8) neighbours.
    pub fn local_minima(&self) -> Vec<(usize, usize)> {
        let (n, m) = (self.n_c1() as isize, self.n_theta() as isize);
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..m {
                let v = self.get(i as usize, j as usize);
                let mut is_min = true;
                'nb: for di in -1..=1 {
                    for dj in -1..=1 {
                        let (a, b) = (i + di, j + dj);
                        if (di, dj) != (0, 0)
                            && (0..n).contains(&a)
                            && (0..m).contains(&b)
                            && self.get(a as usize, b as usize) <= v
                        {
                            is_min = false;
                            break 'nb;
                        }
                    }
                }
                if is_min {
                    out.push((i as usize, j as usize));
                }
            }
        }
        out
    }

    /// Grid point with the smallest value (first in row-major order on ties).
    pub fn global_min(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, v) in self.values.iter().enumerate() {
            if *v < self.values[best] {
                best = k;
            }
        }
        (best / self.n_theta(), best % self.n_theta())
    }

    /// Bicubic (Catmull–Rom) interpolation with clamped borders.
    pub fn interpolate(&self, c1: f64, theta: f64) -> f64 {
        let (dc, dt) = self.steps();
        let (i, fx) = cell(self.n_c1(), (c1 - self.c1_axis[0]) / dc);
        let (j, fy) = cell(self.n_theta(), (theta - self.theta_axis[0]) / dt);
        let wx = catmull_rom(fx);
        let wy = catmull_rom(fy);
        let clamp_i = |k: isize, n: usize| k.clamp(0, n as isize - 1) as usize;
        let mut acc = 0.0;
        for (a, wa) in wx.iter().enumerate() {
            let ii = clamp_i(i as isize + a as isize - 1, self.n_c1());
            let row: f64 = wy
                .iter()
                .enumerate()
                .map(|(b, wb)| {
                    wb * self.get(ii, clamp_i(j as isize + b as isize - 1, self.n_theta()))
                })
                .sum();
            acc += wa * row;
        }
        acc
    }

    /// CSV with header `c1,theta,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("c1,theta,value\n");
        for (i, c) in self.c1_axis.iter().enumerate() {
            for (j, t) in self.theta_axis.iter().enumerate() {
                out.push_str(&format!("{c},{t},{}\n", self.get(i, j)));
            }
        }
        out
    }
}

fn cell(n: usize, u: f64) -> (usize, f64) {
    let u = u.clamp(0.0, (n - 1) as f64);
    let i = (u.floor() as usize).min(n - 2);
    (i, u - i as f64)
}

fn catmull_rom(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

fn gaussian_taps(sigma_cells: f64) -> Vec<f64> {
    let radius = (6.0 * sigma_cells).ceil().max(1.0) as isize;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma_cells * sigma_cells)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

fn convolve_axis(
    values: &[f64],
    n_outer: usize,
    n_inner: usize,
    along_outer: bool,
    taps: &[f64],
) -> Vec<f64> {
    let radius = (taps.len() / 2) as isize;
    let mut out = vec![0.0; values.len()];
    out.par_chunks_mut(n_inner)
        .enumerate()
        .for_each(|(i, row)| {
            for (j, slot) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (t, w) in taps.iter().enumerate() {
                    let k = t as isize - radius;
                    let (ii, jj) = if along_outer {
                        ((i as isize + k).clamp(0, n_outer as isize - 1) as usize, j)
                    } else {
                        (i, (j as isize + k).clamp(0, n_inner as isize - 1) as usize)
                    };
                    acc += w * values[ii * n_inner + jj];
                }
                *slot = acc;
            }
        });
    out
}

/// Separable Gaussian smoothing with replicated edges.
///
/// `sigma` is in axis units on both axes; the result records the total
/// smoothing `√(σ_in² + σ²)`.
pub fn smooth_cost(grid: &CostGrid, sigma: f64) -> Result<CostGrid> {
    require_positive("sigma", sigma)?;
    let (dc, dt) = grid.steps();
    let (n, m) = (grid.n_c1(), grid.n_theta());
    let a = convolve_axis(&grid.values, n, m, true, &gaussian_taps(sigma / dc));
    let b = convolve_axis(&a, n, m, false, &gaussian_taps(sigma / dt));
    Ok(CostGrid {
        c1_axis: grid.c1_axis.clone(),
        theta_axis: grid.theta_axis.clone(),
        values: b,
        sigma: grid.sigma.hypot(sigma),
    })
}

/// Toy cost sampled on the grid, then smoothed when `sigma > 0`.
pub fn landscape(problem: &ToyProblem, spec: &LandscapeSpec, sigma: f64) -> Result<CostGrid> {
    spec.validate()?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!(
            "sigma must be non-negative, got {sigma}"
        )));
    }
    let c1 = spec.c1.values();
    let theta = spec.theta.values();
    let e: Vec<(f64, f64)> = theta
        .par_iter()
        .map(|&t| {
            (
                problem.energy(Template::P1, t),
                problem.energy(Template::P2, t),
            )
        })
        .collect();
    let values = c1
        .iter()
        .flat_map(|&c| {
            e.iter()
                .map(move |&(e1, e2)| combine(problem.lambda, c, e1, e2))
        })
        .collect();
    let raw = CostGrid::new(c1, theta, values, 0.0)?;
    if sigma > 0.0 {
        smooth_cost(&raw, sigma)
    } else {
        Ok(raw)
    }
}

/// Decreasing smoothing levels ending at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DiffusionSchedule {
    sigmas: Vec<f64>,
}

impl DiffusionSchedule {
    pub fn new(sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.last() != Some(&0.0) {
            return Err(Error::Domain("schedule must end at sigma = 0".into()));
        }
        if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Domain(
                "schedule entries must be finite and non-negative".into(),
            ));
        }
        if !sigmas.windows(2).all(|w| w[0] > w[1]) {
            return Err(Error::Domain("schedule must be strictly decreasing".into()));
        }
        Ok(Self { sigmas })
    }

    /// `σ_k = σ₀ 2^{-k}` for `k < stages`, then 0.
    pub fn geometric(sigma0: f64, stages: usize) -> Result<Self> {
        let mut s: Vec<f64> = (0..stages)
            .map(|k| sigma0 * 0.5f64.powi(k as i32))
            .collect();
        s.push(0.0);
        Self::new(s)
    }

    /// Parse a comma-separated list such as `1,0.5,0.25,0`.
    pub fn parse(text: &str) -> Result<Self> {
        let sigmas = text
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Domain(format!("invalid schedule entry {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sigmas)
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }
}

impl Default for DiffusionSchedule {
    fn default() -> Self {
        Self::geometric(1.0, 8).expect("default schedule is valid")
    }
}

impl TryFrom<Vec<f64>> for DiffusionSchedule {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DiffusionSchedule> for Vec<f64> {
    fn from(s: DiffusionSchedule) -> Self {
        s.sigmas
    }
}

/// Options for [`continuation_minimize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationOptions {
    /// Start stage 0 with local descent from this point instead of the
    /// grid-global minimiser.
    pub start: Option<(f64, f64)>,
    /// Fail when the first smoothed landscape has more than one grid-local
    /// minimum. Ignored when `start` is given.
    pub require_unique_start: bool,
    /// Stop a descent once both coordinates move less than this.
    pub tol: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            start: None,
            require_unique_start: true,
            tol: 1e-4,
        }
    }
}

/// One stage of a continuation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub stage: usize,
    pub sigma: f64,
    pub c1: f64,
    pub theta: f64,
    /// Value of that stage's landscape at the point.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub stages: Vec<Stage>,
}

impl Trajectory {
    pub fn last(&self) -> &Stage {
        self.stages
            .last()
            .expect("trajectory has at least one stage")
    }

    /// CSV with header `stage,sigma,c1,theta,cost`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,sigma,c1,theta,cost\n");
        for s in &self.stages {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s.stage, s.sigma, s.c1, s.theta, s.cost
            ));
        }
        out
    }
}

/// Diffusion and continuation on the sampled toy landscape.
///
/// Stage 0 takes the grid-global minimiser of the most smoothed landscape;
/// each later stage runs [`local_descent`] from the previous point. The
/// last stage (σ = 0) works on the raw landscape.
pub fn continuation_minimize(
    problem: &ToyProblem,
    schedule: &DiffusionSchedule,
    spec: &LandscapeSpec,
    opts: &ContinuationOptions,
) -> Result<Trajectory> {
    let raw = landscape(problem, spec, 0.0)?;
    let grids: Vec<CostGrid> = schedule
        .sigmas()
        .iter()
        .map(|&s| {
            if s > 0.0 {
                smooth_cost(&raw, s)
            } else {
                Ok(raw.clone())
            }
        })
        .collect::<Result<_>>()?;
    let mut stages = Vec::with_capacity(grids.len());
    let mut point = match opts.start {
        Some(p) => local_descent(&grids[0], p, opts.tol),
        None => {
            if opts.require_unique_start {
                let count = grids[0].local_minima().len();
                if count != 1 {
                    return Err(Error::Precondition(format!(
                        "first landscape (sigma = {}) has {count} grid-local minima",
                        schedule.sigmas()[0]
                    )));
                }
            }
            let (i, j) = grids[0].global_min();
            (grids[0].c1_axis[i], grids[0].theta_axis[j])
        }
    };
    for (k, (g, &sigma)) in grids.iter().zip(schedule.sigmas()).enumerate() {
        if k > 0 {
            point = local_descent(g, point, opts.tol);
        }
        stages.push(Stage {
            stage: k,
            sigma,
            c1: point.0,
            theta: point.1,
            cost: g.interpolate(point.0, point.1),
        });
    }
    Ok(Trajectory { stages })
}

/// Coordinate descent with golden-section line searches on the bicubic
/// interpolant of `grid`, stopping when both coordinates move less than `tol`.
pub fn local_descent(grid: &CostGrid, start: (f64, f64), tol: f64) -> (f64, f64) {
    let (c_lo, c_hi) = (grid.c1_axis[0], *grid.c1_axis.last().unwrap());
    let (t_lo, t_hi) = (grid.theta_axis[0], *grid.theta_axis.last().unwrap());
    let (dc, dt) = grid.steps();
    let mut c = start.0.clamp(c_lo, c_hi);
    let mut t = start.1.clamp(t_lo, t_hi);
    for _ in 0..500 {
        let c_new = line_min(|u| grid.interpolate(u, t), c, c_lo, c_hi, dc);
        let t_new = line_min(|u| grid.interpolate(c_new, u), t, t_lo, t_hi, dt);
        let moved = (c_new - c).abs().max((t_new - t).abs());
        c = c_new;
        t = t_new;
        if moved < tol {
            break;
        }
    }
    (c, t)
}

/// Minimise `phi` near `x0` within `[lo, hi]`: bracket downhill with steps
/// growing from `h`, then golden-section search. Never returns a point
/// worse than `x0`.
fn line_min(phi: impl Fn(f64) -> f64, x0: f64, lo: f64, hi: f64, h: f64) -> f64 {
    let f0 = phi(x0);
    let fp = if x0 + h <= hi {
        phi(x0 + h)
    } else {
        f64::INFINITY
    };
    let fm = if x0 - h >= lo {
        phi(x0 - h)
    } else {
        f64::INFINITY
    };
    let (a, b) = if fp >= f0 && fm >= f0 {
        ((x0 - h).max(lo), (x0 + h).min(hi))
    } else {
        let dir = if fp <= fm { 1.0 } else { -1.0 };
        let mut prev = x0;
        let mut cur = x0 + dir * h;
        let mut fcur = fp.min(fm);
        let mut step = h;
        loop {
            step *= 1.0 + GOLDEN;
            let next = (cur + dir * step).clamp(lo, hi);
            if next == cur {
                break (prev.min(cur), prev.max(cur));
            }
            let fnext = phi(next);
            if fnext >= fcur {
                break (prev.min(next), prev.max(next));
            }
            prev = cur;
            cur = next;
            fcur = fnext;
        }
    };
    let (mut a, mut b) = (a, b);
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let (mut f1, mut f2) = (phi(x1), phi(x2));
    while b - a > 1e-9 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = phi(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = phi(x2);
        }
    }
    let xm = 0.5 * (a + b);
    // the bracket ends may beat the interior when the minimum sits on a bound
    [xm, a, b, x0]
        .into_iter()
        .min_by(|p, q| phi(*p).total_cmp(&phi(*q)))
        .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn bowl(n: usize, m: usize, h: f64) -> CostGrid {
        let c: Vec<f64> = (0..n)
            .map(|i| (i as f64 - (n - 1) as f64 / 2.0) * h)
            .collect();
        let t: Vec<f64> = (0..m)
            .map(|j| (j as f64 - (m - 1) as f64 / 2.0) * h)
            .collect();
        let v = c
            .iter()
            .flat_map(|&x| t.iter().map(move |&y| 2.0 * x * x + 0.5 * y * y))
            .collect();
        CostGrid::new(c, t, v, 0.0).unwrap()
    }

    #[test]
    fn shipped_instance_shape() {
        let p = ToyProblem::shipped();
        assert_eq!(p.f.values.len(), 401);
        assert_eq!((p.f.x_min, p.f.x_max), (-2.0, 2.0));
        assert_eq!((p.p1.x_min, p.p1.x_max, p.p2.x_max), (-1.2, 1.2, 1.2));
        assert_eq!(p.lambda, 1.0);
    }

    #[test]
    fn perfect_match_and_penalty_floor() {
        let p = ToyProblem::shipped();
        assert!(toy_cost(&p, 1.0, 0.25) < 1e-6);
        for &t in &[-0.8, -0.1, 0.0, 0.3, 0.9] {
            assert!(toy_cost(&p, 0.5, t) >= p.lambda / 16.0);
        }
    }

    #[test]
    fn cost_at_c1_zero_is_e2() {
        let p = ToyProblem::shipped();
        for &t in &[-0.5, 0.0, 0.37] {
            // independent left-endpoint-free sum over the template samples
            let n = p.p2.values.len();
            let h = 2.4 / (n - 1) as f64;
            let mut s = 0.0;
            for i in 0..n {
                let x = -1.2 + i as f64 * h;
                let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                s += w * (p.f.sample(x - t) - p.p2.values[i]).powi(2) * h;
            }
            assert_relative_eq!(toy_cost(&p, 0.0, t), s, max_relative = 1e-12);
        }
    }

    #[test]
    fn signal_sampling() {
        let s = Signal {
            x_min: 0.0,
            x_max: 1.0,
            values: vec![0.0, 1.0, 0.5],
        };
        assert_eq!(s.sample(0.25), 0.5);
        assert_eq!(s.sample(1.0), 0.5);
        assert_eq!(s.sample(1.2), 0.0);
        assert_eq!(s.sample(-0.1), 0.0);
    }

    #[test]
    fn schedule_validation() {
        assert!(DiffusionSchedule::new(vec![1.0, 0.5]).is_err());
        assert!(DiffusionSchedule::new(vec![0.5, 1.0, 0.0]).is_err());
        assert!(DiffusionSchedule::new(vec![0.0]).is_ok());
        assert!(DiffusionSchedule::parse("1, 0.5,0").is_ok());
        assert!(DiffusionSchedule::parse("1,x,0").is_err());
        let d = DiffusionSchedule::default();
        assert_eq!(d.sigmas().len(), 9);
        assert_eq!(d.sigmas()[0], 1.0);
        assert_eq!(d.sigmas()[7], 1.0 / 128.0);
    }

    #[test]
    fn smoothing_tiny_sigma_is_identity() {
        let g = bowl(21, 31, 0.1);
        let s = smooth_cost(&g, 1e-3 * 0.1).unwrap();
        for (a, b) in g.values.iter().zip(&s.values) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(smooth_cost(&g, 0.0).is_err());
    }

    #[test]
    fn smoothing_quadratic_adds_trace_term() {
        let g = bowl(121, 121, 0.05);
        let sigma = 0.3;
        let s = smooth_cost(&g, sigma).unwrap();
        let shift = sigma * sigma * (4.0 + 1.0) / 2.0;
        for i in 45..76 {
            for j in 45..76 {
                let expect = g.get(i, j) + shift;
                assert!((s.get(i, j) - expect).abs() <= 0.01 * expect);
            }
        }
    }

    #[test]
    fn smoothing_semigroup() {
        let c: Vec<f64> = (0..101).map(|i| i as f64 * 0.02).collect();
        let t: Vec<f64> = (0..121).map(|j| j as f64 * 0.02).collect();
        let v = c
            .iter()
            .flat_map(|&x| {
                t.iter()
                    .map(move |&y| ((3.0 * x).sin() * (2.0 * y).cos() + 2.0) * 0.3)
            })
            .collect();
        let g = CostGrid::new(c, t, v, 0.0).unwrap();
        let (sa, sb) = (0.05, 0.08);
        let twice = smooth_cost(&smooth_cost(&g, sa).unwrap(), sb).unwrap();
        let once = smooth_cost(&g, sa.hypot(sb)).unwrap();
        assert_relative_eq!(twice.sigma, once.sigma, epsilon = 1e-15);
        for i in 30..71 {
            for j in 30..91 {
                assert!((twice.get(i, j) - once.get(i, j)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn smoothing_preserves_mass_of_interior_bump() {
        let c: Vec<f64> = (0..81).map(|i| i as f64 * 0.05).collect();
        let t: Vec<f64> = (0..81).map(|j| j as f64 * 0.05).collect();
        let v = c
            .iter()
            .flat_map(|&x| {
                t.iter()
                    .map(move |&y| (-((x - 2.0).powi(2) + (y - 2.0).powi(2)) / 0.1).exp())
            })
            .collect();
        let g = CostGrid::new(c, t, v, 0.0).unwrap();
        let s = smooth_cost(&g, 0.2).unwrap();
        let m0: f64 = g.values.iter().sum::<f64>() / g.values.len() as f64;
        let m1: f64 = s.values.iter().sum::<f64>() / s.values.len() as f64;
        assert!((m0 - m1).abs() < 1e-6);
    }

    #[test]
    fn interpolation_reproduces_nodes() {
        let g = bowl(11, 13, 0.1);
        for i in 0..11 {
            for j in 0..13 {
                assert!((g.interpolate(g.c1_axis[i], g.theta_axis[j]) - g.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn descent_finds_bowl_minimum() {
        let g = bowl(41, 41, 0.1);
        let (c, t) = local_descent(&g, (1.5, -1.2), 1e-4);
        assert!(c.abs() < 1e-3 && t.abs() < 1e-3, "({c}, {t})");
    }

    #[test]
    fn minima_detection() {
        let g = bowl(11, 11, 0.1);
        assert_eq!(g.local_minima(), vec![(5, 5)]);
        assert_eq!(g.global_min(), (5, 5));
    }

    #[test]
    fn csv_exports() {
        let g = bowl(3, 4, 1.0);
        let csv = g.to_csv();
        assert!(csv.starts_with("c1,theta,value\n"));
        assert_eq!(csv.lines().count(), 13);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn smoothing_never_raises_the_maximum(s in 0.01f64..0.5, seed in 0u32..1000) {
            let c: Vec<f64> = (0..30).map(|i| i as f64 * 0.05).collect();
            let t: Vec<f64> = (0..40).map(|j| j as f64 * 0.05).collect();
            let k = seed as f64 * 0.01;
            let v: Vec<f64> = c.iter().flat_map(|&x| t.iter().map(move |&y| (x * (3.0 + k)).sin() + (y * 7.0 - k).cos())).collect();
            let g = CostGrid::new(c, t, v, 0.0).unwrap();
            let out = smooth_cost(&g, s).unwrap();
            let (lo, hi) = g.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
            prop_assert!(out.values.iter().all(|v| *v >= lo - 1e-12 && *v <= hi + 1e-12));
        }

        #[test]
        fn toy_cost_is_nonnegative(c1 in -0.5f64..1.5, theta in -1.0f64..1.0) {
            let p = ToyProblem::shipped();
            prop_assert!(toy_cost(&p, c1, theta) >= 0.0);
        }
    }
}
