//! Descriptor distance, correlation and winner-take-all template matching.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptors::{self, Descriptor, DescriptorKind, DescriptorParams};
use crate::error::{Error, Result};
use crate::field::{self, ScalarField, Transform};

/// Minimum covered fraction below which [`intensity_energy`] flags its result.
pub const COVERAGE_THRESHOLD: f64 = 0.5;

/// Finite set of hypothesised transforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateSet {
    pub entries: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Candidate {
    pub transform: Transform,
    pub label: String,
}

impl CandidateSet {
    pub fn new(entries: Vec<Candidate>) -> Result<Self> {
        let set = Self { entries };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Domain("candidate set is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &self.entries {
            if !seen.insert(c.label.as_str()) {
                return Err(Error::Domain(format!(
                    "duplicate candidate label {:?}",
                    c.label
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Outcome of [`match_templates`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub j_star: usize,
    pub k_star: usize,
    pub labels: Vec<String>,
    /// `scores[j][k]`; larger is better.
    pub scores: Vec<Vec<f64>>,
    /// Normalised descriptor distances `distances[j][k]`.
    pub distances: Option<Vec<Vec<f64>>>,
}

/// How candidates are ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Score {
    /// Dot product of the field-side descriptor with the raw template density.
    #[default]
    Correlation,
    /// Negated normalised distance between same-kind descriptors.
    Distance,
}

fn check_axes(h1: &Descriptor, h2: &Descriptor) -> Result<()> {
    if h1.grid != h2.grid {
        return Err(Error::Contract(
            "descriptors live on different spatial grids".into(),
        ));
    }
    if h1.beta_centers != h2.beta_centers || h1.kind.periodic_axis() != h2.kind.periodic_axis() {
        return Err(Error::Contract(
            "descriptors have different first axes".into(),
        ));
    }
    Ok(())
}

/// Riemann-sum inner product with cell weight `Δβ·Δx²`.
pub fn correlation(h_field: &Descriptor, h_patch: &Descriptor) -> Result<f64> {
    check_axes(h_field, h_patch)?;
    let dot: f64 = h_field
        .values
        .iter()
        .zip(&h_patch.values)
        .map(|(a, b)| a * b)
        .sum();
    Ok(dot * h_field.cell_weight())
}

/// L2 distance between the two descriptors after each is divided by its own
/// L2 norm. The result lies in `[0, 2]`.
pub fn descriptor_distance(h1: &Descriptor, h2: &Descriptor) -> Result<f64> {
    check_axes(h1, h2)?;
    let w = h1.cell_weight();
    let n1 = (h1.values.iter().map(|v| v * v).sum::<f64>() * w).sqrt();
    let n2 = (h2.values.iter().map(|v| v * v).sum::<f64>() * w).sqrt();
    if !(n1 > 0.0 && n2 > 0.0) {
        return Err(Error::Degenerate("descriptor has zero norm".into()));
    }
    let d2: f64 = h1
        .values
        .iter()
        .zip(&h2.values)
        .map(|(a, b)| (a / n1 - b / n2).powi(2))
        .sum::<f64>()
        * w;
    Ok(d2.sqrt())
}

/// Squared-residual energy of a template against a warped field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energy {
    pub value: f64,
    /// Fraction of template pixels whose image under `τ` lies in the field.
    pub coverage: f64,
}

impl Energy {
    /// Coverage below [`COVERAGE_THRESHOLD`].
    pub fn low_coverage(&self) -> bool {
        self.coverage < COVERAGE_THRESHOLD
    }
}

/// `Σ_x (f(τ(x)) − p(x))² Δx²` over the template grid.
///
/// Points mapped outside the field read `f = 0`.
pub fn intensity_energy(
    field: &ScalarField,
    template: &ScalarField,
    t: &Transform,
) -> Result<Energy> {
    let warped = field::warp(field, t, template.grid())?;
    let covered = warped.coverage.iter().filter(|&&c| c).count();
    if covered == 0 {
        return Err(Error::Domain("template does not overlap the field".into()));
    }
    let sum: f64 = warped
        .field
        .values()
        .iter()
        .zip(template.values())
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok(Energy {
        value: sum * template.grid().cell_area(),
        coverage: covered as f64 / warped.coverage.len() as f64,
    })
}

/// Winner-take-all matching of templates against warped copies of a field.
///
/// For each candidate `j` the field is resampled as `f ∘ τ_j` on its own
/// grid and described with `kind`. With [`Score::Correlation`] it is
/// scored against the raw density of each template; with
/// [`Score::Distance`] the score is the negated normalised distance to the
/// template's own `kind` descriptor. Distances are always reported when
/// both descriptors have non-zero norm. Ties go to the lowest `(j, k)`.
pub fn match_templates(
    field: &ScalarField,
    candidates: &CandidateSet,
    templates: &[ScalarField],
    kind: DescriptorKind,
    params: &DescriptorParams,
    score: Score,
) -> Result<MatchResult> {
    candidates.validate()?;
    if templates.is_empty() {
        return Err(Error::Domain("no templates given".into()));
    }
    params.validate_for(kind)?;
    let raw: Vec<Descriptor> = templates
        .iter()
        .map(|p| descriptors::raw_density_descriptor(p, params))
        .collect::<Result<_>>()?;
    let own: Vec<Descriptor> = templates
        .iter()
        .map(|p| descriptors::compute(kind, p, params))
        .collect::<Result<_>>()?;
    let field_side: Vec<Descriptor> = candidates
        .entries
        .par_iter()
        .map(|c| {
            let w = field::warp(field, &c.transform, field.grid())?;
            descriptors::compute_warped(kind, &w, params)
        })
        .collect::<Result<_>>()?;

    let mut scores = Vec::with_capacity(field_side.len());
    let mut distances = Vec::with_capacity(field_side.len());
    for h in &field_side {
        let mut srow = Vec::with_capacity(templates.len());
        let mut drow = Vec::with_capacity(templates.len());
        for (r, o) in raw.iter().zip(&own) {
            let d = descriptor_distance(h, o).unwrap_or(f64::NAN);
            let s = match score {
                Score::Correlation => correlation(h, r)?,
                Score::Distance => -d,
            };
            srow.push(s);
            drow.push(d);
        }
        scores.push(srow);
        distances.push(drow);
    }
    let (j_star, k_star) =
        argmax(&scores).ok_or_else(|| Error::Matching("no finite score".into()))?;
    Ok(MatchResult {
        j_star,
        k_star,
        labels: candidates.entries.iter().map(|c| c.label.clone()).collect(),
        scores,
        distances: Some(distances),
    })
}

/// Index of the largest finite entry, lowest `(j, k)` on ties.
pub fn argmax(scores: &[Vec<f64>]) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for (j, row) in scores.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            if v.is_finite() && best.is_none_or(|(_, _, b)| v > b) {
                best = Some((j, k, v));
            }
        }
    }
    best.map(|(j, k, _)| (j, k))
}
