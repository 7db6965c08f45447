//! Response-coherence penalty and its scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nerve::NerveComplex;
use crate::stats::{median, quantile};

/// `Γ(Δ) = (1 + Δ²/σ²)^(-γ)`.
pub fn response_penalty(delta: f64, sigma: f64, gamma: f64) -> f64 {
    debug_assert!(sigma > 0.0);
    let r = delta / sigma;
    (1.0 + r * r).powf(-gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    /// Interquartile range of the edge response gaps.
    #[default]
    Iqr,
    Fixed(f64),
}

/// Resolved penalty scale. `Flat` means every edge keeps `Γ = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyScale {
    Scale(f64),
    Flat,
}

impl PenaltyScale {
    pub fn penalty(&self, delta: f64, gamma: f64) -> f64 {
        match *self {
            PenaltyScale::Scale(s) => response_penalty(delta, s, gamma),
            PenaltyScale::Flat => 1.0,
        }
    }

    pub fn sigma(&self) -> Option<f64> {
        match *self {
            PenaltyScale::Scale(s) => Some(s),
            PenaltyScale::Flat => None,
        }
    }
}

/// Euclidean gap `‖ŷ(i) - ŷ(j)‖` per edge, over all response columns.
pub fn edge_deltas(y_hat: &[Vec<f64>], complex: &NerveComplex) -> Vec<f64> {
    complex
        .edges
        .iter()
        .map(|&(i, j)| y_hat.iter().map(|c| (c[i] - c[j]).powi(2)).sum::<f64>().sqrt())
        .collect()
}

/// Largest pairwise gap among a triangle's vertices.
pub fn triangle_delta(y_hat: &[Vec<f64>], t: &[usize; 3]) -> f64 {
    let gap = |a: usize, b: usize| y_hat.iter().map(|c| (c[a] - c[b]).powi(2)).sum::<f64>().sqrt();
    gap(t[0], t[1]).max(gap(t[0], t[2])).max(gap(t[1], t[2]))
}

/// Penalty scale with the fallback chain IQR, median gap, `1e-8 · range(ŷ)`,
/// then a flat penalty. IQR needs at least four edges; with fewer the chain
/// starts at the median gap. Gaps at rounding level relative to `max |ŷ|`
/// count as zero, so a numerically constant `ŷ` gets the flat penalty.
pub fn penalty_scale(y_hat: &[Vec<f64>], complex: &NerveComplex, mode: SigmaMode) -> Result<PenaltyScale> {
    if let SigmaMode::Fixed(s) = mode {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Parameter(format!("fixed sigma {s} must be positive")));
        }
        return Ok(PenaltyScale::Scale(s));
    }
    let magnitude = y_hat.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 64.0 * f64::EPSILON * magnitude;
    let deltas: Vec<f64> = edge_deltas(y_hat, complex)
        .into_iter()
        .map(|d| if d <= floor { 0.0 } else { d })
        .collect();
    if deltas.len() >= 4 {
        let iqr = quantile(&deltas, 0.75) - quantile(&deltas, 0.25);
        if iqr > 0.0 {
            return Ok(PenaltyScale::Scale(iqr));
        }
    }
    if !deltas.is_empty() {
        let m = median(&deltas);
        if m > 0.0 {
            return Ok(PenaltyScale::Scale(m));
        }
    }
    let range = y_hat
        .iter()
        .map(|c| {
            let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if c.is_empty() { 0.0 } else { hi - lo }
        })
        .fold(0.0, f64::max);
    if range > floor {
        return Ok(PenaltyScale::Scale(1e-8 * range));
    }
    Ok(PenaltyScale::Flat)
}
