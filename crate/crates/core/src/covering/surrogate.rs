use serde::{Deserialize, Serialize};

use super::{median_pairwise_distance, Covering, Dataset};
use crate::error::{Error, Result};
use crate::registry::Registry;
use crate::stats;

/// Per-vertex distance summary handed to a surrogate.
#[derive(Debug, Clone, Copy)]
pub struct SurrogateInput {
    pub d1: f64,
    pub dk: f64,
    pub alpha: f64,
    pub eps: f64,
    pub sigma: f64,
}

/// A nearest-neighbor density surrogate `w(x)`.
pub trait DensitySurrogate: Send + Sync {
    fn name(&self) -> &'static str;
    fn weight(&self, input: &SurrogateInput) -> f64;
    fn uses_distances(&self) -> bool {
        true
    }
}

struct Uniform;
struct InverseFirst;
struct InverseKth;
struct GaussianKth;
struct RationalKth;

impl DensitySurrogate for Uniform {
    fn name(&self) -> &'static str {
        "uniform"
    }
    fn weight(&self, _: &SurrogateInput) -> f64 {
        1.0
    }
    fn uses_distances(&self) -> bool {
        false
    }
}

impl DensitySurrogate for InverseFirst {
    fn name(&self) -> &'static str {
        "inv_d1"
    }
    fn weight(&self, x: &SurrogateInput) -> f64 {
        (x.eps + x.d1).powf(-x.alpha)
    }
}

impl DensitySurrogate for InverseKth {
    fn name(&self) -> &'static str {
        "inv_dk"
    }
    fn weight(&self, x: &SurrogateInput) -> f64 {
        (x.eps + x.dk).powf(-x.alpha)
    }
}

impl DensitySurrogate for GaussianKth {
    fn name(&self) -> &'static str {
        "gauss_dk"
    }
    fn weight(&self, x: &SurrogateInput) -> f64 {
        (-(x.dk / x.sigma).powi(2)).exp()
    }
}

impl DensitySurrogate for RationalKth {
    fn name(&self) -> &'static str {
        "rational_dk"
    }
    fn weight(&self, x: &SurrogateInput) -> f64 {
        1.0 / (1.0 + x.dk / x.sigma)
    }
}

pub fn surrogate_registry() -> Registry<dyn DensitySurrogate> {
    Registry::<dyn DensitySurrogate>::new("density surrogate")
        .with("uniform", |_| Box::new(Uniform))
        .with("inv_d1", |_| Box::new(InverseFirst))
        .with("inv_dk", |_| Box::new(InverseKth))
        .with("gauss_dk", |_| Box::new(GaussianKth))
        .with("rational_dk", |_| Box::new(RationalKth))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateConfig {
    pub mode: String,
    pub alpha_init: f64,
    /// `None` means `1e-6 ×` median pairwise distance.
    pub eps: Option<f64>,
    /// Winsorization quantiles; `None` disables clipping.
    pub winsor: Option<[f64; 2]>,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            mode: "uniform".into(),
            alpha_init: 1.0,
            eps: None,
            winsor: Some([0.01, 0.99]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexWeights {
    pub w: Vec<f64>,
    pub mode: String,
    pub alpha_init: f64,
    pub eps: f64,
    pub sigma_scale: f64,
    pub winsor_bounds: Option<[f64; 2]>,
}

impl VertexWeights {
    pub fn from_values(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() || w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::Data("vertex weights must be positive and finite".into()));
        }
        Ok(Self {
            w,
            mode: "explicit".into(),
            alpha_init: 1.0,
            eps: 0.0,
            sigma_scale: 0.0,
            winsor_bounds: None,
        })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            w: vec![1.0; n],
            mode: "uniform".into(),
            alpha_init: 1.0,
            eps: 0.0,
            sigma_scale: 0.0,
            winsor_bounds: None,
        }
    }
}

/// Computes density-surrogate vertex weights, winsorizes them and scales
/// them to sum to `n`.
pub fn density_surrogate(
    covering: &Covering,
    dataset: &Dataset,
    cfg: &SurrogateConfig,
) -> Result<VertexWeights> {
    let surrogate = surrogate_registry().get(&cfg.mode)?;
    if !(0.5..=2.0).contains(&cfg.alpha_init) {
        return Err(Error::Parameter(format!(
            "alpha_init must lie in [0.5, 2], got {}",
            cfg.alpha_init
        )));
    }
    if let Some([lo, hi]) = cfg.winsor {
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(Error::Parameter(format!("invalid winsorization quantiles [{lo}, {hi}]")));
        }
    }
    let n = covering.n();
    let dk: Vec<f64> = (0..n).map(|i| covering.dk(i)).collect();

    if !surrogate.uses_distances() {
        return Ok(VertexWeights {
            w: vec![1.0; n],
            mode: surrogate.name().into(),
            alpha_init: cfg.alpha_init,
            eps: cfg.eps.unwrap_or(0.0),
            sigma_scale: stats::median(&dk),
            winsor_bounds: None,
        });
    }

    if dk.iter().all(|&d| d == 0.0) {
        return Err(Error::Degenerate(
            "all k-th neighbor distances are zero (points coincide)".into(),
        ));
    }
    let eps = match cfg.eps {
        Some(e) if e > 0.0 => e,
        Some(e) => return Err(Error::Parameter(format!("eps must be positive, got {e}"))),
        None => {
            let e = 1e-6 * median_pairwise_distance(dataset);
            if e > 0.0 {
                e
            } else {
                f64::EPSILON
            }
        }
    };
    let mut sigma = stats::median(&dk);
    if sigma <= 0.0 {
        sigma = dk.iter().cloned().filter(|&d| d > 0.0).fold(f64::INFINITY, f64::min);
    }

    let mut w: Vec<f64> = (0..n)
        .map(|i| {
            surrogate.weight(&SurrogateInput {
                d1: covering.d1(i),
                dk: dk[i],
                alpha: cfg.alpha_init,
                eps,
                sigma,
            })
        })
        .collect();

    let bounds = cfg.winsor.map(|[lo, hi]| {
        let mut sorted = w.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let b = [stats::quantile_sorted(&sorted, lo), stats::quantile_sorted(&sorted, hi)];
        for x in w.iter_mut() {
            *x = x.clamp(b[0], b[1]);
        }
        b
    });

    if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Numeric(format!(
            "surrogate `{}` produced a non-positive weight",
            surrogate.name()
        )));
    }
    scale_to_sum(&mut w, n as f64);
    Ok(VertexWeights {
        w,
        mode: surrogate.name().into(),
        alpha_init: cfg.alpha_init,
        eps,
        sigma_scale: sigma,
        winsor_bounds: bounds,
    })
}

/// Initial vertex masses `ρ₀`, scaled so that `Σρ₀ = n`.
pub fn initial_vertex_masses(weights: &VertexWeights) -> Vec<f64> {
    let mut rho = weights.w.clone();
    let n = rho.len() as f64;
    scale_to_sum(&mut rho, n);
    rho
}

pub(crate) fn scale_to_sum(v: &mut [f64], target: f64) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        let c = target / s;
        v.iter_mut().for_each(|x| *x *= c);
    }
}
