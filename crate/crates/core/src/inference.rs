//! Multivariate and classification adapters, spectral credible bands,
//! diffusion distances and feature denoising.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covering::surrogate::{density_surrogate, initial_vertex_masses};
use crate::covering::{Covering, Dataset, Response, SetCover};
use crate::error::{Error, Result};
use crate::nerve::NerveComplex;
use crate::refine::{iterate_with, RefineConfig, RefineOutcome};
use crate::spectral::{gcv_select_multi, SmootherSelection, SmoothingFilter, SpectralCache};
use crate::stats::quantile_sorted;

/// Smooths every column with one `η` chosen by the summed GCV criterion.
pub fn smooth_multivariate(
    cache: &SpectralCache,
    ys: &[Vec<f64>],
    filter: &dyn SmoothingFilter,
    grid_size: usize,
) -> Result<(Vec<Vec<f64>>, SmootherSelection)> {
    let refs: Vec<&[f64]> = ys.iter().map(|v| v.as_slice()).collect();
    let sel = gcv_select_multi(cache, &refs, filter, grid_size)?;
    let out = ys
        .iter()
        .map(|y| cache.smooth(filter, y, sel.eta_star))
        .collect::<Result<_>>()?;
    Ok((out, sel))
}

/// `‖ŷ(i) - ŷ(j)‖₂` across response columns.
pub fn edge_delta_multivariate(y_hat: &[Vec<f64>], edge: (usize, usize)) -> f64 {
    y_hat
        .iter()
        .map(|c| (c[edge.0] - c[edge.1]).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProbabilities {
    pub labels: Vec<String>,
    /// One row per vertex, one entry per class.
    pub probs: Vec<Vec<f64>>,
    /// Index into `labels` of the most probable class; ties go to the lowest index.
    pub predicted: Vec<usize>,
}

/// Distinct labels, ordered numerically when every label parses as a number.
pub fn class_order(labels: &[String]) -> Vec<String> {
    let mut distinct: Vec<String> = labels.to_vec();
    distinct.sort();
    distinct.dedup();
    let numeric: Option<Vec<f64>> = distinct.iter().map(|s| s.trim().parse::<f64>().ok()).collect();
    if let Some(values) = numeric {
        let mut paired: Vec<(f64, String)> = values.into_iter().zip(distinct).collect();
        paired.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        return paired.into_iter().map(|(_, s)| s).collect();
    }
    distinct
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Response columns for a label vector: one indicator for two classes,
/// a one-hot encoding otherwise.
pub fn encode_labels(labels: &[String], classes: &[String]) -> Result<Vec<Vec<f64>>> {
    if classes.len() < 2 {
        return Err(Error::Data(format!("classification needs at least two classes, found {}", classes.len())));
    }
    let index = |l: &String| {
        classes
            .iter()
            .position(|c| c == l)
            .ok_or_else(|| Error::Data(format!("label `{l}` is not among the declared classes")))
    };
    let idx: Vec<usize> = labels.iter().map(index).collect::<Result<_>>()?;
    if classes.len() == 2 {
        return Ok(vec![idx.iter().map(|&i| if i == 1 { 1.0 } else { 0.0 }).collect()]);
    }
    Ok((0..classes.len())
        .map(|c| idx.iter().map(|&i| if i == c { 1.0 } else { 0.0 }).collect())
        .collect())
}

/// Clips smoothed indicators to `[0, 1]` and normalizes rows onto the simplex.
pub fn probabilities_from_scores(scores: &[Vec<f64>], classes: &[String]) -> ClassProbabilities {
    let n = scores.first().map_or(0, |c| c.len());
    let probs: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            if classes.len() == 2 {
                let p1 = scores[0][i].clamp(0.0, 1.0);
                return vec![1.0 - p1, p1];
            }
            let row: Vec<f64> = scores.iter().map(|c| c[i].clamp(0.0, 1.0)).collect();
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter().map(|v| v / total).collect()
            } else {
                vec![1.0 / classes.len() as f64; classes.len()]
            }
        })
        .collect();
    let predicted = probs.iter().map(|r| argmax(r)).collect();
    ClassProbabilities {
        labels: classes.to_vec(),
        probs,
        predicted,
    }
}

pub struct Classification {
    pub probabilities: ClassProbabilities,
    pub outcome: RefineOutcome,
}

/// Runs the full refinement on class indicators. `classes` declares the
/// class set and its order; by default it is inferred from the labels.
pub fn classify(
    dataset: &Dataset,
    covering: &Covering,
    complex: &NerveComplex,
    config: &RefineConfig,
    classes: Option<&[String]>,
) -> Result<Classification> {
    let labels = match &dataset.response {
        Some(Response::Labels(l)) => l,
        _ => return Err(Error::Usage("classification needs a label response".into())),
    };
    let weights = density_surrogate(covering, dataset, &config.surrogate)?;
    let rho0 = initial_vertex_masses(&weights);
    classify_with(covering, complex, labels, classes, rho0, None, config)
}

pub fn classify_with(
    cover: &dyn SetCover,
    complex: &NerveComplex,
    labels: &[String],
    classes: Option<&[String]>,
    rho0: Vec<f64>,
    mask: Option<&[bool]>,
    config: &RefineConfig,
) -> Result<Classification> {
    let classes = match classes {
        Some(c) => c.to_vec(),
        None => class_order(labels),
    };
    let columns = encode_labels(labels, &classes)?;
    let outcome = iterate_with(cover, complex, &columns, rho0, mask, config)?;
    let probabilities = probabilities_from_scores(&outcome.y_hat, &classes);
    Ok(Classification { probabilities, outcome })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibleBand {
    pub level: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub sigma_hat: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Pointwise Monte Carlo band from independent normal posteriors on the
/// spectral coefficients, `SD = σ̂ / √(1 + ηλ)`.
#[allow(clippy::too_many_arguments)]
pub fn credible_band(
    cache: &SpectralCache,
    filter: &dyn SmoothingFilter,
    eta: f64,
    y: &[f64],
    y_hat: &[f64],
    level: f64,
    n_samples: usize,
    seed: u64,
) -> Result<CredibleBand> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Parameter(format!("credible level {level} outside (0, 1)")));
    }
    if n_samples < 100 {
        return Err(Error::Parameter(format!("need at least 100 samples, got {n_samples}")));
    }
    let n = cache.n();
    if y.len() != n || y_hat.len() != n {
        return Err(Error::Dimension("response length differs from the cache".into()));
    }
    let edf = cache.edf(filter, eta);
    if edf >= n as f64 {
        return Err(Error::Numeric(format!("edf {edf:.3} leaves no residual degrees of freedom")));
    }
    let rss: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum();
    let sigma_hat = (rss / (n as f64 - edf)).sqrt();
    let mean = cache.coefficients(y_hat);
    let offset: Vec<f64> = {
        let fit = cache.synthesize(&mean);
        y_hat.iter().zip(&fit).map(|(a, b)| a - b).collect()
    };
    let sd: Vec<f64> = cache.eigvals.iter().map(|&l| sigma_hat / (1.0 + eta * l).sqrt()).collect();

    let draws: Vec<Vec<f64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let coef: Vec<f64> = mean
                .iter()
                .zip(&sd)
                .map(|(m, s)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m + s * z
                })
                .collect();
            let mut f = cache.synthesize(&coef);
            f.iter_mut().zip(&offset).for_each(|(a, b)| *a += b);
            f
        })
        .collect();

    let lo_q = (1.0 - level) / 2.0;
    let hi_q = (1.0 + level) / 2.0;
    let (lower, upper): (Vec<f64>, Vec<f64>) = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut col: Vec<f64> = draws.iter().map(|d| d[i]).collect();
            col.sort_by(|a, b| a.total_cmp(b));
            (quantile_sorted(&col, lo_q), quantile_sorted(&col, hi_q))
        })
        .unzip();
    Ok(CredibleBand {
        level,
        lower,
        upper,
        sigma_hat,
        n_samples,
        seed,
    })
}

/// Row `i` of the heat kernel `exp(-tL)` represented by the cache.
pub fn heat_kernel_row(cache: &SpectralCache, t: f64, i: usize) -> Vec<f64> {
    let u: Vec<f64> = cache
        .eigvals
        .iter()
        .enumerate()
        .map(|(c, &l)| crate::spectral::filter::clamped_exp(-t * l) * cache.eigvecs[(i, c)])
        .collect();
    let mut row = cache.synthesize(&u);
    if let Some(w) = &cache.weights {
        row.iter_mut().zip(w).for_each(|(r, wi)| *r *= wi);
    }
    row
}

/// `‖(K_t(i,·) - K_t(j,·)) / √ρ₀‖₂`.
pub fn diffusion_distance(cache: &SpectralCache, t: f64, rho0: &[f64], i: usize, j: usize) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Parameter(format!("diffusion time {t} must be non-negative")));
    }
    if rho0.len() != cache.n() || rho0.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::Data("densities must be positive, one per vertex".into()));
    }
    if i == j {
        return Ok(0.0);
    }
    let (a, b) = (heat_kernel_row(cache, t, i), heat_kernel_row(cache, t, j));
    Ok(a.iter()
        .zip(&b)
        .zip(rho0)
        .map(|((x, y), r)| (x - y).powi(2) / r)
        .sum::<f64>()
        .sqrt())
}

/// Heat-smooths each feature column.
pub fn denoise_features(cache: &SpectralCache, t: f64, columns: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    columns.iter().map(|c| cache.heat_apply(t, c)).collect()
}
