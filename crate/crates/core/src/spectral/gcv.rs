//! Generalized cross-validation over a logarithmic grid.

use serde::{Deserialize, Serialize};

use super::{SmoothingFilter, SpectralCache};
use crate::error::{Error, Result};

pub const GRID_EPS: f64 = 1e-10;
pub const DEFAULT_GRID_SIZE: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmootherSelection {
    pub filter: String,
    pub eta_star: f64,
    pub gcv_star: f64,
    pub grid: Vec<f64>,
    pub gcv_values: Vec<f64>,
    pub edf: f64,
    /// Whether parabolic refinement moved `eta_star` off the grid.
    pub refined: bool,
    pub warnings: Vec<String>,
}

/// Responses projected once onto the cache.
struct Projected {
    coefs: Vec<Vec<f64>>,
    perp: Vec<Vec<f64>>,
}

fn project(cache: &SpectralCache, ys: &[&[f64]]) -> Result<Projected> {
    let n = cache.n();
    let mut coefs = Vec::with_capacity(ys.len());
    let mut perp = Vec::with_capacity(ys.len());
    for y in ys {
        if y.len() != n {
            return Err(Error::Dimension(format!("response has {} entries, cache has {n}", y.len())));
        }
        let c = cache.coefficients(y);
        if cache.is_full_rank() {
            // The complement is empty; computing it would only add rounding noise.
            perp.push(vec![0.0; n]);
        } else {
            let fit = cache.synthesize(&c);
            perp.push(y.iter().zip(&fit).map(|(a, b)| a - b).collect());
        }
        coefs.push(c);
    }
    Ok(Projected { coefs, perp })
}

/// Summed residual sum of squares and `n - tr(S_η)`, both free of cancellation.
fn rss_and_denominator(cache: &SpectralCache, proj: &Projected, filter: &dyn SmoothingFilter, eta: f64) -> (f64, f64) {
    let n = cache.n();
    let comp: Vec<f64> = cache.eigvals.iter().map(|&l| filter.complement(eta, l)).collect();
    let denom = (n - cache.p()) as f64 + comp.iter().sum::<f64>();
    let mut rss = 0.0;
    for (c, perp) in proj.coefs.iter().zip(&proj.perp) {
        let damped: Vec<f64> = c.iter().zip(&comp).map(|(a, b)| a * b).collect();
        if cache.weights.is_none() {
            // Euclidean-orthonormal basis: the two parts are orthogonal.
            rss += perp.iter().map(|x| x * x).sum::<f64>() + damped.iter().map(|x| x * x).sum::<f64>();
        } else {
            let r = cache.synthesize(&damped);
            rss += r.iter().zip(perp).map(|(a, b)| (a + b).powi(2)).sum::<f64>();
        }
    }
    (rss, denom)
}

/// Summed GCV criterion `Σ‖y - S_η y‖² / (n - tr S_η)²`; infinite when the
/// denominator vanishes.
pub fn gcv_value(cache: &SpectralCache, ys: &[&[f64]], filter: &dyn SmoothingFilter, eta: f64) -> Result<f64> {
    let proj = project(cache, ys)?;
    Ok(criterion(cache, &proj, filter, eta))
}

fn criterion(cache: &SpectralCache, proj: &Projected, filter: &dyn SmoothingFilter, eta: f64) -> f64 {
    let (rss, denom) = rss_and_denominator(cache, proj, filter, eta);
    if denom <= 0.0 {
        f64::INFINITY
    } else {
        rss / (denom * denom)
    }
}

/// Log-spaced grid from `GRID_EPS` to `-ln(GRID_EPS) / λ_max`.
pub fn gcv_grid(cache: &SpectralCache, grid_size: usize) -> Result<Vec<f64>> {
    if !(10..=100).contains(&grid_size) {
        return Err(Error::Parameter(format!("grid size {grid_size} outside [10, 100]")));
    }
    let lmax = cache.lambda_max();
    if !(lmax > 0.0) {
        return Err(Error::Selection("Laplacian spectrum is identically zero".into()));
    }
    let hi = -GRID_EPS.ln() / lmax;
    if !(hi > GRID_EPS) {
        return Err(Error::Selection(format!("grid upper end {hi:e} is below {GRID_EPS:e}")));
    }
    let (a, b) = (GRID_EPS.ln(), hi.ln());
    Ok((0..grid_size)
        .map(|i| (a + (b - a) * i as f64 / (grid_size - 1) as f64).exp())
        .collect())
}

pub fn gcv_select(cache: &SpectralCache, y: &[f64], filter: &dyn SmoothingFilter, grid_size: usize) -> Result<SmootherSelection> {
    gcv_select_multi(cache, &[y], filter, grid_size)
}

/// One shared `η` for several response columns, minimizing the summed criterion.
pub fn gcv_select_multi(
    cache: &SpectralCache,
    ys: &[&[f64]],
    filter: &dyn SmoothingFilter,
    grid_size: usize,
) -> Result<SmootherSelection> {
    if ys.is_empty() {
        return Err(Error::Usage("no response columns".into()));
    }
    let n = cache.n();
    let grid = gcv_grid(cache, grid_size)?;
    let proj = project(cache, ys)?;
    let values: Vec<f64> = grid.iter().map(|&eta| criterion(cache, &proj, filter, eta)).collect();
    if !values.iter().any(|v| v.is_finite()) {
        return Err(Error::Selection("smoother trace reaches n at every grid point".into()));
    }
    let lo = 5.0;
    let hi = n as f64 / 2.0;
    let in_band = |eta: f64| (lo..=hi).contains(&cache.edf(filter, eta));
    let mut warnings = Vec::new();

    // GCV tends to a finite limit as η → 0 that often undercuts the interior
    // minimum, so the edf band restricts the admissible grid points.
    let admissible: Vec<usize> = (0..grid.len()).filter(|&i| values[i].is_finite() && in_band(grid[i])).collect();
    let (candidates, constrained) = if admissible.is_empty() {
        warnings.push(format!("no grid point has edf in [{lo}, {hi}]; using the unconstrained minimum"));
        ((0..grid.len()).collect::<Vec<_>>(), false)
    } else {
        (admissible, true)
    };
    let gmin = candidates.iter().map(|&i| values[i]).fold(f64::INFINITY, f64::min);
    let scale: f64 = ys.iter().map(|y| y.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / (n * n) as f64;
    let tie = 1e-14 * scale + f64::MIN_POSITIVE;
    let best = *candidates.iter().rev().find(|&&i| values[i] <= gmin + tie).unwrap();

    let mut eta_star = grid[best];
    let mut gcv_star = values[best];
    let mut refined = false;
    if best > 0 && best + 1 < grid.len() && values[best - 1].is_finite() && values[best + 1].is_finite() {
        let (x0, x1, x2) = (grid[best - 1].ln(), grid[best].ln(), grid[best + 1].ln());
        let (g0, g1, g2) = (values[best - 1], values[best], values[best + 1]);
        let num = (x1 - x0).powi(2) * (g1 - g2) - (x1 - x2).powi(2) * (g1 - g0);
        let den = (x1 - x0) * (g1 - g2) - (x1 - x2) * (g1 - g0);
        if den != 0.0 {
            let x = x1 - 0.5 * num / den;
            if x > x0 && x < x2 {
                let g = criterion(cache, &proj, filter, x.exp());
                if g < g1 {
                    eta_star = x.exp();
                    gcv_star = g;
                    refined = true;
                }
            }
        }
    }

    let mut edf = cache.edf(filter, eta_star);
    if refined && constrained && !(lo..=hi).contains(&edf) {
        eta_star = grid[best];
        gcv_star = values[best];
        refined = false;
        edf = cache.edf(filter, eta_star);
        warnings.push("refined minimum left the edf band; using the grid minimum".to_string());
    }
    if !(lo..=hi).contains(&edf) {
        warnings.push(format!("selected edf {edf:.3} outside [{lo}, {hi}]"));
    }
    Ok(SmootherSelection {
        filter: filter.name().to_string(),
        eta_star,
        gcv_star,
        grid,
        gcv_values: values,
        edf,
        refined,
        warnings,
    })
}
