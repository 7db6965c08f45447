//! The geometry-adaptive iteration: smooth the response, diffuse the
//! density, modulate edge masses by response coherence, reassemble.

pub mod diffusion;
pub mod edge_update;
pub mod masked;
pub mod penalty;
pub mod trace;

use serde::{Deserialize, Serialize};

use crate::covering::surrogate::{density_surrogate, initial_vertex_masses, SurrogateConfig};
use crate::covering::{Covering, Dataset, Response, SetCover};
use crate::error::{Error, Result};
use crate::metric::MassState;
use crate::nerve::NerveComplex;
use crate::spectral::{
    assemble_laplacian, eigendecompose, filter_registry, gcv_select_multi, Convention, EigenOptions, Laplacian,
    LaplacianForm, SmootherSelection, SmoothingFilter, SpectralCache, TikhonovSystem,
};
use crate::stats::{density_entropy, relative_change};

pub use diffusion::{diffuse_density, power_damp_normalize};
pub use edge_update::{edge_update_registry, modulate_edges, modulate_triangles, EdgeBasisUpdate};
pub use penalty::{edge_deltas, penalty_scale, response_penalty, PenaltyScale, SigmaMode};
pub use trace::{IterationRecord, IterationTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    /// Diffusion time; `None` uses `1/λ₂` of the initial Laplacian.
    pub t: Option<f64>,
    /// Absolute damping rate; `None` uses `beta_damp_factor / t`.
    pub beta_damp: Option<f64>,
    pub beta_damp_factor: f64,
    pub alpha_damp: f64,
    pub gamma: f64,
    pub sigma_mode: SigmaMode,
    pub edge_update: String,
    pub beta_rescale: f64,
    pub modulate_triangles: bool,
    pub eps_y: f64,
    pub eps_rho: f64,
    pub max_iters: usize,
    pub smoother: String,
    pub init_smoother: String,
    pub grid_size: usize,
    pub convention: Convention,
    pub surrogate: SurrogateConfig,
    pub eigen: EigenOptions,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            t: None,
            beta_damp: None,
            beta_damp_factor: 0.1,
            alpha_damp: 0.2,
            gamma: 1.0,
            sigma_mode: SigmaMode::Iqr,
            edge_update: "recompute_intersections".into(),
            beta_rescale: 0.5,
            modulate_triangles: true,
            eps_y: 1e-4,
            eps_rho: 1e-3,
            max_iters: 20,
            smoother: "tikhonov".into(),
            init_smoother: "heat".into(),
            grid_size: 25,
            convention: Convention::ConductanceMass,
            surrogate: SurrogateConfig::default(),
            eigen: EigenOptions::default(),
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} must be positive, got {v}")))
            }
        };
        if let Some(t) = self.t {
            positive("t", t)?;
        }
        if let Some(b) = self.beta_damp {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::Parameter(format!("beta_damp must be non-negative, got {b}")));
            }
        }
        if !(self.beta_damp_factor >= 0.0 && self.beta_damp_factor.is_finite()) {
            return Err(Error::Parameter("beta_damp_factor must be non-negative".into()));
        }
        if !(self.alpha_damp > 0.0 && self.alpha_damp <= 1.0) {
            return Err(Error::Parameter(format!("alpha_damp {} outside (0, 1]", self.alpha_damp)));
        }
        positive("gamma", self.gamma)?;
        positive("eps_y", self.eps_y)?;
        positive("eps_rho", self.eps_rho)?;
        if let SigmaMode::Fixed(s) = self.sigma_mode {
            positive("sigma", s)?;
        }
        if !(0.0..=1.0).contains(&self.beta_rescale) {
            return Err(Error::Parameter(format!("beta_rescale {} outside [0, 1]", self.beta_rescale)));
        }
        if self.max_iters == 0 {
            return Err(Error::Parameter("max_iters must be at least 1".into()));
        }
        if !(10..=100).contains(&self.grid_size) {
            return Err(Error::Parameter(format!("grid_size {} outside [10, 100]", self.grid_size)));
        }
        filter_registry().get(&self.smoother)?;
        filter_registry().get(&self.init_smoother)?;
        edge_update_registry().create(&self.edge_update, &self.beta_rescale)?;
        Ok(())
    }
}

/// Final state of a refinement run.
#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub mass: MassState,
    /// Smoothed response columns from the last iteration.
    pub y_hat: Vec<Vec<f64>>,
    pub trace: IterationTrace,
    /// Combinatorial Laplacian assembled from `mass`.
    pub laplacian: Laplacian,
    /// Cache and selection that produced `y_hat`.
    pub smoothing_cache: SpectralCache,
    pub selection: SmootherSelection,
}

/// Runs the iteration on a dataset whose response is scalar or multivariate.
pub fn iterate(dataset: &Dataset, covering: &Covering, complex: &NerveComplex, config: &RefineConfig) -> Result<RefineOutcome> {
    let columns = match &dataset.response {
        Some(Response::Scalar(y)) => vec![y.clone()],
        Some(Response::Multi(cols)) => cols.clone(),
        Some(Response::Labels(_)) => {
            return Err(Error::Usage("label responses go through classification".into()));
        }
        None => return Err(Error::Usage("dataset has no response".into())),
    };
    let weights = density_surrogate(covering, dataset, &config.surrogate)?;
    let rho0 = initial_vertex_masses(&weights);
    iterate_with(covering, complex, &columns, rho0, None, config)
}

fn smoothing_cache(lap: &Laplacian, diffusion: &SpectralCache, rho0: &[f64], eigen: &EigenOptions) -> Result<SpectralCache> {
    if rho0.iter().all(|&r| r == 1.0) {
        return Ok(diffusion.clone());
    }
    eigendecompose(&lap.with_form(LaplacianForm::RandomWalk, Some(rho0))?, eigen)
}

struct SmoothStep {
    y_hat: Vec<Vec<f64>>,
    selection: SmootherSelection,
    cache: SpectralCache,
}

#[allow(clippy::too_many_arguments)]
fn smooth_step(
    lap: &Laplacian,
    diffusion: &SpectralCache,
    rho0: &[f64],
    ys: &[Vec<f64>],
    mask: Option<&[bool]>,
    filter: &dyn SmoothingFilter,
    config: &RefineConfig,
) -> Result<SmoothStep> {
    if let Some(mask) = mask {
        let fit = masked::masked_smooth(lap, rho0, ys, mask, filter, config.grid_size, &config.eigen)?;
        // The full-graph cache still serves the density and band computations.
        let cache = smoothing_cache(lap, diffusion, rho0, &config.eigen)?;
        return Ok(SmoothStep {
            y_hat: fit.y_hat,
            selection: fit.selection,
            cache,
        });
    }
    let cache = smoothing_cache(lap, diffusion, rho0, &config.eigen)?;
    let refs: Vec<&[f64]> = ys.iter().map(|v| v.as_slice()).collect();
    let selection = gcv_select_multi(&cache, &refs, filter, config.grid_size)?;
    let y_hat = if filter.name() == "tikhonov" {
        let sys = TikhonovSystem::new(lap, rho0, selection.eta_star)?;
        ys.iter().map(|y| sys.solve(y)).collect::<Result<_>>()?
    } else {
        ys.iter().map(|y| cache.smooth(filter, y, selection.eta_star)).collect::<Result<_>>()?
    };
    Ok(SmoothStep { y_hat, selection, cache })
}

fn flatten(cols: &[Vec<f64>]) -> Vec<f64> {
    cols.iter().flatten().copied().collect()
}

fn rising_three_times(history: &[f64]) -> bool {
    history.len() >= 4 && history[history.len() - 4..].windows(2).all(|w| w[1] > w[0])
}

/// Core loop over an arbitrary cover with explicit initial vertex masses.
/// With a mask, only the marked vertices contribute to data fidelity.
pub fn iterate_with(
    cover: &dyn SetCover,
    complex: &NerveComplex,
    responses: &[Vec<f64>],
    rho0_init: Vec<f64>,
    mask: Option<&[bool]>,
    config: &RefineConfig,
) -> Result<RefineOutcome> {
    config.validate()?;
    let n = complex.n_vertices;
    if responses.is_empty() {
        return Err(Error::Usage("no response columns".into()));
    }
    if let Some(c) = responses.iter().find(|c| c.len() != n) {
        return Err(Error::Dimension(format!("response has {} entries for {n} vertices", c.len())));
    }
    if responses.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Data("response contains non-finite values".into()));
    }
    if rho0_init.len() != n {
        return Err(Error::Dimension(format!("{} vertex masses for {n} vertices", rho0_init.len())));
    }
    let filters = filter_registry();
    let smoother = filters.get(&config.smoother)?;
    let init_smoother = filters.get(&config.init_smoother)?;
    let updater = edge_update_registry().create(&config.edge_update, &config.beta_rescale)?;
    let mut run_warnings = Vec::new();

    let mut mass = MassState::from_intersections(cover, complex, rho0_init.clone())?;
    let mut lap = assemble_laplacian(complex, &mass, config.convention, LaplacianForm::Combinatorial)?;
    run_warnings.extend(lap.warnings.iter().cloned());
    let mut diffusion = eigendecompose(&lap, &config.eigen)?;

    let t = match config.t {
        Some(t) => t,
        None => match diffusion.spectral_gap() {
            Some(l2) => 1.0 / l2,
            None => {
                run_warnings.push("no positive eigenvalue retained; diffusion time set to 1".into());
                1.0
            }
        },
    };
    let beta = config.beta_damp.unwrap_or(config.beta_damp_factor / t);

    let init = smooth_step(&lap, &diffusion, &mass.rho0, responses, mask, init_smoother.as_ref(), config)?;
    run_warnings.extend(init.selection.warnings.iter().map(|w| format!("initial smoothing: {w}")));
    let initial_eta = init.selection.eta_star;
    let initial_y_hat = init.y_hat.clone();

    let mut prev_y = flatten(&init.y_hat);
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut histories: [Vec<f64>; 3] = Default::default();
    let mut converged = false;
    let mut last = init;

    for iteration in 1..=config.max_iters {
        let mut warnings = Vec::new();
        // (1) response smoothing on the current geometry.
        let step = smooth_step(&lap, &diffusion, &mass.rho0, responses, mask, smoother.as_ref(), config)?;
        warnings.extend(step.selection.warnings.iter().cloned());

        // (2) damped diffusion with the Laplacian from the start of the iteration.
        let diffused = diffuse_density(&diffusion, &mass.rho0, t, beta, &rho0_init)?;
        let rho0_new = power_damp_normalize(&diffused, config.alpha_damp)?;

        // (3) fresh edge bases, then coherence modulation.
        let mut next = updater.update(cover, complex, &mass, &rho0_new)?;
        let scale = penalty_scale(&step.y_hat, complex, config.sigma_mode)?;
        if scale == PenaltyScale::Flat {
            warnings.push("response is constant on every edge; penalty is flat".into());
        }
        let rho1_before = next.rho1.clone();
        next.rho1 = modulate_edges(&rho1_before, &step.y_hat, complex, scale, config.gamma);
        let factor = if rho1_before.is_empty() { 1.0 } else { next.rho1[0] / rho1_before[0] };
        // Keep off-diagonal entries on the same footing as the diagonal.
        if !next.offdiag.is_empty() {
            let edge_gamma: Vec<f64> = rho1_before
                .iter()
                .zip(&next.rho1)
                .map(|(b, a)| if *b > 0.0 { a / b } else { factor })
                .collect();
            for e in next.offdiag.iter_mut() {
                e.value *= (edge_gamma[e.a] * edge_gamma[e.b]).sqrt();
            }
            if config.modulate_triangles {
                modulate_triangles(&mut next, &step.y_hat, complex, scale, config.gamma);
            }
        }

        // (4) normalization: ρ₀ sums to n, ρ₁ has mean one.
        crate::covering::surrogate::scale_to_sum(&mut next.rho0, n as f64);
        if !next.rho1.is_empty() {
            let mean = next.rho1.iter().sum::<f64>() / next.rho1.len() as f64;
            next.scale_m1(1.0 / mean);
        }
        if next.rho1.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::Numeric(format!("edge mass lost positivity at iteration {iteration}")));
        }

        // (5) reassembly and cache refresh.
        let new_lap = assemble_laplacian(complex, &next, config.convention, LaplacianForm::Combinatorial)?;
        warnings.extend(new_lap.warnings.iter().cloned());
        let new_diffusion = eigendecompose(&new_lap, &config.eigen)?;

        let y_flat = flatten(&step.y_hat);
        let rel_y = relative_change(&y_flat, &prev_y);
        let rel_rho0 = relative_change(&next.rho0, &mass.rho0);
        let rel_rho1 = relative_change(&next.rho1, &mass.rho1);
        for (h, v) in histories.iter_mut().zip([rel_y, rel_rho0, rel_rho1]) {
            h.push(v);
        }
        for (h, name) in histories.iter().zip(["y_hat", "rho0", "rho1"]) {
            if rising_three_times(h) {
                let msg = format!("relative change of {name} rose three iterations in a row; possible oscillation");
                log::warn!("iteration {iteration}: {msg}");
                warnings.push(msg);
            }
        }
        records.push(IterationRecord {
            iteration,
            eta: step.selection.eta_star,
            edf: step.selection.edf,
            sigma: scale.sigma(),
            y_hat: step.y_hat.clone(),
            rho0: next.rho0.clone(),
            rho1: next.rho1.clone(),
            rel_change_y: rel_y,
            rel_change_rho0: rel_rho0,
            rel_change_rho1: rel_rho1,
            entropy: density_entropy(&next.rho0),
            warnings,
        });
        log::debug!(
            "iteration {iteration}: eta {:.3e}, dy {rel_y:.2e}, drho0 {rel_rho0:.2e}, drho1 {rel_rho1:.2e}",
            step.selection.eta_star
        );

        prev_y = y_flat;
        mass = next;
        lap = new_lap;
        diffusion = new_diffusion;
        last = step;
        if rel_y < config.eps_y && rel_rho0 < config.eps_rho && rel_rho1 < config.eps_rho {
            converged = true;
            break;
        }
    }
    if !converged {
        run_warnings.push(format!("did not converge within {} iterations", config.max_iters));
    }
    let iterations_used = records.len();
    Ok(RefineOutcome {
        mass,
        y_hat: last.y_hat,
        trace: IterationTrace {
            initial_eta,
            initial_y_hat,
            records,
            converged,
            iterations_used,
            diffusion_time: t,
            beta_damp: beta,
            warnings: run_warnings,
        },
        laplacian: lap,
        smoothing_cache: last.cache,
        selection: last.selection,
    })
}
