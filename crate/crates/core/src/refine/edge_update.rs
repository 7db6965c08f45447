//! Edge-mass updates: fresh edge bases after a density step, then
//! response-coherence modulation of edges and triangles.

use crate::covering::SetCover;
use crate::error::{Error, Result};
use crate::metric::{normalize_mean_one, MassState};
use crate::nerve::NerveComplex;
use crate::registry::Registry;

use super::penalty::{edge_deltas, triangle_delta, PenaltyScale};

/// Produces the unmodulated edge masses `ρ̃₁` for the next iteration.
pub trait EdgeBasisUpdate: Send + Sync {
    fn name(&self) -> &'static str;
    fn update(
        &self,
        cover: &dyn SetCover,
        complex: &NerveComplex,
        previous: &MassState,
        rho0_new: &[f64],
    ) -> Result<MassState>;
}

/// Intersection masses recomputed under the new density.
pub struct RecomputeIntersections;

impl EdgeBasisUpdate for RecomputeIntersections {
    fn name(&self) -> &'static str {
        "recompute_intersections"
    }

    fn update(
        &self,
        cover: &dyn SetCover,
        complex: &NerveComplex,
        _previous: &MassState,
        rho0_new: &[f64],
    ) -> Result<MassState> {
        MassState::from_intersections(cover, complex, rho0_new.to_vec())
    }
}

/// Previous edge masses divided by the mean endpoint density to the power `beta`.
pub struct DensityRescale {
    pub beta: f64,
}

impl EdgeBasisUpdate for DensityRescale {
    fn name(&self) -> &'static str {
        "density_rescale"
    }

    fn update(
        &self,
        _cover: &dyn SetCover,
        complex: &NerveComplex,
        previous: &MassState,
        rho0_new: &[f64],
    ) -> Result<MassState> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Parameter(format!("beta_rescale {} outside [0, 1]", self.beta)));
        }
        let factors: Vec<f64> = complex
            .edges
            .iter()
            .map(|&(i, j)| (0.5 * (rho0_new[i] + rho0_new[j])).powf(-self.beta))
            .collect();
        let mut next = previous.clone();
        next.rho0 = rho0_new.to_vec();
        next.rho1.iter_mut().zip(&factors).for_each(|(m, f)| *m *= f);
        for e in next.offdiag.iter_mut() {
            e.value *= (factors[e.a] * factors[e.b]).sqrt();
        }
        Ok(next)
    }
}

/// Registry of edge-basis updates; the parameter is `beta_rescale`.
pub fn edge_update_registry() -> Registry<dyn EdgeBasisUpdate, f64> {
    Registry::<dyn EdgeBasisUpdate, f64>::new("edge update")
        .with("recompute_intersections", |_| Box::new(RecomputeIntersections))
        .with("density_rescale", |&beta| Box::new(DensityRescale { beta }))
}

/// Multiplies each edge mass by `Γ(Δ)` and rescales to mean one.
pub fn modulate_edges(
    rho1_tilde: &[f64],
    y_hat: &[Vec<f64>],
    complex: &NerveComplex,
    scale: PenaltyScale,
    gamma: f64,
) -> Vec<f64> {
    let deltas = edge_deltas(y_hat, complex);
    let mut out: Vec<f64> = rho1_tilde
        .iter()
        .zip(&deltas)
        .map(|(m, &d)| m * scale.penalty(d, gamma))
        .collect();
    if !out.is_empty() {
        normalize_mean_one(&mut out);
    }
    out
}

/// Multiplies each triangle's off-diagonal entries by `Γ(Δ_τ)`, then rescales
/// all of `M₁` so its Frobenius norm is unchanged.
pub fn modulate_triangles(
    mass: &mut MassState,
    y_hat: &[Vec<f64>],
    complex: &NerveComplex,
    scale: PenaltyScale,
    gamma: f64,
) {
    if mass.offdiag.is_empty() {
        return;
    }
    let before = mass.frobenius_norm();
    let factors: Vec<f64> = complex
        .triangles
        .iter()
        .map(|t| scale.penalty(triangle_delta(y_hat, t), gamma))
        .collect();
    for e in mass.offdiag.iter_mut() {
        e.value *= factors[e.triangle];
    }
    let after = mass.frobenius_norm();
    if after > 0.0 {
        mass.scale_m1(before / after);
    }
}
