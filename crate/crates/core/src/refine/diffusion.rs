//! Damped heat diffusion of the vertex density.

use crate::error::{Error, Result};
use crate::spectral::SpectralCache;

/// `e^{-βt} exp(-tL) ρ + (1 - e^{-βt}) ρ_init`.
pub fn diffuse_density(cache: &SpectralCache, rho0: &[f64], t: f64, beta_damp: f64, rho0_init: &[f64]) -> Result<Vec<f64>> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Parameter(format!("diffusion time {t} must be finite and non-negative")));
    }
    if !(beta_damp >= 0.0) {
        return Err(Error::Parameter(format!("damping rate {beta_damp} must be non-negative")));
    }
    if rho0.len() != rho0_init.len() {
        return Err(Error::Dimension("density and initial density differ in length".into()));
    }
    let keep = (-beta_damp * t).exp();
    let restore = -(-beta_damp * t).exp_m1();
    let heat = cache.heat_apply(t, rho0)?;
    let mean = rho0.iter().sum::<f64>() / rho0.len() as f64;
    let floor = 1e-14 * mean;
    heat.iter()
        .zip(rho0_init)
        .enumerate()
        .map(|(i, (h, r))| {
            let v = keep * h + restore * r;
            if v >= floor {
                Ok(v)
            } else if v > -1e-10 * mean {
                Ok(floor)
            } else {
                Err(Error::Numeric(format!("diffused density is negative ({v:e}) at vertex {i}")))
            }
        })
        .collect()
}

/// `ρ ← ρ^α`, rescaled to sum `n`.
pub fn power_damp_normalize(rho0: &[f64], alpha_damp: f64) -> Result<Vec<f64>> {
    if !(alpha_damp > 0.0 && alpha_damp <= 1.0) {
        return Err(Error::Parameter(format!("alpha_damp {alpha_damp} outside (0, 1]")));
    }
    if rho0.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Numeric("density must be positive before power damping".into()));
    }
    let mut out: Vec<f64> = rho0.iter().map(|x| x.powf(alpha_damp)).collect();
    crate::covering::surrogate::scale_to_sum(&mut out, rho0.len() as f64);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_damp_example() {
        let out = power_damp_normalize(&[4.0, 1.0], 0.5).unwrap();
        assert!((out[0] - 4.0 / 3.0).abs() < 1e-15);
        assert!((out[1] - 2.0 / 3.0).abs() < 1e-15);
        let id = power_damp_normalize(&[3.0, 1.0], 1.0).unwrap();
        assert_eq!(id, vec![1.5, 0.5]);
        assert!(power_damp_normalize(&[1.0], 0.0).is_err());
        assert!(power_damp_normalize(&[0.0, 1.0], 0.5).is_err());
    }
}
