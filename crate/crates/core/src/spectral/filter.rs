//! Spectral response functions for smoothing.

use crate::registry::Registry;

/// A low-pass filter `h(η, λ)` applied per eigenvalue.
pub trait SmoothingFilter: Send + Sync {
    fn name(&self) -> &'static str;
    fn response(&self, eta: f64, lambda: f64) -> f64;
    /// `1 - h(η, λ)` evaluated without cancellation.
    fn complement(&self, eta: f64, lambda: f64) -> f64;
}

pub struct HeatFilter;

impl SmoothingFilter for HeatFilter {
    fn name(&self) -> &'static str {
        "heat"
    }

    fn response(&self, eta: f64, lambda: f64) -> f64 {
        clamped_exp(-eta * lambda)
    }

    fn complement(&self, eta: f64, lambda: f64) -> f64 {
        -(-eta * lambda).exp_m1()
    }
}

pub struct TikhonovFilter;

impl SmoothingFilter for TikhonovFilter {
    fn name(&self) -> &'static str {
        "tikhonov"
    }

    fn response(&self, eta: f64, lambda: f64) -> f64 {
        1.0 / (1.0 + eta * lambda)
    }

    fn complement(&self, eta: f64, lambda: f64) -> f64 {
        let x = eta * lambda;
        x / (1.0 + x)
    }
}

/// `exp(x)` clamped to the positive normal range.
pub fn clamped_exp(x: f64) -> f64 {
    x.exp().clamp(f64::MIN_POSITIVE, f64::MAX)
}

pub fn filter_registry() -> Registry<dyn SmoothingFilter> {
    Registry::<dyn SmoothingFilter>::new("smoothing filter")
        .with("heat", |_| Box::new(HeatFilter))
        .with("tikhonov", |_| Box::new(TikhonovFilter))
}
