//! Per-iteration diagnostics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub eta: f64,
    pub edf: f64,
    /// Penalty scale used for modulation; `None` when the penalty was flat.
    pub sigma: Option<f64>,
    /// Smoothed response, one vector per column.
    pub y_hat: Vec<Vec<f64>>,
    pub rho0: Vec<f64>,
    pub rho1: Vec<f64>,
    pub rel_change_y: f64,
    pub rel_change_rho0: f64,
    pub rel_change_rho1: f64,
    pub entropy: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    /// Smoothing parameter of the initial heat-filter pass.
    pub initial_eta: f64,
    pub initial_y_hat: Vec<Vec<f64>>,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    pub iterations_used: usize,
    pub diffusion_time: f64,
    pub beta_damp: f64,
    pub warnings: Vec<String>,
}

impl IterationTrace {
    /// One JSON object per iteration.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Vec<IterationRecord>> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| Ok(serde_json::from_str(l)?))
            .collect()
    }

    /// Scalar summary, one row per iteration.
    pub fn to_csv(&self) -> String {
        summary_csv(&self.records)
    }
}

pub fn summary_csv(records: &[IterationRecord]) -> String {
    let mut out = String::from("iteration,eta,edf,sigma,rel_change_y,rel_change_rho0,rel_change_rho1,entropy\n");
    for r in records {
        let sigma = r.sigma.map(|s| format!("{s:e}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{:e},{:e},{},{:e},{:e},{:e},{:e}",
            r.iteration, r.eta, r.edf, sigma, r.rel_change_y, r.rel_change_rho0, r.rel_change_rho1, r.entropy
        );
    }
    out
}
