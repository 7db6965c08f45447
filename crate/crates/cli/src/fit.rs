//! The `fit` command: full pipeline from CSV to fitted values and artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nervereg::covering::build_knn;
use nervereg::inference::{classify, credible_band, CredibleBand};
use nervereg::nerve::build_nerve;
use nervereg::refine::{iterate, RefineOutcome};
use nervereg::spectral::filter_registry;
use nervereg::spectral::sidecar::write_sidecar;
use nervereg::stats::density_entropy;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, Task};
use crate::data::{fmt_f64, load_dataset, write_csv, LoadedData};
use crate::error::{io_err, CliError, CliResult};

pub const FITTED: &str = "fitted.csv";
pub const TRACE: &str = "trace.jsonl";
pub const MASS_STATE: &str = "mass_state.json";
pub const SIDECAR: &str = "spectral_cache.bin";
pub const COMPLEX: &str = "complex.json";
pub const REPORT: &str = "report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub eta: f64,
    pub edf: f64,
    pub sigma: Option<f64>,
    pub rel_change_y: f64,
    pub rel_change_rho0: f64,
    pub rel_change_rho1: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub load_ms: f64,
    pub covering_ms: f64,
    pub nerve_ms: f64,
    pub refine_ms: f64,
    pub band_ms: f64,
    pub write_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub converged: bool,
    pub iterations: usize,
    pub eta: f64,
    pub edf: f64,
    pub n: usize,
    pub k: usize,
    pub n_edges: usize,
    pub n_triangles: usize,
    pub diffusion_time: f64,
    pub beta_damp: f64,
    pub final_entropy: f64,
    pub metrics: Vec<IterationMetrics>,
    pub warnings: Vec<String>,
    pub timings: Timings,
}

pub struct FitPaths {
    pub input: PathBuf,
    pub output: PathBuf,
}

pub fn resolve_paths(cfg: &RunConfig, input: Option<PathBuf>, output: Option<PathBuf>) -> CliResult<FitPaths> {
    let input = input
        .or_else(|| cfg.input.clone())
        .ok_or_else(|| CliError::Config("no input file given".into()))?;
    let output = output
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| CliError::Config("no output directory given".into()))?;
    Ok(FitPaths { input, output })
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn run_fit(cfg: &RunConfig, paths: &FitPaths) -> CliResult<FitReport> {
    cfg.validate()?;
    std::fs::create_dir_all(&paths.output).map_err(|e| io_err(&paths.output, e))?;

    let clock = Instant::now();
    let data = load_dataset(&paths.input, &cfg.data, cfg.task)?;
    let load_ms = ms(clock);

    let clock = Instant::now();
    let covering = build_knn(&data.dataset, cfg.k)?;
    let covering_ms = ms(clock);
    let clock = Instant::now();
    let complex = build_nerve(&covering, cfg.max_dim)?;
    let nerve_ms = ms(clock);

    let refine_cfg = cfg.refine_config();
    let clock = Instant::now();
    let (outcome, probabilities) = match cfg.task {
        Task::Regression => (iterate(&data.dataset, &covering, &complex, &refine_cfg)?, None),
        Task::Classification => {
            let c = classify(&data.dataset, &covering, &complex, &refine_cfg, cfg.classes.as_deref())?;
            (c.outcome, Some(c.probabilities))
        }
    };
    let refine_ms = ms(clock);

    let clock = Instant::now();
    let band = if cfg.task == Task::Regression && cfg.band.enabled && data.numeric_response.len() == 1 {
        let filter = filter_registry().get(&refine_cfg.smoother)?;
        Some(credible_band(
            &outcome.smoothing_cache,
            filter.as_ref(),
            outcome.selection.eta_star,
            &data.numeric_response[0],
            &outcome.y_hat[0],
            cfg.band.level,
            cfg.band.n_samples,
            cfg.seed,
        )?)
    } else {
        None
    };
    let band_ms = ms(clock);

    let clock = Instant::now();
    let out = &paths.output;
    match &probabilities {
        Some(p) => write_classification(&out.join(FITTED), &data, p)?,
        None => write_regression(&out.join(FITTED), &data, &outcome, band.as_ref())?,
    }
    write_text(&out.join(TRACE), &outcome.trace.to_jsonl()?)?;
    write_text(&out.join(MASS_STATE), &outcome.mass.to_json()?)?;
    write_text(&out.join(COMPLEX), &complex.to_json()?)?;
    write_sidecar(&out.join(SIDECAR), &outcome.smoothing_cache)?;
    let write_ms = ms(clock);

    let mut warnings = outcome.trace.warnings.clone();
    for r in &outcome.trace.records {
        warnings.extend(r.warnings.iter().map(|w| format!("iteration {}: {w}", r.iteration)));
    }
    if !outcome.trace.converged {
        log::warn!("refinement stopped at max_iters = {} without converging", refine_cfg.max_iters);
    }
    let report = FitReport {
        converged: outcome.trace.converged,
        iterations: outcome.trace.iterations_used,
        eta: outcome.selection.eta_star,
        edf: outcome.selection.edf,
        n: data.dataset.n(),
        k: cfg.k,
        n_edges: complex.n_edges(),
        n_triangles: complex.triangles.len(),
        diffusion_time: outcome.trace.diffusion_time,
        beta_damp: outcome.trace.beta_damp,
        final_entropy: density_entropy(&outcome.mass.rho0),
        metrics: outcome
            .trace
            .records
            .iter()
            .map(|r| IterationMetrics {
                iteration: r.iteration,
                eta: r.eta,
                edf: r.edf,
                sigma: r.sigma,
                rel_change_y: r.rel_change_y,
                rel_change_rho0: r.rel_change_rho0,
                rel_change_rho1: r.rel_change_rho1,
                entropy: r.entropy,
            })
            .collect(),
        warnings,
        timings: Timings {
            load_ms,
            covering_ms,
            nerve_ms,
            refine_ms,
            band_ms,
            write_ms,
        },
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Numeric(e.to_string()))?;
    write_text(&out.join(REPORT), &json)?;
    Ok(report)
}

fn write_regression(path: &Path, data: &LoadedData, outcome: &RefineOutcome, band: Option<&CredibleBand>) -> CliResult<()> {
    let ids = &data.dataset.row_ids;
    let single = data.response_names.len() == 1;
    let mut header = vec!["id".to_string()];
    for name in &data.response_names {
        if single {
            header.extend(["y".to_string(), "y_hat".to_string()]);
        } else {
            header.extend([name.clone(), format!("{name}_hat")]);
        }
    }
    if band.is_some() {
        header.extend(["lower".to_string(), "upper".to_string()]);
    }
    let rows: Vec<Vec<String>> = (0..ids.len())
        .map(|i| {
            let mut r = vec![ids[i].clone()];
            for (y, yh) in data.numeric_response.iter().zip(&outcome.y_hat) {
                r.push(fmt_f64(y[i]));
                r.push(fmt_f64(yh[i]));
            }
            if let Some(b) = band {
                r.push(fmt_f64(b.lower[i]));
                r.push(fmt_f64(b.upper[i]));
            }
            r
        })
        .collect();
    write_csv(path, &header, &rows)
}

fn write_classification(path: &Path, data: &LoadedData, p: &nervereg::inference::ClassProbabilities) -> CliResult<()> {
    let mut header = vec!["id".to_string(), "label".to_string(), "predicted".to_string()];
    header.extend(p.labels.iter().map(|l| format!("p_{l}")));
    let rows: Vec<Vec<String>> = (0..data.labels.len())
        .map(|i| {
            let mut r = vec![
                data.dataset.row_ids[i].clone(),
                data.labels[i].clone(),
                p.labels[p.predicted[i]].clone(),
            ];
            r.extend(p.probs[i].iter().map(|&v| fmt_f64(v)));
            r
        })
        .collect();
    write_csv(path, &header, &rows)
}
