//! The `cv` command: transductive K-fold cross-validation over `k`, `γ` and
//! the damping factor. Held-out vertices stay in the graph but carry no
//! data fidelity; their fitted values are the predictions.

use std::path::Path;

use nervereg::covering::{build_knn, density_surrogate, initial_vertex_masses};
use nervereg::inference::{class_order, classify_with};
use nervereg::nerve::build_nerve;
use nervereg::refine::iterate_with;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, Task};
use crate::data::{fmt_f64, load_dataset, write_csv, LoadedData};
use crate::error::{io_err, CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvGrid {
    pub k: Vec<usize>,
    #[serde(default = "default_gamma")]
    pub gamma: Vec<f64>,
    #[serde(default = "default_beta")]
    pub beta_damp_factor: Vec<f64>,
}

fn default_gamma() -> Vec<f64> {
    vec![1.0]
}

fn default_beta() -> Vec<f64> {
    vec![0.1]
}

impl CvGrid {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    fn points(&self) -> CliResult<Vec<(usize, f64, f64)>> {
        if self.k.is_empty() || self.gamma.is_empty() || self.beta_damp_factor.is_empty() {
            return Err(CliError::Config("every CV grid must be nonempty".into()));
        }
        let mut out = Vec::new();
        for &k in &self.k {
            for &g in &self.gamma {
                for &b in &self.beta_damp_factor {
                    out.push((k, g, b));
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub k: usize,
    pub gamma: f64,
    pub beta_damp_factor: f64,
    pub mean_error: f64,
    pub sd_error: f64,
    pub fold_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: usize,
    pub table: Vec<CvRow>,
    pub selected: CvRow,
}

/// Seeded fold assignment: a shuffled index order dealt round-robin.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

fn every_training_set_has_two_classes(labels: &[String], fold: &[usize], folds: usize) -> bool {
    (0..folds).all(|f| {
        let mut seen: Vec<&String> = labels.iter().zip(fold).filter(|(_, &g)| g != f).map(|(l, _)| l).collect();
        seen.sort();
        seen.dedup();
        seen.len() >= 2
    })
}

fn fold_error(data: &LoadedData, cfg: &RunConfig, k: usize, gamma: f64, beta: f64, fold: &[usize], f: usize) -> CliResult<f64> {
    let covering = build_knn(&data.dataset, k)?;
    let complex = build_nerve(&covering, cfg.max_dim)?;
    let mut refine = cfg.refine_config();
    refine.gamma = gamma;
    refine.beta_damp_factor = beta;
    let rho0 = initial_vertex_masses(&density_surrogate(&covering, &data.dataset, &refine.surrogate)?);
    let mask: Vec<bool> = fold.iter().map(|&g| g != f).collect();
    let held: Vec<usize> = (0..fold.len()).filter(|&i| fold[i] == f).collect();
    match cfg.task {
        Task::Regression => {
            let out = iterate_with(&covering, &complex, &data.numeric_response, rho0, Some(&mask), &refine)?;
            let sse: f64 = held
                .iter()
                .map(|&i| {
                    data.numeric_response
                        .iter()
                        .zip(&out.y_hat)
                        .map(|(y, yh)| (y[i] - yh[i]).powi(2))
                        .sum::<f64>()
                })
                .sum();
            Ok(sse / held.len() as f64)
        }
        Task::Classification => {
            let classes = cfg.classes.clone().unwrap_or_else(|| class_order(&data.labels));
            let c = classify_with(&covering, &complex, &data.labels, Some(&classes), rho0, Some(&mask), &refine)?;
            let wrong = held
                .iter()
                .filter(|&&i| c.probabilities.labels[c.probabilities.predicted[i]] != data.labels[i])
                .count();
            Ok(wrong as f64 / held.len() as f64)
        }
    }
}

pub fn run_cv(cfg: &RunConfig, grid: &CvGrid, input: &Path) -> CliResult<CvResult> {
    cfg.validate()?;
    let points = grid.points()?;
    let data = load_dataset(input, &cfg.data, cfg.task)?;
    let n = data.dataset.n();
    if cfg.folds > n {
        return Err(CliError::Config(format!("{} folds for {n} rows", cfg.folds)));
    }
    let mut fold = fold_assignment(n, cfg.folds, cfg.seed);
    if cfg.task == Task::Classification && !every_training_set_has_two_classes(&data.labels, &fold, cfg.folds) {
        fold = fold_assignment(n, cfg.folds, cfg.seed.wrapping_add(1));
        if !every_training_set_has_two_classes(&data.labels, &fold, cfg.folds) {
            return Err(CliError::Input("a training fold has a single class even after resampling".into()));
        }
    }

    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..cfg.folds).map(move |f| (p, f))).collect();
    let errors: Vec<f64> = jobs
        .par_iter()
        .map(|&(p, f)| {
            let (k, g, b) = points[p];
            fold_error(&data, cfg, k, g, b, &fold, f)
        })
        .collect::<CliResult<_>>()?;

    let table: Vec<CvRow> = points
        .iter()
        .enumerate()
        .map(|(p, &(k, gamma, beta))| {
            let fe: Vec<f64> = errors[p * cfg.folds..(p + 1) * cfg.folds].to_vec();
            let mean = fe.iter().sum::<f64>() / fe.len() as f64;
            let var = fe.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (fe.len() - 1) as f64;
            CvRow {
                k,
                gamma,
                beta_damp_factor: beta,
                mean_error: mean,
                sd_error: var.sqrt(),
                fold_errors: fe,
            }
        })
        .collect();
    let selected = table
        .iter()
        .min_by(|a, b| {
            a.mean_error
                .total_cmp(&b.mean_error)
                .then(a.k.cmp(&b.k))
                .then(a.gamma.total_cmp(&b.gamma))
                .then(a.beta_damp_factor.total_cmp(&b.beta_damp_factor))
        })
        .cloned()
        .expect("grid is nonempty");
    Ok(CvResult {
        folds: cfg.folds,
        table,
        selected,
    })
}

pub fn write_cv(result: &CvResult, out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let header: Vec<String> = ["k", "gamma", "beta_damp_factor", "mean_error", "sd_error"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = result
        .table
        .iter()
        .map(|r| {
            vec![
                r.k.to_string(),
                fmt_f64(r.gamma),
                fmt_f64(r.beta_damp_factor),
                fmt_f64(r.mean_error),
                fmt_f64(r.sd_error),
            ]
        })
        .collect();
    write_csv(&out.join("cv_table.csv"), &header, &rows)?;
    let json = serde_json::to_string_pretty(result).map_err(|e| CliError::Numeric(e.to_string()))?;
    let path = out.join("cv_result.json");
    std::fs::write(&path, json).map_err(|e| io_err(&path, e))
}
