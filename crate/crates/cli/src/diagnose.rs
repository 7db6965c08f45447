//! The `diagnose` command: tidy plot-data from a fit directory.

use std::path::Path;

use nervereg::nerve::NerveComplex;
use nervereg::refine::trace::{summary_csv, IterationRecord, IterationTrace};

use crate::data::{fmt_f64, write_csv};
use crate::error::{io_err, CliError, CliResult};
use crate::fit::{COMPLEX, TRACE};

pub fn read_trace(fit_dir: &Path) -> CliResult<Vec<IterationRecord>> {
    let path = fit_dir.join(TRACE);
    let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let records = IterationTrace::from_jsonl(&text).map_err(|e| io_err(&path, e))?;
    if records.is_empty() {
        return Err(CliError::Input(format!("{}: trace is empty", path.display())));
    }
    Ok(records)
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

/// Writes `density.csv`, `edge_mass.csv`, `y_hat.csv`, `convergence.csv`
/// and `summary.csv`. Returns the number of iterations found.
pub fn run_diagnose(fit_dir: &Path, out: &Path) -> CliResult<usize> {
    let records = read_trace(fit_dir)?;
    let complex_path = fit_dir.join(COMPLEX);
    let complex: Option<NerveComplex> = match std::fs::read_to_string(&complex_path) {
        Ok(text) => Some(serde_json::from_str(&text).map_err(|e| io_err(&complex_path, e))?),
        Err(_) => None,
    };
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;

    let mut density = Vec::new();
    let mut edges = Vec::new();
    let mut fitted = Vec::new();
    let mut convergence = Vec::new();
    for r in &records {
        let it = r.iteration.to_string();
        for (v, x) in r.rho0.iter().enumerate() {
            density.push(vec![it.clone(), v.to_string(), fmt_f64(*x)]);
        }
        for (e, m) in r.rho1.iter().enumerate() {
            let (s, t) = complex
                .as_ref()
                .and_then(|c| c.edges.get(e))
                .map_or((String::new(), String::new()), |&(a, b)| (a.to_string(), b.to_string()));
            edges.push(vec![it.clone(), e.to_string(), s, t, fmt_f64(*m)]);
        }
        for (c, col) in r.y_hat.iter().enumerate() {
            for (v, y) in col.iter().enumerate() {
                fitted.push(vec![it.clone(), v.to_string(), c.to_string(), fmt_f64(*y)]);
            }
        }
        convergence.push(vec![
            it,
            fmt_f64(r.rel_change_y),
            fmt_f64(r.rel_change_rho0),
            fmt_f64(r.rel_change_rho1),
        ]);
    }
    write_csv(&out.join("density.csv"), &header(&["iteration", "vertex", "rho0"]), &density)?;
    write_csv(&out.join("edge_mass.csv"), &header(&["iteration", "edge", "source", "target", "rho1"]), &edges)?;
    write_csv(&out.join("y_hat.csv"), &header(&["iteration", "vertex", "column", "y_hat"]), &fitted)?;
    write_csv(
        &out.join("convergence.csv"),
        &header(&["iteration", "rel_change_y", "rel_change_rho0", "rel_change_rho1"]),
        &convergence,
    )?;
    let summary = out.join("summary.csv");
    std::fs::write(&summary, summary_csv(&records)).map_err(|e| io_err(&summary, e))?;
    Ok(records.len())
}
