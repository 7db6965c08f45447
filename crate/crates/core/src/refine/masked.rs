//! Smoothing with responses observed on a subset of vertices.
//!
//! The Laplacian is Kron-reduced onto the observed vertices, the reduced
//! problem is smoothed and GCV-tuned as usual, and the fit is extended to
//! the unobserved vertices harmonically. For the Tikhonov filter this is the
//! exact minimizer of the fidelity-masked objective.

use nalgebra::{Cholesky, DMatrix};

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::spectral::{
    eigendecompose, gcv_select_multi, EigenOptions, Laplacian, LaplacianForm, SmootherSelection, SmoothingFilter,
    TikhonovSystem, DENSE_LIMIT,
};

pub struct MaskedFit {
    pub y_hat: Vec<Vec<f64>>,
    pub selection: SmootherSelection,
}

pub fn masked_smooth(
    lap: &Laplacian,
    rho0: &[f64],
    ys: &[Vec<f64>],
    mask: &[bool],
    filter: &dyn SmoothingFilter,
    grid_size: usize,
    eigen: &EigenOptions,
) -> Result<MaskedFit> {
    let n = lap.n();
    if n > DENSE_LIMIT {
        return Err(Error::Usage(format!("masked smoothing supports at most {DENSE_LIMIT} vertices")));
    }
    if mask.len() != n {
        return Err(Error::Dimension(format!("mask has {} entries for {n} vertices", mask.len())));
    }
    let train: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
    let held: Vec<usize> = (0..n).filter(|&i| !mask[i]).collect();
    if train.len() < 2 {
        return Err(Error::Data("fewer than two observed vertices".into()));
    }
    let full = lap.matrix.to_dense();
    let sub = |r: &[usize], c: &[usize]| DMatrix::from_fn(r.len(), c.len(), |i, j| full[(r[i], c[j])]);
    let ltt = sub(&train, &train);
    let (reduced, extend) = if held.is_empty() {
        (ltt, None)
    } else {
        let lth = sub(&train, &held);
        let mut lhh = sub(&held, &held);
        let chol = match Cholesky::new(lhh.clone()) {
            Some(c) => c,
            None => {
                // Held-out vertices cut off from every observed vertex.
                let ridge = 1e-10 * (lhh.trace().abs() / held.len() as f64).max(1.0);
                for i in 0..held.len() {
                    lhh[(i, i)] += ridge;
                }
                Cholesky::new(lhh).ok_or_else(|| Error::Numeric("held-out block is not positive definite".into()))?
            }
        };
        // X = L_HH⁻¹ L_HT
        let x = chol.solve(&lth.transpose());
        let schur = &ltt - &lth * &x;
        (schur, Some(x))
    };
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let mass_t: Vec<f64> = train.iter().map(|&i| rho0[i]).collect();
    let base = Laplacian {
        matrix: CsrMatrix::from_dense(&reduced),
        convention: lap.convention,
        form: LaplacianForm::Combinatorial,
        vertex_mass: None,
        warnings: vec![],
    };
    let reduced_lap = base.with_form(LaplacianForm::RandomWalk, Some(&mass_t))?;
    let cache = eigendecompose(&reduced_lap, eigen)?;
    let yt: Vec<Vec<f64>> = ys.iter().map(|y| train.iter().map(|&i| y[i]).collect()).collect();
    let refs: Vec<&[f64]> = yt.iter().map(|v| v.as_slice()).collect();
    let selection = gcv_select_multi(&cache, &refs, filter, grid_size)?;
    let fitted_t: Vec<Vec<f64>> = if filter.name() == "tikhonov" {
        let sys = TikhonovSystem::new(&base, &mass_t, selection.eta_star)?;
        yt.iter().map(|y| sys.solve(y)).collect::<Result<_>>()?
    } else {
        yt.iter().map(|y| cache.smooth(filter, y, selection.eta_star)).collect::<Result<_>>()?
    };
    let y_hat = fitted_t
        .iter()
        .map(|ft| {
            let mut out = vec![0.0; n];
            for (k, &i) in train.iter().enumerate() {
                out[i] = ft[k];
            }
            if let Some(x) = &extend {
                for (h, &i) in held.iter().enumerate() {
                    out[i] = -(0..train.len()).map(|k| x[(h, k)] * ft[k]).sum::<f64>();
                }
            }
            out
        })
        .collect();
    Ok(MaskedFit { y_hat, selection })
}
