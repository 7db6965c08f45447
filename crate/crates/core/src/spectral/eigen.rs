//! Smallest eigenpairs of a symmetric positive semidefinite operator.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, CsrMatrix};
use crate::registry::Registry;

/// `A = S L S` with `S` an optional diagonal scaling, plus an orthonormal
/// basis of its known nullspace.
pub struct SymOperator<'a> {
    matrix: &'a CsrMatrix,
    scaling: Option<Vec<f64>>,
    nullspace: Vec<Vec<f64>>,
}

impl<'a> SymOperator<'a> {
    pub fn new(matrix: &'a CsrMatrix, scaling: Option<Vec<f64>>, nullspace: Vec<Vec<f64>>) -> Self {
        Self {
            matrix,
            scaling,
            nullspace,
        }
    }

    pub fn n(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn nullspace(&self) -> &[Vec<f64>] {
        &self.nullspace
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        match &self.scaling {
            None => self.matrix.matvec_into(x, y),
            Some(s) => {
                let sx: Vec<f64> = x.iter().zip(s).map(|(a, b)| a * b).collect();
                self.matrix.matvec_into(&sx, y);
                y.iter_mut().zip(s).for_each(|(a, b)| *a *= b);
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        self.apply_into(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = self.matrix.to_dense();
        if let Some(s) = &self.scaling {
            for r in 0..d.nrows() {
                for c in 0..d.ncols() {
                    d[(r, c)] *= s[r] * s[c];
                }
            }
        }
        (&d + d.transpose()) * 0.5
    }

    /// Upper bound on the operator norm.
    pub fn norm_bound(&self) -> f64 {
        match &self.scaling {
            None => self.matrix.gershgorin_bound(),
            Some(s) => (0..self.n())
                .map(|r| self.matrix.row(r).map(|(c, v)| (v * s[r] * s[c]).abs()).sum::<f64>())
                .fold(0.0, f64::max),
        }
    }
}

/// Ascending eigenvalues, matching orthonormal eigenvectors and residual norms.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    pub residuals: Vec<f64>,
}

pub trait EigenSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn smallest(&self, op: &SymOperator<'_>, count: usize, seed: u64) -> Result<EigenPairs>;
}

pub struct DenseSolver;

impl EigenSolver for DenseSolver {
    fn name(&self) -> &'static str {
        "dense"
    }

    fn smallest(&self, op: &SymOperator<'_>, count: usize, _seed: u64) -> Result<EigenPairs> {
        let n = op.n();
        let count = count.min(n);
        let eig = SymmetricEigen::new(op.to_dense());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
        let mut vectors = DMatrix::zeros(n, count);
        let mut values = Vec::with_capacity(count);
        for (c, &k) in order.iter().take(count).enumerate() {
            values.push(eig.eigenvalues[k]);
            vectors.set_column(c, &eig.eigenvectors.column(k));
        }
        let residuals = residuals(op, &values, &vectors);
        Ok(EigenPairs {
            values,
            vectors,
            residuals,
        })
    }
}

/// Thick-restart Lanczos with full reorthogonalization.
pub struct LanczosSolver {
    pub rel_tol: f64,
    pub max_restarts: usize,
}

impl Default for LanczosSolver {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_restarts: 500,
        }
    }
}

/// Two Gram-Schmidt passes over every set, so no set regains a component
/// removed earlier in the pass.
fn orthogonalize(w: &mut [f64], sets: &[&[Vec<f64>]]) {
    for _ in 0..2 {
        for v in sets.iter().flat_map(|s| s.iter()) {
            let c = dot(w, v);
            axpy(-c, v, w);
        }
    }
}

/// Orthogonalizes and normalizes `w`; `None` when too little of it survives.
fn next_direction(mut w: Vec<f64>, sets: &[&[Vec<f64>]], floor: f64) -> Option<Vec<f64>> {
    let before = dot(&w, &w).sqrt();
    orthogonalize(&mut w, sets);
    let after = normalize(&mut w);
    (after > floor && after > 1e-8 * before).then_some(w)
}

fn normalize(w: &mut [f64]) -> f64 {
    let norm = dot(w, w).sqrt();
    if norm > 0.0 {
        w.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

impl LanczosSolver {
    fn fresh_direction(
        &self,
        rng: &mut ChaCha8Rng,
        n: usize,
        null: &[Vec<f64>],
        basis: &[Vec<f64>],
    ) -> Option<Vec<f64>> {
        for _ in 0..3 {
            let w: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
            if let Some(v) = next_direction(w, &[null, basis], 0.0) {
                return Some(v);
            }
        }
        None
    }
}

impl EigenSolver for LanczosSolver {
    fn name(&self) -> &'static str {
        "lanczos"
    }

    fn smallest(&self, op: &SymOperator<'_>, count: usize, seed: u64) -> Result<EigenPairs> {
        let n = op.n();
        let count = count.min(n);
        let null = op.nullspace();
        let k_null = null.len().min(count);
        let want = count - k_null;
        let mut values = vec![0.0; k_null];
        let mut vectors = DMatrix::zeros(n, count);
        for (c, v) in null.iter().take(k_null).enumerate() {
            vectors.set_column(c, &nalgebra::DVector::from_column_slice(v));
        }
        if want == 0 {
            let residuals = residuals(op, &values, &vectors);
            return Ok(EigenPairs {
                values,
                vectors,
                residuals,
            });
        }

        let dim = n - null.len();
        let max_basis = dim.min((2 * want + 20).max(want + 40));
        let scale = op.norm_bound().max(f64::MIN_POSITIVE);
        let tol = self.rel_tol * scale;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_basis + 1);
        let mut images: Vec<Vec<f64>> = Vec::with_capacity(max_basis + 1);
        let start = self
            .fresh_direction(&mut rng, n, null, &basis)
            .ok_or_else(|| Error::Numeric("could not draw a Lanczos start vector".into()))?;
        images.push(op.apply(&start));
        basis.push(start);

        let mut worst = f64::INFINITY;
        for _restart in 0..self.max_restarts {
            while basis.len() < max_basis {
                let w = images.last().unwrap().clone();
                let next = next_direction(w, &[null, &basis], 1e-10 * scale)
                    .or_else(|| self.fresh_direction(&mut rng, n, null, &basis));
                match next {
                    Some(v) => {
                        images.push(op.apply(&v));
                        basis.push(v);
                    }
                    None => break,
                }
            }

            // Rayleigh-Ritz on the current basis.
            let m = basis.len();
            let mut t = DMatrix::zeros(m, m);
            for i in 0..m {
                for j in i..m {
                    let x = 0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]));
                    t[(i, j)] = x;
                    t[(j, i)] = x;
                }
            }
            let eig = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let ritz = |k: usize| -> (Vec<f64>, Vec<f64>) {
                let mut y = vec![0.0; n];
                let mut ay = vec![0.0; n];
                for j in 0..m {
                    let s = eig.eigenvectors[(j, k)];
                    axpy(s, &basis[j], &mut y);
                    axpy(s, &images[j], &mut ay);
                }
                (y, ay)
            };
            let take = want.min(m);
            let keep = if m >= dim { m } else { (want + (m - want) / 2).min(m - 1).max(take) };
            let mut ys = Vec::with_capacity(keep);
            let mut ays = Vec::with_capacity(keep);
            let mut res = Vec::with_capacity(take);
            for &k in order.iter().take(keep) {
                let (y, ay) = ritz(k);
                if ys.len() < take {
                    let theta = eig.eigenvalues[k];
                    let r: f64 = y.iter().zip(&ay).map(|(a, b)| (b - theta * a).powi(2)).sum::<f64>().sqrt();
                    res.push(r);
                }
                ys.push(y);
                ays.push(ay);
            }
            worst = res.iter().cloned().fold(0.0, f64::max);
            let exhausted = m >= dim;
            if (take == want && worst <= tol) || exhausted {
                for (c, &k) in order.iter().take(take).enumerate() {
                    values.push(eig.eigenvalues[k]);
                    vectors.set_column(k_null + c, &nalgebra::DVector::from_column_slice(&ys[c]));
                }
                if take < want {
                    return Err(Error::Numeric(format!(
                        "operator has only {take} eigenpairs outside the known nullspace, {want} requested"
                    )));
                }
                let residuals = residuals(op, &values, &vectors);
                return Ok(EigenPairs {
                    values,
                    vectors,
                    residuals,
                });
            }

            // Continue the Krylov sequence from the next Lanczos direction.
            let w = images.last().unwrap().clone();
            let next = next_direction(w, &[null, &basis, &ys], 1e-10 * scale)
                .or_else(|| self.fresh_direction(&mut rng, n, null, &ys));
            basis = ys;
            images = ays;
            if let Some(v) = next {
                images.push(op.apply(&v));
                basis.push(v);
            }
        }
        Err(Error::NotConverged {
            iterations: self.max_restarts,
            max_residual: worst,
        })
    }
}

fn residuals(op: &SymOperator<'_>, values: &[f64], vectors: &DMatrix<f64>) -> Vec<f64> {
    values
        .iter()
        .enumerate()
        .map(|(c, &l)| {
            let v: Vec<f64> = vectors.column(c).iter().copied().collect();
            let av = op.apply(&v);
            av.iter().zip(&v).map(|(a, b)| (a - l * b).powi(2)).sum::<f64>().sqrt()
        })
        .collect()
}

pub fn solver_registry() -> Registry<dyn EigenSolver> {
    Registry::<dyn EigenSolver>::new("eigensolver")
        .with("dense", |_| Box::new(DenseSolver))
        .with("lanczos", |_| Box::new(LanczosSolver::default()))
}
