//! Laplacian assembly, spectral caching, heat and Tikhonov smoothing, and
//! GCV selection of the smoothing parameter.

pub mod eigen;
pub mod filter;
pub mod gcv;
pub mod laplacian;
pub mod sidecar;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::conjugate_gradient;

pub use eigen::{solver_registry, EigenSolver};
pub use filter::{filter_registry, SmoothingFilter};
pub use gcv::{gcv_select, gcv_select_multi, gcv_value, SmootherSelection};
pub use laplacian::{assemble_laplacian, Convention, Laplacian, LaplacianForm};

/// Largest system solved with dense factorizations.
pub const DENSE_LIMIT: usize = 2000;
/// Default retained count for the iterative solver.
pub const DEFAULT_ITERATIVE_COUNT: usize = 100;

/// How many of the smallest eigenpairs to retain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenCount {
    /// Every eigenpair for dense problems; `DEFAULT_ITERATIVE_COUNT` otherwise.
    Auto,
    All,
    Fixed(usize),
    /// Smallest prefix whose Tikhonov weights `1/(1+λ)` reach this fraction
    /// of their total. Needs the full spectrum, so dense problems only.
    TraceFraction(f64),
}

impl Default for EigenCount {
    fn default() -> Self {
        EigenCount::Auto
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenOptions {
    pub count: EigenCount,
    /// Solver name; `None` picks dense up to `DENSE_LIMIT` vertices.
    pub solver: Option<String>,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            count: EigenCount::Auto,
            solver: None,
            seed: 0,
        }
    }
}

/// Smallest eigenpairs of a Laplacian. Eigenvectors are orthonormal in the
/// inner product weighted by `weights` when present.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCache {
    pub eigvals: Vec<f64>,
    pub eigvecs: DMatrix<f64>,
    pub weights: Option<Vec<f64>>,
    pub residual_norms: Vec<f64>,
}

pub fn eigendecompose(lap: &Laplacian, opts: &EigenOptions) -> Result<SpectralCache> {
    let n = lap.n();
    let solver_name = match &opts.solver {
        Some(s) => s.clone(),
        None if n <= DENSE_LIMIT => "dense".to_string(),
        None => "lanczos".to_string(),
    };
    let solver = solver_registry().get(&solver_name)?;
    let dense = solver.name() == "dense";
    let requested = match opts.count {
        EigenCount::Auto if dense => n,
        EigenCount::Auto => DEFAULT_ITERATIVE_COUNT.min(n),
        EigenCount::All => n,
        EigenCount::Fixed(p) => {
            if p == 0 || p > n {
                return Err(Error::Parameter(format!("eigenpair count {p} outside [1, {n}]")));
            }
            p
        }
        EigenCount::TraceFraction(f) => {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Parameter(format!("trace fraction {f} outside (0, 1]")));
            }
            if !dense {
                return Err(Error::Usage("trace-fraction truncation needs the dense solver".into()));
            }
            n
        }
    };

    let scaling: Option<Vec<f64>> = lap.vertex_mass.as_ref().map(|m| m.iter().map(|x| 1.0 / x.sqrt()).collect());
    let labels = lap.matrix.components();
    let n_comp = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut nullspace = vec![vec![0.0; n]; n_comp];
    for (v, &c) in labels.iter().enumerate() {
        nullspace[c][v] = lap.vertex_mass.as_ref().map_or(1.0, |m| m[v].sqrt());
    }
    for u in nullspace.iter_mut() {
        let norm = crate::linalg::dot(u, u).sqrt();
        u.iter_mut().for_each(|x| *x /= norm);
    }
    let op = eigen::SymOperator::new(&lap.matrix, scaling.clone(), nullspace);
    let pairs = solver.smallest(&op, requested, opts.seed)?;

    let mut p = pairs.values.len();
    if let EigenCount::TraceFraction(f) = opts.count {
        let w: Vec<f64> = pairs.values.iter().map(|l| 1.0 / (1.0 + l.max(0.0))).collect();
        let total: f64 = w.iter().sum();
        let mut acc = 0.0;
        for (i, wi) in w.iter().enumerate() {
            acc += wi;
            if acc >= f * total {
                p = i + 1;
                break;
            }
        }
    }
    let mut eigvecs = pairs.vectors.columns(0, p).into_owned();
    if let Some(s) = &scaling {
        for r in 0..n {
            eigvecs.row_mut(r).iter_mut().for_each(|x| *x *= s[r]);
        }
    }
    Ok(SpectralCache {
        eigvals: pairs.values[..p].iter().map(|l| l.max(0.0)).collect(),
        eigvecs,
        weights: lap.vertex_mass.clone(),
        residual_norms: pairs.residuals[..p].to_vec(),
    })
}

impl SpectralCache {
    pub fn n(&self) -> usize {
        self.eigvecs.nrows()
    }

    pub fn p(&self) -> usize {
        self.eigvecs.ncols()
    }

    pub fn is_full_rank(&self) -> bool {
        self.p() == self.n()
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigvals.last().copied().unwrap_or(0.0)
    }

    /// Smallest eigenvalue above the numerical-zero threshold.
    pub fn spectral_gap(&self) -> Option<f64> {
        let tol = 1e-10 * self.lambda_max().max(1.0);
        self.eigvals.iter().copied().find(|&l| l > tol)
    }

    /// Coordinates `Vᵀ W v` in the retained eigenbasis.
    pub fn coefficients(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n(), "vector length must match the cache");
        let wv: Vec<f64> = match &self.weights {
            Some(w) => v.iter().zip(w).map(|(a, b)| a * b).collect(),
            None => v.to_vec(),
        };
        let wv = DVector::from_vec(wv);
        (self.eigvecs.tr_mul(&wv)).iter().copied().collect()
    }

    /// `V c`.
    pub fn synthesize(&self, coef: &[f64]) -> Vec<f64> {
        let c = DVector::from_column_slice(coef);
        (&self.eigvecs * c).iter().copied().collect()
    }

    /// `V diag(g(λ)) Vᵀ W v`; components outside the retained subspace are dropped.
    pub fn filter_with<F: Fn(f64) -> f64>(&self, v: &[f64], g: F) -> Vec<f64> {
        let c: Vec<f64> = self
            .coefficients(v)
            .into_iter()
            .zip(&self.eigvals)
            .map(|(c, &l)| c * g(l))
            .collect();
        self.synthesize(&c)
    }

    /// `exp(-tL) v`.
    pub fn heat_apply(&self, t: f64, v: &[f64]) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return Err(Error::Parameter(format!("diffusion time {t} must be non-negative")));
        }
        Ok(self.filter_with(v, |l| filter::clamped_exp(-t * l)))
    }

    /// Low-pass filtered response `h(η, L) y`.
    pub fn smooth(&self, filter: &dyn SmoothingFilter, y: &[f64], eta: f64) -> Result<Vec<f64>> {
        if !(eta >= 0.0) {
            return Err(Error::Parameter(format!("smoothing parameter {eta} must be non-negative")));
        }
        Ok(self.filter_with(y, |l| filter.response(eta, l)))
    }

    /// Effective degrees of freedom `Σ h(η, λ)` over the retained spectrum.
    pub fn edf(&self, filter: &dyn SmoothingFilter, eta: f64) -> f64 {
        self.eigvals.iter().map(|&l| filter.response(eta, l)).sum()
    }

    /// Largest `|(VᵀWV - I)ᵢⱼ|`.
    pub fn orthonormality_error(&self) -> f64 {
        let wv = match &self.weights {
            Some(w) => {
                let mut m = self.eigvecs.clone();
                for r in 0..m.nrows() {
                    m.row_mut(r).iter_mut().for_each(|x| *x *= w[r]);
                }
                m
            }
            None => self.eigvecs.clone(),
        };
        let g = self.eigvecs.tr_mul(&wv) - DMatrix::identity(self.p(), self.p());
        g.amax()
    }
}

pub fn heat_apply(cache: &SpectralCache, t: f64, v: &[f64]) -> Result<Vec<f64>> {
    cache.heat_apply(t, v)
}

pub fn heat_smooth(cache: &SpectralCache, y: &[f64], eta: f64) -> Result<Vec<f64>> {
    cache.smooth(&filter::HeatFilter, y, eta)
}

/// Factored `M₀ + η L` for repeated Tikhonov solves.
pub struct TikhonovSystem<'a> {
    lap: &'a Laplacian,
    m0: Vec<f64>,
    eta: f64,
    chol: Option<Cholesky<f64, nalgebra::Dyn>>,
}

impl<'a> TikhonovSystem<'a> {
    pub fn new(lap: &'a Laplacian, m0: &[f64], eta: f64) -> Result<Self> {
        let n = lap.n();
        if m0.len() != n {
            return Err(Error::Dimension(format!("{} vertex masses for {n} vertices", m0.len())));
        }
        if m0.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::Numeric("vertex masses must be positive and finite".into()));
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::Parameter(format!("smoothing parameter {eta} must be finite and non-negative")));
        }
        let chol = if n <= DENSE_LIMIT && eta > 0.0 {
            let mut a = lap.matrix.to_dense() * eta;
            for i in 0..n {
                a[(i, i)] += m0[i];
            }
            Some(
                Cholesky::new(a)
                    .ok_or_else(|| Error::Numeric("Tikhonov system is not positive definite".into()))?,
            )
        } else {
            None
        };
        Ok(Self {
            lap,
            m0: m0.to_vec(),
            eta,
            chol,
        })
    }

    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.m0.len() {
            return Err(Error::Dimension(format!("response has {} entries, expected {}", y.len(), self.m0.len())));
        }
        if self.eta == 0.0 {
            return Ok(y.to_vec());
        }
        let rhs: Vec<f64> = y.iter().zip(&self.m0).map(|(a, b)| a * b).collect();
        if let Some(chol) = &self.chol {
            let x = chol.solve(&DVector::from_vec(rhs));
            return Ok(x.iter().copied().collect());
        }
        let diag: Vec<f64> = self
            .lap
            .matrix
            .diagonal()
            .iter()
            .zip(&self.m0)
            .map(|(d, m)| m + self.eta * d)
            .collect();
        let eta = self.eta;
        let m0 = &self.m0;
        let lap = &self.lap.matrix;
        conjugate_gradient(
            |v, out| {
                lap.matvec_into(v, out);
                for ((o, vi), mi) in out.iter_mut().zip(v).zip(m0) {
                    *o = eta * *o + mi * vi;
                }
            },
            &rhs,
            &diag,
            1e-12,
            10 * self.m0.len() + 100,
        )
    }
}

/// `(M₀ + ηL)⁻¹ M₀ y` by a direct solve.
pub fn tikhonov_smooth(lap: &Laplacian, m0: &[f64], y: &[f64], eta: f64) -> Result<Vec<f64>> {
    TikhonovSystem::new(lap, m0, eta)?.solve(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MassState;
    use crate::nerve::NerveComplex;

    fn path_lap(n: usize) -> Laplacian {
        let edges = (0..n - 1).map(|i| (i, i + 1)).collect();
        let c = NerveComplex::from_simplices(n, edges, vec![]).unwrap();
        let s = MassState {
            rho0: vec![1.0; n],
            rho1: vec![1.0; n - 1],
            offdiag: vec![],
            rho1_scale: 1.0,
        };
        assemble_laplacian(&c, &s, Convention::ConductanceMass, LaplacianForm::Combinatorial).unwrap()
    }

    #[test]
    fn path_closed_form_spectrum() {
        let cache = eigendecompose(&path_lap(5), &EigenOptions::default()).unwrap();
        for (k, l) in cache.eigvals.iter().enumerate() {
            let exact = 2.0 * (1.0 - (std::f64::consts::PI * k as f64 / 5.0).cos());
            assert!((l - exact).abs() < 1e-10);
        }
        assert!(cache.orthonormality_error() < 1e-12);
    }

    #[test]
    fn tikhonov_path_example_is_symmetric() {
        let lap = path_lap(5);
        let y = [0.0, 0.0, 0.5, 1.0, 1.0];
        let yh = tikhonov_smooth(&lap, &[1.0; 5], &y, 0.5).unwrap();
        assert!((yh[0] + yh[4] - 1.0).abs() < 1e-12);
        assert!((yh[2] - 0.5).abs() < 1e-12);
        assert_eq!(tikhonov_smooth(&lap, &[1.0; 5], &y, 0.0).unwrap(), y.to_vec());
    }

    #[test]
    fn tikhonov_large_eta_tends_to_mean() {
        let lap = path_lap(5);
        let y = [0.0, 0.0, 0.5, 1.0, 1.0];
        let yh = tikhonov_smooth(&lap, &[1.0; 5], &y, 1e8).unwrap();
        assert!(yh.iter().all(|v| (v - 0.5).abs() < 1e-6));
    }

    #[test]
    fn heat_identity_and_constants() {
        let cache = eigendecompose(&path_lap(6), &EigenOptions::default()).unwrap();
        let v = [1.0, -2.0, 0.5, 3.0, 0.0, 1.0];
        let out = cache.heat_apply(0.0, &v).unwrap();
        for (a, b) in out.iter().zip(v) {
            assert!((a - b).abs() < 1e-10);
        }
        let c = heat_smooth(&cache, &[2.0; 6], 3.0).unwrap();
        assert!(c.iter().all(|x| (x - 2.0).abs() < 1e-10));
        let far = cache.heat_apply(1e6, &v).unwrap();
        let mean = v.iter().sum::<f64>() / 6.0;
        assert!(far.iter().all(|x| (x - mean).abs() < 1e-10));
        assert!(cache.heat_apply(-1.0, &v).is_err());
    }

    #[test]
    fn random_walk_cache_is_mass_orthonormal() {
        let lap = path_lap(5).with_form(LaplacianForm::RandomWalk, Some(&[1.0, 2.0, 0.5, 1.0, 1.5])).unwrap();
        let cache = eigendecompose(&lap, &EigenOptions::default()).unwrap();
        assert!(cache.orthonormality_error() < 1e-12);
        assert!(cache.eigvals[0] < 1e-10);
        let x: Vec<f64> = cache.eigvecs.column(2).iter().copied().collect();
        let lx = lap.apply(&x);
        for (a, b) in lx.iter().zip(&x) {
            assert!((a - cache.eigvals[2] * b).abs() < 1e-10);
        }
    }

    #[test]
    fn disconnected_graph_has_two_zero_eigenvalues() {
        let c = NerveComplex::from_simplices(4, vec![(0, 1), (2, 3)], vec![]).unwrap();
        let s = MassState {
            rho0: vec![1.0; 4],
            rho1: vec![1.0; 2],
            offdiag: vec![],
            rho1_scale: 1.0,
        };
        let lap = assemble_laplacian(&c, &s, Convention::ConductanceMass, LaplacianForm::Combinatorial).unwrap();
        let cache = eigendecompose(&lap, &EigenOptions::default()).unwrap();
        assert_eq!(cache.eigvals.iter().filter(|&&l| l <= 1e-10).count(), 2);
    }

    #[test]
    fn count_validation() {
        let lap = path_lap(5);
        let opts = |count| EigenOptions { count, ..Default::default() };
        assert!(eigendecompose(&lap, &opts(EigenCount::Fixed(0))).is_err());
        assert!(eigendecompose(&lap, &opts(EigenCount::Fixed(6))).is_err());
        assert_eq!(eigendecompose(&lap, &opts(EigenCount::Fixed(3))).unwrap().p(), 3);
        let tf = eigendecompose(&lap, &opts(EigenCount::TraceFraction(0.5))).unwrap();
        assert!(tf.p() < 5 && tf.p() >= 1);
    }
}
