//! Weighted vertex Laplacian assembled from the mass state.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::metric::MassState;
use crate::nerve::NerveComplex;

/// Largest edge count for which off-diagonal `M₁` entries are inverted densely.
pub const DENSE_M1_LIMIT: usize = 1500;
const PRUNE_RATIO: f64 = 1e-6;
const COND_LIMIT: f64 = 1e8;
const RIDGE_RATIO: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// Edge conductance equals edge mass: heavy edges couple strongly.
    #[default]
    ConductanceMass,
    /// Edge conductance is the inverse of the mass matrix `M₁`.
    ConductanceInverseMass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianForm {
    #[default]
    Combinatorial,
    /// `M₀⁻¹ Bᵀ W B`, handled as a generalized problem against `M₀`.
    RandomWalk,
}

#[derive(Debug, Clone)]
pub struct Laplacian {
    /// Symmetric part `Bᵀ W B`.
    pub matrix: CsrMatrix,
    pub convention: Convention,
    pub form: LaplacianForm,
    /// Diagonal of `M₀`; present only for the random-walk form.
    pub vertex_mass: Option<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl Laplacian {
    pub fn n(&self) -> usize {
        self.matrix.n_rows()
    }

    /// Same operator with a different vertex-mass form.
    pub fn with_form(&self, form: LaplacianForm, vertex_mass: Option<&[f64]>) -> Result<Self> {
        let vertex_mass = match form {
            LaplacianForm::Combinatorial => None,
            LaplacianForm::RandomWalk => {
                let m = vertex_mass.ok_or_else(|| {
                    Error::Usage("random-walk form needs vertex masses".into())
                })?;
                check_vertex_mass(m, self.n())?;
                Some(m.to_vec())
            }
        };
        Ok(Self {
            matrix: self.matrix.clone(),
            convention: self.convention,
            form,
            vertex_mass,
            warnings: self.warnings.clone(),
        })
    }

    /// Applies the operator in its declared form.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = self.matrix.matvec(v);
        if let Some(m) = &self.vertex_mass {
            out.iter_mut().zip(m).for_each(|(o, mi)| *o /= mi);
        }
        out
    }

    /// Dirichlet energy `vᵀ Bᵀ W B v`.
    pub fn energy(&self, v: &[f64]) -> f64 {
        crate::linalg::dot(v, &self.matrix.matvec(v))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = self.matrix.to_dense();
        if let Some(m) = &self.vertex_mass {
            for r in 0..d.nrows() {
                let s = 1.0 / m[r];
                d.row_mut(r).iter_mut().for_each(|x| *x *= s);
            }
        }
        d
    }
}

fn check_vertex_mass(m: &[f64], n: usize) -> Result<()> {
    if m.len() != n {
        return Err(Error::Dimension(format!("{} vertex masses for {n} vertices", m.len())));
    }
    if m.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Numeric("vertex masses must be positive and finite".into()));
    }
    Ok(())
}

/// Builds `Bᵀ W B` from edge conductances, skipping zero weights.
pub fn weighted_graph_laplacian(n: usize, edges: &[(usize, usize)], weights: &[f64]) -> CsrMatrix {
    let mut t = Vec::with_capacity(4 * edges.len() + n);
    for v in 0..n {
        t.push((v, v, 0.0));
    }
    for (&(i, j), &w) in edges.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        t.extend_from_slice(&[(i, i, w), (j, j, w), (i, j, -w), (j, i, -w)]);
    }
    CsrMatrix::from_triplets(n, n, &t)
}

pub fn assemble_laplacian(
    complex: &NerveComplex,
    mass: &MassState,
    convention: Convention,
    form: LaplacianForm,
) -> Result<Laplacian> {
    let n = complex.n_vertices;
    let m = complex.n_edges();
    if mass.rho1.len() != m {
        return Err(Error::Dimension(format!("{} edge masses for {m} edges", mass.rho1.len())));
    }
    if mass.rho0.len() != n {
        return Err(Error::Dimension(format!("{} vertex masses for {n} vertices", mass.rho0.len())));
    }
    let mut warnings = Vec::new();
    let vertex_mass = match form {
        LaplacianForm::Combinatorial => None,
        LaplacianForm::RandomWalk => {
            check_vertex_mass(&mass.rho0, n)?;
            Some(mass.rho0.clone())
        }
    };
    if m == 0 {
        warnings.push("complex has no edges; Laplacian is identically zero".to_string());
        log::warn!("complex has no edges; Laplacian is identically zero");
        return Ok(Laplacian {
            matrix: CsrMatrix::zeros(n),
            convention,
            form,
            vertex_mass,
            warnings,
        });
    }
    if mass.rho1.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite edge mass".into()));
    }

    let matrix = match convention {
        Convention::ConductanceMass => {
            if let Some(e) = mass.rho1.iter().position(|&x| !(x > 0.0)) {
                return Err(Error::Numeric(format!(
                    "edge {:?} has non-positive mass {}",
                    complex.edges[e], mass.rho1[e]
                )));
            }
            weighted_graph_laplacian(n, &complex.edges, &mass.rho1)
        }
        Convention::ConductanceInverseMass => inverse_mass_laplacian(complex, mass, &mut warnings)?,
    };
    Ok(Laplacian {
        matrix,
        convention,
        form,
        vertex_mass,
        warnings,
    })
}

fn inverse_mass_laplacian(
    complex: &NerveComplex,
    mass: &MassState,
    warnings: &mut Vec<String>,
) -> Result<CsrMatrix> {
    let n = complex.n_vertices;
    let max_mass = mass.rho1.iter().cloned().fold(0.0, f64::max);
    if !(max_mass > 0.0) {
        return Err(Error::Numeric("all edge masses are non-positive".into()));
    }
    let kept: Vec<usize> = (0..mass.rho1.len())
        .filter(|&e| mass.rho1[e] >= PRUNE_RATIO * max_mass)
        .collect();
    let pruned = mass.rho1.len() - kept.len();
    if pruned > 0 {
        let msg = format!("pruned {pruned} edges with mass below {PRUNE_RATIO:e} of the maximum");
        log::info!("{msg}");
        warnings.push(msg);
    }
    let fro = mass.frobenius_norm();

    let use_dense = !mass.offdiag.is_empty() && kept.len() <= DENSE_M1_LIMIT;
    if !mass.offdiag.is_empty() && !use_dense {
        warnings.push(format!(
            "{} edges exceed the dense M1 limit {DENSE_M1_LIMIT}; off-diagonal entries ignored",
            kept.len()
        ));
    }

    if !use_dense {
        let kept_mass: Vec<f64> = kept.iter().map(|&e| mass.rho1[e]).collect();
        let lo = kept_mass.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = kept_mass.iter().cloned().fold(0.0, f64::max);
        let ridge = if hi / lo > COND_LIMIT {
            warnings.push(format!("M1 condition number {:.3e} exceeds {COND_LIMIT:e}; ridge added", hi / lo));
            RIDGE_RATIO * fro
        } else {
            0.0
        };
        let mut w = vec![0.0; mass.rho1.len()];
        for &e in &kept {
            w[e] = 1.0 / (mass.rho1[e] + ridge);
        }
        return Ok(weighted_graph_laplacian(n, &complex.edges, &w));
    }

    // Dense M₁ on the kept edges, inverted through its eigendecomposition.
    let idx = |e: usize| kept.binary_search(&e).ok();
    let k = kept.len();
    let mut m1 = DMatrix::<f64>::zeros(k, k);
    for (r, &e) in kept.iter().enumerate() {
        m1[(r, r)] = mass.rho1[e];
    }
    for entry in &mass.offdiag {
        if let (Some(a), Some(b)) = (idx(entry.a), idx(entry.b)) {
            m1[(a, b)] = entry.value;
            m1[(b, a)] = entry.value;
        }
    }
    let eig = SymmetricEigen::new(m1);
    let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let lmax = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut shift = 0.0;
    if lmin <= 0.0 {
        shift = -lmin + RIDGE_RATIO * fro;
        warnings.push(format!("M1 not positive definite (min eigenvalue {lmin:.3e}); shifted"));
    } else if lmax / lmin > COND_LIMIT {
        shift = RIDGE_RATIO * fro;
        warnings.push(format!("M1 condition number {:.3e} exceeds {COND_LIMIT:e}; ridge added", lmax / lmin));
    }
    let q = &eig.eigenvectors;
    let inv_diag: Vec<f64> = eig.eigenvalues.iter().map(|l| 1.0 / (l + shift)).collect();
    let mut scaled = q.clone();
    for (c, s) in inv_diag.iter().enumerate() {
        scaled.column_mut(c).iter_mut().for_each(|x| *x *= s);
    }
    let minv = &scaled * q.transpose();

    // L = B₁ᵀ M₁⁻¹ B₁ with B₁ row e = -e_i + e_j.
    let mut t = Vec::with_capacity(4 * k * k);
    for (a, &ea) in kept.iter().enumerate() {
        let (i, j) = complex.edges[ea];
        for (b, &eb) in kept.iter().enumerate() {
            let w = minv[(a, b)];
            if w == 0.0 {
                continue;
            }
            let (u, v) = complex.edges[eb];
            t.extend_from_slice(&[(i, u, w), (i, v, -w), (j, u, -w), (j, v, w)]);
        }
    }
    for v in 0..n {
        t.push((v, v, 0.0));
    }
    let raw = CsrMatrix::from_triplets(n, n, &t);
    // Symmetrize away rounding asymmetry.
    let dense = raw.to_dense();
    let sym = (&dense + dense.transpose()) * 0.5;
    Ok(CsrMatrix::from_dense(&sym))
}
