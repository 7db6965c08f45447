//! Overlap measures and the wedge-Gram Riemannian structure on a nerve.
//!
//! Indicator functions of pairwise neighborhood intersections live in
//! `L²(X, μ)`; their inner products are intersection measures. The squared
//! norm of an edge is its pairwise overlap, the inner product of two edges at
//! a shared apex is the triple overlap, and areas follow from 2×2 Gram
//! determinants.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::covering::{intersection_mass, SetCover};
use crate::error::{Error, Result};
use crate::nerve::NerveComplex;

/// Additive vertex measure `μ(A) = Σ_{x∈A} w(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    pub vertex_weights: Vec<f64>,
}

impl Measure {
    pub fn new(vertex_weights: Vec<f64>) -> Result<Self> {
        if vertex_weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::Data("measure weights must be positive".into()));
        }
        Ok(Self { vertex_weights })
    }

    pub fn uniform(n: usize, w: f64) -> Self {
        Self {
            vertex_weights: vec![w; n],
        }
    }
}

/// `μ(U_a ∩ U_b ∩ …)` over the covering sets indexed by `vertex_set`.
pub fn overlap_measure<C: SetCover + ?Sized>(cover: &C, measure: &Measure, vertex_set: &[usize]) -> f64 {
    let sets: Vec<&[usize]> = vertex_set.iter().map(|&v| cover.set(v)).collect();
    intersection_mass(&sets, &measure.vertex_weights)
}

/// Unnormalized edge masses: `ρ₀` summed over each pairwise intersection.
pub fn edge_intersection_masses<C: SetCover + ?Sized>(
    cover: &C,
    rho0: &[f64],
    complex: &NerveComplex,
) -> Vec<f64> {
    complex
        .edges
        .iter()
        .map(|&(i, j)| intersection_mass(&[cover.set(i), cover.set(j)], rho0))
        .collect()
}

/// Edge masses normalized to mean one (`Σρ₁ = m_E`).
pub fn edge_masses<C: SetCover + ?Sized>(cover: &C, rho0: &[f64], complex: &NerveComplex) -> Vec<f64> {
    let mut m = edge_intersection_masses(cover, rho0, complex);
    normalize_mean_one(&mut m);
    m
}

/// Unnormalized triple-intersection mass of each triangle.
pub fn triangle_intersection_masses<C: SetCover + ?Sized>(
    cover: &C,
    rho0: &[f64],
    complex: &NerveComplex,
) -> Vec<f64> {
    complex
        .triangles
        .iter()
        .map(|t| intersection_mass(&[cover.set(t[0]), cover.set(t[1]), cover.set(t[2])], rho0))
        .collect()
}

pub(crate) fn normalize_mean_one(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 1.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let c = if mean > 0.0 { 1.0 / mean } else { 1.0 };
    v.iter_mut().for_each(|x| *x *= c);
    c
}

fn other_endpoint(apex: usize, edge: (usize, usize)) -> Result<usize> {
    match edge {
        (a, b) if a == apex && b != apex => Ok(b),
        (a, b) if b == apex && a != apex => Ok(a),
        _ => Err(Error::Usage(format!("edge {edge:?} is not incident to apex {apex}"))),
    }
}

/// `⟨e_{αβ}, e_{αγ}⟩` at apex `α`, i.e. `μ(U_α ∩ U_β ∩ U_γ)`.
pub fn gram_inner<C: SetCover + ?Sized>(
    cover: &C,
    measure: &Measure,
    apex: usize,
    edge_a: (usize, usize),
    edge_b: (usize, usize),
) -> Result<f64> {
    let beta = other_endpoint(apex, edge_a)?;
    let gamma = other_endpoint(apex, edge_b)?;
    Ok(if beta == gamma {
        overlap_measure(cover, measure, &[apex, beta])
    } else {
        overlap_measure(cover, measure, &[apex, beta, gamma])
    })
}

/// Cosine of the angle between two edges at their shared apex, in `[0, 1]`.
pub fn edge_angle_cos<C: SetCover + ?Sized>(
    cover: &C,
    measure: &Measure,
    apex: usize,
    edge_a: (usize, usize),
    edge_b: (usize, usize),
) -> Result<f64> {
    let na = gram_inner(cover, measure, apex, edge_a, edge_a)?;
    let nb = gram_inner(cover, measure, apex, edge_b, edge_b)?;
    if na <= 0.0 || nb <= 0.0 {
        return Err(Error::Degenerate(format!(
            "edge {edge_a:?} or {edge_b:?} has zero overlap at apex {apex}"
        )));
    }
    let ip = gram_inner(cover, measure, apex, edge_a, edge_b)?;
    Ok((ip / (na * nb).sqrt()).clamp(0.0, 1.0))
}

/// Triangle area from the Gram determinant at the lowest-index vertex.
pub fn triangle_area<C: SetCover + ?Sized>(cover: &C, measure: &Measure, triangle: [usize; 3]) -> f64 {
    let mut t = triangle;
    t.sort_unstable();
    let [a, b, c] = t;
    let ab = overlap_measure(cover, measure, &[a, b]);
    let ac = overlap_measure(cover, measure, &[a, c]);
    let abc = overlap_measure(cover, measure, &[a, b, c]);
    0.5 * (ab * ac - abc * abc).max(0.0).sqrt()
}

/// Wedge-Gram inner product of two oriented p-simplices `[apex, σ…]` and
/// `[apex, τ…]` in the star of `apex`: `det(μ(U_apex ∩ U_σᵢ ∩ U_τⱼ))`.
pub fn gram_determinant<C: SetCover + ?Sized>(
    cover: &C,
    measure: &Measure,
    apex: usize,
    sigma: &[usize],
    tau: &[usize],
) -> Result<f64> {
    if sigma.len() != tau.len() || sigma.is_empty() {
        return Err(Error::Usage("simplices must have equal positive dimension".into()));
    }
    let p = sigma.len();
    let g = DMatrix::from_fn(p, p, |i, j| {
        if sigma[i] == tau[j] {
            overlap_measure(cover, measure, &[apex, sigma[i]])
        } else {
            overlap_measure(cover, measure, &[apex, sigma[i], tau[j]])
        }
    });
    Ok(g.determinant())
}

/// An off-diagonal entry `M₁[a, b] = M₁[b, a]` between two edges that share
/// a vertex inside `triangle`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffDiagEntry {
    pub a: usize,
    pub b: usize,
    pub triangle: usize,
    pub value: f64,
}

/// Off-diagonal entries of `M₁`: per triangle, its three edge pairs carry the
/// triple-intersection mass, optionally multiplied by a per-triangle penalty.
///
/// An edge pair sharing a vertex determines its triangle, so no entry ever
/// receives contributions from two triangles.
pub fn assemble_offdiag<C: SetCover + ?Sized>(
    complex: &NerveComplex,
    cover: &C,
    rho0: &[f64],
    penalties: Option<&[f64]>,
) -> Result<Vec<OffDiagEntry>> {
    if complex.max_dim < 2 && !complex.triangles.is_empty() {
        return Err(Error::Dimension("inconsistent complex dimension".into()));
    }
    if let Some(p) = penalties {
        if p.len() != complex.triangles.len() {
            return Err(Error::Dimension("one penalty per triangle required".into()));
        }
    }
    let triple = triangle_intersection_masses(cover, rho0, complex);
    let mut out = Vec::with_capacity(3 * complex.triangles.len());
    for (ti, t) in complex.triangles.iter().enumerate() {
        let v = triple[ti] * penalties.map_or(1.0, |p| p[ti]);
        let [ij, ik, jk] = complex.triangle_edge_ids(t);
        for (a, b) in [(ij, ik), (ij, jk), (ik, jk)] {
            out.push(OffDiagEntry {
                a: a.min(b),
                b: a.max(b),
                triangle: ti,
                value: v,
            });
        }
    }
    out.sort_by_key(|e| (e.a, e.b));
    Ok(out)
}

/// Vertex and edge masses of the current Riemannian structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassState {
    pub rho0: Vec<f64>,
    /// Diagonal of `M₁`.
    pub rho1: Vec<f64>,
    pub offdiag: Vec<OffDiagEntry>,
    /// Factor applied to the raw intersection masses to reach mean one.
    pub rho1_scale: f64,
}

impl MassState {
    /// Intersection-mass structure under `rho0`, with the diagonal normalized
    /// to mean one and the off-diagonal entries scaled by the same factor.
    pub fn from_intersections<C: SetCover + ?Sized>(
        cover: &C,
        complex: &NerveComplex,
        rho0: Vec<f64>,
    ) -> Result<Self> {
        let mut rho1 = edge_intersection_masses(cover, &rho0, complex);
        if let Some(e) = rho1.iter().position(|&m| !(m > 0.0)) {
            return Err(Error::Data(format!(
                "edge {:?} has empty neighborhood intersection",
                complex.edges[e]
            )));
        }
        let mut offdiag = if complex.triangles.is_empty() {
            Vec::new()
        } else {
            assemble_offdiag(complex, cover, &rho0, None)?
        };
        let scale = normalize_mean_one(&mut rho1);
        offdiag.iter_mut().for_each(|e| e.value *= scale);
        Ok(Self {
            rho0,
            rho1,
            offdiag,
            rho1_scale: scale,
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        let d: f64 = self.rho1.iter().map(|x| x * x).sum();
        let o: f64 = self.offdiag.iter().map(|e| e.value * e.value).sum();
        (d + 2.0 * o).sqrt()
    }

    /// Scales diagonal and off-diagonal parts of `M₁` together.
    pub fn scale_m1(&mut self, c: f64) {
        self.rho1.iter_mut().for_each(|x| *x *= c);
        self.offdiag.iter_mut().for_each(|e| e.value *= c);
    }

    /// `M₁` restricted to the edges incident to `v`, in edge-ordinal order.
    pub fn star_block(&self, complex: &NerveComplex, v: usize) -> (Vec<usize>, DMatrix<f64>) {
        let star: Vec<usize> = complex
            .edges
            .iter()
            .enumerate()
            .filter(|(_, &(a, b))| a == v || b == v)
            .map(|(e, _)| e)
            .collect();
        let mut m = DMatrix::zeros(star.len(), star.len());
        for (r, &e) in star.iter().enumerate() {
            m[(r, r)] = self.rho1[e];
        }
        for entry in &self.offdiag {
            if let (Ok(r), Ok(c)) = (star.binary_search(&entry.a), star.binary_search(&entry.b)) {
                m[(r, c)] = entry.value;
                m[(c, r)] = entry.value;
            }
        }
        (star, m)
    }

    /// Full `M₁` as a dense matrix.
    pub fn m1_dense(&self) -> DMatrix<f64> {
        let m = self.rho1.len();
        let mut out = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.rho1));
        for e in &self.offdiag {
            out[(e.a, e.b)] = e.value;
            out[(e.b, e.a)] = e.value;
        }
        debug_assert_eq!(out.nrows(), m);
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}
