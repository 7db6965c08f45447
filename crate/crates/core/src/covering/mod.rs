//! Point clouds, exact kNN coverings and vertex density surrogates.
//!
//! A [`Covering`] assigns to every sample its closed neighborhood: the sample
//! itself plus its `k` nearest other samples under the Euclidean metric. The
//! nerve, the overlap measures and every mass computation downstream consume
//! coverings through the [`SetCover`] trait, which also admits hand-built
//! set systems ([`ExplicitCover`]) for small worked configurations.

pub mod surrogate;

pub use surrogate::{
    density_surrogate, initial_vertex_masses, surrogate_registry, DensitySurrogate,
    SurrogateConfig, SurrogateInput, VertexWeights,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observed response attached to a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Response {
    Scalar(Vec<f64>),
    /// Column-major: one inner vector per response component.
    Multi(Vec<Vec<f64>>),
    Labels(Vec<String>),
}

impl Response {
    pub fn len(&self) -> usize {
        match self {
            Response::Scalar(v) => v.len(),
            Response::Multi(cols) => cols.first().map_or(0, Vec::len),
            Response::Labels(l) => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    points: Vec<f64>,
    n: usize,
    d: usize,
    pub response: Option<Response>,
    pub row_ids: Vec<String>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, response: Option<Response>) -> Result<Self> {
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::with_ids(rows, response, ids)
    }

    pub fn with_ids(
        rows: Vec<Vec<f64>>,
        response: Option<Response>,
        row_ids: Vec<String>,
    ) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::Data(format!("need at least 2 points, got {n}")));
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(Error::Data("points must have at least one coordinate".into()));
        }
        let mut points = Vec::with_capacity(n * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Data(format!(
                    "row {i} has {} coordinates, expected {d}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|x| !x.is_finite()) {
                return Err(Error::Data(format!("non-finite coordinate at row {i}, column {j}")));
            }
            points.extend_from_slice(row);
        }
        if let Some(resp) = &response {
            if resp.len() != n {
                return Err(Error::Data(format!(
                    "response length {} does not match {n} points",
                    resp.len()
                )));
            }
            if let Response::Multi(cols) = resp {
                if cols.iter().any(|c| c.len() != n) {
                    return Err(Error::Data("ragged multivariate response".into()));
                }
            }
            let finite = match resp {
                Response::Scalar(v) => v.iter().all(|x| x.is_finite()),
                Response::Multi(cols) => cols.iter().flatten().all(|x| x.is_finite()),
                Response::Labels(_) => true,
            };
            if !finite {
                return Err(Error::Data("non-finite response value".into()));
            }
        }
        if row_ids.len() != n {
            return Err(Error::Data("row id count does not match point count".into()));
        }
        Ok(Self {
            points,
            n,
            d,
            response,
            row_ids,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// Feature columns as vertex functions (one vector per coordinate).
    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.d)
            .map(|c| (0..self.n).map(|i| self.points[i * self.d + c]).collect())
            .collect()
    }
}

/// A finite set system over vertices `0..n_sets()`, each set sorted ascending.
pub trait SetCover: Sync {
    fn n_sets(&self) -> usize;
    fn set(&self, i: usize) -> &[usize];
}

/// A covering given explicitly, e.g. a textbook configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplicitCover {
    sets: Vec<Vec<usize>>,
}

impl ExplicitCover {
    pub fn new(sets: Vec<Vec<usize>>) -> Result<Self> {
        let n = sets.len();
        let mut out = Vec::with_capacity(n);
        for (i, mut s) in sets.into_iter().enumerate() {
            s.sort_unstable();
            s.dedup();
            if s.is_empty() {
                return Err(Error::Data(format!("covering set {i} is empty")));
            }
            if let Some(&bad) = s.iter().find(|&&v| v >= n) {
                return Err(Error::Data(format!(
                    "covering set {i} references element {bad} outside 0..{n}"
                )));
            }
            out.push(s);
        }
        Ok(Self { sets: out })
    }
}

impl SetCover for ExplicitCover {
    fn n_sets(&self) -> usize {
        self.sets.len()
    }

    fn set(&self, i: usize) -> &[usize] {
        &self.sets[i]
    }
}

/// Exact kNN covering with closed neighborhoods.
#[derive(Debug, Clone, PartialEq)]
pub struct Covering {
    k: usize,
    neighbors: Vec<Vec<usize>>,
    nn_dists: Vec<f64>,
}

impl Covering {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    /// Closed neighborhood of `i`, sorted ascending (contains `i`).
    pub fn neighborhood(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Distances from `i` to its 1st..k-th nearest neighbors, nondecreasing.
    pub fn nn_dists(&self, i: usize) -> &[f64] {
        &self.nn_dists[i * self.k..(i + 1) * self.k]
    }

    pub fn d1(&self, i: usize) -> f64 {
        self.nn_dists(i)[0]
    }

    pub fn dk(&self, i: usize) -> f64 {
        self.nn_dists(i)[self.k - 1]
    }
}

impl SetCover for Covering {
    fn n_sets(&self) -> usize {
        self.neighbors.len()
    }

    fn set(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }
}

/// Exact Euclidean kNN covering. Ties in distance go to the smaller index.
pub fn build_knn(dataset: &Dataset, k: usize) -> Result<Covering> {
    let n = dataset.n();
    if k == 0 || k >= n {
        return Err(Error::Parameter(format!("k must lie in 1..={}, got {k}", n - 1)));
    }
    let per_point: Vec<(Vec<usize>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (dataset.sq_dist(i, j), j))
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < cand.len() {
                cand.select_nth_unstable_by(k - 1, cmp);
                cand.truncate(k);
            }
            cand.sort_unstable_by(cmp);
            let dists = cand.iter().map(|(d2, _)| d2.sqrt()).collect();
            let mut hood: Vec<usize> = cand.iter().map(|&(_, j)| j).collect();
            hood.push(i);
            hood.sort_unstable();
            (hood, dists)
        })
        .collect();

    let mut neighbors = Vec::with_capacity(n);
    let mut nn_dists = Vec::with_capacity(n * k);
    for (hood, dists) in per_point {
        neighbors.push(hood);
        nn_dists.extend(dists);
    }
    Ok(Covering {
        k,
        neighbors,
        nn_dists,
    })
}

/// Median of all pairwise distances. Above 3000 points a deterministic
/// strided subsample of 3000 points is used.
pub fn median_pairwise_distance(dataset: &Dataset) -> f64 {
    let n = dataset.n();
    let stride = n.div_ceil(3000).max(1);
    let idx: Vec<usize> = (0..n).step_by(stride).collect();
    let mut d: Vec<f64> = idx
        .iter()
        .enumerate()
        .flat_map(|(a, &i)| idx[a + 1..].iter().map(move |&j| (i, j)))
        .map(|(i, j)| dataset.sq_dist(i, j).sqrt())
        .collect();
    if d.is_empty() {
        return 0.0;
    }
    let mid = d.len() / 2;
    d.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    if d.len() % 2 == 1 {
        d[mid]
    } else {
        let hi = d[mid];
        let lo = d[..mid].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// Sum of `weights[s]` over the intersection of the given sorted sets.
pub fn intersection_mass(sets: &[&[usize]], weights: &[f64]) -> f64 {
    let mut total = 0.0;
    for_each_common(sets, |s| total += weights[s]);
    total
}

pub fn intersection(sets: &[&[usize]]) -> Vec<usize> {
    let mut out = Vec::new();
    for_each_common(sets, |s| out.push(s));
    out
}

fn for_each_common(sets: &[&[usize]], mut f: impl FnMut(usize)) {
    let Some((first, rest)) = sets.split_first() else {
        return;
    };
    let mut cursors = vec![0usize; rest.len()];
    'outer: for &x in first.iter() {
        for (c, set) in cursors.iter_mut().zip(rest) {
            while *c < set.len() && set[*c] < x {
                *c += 1;
            }
            if *c == set.len() {
                return;
            }
            if set[*c] != x {
                continue 'outer;
            }
        }
        f(x);
    }
}
