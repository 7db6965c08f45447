//! Nerve complexes of coverings and their signed boundary operators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covering::SetCover;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NerveComplex {
    pub n_vertices: usize,
    /// `(i, j)` with `i < j`, lexicographically sorted.
    pub edges: Vec<(usize, usize)>,
    /// `[i, j, k]` with `i < j < k`, lexicographically sorted.
    pub triangles: Vec<[usize; 3]>,
    pub max_dim: usize,
}

impl NerveComplex {
    /// Builds a complex from explicit simplices, checking closure.
    pub fn from_simplices(
        n_vertices: usize,
        edges: Vec<(usize, usize)>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Self> {
        let mut edges: Vec<(usize, usize)> = edges
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        if let Some(&(a, b)) = edges.iter().find(|&&(a, b)| a == b || b >= n_vertices) {
            return Err(Error::Data(format!("invalid edge ({a}, {b})")));
        }
        let mut triangles: Vec<[usize; 3]> = triangles
            .into_iter()
            .map(|mut t| {
                t.sort_unstable();
                t
            })
            .collect();
        triangles.sort_unstable();
        triangles.dedup();
        let complex = Self {
            n_vertices,
            edges,
            max_dim: if triangles.is_empty() { 1 } else { 2 },
            triangles,
        };
        for t in &complex.triangles {
            if t[0] == t[1] || t[1] == t[2] {
                return Err(Error::Data(format!("degenerate triangle {t:?}")));
            }
            for (a, b) in triangle_edges(t) {
                if complex.edge_id(a, b).is_none() {
                    return Err(Error::Data(format!(
                        "triangle {t:?} is missing its edge ({a}, {b})"
                    )));
                }
            }
        }
        Ok(complex)
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Ordinal of edge `{i, j}` (either orientation).
    pub fn edge_id(&self, i: usize, j: usize) -> Option<usize> {
        let key = (i.min(j), i.max(j));
        self.edges.binary_search(&key).ok()
    }

    /// Edge ordinals of the triangle's sides `[ij, ik, jk]`.
    pub fn triangle_edge_ids(&self, t: &[usize; 3]) -> [usize; 3] {
        let id = |a, b| self.edge_id(a, b).expect("closed complex");
        [id(t[0], t[1]), id(t[0], t[2]), id(t[1], t[2])]
    }

    /// Connected components of the 1-skeleton as a label per vertex.
    pub fn components(&self) -> Vec<usize> {
        let mut parent: Vec<usize> = (0..self.n_vertices).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &(a, b) in &self.edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut label = vec![usize::MAX; self.n_vertices];
        let mut next = 0;
        for v in 0..self.n_vertices {
            let r = find(&mut parent, v);
            if label[r] == usize::MAX {
                label[r] = next;
                next += 1;
            }
            label[v] = label[r];
        }
        label
    }

    pub fn n_components(&self) -> usize {
        self.components().into_iter().max().map_or(0, |m| m + 1)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

fn triangle_edges(t: &[usize; 3]) -> [(usize, usize); 3] {
    [(t[0], t[1]), (t[0], t[2]), (t[1], t[2])]
}

/// The nerve of a covering up to dimension `max_dim` (1 or 2).
///
/// A pair (triple) of covering sets spans an edge (triangle) exactly when the
/// sets share an element, so simplices are enumerated from the inverse
/// membership lists: every subset of the sets containing a given element is
/// a simplex, and every simplex arises this way.
pub fn build_nerve<C: SetCover + ?Sized>(cover: &C, max_dim: usize) -> Result<NerveComplex> {
    if !(1..=2).contains(&max_dim) {
        return Err(Error::Dimension(format!("max_dim must be 1 or 2, got {max_dim}")));
    }
    let n = cover.n_sets();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &s in cover.set(i) {
            members[s].push(i);
        }
    }

    let mut edges: Vec<(usize, usize)> = members
        .par_iter()
        .flat_map_iter(|m| {
            (0..m.len()).flat_map(move |a| (a + 1..m.len()).map(move |b| (m[a], m[b])))
        })
        .collect();
    edges.par_sort_unstable();
    edges.dedup();

    let mut triangles: Vec<[usize; 3]> = Vec::new();
    if max_dim == 2 {
        triangles = members
            .par_iter()
            .flat_map_iter(|m| {
                (0..m.len()).flat_map(move |a| {
                    (a + 1..m.len())
                        .flat_map(move |b| (b + 1..m.len()).map(move |c| [m[a], m[b], m[c]]))
                })
            })
            .collect();
        triangles.par_sort_unstable();
        triangles.dedup();
    }

    Ok(NerveComplex {
        n_vertices: n,
        edges,
        triangles,
        max_dim,
    })
}

/// Signed incidence matrix, stored by rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryOperator {
    pub p: usize,
    pub n_rows: usize,
    pub n_cols: usize,
    /// Row `r` lists `(column, sign)` pairs sorted by column.
    pub rows: Vec<Vec<(usize, i8)>>,
}

impl BoundaryOperator {
    /// Integer product `self · rhs`, as sparse rows with zeros dropped.
    pub fn product(&self, rhs: &BoundaryOperator) -> Result<Vec<Vec<(usize, i64)>>> {
        if self.n_cols != rhs.n_rows {
            return Err(Error::Dimension(format!(
                "cannot compose {}x{} with {}x{}",
                self.n_rows, self.n_cols, rhs.n_rows, rhs.n_cols
            )));
        }
        Ok(self
            .rows
            .iter()
            .map(|row| {
                let mut acc: Vec<(usize, i64)> = Vec::new();
                for &(mid, s) in row {
                    for &(col, t) in &rhs.rows[mid] {
                        acc.push((col, s as i64 * t as i64));
                    }
                }
                acc.sort_unstable_by_key(|x| x.0);
                let mut merged: Vec<(usize, i64)> = Vec::new();
                for (c, v) in acc {
                    match merged.last_mut() {
                        Some(last) if last.0 == c => last.1 += v,
                        _ => merged.push((c, v)),
                    }
                }
                merged.retain(|x| x.1 != 0);
                merged
            })
            .collect())
    }

    pub fn to_dense(&self) -> Vec<Vec<i8>> {
        self.rows
            .iter()
            .map(|row| {
                let mut d = vec![0i8; self.n_cols];
                for &(c, s) in row {
                    d[c] = s;
                }
                d
            })
            .collect()
    }
}

/// `p = 1`: edges × vertices, row `(i, j)` has `−1` at `i` and `+1` at `j`.
/// `p = 2`: triangles × edges, row `[i, j, k]` is `[j,k] − [i,k] + [i,j]`.
pub fn boundary_matrix(complex: &NerveComplex, p: usize) -> Result<BoundaryOperator> {
    match p {
        1 => Ok(BoundaryOperator {
            p,
            n_rows: complex.n_edges(),
            n_cols: complex.n_vertices,
            rows: complex
                .edges
                .iter()
                .map(|&(i, j)| vec![(i, -1), (j, 1)])
                .collect(),
        }),
        2 => {
            if complex.max_dim < 2 {
                return Err(Error::Dimension(
                    "complex was built without triangles (max_dim = 1)".into(),
                ));
            }
            Ok(BoundaryOperator {
                p,
                n_rows: complex.triangles.len(),
                n_cols: complex.n_edges(),
                rows: complex
                    .triangles
                    .iter()
                    .map(|t| {
                        let [ij, ik, jk] = complex.triangle_edge_ids(t);
                        let mut row = vec![(ij, 1i8), (ik, -1), (jk, 1)];
                        row.sort_unstable_by_key(|x| x.0);
                        row
                    })
                    .collect(),
            })
        }
        _ => Err(Error::Dimension(format!("boundary dimension must be 1 or 2, got {p}"))),
    }
}
