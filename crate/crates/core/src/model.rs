//! Shared domain types: point matrices, datasets, partitions, and the
//! sum-of-norms objective
//!
//! ```text
//!   f(x) = 1/2 sum_i |x_i - a_i|^2 + lambda sum_{i<j} |x_i - x_j|
//! ```
//!
//! with Euclidean norms throughout.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::union_find::DisjointSet;

/// Relative factor applied to the diameter of the iterate when no explicit
/// merge tolerance is given.
pub const DEFAULT_DELTA_FACTOR: f64 = 1e-5;

/// Dense row-major `n x d` matrix of finite coordinates, one row per point.
///
/// Used both for data and for solver iterates. Zero rows are allowed; see
/// [`Dataset`] for the non-empty variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Points {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if data.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "non-finite coordinate {} in point {}",
                data[pos],
                pos / d
            )));
        }
        Ok(Self { n, d, data })
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        Self {
            n,
            d: d.max(1),
            data: vec![0.0; n * d.max(1)],
        }
    }

    /// Builds a matrix from explicit rows; every row must have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| invalid("cannot infer dimension from zero rows"))?;
        let mut data = Vec::with_capacity(rows.len() * d);
        for row in rows {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), d, data)
    }

    /// One-dimensional convenience constructor.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Coordinate-wise sum of all rows.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.d];
        for row in self.rows() {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }

    /// Largest pairwise Euclidean distance between rows (0 for fewer than two rows).
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0_f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                best = best.max(distance(self.row(i), self.row(j)));
            }
        }
        best
    }
}

/// The clustering input: `n >= 1` points in `R^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Points", into = "Points")]
pub struct Dataset(Points);

impl Dataset {
    pub fn new(points: Points) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("dataset must contain at least one point"));
        }
        Ok(Self(points))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(Points::from_rows(rows)?)
    }

    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(Points::from_scalars(values)?)
    }

    pub fn points(&self) -> &Points {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    /// Copy of the dataset with every point shifted by `offset`.
    pub fn translated(&self, offset: &[f64]) -> Result<Self> {
        check_dim(self.dim(), offset.len())?;
        let mut pts = self.0.clone();
        for row in pts.as_mut_slice().chunks_exact_mut(offset.len()) {
            for (v, o) in row.iter_mut().zip(offset) {
                *v += o;
            }
        }
        Ok(Self(pts))
    }
}

impl TryFrom<Points> for Dataset {
    type Error = Error;

    fn try_from(points: Points) -> Result<Self> {
        Self::new(points)
    }
}

impl From<Dataset> for Points {
    fn from(ds: Dataset) -> Self {
        ds.0
    }
}

impl std::ops::Deref for Dataset {
    type Target = Points;

    fn deref(&self) -> &Points {
        &self.0
    }
}

/// Assignment of indices `0..n` to clusters.
///
/// Always canonical: cluster ids are `0..K` without gaps and increase with the
/// smallest member index, so partitions compare with `==`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    assignment: Vec<usize>,
    num_clusters: usize,
}

impl Partition {
    /// Canonicalizes arbitrary labels (any `usize` values) into a partition.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut remap = std::collections::HashMap::new();
        let assignment = labels
            .iter()
            .map(|&l| {
                let next = remap.len();
                *remap.entry(l).or_insert(next)
            })
            .collect();
        Self {
            assignment,
            num_clusters: remap.len(),
        }
    }

    /// Builds a partition from explicit member lists. Every index in `0..n`
    /// must appear exactly once.
    pub fn from_clusters<C: AsRef<[usize]>>(n: usize, clusters: &[C]) -> Result<Self> {
        let mut labels = vec![usize::MAX; n];
        for (id, members) in clusters.iter().enumerate() {
            for &i in members.as_ref() {
                if i >= n {
                    return Err(invalid(format!("index {i} out of range for n={n}")));
                }
                if labels[i] != usize::MAX {
                    return Err(invalid(format!("index {i} assigned twice")));
                }
                labels[i] = id;
            }
        }
        if let Some(i) = labels.iter().position(|&l| l == usize::MAX) {
            return Err(invalid(format!("index {i} not assigned")));
        }
        Ok(Self::from_labels(&labels))
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            assignment: (0..n).collect(),
            num_clusters: n,
        }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn cluster_of(&self, i: usize) -> usize {
        self.assignment[i]
    }

    /// Member lists, indexed by cluster id; members in increasing order.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_clusters];
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    /// True when every index of `members` carries the same cluster id.
    pub fn co_clustered(&self, members: &[usize]) -> bool {
        match members.split_first() {
            None => true,
            Some((&first, rest)) => {
                let id = self.assignment[first];
                rest.iter().all(|&i| self.assignment[i] == id)
            }
        }
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = Error;

    fn try_from(labels: Vec<usize>) -> Result<Self> {
        let p = Self::from_labels(&labels);
        if p.assignment != labels {
            return Err(invalid("partition labels are not in canonical form"));
        }
        Ok(p)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.assignment
    }
}

#[inline]
pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[inline]
pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Sum-of-norms objective at `x`.
pub fn objective(dataset: &Dataset, x: &Points, lambda: f64) -> Result<f64> {
    check_dim(dataset.len(), x.len())?;
    check_dim(dataset.dim(), x.dim())?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    let fidelity: f64 = (0..x.len())
        .map(|i| {
            let r = distance(x.row(i), dataset.point(i));
            r * r
        })
        .sum();
    let mut fusion = 0.0;
    if lambda > 0.0 {
        for i in 0..x.len() {
            for j in (i + 1)..x.len() {
                fusion += distance(x.row(i), x.row(j));
            }
        }
    }
    Ok(0.5 * fidelity + lambda * fusion)
}

/// `DEFAULT_DELTA_FACTOR` times the diameter of `x`, or times 1 when all rows coincide.
pub fn default_delta(x: &Points) -> f64 {
    let diam = x.diameter();
    DEFAULT_DELTA_FACTOR * if diam > 0.0 { diam } else { 1.0 }
}

/// Connected components of the graph joining rows closer than `delta`.
///
/// Chains count: rows 0.9·delta apart in sequence land in one cluster even when
/// the endpoints are further than `delta` apart.
pub fn extract_clusters(x: &Points, delta: f64) -> Result<Partition> {
    if !(delta > 0.0) {
        return Err(invalid(format!("delta must be positive, got {delta}")));
    }
    let n = x.len();
    let mut ds = DisjointSet::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if distance(x.row(i), x.row(j)) <= delta {
                ds.union(i, j);
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| ds.find(i)).collect();
    Ok(Partition::from_labels(&roots))
}

/// True iff every cluster of `fine` lies inside a single cluster of `coarse`.
pub fn is_refinement(fine: &Partition, coarse: &Partition) -> Result<bool> {
    check_dim(fine.len(), coarse.len())?;
    let mut image = vec![usize::MAX; fine.num_clusters()];
    for (f, c) in fine.assignment().iter().zip(coarse.assignment()) {
        match image[*f] {
            usize::MAX => image[*f] = *c,
            prev if prev != *c => return Ok(false),
            _ => {}
        }
    }
    Ok(true)
}
