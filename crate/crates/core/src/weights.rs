//! Fusion weights `w_ij` over pairs of slices.
//!
//! Slice indices are 0-based throughout the library; `i < j` in every entry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{pairwise_frobenius_distances, GraphTensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Sparse, strictly positive weights on slice pairs, sorted by `(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    num_slices: usize,
    entries: Vec<WeightEntry>,
}

impl FusionWeights {
    /// Validates and normalizes a list of `(i, j, w)` triples.
    ///
    /// Pairs may be given in either orientation; zero weights are dropped.
    /// Duplicate pairs, self pairs, out-of-range indices and negative or
    /// non-finite weights are errors.
    pub fn from_entries(
        num_slices: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut out = Vec::new();
        for (a, b, weight) in entries {
            let (i, j) = (a.min(b), a.max(b));
            if i == j || j >= num_slices || !weight.is_finite() || weight < 0.0 {
                return Err(Error::InvalidWeight { i: a, j: b, weight });
            }
            if weight > 0.0 {
                out.push(WeightEntry { i, j, weight });
            }
        }
        out.sort_by_key(|e| (e.i, e.j));
        if let Some(dup) = out
            .windows(2)
            .find(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j))
        {
            return Err(Error::InvalidWeight {
                i: dup[1].i,
                j: dup[1].j,
                weight: dup[1].weight,
            });
        }
        Ok(FusionWeights {
            num_slices,
            entries: out,
        })
    }

    /// Unit weight on every pair.
    pub fn uniform(num_slices: usize) -> Self {
        let entries = (0..num_slices)
            .flat_map(|i| ((i + 1)..num_slices).map(move |j| WeightEntry { i, j, weight: 1.0 }))
            .collect();
        FusionWeights {
            num_slices,
            entries,
        }
    }

    pub fn num_slices(&self) -> usize {
        self.num_slices
    }

    pub fn entries(&self) -> &[WeightEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let key = (i.min(j), i.max(j));
        self.entries
            .binary_search_by_key(&key, |e| (e.i, e.j))
            .ok()
            .map(|k| self.entries[k].weight)
    }

    /// Connected components of the support graph: `(count, component id per slice)`.
    pub fn components(&self) -> (usize, Vec<usize>) {
        let mut uf = UnionFind::new(self.num_slices);
        for e in &self.entries {
            uf.union(e.i, e.j);
        }
        uf.labels()
    }

    pub fn is_connected(&self) -> bool {
        self.components().0 <= 1
    }
}

/// Free-function form of [`FusionWeights::is_connected`].
pub fn is_connected(w: &FusionWeights) -> bool {
    w.is_connected()
}

/// Bandwidth of the RBF kernel `exp(-φ d²)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RbfScale {
    /// `φ = 1 / median(d²)` over all pairs, or 1 when that median is zero.
    #[default]
    Auto,
    Fixed(f64),
}

/// Truncated RBF weights: `exp(-φ d_ij²)` kept for `k`-nearest-neighbour pairs.
///
/// A pair survives if either endpoint lists the other among its `k` nearest
/// slices (distance ties broken by index).
pub fn rbf_weights(x: &GraphTensor, scale: RbfScale, k: usize) -> Result<FusionWeights> {
    let t = x.num_slices();
    if k == 0 || k + 1 > t {
        return Err(Error::InvalidK {
            k,
            max: t.saturating_sub(1),
        });
    }
    let dist = pairwise_frobenius_distances(x);
    let phi = match scale {
        RbfScale::Fixed(phi) if phi > 0.0 && phi.is_finite() => phi,
        RbfScale::Fixed(phi) => {
            return Err(Error::InvalidParameter(format!(
                "RBF scale must be positive, got {phi}"
            )))
        }
        RbfScale::Auto => {
            let mut sq: Vec<f64> = (0..t)
                .flat_map(|i| ((i + 1)..t).map(move |j| (i, j)))
                .map(|(i, j)| dist[(i, j)] * dist[(i, j)])
                .collect();
            let med = median(&mut sq);
            if med > 0.0 {
                1.0 / med
            } else {
                1.0
            }
        }
    };

    let mut keep = vec![false; t * t];
    for i in 0..t {
        let mut order: Vec<usize> = (0..t).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| dist[(i, a)].total_cmp(&dist[(i, b)]).then(a.cmp(&b)));
        for &j in order.iter().take(k) {
            keep[i.min(j) * t + i.max(j)] = true;
        }
    }
    let mut entries = Vec::new();
    for i in 0..t {
        for j in (i + 1)..t {
            if keep[i * t + j] {
                let d = dist[(i, j)];
                entries.push((i, j, (-phi * d * d).exp()));
            }
        }
    }
    FusionWeights::from_entries(t, entries)
}

/// Unit weights between temporally adjacent slices only.
pub fn chain_weights(num_slices: usize) -> Result<FusionWeights> {
    if num_slices < 2 {
        return Err(Error::InvalidT(num_slices));
    }
    FusionWeights::from_entries(num_slices, (0..num_slices - 1).map(|t| (t, t + 1, 1.0)))
}

/// `alpha · a + (1 − alpha) · b` on the union of both supports.
pub fn hybrid_weights(a: &FusionWeights, b: &FusionWeights, alpha: f64) -> Result<FusionWeights> {
    if a.num_slices != b.num_slices {
        return Err(Error::SizeMismatch {
            left: a.num_slices,
            right: b.num_slices,
        });
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    if alpha == 1.0 {
        return Ok(a.clone());
    }
    if alpha == 0.0 {
        return Ok(b.clone());
    }
    let mut merged: Vec<(usize, usize, f64)> = Vec::new();
    let (mut ia, mut ib) = (0, 0);
    let (ea, eb) = (&a.entries, &b.entries);
    while ia < ea.len() || ib < eb.len() {
        let ka = ea.get(ia).map(|e| (e.i, e.j));
        let kb = eb.get(ib).map(|e| (e.i, e.j));
        let (key, wa, wb) = match (ka, kb) {
            (Some(x), Some(y)) if x == y => {
                ia += 1;
                ib += 1;
                (x, ea[ia - 1].weight, eb[ib - 1].weight)
            }
            (Some(x), Some(y)) if x < y => {
                ia += 1;
                (x, ea[ia - 1].weight, 0.0)
            }
            (Some(x), None) => {
                ia += 1;
                (x, ea[ia - 1].weight, 0.0)
            }
            (_, Some(y)) => {
                ib += 1;
                (y, 0.0, eb[ib - 1].weight)
            }
            (None, None) => unreachable!(),
        };
        merged.push((key.0, key.1, alpha * wa + (1.0 - alpha) * wb));
    }
    FusionWeights::from_entries(a.num_slices, merged)
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Disjoint sets over `0..n` with path halving.
#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    /// Joins the sets of `a` and `b`; returns false if they were already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // Keep the smaller index as root so labels are stable.
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.parent[hi] = lo;
        true
    }

    /// Component count and 0-based component ids in order of first appearance.
    pub(crate) fn labels(&mut self) -> (usize, Vec<usize>) {
        let n = self.parent.len();
        let mut id_of_root = vec![usize::MAX; n];
        let mut next = 0;
        let mut labels = Vec::with_capacity(n);
        for a in 0..n {
            let r = self.find(a);
            if id_of_root[r] == usize::MAX {
                id_of_root[r] = next;
                next += 1;
            }
            labels.push(id_of_root[r]);
        }
        (next, labels)
    }
}
