//! The `p × p × T` graph tensor and its slicewise matricization.
//!
//! A [`GraphTensor`] holds `T` adjacency matrices over a shared node set. The
//! solver works on a [`StackedMatrix`], in which every slice is flattened into
//! one row. Two layouts exist:
//!
//! * [`StorageMode::Full`] keeps all `p²` entries (column-major within a slice).
//! * [`StorageMode::Compact`] keeps the strictly-lower triangle of a symmetric,
//!   zero-diagonal slice, `p(p-1)/2` entries in row-major order
//!   `(1,0), (2,0), (2,1), (3,0), ...`, each scaled by `√2`. The scaling makes
//!   the Euclidean norm of a row equal to the Frobenius norm of its slice, so
//!   distances and Frobenius-type penalties are unchanged by compaction.

use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest absolute asymmetry accepted (and then removed) for undirected input.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A stack of `T` adjacency matrices on `p` shared nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphTensor {
    p: usize,
    directed: bool,
    slices: Vec<DMatrix<f64>>,
    node_labels: Option<Vec<String>>,
}

impl GraphTensor {
    /// Builds a tensor from its slices.
    ///
    /// Every slice must be `p × p` with finite entries. For undirected tensors
    /// asymmetry up to [`SYMMETRY_TOL`] is averaged away so that the stored
    /// slices are exactly symmetric; anything larger is rejected.
    ///
    /// Entries may be negative: raw penalized centroids are not guaranteed to
    /// stay in the nonnegative orthant.
    pub fn new(mut slices: Vec<DMatrix<f64>>, directed: bool) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::ShapeMismatch("tensor needs at least one slice".into()))?;
        let p = first.nrows();
        if p == 0 {
            return Err(Error::ShapeMismatch(
                "slices must have at least one node".into(),
            ));
        }
        for (t, slice) in slices.iter_mut().enumerate() {
            if slice.shape() != (p, p) {
                return Err(Error::ShapeMismatch(format!(
                    "slice {t} has shape {:?}, expected ({p}, {p})",
                    slice.shape()
                )));
            }
            for c in 0..p {
                for r in 0..p {
                    if !slice[(r, c)].is_finite() {
                        return Err(Error::NonFinite {
                            slice: t,
                            row: r,
                            col: c,
                        });
                    }
                }
            }
            if !directed {
                for c in 0..p {
                    for r in (c + 1)..p {
                        let (a, b) = (slice[(r, c)], slice[(c, r)]);
                        if (a - b).abs() > SYMMETRY_TOL {
                            return Err(Error::AsymmetricSlice {
                                slice: t,
                                row: r,
                                col: c,
                            });
                        }
                        let mean = 0.5 * (a + b);
                        slice[(r, c)] = mean;
                        slice[(c, r)] = mean;
                    }
                }
            }
        }
        Ok(GraphTensor {
            p,
            directed,
            slices,
            node_labels: None,
        })
    }

    /// Attaches node identifiers shared by every slice.
    pub fn with_node_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.p {
            return Err(Error::ShapeMismatch(format!(
                "{} node labels for p = {}",
                labels.len(),
                self.p
            )));
        }
        self.node_labels = Some(labels);
        Ok(self)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn num_slices(&self) -> usize {
        self.slices.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn slices(&self) -> &[DMatrix<f64>] {
        &self.slices
    }

    pub fn slice(&self, t: usize) -> &DMatrix<f64> {
        &self.slices[t]
    }

    pub fn node_labels(&self) -> Option<&[String]> {
        self.node_labels.as_deref()
    }

    pub fn into_slices(self) -> Vec<DMatrix<f64>> {
        self.slices
    }

    /// True when every slice has an all-zero diagonal.
    pub fn has_zero_diagonal(&self) -> bool {
        self.first_nonzero_diagonal().is_none()
    }

    fn first_nonzero_diagonal(&self) -> Option<(usize, usize)> {
        self.slices
            .iter()
            .enumerate()
            .find_map(|(t, s)| (0..self.p).find(|&i| s[(i, i)] != 0.0).map(|i| (t, i)))
    }

    /// Compact for undirected, loop-free tensors and full otherwise.
    pub fn preferred_mode(&self) -> StorageMode {
        if !self.directed && self.has_zero_diagonal() {
            StorageMode::Compact
        } else {
            StorageMode::Full
        }
    }

    /// Elementwise mean of all slices.
    pub fn grand_mean(&self) -> DMatrix<f64> {
        let mut mean = DMatrix::zeros(self.p, self.p);
        for s in &self.slices {
            mean += s;
        }
        mean / self.slices.len() as f64
    }

    /// Relabels nodes in every slice: `out[u, v] = slice[perm[u], perm[v]]`.
    pub fn permute_nodes(&self, perm: &[usize]) -> Result<Self> {
        let slices = self
            .slices
            .iter()
            .map(|s| crate::synth::permute_nodes(s, perm))
            .collect::<Result<Vec<_>>>()?;
        let mut out = GraphTensor::new(slices, self.directed)?;
        if let Some(labels) = &self.node_labels {
            out.node_labels = Some(perm.iter().map(|&i| labels[i].clone()).collect());
        }
        Ok(out)
    }
}

/// Layout of a [`StackedMatrix`] row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StorageMode {
    Full,
    Compact,
}

impl StorageMode {
    /// Row length for `p` nodes.
    pub fn row_len(self, p: usize) -> usize {
        match self {
            StorageMode::Full => p * p,
            StorageMode::Compact => p * (p - 1) / 2,
        }
    }
}

/// One row per slice; see the module docs for the two layouts.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedMatrix {
    mode: StorageMode,
    p: usize,
    values: DMatrix<f64>,
}

impl StackedMatrix {
    pub fn new(values: DMatrix<f64>, p: usize, mode: StorageMode) -> Result<Self> {
        if values.ncols() != mode.row_len(p) {
            return Err(Error::ShapeMismatch(format!(
                "{} columns do not match p = {p} in {mode:?} mode",
                values.ncols()
            )));
        }
        Ok(StackedMatrix { mode, p, values })
    }

    pub fn mode(&self) -> StorageMode {
        self.mode
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

/// Flattens one `p × p` slice into `out` using `mode`'s layout.
pub(crate) fn flatten_into(slice: &DMatrix<f64>, mode: StorageMode, out: &mut [f64]) {
    match mode {
        StorageMode::Full => out.copy_from_slice(slice.as_slice()),
        StorageMode::Compact => {
            let p = slice.nrows();
            let mut k = 0;
            for i in 1..p {
                for j in 0..i {
                    out[k] = SQRT_2 * slice[(i, j)];
                    k += 1;
                }
            }
        }
    }
}

/// Inverse of [`flatten_into`]; compact rows are unscaled and mirrored.
pub(crate) fn unflatten(row: &[f64], p: usize, mode: StorageMode) -> DMatrix<f64> {
    match mode {
        StorageMode::Full => DMatrix::from_column_slice(p, p, row),
        StorageMode::Compact => {
            let mut m = DMatrix::zeros(p, p);
            let mut k = 0;
            for i in 1..p {
                for j in 0..i {
                    let v = row[k] / SQRT_2;
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                    k += 1;
                }
            }
            m
        }
    }
}

/// Stacks the slices of `x` as the rows of a `T × d` matrix.
pub fn matricize(x: &GraphTensor, mode: StorageMode) -> Result<StackedMatrix> {
    if mode == StorageMode::Compact {
        if x.directed {
            return Err(Error::CompactOnDirected);
        }
        if let Some((slice, node)) = x.first_nonzero_diagonal() {
            return Err(Error::NonzeroDiagonal { slice, node });
        }
    }
    let d = mode.row_len(x.p);
    let mut values = DMatrix::zeros(x.num_slices(), d);
    let mut row = vec![0.0; d];
    for (t, slice) in x.slices.iter().enumerate() {
        flatten_into(slice, mode, &mut row);
        for (k, v) in row.iter().enumerate() {
            values[(t, k)] = *v;
        }
    }
    Ok(StackedMatrix {
        mode,
        p: x.p,
        values,
    })
}

/// Rebuilds a tensor from its stacked form.
pub fn tensorize(m: &StackedMatrix, p: usize, directed: bool) -> Result<GraphTensor> {
    if m.ncols() != m.mode.row_len(p) || m.p != p {
        return Err(Error::ShapeMismatch(format!(
            "{} columns cannot hold p = {p} in {:?} mode",
            m.ncols(),
            m.mode
        )));
    }
    if m.mode == StorageMode::Compact && directed {
        return Err(Error::CompactOnDirected);
    }
    let row_buf: Vec<Vec<f64>> = (0..m.nrows())
        .map(|t| m.values.row(t).iter().copied().collect())
        .collect();
    let slices = row_buf
        .iter()
        .map(|row| unflatten(row, p, m.mode))
        .collect();
    GraphTensor::new(slices, directed)
}

/// Symmetric `T × T` matrix of Frobenius distances between slices.
pub fn pairwise_frobenius_distances(x: &GraphTensor) -> DMatrix<f64> {
    let t = x.num_slices();
    let mut dist = DMatrix::zeros(t, t);
    for i in 0..t {
        for j in (i + 1)..t {
            let d = (&x.slices[i] - &x.slices[j]).norm();
            dist[(i, j)] = d;
            dist[(j, i)] = d;
        }
    }
    dist
}
