//! Baseline clusterers (k-means on spectra and on edge indicators) and the
//! adjusted Rand index.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::admm::ClusterAssignment;
use crate::error::{Error, Result};
use crate::synth::derived_rng;
use crate::tensor::GraphTensor;

/// One feature row per slice.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: DMatrix<f64>,
}

impl FeatureMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("features must be finite".into()));
        }
        Ok(FeatureMatrix { values })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn num_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }
}

fn require_symmetric(x: &GraphTensor) -> Result<()> {
    if !x.is_directed() {
        return Ok(());
    }
    for (t, s) in x.slices().iter().enumerate() {
        for c in 0..x.p() {
            for r in (c + 1)..x.p() {
                if s[(r, c)] != s[(c, r)] {
                    return Err(Error::AsymmetricSlice {
                        slice: t,
                        row: r,
                        col: c,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Adjacency eigenvalues of each slice, sorted nonincreasing.
pub fn spectra_features(x: &GraphTensor) -> Result<FeatureMatrix> {
    require_symmetric(x)?;
    let mut values = DMatrix::zeros(x.num_slices(), x.p());
    for (t, s) in x.slices().iter().enumerate() {
        let mut eig: Vec<f64> = SymmetricEigen::new(s.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        for (k, v) in eig.into_iter().enumerate() {
            values[(t, k)] = v;
        }
    }
    FeatureMatrix::new(values)
}

/// Strictly-lower-triangle entries of each slice, row-major, unscaled.
pub fn edge_features(x: &GraphTensor) -> Result<FeatureMatrix> {
    require_symmetric(x)?;
    let p = x.p();
    let mut values = DMatrix::zeros(x.num_slices(), p * (p - 1) / 2);
    for (t, s) in x.slices().iter().enumerate() {
        let mut k = 0;
        for i in 1..p {
            for j in 0..i {
                values[(t, k)] = s[(i, j)];
                k += 1;
            }
        }
    }
    FeatureMatrix::new(values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansSettings {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansSettings {
    fn default() -> Self {
        KMeansSettings {
            restarts: 20,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub assignment: ClusterAssignment,
    /// Within-cluster sum of squared distances.
    pub objective: f64,
    pub centroids: DMatrix<f64>,
    /// Set when `k` exceeded the number of distinct rows; the assignment is
    /// then the partition into distinct rows.
    pub degenerate: bool,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd iterations from the given centres. Returns per-point labels, final
/// centres and the objective after every assignment step.
///
/// A cluster that empties is re-seeded at the point farthest from its centre.
pub fn lloyd(
    f: &FeatureMatrix,
    mut centers: Vec<Vec<f64>>,
    max_iter: usize,
) -> (Vec<usize>, Vec<Vec<f64>>, Vec<f64>) {
    let n = f.num_rows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| f.row(i)).collect();
    let k = centers.len();
    let mut labels = vec![usize::MAX; n];
    let mut history = Vec::new();
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        let mut obj = 0.0;
        for (i, r) in rows.iter().enumerate() {
            let (best, d) = centers
                .iter()
                .enumerate()
                .map(|(c, ctr)| (c, sq_dist(r, ctr)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("at least one centre");
            obj += d;
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        history.push(obj);

        let mut sums = vec![vec![0.0; f.dim()]; k];
        let mut counts = vec![0usize; k];
        for (r, &l) in rows.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(r) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(&rows[a], &centers[labels[a]])
                            .total_cmp(&sq_dist(&rows[b], &centers[labels[b]]))
                    })
                    .expect("nonempty data");
                centers[c] = rows[far].clone();
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (labels, centers, history)
}

/// Distance-weighted (k-means++) seeding.
fn seed_centers<R: Rng>(rows: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut centers = vec![rows[rng.random_range(0..n)].clone()];
    let mut nearest: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(rows[pick].clone());
        for (d, r) in nearest.iter_mut().zip(rows) {
            *d = d.min(sq_dist(r, &centers[centers.len() - 1]));
        }
    }
    centers
}

/// Best of `restarts` seeded Lloyd runs by objective (ties: earliest restart).
pub fn kmeans(f: &FeatureMatrix, k: usize, restarts: usize, seed: u64) -> Result<KMeansResult> {
    kmeans_with(
        f,
        k,
        seed,
        KMeansSettings {
            restarts,
            ..KMeansSettings::default()
        },
    )
}

pub fn kmeans_with(
    f: &FeatureMatrix,
    k: usize,
    seed: u64,
    settings: KMeansSettings,
) -> Result<KMeansResult> {
    let n = f.num_rows();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, max: n });
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|i| f.row(i)).collect();

    let mut distinct: Vec<usize> = Vec::new();
    let distinct_labels: Vec<usize> = rows
        .iter()
        .map(|r| match distinct.iter().position(|&d| rows[d] == *r) {
            Some(pos) => pos,
            None => {
                distinct.push(rows.iter().position(|x| x == r).expect("row present"));
                distinct.len() - 1
            }
        })
        .collect();
    if k >= distinct.len() {
        let centroids = DMatrix::from_fn(distinct.len(), f.dim(), |c, j| rows[distinct[c]][j]);
        return Ok(KMeansResult {
            assignment: ClusterAssignment::from_labels(&distinct_labels),
            objective: 0.0,
            centroids,
            degenerate: k > distinct.len(),
        });
    }

    let mut best: Option<(f64, Vec<usize>, Vec<Vec<f64>>)> = None;
    for restart in 0..settings.restarts.max(1) {
        let mut rng = derived_rng(seed, restart as u64);
        let init = seed_centers(&rows, k, &mut rng);
        let (labels, centers, _) = lloyd(f, init, settings.max_iter);
        let obj: f64 = rows
            .iter()
            .zip(&labels)
            .map(|(r, &l)| sq_dist(r, &centers[l]))
            .sum();
        if best.as_ref().is_none_or(|(b, _, _)| obj < *b) {
            best = Some((obj, labels, centers));
        }
    }
    let (objective, labels, centers) = best.expect("at least one restart");
    let assignment = ClusterAssignment::from_labels(&labels);
    // Reorder centres to match canonical cluster ids.
    let mut order = vec![0; assignment.num_clusters()];
    for (raw, canon) in labels.iter().zip(assignment.labels()) {
        order[*canon] = *raw;
    }
    let centroids = DMatrix::from_fn(order.len(), f.dim(), |c, j| centers[order[c]][j]);
    Ok(KMeansResult {
        assignment,
        objective,
        centroids,
        degenerate: false,
    })
}

fn choose2(n: usize) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index from the pair-counting contingency table.
///
/// When both partitions are trivial in the same way (all singletons or a
/// single cluster) the chance-corrected ratio is 0/0; identical partitions
/// then score 1.
pub fn adjusted_rand_index(a: &ClusterAssignment, b: &ClusterAssignment) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len();
    let (ka, kb) = (a.num_clusters(), b.num_clusters());
    let mut table = vec![0usize; ka * kb];
    for (&la, &lb) in a.labels().iter().zip(b.labels()) {
        table[la * kb + lb] += 1;
    }
    let index: f64 = table.iter().map(|&c| choose2(c)).sum();
    let rows: f64 = (0..ka)
        .map(|i| choose2((0..kb).map(|j| table[i * kb + j]).sum()))
        .sum();
    let cols: f64 = (0..kb)
        .map(|j| choose2((0..ka).map(|i| table[i * kb + j]).sum()))
        .sum();
    let total = choose2(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = rows * cols / total;
    let max = 0.5 * (rows + cols);
    if max == expected {
        return Ok(if a == b { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}
