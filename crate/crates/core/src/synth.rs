//! Synthetic graph collections: graphon samples with permuted-label clusters
//! and stochastic block models.
//!
//! Randomness is derived from a single root seed. Each graph draws from its
//! own ChaCha stream (stream id = graph index), and permutations from a
//! reserved stream, so outputs do not depend on generation order.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::GraphTensor;

const PERMUTATION_STREAM: u64 = u64::MAX;

/// Stream `stream` of the generator rooted at `seed`.
pub fn derived_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A symmetric edge-probability function on `[0, 1]²`.
#[derive(Debug, Clone, PartialEq)]
pub enum Graphon {
    /// `W(x, y) = 1 − max(x, y)`.
    OneMinusMax,
    Constant(f64),
    /// Piecewise constant on an `n × n` grid of equal cells.
    Tabulated(DMatrix<f64>),
}

impl Graphon {
    pub fn value(&self, x: f64, y: f64) -> f64 {
        match self {
            Graphon::OneMinusMax => 1.0 - x.max(y),
            Graphon::Constant(c) => *c,
            Graphon::Tabulated(grid) => {
                let n = grid.nrows();
                let cell = |v: f64| ((v * n as f64) as usize).min(n - 1);
                grid[(cell(x), cell(y))]
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |x, y, value: f64| Err(Error::InvalidGraphon { x, y, value });
        match self {
            Graphon::OneMinusMax => Ok(()),
            Graphon::Constant(c) if !(0.0..=1.0).contains(c) => bad(0.0, 0.0, *c),
            Graphon::Constant(_) => Ok(()),
            Graphon::Tabulated(grid) => {
                let n = grid.nrows();
                if n == 0 || grid.ncols() != n {
                    return Err(Error::ShapeMismatch("graphon grid must be square".into()));
                }
                for i in 0..n {
                    for j in 0..n {
                        let (x, y) = ((i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64);
                        let v = grid[(i, j)];
                        if !(0.0..=1.0).contains(&v) || v != grid[(j, i)] {
                            return bad(x, y, v);
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

/// Equispaced latent positions `(i + 0.5) / p`.
pub fn sampling_points(p: usize) -> Vec<f64> {
    (0..p).map(|i| (i as f64 + 0.5) / p as f64).collect()
}

/// Edge probabilities `W(x_u, x_v)` at the sampling points (zero diagonal).
pub fn graphon_probabilities(graphon: &Graphon, p: usize) -> Result<DMatrix<f64>> {
    graphon.validate()?;
    let x = sampling_points(p);
    let mut probs = DMatrix::zeros(p, p);
    for u in 0..p {
        for v in 0..p {
            if u != v {
                let w = graphon.value(x[u], x[v]);
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::InvalidGraphon {
                        x: x[u],
                        y: x[v],
                        value: w,
                    });
                }
                probs[(u, v)] = w;
            }
        }
    }
    Ok(probs)
}

/// Independent Bernoulli edges with the given symmetric probabilities.
pub fn bernoulli_graph<R: Rng>(probs: &DMatrix<f64>, rng: &mut R) -> DMatrix<f64> {
    let p = probs.nrows();
    let mut a = DMatrix::zeros(p, p);
    for i in 1..p {
        for j in 0..i {
            if rng.random::<f64>() < probs[(i, j)] {
                a[(i, j)] = 1.0;
                a[(j, i)] = 1.0;
            }
        }
    }
    a
}

/// One undirected graph from `graphon` at equispaced positions.
pub fn graphon_sample(graphon: &Graphon, p: usize, seed: u64) -> Result<DMatrix<f64>> {
    if p < 2 {
        return Err(Error::InvalidParameter(format!("need p >= 2, got {p}")));
    }
    let probs = graphon_probabilities(graphon, p)?;
    Ok(bernoulli_graph(
        &probs,
        &mut ChaCha8Rng::seed_from_u64(seed),
    ))
}

/// Block sizes plus a symmetric block-probability matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmSpec {
    block_sizes: Vec<usize>,
    probabilities: DMatrix<f64>,
}

impl SbmSpec {
    pub fn new(block_sizes: Vec<usize>, probabilities: DMatrix<f64>) -> Result<Self> {
        let b = block_sizes.len();
        if b == 0 || block_sizes.contains(&0) {
            return Err(Error::InvalidBlockModel(
                "block sizes must be positive".into(),
            ));
        }
        if probabilities.shape() != (b, b) {
            return Err(Error::InvalidBlockModel(format!(
                "{b} blocks but a {:?} probability matrix",
                probabilities.shape()
            )));
        }
        for i in 0..b {
            for j in 0..b {
                let v = probabilities[(i, j)];
                if !(0.0..=1.0).contains(&v) || v != probabilities[(j, i)] {
                    return Err(Error::InvalidBlockModel(format!(
                        "entry ({i}, {j}) = {v} is not a symmetric probability"
                    )));
                }
            }
        }
        Ok(SbmSpec {
            block_sizes,
            probabilities,
        })
    }

    /// Two blocks with `within` on the diagonal and `between` off it.
    pub fn two_block(sizes: (usize, usize), within: f64, between: f64) -> Result<Self> {
        SbmSpec::new(
            vec![sizes.0, sizes.1],
            DMatrix::from_row_slice(2, 2, &[within, between, between, within]),
        )
    }

    pub fn num_nodes(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    /// Block index of every node; blocks are contiguous in node order.
    pub fn memberships(&self) -> Vec<usize> {
        self.block_sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &n)| std::iter::repeat_n(b, n))
            .collect()
    }

    pub fn edge_probabilities(&self) -> DMatrix<f64> {
        let blocks = self.memberships();
        let p = blocks.len();
        DMatrix::from_fn(p, p, |u, v| {
            if u == v {
                0.0
            } else {
                self.probabilities[(blocks[u], blocks[v])]
            }
        })
    }
}

pub fn sbm_sample(spec: &SbmSpec, seed: u64) -> DMatrix<f64> {
    bernoulli_graph(
        &spec.edge_probabilities(),
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
}

fn check_permutation(perm: &[usize], p: usize) -> Result<()> {
    let mut seen = vec![false; p];
    if perm.len() != p {
        return Err(Error::NotAPermutation(p));
    }
    for &i in perm {
        if i >= p || std::mem::replace(&mut seen[i], true) {
            return Err(Error::NotAPermutation(p));
        }
    }
    Ok(())
}

/// Relabels nodes: `out[u, v] = a[perm[u], perm[v]]`.
pub fn permute_nodes(a: &DMatrix<f64>, perm: &[usize]) -> Result<DMatrix<f64>> {
    let p = a.nrows();
    check_permutation(perm, p)?;
    Ok(DMatrix::from_fn(p, p, |u, v| a[(perm[u], perm[v])]))
}

pub fn invert_permutation(perm: &[usize]) -> Result<Vec<usize>> {
    check_permutation(perm, perm.len())?;
    let mut inv = vec![0; perm.len()];
    for (u, &v) in perm.iter().enumerate() {
        inv[v] = u;
    }
    Ok(inv)
}

pub fn random_permutation<R: Rng>(p: usize, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..p).collect();
    perm.shuffle(rng);
    perm
}

/// How the second cluster's node labels are scrambled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PermutationScheme {
    /// One permutation shared by every graph of the second cluster.
    Shared,
    /// A fresh permutation per graph.
    PerGraph,
    /// No permutation; both clusters share a distribution.
    Identity,
}

/// A labelled synthetic collection.
#[derive(Debug, Clone)]
pub struct LabelledDataset {
    pub tensor: GraphTensor,
    /// Ground-truth cluster of each slice, 1-based.
    pub labels: Vec<usize>,
    /// Node permutation applied to each slice (identity for unpermuted ones).
    pub permutations: Vec<Vec<usize>>,
}

/// Graphs whose probabilities are `probs` relabelled by `perms[t]`.
fn sample_collection(
    probs: &DMatrix<f64>,
    perms: &[Vec<usize>],
    seed: u64,
) -> Result<Vec<DMatrix<f64>>> {
    perms
        .par_iter()
        .enumerate()
        .map(|(t, perm)| {
            let mut rng = derived_rng(seed, t as u64);
            let a = bernoulli_graph(probs, &mut rng);
            permute_nodes(&a, perm)
        })
        .collect()
}

/// Cluster 1 is `T/2` draws from `W(x, y) = 1 − max(x, y)`; cluster 2 is
/// `T/2` further draws with node labels permuted.
pub fn make_two_cluster_dataset(p: usize, num_slices: usize, seed: u64) -> Result<LabelledDataset> {
    make_two_cluster_dataset_with(p, num_slices, seed, PermutationScheme::Shared)
}

pub fn make_two_cluster_dataset_with(
    p: usize,
    num_slices: usize,
    seed: u64,
    scheme: PermutationScheme,
) -> Result<LabelledDataset> {
    if num_slices < 2 || !num_slices.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "slice count must be even and at least 2, got {num_slices}"
        )));
    }
    if p < 2 {
        return Err(Error::InvalidParameter(format!("need p >= 2, got {p}")));
    }
    let probs = graphon_probabilities(&Graphon::OneMinusMax, p)?;
    let half = num_slices / 2;
    let mut perm_rng = derived_rng(seed, PERMUTATION_STREAM);
    let shared = random_permutation(p, &mut perm_rng);
    let identity: Vec<usize> = (0..p).collect();
    let perms: Vec<Vec<usize>> = (0..num_slices)
        .map(|t| {
            if t < half {
                return identity.clone();
            }
            match scheme {
                PermutationScheme::Shared => shared.clone(),
                PermutationScheme::PerGraph => random_permutation(p, &mut perm_rng),
                PermutationScheme::Identity => identity.clone(),
            }
        })
        .collect();
    let slices = sample_collection(&probs, &perms, seed)?;
    Ok(LabelledDataset {
        tensor: GraphTensor::new(slices, false)?,
        labels: (0..num_slices)
            .map(|t| if t < half { 1 } else { 2 })
            .collect(),
        permutations: perms,
    })
}

/// A temporally ordered collection whose generating distribution changes once:
/// slices `0..change_after` use one node permutation of the graphon and the
/// rest another.
pub fn make_changepoint_dataset(
    p: usize,
    num_slices: usize,
    change_after: usize,
    seed: u64,
) -> Result<LabelledDataset> {
    if change_after == 0 || change_after >= num_slices {
        return Err(Error::InvalidParameter(format!(
            "changepoint {change_after} must split 1..{num_slices}"
        )));
    }
    let probs = graphon_probabilities(&Graphon::OneMinusMax, p)?;
    let mut perm_rng = derived_rng(seed, PERMUTATION_STREAM);
    let before = random_permutation(p, &mut perm_rng);
    let after = random_permutation(p, &mut perm_rng);
    let perms: Vec<Vec<usize>> = (0..num_slices)
        .map(|t| {
            if t < change_after {
                before.clone()
            } else {
                after.clone()
            }
        })
        .collect();
    let slices = sample_collection(&probs, &perms, seed)?;
    Ok(LabelledDataset {
        tensor: GraphTensor::new(slices, false)?,
        labels: (0..num_slices)
            .map(|t| if t < change_after { 1 } else { 2 })
            .collect(),
        permutations: perms,
    })
}

/// Two-block SBM collection: the second half of the graphs uses a node
/// permutation of the first half's block memberships.
pub fn make_sbm_dataset(spec: &SbmSpec, num_slices: usize, seed: u64) -> Result<LabelledDataset> {
    if num_slices < 2 || !num_slices.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "slice count must be even and at least 2, got {num_slices}"
        )));
    }
    let p = spec.num_nodes();
    let probs = spec.edge_probabilities();
    let half = num_slices / 2;
    let shared = random_permutation(p, &mut derived_rng(seed, PERMUTATION_STREAM));
    let identity: Vec<usize> = (0..p).collect();
    let perms: Vec<Vec<usize>> = (0..num_slices)
        .map(|t| {
            if t < half {
                identity.clone()
            } else {
                shared.clone()
            }
        })
        .collect();
    let slices = sample_collection(&probs, &perms, seed)?;
    Ok(LabelledDataset {
        tensor: GraphTensor::new(slices, false)?,
        labels: (0..num_slices)
            .map(|t| if t < half { 1 } else { 2 })
            .collect(),
        permutations: perms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_simple_undirected(a: &DMatrix<f64>) -> bool {
        let p = a.nrows();
        (0..p).all(|i| a[(i, i)] == 0.0)
            && a.iter().all(|&v| v == 0.0 || v == 1.0)
            && *a == a.transpose()
    }

    #[test]
    fn constant_graphons() {
        for seed in 0..5 {
            let full = graphon_sample(&Graphon::Constant(1.0), 6, seed).unwrap();
            assert_eq!(full.sum(), 30.0);
            let empty = graphon_sample(&Graphon::Constant(0.0), 6, seed).unwrap();
            assert_eq!(empty.sum(), 0.0);
        }
        assert!(matches!(
            graphon_sample(&Graphon::Constant(1.5), 4, 0),
            Err(Error::InvalidGraphon { .. })
        ));
        assert!(graphon_sample(&Graphon::OneMinusMax, 1, 0).is_err());
    }

    #[test]
    fn tabulated_graphon_validation() {
        let ok = Graphon::Tabulated(DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.5]));
        assert!(graphon_sample(&ok, 8, 1).is_ok());
        let asym = Graphon::Tabulated(DMatrix::from_row_slice(2, 2, &[0.9, 0.2, 0.1, 0.5]));
        assert!(graphon_sample(&asym, 8, 1).is_err());
        assert_eq!(ok.value(0.1, 0.9), 0.1);
        assert_eq!(ok.value(1.0, 1.0), 0.5);
    }

    #[test]
    fn sbm_extremes() {
        let ones = SbmSpec::two_block((3, 4), 1.0, 1.0).unwrap();
        assert_eq!(sbm_sample(&ones, 2).sum(), 42.0);
        let zeros = SbmSpec::two_block((3, 4), 0.0, 0.0).unwrap();
        assert_eq!(sbm_sample(&zeros, 2).sum(), 0.0);
        assert!(SbmSpec::new(
            vec![2, 2],
            DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.2, 0.5])
        )
        .is_err());
        assert!(SbmSpec::new(
            vec![2],
            DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.5])
        )
        .is_err());
    }

    #[test]
    fn permutation_roundtrip_and_degrees() {
        let a = graphon_sample(&Graphon::OneMinusMax, 12, 3).unwrap();
        let identity: Vec<usize> = (0..12).collect();
        assert_eq!(permute_nodes(&a, &identity).unwrap(), a);

        let perm = random_permutation(12, &mut ChaCha8Rng::seed_from_u64(4));
        let inv = invert_permutation(&perm).unwrap();
        let b = permute_nodes(&a, &perm).unwrap();
        assert_eq!(permute_nodes(&b, &inv).unwrap(), a);

        let degrees = |m: &DMatrix<f64>| {
            let mut d: Vec<u64> = m.row_iter().map(|r| r.sum() as u64).collect();
            d.sort_unstable();
            d
        };
        assert_eq!(degrees(&a), degrees(&b));

        assert!(matches!(
            permute_nodes(&a, &[0, 0, 1]),
            Err(Error::NotAPermutation(12))
        ));
        let mut dup = identity.clone();
        dup[3] = 4;
        assert!(permute_nodes(&a, &dup).is_err());
    }

    #[test]
    fn two_cluster_shape_and_labels() {
        let ds = make_two_cluster_dataset(25, 20, 1).unwrap();
        assert_eq!(ds.tensor.p(), 25);
        assert_eq!(ds.tensor.num_slices(), 20);
        assert_eq!(ds.labels, [vec![1; 10], vec![2; 10]].concat());
        assert!(ds.tensor.slices().iter().all(is_simple_undirected));
        // Shared permutation across the second cluster.
        assert!(ds.permutations[10..]
            .iter()
            .all(|p| *p == ds.permutations[10]));
        assert!(make_two_cluster_dataset(25, 7, 1).is_err());
    }

    #[test]
    fn determinism() {
        let a = make_two_cluster_dataset(10, 6, 42).unwrap();
        let b = make_two_cluster_dataset(10, 6, 42).unwrap();
        assert_eq!(a.tensor, b.tensor);
        let c = make_two_cluster_dataset(10, 6, 43).unwrap();
        assert_ne!(a.tensor, c.tensor);
    }

    #[test]
    fn expected_adjacency_related_by_permutation() {
        let p = 9;
        let probs = graphon_probabilities(&Graphon::OneMinusMax, p).unwrap();
        let ds = make_two_cluster_dataset(p, 4, 5).unwrap();
        let perm = &ds.permutations[3];
        let permuted = permute_nodes(&probs, perm).unwrap();
        let x = sampling_points(p);
        for u in 0..p {
            for v in 0..p {
                if u != v {
                    let expected = 1.0 - x[perm[u]].max(x[perm[v]]);
                    assert!((permuted[(u, v)] - expected).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn per_graph_and_identity_schemes() {
        let per = make_two_cluster_dataset_with(8, 6, 3, PermutationScheme::PerGraph).unwrap();
        assert_ne!(per.permutations[3], per.permutations[4]);
        let id = make_two_cluster_dataset_with(8, 6, 3, PermutationScheme::Identity).unwrap();
        let identity: Vec<usize> = (0..8).collect();
        assert!(id.permutations.iter().all(|p| *p == identity));
    }

    #[test]
    fn changepoint_labels() {
        let ds = make_changepoint_dataset(10, 12, 6, 9).unwrap();
        assert_eq!(ds.labels, [vec![1; 6], vec![2; 6]].concat());
        assert_ne!(ds.permutations[0], ds.permutations[11]);
        assert!(make_changepoint_dataset(10, 12, 12, 9).is_err());
    }
}
