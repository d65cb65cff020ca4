//! Regularization paths by algorithmic regularization: a geometric λ grid,
//! a few warm-started ADMM iterations per grid point, and a dendrogram built
//! from the first λ at which each pair of clusters fuses.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::admm::{AdmmSettings, AdmmSolver, ClusterAssignment};
use crate::error::{Error, Result};
use crate::prox::SchattenOrder;
use crate::tensor::{tensorize, GraphTensor, StackedMatrix};
use crate::weights::{FusionWeights, UnionFind};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lambda0 {
    /// `1e-6` times the largest pairwise difference norm along the weight graph.
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSettings {
    pub lambda0: Lambda0,
    pub multiplier: f64,
    pub inner_iters: usize,
    pub max_points: usize,
    pub admm: AdmmSettings,
}

impl Default for PathSettings {
    fn default() -> Self {
        PathSettings {
            lambda0: Lambda0::Auto,
            multiplier: 1.05,
            inner_iters: 1,
            max_points: 2000,
            admm: AdmmSettings::default(),
        }
    }
}

impl PathSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.multiplier > 1.0 && self.multiplier.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "multiplier must exceed 1, got {}",
                self.multiplier
            )));
        }
        if self.inner_iters == 0 {
            return Err(Error::InvalidParameter(
                "inner_iters must be at least 1".into(),
            ));
        }
        if self.max_points == 0 {
            return Err(Error::InvalidParameter(
                "max_points must be at least 1".into(),
            ));
        }
        if let Lambda0::Fixed(l) = self.lambda0 {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "lambda0 must be positive, got {l}"
                )));
            }
        }
        self.admm.validate()
    }
}

#[derive(Debug, Clone)]
pub struct PathPoint {
    pub lambda: f64,
    /// Raw assignment read off the iterate at this λ.
    pub assignment: ClusterAssignment,
    centroids: StackedMatrix,
    directed: bool,
}

impl PathPoint {
    /// Raw (unrefitted) centroids at this λ.
    pub fn centroids(&self) -> GraphTensor {
        tensorize(&self.centroids, self.centroids.p(), self.directed)
            .expect("stored iterate has a consistent shape")
    }

    pub fn stacked_centroids(&self) -> &StackedMatrix {
        &self.centroids
    }
}

#[derive(Debug, Clone)]
pub struct ClusterPath {
    pub points: Vec<PathPoint>,
    /// Number of path steps at which some previously fused pair split apart.
    pub monotone_violations: usize,
    /// Set when `max_points` ran out before the clusters reached one per
    /// weight-graph component.
    pub truncated: bool,
    /// Connected components of the weight graph.
    pub components: usize,
}

impl ClusterPath {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn num_slices(&self) -> usize {
        self.points.first().map_or(0, |p| p.assignment.len())
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lambda).collect()
    }

    /// Assignments made agglomerative: a pair fused at some λ stays fused at
    /// every larger λ.
    pub fn monotonized_assignments(&self) -> Vec<ClusterAssignment> {
        let n = self.num_slices();
        let mut uf = UnionFind::new(n);
        self.points
            .iter()
            .map(|pt| {
                for members in pt.assignment.members() {
                    for w in members.windows(2) {
                        uf.union(w[0], w[1]);
                    }
                }
                let (_, labels) = uf.labels();
                ClusterAssignment::from_labels(&labels)
            })
            .collect()
    }
}

/// Does every block of `coarse` contain whole blocks of `fine`?
fn is_coarsening(fine: &ClusterAssignment, coarse: &ClusterAssignment) -> bool {
    fine.members()
        .iter()
        .all(|m| m.iter().all(|&t| coarse.same_cluster(m[0], t)))
}

pub fn compute_path(
    x: &GraphTensor,
    w: &FusionWeights,
    q: SchattenOrder,
    settings: PathSettings,
) -> Result<ClusterPath> {
    settings.validate()?;
    let mut solver = AdmmSolver::new(x, w, q, settings.admm)?;
    let (components, _) = w.components();

    let mut lambda = match settings.lambda0 {
        Lambda0::Fixed(l) => l,
        Lambda0::Auto => {
            let largest = solver
                .state()
                .edge_norms()
                .into_iter()
                .fold(0.0_f64, f64::max);
            if largest > 0.0 {
                1e-6 * largest
            } else {
                1e-6
            }
        }
    };

    let mut points: Vec<PathPoint> = Vec::new();
    let mut violations = 0;
    loop {
        for _ in 0..settings.inner_iters {
            solver.iterate(lambda)?;
        }
        let assignment = solver.assignment();
        if let Some(prev) = points.last() {
            if !is_coarsening(&prev.assignment, &assignment) {
                violations += 1;
            }
        }
        let done = assignment.num_clusters() <= components;
        points.push(PathPoint {
            lambda,
            assignment,
            centroids: solver.state().u(),
            directed: x.is_directed(),
        });
        if done || points.len() >= settings.max_points {
            break;
        }
        lambda *= settings.multiplier;
    }

    let truncated = points
        .last()
        .is_some_and(|p| p.assignment.num_clusters() > components);
    if truncated {
        warn!(
            "path truncated after {} points with {} clusters remaining",
            points.len(),
            points.last().map_or(0, |p| p.assignment.num_clusters())
        );
    }
    Ok(ClusterPath {
        points,
        monotone_violations: violations,
        truncated,
        components,
    })
}

/// One pairwise merge. Leaves are ids `0..T`; the merge at position `k`
/// creates id `T + k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub height: f64,
    pub left: usize,
    pub right: usize,
    pub id: usize,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub leaves: usize,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    /// Partition into `k` clusters obtained by undoing the last merges.
    pub fn cut(&self, k: usize) -> Result<ClusterAssignment> {
        let roots = self.leaves - self.merges.len();
        if k < roots || k > self.leaves || k == 0 {
            return Err(Error::InvalidK {
                k,
                max: self.leaves,
            });
        }
        let mut uf = UnionFind::new(self.leaves);
        let mut rep: Vec<usize> = (0..self.leaves).collect();
        for m in &self.merges[..self.leaves - k] {
            let (a, b) = (rep[m.left], rep[m.right]);
            uf.union(a, b);
            rep.push(a.min(b));
        }
        let (_, labels) = uf.labels();
        Ok(ClusterAssignment::from_labels(&labels))
    }
}

pub fn build_dendrogram(path: &ClusterPath) -> Result<Dendrogram> {
    if path.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot build a dendrogram from an empty path".into(),
        ));
    }
    let n = path.num_slices();
    // Current node id of each slice's cluster.
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut sizes: Vec<usize> = vec![1; n];
    let mut merges = Vec::new();
    let mono = path.monotonized_assignments();
    let mut previous = ClusterAssignment::singletons(n);

    for (pt, current) in path.points.iter().zip(&mono) {
        // Groups of previous clusters that coalesce here, each listed by
        // the smallest slice of every constituent cluster.
        let mut groups: Vec<Vec<usize>> = current
            .members()
            .into_iter()
            .map(|members| {
                let mut firsts: Vec<usize> = previous
                    .members()
                    .into_iter()
                    .filter(|pm| current.same_cluster(pm[0], members[0]))
                    .map(|pm| pm[0])
                    .collect();
                firsts.sort_unstable();
                firsts
            })
            .filter(|g| g.len() > 1)
            .collect();
        groups.sort_by_key(|g| g[0]);

        for group in groups {
            let mut acc = node_of[group[0]];
            for &next in &group[1..] {
                let right = node_of[next];
                let id = n + merges.len();
                let size = sizes[acc] + sizes[right];
                merges.push(Merge {
                    height: pt.lambda,
                    left: acc,
                    right,
                    id,
                    size,
                });
                sizes.push(size);
                acc = id;
            }
            for (t, node) in node_of.iter_mut().enumerate() {
                if current.same_cluster(t, group[0]) {
                    *node = acc;
                }
            }
        }
        previous = current.clone();
    }
    Ok(Dendrogram { leaves: n, merges })
}

#[derive(Debug, Clone)]
pub struct PathCut {
    pub lambda: f64,
    pub assignment: ClusterAssignment,
    /// Index of the path point used.
    pub index: usize,
    /// Set when no point had exactly `k` clusters and the first point with
    /// fewer was returned.
    pub skipped: bool,
}

/// Smallest recorded λ whose monotonized assignment has `k` clusters.
pub fn cut_at_k(path: &ClusterPath, k: usize) -> Result<PathCut> {
    let n = path.num_slices();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, max: n });
    }
    for (index, a) in path.monotonized_assignments().into_iter().enumerate() {
        let found = a.num_clusters();
        if found <= k {
            return Ok(PathCut {
                lambda: path.points[index].lambda,
                assignment: a,
                index,
                skipped: found < k,
            });
        }
    }
    Err(Error::KNeverReached { k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::chain_weights;
    use nalgebra::DMatrix;

    fn synthetic_path(lambdas: &[f64], labels: &[&[usize]]) -> ClusterPath {
        let t = labels[0].len();
        let centroids =
            StackedMatrix::new(DMatrix::zeros(t, 1), 2, crate::tensor::StorageMode::Compact)
                .unwrap();
        ClusterPath {
            points: lambdas
                .iter()
                .zip(labels)
                .map(|(&lambda, l)| PathPoint {
                    lambda,
                    assignment: ClusterAssignment::from_labels(l),
                    centroids: centroids.clone(),
                    directed: false,
                })
                .collect(),
            monotone_violations: 0,
            truncated: false,
            components: 1,
        }
    }

    #[test]
    fn no_fusion_no_merges() {
        let path = synthetic_path(&[1.0, 2.0], &[&[0, 1, 2], &[0, 1, 2]]);
        assert!(build_dendrogram(&path).unwrap().merges.is_empty());
    }

    #[test]
    fn single_pair() {
        let path = synthetic_path(&[0.5, 0.7, 0.9], &[&[0, 1], &[0, 1], &[0, 0]]);
        let d = build_dendrogram(&path).unwrap();
        assert_eq!(
            d.merges,
            vec![Merge {
                height: 0.9,
                left: 0,
                right: 1,
                id: 2,
                size: 2
            }]
        );
    }

    #[test]
    fn hand_traced_four_slices() {
        let path = synthetic_path(
            &[1.0, 2.0, 3.0, 4.0],
            &[&[0, 1, 2, 3], &[0, 0, 2, 3], &[0, 0, 2, 2], &[0, 0, 0, 0]],
        );
        let d = build_dendrogram(&path).unwrap();
        let got: Vec<(f64, usize, usize, usize)> = d
            .merges
            .iter()
            .map(|m| (m.height, m.left, m.right, m.id))
            .collect();
        assert_eq!(got, vec![(2.0, 0, 1, 4), (3.0, 2, 3, 5), (4.0, 4, 5, 6)]);
        assert_eq!(
            d.cut(2).unwrap(),
            ClusterAssignment::from_labels(&[0, 0, 1, 1])
        );
        assert_eq!(d.cut(4).unwrap(), ClusterAssignment::singletons(4));
    }

    #[test]
    fn multiway_fusion_is_split_by_smallest_member() {
        let path = synthetic_path(&[1.0, 2.0], &[&[0, 1, 2, 3, 4], &[0, 1, 0, 1, 0]]);
        let d = build_dendrogram(&path).unwrap();
        let got: Vec<(usize, usize, usize)> =
            d.merges.iter().map(|m| (m.left, m.right, m.id)).collect();
        assert_eq!(got, vec![(0, 2, 5), (5, 4, 6), (1, 3, 7)]);
        assert!(d.merges.iter().all(|m| m.height == 2.0));
    }

    #[test]
    fn fission_is_monotonized() {
        let path = synthetic_path(
            &[1.0, 2.0, 3.0, 4.0],
            &[&[0, 1, 2], &[0, 0, 2], &[0, 1, 2], &[0, 0, 0]],
        );
        let mono = path.monotonized_assignments();
        assert_eq!(mono[2], ClusterAssignment::from_labels(&[0, 0, 1]));
        let d = build_dendrogram(&path).unwrap();
        assert_eq!(d.merges.len(), 2);
        assert_eq!(d.merges[0].height, 2.0);
    }

    #[test]
    fn cut_finds_and_flags_skips() {
        let path = synthetic_path(
            &[1.0, 2.0, 3.0],
            &[&[0, 1, 2, 3], &[0, 0, 1, 1], &[0, 0, 0, 0]],
        );
        let c4 = cut_at_k(&path, 4).unwrap();
        assert_eq!((c4.index, c4.skipped), (0, false));
        let c3 = cut_at_k(&path, 3).unwrap();
        assert_eq!((c3.index, c3.skipped), (1, true));
        assert_eq!(cut_at_k(&path, 1).unwrap().lambda, 3.0);
        assert!(matches!(cut_at_k(&path, 5), Err(Error::InvalidK { .. })));

        let stuck = synthetic_path(&[1.0], &[&[0, 1, 2]]);
        assert!(matches!(
            cut_at_k(&stuck, 2),
            Err(Error::KNeverReached { k: 2 })
        ));
    }

    fn two_groups() -> GraphTensor {
        let slices = (0..6)
            .map(|t| {
                let base = if t < 3 { 0.0 } else { 1.0 };
                DMatrix::from_fn(4, 4, |i, j| {
                    if i == j {
                        0.0
                    } else {
                        base + 0.01 * ((t + i + j) % 3) as f64
                    }
                })
            })
            .collect();
        GraphTensor::new(slices, false).unwrap()
    }

    #[test]
    fn path_runs_from_singletons_to_one_cluster() {
        let x = two_groups();
        let w = FusionWeights::uniform(6);
        for q in SchattenOrder::ALL {
            let path = compute_path(&x, &w, q, PathSettings::default()).unwrap();
            assert!(!path.truncated);
            assert_eq!(path.points[0].assignment.num_clusters(), 6);
            assert_eq!(path.points.last().unwrap().assignment.num_clusters(), 1);
            for pair in path.points.windows(2) {
                assert!(pair[1].lambda > pair[0].lambda);
            }
            let d = build_dendrogram(&path).unwrap();
            assert_eq!(d.merges.len(), 5);
            assert!(d.merges.windows(2).all(|m| m[0].height <= m[1].height));
            assert_eq!(
                d.cut(2).unwrap(),
                ClusterAssignment::from_labels(&[0, 0, 0, 1, 1, 1])
            );
        }
    }

    #[test]
    fn truncation_is_flagged() {
        let x = two_groups();
        let settings = PathSettings {
            max_points: 3,
            ..PathSettings::default()
        };
        let path = compute_path(
            &x,
            &chain_weights(6).unwrap(),
            SchattenOrder::Frobenius,
            settings,
        )
        .unwrap();
        assert!(path.truncated);
        assert_eq!(path.len(), 3);
    }

    #[test]
    fn disconnected_weights_stop_at_component_count() {
        let x = two_groups();
        let w = FusionWeights::from_entries(
            6,
            vec![(0, 1, 1.0), (1, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0)],
        )
        .unwrap();
        let path = compute_path(&x, &w, SchattenOrder::Nuclear, PathSettings::default()).unwrap();
        assert_eq!(path.components, 2);
        assert!(!path.truncated);
        assert_eq!(path.points.last().unwrap().assignment.num_clusters(), 2);
        assert_eq!(build_dendrogram(&path).unwrap().merges.len(), 4);
    }

    #[test]
    fn bad_settings_are_rejected() {
        let x = two_groups();
        let w = FusionWeights::uniform(6);
        for s in [
            PathSettings {
                multiplier: 1.0,
                ..PathSettings::default()
            },
            PathSettings {
                inner_iters: 0,
                ..PathSettings::default()
            },
            PathSettings {
                lambda0: Lambda0::Fixed(-1.0),
                ..PathSettings::default()
            },
        ] {
            assert!(matches!(
                compute_path(&x, &w, SchattenOrder::Frobenius, s),
                Err(Error::InvalidParameter(_))
            ));
        }
    }
}
