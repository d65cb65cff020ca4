//! Convex clustering of collections of graphs on a shared node set.
//!
//! A collection of `T` adjacency matrices is clustered by solving
//!
//! ```text
//! minimize_U  ½ Σ_t ‖U_t − X_t‖²_F  +  λ Σ_(i<j) w_ij ‖U_i − U_j‖_σ(q)
//! ```
//!
//! where `‖·‖_σ(q)` is a Schatten norm (nuclear, Frobenius or spectral).
//! Slices whose centroids coincide form a cluster. [`admm_solve`] handles a
//! single λ; [`compute_path`] traces the whole path and
//! [`build_dendrogram`] turns it into a merge tree.
//!
//! ```
//! use netclust::{compute_path, cut_at_k, make_two_cluster_dataset, rbf_weights};
//! use netclust::{PathSettings, RbfScale, SchattenOrder};
//!
//! let data = make_two_cluster_dataset(10, 6, 7).unwrap();
//! let w = rbf_weights(&data.tensor, RbfScale::Auto, 5).unwrap();
//! let path = compute_path(&data.tensor, &w, SchattenOrder::Nuclear, PathSettings::default()).unwrap();
//! let cut = cut_at_k(&path, 2).unwrap();
//! assert_eq!(cut.assignment.num_clusters(), 2);
//! ```

pub mod admm;
pub mod baselines;
pub mod error;
pub mod io;
pub mod path;
pub mod prox;
pub mod synth;
pub mod tensor;
pub mod weights;

pub use admm::{
    admm_solve, build_difference_operator, extract_clusters, objective, refit_centroids,
    AdmmSettings, AdmmSolution, AdmmSolver, AdmmState, ClusterAssignment, DifferenceOperator,
    DualInit, IterationReport,
};
pub use baselines::{
    adjusted_rand_index, edge_features, kmeans, spectra_features, FeatureMatrix, KMeansResult,
};
pub use error::{Error, Result};
pub use io::{load_dataset, write_dataset, DatasetManifest};
pub use path::{
    build_dendrogram, compute_path, cut_at_k, ClusterPath, Dendrogram, Lambda0, Merge, PathCut,
    PathPoint, PathSettings,
};
pub use prox::{prox_schatten, schatten_norm, SchattenOrder};
pub use synth::{
    graphon_sample, make_changepoint_dataset, make_two_cluster_dataset, permute_nodes, sbm_sample,
    Graphon, LabelledDataset, PermutationScheme, SbmSpec,
};
pub use tensor::{
    matricize, pairwise_frobenius_distances, tensorize, GraphTensor, StackedMatrix, StorageMode,
};
pub use weights::{
    chain_weights, hybrid_weights, rbf_weights, FusionWeights, RbfScale, WeightEntry,
};
