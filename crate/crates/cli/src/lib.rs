//! Command-line front end for `netclust`.
//!
//! Each subcommand reads a dataset manifest (or generates one), runs one
//! module of the library and writes JSON/CSV outputs into `--out`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use netclust::io::{atomic_write, write_json};
use netclust::synth::{make_sbm_dataset, make_two_cluster_dataset_with};
use netclust::{
    adjusted_rand_index, admm_solve, build_dendrogram, chain_weights, compute_path, edge_features,
    hybrid_weights, kmeans, load_dataset, rbf_weights, refit_centroids, spectra_features,
    write_dataset, AdmmSettings, ClusterAssignment, FusionWeights, GraphTensor, Merge,
    PathSettings, PermutationScheme, RbfScale, SbmSpec, SchattenOrder,
};

#[derive(Debug, Parser)]
#[command(
    name = "netclust",
    version,
    about = "Convex clustering of graph collections"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cluster at a single regularization level.
    Cluster(ClusterArgs),
    /// Trace the regularization path and build its dendrogram.
    Path(PathArgs),
    /// Generate a labelled synthetic dataset.
    Simulate(SimulateArgs),
    /// Run a k-means baseline.
    Baseline(BaselineArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightScheme {
    Rbf,
    Chain,
    Hybrid,
}

#[derive(Debug, Clone, Args)]
pub struct WeightArgs {
    #[arg(long, value_enum, default_value = "rbf")]
    pub weights: WeightScheme,
    /// RBF bandwidth: `auto` or a positive number.
    #[arg(long, default_value = "auto", value_parser = parse_phi)]
    pub phi: RbfScale,
    /// Nearest neighbours kept by the RBF weights [default: ceil(T/2)].
    #[arg(long)]
    pub knn: Option<usize>,
    /// Share of the RBF part in hybrid weights.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: f64,
    /// Schatten order: 1, 2 or inf.
    #[arg(long, default_value = "1")]
    pub q: SchattenOrder,
    #[command(flatten)]
    pub weights: WeightArgs,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    /// Write cluster means instead of the raw solver centroids.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub refit: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PathArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "1")]
    pub q: SchattenOrder,
    #[command(flatten)]
    pub weights: WeightArgs,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 1.05)]
    pub multiplier: f64,
    #[arg(long, default_value_t = 1)]
    pub inner_iters: usize,
    #[arg(long, default_value_t = 2000)]
    pub max_points: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    GraphonTwoCluster,
    Sbm,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub model: Model,
    #[arg(long)]
    pub p: usize,
    #[arg(long = "T")]
    pub num_slices: usize,
    #[arg(long)]
    pub seed: u64,
    /// One node permutation for the whole second cluster (otherwise one per graph).
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub shared_perm: bool,
    /// SBM within-block edge probability.
    #[arg(long, default_value_t = 0.8)]
    pub within: f64,
    /// SBM between-block edge probability.
    #[arg(long, default_value_t = 0.1)]
    pub between: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    KmeansSpectra,
    KmeansEdges,
}

#[derive(Debug, Clone, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_phi(s: &str) -> std::result::Result<RbfScale, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(RbfScale::Auto);
    }
    match s.parse::<f64>() {
        Ok(phi) if phi > 0.0 && phi.is_finite() => Ok(RbfScale::Fixed(phi)),
        _ => Err(format!("expected `auto` or a positive number, got {s:?}")),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClusterOutput {
    pub labels: Vec<usize>,
    #[serde(rename = "K")]
    pub num_clusters: usize,
    pub lambda: f64,
    pub q: String,
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub refit: bool,
    pub centroids: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DendrogramOutput {
    pub leaves: usize,
    pub merges: Vec<Merge>,
    pub points: usize,
    pub monotone_violations: usize,
    pub components: usize,
    pub truncated: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warning: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Truth {
    pub labels: Vec<usize>,
    /// Node permutation applied to each graph.
    pub permutations: Vec<Vec<usize>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BaselineOutput {
    pub method: String,
    pub labels: Vec<usize>,
    #[serde(rename = "K")]
    pub num_clusters: usize,
    pub k: usize,
    pub seed: u64,
    pub objective: f64,
    pub degenerate: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AriOutput {
    pub ari: f64,
    pub truth: String,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Cluster(args) => run_cluster(&args),
        Command::Path(args) => run_path(&args),
        Command::Simulate(args) => run_simulate(&args),
        Command::Baseline(args) => run_baseline(&args),
    }
}

/// Caps the rayon pool at `NETCLUST_THREADS` workers when it is set.
pub fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("NETCLUST_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("NETCLUST_THREADS must be a positive integer, got {raw:?}"))?;
    if n == 0 {
        bail!("NETCLUST_THREADS must be a positive integer, got 0");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the thread pool")?;
    Ok(())
}

fn load(input: &Path) -> Result<GraphTensor> {
    load_dataset(input).with_context(|| format!("loading {}", input.display()))
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn default_knn(num_slices: usize) -> usize {
    num_slices
        .div_ceil(2)
        .clamp(1, num_slices.saturating_sub(1).max(1))
}

pub fn build_weights(x: &GraphTensor, args: &WeightArgs) -> Result<FusionWeights> {
    let t = x.num_slices();
    if t < 2 {
        bail!("need at least two graphs, got {t}");
    }
    let knn = args.knn.unwrap_or_else(|| default_knn(t));
    let w = match args.weights {
        WeightScheme::Rbf => rbf_weights(x, args.phi, knn)?,
        WeightScheme::Chain => chain_weights(t)?,
        WeightScheme::Hybrid => hybrid_weights(
            &rbf_weights(x, args.phi, knn)?,
            &chain_weights(t)?,
            args.alpha,
        )?,
    };
    let (components, _) = w.components();
    if components > 1 {
        warn!("weight graph has {components} connected components; they are clustered separately");
    }
    Ok(w)
}

fn one_based(a: &ClusterAssignment) -> Vec<usize> {
    a.labels_one_based()
}

pub fn run_cluster(args: &ClusterArgs) -> Result<()> {
    if !(args.lambda >= 0.0 && args.lambda.is_finite()) {
        bail!("--lambda must be a nonnegative number, got {}", args.lambda);
    }
    let x = load(&args.input)?;
    let w = build_weights(&x, &args.weights)?;
    let settings = AdmmSettings {
        rho: args.rho,
        max_iter: args.max_iter,
        ..AdmmSettings::default()
    };
    let sol = admm_solve(&x, &w, args.lambda, args.q, settings)?;
    let state = &sol.state;
    info!(
        "lambda = {}: K = {} after {} iterations",
        args.lambda,
        sol.assignment.num_clusters(),
        state.iterations()
    );

    create_out(&args.out)?;
    let centroids = if args.refit {
        refit_centroids(&x, &sol.assignment)?
    } else {
        sol.centroids.clone()
    };
    write_dataset(&args.out.join("centroids"), &centroids, "centroid")?;
    let output = ClusterOutput {
        labels: one_based(&sol.assignment),
        num_clusters: sol.assignment.num_clusters(),
        lambda: args.lambda,
        q: args.q.to_string(),
        iterations: state.iterations(),
        converged: sol.converged,
        primal_residual: state.primal_residuals().last().copied().unwrap_or(0.0),
        dual_residual: state.dual_residuals().last().copied().unwrap_or(0.0),
        refit: args.refit,
        centroids: "centroids/manifest.json".into(),
    };
    write_json(&args.out.join("assignment.json"), &output)?;
    Ok(())
}

pub fn run_path(args: &PathArgs) -> Result<()> {
    let x = load(&args.input)?;
    let w = build_weights(&x, &args.weights)?;
    let settings = PathSettings {
        multiplier: args.multiplier,
        inner_iters: args.inner_iters,
        max_points: args.max_points,
        admm: AdmmSettings {
            rho: args.rho,
            ..AdmmSettings::default()
        },
        ..PathSettings::default()
    };
    let path = compute_path(&x, &w, args.q, settings)?;
    let dendrogram = build_dendrogram(&path)?;
    info!(
        "{} path points, {} merges, {} monotonicity violations",
        path.len(),
        dendrogram.merges.len(),
        path.monotone_violations
    );

    create_out(&args.out)?;
    let mut csv = String::from("lambda,K,labels\n");
    for point in &path.points {
        let labels: Vec<String> = one_based(&point.assignment)
            .iter()
            .map(usize::to_string)
            .collect();
        csv.push_str(&format!(
            "{},{},{}\n",
            point.lambda,
            point.assignment.num_clusters(),
            labels.join(";")
        ));
    }
    atomic_write(&args.out.join("path.csv"), csv.as_bytes())?;
    let warning = path.truncated.then(|| {
        format!(
            "path truncated after {} points before reaching {} cluster(s)",
            path.len(),
            path.components
        )
    });
    let output = DendrogramOutput {
        leaves: dendrogram.leaves,
        merges: dendrogram.merges,
        points: path.len(),
        monotone_violations: path.monotone_violations,
        components: path.components,
        truncated: path.truncated,
        warning,
    };
    write_json(&args.out.join("dendrogram.json"), &output)?;
    Ok(())
}

pub fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let data = match args.model {
        Model::GraphonTwoCluster => {
            let scheme = if args.shared_perm {
                PermutationScheme::Shared
            } else {
                PermutationScheme::PerGraph
            };
            make_two_cluster_dataset_with(args.p, args.num_slices, args.seed, scheme)?
        }
        Model::Sbm => {
            if !args.shared_perm {
                bail!("--shared-perm false is only supported for graphon-two-cluster");
            }
            if args.p < 2 {
                bail!("need p >= 2, got {}", args.p);
            }
            let half = args.p / 2;
            let spec = SbmSpec::two_block((half, args.p - half), args.within, args.between)?;
            make_sbm_dataset(&spec, args.num_slices, args.seed)?
        }
    };
    write_dataset(&args.out, &data.tensor, "graph")?;
    let truth = Truth {
        labels: data.labels,
        permutations: data.permutations,
    };
    write_json(&args.out.join("truth.json"), &truth)?;
    Ok(())
}

pub fn run_baseline(args: &BaselineArgs) -> Result<()> {
    let x = load(&args.input)?;
    let features = match args.method {
        Method::KmeansSpectra => spectra_features(&x)?,
        Method::KmeansEdges => edge_features(&x)?,
    };
    let result = kmeans(&features, args.k, args.restarts, args.seed)?;
    if result.degenerate {
        warn!("k = {} exceeds the number of distinct graphs", args.k);
    }

    create_out(&args.out)?;
    let method = match args.method {
        Method::KmeansSpectra => "kmeans-spectra",
        Method::KmeansEdges => "kmeans-edges",
    };
    let output = BaselineOutput {
        method: method.into(),
        labels: one_based(&result.assignment),
        num_clusters: result.assignment.num_clusters(),
        k: args.k,
        seed: args.seed,
        objective: result.objective,
        degenerate: result.degenerate,
    };
    write_json(&args.out.join("assignment.json"), &output)?;

    let truth_path = args
        .input
        .parent()
        .unwrap_or(Path::new("."))
        .join("truth.json");
    if truth_path.exists() {
        let truth = read_truth(&truth_path)?;
        let ari = adjusted_rand_index(
            &ClusterAssignment::from_labels(&truth.labels),
            &result.assignment,
        )
        .context("comparing with truth.json")?;
        info!("ARI against truth: {ari}");
        let output = AriOutput {
            ari,
            truth: truth_path.display().to_string(),
        };
        write_json(&args.out.join("ari.json"), &output)?;
    }
    Ok(())
}

pub fn read_truth(path: &Path) -> Result<Truth> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
