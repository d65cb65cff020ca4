//! Scaled ADMM for the fusion-penalized network clustering objective
//!
//! ```text
//! minimize_U  ½ Σ_t ‖U_t − X_t‖²_F  +  λ Σ_(i<j) w_ij ‖U_i − U_j‖_σ(q)
//! ```
//!
//! The tensor is handled in stacked form: `T` rows of length `d`. With `D` the
//! `E × T` signed incidence matrix of the weight graph, one iteration is
//!
//! ```text
//! U ← (I + ρ DᵀD)⁻¹ (X + ρ Dᵀ(V − Z))          (cached Cholesky factor)
//! V ← prox_{λ w_e / ρ ‖·‖_σ(q)} (D U + Z)        (row by row)
//! Z ← Z + D U − V
//! ```
//!
//! starting from `V = D X`, `Z = 0`. Two slices are fused when the copy variable
//! on their edge is (numerically) zero; the Schatten prox produces exact zeros.
//!
//! Internally the iterates are stored transposed (`d × T`, `d × E`) so that
//! every slice and every edge is a contiguous column.

use log::warn;
use nalgebra::{Cholesky, DMatrix, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prox::{prox_schatten, schatten_norm, SchattenOrder};
use crate::tensor::{
    flatten_into, matricize, tensorize, unflatten, GraphTensor, StackedMatrix, StorageMode,
};
use crate::weights::{FusionWeights, UnionFind};

/// Signed incidence matrix of the weight graph: row `e = (i, j)` has `+1` in
/// column `i` and `−1` in column `j`, with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceOperator {
    num_slices: usize,
    pairs: Vec<(usize, usize)>,
    weights: Vec<f64>,
}

impl DifferenceOperator {
    pub fn new(w: &FusionWeights) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::EmptyWeights);
        }
        Ok(DifferenceOperator {
            num_slices: w.num_slices(),
            pairs: w.entries().iter().map(|e| (e.i, e.j)).collect(),
            weights: w.entries().iter().map(|e| e.weight).collect(),
        })
    }

    pub fn num_edges(&self) -> usize {
        self.pairs.len()
    }

    pub fn num_slices(&self) -> usize {
        self.num_slices
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn edge_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Dense `E × T` matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.num_edges(), self.num_slices);
        for (e, &(i, j)) in self.pairs.iter().enumerate() {
            d[(e, i)] = 1.0;
            d[(e, j)] = -1.0;
        }
        d
    }

    /// `DᵀD`, the unweighted Laplacian of the weight graph.
    pub fn gram(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.num_slices, self.num_slices);
        for &(i, j) in &self.pairs {
            g[(i, i)] += 1.0;
            g[(j, j)] += 1.0;
            g[(i, j)] -= 1.0;
            g[(j, i)] -= 1.0;
        }
        g
    }

    /// `D · U` for `U` of shape `T × d`.
    pub fn apply(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.num_edges(), u.ncols());
        for (e, &(i, j)) in self.pairs.iter().enumerate() {
            for c in 0..u.ncols() {
                out[(e, c)] = u[(i, c)] - u[(j, c)];
            }
        }
        out
    }

    /// `Dᵀ · V` for `V` of shape `E × d`.
    pub fn apply_adjoint(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.num_slices, v.ncols());
        for (e, &(i, j)) in self.pairs.iter().enumerate() {
            for c in 0..v.ncols() {
                out[(i, c)] += v[(e, c)];
                out[(j, c)] -= v[(e, c)];
            }
        }
        out
    }

    /// Column-major version of [`apply`](Self::apply): `(d × T) ↦ (d × E)`.
    fn apply_t(&self, ut: &DMatrix<f64>) -> DMatrix<f64> {
        let d = ut.nrows();
        let mut out = DMatrix::zeros(d, self.num_edges());
        let src = ut.as_slice();
        for (e, col) in out.as_mut_slice().chunks_mut(d).enumerate() {
            let (i, j) = self.pairs[e];
            let (a, b) = (&src[i * d..(i + 1) * d], &src[j * d..(j + 1) * d]);
            for k in 0..d {
                col[k] = a[k] - b[k];
            }
        }
        out
    }

    /// Column-major version of [`apply_adjoint`](Self::apply_adjoint).
    fn apply_adjoint_t(&self, vt: &DMatrix<f64>) -> DMatrix<f64> {
        let d = vt.nrows();
        let mut out = DMatrix::zeros(d, self.num_slices);
        let dst = out.as_mut_slice();
        for (e, col) in vt.as_slice().chunks(d).enumerate() {
            let (i, j) = self.pairs[e];
            for k in 0..d {
                dst[i * d + k] += col[k];
                dst[j * d + k] -= col[k];
            }
        }
        out
    }
}

pub fn build_difference_operator(w: &FusionWeights) -> Result<DifferenceOperator> {
    DifferenceOperator::new(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmSettings {
    pub rho: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    /// Copy-variable rows with Euclidean norm at or below this count as fused.
    pub zero_tol: f64,
    pub dual_init: DualInit,
}

/// Starting value of the scaled dual variable. The copy variable always
/// starts at `D X`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DualInit {
    /// `Z = 0`, the dual optimum at `λ = 0`.
    #[default]
    Zero,
    /// `Z = D X`.
    Differences,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        AdmmSettings {
            rho: 1.0,
            eps_abs: 1e-8,
            eps_rel: 1e-6,
            max_iter: 10_000,
            zero_tol: 1e-12,
            dual_init: DualInit::Zero,
        }
    }
}

impl AdmmSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rho must be positive, got {}",
                self.rho
            )));
        }
        if self.eps_abs < 0.0 || self.eps_rel < 0.0 || self.zero_tol < 0.0 {
            return Err(Error::InvalidParameter(
                "tolerances must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Partition of the slices. Cluster ids are 0-based and numbered in order of
/// first appearance, so equal partitions have equal label vectors.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    num_clusters: usize,
}

impl ClusterAssignment {
    /// Canonicalizes arbitrary labels.
    pub fn from_labels<L: Eq + std::hash::Hash + Clone>(raw: &[L]) -> Self {
        let mut ids = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|l| {
                let next = ids.len();
                *ids.entry(l.clone()).or_insert(next)
            })
            .collect();
        ClusterAssignment {
            labels,
            num_clusters: ids.len(),
        }
    }

    pub fn singletons(n: usize) -> Self {
        ClusterAssignment {
            labels: (0..n).collect(),
            num_clusters: n,
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Labels in `1..=K`, as written to output files.
    pub fn labels_one_based(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l + 1).collect()
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Members of each cluster, in cluster-id order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_clusters];
        for (t, &l) in self.labels.iter().enumerate() {
            out[l].push(t);
        }
        out
    }

    pub fn same_cluster(&self, a: usize, b: usize) -> bool {
        self.labels[a] == self.labels[b]
    }
}

/// Iterates and residual history of one solve.
#[derive(Debug, Clone)]
pub struct AdmmState {
    mode: StorageMode,
    p: usize,
    ut: DMatrix<f64>,
    vt: DMatrix<f64>,
    zt: DMatrix<f64>,
    rho: f64,
    iterations: usize,
    primal_residuals: Vec<f64>,
    dual_residuals: Vec<f64>,
}

impl AdmmState {
    /// Primal iterate, `T × d`.
    pub fn u(&self) -> StackedMatrix {
        StackedMatrix::new(self.ut.transpose(), self.p, self.mode)
            .expect("primal iterate has a consistent shape")
    }

    /// Copy variable, `E × d`.
    pub fn v(&self) -> DMatrix<f64> {
        self.vt.transpose()
    }

    /// Scaled dual variable, `E × d`.
    pub fn z(&self) -> DMatrix<f64> {
        self.zt.transpose()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn primal_residuals(&self) -> &[f64] {
        &self.primal_residuals
    }

    pub fn dual_residuals(&self) -> &[f64] {
        &self.dual_residuals
    }

    pub fn mode(&self) -> StorageMode {
        self.mode
    }

    /// Euclidean norm of each copy-variable row; equals the Frobenius norm of
    /// the corresponding centroid difference.
    pub fn edge_norms(&self) -> Vec<f64> {
        self.vt.column_iter().map(|c| c.norm()).collect()
    }
}

/// Residuals and stopping thresholds after one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationReport {
    pub primal: f64,
    pub dual: f64,
    pub eps_primal: f64,
    pub eps_dual: f64,
}

impl IterationReport {
    pub fn converged(&self) -> bool {
        self.primal <= self.eps_primal && self.dual <= self.eps_dual
    }
}

/// A reusable solver for one dataset and weight graph. The Cholesky factor of
/// `I + ρDᵀD` is computed once in [`AdmmSolver::new`]; successive calls to
/// [`iterate`](Self::iterate) may change `λ`, which is how warm-started paths
/// are traced.
#[derive(Clone)]
pub struct AdmmSolver {
    q: SchattenOrder,
    settings: AdmmSettings,
    directed: bool,
    xt: DMatrix<f64>,
    op: DifferenceOperator,
    factor: Cholesky<f64, Dyn>,
    state: AdmmState,
}

impl AdmmSolver {
    pub fn new(
        x: &GraphTensor,
        w: &FusionWeights,
        q: SchattenOrder,
        settings: AdmmSettings,
    ) -> Result<Self> {
        settings.validate()?;
        if w.num_slices() != x.num_slices() {
            return Err(Error::SizeMismatch {
                left: x.num_slices(),
                right: w.num_slices(),
            });
        }
        let op = DifferenceOperator::new(w)?;
        if !w.is_connected() {
            warn!(
                "fusion weight graph has {} components; clusters cannot merge across them",
                w.components().0
            );
        }
        // Spectral shrinkage of a zero-diagonal slice fills in its diagonal,
        // so only the Frobenius penalty can stay in compact storage.
        let mode = match q {
            SchattenOrder::Frobenius => x.preferred_mode(),
            _ => StorageMode::Full,
        };
        let xt = matricize(x, mode)?.into_values().transpose();

        let system = DMatrix::identity(x.num_slices(), x.num_slices()) + op.gram() * settings.rho;
        let factor = Cholesky::new(system).expect("I + ρDᵀD is positive definite");

        let dx = op.apply_t(&xt);
        let state = AdmmState {
            mode,
            p: x.p(),
            ut: xt.clone(),
            zt: match settings.dual_init {
                DualInit::Zero => DMatrix::zeros(dx.nrows(), dx.ncols()),
                DualInit::Differences => dx.clone(),
            },
            vt: dx,
            rho: settings.rho,
            iterations: 0,
            primal_residuals: Vec::new(),
            dual_residuals: Vec::new(),
        };
        Ok(AdmmSolver {
            q,
            settings,
            directed: x.is_directed(),
            xt,
            op,
            factor,
            state,
        })
    }

    pub fn state(&self) -> &AdmmState {
        &self.state
    }

    pub fn settings(&self) -> &AdmmSettings {
        &self.settings
    }

    pub fn difference_operator(&self) -> &DifferenceOperator {
        &self.op
    }

    /// One ADMM iteration at penalty level `lambda`.
    pub fn iterate(&mut self, lambda: f64) -> Result<IterationReport> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be nonnegative and finite, got {lambda}"
            )));
        }
        let rho = self.settings.rho;
        let st = &mut self.state;
        let d = self.xt.nrows();

        // U-update: solve (I + ρDᵀD) U = X + ρDᵀ(V − Z) with the cached factor.
        let mut rhs_t = self.op.apply_adjoint_t(&(&st.vt - &st.zt)) * rho;
        rhs_t += &self.xt;
        let mut rhs = rhs_t.transpose();
        self.factor.solve_mut(&mut rhs);
        st.ut = rhs.transpose();

        // V-update: rowwise Schatten prox of DU + Z.
        let du = self.op.apply_t(&st.ut);
        let arg = &du + &st.zt;
        let thresholds: Vec<f64> = self
            .op
            .edge_weights()
            .iter()
            .map(|w| lambda * w / rho)
            .collect();
        let mut v_new = DMatrix::zeros(d, self.op.num_edges());
        let (q, p, mode) = (self.q, st.p, st.mode);
        v_new
            .as_mut_slice()
            .par_chunks_mut(d)
            .zip(arg.as_slice().par_chunks(d))
            .zip(thresholds.par_iter())
            .try_for_each(|((out, a), &tau)| prox_row(a, tau, q, p, mode, out))?;

        // Z-update and residuals.
        let primal_gap = &du - &v_new;
        st.zt += &primal_gap;
        let dual_res = self.op.apply_adjoint_t(&(&v_new - &st.vt)).norm() * rho;
        st.vt = v_new;
        let primal_res = primal_gap.norm();

        st.iterations += 1;
        if !(primal_res.is_finite() && dual_res.is_finite()) {
            return Err(Error::NonFiniteIterate {
                iteration: st.iterations,
            });
        }
        st.primal_residuals.push(primal_res);
        st.dual_residuals.push(dual_res);

        let (e, t) = (self.op.num_edges() as f64, self.op.num_slices() as f64);
        let eps_primal = (e * d as f64).sqrt() * self.settings.eps_abs
            + self.settings.eps_rel * du.norm().max(st.vt.norm());
        let eps_dual = (t * d as f64).sqrt() * self.settings.eps_abs
            + self.settings.eps_rel * rho * self.op.apply_adjoint_t(&st.zt).norm();
        Ok(IterationReport {
            primal: primal_res,
            dual: dual_res,
            eps_primal,
            eps_dual,
        })
    }

    /// Iterates at fixed `lambda` until the residual test passes or
    /// `max_iter` further iterations have run. Returns whether it converged.
    pub fn run(&mut self, lambda: f64) -> Result<bool> {
        for _ in 0..self.settings.max_iter {
            if self.iterate(lambda)?.converged() {
                return Ok(true);
            }
        }
        Ok(false)
    }

    pub fn assignment(&self) -> ClusterAssignment {
        extract_clusters(&self.state, &self.op, self.settings.zero_tol)
    }

    /// Current primal iterate as a tensor.
    pub fn centroids(&self) -> Result<GraphTensor> {
        let u = self.state.u();
        tensorize(&u, self.state.p, self.directed)
    }
}

/// Prox of one stacked row, written into `out`.
fn prox_row(
    row: &[f64],
    tau: f64,
    q: SchattenOrder,
    p: usize,
    mode: StorageMode,
    out: &mut [f64],
) -> Result<()> {
    if q == SchattenOrder::Frobenius {
        // Row norm equals the slice Frobenius norm in both layouts.
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= tau {
            out.fill(0.0);
        } else {
            let scale = 1.0 - tau / norm;
            for (o, v) in out.iter_mut().zip(row) {
                *o = v * scale;
            }
        }
        return Ok(());
    }
    let m = unflatten(row, p, mode);
    let shrunk = prox_schatten(&m, tau, q)?;
    flatten_into(&shrunk, mode, out);
    Ok(())
}

/// Result of [`admm_solve`].
#[derive(Debug, Clone)]
pub struct AdmmSolution {
    /// Raw (unrefitted) centroids.
    pub centroids: GraphTensor,
    pub assignment: ClusterAssignment,
    pub state: AdmmState,
    /// False when `max_iter` was reached first; the last iterate is returned.
    pub converged: bool,
}

/// Solves the clustering problem at a single `lambda` from the standard
/// initialization.
pub fn admm_solve(
    x: &GraphTensor,
    w: &FusionWeights,
    lambda: f64,
    q: SchattenOrder,
    settings: AdmmSettings,
) -> Result<AdmmSolution> {
    let mut solver = AdmmSolver::new(x, w, q, settings)?;
    let converged = solver.run(lambda)?;
    if !converged {
        warn!(
            "ADMM stopped at max_iter = {} before meeting the residual tolerances",
            settings.max_iter
        );
    }
    Ok(AdmmSolution {
        centroids: solver.centroids()?,
        assignment: solver.assignment(),
        state: solver.state,
        converged,
    })
}

/// Connected components of the graph whose edges are the weight pairs with a
/// (numerically) zero copy variable.
pub fn extract_clusters(
    state: &AdmmState,
    op: &DifferenceOperator,
    zero_tol: f64,
) -> ClusterAssignment {
    let mut uf = UnionFind::new(op.num_slices());
    for (e, norm) in state.edge_norms().into_iter().enumerate() {
        if norm <= zero_tol {
            let (i, j) = op.pairs()[e];
            uf.union(i, j);
        }
    }
    let (_, labels) = uf.labels();
    ClusterAssignment::from_labels(&labels)
}

/// Replaces each slice by the elementwise mean of its cluster.
pub fn refit_centroids(x: &GraphTensor, a: &ClusterAssignment) -> Result<GraphTensor> {
    if a.len() != x.num_slices() {
        return Err(Error::LengthMismatch {
            left: x.num_slices(),
            right: a.len(),
        });
    }
    let means: Vec<DMatrix<f64>> = a
        .members()
        .iter()
        .map(|members| {
            let mut acc = DMatrix::zeros(x.p(), x.p());
            for &t in members {
                acc += x.slice(t);
            }
            acc / members.len() as f64
        })
        .collect();
    let slices = a.labels().iter().map(|&l| means[l].clone()).collect();
    let out = GraphTensor::new(slices, x.is_directed())?;
    match x.node_labels() {
        Some(labels) => out.with_node_labels(labels.to_vec()),
        None => Ok(out),
    }
}

/// Value of the clustering objective at centroids `u`.
pub fn objective(
    x: &GraphTensor,
    u: &GraphTensor,
    w: &FusionWeights,
    lambda: f64,
    q: SchattenOrder,
) -> f64 {
    let loss: f64 = x
        .slices()
        .iter()
        .zip(u.slices())
        .map(|(a, b)| (a - b).norm_squared())
        .sum();
    let penalty: f64 = w
        .entries()
        .iter()
        .map(|e| e.weight * schatten_norm(&(u.slice(e.i) - u.slice(e.j)), q))
        .sum();
    0.5 * loss + lambda * penalty
}
