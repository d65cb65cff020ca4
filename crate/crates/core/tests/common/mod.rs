//! Independent numerical oracles shared by the integration tests. Nothing
//! here calls into the library's decompositions.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use netclust::{FusionWeights, GraphTensor, SchattenOrder};

/// Thin SVD by one-sided (Hestenes) Jacobi rotations: returns `(U, σ, V)`
/// with `A = U diag(σ) Vᵀ`. Columns of `U` for zero singular values are zero.
pub fn jacobi_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for k in 0..m {
                    alpha += w[(k, i)] * w[(k, i)];
                    beta += w[(k, j)] * w[(k, j)];
                    gamma += w[(k, i)] * w[(k, j)];
                }
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..m {
                    let (x, y) = (w[(k, i)], w[(k, j)]);
                    w[(k, i)] = c * x - s * y;
                    w[(k, j)] = s * x + c * y;
                }
                for k in 0..n {
                    let (x, y) = (v[(k, i)], v[(k, j)]);
                    v[(k, i)] = c * x - s * y;
                    v[(k, j)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma = vec![0.0; n];
    let mut u = DMatrix::zeros(m, n);
    for j in 0..n {
        let norm = (0..m).map(|k| w[(k, j)] * w[(k, j)]).sum::<f64>().sqrt();
        sigma[j] = norm;
        if norm > 0.0 {
            for k in 0..m {
                u[(k, j)] = w[(k, j)] / norm;
            }
        }
    }
    (u, sigma, v)
}

pub fn oracle_singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    jacobi_svd(a).1
}

pub fn oracle_schatten(a: &DMatrix<f64>, q: SchattenOrder) -> f64 {
    let s = oracle_singular_values(a);
    match q {
        SchattenOrder::Nuclear => s.iter().sum(),
        SchattenOrder::Frobenius => s.iter().map(|x| x * x).sum::<f64>().sqrt(),
        SchattenOrder::Spectral => s.iter().copied().fold(0.0, f64::max),
    }
}

/// Rebuilds `U diag(f(σ)) Vᵀ`.
pub fn oracle_spectral_map(a: &DMatrix<f64>, f: impl Fn(&[f64]) -> Vec<f64>) -> DMatrix<f64> {
    let (u, s, v) = jacobi_svd(a);
    let mapped = f(&s);
    let mut us = u;
    for (j, &x) in mapped.iter().enumerate() {
        us.column_mut(j).scale_mut(x);
    }
    us * v.transpose()
}

/// Projection of a nonnegative vector onto `{x ≥ 0, Σx ≤ r}` by bisection
/// on the soft-threshold level.
pub fn bisect_l1_projection(s: &[f64], r: f64) -> Vec<f64> {
    if s.iter().sum::<f64>() <= r {
        return s.to_vec();
    }
    let (mut lo, mut hi) = (0.0, s.iter().copied().fold(0.0, f64::max));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let mass: f64 = s.iter().map(|x| (x - mid).max(0.0)).sum();
        if mass > r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    s.iter().map(|x| (x - theta).max(0.0)).collect()
}

pub fn oracle_nuclear_ball(a: &DMatrix<f64>, r: f64) -> DMatrix<f64> {
    oracle_spectral_map(a, |s| bisect_l1_projection(s, r))
}

pub fn oracle_spectral_ball(a: &DMatrix<f64>, r: f64) -> DMatrix<f64> {
    oracle_spectral_map(a, |s| s.iter().map(|x| x.min(r)).collect())
}

pub fn frobenius_ball(a: &DMatrix<f64>, r: f64) -> DMatrix<f64> {
    let n = a.norm();
    if n <= r {
        a.clone()
    } else {
        a * (r / n)
    }
}

/// Projection onto the dual-norm ball of radius `r`.
pub fn dual_ball(a: &DMatrix<f64>, r: f64, q: SchattenOrder) -> DMatrix<f64> {
    match q {
        SchattenOrder::Nuclear => oracle_spectral_ball(a, r),
        SchattenOrder::Frobenius => frobenius_ball(a, r),
        SchattenOrder::Spectral => oracle_nuclear_ball(a, r),
    }
}

/// Minimum of `τ‖s‖_q + ½‖s − σ‖²` over `s ≥ 0`, found by bisection on the
/// subgradient of a one-dimensional reduction.
pub fn reduced_prox_value(sigma: &[f64], tau: f64, q: SchattenOrder) -> f64 {
    let value = |s: &[f64]| {
        let norm = match q {
            SchattenOrder::Nuclear => s.iter().sum::<f64>(),
            SchattenOrder::Frobenius => s.iter().map(|x| x * x).sum::<f64>().sqrt(),
            SchattenOrder::Spectral => s.iter().copied().fold(0.0, f64::max),
        };
        tau * norm
            + 0.5
                * s.iter()
                    .zip(sigma)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
    };
    let bisect = |mut lo: f64, mut hi: f64, slope: &dyn Fn(f64) -> f64| {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let s: Vec<f64> = match q {
        // Separable: each coordinate minimizes τs + ½(s − σ)².
        SchattenOrder::Nuclear => sigma
            .iter()
            .map(|&x| bisect(0.0, x.max(0.0), &|s| tau + s - x))
            .collect(),
        // Optimum is a shrunk copy cσ with c ∈ [0, 1].
        SchattenOrder::Frobenius => {
            let n2: f64 = sigma.iter().map(|x| x * x).sum();
            if n2 == 0.0 {
                return 0.0;
            }
            let c = bisect(0.0, 1.0, &|c| tau * n2.sqrt() + (c - 1.0) * n2);
            sigma.iter().map(|x| c * x).collect()
        }
        // Optimum clips at a level t: s_i = min(σ_i, t).
        SchattenOrder::Spectral => {
            let top = sigma.iter().copied().fold(0.0, f64::max);
            let t = bisect(0.0, top, &|t| {
                tau - sigma.iter().map(|x| (x - t).max(0.0)).sum::<f64>()
            });
            sigma.iter().map(|x| x.min(t)).collect()
        }
    };
    value(&s)
}

/// Clustering objective evaluated with the oracle norms.
pub fn oracle_objective(
    x: &[DMatrix<f64>],
    u: &[DMatrix<f64>],
    w: &FusionWeights,
    lambda: f64,
    q: SchattenOrder,
) -> f64 {
    let loss: f64 = x.iter().zip(u).map(|(a, b)| (a - b).norm_squared()).sum();
    let penalty: f64 = w
        .entries()
        .iter()
        .map(|e| e.weight * oracle_schatten(&(&u[e.i] - &u[e.j]), q))
        .sum();
    0.5 * loss + lambda * penalty
}

pub struct DualSolution {
    pub primal: f64,
    pub dual: f64,
    pub centroids: Vec<DMatrix<f64>>,
    pub iterations: usize,
}

/// Accelerated projected gradient on the dual
/// `max_{‖Y_e‖_* ≤ λw_e} ⟨Y, DX⟩ − ½‖DᵀY‖²`, with primal `U = X − DᵀY`.
/// Stops on a relative duality gap of `gap_tol`.
pub fn dual_fista(
    x: &[DMatrix<f64>],
    w: &FusionWeights,
    lambda: f64,
    q: SchattenOrder,
    gap_tol: f64,
    max_iter: usize,
) -> DualSolution {
    let t_count = x.len();
    let (rows, cols) = x[0].shape();
    let entries = w.entries();
    let mut degree = vec![0.0; t_count];
    for e in entries {
        degree[e.i] += 1.0;
        degree[e.j] += 1.0;
    }
    // ‖D‖² ≤ 2 · max degree for an incidence matrix.
    let lip = 2.0 * degree.iter().copied().fold(0.0, f64::max);
    let primal_of = |y: &[DMatrix<f64>]| -> Vec<DMatrix<f64>> {
        let mut u: Vec<DMatrix<f64>> = x.to_vec();
        for (e, ye) in entries.iter().zip(y) {
            u[e.i] -= ye;
            u[e.j] += ye;
        }
        u
    };
    let zero = DMatrix::zeros(rows, cols);
    let mut y: Vec<DMatrix<f64>> = vec![zero.clone(); entries.len()];
    let mut y_prev = y.clone();
    let mut momentum = 1.0_f64;
    let mut best = DualSolution {
        primal: f64::INFINITY,
        dual: f64::NEG_INFINITY,
        centroids: x.to_vec(),
        iterations: 0,
    };
    for k in 1..=max_iter {
        let next_m = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next_m;
        momentum = next_m;
        let look: Vec<DMatrix<f64>> = y
            .iter()
            .zip(&y_prev)
            .map(|(a, b)| a + (a - b) * beta)
            .collect();
        let u = primal_of(&look);
        let new_y: Vec<DMatrix<f64>> = entries
            .iter()
            .zip(&look)
            .map(|(e, ye)| {
                let grad = &u[e.i] - &u[e.j];
                dual_ball(&(ye + grad / lip), lambda * e.weight, q)
            })
            .collect();
        y_prev = std::mem::replace(&mut y, new_y);

        if k % 25 == 0 || k == max_iter {
            let u = primal_of(&y);
            let primal = oracle_objective(x, &u, w, lambda, q);
            let xn: f64 = x.iter().map(|a| a.norm_squared()).sum();
            let un: f64 = u.iter().map(|a| a.norm_squared()).sum();
            // g(Y) = ⟨DᵀY, X⟩ − ½‖DᵀY‖² = ½‖X‖² − ½‖X − DᵀY‖².
            let dual = 0.5 * xn - 0.5 * un;
            if primal < best.primal {
                best.primal = primal;
                best.centroids = u;
            }
            best.dual = best.dual.max(dual);
            best.iterations = k;
            if best.primal - best.dual <= gap_tol * best.primal.abs().max(1e-12) {
                break;
            }
        }
    }
    best
}

pub fn random_symmetric(p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(p, p);
    for i in 1..p {
        for j in 0..i {
            let v = rng.random_range(0.0..1.0);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    a
}

pub fn random_tensor(p: usize, t: usize, seed: u64) -> GraphTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GraphTensor::new(
        (0..t).map(|_| random_symmetric(p, &mut rng)).collect(),
        false,
    )
    .unwrap()
}

/// Chain plus a few random long-range pairs, with random positive weights.
pub fn random_connected_weights(t: usize, rng: &mut ChaCha8Rng) -> FusionWeights {
    let mut entries: Vec<(usize, usize, f64)> = (0..t - 1)
        .map(|i| (i, i + 1, rng.random_range(0.2..1.0)))
        .collect();
    for _ in 0..t {
        let i = rng.random_range(0..t);
        let j = rng.random_range(0..t);
        if i + 1 < j && !entries.iter().any(|&(a, b, _)| (a, b) == (i, j)) {
            entries.push((i, j, rng.random_range(0.2..1.0)));
        }
    }
    FusionWeights::from_entries(t, entries).unwrap()
}
