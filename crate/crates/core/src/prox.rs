//! Schatten-norm penalties and their proximal operators.
//!
//! All three supported orders act on the singular values only, so each prox
//! is a map `σ ↦ σ'` on the spectrum followed by reconstruction with the
//! original singular vectors. Symmetric input takes a faster eigendecomposition
//! path; its output is symmetrized so that it is symmetric bit for bit.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Order `q` of the Schatten norm `‖·‖_σ(q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchattenOrder {
    /// `q = 1`, the nuclear (trace) norm.
    Nuclear,
    /// `q = 2`, the Frobenius norm.
    Frobenius,
    /// `q = ∞`, the spectral (operator) norm.
    Spectral,
}

impl SchattenOrder {
    pub const ALL: [SchattenOrder; 3] = [
        SchattenOrder::Nuclear,
        SchattenOrder::Frobenius,
        SchattenOrder::Spectral,
    ];
}

impl FromStr for SchattenOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "nuclear" => Ok(SchattenOrder::Nuclear),
            "2" | "frobenius" => Ok(SchattenOrder::Frobenius),
            "inf" | "infinity" | "spectral" => Ok(SchattenOrder::Spectral),
            _ => Err(Error::InvalidOrder(s.to_string())),
        }
    }
}

impl fmt::Display for SchattenOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchattenOrder::Nuclear => "1",
            SchattenOrder::Frobenius => "2",
            SchattenOrder::Spectral => "inf",
        })
    }
}

/// Singular values of `m` (unordered).
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if is_symmetric(m) {
        SymmetricEigen::new(m.clone())
            .eigenvalues
            .iter()
            .map(|l| l.abs())
            .collect()
    } else {
        m.singular_values().iter().copied().collect()
    }
}

pub fn schatten_norm(m: &DMatrix<f64>, q: SchattenOrder) -> f64 {
    match q {
        SchattenOrder::Frobenius => m.norm(),
        SchattenOrder::Nuclear => singular_values(m).iter().sum(),
        SchattenOrder::Spectral => singular_values(m).iter().copied().fold(0.0, f64::max),
    }
}

/// `argmin_X τ‖X‖_σ(q) + ½‖X − m‖²_F`.
///
/// When every singular value is annihilated the result is the exact zero
/// matrix; fusion detection downstream depends on that.
pub fn prox_schatten(m: &DMatrix<f64>, tau: f64, q: SchattenOrder) -> Result<DMatrix<f64>> {
    if tau < 0.0 || tau.is_nan() {
        return Err(Error::NegativeThreshold(tau));
    }
    if tau == 0.0 {
        return Ok(m.clone());
    }
    let out = match q {
        SchattenOrder::Frobenius => {
            let norm = m.norm();
            if norm <= tau {
                DMatrix::zeros(m.nrows(), m.ncols())
            } else {
                m * (1.0 - tau / norm)
            }
        }
        SchattenOrder::Nuclear => {
            spectral_map(m, |s| s.iter().map(|&x| (x - tau).max(0.0)).collect())
        }
        SchattenOrder::Spectral => spectral_map(m, |s| {
            if s.iter().sum::<f64>() <= tau {
                return vec![0.0; s.len()];
            }
            let ball = project_l1_ball(s, tau);
            s.iter().zip(&ball).map(|(x, b)| (x - b).max(0.0)).collect()
        }),
    };
    Ok(out)
}

/// Euclidean projection of `m` onto `{X : ‖X‖_σ(1) ≤ radius}`.
pub fn project_nuclear_ball(m: &DMatrix<f64>, radius: f64) -> DMatrix<f64> {
    spectral_map(m, |s| project_l1_ball(s, radius))
}

/// Euclidean projection of `m` onto `{X : ‖X‖_σ(∞) ≤ radius}`.
pub fn project_spectral_ball(m: &DMatrix<f64>, radius: f64) -> DMatrix<f64> {
    spectral_map(m, |s| s.iter().map(|&x| x.min(radius)).collect())
}

/// Euclidean projection of a nonnegative vector onto
/// `{u ≥ 0 : Σ u_i ≤ radius}`, by the sort-and-threshold method.
pub fn project_l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total <= radius {
        return v.to_vec();
    }
    if radius <= 0.0 {
        return vec![0.0; v.len()];
    }
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - radius) / (j + 1) as f64;
        if u > candidate {
            theta = candidate;
        } else {
            break;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    if n != m.ncols() {
        return false;
    }
    (0..n).all(|c| ((c + 1)..n).all(|r| m[(r, c)] == m[(c, r)]))
}

/// Applies `f` to the singular values of `m` and rebuilds the matrix.
fn spectral_map<F>(m: &DMatrix<f64>, f: F) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let (rows, cols) = m.shape();
    if is_symmetric(m) {
        let eig = SymmetricEigen::new(m.clone());
        let s: Vec<f64> = eig.eigenvalues.iter().map(|l| l.abs()).collect();
        let shrunk = f(&s);
        if shrunk.iter().all(|&x| x == 0.0) {
            return DMatrix::zeros(rows, cols);
        }
        let q = &eig.eigenvectors;
        let mut scaled = q.clone();
        for (k, (&lambda, &sk)) in eig.eigenvalues.iter().zip(&shrunk).enumerate() {
            let signed = if lambda < 0.0 { -sk } else { sk };
            scaled.column_mut(k).scale_mut(signed);
        }
        let out = scaled * q.transpose();
        return (&out + out.transpose()) * 0.5;
    }
    let svd = m.clone().svd(true, true);
    let s: Vec<f64> = svd.singular_values.iter().copied().collect();
    let shrunk = f(&s);
    if shrunk.iter().all(|&x| x == 0.0) {
        return DMatrix::zeros(rows, cols);
    }
    let mut u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    for (k, &sk) in shrunk.iter().enumerate() {
        u.column_mut(k).scale_mut(sk);
    }
    u * v_t
}
