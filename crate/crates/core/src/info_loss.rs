//! Asymptotic information lost by keeping only the sample eigenvalues.
//!
//! The loss matrix `Δg_ab(l) = B_ab + O(1/n)` is available two ways: the
//! closed form [`loss_first_order`], and [`loss_contraction`], which assembles
//! the order-one term of the general curved-exponential-family expansion
//! from the metric and curvature components. The two must agree.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::{curvature_contraction, embedding_curvature_m, metric_spectral};
use crate::spd::{pairs, validate_eigenvalues};

/// First-order information loss `B` (per observation units).
#[derive(Debug, Clone, PartialEq)]
pub struct LossMatrix {
    b: DMatrix<f64>,
}

impl LossMatrix {
    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.b[(a, b)]
    }
}

/// `B_aa = (1 / 2λ_a²) Σ_{t≠a} λ_t² / (λ_t - λ_a)²`, `B_ab = -1 / (2 (λ_a - λ_b)²)`.
pub fn loss_first_order(lambda: &[f64]) -> Result<LossMatrix> {
    validate_eigenvalues(lambda)?;
    let p = lambda.len();
    let b = DMatrix::from_fn(p, p, |a, b| {
        if a == b {
            let la = lambda[a];
            let sum: f64 = (0..p)
                .filter(|&t| t != a)
                .map(|t| {
                    let d = lambda[t] - la;
                    lambda[t] * lambda[t] / (d * d)
                })
                .sum();
            sum / (2.0 * la * la)
        } else {
            let d = lambda[a] - lambda[b];
            -0.5 / (d * d)
        }
    });
    Ok(LossMatrix { b })
}

/// Order-one term of the loss expansion, assembled from geometric components:
/// the exponential-curvature term of the fixed-eigenvector submanifold plus
/// half the squared mixture curvature of the fixed-eigenvalue submanifold.
/// The order-`n` term is absent because the `λ`–`u` metric block vanishes.
pub fn loss_contraction(lambda: &[f64]) -> Result<LossMatrix> {
    let metric = metric_spectral(lambda)?;
    let p = lambda.len();
    let ps = pairs(p);

    let mut e_term = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in 0..p {
            let mut acc = 0.0;
            for c in 0..p {
                for (k1, &st) in ps.iter().enumerate() {
                    let h1 = embedding_curvature_m(lambda, a, c, st)?;
                    if h1 == 0.0 {
                        continue;
                    }
                    for (k2, &uv) in ps.iter().enumerate() {
                        let ginv_u = if k1 == k2 { metric.inverse_u(k1) } else { 0.0 };
                        let h2 = embedding_curvature_m(lambda, b, c, uv)?;
                        acc += h1 * h2 * metric.inverse_lambda(c) * ginv_u;
                    }
                }
            }
            e_term[(a, b)] = acc;
        }
    }

    let m_term = curvature_contraction(lambda)? * 0.5;
    Ok(LossMatrix { b: e_term + m_term })
}

/// Information about `λ` carried by the sample eigenvalues of `n`
/// observations, to first order: `(n/2) diag(λ_a⁻²) - B`.
///
/// The expansion breaks down when eigenvalues are close relative to `n`;
/// in that case `positive_definite` is false and the matrix is returned
/// as computed rather than clamped.
#[derive(Debug, Clone, PartialEq)]
pub struct CarriedInformation {
    pub matrix: DMatrix<f64>,
    pub positive_definite: bool,
}

pub fn info_carried_by_l(lambda: &[f64], n: usize) -> Result<CarriedInformation> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    let loss = loss_first_order(lambda)?;
    let p = lambda.len();
    let full = DMatrix::from_fn(p, p, |a, b| {
        if a == b {
            0.5 * n as f64 / (lambda[a] * lambda[a])
        } else {
            0.0
        }
    });
    let matrix = full - loss.b;
    let positive_definite = SymmetricEigen::new(matrix.clone()).eigenvalues.min() > 0.0;
    Ok(CarriedInformation {
        matrix,
        positive_definite,
    })
}
