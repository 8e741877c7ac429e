//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls the library's closed forms. Tangents and second
//! derivatives of the chart come from the series expansion
//! `exp(U) Λ exp(-U) = Λ + (UΛ - ΛU) + (U²Λ + ΛU²)/2 - UΛU + …`, the metric is
//! the σ-coordinate form on those tangents, its inverse is numerical, and
//! contractions run over every index tuple.

#![allow(dead_code)]

use eigengeo::estimators::haar_orthogonal;
use eigengeo::Spectrum;
use nalgebra::DMatrix;
use rand::Rng;

/// Random anchor: eigenvalues with gaps in `[0.15, 1)` above a floor in
/// `[0.2, 1)`, Haar eigenvectors.
pub fn random_spectrum<R: Rng>(rng: &mut R, p: usize) -> Spectrum {
    let mut lambda = vec![0.0; p];
    lambda[p - 1] = rng.random_range(0.2..1.0);
    for i in (0..p - 1).rev() {
        lambda[i] = lambda[i + 1] + rng.random_range(0.15..1.0);
    }
    Spectrum::new(lambda, haar_orthogonal(p, rng)).unwrap()
}

pub fn all_pairs(p: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for s in 0..p {
        for t in s + 1..p {
            v.push((s, t));
        }
    }
    v
}

/// `∂U/∂u_st`: `+1` at `(s, t)`, `-1` at `(t, s)`.
pub fn skew_unit(p: usize, s: usize, t: usize) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(p, p);
    e[(s, t)] = 1.0;
    e[(t, s)] = -1.0;
    e
}

fn lambda_matrix(sp: &Spectrum) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(sp.lambda()))
}

fn conj(sp: &Spectrum, m: &DMatrix<f64>) -> DMatrix<f64> {
    sp.gamma() * m * sp.gamma().transpose()
}

/// `Σ = Γ Λ Γᵀ`.
pub fn sigma(sp: &Spectrum) -> DMatrix<f64> {
    conj(sp, &lambda_matrix(sp))
}

/// Tangents in the order `λ_1..λ_p`, then pairs.
pub fn tangents(sp: &Spectrum) -> Vec<DMatrix<f64>> {
    let p = sp.dim();
    let l = lambda_matrix(sp);
    let mut out = Vec::new();
    for a in 0..p {
        let mut e = DMatrix::zeros(p, p);
        e[(a, a)] = 1.0;
        out.push(conj(sp, &e));
    }
    for (s, t) in all_pairs(p) {
        let e = skew_unit(p, s, t);
        out.push(conj(sp, &(&e * &l - &l * &e)));
    }
    out
}

/// `∂²Σ / ∂u_st ∂u_uv` at `u = 0`.
pub fn second_derivative_u(sp: &Spectrum, st: (usize, usize), uv: (usize, usize)) -> DMatrix<f64> {
    let p = sp.dim();
    let l = lambda_matrix(sp);
    let e1 = skew_unit(p, st.0, st.1);
    let e2 = skew_unit(p, uv.0, uv.1);
    let sym = &e1 * &e2 + &e2 * &e1;
    let inner = (&sym * &l + &l * &sym) * 0.5 - &e1 * &l * &e2 - &e2 * &l * &e1;
    conj(sp, &inner)
}

pub fn sigma_form(inv: &DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    0.5 * (inv * a * inv * b).trace()
}

/// Dense metric over all spectral coordinates.
pub fn dense_metric(sp: &Spectrum) -> DMatrix<f64> {
    let inv = sigma(sp).try_inverse().unwrap();
    let t = tangents(sp);
    DMatrix::from_fn(t.len(), t.len(), |i, j| sigma_form(&inv, &t[i], &t[j]))
}

/// Mixture curvature `g(∂_st ∂_uv Σ, ∂_a Σ)`.
pub fn curvature(sp: &Spectrum, st: (usize, usize), uv: (usize, usize), a: usize) -> f64 {
    let inv = sigma(sp).try_inverse().unwrap();
    let t = tangents(sp);
    sigma_form(&inv, &second_derivative_u(sp, st, uv), &t[a])
}

/// `C_ab = Σ H_κλa H_μνb g^κμ g^λν` over every tuple of pairs, and the
/// statistical curvature `Σ_ab C_ab g^ab`, with `g^{..}` from the inverse
/// of the dense metric.
pub fn contraction(sp: &Spectrum) -> (DMatrix<f64>, f64) {
    let p = sp.dim();
    let ps = all_pairs(p);
    let np = ps.len();
    let ginv = dense_metric(sp).try_inverse().unwrap();
    let h: Vec<Vec<Vec<f64>>> = ps
        .iter()
        .map(|&k| ps.iter().map(|&l| (0..p).map(|a| curvature(sp, k, l, a)).collect()).collect())
        .collect();
    let mut c = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in 0..p {
            let mut acc = 0.0;
            for k1 in 0..np {
                for k2 in 0..np {
                    for k3 in 0..np {
                        for k4 in 0..np {
                            acc += h[k1][k2][a] * h[k3][k4][b] * ginv[(p + k1, p + k3)] * ginv[(p + k2, p + k4)];
                        }
                    }
                }
            }
            c[(a, b)] = acc;
        }
    }
    let mut gamma = 0.0;
    for a in 0..p {
        for b in 0..p {
            gamma += c[(a, b)] * ginv[(a, b)];
        }
    }
    (c, gamma)
}

/// Eigenvalue-likelihood objective at `p = 2` with `K` equidistant
/// rotations, computed directly from the rotation matrices.
pub fn eigen_objective_p2(l: [f64; 2], n: usize, k: usize, lambda: [f64; 2]) -> f64 {
    let mut terms = Vec::with_capacity(k);
    for j in 0..k {
        let th = j as f64 * std::f64::consts::PI / k as f64;
        let (s, c) = th.sin_cos();
        let h = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let hl = &h * DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&l)) * h.transpose();
        let q = hl[(0, 0)] / lambda[0] + hl[(1, 1)] / lambda[1];
        terms.push(-0.5 * q);
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + (terms.iter().map(|t| (t - max).exp()).sum::<f64>() / k as f64).ln();
    -0.5 * n as f64 * (lambda[0].ln() + lambda[1].ln()) + lse
}

/// Eigen-LRT log statistic at `p = 2` by exhaustive grid search in
/// `log λ` followed by successive local grid refinement.
pub fn eigen_lrt_grid_p2(l: [f64; 2], n: usize, k: usize) -> f64 {
    let nf = n as f64;
    let centre = [(l[0] / nf).ln(), (l[1] / nf).ln()];
    let f = |x: [f64; 2]| eigen_objective_p2(l, n, k, [x[0].exp(), x[1].exp()]);
    let mut best = (f64::NEG_INFINITY, [0.0, 0.0]);
    let lo = centre[0].min(centre[1]) - 2.0;
    let hi = centre[0].max(centre[1]) + 2.0;
    let steps = 200;
    for i in 0..=steps {
        for j in 0..=steps {
            let x = [
                lo + (hi - lo) * i as f64 / steps as f64,
                lo + (hi - lo) * j as f64 / steps as f64,
            ];
            let v = f(x);
            if v > best.0 {
                best = (v, x);
            }
        }
    }
    let mut h = (hi - lo) / steps as f64;
    for _ in 0..40 {
        let c = best.1;
        for i in -4..=4 {
            for j in -4..=4 {
                let x = [c[0] + h * i as f64 / 4.0, c[1] + h * j as f64 / 4.0];
                let v = f(x);
                if v > best.0 {
                    best = (v, x);
                }
            }
        }
        h *= 0.5;
    }
    let at_null = eigen_objective_p2(l, n, k, [1.0, 1.0]);
    -0.5 * (l[0] + l[1]) - best.0.max(at_null)
}
