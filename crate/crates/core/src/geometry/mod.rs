//! Fisher metric and embedding curvatures in spectral coordinates `(λ, u)`.
//!
//! The closed forms here depend on the eigenvalues only. Their counterparts
//! in [`oracle`] recompute the same quantities by finite differences of the
//! chart map at an arbitrary anchor `Γ`, which is how the closed forms are
//! checked.

pub mod oracle;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spd::{pair_count, pair_offset, pairs, validate_eigenvalues, SpdMatrix, Spectrum};

/// A tangent vector at a covariance, written as a symmetric matrix in the
/// `σ_ij` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTangent {
    m: DMatrix<f64>,
}

impl SymTangent {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let asym = crate::spd::max_asymmetry(&m);
        if asym > crate::spd::SYMMETRY_TOLERANCE * m.amax().max(1.0) {
            return Err(Error::NotSymmetric { max_asymmetry: asym });
        }
        Ok(Self {
            m: crate::spd::symmetrize(&m),
        })
    }

    /// Basis direction of `σ_ij`: `E_ii` on the diagonal, `E_ij + E_ji` off it.
    pub fn basis(dim: usize, i: usize, j: usize) -> Result<Self> {
        if i >= dim || j >= dim {
            return Err(Error::IndexOutOfRange {
                index: i.max(j),
                dim,
            });
        }
        let mut m = DMatrix::zeros(dim, dim);
        m[(i, j)] = 1.0;
        m[(j, i)] = 1.0;
        Ok(Self { m })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { m: &self.m * c }
    }
}

/// `(1/2) tr(Σ⁻¹ A Σ⁻¹ B)`.
pub fn metric_sigma(s: &SpdMatrix, a: &SymTangent, b: &SymTangent) -> Result<f64> {
    for found in [a.dim(), b.dim()] {
        if found != s.dim() {
            return Err(Error::DimensionMismatch {
                expected: s.dim(),
                found,
            });
        }
    }
    Ok(metric_sigma_raw(&s.inverse(), a.as_matrix(), b.as_matrix()))
}

pub(crate) fn metric_sigma_raw(inv: &DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let left = inv * a;
    let right = inv * b;
    // tr(XY) = Σ_ij X_ij Y_ji
    0.5 * left.component_mul(&right.transpose()).sum()
}

/// Tangent of `λ_a`: `γ_a γ_aᵀ`.
pub fn tangent_lambda(sp: &Spectrum, a: usize) -> Result<SymTangent> {
    if a >= sp.dim() {
        return Err(Error::IndexOutOfRange { index: a, dim: sp.dim() });
    }
    let g = sp.gamma().column(a);
    Ok(SymTangent { m: &g * g.transpose() })
}

/// Tangent of `u_(s,t)` at `u = 0`.
pub fn tangent_u(sp: &Spectrum, s: usize, t: usize) -> Result<SymTangent> {
    pair_offset(sp.dim(), s, t)?;
    Ok(SymTangent {
        m: tangent_u_raw(sp.lambda(), sp.gamma(), s, t),
    })
}

/// `λ_t γ_t γ_sᵀ - λ_s γ_s γ_tᵀ + λ_t γ_s γ_tᵀ - λ_s γ_t γ_sᵀ`, evaluated term
/// by term with no check on `λ`.
pub fn tangent_u_raw(lambda: &[f64], gamma: &DMatrix<f64>, s: usize, t: usize) -> DMatrix<f64> {
    let gs = gamma.column(s);
    let gt = gamma.column(t);
    let st = &gs * gt.transpose();
    let ts = &gt * gs.transpose();
    &ts * lambda[t] - &st * lambda[s] + &st * lambda[t] - &ts * lambda[s]
}

/// Diagonal Fisher metric in spectral coordinates. The `λ`–`u` cross block
/// vanishes identically and is not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMetric {
    lambda: Vec<f64>,
    g_lambda: Vec<f64>,
    g_u: Vec<f64>,
}

impl SpectralMetric {
    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    /// `g_aa = 1 / (2 λ_a²)`.
    pub fn g_lambda(&self) -> &[f64] {
        &self.g_lambda
    }

    /// `g_(s,t)(s,t) = (λ_s - λ_t)² / (λ_s λ_t)`, in pair-offset order.
    pub fn g_u(&self) -> &[f64] {
        &self.g_u
    }

    pub fn g_pair(&self, s: usize, t: usize) -> Result<f64> {
        Ok(self.g_u[pair_offset(self.dim(), s, t)?])
    }

    /// Inverse metric on the `λ` block: `g^aa = 2 λ_a²`.
    pub fn inverse_lambda(&self, a: usize) -> f64 {
        2.0 * self.lambda[a] * self.lambda[a]
    }

    /// Inverse metric on the `u` block, by pair offset.
    pub fn inverse_u(&self, offset: usize) -> f64 {
        1.0 / self.g_u[offset]
    }

    /// The full `(p + p(p-1)/2)`-square metric matrix, `λ` block first.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let p = self.dim();
        let n = p + self.g_u.len();
        let mut m = DMatrix::zeros(n, n);
        for (a, g) in self.g_lambda.iter().enumerate() {
            m[(a, a)] = *g;
        }
        for (k, g) in self.g_u.iter().enumerate() {
            m[(p + k, p + k)] = *g;
        }
        m
    }
}

pub fn metric_spectral(lambda: &[f64]) -> Result<SpectralMetric> {
    validate_eigenvalues(lambda)?;
    let p = lambda.len();
    let g_lambda = lambda.iter().map(|l| 0.5 / (l * l)).collect();
    let g_u = pairs(p)
        .into_iter()
        .map(|(s, t)| {
            let d = lambda[s] - lambda[t];
            d * d / (lambda[s] * lambda[t])
        })
        .collect();
    Ok(SpectralMetric {
        lambda: lambda.to_vec(),
        g_lambda,
        g_u,
    })
}

/// Mixture-connection embedding curvature `H_(s,t)(u,v)a` of the fixed-eigenvalue
/// submanifold.
pub fn embedding_curvature_a(
    lambda: &[f64],
    st: (usize, usize),
    uv: (usize, usize),
    a: usize,
) -> Result<f64> {
    let p = lambda.len();
    pair_offset(p, st.0, st.1)?;
    pair_offset(p, uv.0, uv.1)?;
    if a >= p {
        return Err(Error::IndexOutOfRange { index: a, dim: p });
    }
    Ok(curvature_entry(lambda, st, uv, a))
}

fn curvature_entry(lambda: &[f64], st: (usize, usize), uv: (usize, usize), a: usize) -> f64 {
    if st != uv {
        return 0.0;
    }
    let (s, t) = st;
    let la = lambda[a];
    if a == s {
        (lambda[t] - la) / (la * la)
    } else if a == t {
        (lambda[s] - la) / (la * la)
    } else {
        0.0
    }
}

/// Embedding curvature `H_ab(s,t)` of the fixed-eigenvector submanifold. It
/// is zero for both the exponential and the mixture connection; the function
/// exists so that contractions can be written without special cases.
pub fn embedding_curvature_m(
    lambda: &[f64],
    a: usize,
    b: usize,
    st: (usize, usize),
) -> Result<f64> {
    let p = lambda.len();
    pair_offset(p, st.0, st.1)?;
    if a >= p || b >= p {
        return Err(Error::IndexOutOfRange { index: a.max(b), dim: p });
    }
    Ok(0.0)
}

/// Sparse curvature of the fixed-eigenvalue submanifold: one length-`p` slab
/// per pair, for the diagonal entries `(s,t) = (u,v)`. Every other entry is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureTensor {
    dim: usize,
    slabs: Vec<Vec<f64>>,
}

impl CurvatureTensor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Slab for pair offset `k`, indexed by `a`.
    pub fn slab(&self, k: usize) -> &[f64] {
        &self.slabs[k]
    }

    pub fn get(&self, st: (usize, usize), uv: (usize, usize), a: usize) -> Result<f64> {
        let k = pair_offset(self.dim, st.0, st.1)?;
        pair_offset(self.dim, uv.0, uv.1)?;
        if a >= self.dim {
            return Err(Error::IndexOutOfRange { index: a, dim: self.dim });
        }
        Ok(if st == uv { self.slabs[k][a] } else { 0.0 })
    }
}

pub fn curvature_tensor(lambda: &[f64]) -> Result<CurvatureTensor> {
    validate_eigenvalues(lambda)?;
    let p = lambda.len();
    let slabs = pairs(p)
        .into_iter()
        .map(|st| (0..p).map(|a| curvature_entry(lambda, st, st, a)).collect())
        .collect();
    Ok(CurvatureTensor { dim: p, slabs })
}

/// `H^a_(s,t)(u,v) = Σ_b H_(s,t)(u,v)b g^ba`.
pub fn raised_curvature(lambda: &[f64], st: (usize, usize), uv: (usize, usize)) -> Result<Vec<f64>> {
    let metric = metric_spectral(lambda)?;
    (0..lambda.len())
        .map(|a| Ok(embedding_curvature_a(lambda, st, uv, a)? * metric.inverse_lambda(a)))
        .collect()
}

/// `Σ H_(s,t)(u,v)a H_(o,q)(r,w)b g^(s,t)(o,q) g^(u,v)(r,w)` over all pairs,
/// as a `p × p` matrix in `(a, b)`.
pub fn curvature_contraction(lambda: &[f64]) -> Result<DMatrix<f64>> {
    let metric = metric_spectral(lambda)?;
    let tensor = curvature_tensor(lambda)?;
    let p = lambda.len();
    let np = pair_count(p);
    let ginv = DMatrix::from_fn(np, np, |i, j| if i == j { metric.inverse_u(i) } else { 0.0 });
    let dense = |k: usize, l: usize, a: usize| if k == l { tensor.slabs[k][a] } else { 0.0 };

    let mut out = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in 0..p {
            let mut acc = 0.0;
            for k1 in 0..np {
                for k2 in 0..np {
                    let h1 = dense(k1, k2, a);
                    if h1 == 0.0 {
                        continue;
                    }
                    for k3 in 0..np {
                        let g13 = ginv[(k1, k3)];
                        if g13 == 0.0 {
                            continue;
                        }
                        for k4 in 0..np {
                            acc += h1 * dense(k3, k4, b) * g13 * ginv[(k2, k4)];
                        }
                    }
                }
            }
            out[(a, b)] = acc;
        }
    }
    Ok(out)
}

/// Statistical curvature of the fixed-eigenvalue submanifold,
/// `2 Σ_{a<b} (λ_a² + λ_b²) / (λ_a - λ_b)²`.
pub fn statistical_curvature(lambda: &[f64]) -> Result<f64> {
    validate_eigenvalues(lambda)?;
    Ok(pairs(lambda.len())
        .into_iter()
        .map(|(a, b)| {
            let d = lambda[a] - lambda[b];
            2.0 * (lambda[a] * lambda[a] + lambda[b] * lambda[b]) / (d * d)
        })
        .sum())
}
