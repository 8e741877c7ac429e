//! Eigenvalue estimators and orthogonal-group quadrature.
//!
//! Three estimators of the population eigenvalues from the product-sum
//! matrix `S` of `n` observations (`S̄ = S / n`):
//!
//! * [`lbar`]: eigenvalues of `S̄`, sorted descending;
//! * [`lambda_hat`]: the diagonal of `Γᵀ S̄ Γ` for a known eigenvector frame
//!   `Γ`, in frame order;
//! * [`lambda_star`]: the frame diagonal averaged over `O(p)` under the
//!   conditional density of the eigenvectors given the sample eigenvalues,
//!
//!   `λ*_i = ∫ (Γᵀ L̄ Γ)_ii exp(-(n/2) tr(L Γᵀ L⁻¹ Γ)) dμ(Γ) / ∫ exp(…) dμ(Γ)`,
//!
//!   evaluated by quadrature over an [`OrthogonalEnsemble`].

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{experiment, StreamKey};
use crate::spd::{check_orthogonal, rotation2, sorted_eigen, validate_eigenvalues, SpdMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorKind {
    /// Scaled sample eigenvalues.
    Lbar,
    /// Diagonal of the sample covariance in a known frame.
    GammaFrame,
    /// Orthogonal-group averaged frame diagonal.
    Star,
}

impl EstimatorKind {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Lbar => "lbar",
            EstimatorKind::GammaFrame => "gamma_frame",
            EstimatorKind::Star => "star",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenEstimate {
    pub lambda_hat: Vec<f64>,
    pub method: EstimatorKind,
    /// Quadrature size for [`EstimatorKind::Star`].
    pub meta: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnsembleKind {
    EquidistantO2,
    HaarMc,
}

/// Weighted quadrature nodes on `O(p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalEnsemble {
    dim: usize,
    matrices: Vec<DMatrix<f64>>,
    weights: Vec<f64>,
    kind: EnsembleKind,
}

impl OrthogonalEnsemble {
    pub fn new(matrices: Vec<DMatrix<f64>>, weights: Vec<f64>, kind: EnsembleKind) -> Result<Self> {
        let dim = matrices
            .first()
            .map(|m| m.nrows())
            .ok_or_else(|| Error::InvalidArgument("empty ensemble".into()))?;
        if weights.len() != matrices.len() {
            return Err(Error::DimensionMismatch {
                expected: matrices.len(),
                found: weights.len(),
            });
        }
        for m in &matrices {
            if m.nrows() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: m.nrows(),
                });
            }
            check_orthogonal(m)?;
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("ensemble weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("ensemble weights sum to zero".into()));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self {
            dim,
            matrices,
            weights,
            kind,
        })
    }

    /// Uniformly weighted ensemble.
    pub fn uniform(matrices: Vec<DMatrix<f64>>, kind: EnsembleKind) -> Result<Self> {
        let w = vec![1.0; matrices.len()];
        Self::new(matrices, w, kind)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn kind(&self) -> EnsembleKind {
        self.kind
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Squared entries `H_ij²` of every member, row-major. Integrands of the
    /// form `tr(H D Hᵀ E)` with diagonal `D`, `E` only need these.
    pub(crate) fn squared_entries(&self) -> Vec<Vec<f64>> {
        let p = self.dim;
        self.matrices
            .iter()
            .map(|h| {
                let mut out = Vec::with_capacity(p * p);
                for i in 0..p {
                    for j in 0..p {
                        out.push(h[(i, j)] * h[(i, j)]);
                    }
                }
                out
            })
            .collect()
    }
}

/// `K` rotations `R(kπ/K)`, `k = 0..K`, uniformly weighted.
///
/// For integrands that see `Γ` only through `Γ D Γᵀ` (diagonal `D`), `R(θ + π)`
/// acts like `R(θ)` and every reflection acts like some rotation, so these
/// nodes represent all of `O(2)`.
pub fn o2_equidistant(k: usize) -> Result<OrthogonalEnsemble> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 nodes, got {k}")));
    }
    let matrices = (0..k).map(|j| rotation2(j as f64 * PI / k as f64)).collect();
    OrthogonalEnsemble::uniform(matrices, EnsembleKind::EquidistantO2)
}

/// One Haar-distributed orthogonal matrix: QR of a standard Gaussian matrix
/// with the signs of `R`'s diagonal moved into `Q`.
pub fn haar_orthogonal<R: Rng + ?Sized>(p: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

pub fn haar_sample<R: Rng + ?Sized>(p: usize, m: usize, rng: &mut R) -> Result<OrthogonalEnsemble> {
    if m == 0 || p == 0 {
        return Err(Error::InvalidArgument("haar ensemble needs m >= 1 and p >= 1".into()));
    }
    let matrices = (0..m).map(|_| haar_orthogonal(p, rng)).collect();
    OrthogonalEnsemble::uniform(matrices, EnsembleKind::HaarMc)
}

/// How to build an ensemble: `equidistant:K` (p = 2 only) or `haar:m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnsembleSpec {
    Equidistant(usize),
    Haar(usize),
}

impl EnsembleSpec {
    /// Estimation default: 50 equidistant nodes at p = 2, 4096 Haar draws otherwise.
    pub fn estimation_default(p: usize) -> Self {
        if p == 2 {
            EnsembleSpec::Equidistant(50)
        } else {
            EnsembleSpec::Haar(4096)
        }
    }

    /// Testing default: 100 equidistant nodes at p = 2, 8192 Haar draws otherwise.
    pub fn testing_default(p: usize) -> Self {
        if p == 2 {
            EnsembleSpec::Equidistant(100)
        } else {
            EnsembleSpec::Haar(8192)
        }
    }

    pub fn size(&self) -> usize {
        match *self {
            EnsembleSpec::Equidistant(k) | EnsembleSpec::Haar(k) => k,
        }
    }

    /// Haar draws come from the stream keyed by `seed`.
    pub fn build(&self, p: usize, seed: u64) -> Result<OrthogonalEnsemble> {
        match *self {
            EnsembleSpec::Equidistant(k) => {
                if p != 2 {
                    return Err(Error::InvalidArgument(format!(
                        "equidistant ensembles exist only for p = 2 (got p = {p})"
                    )));
                }
                o2_equidistant(k)
            }
            EnsembleSpec::Haar(m) => {
                let mut rng = StreamKey::new(seed, experiment::ENSEMBLE, p as u64).rng(m as u64);
                haar_sample(p, m, &mut rng)
            }
        }
    }
}

impl fmt::Display for EnsembleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnsembleSpec::Equidistant(k) => write!(f, "equidistant:{k}"),
            EnsembleSpec::Haar(m) => write!(f, "haar:{m}"),
        }
    }
}

impl FromStr for EnsembleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, size) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidArgument(format!("ensemble '{s}' is not of the form kind:size")))?;
        let size: usize = size
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad ensemble size in '{s}'")))?;
        match kind.trim() {
            "equidistant" => Ok(EnsembleSpec::Equidistant(size)),
            "haar" => Ok(EnsembleSpec::Haar(size)),
            other => Err(Error::InvalidArgument(format!("unknown ensemble kind '{other}'"))),
        }
    }
}

fn check_n(n: usize, p: usize) -> Result<()> {
    if n < p {
        return Err(Error::InvalidArgument(format!("need n >= p (n = {n}, p = {p})")));
    }
    Ok(())
}

/// Eigenvalues of `S / n`, descending.
pub fn lbar(s: &SpdMatrix, n: usize) -> Result<EigenEstimate> {
    check_n(n, s.dim())?;
    let nf = n as f64;
    Ok(EigenEstimate {
        lambda_hat: s.eigenvalues().into_iter().map(|l| l / nf).collect(),
        method: EstimatorKind::Lbar,
        meta: None,
    })
}

/// `((Γᵀ S̄ Γ)_11, …, (Γᵀ S̄ Γ)_pp)`, in the order of `Γ`'s columns.
pub fn lambda_hat(s: &SpdMatrix, n: usize, gamma: &DMatrix<f64>) -> Result<EigenEstimate> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    if gamma.nrows() != s.dim() || gamma.ncols() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            found: gamma.nrows(),
        });
    }
    check_orthogonal(gamma)?;
    let nf = n as f64;
    let rotated = gamma.transpose() * s.as_matrix() * gamma;
    Ok(EigenEstimate {
        lambda_hat: rotated.diagonal().iter().map(|x| x / nf).collect(),
        method: EstimatorKind::GammaFrame,
        meta: None,
    })
}

/// Orthogonal-group averaged estimator from `S`. The sample eigenvalues must
/// be distinct (same gap policy as [`crate::spd::Spectrum`]).
pub fn lambda_star(s: &SpdMatrix, n: usize, ensemble: &OrthogonalEnsemble) -> Result<EigenEstimate> {
    check_n(n, s.dim())?;
    if ensemble.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            found: ensemble.dim(),
        });
    }
    let (l, _) = sorted_eigen(s.as_matrix());
    validate_eigenvalues(&l)?;
    lambda_star_from_eigenvalues(&l, n, ensemble)
}

/// The same estimator from raw sample eigenvalues `l` (of `S`, not `S̄`),
/// without the distinctness check.
pub fn lambda_star_from_eigenvalues(l: &[f64], n: usize, ensemble: &OrthogonalEnsemble) -> Result<EigenEstimate> {
    let p = l.len();
    if ensemble.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: ensemble.dim(),
        });
    }
    if l.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(Error::InvalidSpectrum(format!("{l:?} has non-positive entries")));
    }
    let nf = n as f64;
    let lbar: Vec<f64> = l.iter().map(|x| x / nf).collect();

    // log weight: log w_k - (n/2) Σ_ij Γ_ij² l_j / l_i
    let squares = ensemble.squared_entries();
    let log_weights: Vec<f64> = squares
        .iter()
        .zip(ensemble.weights())
        .map(|(sq, w)| {
            let mut tr = 0.0;
            for i in 0..p {
                let mut row = 0.0;
                for j in 0..p {
                    row += sq[i * p + j] * l[j];
                }
                tr += row / l[i];
            }
            w.ln() - 0.5 * nf * tr
        })
        .collect();
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::QuadratureUnderflow);
    }

    let mut numer = vec![0.0; p];
    let mut denom = 0.0;
    for (sq, lw) in squares.iter().zip(&log_weights) {
        let w = (lw - max).exp();
        denom += w;
        // (Γᵀ L̄ Γ)_ii = Σ_j Γ_ji² l̄_j
        for (i, acc) in numer.iter_mut().enumerate() {
            let mut v = 0.0;
            for j in 0..p {
                v += sq[j * p + i] * lbar[j];
            }
            *acc += w * v;
        }
    }
    if !(denom > 0.0) {
        return Err(Error::QuadratureUnderflow);
    }
    let mut lambda_hat: Vec<f64> = numer.into_iter().map(|x| x / denom).collect();
    lambda_hat.sort_by(|a, b| b.total_cmp(a));
    Ok(EigenEstimate {
        lambda_hat,
        method: EstimatorKind::Star,
        meta: Some(ensemble.len()),
    })
}
