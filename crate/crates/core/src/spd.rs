//! Coordinate systems on the manifold of zero-mean Gaussian covariances.
//!
//! A point is a symmetric positive-definite matrix `Σ`. Three charts are
//! used throughout the crate:
//!
//! * the covariance (expectation) coordinates `σ_ij`, i.e. [`SpdMatrix`];
//! * the natural coordinates `θ^ii = -σ^ii / 2`, `θ^ij = -σ^ij` built from
//!   the entries of `Σ⁻¹`, i.e. [`NaturalCoords`];
//! * spectral coordinates `(λ, u)`, where `Σ = Γ exp(U) Λ exp(U)ᵀ Γᵀ` around
//!   an anchor [`Spectrum`] `(λ, Γ)` and `U` is the skew matrix built from
//!   [`SkewParams`].
//!
//! All indices are zero-based. Pairs `(s, t)` always satisfy `s < t`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue gap below which spectral coordinates are refused.
pub const RELATIVE_GAP_TOLERANCE: f64 = 1e-8;
/// Smallest admissible eigenvalue, relative to the trace.
pub const POSITIVITY_THRESHOLD: f64 = 1e-12;
pub const ROUNDTRIP_TOLERANCE: f64 = 1e-10;
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-10;
/// Maximum asymmetry accepted (relative to the largest entry) before averaging.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// A symmetric positive-definite covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    m: DMatrix<f64>,
}

impl SpdMatrix {
    /// Validates symmetry and positive definiteness.
    ///
    /// Small asymmetries (below [`SYMMETRY_TOLERANCE`]) are removed by
    /// averaging with the transpose, so the stored matrix is exactly
    /// symmetric.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidArgument("empty matrix".into()));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
        }
        let scale = m.amax().max(1.0);
        let max_asymmetry = max_asymmetry(&m);
        if max_asymmetry > SYMMETRY_TOLERANCE * scale {
            return Err(Error::NotSymmetric { max_asymmetry });
        }
        let m = symmetrize(&m);
        check_positive_definite(&m)?;
        Ok(Self { m })
    }

    /// `diag(values)`; every value must be positive.
    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(values)))
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim),
        }
    }

    /// Builds `O diag(values) Oᵀ` for an orthogonal `O`.
    pub fn from_eigen(values: &[f64], orthogonal: &DMatrix<f64>) -> Result<Self> {
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(values));
        Self::new(symmetrize(&(orthogonal * d * orthogonal.transpose())))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| self.m.row(i).iter().copied().collect())
            .collect()
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        // Cholesky always succeeds here; construction certified positivity.
        let inv = nalgebra::Cholesky::new(self.m.clone())
            .map(|c| c.inverse())
            .unwrap_or_else(|| self.m.clone().try_inverse().expect("SPD matrix is invertible"));
        symmetrize(&inv)
    }

    pub fn log_det(&self) -> f64 {
        match nalgebra::Cholesky::new(self.m.clone()) {
            Some(c) => 2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
            None => self.eigenvalues().iter().map(|l| l.ln()).sum(),
        }
    }

    /// Eigenvalues in descending order (no gap requirement).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.m.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    /// `c Σ`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.m * c)
    }

    /// `O Σ Oᵀ`.
    pub fn conjugated(&self, orthogonal: &DMatrix<f64>) -> Result<Self> {
        Self::new(symmetrize(&(orthogonal * &self.m * orthogonal.transpose())))
    }
}

pub(crate) fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn check_positive_definite(m: &DMatrix<f64>) -> Result<()> {
    let eig = SymmetricEigen::new(m.clone());
    let min_eigenvalue = eig.eigenvalues.min();
    let threshold = POSITIVITY_THRESHOLD * m.trace().abs();
    if !(min_eigenvalue > threshold) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue,
            threshold,
        });
    }
    Ok(())
}

/// Checks that `lambda` is positive and strictly descending with relative
/// gaps of at least [`RELATIVE_GAP_TOLERANCE`].
pub fn validate_eigenvalues(lambda: &[f64]) -> Result<()> {
    if lambda.is_empty() {
        return Err(Error::InvalidSpectrum("no eigenvalues".into()));
    }
    if lambda.iter().any(|l| !l.is_finite() || *l <= 0.0) {
        return Err(Error::InvalidSpectrum(format!("{lambda:?} has non-positive entries")));
    }
    let tolerance = RELATIVE_GAP_TOLERANCE * lambda[0];
    for (index, w) in lambda.windows(2).enumerate() {
        let gap = w[0] - w[1];
        if gap < -tolerance {
            return Err(Error::InvalidSpectrum(format!("{lambda:?} is not descending")));
        }
        if gap < tolerance {
            return Err(Error::NearDegenerateSpectrum {
                index,
                gap,
                tolerance,
            });
        }
    }
    Ok(())
}

pub(crate) fn orthogonality_defect(o: &DMatrix<f64>) -> f64 {
    let n = o.nrows();
    (o.transpose() * o - DMatrix::<f64>::identity(n, n)).amax()
}

pub fn check_orthogonal(o: &DMatrix<f64>) -> Result<()> {
    if !o.is_square() {
        return Err(Error::DimensionMismatch {
            expected: o.nrows(),
            found: o.ncols(),
        });
    }
    let deviation = orthogonality_defect(o);
    if !(deviation <= ORTHOGONALITY_TOLERANCE) {
        return Err(Error::NotOrthogonal { deviation });
    }
    Ok(())
}

/// Eigenvalues `λ_1 > … > λ_p > 0` and the orthogonal matrix `Γ` whose
/// columns are the matching eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    lambda: Vec<f64>,
    gamma: DMatrix<f64>,
}

impl Spectrum {
    pub fn new(lambda: Vec<f64>, gamma: DMatrix<f64>) -> Result<Self> {
        validate_eigenvalues(&lambda)?;
        if gamma.nrows() != lambda.len() {
            return Err(Error::DimensionMismatch {
                expected: lambda.len(),
                found: gamma.nrows(),
            });
        }
        check_orthogonal(&gamma)?;
        Ok(Self { lambda, gamma })
    }

    /// Anchor with `Γ = I`.
    pub fn diagonal(lambda: Vec<f64>) -> Result<Self> {
        let p = lambda.len();
        Self::new(lambda, DMatrix::identity(p, p))
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    /// `Γ diag(λ) Γᵀ`, symmetrized.
    pub fn compose(&self) -> SpdMatrix {
        SpdMatrix {
            m: compose_raw(&self.lambda, &self.gamma),
        }
    }
}

pub(crate) fn compose_raw(lambda: &[f64], gamma: &DMatrix<f64>) -> DMatrix<f64> {
    let mut scaled = gamma.clone();
    for (j, l) in lambda.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*l);
    }
    symmetrize(&(scaled * gamma.transpose()))
}

/// Spectral decomposition with descending eigenvalues and a deterministic
/// sign per eigenvector (largest-magnitude entry positive).
pub fn spectral_decompose(s: &SpdMatrix) -> Result<Spectrum> {
    let (lambda, gamma) = sorted_eigen(s.as_matrix());
    validate_eigenvalues(&lambda)?;
    Ok(Spectrum { lambda, gamma })
}

/// Descending eigenpairs with the sign convention applied, no gap check.
pub(crate) fn sorted_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let p = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut gamma = DMatrix::zeros(p, p);
    for (j, &k) in order.iter().enumerate() {
        gamma.set_column(j, &eig.eigenvectors.column(k));
    }
    apply_sign_convention(&mut gamma);
    (lambda, gamma)
}

/// Flips columns so that the entry of largest magnitude is positive. Entries
/// tied to within 1e-12 resolve to the lowest row index.
pub fn apply_sign_convention(gamma: &mut DMatrix<f64>) {
    for j in 0..gamma.ncols() {
        let col = gamma.column(j);
        let amax = col.amax();
        let lead = col
            .iter()
            .position(|x| x.abs() >= amax - 1e-12)
            .unwrap_or(0);
        if col[lead] < 0.0 {
            gamma.column_mut(j).neg_mut();
        }
    }
}

/// Number of pairs `(s, t)` with `s < t < p`.
pub fn pair_count(p: usize) -> usize {
    p * p.saturating_sub(1) / 2
}

/// Flat offset of the pair `(s, t)`, row-major over `s < t`.
pub fn pair_offset(p: usize, s: usize, t: usize) -> Result<usize> {
    if s >= t || t >= p {
        return Err(Error::IndexOutOfRange {
            index: if t >= p { t } else { s },
            dim: p,
        });
    }
    Ok(s * (2 * p - s - 1) / 2 + (t - s - 1))
}

/// All pairs `(s, t)`, `s < t`, in flat-offset order.
pub fn pairs(p: usize) -> Vec<(usize, usize)> {
    (0..p)
        .flat_map(|s| ((s + 1)..p).map(move |t| (s, t)))
        .collect()
}

/// Chart coordinates on the orthogonal group: one entry per pair `(s, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewParams {
    dim: usize,
    u: Vec<f64>,
}

impl SkewParams {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            u: vec![0.0; pair_count(dim)],
        }
    }

    pub fn new(dim: usize, u: Vec<f64>) -> Result<Self> {
        if u.len() != pair_count(dim) {
            return Err(Error::DimensionMismatch {
                expected: pair_count(dim),
                found: u.len(),
            });
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite skew parameter".into()));
        }
        Ok(Self { dim, u })
    }

    /// A single nonzero coordinate `u_(s,t) = value`.
    pub fn single(dim: usize, s: usize, t: usize, value: f64) -> Result<Self> {
        let mut out = Self::zeros(dim);
        out.u[pair_offset(dim, s, t)?] = value;
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn get(&self, s: usize, t: usize) -> Result<f64> {
        Ok(self.u[pair_offset(self.dim, s, t)?])
    }

    /// `U` with `U_st = u_st`, `U_ts = -u_st`.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for ((s, t), v) in pairs(self.dim).into_iter().zip(&self.u) {
            m[(s, t)] = *v;
            m[(t, s)] = -*v;
        }
        m
    }
}

/// `exp(U)`, an orthogonal matrix with determinant +1.
pub fn exp_skew(u: &SkewParams) -> DMatrix<f64> {
    if u.dim == 2 {
        let (sin, cos) = u.u[0].sin_cos();
        return DMatrix::from_row_slice(2, 2, &[cos, sin, -sin, cos]);
    }
    expm(&u.to_matrix())
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub(crate) fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm: f64 = (0..n)
        .map(|j| a.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings);
    let mut result = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=30 {
        term = &term * &scaled / k as f64;
        result += &term;
        if term.amax() < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// `Γ exp(U) diag(λ) exp(U)ᵀ Γᵀ` for arbitrary `λ`; no validation. This is
/// the raw chart map used by finite-difference oracles.
pub fn chart_matrix(gamma: &DMatrix<f64>, lambda: &[f64], u: &SkewParams) -> DMatrix<f64> {
    let o = gamma * exp_skew(u);
    compose_raw(lambda, &o)
}

/// The covariance at spectral coordinates `u` around `base`.
pub fn sigma_of_coords(base: &Spectrum, u: &SkewParams) -> Result<SpdMatrix> {
    if u.dim() != base.dim() {
        return Err(Error::DimensionMismatch {
            expected: base.dim(),
            found: u.dim(),
        });
    }
    Ok(SpdMatrix {
        m: chart_matrix(&base.gamma, &base.lambda, u),
    })
}

/// Natural parameters, packed row-major over `i <= j`.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalCoords {
    dim: usize,
    theta: Vec<f64>,
}

fn upper_offset(p: usize, i: usize, j: usize) -> usize {
    i * (2 * p - i + 1) / 2 + (j - i)
}

impl NaturalCoords {
    pub fn new(dim: usize, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != dim * (dim + 1) / 2 {
            return Err(Error::DimensionMismatch {
                expected: dim * (dim + 1) / 2,
                found: theta.len(),
            });
        }
        Ok(Self { dim, theta })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.theta
    }

    /// `θ^ij`; the order of `i` and `j` does not matter.
    pub fn theta(&self, i: usize, j: usize) -> Result<f64> {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        if j >= self.dim {
            return Err(Error::IndexOutOfRange {
                index: j,
                dim: self.dim,
            });
        }
        Ok(self.theta[upper_offset(self.dim, i, j)])
    }
}

pub fn to_natural(s: &SpdMatrix) -> NaturalCoords {
    let p = s.dim();
    let inv = s.inverse();
    let mut theta = Vec::with_capacity(p * (p + 1) / 2);
    for i in 0..p {
        for j in i..p {
            theta.push(if i == j { -0.5 * inv[(i, i)] } else { -inv[(i, j)] });
        }
    }
    NaturalCoords { dim: p, theta }
}

pub fn from_natural(theta: &NaturalCoords) -> Result<SpdMatrix> {
    let p = theta.dim;
    let mut precision = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = theta.theta[upper_offset(p, i, j)];
            if i == j {
                precision[(i, i)] = -2.0 * v;
            } else {
                precision[(i, j)] = -v;
                precision[(j, i)] = -v;
            }
        }
    }
    let precision = SpdMatrix::new(precision)?;
    SpdMatrix::new(precision.inverse())
}

/// `tr(S T⁻¹) - log|S T⁻¹| - p` between `N(0, S)` and `N(0, T)`.
pub fn kl_divergence(s: &SpdMatrix, t: &SpdMatrix) -> Result<f64> {
    if s.dim() != t.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            found: t.dim(),
        });
    }
    let tr = (s.as_matrix() * t.inverse()).trace();
    let value = tr - (s.log_det() - t.log_det()) - s.dim() as f64;
    Ok(value.max(0.0))
}

/// The diagonal of `Γᵀ S Γ`: the point of `{Γ diag(μ) Γᵀ}` closest to `S`
/// in Kullback-Leibler divergence.
pub fn kl_project(s: &SpdMatrix, gamma: &DMatrix<f64>) -> Result<Vec<f64>> {
    if gamma.nrows() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            found: gamma.nrows(),
        });
    }
    check_orthogonal(gamma)?;
    let rotated = gamma.transpose() * s.as_matrix() * gamma;
    Ok(rotated.diagonal().iter().copied().collect())
}

/// `[[cos θ, -sin θ], [sin θ, cos θ]]`.
pub fn rotation2(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}
