//! Wishart sampling and Monte-Carlo harnesses for risks and bias.
//!
//! Replications run in parallel, each on its own keyed stream
//! ([`StreamKey::rng`]); per-replication results are collected in
//! replication order and reduced sequentially, so every report is a pure
//! function of its inputs and seed.

use nalgebra::{Cholesky, DMatrix};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{lambda_star_from_eigenvalues, EstimatorKind, OrthogonalEnsemble};
use crate::rng::StreamKey;
use crate::spd::{check_orthogonal, SpdMatrix};

/// Draws product-sum matrices `S = Σ_i x_i x_iᵀ`, `x_i ~ N(0, Σ)`, from a
/// Cholesky factor computed once.
#[derive(Debug, Clone)]
pub struct WishartSampler {
    factor: DMatrix<f64>,
}

impl WishartSampler {
    pub fn new(sigma: &SpdMatrix) -> Result<Self> {
        let chol = Cholesky::new(sigma.as_matrix().clone()).ok_or(Error::NotPositiveDefinite {
            min_eigenvalue: sigma.eigenvalues().last().copied().unwrap_or(0.0),
            threshold: 0.0,
        })?;
        Ok(Self { factor: chol.l() })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// Unvalidated draw; symmetric by construction.
    pub fn sample_raw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let p = self.dim();
        let z = DMatrix::from_fn(p, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &self.factor * z;
        let mut s = &x * x.transpose();
        for i in 0..p {
            for j in 0..i {
                let v = 0.5 * (s[(i, j)] + s[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<SpdMatrix> {
        SpdMatrix::new(self.sample_raw(n, rng))
    }
}

/// One product-sum matrix of `n` draws from `N(0, Σ)`.
pub fn sample_product_sum<R: Rng + ?Sized>(sigma: &SpdMatrix, n: usize, rng: &mut R) -> Result<SpdMatrix> {
    if n < sigma.dim() {
        return Err(Error::InvalidArgument(format!(
            "need n >= p for a positive definite sum (n = {n}, p = {})",
            sigma.dim()
        )));
    }
    WishartSampler::new(sigma)?.sample(n, rng)
}

/// Descending eigenvalues of a symmetric matrix.
pub(crate) fn descending_eigenvalues(s: &DMatrix<f64>) -> Vec<f64> {
    let mut l: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
    l.sort_by(|a, b| b.total_cmp(a));
    l
}

/// An estimator as used inside the risk harness.
#[derive(Debug, Clone)]
pub enum RiskEstimator {
    Lbar,
    GammaFrame(DMatrix<f64>),
    Star(OrthogonalEnsemble),
    /// Returns the given vector regardless of the data.
    Oracle(Vec<f64>),
}

impl RiskEstimator {
    pub fn label(&self) -> &'static str {
        match self {
            RiskEstimator::Lbar => EstimatorKind::Lbar.label(),
            RiskEstimator::GammaFrame(_) => EstimatorKind::GammaFrame.label(),
            RiskEstimator::Star(_) => EstimatorKind::Star.label(),
            RiskEstimator::Oracle(_) => "oracle",
        }
    }

    fn validate(&self, p: usize) -> Result<()> {
        let dim = match self {
            RiskEstimator::Lbar => return Ok(()),
            RiskEstimator::GammaFrame(g) => {
                check_orthogonal(g)?;
                g.nrows()
            }
            RiskEstimator::Star(e) => e.dim(),
            RiskEstimator::Oracle(v) => v.len(),
        };
        if dim != p {
            return Err(Error::DimensionMismatch { expected: p, found: dim });
        }
        Ok(())
    }

    /// Estimate from a raw product-sum matrix.
    pub fn estimate(&self, s: &DMatrix<f64>, n: usize) -> Result<Vec<f64>> {
        let nf = n as f64;
        match self {
            RiskEstimator::Lbar => Ok(descending_eigenvalues(s).into_iter().map(|l| l / nf).collect()),
            RiskEstimator::GammaFrame(g) => {
                let r = g.transpose() * s * g;
                Ok(r.diagonal().iter().map(|x| x / nf).collect())
            }
            RiskEstimator::Star(e) => Ok(lambda_star_from_eigenvalues(&descending_eigenvalues(s), n, e)?.lambda_hat),
            RiskEstimator::Oracle(v) => Ok(v.clone()),
        }
    }
}

/// `KL(diag(estimate), diag(target)) = Σ_i (r_i - log r_i - 1)`, `r_i = estimate_i / target_i`.
pub fn kl_loss_diag(estimate: &[f64], target: &[f64]) -> Result<f64> {
    if estimate.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            found: estimate.len(),
        });
    }
    if estimate.iter().chain(target).any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(Error::InvalidArgument("KL loss needs positive finite vectors".into()));
    }
    Ok(estimate
        .iter()
        .zip(target)
        .map(|(e, t)| {
            let r = e / t;
            r - r.ln() - 1.0
        })
        .sum::<f64>()
        .max(0.0))
}

/// Sampling covariance and the eigenvalue vector estimates are scored against.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskScenario {
    pub sigma: SpdMatrix,
    pub target: Vec<f64>,
}

impl RiskScenario {
    /// `Σ = diag(λ)`, scored against `λ`.
    pub fn diagonal(lambda: &[f64]) -> Result<Self> {
        Ok(Self {
            sigma: SpdMatrix::diagonal(lambda)?,
            target: lambda.to_vec(),
        })
    }

    /// `Σ = Γ diag(λ) Γᵀ`, scored against `λ`.
    pub fn rotated(lambda: &[f64], gamma: &DMatrix<f64>) -> Result<Self> {
        check_orthogonal(gamma)?;
        Ok(Self {
            sigma: SpdMatrix::from_eigen(lambda, gamma)?,
            target: lambda.to_vec(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// Replications that contributed.
    pub reps: usize,
    /// Replications dropped after a numeric failure.
    pub failures: usize,
}

/// Mean and standard error of a sample.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let m = xs.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / m as f64;
    if m < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1) as f64;
    (mean, (var / m as f64).sqrt())
}

/// Per-replication losses of several estimators on common draws.
#[derive(Debug, Clone)]
pub struct RiskTable {
    labels: Vec<&'static str>,
    losses: Vec<Vec<f64>>,
    failures: usize,
}

impl RiskTable {
    pub fn labels(&self) -> &[&'static str] {
        &self.labels
    }

    pub fn failures(&self) -> usize {
        self.failures
    }

    pub fn losses(&self, estimator: usize) -> &[f64] {
        &self.losses[estimator]
    }

    pub fn risk(&self, estimator: usize) -> RiskEstimate {
        let (mean, stderr) = mean_stderr(&self.losses[estimator]);
        RiskEstimate {
            mean,
            stderr,
            reps: self.losses[estimator].len(),
            failures: self.failures,
        }
    }

    /// Mean and standard error of the paired difference `loss_a - loss_b`.
    pub fn difference(&self, a: usize, b: usize) -> (f64, f64) {
        let d: Vec<f64> = self.losses[a]
            .iter()
            .zip(&self.losses[b])
            .map(|(x, y)| x - y)
            .collect();
        mean_stderr(&d)
    }
}

/// Runs every estimator on the same `reps` draws. A replication where any
/// estimator fails numerically is dropped for all of them and counted;
/// other errors abort.
pub fn risk_table(
    estimators: &[RiskEstimator],
    scenario: &RiskScenario,
    n: usize,
    reps: usize,
    key: StreamKey,
) -> Result<RiskTable> {
    let p = scenario.sigma.dim();
    if scenario.target.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: scenario.target.len(),
        });
    }
    if n < p {
        return Err(Error::InvalidArgument(format!("need n >= p (n = {n}, p = {p})")));
    }
    if reps == 0 || estimators.is_empty() {
        return Err(Error::InvalidArgument("need at least one replication and one estimator".into()));
    }
    for e in estimators {
        e.validate(p)?;
    }
    let sampler = WishartSampler::new(&scenario.sigma)?;
    let per_rep: Vec<Result<Option<Vec<f64>>>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let s = sampler.sample_raw(n, &mut key.rng(r));
            let mut out = Vec::with_capacity(estimators.len());
            for e in estimators {
                match e.estimate(&s, n) {
                    Ok(est) => out.push(kl_loss_diag(&est, &scenario.target)?),
                    Err(err) if err.is_numeric_failure() => return Ok(None),
                    Err(err) => return Err(err),
                }
            }
            Ok(Some(out))
        })
        .collect();

    let mut losses = vec![Vec::with_capacity(reps); estimators.len()];
    let mut failures = 0;
    for r in per_rep {
        match r? {
            Some(row) => {
                for (acc, v) in losses.iter_mut().zip(row) {
                    acc.push(v);
                }
            }
            None => failures += 1,
        }
    }
    Ok(RiskTable {
        labels: estimators.iter().map(RiskEstimator::label).collect(),
        losses,
        failures,
    })
}

/// Monte-Carlo KL risk of one estimator.
pub fn kl_risk(
    estimator: &RiskEstimator,
    scenario: &RiskScenario,
    n: usize,
    reps: usize,
    key: StreamKey,
) -> Result<RiskEstimate> {
    Ok(risk_table(std::slice::from_ref(estimator), scenario, n, reps, key)?.risk(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialSumCheck {
    /// Number of leading eigenvalues summed.
    pub j: usize,
    pub mean: f64,
    pub target: f64,
    pub stderr: f64,
    /// `mean - target > 3 stderr`.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorizationReport {
    pub lambda: Vec<f64>,
    pub n: usize,
    pub reps: usize,
    pub mean_lbar: Vec<f64>,
    pub stderr_lbar: Vec<f64>,
    /// Checks for `j = 1..p-1`.
    pub partial_sums: Vec<PartialSumCheck>,
    /// Largest per-draw `|Σ_i l̄_i - tr S̄| / tr S̄`.
    pub trace_max_rel_error: f64,
    /// Mean of `Σ_i l̄_i` against `Σ_i λ_i`.
    pub mean_trace: f64,
    pub trace_stderr: f64,
}

impl MajorizationReport {
    pub fn all_hold(&self) -> bool {
        self.partial_sums.iter().all(|c| c.holds)
    }
}

/// Checks that `E[l̄]` majorizes `λ`: leading partial sums of the mean sample
/// eigenvalues exceed those of `λ` beyond three standard errors.
pub fn bias_majorization_check(sigma: &SpdMatrix, n: usize, reps: usize, key: StreamKey) -> Result<MajorizationReport> {
    let p = sigma.dim();
    if n < p || reps < 2 {
        return Err(Error::InvalidArgument(format!(
            "need n >= p and reps >= 2 (n = {n}, p = {p}, reps = {reps})"
        )));
    }
    let lambda = sigma.eigenvalues();
    let sampler = WishartSampler::new(sigma)?;
    let nf = n as f64;
    let draws: Vec<(Vec<f64>, f64)> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let s = sampler.sample_raw(n, &mut key.rng(r));
            let l: Vec<f64> = descending_eigenvalues(&s).into_iter().map(|x| x / nf).collect();
            let tr = s.trace() / nf;
            let err = (l.iter().sum::<f64>() - tr).abs() / tr;
            (l, err)
        })
        .collect();

    let column = |f: &dyn Fn(&[f64]) -> f64| -> Vec<f64> { draws.iter().map(|(l, _)| f(l)).collect() };
    let mut mean_lbar = Vec::with_capacity(p);
    let mut stderr_lbar = Vec::with_capacity(p);
    for i in 0..p {
        let (m, se) = mean_stderr(&column(&|l| l[i]));
        mean_lbar.push(m);
        stderr_lbar.push(se);
    }
    let partial_sums = (1..p)
        .map(|j| {
            let (mean, stderr) = mean_stderr(&column(&|l| l[..j].iter().sum()));
            let target: f64 = lambda[..j].iter().sum();
            PartialSumCheck {
                j,
                mean,
                target,
                stderr,
                holds: mean - target > 3.0 * stderr,
            }
        })
        .collect();
    let (mean_trace, trace_stderr) = mean_stderr(&column(&|l| l.iter().sum()));
    let trace_max_rel_error = draws.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    Ok(MajorizationReport {
        lambda,
        n,
        reps,
        mean_lbar,
        stderr_lbar,
        partial_sums,
        trace_max_rel_error,
        mean_trace,
        trace_stderr,
    })
}
