//! Likelihood-ratio tests of `H0: Σ = I` from the full product-sum matrix
//! and from its eigenvalues alone, with Monte-Carlo calibration.
//!
//! Both statistics are returned on the log scale and the null is rejected
//! for small values.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::OrthogonalEnsemble;
use crate::rng::{experiment, StreamKey};
use crate::sim::{descending_eigenvalues, WishartSampler};
use crate::spd::SpdMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TestKind {
    FullLrt,
    EigenLrt,
}

impl TestKind {
    pub fn label(self) -> &'static str {
        match self {
            TestKind::FullLrt => "full_lrt",
            TestKind::EigenLrt => "eigen_lrt",
        }
    }

    fn stream_id(self) -> u64 {
        match self {
            TestKind::FullLrt => 0,
            TestKind::EigenLrt => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestStatistic {
    pub value: f64,
    pub kind: TestKind,
    pub n: usize,
    pub p: usize,
    /// Maximizing eigenvalues of the eigenvalue likelihood (eigen test only).
    pub lambda_mle: Option<Vec<f64>>,
}

/// `(pn/2)(1 - log n) - tr(S)/2 + (n/2) log|S|`.
pub fn full_lrt_stat(s: &SpdMatrix, n: usize) -> Result<TestStatistic> {
    let p = s.dim();
    if n < p {
        return Err(Error::InvalidArgument(format!("need n >= p (n = {n}, p = {p})")));
    }
    Ok(TestStatistic {
        value: full_lrt_value(p, n, s.trace(), s.log_det()),
        kind: TestKind::FullLrt,
        n,
        p,
        lambda_mle: None,
    })
}

fn full_lrt_value(p: usize, n: usize, trace: f64, log_det: f64) -> f64 {
    let (pf, nf) = (p as f64, n as f64);
    0.5 * pf * nf * (1.0 - nf.ln()) - 0.5 * trace + 0.5 * nf * log_det
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

fn check_eigenvalues(l: &[f64]) -> Result<()> {
    if l.is_empty() {
        return Err(Error::InvalidSpectrum("empty".into()));
    }
    if l.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(Error::InvalidSpectrum(format!("{l:?} has non-positive entries")));
    }
    if l.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidSpectrum(format!("{l:?} is not descending")));
    }
    Ok(())
}

/// `Σ`-dependent part of the log density of the sample eigenvalues `l`:
/// `-(n/2) log|Σ| + log ∫ exp(-tr(H L Hᵀ Σ⁻¹)/2) dμ(H)`.
///
/// Factors that do not involve `Σ` are omitted, so this is not a
/// normalized density.
pub fn eigen_log_density_kernel(l: &[f64], sigma: &SpdMatrix, n: usize, ensemble: &OrthogonalEnsemble) -> Result<f64> {
    check_eigenvalues(l)?;
    let p = l.len();
    if sigma.dim() != p || ensemble.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: if sigma.dim() != p { sigma.dim() } else { ensemble.dim() },
        });
    }
    let inv = sigma.inverse();
    let terms: Vec<f64> = ensemble
        .matrices()
        .iter()
        .zip(ensemble.weights())
        .map(|(h, w)| {
            let mut hl = h.clone();
            for (j, lj) in l.iter().enumerate() {
                hl.column_mut(j).scale_mut(*lj);
            }
            let q = (hl * h.transpose()).component_mul(&inv).sum();
            w.ln() - 0.5 * q
        })
        .collect();
    let integral = log_sum_exp(&terms);
    if !integral.is_finite() {
        return Err(Error::QuadratureUnderflow);
    }
    Ok(-0.5 * n as f64 * sigma.log_det() + integral)
}

/// Cyclic sweeps give up after this many passes.
pub const MAX_SWEEPS: usize = 200;
/// A sweep improving the objective by less than this ends the search.
pub const SWEEP_TOLERANCE: f64 = 1e-9;
/// Width of the final golden-section interval in `log λ`.
pub const LINE_TOLERANCE: f64 = 1e-7;
const MAX_BRACKET_STEPS: usize = 80;
const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Eigenvalue likelihood for a fixed ensemble and sample size, maximized
/// over `λ` by golden-section coordinate ascent in `log λ`.
#[derive(Debug, Clone)]
pub struct EigenLrt {
    p: usize,
    n: usize,
    log_weights: Vec<f64>,
    squares: Vec<Vec<f64>>,
}

#[derive(Default)]
struct Scratch {
    inv: Vec<f64>,
    terms: Vec<f64>,
}

/// The likelihood at one data point: `m[k][i] = Σ_j H_kij² l_j`.
struct Objective<'a> {
    p: usize,
    half_n: f64,
    log_weights: &'a [f64],
    m: Vec<f64>,
}

impl Objective<'_> {
    /// `-(n/2) Σ x_i + log Σ_k w_k exp(-Σ_i m_ki e^{-x_i} / 2)` with `x = log λ`.
    fn value(&self, x: &[f64], scratch: &mut Scratch) -> f64 {
        let p = self.p;
        scratch.inv.clear();
        scratch.inv.extend(x.iter().map(|xi| (-xi).exp()));
        scratch.terms.clear();
        let mut max = f64::NEG_INFINITY;
        for (k, lw) in self.log_weights.iter().enumerate() {
            let row = &self.m[k * p..(k + 1) * p];
            let q: f64 = row.iter().zip(&scratch.inv).map(|(a, b)| a * b).sum();
            let t = lw - 0.5 * q;
            max = max.max(t);
            scratch.terms.push(t);
        }
        if !max.is_finite() {
            return f64::NEG_INFINITY;
        }
        let lse = max + scratch.terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
        -self.half_n * x.iter().sum::<f64>() + lse
    }

    /// One fixed-point step `λ_i = E[m_i] / n` under the weights at `λ`.
    fn moment_step(&self, lambda: &[f64]) -> Vec<f64> {
        let p = self.p;
        let terms: Vec<f64> = self
            .log_weights
            .iter()
            .enumerate()
            .map(|(k, lw)| {
                let row = &self.m[k * p..(k + 1) * p];
                lw - 0.5 * row.iter().zip(lambda).map(|(a, b)| a / b).sum::<f64>()
            })
            .collect();
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut acc = vec![0.0; p];
        let mut total = 0.0;
        for (k, t) in terms.iter().enumerate() {
            let w = (t - max).exp();
            total += w;
            for i in 0..p {
                acc[i] += w * self.m[k * p + i];
            }
        }
        acc.into_iter().map(|a| a / (total * 2.0 * self.half_n)).collect()
    }

    /// Maximizes along coordinate `i` starting from `x` with value `f`.
    fn line_search(&self, x: &mut [f64], f: f64, i: usize, width: f64, scratch: &mut Scratch) -> Result<f64> {
        let origin = x[i];
        let mut eval = |t: f64, x: &mut [f64]| {
            x[i] = t;
            self.value(x, scratch)
        };

        // bracket a maximum: lo < mid < hi with f(mid) >= f(lo), f(hi)
        let (mut lo, mut mid, mut hi) = (origin - width, origin, origin + width);
        let (mut f_lo, mut f_mid, mut f_hi) = (eval(lo, x), f, eval(hi, x));
        let mut steps = 0;
        while f_lo > f_mid || f_hi > f_mid {
            steps += 1;
            if steps > MAX_BRACKET_STEPS || !f_lo.is_finite() || !f_hi.is_finite() {
                x[i] = origin;
                return Err(Error::OptimizerFailure {
                    sweeps: 0,
                    reason: format!("could not bracket a maximum along coordinate {}", i + 1),
                });
            }
            let step = 2.0 * (hi - lo);
            if f_hi > f_mid {
                (lo, f_lo) = (mid, f_mid);
                (mid, f_mid) = (hi, f_hi);
                hi = mid + step;
                f_hi = eval(hi, x);
            } else {
                (hi, f_hi) = (mid, f_mid);
                (mid, f_mid) = (lo, f_lo);
                lo = mid - step;
                f_lo = eval(lo, x);
            }
        }

        // golden section on [lo, hi]
        let (mut a, mut b) = (lo, hi);
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = eval(c, x);
        let mut fd = eval(d, x);
        while b - a > LINE_TOLERANCE {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = eval(c, x);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = eval(d, x);
            }
        }
        let (best_t, best_f) = [(mid, f_mid), (c, fc), (d, fd)]
            .into_iter()
            .fold((origin, f), |acc, cand| if cand.1 > acc.1 { cand } else { acc });
        x[i] = best_t;
        Ok(best_f)
    }

    fn ascend(&self, start: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut scratch = Scratch::default();
        let mut x: Vec<f64> = start.iter().map(|l| l.ln()).collect();
        let mut f = self.value(&x, &mut scratch);
        let mut widths = vec![0.5; self.p];
        for sweep in 1..=MAX_SWEEPS {
            let before = f;
            for i in 0..self.p {
                let old = x[i];
                f = self
                    .line_search(&mut x, f, i, widths[i], &mut scratch)
                    .map_err(|e| match e {
                        Error::OptimizerFailure { reason, .. } => Error::OptimizerFailure { sweeps: sweep, reason },
                        other => other,
                    })?;
                widths[i] = (2.0 * (x[i] - old).abs()).clamp(1e-4, 0.5);
            }
            if f - before < SWEEP_TOLERANCE {
                return Ok((f, x.iter().map(|v| v.exp()).collect()));
            }
        }
        Err(Error::OptimizerFailure {
            sweeps: MAX_SWEEPS,
            reason: format!("objective still improving after {MAX_SWEEPS} sweeps"),
        })
    }
}

impl EigenLrt {
    pub fn new(ensemble: &OrthogonalEnsemble, n: usize) -> Result<Self> {
        let p = ensemble.dim();
        if n < p {
            return Err(Error::InvalidArgument(format!("need n >= p (n = {n}, p = {p})")));
        }
        Ok(Self {
            p,
            n,
            log_weights: ensemble.weights().iter().map(|w| w.ln()).collect(),
            squares: ensemble.squared_entries(),
        })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    fn objective(&self, l: &[f64]) -> Objective<'_> {
        let p = self.p;
        let mut m = Vec::with_capacity(self.squares.len() * p);
        for sq in &self.squares {
            for i in 0..p {
                m.push((0..p).map(|j| sq[i * p + j] * l[j]).sum());
            }
        }
        Objective {
            p,
            half_n: 0.5 * self.n as f64,
            log_weights: &self.log_weights,
            m,
        }
    }

    /// Log statistic from raw sample eigenvalues `l` (of `S`), descending.
    pub fn statistic(&self, l: &[f64]) -> Result<TestStatistic> {
        check_eigenvalues(l)?;
        if l.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: l.len(),
            });
        }
        let obj = self.objective(l);
        let nf = self.n as f64;
        let lbar: Vec<f64> = l.iter().map(|x| x / nf).collect();
        let mean = lbar.iter().sum::<f64>() / self.p as f64;
        let starts = [lbar.clone(), obj.moment_step(&lbar), vec![mean; self.p]];

        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut last_err = None;
        for s in &starts {
            match obj.ascend(s) {
                Ok(r) => {
                    if best.as_ref().is_none_or(|b| r.0 > b.0) {
                        best = Some(r);
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
        let (sup, lambda) = match (best, last_err) {
            (Some(b), _) => b,
            (None, Some(e)) => return Err(e),
            (None, None) => unreachable!("at least one start"),
        };
        let numerator = -0.5 * l.iter().sum::<f64>();
        // λ = 1 is feasible and its objective equals the numerator
        let (sup, lambda) = if numerator > sup {
            (numerator, vec![1.0; self.p])
        } else {
            (sup, lambda)
        };
        let value = (numerator - sup).min(0.0);
        let mut lambda = lambda;
        lambda.sort_by(|a, b| b.total_cmp(a));
        Ok(TestStatistic {
            value,
            kind: TestKind::EigenLrt,
            n: self.n,
            p: self.p,
            lambda_mle: Some(lambda),
        })
    }
}

/// Eigenvalue-only log statistic
/// `-Σ l_i / 2 - sup_λ [-(n/2) Σ log λ_i + log ∫ exp(-tr(H L Hᵀ Λ⁻¹)/2) dμ(H)]`.
pub fn eigen_lrt_stat(l: &[f64], n: usize, ensemble: &OrthogonalEnsemble) -> Result<TestStatistic> {
    EigenLrt::new(ensemble, n)?.statistic(l)
}

/// A configured test: which statistic, at which `(p, n)`.
#[derive(Debug, Clone)]
pub enum LrTest {
    Full { p: usize, n: usize },
    Eigen(EigenLrt),
}

impl LrTest {
    pub fn new(kind: TestKind, p: usize, n: usize, ensemble: Option<&OrthogonalEnsemble>) -> Result<Self> {
        if n < p || p == 0 {
            return Err(Error::InvalidArgument(format!("need n >= p >= 1 (n = {n}, p = {p})")));
        }
        match kind {
            TestKind::FullLrt => Ok(LrTest::Full { p, n }),
            TestKind::EigenLrt => {
                let e = ensemble
                    .ok_or_else(|| Error::InvalidArgument("the eigenvalue test needs an ensemble".into()))?;
                if e.dim() != p {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        found: e.dim(),
                    });
                }
                Ok(LrTest::Eigen(EigenLrt::new(e, n)?))
            }
        }
    }

    pub fn kind(&self) -> TestKind {
        match self {
            LrTest::Full { .. } => TestKind::FullLrt,
            LrTest::Eigen(_) => TestKind::EigenLrt,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            LrTest::Full { p, .. } => *p,
            LrTest::Eigen(e) => e.p,
        }
    }

    pub fn sample_size(&self) -> usize {
        match self {
            LrTest::Full { n, .. } => *n,
            LrTest::Eigen(e) => e.n,
        }
    }

    /// Log statistic of a raw product-sum matrix.
    pub fn evaluate(&self, s: &DMatrix<f64>) -> Result<f64> {
        match self {
            LrTest::Full { p, n } => {
                let chol = nalgebra::Cholesky::new(s.clone()).ok_or(Error::NotPositiveDefinite {
                    min_eigenvalue: descending_eigenvalues(s).last().copied().unwrap_or(0.0),
                    threshold: 0.0,
                })?;
                let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
                Ok(full_lrt_value(*p, *n, s.trace(), log_det))
            }
            LrTest::Eigen(e) => Ok(e.statistic(&descending_eigenvalues(s))?.value),
        }
    }

    /// Statistics of `reps` draws from `N(0, Σ)`, in replication order.
    /// Numeric failures are returned as `None`.
    pub fn simulate(&self, sigma: &SpdMatrix, reps: usize, key: StreamKey) -> Result<Vec<Option<f64>>> {
        if sigma.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: sigma.dim(),
            });
        }
        let sampler = WishartSampler::new(sigma)?;
        let n = self.sample_size();
        let out: Vec<Result<Option<f64>>> = (0..reps as u64)
            .into_par_iter()
            .map(|r| {
                let s = sampler.sample_raw(n, &mut key.rng(r));
                match self.evaluate(&s) {
                    Ok(v) => Ok(Some(v)),
                    Err(e) if e.is_numeric_failure() => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect();
        out.into_iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub kind: TestKind,
    pub alpha: f64,
    pub threshold: f64,
    pub calib_reps: usize,
    pub seed: u64,
    pub failures: usize,
}

impl CriticalValue {
    pub fn rejects(&self, statistic: f64) -> bool {
        statistic < self.threshold
    }
}

/// Smallest calibration size accepted by [`calibrate`].
pub const MIN_CALIBRATION_REPS: usize = 1000;

/// Empirical lower `alpha`-quantile of the statistic under `Σ = I`: the
/// order statistic at index `⌊alpha · reps⌋`.
pub fn calibrate(test: &LrTest, alpha: f64, reps: usize, seed: u64) -> Result<CriticalValue> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if reps < MIN_CALIBRATION_REPS {
        return Err(Error::InvalidArgument(format!(
            "calibration needs at least {MIN_CALIBRATION_REPS} replications, got {reps}"
        )));
    }
    let key = StreamKey::new(seed, experiment::CALIBRATION, test.kind().stream_id());
    let sims = test.simulate(&SpdMatrix::identity(test.dim()), reps, key)?;
    let failures = sims.iter().filter(|s| s.is_none()).count();
    let mut values: Vec<f64> = sims.into_iter().flatten().collect();
    if values.is_empty() {
        return Err(Error::OptimizerFailure {
            sweeps: 0,
            reason: "every calibration replication failed".into(),
        });
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let idx = ((alpha * values.len() as f64).floor() as usize).min(values.len() - 1);
    Ok(CriticalValue {
        kind: test.kind(),
        alpha,
        threshold: values[idx],
        calib_reps: reps,
        seed,
        failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub rejection_rate: f64,
    pub stderr: f64,
    pub reps: usize,
    pub failures: usize,
}

/// Rejection rate and binomial standard error from simulated statistics.
pub fn rejection_rate(stats: &[Option<f64>], cv: &CriticalValue) -> PowerPoint {
    let ok: Vec<f64> = stats.iter().flatten().copied().collect();
    let m = ok.len();
    let rate = if m == 0 {
        f64::NAN
    } else {
        ok.iter().filter(|v| cv.rejects(**v)).count() as f64 / m as f64
    };
    PowerPoint {
        rejection_rate: rate,
        stderr: (rate * (1.0 - rate) / m as f64).sqrt(),
        reps: m,
        failures: stats.len() - m,
    }
}

/// Rejection rates at each alternative. Alternative `j` draws from the
/// stream keyed by grid index `j`, so tests sharing a seed see the same data.
pub fn power_curve(
    test: &LrTest,
    alternatives: &[SpdMatrix],
    cv: &CriticalValue,
    reps: usize,
    seed: u64,
) -> Result<Vec<PowerPoint>> {
    if cv.kind != test.kind() {
        return Err(Error::InvalidArgument(format!(
            "critical value calibrated for {} used with {}",
            cv.kind.label(),
            test.kind().label()
        )));
    }
    if reps == 0 {
        return Err(Error::InvalidArgument("need at least one replication".into()));
    }
    alternatives
        .iter()
        .enumerate()
        .map(|(j, sigma)| {
            let stats = test.simulate(sigma, reps, StreamKey::new(seed, experiment::POWER, j as u64))?;
            Ok(rejection_rate(&stats, cv))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{o2_equidistant, EnsembleKind};
    use crate::spd::rotation2;

    #[test]
    fn full_statistic_vanishes_at_scaled_identity() {
        let s = SpdMatrix::diagonal(&[10.0, 10.0]).unwrap();
        let t = full_lrt_stat(&s, 10).unwrap();
        assert!(t.value.abs() < 1e-12, "{}", t.value);
        let r = s.conjugated(&rotation2(0.4)).unwrap();
        assert!((full_lrt_stat(&r, 10).unwrap().value - t.value).abs() < 1e-12);
    }

    #[test]
    fn full_statistic_peaks_at_n_for_p1() {
        let n = 7;
        let at = |s: f64| full_lrt_stat(&SpdMatrix::diagonal(&[s]).unwrap(), n).unwrap().value;
        assert!(at(7.0) > at(6.9));
        assert!(at(7.0) > at(7.1));
    }

    #[test]
    fn kernel_at_scaled_identity() {
        let e = o2_equidistant(100).unwrap();
        let l = [3.0, 1.0];
        let c: f64 = 1.7;
        let v = eigen_log_density_kernel(&l, &SpdMatrix::diagonal(&[c, c]).unwrap(), 10, &e).unwrap();
        let expect = -0.5 * 10.0 * 2.0 * c.ln() - 4.0 / (2.0 * c);
        assert!((v - expect).abs() < 1e-12);
    }

    #[test]
    fn kernel_converges_under_refinement() {
        let sigma = SpdMatrix::diagonal(&[2.0, 1.0]).unwrap();
        let a = eigen_log_density_kernel(&[3.0, 1.0], &sigma, 10, &o2_equidistant(100).unwrap()).unwrap();
        let b = eigen_log_density_kernel(&[3.0, 1.0], &sigma, 10, &o2_equidistant(200).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn univariate_reduction() {
        let e = OrthogonalEnsemble::uniform(vec![DMatrix::identity(1, 1)], EnsembleKind::HaarMc).unwrap();
        for l in [3.0, 10.0, 25.0] {
            let n = 10;
            let eig = eigen_lrt_stat(&[l], n, &e).unwrap();
            let full = full_lrt_stat(&SpdMatrix::diagonal(&[l]).unwrap(), n).unwrap();
            assert!((eig.value - full.value).abs() < 1e-9, "{} vs {}", eig.value, full.value);
            let mle = eig.lambda_mle.unwrap()[0];
            assert!((mle - l / n as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn eigen_statistic_is_nonpositive() {
        let e = o2_equidistant(100).unwrap();
        for l in [[12.0, 9.0], [30.0, 2.0], [10.5, 9.5], [4.0, 3.0]] {
            let t = eigen_lrt_stat(&l, 10, &e).unwrap();
            assert!(t.value <= 0.0);
            assert!(t.value.is_finite());
        }
        assert!(eigen_lrt_stat(&[1.0, 2.0], 10, &e).is_err());
    }

    #[test]
    fn eigen_mle_is_a_stationary_point() {
        let e = o2_equidistant(100).unwrap();
        let l = [25.0, 4.0];
        let test = EigenLrt::new(&e, 10).unwrap();
        let t = test.statistic(&l).unwrap();
        let mle = t.lambda_mle.unwrap();
        let obj = test.objective(&l);
        let mut scratch = Scratch::default();
        let x: Vec<f64> = mle.iter().map(|v| v.ln()).collect();
        let f0 = obj.value(&x, &mut scratch);
        for i in 0..2 {
            for h in [1e-3, -1e-3] {
                let mut y = x.clone();
                y[i] += h;
                assert!(obj.value(&y, &mut scratch) <= f0 + 1e-9);
            }
        }
    }

    #[test]
    fn calibration_index_and_size() {
        let test = LrTest::new(TestKind::FullLrt, 2, 10, None).unwrap();
        let cv = calibrate(&test, 0.05, 2000, 11).unwrap();
        let sims = test
            .simulate(&SpdMatrix::identity(2), 2000, StreamKey::new(11, experiment::CALIBRATION, 0))
            .unwrap();
        let mut v: Vec<f64> = sims.into_iter().flatten().collect();
        v.sort_by(|a, b| a.total_cmp(b));
        assert_eq!(cv.threshold, v[100]);
        assert!(calibrate(&test, 0.05, 999, 11).is_err());
        assert!(calibrate(&test, 1.5, 2000, 11).is_err());

        let fresh = test
            .simulate(&SpdMatrix::identity(2), 4000, StreamKey::new(12, experiment::SIZE_CHECK, 0))
            .unwrap();
        let size = rejection_rate(&fresh, &cv);
        let band = 3.0 * (0.05f64 * 0.95 / 4000.0).sqrt() + 3.0 * (0.05f64 * 0.95 / 2000.0).sqrt();
        assert!((size.rejection_rate - 0.05).abs() < band, "{}", size.rejection_rate);
    }

    #[test]
    fn far_alternative_has_high_power() {
        let test = LrTest::new(TestKind::FullLrt, 2, 10, None).unwrap();
        let cv = calibrate(&test, 0.05, 2000, 5).unwrap();
        let pts = power_curve(&test, &[SpdMatrix::diagonal(&[5.0, 1.0]).unwrap()], &cv, 1000, 6).unwrap();
        // an independent 10^5-draw simulation puts this power at 0.881
        let band = 3.0 * pts[0].stderr + 3.0 * (0.881f64 * 0.119 / 1e5).sqrt() + 0.01;
        assert!((pts[0].rejection_rate - 0.881).abs() < band, "{:?} {:?}", pts[0], cv);
        assert!(pts[0].rejection_rate > 0.8);
        let eig = LrTest::new(TestKind::EigenLrt, 2, 10, None);
        assert!(eig.is_err());
        let wrong = LrTest::new(TestKind::EigenLrt, 2, 10, Some(&o2_equidistant(20).unwrap())).unwrap();
        assert!(power_curve(&wrong, &[SpdMatrix::identity(2)], &cv, 10, 1).is_err());
    }
}
