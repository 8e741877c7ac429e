//! Experiment protocols: power curves of the two likelihood-ratio tests,
//! KL risks of the eigenvalue estimators over parameter grids, and the
//! bias majorization check. Reports render to versioned CSV.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::EnsembleSpec;
use crate::lrt::{calibrate, power_curve, rejection_rate, CriticalValue, LrTest, PowerPoint, TestKind};
use crate::rng::{experiment, StreamKey};
use crate::sim::{bias_majorization_check, risk_table, MajorizationReport, RiskEstimate, RiskEstimator, RiskScenario};
use crate::spd::{rotation2, SpdMatrix};

pub const POWER_SCHEMA: &str = "eigengeo.power.v1";
pub const RISK_SCHEMA: &str = "eigengeo.risk.v1";
pub const BIAS_SCHEMA: &str = "eigengeo.bias.v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Experiment {
    Figure3,
    Figure4,
    Figure5,
    Figure6,
    Bias,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Figure3 => "fig3",
            Experiment::Figure4 => "fig4",
            Experiment::Figure5 => "fig5",
            Experiment::Figure6 => "fig6",
            Experiment::Bias => "bias",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "fig3" => Ok(Experiment::Figure3),
            "fig4" => Ok(Experiment::Figure4),
            "fig5" => Ok(Experiment::Figure5),
            "fig6" => Ok(Experiment::Figure6),
            "bias" => Ok(Experiment::Bias),
            other => Err(Error::InvalidArgument(format!("unknown experiment '{other}'"))),
        }
    }

    /// Replications per grid point: the paper's count and the scaled-down default.
    pub fn reps(self, paper_scale: bool) -> usize {
        match (self, paper_scale) {
            (Experiment::Figure6, true) => 10_000,
            (Experiment::Figure6, false) => 1_000,
            (_, true) => 100_000,
            (_, false) => 10_000,
        }
    }

    fn stream(self) -> u64 {
        match self {
            Experiment::Figure3 => experiment::FIGURE3,
            Experiment::Figure4 => experiment::FIGURE4,
            Experiment::Figure5 => experiment::FIGURE5,
            Experiment::Figure6 => experiment::FIGURE6,
            Experiment::Bias => experiment::BIAS,
        }
    }
}

/// Power alternatives `θ_j = π/4 - (j-1)π/50`, `j = 1..51`.
pub fn figure3_grid() -> Vec<f64> {
    (1..=51).map(|j| PI / 4.0 - (j - 1) as f64 * PI / 50.0).collect()
}

/// Every fifth angle of [`figure3_grid`] (11 points).
pub fn figure3_subgrid() -> Vec<f64> {
    figure3_grid().into_iter().step_by(5).collect()
}

/// Alternative eigenvalues `(1, 1) + (cos θ, sin θ)/√2`.
pub fn figure3_alternative(theta: f64) -> [f64; 2] {
    [1.0 + FRAC_1_SQRT_2 * theta.cos(), 1.0 + FRAC_1_SQRT_2 * theta.sin()]
}

/// `c = 1, 0.98, …, 0.02`.
pub fn figure4_grid() -> Vec<f64> {
    (0..50).map(|k| (50 - k) as f64 / 50.0).collect()
}

/// Rotation angles `kπ/50`, `k = 0..25`, covering `[0, π/2]`.
pub fn figure5_grid() -> Vec<f64> {
    (0..=25).map(|k| k as f64 * PI / 50.0).collect()
}

/// `c = 0.04, 0.08, …, 1`.
pub fn figure6_grid() -> Vec<f64> {
    (1..=25).map(|k| k as f64 / 25.0).collect()
}

/// Eigenvalues held fixed while the frame rotates.
pub const FIGURE5_LAMBDA: [f64; 2] = [1.0, 0.8];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub p: usize,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    /// Scenario parameters: angles for figures 3 and 5, `c` for 4 and 6,
    /// population eigenvalues for the bias check.
    pub grid: Vec<f64>,
    pub ensemble: Option<EnsembleSpec>,
    pub alpha: f64,
}

impl ExperimentConfig {
    /// The protocol for `experiment` at `p = 2, n = 10` with its default grid.
    pub fn standard(experiment: Experiment, reps: usize, seed: u64) -> Self {
        let (grid, ensemble) = match experiment {
            Experiment::Figure3 => (figure3_subgrid(), Some(EnsembleSpec::testing_default(2))),
            Experiment::Figure4 => (figure4_grid(), None),
            Experiment::Figure5 => (figure5_grid(), None),
            Experiment::Figure6 => (figure6_grid(), Some(EnsembleSpec::estimation_default(2))),
            Experiment::Bias => (vec![1.0, 1.0], None),
        };
        Self {
            experiment,
            p: 2,
            n: 10,
            reps,
            seed,
            grid,
            ensemble,
            alpha: 0.05,
        }
    }

    /// Bias check at `Σ = diag(lambda)`.
    pub fn bias(lambda: &[f64], n: usize, reps: usize, seed: u64) -> Self {
        Self {
            experiment: Experiment::Bias,
            p: lambda.len(),
            n,
            reps,
            seed,
            grid: lambda.to_vec(),
            ensemble: None,
            alpha: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.n < self.p {
            return Err(Error::InvalidArgument(format!(
                "need n >= p >= 1 (n = {}, p = {})",
                self.n, self.p
            )));
        }
        if self.reps == 0 {
            return Err(Error::InvalidArgument("reps must be at least 1".into()));
        }
        if self.grid.is_empty() || self.grid.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidArgument("grid must be nonempty and finite".into()));
        }
        let two_dim = !matches!(self.experiment, Experiment::Bias);
        if two_dim && self.p != 2 {
            return Err(Error::InvalidArgument(format!(
                "{} is defined for p = 2 only",
                self.experiment.name()
            )));
        }
        if matches!(self.experiment, Experiment::Figure4 | Experiment::Figure6) && self.grid.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::InvalidArgument("c grid values must be positive".into()));
        }
        if matches!(self.experiment, Experiment::Bias) && self.grid.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: self.grid.len(),
            });
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }

    fn key(&self, grid: usize) -> StreamKey {
        StreamKey::new(self.seed, self.experiment.stream(), grid as u64)
    }

    fn check(&self, expected: Experiment) -> Result<()> {
        if self.experiment != expected {
            return Err(Error::InvalidArgument(format!(
                "config is for {}, not {}",
                self.experiment.name(),
                expected.name()
            )));
        }
        self.validate()
    }
}

/// 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    /// 1-based position in the full 51-angle grid, when the angle is on it.
    pub j: Option<usize>,
    pub theta: f64,
    pub lambda: [f64; 2],
    pub full: PowerPoint,
    pub eigen: PowerPoint,
}

impl PowerRow {
    /// `|power_full - power_eigen|` and the pooled standard error.
    pub fn difference(&self) -> (f64, f64) {
        let d = (self.full.rejection_rate - self.eigen.rejection_rate).abs();
        (d, (self.full.stderr.powi(2) + self.eigen.stderr.powi(2)).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub alpha: f64,
    pub n: usize,
    pub critical_full: CriticalValue,
    pub critical_eigen: CriticalValue,
    /// Rejection rates under `H0` on streams independent of calibration.
    pub size_full: PowerPoint,
    pub size_eigen: PowerPoint,
    pub rows: Vec<PowerRow>,
}

impl PowerReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# schema={POWER_SCHEMA} alpha={} n={} threshold_full={} threshold_eigen={} size_full={} size_eigen={}\n",
            fmt_num(self.alpha),
            self.n,
            fmt_num(self.critical_full.threshold),
            fmt_num(self.critical_eigen.threshold),
            fmt_num(self.size_full.rejection_rate),
            fmt_num(self.size_eigen.rejection_rate),
        );
        out.push_str("j,theta,lambda1,lambda2,power_full,stderr_full,power_eigen,stderr_eigen,reps,failures_full,failures_eigen\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.j.map(|j| j.to_string()).unwrap_or_default(),
                fmt_num(r.theta),
                fmt_num(r.lambda[0]),
                fmt_num(r.lambda[1]),
                fmt_num(r.full.rejection_rate),
                fmt_num(r.full.stderr),
                fmt_num(r.eigen.rejection_rate),
                fmt_num(r.eigen.stderr),
                r.full.reps.max(r.eigen.reps),
                r.full.failures,
                r.eigen.failures,
            );
        }
        out
    }
}

/// Calibrates both tests under `Σ = I`, rechecks their sizes on fresh
/// streams, and estimates power at each angle of the grid. Both tests see
/// the same draws at each alternative.
pub fn figure3_experiment(cfg: &ExperimentConfig) -> Result<PowerReport> {
    cfg.check(Experiment::Figure3)?;
    let spec = cfg.ensemble.unwrap_or(EnsembleSpec::testing_default(2));
    let ensemble = spec.build(2, cfg.seed)?;
    let full = LrTest::new(TestKind::FullLrt, 2, cfg.n, None)?;
    let eigen = LrTest::new(TestKind::EigenLrt, 2, cfg.n, Some(&ensemble))?;
    let calib_reps = cfg.reps.max(crate::lrt::MIN_CALIBRATION_REPS);
    let critical_full = calibrate(&full, cfg.alpha, calib_reps, cfg.seed)?;
    let critical_eigen = calibrate(&eigen, cfg.alpha, calib_reps, cfg.seed)?;

    let null = SpdMatrix::identity(2);
    let size_key = StreamKey::new(cfg.seed, experiment::SIZE_CHECK, 0);
    let size_full = rejection_rate(&full.simulate(&null, cfg.reps, size_key)?, &critical_full);
    let size_eigen = rejection_rate(&eigen.simulate(&null, cfg.reps, size_key)?, &critical_eigen);

    let alternatives: Vec<SpdMatrix> = cfg
        .grid
        .iter()
        .map(|&t| SpdMatrix::diagonal(&figure3_alternative(t)))
        .collect::<Result<_>>()?;
    let full_power = power_curve(&full, &alternatives, &critical_full, cfg.reps, cfg.seed)?;
    let eigen_power = power_curve(&eigen, &alternatives, &critical_eigen, cfg.reps, cfg.seed)?;
    let full_grid = figure3_grid();
    let rows = cfg
        .grid
        .iter()
        .zip(full_power.into_iter().zip(eigen_power))
        .map(|(&theta, (f, e))| PowerRow {
            j: full_grid.iter().position(|g| (g - theta).abs() < 1e-12).map(|i| i + 1),
            theta,
            lambda: figure3_alternative(theta),
            full: f,
            eigen: e,
        })
        .collect();
    Ok(PowerReport {
        alpha: cfg.alpha,
        n: cfg.n,
        critical_full,
        critical_eigen,
        size_full,
        size_eigen,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub param: f64,
    /// Eigenvalues the estimates are scored against.
    pub target: Vec<f64>,
    pub risks: Vec<RiskEstimate>,
    /// Paired `loss[0] - loss[1]`: mean and standard error.
    pub diff_mean: f64,
    pub diff_stderr: f64,
}

/// Per grid point KL risks of two estimators on common draws.
///
/// `gamma_frame` estimates keep the frame's coordinate order; `lbar` and
/// `star` estimates are sorted descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub experiment: Experiment,
    pub param_name: String,
    pub estimators: Vec<String>,
    pub n: usize,
    pub rows: Vec<RiskRow>,
}

impl RiskReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# schema={RISK_SCHEMA} experiment={} n={}\n",
            self.experiment.name(),
            self.n
        );
        let mut header = vec![self.param_name.clone()];
        for i in 0..self.rows.first().map_or(0, |r| r.target.len()) {
            header.push(format!("lambda{}", i + 1));
        }
        for e in &self.estimators {
            header.push(format!("risk_{e}"));
            header.push(format!("stderr_{e}"));
        }
        header.extend(["diff_mean", "diff_stderr", "reps", "failures"].map(String::from));
        out.push_str(&header.join(","));
        out.push('\n');
        for r in &self.rows {
            let mut cells = vec![fmt_num(r.param)];
            cells.extend(r.target.iter().map(|v| fmt_num(*v)));
            for e in &r.risks {
                cells.push(fmt_num(e.mean));
                cells.push(fmt_num(e.stderr));
            }
            cells.push(fmt_num(r.diff_mean));
            cells.push(fmt_num(r.diff_stderr));
            cells.push(r.risks[0].reps.to_string());
            cells.push(r.risks[0].failures.to_string());
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn risk_experiment(
    cfg: &ExperimentConfig,
    param_name: &str,
    estimators: &[RiskEstimator],
    scenario: impl Fn(f64) -> Result<RiskScenario>,
) -> Result<RiskReport> {
    let rows = cfg
        .grid
        .iter()
        .enumerate()
        .map(|(j, &param)| {
            let sc = scenario(param)?;
            let table = risk_table(estimators, &sc, cfg.n, cfg.reps, cfg.key(j))?;
            let (diff_mean, diff_stderr) = table.difference(0, 1);
            Ok(RiskRow {
                param,
                target: sc.target.clone(),
                risks: (0..estimators.len()).map(|e| table.risk(e)).collect(),
                diff_mean,
                diff_stderr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RiskReport {
        experiment: cfg.experiment,
        param_name: param_name.into(),
        estimators: estimators.iter().map(|e| e.label().to_string()).collect(),
        n: cfg.n,
        rows,
    })
}

/// `l̄` against `λ̂` with `Γ = I` at `Σ = diag(1, c)`.
pub fn figure4_experiment(cfg: &ExperimentConfig) -> Result<RiskReport> {
    cfg.check(Experiment::Figure4)?;
    let ests = [RiskEstimator::Lbar, RiskEstimator::GammaFrame(DMatrix::identity(2, 2))];
    risk_experiment(cfg, "c", &ests, |c| RiskScenario::diagonal(&[1.0, c]))
}

/// `l̄` against `λ̂` with `Γ = I` when the true frame is `R(θ)`, `λ = (1, 0.8)`.
pub fn figure5_experiment(cfg: &ExperimentConfig) -> Result<RiskReport> {
    cfg.check(Experiment::Figure5)?;
    let ests = [RiskEstimator::Lbar, RiskEstimator::GammaFrame(DMatrix::identity(2, 2))];
    risk_experiment(cfg, "theta", &ests, |t| RiskScenario::rotated(&FIGURE5_LAMBDA, &rotation2(t)))
}

/// First grid angle at which the fixed-frame estimator's risk exceeds `l̄`'s.
pub fn figure5_crossover(r: &RiskReport) -> Option<f64> {
    r.rows.iter().find(|row| row.risks[1].mean > row.risks[0].mean).map(|row| row.param)
}

/// `l̄` against `λ̂*` at `Σ = diag(1, c)`.
pub fn figure6_experiment(cfg: &ExperimentConfig) -> Result<RiskReport> {
    cfg.check(Experiment::Figure6)?;
    let spec = cfg.ensemble.unwrap_or(EnsembleSpec::estimation_default(2));
    let ests = [RiskEstimator::Lbar, RiskEstimator::Star(spec.build(2, cfg.seed)?)];
    risk_experiment(cfg, "c", &ests, |c| RiskScenario::diagonal(&[1.0, c]))
}

/// Majorization check at `Σ = diag(grid)`.
pub fn bias_experiment(cfg: &ExperimentConfig) -> Result<MajorizationReport> {
    cfg.check(Experiment::Bias)?;
    let sigma = SpdMatrix::diagonal(&cfg.grid)?;
    bias_majorization_check(&sigma, cfg.n, cfg.reps, cfg.key(0))
}

pub fn bias_to_csv(r: &MajorizationReport) -> String {
    let mut out = format!(
        "# schema={BIAS_SCHEMA} n={} reps={} trace_max_rel_error={} mean_trace={} trace_stderr={}\n",
        r.n,
        r.reps,
        fmt_num(r.trace_max_rel_error),
        fmt_num(r.mean_trace),
        fmt_num(r.trace_stderr),
    );
    out.push_str("j,lambda_j,mean_lbar_j,stderr_lbar_j,partial_target,partial_mean,partial_stderr,holds\n");
    let p = r.lambda.len();
    for i in 0..p {
        let j = i + 1;
        let (target, mean, se, holds) = match r.partial_sums.iter().find(|c| c.j == j) {
            Some(c) => (fmt_num(c.target), fmt_num(c.mean), fmt_num(c.stderr), c.holds.to_string()),
            None => (
                fmt_num(r.lambda.iter().sum()),
                fmt_num(r.mean_trace),
                fmt_num(r.trace_stderr),
                "trace".to_string(),
            ),
        };
        let _ = writeln!(
            out,
            "{j},{},{},{},{target},{mean},{se},{holds}",
            fmt_num(r.lambda[i]),
            fmt_num(r.mean_lbar[i]),
            fmt_num(r.stderr_lbar[i]),
        );
    }
    out
}
