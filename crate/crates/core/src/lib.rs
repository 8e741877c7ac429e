//! Information geometry of zero-mean multivariate normal covariances in
//! spectral coordinates, with eigenvalue estimators, likelihood-ratio tests
//! and Monte-Carlo harnesses built on that geometry.
//!
//! Indices are 0-based throughout. Eigenvalues are sorted descending and
//! must be separated by a relative gap of at least
//! [`spd::RELATIVE_GAP_TOLERANCE`] wherever the spectral chart is used.

pub mod error;
pub mod estimators;
pub mod experiments;
pub mod geometry;
pub mod info_loss;
pub mod lrt;
pub mod rng;
pub mod sim;
pub mod spd;

pub use error::{Error, Result};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use estimators::{
    lambda_hat, lambda_star, lambda_star_from_eigenvalues, lbar, o2_equidistant, EigenEstimate, EnsembleSpec,
    EstimatorKind, OrthogonalEnsemble,
};
pub use experiments::{
    bias_experiment, figure3_experiment, figure5_crossover, figure4_experiment, figure5_experiment, figure6_experiment, Experiment,
    ExperimentConfig, PowerReport, RiskReport,
};
pub use geometry::{
    curvature_contraction, curvature_tensor, embedding_curvature_a, embedding_curvature_m, metric_sigma,
    metric_spectral, raised_curvature, statistical_curvature, tangent_lambda, tangent_u, SpectralMetric, SymTangent,
};
pub use info_loss::{info_carried_by_l, loss_contraction, loss_first_order, CarriedInformation, LossMatrix};
pub use lrt::{
    calibrate, eigen_log_density_kernel, eigen_lrt_stat, full_lrt_stat, power_curve, CriticalValue, EigenLrt, LrTest,
    PowerPoint, TestKind, TestStatistic,
};
pub use sim::{
    bias_majorization_check, kl_risk, risk_table, sample_product_sum, MajorizationReport, RiskEstimate, RiskEstimator,
    RiskScenario, RiskTable,
};
pub use spd::{
    from_natural, kl_divergence, kl_project, rotation2, sigma_of_coords, spectral_decompose, to_natural,
    NaturalCoords, SkewParams, SpdMatrix, Spectrum,
};
