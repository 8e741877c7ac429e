use eigengeo::estimators::{haar_sample, o2_equidistant, EnsembleKind, OrthogonalEnsemble};
use eigengeo::experiments::{figure5_crossover, ExperimentConfig};
use eigengeo::lrt::{rejection_rate, LrTest, TestKind};
use eigengeo::rng::{experiment, StreamKey};
use eigengeo::sim::{mean_stderr, WishartSampler};
use eigengeo::*;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn key(exp: u64, grid: u64) -> StreamKey {
    StreamKey::new(2026, exp, grid)
}

#[test]
fn lambda_hat_is_unbiased_in_the_true_frame() {
    let sigma = SpdMatrix::diagonal(&[1.0, 0.8]).unwrap();
    let sampler = WishartSampler::new(&sigma).unwrap();
    let k = key(experiment::RISK, 100);
    let est: Vec<Vec<f64>> = (0..100_000)
        .map(|r| {
            let s = sampler.sample(10, &mut k.rng(r)).unwrap();
            lambda_hat(&s, 10, &DMatrix::identity(2, 2)).unwrap().lambda_hat
        })
        .collect();
    for (i, target) in [1.0, 0.8].into_iter().enumerate() {
        let (m, se) = mean_stderr(&est.iter().map(|e| e[i]).collect::<Vec<_>>());
        assert!((m - target).abs() < 3.0 * se, "component {i}: {m} ± {se}");
    }
}

#[test]
fn product_sum_mean() {
    let sigma = SpdMatrix::diagonal(&[2.0, 1.0]).unwrap();
    let sampler = WishartSampler::new(&sigma).unwrap();
    let k = key(experiment::RISK, 101);
    let draws: Vec<DMatrix<f64>> = (0..100_000).map(|r| sampler.sample_raw(10, &mut k.rng(r)) / 10.0).collect();
    for i in 0..2 {
        for j in 0..2 {
            let (m, se) = mean_stderr(&draws.iter().map(|d| d[(i, j)]).collect::<Vec<_>>());
            assert!((m - sigma.as_matrix()[(i, j)]).abs() < 3.0 * se, "({i},{j}): {m} ± {se}");
        }
    }
}

#[test]
fn minimal_sample_is_positive_definite_with_distinct_eigenvalues() {
    let sampler = WishartSampler::new(&SpdMatrix::identity(2)).unwrap();
    let k = key(experiment::RISK, 102);
    for r in 0..1000 {
        let s = sampler.sample(2, &mut k.rng(r)).unwrap();
        let l = s.eigenvalues();
        assert!(l[0] > l[1] && l[1] > 0.0);
    }
}

#[test]
fn haar_expectation() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let e = haar_sample(2, 100_000, &mut rng).unwrap();
    let vals: Vec<f64> = e
        .matrices()
        .iter()
        .map(|g| 2.0 * g[(0, 0)] * g[(0, 0)] + g[(1, 0)] * g[(1, 0)])
        .collect();
    let (m, se) = mean_stderr(&vals);
    assert!((m - 1.5).abs() < 3.0 * se, "{m} ± {se}");
}

#[test]
fn identity_covariance_risk_gap() {
    let sc = RiskScenario::diagonal(&[1.0, 1.0]).unwrap();
    let ests = [RiskEstimator::Lbar, RiskEstimator::GammaFrame(DMatrix::identity(2, 2))];
    let t = risk_table(&ests, &sc, 10, 20_000, key(experiment::RISK, 103)).unwrap();
    assert!(t.risk(0).mean >= 1.2 * t.risk(1).mean);
}

#[test]
fn figure4_gap_shrinks_away_from_equal_eigenvalues() {
    let mut cfg = ExperimentConfig::standard(Experiment::Figure4, 10_000, 3);
    cfg.grid = vec![1.0, 0.02];
    let r = figure4_experiment(&cfg).unwrap();
    let gap = |i: usize| r.rows[i].diff_mean;
    assert!(gap(0) > 0.0);
    assert!(gap(0) > gap(1));
}

#[test]
fn figure5_lbar_risk_is_rotation_invariant() {
    let cfg = ExperimentConfig::standard(Experiment::Figure5, 10_000, 3);
    let r = figure5_experiment(&cfg).unwrap();
    let first = &r.rows[0];
    assert_eq!(first.param, 0.0);
    assert!(first.risks[1].mean < first.risks[0].mean);
    let lbar: Vec<(f64, f64)> = r.rows.iter().map(|row| (row.risks[0].mean, row.risks[0].stderr)).collect();
    let w: f64 = lbar.iter().map(|(_, s)| 1.0 / (s * s)).sum();
    let pooled = lbar.iter().map(|(m, s)| m / (s * s)).sum::<f64>() / w;
    for (m, s) in lbar {
        assert!((m - pooled).abs() <= 3.0 * s, "{m} vs {pooled} ± {s}");
    }
    let crossing = figure5_crossover(&r);
    if let Some(theta) = crossing {
        assert!(theta > 0.0);
    }
}

#[test]
fn calibration_at_even_odds_is_the_median() {
    let test = LrTest::new(TestKind::FullLrt, 2, 10, None).unwrap();
    let cv = calibrate(&test, 0.5, 4000, 1).unwrap();
    let fresh = test
        .simulate(&SpdMatrix::identity(2), 4000, key(experiment::SIZE_CHECK, 7))
        .unwrap();
    let rate = rejection_rate(&fresh, &cv);
    assert!((rate.rejection_rate - 0.5).abs() < 3.0 * (0.25f64 / 4000.0).sqrt() * 1.5);
}

#[test]
fn eigen_test_power_at_the_null_is_its_size() {
    let e = o2_equidistant(100).unwrap();
    let test = LrTest::new(TestKind::EigenLrt, 2, 10, Some(&e)).unwrap();
    let cv = calibrate(&test, 0.05, 2000, 4).unwrap();
    let pts = power_curve(&test, &[SpdMatrix::identity(2)], &cv, 2000, 5).unwrap();
    let band = 3.0 * (0.05f64 * 0.95 / 2000.0).sqrt() * 1.5;
    assert!((pts[0].rejection_rate - 0.05).abs() < band, "{:?}", pts[0]);
    assert_eq!(pts[0].failures, 0);
}

#[test]
fn kernel_is_invariant_under_right_translation() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let ens = haar_sample(3, 8192, &mut rng).unwrap();
    let q = eigengeo::estimators::haar_orthogonal(3, &mut rng);
    let shifted = OrthogonalEnsemble::uniform(ens.matrices().iter().map(|h| h * &q).collect(), EnsembleKind::HaarMc).unwrap();
    let l = [14.0, 9.0, 4.0];
    let sigma = SpdMatrix::diagonal(&[1.5, 1.0, 0.6]).unwrap();
    let a = eigen_log_density_kernel(&l, &sigma, 10, &ens).unwrap();
    let b = eigen_log_density_kernel(&l, &sigma, 10, &shifted).unwrap();

    // Monte-Carlo standard error of the log integral from the integrand spread
    let inv = sigma.inverse();
    let ld = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&l));
    let vals: Vec<f64> = ens
        .matrices()
        .iter()
        .map(|h| (-0.5 * (h * &ld * h.transpose()).component_mul(&inv).sum()).exp())
        .collect();
    let (m, se) = mean_stderr(&vals);
    let log_se = se / m;
    assert!((a - b).abs() < 4.0 * std::f64::consts::SQRT_2 * log_se, "{a} vs {b}, se {log_se}");
}
