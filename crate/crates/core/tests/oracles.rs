mod common;

use eigengeo::estimators::{haar_orthogonal, o2_equidistant};
use eigengeo::geometry::oracle::{curvature_oracle_a, fd_metric};
use eigengeo::*;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn metric_matches_series_tangents() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for p in 2..=5 {
        for _ in 0..5 {
            let sp = common::random_spectrum(&mut rng, p);
            let dense = common::dense_metric(&sp);
            let analytic = metric_spectral(sp.lambda()).unwrap().to_dense();
            for i in 0..dense.nrows() {
                for j in 0..dense.ncols() {
                    assert!(rel_close(dense[(i, j)], analytic[(i, j)], 1e-12), "p={p} ({i},{j})");
                }
            }
        }
    }
}

#[test]
fn curvature_matches_series_second_derivatives() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for p in 2..=4 {
        let sp = common::random_spectrum(&mut rng, p);
        let ps = common::all_pairs(p);
        for &st in &ps {
            for &uv in &ps {
                for a in 0..p {
                    let oracle = common::curvature(&sp, st, uv, a);
                    let analytic = embedding_curvature_a(sp.lambda(), st, uv, a).unwrap();
                    assert!(rel_close(oracle, analytic, 1e-11), "{st:?} {uv:?} {a}: {oracle} vs {analytic}");
                }
            }
        }
    }
}

#[test]
fn finite_difference_and_series_oracles_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sp = common::random_spectrum(&mut rng, 3);
    let fd = fd_metric(&sp);
    let series = common::dense_metric(&sp);
    for i in 0..fd.nrows() {
        for j in 0..fd.ncols() {
            assert!(rel_close(fd[(i, j)], series[(i, j)], 1e-7));
        }
    }
    for st in common::all_pairs(3) {
        for a in 0..3 {
            let f = curvature_oracle_a(&sp, st, st, a).unwrap();
            let s = common::curvature(&sp, st, st, a);
            assert!(rel_close(f, s, 1e-6), "{f} vs {s}");
        }
    }
}

#[test]
fn contractions_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for p in 2..=4 {
        for _ in 0..3 {
            let sp = common::random_spectrum(&mut rng, p);
            let (c, gamma) = common::contraction(&sp);
            let lib_c = curvature_contraction(sp.lambda()).unwrap();
            let b = loss_first_order(sp.lambda()).unwrap();
            let b2 = loss_contraction(sp.lambda()).unwrap();
            for i in 0..p {
                for j in 0..p {
                    assert!(rel_close(c[(i, j)], lib_c[(i, j)], 1e-10));
                    assert!(rel_close(0.5 * c[(i, j)], b.get(i, j), 1e-10));
                    assert!(rel_close(0.5 * c[(i, j)], b2.get(i, j), 1e-10));
                }
            }
            let g = statistical_curvature(sp.lambda()).unwrap();
            assert!(rel_close(gamma, g, 1e-10), "{gamma} vs {g}");
        }
    }
}

#[test]
fn spot_values() {
    let sp = Spectrum::diagonal(vec![2.0, 1.0]).unwrap();
    let (c, gamma) = common::contraction(&sp);
    assert!((gamma - 10.0).abs() < 1e-12);
    let expect = [[0.125, -0.5], [-0.5, 2.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((0.5 * c[(i, j)] - expect[i][j]).abs() < 1e-12);
        }
    }
    let (_, g31) = common::contraction(&Spectrum::diagonal(vec![3.0, 1.0]).unwrap());
    assert!((g31 - 5.0).abs() < 1e-12);
}

#[test]
fn eigen_lrt_matches_grid_search() {
    let e = o2_equidistant(100).unwrap();
    for l in [[12.0, 9.0], [30.0, 2.0], [10.5, 9.5], [4.0, 3.0], [25.0, 14.0], [9.0, 1.0]] {
        let lib = eigen_lrt_stat(&l, 10, &e).unwrap().value;
        let oracle = common::eigen_lrt_grid_p2(l, 10, 100);
        assert!((lib - oracle).abs() < 1e-6, "{l:?}: {lib} vs {oracle}");
    }
}

#[test]
fn eigen_kernel_matches_direct_quadrature() {
    let e = o2_equidistant(100).unwrap();
    let l = [3.0, 1.0];
    let lambda = [2.0, 1.0];
    let lib = eigen_log_density_kernel(&l, &SpdMatrix::diagonal(&lambda).unwrap(), 10, &e).unwrap();
    let oracle = common::eigen_objective_p2(l, 10, 100, lambda);
    assert!((lib - oracle).abs() < 1e-12);
}

#[test]
fn lambda_star_matches_direct_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let members: Vec<DMatrix<f64>> = (0..64).map(|_| haar_orthogonal(3, &mut rng)).collect();
    let e = estimators::OrthogonalEnsemble::uniform(members.clone(), estimators::EnsembleKind::HaarMc).unwrap();
    let n = 12;
    let l = [30.0, 14.0, 5.0];
    let lib = lambda_star_from_eigenvalues(&l, n, &e).unwrap().lambda_hat;

    let nf = n as f64;
    let ld = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&l));
    let linv = ld.clone().try_inverse().unwrap();
    let lbar = &ld / nf;
    let logs: Vec<f64> = members.iter().map(|g| -0.5 * nf * (&ld * g.transpose() * &linv * g).trace()).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut num = [0.0; 3];
    let mut den = 0.0;
    for (g, lw) in members.iter().zip(&logs) {
        let w = (lw - max).exp();
        den += w;
        let r = g.transpose() * &lbar * g;
        for i in 0..3 {
            num[i] += w * r[(i, i)];
        }
    }
    let mut oracle: Vec<f64> = num.iter().map(|x| x / den).collect();
    oracle.sort_by(|a, b| b.total_cmp(a));
    for (a, b) in lib.iter().zip(&oracle) {
        assert!(rel_close(*a, *b, 1e-12), "{lib:?} vs {oracle:?}");
    }
}

#[test]
fn kl_projection_is_closest_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let g = haar_orthogonal(3, &mut rng);
    let s = SpdMatrix::from_rows(&[vec![3.0, 0.4, 0.2], vec![0.4, 2.0, -0.3], vec![0.2, -0.3, 1.0]]).unwrap();
    let mu = kl_project(&s, &g).unwrap();
    let at = |m: &[f64]| kl_divergence(&s, &SpdMatrix::from_eigen(m, &g).unwrap()).unwrap();
    let best = at(&mu);
    for i in 0..3 {
        for h in [1e-3, -1e-3, 0.1, -0.1] {
            let mut m = mu.clone();
            m[i] += h;
            assert!(at(&m) > best);
        }
    }
}
