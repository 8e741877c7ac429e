use eigengeo::estimators::{haar_orthogonal, o2_equidistant};
use eigengeo::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Descending eigenvalues with relative gaps of at least 5%.
fn spectrum_values(p: usize) -> impl Strategy<Value = Vec<f64>> {
    (0.05f64..5.0, proptest::collection::vec(0.05f64..2.0, p - 1)).prop_map(|(base, gaps)| {
        let mut v = vec![base];
        for g in gaps {
            let last = *v.last().unwrap();
            v.push(last / (1.0 + g));
        }
        v
    })
}

fn any_spectrum() -> impl Strategy<Value = (Vec<f64>, u64)> {
    (2usize..=5).prop_flat_map(|p| (spectrum_values(p), any::<u64>()))
}

fn orthogonal(p: usize, seed: u64) -> DMatrix<f64> {
    haar_orthogonal(p, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectral_roundtrip((lambda, seed) in any_spectrum()) {
        let p = lambda.len();
        let sigma = SpdMatrix::from_eigen(&lambda, &orthogonal(p, seed)).unwrap();
        let sp = spectral_decompose(&sigma).unwrap();
        for (a, b) in sp.lambda().iter().zip(&lambda) {
            prop_assert!(close(*a, *b, 1e-10));
        }
        let back = sp.compose();
        let scale = sigma.as_matrix().amax();
        prop_assert!((back.as_matrix() - sigma.as_matrix()).amax() <= 1e-10 * scale);
    }

    #[test]
    fn natural_roundtrip((lambda, seed) in any_spectrum()) {
        let sigma = SpdMatrix::from_eigen(&lambda, &orthogonal(lambda.len(), seed)).unwrap();
        let back = from_natural(&to_natural(&sigma)).unwrap();
        let scale = sigma.as_matrix().amax();
        prop_assert!((back.as_matrix() - sigma.as_matrix()).amax() <= 1e-8 * scale);
    }

    #[test]
    fn metric_is_positive_and_block_diagonal(lambda in (2usize..=5).prop_flat_map(spectrum_values)) {
        let g = metric_spectral(&lambda).unwrap().to_dense();
        let ev = g.clone().symmetric_eigenvalues();
        prop_assert!(ev.min() > 0.0);
        let p = lambda.len();
        for a in 0..p {
            for k in p..g.nrows() {
                prop_assert_eq!(g[(a, k)], 0.0);
            }
        }
    }

    #[test]
    fn metric_sigma_is_symmetric_bilinear((lambda, seed) in any_spectrum(), c in -3.0f64..3.0) {
        let p = lambda.len();
        let sigma = SpdMatrix::from_eigen(&lambda, &orthogonal(p, seed)).unwrap();
        let a = SymTangent::basis(p, 0, 1).unwrap();
        let b = SymTangent::basis(p, 1, 1).unwrap();
        let ab = metric_sigma(&sigma, &a, &b).unwrap();
        let ba = metric_sigma(&sigma, &b, &a).unwrap();
        prop_assert!(close(ab, ba, 1e-12) || (ab - ba).abs() < 1e-14);
        let cab = metric_sigma(&sigma, &a.scaled(c), &b).unwrap();
        prop_assert!((cab - c * ab).abs() <= 1e-10 * ab.abs().max(1e-12));
        prop_assert!(metric_sigma(&sigma, &a, &a).unwrap() > 0.0);
    }

    #[test]
    fn statistical_curvature_is_the_full_contraction(lambda in (2usize..=5).prop_flat_map(spectrum_values)) {
        let c = curvature_contraction(&lambda).unwrap();
        let via: f64 = (0..lambda.len()).map(|a| c[(a, a)] * 2.0 * lambda[a] * lambda[a]).sum();
        prop_assert!(close(via, statistical_curvature(&lambda).unwrap(), 1e-10));
    }

    #[test]
    fn loss_matrix_symmetric_and_homogeneous(lambda in (2usize..=5).prop_flat_map(spectrum_values), c in 0.1f64..10.0) {
        let b = loss_first_order(&lambda).unwrap();
        let scaled: Vec<f64> = lambda.iter().map(|x| c * x).collect();
        let bs = loss_first_order(&scaled).unwrap();
        let p = lambda.len();
        for i in 0..p {
            prop_assert!(b.get(i, i) > 0.0);
            for j in 0..p {
                prop_assert_eq!(b.get(i, j), b.get(j, i));
                prop_assert!(close(bs.get(i, j) * c * c, b.get(i, j), 1e-10));
                if i != j {
                    prop_assert!(b.get(i, j) < 0.0);
                }
            }
        }
    }

    #[test]
    fn kl_is_nonnegative_and_vanishes_on_the_diagonal((lambda, seed) in any_spectrum()) {
        let p = lambda.len();
        let s = SpdMatrix::from_eigen(&lambda, &orthogonal(p, seed)).unwrap();
        let t = SpdMatrix::from_eigen(&lambda, &orthogonal(p, seed.wrapping_add(1))).unwrap();
        prop_assert!(kl_divergence(&s, &t).unwrap() >= 0.0);
        prop_assert!(kl_divergence(&s, &s).unwrap() < 1e-10);
    }

    #[test]
    fn star_identities(l in (2usize..=4).prop_flat_map(spectrum_values), n in 4usize..200, seed in any::<u64>(), c in prop_oneof![Just(0.1), Just(10.0)]) {
        let p = l.len();
        let raw: Vec<f64> = l.iter().map(|x| x * n as f64).collect();
        let ens = if p == 2 {
            o2_equidistant(50).unwrap()
        } else {
            EnsembleSpec::Haar(256).build(p, seed).unwrap()
        };
        let est = lambda_star_from_eigenvalues(&raw, n, &ens).unwrap().lambda_hat;
        let trace: f64 = l.iter().sum();
        prop_assert!(close(est.iter().sum::<f64>(), trace, 1e-10));
        prop_assert!(est.iter().all(|x| *x > 0.0));
        prop_assert!(est[0] <= l[0] * (1.0 + 1e-12) && est[p - 1] >= l[p - 1] * (1.0 - 1e-12));

        let scaled: Vec<f64> = raw.iter().map(|x| c * x).collect();
        let es = lambda_star_from_eigenvalues(&scaled, n, &ens).unwrap().lambda_hat;
        for (a, b) in es.iter().zip(&est) {
            prop_assert!(close(*a, c * b, 1e-10));
        }
    }

    #[test]
    fn full_lrt_is_rotation_invariant((lambda, seed) in any_spectrum()) {
        let p = lambda.len();
        let n = p + 5;
        let s = SpdMatrix::diagonal(&lambda).unwrap();
        let r = s.conjugated(&orthogonal(p, seed)).unwrap();
        let a = full_lrt_stat(&s, n).unwrap().value;
        let b = full_lrt_stat(&r, n).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn eigen_lrt_is_nonpositive(l in spectrum_values(2), scale in 1.0f64..30.0) {
        let e = o2_equidistant(100).unwrap();
        let raw = [l[0] * scale, l[1] * scale];
        let t = eigen_lrt_stat(&raw, 10, &e).unwrap();
        prop_assert!(t.value <= 0.0 && t.value.is_finite());
    }
}
