mod common;

use common::*;
use gprelay_core::gp::{gp_posterior, log_marginal_likelihood, Point};
use gprelay_core::sgpr::{sgpr_elbo, sgpr_predict, sgpr_variational, ElboCache, InducingSet};
use proptest::prelude::*;
use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dense_sgpr_predict(
    p: &gprelay_core::gp::KernelParams,
    d: &gprelay_core::gp::Dataset,
    z: &[Point],
    q: &[Point],
    mean: f64,
) -> (Vec<f64>, Vec<f64>) {
    let x = d.inputs();
    let lam: Vec<f64> = d.noise_var().iter().map(|v| v + p.log_noise_variance.exp()).collect();
    let kzx = gram(p, z, x);
    let kzx_scaled: Dense = kzx.iter().map(|r| r.iter().zip(&lam).map(|(k, l)| k / l).collect()).collect();
    let mut a = gram(p, z, z);
    let extra = matmul(&kzx_scaled, &transpose(&kzx));
    for i in 0..a.len() {
        for j in 0..a.len() {
            a[i][j] += extra[i][j];
        }
    }
    let (sigma, _) = inverse_logdet(&a);
    let (kzz_inv, _) = inverse_logdet(&gram(p, z, z));
    let r: Vec<f64> = d.targets().iter().map(|y| y - mean).collect();
    let w = matvec(&sigma, &matvec(&kzx_scaled, &r));
    let ksz = gram(p, q, z);
    let mu = ksz.iter().map(|row| mean + dot(row, &w)).collect();
    let var = ksz
        .iter()
        .zip(q)
        .map(|(row, &s)| se(p, s, s) - dot(row, &matvec(&kzz_inv, row)) + dot(row, &matvec(&sigma, row)))
        .collect();
    (mu, var)
}

#[test]
fn bound_matches_dense_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let n = rng.random_range(4..=25);
        let d = random_dataset(&mut rng, n);
        let p = random_params(&mut rng);
        let m = rng.random_range(1..=n);
        let mut z: Vec<Point> = d.inputs().to_vec();
        z.shuffle(&mut rng);
        z.truncate(m);
        let got = sgpr_elbo(&p, &d, &InducingSet::new(z.clone()).unwrap(), 0.5).unwrap();
        let want = dense_elbo(&p, &d, &z, 0.5);
        assert!((got - want).abs() < 1e-7 * want.abs().max(1.0), "{got} vs {want}");
    }
}

#[test]
fn predictive_matches_dense_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..15 {
        let n = rng.random_range(4..=20);
        let d = random_dataset(&mut rng, n);
        let p = random_params(&mut rng);
        let z: Vec<Point> = (0..rng.random_range(1..8))
            .map(|_| [rng.random_range(0.0..12.0), rng.random_range(0.0..12.0)])
            .collect();
        let zs = InducingSet::new(z.clone()).unwrap();
        let qz = sgpr_variational(&p, &d, &zs, 0.5).unwrap();
        let q: Vec<Point> = (0..10).map(|i| [i as f64 * 1.2, (i * 5 % 12) as f64]).collect();
        let got = sgpr_predict(&p, &zs, &qz, &q, 0.5).unwrap();
        let (mu, var) = dense_sgpr_predict(&p, &d, &z, &q, 0.5);
        for i in 0..q.len() {
            assert!((got.mean[i] - mu[i]).abs() < 1e-7, "mean {} vs {}", got.mean[i], mu[i]);
            assert!((got.variance[i] - var[i].max(0.0)).abs() < 1e-7, "var {} vs {}", got.variance[i], var[i]);
        }
    }
}

#[test]
fn full_inducing_set_reproduces_the_exact_posterior() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let d = random_dataset(&mut rng, 15);
    let p = random_params(&mut rng);
    let zs = InducingSet::new(d.inputs().to_vec()).unwrap();
    let qz = sgpr_variational(&p, &d, &zs, 0.5).unwrap();
    let q: Vec<Point> = (0..8).map(|i| [i as f64 + 0.5, 3.0]).collect();
    let a = sgpr_predict(&p, &zs, &qz, &q, 0.5).unwrap();
    let b = gp_posterior(&p, &d, &q, 0.5).unwrap();
    for i in 0..q.len() {
        assert!((a.mean[i] - b.mean[i]).abs() < 1e-6);
        assert!((a.variance[i] - b.variance[i]).abs() < 1e-6);
    }
}

#[test]
fn cache_agrees_with_direct_bound_on_every_subset() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let d = random_dataset(&mut rng, 12);
    let p = random_params(&mut rng);
    let cands: Vec<Point> = (0..6).map(|i| [2.0 * i as f64, (i * 3 % 12) as f64]).collect();
    let cache = ElboCache::new(&p, &d, &cands, 0.5);
    for mask in 1u32..(1 << cands.len()) {
        let idx: Vec<usize> = (0..cands.len()).filter(|i| mask >> i & 1 == 1).collect();
        let z: Vec<Point> = idx.iter().map(|&i| cands[i]).collect();
        let direct = sgpr_elbo(&p, &d, &InducingSet::new(z).unwrap(), 0.5).unwrap();
        assert!((cache.elbo(&idx).unwrap() - direct).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bound_never_exceeds_the_evidence(seed in 0u64..10_000, n in 2usize..20, m in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_dataset(&mut rng, n);
        let p = random_params(&mut rng);
        let z: Vec<Point> = (0..m).map(|_| [rng.random_range(0.0..12.0), rng.random_range(0.0..12.0)]).collect();
        let elbo = sgpr_elbo(&p, &d, &InducingSet::new(z).unwrap(), 0.5).unwrap();
        let lml = log_marginal_likelihood(&p, &d, 0.5).unwrap();
        prop_assert!(elbo <= lml + 1e-8);
    }

    #[test]
    fn adding_an_inducing_point_never_lowers_the_bound(seed in 0u64..10_000, n in 3usize..16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_dataset(&mut rng, n);
        let p = random_params(&mut rng);
        let cache = ElboCache::new(&p, &d, d.inputs(), 0.5);
        let small: Vec<usize> = (0..d.len()).step_by(2).collect();
        let mut big = small.clone();
        big.push(1);
        prop_assert!(cache.elbo(&big).unwrap() >= cache.elbo(&small).unwrap() - 1e-8);
    }
}
