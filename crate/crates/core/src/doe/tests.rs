use super::*;
use crate::designspace::{DesignImage, Provenance};
use proptest::prelude::{prop_assert, proptest};

fn random_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..d).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect()).collect()
}

fn designs(n: usize) -> DesignSet {
    DesignSet::from_items((0..n).map(|i| DesignImage::zeros(format!("d{i}"), Provenance::Test, 32).unwrap())).unwrap()
}

#[test]
fn two_point_fit() {
    let g = fit_latent_gaussian(&[vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
    assert_eq!(g.mean.as_slice(), &[1.0, 0.0]);
    assert_eq!(g.cov[(0, 0)], 2.0);
    assert_eq!(g.cov[(1, 1)], 0.0);
    assert_eq!(g.cov[(0, 1)], 0.0);
    assert!(g.jitter > 0.0 && g.jitter < 1e-6);
}

#[test]
fn identical_points_need_jitter() {
    let g = fit_latent_gaussian(&vec![vec![1.0, 2.0, 3.0]; 4]).unwrap();
    assert!(g.cov.iter().all(|&v| v == 0.0));
    assert!(g.jitter > 0.0);
    assert!(fit_latent_gaussian(&[vec![1.0]]).is_err());
}

#[test]
fn covariance_matches_two_pass_formula() {
    let z = random_rows(100, 5, 3);
    let g = fit_latent_gaussian(&z).unwrap();
    for a in 0..5 {
        let ma: f64 = z.iter().map(|r| r[a]).sum::<f64>() / 100.0;
        assert!((g.mean[a] - ma).abs() < 1e-12);
        for b in 0..5 {
            let mb: f64 = z.iter().map(|r| r[b]).sum::<f64>() / 100.0;
            let c: f64 = z.iter().map(|r| (r[a] - ma) * (r[b] - mb)).sum::<f64>() / 99.0;
            assert!((g.cov[(a, b)] - c).abs() < 1e-12);
        }
    }
}

#[test]
fn single_centered_sample_is_the_mean() {
    let g = fit_latent_gaussian(&random_rows(10, 3, 1)).unwrap();
    let s = lhs_normal(1, &g, 7, true);
    for (a, b) in s[0].iter().zip(g.mean.iter()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn marginal_stratification_is_exact() {
    let normal = Normal::standard();
    for seed in 0..5 {
        let n = 37;
        let s = lhs_scores(n, 6, seed, false);
        for j in 0..6 {
            let mut strata: Vec<usize> = s
                .iter()
                .map(|r| (normal.cdf(r[j]) * n as f64).floor() as usize)
                .collect();
            strata.sort_unstable();
            assert_eq!(strata, (0..n).collect::<Vec<_>>());
        }
    }
}

#[test]
fn large_sample_mean_is_near_zero() {
    let g = LatentGaussian {
        mean: DVector::zeros(4),
        cov: DMatrix::identity(4, 4),
        chol: DMatrix::identity(4, 4),
        jitter: 0.0,
    };
    let n = 4000;
    let s = lhs_normal(n, &g, 11, false);
    for j in 0..4 {
        let m: f64 = s.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        assert!(m.abs() < 4.0 / (n as f64).sqrt());
    }
}

#[test]
fn snapping_examples() {
    let cloud = vec![vec![0.0, 0.0], vec![10.0, 0.0]];
    let set = designs(2);
    let out = snap_to_nearest(&[vec![10.0, 0.0], vec![1.0, 1.0], vec![2.0, -1.0]], &cloud, &set).unwrap();
    assert_eq!(out.sample_to_design, vec![1, 0, 0]);
    assert_eq!(out.selected, vec![1, 0]);
    assert_eq!(out.set.len(), 2);
    assert_eq!(out.set.items()[0].id(), "d1");
    assert!(snap_to_nearest(&[vec![0.0, 0.0]], &[], &DesignSet::new()).is_err());
}

#[test]
fn snapping_matches_exhaustive_scan() {
    let cloud = random_rows(50, 4, 5);
    let samples = random_rows(200, 4, 6);
    let out = snap_to_nearest(&samples, &cloud, &designs(50)).unwrap();
    for (s, &m) in samples.iter().zip(&out.sample_to_design) {
        let dists: Vec<f64> = cloud.iter().map(|c| sq_dist(s, c)).collect();
        let best = dists.iter().cloned().fold(f64::INFINITY, f64::min);
        let first = dists.iter().position(|&d| d == best).unwrap();
        assert_eq!(m, first);
    }
    let mut sel = out.selected.clone();
    sel.sort_unstable();
    sel.dedup();
    assert_eq!(sel.len(), out.selected.len());
}

#[test]
fn filter_examples() {
    let z = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![3.0, 4.0]];
    assert_eq!(filter_similar(&z, 1.0), vec![0, 2]);
    assert_eq!(filter_similar(&z[..], 0.0), vec![0, 1, 2]);
    assert_eq!(filter_similar(&z, 5.0), vec![0, 2]);
    assert_eq!(filter_similar(&z, 5.1), vec![0]);
}

#[test]
fn filter_matches_brute_force() {
    let z = random_rows(60, 3, 8);
    let t = 1.2;
    let kept = filter_similar(&z, t);
    // Brute force: replay the greedy rule with explicit distances.
    let mut want = Vec::new();
    for i in 0..z.len() {
        let ok = want.iter().all(|&k: &usize| {
            let d: f64 = z[i].iter().zip(&z[k]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            d >= t
        });
        if ok {
            want.push(i);
        }
    }
    assert_eq!(kept, want);
}

#[test]
fn coverage_examples() {
    let cloud = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
    let norm = Normalizer::fit(&cloud).unwrap();
    assert_eq!(coverage_metric(&cloud, &norm).unwrap(), 2.0);
    assert_eq!(coverage_metric(&[vec![0.5, 0.5], vec![0.5, 0.5]], &norm).unwrap(), 0.0);
    assert!(coverage_metric(&[vec![0.5, 0.5]], &norm).is_err());
}

proptest! {
    #[test]
    fn coverage_is_permutation_and_translation_invariant(seed in 0u64..500, shift in -5.0f64..5.0) {
        let cloud = random_rows(20, 3, seed);
        let rows = random_rows(8, 3, seed + 1);
        let norm = Normalizer::fit(&cloud).unwrap();
        let base = coverage_metric(&rows, &norm).unwrap();
        let mut rev = rows.clone();
        rev.reverse();
        prop_assert!((coverage_metric(&rev, &norm).unwrap() - base).abs() < 1e-12);
        let shifted = |v: &Vec<Vec<f64>>| -> Vec<Vec<f64>> { v.iter().map(|r| r.iter().map(|x| x + shift).collect()).collect() };
        let norm2 = Normalizer::fit(&shifted(&cloud)).unwrap();
        prop_assert!((coverage_metric(&shifted(&rows), &norm2).unwrap() - base).abs() < 1e-9);
    }
}
