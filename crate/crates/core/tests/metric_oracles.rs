mod common;

use linkpoison::metrics::{average_precision, ndcg_at_k, recall_at_k, roc_auc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<bool>, usize) {
    let n = rng.random_range(2..=50);
    // coarse grid so ties are common
    let levels = rng.random_range(2..20);
    let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
    let mut rel: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
    rel[0] = true;
    rel[1] = false;
    (scores, rel, rng.random_range(1..=n + 2))
}

#[test]
fn metrics_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..500 {
        let (s, r, k) = instance(&mut rng);
        assert!((roc_auc(&s, &r).unwrap() - common::auc(&s, &r)).abs() <= 1e-12);
        assert!((average_precision(&s, &r).unwrap() - common::ap(&s, &r)).abs() <= 1e-12);
        assert!((ndcg_at_k(&s, &r, k).unwrap() - common::ndcg(&s, &r, k)).abs() <= 1e-12);
        assert!((recall_at_k(&s, &r, k).unwrap() - common::recall(&s, &r, k)).abs() <= 1e-12);
    }
}

#[test]
fn metrics_invariant_under_monotone_maps() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let (s, r, k) = instance(&mut rng);
        let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
        assert_eq!(roc_auc(&s, &r).unwrap(), roc_auc(&t, &r).unwrap());
        assert_eq!(average_precision(&s, &r).unwrap(), average_precision(&t, &r).unwrap());
        assert_eq!(ndcg_at_k(&s, &r, k).unwrap(), ndcg_at_k(&t, &r, k).unwrap());
        assert_eq!(recall_at_k(&s, &r, k).unwrap(), recall_at_k(&t, &r, k).unwrap());
    }
}
