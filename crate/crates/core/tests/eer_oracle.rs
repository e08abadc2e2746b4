//! Equal error rate against a brute-force threshold sweep, plus its
//! invariants.

#[path = "support/oracles.rs"]
mod oracles;

use oracles::random_scores;
use osv_core::eval::{compute_eer, ScoreSet};
use proptest::prelude::*;

#[test]
fn matches_brute_force_on_random_sets() {
    for seed in 0..200 {
        let (g, f) = random_scores(seed);
        let got = compute_eer(&ScoreSet::new(g.clone(), f.clone())).unwrap().eer;
        let want = oracles::brute_force_eer(&g, &f);
        assert!((got - want).abs() <= 1e-9, "seed {seed}: {got} vs {want}");
    }
}

#[test]
fn worked_examples_are_exact() {
    let eer = |g: &[f64], f: &[f64]| compute_eer(&ScoreSet::new(g.to_vec(), f.to_vec())).unwrap();
    assert_eq!(eer(&[0.9, 0.8], &[0.1, 0.2]).eer, 0.0);
    assert_eq!(eer(&[0.2, 0.4, 0.9], &[0.2, 0.4, 0.9]).eer, 0.5);
    let r = eer(&[0.9, 0.7, 0.4], &[0.6, 0.3, 0.2]);
    assert_eq!(r.eer, 1.0 / 3.0);
    assert!(r.threshold > 0.4 && r.threshold <= 0.6);
}

/// Pooling does not keep the EER inside the per-user range: each user
/// below is perfectly separated, but one user's forgeries outscore the
/// other's genuines, so a single global threshold cannot separate both.
#[test]
fn pooled_eer_can_leave_the_per_user_range() {
    let a = ScoreSet::new(vec![1.0], vec![0.0]);
    let b = ScoreSet::new(vec![11.0], vec![10.0]);
    assert_eq!(compute_eer(&a).unwrap().eer, 0.0);
    assert_eq!(compute_eer(&b).unwrap().eer, 0.0);
    let mut pooled = a.clone();
    pooled.extend(&b);
    assert_eq!(compute_eer(&pooled).unwrap().eer, 0.5);
}

proptest! {
    #[test]
    fn curve_is_monotone(seed in 0u64..100_000) {
        let (g, f) = random_scores(seed);
        let r = compute_eer(&ScoreSet::new(g, f)).unwrap();
        for w in r.curve.windows(2) {
            prop_assert!(w[1].far <= w[0].far);
            prop_assert!(w[1].frr >= w[0].frr);
        }
        prop_assert!((0.0..=1.0).contains(&r.eer));
    }

    #[test]
    fn invariant_under_increasing_transforms(seed in 0u64..100_000, a in 0.1f64..5.0, b in -3.0f64..3.0) {
        let (g, f) = random_scores(seed);
        let base = compute_eer(&ScoreSet::new(g.clone(), f.clone())).unwrap().eer;
        let t = |v: &Vec<f64>| v.iter().map(|x| (a * x + b).exp()).collect::<Vec<_>>();
        let moved = compute_eer(&ScoreSet::new(t(&g), t(&f))).unwrap().eer;
        prop_assert!((base - moved).abs() <= 1e-12, "{} vs {}", base, moved);
    }
}
