mod common;

use activeval::rankings::{
    generalized_ranking_error, kendall_tau, normalized_kendall_tau, top_k_identification_error, AgreAccumulator,
    GreParams,
};
use activeval::Ranking;
use proptest::prelude::*;

use common::{gre, kendall, permutations, ranking};

#[test]
fn exhaustive_small_rankings_match_oracles() {
    for m in 2..=4 {
        let perms = permutations(m);
        for a in &perms {
            for b in &perms {
                let (ra, rb) = (ranking(a), ranking(b));
                let d = kendall_tau(&ra, &rb).unwrap();
                assert_eq!(d, kendall(a, b));
                assert_eq!(d, kendall_tau(&rb, &ra).unwrap());
                let kn = normalized_kendall_tau(&ra, &rb).unwrap();
                assert!((0.0..=1.0).contains(&kn));
                for k in 1..=m {
                    let g = generalized_ranking_error(&ra, &rb, k).unwrap();
                    assert!((g - gre(a, b, k)).abs() < 1e-12, "{a:?} {b:?} {k}");
                    assert!((0.0..=1.0).contains(&g));
                    let ide = top_k_identification_error(&ra, &rb, k).unwrap();
                    assert!((0.0..=1.0).contains(&ide));
                }
                assert_eq!(generalized_ranking_error(&ra, &rb, m).unwrap(), 0.0 + gre(a, b, m));
                assert!((generalized_ranking_error(&ra, &rb, 1).unwrap() - top_k_identification_error(&ra, &rb, 1).unwrap()).abs() < 1e-15);
                assert_eq!(top_k_identification_error(&ra, &rb, m).unwrap(), 0.0);
            }
        }
    }
}

#[test]
fn reversed_ranking_is_maximally_far() {
    for m in 2..=9 {
        let id = Ranking::identity(m);
        let rev = ranking(&(0..m).rev().collect::<Vec<_>>());
        assert_eq!(normalized_kendall_tau(&id, &rev).unwrap(), 1.0);
        assert_eq!(generalized_ranking_error(&rev, &id, m).unwrap(), 1.0);
    }
}

#[test]
fn alpha_endpoints() {
    assert_eq!(GreParams::new(1, 8).unwrap().alpha(), 1.0);
    assert_eq!(GreParams::new(8, 8).unwrap().alpha(), 0.0);
    assert!((GreParams::new(3, 8).unwrap().alpha() - 5.0 / 7.0).abs() < 1e-15);
}

fn perm(m: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..m).collect::<Vec<_>>()).prop_shuffle()
}

fn pair_with_k() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, usize)> {
    (2usize..=8).prop_flat_map(|m| (perm(m), perm(m), 1..=m))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn gre_matches_oracle((a, b, k) in pair_with_k()) {
        let g = generalized_ranking_error(&ranking(&a), &ranking(&b), k).unwrap();
        prop_assert!((g - gre(&a, &b, k)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&g));
    }

    #[test]
    fn gre_of_truth_is_zero((a, _b, k) in pair_with_k()) {
        let r = ranking(&a);
        prop_assert_eq!(generalized_ranking_error(&r, &r, k).unwrap(), 0.0);
    }

    #[test]
    fn kendall_triangle_inequality(m in 2usize..=8, seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<Vec<usize>> = (0..3).map(|_| (0..m).collect()).collect();
        v.iter_mut().for_each(|p| p.shuffle(&mut rng));
        let r: Vec<Ranking> = v.iter().map(|p| ranking(p)).collect();
        let d = |i: usize, j: usize| kendall_tau(&r[i], &r[j]).unwrap();
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2));
    }

    #[test]
    fn agre_is_two_pass_mean(xs in proptest::collection::vec(0.0f64..=1.0, 1..300), w in 1usize..50) {
        let mut acc = AgreAccumulator::new(w);
        for &x in &xs {
            acc.push(x).unwrap();
        }
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        prop_assert!((acc.mean() - mean).abs() < 1e-12);
        let tail = &xs[xs.len().saturating_sub(w)..];
        prop_assert!((acc.window_mean() - tail.iter().sum::<f64>() / tail.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn restriction_preserves_relative_order(a in perm(8), keep in proptest::collection::vec(any::<bool>(), 8)) {
        let r = ranking(&a);
        match r.restrict(|x| keep[x.0]) {
            None => prop_assert!(keep.iter().all(|k| !k)),
            Some(sub) => {
                let expect: Vec<usize> = a.iter().copied().filter(|&x| keep[x]).collect();
                prop_assert_eq!(sub.indices().collect::<Vec<_>>(), expect);
            }
        }
    }

    #[test]
    fn ranking_text_round_trip(a in (1usize..=12).prop_flat_map(perm)) {
        let r = ranking(&a);
        prop_assert_eq!(r.to_string().parse::<Ranking>().unwrap(), r);
    }
}
