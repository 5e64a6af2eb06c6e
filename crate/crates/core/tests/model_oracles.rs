mod common;

use std::collections::HashMap;

use activeval::datagen::{
    add_clones, build_world, clone_invariants_hold, export_world, load_dataset, sample_mallows, sample_plackett_luce,
    CloneSpec, DatasetTable, GeneratorConfig, GeneratorKind,
};
use activeval::rankings::{kendall_tau, normalized_kendall_tau};
use activeval::ratings::{elo_batch_fit, elo_expected, EloTallies, Outcome, ScoState};
use activeval::rng;
use activeval::voting::{kemeny_ranking, kemeny_score_distance, PreferenceProfile};
use activeval::{AgentId, Ranking};
use proptest::prelude::*;
use rand::Rng;

use common::{kendall, permutations, ranking};

/// Pearson statistic of observed counts against expected probabilities.
fn chi_square(observed: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = observed.iter().sum();
    observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = p * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum()
}

#[test]
fn mallows_matches_exact_distribution() {
    let center = ranking(&[2, 0, 3, 1]);
    let perms = permutations(4);
    for phi in [0.3f64, 0.6, 1.0] {
        let weights: Vec<f64> = perms.iter().map(|p| phi.powi(kendall(p, &[2, 0, 3, 1]) as i32)).collect();
        let z: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / z).collect();
        let index: HashMap<Vec<usize>, usize> = perms.iter().cloned().zip(0..).collect();
        let mut counts = vec![0u64; perms.len()];
        let mut r = rng::seeded(7);
        for _ in 0..60_000 {
            let s = sample_mallows(&center, phi, &mut r).unwrap();
            counts[index[&s.indices().collect::<Vec<_>>()]] += 1;
        }
        // 23 degrees of freedom; 0.999 quantile is about 49.7
        let stat = chi_square(&counts, &probs);
        assert!(stat < 49.7, "phi {phi}: chi-square {stat}");
    }
}

#[test]
fn mallows_zero_dispersion_is_the_center() {
    let center = ranking(&[3, 1, 0, 2, 4]);
    let mut r = rng::seeded(1);
    for _ in 0..50 {
        assert_eq!(sample_mallows(&center, 0.0, &mut r).unwrap(), center);
    }
}

#[test]
fn plackett_luce_matches_softmax_products() {
    let thetas = [0.2f64, 1.0, 0.5];
    let tau = 0.7f64;
    let perms = permutations(3);
    let probs: Vec<f64> = perms
        .iter()
        .map(|p| {
            let mut rem: Vec<usize> = (0..3).collect();
            let mut pr = 1.0;
            for &a in p {
                let z: f64 = rem.iter().map(|&b| (thetas[b] / tau).exp()).sum();
                pr *= (thetas[a] / tau).exp() / z;
                rem.retain(|&b| b != a);
            }
            pr
        })
        .collect();
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let index: HashMap<Vec<usize>, usize> = perms.iter().cloned().zip(0..).collect();
    let mut counts = vec![0u64; 6];
    let mut r = rng::seeded(8);
    for _ in 0..60_000 {
        let s = sample_plackett_luce(&thetas, tau, &mut r).unwrap();
        counts[index[&s.indices().collect::<Vec<_>>()]] += 1;
    }
    // 5 degrees of freedom; 0.999 quantile is about 20.5
    assert!(chi_square(&counts, &probs) < 20.5);
}

#[test]
fn world_task_rankings_follow_means() {
    let cfg = GeneratorConfig::mallows(6, 9, 0.4);
    let w = build_world(&cfg, &mut rng::seeded(2)).unwrap();
    for v in 0..w.tasks() {
        let r = w.task(v).ranking();
        for pair in r.order().windows(2) {
            assert!(w.mean(v, pair[0]) > w.mean(v, pair[1]));
        }
        for a in 0..6 {
            assert!((0.0..=100.0).contains(&w.mean(v, AgentId(a))));
        }
    }
}

#[test]
fn plackett_luce_world_is_valid() {
    let cfg = GeneratorConfig {
        kind: GeneratorKind::PlackettLuce,
        ..GeneratorConfig::mallows(5, 20, 0.3)
    };
    let w = build_world(&cfg, &mut rng::seeded(4)).unwrap();
    assert_eq!((w.agents(), w.tasks()), (5, 20));
    assert!(w.ground_truth().is_permutation_of(5));
}

#[test]
fn clones_preserve_original_structure() {
    for seed in 0..40 {
        let cfg = GeneratorConfig::mallows(8, 12, 0.3);
        let w = build_world(&cfg, &mut rng::stream(seed, rng::Purpose::World, "w")).unwrap();
        let c = add_clones(&w, &CloneSpec::new(8, 0.1).unwrap(), &mut rng::stream(seed, rng::Purpose::Clones, "c")).unwrap();
        assert!(clone_invariants_hold(&w, &c));
        assert_eq!(c.agents(), 16);
        assert_eq!(c.original_agents(), 8);
        let orig = c.ground_truth().restrict(|a| a.0 < 8).unwrap();
        assert_eq!(&orig, w.ground_truth());
        for v in 0..c.tasks() {
            assert_eq!(&c.task(v).ranking().restrict(|a| a.0 < 8).unwrap(), w.task(v).ranking());
            for a in 8..16 {
                let o = c.clone_of(AgentId(a)).unwrap();
                assert_eq!(c.task(v).dist(AgentId(a)).stddev, c.task(v).dist(o).stddev);
            }
        }
    }
}

#[test]
fn dataset_round_trip_preserves_task_rankings() {
    let cfg = GeneratorConfig {
        sigma: 0.0,
        ..GeneratorConfig::mallows(7, 15, 0.3)
    };
    let w = build_world(&cfg, &mut rng::seeded(9)).unwrap();
    let mut buf = Vec::new();
    export_world(&w).write_csv(&mut buf).unwrap();
    let table = DatasetTable::from_reader(buf.as_slice()).unwrap();
    let loaded = load_dataset(&table).unwrap();
    assert_eq!(loaded.task_rankings(), w.task_rankings());
    let profile = PreferenceProfile::from_rankings(&w.task_rankings()).unwrap();
    let (k, _) = kemeny_ranking(&profile).unwrap();
    assert_eq!(kemeny_score_distance(&profile, loaded.ground_truth(), &k).unwrap(), 0.0);
    assert_eq!(kemeny_score_distance(&profile, loaded.ground_truth(), w.ground_truth()).unwrap(), 0.0);
}

#[test]
fn batch_elo_recovers_generating_ratings() {
    let truth = [1700.0, 1500.0, 1350.0, 1600.0];
    let mut tallies = EloTallies::new(4);
    let mut r = rng::seeded(5);
    for _ in 0..40_000 {
        let i = r.random_range(0..4);
        let j = (i + r.random_range(1..4)) % 4;
        let p = elo_expected(truth[i], truth[j]);
        let o = if r.random_bool(p) { Outcome::First } else { Outcome::Second };
        tallies.record(i, j, o);
    }
    let fit = elo_batch_fit(&tallies, 0.5, 10_000, 1e-9, None).unwrap();
    assert!(fit.converged);
    let mean_truth = truth.iter().sum::<f64>() / 4.0;
    for (f, t) in fit.ratings.iter().zip(truth) {
        assert!((f - (t - mean_truth + 1500.0)).abs() < 15.0, "{:?}", fit.ratings);
    }
}

#[test]
fn sco_gradient_matches_finite_differences() {
    let mut r = rng::seeded(6);
    let obs: Vec<(usize, usize)> = (0..30)
        .map(|_| {
            let w = r.random_range(0..5);
            (w, (w + r.random_range(1..5)) % 5)
        })
        .collect();
    let mut s = ScoState::new(5, 0.8, 0.01).unwrap();
    for x in s.ratings.iter_mut() {
        *x = r.random_range(-1.0..1.0);
    }
    let g = s.gradient(&obs);
    let h = 1e-6;
    for a in 0..5 {
        let mut up = s.clone();
        up.ratings[a] += h;
        let mut dn = s.clone();
        dn.ratings[a] -= h;
        let fd = (up.loss(&obs) - dn.loss(&obs)) / (2.0 * h);
        assert!((fd - g[a]).abs() < 1e-6, "{a}: {fd} vs {}", g[a]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mallows_samples_are_permutations(m in 1usize..10, phi in 0.0f64..=1.0, seed in any::<u64>()) {
        let center = Ranking::identity(m);
        let s = sample_mallows(&center, phi, &mut rng::seeded(seed)).unwrap();
        prop_assert!(s.is_permutation_of(m));
        prop_assert!(normalized_kendall_tau(&center, &s).unwrap() <= 1.0);
    }

    #[test]
    fn clone_invariants_on_random_worlds(m in 2usize..8, n in 1usize..6, clones in 0usize..6, eps in 0.0f64..0.99, seed in any::<u64>()) {
        let cfg = GeneratorConfig::mallows(m, n, 0.5);
        let w = build_world(&cfg, &mut rng::seeded(seed)).unwrap();
        let c = add_clones(&w, &CloneSpec::new(clones, eps).unwrap(), &mut rng::seeded(seed ^ 1)).unwrap();
        prop_assert!(clone_invariants_hold(&w, &c));
        prop_assert_eq!(kendall_tau(w.ground_truth(), &c.ground_truth().restrict(|a| a.0 < m).unwrap()).unwrap(), 0);
    }
}
