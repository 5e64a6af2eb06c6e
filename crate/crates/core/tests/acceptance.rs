//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use activeval::datagen::{
    add_clones, build_world, clone_invariants_hold, export_world, load_dataset, CloneSpec, DatasetTable,
    GeneratorConfig,
};
use activeval::games::{exploitability, solve_zero_sum, MatrixGame, SampledSelfPlay, DEFAULT_GAMMA};
use activeval::harness::{kemeny_recovery, run_and_report, run_experiment, world_for_seed, AggregateReport, ExperimentConfig, Seeds};
use activeval::rankings::{
    generalized_ranking_error, kendall_tau, normalized_kendall_tau, top_k_identification_error, AgreAccumulator,
};
use activeval::rng::{self, Purpose};
use activeval::voting::{kemeny_ranking, kemeny_score_distance, PreferenceProfile, VotingRule};
use activeval::AgentId;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_force_kemeny, gre, kendall, permutations, ranking};

const TABLE2: [&str; 10] = [
    "basic_ucb",
    "uniform_averaging",
    "proportional_representation",
    "batch_elo",
    "batch_sco",
    "kemenyel",
    "batch_copeland",
    "batch_max_lotteries",
    "batch_ranked_pairs",
    "batch_nash_averaging",
];

type Outcome = Result<String, String>;

fn table2_config(phi: f64, k_values: Vec<usize>) -> ExperimentConfig {
    ExperimentConfig {
        generator: GeneratorConfig::mallows(8, 50, phi),
        algorithms: TABLE2.iter().map(|&a| a.into()).collect(),
        horizon: 10_000,
        k_values,
        seeds: Seeds::Count(100),
        ..ExperimentConfig::default()
    }
}

fn agre(r: &AggregateReport, alg: &str, k: usize) -> f64 {
    r.agre(alg, k).unwrap_or_else(|| panic!("missing {alg} k={k}")).agre
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn table2_low_dispersion() -> Outcome {
    let r = run_experiment(&table2_config(0.3, vec![3, 8])).map_err(|e| e.to_string())?;
    let ucb3 = agre(&r, "basic_ucb", 3);
    let uni3 = agre(&r, "uniform_averaging", 3);
    let uni8 = agre(&r, "uniform_averaging", 8);
    let nash3 = agre(&r, "batch_nash_averaging", 3);
    let others = median(
        TABLE2
            .iter()
            .filter(|&&a| a != "batch_nash_averaging")
            .map(|a| agre(&r, a, 3))
            .collect(),
    );
    let detail = format!(
        "ucb k3 {ucb3:.4}, uniform k3 {uni3:.4}, uniform k8 {uni8:.4}, nash k3 {nash3:.4} vs median of others {others:.4}"
    );
    let ok = ucb3 <= 0.010
        && uni3 <= 0.010
        && uni8 <= 0.006
        && nash3 >= 3.0 * others
        && [3, 8].iter().all(|&k| {
            let nash = agre(&r, "batch_nash_averaging", k);
            agre(&r, "basic_ucb", k) < nash && agre(&r, "uniform_averaging", k) < nash
        });
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn table2_high_dispersion() -> Outcome {
    let r = run_experiment(&table2_config(0.6, vec![3])).map_err(|e| e.to_string())?;
    let pr = agre(&r, "proportional_representation", 3);
    let best_other = TABLE2
        .iter()
        .filter(|&&a| a != "proportional_representation")
        .map(|&a| (a, agre(&r, a, 3)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let detail = format!("pr {pr:.4}, best other {} {:.4}", best_other.0, best_other.1);
    if pr <= best_other.1 + 0.005 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn kemeny_recovery_check() -> Outcome {
    let low = kemeny_recovery(&GeneratorConfig::mallows(8, 50, 0.3), 100).map_err(|e| e.to_string())?;
    let high = kemeny_recovery(&GeneratorConfig::mallows(8, 50, 0.6), 100).map_err(|e| e.to_string())?;
    let detail = format!(
        "phi 0.3: {}/100 exact; phi 0.6: {}/100 exact, mean K_n {:.4}, mean KSD {:.3}",
        low.exact, high.exact, high.mean_kn, high.mean_ksd
    );
    if low.exact == 100 && high.exact >= 70 && high.mean_kn <= 0.02 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn equilibrium_check() -> Outcome {
    let pennies = MatrixGame::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
    let rps = MatrixGame::from_rows(&[vec![0.0, -1.0, 1.0], vec![1.0, 0.0, -1.0], vec![-1.0, 1.0, 0.0]]).unwrap();
    let mut worst_full: f64 = 0.0;
    let mut worst_value: f64 = 0.0;
    let mut worst_sampled: f64 = 0.0;
    for g in [&pennies, &rps] {
        let n = g.rows();
        let uniform = vec![1.0 / n as f64; n];
        let sol = solve_zero_sum(g, 10_000).map_err(|e| e.to_string())?;
        worst_full = worst_full.max(sol.row.max_abs_diff(&uniform)).max(sol.col.max_abs_diff(&uniform));
        worst_value = worst_value.max(sol.value.abs());
        let mut sp = SampledSelfPlay::new(n, n, DEFAULT_GAMMA, 0.0).unwrap();
        let mut r = rng::seeded(1);
        for _ in 0..100_000 {
            sp.step::<_, _, activeval::Error>(&mut r, |a, b, _| Ok(g.payoff(a, b))).unwrap();
        }
        worst_sampled = worst_sampled
            .max(sp.row.average_strategy().max_abs_diff(&uniform))
            .max(sp.col.average_strategy().max_abs_diff(&uniform));
    }
    // exploitability of bandit self-play on RPS, averaged over seeds
    let checkpoints = [100u64, 300, 1_000, 3_000, 10_000, 30_000, 100_000];
    let seeds = 20;
    let mut mean = vec![0.0; checkpoints.len()];
    for s in 0..seeds {
        let mut sp = SampledSelfPlay::new(3, 3, DEFAULT_GAMMA, 0.0).unwrap();
        let mut r = rng::stream(s, Purpose::Auxiliary, "exploitability");
        let mut c = 0;
        for t in 1..=*checkpoints.last().unwrap() {
            sp.step::<_, _, activeval::Error>(&mut r, |a, b, _| Ok(rps.payoff(a, b))).unwrap();
            if t == checkpoints[c] {
                mean[c] += exploitability(&rps, &sp.row.average_strategy(), &sp.col.average_strategy()) / seeds as f64;
                c += 1;
            }
        }
    }
    let x: Vec<f64> = checkpoints.iter().map(|&t| t as f64).collect();
    let slope = common::log_log_slope(&x, &mean);
    let detail = format!(
        "full L_inf {worst_full:.4}, |value| {worst_value:.4}, sampled L_inf {worst_sampled:.4}, slope {slope:.3}"
    );
    if worst_full <= 0.05 && worst_value <= 0.01 && worst_sampled <= 0.1 && (slope + 0.5).abs() <= 0.15 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn voting_oracle_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let rules = [
        VotingRule::Copeland,
        VotingRule::RankedPairs,
        VotingRule::Kemeny,
        VotingRule::MaximalLotteries { iterations: 1_000 },
    ];
    let (mut mismatches, mut condorcet, mut condorcet_fail) = (0, 0, 0);
    for _ in 0..500 {
        let m = rng.random_range(2..=6);
        let mut p = PreferenceProfile::new(m);
        for _ in 0..rng.random_range(1..=15) {
            let mut v: Vec<usize> = (0..m).collect();
            v.shuffle(&mut rng);
            p.add_ranking(&ranking(&v), 1.0);
        }
        let (_, score) = kemeny_ranking(&p).map_err(|e| e.to_string())?;
        if score != brute_force_kemeny(&p) {
            mismatches += 1;
        }
        if let Some(w) = p.condorcet_winner() {
            condorcet += 1;
            if rules.iter().any(|r| r.rank(&p).ok().map(|x| x.order()[0]) != Some(AgentId(w))) {
                condorcet_fail += 1;
            }
        }
    }
    let detail = format!("{mismatches} Kemeny mismatches; {condorcet_fail}/{condorcet} Condorcet failures");
    if mismatches == 0 && condorcet_fail == 0 && condorcet > 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Checks every metric property on one pair; returns a description of the
/// first violation.
fn metric_properties(a: &[usize], b: &[usize]) -> Option<String> {
    let m = a.len();
    let (ra, rb) = (ranking(a), ranking(b));
    let d = kendall_tau(&ra, &rb).ok()?;
    if d != kendall(a, b) {
        return Some(format!("K_d {a:?} {b:?}"));
    }
    let kn = normalized_kendall_tau(&ra, &rb).ok()?;
    if !(0.0..=1.0).contains(&kn) {
        return Some(format!("K_n bounds {a:?} {b:?}"));
    }
    for k in 1..=m {
        let g = generalized_ranking_error(&ra, &rb, k).ok()?;
        let ide = top_k_identification_error(&ra, &rb, k).ok()?;
        if !(0.0..=1.0).contains(&g) || !(0.0..=1.0).contains(&ide) || (g - gre(a, b, k)).abs() > 1e-12 {
            return Some(format!("GRE {a:?} {b:?} k={k}"));
        }
        if generalized_ranking_error(&rb, &rb, k).ok()? != 0.0 {
            return Some(format!("GRE(gt, gt) {b:?} k={k}"));
        }
    }
    if (generalized_ranking_error(&ra, &rb, 1).ok()? - top_k_identification_error(&ra, &rb, 1).ok()?).abs() > 1e-15 {
        return Some(format!("k = 1 endpoint {a:?} {b:?}"));
    }
    let full_pairs = (m * (m - 1) / 2) as f64;
    let kn_top: f64 = kendall(a, b) as f64 / full_pairs;
    if (generalized_ranking_error(&ra, &rb, m).ok()? - kn_top).abs() > 1e-12 {
        return Some(format!("k = m endpoint {a:?} {b:?}"));
    }
    None
}

fn metric_suite_check() -> Outcome {
    let mut cases = 0u64;
    for m in 2..=4 {
        let perms = permutations(m);
        for a in &perms {
            for b in &perms {
                cases += 1;
                if let Some(e) = metric_properties(a, b) {
                    return Err(e);
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..10_000 {
        let m = rng.random_range(2..=8);
        let mut a: Vec<usize> = (0..m).collect();
        let mut b = a.clone();
        a.shuffle(&mut rng);
        b.shuffle(&mut rng);
        cases += 1;
        if let Some(e) = metric_properties(&a, &b) {
            return Err(e);
        }
    }
    // two-pass AGRE
    for _ in 0..1_000 {
        let xs: Vec<f64> = (0..rng.random_range(1..500)).map(|_| rng.random::<f64>()).collect();
        let w = rng.random_range(1..300);
        let mut acc = AgreAccumulator::new(w);
        xs.iter().for_each(|&x| acc.push(x).unwrap());
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let tail = &xs[xs.len().saturating_sub(w)..];
        let wmean = tail.iter().sum::<f64>() / tail.len() as f64;
        if (acc.mean() - mean).abs() > 1e-12 || (acc.window_mean() - wmean).abs() > 1e-12 {
            return Err("AGRE two-pass mismatch".into());
        }
        cases += 1;
    }
    Ok(format!("{cases} cases, zero failures"))
}

fn clone_check() -> Outcome {
    let all: Vec<&str> = activeval::evaluators::ALGORITHMS
        .iter()
        .copied()
        .filter(|&a| a != "kemenyel")
        .collect();
    let cfg = ExperimentConfig {
        generator: GeneratorConfig::mallows(8, 50, 0.3),
        algorithms: all.iter().map(|&a| a.into()).collect(),
        horizon: 10_000,
        k_values: vec![3],
        seeds: Seeds::Count(30),
        clones: Some(CloneSpec::new(8, 0.1).unwrap()),
        restrict_to_originals: true,
        ..ExperimentConfig::default()
    };
    for &seed in &cfg.seed_values() {
        let base = build_world(&cfg.generator, &mut rng::stream(seed, Purpose::World, "world")).map_err(|e| e.to_string())?;
        let cloned = world_for_seed(&cfg, seed).map_err(|e| e.to_string())?;
        if !clone_invariants_hold(&base, &cloned) {
            return Err(format!("clone invariants violated at seed {seed}"));
        }
        let again = add_clones(&base, cfg.clones.as_ref().unwrap(), &mut rng::stream(seed, Purpose::Clones, "clones"))
            .map_err(|e| e.to_string())?;
        if again.ground_truth() != cloned.ground_truth() {
            return Err(format!("clone generation not reproducible at seed {seed}"));
        }
    }
    let r = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let mut order: Vec<(&str, f64)> = all.iter().map(|&a| (a, agre(&r, a, 3))).collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1));
    let rank = |name: &str| order.iter().position(|(a, _)| *a == name).unwrap() + 1;
    let detail = format!(
        "ucb #{}, uniform #{}, batch_nash #{} of {}; order: {}",
        rank("basic_ucb"),
        rank("uniform_averaging"),
        rank("batch_nash_averaging"),
        order.len(),
        order.iter().map(|(a, v)| format!("{a} {v:.4}")).collect::<Vec<_>>().join(", ")
    );
    if rank("basic_ucb") <= 4 && rank("uniform_averaging") <= 4 && rank("batch_nash_averaging") == order.len() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn dataset_check() -> Outcome {
    let mut exact_rankings = 0;
    let mut ksd_zero = 0;
    let instances = 20;
    for seed in 0..instances {
        let cfg = GeneratorConfig::mallows(8, 50, 0.3);
        let world = build_world(&cfg, &mut rng::stream(seed, Purpose::World, "dataset")).map_err(|e| e.to_string())?;
        let mut buf = Vec::new();
        export_world(&world).write_csv(&mut buf).map_err(|e| e.to_string())?;
        let loaded = load_dataset(&DatasetTable::from_reader(buf.as_slice()).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        if loaded.task_rankings() == world.task_rankings() {
            exact_rankings += 1;
        }
        let profile = PreferenceProfile::from_rankings(&world.task_rankings()).map_err(|e| e.to_string())?;
        let (k, _) = kemeny_ranking(&profile).map_err(|e| e.to_string())?;
        let d1 = kemeny_score_distance(&profile, loaded.ground_truth(), &k).map_err(|e| e.to_string())?;
        let d2 = kemeny_score_distance(&profile, loaded.ground_truth(), world.ground_truth()).map_err(|e| e.to_string())?;
        if d1 == 0.0 && d2 == 0.0 {
            ksd_zero += 1;
        }
    }
    let mut detail = format!("{exact_rankings}/{instances} task rankings preserved, {ksd_zero}/{instances} at KSD 0");
    // Optional headline check on user-supplied data.
    if let Ok(path) = std::env::var("ACTIVEVAL_AGENT57_CSV") {
        let mut cfg = ExperimentConfig::from_toml(&format!(
            "algorithms = [\"batch_sco\", \"batch_elo\"]\nseeds = 100\n[generator]\nkind = \"dataset\"\ndataset = {path:?}\n"
        ))
        .map_err(|e| e.to_string())?;
        cfg.k_values = vec![3];
        let r = run_experiment(&cfg).map_err(|e| e.to_string())?;
        let (sco, elo) = (agre(&r, "batch_sco", 3), agre(&r, "batch_elo", 3));
        detail.push_str(&format!("; supplied data: batch_sco {sco:.4} vs batch_elo {elo:.4}"));
        if sco >= elo {
            return Err(detail);
        }
    }
    if exact_rankings == instances && ksd_zero == instances {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn determinism_check() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut cfg = ExperimentConfig {
        generator: GeneratorConfig::mallows(8, 50, 0.3),
        algorithms: ["basic_ucb", "batch_sco", "online_max_lotteries", "proportional_representation", "batch_nash_averaging"]
            .iter()
            .map(|&a| a.into())
            .collect(),
        horizon: 2_000,
        k_values: vec![3, 8],
        seeds: Seeds::Count(5),
        ..ExperimentConfig::default()
    };
    for (i, d) in dirs.iter().enumerate() {
        cfg.output = d.path().to_path_buf();
        cfg.workers = i + 1;
        run_and_report(&cfg).map_err(|e| e.to_string())?;
    }
    for f in ["curves.csv", "agre.csv"] {
        let a = std::fs::read(dirs[0].path().join(f)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dirs[1].path().join(f)).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("{f} differs between reruns"));
        }
    }
    Ok("curves.csv and agre.csv byte-identical".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("C1 low-dispersion AGRE table", table2_low_dispersion),
        ("C2 high-dispersion best algorithm", table2_high_dispersion),
        ("C3 Kemeny ground-truth recovery", kemeny_recovery_check),
        ("C4 equilibrium solvers", equilibrium_check),
        ("C5 voting-rule oracles", voting_oracle_check),
        ("C6 metric properties", metric_suite_check),
        ("C7 clone robustness", clone_check),
        ("C8 dataset round trip", dataset_check),
        ("C9 determinism", determinism_check),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(d) => println!("PASS {name}: {d} ({secs:.1}s)"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d} ({secs:.1}s)");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
