//! How well the Kemeny ranking of task rankings recovers a generator's
//! ground truth, from exact task rankings and from sampled scores.

use std::path::Path;

use crate::datagen::{build_world, GeneratorConfig};
use crate::error::{Error, Result};
use crate::evaluators::{uniform_choose, EstimatedRankings};
use crate::rankings::{normalized_kendall_tau, Ranking};
use crate::rng::{self, Purpose};
use crate::voting::{kemeny_ranking, kemeny_score_distance, PreferenceProfile, KEMENY_MAX_AGENTS};

use super::config::ExperimentConfig;
use super::svg::{line_chart, Band, Series};

/// Summary over independent worlds at one dispersion.
#[derive(Debug, Clone, PartialEq)]
pub struct KemenyRecovery {
    pub phi: f64,
    pub instances: usize,
    /// Worlds whose Kemeny ranking has score distance 0 to the ground truth.
    pub exact: usize,
    pub mean_kn: f64,
    pub mean_ksd: f64,
}

impl KemenyRecovery {
    pub fn fraction(&self) -> f64 {
        self.exact as f64 / self.instances as f64
    }
}

fn check_agents(m: usize) -> Result<()> {
    if m > KEMENY_MAX_AGENTS {
        return Err(Error::Capability(format!(
            "exact Kemeny supports at most {KEMENY_MAX_AGENTS} agents, got {m}"
        )));
    }
    Ok(())
}

fn instance_seed(base: u64, i: usize) -> u64 {
    base.wrapping_add(i as u64)
}

/// Builds `instances` worlds and compares the Kemeny ranking of each world's
/// task rankings with its ground truth.
pub fn kemeny_recovery(generator: &GeneratorConfig, instances: usize) -> Result<KemenyRecovery> {
    generator.validate()?;
    check_agents(generator.m)?;
    let (mut exact, mut kn, mut ksd) = (0usize, 0.0, 0.0);
    for i in 0..instances {
        let mut wrng = rng::stream(instance_seed(generator.seed, i), Purpose::World, "kemeny");
        let world = build_world(generator, &mut wrng)?;
        let profile = PreferenceProfile::from_rankings(&world.task_rankings())?;
        let (k, _) = kemeny_ranking(&profile)?;
        let d = kemeny_score_distance(&profile, world.ground_truth(), &k)?;
        if d == 0.0 {
            exact += 1;
        }
        ksd += d;
        kn += normalized_kendall_tau(world.ground_truth(), &k)?;
    }
    let n = instances.max(1) as f64;
    Ok(KemenyRecovery {
        phi: generator.phi,
        instances,
        exact,
        mean_kn: kn / n,
        mean_ksd: ksd / n,
    })
}

/// Mean distances of the Kemeny ranking over estimated task rankings as
/// scores are sampled uniformly.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingCurve {
    pub phi: f64,
    pub t: Vec<u64>,
    pub mean_kn: Vec<f64>,
    pub ci95_kn: Vec<f64>,
    pub mean_ksd: Vec<f64>,
}

/// Samples a uniform (task, pair) per round and records, every `every`
/// rounds, the Kemeny ranking of the profile of estimated task rankings
/// against the ground truth. Score distance is measured on the exact task
/// rankings.
pub fn kemeny_sampling_curve(generator: &GeneratorConfig, instances: usize, horizon: u64, every: u64) -> Result<SamplingCurve> {
    generator.validate()?;
    check_agents(generator.m)?;
    if every == 0 {
        return Err(Error::Config("sample_every must be positive".into()));
    }
    let checkpoints: Vec<u64> = (1..=horizon).filter(|t| t % every == 0 || *t == horizon).collect();
    let mut kn = vec![Vec::with_capacity(instances); checkpoints.len()];
    let mut ksd = vec![0.0; checkpoints.len()];
    for i in 0..instances {
        let seed = instance_seed(generator.seed, i);
        let world = build_world(generator, &mut rng::stream(seed, Purpose::World, "kemeny"))?;
        let truth_profile = PreferenceProfile::from_rankings(&world.task_rankings())?;
        let mut srng = rng::stream(seed, Purpose::Scores, "kemeny_sampling");
        let mut est = EstimatedRankings::new(world.agents(), world.tasks());
        let mut dirty = true;
        let mut current = Ranking::identity(world.agents());
        let mut c_idx = 0;
        for t in 1..=horizon {
            let c = uniform_choose(world.agents(), world.tasks(), &mut srng);
            for a in [c.agent_i, c.agent_j] {
                let x = world.sample_score(c.task, a, &mut srng);
                est.observe(c.task, a.0, x);
            }
            dirty |= est.refresh(c.task);
            if checkpoints.get(c_idx) == Some(&t) {
                if dirty {
                    current = kemeny_ranking(est.profile())?.0;
                    dirty = false;
                }
                kn[c_idx].push(normalized_kendall_tau(world.ground_truth(), &current)?);
                ksd[c_idx] += kemeny_score_distance(&truth_profile, world.ground_truth(), &current)?;
                c_idx += 1;
            }
        }
    }
    let n = instances.max(1) as f64;
    let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / n;
    Ok(SamplingCurve {
        phi: generator.phi,
        mean_kn: kn.iter().map(mean).collect(),
        ci95_kn: kn
            .iter()
            .map(|v| {
                if v.len() < 2 {
                    return 0.0;
                }
                let mu = mean(v);
                let var = v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
                1.96 * var.sqrt() / n.sqrt()
            })
            .collect(),
        mean_ksd: ksd.iter().map(|s| s / n).collect(),
        t: checkpoints,
    })
}

/// Runs both checks for every configured dispersion and writes
/// `kemeny_recovery.csv`, `kemeny_sampling.csv` and `kemeny_sampling.svg`.
pub fn write_kemeny_reports(config: &ExperimentConfig, out: &Path) -> Result<(Vec<KemenyRecovery>, Vec<SamplingCurve>)> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let spec = &config.kemeny;
    let mut recs = Vec::new();
    let mut curves = Vec::new();
    for &phi in &spec.phi {
        let mut g = config.generator.clone();
        g.phi = phi;
        recs.push(kemeny_recovery(&g, spec.instances)?);
        if spec.sample_instances > 0 && spec.sample_horizon > 0 {
            curves.push(kemeny_sampling_curve(&g, spec.sample_instances, spec.sample_horizon, spec.sample_every)?);
        }
    }
    let path = out.join("kemeny_recovery.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let err = |e: csv::Error| Error::Data(e.to_string());
    w.write_record(["phi", "instances", "exact", "fraction", "mean_kn", "mean_ksd"]).map_err(err)?;
    for r in &recs {
        w.write_record([
            r.phi.to_string(),
            r.instances.to_string(),
            r.exact.to_string(),
            r.fraction().to_string(),
            r.mean_kn.to_string(),
            r.mean_ksd.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = out.join("kemeny_sampling.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    w.write_record(["phi", "t", "mean_kn", "ci95_kn", "mean_ksd"]).map_err(err)?;
    for c in &curves {
        for i in 0..c.t.len() {
            w.write_record([
                c.phi.to_string(),
                c.t[i].to_string(),
                c.mean_kn[i].to_string(),
                c.ci95_kn[i].to_string(),
                c.mean_ksd[i].to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    if !curves.is_empty() {
        let series: Vec<Series> = curves
            .iter()
            .map(|c| Series {
                label: format!("phi = {}", c.phi),
                x: c.t.iter().map(|&t| t as f64).collect(),
                y: c.mean_kn.clone(),
                band: Some(Band {
                    lower: c.mean_kn.iter().zip(&c.ci95_kn).map(|(m, h)| (m - h).max(0.0)).collect(),
                    upper: c.mean_kn.iter().zip(&c.ci95_kn).map(|(m, h)| m + h).collect(),
                }),
            })
            .collect();
        let svg = line_chart("Kemeny ranking of sampled scores", "iteration", "normalized Kendall tau", &series, false);
        let path = out.join("kemeny_sampling.svg");
        std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
    }
    Ok((recs, curves))
}
