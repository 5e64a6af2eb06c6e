//! The experiment loop: evaluators choose, worlds answer with sampled scores,
//! rankings are scored against the ground truth every round.

mod config;
mod kemeny;
mod report;
mod svg;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::datagen::{add_clones, build_world, EvaluationWorld};
use crate::error::{Error, Result};
use crate::evaluators::{Choice, EvalContext, Evaluator, Observation, Registry};
use crate::rankings::{gre_unchecked, AgentId, AgreAccumulator, GreParams, Ranking};
use crate::rng::{self, Purpose};

pub use config::{AlgorithmSpec, ExperimentConfig, KemenyCheckSpec, Seeds, SweepSpec};
pub use kemeny::{kemeny_recovery, kemeny_sampling_curve, write_kemeny_reports, KemenyRecovery, SamplingCurve};
pub use report::{emit_reports, read_agre_csv, read_curves_csv, rebuild_plots, write_ratings_csv, AgreRow, CurveRow};
pub use svg::{line_chart, Band, Series};

/// How rankings are scored against the ground truth.
#[derive(Debug, Clone)]
pub struct Scorer {
    truth: Ranking,
    params: Vec<GreParams>,
    /// Agents `>= originals` are dropped before scoring.
    restrict: Option<usize>,
}

impl Scorer {
    pub fn new(world: &EvaluationWorld, k_values: &[usize], restrict_to_originals: bool) -> Result<Self> {
        let originals = world.original_agents();
        let restrict = (restrict_to_originals && originals < world.agents()).then_some(originals);
        let truth = match restrict {
            Some(m) => world
                .ground_truth()
                .restrict(|a| a.0 < m)
                .ok_or_else(|| Error::Contract("ground truth has no original agents".into()))?,
            None => world.ground_truth().clone(),
        };
        let m = truth.len();
        let params = k_values
            .iter()
            .map(|&k| GreParams::new(k, m).map_err(|e| Error::Config(format!("k = {k}: {e}"))))
            .collect::<Result<_>>()?;
        Ok(Self { truth, params, restrict })
    }

    pub fn truth(&self) -> &Ranking {
        &self.truth
    }

    /// GRE of `r` for each cutoff.
    pub fn score(&self, r: &Ranking, out: &mut [f64]) {
        match self.restrict {
            Some(m) => {
                let sub = r.restrict(|a: AgentId| a.0 < m).expect("originals present");
                for (o, p) in out.iter_mut().zip(&self.params) {
                    *o = gre_unchecked(&sub, &self.truth, *p);
                }
            }
            None => {
                for (o, p) in out.iter_mut().zip(&self.params) {
                    *o = gre_unchecked(r, &self.truth, *p);
                }
            }
        }
    }
}

/// One round of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub t: u64,
    pub task: usize,
    pub agent_i: AgentId,
    pub agent_j: AgentId,
    pub score_i: f64,
    pub score_j: f64,
    pub ranking: Ranking,
    /// GRE for each cutoff, in `k_values` order.
    pub gre: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub algorithm: String,
    pub k_values: Vec<usize>,
    pub rows: Vec<RunRow>,
    /// Terminal AGRE per cutoff.
    pub agre: Vec<f64>,
}

impl RunRecord {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = ["t", "task", "agent_i", "agent_j", "score_i", "score_j", "ranking"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(self.k_values.iter().map(|k| format!("gre_k{k}")));
        let csv_err = |e: csv::Error| Error::Data(e.to_string());
        out.write_record(&header).map_err(csv_err)?;
        for r in &self.rows {
            let mut rec = vec![
                r.t.to_string(),
                r.task.to_string(),
                r.agent_i.0.to_string(),
                r.agent_j.0.to_string(),
                r.score_i.to_string(),
                r.score_j.to_string(),
                r.ranking.to_csv_field(),
            ];
            rec.extend(r.gre.iter().map(|g| g.to_string()));
            out.write_record(&rec).map_err(csv_err)?;
        }
        out.flush().map_err(|e| Error::Data(e.to_string()))
    }
}

fn check_choice(c: &Choice, world: &EvaluationWorld, name: &str, t: u64) -> Result<()> {
    let m = world.agents();
    if c.task >= world.tasks() || c.agent_i.0 >= m || c.agent_j.0 >= m || c.agent_i == c.agent_j {
        return Err(Error::Contract(format!(
            "{name} chose an invalid round {t}: task {}, agents {} and {}",
            c.task, c.agent_i.0, c.agent_j.0
        )));
    }
    Ok(())
}

/// Runs `horizon` rounds, handing each round to `sink`.
fn drive<F>(
    world: &EvaluationWorld,
    evaluator: &mut dyn Evaluator,
    horizon: u64,
    scorer: &Scorer,
    scores: &mut rng::Rng,
    mut sink: F,
) -> Result<()>
where
    F: FnMut(u64, &Choice, f64, f64, &Ranking, &[f64]) -> Result<()>,
{
    let name = evaluator.name();
    let m = world.agents();
    let mut gre = vec![0.0; scorer.params.len()];
    for t in 1..=horizon {
        let c = evaluator.choose(t)?;
        check_choice(&c, world, name, t)?;
        let si = world.sample_score(c.task, c.agent_i, scores);
        let sj = world.sample_score(c.task, c.agent_j, scores);
        evaluator.update(&Observation::new(c, si, sj))?;
        let r = evaluator.ranking()?;
        if !r.is_permutation_of(m) {
            return Err(Error::Contract(format!(
                "{name} reported an invalid ranking at round {t}: {r}"
            )));
        }
        scorer.score(r, &mut gre);
        sink(t, &c, si, sj, r, &gre)?;
    }
    Ok(())
}

/// Runs one evaluator and keeps every round.
pub fn run_single(
    world: &EvaluationWorld,
    evaluator: &mut dyn Evaluator,
    horizon: u64,
    k_values: &[usize],
    restrict_to_originals: bool,
    scores: &mut rng::Rng,
) -> Result<RunRecord> {
    let scorer = Scorer::new(world, k_values, restrict_to_originals)?;
    let mut rows = Vec::with_capacity(horizon as usize);
    let mut acc: Vec<AgreAccumulator> = k_values.iter().map(|_| AgreAccumulator::new(1)).collect();
    drive(world, evaluator, horizon, &scorer, scores, |t, c, si, sj, r, gre| {
        for (a, &g) in acc.iter_mut().zip(gre) {
            a.push(g)?;
        }
        rows.push(RunRow {
            t,
            task: c.task,
            agent_i: c.agent_i,
            agent_j: c.agent_j,
            score_i: si,
            score_j: sj,
            ranking: r.clone(),
            gre: gre.to_vec(),
        });
        Ok(())
    })?;
    Ok(RunRecord {
        algorithm: evaluator.name().to_string(),
        k_values: k_values.to_vec(),
        rows,
        agre: acc.iter().map(AgreAccumulator::mean).collect(),
    })
}

/// Per-run results kept for aggregation.
#[derive(Debug, Clone)]
pub struct RunCurves {
    pub seed: u64,
    /// Windowed GRE per cutoff per round.
    pub windowed: Vec<Vec<f64>>,
    pub agre: Vec<f64>,
    pub ratings: Option<Vec<f64>>,
}

/// Runs one evaluator, keeping only windowed curves and AGRE.
pub fn run_curves(
    world: &EvaluationWorld,
    evaluator: &mut dyn Evaluator,
    horizon: u64,
    k_values: &[usize],
    window: usize,
    restrict_to_originals: bool,
    scores: &mut rng::Rng,
) -> Result<RunCurves> {
    let scorer = Scorer::new(world, k_values, restrict_to_originals)?;
    let mut acc: Vec<AgreAccumulator> = k_values.iter().map(|_| AgreAccumulator::new(window)).collect();
    let mut windowed: Vec<Vec<f64>> = k_values.iter().map(|_| Vec::with_capacity(horizon as usize)).collect();
    drive(world, evaluator, horizon, &scorer, scores, |_, _, _, _, _, gre| {
        for ((a, w), &g) in acc.iter_mut().zip(windowed.iter_mut()).zip(gre) {
            a.push(g)?;
            w.push(a.window_mean());
        }
        Ok(())
    })?;
    Ok(RunCurves {
        seed: 0,
        windowed,
        agre: acc.iter().map(AgreAccumulator::mean).collect(),
        ratings: evaluator.ratings(),
    })
}

/// Welford running mean and variance.
#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Normal-approximation 95% half-width.
    fn ci95(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let sd = (self.m2 / (self.n - 1) as f64).max(0.0).sqrt();
        1.96 * sd / (self.n as f64).sqrt()
    }
}

/// Mean windowed-GRE curve of one algorithm at one cutoff; round `t` is
/// index `t - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSeries {
    pub algorithm: String,
    pub k: usize,
    pub mean: Vec<f64>,
    pub ci95: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreEntry {
    pub algorithm: String,
    pub k: usize,
    pub agre: f64,
    pub ci95: f64,
    /// Per-seed terminal AGRE, in seed order.
    pub per_seed: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AggregateReport {
    pub k_values: Vec<usize>,
    pub seeds: Vec<u64>,
    pub curves: Vec<CurveSeries>,
    pub agre: Vec<AgreEntry>,
    /// Final ratings per (algorithm, seed), when exported.
    pub ratings: Vec<(String, u64, Vec<f64>)>,
}

impl AggregateReport {
    pub fn agre(&self, algorithm: &str, k: usize) -> Option<&AgreEntry> {
        self.agre.iter().find(|e| e.algorithm == algorithm && e.k == k)
    }

    pub fn curve(&self, algorithm: &str, k: usize) -> Option<&CurveSeries> {
        self.curves.iter().find(|e| e.algorithm == algorithm && e.k == k)
    }

    pub fn algorithms(&self) -> Vec<&str> {
        let mut v: Vec<&str> = Vec::new();
        for e in &self.agre {
            if !v.contains(&e.algorithm.as_str()) {
                v.push(&e.algorithm);
            }
        }
        v
    }
}

/// Builds the world of one seed, with clones when configured.
pub fn world_for_seed(config: &ExperimentConfig, seed: u64) -> Result<EvaluationWorld> {
    let mut wrng = rng::stream(seed, Purpose::World, "world");
    let world = build_world(&config.generator, &mut wrng)?;
    match &config.clones {
        Some(spec) if spec.count > 0 => {
            let mut crng = rng::stream(seed, Purpose::Clones, "clones");
            add_clones(&world, spec, &mut crng)
        }
        _ => Ok(world),
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

/// Runs every algorithm on every seed and aggregates in seed order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<AggregateReport> {
    config.validate()?;
    let seeds = config.seed_values();
    let pool = pool(config.workers)?;
    pool.install(|| {
        let worlds: Vec<EvaluationWorld> = seeds
            .par_iter()
            .map(|&s| world_for_seed(config, s))
            .collect::<Result<_>>()?;
        let registry = Registry::standard();
        let mut report = AggregateReport {
            k_values: config.k_values.clone(),
            seeds: seeds.clone(),
            ..AggregateReport::default()
        };
        for spec in &config.algorithms {
            let params = config.params_for(spec)?;
            let name = spec.name();
            let runs: Vec<RunCurves> = seeds
                .par_iter()
                .zip(worlds.par_iter())
                .map(|(&seed, world)| {
                    let ctx = EvalContext {
                        agents: world.agents(),
                        tasks: world.tasks(),
                        score_interval: (0.0, 100.0),
                        seed,
                        params: params.clone(),
                    };
                    let mut ev = registry.create(name, &ctx)?;
                    let mut scores = rng::stream(seed, Purpose::Scores, name);
                    let mut run = run_curves(
                        world,
                        ev.as_mut(),
                        config.horizon,
                        &config.k_values,
                        config.window,
                        config.restrict_to_originals,
                        &mut scores,
                    )?;
                    run.seed = seed;
                    Ok(run)
                })
                .collect::<Result<_>>()?;
            aggregate_into(&mut report, name, &config.k_values, &runs, config.export_ratings);
        }
        Ok(report)
    })
}

fn aggregate_into(report: &mut AggregateReport, name: &str, k_values: &[usize], runs: &[RunCurves], ratings: bool) {
    for (ki, &k) in k_values.iter().enumerate() {
        let horizon = runs[0].windowed[ki].len();
        let mut cells = vec![Welford::default(); horizon];
        let mut agre = Welford::default();
        for run in runs {
            for (c, &x) in cells.iter_mut().zip(&run.windowed[ki]) {
                c.push(x);
            }
            agre.push(run.agre[ki]);
        }
        report.curves.push(CurveSeries {
            algorithm: name.to_string(),
            k,
            mean: cells.iter().map(|c| c.mean.clamp(0.0, 1.0)).collect(),
            ci95: cells.iter().map(Welford::ci95).collect(),
        });
        report.agre.push(AgreEntry {
            algorithm: name.to_string(),
            k,
            agre: agre.mean.clamp(0.0, 1.0),
            ci95: agre.ci95(),
            per_seed: runs.iter().map(|r| r.agre[ki]).collect(),
        });
    }
    if ratings {
        for run in runs {
            if let Some(r) = &run.ratings {
                report.ratings.push((name.to_string(), run.seed, r.clone()));
            }
        }
    }
}

/// Runs the experiment and writes its reports into `config.output`.
pub fn run_and_report(config: &ExperimentConfig) -> Result<AggregateReport> {
    let report = run_experiment(config)?;
    emit_reports(&report, &config.output, config.curve_every, config.log_log)?;
    if config.export_ratings {
        write_ratings_csv(&report, &config.output.join("ratings.csv"))?;
    }
    Ok(report)
}

/// One cell of a sweep.
#[derive(Debug, Clone)]
pub struct SweepCell {
    pub phi: f64,
    pub directory: PathBuf,
    pub report: AggregateReport,
}

fn phi_label(phi: f64) -> String {
    format!("phi_{phi}")
}

/// Runs the cross product of the sweep's dispersions with its cutoffs and
/// algorithms, one output subdirectory per dispersion, plus a combined
/// `sweep_agre.csv`.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<SweepCell>> {
    let sweep = config.sweep.clone().unwrap_or_default();
    let phis = if sweep.phi.is_empty() { vec![config.generator.phi] } else { sweep.phi.clone() };
    let mut cells = Vec::new();
    for phi in phis {
        let mut c = config.clone();
        c.generator.phi = phi;
        if !sweep.k.is_empty() {
            c.k_values = sweep.k.clone();
        }
        if !sweep.algorithms.is_empty() {
            c.algorithms = sweep.algorithms.clone();
        }
        c.output = config.output.join(phi_label(phi));
        c.sweep = None;
        let report = run_and_report(&c)?;
        cells.push(SweepCell {
            phi,
            directory: c.output.clone(),
            report,
        });
    }
    report::write_sweep_summary(&cells, &config.output.join("sweep_agre.csv"))?;
    Ok(cells)
}

/// Output directory helper used by the CLI.
pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}
