//! Synthetic and dataset-backed evaluation worlds.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rankings::{AgentId, Ranking};
use crate::voting::{kemeny_ranking, PreferenceProfile};

/// Minimum gap between two sampled means of one task.
const MIN_MEAN_GAP: f64 = 1e-9;
const MAX_REDRAWS: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub mean: f64,
    pub stddev: f64,
}

impl ScoreDistribution {
    pub fn new(mean: f64, stddev: f64) -> Result<Self> {
        if !mean.is_finite() || !stddev.is_finite() || stddev < 0.0 {
            return Err(Error::Domain(format!(
                "invalid score distribution N({mean}, {stddev})"
            )));
        }
        Ok(Self { mean, stddev })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.stddev == 0.0 {
            return self.mean;
        }
        let z: f64 = rng.sample(StandardNormal);
        self.mean + self.stddev * z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskModel {
    task_ranking: Ranking,
    dists: Vec<ScoreDistribution>,
}

impl TaskModel {
    /// Builds a task whose ranking is the descending order of `dists` means.
    pub fn from_distributions(dists: Vec<ScoreDistribution>) -> Self {
        let means: Vec<f64> = dists.iter().map(|d| d.mean).collect();
        Self {
            task_ranking: Ranking::by_descending(&means),
            dists,
        }
    }

    pub fn ranking(&self) -> &Ranking {
        &self.task_ranking
    }

    pub fn dists(&self) -> &[ScoreDistribution] {
        &self.dists
    }

    pub fn dist(&self, a: AgentId) -> &ScoreDistribution {
        &self.dists[a.0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationWorld {
    ground_truth: Ranking,
    tasks: Vec<TaskModel>,
    /// Agents `0..originals` are the original agents; later ids are clones.
    originals: usize,
    clone_of: Vec<Option<AgentId>>,
    agent_names: Option<Vec<String>>,
    task_names: Option<Vec<String>>,
}

impl EvaluationWorld {
    pub fn new(ground_truth: Ranking, tasks: Vec<TaskModel>) -> Result<Self> {
        let m = ground_truth.len();
        if m < 2 || tasks.is_empty() {
            return Err(Error::Domain("a world needs m >= 2 agents and n >= 1 tasks".into()));
        }
        for (v, t) in tasks.iter().enumerate() {
            if !t.task_ranking.is_permutation_of(m) || t.dists.len() != m {
                return Err(Error::Domain(format!("task {v} does not cover the {m} agents")));
            }
        }
        Ok(Self {
            ground_truth,
            tasks,
            originals: m,
            clone_of: vec![None; m],
            agent_names: None,
            task_names: None,
        })
    }

    pub fn agents(&self) -> usize {
        self.ground_truth.len()
    }

    pub fn tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn ground_truth(&self) -> &Ranking {
        &self.ground_truth
    }

    pub fn task(&self, v: usize) -> &TaskModel {
        &self.tasks[v]
    }

    pub fn task_models(&self) -> &[TaskModel] {
        &self.tasks
    }

    pub fn task_rankings(&self) -> Vec<Ranking> {
        self.tasks.iter().map(|t| t.task_ranking.clone()).collect()
    }

    pub fn mean(&self, v: usize, a: AgentId) -> f64 {
        self.tasks[v].dists[a.0].mean
    }

    pub fn original_agents(&self) -> usize {
        self.originals
    }

    pub fn clone_of(&self, a: AgentId) -> Option<AgentId> {
        self.clone_of[a.0]
    }

    pub fn agent_name(&self, a: AgentId) -> String {
        match &self.agent_names {
            Some(names) => names[a.0].clone(),
            None => format!("agent{}", a.0),
        }
    }

    pub fn task_name(&self, v: usize) -> String {
        match &self.task_names {
            Some(names) => names[v].clone(),
            None => format!("task{v}"),
        }
    }

    /// Draws one score for agent `a` on task `v`.
    pub fn sample_score<R: Rng + ?Sized>(&self, v: usize, a: AgentId, rng: &mut R) -> f64 {
        self.tasks[v].dists[a.0].sample(rng)
    }

    /// Width of the interval spanned by all means.
    pub fn score_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for t in &self.tasks {
            for d in &t.dists {
                lo = lo.min(d.mean);
                hi = hi.max(d.mean);
            }
        }
        (lo, hi)
    }
}

pub fn sample_score<R: Rng + ?Sized>(world: &EvaluationWorld, v: usize, a: AgentId, rng: &mut R) -> f64 {
    world.sample_score(v, a, rng)
}

/// Exact Mallows sampling by repeated insertion.
pub fn sample_mallows<R: Rng + ?Sized>(center: &Ranking, phi: f64, rng: &mut R) -> Result<Ranking> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::Domain(format!("Mallows dispersion must lie in [0,1], got {phi}")));
    }
    let c = center.order();
    let mut out: Vec<AgentId> = Vec::with_capacity(c.len());
    let mut weights: Vec<f64> = Vec::with_capacity(c.len());
    for (i, &item) in c.iter().enumerate() {
        // position j in 0..=i creates i - j inversions with earlier items
        weights.clear();
        let mut w = 1.0;
        for _ in 0..=i {
            weights.push(w);
            w *= phi;
        }
        weights.reverse();
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut j = i;
        for (idx, &wj) in weights.iter().enumerate() {
            if u < wj {
                j = idx;
                break;
            }
            u -= wj;
        }
        if weights[j] == 0.0 {
            j = i;
        }
        out.insert(j, item);
    }
    Ranking::new(out)
}

/// Plackett-Luce sampling: repeated softmax draws without replacement.
pub fn sample_plackett_luce<R: Rng + ?Sized>(thetas: &[f64], tau: f64, rng: &mut R) -> Result<Ranking> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("Plackett-Luce temperature must be positive, got {tau}")));
    }
    if thetas.is_empty() || thetas.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain("Plackett-Luce needs finite ratings".into()));
    }
    let mut remaining: Vec<usize> = (0..thetas.len()).collect();
    let mut out = Vec::with_capacity(thetas.len());
    let mut w = Vec::with_capacity(thetas.len());
    while !remaining.is_empty() {
        let top = remaining
            .iter()
            .map(|&a| thetas[a])
            .fold(f64::NEG_INFINITY, f64::max);
        w.clear();
        w.extend(remaining.iter().map(|&a| ((thetas[a] - top) / tau).exp()));
        let total: f64 = w.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = remaining.len() - 1;
        for (idx, &wi) in w.iter().enumerate() {
            if u < wi {
                pick = idx;
                break;
            }
            u -= wi;
        }
        out.push(AgentId(remaining.remove(pick)));
    }
    Ranking::new(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Mallows,
    PlackettLuce,
    Dataset,
}

fn default_kind() -> GeneratorKind {
    GeneratorKind::Mallows
}
fn default_m() -> usize {
    8
}
fn default_n() -> usize {
    50
}
fn default_phi() -> f64 {
    0.3
}
fn default_temperature() -> f64 {
    1.0
}
fn default_rating_interval() -> [f64; 2] {
    [0.0, 1.0]
}
fn default_score_interval() -> [f64; 2] {
    [0.0, 100.0]
}
fn default_sigma() -> f64 {
    20.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    #[serde(default = "default_kind")]
    pub kind: GeneratorKind,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_phi")]
    pub phi: f64,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_rating_interval")]
    pub rating_interval: [f64; 2],
    #[serde(default = "default_score_interval")]
    pub score_interval: [f64; 2],
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Base seed; the harness derives per-run seeds from it.
    #[serde(default)]
    pub seed: u64,
    /// Table for the `dataset` kind.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            m: default_m(),
            n: default_n(),
            phi: default_phi(),
            temperature: default_temperature(),
            rating_interval: default_rating_interval(),
            score_interval: default_score_interval(),
            sigma: default_sigma(),
            seed: 0,
            dataset: None,
        }
    }
}

impl GeneratorConfig {
    pub fn mallows(m: usize, n: usize, phi: f64) -> Self {
        Self {
            m,
            n,
            phi,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.score_interval;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Domain(format!("bad score interval [{lo}, {hi}]")));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::Domain(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        match self.kind {
            GeneratorKind::Dataset => {
                if self.dataset.is_none() {
                    return Err(Error::Domain("dataset generator needs a `dataset` path".into()));
                }
            }
            GeneratorKind::Mallows | GeneratorKind::PlackettLuce => {
                if self.m < 2 || self.n < 1 {
                    return Err(Error::Domain(format!(
                        "need m >= 2 and n >= 1, got m = {}, n = {}",
                        self.m, self.n
                    )));
                }
                if self.kind == GeneratorKind::Mallows && !(0.0..=1.0).contains(&self.phi) {
                    return Err(Error::Domain(format!("phi must lie in [0,1], got {}", self.phi)));
                }
                if self.kind == GeneratorKind::PlackettLuce {
                    let [a, b] = self.rating_interval;
                    if !(self.temperature > 0.0) || !(a.is_finite() && b.is_finite() && a <= b) {
                        return Err(Error::Domain("bad Plackett-Luce parameters".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Builds a world from `config`, drawing all randomness from `rng`.
pub fn build_world<R: Rng + ?Sized>(config: &GeneratorConfig, rng: &mut R) -> Result<EvaluationWorld> {
    config.validate()?;
    let (m, n) = (config.m, config.n);
    let task_rankings: Vec<Ranking>;
    let mut perm: Vec<usize> = (0..m).collect();
    let ground_truth = match config.kind {
        GeneratorKind::Dataset => {
            let path = config.dataset.as_ref().expect("validated");
            let table = DatasetTable::read_csv(path)?;
            return load_dataset(&table);
        }
        GeneratorKind::Mallows => {
            perm.shuffle(rng);
            let gt = Ranking::from_indices(perm.iter().copied())?;
            task_rankings = (0..n)
                .map(|_| sample_mallows(&gt, config.phi, rng))
                .collect::<Result<_>>()?;
            gt
        }
        GeneratorKind::PlackettLuce => {
            perm.shuffle(rng);
            let gt = Ranking::from_indices(perm.iter().copied())?;
            let [a, b] = config.rating_interval;
            let mut draws: Vec<f64> = (0..m).map(|_| a + (b - a) * rng.random::<f64>()).collect();
            draws.sort_by(|x, y| y.total_cmp(x));
            let mut thetas = vec![0.0; m];
            for (rank, agent) in gt.order().iter().enumerate() {
                thetas[agent.0] = draws[rank];
            }
            task_rankings = (0..n)
                .map(|_| sample_plackett_luce(&thetas, config.temperature, rng))
                .collect::<Result<_>>()?;
            gt
        }
    };
    let [lo, hi] = config.score_interval;
    let tasks = task_rankings
        .into_iter()
        .map(|r| {
            let means = distinct_means(m, lo, hi, rng)?;
            let mut dists = vec![ScoreDistribution { mean: 0.0, stddev: config.sigma }; m];
            for (rank, agent) in r.order().iter().enumerate() {
                dists[agent.0].mean = means[rank];
            }
            Ok(TaskModel {
                task_ranking: r,
                dists,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EvaluationWorld::new(ground_truth, tasks)
}

/// `m` uniform draws from `[lo, hi]` sorted descending, pairwise separated.
fn distinct_means<R: Rng + ?Sized>(m: usize, lo: f64, hi: f64, rng: &mut R) -> Result<Vec<f64>> {
    for _ in 0..MAX_REDRAWS {
        let mut v: Vec<f64> = (0..m).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        if v.windows(2).all(|w| w[0] - w[1] > MIN_MEAN_GAP) {
            return Ok(v);
        }
    }
    Err(Error::Domain(format!(
        "could not draw {m} distinct means from [{lo}, {hi}]"
    )))
}

fn default_epsilon() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloneSpec {
    pub count: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

impl CloneSpec {
    pub fn new(count: usize, epsilon: f64) -> Result<Self> {
        let s = Self { count, epsilon };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::Domain(format!(
                "clone epsilon must lie in [0,1), got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Adds `spec.count` clones, one by one, each of a uniformly chosen original.
///
/// Clones get ids `m, m+1, ...`; original ids are unchanged.
pub fn add_clones<R: Rng + ?Sized>(world: &EvaluationWorld, spec: &CloneSpec, rng: &mut R) -> Result<EvaluationWorld> {
    spec.validate()?;
    let originals = world.originals;
    let mut gt: Vec<AgentId> = world.ground_truth.order().to_vec();
    let mut orders: Vec<Vec<AgentId>> = world.tasks.iter().map(|t| t.task_ranking.order().to_vec()).collect();
    let mut dists: Vec<Vec<ScoreDistribution>> = world.tasks.iter().map(|t| t.dists.clone()).collect();
    let mut clone_of = world.clone_of.clone();
    for _ in 0..spec.count {
        let a = AgentId(rng.random_range(0..originals));
        let ahead = rng.random_bool(0.5);
        let id = AgentId(gt.len());
        let p = gt.iter().position(|&x| x == a).expect("agent in ground truth");
        gt.insert(if ahead { p } else { p + 1 }, id);
        for (order, d) in orders.iter_mut().zip(dists.iter_mut()) {
            let p = order.iter().position(|&x| x == a).expect("agent in task");
            let toward = if ahead { p.checked_sub(1) } else { Some(p + 1).filter(|&q| q < order.len()) };
            let b = match toward {
                Some(q) => order[q],
                None if ahead => order[p + 1],
                None => order[p - 1],
            };
            let da = d[a.0];
            let mean = da.mean + spec.epsilon * (d[b.0].mean - da.mean);
            let before = if mean > da.mean {
                true
            } else if mean < da.mean {
                false
            } else {
                ahead
            };
            order.insert(if before { p } else { p + 1 }, id);
            d.push(ScoreDistribution {
                mean,
                stddev: da.stddev,
            });
        }
        clone_of.push(Some(a));
    }
    let tasks = orders
        .into_iter()
        .zip(dists)
        .map(|(o, d)| {
            Ok(TaskModel {
                task_ranking: Ranking::new(o)?,
                dists: d,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = EvaluationWorld::new(Ranking::new(gt)?, tasks)?;
    out.originals = originals;
    out.clone_of = clone_of;
    out.task_names = world.task_names.clone();
    Ok(out)
}

/// True when every ranking of `cloned`, restricted to the first
/// `original.agents()` ids, equals the matching ranking of `original`.
pub fn clone_invariants_hold(original: &EvaluationWorld, cloned: &EvaluationWorld) -> bool {
    let m = original.agents();
    let keep = |a: AgentId| a.0 < m;
    if cloned.tasks() != original.tasks() {
        return false;
    }
    let same = |x: &Ranking, y: &Ranking| x.restrict(keep).map(|r| &r == y).unwrap_or(false);
    same(&cloned.ground_truth, &original.ground_truth)
        && cloned
            .tasks
            .iter()
            .zip(&original.tasks)
            .all(|(c, o)| same(&c.task_ranking, &o.task_ranking))
}

/// A complete task x agent table of score means and standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetTable {
    pub tasks: Vec<String>,
    pub agents: Vec<String>,
    /// Row-major by task: `cells[v * m + a]`.
    pub cells: Vec<ScoreDistribution>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    task: String,
    agent: String,
    mean: f64,
    stddev: f64,
}

impl DatasetTable {
    pub fn cell(&self, v: usize, a: usize) -> ScoreDistribution {
        self.cells[v * self.agents.len() + a]
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file).map_err(|e| match e {
            Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parses `task,agent,mean,stddev` rows, checking completeness.
    pub fn from_reader<Rd: Read>(reader: Rd) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut tasks: Vec<String> = Vec::new();
        let mut agents: Vec<String> = Vec::new();
        let mut task_ix: HashMap<String, usize> = HashMap::new();
        let mut agent_ix: HashMap<String, usize> = HashMap::new();
        let mut raw: Vec<(usize, usize, f64, f64)> = Vec::new();
        for (line, rec) in rdr.deserialize::<Row>().enumerate() {
            let row = rec.map_err(|e| Error::Data(format!("row {}: {e}", line + 2)))?;
            if !row.mean.is_finite() || !row.stddev.is_finite() || row.stddev < 0.0 {
                return Err(Error::Data(format!(
                    "row {}: invalid mean/stddev {} {}",
                    line + 2,
                    row.mean,
                    row.stddev
                )));
            }
            let v = *task_ix.entry(row.task.clone()).or_insert_with(|| {
                tasks.push(row.task.clone());
                tasks.len() - 1
            });
            let a = *agent_ix.entry(row.agent.clone()).or_insert_with(|| {
                agents.push(row.agent.clone());
                agents.len() - 1
            });
            raw.push((v, a, row.mean, row.stddev));
        }
        let (n, m) = (tasks.len(), agents.len());
        if n == 0 || m < 2 {
            return Err(Error::Data(format!("need at least 1 task and 2 agents, found {n} and {m}")));
        }
        let mut cells: Vec<Option<ScoreDistribution>> = vec![None; n * m];
        for (v, a, mean, stddev) in raw {
            let slot = &mut cells[v * m + a];
            if slot.is_some() {
                return Err(Error::Data(format!(
                    "duplicate cell for task {:?}, agent {:?}",
                    tasks[v], agents[a]
                )));
            }
            *slot = Some(ScoreDistribution { mean, stddev });
        }
        let mut missing = Vec::new();
        for v in 0..n {
            for a in 0..m {
                if cells[v * m + a].is_none() {
                    missing.push(format!("({}, {})", tasks[v], agents[a]));
                }
            }
        }
        if !missing.is_empty() {
            let shown: Vec<_> = missing.iter().take(5).cloned().collect();
            return Err(Error::Data(format!(
                "{} missing cells, e.g. {}",
                missing.len(),
                shown.join(", ")
            )));
        }
        Ok(Self {
            tasks,
            agents,
            cells: cells.into_iter().map(|c| c.expect("checked")).collect(),
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let m = self.agents.len();
        for (v, task) in self.tasks.iter().enumerate() {
            for (a, agent) in self.agents.iter().enumerate() {
                let c = self.cells[v * m + a];
                w.serialize(Row {
                    task: task.clone(),
                    agent: agent.clone(),
                    mean: c.mean,
                    stddev: c.stddev,
                })
                .map_err(|e| Error::Data(e.to_string()))?;
            }
        }
        w.flush().map_err(|e| Error::Data(e.to_string()))?;
        Ok(())
    }

    /// Tasks whose means are all equal.
    pub fn constant_tasks(&self) -> Vec<usize> {
        let m = self.agents.len();
        (0..self.tasks.len())
            .filter(|&v| {
                let row = &self.cells[v * m..(v + 1) * m];
                row.iter().all(|c| c.mean == row[0].mean)
            })
            .collect()
    }
}

/// Normalizes each task to `[0, 100]` and takes the Kemeny ranking of the
/// task rankings as ground truth.
pub fn load_dataset(table: &DatasetTable) -> Result<EvaluationWorld> {
    let constant = table.constant_tasks();
    if let Some(&v) = constant.first() {
        return Err(Error::Data(format!("task {:?} has constant means", table.tasks[v])));
    }
    let m = table.agents.len();
    let tasks: Vec<TaskModel> = (0..table.tasks.len())
        .map(|v| {
            let row = &table.cells[v * m..(v + 1) * m];
            let lo = row.iter().map(|c| c.mean).fold(f64::INFINITY, f64::min);
            let hi = row.iter().map(|c| c.mean).fold(f64::NEG_INFINITY, f64::max);
            let scale = 100.0 / (hi - lo);
            let dists = row
                .iter()
                .map(|c| ScoreDistribution {
                    mean: ((c.mean - lo) * scale).clamp(0.0, 100.0),
                    stddev: c.stddev * scale,
                })
                .collect();
            TaskModel::from_distributions(dists)
        })
        .collect();
    let rankings: Vec<Ranking> = tasks.iter().map(|t| t.task_ranking.clone()).collect();
    let profile = PreferenceProfile::from_rankings(&rankings)?;
    let (gt, _) = kemeny_ranking(&profile)?;
    let mut world = EvaluationWorld::new(gt, tasks)?;
    world.agent_names = Some(table.agents.clone());
    world.task_names = Some(table.tasks.clone());
    Ok(world)
}

/// Exports `world` in the dataset table format.
pub fn export_world(world: &EvaluationWorld) -> DatasetTable {
    DatasetTable {
        tasks: (0..world.tasks()).map(|v| world.task_name(v)).collect(),
        agents: (0..world.agents()).map(|a| world.agent_name(AgentId(a))).collect(),
        cells: world.tasks.iter().flat_map(|t| t.dists.iter().copied()).collect(),
    }
}
