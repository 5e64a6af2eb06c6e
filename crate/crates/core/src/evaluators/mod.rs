//! Active evaluators: each picks a task and an agent pair per round, consumes
//! the two sampled scores and reports its current ranking.
//!
//! Algorithms are registered by name in a [`Registry`] and built at runtime
//! from an [`EvalContext`].

mod baselines;
mod batch;
mod mean_model;
mod online;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rankings::{AgentId, Ranking};
use crate::rng::{self, Purpose};
use crate::voting::PreferenceProfile;

pub use baselines::{BasicUcb, KemenyEl, UniformAveraging};
pub use batch::{BatchElo, BatchNashAveraging, BatchSco, BatchVoting};
pub use mean_model::{greedy_evaluation_set, MeanModelVoting, ProportionalRepresentation};
pub use online::{OnlineElo, OnlineMaximalLotteries, OnlineNashAveraging, OnlineSco};

/// The task and ordered agent pair evaluated in one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Choice {
    pub task: usize,
    pub agent_i: AgentId,
    pub agent_j: AgentId,
}

/// The outcome of evaluating a [`Choice`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub task: usize,
    pub agent_i: AgentId,
    pub agent_j: AgentId,
    pub score_i: f64,
    pub score_j: f64,
}

impl Observation {
    pub fn new(choice: Choice, score_i: f64, score_j: f64) -> Self {
        Self {
            task: choice.task,
            agent_i: choice.agent_i,
            agent_j: choice.agent_j,
            score_i,
            score_j,
        }
    }
}

pub trait Evaluator: Send {
    fn name(&self) -> &'static str;

    /// Selects the round-`t` task and agent pair (`t` starts at 1).
    fn choose(&mut self, t: u64) -> Result<Choice>;

    fn update(&mut self, obs: &Observation) -> Result<()>;

    /// The current ranking over all agents.
    fn ranking(&mut self) -> Result<&Ranking>;

    /// Per-agent ratings behind the ranking, when the method has them.
    fn ratings(&mut self) -> Option<Vec<f64>> {
        None
    }
}

fn default_exploration() -> f64 {
    0.1
}
fn default_gamma() -> f64 {
    crate::games::DEFAULT_GAMMA
}
fn default_solver_iterations() -> usize {
    crate::voting::DEFAULT_SOLVER_ITERATIONS
}
fn default_nash_refresh() -> usize {
    10
}
fn default_delta0() -> f64 {
    0.1
}
fn default_min_gap() -> f64 {
    0.05
}
fn default_elo_k() -> f64 {
    crate::ratings::DEFAULT_K_FACTOR
}
fn default_prior_draws() -> f64 {
    crate::ratings::DEFAULT_PRIOR_DRAWS
}
fn default_elo_iterations() -> usize {
    1_000
}
fn default_elo_tolerance() -> f64 {
    1e-6
}
fn default_sco_temperature() -> f64 {
    crate::ratings::DEFAULT_SCO_TEMPERATURE
}
fn default_sco_learning_rate() -> f64 {
    crate::ratings::DEFAULT_SCO_LEARNING_RATE
}
fn default_one() -> usize {
    1
}
fn default_pr_refresh() -> usize {
    50
}
fn default_true() -> bool {
    true
}

/// Tunable hyperparameters shared by all evaluators; each reads the ones it
/// needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalParams {
    /// Uniform mixing into equilibrium sampling strategies of batch game methods.
    #[serde(default = "default_exploration")]
    pub exploration: f64,
    /// Exploration of the regret-matching bandits in online game methods.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_solver_iterations")]
    pub solver_iterations: usize,
    /// Rounds between equilibrium recomputations in batch Nash averaging.
    #[serde(default = "default_nash_refresh")]
    pub nash_refresh: usize,
    /// Normalized payoff assumed for never-sampled cells of a Nash-averaging game.
    #[serde(default)]
    pub unvisited_utility: f64,
    /// UCB exploration constant; defaults to sqrt(2) times the score range.
    #[serde(default)]
    pub ucb_c: Option<f64>,
    #[serde(default = "default_delta0")]
    pub kemenyel_delta0: f64,
    /// Lower clamp of the estimated pairwise gap used for epoch quotas.
    #[serde(default = "default_min_gap")]
    pub kemenyel_min_gap: f64,
    /// Rounds between Kemeny recomputations; automatic when absent.
    #[serde(default)]
    pub kemenyel_refresh: Option<u64>,
    #[serde(default = "default_elo_k")]
    pub elo_k: f64,
    #[serde(default = "default_prior_draws")]
    pub elo_prior_draws: f64,
    #[serde(default = "default_elo_iterations")]
    pub elo_iterations: usize,
    #[serde(default = "default_elo_tolerance")]
    pub elo_tolerance: f64,
    #[serde(default = "default_sco_temperature")]
    pub sco_temperature: f64,
    #[serde(default = "default_sco_learning_rate")]
    pub sco_learning_rate: f64,
    #[serde(default = "default_one")]
    pub sco_epochs: usize,
    /// Evaluation-set size; defaults to ceil(n / 5).
    #[serde(default)]
    pub pr_evaluation_set: Option<usize>,
    #[serde(default = "default_pr_refresh")]
    pub pr_refresh: usize,
    #[serde(default = "default_exploration")]
    pub pr_exploration: f64,
    #[serde(default = "default_true")]
    pub burn_in: bool,
}

impl Default for EvalParams {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl EvalParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in [0,1], got {x}")))
            }
        };
        unit("exploration", self.exploration)?;
        unit("pr_exploration", self.pr_exploration)?;
        unit("unvisited_utility", self.unvisited_utility)?;
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0,1], got {}", self.gamma)));
        }
        if !(self.kemenyel_delta0 > 0.0 && self.kemenyel_delta0 < 1.0) {
            return Err(Error::Config("kemenyel_delta0 must lie in (0,1)".into()));
        }
        if !(self.kemenyel_min_gap > 0.0 && self.kemenyel_min_gap <= 1.0) {
            return Err(Error::Config("kemenyel_min_gap must lie in (0,1]".into()));
        }
        let positive = [
            ("elo_k", self.elo_k),
            ("elo_tolerance", self.elo_tolerance),
            ("sco_temperature", self.sco_temperature),
            ("sco_learning_rate", self.sco_learning_rate),
        ];
        for (name, x) in positive {
            if !(x > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {x}")));
            }
        }
        if self.elo_prior_draws < 0.0 {
            return Err(Error::Config("elo_prior_draws must be non-negative".into()));
        }
        let counts = [
            ("solver_iterations", self.solver_iterations),
            ("nash_refresh", self.nash_refresh),
            ("elo_iterations", self.elo_iterations),
            ("pr_refresh", self.pr_refresh),
        ];
        for (name, x) in counts {
            if x == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.pr_evaluation_set == Some(0) || self.kemenyel_refresh == Some(0) {
            return Err(Error::Config("evaluation set size and refresh periods must be at least 1".into()));
        }
        Ok(())
    }
}

/// Everything an evaluator factory needs.
#[derive(Debug, Clone)]
pub struct EvalContext {
    pub agents: usize,
    pub tasks: usize,
    /// Nominal score interval, used for UCB bonuses and utility scaling.
    pub score_interval: (f64, f64),
    pub seed: u64,
    pub params: EvalParams,
}

impl EvalContext {
    pub fn new(agents: usize, tasks: usize, seed: u64) -> Self {
        Self {
            agents,
            tasks,
            score_interval: (0.0, 100.0),
            seed,
            params: EvalParams::default(),
        }
    }

    pub fn with_params(mut self, params: EvalParams) -> Self {
        self.params = params;
        self
    }

    fn rng(&self, name: &str) -> rng::Rng {
        rng::stream(self.seed, Purpose::Evaluator, name)
    }

    fn width(&self) -> f64 {
        self.score_interval.1 - self.score_interval.0
    }

    /// Maps a score onto the unit interval of the nominal score range.
    fn normalize(&self, score: f64) -> f64 {
        (score - self.score_interval.0) / self.width()
    }

    fn validate(&self) -> Result<()> {
        if self.agents < 2 || self.tasks < 1 {
            return Err(Error::Domain(format!(
                "evaluators need at least 2 agents and 1 task, got {} and {}",
                self.agents, self.tasks
            )));
        }
        if !(self.width() > 0.0) {
            return Err(Error::Domain("score interval must have positive width".into()));
        }
        self.params.validate()
    }
}

pub type Factory = fn(&EvalContext) -> Result<Box<dyn Evaluator>>;

/// Every algorithm name known to [`Registry::standard`].
pub const ALGORITHMS: [&str; 17] = [
    "uniform_averaging",
    "basic_ucb",
    "kemenyel",
    "batch_elo",
    "online_elo",
    "batch_copeland",
    "batch_ranked_pairs",
    "batch_max_lotteries",
    "online_max_lotteries",
    "batch_sco",
    "online_sco",
    "batch_nash_averaging",
    "online_nash_averaging",
    "mean_model_copeland",
    "mean_model_ranked_pairs",
    "mean_model_max_lotteries",
    "proportional_representation",
];

/// Name-to-factory table of evaluators.
#[derive(Clone)]
pub struct Registry {
    factories: BTreeMap<String, Factory>,
}

impl Registry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn standard() -> Self {
        let mut r = Self::empty();
        let entries: [(&str, Factory); 17] = [
            ("uniform_averaging", |c| Ok(Box::new(UniformAveraging::new(c)?))),
            ("basic_ucb", |c| Ok(Box::new(BasicUcb::new(c)?))),
            ("kemenyel", |c| Ok(Box::new(KemenyEl::new(c)?))),
            ("batch_elo", |c| Ok(Box::new(BatchElo::new(c)?))),
            ("online_elo", |c| Ok(Box::new(OnlineElo::new(c)?))),
            ("batch_copeland", |c| Ok(Box::new(BatchVoting::copeland(c)?))),
            ("batch_ranked_pairs", |c| Ok(Box::new(BatchVoting::ranked_pairs(c)?))),
            ("batch_max_lotteries", |c| Ok(Box::new(BatchVoting::maximal_lotteries(c)?))),
            ("online_max_lotteries", |c| Ok(Box::new(OnlineMaximalLotteries::new(c)?))),
            ("batch_sco", |c| Ok(Box::new(BatchSco::new(c)?))),
            ("online_sco", |c| Ok(Box::new(OnlineSco::new(c)?))),
            ("batch_nash_averaging", |c| Ok(Box::new(BatchNashAveraging::new(c)?))),
            ("online_nash_averaging", |c| Ok(Box::new(OnlineNashAveraging::new(c)?))),
            ("mean_model_copeland", |c| Ok(Box::new(MeanModelVoting::copeland(c)?))),
            ("mean_model_ranked_pairs", |c| Ok(Box::new(MeanModelVoting::ranked_pairs(c)?))),
            ("mean_model_max_lotteries", |c| Ok(Box::new(MeanModelVoting::maximal_lotteries(c)?))),
            ("proportional_representation", |c| Ok(Box::new(ProportionalRepresentation::new(c)?))),
        ];
        for (name, f) in entries {
            r.register(name, f);
        }
        r
    }

    pub fn register(&mut self, name: &str, factory: Factory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn create(&self, name: &str, ctx: &EvalContext) -> Result<Box<dyn Evaluator>> {
        let f = self
            .factories
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {name:?}")))?;
        ctx.validate()?;
        f(ctx)
    }
}

impl Default for Registry {
    fn default() -> Self {
        Self::standard()
    }
}

/// Builds a standard evaluator by name.
pub fn create(name: &str, ctx: &EvalContext) -> Result<Box<dyn Evaluator>> {
    Registry::standard().create(name, ctx)
}

/// Uniform task and uniform unordered pair of distinct agents.
pub fn uniform_choose<R: Rng + ?Sized>(agents: usize, tasks: usize, rng: &mut R) -> Choice {
    let task = rng.random_range(0..tasks);
    let i = rng.random_range(0..agents);
    Choice {
        task,
        agent_i: AgentId(i),
        agent_j: AgentId(other_agent(agents, i, rng)),
    }
}

/// An agent other than `i`, uniformly.
fn other_agent<R: Rng + ?Sized>(agents: usize, i: usize, rng: &mut R) -> usize {
    let j = rng.random_range(0..agents - 1);
    if j >= i {
        j + 1
    } else {
        j
    }
}

/// A shuffled pass over every (task, agent) pair.
#[derive(Debug, Clone)]
pub struct BurnInSchedule {
    agents: usize,
    pairs: Vec<(usize, usize)>,
    cursor: usize,
}

impl BurnInSchedule {
    pub fn new<R: Rng + ?Sized>(agents: usize, tasks: usize, rng: &mut R) -> Self {
        let mut pairs: Vec<(usize, usize)> = (0..tasks).flat_map(|v| (0..agents).map(move |a| (v, a))).collect();
        pairs.shuffle(rng);
        Self { agents, pairs, cursor: 0 }
    }

    /// Disabled schedule that is immediately exhausted.
    pub fn disabled(agents: usize) -> Self {
        Self {
            agents,
            pairs: Vec::new(),
            cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn finished(&self) -> bool {
        self.cursor >= self.pairs.len()
    }

    /// Pops the next (task, first agent); the second agent is uniform among
    /// the others.
    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<Choice> {
        let &(task, a) = self.pairs.get(self.cursor)?;
        self.cursor += 1;
        Some(Choice {
            task,
            agent_i: AgentId(a),
            agent_j: AgentId(other_agent(self.agents, a, rng)),
        })
    }
}

fn burn_in<R: Rng + ?Sized>(ctx: &EvalContext, rng: &mut R) -> BurnInSchedule {
    if ctx.params.burn_in {
        BurnInSchedule::new(ctx.agents, ctx.tasks, rng)
    } else {
        BurnInSchedule::disabled(ctx.agents)
    }
}

/// Running mean score per (task, agent).
#[derive(Debug, Clone)]
pub struct MeanTable {
    agents: usize,
    mean: Vec<f64>,
    count: Vec<u64>,
}

impl MeanTable {
    pub fn new(agents: usize, tasks: usize) -> Self {
        Self {
            agents,
            mean: vec![0.0; agents * tasks],
            count: vec![0; agents * tasks],
        }
    }

    pub fn observe(&mut self, task: usize, agent: usize, score: f64) {
        let c = task * self.agents + agent;
        self.count[c] += 1;
        self.mean[c] += (score - self.mean[c]) / self.count[c] as f64;
    }

    pub fn count(&self, task: usize, agent: usize) -> u64 {
        self.count[task * self.agents + agent]
    }

    pub fn mean(&self, task: usize, agent: usize) -> Option<f64> {
        let c = task * self.agents + agent;
        (self.count[c] > 0).then_some(self.mean[c])
    }

    /// Means of one task; `None` until every agent has a sample there.
    pub fn task_means(&self, task: usize) -> Option<&[f64]> {
        let row = task * self.agents..(task + 1) * self.agents;
        self.count[row.clone()].iter().all(|&c| c > 0).then(|| &self.mean[row])
    }
}

/// Estimated task rankings and the profile they form as ballots.
#[derive(Debug, Clone)]
pub struct EstimatedRankings {
    table: MeanTable,
    rankings: Vec<Option<Ranking>>,
    profile: PreferenceProfile,
}

impl EstimatedRankings {
    pub fn new(agents: usize, tasks: usize) -> Self {
        Self {
            table: MeanTable::new(agents, tasks),
            rankings: vec![None; tasks],
            profile: PreferenceProfile::new(agents),
        }
    }

    pub fn table(&self) -> &MeanTable {
        &self.table
    }

    pub fn ranking(&self, task: usize) -> Option<&Ranking> {
        self.rankings[task].as_ref()
    }

    /// Ballots of all fully sampled tasks.
    pub fn profile(&self) -> &PreferenceProfile {
        &self.profile
    }

    pub fn observe(&mut self, task: usize, agent: usize, score: f64) {
        self.table.observe(task, agent, score);
    }

    /// Re-sorts task `task` and updates the profile; true if its ballot changed.
    pub fn refresh(&mut self, task: usize) -> bool {
        let Some(means) = self.table.task_means(task) else {
            return false;
        };
        let new = Ranking::by_descending(means);
        if self.rankings[task].as_ref() == Some(&new) {
            return false;
        }
        if let Some(old) = &self.rankings[task] {
            self.profile.add_ranking(old, -1.0);
        }
        self.profile.add_ranking(&new, 1.0);
        self.rankings[task] = Some(new);
        true
    }
}

/// Ranking cache recomputed only after new data.
#[derive(Debug, Clone)]
struct Cached {
    ranking: Ranking,
    dirty: bool,
}

impl Cached {
    fn new(agents: usize) -> Self {
        Self {
            ranking: Ranking::identity(agents),
            dirty: false,
        }
    }
}
