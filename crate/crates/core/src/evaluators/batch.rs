//! Growing-batch evaluators: all data collected so far is re-aggregated by
//! an offline method every round.

use super::{burn_in, other_agent, uniform_choose, BurnInSchedule, Cached, Choice, EvalContext, Evaluator, MeanTable, Observation};
use crate::error::Result;
use crate::games::{solve_zero_sum, MatrixGame, MixedStrategy};
use crate::rankings::{AgentId, Ranking};
use crate::ratings::{elo_batch_fit, EloTallies, Outcome, ScoState};
use crate::rng;
use crate::voting::{copeland_ranking, maximal_lotteries, ranked_pairs_ranking, PreferenceProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rule {
    Copeland,
    RankedPairs,
    MaximalLotteries,
}

/// Growing-batch Copeland, Ranked Pairs or iterated Maximal Lotteries over
/// the pairwise outcomes observed so far.
pub struct BatchVoting {
    name: &'static str,
    rule: Rule,
    agents: usize,
    tasks: usize,
    rng: rng::Rng,
    burn: BurnInSchedule,
    profile: PreferenceProfile,
    iterations: usize,
    exploration: f64,
    /// Top-tier lottery, used to sample agents under Maximal Lotteries.
    lottery: MixedStrategy,
    cache: Cached,
}

impl BatchVoting {
    fn new(ctx: &EvalContext, name: &'static str, rule: Rule) -> Result<Self> {
        let mut rng = ctx.rng(name);
        Ok(Self {
            name,
            rule,
            agents: ctx.agents,
            tasks: ctx.tasks,
            burn: burn_in(ctx, &mut rng),
            rng,
            profile: PreferenceProfile::new(ctx.agents),
            iterations: ctx.params.solver_iterations,
            exploration: ctx.params.exploration,
            lottery: MixedStrategy::uniform(ctx.agents),
            cache: Cached::new(ctx.agents),
        })
    }

    pub fn copeland(ctx: &EvalContext) -> Result<Self> {
        Self::new(ctx, "batch_copeland", Rule::Copeland)
    }

    pub fn ranked_pairs(ctx: &EvalContext) -> Result<Self> {
        Self::new(ctx, "batch_ranked_pairs", Rule::RankedPairs)
    }

    pub fn maximal_lotteries(ctx: &EvalContext) -> Result<Self> {
        Self::new(ctx, "batch_max_lotteries", Rule::MaximalLotteries)
    }

    pub fn profile(&self) -> &PreferenceProfile {
        &self.profile
    }

    fn refresh(&mut self) -> Result<()> {
        if !self.cache.dirty {
            return Ok(());
        }
        self.cache.ranking = match self.rule {
            Rule::Copeland => copeland_ranking(&self.profile)?,
            Rule::RankedPairs => ranked_pairs_ranking(&self.profile)?,
            Rule::MaximalLotteries => {
                let (r, lottery) = maximal_lotteries(&self.profile, self.iterations)?;
                self.lottery = MixedStrategy::from_weights(&lottery);
                r
            }
        };
        self.cache.dirty = false;
        Ok(())
    }
}

/// Records `obs` as one pairwise vote; a tie is half a vote each way.
fn record_vote(profile: &mut PreferenceProfile, obs: &Observation) {
    let (i, j) = (obs.agent_i.0, obs.agent_j.0);
    if obs.score_i > obs.score_j {
        profile.add_preference(i, j, 1.0);
    } else if obs.score_j > obs.score_i {
        profile.add_preference(j, i, 1.0);
    } else {
        profile.add_tie(i, j);
    }
}

/// Two distinct agents drawn from `s`; a repeated draw is replaced uniformly.
fn sample_pair<R: rand::Rng + ?Sized>(s: &MixedStrategy, rng: &mut R) -> (usize, usize) {
    let i = s.sample(rng);
    let mut j = s.sample(rng);
    if j == i {
        j = other_agent(s.len(), i, rng);
    }
    (i, j)
}

impl Evaluator for BatchVoting {
    fn name(&self) -> &'static str {
        self.name
    }

    fn choose(&mut self, _t: u64) -> Result<Choice> {
        if let Some(c) = self.burn.next(&mut self.rng) {
            return Ok(c);
        }
        if self.rule != Rule::MaximalLotteries {
            return Ok(uniform_choose(self.agents, self.tasks, &mut self.rng));
        }
        self.refresh()?;
        let task = rand::Rng::random_range(&mut self.rng, 0..self.tasks);
        let s = self.lottery.mixed_with_uniform(self.exploration);
        let (i, j) = sample_pair(&s, &mut self.rng);
        Ok(Choice {
            task,
            agent_i: AgentId(i),
            agent_j: AgentId(j),
        })
    }

    fn update(&mut self, obs: &Observation) -> Result<()> {
        record_vote(&mut self.profile, obs);
        self.cache.dirty = true;
        Ok(())
    }

    fn ranking(&mut self) -> Result<&Ranking> {
        self.refresh()?;
        Ok(&self.cache.ranking)
    }
}

/// Growing-batch Elo: a Bradley-Terry fit to all outcomes, warm-started from
/// the previous fit.
pub struct BatchElo {
    agents: usize,
    tasks: usize,
    rng: rng::Rng,
    burn: BurnInSchedule,
    tallies: EloTallies,
    ratings: Vec<f64>,
    prior: f64,
    iterations: usize,
    tolerance: f64,
    cache: Cached,
}

impl BatchElo {
    pub fn new(ctx: &EvalContext) -> Result<Self> {
        let mut rng = ctx.rng("batch_elo");
        Ok(Self {
            agents: ctx.agents,
            tasks: ctx.tasks,
            burn: burn_in(ctx, &mut rng),
            rng,
            tallies: EloTallies::new(ctx.agents),
            ratings: vec![crate::ratings::ELO_BASE; ctx.agents],
            prior: ctx.params.elo_prior_draws,
            iterations: ctx.params.elo_iterations,
            tolerance: ctx.params.elo_tolerance,
            cache: Cached::new(ctx.agents),
        })
    }
}

impl Evaluator for BatchElo {
    fn name(&self) -> &'static str {
        "batch_elo"
    }

    fn choose(&mut self, _t: u64) -> Result<Choice> {
        if let Some(c) = self.burn.next(&mut self.rng) {
            return Ok(c);
        }
        Ok(uniform_choose(self.agents, self.tasks, &mut self.rng))
    }

    fn update(&mut self, obs: &Observation) -> Result<()> {
        self.tallies
            .record(obs.agent_i.0, obs.agent_j.0, Outcome::from_scores(obs.score_i, obs.score_j));
        self.cache.dirty = true;
        Ok(())
    }

    fn ranking(&mut self) -> Result<&Ranking> {
        if self.cache.dirty {
            let fit = elo_batch_fit(&self.tallies, self.prior, self.iterations, self.tolerance, Some(&self.ratings))?;
            self.ratings = fit.ratings;
            self.cache.ranking = Ranking::by_descending(&self.ratings);
            self.cache.dirty = false;
        }
        Ok(&self.cache.ranking)
    }

    fn ratings(&mut self) -> Option<Vec<f64>> {
        self.ranking().ok()?;
        Some(self.ratings.clone())
    }
}

/// Growing-batch SCO: warm-started shuffled epochs over all strict outcomes.
pub struct BatchSco {
    agents: usize,
    tasks: usize,
    rng: rng::Rng,
    burn: BurnInSchedule,
    state: ScoState,
    observations: Vec<(usize, usize)>,
    epochs: usize,
    cache: Cached,
}

impl BatchSco {
    pub fn new(ctx: &EvalContext) -> Result<Self> {
        let mut rng = ctx.rng("batch_sco");
        Ok(Self {
            agents: ctx.agents,
            tasks: ctx.tasks,
            burn: burn_in(ctx, &mut rng),
            rng,
            state: ScoState::new(ctx.agents, ctx.params.sco_temperature, ctx.params.sco_learning_rate)?,
            observations: Vec::new(),
            epochs: ctx.params.sco_epochs,
            cache: Cached::new(ctx.agents),
        })
    }
}

impl Evaluator for BatchSco {
    fn name(&self) -> &'static str {
        "batch_sco"
    }

    fn choose(&mut self, _t: u64) -> Result<Choice> {
        if let Some(c) = self.burn.next(&mut self.rng) {
            return Ok(c);
        }
        Ok(uniform_choose(self.agents, self.tasks, &mut self.rng))
    }

    fn update(&mut self, obs: &Observation) -> Result<()> {
        let (i, j) = (obs.agent_i.0, obs.agent_j.0);
        match Outcome::from_scores(obs.score_i, obs.score_j) {
            Outcome::First => self.observations.push((i, j)),
            Outcome::Second => self.observations.push((j, i)),
            Outcome::Draw => return Ok(()),
        }
        self.state.fit(&mut self.observations, self.epochs, &mut self.rng);
        self.cache.dirty = true;
        Ok(())
    }

    fn ranking(&mut self) -> Result<&Ranking> {
        if self.cache.dirty {
            self.cache.ranking = self.state.ranking();
            self.cache.dirty = false;
        }
        Ok(&self.cache.ranking)
    }

    fn ratings(&mut self) -> Option<Vec<f64>> {
        Some(self.state.ratings.clone())
    }
}

/// Growing-batch Nash averaging on the agents-versus-tasks game of mean
/// normalized scores.
///
/// The equilibrium is recomputed every `nash_refresh` rounds; tasks and
/// agents are sampled from its exploration-mixed strategies.
pub struct BatchNashAveraging {
    agents: usize,
    tasks: usize,
    rng: rng::Rng,
    burn: BurnInSchedule,
    table: MeanTable,
    ctx: EvalContext,
    agent_strategy: MixedStrategy,
    task_strategy: MixedStrategy,
    since_refresh: usize,
    cache: Cached,
}

impl BatchNashAveraging {
    pub fn new(ctx: &EvalContext) -> Result<Self> {
        let mut rng = ctx.rng("batch_nash_averaging");
        Ok(Self {
            agents: ctx.agents,
            tasks: ctx.tasks,
            burn: burn_in(ctx, &mut rng),
            rng,
            table: MeanTable::new(ctx.agents, ctx.tasks),
            ctx: ctx.clone(),
            agent_strategy: MixedStrategy::uniform(ctx.agents),
            task_strategy: MixedStrategy::uniform(ctx.tasks),
            since_refresh: 0,
            cache: Cached::new(ctx.agents),
        })
    }

    /// The current estimated game, agents as rows.
    pub fn game(&self) -> MatrixGame {
        let unvisited = self.ctx.params.unvisited_utility;
        let mut pay = Vec::with_capacity(self.agents * self.tasks);
        for a in 0..self.agents {
            for v in 0..self.tasks {
                pay.push(self.table.mean(v, a).unwrap_or(unvisited));
            }
        }
        MatrixGame::new(self.agents, self.tasks, pay).expect("finite payoffs")
    }

    pub fn task_strategy(&self) -> &MixedStrategy {
        &self.task_strategy
    }

    fn current_ratings(&self) -> Vec<f64> {
        self.game().row_values(self.task_strategy.probs())
    }
}

impl Evaluator for BatchNashAveraging {
    fn name(&self) -> &'static str {
        "batch_nash_averaging"
    }

    fn choose(&mut self, _t: u64) -> Result<Choice> {
        if let Some(c) = self.burn.next(&mut self.rng) {
            return Ok(c);
        }
        let eps = self.ctx.params.exploration;
        let task = self.task_strategy.mixed_with_uniform(eps).sample(&mut self.rng);
        let (i, j) = sample_pair(&self.agent_strategy.mixed_with_uniform(eps), &mut self.rng);
        Ok(Choice {
            task,
            agent_i: AgentId(i),
            agent_j: AgentId(j),
        })
    }

    fn update(&mut self, obs: &Observation) -> Result<()> {
        self.table.observe(obs.task, obs.agent_i.0, self.ctx.normalize(obs.score_i));
        self.table.observe(obs.task, obs.agent_j.0, self.ctx.normalize(obs.score_j));
        self.since_refresh += 1;
        if self.since_refresh >= self.ctx.params.nash_refresh {
            self.since_refresh = 0;
            let sol = solve_zero_sum(&self.game(), self.ctx.params.solver_iterations)?;
            self.agent_strategy = sol.row;
            self.task_strategy = sol.col;
        }
        self.cache.dirty = true;
        Ok(())
    }

    fn ranking(&mut self) -> Result<&Ranking> {
        if self.cache.dirty {
            self.cache.ranking = Ranking::by_descending(&self.current_ratings());
            self.cache.dirty = false;
        }
        Ok(&self.cache.ranking)
    }

    fn ratings(&mut self) -> Option<Vec<f64>> {
        Some(self.current_ratings())
    }
}
