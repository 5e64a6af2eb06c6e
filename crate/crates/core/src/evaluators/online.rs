//! Fully online evaluators: constant-size state updated from each outcome.

use super::{other_agent, uniform_choose, Cached, Choice, EvalContext, Evaluator, Observation};
use crate::error::Result;
use crate::games::SampledSelfPlay;
use crate::rankings::{AgentId, Ranking};
use crate::ratings::{EloState, Outcome, ScoState};
use crate::rng;

pub struct OnlineElo {
    agents: usize,
    tasks: usize,
    rng: rng::Rng,
    state: EloState,
    cache: Cached,
}

impl OnlineElo {
    pub fn new(ctx: &EvalContext) -> Result<Self> {
        Ok(Self {
            agents: ctx.agents,
            tasks: ctx.tasks,
            rng: ctx.rng("online_elo"),
            state: EloState::new(ctx.agents, ctx.params.elo_k)?,
            cache: Cached::new(ctx.agents),
        })
    }
}

impl Evaluator for OnlineElo {
    fn name(&self) -> &'static str {
        "online_elo"
    }

    fn choose(&mut self, _t: u64) -> Result<Choice> {
        Ok(uniform_choose(self.agents, self.tasks, &mut self.rng))
    }

    fn update(&mut self, obs: &Observation) -> Result<()> {
        self.state
            .update(obs.agent_i.0, obs.agent_j.0, Outcome::from_scores(obs.score_i, obs.score_j))?;
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

pub struct OnlineSco {
    agents: usize,
    tasks: usize,
    rng: rng::Rng,
    state: ScoState,
    cache: Cached,
}

impl OnlineSco {
    pub fn new(ctx: &EvalContext) -> Result<Self> {
        Ok(Self {
            agents: ctx.agents,
            tasks: ctx.tasks,
            rng: ctx.rng("online_sco"),
            state: ScoState::new(ctx.agents, ctx.params.sco_temperature, ctx.params.sco_learning_rate)?,
            cache: Cached::new(ctx.agents),
        })
    }
}

impl Evaluator for OnlineSco {
    fn name(&self) -> &'static str {
        "online_sco"
    }

    fn choose(&mut self, _t: u64) -> Result<Choice> {
        Ok(uniform_choose(self.agents, self.tasks, &mut self.rng))
    }

    fn update(&mut self, obs: &Observation) -> Result<()> {
        let (i, j) = (obs.agent_i.0, obs.agent_j.0);
        match Outcome::from_scores(obs.score_i, obs.score_j) {
            Outcome::First => self.state.update(i, j)?,
            Outcome::Second => self.state.update(j, i)?,
            Outcome::Draw => return Ok(()),
        }
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

/// `+1` if the first score is higher, `-1` if lower, `0` on a tie.
pub(crate) fn pairwise_utility(first: f64, second: f64) -> f64 {
    if first > second {
        1.0
    } else if first < second {
        -1.0
    } else {
        0.0
    }
}

/// Two regret-matching bandits in self-play on the sampled margin game.
///
/// When both bandits pick the same agent the game records a zero payoff for
/// that diagonal cell and the evaluated pair uses a uniformly drawn second
/// agent, whose outcome is not fed to the game.
pub struct OnlineMaximalLotteries {
    agents: usize,
    tasks: usize,
    rng: rng::Rng,
    game: SampledSelfPlay,
    pending: Option<(usize, usize)>,
    cache: Cached,
}

impl OnlineMaximalLotteries {
    pub fn new(ctx: &EvalContext) -> Result<Self> {
        Ok(Self {
            agents: ctx.agents,
            tasks: ctx.tasks,
            rng: ctx.rng("online_max_lotteries"),
            game: SampledSelfPlay::new(ctx.agents, ctx.agents, ctx.params.gamma, 0.0)?,
            pending: None,
            cache: Cached::new(ctx.agents),
        })
    }

    pub fn game(&self) -> &SampledSelfPlay {
        &self.game
    }
}

impl Evaluator for OnlineMaximalLotteries {
    fn name(&self) -> &'static str {
        "online_max_lotteries"
    }

    fn choose(&mut self, _t: u64) -> Result<Choice> {
        let task = rand::Rng::random_range(&mut self.rng, 0..self.tasks);
        let (i, j) = self.game.sample_actions(&mut self.rng);
        self.pending = Some((i, j));
        let j = if i == j { other_agent(self.agents, i, &mut self.rng) } else { j };
        Ok(Choice {
            task,
            agent_i: AgentId(i),
            agent_j: AgentId(j),
        })
    }

    fn update(&mut self, obs: &Observation) -> Result<()> {
        let (i, j) = (obs.agent_i.0, obs.agent_j.0);
        match self.pending.take() {
            Some((a, b)) if a == b && a == i => self.game.observe(a, a, 0.0)?,
            _ => self.game.observe(i, j, pairwise_utility(obs.score_i, obs.score_j))?,
        }
        self.cache.dirty = true;
        Ok(())
    }

    fn ranking(&mut self) -> Result<&Ranking> {
        if self.cache.dirty {
            self.cache.ranking = Ranking::by_descending(&self.game.row_ratings());
            self.cache.dirty = false;
        }
        Ok(&self.cache.ranking)
    }

    fn ratings(&mut self) -> Option<Vec<f64>> {
        Some(self.game.row_ratings())
    }
}

/// Regret-matching self-play of an agent player against a task player on
/// sampled normalized scores.
///
/// Only the first agent's score enters the game; the second agent is drawn
/// uniformly to complete the pair.
pub struct OnlineNashAveraging {
    agents: usize,
    rng: rng::Rng,
    ctx: EvalContext,
    game: SampledSelfPlay,
    cache: Cached,
}

impl OnlineNashAveraging {
    pub fn new(ctx: &EvalContext) -> Result<Self> {
        Ok(Self {
            agents: ctx.agents,
            rng: ctx.rng("online_nash_averaging"),
            game: SampledSelfPlay::new(ctx.agents, ctx.tasks, ctx.params.gamma, ctx.params.unvisited_utility)?,
            ctx: ctx.clone(),
            cache: Cached::new(ctx.agents),
        })
    }

    pub fn game(&self) -> &SampledSelfPlay {
        &self.game
    }
}

impl Evaluator for OnlineNashAveraging {
    fn name(&self) -> &'static str {
        "online_nash_averaging"
    }

    fn choose(&mut self, _t: u64) -> Result<Choice> {
        let (a, task) = self.game.sample_actions(&mut self.rng);
        let j = other_agent(self.agents, a, &mut self.rng);
        Ok(Choice {
            task,
            agent_i: AgentId(a),
            agent_j: AgentId(j),
        })
    }

    fn update(&mut self, obs: &Observation) -> Result<()> {
        self.game
            .observe(obs.agent_i.0, obs.task, self.ctx.normalize(obs.score_i))?;
        self.cache.dirty = true;
        Ok(())
    }

    fn ranking(&mut self) -> Result<&Ranking> {
        if self.cache.dirty {
            self.cache.ranking = Ranking::by_descending(&self.game.row_ratings());
            self.cache.dirty = false;
        }
        Ok(&self.cache.ranking)
    }

    fn ratings(&mut self) -> Option<Vec<f64>> {
        Some(self.game.row_ratings())
    }
}
