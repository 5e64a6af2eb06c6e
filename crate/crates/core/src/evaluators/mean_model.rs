//! Mean-model evaluators: per-(task, agent) running means give estimated task
//! rankings, which are aggregated as ballots.

use rand::Rng;

use super::{burn_in, uniform_choose, BurnInSchedule, Cached, Choice, EvalContext, EstimatedRankings, Evaluator, Observation};
use crate::error::Result;
use crate::rankings::{kendall_tau, Ranking};
use crate::rng;
use crate::voting::{copeland_ranking, maximal_lotteries_ranking, ranked_pairs_ranking, PreferenceProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Rule {
    Copeland,
    RankedPairs,
    MaximalLotteries,
}

fn apply(rule: Rule, profile: &PreferenceProfile, iterations: usize) -> Result<Ranking> {
    match rule {
        Rule::Copeland => copeland_ranking(profile),
        Rule::RankedPairs => ranked_pairs_ranking(profile),
        Rule::MaximalLotteries => maximal_lotteries_ranking(profile, iterations),
    }
}

fn observe(est: &mut EstimatedRankings, obs: &Observation) -> bool {
    est.observe(obs.task, obs.agent_i.0, obs.score_i);
    est.observe(obs.task, obs.agent_j.0, obs.score_j);
    est.refresh(obs.task)
}

/// Uniform sampling; a voting rule over the estimated task rankings.
pub struct MeanModelVoting {
    name: &'static str,
    rule: Rule,
    agents: usize,
    tasks: usize,
    rng: rng::Rng,
    burn: BurnInSchedule,
    estimates: EstimatedRankings,
    iterations: usize,
    cache: Cached,
}

impl MeanModelVoting {
    fn new(ctx: &EvalContext, name: &'static str, rule: Rule) -> Result<Self> {
        let mut rng = ctx.rng(name);
        Ok(Self {
            name,
            rule,
            agents: ctx.agents,
            tasks: ctx.tasks,
            burn: burn_in(ctx, &mut rng),
            rng,
            estimates: EstimatedRankings::new(ctx.agents, ctx.tasks),
            iterations: ctx.params.solver_iterations,
            cache: Cached::new(ctx.agents),
        })
    }

    pub fn copeland(ctx: &EvalContext) -> Result<Self> {
        Self::new(ctx, "mean_model_copeland", Rule::Copeland)
    }

    pub fn ranked_pairs(ctx: &EvalContext) -> Result<Self> {
        Self::new(ctx, "mean_model_ranked_pairs", Rule::RankedPairs)
    }

    pub fn maximal_lotteries(ctx: &EvalContext) -> Result<Self> {
        Self::new(ctx, "mean_model_max_lotteries", Rule::MaximalLotteries)
    }

    pub fn estimates(&self) -> &EstimatedRankings {
        &self.estimates
    }
}

impl Evaluator for MeanModelVoting {
    fn name(&self) -> &'static str {
        self.name
    }

    fn choose(&mut self, _t: u64) -> Result<Choice> {
        if let Some(c) = self.burn.next(&mut self.rng) {
            return Ok(c);
        }
        Ok(uniform_choose(self.agents, self.tasks, &mut self.rng))
    }

    fn update(&mut self, obs: &Observation) -> Result<()> {
        if observe(&mut self.estimates, obs) {
            self.cache.dirty = true;
        }
        Ok(())
    }

    fn ranking(&mut self) -> Result<&Ranking> {
        if self.cache.dirty {
            self.cache.ranking = apply(self.rule, self.estimates.profile(), self.iterations)?;
            self.cache.dirty = false;
        }
        Ok(&self.cache.ranking)
    }
}

/// Greedy selection of `size` representative tasks.
///
/// `dist[v][w]` is the distance between the ballots of candidates `v` and
/// `w`. Each step adds the candidate minimizing the total distance of every
/// candidate to its nearest representative; ties go to the lowest index.
pub fn greedy_evaluation_set(dist: &[Vec<u64>], size: usize) -> Vec<usize> {
    let n = dist.len();
    let mut nearest = vec![u64::MAX; n];
    let mut chosen: Vec<usize> = Vec::with_capacity(size.min(n));
    for _ in 0..size.min(n) {
        let mut best: Option<(u64, usize)> = None;
        for c in (0..n).filter(|c| !chosen.contains(c)) {
            let cost: u64 = (0..n).map(|v| nearest[v].min(dist[v][c])).sum();
            if best.is_none_or(|(b, _)| cost < b) {
                best = Some((cost, c));
            }
        }
        let (_, c) = best.expect("a candidate remains");
        for v in 0..n {
            nearest[v] = nearest[v].min(dist[v][c]);
        }
        chosen.push(c);
    }
    chosen
}

/// Mean model whose task sampling concentrates on a greedily chosen set of
/// representative tasks; ranks by Ranked Pairs over all estimated task
/// rankings.
pub struct ProportionalRepresentation {
    agents: usize,
    tasks: usize,
    rng: rng::Rng,
    burn: BurnInSchedule,
    estimates: EstimatedRankings,
    set_size: usize,
    refresh: usize,
    exploration: f64,
    evaluation_set: Vec<usize>,
    rounds: usize,
    cache: Cached,
}

impl ProportionalRepresentation {
    pub fn new(ctx: &EvalContext) -> Result<Self> {
        let mut rng = ctx.rng("proportional_representation");
        let set_size = ctx.params.pr_evaluation_set.unwrap_or(ctx.tasks.div_ceil(5)).min(ctx.tasks);
        Ok(Self {
            agents: ctx.agents,
            tasks: ctx.tasks,
            burn: burn_in(ctx, &mut rng),
            rng,
            estimates: EstimatedRankings::new(ctx.agents, ctx.tasks),
            set_size,
            refresh: ctx.params.pr_refresh,
            exploration: ctx.params.pr_exploration,
            evaluation_set: (0..ctx.tasks).collect(),
            rounds: 0,
            cache: Cached::new(ctx.agents),
        })
    }

    pub fn evaluation_set(&self) -> &[usize] {
        &self.evaluation_set
    }

    /// Re-selects the evaluation set among tasks with complete estimates.
    pub fn recompute_evaluation_set(&mut self) {
        let ready: Vec<usize> = (0..self.tasks).filter(|&v| self.estimates.ranking(v).is_some()).collect();
        if ready.is_empty() {
            self.evaluation_set = (0..self.tasks).collect();
            return;
        }
        let ballots: Vec<&Ranking> = ready.iter().map(|&v| self.estimates.ranking(v).expect("ready")).collect();
        let dist: Vec<Vec<u64>> = ballots
            .iter()
            .map(|a| ballots.iter().map(|b| kendall_tau(a, b).expect("same agents")).collect())
            .collect();
        self.evaluation_set = greedy_evaluation_set(&dist, self.set_size)
            .into_iter()
            .map(|i| ready[i])
            .collect();
    }
}

impl Evaluator for ProportionalRepresentation {
    fn name(&self) -> &'static str {
        "proportional_representation"
    }

    fn choose(&mut self, _t: u64) -> Result<Choice> {
        if let Some(c) = self.burn.next(&mut self.rng) {
            return Ok(c);
        }
        let mut c = uniform_choose(self.agents, self.tasks, &mut self.rng);
        if !self.rng.random_bool(self.exploration) {
            let k = self.rng.random_range(0..self.evaluation_set.len());
            c.task = self.evaluation_set[k];
        }
        Ok(c)
    }

    fn update(&mut self, obs: &Observation) -> Result<()> {
        if observe(&mut self.estimates, obs) {
            self.cache.dirty = true;
        }
        self.rounds += 1;
        if self.rounds % self.refresh == 0 {
            self.recompute_evaluation_set();
        }
        Ok(())
    }

    fn ranking(&mut self) -> Result<&Ranking> {
        if self.cache.dirty {
            self.cache.ranking = ranked_pairs_ranking(self.estimates.profile())?;
            self.cache.dirty = false;
        }
        Ok(&self.cache.ranking)
    }
}
