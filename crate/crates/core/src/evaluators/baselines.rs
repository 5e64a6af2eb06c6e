use rand::Rng;

use super::{uniform_choose, Cached, Choice, EvalContext, Evaluator, Observation};
use crate::error::{Error, Result};
use crate::rankings::{AgentId, Ranking};
use crate::rng;
use crate::voting::{kemeny_ranking, PreferenceProfile, KEMENY_MAX_AGENTS};

/// Uniform sampling; ranks agents by their mean score over all tasks.
pub struct UniformAveraging {
    agents: usize,
    tasks: usize,
    rng: rng::Rng,
    sum: Vec<f64>,
    count: Vec<u64>,
    cache: Cached,
}

impl UniformAveraging {
    pub fn new(ctx: &EvalContext) -> Result<Self> {
        Ok(Self {
            agents: ctx.agents,
            tasks: ctx.tasks,
            rng: ctx.rng("uniform_averaging"),
            sum: vec![0.0; ctx.agents],
            count: vec![0; ctx.agents],
            cache: Cached::new(ctx.agents),
        })
    }

    fn means(&self) -> Vec<f64> {
        self.sum
            .iter()
            .zip(&self.count)
            .map(|(&s, &c)| if c > 0 { s / c as f64 } else { f64::NEG_INFINITY })
            .collect()
    }
}

impl Evaluator for UniformAveraging {
    fn name(&self) -> &'static str {
        "uniform_averaging"
    }

    fn choose(&mut self, _t: u64) -> Result<Choice> {
        Ok(uniform_choose(self.agents, self.tasks, &mut self.rng))
    }

    fn update(&mut self, obs: &Observation) -> Result<()> {
        for (a, s) in [(obs.agent_i, obs.score_i), (obs.agent_j, obs.score_j)] {
            self.sum[a.0] += s;
            self.count[a.0] += 1;
        }
        self.cache.dirty = true;
        Ok(())
    }

    fn ranking(&mut self) -> Result<&Ranking> {
        if self.cache.dirty {
            self.cache.ranking = Ranking::by_descending(&self.means());
            self.cache.dirty = false;
        }
        Ok(&self.cache.ranking)
    }

    fn ratings(&mut self) -> Option<Vec<f64>> {
        Some(self.means())
    }
}

/// One UCB arm per agent; the two highest indices are pulled each round and
/// agents are ranked by visit count.
pub struct BasicUcb {
    agents: usize,
    tasks: usize,
    rng: rng::Rng,
    c: f64,
    sum: Vec<f64>,
    count: Vec<u64>,
    cache: Cached,
}

impl BasicUcb {
    pub fn new(ctx: &EvalContext) -> Result<Self> {
        let c = ctx.params.ucb_c.unwrap_or(std::f64::consts::SQRT_2 * ctx.width());
        if !(c >= 0.0) {
            return Err(Error::Config(format!("UCB constant must be non-negative, got {c}")));
        }
        Ok(Self {
            agents: ctx.agents,
            tasks: ctx.tasks,
            rng: ctx.rng("basic_ucb"),
            c,
            sum: vec![0.0; ctx.agents],
            count: vec![0; ctx.agents],
            cache: Cached::new(ctx.agents),
        })
    }

    /// `mean + C sqrt(ln(total pulls) / pulls)`; infinite for unpulled arms.
    pub fn ucb_scores(&self) -> Vec<f64> {
        let total: u64 = self.count.iter().sum();
        let log_total = (total.max(1) as f64).ln();
        self.sum
            .iter()
            .zip(&self.count)
            .map(|(&s, &n)| {
                if n == 0 {
                    f64::INFINITY
                } else {
                    s / n as f64 + self.c * (log_total / n as f64).sqrt()
                }
            })
            .collect()
    }

    pub fn visits(&self) -> &[u64] {
        &self.count
    }
}

impl Evaluator for BasicUcb {
    fn name(&self) -> &'static str {
        "basic_ucb"
    }

    fn choose(&mut self, _t: u64) -> Result<Choice> {
        let task = self.rng.random_range(0..self.tasks);
        let unpulled: Vec<usize> = (0..self.agents).filter(|&a| self.count[a] == 0).collect();
        let (i, j) = match unpulled.as_slice() {
            [a, b, ..] => (*a, *b),
            [a] => (*a, (*a + 1) % self.agents),
            [] => {
                let order = Ranking::by_descending(&self.ucb_scores());
                (order.order()[0].0, order.order()[1].0)
            }
        };
        Ok(Choice {
            task,
            agent_i: AgentId(i),
            agent_j: AgentId(j),
        })
    }

    fn update(&mut self, obs: &Observation) -> Result<()> {
        for (a, s) in [(obs.agent_i, obs.score_i), (obs.agent_j, obs.score_j)] {
            self.sum[a.0] += s;
            self.count[a.0] += 1;
        }
        self.cache.dirty = true;
        Ok(())
    }

    fn ranking(&mut self) -> Result<&Ranking> {
        if self.cache.dirty {
            let visits: Vec<f64> = self.count.iter().map(|&c| c as f64).collect();
            self.cache.ranking = Ranking::by_descending(&visits);
            self.cache.dirty = false;
        }
        Ok(&self.cache.ranking)
    }

    fn ratings(&mut self) -> Option<Vec<f64>> {
        Some(self.count.iter().map(|&c| c as f64).collect())
    }
}

/// Epoch-based Kemeny elimination adapted to a fixed-horizon stream.
///
/// Each epoch fills a per-pair sample quota round-robin; between epochs the
/// confidence and distance budgets halve and the quota is recomputed from the
/// smallest observed normalized margin.
pub struct KemenyEl {
    agents: usize,
    tasks: usize,
    rng: rng::Rng,
    tallies: PreferenceProfile,
    pairs: Vec<(usize, usize)>,
    filled: Vec<u64>,
    cursor: usize,
    epoch: u32,
    delta: f64,
    rho: f64,
    quota: u64,
    min_gap: f64,
    refresh: u64,
    updates: u64,
    cache: Cached,
}

impl KemenyEl {
    pub fn new(ctx: &EvalContext) -> Result<Self> {
        let m = ctx.agents;
        if m > KEMENY_MAX_AGENTS {
            return Err(Error::Capability(format!(
                "kemenyel needs exact Kemeny rankings, limited to {KEMENY_MAX_AGENTS} agents"
            )));
        }
        let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
        let delta = ctx.params.kemenyel_delta0;
        let refresh = ctx
            .params
            .kemenyel_refresh
            .unwrap_or(if m <= 10 { 1 } else { 1 << (m - 10) });
        Ok(Self {
            agents: m,
            tasks: ctx.tasks,
            rng: ctx.rng("kemenyel"),
            tallies: PreferenceProfile::new(m),
            filled: vec![0; pairs.len()],
            rho: 0.25 * (m * (m - 1)) as f64,
            pairs,
            cursor: 0,
            epoch: 0,
            quota: Self::quota(1.0, delta),
            delta,
            min_gap: ctx.params.kemenyel_min_gap,
            refresh,
            updates: 0,
            cache: Cached::new(m),
        })
    }

    /// `ceil(2 / gap^2 * ln(2 / delta))`.
    pub fn quota(gap: f64, delta: f64) -> u64 {
        ((2.0 / (gap * gap)) * (2.0 / delta).ln()).ceil() as u64
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn current_quota(&self) -> u64 {
        self.quota
    }

    fn pair_index(&self, a: usize, b: usize) -> usize {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        // offset of row i in the upper triangle
        i * (2 * self.agents - i - 1) / 2 + (j - i - 1)
    }

    fn smallest_gap(&self) -> f64 {
        let mut gap = 1.0f64;
        for &(i, j) in &self.pairs {
            let total = self.tallies.count(i, j) + self.tallies.count(j, i);
            if total > 0.0 {
                gap = gap.min(self.tallies.margin(i, j).abs() / total);
            }
        }
        gap.clamp(self.min_gap, 1.0)
    }

    fn next_epoch(&mut self) {
        self.epoch += 1;
        self.delta /= 2.0;
        self.rho /= 2.0;
        self.quota = Self::quota(self.smallest_gap(), self.delta);
        self.filled.iter_mut().for_each(|f| *f = 0);
        self.cursor = 0;
        self.cache.dirty = true;
    }
}

impl Evaluator for KemenyEl {
    fn name(&self) -> &'static str {
        "kemenyel"
    }

    fn choose(&mut self, _t: u64) -> Result<Choice> {
        let task = self.rng.random_range(0..self.tasks);
        let p = self.pairs.len();
        let idx = (0..p)
            .map(|k| (self.cursor + k) % p)
            .find(|&k| self.filled[k] < self.quota)
            .unwrap_or(self.cursor % p);
        self.cursor = (idx + 1) % p;
        let (mut i, mut j) = self.pairs[idx];
        if self.rng.random_bool(0.5) {
            std::mem::swap(&mut i, &mut j);
        }
        Ok(Choice {
            task,
            agent_i: AgentId(i),
            agent_j: AgentId(j),
        })
    }

    fn update(&mut self, obs: &Observation) -> Result<()> {
        let (i, j) = (obs.agent_i.0, obs.agent_j.0);
        if obs.score_i > obs.score_j {
            self.tallies.add_preference(i, j, 1.0);
        } else if obs.score_j > obs.score_i {
            self.tallies.add_preference(j, i, 1.0);
        } else {
            self.tallies.add_tie(i, j);
        }
        let k = self.pair_index(i, j);
        self.filled[k] += 1;
        self.updates += 1;
        if self.updates % self.refresh == 0 {
            self.cache.dirty = true;
        }
        if self.filled.iter().all(|&f| f >= self.quota) {
            self.next_epoch();
        }
        Ok(())
    }

    fn ranking(&mut self) -> Result<&Ranking> {
        if self.cache.dirty {
            self.cache.ranking = kemeny_ranking(&self.tallies)?.0;
            self.cache.dirty = false;
        }
        Ok(&self.cache.ranking)
    }
}
