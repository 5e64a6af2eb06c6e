//! Condorcet-style aggregation of pairwise preferences into a ranking.

use crate::error::{Error, Result};
use crate::games::{solve_zero_sum, MatrixGame};
use crate::rankings::Ranking;

/// Largest agent count the exact Kemeny search accepts.
pub const KEMENY_MAX_AGENTS: usize = 16;

/// Equilibrium mass above which an agent belongs to a lottery tier.
pub const SUPPORT_THRESHOLD: f64 = 1e-6;

/// Default regret-matching budget for margin games.
pub const DEFAULT_SOLVER_ITERATIONS: usize = 1_000;

/// Pairwise preference counts: `count(i, j)` is the (possibly fractional)
/// number of observations preferring agent `i` over agent `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceProfile {
    m: usize,
    counts: Vec<f64>,
}

impl PreferenceProfile {
    pub fn new(m: usize) -> Self {
        Self {
            m,
            counts: vec![0.0; m * m],
        }
    }

    pub fn from_rankings(votes: &[Ranking]) -> Result<Self> {
        let first = votes
            .first()
            .ok_or_else(|| Error::Domain("no votes to aggregate".into()))?;
        let m = first.len();
        let mut p = Self::new(m);
        for v in votes {
            if !v.is_permutation_of(m) {
                return Err(Error::Domain("votes rank different agent sets".into()));
            }
            p.add_ranking(v, 1.0);
        }
        Ok(p)
    }

    pub fn agents(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn count(&self, i: usize, j: usize) -> f64 {
        self.counts[i * self.m + j]
    }

    /// Adds every pair implied by `vote` with the given weight.
    pub fn add_ranking(&mut self, vote: &Ranking, weight: f64) {
        let order = vote.order();
        for (p, a) in order.iter().enumerate() {
            for b in &order[p + 1..] {
                self.counts[a.0 * self.m + b.0] += weight;
            }
        }
    }

    pub fn add_preference(&mut self, winner: usize, loser: usize, weight: f64) {
        debug_assert_ne!(winner, loser);
        self.counts[winner * self.m + loser] += weight;
    }

    /// A tie counts half an observation in each direction.
    pub fn add_tie(&mut self, a: usize, b: usize) {
        self.add_preference(a, b, 0.5);
        self.add_preference(b, a, 0.5);
    }

    /// `N(i,j) - N(j,i)`.
    #[inline]
    pub fn margin(&self, i: usize, j: usize) -> f64 {
        self.count(i, j) - self.count(j, i)
    }

    pub fn margins(&self) -> MarginMatrix {
        let m = self.m;
        let mut delta = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                delta[i * m + j] = self.margin(i, j);
            }
        }
        MarginMatrix { m, delta }
    }

    /// The agent with a strictly positive margin over every other agent.
    pub fn condorcet_winner(&self) -> Option<usize> {
        condorcet_winner_among(self, &(0..self.m).collect::<Vec<_>>())
    }

    /// Row `i` of the count matrix per line.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for i in 0..self.m {
            let row: Vec<String> = (0..self.m).map(|j| self.count(i, j).to_string()).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

fn condorcet_winner_among(p: &PreferenceProfile, agents: &[usize]) -> Option<usize> {
    agents
        .iter()
        .copied()
        .find(|&c| agents.iter().all(|&j| j == c || p.margin(c, j) > 0.0))
}

/// Antisymmetric matrix of pairwise vote margins.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginMatrix {
    m: usize,
    delta: Vec<f64>,
}

impl MarginMatrix {
    pub fn agents(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.delta[i * self.m + j]
    }

    /// The symmetric zero-sum game played over `agents`.
    pub fn game(&self, agents: &[usize]) -> MatrixGame {
        let k = agents.len();
        let mut pay = Vec::with_capacity(k * k);
        for &i in agents {
            for &j in agents {
                pay.push(self.get(i, j));
            }
        }
        MatrixGame::new(k, k, pay).expect("margins are finite")
    }
}

fn require_two(p: &PreferenceProfile) -> Result<()> {
    if p.m < 2 {
        return Err(Error::Domain("voting rules need at least two agents".into()));
    }
    Ok(())
}

/// Copeland scores: one point per pairwise win, half a point per tie.
pub fn copeland_scores(p: &PreferenceProfile) -> Vec<f64> {
    let m = p.m;
    (0..m)
        .map(|i| {
            (0..m)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = p.margin(i, j);
                    if d > 0.0 {
                        1.0
                    } else if d == 0.0 {
                        0.5
                    } else {
                        0.0
                    }
                })
                .sum()
        })
        .collect()
}

pub fn copeland_ranking(p: &PreferenceProfile) -> Result<Ranking> {
    require_two(p)?;
    Ok(Ranking::by_descending(&copeland_scores(p)))
}

/// Tideman's Ranked Pairs.
///
/// Majorities are locked in by decreasing margin, skipping any that would
/// close a cycle. Equal margins go by (winner index, loser index). Zero-margin
/// pairs are locked last with the lower index on top so the locked graph is
/// always a complete order.
pub fn ranked_pairs_ranking(p: &PreferenceProfile) -> Result<Ranking> {
    require_two(p)?;
    let m = p.m;
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            let d = p.margin(i, j);
            if d >= 0.0 {
                pairs.push((d, i, j));
            } else {
                pairs.push((-d, j, i));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    // reach[x][y]: y is reachable from x in the locked graph
    let mut reach = vec![false; m * m];
    for i in 0..m {
        reach[i * m + i] = true;
    }
    for &(_, w, l) in &pairs {
        if reach[l * m + w] {
            continue;
        }
        for x in 0..m {
            if !reach[x * m + w] {
                continue;
            }
            for y in 0..m {
                if reach[l * m + y] {
                    reach[x * m + y] = true;
                }
            }
        }
    }
    // In a complete acyclic tournament the number of dominated agents gives
    // the position directly.
    let wins: Vec<usize> = (0..m)
        .map(|x| (0..m).filter(|&y| y != x && reach[x * m + y]).count())
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| wins[b].cmp(&wins[a]).then(a.cmp(&b)));
    Ok(Ranking::from_sorted_unchecked(order))
}

/// `sum over a above b of N(a, b)`.
pub fn kemeny_score(p: &PreferenceProfile, r: &Ranking) -> f64 {
    let order = r.order();
    let mut s = 0.0;
    for (i, a) in order.iter().enumerate() {
        for b in &order[i + 1..] {
            s += p.count(a.0, b.0);
        }
    }
    s
}

pub fn kemeny_score_distance(p: &PreferenceProfile, r1: &Ranking, r2: &Ranking) -> Result<f64> {
    let m = p.m;
    if !r1.is_permutation_of(m) || !r2.is_permutation_of(m) {
        return Err(Error::Domain("rankings must cover the profile's agents".into()));
    }
    Ok((kemeny_score(p, r1) - kemeny_score(p, r2)).abs())
}

/// Exact Kemeny ranking by dynamic programming over subsets of agents.
///
/// Among optimal rankings the lexicographically smallest index sequence is
/// returned.
pub fn kemeny_ranking(p: &PreferenceProfile) -> Result<(Ranking, f64)> {
    let m = p.m;
    if m == 0 {
        return Err(Error::Domain("empty profile".into()));
    }
    if m > KEMENY_MAX_AGENTS {
        return Err(Error::Capability(format!(
            "exact Kemeny supports at most {KEMENY_MAX_AGENTS} agents, got {m}"
        )));
    }
    let full = (1usize << m) - 1;
    let row_sum: Vec<f64> = (0..m).map(|j| (0..m).map(|y| p.count(j, y)).sum()).collect();

    // inside[s * m + j] = sum of N(j, y) for y in s
    let mut inside = vec![0.0f64; (full + 1) * m];
    for s in 1..=full {
        let low = s.trailing_zeros() as usize;
        let rest = s & (s - 1);
        for j in 0..m {
            inside[s * m + j] = inside[rest * m + j] + p.count(j, low);
        }
    }

    // best[s]: best score obtainable below a placed prefix s
    let mut best = vec![0.0f64; full + 1];
    for s in (0..full).rev() {
        let mut b = f64::NEG_INFINITY;
        let mut free = full & !s;
        while free != 0 {
            let j = free.trailing_zeros() as usize;
            free &= free - 1;
            let placed = s | (1 << j);
            let gain = row_sum[j] - inside[placed * m + j];
            b = b.max(gain + best[placed]);
        }
        best[s] = b;
    }

    let mut order = Vec::with_capacity(m);
    let mut s = 0usize;
    while s != full {
        let target = best[s];
        let tol = 1e-9 * target.abs().max(1.0);
        let mut chosen = None;
        for j in 0..m {
            if s & (1 << j) != 0 {
                continue;
            }
            let placed = s | (1 << j);
            let gain = row_sum[j] - inside[placed * m + j];
            if gain + best[placed] >= target - tol {
                chosen = Some(j);
                break;
            }
        }
        let j = chosen.expect("an optimal continuation exists");
        order.push(j);
        s |= 1 << j;
    }
    let r = Ranking::from_sorted_unchecked(order);
    let score = kemeny_score(p, &r);
    Ok((r, score))
}

/// Iterated maximal lotteries.
///
/// The margin game over the remaining agents is solved; its support forms
/// the next tier, ordered by descending probability (index on ties). The
/// tier is removed and the process repeats. A Condorcet winner among the
/// remaining agents is its own tier without calling the solver.
pub fn maximal_lotteries_ranking(p: &PreferenceProfile, iterations: usize) -> Result<Ranking> {
    maximal_lotteries(p, iterations).map(|(r, _)| r)
}

/// The iterated maximal-lotteries ranking together with the first-tier
/// lottery over all agents.
pub fn maximal_lotteries(p: &PreferenceProfile, iterations: usize) -> Result<(Ranking, Vec<f64>)> {
    require_two(p)?;
    let margins = p.margins();
    let mut remaining: Vec<usize> = (0..p.m).collect();
    let mut order = Vec::with_capacity(p.m);
    let mut top: Option<Vec<f64>> = None;
    while !remaining.is_empty() {
        if remaining.len() == 1 {
            order.push(remaining[0]);
            break;
        }
        if let Some(c) = condorcet_winner_among(p, &remaining) {
            order.push(c);
            top.get_or_insert_with(|| {
                let mut l = vec![0.0; p.m];
                l[c] = 1.0;
                l
            });
            remaining.retain(|&a| a != c);
            continue;
        }
        let lottery = symmetric_equilibrium(&margins, &remaining, iterations)?;
        top.get_or_insert_with(|| {
            let mut l = vec![0.0; p.m];
            for (&a, &q) in remaining.iter().zip(&lottery) {
                l[a] = q;
            }
            l
        });
        let mut tier: Vec<(usize, f64)> = remaining
            .iter()
            .zip(&lottery)
            .filter(|(_, &q)| q > SUPPORT_THRESHOLD)
            .map(|(&a, &q)| (a, q))
            .collect();
        if tier.is_empty() {
            tier = remaining.iter().zip(&lottery).map(|(&a, &q)| (a, q)).collect();
        }
        tier.sort_by(|x, y| quantize(y.1).cmp(&quantize(x.1)).then(x.0.cmp(&y.0)));
        for &(a, _) in &tier {
            order.push(a);
        }
        remaining.retain(|a| !tier.iter().any(|t| t.0 == *a));
    }
    let top = top.expect("at least two agents");
    Ok((Ranking::from_sorted_unchecked(order), top))
}

// Probabilities closer than 1e-9 count as tied.
fn quantize(q: f64) -> i64 {
    (q * 1e9).round() as i64
}

/// Equilibrium lottery of the margin game restricted to `agents`, symmetrized
/// as the average of the two players' strategies.
pub fn symmetric_equilibrium(margins: &MarginMatrix, agents: &[usize], iterations: usize) -> Result<Vec<f64>> {
    let game = margins.game(agents);
    let sol = solve_zero_sum(&game, iterations)?;
    Ok(sol
        .row
        .probs()
        .iter()
        .zip(sol.col.probs())
        .map(|(a, b)| 0.5 * (a + b))
        .collect())
}

/// The rules available to growing-batch and mean-model evaluators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VotingRule {
    Copeland,
    RankedPairs,
    Kemeny,
    MaximalLotteries { iterations: usize },
}

impl VotingRule {
    pub fn rank(&self, p: &PreferenceProfile) -> Result<Ranking> {
        match *self {
            VotingRule::Copeland => copeland_ranking(p),
            VotingRule::RankedPairs => ranked_pairs_ranking(p),
            VotingRule::Kemeny => kemeny_ranking(p).map(|(r, _)| r),
            VotingRule::MaximalLotteries { iterations } => maximal_lotteries_ranking(p, iterations),
        }
    }
}
