//! Two-player zero-sum matrix games solved by regret matching.
//!
//! [`solve_zero_sum`] runs full-information self-play on a known payoff
//! table. [`SampledSelfPlay`] is the bandit version: each step only the
//! sampled cell is observed, the rest of the table is a running estimate.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rankings::Ranking;

/// Payoffs to the row player; the column player receives the negation.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGame {
    rows: usize,
    cols: usize,
    payoffs: Vec<f64>,
}

impl MatrixGame {
    pub fn new(rows: usize, cols: usize, payoffs: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Domain("a matrix game needs at least one action per player".into()));
        }
        if payoffs.len() != rows * cols {
            return Err(Error::Domain(format!(
                "payoff table has {} entries, expected {rows}x{cols}",
                payoffs.len()
            )));
        }
        if payoffs.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("payoffs must be finite".into()));
        }
        Ok(Self { rows, cols, payoffs })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Domain("ragged payoff rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn payoff(&self, i: usize, j: usize) -> f64 {
        self.payoffs[i * self.cols + j]
    }

    /// `A y`: row player's expected payoff for each pure action.
    pub fn row_values(&self, col: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.row_values_into(col, &mut out);
        out
    }

    fn row_values_into(&self, col: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.payoffs[i * self.cols..(i + 1) * self.cols];
            *o = row.iter().zip(col).map(|(a, y)| a * y).sum();
        }
    }

    /// `x^T A`: row player's expected payoff against each pure column action.
    pub fn col_values(&self, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        self.col_values_into(row, &mut out);
        out
    }

    fn col_values_into(&self, row: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &x) in row.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let r = &self.payoffs[i * self.cols..(i + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(r) {
                *o += x * a;
            }
        }
    }

    /// `x^T A y`.
    pub fn value(&self, row: &MixedStrategy, col: &MixedStrategy) -> f64 {
        dot(row.probs(), &self.row_values(col.probs()))
    }

    /// Payoff table as CSV, one game row per line.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for i in 0..self.rows {
            let line: Vec<String> = (0..self.cols).map(|j| self.payoff(i, j).to_string()).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A probability distribution over a finite action set.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedStrategy(Vec<f64>);

impl MixedStrategy {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Domain("empty strategy".into()));
        }
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("not a probability vector (sum {sum})")));
        }
        Ok(Self(probs))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn pure(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Self(v)
    }

    /// Normalizes non-negative weights; all-zero weights give the uniform strategy.
    pub fn from_weights(w: &[f64]) -> Self {
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            Self(w.iter().map(|x| x / total).collect())
        } else {
            Self::uniform(w.len())
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `eps / n + (1 - eps) * self`.
    pub fn mixed_with_uniform(&self, eps: f64) -> Self {
        let u = eps / self.0.len() as f64;
        Self(self.0.iter().map(|p| u + (1.0 - eps) * p).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.0, rng)
    }

    pub fn max_abs_diff(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Draws an index with probability proportional to `weights`.
pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        last = i;
        if u < w {
            return i;
        }
        u -= w;
    }
    last
}

/// Sum of both players' best-response gains against the profile.
pub fn exploitability(game: &MatrixGame, row: &MixedStrategy, col: &MixedStrategy) -> f64 {
    let rv = game.row_values(col.probs());
    let cv = game.col_values(row.probs());
    let v = dot(row.probs(), &rv);
    let best_row = rv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best_col = cv.iter().copied().fold(f64::INFINITY, f64::min);
    ((best_row - v) + (v - best_col)).max(0.0)
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub row: MixedStrategy,
    pub col: MixedStrategy,
    pub value: f64,
}

/// Full-information regret-matching self-play for `iterations` rounds.
///
/// Both players update simultaneously against the opponent's current mixed
/// strategy; the returned strategies are the uniform averages of the
/// current strategies.
pub fn solve_zero_sum(game: &MatrixGame, iterations: usize) -> Result<Solution> {
    if iterations == 0 {
        return Err(Error::Domain("solver needs at least one iteration".into()));
    }
    let (n, m) = (game.rows, game.cols);
    let mut r1 = vec![0.0; n];
    let mut r2 = vec![0.0; m];
    let mut s1 = vec![1.0 / n as f64; n];
    let mut s2 = vec![1.0 / m as f64; m];
    let mut avg1 = vec![0.0; n];
    let mut avg2 = vec![0.0; m];
    let mut rv = vec![0.0; n];
    let mut cv = vec![0.0; m];
    for _ in 0..iterations {
        for (a, s) in avg1.iter_mut().zip(&s1) {
            *a += s;
        }
        for (a, s) in avg2.iter_mut().zip(&s2) {
            *a += s;
        }
        game.row_values_into(&s2, &mut rv);
        game.col_values_into(&s1, &mut cv);
        let v = dot(&s1, &rv);
        for (r, u) in r1.iter_mut().zip(&rv) {
            *r += u - v;
        }
        // column player's utility is -A
        for (r, u) in r2.iter_mut().zip(&cv) {
            *r += v - u;
        }
        regret_matching_into(&r1, &mut s1);
        regret_matching_into(&r2, &mut s2);
    }
    let row = MixedStrategy::from_weights(&avg1);
    let col = MixedStrategy::from_weights(&avg2);
    let value = game.value(&row, &col);
    Ok(Solution { row, col, value })
}

fn regret_matching_into(regret: &[f64], out: &mut [f64]) {
    let total: f64 = regret.iter().map(|r| r.max(0.0)).sum();
    if total > 0.0 {
        for (o, r) in out.iter_mut().zip(regret) {
            *o = r.max(0.0) / total;
        }
    } else {
        let u = 1.0 / out.len() as f64;
        out.iter_mut().for_each(|o| *o = u);
    }
}

pub const DEFAULT_GAMMA: f64 = 0.1;

/// One player's regret-matching bandit state.
#[derive(Debug, Clone)]
pub struct RegretMatcherState {
    cum_regret: Vec<f64>,
    avg_num: Vec<f64>,
    gamma: f64,
}

impl RegretMatcherState {
    pub fn new(actions: usize, gamma: f64) -> Result<Self> {
        if actions == 0 {
            return Err(Error::Domain("regret matcher needs at least one action".into()));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Domain(format!("exploration gamma {gamma} outside (0, 1]")));
        }
        Ok(Self {
            cum_regret: vec![0.0; actions],
            avg_num: vec![0.0; actions],
            gamma,
        })
    }

    pub fn actions(&self) -> usize {
        self.cum_regret.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn cumulative_regret(&self) -> &[f64] {
        &self.cum_regret
    }

    pub fn set_cumulative_regret(&mut self, regret: &[f64]) {
        self.cum_regret.copy_from_slice(regret);
    }

    /// Positive-regret-proportional strategy, uniform when no regret is positive.
    pub fn current_strategy(&self) -> MixedStrategy {
        let mut out = vec![0.0; self.actions()];
        regret_matching_into(&self.cum_regret, &mut out);
        MixedStrategy(out)
    }

    /// The current strategy with `gamma`-uniform exploration mixed in.
    pub fn sampling_strategy(&self) -> MixedStrategy {
        self.current_strategy().mixed_with_uniform(self.gamma)
    }

    pub fn average_strategy(&self) -> MixedStrategy {
        MixedStrategy::from_weights(&self.avg_num)
    }

    fn accumulate(&mut self, s: &MixedStrategy) {
        for (a, p) in self.avg_num.iter_mut().zip(s.probs()) {
            *a += p;
        }
    }
}

/// Sampled (bandit) self-play between two regret matchers on a game whose
/// payoffs are only observed one cell at a time.
#[derive(Debug, Clone)]
pub struct SampledSelfPlay {
    pub row: RegretMatcherState,
    pub col: RegretMatcherState,
    mean: Vec<f64>,
    visits: Vec<u64>,
    pending: Option<(usize, usize, MixedStrategy, MixedStrategy)>,
}

impl SampledSelfPlay {
    /// `initial` is the payoff estimate used for cells never visited.
    pub fn new(rows: usize, cols: usize, gamma: f64, initial: f64) -> Result<Self> {
        Ok(Self {
            row: RegretMatcherState::new(rows, gamma)?,
            col: RegretMatcherState::new(cols, gamma)?,
            mean: vec![initial; rows * cols],
            visits: vec![0; rows * cols],
            pending: None,
        })
    }

    pub fn rows(&self) -> usize {
        self.row.actions()
    }

    pub fn cols(&self) -> usize {
        self.col.actions()
    }

    pub fn mean_payoff(&self, i: usize, j: usize) -> f64 {
        self.mean[i * self.cols() + j]
    }

    pub fn visits(&self, i: usize, j: usize) -> u64 {
        self.visits[i * self.cols() + j]
    }

    /// Draws both players' actions from their exploration-mixed strategies
    /// and remembers them for the following [`observe`](Self::observe).
    pub fn sample_actions<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (usize, usize) {
        let s1 = self.row.sampling_strategy();
        let s2 = self.col.sampling_strategy();
        let a1 = s1.sample(rng);
        let a2 = s2.sample(rng);
        self.pending = Some((a1, a2, s1, s2));
        (a1, a2)
    }

    /// Feeds the sampled row-player utility of the last sampled cell.
    pub fn observe(&mut self, a1: usize, a2: usize, utility: f64) -> Result<()> {
        let (s1, s2) = match self.pending.take() {
            Some((p1, p2, s1, s2)) if p1 == a1 && p2 == a2 => (s1, s2),
            _ => (self.row.sampling_strategy(), self.col.sampling_strategy()),
        };
        let cols = self.cols();
        let cell = a1 * cols + a2;
        self.visits[cell] += 1;
        self.mean[cell] += (utility - self.mean[cell]) / self.visits[cell] as f64;

        for b1 in 0..self.rows() {
            let u = if b1 == a1 { utility } else { self.mean[b1 * cols + a2] };
            self.row.cum_regret[b1] += u - utility;
        }
        for b2 in 0..cols {
            let u = if b2 == a2 { utility } else { self.mean[a1 * cols + b2] };
            self.col.cum_regret[b2] -= u - utility;
        }
        self.row.accumulate(&s1);
        self.col.accumulate(&s2);
        Ok(())
    }

    /// One complete step: sample a cell, query `oracle` for its utility, update.
    pub fn step<R, F, E>(&mut self, rng: &mut R, mut oracle: F) -> Result<(), E>
    where
        R: Rng + ?Sized,
        F: FnMut(usize, usize, &mut R) -> Result<f64, E>,
        E: From<Error>,
    {
        let (a1, a2) = self.sample_actions(rng);
        let u = oracle(a1, a2, rng)?;
        self.observe(a1, a2, u)?;
        Ok(())
    }

    /// The game formed by the running payoff estimates.
    pub fn empirical_game(&self) -> MatrixGame {
        MatrixGame {
            rows: self.rows(),
            cols: self.cols(),
            payoffs: self.mean.clone(),
        }
    }

    /// Expected estimated payoff of each pure row action against the column
    /// player's average strategy.
    pub fn row_ratings(&self) -> Vec<f64> {
        self.empirical_game().row_values(self.col.average_strategy().probs())
    }
}

/// Nash-averaging ratings of `m` agents over `n` tasks.
///
/// `scores[a][v]` is agent `a`'s mean score on task `v`. Agents play rows,
/// tasks play columns; an agent's rating is its expected score against the
/// task player's equilibrium strategy.
pub fn nash_averaging_ratings(scores: &[Vec<f64>], iterations: usize) -> Result<(Vec<f64>, Solution)> {
    let game = MatrixGame::from_rows(scores)?;
    let sol = solve_zero_sum(&game, iterations)?;
    let ratings = game.row_values(sol.col.probs());
    Ok((ratings, sol))
}

/// Ranking by descending Nash-averaging rating.
pub fn nash_averaging_ranking(scores: &[Vec<f64>], iterations: usize) -> Result<Ranking> {
    let (ratings, _) = nash_averaging_ratings(scores, iterations)?;
    Ok(Ranking::by_descending(&ratings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn pennies() -> MatrixGame {
        MatrixGame::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap()
    }

    fn rps() -> MatrixGame {
        MatrixGame::from_rows(&[
            vec![0.0, -1.0, 1.0],
            vec![1.0, 0.0, -1.0],
            vec![-1.0, 1.0, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn current_strategy_examples() {
        let mut s = RegretMatcherState::new(3, 0.1).unwrap();
        assert_eq!(s.current_strategy().probs(), &[1.0 / 3.0; 3]);
        s.set_cumulative_regret(&[-1.0, 0.0, -2.0]);
        assert_eq!(s.current_strategy().probs(), &[1.0 / 3.0; 3]);
        s.set_cumulative_regret(&[2.0, 0.0, 0.0]);
        assert_eq!(s.current_strategy().probs(), &[1.0, 0.0, 0.0]);
        s.set_cumulative_regret(&[3.0, 1.0, -5.0]);
        assert_eq!(s.current_strategy().probs(), &[0.75, 0.25, 0.0]);
        let mixed = s.sampling_strategy();
        assert!((mixed.probs()[2] - 0.1 / 3.0).abs() < 1e-15);
        assert!((mixed.probs()[0] - (0.1 / 3.0 + 0.9 * 0.75)).abs() < 1e-15);
    }

    #[test]
    fn gamma_must_be_in_unit_interval() {
        assert!(RegretMatcherState::new(2, 0.0).is_err());
        assert!(RegretMatcherState::new(2, 1.5).is_err());
        assert!(RegretMatcherState::new(2, 1.0).is_ok());
    }

    #[test]
    fn exploitability_examples() {
        let g = pennies();
        let u = MixedStrategy::uniform(2);
        assert!(exploitability(&g, &u, &u).abs() < 1e-12);
        let p = MixedStrategy::pure(2, 0);
        assert!((exploitability(&g, &p, &p) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn solver_matching_pennies() {
        let s = solve_zero_sum(&pennies(), 10_000).unwrap();
        assert!(s.value.abs() < 0.01);
        assert!(s.row.max_abs_diff(&[0.5, 0.5]) < 0.02);
        assert!(s.col.max_abs_diff(&[0.5, 0.5]) < 0.02);
    }

    #[test]
    fn solver_dominant_row() {
        let g = MatrixGame::from_rows(&[vec![3.0, 2.0], vec![1.0, 0.0], vec![2.0, 1.0]]).unwrap();
        let s = solve_zero_sum(&g, 2_000).unwrap();
        assert!(s.row.probs()[0] > 0.99);
        assert!((s.value - 2.0).abs() < 0.02);
    }

    #[test]
    fn solver_needs_an_iteration() {
        assert!(solve_zero_sum(&pennies(), 0).is_err());
    }

    #[test]
    fn sampled_trivial_game() {
        let g = MatrixGame::from_rows(&[vec![0.7]]).unwrap();
        let mut sp = SampledSelfPlay::new(1, 1, 0.1, 0.0).unwrap();
        let mut rng = seeded(1);
        for _ in 0..100 {
            sp.step(&mut rng, |i, j, _| Ok::<_, Error>(g.payoff(i, j))).unwrap();
        }
        assert_eq!(sp.row.cumulative_regret(), &[0.0]);
        assert_eq!(sp.col.cumulative_regret(), &[0.0]);
        assert_eq!(sp.row.average_strategy().probs(), &[1.0]);
    }

    #[test]
    fn sampled_matching_pennies_and_rps() {
        for g in [pennies(), rps()] {
            let n = g.rows();
            let mut sp = SampledSelfPlay::new(n, n, 0.1, 0.0).unwrap();
            let mut rng = seeded(3);
            for _ in 0..10_000 {
                sp.step(&mut rng, |i, j, _| Ok::<_, Error>(g.payoff(i, j))).unwrap();
            }
            let uniform = vec![1.0 / n as f64; n];
            assert!(sp.row.average_strategy().max_abs_diff(&uniform) < 0.05);
            assert!(sp.col.average_strategy().max_abs_diff(&uniform) < 0.05);
        }
    }

    #[test]
    fn oracle_errors_propagate() {
        let mut sp = SampledSelfPlay::new(2, 2, 0.1, 0.0).unwrap();
        let mut rng = seeded(0);
        let r: Result<()> = sp.step(&mut rng, |_, _, _| Err(Error::Data("oracle down".into())));
        assert!(matches!(r, Err(Error::Data(_))));
    }

    #[test]
    fn full_exploration_visits_every_cell() {
        let g = rps();
        let mut sp = SampledSelfPlay::new(3, 3, 1.0, 0.0).unwrap();
        let mut rng = seeded(11);
        for _ in 0..1000 {
            sp.step(&mut rng, |i, j, _| Ok::<_, Error>(g.payoff(i, j))).unwrap();
        }
        for i in 0..3 {
            for j in 0..3 {
                assert!(sp.visits(i, j) > 0);
            }
        }
    }

    #[test]
    fn nash_averaging_single_task_and_dominance() {
        let scores = vec![vec![10.0], vec![30.0], vec![20.0]];
        let (r, _) = nash_averaging_ratings(&scores, 100).unwrap();
        assert_eq!(r, vec![10.0, 30.0, 20.0]);

        let scores = vec![vec![1.0, 2.0, 3.0], vec![5.0, 6.0, 7.0], vec![0.0, 4.0, 1.0]];
        let (r, _) = nash_averaging_ratings(&scores, 2_000).unwrap();
        let best = (0..3).max_by(|&a, &b| r[a].total_cmp(&r[b])).unwrap();
        assert_eq!(best, 1);
    }

    #[test]
    fn payoff_csv_dump() {
        assert_eq!(pennies().to_csv(), "1,-1\n-1,1\n");
    }
}
