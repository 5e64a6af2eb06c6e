//! Scalar rating systems: Elo (online and batch Bradley-Terry fit) and Soft
//! Condorcet Optimization.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rankings::Ranking;

pub const DEFAULT_K_FACTOR: f64 = 32.0;
/// Virtual draws added between every pair before a batch fit.
pub const DEFAULT_PRIOR_DRAWS: f64 = 0.5;
pub const ELO_BASE: f64 = 1500.0;
const LN10: f64 = std::f64::consts::LN_10;

/// Predicted probability that a player rated `theta_i` beats one rated `theta_j`.
pub fn elo_expected(theta_i: f64, theta_j: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf((theta_j - theta_i) / 400.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// The first player won.
    First,
    /// The second player won.
    Second,
    Draw,
}

impl Outcome {
    pub fn from_scores(first: f64, second: f64) -> Self {
        if first > second {
            Outcome::First
        } else if second > first {
            Outcome::Second
        } else {
            Outcome::Draw
        }
    }

    fn first_score(self) -> f64 {
        match self {
            Outcome::First => 1.0,
            Outcome::Second => 0.0,
            Outcome::Draw => 0.5,
        }
    }
}

/// Online Elo ratings.
#[derive(Debug, Clone)]
pub struct EloState {
    pub ratings: Vec<f64>,
    pub k_factor: f64,
}

impl EloState {
    pub fn new(m: usize, k_factor: f64) -> Result<Self> {
        if !(k_factor > 0.0) {
            return Err(Error::Domain(format!("Elo K factor must be positive, got {k_factor}")));
        }
        Ok(Self {
            ratings: vec![ELO_BASE; m],
            k_factor,
        })
    }

    pub fn update(&mut self, i: usize, j: usize, outcome: Outcome) -> Result<()> {
        if i == j {
            return Err(Error::Domain("an Elo game needs two distinct players".into()));
        }
        let p = elo_expected(self.ratings[i], self.ratings[j]);
        let delta = self.k_factor * (outcome.first_score() - p);
        self.ratings[i] += delta;
        self.ratings[j] -= delta;
        Ok(())
    }

    pub fn ranking(&self) -> Ranking {
        Ranking::by_descending(&self.ratings)
    }
}

/// Win/loss/draw tallies for a batch Bradley-Terry fit.
#[derive(Debug, Clone)]
pub struct EloTallies {
    m: usize,
    // wins[i * m + j]: times i beat j, draws counted half to each side
    wins: Vec<f64>,
}

impl EloTallies {
    pub fn new(m: usize) -> Self {
        Self {
            m,
            wins: vec![0.0; m * m],
        }
    }

    pub fn agents(&self) -> usize {
        self.m
    }

    pub fn record(&mut self, i: usize, j: usize, outcome: Outcome) {
        match outcome {
            Outcome::First => self.wins[i * self.m + j] += 1.0,
            Outcome::Second => self.wins[j * self.m + i] += 1.0,
            Outcome::Draw => {
                self.wins[i * self.m + j] += 0.5;
                self.wins[j * self.m + i] += 0.5;
            }
        }
    }

    pub fn wins(&self, i: usize, j: usize) -> f64 {
        self.wins[i * self.m + j]
    }
}

#[derive(Debug, Clone)]
pub struct BatchFit {
    /// Ratings on the Elo scale, centered at [`ELO_BASE`].
    pub ratings: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Minorization-maximization fit of Bradley-Terry strengths.
///
/// `warm_start` (Elo scale) seeds the iteration; the fit itself is invariant
/// to shifting it. Convergence is declared when no rating moves by more than
/// `tolerance` Elo points.
pub fn elo_batch_fit(
    tallies: &EloTallies,
    prior_draws: f64,
    iterations: usize,
    tolerance: f64,
    warm_start: Option<&[f64]>,
) -> Result<BatchFit> {
    let m = tallies.m;
    if m < 2 {
        return Err(Error::Domain("batch Elo needs at least two agents".into()));
    }
    let prior_half = 0.5 * prior_draws;
    // log-strengths
    let mut lg: Vec<f64> = match warm_start {
        Some(w) => w.iter().map(|r| r * LN10 / 400.0).collect(),
        None => vec![0.0; m],
    };
    center(&mut lg);
    let mut games = vec![0.0; m * m];
    let mut total_wins = vec![0.0; m];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                games[i * m + j] = tallies.wins(i, j) + tallies.wins(j, i) + prior_draws;
                total_wins[i] += tallies.wins(i, j) + prior_half;
            }
        }
    }
    let tol = tolerance * LN10 / 400.0;
    let mut gamma: Vec<f64> = lg.iter().map(|x| x.exp()).collect();
    let mut converged = false;
    let mut done = 0;
    for it in 0..iterations {
        done = it + 1;
        let mut next = vec![0.0; m];
        for i in 0..m {
            let mut denom = 0.0;
            for j in 0..m {
                if i != j {
                    denom += games[i * m + j] / (gamma[i] + gamma[j]);
                }
            }
            next[i] = if denom > 0.0 { (total_wins[i] / denom).ln() } else { lg[i] };
        }
        center(&mut next);
        let change = next
            .iter()
            .zip(&lg)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        lg = next;
        gamma = lg.iter().map(|x| x.exp()).collect();
        if change < tol {
            converged = true;
            break;
        }
    }
    Ok(BatchFit {
        ratings: lg.iter().map(|x| ELO_BASE + x * 400.0 / LN10).collect(),
        iterations: done,
        converged,
    })
}

fn center(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

pub const DEFAULT_SCO_TEMPERATURE: f64 = 1.0;
pub const DEFAULT_SCO_LEARNING_RATE: f64 = 0.01;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Soft Condorcet Optimization ratings.
///
/// The loss over observed preferences `winner > loser` is
/// `sum sigmoid((theta_loser - theta_winner) / temperature)`.
#[derive(Debug, Clone)]
pub struct ScoState {
    pub ratings: Vec<f64>,
    temperature: f64,
    learning_rate: f64,
}

impl ScoState {
    pub fn new(m: usize, temperature: f64, learning_rate: f64) -> Result<Self> {
        if !(temperature > 0.0) || !(learning_rate > 0.0) {
            return Err(Error::Domain(
                "SCO temperature and learning rate must be positive".into(),
            ));
        }
        Ok(Self {
            ratings: vec![0.0; m],
            temperature,
            learning_rate,
        })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    /// One SGD step on the single term for `winner > loser`.
    pub fn update(&mut self, winner: usize, loser: usize) -> Result<()> {
        if winner == loser {
            return Err(Error::Domain("an SCO preference needs two distinct agents".into()));
        }
        self.step(winner, loser);
        Ok(())
    }

    #[inline]
    fn step(&mut self, winner: usize, loser: usize) {
        let x = (self.ratings[loser] - self.ratings[winner]) / self.temperature;
        let s = sigmoid(x);
        let g = self.learning_rate * s * (1.0 - s) / self.temperature;
        self.ratings[winner] += g;
        self.ratings[loser] -= g;
    }

    /// Shuffled SGD epochs over `observations` (`(winner, loser)` pairs).
    pub fn fit<R: Rng + ?Sized>(&mut self, observations: &mut [(usize, usize)], epochs: usize, rng: &mut R) {
        for _ in 0..epochs {
            observations.shuffle(rng);
            for &(w, l) in observations.iter() {
                self.step(w, l);
            }
        }
    }

    pub fn loss(&self, observations: &[(usize, usize)]) -> f64 {
        observations
            .iter()
            .map(|&(w, l)| sigmoid((self.ratings[l] - self.ratings[w]) / self.temperature))
            .sum()
    }

    /// Gradient of [`loss`](Self::loss) with respect to the ratings.
    pub fn gradient(&self, observations: &[(usize, usize)]) -> Vec<f64> {
        let mut g = vec![0.0; self.ratings.len()];
        for &(w, l) in observations {
            let s = sigmoid((self.ratings[l] - self.ratings[w]) / self.temperature);
            let d = s * (1.0 - s) / self.temperature;
            g[l] += d;
            g[w] -= d;
        }
        g
    }

    pub fn ranking(&self) -> Ranking {
        Ranking::by_descending(&self.ratings)
    }
}

/// Batch SCO fit from scratch over `observations`.
pub fn sco_batch_fit<R: Rng + ?Sized>(
    m: usize,
    observations: &mut [(usize, usize)],
    temperature: f64,
    learning_rate: f64,
    epochs: usize,
    rng: &mut R,
) -> Result<ScoState> {
    if observations.is_empty() {
        return Err(Error::Domain("SCO fit needs at least one observation".into()));
    }
    let mut s = ScoState::new(m, temperature, learning_rate)?;
    s.fit(observations, epochs, rng);
    Ok(s)
}
