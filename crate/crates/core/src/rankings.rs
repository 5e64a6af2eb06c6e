//! Rankings over agents and the ranking-error metrics used to score an
//! evaluator against a ground truth.
//!
//! Distances follow the generalized Kendall-tau convention: the first ranking
//! may cover a subset of the agents of the second one, and only pairs inside
//! that subset are compared.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Dense agent index, `0..m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(pub usize);

impl AgentId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

const ABSENT: usize = usize::MAX;

/// A total order over a set of agents, best first.
///
/// Keeps the inverse position map next to the order so pairwise comparisons
/// are O(1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranking {
    order: Vec<AgentId>,
    pos: Vec<usize>,
}

impl Ranking {
    pub fn new(order: Vec<AgentId>) -> Result<Self> {
        if order.is_empty() {
            return Err(Error::Domain("a ranking needs at least one agent".into()));
        }
        let size = order.iter().map(|a| a.0).max().unwrap_or(0) + 1;
        let mut pos = vec![ABSENT; size];
        for (p, a) in order.iter().enumerate() {
            if pos[a.0] != ABSENT {
                return Err(Error::Domain(format!("agent {a} appears twice in ranking")));
            }
            pos[a.0] = p;
        }
        Ok(Self { order, pos })
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Result<Self> {
        Self::new(indices.into_iter().map(AgentId).collect())
    }

    /// `0, 1, ..., m-1`.
    pub fn identity(m: usize) -> Self {
        Self {
            order: (0..m).map(AgentId).collect(),
            pos: (0..m).collect(),
        }
    }

    /// Orders agents `0..values.len()` by descending value, lower index first on ties.
    pub fn by_descending(values: &[f64]) -> Self {
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        Self::from_sorted_unchecked(idx)
    }

    pub(crate) fn from_sorted_unchecked(idx: Vec<usize>) -> Self {
        let size = idx.iter().copied().max().map_or(0, |x| x + 1);
        let mut pos = vec![ABSENT; size];
        for (p, &a) in idx.iter().enumerate() {
            pos[a] = p;
        }
        Self {
            order: idx.into_iter().map(AgentId).collect(),
            pos,
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn order(&self) -> &[AgentId] {
        &self.order
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.order.iter().map(|a| a.0)
    }

    /// Position of `agent` (0 = best), if ranked.
    #[inline]
    pub fn position(&self, agent: AgentId) -> Option<usize> {
        match self.pos.get(agent.0) {
            Some(&p) if p != ABSENT => Some(p),
            _ => None,
        }
    }

    pub fn contains(&self, agent: AgentId) -> bool {
        self.position(agent).is_some()
    }

    /// Whether `a` is ranked strictly above `b`. Both must be present.
    #[inline]
    pub fn prefers(&self, a: AgentId, b: AgentId) -> bool {
        self.pos[a.0] < self.pos[b.0]
    }

    pub fn top(&self, k: usize) -> &[AgentId] {
        &self.order[..k.min(self.order.len())]
    }

    /// The relative order, inside `self`, of the agents accepted by `keep`.
    pub fn restrict(&self, mut keep: impl FnMut(AgentId) -> bool) -> Option<Ranking> {
        let order: Vec<AgentId> = self.order.iter().copied().filter(|&a| keep(a)).collect();
        if order.is_empty() {
            None
        } else {
            Some(Self::from_sorted_unchecked(order.into_iter().map(|a| a.0).collect()))
        }
    }

    /// True when the ranking is a permutation of exactly `0..m`.
    pub fn is_permutation_of(&self, m: usize) -> bool {
        self.order.len() == m && self.pos.len() == m
    }

    /// Comma-separated indices, best first.
    pub fn to_csv_field(&self) -> String {
        let mut s = String::with_capacity(self.order.len() * 3);
        for (i, a) in self.order.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push_str(&a.0.to_string());
        }
        s
    }
}

impl fmt::Display for Ranking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_csv_field())
    }
}

impl FromStr for Ranking {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let idx = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Data(format!("bad agent index {t:?} in ranking: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ranking::from_indices(idx)
    }
}

/// Number of agent pairs of `r1` whose relative order differs in `r2`.
///
/// `r1` may rank a subset of `r2`'s agents.
pub fn kendall_tau(r1: &Ranking, r2: &Ranking) -> Result<u64> {
    let mut seq = Vec::with_capacity(r1.len());
    for &a in r1.order() {
        match r2.position(a) {
            Some(p) => seq.push(p),
            None => {
                return Err(Error::Domain(format!(
                    "agent {a} of the first ranking is missing from the second"
                )))
            }
        }
    }
    Ok(count_inversions(&mut seq))
}

fn count_inversions(seq: &mut [usize]) -> u64 {
    let n = seq.len();
    if n < 2 {
        return 0;
    }
    if n <= 16 {
        let mut c = 0;
        for i in 0..n {
            for j in i + 1..n {
                c += u64::from(seq[i] > seq[j]);
            }
        }
        return c;
    }
    let mut buf = seq.to_vec();
    merge_count(seq, &mut buf)
}

fn merge_count(seq: &mut [usize], buf: &mut [usize]) -> u64 {
    let n = seq.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = {
        let (l, r) = seq.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if seq[i] <= seq[j] {
            buf[k] = seq[i];
            i += 1;
        } else {
            buf[k] = seq[j];
            inv += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&seq[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&seq[j..n]);
    seq.copy_from_slice(&buf[..n]);
    inv
}

/// `K_d` scaled to `[0, 1]` by the number of pairs in `r1`. Rankings of at
/// most one agent have no pairs and score 0.
pub fn normalized_kendall_tau(r1: &Ranking, r2: &Ranking) -> Result<f64> {
    let d = kendall_tau(r1, r2)?;
    let p = r1.len();
    if p <= 1 {
        return Ok(0.0);
    }
    Ok(2.0 * d as f64 / (p * (p - 1)) as f64)
}

fn check_same_agents(r: &Ranking, gt: &Ranking) -> Result<()> {
    if r.len() != gt.len() || r.order().iter().any(|&a| !gt.contains(a)) {
        return Err(Error::Domain(
            "ranking and ground truth cover different agents".into(),
        ));
    }
    Ok(())
}

fn check_k(k: usize, m: usize) -> Result<()> {
    if k == 0 || k > m {
        return Err(Error::Domain(format!("rank cutoff k = {k} outside 1..={m}")));
    }
    Ok(())
}

/// Cutoff `k` and agent count `m` of a top-k error, with the identification
/// weight `alpha(k) = (m - k) / (m - 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreParams {
    k: usize,
    m: usize,
}

impl GreParams {
    pub fn new(k: usize, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::Domain("top-k errors need at least two agents".into()));
        }
        check_k(k, m)?;
        Ok(Self { k, m })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn alpha(&self) -> f64 {
        (self.m - self.k) as f64 / (self.m - 1) as f64
    }
}

/// Fraction of the ground-truth top-k that `r` fails to place in its own top-k.
pub fn top_k_identification_error(r: &Ranking, gt: &Ranking, k: usize) -> Result<f64> {
    check_same_agents(r, gt)?;
    check_k(k, gt.len())?;
    Ok(ide_unchecked(r, gt, k))
}

fn ide_unchecked(r: &Ranking, gt: &Ranking, k: usize) -> f64 {
    let hits = gt
        .top(k)
        .iter()
        .filter(|&&a| r.position(a).is_some_and(|p| p < k))
        .count();
    1.0 - hits as f64 / k as f64
}

/// Normalized disagreement on the relative order, inside `r`, of the
/// ground-truth top-k agents.
fn top_k_order_error(r: &Ranking, gt: &Ranking, k: usize) -> f64 {
    if k <= 1 {
        return 0.0;
    }
    let top = gt.top(k);
    let mut d = 0u64;
    for i in 0..k {
        let pi = r.pos[top[i].0];
        for &b in &top[i + 1..k] {
            d += u64::from(pi > r.pos[b.0]);
        }
    }
    2.0 * d as f64 / (k * (k - 1)) as f64
}

/// Generalized top-k ranking error: `alpha(k) * IDE + (1 - alpha(k)) * K_n`
/// of the top-k sub-ranking.
pub fn generalized_ranking_error(r: &Ranking, gt: &Ranking, k: usize) -> Result<f64> {
    check_same_agents(r, gt)?;
    let params = GreParams::new(k, gt.len())?;
    Ok(gre_unchecked(r, gt, params))
}

/// GRE without the agent-set checks; callers guarantee `r` and `gt` rank the
/// same agents.
pub(crate) fn gre_unchecked(r: &Ranking, gt: &Ranking, params: GreParams) -> f64 {
    let alpha = params.alpha();
    let k = params.k;
    let ide = if alpha > 0.0 { ide_unchecked(r, gt, k) } else { 0.0 };
    let order = if alpha < 1.0 { top_k_order_error(r, gt, k) } else { 0.0 };
    alpha * ide + (1.0 - alpha) * order
}

pub const DEFAULT_WINDOW: usize = 250;

/// Running mean of a GRE stream plus a sliding window of recent values.
#[derive(Debug, Clone)]
pub struct AgreAccumulator {
    cumulative: f64,
    count: u64,
    window: VecDeque<f64>,
    capacity: usize,
}

impl Default for AgreAccumulator {
    fn default() -> Self {
        Self::new(DEFAULT_WINDOW)
    }
}

impl AgreAccumulator {
    pub fn new(window: usize) -> Self {
        let capacity = window.max(1);
        Self {
            cumulative: 0.0,
            count: 0,
            window: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn push(&mut self, gre: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&gre) {
            return Err(Error::Domain(format!("GRE value {gre} outside [0, 1]")));
        }
        self.cumulative += gre;
        self.count += 1;
        if self.window.len() == self.capacity {
            self.window.pop_front();
        }
        self.window.push_back(gre);
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Mean of everything pushed so far; 0 before the first push.
    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.cumulative / self.count as f64
        }
    }

    /// Mean of the last `W` values, summed afresh so an all-zero window is
    /// exactly 0.
    pub fn window_mean(&self) -> f64 {
        if self.window.is_empty() {
            0.0
        } else {
            self.window.iter().sum::<f64>() / self.window.len() as f64
        }
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(v: &[usize]) -> Ranking {
        Ranking::from_indices(v.iter().copied()).unwrap()
    }

    #[test]
    fn kendall_tau_examples() {
        let a = r(&[3, 0, 2, 1]);
        assert_eq!(kendall_tau(&a, &a).unwrap(), 0);
        assert_eq!(kendall_tau(&a, &r(&[0, 1, 2, 3])).unwrap(), 4);
        assert_eq!(kendall_tau(&r(&[1, 0]), &r(&[0, 2, 1])).unwrap(), 1);
        let n = normalized_kendall_tau(&a, &r(&[0, 1, 2, 3])).unwrap();
        assert!((n - 4.0 / 6.0).abs() < 1e-15);
        assert_eq!(normalized_kendall_tau(&r(&[0, 1, 2, 3]), &r(&[3, 2, 1, 0])).unwrap(), 1.0);
    }

    #[test]
    fn missing_agent_is_domain_error() {
        let e = kendall_tau(&r(&[0, 5]), &r(&[0, 1, 2]));
        assert!(matches!(e, Err(Error::Domain(_))));
    }

    #[test]
    fn merge_path_matches_quadratic_path() {
        let v: Vec<usize> = (0..40).map(|i| (i * 17 + 5) % 40).collect();
        let mut brute = 0;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                brute += u64::from(v[i] > v[j]);
            }
        }
        assert_eq!(kendall_tau(&r(&v), &Ranking::identity(40)).unwrap(), brute);
    }

    #[test]
    fn single_agent_normalized_is_zero() {
        assert_eq!(normalized_kendall_tau(&r(&[2]), &r(&[0, 1, 2])).unwrap(), 0.0);
    }

    #[test]
    fn ide_examples() {
        let gt = r(&[0, 1, 2, 3, 4]);
        assert_eq!(top_k_identification_error(&r(&[2, 0, 1, 4, 3]), &gt, 3).unwrap(), 0.0);
        let e = top_k_identification_error(&r(&[0, 1, 3, 2, 4]), &gt, 3).unwrap();
        assert!((e - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(top_k_identification_error(&r(&[4, 3, 2, 1, 0]), &gt, 5).unwrap(), 0.0);
        assert!(top_k_identification_error(&gt, &gt, 0).is_err());
        assert!(top_k_identification_error(&gt, &gt, 6).is_err());
    }

    #[test]
    fn gre_endpoints() {
        let gt = r(&[0, 1, 2, 3]);
        assert_eq!(generalized_ranking_error(&r(&[0, 3, 2, 1]), &gt, 1).unwrap(), 0.0);
        assert_eq!(generalized_ranking_error(&r(&[1, 0, 2, 3]), &gt, 1).unwrap(), 1.0);
        let x = r(&[1, 3, 0, 2]);
        let full = generalized_ranking_error(&x, &gt, 4).unwrap();
        assert_eq!(full, normalized_kendall_tau(&x, &gt).unwrap());
    }

    #[test]
    fn gre_mixed_weighting() {
        // Top-3 of x is {0,2,7}: IDE = 1/3. Inside x the gt top-3 reads
        // 0 > 2 > 1, one swapped pair out of three: K_n = 1/3.
        let gt = Ranking::identity(8);
        let x = r(&[0, 2, 7, 1, 3, 4, 5, 6]);
        let g = generalized_ranking_error(&x, &gt, 3).unwrap();
        let expected = (5.0 / 7.0) * (1.0 / 3.0) + (2.0 / 7.0) * (1.0 / 3.0);
        assert!((g - expected).abs() < 1e-15);
    }

    #[test]
    fn gre_params_reject_single_agent() {
        assert!(GreParams::new(1, 1).is_err());
        assert_eq!(GreParams::new(8, 8).unwrap().alpha(), 0.0);
        assert_eq!(GreParams::new(1, 8).unwrap().alpha(), 1.0);
    }

    #[test]
    fn agre_accumulator() {
        let mut acc = AgreAccumulator::new(2);
        for _ in 0..3 {
            acc.push(0.0).unwrap();
        }
        assert_eq!(acc.mean(), 0.0);
        let mut acc = AgreAccumulator::new(2);
        acc.push(1.0).unwrap();
        acc.push(0.0).unwrap();
        assert_eq!(acc.mean(), 0.5);
        acc.push(0.0).unwrap();
        assert_eq!(acc.window_mean(), 0.0);
        assert_eq!(acc.window_len(), 2);
        assert!(acc.push(1.5).is_err());
        assert!(acc.push(-0.1).is_err());
    }

    #[test]
    fn csv_field_round_trip() {
        let x = r(&[3, 0, 2, 1]);
        assert_eq!(x.to_csv_field(), "3,0,2,1");
        assert_eq!("3,0,2,1".parse::<Ranking>().unwrap(), x);
        assert!("3,3".parse::<Ranking>().is_err());
    }

    #[test]
    fn restrict_keeps_relative_order() {
        let x = r(&[5, 1, 4, 0, 3, 2]);
        let sub = x.restrict(|a| a.0 < 3).unwrap();
        assert_eq!(sub.to_csv_field(), "1,0,2");
    }
}
