//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use activeval::voting::PreferenceProfile;
use activeval::Ranking;

/// All permutations of `0..m` in lexicographic order.
pub fn permutations(m: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for a in 0..used.len() {
            if !used[a] {
                used[a] = true;
                prefix.push(a);
                rec(prefix, used, out);
                prefix.pop();
                used[a] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; m], &mut out);
    out
}

pub fn ranking(v: &[usize]) -> Ranking {
    Ranking::from_indices(v.iter().copied()).unwrap()
}

fn pos(v: &[usize]) -> Vec<usize> {
    let mut p = vec![0; v.len()];
    for (i, &a) in v.iter().enumerate() {
        p[a] = i;
    }
    p
}

/// Pairwise-disagreement count by enumeration of agent pairs.
pub fn kendall(a: &[usize], b: &[usize]) -> u64 {
    let (pa, pb) = (pos(a), pos(b));
    let m = a.len();
    let mut d = 0;
    for x in 0..m {
        for y in x + 1..m {
            if (pa[x] < pa[y]) != (pb[x] < pb[y]) {
                d += 1;
            }
        }
    }
    d
}

/// Top-k error from set intersection and pairwise order of the truth's top-k.
pub fn gre(r: &[usize], gt: &[usize], k: usize) -> f64 {
    let m = gt.len();
    let alpha = (m - k) as f64 / (m - 1) as f64;
    let top_r: std::collections::HashSet<usize> = r[..k].iter().copied().collect();
    let missed = gt[..k].iter().filter(|a| !top_r.contains(a)).count();
    let ide = missed as f64 / k as f64;
    let pr = pos(r);
    let mut bad = 0;
    let mut pairs = 0;
    for i in 0..k {
        for j in i + 1..k {
            pairs += 1;
            if pr[gt[i]] > pr[gt[j]] {
                bad += 1;
            }
        }
    }
    let kn = if pairs == 0 { 0.0 } else { bad as f64 / pairs as f64 };
    alpha * ide + (1.0 - alpha) * kn
}

/// Best Kemeny score by enumerating every ranking.
pub fn brute_force_kemeny(p: &PreferenceProfile) -> f64 {
    let m = p.agents();
    permutations(m)
        .iter()
        .map(|order| {
            let mut s = 0.0;
            for i in 0..m {
                for j in i + 1..m {
                    s += p.count(order[i], order[j]);
                }
            }
            s
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}
