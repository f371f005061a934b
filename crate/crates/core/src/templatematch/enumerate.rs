//! Exhaustive enumeration of matched samples for tiny instances.

use crate::error::{Error, Result};
use crate::statdist::CostMatrix;

/// Largest number of matched outcomes [`enumerate_matched_samples`] produces.
pub const ENUMERATION_GUARD: u128 = 1_000_000;

/// A matched outcome: `treated[i]` is paired with `controls[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CandidateSample {
    /// Selected treated units, increasing.
    pub treated: Vec<usize>,
    pub controls: Vec<usize>,
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

fn falling(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i))
}

/// Number of distinct matched outcomes with `k * r` pairs: choose the
/// treated subset, then an injective control assignment.
pub fn matched_outcome_count(r: usize, t: usize, c: usize, k: usize) -> u128 {
    let n = (k * r) as u128;
    binomial(t as u128, n).saturating_mul(falling(c as u128, n))
}

/// Every distinct matched outcome of a network with `r` template, `t`
/// treated and `c` control units and multiplier `k`.
///
/// Flows that differ only in which template unit feeds which selected
/// treated unit produce the same outcome and are listed once; use
/// [`min_template_cost`] to price an outcome's cheapest template assignment.
pub fn enumerate_matched_samples(r: usize, t: usize, c: usize, k: usize) -> Result<Vec<CandidateSample>> {
    let n = k * r;
    let count = matched_outcome_count(r, t, c, k);
    if count > ENUMERATION_GUARD {
        return Err(Error::EnumerationTooLarge(count));
    }
    let mut out = Vec::with_capacity(count as usize);
    if n > t || n > c {
        return Ok(out);
    }
    let mut subset = Vec::with_capacity(n);
    for_each_subset(t, n, 0, &mut subset, &mut |treated| {
        let mut used = vec![false; c];
        let mut controls = Vec::with_capacity(n);
        for_each_injection(c, n, &mut used, &mut controls, &mut |controls| {
            out.push(CandidateSample {
                treated: treated.to_vec(),
                controls: controls.to_vec(),
            });
        });
    });
    Ok(out)
}

fn for_each_subset(t: usize, n: usize, start: usize, current: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if current.len() == n {
        f(current);
        return;
    }
    for i in start..t {
        if t - i < n - current.len() {
            break;
        }
        current.push(i);
        for_each_subset(t, n, i + 1, current, f);
        current.pop();
    }
}

fn for_each_injection(c: usize, n: usize, used: &mut [bool], current: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if current.len() == n {
        f(current);
        return;
    }
    for j in 0..c {
        if used[j] {
            continue;
        }
        used[j] = true;
        current.push(j);
        for_each_injection(c, n, used, current, f);
        current.pop();
        used[j] = false;
    }
}

/// Cheapest way to feed the selected treated units from template units, each
/// template unit used exactly `k` times, by trying every assignment. `None`
/// when some required template-treated entry is absent everywhere.
pub fn min_template_cost(delta: &CostMatrix, treated: &[usize], k: usize) -> Option<f64> {
    let r = delta.rows();
    if treated.len() != k * r {
        return None;
    }
    fn go(delta: &CostMatrix, treated: &[usize], remaining: &mut [usize], i: usize) -> Option<f64> {
        if i == treated.len() {
            return Some(0.0);
        }
        let mut best: Option<f64> = None;
        for rr in 0..remaining.len() {
            if remaining[rr] == 0 {
                continue;
            }
            let Some(cost) = delta.get(rr, treated[i]) else {
                continue;
            };
            remaining[rr] -= 1;
            if let Some(rest) = go(delta, treated, remaining, i + 1) {
                let total = cost + rest;
                if best.is_none_or(|b| total < b) {
                    best = Some(total);
                }
            }
            remaining[rr] += 1;
        }
        best
    }
    let mut remaining = vec![k; r];
    go(delta, treated, &mut remaining, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_count_is_480() {
        assert_eq!(matched_outcome_count(3, 4, 6, 1), 480);
        let all = enumerate_matched_samples(3, 4, 6, 1).unwrap();
        assert_eq!(all.len(), 480);
        let distinct: std::collections::HashSet<_> = all.iter().collect();
        assert_eq!(distinct.len(), 480);
    }

    #[test]
    fn trivial_counts() {
        assert_eq!(enumerate_matched_samples(1, 1, 1, 1).unwrap().len(), 1);
        assert_eq!(enumerate_matched_samples(1, 2, 2, 2).unwrap().len(), 2);
    }

    #[test]
    fn guard() {
        assert!(matches!(
            enumerate_matched_samples(3, 20, 20, 2),
            Err(Error::EnumerationTooLarge(_))
        ));
    }

    #[test]
    fn template_cost_brute_force() {
        let delta = CostMatrix::dense(2, 3, |r, t| ((r + 1) * (t + 2)) as f64).unwrap();
        // Template 0 costs t+2, template 1 costs 2(t+2); best puts template 1 on the cheaper treated.
        assert_eq!(min_template_cost(&delta, &[0, 2], 1), Some(4.0 + 4.0));
        assert_eq!(min_template_cost(&delta, &[0], 1), None);
    }
}
