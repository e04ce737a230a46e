//! Enumeration-based approximation: solve the surrogate for a polynomial
//! family of active sets and keep the best.
//!
//! Candidates live in rank space: rank `r` (0-based here) is the `r`-th
//! smallest positive label. A tuple `0 <= i₁ < … < i_j <= m` (1-based ranks)
//! makes ranks `{1..i₁} ∪ {i₂, …, i_j}` inactive.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::dataset::{relu_objective, Dataset};
use crate::error::{Error, Result};
use crate::exec::map_slice;
use crate::loss::ActiveSet;
use crate::solver::{minimize_surrogate, SolveReport, SolverConfig};

/// Deduplicated inactive sets, in first-enumerated order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateFamily {
    pub k: usize,
    /// Number of index tuples visited before deduplication.
    pub tuples: usize,
    inactive: Vec<Vec<usize>>,
}

impl CandidateFamily {
    pub fn len(&self) -> usize {
        self.inactive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inactive.is_empty()
    }

    /// Inactive sets as sorted 0-based ranks.
    pub fn inactive_sets(&self) -> &[Vec<usize>] {
        &self.inactive
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.inactive.iter().map(|v| v.as_slice())
    }

    pub fn active_sets(&self, d: &Dataset) -> Vec<ActiveSet> {
        self.iter().map(|r| ActiveSet::from_inactive_ranks(d, r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxResult {
    pub best: SolveReport,
    pub best_active: ActiveSet,
    pub candidates_evaluated: usize,
    /// ReLU objective at `best.params`.
    pub relu_value: f64,
}

pub fn enumerate_candidates(m: usize, k: usize) -> CandidateFamily {
    let mut seen = HashSet::new();
    let mut inactive = Vec::new();
    let mut tuples = 0usize;
    for j in 1..=k.min(m + 1) {
        // tuple over 0..=m, lexicographic
        let mut idx: Vec<usize> = (0..j).collect();
        loop {
            tuples += 1;
            let mut set: Vec<usize> = (0..idx[0]).collect();
            set.extend(idx[1..].iter().map(|&r| r - 1));
            if seen.insert(set.clone()) {
                inactive.push(set);
            }
            if !next_combination(&mut idx, m + 1) {
                break;
            }
        }
    }
    CandidateFamily { k, tuples, inactive }
}

/// Advances a strictly increasing tuple over `0..n`; false when exhausted.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let j = idx.len();
    let mut pos = j;
    while pos > 0 {
        pos -= 1;
        if idx[pos] < n - j + pos {
            idx[pos] += 1;
            for q in pos + 1..j {
                idx[q] = idx[q - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Runs the surrogate solve on every candidate of order `k`.
pub fn generalized_approx(d: &Dataset, k: usize, cfg: &SolverConfig) -> Result<ApproxResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let family = enumerate_candidates(d.m(), k);
    evaluate(d, family.inactive_sets(), cfg)
}

/// Prefix candidates: for `t = 0..=splits`, ranks `{1..⌊t·m/splits⌋}` are
/// inactive. Repeated prefixes (when `splits > m`) are solved once.
pub fn sorting_method(d: &Dataset, splits: usize, cfg: &SolverConfig) -> Result<ApproxResult> {
    if splits == 0 {
        return Err(Error::InvalidArgument("number of splits must be at least 1".into()));
    }
    let m = d.m();
    let mut sets: Vec<Vec<usize>> = Vec::with_capacity(splits + 1);
    for t in 0..=splits {
        let cut = t * m / splits;
        if sets.last().map(|s| s.len()) != Some(cut) {
            sets.push((0..cut).collect());
        }
    }
    evaluate(d, &sets, cfg)
}

fn evaluate(d: &Dataset, inactive: &[Vec<usize>], cfg: &SolverConfig) -> Result<ApproxResult> {
    cfg.validate()?;
    let reports = map_slice(cfg.execution, inactive, |ranks| {
        let active = ActiveSet::from_inactive_ranks(d, ranks);
        minimize_surrogate(d, &active, cfg).map(|r| (r, active))
    });
    let mut best: Option<(SolveReport, ActiveSet)> = None;
    for r in reports {
        let (report, active) = r?;
        if best.as_ref().is_none_or(|(b, _)| report.value < b.value) {
            best = Some((report, active));
        }
    }
    let (best, best_active) = best.ok_or(Error::Empty)?;
    let relu_value = relu_objective(d, &best.params)?;
    Ok(ApproxResult {
        best,
        best_active,
        candidates_evaluated: inactive.len(),
        relu_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_dataset, Sample};
    use crate::exec::Execution;

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn k1_is_the_prefix_family() {
        let f = enumerate_candidates(3, 1);
        let want: Vec<Vec<usize>> = vec![vec![], vec![0], vec![0, 1], vec![0, 1, 2]];
        assert_eq!(f.inactive_sets(), want.as_slice());
        assert_eq!(f.tuples, 4);
    }

    #[test]
    fn m2_k2_counts() {
        let f = enumerate_candidates(2, 2);
        assert_eq!(f.tuples, 6);
        assert_eq!(f.len(), 4);
        let mut sets = f.inactive_sets().to_vec();
        sets.sort();
        assert_eq!(sets, vec![vec![], vec![0], vec![0, 1], vec![1]]);
    }

    #[test]
    fn m0_single_candidate() {
        let f = enumerate_candidates(0, 3);
        assert_eq!(f.len(), 1);
        assert!(f.inactive_sets()[0].is_empty());
    }

    #[test]
    fn tuple_count_matches_binomials() {
        for m in 0..7 {
            for k in 1..5 {
                let f = enumerate_candidates(m, k);
                let want: usize = (1..=k.min(m + 1)).map(|j| binom(m + 1, j)).sum();
                assert_eq!(f.tuples, want, "m={m} k={k}");
                let mut uniq = f.inactive_sets().to_vec();
                uniq.sort();
                uniq.dedup();
                assert_eq!(uniq.len(), f.len());
            }
        }
    }

    #[test]
    fn families_are_nested_in_k() {
        let small = enumerate_candidates(5, 2);
        let big = enumerate_candidates(5, 3);
        assert_eq!(&big.inactive_sets()[..small.len()], small.inactive_sets());
    }

    fn line_data() -> Dataset {
        // y = relu(2x - 1)
        let raw = [-1.0, 0.0, 0.5, 1.0, 1.5, 2.0]
            .iter()
            .map(|&x: &f64| Sample::new(vec![x], (2.0 * x - 1.0).max(0.0)))
            .collect();
        build_dataset(raw).unwrap()
    }

    #[test]
    fn realizable_is_solved_exactly() {
        let d = line_data();
        let r = generalized_approx(&d, 1, &SolverConfig::default()).unwrap();
        assert!(r.relu_value <= 1e-9, "{}", r.relu_value);
        assert!(r.relu_value <= r.best.value + 1e-12);
        let s = sorting_method(&d, d.m(), &SolverConfig::default()).unwrap();
        assert!(s.relu_value <= 1e-9);
    }

    #[test]
    fn single_point_fits() {
        let d = build_dataset(vec![Sample::new(vec![0.3], 2.0)]).unwrap();
        let r = generalized_approx(&d, 1, &SolverConfig::default()).unwrap();
        assert!(r.best.value.abs() < 1e-12);
    }

    #[test]
    fn sorting_with_one_split_has_two_candidates() {
        let d = line_data();
        let r = sorting_method(&d, 1, &SolverConfig::default()).unwrap();
        assert_eq!(r.candidates_evaluated, 2);
        assert!(sorting_method(&d, 0, &SolverConfig::default()).is_err());
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let d = line_data();
        let a = generalized_approx(&d, 2, &SolverConfig::default()).unwrap();
        let cfg = SolverConfig::default().with_execution(Execution::Sequential);
        let b = generalized_approx(&d, 2, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
