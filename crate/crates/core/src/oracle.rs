//! Exact global optimum for small instances: the minimum of the surrogate
//! over every subset of positive samples equals the optimum of the ReLU
//! least-squares problem.

use serde::{Deserialize, Serialize};

use crate::approx::generalized_approx;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec::map_range;
use crate::loss::ActiveSet;
use crate::solver::{minimize_surrogate, SolveReport, SolverConfig};

/// Largest `m` the oracle accepts.
pub const MAX_ORACLE_M: usize = 20;

const TINY: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub report: SolveReport,
    pub active: ActiveSet,
    pub subsets: usize,
}

pub fn brute_force_opt(d: &Dataset, cfg: &SolverConfig) -> Result<OracleResult> {
    cfg.validate()?;
    let m = d.m();
    if m > MAX_ORACLE_M {
        return Err(Error::TooLarge(format!(
            "oracle enumerates 2^m subsets; m = {m} exceeds {MAX_ORACLE_M}"
        )));
    }
    let pos = d.pos_idx();
    let subsets = 1usize << m;
    let solved = map_range(cfg.execution, subsets, |mask| {
        let members: Vec<usize> = (0..m).filter(|b| mask >> b & 1 == 1).map(|b| pos[b]).collect();
        let active = ActiveSet::new(d, members)?;
        minimize_surrogate(d, &active, cfg).map(|r| (r, active))
    });
    let mut best: Option<(SolveReport, ActiveSet)> = None;
    for r in solved {
        let (report, active) = r?;
        if best.as_ref().is_none_or(|(b, _)| report.value < b.value) {
            best = Some((report, active));
        }
    }
    let (report, active) = best.ok_or(Error::Empty)?;
    Ok(OracleResult { report, active, subsets })
}

/// `z^approx / z^OPT` for the order-`k` approximation.
pub fn verify_ratio(d: &Dataset, k: usize, cfg: &SolverConfig) -> Result<f64> {
    let opt = brute_force_opt(d, cfg)?;
    let approx = generalized_approx(d, k, cfg)?;
    Ok(approx.best.value / opt.report.value.max(TINY))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_dataset, relu_objective, Params, Sample};

    fn small() -> Dataset {
        build_dataset(vec![Sample::new(vec![1.0], 1.0), Sample::new(vec![2.0], -1.0)]).unwrap()
    }

    /// Grid search over `[-5, 5]²` at step 0.005 for the ReLU objective.
    fn grid_min(d: &Dataset) -> f64 {
        let eval = |b: f64, b0: f64| relu_objective(d, &Params::new(vec![b], b0)).unwrap();
        let mut best = (f64::INFINITY, 0.0, 0.0);
        let steps = 2000;
        for i in 0..=steps {
            for j in 0..=steps {
                let b = -5.0 + 10.0 * i as f64 / steps as f64;
                let b0 = -5.0 + 10.0 * j as f64 / steps as f64;
                let v = eval(b, b0);
                if v < best.0 {
                    best = (v, b, b0);
                }
            }
        }
        best.0
    }

    #[test]
    fn two_point_instance_matches_grid() {
        let d = small();
        let r = brute_force_opt(&d, &SolverConfig::default()).unwrap();
        assert_eq!(r.subsets, 2);
        // (1, 1) is fit exactly; the second point costs at least y² = 1.
        assert!((r.report.value - 1.0).abs() < 1e-12, "{}", r.report.value);
        assert!((grid_min(&d) - r.report.value).abs() < 1e-3);
    }

    #[test]
    fn all_negative_labels() {
        let d = build_dataset(vec![Sample::new(vec![1.0], -1.0), Sample::new(vec![-1.0], -2.0)]).unwrap();
        let r = brute_force_opt(&d, &SolverConfig::default()).unwrap();
        assert_eq!(r.subsets, 1);
        assert!((r.report.value - 5.0).abs() < 1e-12);
    }

    #[test]
    fn refuses_large_m() {
        let raw = (0..21).map(|i| Sample::new(vec![i as f64], 1.0 + i as f64)).collect();
        let d = build_dataset(raw).unwrap();
        assert!(matches!(brute_force_opt(&d, &SolverConfig::default()), Err(Error::TooLarge(_))));
    }

    #[test]
    fn ratio_on_noisy_line() {
        let raw = [(-1.0, 0.3), (0.0, -0.2), (0.5, 0.4), (1.0, 0.7), (2.0, 2.6), (3.0, 1.9)]
            .iter()
            .map(|&(x, y)| Sample::new(vec![x], y))
            .collect();
        let d = build_dataset(raw).unwrap();
        let ratio = verify_ratio(&d, 1, &SolverConfig::default()).unwrap();
        assert!(ratio >= 1.0 - 1e-9 && ratio <= d.n() as f64 + 1e-9, "{ratio}");
    }
}
