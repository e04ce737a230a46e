//! Subset sum to One-Node-ReLU: the {±1} form of subset sum and a
//! `2p + 3` sample training set whose optimum equals `p + 100p²` exactly
//! when the {±1} instance is feasible.

use serde::{Deserialize, Serialize};

use crate::dataset::{build_dataset, Dataset, Sample};
use crate::error::{Error, Result};
use crate::oracle::brute_force_opt;
use crate::solver::SolverConfig;

/// Largest instance [`check_feasibility_small`] enumerates.
pub const MAX_EXHAUSTIVE_P: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetSumInstance {
    pub a: Vec<u64>,
}

impl SubsetSumInstance {
    pub fn new(a: Vec<u64>) -> Self {
        SubsetSumInstance { a }
    }

    pub fn p(&self) -> usize {
        self.a.len()
    }

    fn total(&self) -> u128 {
        self.a.iter().map(|&v| v as u128).sum()
    }
}

/// Appends `Σa`. Subset sum on `a` is feasible iff the {±1} problem on the
/// result is.
pub fn to_pm1(inst: &SubsetSumInstance) -> SubsetSumInstance {
    let mut a = inst.a.clone();
    a.push(inst.a.iter().sum());
    SubsetSumInstance { a }
}

/// `p + 100p²`.
pub fn threshold(p: usize) -> f64 {
    let p = p as f64;
    p + 100.0 * p * p
}

/// Builds the reduction dataset for a {±1}-subset-sum instance with `p`
/// entries. Rows, in order: `(a, ½Σa)`, `(2a, Σa)`, `(e_i, 1)` and
/// `(−e_i, 1)` for each `i`, and `(0, −10p)`.
pub fn reduce_to_relu(inst: &SubsetSumInstance, p: usize) -> Result<Dataset> {
    if inst.p() != p {
        return Err(Error::DimensionMismatch { expected: p, got: inst.p() });
    }
    if p == 0 {
        return Err(Error::InvalidArgument("reduction needs p >= 1".into()));
    }
    let a: Vec<f64> = inst.a.iter().map(|&v| v as f64).collect();
    let sum = inst.total() as f64;
    let mut rows = Vec::with_capacity(2 * p + 3);
    rows.push(Sample::new(a.clone(), sum / 2.0));
    rows.push(Sample::new(a.iter().map(|v| 2.0 * v).collect(), sum));
    for i in 0..p {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; p];
            e[i] = s;
            rows.push(Sample::new(e, 1.0));
        }
    }
    rows.push(Sample::new(vec![0.0; p], -10.0 * p as f64));
    build_dataset(rows)
}

/// Whether some `x ∈ {±1}^p` has `Σ a_i x_i = ½Σa`, by enumeration.
pub fn check_feasibility_small(inst: &SubsetSumInstance) -> Result<bool> {
    let p = inst.p();
    if p > MAX_EXHAUSTIVE_P {
        return Err(Error::TooLarge(format!(
            "exhaustive check enumerates 2^p sign vectors; p = {p} exceeds {MAX_EXHAUSTIVE_P}"
        )));
    }
    Ok(find_witness(inst).is_some())
}

/// A sign vector solving the {±1} problem, if any (`p <= 24`).
pub fn find_witness(inst: &SubsetSumInstance) -> Option<Vec<i8>> {
    let p = inst.p();
    if p > MAX_EXHAUSTIVE_P {
        return None;
    }
    // Σ a_i x_i = ½Σa  ⇔  Σ_{x_i = +1} a_i = ¾Σa, compared in integers.
    let total = inst.total();
    (0u64..1 << p).find_map(|mask| {
        let plus: u128 = (0..p).filter(|i| mask >> i & 1 == 1).map(|i| inst.a[i] as u128).sum();
        (4 * plus == 3 * total).then(|| (0..p).map(|i| if mask >> i & 1 == 1 { 1 } else { -1 }).collect())
    })
}

/// Oracle verdict on a reduction instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub feasible: bool,
    pub optimum: f64,
    pub threshold: f64,
}

/// Solves the reduction exactly and compares its optimum with the
/// threshold. Feasible iff they agree within `max(1e-6, 1e-10·threshold)`.
pub fn decide(inst: &SubsetSumInstance, cfg: &SolverConfig) -> Result<Decision> {
    let p = inst.p();
    let d = reduce_to_relu(inst, p)?;
    let optimum = brute_force_opt(&d, cfg)?.report.value;
    let t = threshold(p);
    let tol = 1e-6f64.max(1e-10 * t);
    Ok(Decision {
        feasible: (optimum - t).abs() <= tol,
        optimum,
        threshold: t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{relu_objective, Params};

    #[test]
    fn pm1_extension() {
        assert_eq!(to_pm1(&SubsetSumInstance::new(vec![1, 2, 3])).a, vec![1, 2, 3, 6]);
        assert_eq!(to_pm1(&SubsetSumInstance::new(vec![])).a, vec![0]);
        let ext = to_pm1(&SubsetSumInstance::new(vec![5]));
        assert_eq!(ext.a, vec![5, 5]);
        assert!(!check_feasibility_small(&ext).unwrap());
    }

    #[test]
    fn pm1_preserves_feasibility() {
        // subset sum target ½Σa on small vectors, by enumeration
        for code in 0..216u32 {
            let a: Vec<u64> = (0..3).map(|i| ((code / 6u32.pow(i)) % 6) as u64).collect();
            let total: u64 = a.iter().sum();
            let orig = (0u32..8).any(|mask| {
                let s: u64 = (0..3).filter(|i| mask >> i & 1 == 1).map(|i| a[i]).sum();
                2 * s == total
            });
            let inst = SubsetSumInstance::new(a);
            assert_eq!(check_feasibility_small(&to_pm1(&inst)).unwrap(), orig, "{:?}", inst.a);
        }
    }

    #[test]
    fn thresholds() {
        assert_eq!(threshold(3), 903.0);
        assert_eq!(threshold(1), 101.0);
        assert_eq!(threshold(4), 1604.0);
    }

    #[test]
    fn structure() {
        let inst = SubsetSumInstance::new(vec![2, 1, 1]);
        let d = reduce_to_relu(&inst, 3).unwrap();
        assert_eq!(d.n(), 9);
        assert_eq!(d.x(0), &[2.0, 1.0, 1.0]);
        assert_eq!(d.y(0), 2.0);
        assert_eq!(d.x(1), &[4.0, 2.0, 2.0]);
        assert_eq!(d.y(1), 4.0);
        assert_eq!(d.x(2), &[1.0, 0.0, 0.0]);
        assert_eq!(d.x(3), &[-1.0, 0.0, 0.0]);
        assert_eq!(d.x(8), &[0.0, 0.0, 0.0]);
        assert_eq!(d.y(8), -30.0);
        assert!(reduce_to_relu(&inst, 2).is_err());
    }

    #[test]
    fn witness_hits_threshold() {
        let inst = SubsetSumInstance::new(vec![2, 1, 1]);
        let d = reduce_to_relu(&inst, 3).unwrap();
        let v = relu_objective(&d, &Params::new(vec![1.0, 1.0, -1.0], 0.0)).unwrap();
        assert_eq!(v, 903.0);
        let zeros = SubsetSumInstance::new(vec![0, 0]);
        let d = reduce_to_relu(&zeros, 2).unwrap();
        for b in [[1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]] {
            assert_eq!(relu_objective(&d, &Params::new(b.to_vec(), 0.0)).unwrap(), threshold(2));
        }
    }

    #[test]
    fn feasibility_examples() {
        assert!(check_feasibility_small(&SubsetSumInstance::new(vec![2, 1, 1])).unwrap());
        assert_eq!(find_witness(&SubsetSumInstance::new(vec![2, 1, 1])), Some(vec![1, 1, -1]));
        assert!(!check_feasibility_small(&SubsetSumInstance::new(vec![1, 1])).unwrap());
        assert!(check_feasibility_small(&SubsetSumInstance::new(vec![])).unwrap());
        assert!(check_feasibility_small(&SubsetSumInstance::new(vec![1; 25])).is_err());
    }

    #[test]
    fn decide_small() {
        let cfg = SolverConfig::default();
        let yes = decide(&SubsetSumInstance::new(vec![2, 1, 1]), &cfg).unwrap();
        assert!(yes.feasible, "{yes:?}");
        assert!((yes.optimum - 903.0).abs() < 1e-6);
        let no = decide(&SubsetSumInstance::new(vec![1, 1]), &cfg).unwrap();
        assert!(!no.feasible);
        assert!(no.optimum > no.threshold + 1e-3, "{no:?}");
    }
}
