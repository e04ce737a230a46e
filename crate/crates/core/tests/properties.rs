use onerelu::dataset::{augment_intercept, build_dataset, relu_objective, Dataset, Params, Sample};
use onerelu::loss::{phi, subgradient_surrogate, surrogate_objective, ActiveSet};
use onerelu::oracle::brute_force_opt;
use onerelu::solver::SolverConfig;
use proptest::prelude::*;

fn dataset(p: usize, n: usize) -> impl Strategy<Value = Dataset> {
    proptest::collection::vec((proptest::collection::vec(-3.0..3.0f64, p), -2.0..3.0f64), n).prop_map(|rows| {
        build_dataset(rows.into_iter().map(|(x, y)| Sample::new(x, y)).collect()).unwrap()
    })
}

fn params(p: usize) -> impl Strategy<Value = Params> {
    (proptest::collection::vec(-4.0..4.0f64, p), -4.0..4.0f64).prop_map(|(b, b0)| Params::new(b, b0))
}

/// Dataset, two parameter points and a bitmask picking the active set.
fn case() -> impl Strategy<Value = (Dataset, Params, Params, u64)> {
    (1usize..4, 1usize..12).prop_flat_map(|(p, n)| (dataset(p, n), params(p), params(p), any::<u64>()))
}

fn active_from_mask(d: &Dataset, mask: u64) -> ActiveSet {
    let members = d.pos_idx().iter().copied().filter(|&i| mask >> (i % 64) & 1 == 1).collect();
    ActiveSet::new(d, members).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #[test]
    fn surrogate_majorizes_relu((d, t, _, mask) in case()) {
        let act = active_from_mask(&d, mask);
        prop_assert!(surrogate_objective(&d, &act, &t).unwrap() >= relu_objective(&d, &t).unwrap() - 1e-12);
    }

    #[test]
    fn surrogate_is_tight_at_its_own_active_set((d, t, _, _) in case()) {
        let act = ActiveSet::from_params(&d, &t);
        prop_assert!(close(surrogate_objective(&d, &act, &t).unwrap(), relu_objective(&d, &t).unwrap(), 1e-12));
    }

    #[test]
    fn surrogate_is_convex_on_segments((d, a, b, mask) in case(), l in 0.0..1.0f64) {
        let act = active_from_mask(&d, mask);
        let m = Params::from_vec(&a.to_vec().iter().zip(b.to_vec()).map(|(x, y)| l * x + (1.0 - l) * y).collect::<Vec<_>>());
        let f = |t: &Params| surrogate_objective(&d, &act, t).unwrap();
        prop_assert!(f(&m) <= l * f(&a) + (1.0 - l) * f(&b) + 1e-9);
        let g = |t: &Params| phi(&d, t).unwrap();
        prop_assert!(g(&m) <= l * g(&a) + (1.0 - l) * g(&b) + 1e-9);
    }

    #[test]
    fn subgradient_inequality((d, a, b, mask) in case()) {
        let act = active_from_mask(&d, mask);
        let g = subgradient_surrogate(&d, &act, &a).unwrap();
        let lin: f64 = g.g_beta.iter().zip(b.beta.iter().zip(&a.beta)).map(|(gj, (x, y))| gj * (x - y)).sum::<f64>()
            + g.g_beta0 * (b.beta0 - a.beta0);
        let fa = surrogate_objective(&d, &act, &a).unwrap();
        let fb = surrogate_objective(&d, &act, &b).unwrap();
        prop_assert!(fb >= fa + lin - 1e-9 * (1.0 + fa.abs() + fb.abs()));
    }

    #[test]
    fn intercept_folds_into_a_constant_feature((d, t, _, _) in case()) {
        let aug = augment_intercept(&d);
        let a = relu_objective(&d, &t).unwrap();
        let b = relu_objective(&aug, &t.fold_intercept()).unwrap();
        prop_assert!(close(a, b, 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn oracle_is_permutation_invariant(d in (1usize..3, 2usize..8).prop_flat_map(|(p, n)| dataset(p, n)), seed in any::<u64>()) {
        let n = d.n();
        let mut order: Vec<usize> = (0..n).collect();
        // deterministic shuffle from the seed
        let mut s = seed | 1;
        for i in (1..n).rev() {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            order.swap(i, (s % (i as u64 + 1)) as usize);
        }
        let shuffled = d.subset(&order).unwrap();
        let cfg = SolverConfig::default();
        let a = brute_force_opt(&d, &cfg).unwrap().report.value;
        let b = brute_force_opt(&shuffled, &cfg).unwrap().report.value;
        prop_assert!(close(a, b, 1e-9), "{} vs {}", a, b);
    }
}
