mod common;

use common::tiny_instance;
use episel::bayes::build_grid;
use episel::oracle::{
    brute_force_pems, design_subset_values, exhaustive_gamma1, monotonicity_audit, submodularity_audit,
};
use episel::pems::{
    bayesian_information_direct, bcrlb_criterion, gamma1_lower_bound, greedy, guarantee, Criterion, Design,
    Gamma1Form, Selection,
};
use proptest::prelude::*;

fn total_cost(d: &Design) -> f64 {
    d.cost(&d.caps)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn greedy_meets_the_d_guarantee(seed in any::<u64>(), frac in 0.0..1.0f64) {
        let inst = tiny_instance(seed, 8);
        let design = Design::prepare(&inst, 10).unwrap();
        let c_min = design.cost_range(&design.caps).unwrap().0;
        let budget = c_min + frac * (total_cost(&design) - c_min);
        let trace = greedy(&design, Criterion::D, budget).unwrap();
        let opt = brute_force_pems(&design, Criterion::D, budget).unwrap();
        prop_assert!(trace.value <= opt.value + 1e-12);
        prop_assert!(design.cost(&design.counts_of(&trace.selection)) <= budget + 1e-9);
        let (c_min, c_max) = design.cost_range(&trace.caps).unwrap();
        let g = guarantee(Criterion::D, 1.0, 1.0, budget, c_min, c_max, 0.0);
        prop_assert!(g.holds(trace.value, opt.value));
    }

    #[test]
    fn log_det_is_monotone_submodular_and_trace_monotone(seed in any::<u64>()) {
        let inst = tiny_instance(seed, 8);
        let design = Design::prepare(&inst, 10).unwrap();
        let (values, size) = design_subset_values(&design, Criterion::D).unwrap();
        prop_assert_eq!(submodularity_audit(&values, size, 1e-9).unwrap(), None);
        prop_assert_eq!(monotonicity_audit(&values, size, 1e-9).unwrap(), None);
        let trace = greedy(&design, Criterion::D, total_cost(&design)).unwrap();
        let g1 = exhaustive_gamma1(&design, &trace).unwrap();
        prop_assert!((g1 - 1.0).abs() <= 1e-9, "{}", g1);
        let (values, size) = design_subset_values(&design, Criterion::A).unwrap();
        prop_assert_eq!(monotonicity_audit(&values, size, 1e-9).unwrap(), None);
    }

    #[test]
    fn trace_bound_never_exceeds_exhaustive_ratio(seed in any::<u64>(), frac in 0.0..1.0f64) {
        let inst = tiny_instance(seed, 10);
        let design = Design::prepare(&inst, 10).unwrap();
        let c_min = design.cost_range(&design.caps).unwrap().0;
        let budget = c_min + frac * (total_cost(&design) - c_min);
        let trace = greedy(&design, Criterion::A, budget).unwrap();
        let exact = exhaustive_gamma1(&design, &trace).unwrap();
        let lemma = gamma1_lower_bound(&design, &trace, Gamma1Form::Lemma, 0.0).value;
        let weyl = gamma1_lower_bound(&design, &trace, Gamma1Form::Weyl, 0.0).value;
        prop_assert!(lemma <= exact + 1e-9, "lemma {} > exact {}", lemma, exact);
        prop_assert!(weyl <= exact + 1e-9, "weyl {} > exact {}", weyl, exact);
        prop_assert!((0.0..=1.0).contains(&lemma));
    }

    #[test]
    fn atoms_agree_with_the_direct_bound(seed in any::<u64>(), mask in any::<u16>()) {
        let inst = tiny_instance(seed, 8);
        let grid = build_grid(&inst.priors(), 8).unwrap();
        let design = Design::prepare_on(&inst, &grid).unwrap();
        let counts: Vec<u32> = design.caps.iter().enumerate()
            .map(|(g, &cap)| (mask >> (2 * g)) as u32 % (cap + 1))
            .collect();
        let sel = design.selection(&counts);
        let empty = bayesian_information_direct(&inst, &grid, &Selection::default()).unwrap();
        let full = bayesian_information_direct(&inst, &grid, &sel).unwrap();
        let via_atoms = design.information(&counts);
        prop_assert!(full.frobenius() > 0.0);
        prop_assert!((via_atoms + full.scaled(-1.0)).frobenius() <= 1e-8 * full.frobenius());
        for which in [Criterion::A, Criterion::D] {
            let direct = bcrlb_criterion(empty, which).unwrap() - bcrlb_criterion(full, which).unwrap();
            let v = design.value(&counts, which);
            prop_assert!((v - direct).abs() <= 1e-8 * v.abs().max(1.0), "{:?}: {} vs {}", which, v, direct);
        }
    }
}

#[test]
fn bigger_budget_never_hurts_the_optimum() {
    let inst = tiny_instance(11, 8);
    let design = Design::prepare(&inst, 10).unwrap();
    let mut last = 0.0;
    for b in 0..=total_cost(&design) as usize {
        let v = brute_force_pems(&design, Criterion::A, b as f64).unwrap().value;
        assert!(v >= last);
        last = v;
    }
}
