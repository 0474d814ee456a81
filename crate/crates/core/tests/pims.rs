mod common;

use episel::oracle::brute_force_pims_pairs;
use episel::pims::{algorithm1, identify_theta, proposition_bound, strategy_cost, PimsInstance};
use episel::{Error, Theta};
use proptest::prelude::*;
use rand::RngExt;

fn random_instance(seed: u64, n: usize) -> PimsInstance {
    let mut rng = common::rng(seed);
    let (net, init) = common::random_model(&mut rng, n, Theta::new(5.0, 5.0));
    let t1 = rng.random_range(0..3);
    let t2 = t1 + rng.random_range(1..4);
    let mut costs = |_| -> Vec<(usize, usize, f64)> {
        (t1..=t2)
            .flat_map(|k| (0..n).map(move |i| (k, i)))
            .map(|(k, i)| (k, i, rng.random_range(1..=4u32) as f64))
            .collect()
    };
    let cx = costs(0);
    let cr = costs(1);
    PimsInstance::new(net, init, t1, t2, &cx, &cr).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn algorithm1_matches_independent_pair_scan(seed in any::<u64>(), n in 1usize..=6) {
        let inst = random_instance(seed, n);
        match (algorithm1(&inst), brute_force_pims_pairs(&inst)) {
            (Ok(a), Ok(b)) => {
                prop_assert!((a.cost - b.cost).abs() <= 1e-12 * b.cost.max(1.0));
                prop_assert_eq!(a.pair, Some(b.pair));
                prop_assert_eq!(&a.selected, &b.selected);
                prop_assert_eq!(strategy_cost(&inst, &a.selected), a.cost);
            }
            (Err(Error::Infeasible(_)), Err(Error::Infeasible(_))) => {}
            (a, b) => prop_assert!(false, "disagreement: {:?} vs {:?}", a.map(|s| s.cost), b.map(|r| r.cost)),
        }
    }

    #[test]
    fn selected_strategy_identifies_theta(seed in any::<u64>(), n in 1usize..=6, b in 0.2..5.0f64, d in 0.2..5.0f64) {
        let inst = random_instance(seed, n);
        let Ok(strategy) = algorithm1(&inst) else { return Ok(()); };
        let id = identify_theta(&inst, &strategy.selected, Theta::new(b, d)).unwrap();
        prop_assert_eq!(id.rank, 2);
        prop_assert!((id.theta.beta - b).abs() <= 1e-8 * b.max(1.0), "{} vs {}", id.theta.beta, b);
        prop_assert!((id.theta.delta - d).abs() <= 1e-8 * d.max(1.0), "{} vs {}", id.theta.delta, d);
    }

    #[test]
    fn cost_never_exceeds_the_cheapest_co_timed_pair(seed in any::<u64>(), n in 1usize..=6) {
        let inst = random_instance(seed, n);
        let Ok(strategy) = algorithm1(&inst) else { return Ok(()); };
        if let Some(bound) = proposition_bound(&inst).unwrap() {
            prop_assert!(strategy.cost <= bound.numerator + 1e-12);
            prop_assert!(bound.ratio >= strategy.cost / (3.0 * bound.c_min) - 1e-12);
        }
    }
}

#[test]
fn window_before_any_spread_is_infeasible() {
    // Node 1 is seeded without a self-loop and its only in-neighbour is never
    // infected, so no infection equation has a nonzero coefficient.
    use episel::network::Edge;
    use episel::{EpidemicNetwork, InitialCondition};
    let net = EpidemicNetwork::new(2, vec![Edge { from: 1, to: 0, weight: 1.0 }], 0.1).unwrap();
    let init = InitialCondition::from_infected(vec![0.1, 0.0]);
    let costs: Vec<_> = (0..=1).flat_map(|k| (0..2).map(move |i| (k, i, 1.0))).collect();
    let inst = PimsInstance::new(net, init, 0, 1, &costs, &costs).unwrap();
    assert!(matches!(algorithm1(&inst), Err(Error::Infeasible(_))));
    assert!(matches!(brute_force_pims_pairs(&inst), Err(Error::Infeasible(_))));
}
