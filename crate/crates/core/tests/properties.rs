//! Property-based invariants over seeded random instances.

use proptest::prelude::*;

use contagion::cascade::{
    best_case_equilibrium, check_equilibrium, enumerate_equilibria, worst_case_equilibrium,
    EquilibriumCheck,
};
use contagion::net::{
    network_from_json, network_to_json, shock_from_json, shock_to_json, Shock,
};
use contagion::random::{random_network, RandomNetworkSpec};
use contagion::valuation::market_values;
use contagion::SolverConfig;

fn spec_from_seed(seed: u64) -> RandomNetworkSpec {
    RandomNetworkSpec {
        n: 2 + (seed % 11) as usize,
        m: 1 + (seed % 4) as usize,
        density: 0.2 + 0.2 * ((seed % 4) as f64),
        reserve_floor: 0.1,
        dag: seed.is_multiple_of(5),
        seed,
    }
}

/// Random network with active thresholds and penalties, dyadic multiples
/// of the baseline values so indicators stay away from exact ties.
fn cascade_instance(seed: u64) -> contagion::FinancialNetwork {
    let base = random_network(&spec_from_seed(seed)).unwrap();
    let values = market_values(&base, &SolverConfig::default()).unwrap().market;
    let thresholds: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(i, v)| v * ((40 + ((seed as usize + 13 * i) % 56)) as f64) / 64.0)
        .collect();
    let costs: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(i, v)| v * (((seed as usize + 17 * i) % 48) as f64) / 64.0)
        .collect();
    base.with_thresholds(thresholds).with_failure_costs(costs)
}

proptest! {
    /// Files written by the canonical serializer parse back to the exact
    /// same value (every matrix entry bit-identical) and re-serialize to
    /// the exact same bytes.
    #[test]
    fn network_round_trip_is_exact(seed in any::<u64>()) {
        let net = random_network(&spec_from_seed(seed)).unwrap();
        let json = network_to_json(&net);
        let back = network_from_json(&json).unwrap();
        prop_assert_eq!(&back, &net);
        prop_assert_eq!(network_to_json(&back), json);
    }

    #[test]
    fn shock_round_trip_is_exact(drops in proptest::collection::vec(0.0f64..0.5, 1..6)) {
        let budget = drops.iter().sum::<f64>() * 1.5 + 0.1;
        let shock = Shock::new(drops, budget);
        let json = shock_to_json(&shock);
        prop_assert_eq!(shock_from_json(&json).unwrap(), shock);
    }

    /// Market values never exceed equity values and both stay nonnegative
    /// in the failure-free model.
    #[test]
    fn market_dominated_by_equity(seed in any::<u64>()) {
        let net = random_network(&spec_from_seed(seed)).unwrap();
        let res = market_values(&net, &SolverConfig::default()).unwrap();
        for (v, big_v) in res.market.iter().zip(&res.equity) {
            prop_assert!(*v >= 0.0);
            prop_assert!(v <= big_v);
        }
    }

    /// Least/greatest fixed points bracket every equilibrium by set
    /// inclusion, not just by count.
    #[test]
    fn equilibria_are_bracketed(seed in 0u64..100_000) {
        let net = cascade_instance(seed);
        let best = best_case_equilibrium(&net).unwrap();
        let worst = worst_case_equilibrium(&net).unwrap();
        prop_assert!(best.failed.is_subset(&worst.failed));
        for eq in enumerate_equilibria(&net).unwrap() {
            prop_assert!(best.failed.is_subset(&eq.failed));
            prop_assert!(eq.failed.is_subset(&worst.failed));
        }
    }

    /// The fixed points pass an independent consistency re-check.
    #[test]
    fn fixed_points_recheck_consistent(seed in 0u64..100_000) {
        let net = cascade_instance(seed);
        for eq in [best_case_equilibrium(&net).unwrap(), worst_case_equilibrium(&net).unwrap()] {
            match check_equilibrium(&net, &eq.failed).unwrap() {
                EquilibriumCheck::Consistent(again) => prop_assert!(again.approx_eq(&eq)),
                EquilibriumCheck::Inconsistent { mismatched, .. } => {
                    return Err(TestCaseError::fail(format!("mismatched {mismatched:?}")));
                }
            }
        }
    }

    /// Self-holdings complement the cross-holding column sums exactly.
    #[test]
    fn self_holdings_complement(seed in any::<u64>()) {
        let net = random_network(&spec_from_seed(seed)).unwrap();
        let sums = net.cross_holdings().column_sums();
        for (sh, sum) in net.self_holdings().unwrap().iter().zip(&sums) {
            prop_assert!((sh + sum - 1.0).abs() <= 1e-12);
        }
        prop_assert!(net.reserve().unwrap() > 0.0);
    }
}
