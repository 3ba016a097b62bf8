//! Failure cascades under the discontinuous penalty rule.
//!
//! An institution whose market value falls strictly below its threshold
//! incurs its failure cost `β`, which is subtracted from its asset-side
//! value before the linear system is solved:
//!
//! ```text
//! v = Ĉ (I − C)⁻¹ (D p − b),    b[i] = β[i] if i ∈ F else 0
//! ```
//!
//! A failure set `F` is an *equilibrium* when the indicator is consistent:
//! `i ∈ F ⇔ v[i] < v̲[i]` (ties count as solvent). Penalties are subtracted
//! without clamping, so values may go negative.
//!
//! Because larger failure sets can only lower values, the indicator map is
//! monotone and its fixed points form a lattice: iterating from the empty
//! set yields the equilibrium with the fewest failures (best case),
//! iterating down from "everyone failed" yields the one with the most
//! (worst case). Exhaustive enumeration over all `2^n` subsets serves as a
//! desk-scale oracle for the multiplicity structure in between.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::net::{serialize_dec_vec, FinancialNetwork, SparseMatrix};
use crate::valuation::linalg::LuFactors;
use crate::valuation::{solve_ownership_system, SolverConfig};

/// Subset-scan cap for [`enumerate_equilibria`].
pub const ENUMERATION_LIMIT: usize = 24;

/// Value vectors within this ℓ∞ distance are treated as the same
/// equilibrium values.
pub const VALUE_TOL: f64 = 1e-9;

/// A consistent failure set with its value vector and applied penalties.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeEquilibrium {
    pub failed: BTreeSet<usize>,
    #[serde(serialize_with = "serialize_dec_vec")]
    pub market: Vec<f64>,
    #[serde(serialize_with = "serialize_dec_vec")]
    pub penalties: Vec<f64>,
}

impl CascadeEquilibrium {
    pub fn failure_count(&self) -> usize {
        self.failed.len()
    }

    /// Same failure set and value vectors within [`VALUE_TOL`].
    pub fn approx_eq(&self, other: &CascadeEquilibrium) -> bool {
        self.failed == other.failed
            && self
                .market
                .iter()
                .zip(&other.market)
                .all(|(a, b)| (a - b).abs() <= VALUE_TOL)
    }
}

/// Outcome of testing a candidate failure set against the indicator.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EquilibriumCheck {
    Consistent(CascadeEquilibrium),
    /// The candidate is not a fixed point; `mismatched` lists every
    /// institution whose indicator disagrees with membership.
    Inconsistent {
        mismatched: Vec<usize>,
        #[serde(serialize_with = "serialize_dec_vec")]
        market: Vec<f64>,
    },
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

/// Factorizes `I − C` once and answers value queries for arbitrary failure
/// sets and (re-settable) asset values. Shock search swaps prices in and
/// out without re-factorizing.
pub(crate) struct CascadeEngine {
    n: usize,
    factors: Option<LuFactors>,
    cross: SparseMatrix,
    self_holdings: Vec<f64>,
    asset_values: Vec<f64>,
    thresholds: Vec<f64>,
    failure_costs: Vec<f64>,
    config: SolverConfig,
}

impl CascadeEngine {
    pub fn new(network: &FinancialNetwork) -> Result<Self> {
        network.require_valid()?;
        let factors = if network.n() <= crate::valuation::DENSE_LIMIT {
            Some(
                LuFactors::of_identity_minus(network.cross_holdings())
                    .ok_or_else(|| Error::Domain("singular system: I - C".into()))?,
            )
        } else {
            None
        };
        Ok(CascadeEngine {
            n: network.n(),
            factors,
            cross: network.cross_holdings().clone(),
            self_holdings: network.self_holdings_unchecked(),
            asset_values: network.asset_values(),
            thresholds: network.thresholds().to_vec(),
            failure_costs: network.failure_costs().to_vec(),
            config: SolverConfig::default(),
        })
    }

    /// Replaces `D p` (e.g. after a price shock); cross-holdings stay fixed.
    pub fn set_asset_values(&mut self, asset_values: Vec<f64>) {
        assert_eq!(asset_values.len(), self.n);
        self.asset_values = asset_values;
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        match &self.factors {
            Some(f) => f.solve(rhs),
            None => solve_ownership_system(&self.cross, rhs, &self.config)
                .expect("series solve on validated network"),
        }
    }

    /// Market values for a fixed failure set.
    pub fn market_given_failures(&self, failed: &[bool]) -> Vec<f64> {
        let rhs: Vec<f64> = self
            .asset_values
            .iter()
            .enumerate()
            .map(|(i, dp)| if failed[i] { dp - self.failure_costs[i] } else { *dp })
            .collect();
        let equity = self.solve(&rhs);
        self.self_holdings
            .iter()
            .zip(&equity)
            .map(|(c, v)| c * v)
            .collect()
    }

    fn equilibrium(&self, failed: Vec<bool>, market: Vec<f64>) -> CascadeEquilibrium {
        let failed_set: BTreeSet<usize> = failed
            .iter()
            .enumerate()
            .filter_map(|(i, f)| f.then_some(i))
            .collect();
        let penalties = (0..self.n)
            .map(|i| if failed[i] { self.failure_costs[i] } else { 0.0 })
            .collect();
        CascadeEquilibrium {
            failed: failed_set,
            market,
            penalties,
        }
    }

    /// Least fixed point: grow the failure set from empty until stable.
    /// Terminates in at most n+1 rounds since each round adds a failure.
    pub fn best_case(&self) -> CascadeEquilibrium {
        let mut failed = vec![false; self.n];
        loop {
            let market = self.market_given_failures(&failed);
            let mut changed = false;
            for i in 0..self.n {
                if !failed[i] && market[i] < self.thresholds[i] {
                    failed[i] = true;
                    changed = true;
                }
            }
            if !changed {
                return self.equilibrium(failed, market);
            }
        }
    }

    /// Greatest fixed point: shrink from "everyone failed" until stable.
    pub fn worst_case(&self) -> CascadeEquilibrium {
        let mut failed = vec![true; self.n];
        loop {
            let market = self.market_given_failures(&failed);
            let mut changed = false;
            for i in 0..self.n {
                if failed[i] && market[i] >= self.thresholds[i] {
                    failed[i] = false;
                    changed = true;
                }
            }
            if !changed {
                return self.equilibrium(failed, market);
            }
        }
    }

    fn check(&self, candidate: &BTreeSet<usize>) -> EquilibriumCheck {
        let mut failed = vec![false; self.n];
        for &i in candidate {
            failed[i] = true;
        }
        let market = self.market_given_failures(&failed);
        let mismatched: Vec<usize> = (0..self.n)
            .filter(|&i| (market[i] < self.thresholds[i]) != failed[i])
            .collect();
        if mismatched.is_empty() {
            EquilibriumCheck::Consistent(self.equilibrium(failed, market))
        } else {
            EquilibriumCheck::Inconsistent { mismatched, market }
        }
    }
}

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

/// Tests whether a candidate failure set is self-consistent under the
/// indicator. Inconsistency is a normal result, not an error.
pub fn check_equilibrium(
    network: &FinancialNetwork,
    candidate: &BTreeSet<usize>,
) -> Result<EquilibriumCheck> {
    if let Some(&bad) = candidate.iter().find(|&&i| i >= network.n()) {
        return Err(Error::Domain(format!(
            "candidate institution {bad} out of range for n = {}",
            network.n()
        )));
    }
    Ok(CascadeEngine::new(network)?.check(candidate))
}

/// The equilibrium with the fewest failures.
pub fn best_case_equilibrium(network: &FinancialNetwork) -> Result<CascadeEquilibrium> {
    Ok(CascadeEngine::new(network)?.best_case())
}

/// The equilibrium with the most failures.
pub fn worst_case_equilibrium(network: &FinancialNetwork) -> Result<CascadeEquilibrium> {
    Ok(CascadeEngine::new(network)?.worst_case())
}

/// Every consistent failure set, found by scanning all `2^n` subsets;
/// sorted by failure count, then lexicographically. Desk-scale oracle,
/// capped at [`ENUMERATION_LIMIT`] institutions.
pub fn enumerate_equilibria(network: &FinancialNetwork) -> Result<Vec<CascadeEquilibrium>> {
    let n = network.n();
    if n > ENUMERATION_LIMIT {
        return Err(Error::TooLarge(format!(
            "enumeration scans 2^n subsets; n = {n} exceeds the cap of {ENUMERATION_LIMIT}"
        )));
    }
    let engine = CascadeEngine::new(network)?;

    // Columns of M = Ĉ (I − C)⁻¹ scaled by failure costs, so that
    // v(F) = base − Σ_{j∈F} cost_col[j].
    let base = engine.market_given_failures(&vec![false; n]);
    let mut cost_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let x = engine.solve(&e);
        cost_cols.push(
            (0..n)
                .map(|i| engine.failure_costs[j] * engine.self_holdings[i] * x[i])
                .collect(),
        );
    }

    let rebuild = |mask: u32| -> Vec<f64> {
        let mut v = base.clone();
        for (j, col) in cost_cols.iter().enumerate() {
            if mask & (1 << j) != 0 {
                for (vi, ci) in v.iter_mut().zip(col) {
                    *vi -= ci;
                }
            }
        }
        v
    };

    let mut out = Vec::new();
    let mut v = base.clone();
    let mut gray_prev: u32 = 0;
    let total: u64 = 1u64 << n;
    for step in 0..total {
        let gray = (step ^ (step >> 1)) as u32;
        if step > 0 {
            let flipped = (gray ^ gray_prev).trailing_zeros() as usize;
            if gray & (1 << flipped) != 0 {
                for i in 0..n {
                    v[i] -= cost_cols[flipped][i];
                }
            } else {
                for i in 0..n {
                    v[i] += cost_cols[flipped][i];
                }
            }
            // Periodic re-sync bounds incremental rounding drift.
            if step % 4096 == 0 {
                v = rebuild(gray);
            }
        }
        gray_prev = gray;

        let consistent = (0..n).all(|i| (v[i] < engine.thresholds[i]) == (gray & (1 << i) != 0));
        if consistent {
            let failed: BTreeSet<usize> = (0..n).filter(|i| gray & (1 << i) != 0).collect();
            let market = rebuild(gray);
            let penalties = (0..n)
                .map(|i| {
                    if failed.contains(&i) {
                        engine.failure_costs[i]
                    } else {
                        0.0
                    }
                })
                .collect();
            out.push(CascadeEquilibrium {
                failed,
                market,
                penalties,
            });
        }
    }

    out.sort_by(|a, b| {
        a.failure_count()
            .cmp(&b.failure_count())
            .then_with(|| a.failed.cmp(&b.failed))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::valuation::market_values;

    #[test]
    fn mutual_pair_empty_set_is_an_equilibrium() {
        let net = fixtures::mutual_half_ownership();
        match check_equilibrium(&net, &BTreeSet::new()).unwrap() {
            EquilibriumCheck::Consistent(eq) => {
                assert!(eq.failed.is_empty());
                assert!((eq.market[0] - 1.0).abs() < 1e-12);
                assert!((eq.market[1] - 1.0).abs() < 1e-12);
            }
            other => panic!("expected consistency, got {other:?}"),
        }
    }

    #[test]
    fn mutual_pair_total_failure_is_an_equilibrium() {
        let net = fixtures::mutual_half_ownership();
        let candidate: BTreeSet<usize> = [0, 1].into();
        match check_equilibrium(&net, &candidate).unwrap() {
            EquilibriumCheck::Consistent(eq) => {
                assert_eq!(eq.failed, candidate);
                assert!(eq.market[0].abs() < 1e-12);
                assert!(eq.market[1].abs() < 1e-12);
                assert_eq!(eq.penalties, vec![1.0, 1.0]);
            }
            other => panic!("expected consistency, got {other:?}"),
        }
    }

    #[test]
    fn mutual_pair_single_failure_is_inconsistent() {
        let net = fixtures::mutual_half_ownership();
        let candidate: BTreeSet<usize> = [0].into();
        match check_equilibrium(&net, &candidate).unwrap() {
            EquilibriumCheck::Inconsistent { mismatched, .. } => {
                // Bank 2's value drops below threshold but it is not in the set.
                assert_eq!(mismatched, vec![1]);
            }
            other => panic!("expected inconsistency, got {other:?}"),
        }
    }

    #[test]
    fn mutual_pair_enumeration_finds_exactly_two() {
        let net = fixtures::mutual_half_ownership();
        let all = enumerate_equilibria(&net).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].failure_count(), 0);
        assert_eq!(all[1].failure_count(), 2);
    }

    #[test]
    fn mutual_pair_best_and_worst_cases() {
        let net = fixtures::mutual_half_ownership();
        let best = best_case_equilibrium(&net).unwrap();
        assert!(best.failed.is_empty());
        let worst = worst_case_equilibrium(&net).unwrap();
        assert_eq!(worst.failed, [0, 1].into());
        assert!(worst.market.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn raised_thresholds_cascade_to_total_failure() {
        let net = fixtures::mutual_half_ownership().with_thresholds(vec![1.5, 1.5]);
        let best = best_case_equilibrium(&net).unwrap();
        assert_eq!(best.failed, [0, 1].into());
        assert!(best.market.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn inactive_thresholds_reduce_to_failure_free_valuation() {
        let net = fixtures::mutual_half_ownership().with_thresholds(vec![f64::NEG_INFINITY; 2]);
        let best = best_case_equilibrium(&net).unwrap();
        assert!(best.failed.is_empty());
        let free = market_values(&net, &SolverConfig::default()).unwrap();
        for (a, b) in best.market.iter().zip(&free.market) {
            assert!((a - b).abs() < 1e-12);
        }
        let worst = worst_case_equilibrium(&net).unwrap();
        assert!(worst.failed.is_empty());
        assert_eq!(enumerate_equilibria(&net).unwrap().len(), 1);
    }

    #[test]
    fn single_bank_run_has_two_equilibria() {
        let net = fixtures::single_bank_run();
        let all = enumerate_equilibria(&net).unwrap();
        assert_eq!(all.len(), 2);
        let best = best_case_equilibrium(&net).unwrap();
        assert!(best.failed.is_empty());
        assert!((best.market[0] - 1.0).abs() < 1e-12);
        let worst = worst_case_equilibrium(&net).unwrap();
        assert_eq!(worst.failed, [0].into());
        assert!((worst.market[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_penalties_collapse_to_linear_values() {
        let net = fixtures::mutual_half_ownership()
            .with_thresholds(vec![1.5, 1.5])
            .with_failure_costs(vec![0.0, 0.0]);
        let best = best_case_equilibrium(&net).unwrap();
        let worst = worst_case_equilibrium(&net).unwrap();
        let free = market_values(&net, &SolverConfig::default()).unwrap();
        // Both banks sit below threshold, but values stay at the linear solution.
        assert_eq!(best.failed, [0, 1].into());
        assert_eq!(best.failed, worst.failed);
        for (a, b) in best.market.iter().zip(&free.market) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(enumerate_equilibria(&net).unwrap().len(), 1);
    }

    #[test]
    fn best_case_failed_set_rechecks_consistent() {
        let net = fixtures::mutual_half_ownership().with_thresholds(vec![1.5, 1.5]);
        let best = best_case_equilibrium(&net).unwrap();
        match check_equilibrium(&net, &best.failed).unwrap() {
            EquilibriumCheck::Consistent(eq) => assert!(eq.approx_eq(&best)),
            other => panic!("idempotence failed: {other:?}"),
        }
    }

    #[test]
    fn enumeration_cap_enforced() {
        let c = SparseMatrix::zeros(25, 25);
        let d = SparseMatrix::from_entries(25, 1, [(0, 0, 1.0)]).unwrap();
        let net = FinancialNetwork::new(
            c,
            d,
            vec![1.0],
            vec![f64::NEG_INFINITY; 25],
            vec![0.0; 25],
        );
        assert!(matches!(
            enumerate_equilibria(&net),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn candidate_out_of_range_rejected() {
        let net = fixtures::mutual_half_ownership();
        let candidate: BTreeSet<usize> = [5].into();
        assert!(matches!(
            check_equilibrium(&net, &candidate),
            Err(Error::Domain(_))
        ));
    }
}
