//! Sensitivity of market values to cross-holding changes.
//!
//! For two networks over the same assets whose holdings differ by `ε` in
//! the ℓ1 operator norm (max absolute column sum, counting both the change
//! in `C` and the induced change in `Ĉ`), the market valuations satisfy
//!
//! ```text
//! ‖v − ṽ‖₁ ≤ min(ε / r, 2) · ‖D p‖₁
//! ```
//!
//! where `r` is the smaller of the two networks' reserves. The bound is
//! essentially tight: [`gen_lower_bound_network`] builds a four-bank cycle
//! where moving a single link of weight `ε` produces an ℓ1 gap of at least
//! `ε·v / (r + (1−r)ε/2)`. In acyclic networks no such amplification is
//! possible — every equity value is capped by `‖p‖₁`, so a single-edge
//! change of `ε` moves no market value by more than `ε‖p‖₁`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::net::{serialize_dec, FinancialNetwork, SparseMatrix};
use crate::valuation::{equity_values, l1, market_values, SolverConfig};

/// Slack used when the reports assert the analytic bounds.
pub const BOUND_SLACK: f64 = 1e-9;

/// Measured versus worst-case change between two networks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationReport {
    /// ‖C − C̃‖ + ‖Ĉ − Ĉ̃‖ in the ℓ1 operator norm.
    #[serde(serialize_with = "serialize_dec")]
    pub epsilon: f64,
    /// Minimum self-holding across both networks.
    #[serde(serialize_with = "serialize_dec")]
    pub reserve: f64,
    /// ‖v − ṽ‖₁.
    #[serde(serialize_with = "serialize_dec")]
    pub measured: f64,
    /// min(ε/r, 2) · ‖D p‖₁.
    #[serde(serialize_with = "serialize_dec")]
    pub upper_bound: f64,
    /// measured / ‖D p‖₁.
    #[serde(serialize_with = "serialize_dec")]
    pub ratio: f64,
}

/// Compares market valuations of a network and a perturbed variant sharing
/// `n`, `m`, `D`, and `p`.
pub fn perturbation_report(
    network: &FinancialNetwork,
    perturbed: &FinancialNetwork,
    config: &SolverConfig,
) -> Result<PerturbationReport> {
    network.require_valid()?;
    perturbed.require_valid()?;
    if network.n() != perturbed.n() || network.m() != perturbed.m() {
        return Err(Error::Dimension(format!(
            "networks differ in shape: {}x{} vs {}x{}",
            network.n(),
            network.m(),
            perturbed.n(),
            perturbed.m()
        )));
    }
    if network.asset_ownership() != perturbed.asset_ownership() {
        return Err(Error::Dimension(
            "perturbation must leave asset ownership unchanged".into(),
        ));
    }
    if network.prices() != perturbed.prices() {
        return Err(Error::Dimension(
            "perturbation must leave prices unchanged".into(),
        ));
    }

    let holding_change = network
        .cross_holdings()
        .difference(perturbed.cross_holdings())?
        .l1_operator_norm();
    let self_a = network.self_holdings_unchecked();
    let self_b = perturbed.self_holdings_unchecked();
    let self_change = self_a
        .iter()
        .zip(&self_b)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let epsilon = holding_change + self_change;

    let reserve = self_a
        .into_iter()
        .chain(self_b)
        .fold(f64::INFINITY, f64::min);

    let v = market_values(network, config)?.market;
    let v_tilde = market_values(perturbed, config)?.market;
    let measured = v
        .iter()
        .zip(&v_tilde)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>();

    let asset_norm = l1(&network.asset_values());
    let upper_bound = sensitivity_upper_bound(epsilon, reserve, asset_norm)?;
    let ratio = if asset_norm > 0.0 {
        measured / asset_norm
    } else {
        0.0
    };
    Ok(PerturbationReport {
        epsilon,
        reserve,
        measured,
        upper_bound,
        ratio,
    })
}

/// `min(ε/r, 2) · norm`: the worst-case ℓ1 change in market values for a
/// holdings change of `ε` at reserve `r`.
pub fn sensitivity_upper_bound(epsilon: f64, reserve: f64, asset_value_norm: f64) -> Result<f64> {
    if epsilon < 0.0 || !epsilon.is_finite() {
        return Err(Error::Domain(format!(
            "epsilon must be finite and nonnegative, got {epsilon}"
        )));
    }
    if reserve.is_nan() || reserve <= 0.0 || reserve > 1.0 {
        return Err(Error::Domain(format!(
            "reserve must lie in (0, 1], got {reserve}"
        )));
    }
    if asset_value_norm < 0.0 || !asset_value_norm.is_finite() {
        return Err(Error::Domain(format!(
            "asset value norm must be finite and nonnegative, got {asset_value_norm}"
        )));
    }
    Ok((epsilon / reserve).min(2.0) * asset_value_norm)
}

// ---------------------------------------------------------------------------
// Acyclicity
// ---------------------------------------------------------------------------

/// Result of the ownership-cycle check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Acyclicity {
    pub acyclic: bool,
    /// When acyclic: `layers[i]` is 0 for institutions that own nothing
    /// and otherwise one more than the deepest institution they own.
    pub layers: Option<Vec<usize>>,
}

/// Checks whether the holdings graph (an edge wherever `C[i][j] > 0`,
/// meaning `i` owns part of `j`) is free of cycles, and organizes the
/// institutions into layers when it is.
pub fn is_acyclic(network: &FinancialNetwork) -> Result<Acyclicity> {
    network.require_valid()?;
    let n = network.n();
    let mut owned: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut owners: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, v) in network.cross_holdings().entries() {
        if v > 0.0 {
            owned[i].push(j);
            owners[j].push(i);
        }
    }
    let mut remaining: Vec<usize> = owned.iter().map(Vec::len).collect();
    let mut layers = vec![0usize; n];
    let mut queue: Vec<usize> = (0..n).filter(|&i| remaining[i] == 0).collect();
    let mut processed = 0;
    while let Some(i) = queue.pop() {
        processed += 1;
        for &k in &owners[i] {
            layers[k] = layers[k].max(layers[i] + 1);
            remaining[k] -= 1;
            if remaining[k] == 0 {
                queue.push(k);
            }
        }
    }
    if processed == n {
        Ok(Acyclicity {
            acyclic: true,
            layers: Some(layers),
        })
    } else {
        Ok(Acyclicity {
            acyclic: false,
            layers: None,
        })
    }
}

/// Equity cap in acyclic networks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquityBoundReport {
    #[serde(serialize_with = "serialize_dec")]
    pub max_equity: f64,
    /// ‖p‖₁, the cap.
    #[serde(serialize_with = "serialize_dec")]
    pub asset_norm: f64,
    /// `asset_norm + slack − max_equity`; nonnegative when the bound holds.
    #[serde(serialize_with = "serialize_dec")]
    pub slack: f64,
    pub holds: bool,
}

/// Verifies that no equity value exceeds `‖p‖₁` on an acyclic network.
/// Errors on cyclic input.
pub fn acyclic_equity_bound_check(
    network: &FinancialNetwork,
    config: &SolverConfig,
) -> Result<EquityBoundReport> {
    if !is_acyclic(network)?.acyclic {
        return Err(Error::Domain(
            "equity bound applies to acyclic networks only".into(),
        ));
    }
    let equity = equity_values(network, config)?;
    let max_equity = equity.into_iter().fold(0.0, f64::max);
    let asset_norm = l1(network.prices());
    Ok(EquityBoundReport {
        max_equity,
        asset_norm,
        slack: asset_norm + BOUND_SLACK - max_equity,
        holds: max_equity <= asset_norm + BOUND_SLACK,
    })
}

// ---------------------------------------------------------------------------
// Tight lower-bound construction
// ---------------------------------------------------------------------------

/// Builds the four-bank pair showing the `ε/r` sensitivity is achievable.
///
/// Banks 1 and 2 hold most of each other (`1−r` and `1−r−ε`), bank 2 owns
/// the single asset of value `v`, and a link of weight `ε` points from
/// bank 2 to bank 3. The perturbed network moves that link to bank 4.
/// Both banks 2's equity equals `v / (r(2−r) + (1−r)ε)`, so the swap moves
/// `2ε·B₂ ≥ ε·v / (r + (1−r)ε/2)` of ℓ1 market value while the holdings
/// change measures `2ε`.
///
/// Read multiplicatively: the gap-to-ε ratio `v / (r + (1−r)ε/2)` is
/// unbounded as `r` shrinks, so for any target amplification `A` a reserve
/// near `v/A` turns an `ε` holdings change into roughly `A·ε` of market
/// value movement. No separate construction is needed for that reading.
pub fn gen_lower_bound_network(
    reserve: f64,
    epsilon: f64,
    asset_value: f64,
) -> Result<(FinancialNetwork, FinancialNetwork)> {
    if reserve.is_nan() || reserve <= 0.0 || reserve >= 1.0 {
        return Err(Error::Domain(format!(
            "reserve must lie in (0, 1), got {reserve}"
        )));
    }
    if epsilon.is_nan() || epsilon <= 0.0 || epsilon > 1.0 - reserve {
        return Err(Error::Domain(format!(
            "epsilon must lie in (0, 1 - r], got {epsilon} with r = {reserve}"
        )));
    }
    if asset_value <= 0.0 || !asset_value.is_finite() {
        return Err(Error::Domain(format!(
            "asset value must be positive and finite, got {asset_value}"
        )));
    }

    let build = |third_bank: usize| -> FinancialNetwork {
        let mut c = SparseMatrix::zeros(4, 4);
        let back_edge = 1.0 - reserve - epsilon;
        if back_edge > 0.0 {
            c.set(0, 1, back_edge); // B₁ owns 1−r−ε of B₂
        }
        c.set(1, 0, 1.0 - reserve); // B₂ owns 1−r of B₁
        c.set(third_bank, 1, epsilon); // the movable ε link out of B₂
        let mut d = SparseMatrix::zeros(4, 1);
        d.set(1, 0, 1.0); // B₂ owns the asset
        FinancialNetwork::new(
            c,
            d,
            vec![asset_value],
            vec![f64::NEG_INFINITY; 4],
            vec![0.0; 4],
        )
    };
    Ok((build(2), build(3)))
}
