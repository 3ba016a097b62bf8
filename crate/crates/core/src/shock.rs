//! Adversarial price-drop search and the biclique reduction.
//!
//! The adversarial question: given a stable network and a total budget on
//! asset price drops, how many institutions can be pushed into failure in
//! the *best-case* (fewest-failures) equilibrium of the shocked network?
//! [`max_failures_exact`] answers it exactly over the discretized shock
//! family `δ_k ∈ {0, granularity, p_k}`, and [`max_failures_greedy`] gives
//! a scalable lower bound.
//!
//! The question is as hard as finding a maximum balanced complete
//! bipartite subgraph (BCBS): [`gen_bcbs_reduction`] turns a bipartite
//! graph into a network of `(2+ℓ)n` institutions in which a budget of
//! `K·ε` at `d = K` can force `(2+ℓ)K` failures whenever the graph has a
//! `K×K` biclique — left banks fail iff their own asset drops by the full
//! `ε`, a right bank fails iff at least `d` of its neighbors fail, and
//! each failed right bank drags its chain of `ℓ` amplifier banks down
//! with it. [`bcbs_exact`] solves small BCBS instances for
//! cross-checking.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cascade::{CascadeEngine, CascadeEquilibrium};
use crate::error::{Error, Result};
use crate::net::{FinancialNetwork, Shock, SparseMatrix, BUDGET_SLACK};

/// Asset cap for the exact shock enumeration.
pub const EXACT_SHOCK_LIMIT: usize = 24;

/// Node cap per side for the exact biclique solver.
pub const BCBS_LIMIT: usize = 16;

/// Relative margin separating "at threshold" from "strictly below" in the
/// generated reduction networks. Failure tests use a strict inequality, so
/// thresholds sit this far above the exact failure values; the margin is
/// far above solver noise and far below any grid step.
pub const THRESHOLD_MARGIN: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Bipartite graphs
// ---------------------------------------------------------------------------

/// Balanced bipartite graph: `n` nodes per side, edges as (left, right)
/// pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl BipartiteGraph {
    pub fn new(n: usize) -> Self {
        BipartiteGraph {
            n,
            edges: BTreeSet::new(),
        }
    }

    pub fn with_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = BipartiteGraph::new(n);
        for (l, r) in edges {
            if l >= n || r >= n {
                return Err(Error::Dimension(format!(
                    "edge ({l}, {r}) out of range for {n} nodes per side"
                )));
            }
            g.edges.insert((l, r));
        }
        Ok(g)
    }

    /// Complete graph `K_{n,n}`.
    pub fn complete(n: usize) -> Self {
        let mut g = BipartiteGraph::new(n);
        for l in 0..n {
            for r in 0..n {
                g.edges.insert((l, r));
            }
        }
        g
    }

    /// Perfect matching: left `i` joined to right `i`.
    pub fn matching(n: usize) -> Self {
        let mut g = BipartiteGraph::new(n);
        for i in 0..n {
            g.edges.insert((i, i));
        }
        g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, left: usize, right: usize) -> bool {
        self.edges.contains(&(left, right))
    }

    pub fn add_edge(&mut self, left: usize, right: usize) {
        assert!(left < self.n && right < self.n, "edge out of range");
        self.edges.insert((left, right));
    }

    /// Γ(l): right-side neighbors of a left node, ascending.
    pub fn neighbors_of_left(&self, left: usize) -> Vec<usize> {
        self.edges
            .range((left, 0)..=(left, self.n.saturating_sub(1)))
            .map(|&(_, r)| r)
            .collect()
    }

    /// Γ(r): left-side neighbors of a right node, ascending.
    pub fn neighbors_of_right(&self, right: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|&&(_, r)| r == right)
            .map(|&(l, _)| l)
            .collect()
    }

    pub fn left_degree(&self, left: usize) -> usize {
        self.neighbors_of_left(left).len()
    }

    pub fn right_degree(&self, right: usize) -> usize {
        self.neighbors_of_right(right).len()
    }

    /// Maximum degree over both sides.
    pub fn max_degree(&self) -> usize {
        (0..self.n)
            .map(|v| self.left_degree(v).max(self.right_degree(v)))
            .max()
            .unwrap_or(0)
    }

    /// Minimum degree over both sides.
    pub fn min_degree(&self) -> usize {
        (0..self.n)
            .map(|v| self.left_degree(v).min(self.right_degree(v)))
            .min()
            .unwrap_or(0)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    n: usize,
    edges: Vec<(usize, usize)>,
}

pub fn graph_from_json(json: &str) -> Result<BipartiteGraph> {
    let file: GraphFile = serde_json::from_str(json).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    BipartiteGraph::with_edges(file.n, file.edges)
}

/// Canonical form: edges sorted and deduplicated.
pub fn graph_to_json(graph: &BipartiteGraph) -> String {
    let file = GraphFile {
        n: graph.n(),
        edges: graph.edges().collect(),
    };
    serde_json::to_string(&file).expect("graph serialization cannot fail")
}

// ---------------------------------------------------------------------------
// Exact BCBS
// ---------------------------------------------------------------------------

/// Largest balanced biclique, with one witness.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BcbsResult {
    pub k: usize,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

/// Finds the largest `K` such that some `K` left nodes and `K` right nodes
/// induce a complete bipartite subgraph. Enumerates left subsets with
/// common-neighborhood pruning; capped at [`BCBS_LIMIT`] nodes per side.
pub fn bcbs_exact(graph: &BipartiteGraph) -> Result<BcbsResult> {
    let n = graph.n();
    if n > BCBS_LIMIT {
        return Err(Error::TooLarge(format!(
            "exact biclique search enumerates 2^n left subsets; n = {n} exceeds {BCBS_LIMIT}"
        )));
    }
    let right_masks: Vec<u32> = (0..n)
        .map(|l| {
            graph
                .neighbors_of_left(l)
                .into_iter()
                .fold(0u32, |m, r| m | (1 << r))
        })
        .collect();

    let mut best = BcbsResult {
        k: 0,
        left: Vec::new(),
        right: Vec::new(),
    };
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    for subset in 1u32..(1u32 << n) {
        let size = subset.count_ones() as usize;
        if size <= best.k {
            continue;
        }
        let mut common = full;
        let mut bits = subset;
        while bits != 0 && common.count_ones() as usize > best.k {
            let l = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            common &= right_masks[l];
        }
        if bits != 0 {
            continue; // pruned: common neighborhood already too small
        }
        let k = size.min(common.count_ones() as usize);
        if k > best.k {
            best = BcbsResult {
                k,
                left: mask_bits(subset).into_iter().take(k).collect(),
                right: mask_bits(common).into_iter().take(k).collect(),
            };
        }
    }

    // The witness must induce a complete bipartite subgraph.
    for &l in &best.left {
        for &r in &best.right {
            assert!(graph.has_edge(l, r), "biclique witness not complete");
        }
    }
    Ok(best)
}

fn mask_bits(mut mask: u32) -> Vec<usize> {
    let mut out = Vec::new();
    while mask != 0 {
        out.push(mask.trailing_zeros() as usize);
        mask &= mask - 1;
    }
    out
}

// ---------------------------------------------------------------------------
// Reduction generator
// ---------------------------------------------------------------------------

/// Knobs for the biclique-to-network reduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReductionParams {
    /// Self-holding floor `r` of the generated institutions.
    pub reserve: f64,
    /// Per-asset drop `ε` that fails a left bank.
    pub epsilon: f64,
    /// Amplifier banks chained behind each right bank (`ℓ`).
    pub chain_length: usize,
    /// Failed-neighbor count `d` at which a right bank fails; also the
    /// number of `ε` drops the intended shock budget funds.
    pub budget_count: usize,
}

impl ReductionParams {
    fn check(&self) -> Result<()> {
        if !(self.reserve > 0.0 && self.reserve < 1.0) {
            return Err(Error::Domain(format!(
                "reserve must lie in (0, 1), got {}",
                self.reserve
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Domain(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if self.budget_count == 0 {
            return Err(Error::Domain("budget count d must be at least 1".into()));
        }
        Ok(())
    }
}

/// Which role an institution index plays in a reduction network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BankRole {
    /// Asset-holding bank for left node `l`.
    Left(usize),
    /// Bank for right node `j`; fails when `d` neighbors fail.
    Right(usize),
    /// Amplifier `level` (1-based) behind right node `right`.
    Chain { right: usize, level: usize },
}

/// A generated reduction network plus the layout needed to interpret
/// equilibria in graph terms.
#[derive(Debug, Clone)]
pub struct ReductionNetwork {
    network: FinancialNetwork,
    graph: BipartiteGraph,
    params: ReductionParams,
    scale: f64,
}

impl ReductionNetwork {
    pub fn network(&self) -> &FinancialNetwork {
        &self.network
    }

    pub fn into_network(self) -> FinancialNetwork {
        self.network
    }

    pub fn graph(&self) -> &BipartiteGraph {
        &self.graph
    }

    pub fn params(&self) -> &ReductionParams {
        &self.params
    }

    /// `N = D_max / (1 − r)`: each right bank owns a `1/N` stake per edge.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn graph_size(&self) -> usize {
        self.graph.n()
    }

    pub fn institution_count(&self) -> usize {
        (2 + self.params.chain_length) * self.graph.n()
    }

    pub fn left_index(&self, l: usize) -> usize {
        l
    }

    pub fn right_index(&self, j: usize) -> usize {
        self.graph.n() + j
    }

    /// Index of chain bank `level ∈ 1..=ℓ` behind right node `j`.
    pub fn chain_index(&self, j: usize, level: usize) -> usize {
        assert!(level >= 1 && level <= self.params.chain_length);
        (1 + level) * self.graph.n() + j
    }

    pub fn role(&self, index: usize) -> BankRole {
        let n = self.graph.n();
        assert!(index < self.institution_count(), "index out of range");
        match index / n {
            0 => BankRole::Left(index),
            1 => BankRole::Right(index - n),
            block => BankRole::Chain {
                right: index % n,
                level: block - 1,
            },
        }
    }

    /// Shock dropping the given left-node assets by `amount` each.
    pub fn shock_dropping(&self, assets: &[usize], amount: f64) -> Shock {
        let mut drops = vec![0.0; self.graph.n()];
        for &a in assets {
            drops[a] = amount;
        }
        let total: f64 = drops.iter().sum();
        Shock::new(drops, total)
    }

    /// Failed institutions of an equilibrium split into graph-level left
    /// and right node sets (chain banks excluded).
    pub fn split_failures(
        &self,
        equilibrium: &CascadeEquilibrium,
    ) -> (BTreeSet<usize>, BTreeSet<usize>) {
        let mut left = BTreeSet::new();
        let mut right = BTreeSet::new();
        for &i in &equilibrium.failed {
            match self.role(i) {
                BankRole::Left(l) => {
                    left.insert(l);
                }
                BankRole::Right(j) => {
                    right.insert(j);
                }
                BankRole::Chain { .. } => {}
            }
        }
        (left, right)
    }

    /// Do the given node sets induce a complete bipartite subgraph?
    pub fn induces_complete_bipartite(
        &self,
        left: &BTreeSet<usize>,
        right: &BTreeSet<usize>,
    ) -> bool {
        left.iter()
            .all(|&l| right.iter().all(|&r| self.graph.has_edge(l, r)))
    }

    /// Every failed right bank must drag its whole chain down with it, and
    /// chain banks must not fail on their own.
    pub fn chain_closure_holds(&self, equilibrium: &CascadeEquilibrium) -> bool {
        let ell = self.params.chain_length;
        for j in 0..self.graph.n() {
            let right_failed = equilibrium.failed.contains(&self.right_index(j));
            for level in 1..=ell {
                let chain_failed = equilibrium.failed.contains(&self.chain_index(j, level));
                if chain_failed != right_failed {
                    return false;
                }
            }
        }
        true
    }

    /// Mechanical check of the two failure-propagation properties:
    ///
    /// 1. if `d` of a right bank's neighbors fail, the right bank fails;
    /// 2. if the total equity drop among its neighbors stays below `d`
    ///    (here: `d−1` full failures plus one half-step partial drop), the
    ///    right bank survives.
    ///
    /// Checks up to `scenario_cap` neighbor subsets per right bank.
    pub fn check_failure_properties(&self, scenario_cap: usize) -> Result<PropertyCheck> {
        let d = self.params.budget_count;
        let eps = self.params.epsilon;
        let mut engine = CascadeEngine::new(&self.network)?;
        let base_prices = self.network.prices().to_vec();
        let mut scenarios = 0usize;

        let mut eval = |prices: &[f64]| -> CascadeEquilibrium {
            let net = self.network.with_prices(prices.to_vec());
            engine.set_asset_values(net.asset_values());
            engine.best_case()
        };

        // Property 1: any d failed neighbors sink the right bank.
        for j in 0..self.graph.n() {
            let neighbors = self.graph.neighbors_of_right(j);
            if neighbors.len() < d {
                continue; // cannot lose d neighbors
            }
            for subset in combinations(&neighbors, d).take(scenario_cap) {
                let mut prices = base_prices.clone();
                for &l in &subset {
                    prices[l] -= eps;
                }
                let eq = eval(&prices);
                scenarios += 1;
                for &l in &subset {
                    if !eq.failed.contains(&self.left_index(l)) {
                        return Ok(PropertyCheck::failed(scenarios, format!(
                            "left bank {l} survived a full ε drop"
                        )));
                    }
                }
                if !eq.failed.contains(&self.right_index(j)) {
                    return Ok(PropertyCheck::failed(scenarios, format!(
                        "right bank {j} survived {d} failed neighbors"
                    )));
                }
            }
        }

        // Property 2: d−1 failures plus a sub-threshold partial drop keep
        // the right bank solvent.
        for j in 0..self.graph.n() {
            let neighbors = self.graph.neighbors_of_right(j);
            if neighbors.is_empty() {
                continue;
            }
            let whole = d.saturating_sub(1).min(neighbors.len());
            let mut prices = base_prices.clone();
            for &l in &neighbors[..whole] {
                prices[l] -= eps;
            }
            if whole < neighbors.len() {
                prices[neighbors[whole]] -= eps / 2.0;
            }
            let eq = eval(&prices);
            scenarios += 1;
            if eq.failed.contains(&self.right_index(j)) {
                return Ok(PropertyCheck::failed(scenarios, format!(
                    "right bank {j} failed on a neighbor drop below d"
                )));
            }
        }

        Ok(PropertyCheck {
            holds: true,
            scenarios,
            counterexample: None,
        })
    }
}

/// Outcome of [`ReductionNetwork::check_failure_properties`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub holds: bool,
    pub scenarios: usize,
    pub counterexample: Option<String>,
}

impl PropertyCheck {
    fn failed(scenarios: usize, why: String) -> Self {
        PropertyCheck {
            holds: false,
            scenarios,
            counterexample: Some(why),
        }
    }
}

/// Lexicographic k-subsets of `items`.
fn combinations<T: Copy>(items: &[T], k: usize) -> impl Iterator<Item = Vec<T>> + '_ {
    let n = items.len();
    let mut indices: Vec<usize> = (0..k).collect();
    let mut done = k > n;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let current: Vec<T> = indices.iter().map(|&i| items[i]).collect();
        // Advance to the next combination.
        let mut i = k;
        loop {
            if i == 0 {
                done = true;
                break;
            }
            i -= 1;
            if indices[i] != i + n - k {
                indices[i] += 1;
                for j in (i + 1)..k {
                    indices[j] = indices[j - 1] + 1;
                }
                break;
            }
        }
        Some(current)
    })
}

/// Builds the reduction network for a bipartite graph.
///
/// Layout: institutions `0..n` are left banks (bank `l` fully owns asset
/// `l`, priced 1), `n..2n` are right banks (owning `1/N` of each left
/// neighbor), and `ℓ` chain blocks follow (each chain bank owns `1−r` of
/// its predecessor). Left banks fail exactly when their asset drops by at
/// least `ε` and their penalty wipes the post-drop value to zero; right
/// and chain banks carry penalties equal to their initial equity, so any
/// failure drives their equity strictly negative and propagates down the
/// chain unconditionally.
pub fn gen_bcbs_reduction(
    graph: &BipartiteGraph,
    params: &ReductionParams,
) -> Result<ReductionNetwork> {
    params.check()?;
    if graph.n() == 0 || graph.edge_count() == 0 {
        return Err(Error::Domain(
            "reduction needs a nonempty bipartite graph".into(),
        ));
    }
    let n = graph.n();
    let ell = params.chain_length;
    let d = params.budget_count;
    let eps = params.epsilon;
    let r = params.reserve;
    let margin = THRESHOLD_MARGIN;

    let max_degree = graph.max_degree() as f64;
    let scale = max_degree / (1.0 - r); // N

    let total = (2 + ell) * n;
    let mut cross = SparseMatrix::zeros(total, total);
    let mut ownership = SparseMatrix::zeros(total, n);
    let mut thresholds = vec![0.0; total];
    let mut costs = vec![0.0; total];

    // Left banks.
    for l in 0..n {
        ownership.set(l, l, 1.0);
        let g = graph.left_degree(l) as f64 / scale;
        // Fails iff its asset drops by (essentially) ε or more.
        thresholds[l] = (1.0 - g) * (1.0 - eps * (1.0 - margin));
        // Wipes the post-drop value: equity becomes exactly 0 at a drop of ε.
        costs[l] = 1.0 - eps;
    }

    // Right banks.
    let right_self = if ell >= 1 { r } else { 1.0 };
    for j in 0..n {
        for l in graph.neighbors_of_right(j) {
            cross.set(n + j, l, 1.0 / scale);
        }
        let h = graph.right_degree(j) as f64;
        // Equity threshold (h − d)/N expressed in market terms, nudged up
        // so that exactly d failed neighbors trip the strict inequality.
        thresholds[n + j] = right_self * (h - d as f64 * (1.0 - margin)) / scale;
        // Initial equity: failure sends equity strictly negative.
        costs[n + j] = h / scale;
    }

    // Chain banks: level k owns 1−r of level k−1 (level 0 = right bank).
    for j in 0..n {
        let h = graph.right_degree(j) as f64;
        for level in 1..=ell {
            let idx = (1 + level) * n + j;
            let pred = level * n + j;
            cross.set(idx, pred, 1.0 - r);
            // Solvent while the predecessor's equity is nonnegative; any
            // failed predecessor has strictly negative equity.
            thresholds[idx] = 0.0;
            costs[idx] = (1.0 - r).powi(level as i32) * h / scale;
        }
    }

    let network = FinancialNetwork::new(cross, ownership, vec![1.0; n], thresholds, costs);
    network.require_valid()?;
    Ok(ReductionNetwork {
        network,
        graph: graph.clone(),
        params: *params,
        scale,
    })
}

// ---------------------------------------------------------------------------
// Shock search
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMethod {
    Exact,
    Greedy,
}

/// Maximal damage found for a shock budget, with the witness that attains it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShockSearchResult {
    pub max_failures: usize,
    pub witness_shock: Shock,
    pub witness_equilibrium: CascadeEquilibrium,
    pub method: SearchMethod,
}

struct ShockSearch<'a> {
    network: &'a FinancialNetwork,
    engine: CascadeEngine,
    /// Asset columns of D as (institution, fraction) lists.
    asset_columns: Vec<Vec<(usize, f64)>>,
    base_asset_values: Vec<f64>,
}

impl<'a> ShockSearch<'a> {
    fn new(network: &'a FinancialNetwork) -> Result<Self> {
        let engine = CascadeEngine::new(network)?;
        let mut asset_columns = vec![Vec::new(); network.m()];
        for (i, k, v) in network.asset_ownership().entries() {
            asset_columns[k].push((i, v));
        }
        Ok(ShockSearch {
            network,
            engine,
            asset_columns,
            base_asset_values: network.asset_values(),
        })
    }

    /// Best-case equilibrium after the given drops.
    fn evaluate(&mut self, drops: &[f64]) -> CascadeEquilibrium {
        let mut dp = self.base_asset_values.clone();
        for (k, &delta) in drops.iter().enumerate() {
            if delta != 0.0 {
                for &(i, frac) in &self.asset_columns[k] {
                    dp[i] -= delta * frac;
                }
            }
        }
        self.engine.set_asset_values(dp);
        self.engine.best_case()
    }

    /// Per-asset drop levels within the discretized family, ascending.
    fn levels(&self, k: usize, granularity: f64) -> Vec<f64> {
        let price = self.network.prices()[k];
        let mut levels = vec![0.0];
        if granularity < price {
            levels.push(granularity);
        }
        if price > 0.0 {
            levels.push(price);
        }
        levels
    }
}

fn check_shock_args(network: &FinancialNetwork, budget: f64, granularity: f64) -> Result<f64> {
    network.require_valid()?;
    if granularity <= 0.0 || !granularity.is_finite() {
        return Err(Error::Domain(format!(
            "granularity must be positive and finite, got {granularity}"
        )));
    }
    if budget < 0.0 || !budget.is_finite() {
        return Err(Error::Domain(format!(
            "budget must be nonnegative and finite, got {budget}"
        )));
    }
    // Budgets beyond the total asset value buy nothing extra.
    let total: f64 = network.prices().iter().sum();
    Ok(budget.min(total))
}

/// Exact maximum of best-case-equilibrium failures over the shock family
/// `{δ : δ_k ∈ {0, granularity, p_k}, Σ δ ≤ budget}`.
///
/// The witness is the first maximizer in depth-first order with per-asset
/// choices ordered (no drop, granularity, full). A budget exceeding `Σ p`
/// is clamped. Capped at [`EXACT_SHOCK_LIMIT`] assets.
pub fn max_failures_exact(
    network: &FinancialNetwork,
    budget: f64,
    granularity: f64,
) -> Result<ShockSearchResult> {
    let budget = check_shock_args(network, budget, granularity)?;
    let m = network.m();
    if m > EXACT_SHOCK_LIMIT {
        return Err(Error::TooLarge(format!(
            "exact search enumerates per-asset drop choices; m = {m} exceeds {EXACT_SHOCK_LIMIT}"
        )));
    }
    let mut search = ShockSearch::new(network)?;
    let slack = BUDGET_SLACK * budget.max(1.0);

    struct Enumeration<'s, 'a> {
        search: &'s mut ShockSearch<'a>,
        granularity: f64,
        slack: f64,
        drops: Vec<f64>,
        best: Option<(usize, Vec<f64>)>,
    }

    impl Enumeration<'_, '_> {
        fn run(&mut self, k: usize, remaining: f64) {
            if k == self.drops.len() {
                let failures = self.search.evaluate(&self.drops).failure_count();
                if self.best.as_ref().is_none_or(|(b, _)| failures > *b) {
                    self.best = Some((failures, self.drops.clone()));
                }
                return;
            }
            for level in self.search.levels(k, self.granularity) {
                if level > remaining + self.slack {
                    continue;
                }
                self.drops[k] = level;
                self.run(k + 1, remaining - level);
            }
            self.drops[k] = 0.0;
        }
    }

    let mut enumeration = Enumeration {
        search: &mut search,
        granularity,
        slack,
        drops: vec![0.0; m],
        best: None,
    };
    enumeration.run(0, budget);
    let (max_failures, best_drops) = enumeration.best.expect("the zero shock is always feasible");

    let witness_equilibrium = search.evaluate(&best_drops);
    Ok(ShockSearchResult {
        max_failures,
        witness_shock: Shock::new(best_drops, budget),
        witness_equilibrium,
        method: SearchMethod::Exact,
    })
}

/// Greedy lower bound on [`max_failures_exact`]: repeatedly applies the
/// drop with the best marginal failures-per-budget, ties broken by lowest
/// asset index then smallest drop. Any leftover budget is spent in a
/// seeded random order, which can only add failures. Deterministic for a
/// fixed seed, and never exceeds the exact optimum.
pub fn max_failures_greedy(
    network: &FinancialNetwork,
    budget: f64,
    granularity: f64,
    seed: u64,
) -> Result<ShockSearchResult> {
    let budget = check_shock_args(network, budget, granularity)?;
    let m = network.m();
    let mut search = ShockSearch::new(network)?;
    let slack = BUDGET_SLACK * budget.max(1.0);

    let mut drops = vec![0.0; m];
    let mut spent = 0.0;
    let mut current = search.evaluate(&drops).failure_count();

    // Moves from the current level to a higher one in the family.
    let upgrades = |search: &ShockSearch, k: usize, current_level: f64| -> Vec<f64> {
        search
            .levels(k, granularity)
            .into_iter()
            .filter(|&l| l > current_level)
            .map(|l| l - current_level)
            .collect::<Vec<f64>>()
    };

    loop {
        let mut best_move: Option<(f64, usize, f64, usize)> = None; // score, asset, amount, failures
        for k in 0..m {
            for amount in upgrades(&search, k, drops[k]) {
                if amount > budget - spent + slack {
                    continue;
                }
                drops[k] += amount;
                let failures = search.evaluate(&drops).failure_count();
                drops[k] -= amount;
                if failures > current {
                    let score = (failures - current) as f64 / amount;
                    let better = match best_move {
                        None => true,
                        Some((s, bk, ba, _)) => {
                            score > s || (score == s && (k, amount) < (bk, ba))
                        }
                    };
                    if better {
                        best_move = Some((score, k, amount, failures));
                    }
                }
            }
        }
        match best_move {
            Some((_, k, amount, failures)) => {
                drops[k] += amount;
                spent += amount;
                current = failures;
            }
            None => break,
        }
    }

    // Leftover budget: drops are monotone, so spending the remainder can
    // only help (it may complete a combination the local scores missed).
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng);
    for k in order {
        for amount in upgrades(&search, k, drops[k]) {
            if amount <= budget - spent + slack {
                drops[k] += amount;
                spent += amount;
                break;
            }
        }
    }

    let witness_equilibrium = search.evaluate(&drops);
    Ok(ShockSearchResult {
        max_failures: witness_equilibrium.failure_count(),
        witness_shock: Shock::new(drops, budget),
        witness_equilibrium,
        method: SearchMethod::Greedy,
    })
}

// ---------------------------------------------------------------------------
// Reduction gap verification
// ---------------------------------------------------------------------------

/// Desk-scale pairing of the biclique solver with the shock search on the
/// generated reduction network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionGapReport {
    /// K* from the exact biclique solver; the reduction uses d = K*.
    pub bcbs_k: usize,
    pub max_failures: usize,
    /// (2 + ℓ)·K*, the failures a K*×K* biclique witness guarantees.
    pub expected_failures: usize,
    pub left_failed: usize,
    pub right_failed: usize,
    pub chain_failed: usize,
    pub meets_lower_bound: bool,
    /// Whether the failed right banks stay within K*.
    pub right_failures_within_bcbs: bool,
    /// Failed (left, right) node sets induce a complete bipartite subgraph.
    pub witness_biclique_complete: bool,
}

/// Computes K*, generates the reduction at `d = K*`, and runs the exact
/// search with budget `K*·ε`. The graph must be small enough for both
/// exhaustive procedures.
pub fn verify_reduction_gap(
    graph: &BipartiteGraph,
    params: &ReductionParams,
) -> Result<ReductionGapReport> {
    let bcbs = bcbs_exact(graph)?;
    if bcbs.k == 0 {
        return Err(Error::Domain(
            "graph has no edges; the reduction is undefined".into(),
        ));
    }
    let tuned = ReductionParams {
        budget_count: bcbs.k,
        ..*params
    };
    let reduction = gen_bcbs_reduction(graph, &tuned)?;
    let budget = bcbs.k as f64 * params.epsilon;
    let result = max_failures_exact(reduction.network(), budget, params.epsilon)?;
    let (left, right) = reduction.split_failures(&result.witness_equilibrium);
    let chain_failed = result.witness_equilibrium.failure_count() - left.len() - right.len();
    let expected = (2 + params.chain_length) * bcbs.k;
    Ok(ReductionGapReport {
        bcbs_k: bcbs.k,
        max_failures: result.max_failures,
        expected_failures: expected,
        left_failed: left.len(),
        right_failed: right.len(),
        chain_failed,
        meets_lower_bound: result.max_failures >= expected,
        right_failures_within_bcbs: right.len() <= bcbs.k,
        witness_biclique_complete: reduction.induces_complete_bipartite(&left, &right),
    })
}
