//! Failure-free valuation.
//!
//! Three routes compute the same quantities and cross-check one another:
//!
//! 1. **Closed form** — solve `(I − C) V = D p` directly, then
//!    `v = Ĉ V`. Column sums of `C` strictly below one make `I − C`
//!    invertible, so a dense factorization always succeeds on a valid
//!    network; above [`DENSE_LIMIT`] institutions the series route is used
//!    instead.
//! 2. **Neumann series** — `(I − C)⁻¹ = Σ_k C^k`, truncated once the next
//!    term's ℓ1 norm falls below `tolerance · ‖D p‖₁`. Because
//!    `‖C^k D p‖₁ ≤ (1 − r)^k ‖D p‖₁`, the truncation depth is at most
//!    `ceil(log tolerance / log(1 − r))`.
//! 3. **Flow process** — the augmented column-stochastic system
//!    `A = [[C, 0], [Ĉ, I]]` moves each institution's value to its
//!    stakeholders one step at a time; the limit deposits everything with
//!    the external shareholders and the shareholder half of the state is
//!    exactly the market valuation. Requires `D` column-stochastic, and
//!    conserves total ℓ1 mass at every step.
//!
//! Tolerances for the iterative routes are relative to `‖D p‖₁`.

use crate::error::{Error, Result};
use crate::net::{FinancialNetwork, SparseMatrix, ValuationResult};

/// Largest system solved by dense factorization before switching to the
/// series route.
pub const DENSE_LIMIT: usize = 512;

/// Columns of `D` must sum to 1 within this tolerance for the flow route.
const STOCHASTIC_TOL: f64 = 1e-12;

/// Convergence controls for the iterative solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// ℓ1 residual bound, relative to `‖D p‖₁`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-10,
            max_iterations: 1_000_000,
        }
    }
}

impl SolverConfig {
    pub(crate) fn check(&self) -> Result<()> {
        if self.tolerance <= 0.0 || !self.tolerance.is_finite() {
            return Err(Error::Domain(format!(
                "tolerance must be positive and finite, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Domain("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

pub(crate) fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

// ---------------------------------------------------------------------------
// Closed form
// ---------------------------------------------------------------------------

/// Equity values `V = (I − C)⁻¹ D p`.
pub fn equity_values(network: &FinancialNetwork, config: &SolverConfig) -> Result<Vec<f64>> {
    network.require_valid()?;
    config.check()?;
    equity_values_unchecked(network, config)
}

pub(crate) fn equity_values_unchecked(
    network: &FinancialNetwork,
    config: &SolverConfig,
) -> Result<Vec<f64>> {
    let rhs = network.asset_values();
    solve_ownership_system(network.cross_holdings(), &rhs, config)
}

/// Solves `(I − C) x = rhs` for an arbitrary right-hand side.
pub(crate) fn solve_ownership_system(
    cross: &SparseMatrix,
    rhs: &[f64],
    config: &SolverConfig,
) -> Result<Vec<f64>> {
    let n = cross.rows();
    if n <= DENSE_LIMIT {
        let factors = linalg::LuFactors::of_identity_minus(cross)
            .ok_or_else(|| Error::Domain("singular system: I - C is not invertible".into()))?;
        let mut x = factors.solve(rhs);
        // One step of iterative refinement if the residual is out of spec.
        let scale = l1(rhs);
        if residual_norm(cross, &x, rhs) > config.tolerance * scale {
            let r = residual(cross, &x, rhs);
            let dx = factors.solve(&r);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
            let res = residual_norm(cross, &x, rhs);
            if res > config.tolerance * scale {
                return Err(Error::Convergence {
                    max_iterations: 1,
                    residual: res,
                });
            }
        }
        Ok(x)
    } else {
        series_solve(cross, rhs, config).map(|(x, _)| x)
    }
}

fn residual(cross: &SparseMatrix, x: &[f64], rhs: &[f64]) -> Vec<f64> {
    // rhs − (I − C) x = rhs − x + C x
    let cx = cross.mul_vec(x);
    rhs.iter()
        .zip(x)
        .zip(&cx)
        .map(|((b, xi), ci)| b - xi + ci)
        .collect()
}

fn residual_norm(cross: &SparseMatrix, x: &[f64], rhs: &[f64]) -> f64 {
    l1(&residual(cross, x, rhs))
}

/// Market values `v = Ĉ V` alongside the equity vector.
pub fn market_values(network: &FinancialNetwork, config: &SolverConfig) -> Result<ValuationResult> {
    let equity = equity_values(network, config)?;
    let market = scale_by_self_holdings(network, &equity);
    Ok(ValuationResult { equity, market })
}

pub(crate) fn scale_by_self_holdings(network: &FinancialNetwork, equity: &[f64]) -> Vec<f64> {
    network
        .self_holdings_unchecked()
        .iter()
        .zip(equity)
        .map(|(c, v)| c * v)
        .collect()
}

// ---------------------------------------------------------------------------
// Neumann series
// ---------------------------------------------------------------------------

/// Truncated-series valuation; agrees with [`market_values`] to within
/// about `tolerance / r` in ℓ1.
pub fn neumann_values(network: &FinancialNetwork, config: &SolverConfig) -> Result<ValuationResult> {
    neumann_values_with_depth(network, config).map(|(r, _)| r)
}

/// Same, also reporting the number of series terms summed.
pub fn neumann_values_with_depth(
    network: &FinancialNetwork,
    config: &SolverConfig,
) -> Result<(ValuationResult, usize)> {
    network.require_valid()?;
    config.check()?;
    let rhs = network.asset_values();
    let (equity, depth) = series_solve(network.cross_holdings(), &rhs, config)?;
    let market = scale_by_self_holdings(network, &equity);
    Ok((ValuationResult { equity, market }, depth))
}

/// Sums `Σ_k C^k rhs`, stopping before the first term whose ℓ1 norm is at
/// most `tolerance · ‖rhs‖₁`. Returns the sum and the number of terms kept.
fn series_solve(
    cross: &SparseMatrix,
    rhs: &[f64],
    config: &SolverConfig,
) -> Result<(Vec<f64>, usize)> {
    let scale = l1(rhs);
    if scale == 0.0 {
        return Ok((vec![0.0; rhs.len()], 1));
    }
    let mut sum = rhs.to_vec();
    let mut term = rhs.to_vec();
    let mut depth = 1usize;
    loop {
        let next = cross.mul_vec(&term);
        let norm = l1(&next);
        if norm <= config.tolerance * scale {
            return Ok((sum, depth));
        }
        if depth >= config.max_iterations {
            return Err(Error::Convergence {
                max_iterations: config.max_iterations,
                residual: norm / scale,
            });
        }
        for (s, x) in sum.iter_mut().zip(&next) {
            *s += x;
        }
        term = next;
        depth += 1;
    }
}

// ---------------------------------------------------------------------------
// Flow process
// ---------------------------------------------------------------------------

/// State of the augmented flow `W ← A W` with
/// `A = [[C, 0], [Ĉ, I]]`, split into its institution and shareholder
/// halves. The initial institution half is `D p`; the shareholder half
/// starts at zero and accumulates the market values.
#[derive(Debug, Clone)]
pub struct FlowSystem {
    cross: SparseMatrix,
    self_holdings: Vec<f64>,
    institution: Vec<f64>,
    shareholder: Vec<f64>,
    steps: usize,
}

impl FlowSystem {
    /// Requires a valid network with column-stochastic `D` (every asset
    /// fully owned inside the system), so that total mass is conserved.
    pub fn new(network: &FinancialNetwork) -> Result<Self> {
        network.require_valid()?;
        for (k, sum) in network.asset_ownership().column_sums().iter().enumerate() {
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::Domain(format!(
                    "flow model needs column-stochastic asset ownership; column {k} sums to {sum}"
                )));
            }
        }
        let n = network.n();
        Ok(FlowSystem {
            cross: network.cross_holdings().clone(),
            self_holdings: network.self_holdings_unchecked(),
            institution: network.asset_values(),
            shareholder: vec![0.0; n],
            steps: 0,
        })
    }

    /// One application of `A`: each institution pays its shareholders
    /// their `Ĉ` slice and the remaining value moves along cross-holdings.
    pub fn step(&mut self) {
        for (s, (c, w)) in self
            .shareholder
            .iter_mut()
            .zip(self.self_holdings.iter().zip(&self.institution))
        {
            *s += c * w;
        }
        self.institution = self.cross.mul_vec(&self.institution);
        self.steps += 1;
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn institution(&self) -> &[f64] {
        &self.institution
    }

    pub fn shareholder(&self) -> &[f64] {
        &self.shareholder
    }

    /// ℓ1 mass still held by institutions; decays like `(1 − r)^t`.
    pub fn institution_mass(&self) -> f64 {
        l1(&self.institution)
    }

    pub fn shareholder_mass(&self) -> f64 {
        l1(&self.shareholder)
    }

    /// The explicit `2n×2n` augmented matrix, column-stochastic for valid
    /// networks.
    pub fn augmented_matrix(&self) -> SparseMatrix {
        let n = self.self_holdings.len();
        let mut a = SparseMatrix::zeros(2 * n, 2 * n);
        for (i, j, v) in self.cross.entries() {
            a.set(i, j, v);
        }
        for (j, &c) in self.self_holdings.iter().enumerate() {
            a.set(n + j, j, c);
            a.set(n + j, n + j, 1.0);
        }
        a
    }
}

/// Runs the flow to (approximate) steady state and reads off the market
/// values from the shareholder half.
pub fn flow_values(network: &FinancialNetwork, config: &SolverConfig) -> Result<ValuationResult> {
    config.check()?;
    let mut flow = FlowSystem::new(network)?;
    let scale = flow.institution_mass();
    if scale > 0.0 {
        while flow.institution_mass() > config.tolerance * scale {
            if flow.steps() >= config.max_iterations {
                return Err(Error::Convergence {
                    max_iterations: config.max_iterations,
                    residual: flow.institution_mass() / scale,
                });
            }
            flow.step();
        }
    }
    let market = flow.shareholder().to_vec();
    let equity = market
        .iter()
        .zip(&flow.self_holdings)
        .map(|(v, c)| v / c)
        .collect();
    Ok(ValuationResult { equity, market })
}

// ---------------------------------------------------------------------------
// Dense LU with partial pivoting
// ---------------------------------------------------------------------------

pub(crate) mod linalg {
    use crate::net::SparseMatrix;

    /// LU factorization of `I − C` with partial pivoting, reusable across
    /// right-hand sides.
    pub struct LuFactors {
        n: usize,
        lu: Vec<f64>,
        pivots: Vec<usize>,
    }

    impl LuFactors {
        /// Factors `I − C`; returns `None` if the matrix is numerically
        /// singular (impossible for validated cross-holdings).
        pub fn of_identity_minus(cross: &SparseMatrix) -> Option<Self> {
            let n = cross.rows();
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                a[i * n + i] = 1.0;
            }
            for (i, j, v) in cross.entries() {
                a[i * n + j] -= v;
            }
            Self::factor(a, n)
        }

        fn factor(mut a: Vec<f64>, n: usize) -> Option<Self> {
            let mut pivots = vec![0usize; n];
            for k in 0..n {
                let mut p = k;
                let mut best = a[k * n + k].abs();
                for i in (k + 1)..n {
                    let cand = a[i * n + k].abs();
                    if cand > best {
                        best = cand;
                        p = i;
                    }
                }
                if best == 0.0 {
                    return None;
                }
                pivots[k] = p;
                if p != k {
                    for j in 0..n {
                        a.swap(k * n + j, p * n + j);
                    }
                }
                let inv = 1.0 / a[k * n + k];
                for i in (k + 1)..n {
                    let factor = a[i * n + k] * inv;
                    a[i * n + k] = factor;
                    if factor != 0.0 {
                        for j in (k + 1)..n {
                            a[i * n + j] -= factor * a[k * n + j];
                        }
                    }
                }
            }
            Some(LuFactors { n, lu: a, pivots })
        }

        #[allow(clippy::needless_range_loop)]
        pub fn solve(&self, b: &[f64]) -> Vec<f64> {
            assert_eq!(b.len(), self.n, "right-hand side length mismatch");
            let n = self.n;
            let mut x = b.to_vec();
            for k in 0..n {
                x.swap(k, self.pivots[k]);
                let xk = x[k];
                if xk != 0.0 {
                    for i in (k + 1)..n {
                        x[i] -= self.lu[i * n + k] * xk;
                    }
                }
            }
            for k in (0..n).rev() {
                x[k] /= self.lu[k * n + k];
                let xk = x[k];
                if xk != 0.0 {
                    for i in 0..k {
                        x[i] -= self.lu[i * n + k] * xk;
                    }
                }
            }
            x
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::random::{random_network, RandomNetworkSpec};
    use crate::sensitivity::gen_lower_bound_network;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    /// Independent oracle: iterate the defining fixed point V ← Dp + CV.
    fn substitution_oracle(network: &FinancialNetwork, rounds: usize) -> Vec<f64> {
        let dp = network.asset_values();
        let mut v = dp.clone();
        for _ in 0..rounds {
            let cv = network.cross_holdings().mul_vec(&v);
            v = dp.iter().zip(&cv).map(|(a, b)| a + b).collect();
        }
        v
    }

    #[test]
    fn no_cross_holdings_means_equity_equals_asset_values() {
        let net = fixtures::single_asset_pair();
        let v = equity_values(&net, &cfg()).unwrap();
        assert_eq!(v, net.asset_values());
    }

    #[test]
    fn four_bank_cycle_equity_matches_closed_form() {
        // r = 0.1, ε = 0.1, asset value 1: B₂ = 1 / (r(2−r) + (1−r)ε) = 1/0.28.
        let (net, _) = gen_lower_bound_network(0.1, 0.1, 1.0).unwrap();
        let v = equity_values(&net, &cfg()).unwrap();
        let b2 = 1.0 / 0.28;
        assert!((v[1] - b2).abs() < 1e-12, "B2 = {}", v[1]);
        assert!((v[0] - 0.8 * b2).abs() < 1e-12);
        assert!((v[2] - 0.1 * b2).abs() < 1e-12);
        assert_eq!(v[3], 0.0);
    }

    #[test]
    fn random_network_matches_substitution_oracle() {
        let spec = RandomNetworkSpec {
            n: 6,
            m: 3,
            density: 0.5,
            reserve_floor: 0.2,
            dag: false,
            seed: 7,
        };
        let net = random_network(&spec).unwrap();
        let oracle = substitution_oracle(&net, 10_000);
        let v = equity_values(&net, &cfg()).unwrap();
        let diff = l1(&v.iter().zip(&oracle).map(|(a, b)| a - b).collect::<Vec<_>>());
        assert!(diff < 1e-9, "oracle disagreement {diff}");
    }

    #[test]
    fn single_asset_pair_market_values() {
        let net = fixtures::single_asset_pair();
        let res = market_values(&net, &cfg()).unwrap();
        assert_eq!(res.market, vec![1.0, 0.0]);

        let eps = 0.25;
        let perturbed = fixtures::single_asset_pair_with_stake(eps);
        let res = market_values(&perturbed, &cfg()).unwrap();
        assert!((res.market[0] - (1.0 - eps)).abs() < 1e-15);
        assert!((res.market[1] - eps).abs() < 1e-15);
    }

    #[test]
    fn mutual_pair_market_values_conserve_assets() {
        let net = fixtures::mutual_half_ownership();
        let res = market_values(&net, &cfg()).unwrap();
        // V = (4/3)·[3/2, 3/2] = [2, 2], v = Ĉ V = [1, 1].
        assert!((res.equity[0] - 2.0).abs() < 1e-12);
        assert!((res.equity[1] - 2.0).abs() < 1e-12);
        assert!((res.market[0] - 1.0).abs() < 1e-12);
        assert!((res.market[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equity_residual_is_within_tolerance() {
        let spec = RandomNetworkSpec {
            n: 12,
            m: 4,
            density: 0.4,
            reserve_floor: 0.1,
            dag: false,
            seed: 3,
        };
        let net = random_network(&spec).unwrap();
        let v = equity_values(&net, &cfg()).unwrap();
        let dp = net.asset_values();
        let cv = net.cross_holdings().mul_vec(&v);
        let resid: Vec<f64> = v
            .iter()
            .zip(&dp)
            .zip(&cv)
            .map(|((vi, di), ci)| vi - di - ci)
            .collect();
        assert!(l1(&resid) <= cfg().tolerance * l1(&dp));
    }

    #[test]
    fn neumann_converges_in_one_term_without_cross_holdings() {
        let net = fixtures::single_asset_pair();
        let (res, depth) = neumann_values_with_depth(&net, &cfg()).unwrap();
        assert_eq!(depth, 1);
        assert_eq!(res.market, vec![1.0, 0.0]);
    }

    #[test]
    fn neumann_depth_respects_geometric_bound() {
        // Reserve 0.5 and tolerance 1e-10: 0.5³⁴ < 1e-10, so at most 34 terms.
        let net = fixtures::mutual_half_ownership();
        assert_eq!(net.reserve().unwrap(), 0.5);
        let (res, depth) = neumann_values_with_depth(&net, &cfg()).unwrap();
        assert!(depth <= 34, "depth {depth}");
        let exact = market_values(&net, &cfg()).unwrap();
        let diff: Vec<f64> = res
            .market
            .iter()
            .zip(&exact.market)
            .map(|(a, b)| a - b)
            .collect();
        assert!(l1(&diff) <= 1e-9);
    }

    #[test]
    fn neumann_max_iterations_exceeded() {
        let net = fixtures::mutual_half_ownership();
        let config = SolverConfig {
            tolerance: 1e-10,
            max_iterations: 3,
        };
        match neumann_values(&net, &config) {
            Err(Error::Convergence { max_iterations, .. }) => assert_eq!(max_iterations, 3),
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn flow_matches_closed_form_on_mutual_pair() {
        let net = fixtures::mutual_half_ownership();
        let res = flow_values(&net, &cfg()).unwrap();
        assert!((res.market[0] - 1.0).abs() < 1e-9);
        assert!((res.market[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn flow_initial_state_holds_all_mass() {
        let net = fixtures::mutual_half_ownership();
        let flow = FlowSystem::new(&net).unwrap();
        assert_eq!(flow.steps(), 0);
        assert_eq!(flow.institution_mass(), 2.0);
        assert_eq!(flow.shareholder_mass(), 0.0);
    }

    #[test]
    fn flow_requires_column_stochastic_ownership() {
        // Asset 0 only half-owned: flow model refuses.
        let d = SparseMatrix::from_entries(2, 1, [(0, 0, 0.5)]).unwrap();
        let net = FinancialNetwork::new(
            SparseMatrix::zeros(2, 2),
            d,
            vec![1.0],
            vec![f64::NEG_INFINITY; 2],
            vec![0.0; 2],
        );
        assert!(matches!(flow_values(&net, &cfg()), Err(Error::Domain(_))));
    }

    #[test]
    fn flow_mass_is_conserved_and_decays_geometrically() {
        let spec = RandomNetworkSpec {
            n: 10,
            m: 4,
            density: 0.5,
            reserve_floor: 0.3,
            dag: false,
            seed: 11,
        };
        let net = random_network(&spec).unwrap();
        let total = l1(&net.asset_values());
        let reserve = net.reserve().unwrap();
        let mut flow = FlowSystem::new(&net).unwrap();
        let mut last_inst = flow.institution_mass();
        for t in 1..=60 {
            flow.step();
            let inst = flow.institution_mass();
            let mass = inst + flow.shareholder_mass();
            assert!((mass - total).abs() <= 1e-12 * total, "mass drift at step {t}");
            assert!(inst <= last_inst * (1.0 + 1e-12), "institution mass grew at {t}");
            assert!(
                inst <= (1.0 - reserve).powi(t) * total * (1.0 + 1e-12),
                "decay bound failed at {t}"
            );
            last_inst = inst;
        }
    }

    #[test]
    fn augmented_matrix_is_column_stochastic() {
        let net = fixtures::mutual_half_ownership();
        let flow = FlowSystem::new(&net).unwrap();
        for (j, sum) in flow.augmented_matrix().column_sums().iter().enumerate() {
            assert!((sum - 1.0).abs() <= 1e-12, "column {j} sums to {sum}");
        }
    }

    #[test]
    fn three_routes_agree_on_random_networks() {
        for seed in 0..20 {
            let spec = RandomNetworkSpec {
                n: 8,
                m: 3,
                density: 0.5,
                reserve_floor: 0.15,
                dag: false,
                seed,
            };
            let net = random_network(&spec).unwrap();
            let closed = market_values(&net, &cfg()).unwrap();
            let series = neumann_values(&net, &cfg()).unwrap();
            let flowed = flow_values(&net, &cfg()).unwrap();
            for (a, b) in closed.market.iter().zip(&series.market) {
                assert!((a - b).abs() < 1e-8);
            }
            for (a, b) in closed.market.iter().zip(&flowed.market) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn market_never_exceeds_equity() {
        let spec = RandomNetworkSpec {
            n: 9,
            m: 3,
            density: 0.6,
            reserve_floor: 0.1,
            dag: false,
            seed: 21,
        };
        let net = random_network(&spec).unwrap();
        let res = market_values(&net, &cfg()).unwrap();
        for (v, big_v) in res.market.iter().zip(&res.equity) {
            assert!(*v >= 0.0 && *big_v >= 0.0);
            assert!(v <= big_v);
        }
    }
}
