//! Seeded generators for networks, bipartite graphs, and perturbations.
//!
//! All randomness flows through `ChaCha8Rng`, so identical seeds produce
//! byte-identical artifacts on every platform. Holding weights are dyadic
//! rationals (denominators are powers of two), which keeps column sums
//! exact in floating point: generated asset-ownership columns sum to
//! exactly 1 and cross-holding columns stay strictly below 1 by
//! construction.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::net::{FinancialNetwork, SparseMatrix};
use crate::shock::BipartiteGraph;

/// Parameters for [`random_network`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomNetworkSpec {
    pub n: usize,
    pub m: usize,
    /// Expected fraction of nonzero cross-holdings per column.
    pub density: f64,
    /// Lower bound on every institution's self-holding.
    pub reserve_floor: f64,
    /// Restrict ownership to lower-indexed institutions, making the
    /// holdings graph acyclic.
    pub dag: bool,
    pub seed: u64,
}

impl RandomNetworkSpec {
    fn check(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::Domain(
                "random networks need at least one institution and one asset".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.density) {
            return Err(Error::Domain(format!(
                "density must lie in [0, 1], got {}",
                self.density
            )));
        }
        if !(self.reserve_floor > 0.0 && self.reserve_floor <= 1.0) {
            return Err(Error::Domain(format!(
                "reserve floor must lie in (0, 1], got {}",
                self.reserve_floor
            )));
        }
        Ok(())
    }
}

/// Splits 1.0 into `parts` dyadic pieces. Partial sums stay exact because
/// every piece is a multiple of 2⁻²⁰.
fn dyadic_partition(rng: &mut ChaCha8Rng, parts: usize) -> Vec<f64> {
    assert!(parts >= 1);
    let mut exponents = vec![0u32; 1];
    while exponents.len() < parts {
        let splittable: Vec<usize> = (0..exponents.len())
            .filter(|&i| exponents[i] < 20)
            .collect();
        let &pick = splittable
            .choose(rng)
            .expect("some piece is always splittable");
        exponents[pick] += 1;
        let e = exponents[pick];
        exponents.push(e);
    }
    let mut values: Vec<f64> = exponents.into_iter().map(|e| 0.5f64.powi(e as i32)).collect();
    values.shuffle(rng);
    values
}

/// Dyadic value in [0, limit·(1−reserve_floor)] with denominator 256.
fn dyadic_column_total(rng: &mut ChaCha8Rng, reserve_floor: f64) -> f64 {
    let max_num = ((1.0 - reserve_floor) * 256.0).floor() as u32;
    if max_num == 0 {
        return 0.0;
    }
    rng.random_range(0..=max_num) as f64 / 256.0
}

/// Generates a valid network: cross-holding columns sum to at most
/// `1 − reserve_floor`, asset ownership is column-stochastic, prices are
/// dyadic values in [1/4, 2], thresholds are `-inf`, and failure costs are
/// zero. Identical seeds give identical networks.
pub fn random_network(spec: &RandomNetworkSpec) -> Result<FinancialNetwork> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n;
    let m = spec.m;

    let mut cross = SparseMatrix::zeros(n, n);
    for j in 0..n {
        let candidates: Vec<usize> = if spec.dag {
            (0..j).collect()
        } else {
            (0..n).filter(|&i| i != j).collect()
        };
        let owners: Vec<usize> = candidates
            .into_iter()
            .filter(|_| rng.random_bool(spec.density))
            .collect();
        if owners.is_empty() {
            continue;
        }
        let total = dyadic_column_total(&mut rng, spec.reserve_floor);
        if total == 0.0 {
            continue;
        }
        let weights = dyadic_partition(&mut rng, owners.len());
        for (i, w) in owners.into_iter().zip(weights) {
            cross.set(i, j, total * w);
        }
    }

    let mut ownership = SparseMatrix::zeros(n, m);
    for k in 0..m {
        let holders = rng.random_range(1..=n.min(3));
        let mut pool: Vec<usize> = (0..n).collect();
        pool.shuffle(&mut rng);
        let weights = dyadic_partition(&mut rng, holders);
        for (i, w) in pool.into_iter().take(holders).zip(weights) {
            ownership.set(i, k, w);
        }
    }

    let prices: Vec<f64> = (0..m)
        .map(|_| (64 + rng.random_range(0..=448u32)) as f64 / 256.0)
        .collect();

    let network = FinancialNetwork::new(
        cross,
        ownership,
        prices,
        vec![f64::NEG_INFINITY; n],
        vec![0.0; n],
    );
    debug_assert!(network.validate().is_empty());
    Ok(network)
}

/// Balanced bipartite graph in which every pair is an edge independently
/// with probability `edge_prob`.
pub fn random_bipartite_graph(n: usize, edge_prob: f64, seed: u64) -> BipartiteGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut graph = BipartiteGraph::new(n);
    for l in 0..n {
        for r in 0..n {
            if rng.random_bool(edge_prob) {
                graph.add_edge(l, r);
            }
        }
    }
    graph
}

/// Adds random edges until every vertex on both sides has degree at least
/// `min_degree` (which must be at most `n`).
pub fn ensure_min_degree(graph: &mut BipartiteGraph, min_degree: usize, seed: u64) {
    let n = graph.n();
    assert!(min_degree <= n, "cannot reach degree {min_degree} with {n} nodes");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for l in 0..n {
        while graph.left_degree(l) < min_degree {
            let candidates: Vec<usize> =
                (0..n).filter(|&r| !graph.has_edge(l, r)).collect();
            let &r = candidates.choose(&mut rng).expect("degree below n leaves room");
            graph.add_edge(l, r);
        }
    }
    for r in 0..n {
        while graph.right_degree(r) < min_degree {
            let candidates: Vec<usize> =
                (0..n).filter(|&l| !graph.has_edge(l, r)).collect();
            let &l = candidates.choose(&mut rng).expect("degree below n leaves room");
            graph.add_edge(l, r);
        }
    }
}

/// Randomly shifts holding mass within one column (between two holders,
/// or between a holder and the external shareholders), keeping the network
/// valid. The move is at most `eps / 2`, so the ℓ1 operator-norm change
/// including the induced `Ĉ` change is at most `eps`.
pub fn random_column_perturbation(
    network: &FinancialNetwork,
    eps: f64,
    seed: u64,
) -> Result<FinancialNetwork> {
    network.require_valid()?;
    if eps <= 0.0 || !eps.is_finite() {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = network.n();
    let delta = eps / 2.0;

    for _ in 0..200 {
        let j = rng.random_range(0..n);
        let column: Vec<(usize, f64)> = network
            .cross_holdings()
            .entries()
            .filter(|&(_, col, _)| col == j)
            .map(|(i, _, v)| (i, v))
            .collect();
        let column_sum: f64 = column.iter().map(|(_, v)| v).sum();

        let mut cross = network.cross_holdings().clone();
        if column.len() >= 2 && rng.random_bool(0.5) {
            // Move mass between two holders; column sum (and Ĉ) unchanged.
            let a = rng.random_range(0..column.len());
            let mut b = rng.random_range(0..column.len() - 1);
            if b >= a {
                b += 1;
            }
            let (from, from_v) = column[a];
            let (to, to_v) = column[b];
            let move_amount = delta.min(from_v).min(1.0 - to_v);
            if move_amount <= 0.0 {
                continue;
            }
            cross.set(from, j, from_v - move_amount);
            cross.set(to, j, to_v + move_amount);
        } else {
            // Exchange mass with the external shareholders: the column sum
            // moves, which shows up as an equal change in Ĉ[j][j].
            let i = match column.choose(&mut rng) {
                Some(&(i, _)) if rng.random_bool(0.7) => i,
                _ => {
                    let mut i = rng.random_range(0..n - 1);
                    if i >= j {
                        i += 1;
                    }
                    if i == j {
                        continue;
                    }
                    i
                }
            };
            let current = cross.get(i, j);
            if rng.random_bool(0.5) && current > 0.0 {
                cross.set(i, j, current - delta.min(current));
            } else {
                let headroom = ((1.0 - column_sum) / 2.0).min(1.0 - current);
                let move_amount = delta.min(headroom);
                if move_amount <= 0.0 {
                    continue;
                }
                cross.set(i, j, current + move_amount);
            }
        }
        let perturbed = network.with_cross_holdings(cross);
        if perturbed.validate().is_empty() {
            return Ok(perturbed);
        }
    }
    Err(Error::Domain(
        "no valid perturbation found for this network".into(),
    ))
}

/// Changes exactly one cross-holding entry by at most `eps`, keeping the
/// network valid. With `respect_order` the entry keeps the owner index
/// below the owned index, so networks generated with `dag = true` stay
/// acyclic. Returns the perturbed network and the actual edge change.
pub fn random_edge_perturbation(
    network: &FinancialNetwork,
    eps: f64,
    seed: u64,
    respect_order: bool,
) -> Result<(FinancialNetwork, f64)> {
    network.require_valid()?;
    if eps <= 0.0 || !eps.is_finite() {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    let n = network.n();
    if n < 2 {
        return Err(Error::Domain("need at least two institutions".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let column_sums = network.cross_holdings().column_sums();

    for _ in 0..200 {
        let (i, j) = if respect_order {
            let j = rng.random_range(1..n);
            (rng.random_range(0..j), j)
        } else {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            (i, j)
        };
        let current = network.cross_holdings().get(i, j);
        let increase = rng.random_bool(0.5);
        let delta = if increase {
            eps.min((1.0 - column_sums[j]) / 2.0).min(1.0 - current)
        } else {
            eps.min(current)
        };
        if delta <= 0.0 {
            continue;
        }
        let mut cross = network.cross_holdings().clone();
        cross.set(i, j, if increase { current + delta } else { current - delta });
        let perturbed = network.with_cross_holdings(cross);
        if perturbed.validate().is_empty() {
            return Ok((perturbed, delta));
        }
    }
    Err(Error::Domain(
        "no valid edge perturbation found for this network".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::network_to_json;
    use crate::sensitivity::is_acyclic;

    fn spec(seed: u64, dag: bool) -> RandomNetworkSpec {
        RandomNetworkSpec {
            n: 12,
            m: 4,
            density: 0.4,
            reserve_floor: 0.2,
            dag,
            seed,
        }
    }

    #[test]
    fn identical_seeds_give_byte_identical_networks() {
        let a = random_network(&spec(1, false)).unwrap();
        let b = random_network(&spec(1, false)).unwrap();
        assert_eq!(network_to_json(&a), network_to_json(&b));
        let c = random_network(&spec(2, false)).unwrap();
        assert_ne!(network_to_json(&a), network_to_json(&c));
    }

    #[test]
    fn generated_networks_validate_with_floor_and_stochastic_ownership() {
        for seed in 0..50 {
            let net = random_network(&spec(seed, false)).unwrap();
            assert!(net.validate().is_empty(), "seed {seed}");
            assert!(net.reserve().unwrap() >= 0.2);
            for sum in net.asset_ownership().column_sums() {
                assert_eq!(sum, 1.0, "seed {seed}");
            }
        }
    }

    #[test]
    fn dag_mode_generates_acyclic_networks() {
        for seed in 0..20 {
            let net = random_network(&spec(seed, true)).unwrap();
            assert!(is_acyclic(&net).unwrap().acyclic, "seed {seed}");
        }
    }

    #[test]
    fn infeasible_specs_rejected() {
        let mut bad = spec(0, false);
        bad.reserve_floor = 0.0;
        assert!(random_network(&bad).is_err());
        bad = spec(0, false);
        bad.density = 1.5;
        assert!(random_network(&bad).is_err());
        bad = spec(0, false);
        bad.n = 0;
        assert!(random_network(&bad).is_err());
    }

    #[test]
    fn min_degree_patching() {
        let mut graph = random_bipartite_graph(6, 0.2, 9);
        ensure_min_degree(&mut graph, 2, 10);
        assert!(graph.min_degree() >= 2);
    }

    #[test]
    fn column_perturbation_keeps_validity_and_shared_fields() {
        for seed in 0..30 {
            let net = random_network(&spec(seed, false)).unwrap();
            let perturbed = random_column_perturbation(&net, 0.1, seed ^ 0xabc).unwrap();
            assert!(perturbed.validate().is_empty());
            assert_eq!(net.asset_ownership(), perturbed.asset_ownership());
            assert_eq!(net.prices(), perturbed.prices());
            let change = net
                .cross_holdings()
                .difference(perturbed.cross_holdings())
                .unwrap()
                .l1_operator_norm();
            assert!(change > 0.0 && change <= 0.1 + 1e-15, "seed {seed}: {change}");
        }
    }

    #[test]
    fn edge_perturbation_changes_one_entry() {
        let net = random_network(&spec(4, true)).unwrap();
        let (perturbed, delta) = random_edge_perturbation(&net, 0.05, 99, true).unwrap();
        assert!(delta > 0.0 && delta <= 0.05);
        let diff = net
            .cross_holdings()
            .difference(perturbed.cross_holdings())
            .unwrap();
        assert_eq!(diff.nnz(), 1);
        assert!(is_acyclic(&perturbed).unwrap().acyclic);
    }
}
