//! Small canonical networks used by tests, docs, and the CLI examples.

use crate::net::{FinancialNetwork, SparseMatrix};

/// Two banks, one asset fully owned by bank 0, no cross-holdings:
/// `v = [1, 0]`.
pub fn single_asset_pair() -> FinancialNetwork {
    let cross = SparseMatrix::zeros(2, 2);
    let mut ownership = SparseMatrix::zeros(2, 1);
    ownership.set(0, 0, 1.0);
    FinancialNetwork::new(
        cross,
        ownership,
        vec![1.0],
        vec![f64::NEG_INFINITY; 2],
        vec![0.0; 2],
    )
}

/// Same, except bank 1 now owns an `eps` stake of bank 0, shifting the
/// market values to `[1 − ε, ε]`.
pub fn single_asset_pair_with_stake(eps: f64) -> FinancialNetwork {
    let mut cross = SparseMatrix::zeros(2, 2);
    cross.set(1, 0, eps);
    let mut ownership = SparseMatrix::zeros(2, 1);
    ownership.set(0, 0, 1.0);
    FinancialNetwork::new(
        cross,
        ownership,
        vec![1.0],
        vec![f64::NEG_INFINITY; 2],
        vec![0.0; 2],
    )
}

/// Two banks holding half of each other, each fully owning one unit
/// asset, thresholds 1 and failure costs 1. Has exactly two equilibria:
/// nobody fails (`v = [1, 1]`) and everybody fails (`v = [0, 0]`).
pub fn mutual_half_ownership() -> FinancialNetwork {
    let mut cross = SparseMatrix::zeros(2, 2);
    cross.set(0, 1, 0.5);
    cross.set(1, 0, 0.5);
    let mut ownership = SparseMatrix::zeros(2, 2);
    ownership.set(0, 0, 1.0);
    ownership.set(1, 1, 1.0);
    FinancialNetwork::new(
        cross,
        ownership,
        vec![1.0, 1.0],
        vec![1.0, 1.0],
        vec![1.0, 1.0],
    )
}

/// One bank, one unit asset, threshold strictly between the sound value
/// and the post-penalty value (`p > v̲ > p − β`): a textbook bank run with
/// two consistent valuations, `v = 1` and `v = 0.5`.
pub fn single_bank_run() -> FinancialNetwork {
    let cross = SparseMatrix::zeros(1, 1);
    let mut ownership = SparseMatrix::zeros(1, 1);
    ownership.set(0, 0, 1.0);
    FinancialNetwork::new(cross, ownership, vec![1.0], vec![0.75], vec![0.5])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_validate() {
        assert!(single_asset_pair().validate().is_empty());
        assert!(single_asset_pair_with_stake(0.1).validate().is_empty());
        assert!(mutual_half_ownership().validate().is_empty());
        assert!(single_bank_run().validate().is_empty());
    }
}
