//! Network data types, validation, and the JSON interchange format.
//!
//! Matrices are stored sparsely as `(row, col, value)` entries; the
//! canonical file format serializes every value as a decimal string so
//! that files are bit-exact across platforms. Validation never panics on
//! bad data: [`FinancialNetwork::validate`] returns the full list of
//! violations and the remaining modules require an empty list before
//! computing anything.
//!
//! Conventions: `C[i][j]` is the fraction of institution `j` owned by
//! institution `i`, the diagonal of `C` is zero, and each column sum is
//! strictly below one. The complement `Ĉ[j][j] = 1 − Σ_i C[i][j]` is the
//! self-holding of `j`; its minimum over institutions is the network
//! reserve `r`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Relative slack used when checking shock budgets and price caps.
/// Sums of drops assembled from grid steps can be off by a few ulps.
pub(crate) const BUDGET_SLACK: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Violations
// ---------------------------------------------------------------------------

/// One failed validation constraint: field, index path, and what was violated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: &'static str,
    pub index: Vec<usize>,
    pub constraint: String,
}

impl Violation {
    fn new(field: &'static str, index: Vec<usize>, constraint: impl Into<String>) -> Self {
        Violation {
            field,
            index,
            constraint: constraint.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.index.is_empty() {
            write!(f, "{}: {}", self.field, self.constraint)
        } else {
            let idx: Vec<String> = self.index.iter().map(|i| i.to_string()).collect();
            write!(f, "{}[{}]: {}", self.field, idx.join("]["), self.constraint)
        }
    }
}

// ---------------------------------------------------------------------------
// SparseMatrix
// ---------------------------------------------------------------------------

/// Nonnegative sparse matrix keyed by `(row, col)`, deterministic iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    entries: BTreeMap<(usize, usize), f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseMatrix {
            rows,
            cols,
            entries: BTreeMap::new(),
        }
    }

    /// Builds from an entry list, rejecting out-of-range and duplicate indices.
    pub fn from_entries<I>(rows: usize, cols: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut m = SparseMatrix::zeros(rows, cols);
        for (i, j, v) in entries {
            if i >= rows || j >= cols {
                return Err(Error::Dimension(format!(
                    "entry ({i}, {j}) out of range for a {rows}x{cols} matrix"
                )));
            }
            if m.entries.insert((i, j), v).is_some() {
                return Err(Error::Dimension(format!("duplicate entry at ({i}, {j})")));
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.get(&(i, j)).copied().unwrap_or(0.0)
    }

    /// Sets an entry; a zero value removes it. Indices must be in range.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(i < self.rows && j < self.cols, "index out of range");
        if value == 0.0 {
            self.entries.remove(&(i, j));
        } else {
            self.entries.insert((i, j), value);
        }
    }

    /// Entries in (row, col) order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for (&(_, j), &v) in &self.entries {
            sums[j] += v;
        }
        sums
    }

    /// ℓ1 operator norm: the maximum absolute column sum.
    pub fn l1_operator_norm(&self) -> f64 {
        let mut sums = vec![0.0; self.cols];
        for (&(_, j), &v) in &self.entries {
            sums[j] += v.abs();
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "vector length mismatch");
        let mut y = vec![0.0; self.rows];
        for (&(i, j), &v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    /// Entrywise difference `self − other`; shapes must match.
    pub fn difference(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "cannot subtract a {}x{} matrix from a {}x{} matrix",
                other.rows, other.cols, self.rows, self.cols
            )));
        }
        let mut diff = SparseMatrix::zeros(self.rows, self.cols);
        for (&k, &v) in &self.entries {
            diff.entries.insert(k, v);
        }
        for (&k, &v) in &other.entries {
            let d = diff.entries.entry(k).or_insert(0.0);
            *d -= v;
            if *d == 0.0 {
                diff.entries.remove(&k);
            }
        }
        Ok(diff)
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.rows * self.cols];
        for (&(i, j), &v) in &self.entries {
            dense[i * self.cols + j] = v;
        }
        dense
    }
}

// ---------------------------------------------------------------------------
// FinancialNetwork
// ---------------------------------------------------------------------------

/// A cross-holdings network: institutions, assets, prices, and the failure
/// model parameters (thresholds and failure costs).
///
/// Immutable after construction; the `with_*` methods derive modified
/// copies. Thresholds may be `-inf` to disable the failure rule for an
/// institution.
#[derive(Debug, Clone, PartialEq)]
pub struct FinancialNetwork {
    n: usize,
    m: usize,
    cross_holdings: SparseMatrix,
    asset_ownership: SparseMatrix,
    prices: Vec<f64>,
    thresholds: Vec<f64>,
    failure_costs: Vec<f64>,
}

impl FinancialNetwork {
    /// Assembles a network from parts. Shapes must be consistent
    /// (`cross_holdings` n×n, `asset_ownership` n×m, vectors of length m
    /// and n); inconsistent shapes are a programming error and panic.
    /// Value-level constraints are checked by [`validate`](Self::validate).
    pub fn new(
        cross_holdings: SparseMatrix,
        asset_ownership: SparseMatrix,
        prices: Vec<f64>,
        thresholds: Vec<f64>,
        failure_costs: Vec<f64>,
    ) -> Self {
        let n = cross_holdings.rows();
        let m = asset_ownership.cols();
        assert_eq!(cross_holdings.cols(), n, "cross-holdings must be square");
        assert_eq!(
            asset_ownership.rows(),
            n,
            "asset ownership must have one row per institution"
        );
        assert_eq!(prices.len(), m, "one price per asset");
        assert_eq!(thresholds.len(), n, "one threshold per institution");
        assert_eq!(failure_costs.len(), n, "one failure cost per institution");
        FinancialNetwork {
            n,
            m,
            cross_holdings,
            asset_ownership,
            prices,
            thresholds,
            failure_costs,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn cross_holdings(&self) -> &SparseMatrix {
        &self.cross_holdings
    }

    pub fn asset_ownership(&self) -> &SparseMatrix {
        &self.asset_ownership
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn failure_costs(&self) -> &[f64] {
        &self.failure_costs
    }

    /// `D p`: the intrinsic asset value held by each institution.
    pub fn asset_values(&self) -> Vec<f64> {
        self.asset_ownership.mul_vec(&self.prices)
    }

    pub fn with_prices(&self, prices: Vec<f64>) -> Self {
        assert_eq!(prices.len(), self.m, "one price per asset");
        FinancialNetwork {
            prices,
            ..self.clone()
        }
    }

    pub fn with_thresholds(&self, thresholds: Vec<f64>) -> Self {
        assert_eq!(thresholds.len(), self.n, "one threshold per institution");
        FinancialNetwork {
            thresholds,
            ..self.clone()
        }
    }

    pub fn with_failure_costs(&self, failure_costs: Vec<f64>) -> Self {
        assert_eq!(failure_costs.len(), self.n, "one cost per institution");
        FinancialNetwork {
            failure_costs,
            ..self.clone()
        }
    }

    pub fn with_cross_holdings(&self, cross_holdings: SparseMatrix) -> Self {
        assert_eq!(cross_holdings.rows(), self.n, "cross-holdings must stay n×n");
        assert_eq!(cross_holdings.cols(), self.n, "cross-holdings must stay n×n");
        FinancialNetwork {
            cross_holdings,
            ..self.clone()
        }
    }

    /// Checks every model constraint and returns the violations found.
    /// An empty list means the network is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.n == 0 {
            out.push(Violation::new("n", vec![], "institution count must be at least 1"));
        }
        for (i, j, v) in self.cross_holdings.entries() {
            if i == j && v != 0.0 {
                out.push(Violation::new(
                    "cross_holdings",
                    vec![i, j],
                    "nonzero diagonal (institutions cannot own themselves)",
                ));
            }
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                out.push(Violation::new(
                    "cross_holdings",
                    vec![i, j],
                    format!("entry {v} outside [0, 1]"),
                ));
            }
        }
        for (j, sum) in self.cross_holdings.column_sums().iter().enumerate() {
            if *sum >= 1.0 || sum.is_nan() {
                out.push(Violation::new(
                    "cross_holdings",
                    vec![j],
                    format!("column sum {sum} not < 1"),
                ));
            }
        }
        for (i, k, v) in self.asset_ownership.entries() {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                out.push(Violation::new(
                    "asset_ownership",
                    vec![i, k],
                    format!("entry {v} outside [0, 1]"),
                ));
            }
        }
        for (k, sum) in self.asset_ownership.column_sums().iter().enumerate() {
            if *sum > 1.0 {
                out.push(Violation::new(
                    "asset_ownership",
                    vec![k],
                    format!("column sum {sum} exceeds 1"),
                ));
            }
        }
        for (k, p) in self.prices.iter().enumerate() {
            if !p.is_finite() || *p < 0.0 {
                out.push(Violation::new("prices", vec![k], format!("prices[{k}] = {p} < 0 or not finite")));
            }
        }
        for (i, t) in self.thresholds.iter().enumerate() {
            if t.is_nan() {
                out.push(Violation::new("thresholds", vec![i], "threshold is NaN"));
            }
        }
        for (i, b) in self.failure_costs.iter().enumerate() {
            if !b.is_finite() || *b < 0.0 {
                out.push(Violation::new(
                    "failure_costs",
                    vec![i],
                    format!("failure cost {b} negative or not finite"),
                ));
            }
        }
        out
    }

    /// Errors with the full violation list unless the network is valid.
    pub fn require_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidNetwork(violations))
        }
    }

    /// Diagonal of `Ĉ`: each institution's self-holding `1 − Σ_i C[i][j]`.
    pub fn self_holdings(&self) -> Result<Vec<f64>> {
        self.require_valid()?;
        Ok(self.self_holdings_unchecked())
    }

    pub(crate) fn self_holdings_unchecked(&self) -> Vec<f64> {
        self.cross_holdings
            .column_sums()
            .into_iter()
            .map(|s| 1.0 - s)
            .collect()
    }

    /// Network reserve `r = min_j Ĉ[j][j]`, in (0, 1] for valid networks.
    pub fn reserve(&self) -> Result<f64> {
        Ok(self
            .self_holdings()?
            .into_iter()
            .fold(f64::INFINITY, f64::min))
    }
}

// ---------------------------------------------------------------------------
// Shock
// ---------------------------------------------------------------------------

/// Nonnegative per-asset price drops constrained by a total budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Shock {
    drops: Vec<f64>,
    budget: f64,
}

impl Shock {
    pub fn new(drops: Vec<f64>, budget: f64) -> Self {
        Shock { drops, budget }
    }

    pub fn drops(&self) -> &[f64] {
        &self.drops
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn total(&self) -> f64 {
        self.drops.iter().sum()
    }

    /// Constraints that do not need a network: nonnegative finite drops
    /// within budget.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (k, d) in self.drops.iter().enumerate() {
            if !d.is_finite() || *d < 0.0 {
                out.push(Violation::new("drops", vec![k], format!("drop {d} negative or not finite")));
            }
        }
        if !self.budget.is_finite() || self.budget < 0.0 {
            out.push(Violation::new("budget", vec![], "budget negative or not finite"));
        }
        let total = self.total();
        if total > self.budget + BUDGET_SLACK * self.budget.max(1.0) {
            out.push(Violation::new(
                "drops",
                vec![],
                format!("total drop {total} exceeds budget {}", self.budget),
            ));
        }
        out
    }

    /// Full validation against a network: length `m` and `δ_k ≤ p_k`.
    pub fn validate_for(&self, network: &FinancialNetwork) -> Vec<Violation> {
        let mut out = self.validate();
        if self.drops.len() != network.m() {
            out.push(Violation::new(
                "drops",
                vec![],
                format!("{} drops for {} assets", self.drops.len(), network.m()),
            ));
            return out;
        }
        for (k, (d, p)) in self.drops.iter().zip(network.prices()).enumerate() {
            if *d > *p + BUDGET_SLACK * p.max(1.0) {
                out.push(Violation::new(
                    "drops",
                    vec![k],
                    format!("drop {d} exceeds price {p} (prices cannot go negative)"),
                ));
            }
        }
        out
    }

    /// The shocked network: prices reduced by the drops (floored at zero to
    /// absorb grid rounding).
    pub fn apply(&self, network: &FinancialNetwork) -> Result<FinancialNetwork> {
        let violations = self.validate_for(network);
        if !violations.is_empty() {
            return Err(Error::InvalidNetwork(violations));
        }
        let prices = network
            .prices()
            .iter()
            .zip(&self.drops)
            .map(|(p, d)| (p - d).max(0.0))
            .collect();
        Ok(network.with_prices(prices))
    }
}

// ---------------------------------------------------------------------------
// ValuationResult
// ---------------------------------------------------------------------------

/// Equity vector `V` and market vector `v = Ĉ V` for one network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValuationResult {
    #[serde(serialize_with = "serialize_dec_vec")]
    pub equity: Vec<f64>,
    #[serde(serialize_with = "serialize_dec_vec")]
    pub market: Vec<f64>,
}

// ---------------------------------------------------------------------------
// Decimal-string serialization
// ---------------------------------------------------------------------------

/// Formats a value the way the interchange format stores it: a shortest
/// round-trip decimal string, with `inf`/`-inf` for the threshold
/// sentinels and `-0` normalized to `0`.
pub fn format_dec(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x}")
    }
}

/// Parses a decimal string as written by [`format_dec`]. NaN is rejected.
pub fn parse_dec(s: &str) -> Option<f64> {
    match s {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => {
            let v: f64 = s.parse().ok()?;
            if v.is_finite() {
                Some(v)
            } else {
                None
            }
        }
    }
}

/// f64 carried as a decimal string on the wire.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Dec(pub f64);

impl Serialize for Dec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_dec(self.0))
    }
}

impl<'de> Deserialize<'de> for Dec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_dec(&s)
            .map(Dec)
            .ok_or_else(|| D::Error::custom(format!("invalid decimal value {s:?}")))
    }
}

pub(crate) fn serialize_dec_vec<S: Serializer>(
    v: &[f64],
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    serializer.collect_seq(v.iter().map(|&x| Dec(x)))
}

pub(crate) fn serialize_dec<S: Serializer>(
    v: &f64,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    Dec(*v).serialize(serializer)
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    n: usize,
    m: usize,
    cross_holdings: Vec<(usize, usize, Dec)>,
    asset_ownership: Vec<(usize, usize, Dec)>,
    prices: Vec<Dec>,
    thresholds: Vec<Dec>,
    failure_costs: Vec<Dec>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShockFile {
    drops: Vec<Dec>,
    budget: Dec,
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn entries_to_matrix(
    rows: usize,
    cols: usize,
    field: &'static str,
    entries: Vec<(usize, usize, Dec)>,
) -> Result<SparseMatrix> {
    SparseMatrix::from_entries(rows, cols, entries.into_iter().map(|(i, j, d)| (i, j, d.0)))
        .map_err(|e| Error::Dimension(format!("{field}: {e}")))
}

fn vec_len_checked(field: &'static str, want: usize, values: Vec<Dec>) -> Result<Vec<f64>> {
    if values.len() != want {
        return Err(Error::Dimension(format!(
            "{field}: expected {want} values, found {}",
            values.len()
        )));
    }
    Ok(values.into_iter().map(|d| d.0).collect())
}

/// Parses a network without validating model constraints. Structural
/// problems (bad JSON, wrong lengths, duplicate or out-of-range indices)
/// still error.
pub fn parse_network(json: &str) -> Result<FinancialNetwork> {
    let file: NetworkFile = serde_json::from_str(json).map_err(parse_error)?;
    let cross = entries_to_matrix(file.n, file.n, "cross_holdings", file.cross_holdings)?;
    let ownership = entries_to_matrix(file.n, file.m, "asset_ownership", file.asset_ownership)?;
    let prices = vec_len_checked("prices", file.m, file.prices)?;
    let thresholds = vec_len_checked("thresholds", file.n, file.thresholds)?;
    let failure_costs = vec_len_checked("failure_costs", file.n, file.failure_costs)?;
    Ok(FinancialNetwork::new(
        cross,
        ownership,
        prices,
        thresholds,
        failure_costs,
    ))
}

/// Parses and validates; the usual entry point for files.
pub fn network_from_json(json: &str) -> Result<FinancialNetwork> {
    let network = parse_network(json)?;
    network.require_valid()?;
    Ok(network)
}

/// Canonical serialization: fixed key order, entries sorted by
/// `(row, col)`, decimal strings. `network_from_json ∘ network_to_json`
/// is the identity and files written here round-trip byte-identically.
pub fn network_to_json(network: &FinancialNetwork) -> String {
    let file = NetworkFile {
        n: network.n(),
        m: network.m(),
        cross_holdings: network
            .cross_holdings()
            .entries()
            .map(|(i, j, v)| (i, j, Dec(v)))
            .collect(),
        asset_ownership: network
            .asset_ownership()
            .entries()
            .map(|(i, j, v)| (i, j, Dec(v)))
            .collect(),
        prices: network.prices().iter().map(|&v| Dec(v)).collect(),
        thresholds: network.thresholds().iter().map(|&v| Dec(v)).collect(),
        failure_costs: network.failure_costs().iter().map(|&v| Dec(v)).collect(),
    };
    serde_json::to_string(&file).expect("network serialization cannot fail")
}

pub fn load_network(mut reader: impl Read) -> Result<FinancialNetwork> {
    let mut buf = String::new();
    reader.read_to_string(&mut buf)?;
    network_from_json(&buf)
}

pub fn store_network(network: &FinancialNetwork, mut writer: impl Write) -> Result<()> {
    writer.write_all(network_to_json(network).as_bytes())?;
    Ok(())
}

pub fn load_network_path(path: impl AsRef<Path>) -> Result<FinancialNetwork> {
    network_from_json(&std::fs::read_to_string(path)?)
}

pub fn store_network_path(network: &FinancialNetwork, path: impl AsRef<Path>) -> Result<()> {
    Ok(std::fs::write(path, network_to_json(network))?)
}

pub fn parse_shock(json: &str) -> Result<Shock> {
    let file: ShockFile = serde_json::from_str(json).map_err(parse_error)?;
    Ok(Shock::new(
        file.drops.into_iter().map(|d| d.0).collect(),
        file.budget.0,
    ))
}

pub fn shock_from_json(json: &str) -> Result<Shock> {
    let shock = parse_shock(json)?;
    let violations = shock.validate();
    if violations.is_empty() {
        Ok(shock)
    } else {
        Err(Error::InvalidNetwork(violations))
    }
}

pub fn shock_to_json(shock: &Shock) -> String {
    let file = ShockFile {
        drops: shock.drops().iter().map(|&v| Dec(v)).collect(),
        budget: Dec(shock.budget()),
    };
    serde_json::to_string(&file).expect("shock serialization cannot fail")
}

impl Serialize for Shock {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("Shock", 2)?;
        s.serialize_field("drops", &self.drops.iter().map(|&x| Dec(x)).collect::<Vec<_>>())?;
        s.serialize_field("budget", &Dec(self.budget))?;
        s.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_bank_network(cross: &[(usize, usize, f64)]) -> FinancialNetwork {
        let c = SparseMatrix::from_entries(2, 2, cross.iter().copied()).unwrap();
        let d = SparseMatrix::from_entries(2, 1, [(0, 0, 1.0)]).unwrap();
        FinancialNetwork::new(c, d, vec![1.0], vec![f64::NEG_INFINITY; 2], vec![0.0; 2])
    }

    #[test]
    fn zero_cross_holdings_validate() {
        let net = two_bank_network(&[]);
        assert!(net.validate().is_empty());
        assert_eq!(net.self_holdings().unwrap(), vec![1.0, 1.0]);
        assert_eq!(net.reserve().unwrap(), 1.0);

        let trio = FinancialNetwork::new(
            SparseMatrix::zeros(3, 3),
            SparseMatrix::from_entries(3, 1, [(0, 0, 1.0)]).unwrap(),
            vec![1.0],
            vec![f64::NEG_INFINITY; 3],
            vec![0.0; 3],
        );
        assert_eq!(trio.self_holdings().unwrap(), vec![1.0; 3]);
    }

    #[test]
    fn nonzero_diagonal_rejected() {
        let net = two_bank_network(&[(1, 1, 0.3)]);
        let violations = net.validate();
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].field, "cross_holdings");
        assert_eq!(violations[0].index, vec![1, 1]);
        assert!(violations[0].constraint.contains("nonzero diagonal"));
    }

    #[test]
    fn column_sum_of_one_rejected() {
        // Column 1 sums to exactly 1.0: self-holding would be zero.
        let net = two_bank_network(&[(0, 1, 1.0)]);
        let violations = net.validate();
        assert_eq!(violations.len(), 1);
        assert!(violations[0].constraint.contains("not < 1"));
        assert_eq!(violations[0].index, vec![1]);
    }

    #[test]
    fn self_holdings_complement_identity() {
        let net = two_bank_network(&[(0, 1, 0.25), (1, 0, 0.625)]);
        let sh = net.self_holdings().unwrap();
        let sums = net.cross_holdings().column_sums();
        for j in 0..2 {
            assert!((sh[j] + sums[j] - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn mutual_pair_self_holdings() {
        let c = SparseMatrix::from_entries(2, 2, [(0, 1, 0.5), (1, 0, 0.5)]).unwrap();
        let d = SparseMatrix::from_entries(2, 2, [(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        let net = FinancialNetwork::new(c, d, vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]);
        assert_eq!(net.self_holdings().unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn negative_price_named_in_violation() {
        let json = r#"{"n":1,"m":1,"cross_holdings":[],"asset_ownership":[[0,0,"1"]],"prices":["-1"],"thresholds":["-inf"],"failure_costs":["0"]}"#;
        let err = network_from_json(json).unwrap_err();
        let violations = err.violations();
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].field, "prices");
        assert!(violations[0].constraint.contains("prices[0]"));
        assert!(violations[0].constraint.contains("< 0"));
    }

    #[test]
    fn unknown_fields_rejected() {
        let json = r#"{"n":1,"m":1,"cross_holdings":[],"asset_ownership":[],"prices":["1"],"thresholds":["0"],"failure_costs":["0"],"extra":1}"#;
        let err = network_from_json(json).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "got {err:?}");
    }

    #[test]
    fn parse_error_carries_position() {
        let err = network_from_json("{\n  \"n\": oops").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_entry_rejected() {
        let json = r#"{"n":2,"m":1,"cross_holdings":[[0,1,"0.1"],[0,1,"0.2"]],"asset_ownership":[[0,0,"1"]],"prices":["1"],"thresholds":["-inf","-inf"],"failure_costs":["0","0"]}"#;
        let err = network_from_json(json).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn canonical_round_trip_is_byte_identical() {
        let net = two_bank_network(&[(0, 1, 0.25), (1, 0, 0.1)]);
        let once = network_to_json(&net);
        let twice = network_to_json(&network_from_json(&once).unwrap());
        assert_eq!(once, twice);
    }

    #[test]
    fn stand_alone_bank_file_has_full_reserve() {
        let json = r#"{"n":2,"m":1,"cross_holdings":[],"asset_ownership":[[0,0,"1"]],"prices":["1"],"thresholds":["-inf","-inf"],"failure_costs":["0","0"]}"#;
        let net = network_from_json(json).unwrap();
        assert_eq!(net.reserve().unwrap(), 1.0);
    }

    #[test]
    fn shock_round_trip_and_validation() {
        let shock = Shock::new(vec![0.1, 0.0], 0.2);
        let json = shock_to_json(&shock);
        assert_eq!(json, r#"{"drops":["0.1","0"],"budget":"0.2"}"#);
        assert_eq!(shock_from_json(&json).unwrap(), shock);

        let over = Shock::new(vec![0.3], 0.2);
        assert!(!over.validate().is_empty());
    }

    #[test]
    fn shock_apply_respects_price_floor() {
        let net = two_bank_network(&[]);
        let shock = Shock::new(vec![1.0], 1.0);
        let shocked = shock.apply(&net).unwrap();
        assert_eq!(shocked.prices(), &[0.0]);

        let too_deep = Shock::new(vec![1.5], 2.0);
        assert!(too_deep.apply(&net).is_err());
    }

    #[test]
    fn values_are_shareable_across_threads() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<FinancialNetwork>();
        assert_send_sync::<SparseMatrix>();
        assert_send_sync::<Shock>();
        assert_send_sync::<ValuationResult>();
    }

    #[test]
    fn dec_formatting() {
        assert_eq!(format_dec(1.0), "1");
        assert_eq!(format_dec(0.5), "0.5");
        assert_eq!(format_dec(-0.0), "0");
        assert_eq!(format_dec(f64::NEG_INFINITY), "-inf");
        assert_eq!(parse_dec("0.1"), Some(0.1));
        assert_eq!(parse_dec("inf"), Some(f64::INFINITY));
        assert_eq!(parse_dec("nan"), None);
    }
}
