//! Command-line front end.
//!
//! Every subcommand is a thin shell around one library operation: the JSON
//! printed on standard output is exactly the serde serialization of the
//! module result, human-readable summaries go to standard error, and files
//! use the interchange formats of the `contagion` crate.
//!
//! Exit codes: 0 success, 2 validation failure, 3 instance too large,
//! 1 anything else.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use contagion::cascade::{best_case_equilibrium, enumerate_equilibria, worst_case_equilibrium};
use contagion::net::{
    load_network_path, network_to_json, parse_network, store_network_path,
};
use contagion::random::{random_network, RandomNetworkSpec};
use contagion::sensitivity::{gen_lower_bound_network, perturbation_report, sensitivity_upper_bound};
use contagion::shock::{
    bcbs_exact, gen_bcbs_reduction, graph_from_json, max_failures_exact, max_failures_greedy,
    ReductionParams,
};
use contagion::valuation::{flow_values, market_values, neumann_values};
use contagion::{Error, FinancialNetwork, SolverConfig};

#[derive(Parser)]
#[command(
    name = "contagion",
    version,
    about = "Cross-holdings financial networks: valuation, cascades, sensitivity, shock search"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverChoice {
    /// Dense closed-form solve of (I − C) V = D p.
    Closed,
    /// Truncated Neumann series.
    Neumann,
    /// Column-stochastic flow iteration (needs fully owned assets).
    Flow,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CascadeMode {
    /// Fewest failures (grow from the empty set).
    Best,
    /// Most failures (shrink from everyone failed).
    Worst,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SearchChoice {
    /// Exhaustive over the discretized shock family.
    Exact,
    /// Marginal failures-per-budget heuristic (lower bound).
    Greedy,
}

#[derive(Subcommand)]
enum Command {
    /// Check a network file against the model constraints.
    Validate {
        #[arg(long)]
        net: PathBuf,
    },
    /// Failure-free equity and market values.
    Value {
        #[arg(long)]
        net: PathBuf,
        #[arg(long, value_enum, default_value_t = SolverChoice::Closed)]
        solver: SolverChoice,
        /// Relative ℓ1 residual tolerance for iterative solvers.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 1_000_000)]
        max_iter: usize,
    },
    /// Best- or worst-case failure equilibrium.
    Cascade {
        #[arg(long)]
        net: PathBuf,
        #[arg(long, value_enum, default_value_t = CascadeMode::Best)]
        mode: CascadeMode,
    },
    /// Every consistent failure set, by exhaustive subset scan (n ≤ 24).
    Enumerate {
        #[arg(long)]
        net: PathBuf,
    },
    /// Sensitivity report for a network and a perturbed variant.
    Perturb {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        net2: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 1_000_000)]
        max_iter: usize,
        /// Also write a per-institution value comparison as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Worst-case market change bound min(eps/r, 2) · norm.
    Bound {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        r: f64,
        /// ‖D p‖₁ of the network in question.
        #[arg(long, default_value_t = 1.0)]
        norm: f64,
    },
    /// The tight four-bank sensitivity pair.
    GenLowerbound {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        eps: f64,
        /// Value of the single underlying asset.
        #[arg(long, default_value_t = 1.0)]
        v: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        out_perturbed: Option<PathBuf>,
    },
    /// Biclique reduction network from a bipartite graph.
    GenReduction {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        r: f64,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        /// Chain length behind each right bank.
        #[arg(long, default_value_t = 0)]
        ell: usize,
        /// Neighbor failures needed to sink a right bank.
        #[arg(long)]
        d: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Largest balanced complete bipartite subgraph (n ≤ 16).
    Bcbs {
        #[arg(long)]
        graph: PathBuf,
    },
    /// Maximum best-case failures over bounded price drops.
    MaxFailures {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        budget: f64,
        /// Per-asset drop step of the discretized family.
        #[arg(long)]
        granularity: f64,
        #[arg(long, value_enum, default_value_t = SearchChoice::Exact)]
        method: SearchChoice,
        /// Seed for the greedy leftover phase.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write a budget sweep (0..=budget) as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Seeded random valid network.
    RandomNet {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0.3)]
        density: f64,
        #[arg(long, default_value_t = 0.1)]
        reserve_floor: f64,
        /// Restrict ownership to lower-indexed institutions (acyclic).
        #[arg(long, default_value_t = false)]
        dag: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return ExitCode::from(if ok { 0 } else { 1 });
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::TooLarge(_) => 3,
                Error::InvalidNetwork(_) => 2,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

fn config(tol: f64, max_iter: usize) -> SolverConfig {
    SolverConfig {
        tolerance: tol,
        max_iterations: max_iter,
    }
}

fn emit<T: serde::Serialize>(value: &T) -> Result<(), Error> {
    println!(
        "{}",
        serde_json::to_string(value).expect("result serialization cannot fail")
    );
    Ok(())
}

fn write_or_print(network: &FinancialNetwork, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(path) => store_network_path(network, path),
        None => {
            println!("{}", network_to_json(network));
            Ok(())
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Validate { net } => {
            let network = parse_network(&fs::read_to_string(net)?)?;
            let violations = network.validate();
            emit(&violations)?;
            if violations.is_empty() {
                eprintln!(
                    "valid network: n={} m={} reserve={}",
                    network.n(),
                    network.m(),
                    network.reserve().unwrap_or(f64::NAN)
                );
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("{} violation(s)", violations.len());
                for v in &violations {
                    eprintln!("  {v}");
                }
                Ok(ExitCode::from(2))
            }
        }
        Command::Value {
            net,
            solver,
            tol,
            max_iter,
        } => {
            let network = load_network_path(net)?;
            let cfg = config(tol, max_iter);
            let result = match solver {
                SolverChoice::Closed => market_values(&network, &cfg)?,
                SolverChoice::Neumann => neumann_values(&network, &cfg)?,
                SolverChoice::Flow => flow_values(&network, &cfg)?,
            };
            emit(&result)?;
            eprintln!(
                "n={} total market value={}",
                network.n(),
                result.market.iter().sum::<f64>()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Cascade { net, mode } => {
            let network = load_network_path(net)?;
            let eq = match mode {
                CascadeMode::Best => best_case_equilibrium(&network)?,
                CascadeMode::Worst => worst_case_equilibrium(&network)?,
            };
            emit(&eq)?;
            eprintln!("{} failure(s)", eq.failure_count());
            Ok(ExitCode::SUCCESS)
        }
        Command::Enumerate { net } => {
            let network = load_network_path(net)?;
            let all = enumerate_equilibria(&network)?;
            emit(&all)?;
            eprintln!("{} equilibria", all.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Perturb {
            net,
            net2,
            tol,
            max_iter,
            csv,
        } => {
            let network = load_network_path(net)?;
            let perturbed = load_network_path(net2)?;
            let cfg = config(tol, max_iter);
            let report = perturbation_report(&network, &perturbed, &cfg)?;
            if let Some(path) = csv {
                let a = market_values(&network, &cfg)?.market;
                let b = market_values(&perturbed, &cfg)?.market;
                let mut rows = String::from("institution,market,market_perturbed,abs_change\n");
                for (i, (x, y)) in a.iter().zip(&b).enumerate() {
                    rows.push_str(&format!("{i},{x},{y},{}\n", (x - y).abs()));
                }
                fs::write(path, rows)?;
            }
            emit(&report)?;
            eprintln!(
                "measured={} bound={} (eps={}, r={})",
                report.measured, report.upper_bound, report.epsilon, report.reserve
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Bound { eps, r, norm } => {
            let bound = sensitivity_upper_bound(eps, r, norm)?;
            println!("{}", serde_json::json!({ "bound": contagion::net::format_dec(bound) }));
            eprintln!("min(eps/r, 2) * norm = {bound}");
            Ok(ExitCode::SUCCESS)
        }
        Command::GenLowerbound {
            r,
            eps,
            v,
            out,
            out_perturbed,
        } => {
            let (original, perturbed) = gen_lower_bound_network(r, eps, v)?;
            println!(
                "{{\"original\":{},\"perturbed\":{}}}",
                network_to_json(&original),
                network_to_json(&perturbed)
            );
            if let Some(path) = out {
                store_network_path(&original, path)?;
            }
            if let Some(path) = out_perturbed {
                store_network_path(&perturbed, path)?;
            }
            eprintln!("four-bank pair at r={r} eps={eps} v={v}");
            Ok(ExitCode::SUCCESS)
        }
        Command::GenReduction {
            graph,
            r,
            eps,
            ell,
            d,
            out,
        } => {
            let graph = graph_from_json(&fs::read_to_string(graph)?)?;
            let params = ReductionParams {
                reserve: r,
                epsilon: eps,
                chain_length: ell,
                budget_count: d,
            };
            let reduction = gen_bcbs_reduction(&graph, &params)?;
            eprintln!(
                "{} institutions ({} per side, chains of {}), stake scale N={}",
                reduction.institution_count(),
                reduction.graph_size(),
                ell,
                reduction.scale()
            );
            write_or_print(reduction.network(), out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Bcbs { graph } => {
            let graph = graph_from_json(&fs::read_to_string(graph)?)?;
            let result = bcbs_exact(&graph)?;
            emit(&result)?;
            eprintln!("largest balanced biclique: {}x{}", result.k, result.k);
            Ok(ExitCode::SUCCESS)
        }
        Command::MaxFailures {
            net,
            budget,
            granularity,
            method,
            seed,
            csv,
        } => {
            let network = load_network_path(net)?;
            let total: f64 = network.prices().iter().sum();
            if budget > total {
                eprintln!("warning: budget {budget} exceeds total asset value {total}; clamping");
            }
            if let Some(path) = csv {
                let mut rows = String::from("budget,max_failures\n");
                let mut b = 0.0;
                while b <= budget + 1e-12 {
                    let result = match method {
                        SearchChoice::Exact => max_failures_exact(&network, b, granularity)?,
                        SearchChoice::Greedy => {
                            max_failures_greedy(&network, b, granularity, seed)?
                        }
                    };
                    rows.push_str(&format!("{b},{}\n", result.max_failures));
                    b += granularity;
                }
                fs::write(path, rows)?;
            }
            let result = match method {
                SearchChoice::Exact => max_failures_exact(&network, budget, granularity)?,
                SearchChoice::Greedy => max_failures_greedy(&network, budget, granularity, seed)?,
            };
            emit(&result)?;
            eprintln!("max failures: {}", result.max_failures);
            Ok(ExitCode::SUCCESS)
        }
        Command::RandomNet {
            n,
            m,
            density,
            reserve_floor,
            dag,
            seed,
            out,
        } => {
            let spec = RandomNetworkSpec {
                n,
                m,
                density,
                reserve_floor,
                dag,
                seed,
            };
            let network = random_network(&spec)?;
            eprintln!(
                "n={n} m={m} reserve={}",
                network.reserve().unwrap_or(f64::NAN)
            );
            write_or_print(&network, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
