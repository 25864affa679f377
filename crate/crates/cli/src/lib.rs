//! Command-line front end; the binary is a thin wrapper around [`run_cli`].

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ruleforge::experiment::{run_experiment, train_rule_model, Algorithm, ExperimentConfig};
use ruleforge::{
    check_lp_certificate, enumerate_small_trees, exact_cover, fit_tree_unweighted, greedy_cover,
    harmonic, solve_covering_lp, Certificate, CoverInstance, Criterion, Dataset64, RulePool64,
    TreeParams,
};

#[derive(Parser)]
#[command(
    name = "ruleforge",
    version,
    about = "Rule covers and rule boosting from decision trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Nested CV of RF, DT and MIRCO.
    Mirco(ExperimentArgs),
    /// Nested CV of RF, the initial tree and RCBoost.
    Rcboost(ExperimentArgs),
    /// Print a saved rule model, one rule per line.
    ExportRules {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brute-force checks.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    data: PathBuf,
    /// Label column: header name or zero-based index.
    #[arg(long)]
    label: String,
    #[arg(long, default_value_t = 10)]
    outer: usize,
    #[arg(long, default_value_t = 4)]
    inner: usize,
    #[arg(long, env = "RULEFORGE_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "gini")]
    criterion: Criterion,
    #[arg(long, value_delimiter = ',', default_value = "5,10")]
    depth_grid: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "10,50")]
    trees_grid: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "10,50")]
    rmp_grid: Vec<usize>,
    /// Threads for the outer folds (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include per-iteration RCBoost traces.
    #[arg(long)]
    trace: bool,
    /// Also train on all rows with the most frequently chosen parameters
    /// and save the rule pool here.
    #[arg(long)]
    model_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Solve the covering LP of an instance and check its certificate.
    Lp {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Compare greedy, exact and LP costs of an instance.
    Cover {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Best accuracy of any tree of depth at most 2 versus CART.
    Trees {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        label: String,
        #[arg(long, default_value_t = 2)]
        depth: usize,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 on success, 1 for usage or data errors, 2 when an
/// internal invariant was violated.
pub fn run_cli<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            let invariant = e
                .chain()
                .filter_map(|c| c.downcast_ref::<ruleforge::Error>())
                .any(ruleforge::Error::is_invariant_violation);
            if invariant {
                2
            } else {
                1
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Mirco(args) => experiment(Algorithm::Mirco, args),
        Command::Rcboost(args) => experiment(Algorithm::Rcboost, args),
        Command::ExportRules { model, out } => {
            let text = fs::read_to_string(&model)
                .with_context(|| format!("reading {}", model.display()))?;
            let pool: RulePool64 = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", model.display()))?;
            emit(out.as_deref(), pool.export_text().as_bytes())
        }
        Command::Oracle(cmd) => oracle(cmd),
    }
}

fn experiment(algorithm: Algorithm, args: ExperimentArgs) -> Result<()> {
    let data = Dataset64::load_csv(&args.data, args.label.as_str())?;
    let name = args
        .data
        .file_stem()
        .map_or_else(|| "data".to_owned(), |s| s.to_string_lossy().into_owned());
    let config = ExperimentConfig {
        outer: args.outer,
        inner: args.inner,
        seed: args.seed,
        criterion: args.criterion,
        depth_grid: args.depth_grid,
        trees_grid: args.trees_grid,
        rmp_grid: args.rmp_grid,
        workers: args.workers,
        trace: args.trace,
    };
    let report = run_experiment(&data, &name, algorithm, &config)?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    emit(args.out.as_deref(), json.as_bytes())?;

    if let Some(path) = args.model_out {
        let method = match algorithm {
            Algorithm::Mirco => "MIRCO",
            Algorithm::Rcboost => "RCB",
        };
        let choice = report.consensus(method).context("report has no folds")?;
        let pool = train_rule_model(&data, algorithm, &choice, config.seed, config.criterion)?;
        let mut json = serde_json::to_string_pretty(&pool)?;
        json.push('\n');
        emit(Some(&path), json.as_bytes())?;
    }
    Ok(())
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn read_instance(path: &Path) -> Result<CoverInstance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Serialize)]
struct LpReport {
    objective: f64,
    primal: Vec<f64>,
    duals: Vec<f64>,
    pivots: usize,
    certificate: Certificate,
    passes: bool,
}

#[derive(Serialize)]
struct CoverReport {
    greedy: Vec<usize>,
    greedy_cost: f64,
    exact: Option<Vec<usize>>,
    exact_cost: Option<f64>,
    lp_objective: f64,
    max_coverage: usize,
    harmonic_bound: f64,
    within_bound: Option<bool>,
    sandwich: Option<bool>,
}

#[derive(Serialize)]
struct TreesReport {
    depth: usize,
    best_accuracy: f64,
    cart_accuracy: f64,
}

fn oracle(cmd: OracleCommand) -> Result<()> {
    let json = match cmd {
        OracleCommand::Lp { instance } => {
            let inst = read_instance(&instance)?;
            let problem = inst.to_problem::<f64>()?;
            let lp = solve_covering_lp(&problem)?;
            let certificate = check_lp_certificate(&inst, &lp.primal, &lp.duals)?;
            serde_json::to_string_pretty(&LpReport {
                objective: lp.objective,
                passes: certificate.passes(),
                primal: lp.primal,
                duals: lp.duals,
                pivots: lp.iterations,
                certificate,
            })?
        }
        OracleCommand::Cover { instance } => {
            let inst = read_instance(&instance)?;
            let problem = inst.to_problem::<f64>()?;
            let greedy = greedy_cover(&problem)?;
            let lp = solve_covering_lp(&problem)?;
            let exact = exact_cover(&problem).ok();
            let d = problem.max_coverage();
            let bound = harmonic(d);
            let tol = 1e-9;
            serde_json::to_string_pretty(&CoverReport {
                within_bound: exact
                    .as_ref()
                    .map(|e| greedy.total_cost <= bound * e.total_cost + tol),
                sandwich: exact.as_ref().map(|e| {
                    lp.objective <= e.total_cost + tol && e.total_cost <= greedy.total_cost + tol
                }),
                exact_cost: exact.as_ref().map(|e| e.total_cost),
                exact: exact.map(|e| e.selected),
                greedy: greedy.selected,
                greedy_cost: greedy.total_cost,
                lp_objective: lp.objective,
                max_coverage: d,
                harmonic_bound: bound,
            })?
        }
        OracleCommand::Trees { data, label, depth } => {
            let ds = Dataset64::load_csv(&data, label.as_str())?;
            let best_accuracy = enumerate_small_trees(&ds, depth)?;
            let cart_accuracy = if depth == 0 {
                let counts = ds.class_counts();
                counts.iter().copied().max().unwrap_or(0) as f64 / ds.n_samples() as f64
            } else {
                let tree = fit_tree_unweighted(&ds, &TreeParams::with_depth(depth))?;
                ruleforge::accuracy(&tree.predict_all(&ds), ds.labels())
            };
            serde_json::to_string_pretty(&TreesReport {
                depth,
                best_accuracy,
                cart_accuracy,
            })?
        }
    };
    println!("{json}");
    Ok(())
}
