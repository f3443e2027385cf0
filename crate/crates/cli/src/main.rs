use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cpboost::dataset::{load_delimited, make_synthetic_two_gaussians, split_80_20, Dataset};
use cpboost::discrete_opt::{
    brute_force_pbo, tabu_search, BoostingRmp, FixedPointCodec, TabuParams,
};
use cpboost::experiments::{analyze, emit_report, load_records, run_suite, SuiteConfig};
use cpboost::loss::MarginMatrix;
use cpboost::selftest;

/// Cardinality-penalized totally corrective boosting.
#[derive(Parser)]
#[command(name = "cpboost", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment suite on one dataset and write the report.
    Run(RunArgs),
    /// Recompute frontiers and gains from an existing records.csv.
    Frontier(FrontierArgs),
    /// Solve a random boosting master problem with the discrete solver.
    SolvePbo(SolveArgs),
    /// Check the solvers against built-in oracles.
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// Delimited data file, one example per row.
    #[arg(long, conflicts_with = "synthetic")]
    data: Option<PathBuf>,
    /// Two Gaussian clusters instead of a file: `m,d,separation,seed`.
    #[arg(long, value_parser = parse_synthetic)]
    synthetic: Option<Synthetic>,
    /// Zero-based label column; defaults to the last column.
    #[arg(long)]
    label_column: Option<usize>,
    /// Field delimiter; `whitespace` splits on runs of blanks.
    #[arg(long, default_value = ",")]
    delimiter: String,
    /// TOML suite configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the configured dataset name.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Clone, Copy, Debug)]
struct Synthetic {
    m: usize,
    d: usize,
    separation: f64,
    seed: u64,
}

fn parse_synthetic(s: &str) -> std::result::Result<Synthetic, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err("expected m,d,separation,seed".into());
    }
    let bad = |what: &str| format!("bad {what} in {s:?}");
    Ok(Synthetic {
        m: parts[0].parse().map_err(|_| bad("m"))?,
        d: parts[1].parse().map_err(|_| bad("d"))?,
        separation: parts[2].parse().map_err(|_| bad("separation"))?,
        seed: parts[3].parse().map_err(|_| bad("seed"))?,
    })
}

#[derive(Args)]
struct FrontierArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Validation-error slack for comparable points; defaults to half an
    /// example of the validation set.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Tabu,
    Brute,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, default_value_t = 50)]
    m: usize,
    /// Number of weights.
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 6)]
    bit_depth: usize,
    #[arg(long, default_value_t = 4.0)]
    range: f64,
    #[arg(long, default_value_t = 1e-3)]
    nu: f64,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Seed of the random instance and of the search.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Solver::Tabu)]
    solver: Solver,
    #[arg(long, default_value_t = 16)]
    restarts: usize,
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    #[arg(long)]
    tenure: Option<usize>,
    /// Run restarts on all cores.
    #[arg(long)]
    parallel: bool,
    /// Write one `restart,iteration,value` line per improvement.
    #[arg(long)]
    trace: Option<PathBuf>,
}

fn delimiter_char(s: &str) -> Result<char> {
    match s {
        "whitespace" | "ws" | " " => Ok(' '),
        "tab" | "\\t" => Ok('\t'),
        _ => {
            let mut chars = s.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => Ok(c),
                _ => bail!("delimiter must be one character or `whitespace`, got {s:?}"),
            }
        }
    }
}

/// Field count of the first data or header line.
fn field_count(path: &Path, delimiter: char) -> Result<usize> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let line = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .with_context(|| format!("{} has no data rows", path.display()))?;
    Ok(if delimiter == ' ' {
        line.split_whitespace().count()
    } else {
        line.split(delimiter).count()
    })
}

fn run(args: RunArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(p) => SuiteConfig::load(p)?,
        None => SuiteConfig::default(),
    };
    let data: Dataset = match (&args.data, args.synthetic) {
        (Some(path), None) => {
            let delimiter = delimiter_char(&args.delimiter)?;
            let label = match args.label_column {
                Some(c) => c,
                None => field_count(path, delimiter)?.saturating_sub(1),
            };
            if args.name.is_none() && args.config.is_none() {
                config.dataset = path
                    .file_stem()
                    .map_or("dataset".into(), |s| s.to_string_lossy().into_owned());
            }
            load_delimited(path, label, delimiter)?
        }
        (None, Some(s)) => {
            if args.name.is_none() && args.config.is_none() {
                config.dataset = format!("synthetic_m{}_d{}", s.m, s.d);
            }
            make_synthetic_two_gaussians(s.m, s.d, s.separation, s.seed)?
        }
        _ => bail!("give exactly one of --data or --synthetic"),
    };
    if let Some(name) = args.name {
        config.dataset = name;
    }
    let split = split_80_20(&data, config.split_seed)?;
    let train = data.subset(&split.train)?;
    let val = data.subset(&split.val)?;
    log::info!(
        "{}: {} training and {} validation examples, {} features",
        config.dataset,
        train.n_examples(),
        val.n_examples(),
        train.n_features()
    );
    let records = run_suite(&train, &val, &config)?;
    let analysis = analyze(&records, config.comparable_tol);
    emit_report(&records, &analysis, &args.out)?;
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    println!(
        "{} records ({} failed), {} penalized frontier points; report in {}",
        records.len(),
        failed,
        analysis.gains.len(),
        args.out.display()
    );
    Ok(())
}

fn frontier(args: FrontierArgs) -> Result<()> {
    let records = load_records(&args.records)?;
    let analysis = analyze(&records, args.tol);
    emit_report(&records, &analysis, &args.out)?;
    for g in &analysis.gains {
        let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{:.2}%", 100.0 * v));
        println!(
            "{} record {} ({}): cardinality {}, val error {:.4}, sparsity gain {}, generalization gain {}",
            g.dataset,
            g.record_id,
            g.variant,
            g.cardinality,
            g.val_error,
            pct(g.sparsity_gain),
            pct(g.generalization_gain)
        );
    }
    Ok(())
}

fn solve_pbo(args: SolveArgs) -> Result<()> {
    if args.m == 0 || args.n == 0 {
        bail!("m and n must be positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut sign = || if rng.random_bool(0.5) { 1i8 } else { -1 };
    let cols: Vec<Vec<i8>> = (0..args.n)
        .map(|_| (0..args.m).map(|_| sign()).collect())
        .collect();
    let labels: Vec<i8> = (0..args.m).map(|_| sign()).collect();
    let refs: Vec<&[i8]> = cols.iter().map(Vec::as_slice).collect();
    let matrix = MarginMatrix::from_columns(&refs, &labels);
    let codec = FixedPointCodec::new(args.bit_depth, args.range, args.n)?;
    let rmp = BoostingRmp::new(&matrix, codec, args.nu, args.lambda)?;
    let params = TabuParams {
        restarts: args.restarts,
        iters_per_restart: args.iters,
        tenure: args.tenure,
        seed: args.seed,
        deterministic: !args.parallel,
        record_trace: args.trace.is_some(),
    };
    let result = match args.solver {
        Solver::Tabu => tabu_search(&rmp, &params)?,
        Solver::Brute => brute_force_pbo(&rmp)?,
    };
    let bits: String = result
        .best_bits
        .iter()
        .map(|&b| if b { '1' } else { '0' })
        .collect();
    println!("bits {bits}");
    println!("weights {:?}", rmp.decode(&result.best_bits));
    println!("value {}", result.best_value);
    println!("evaluations {}", result.evaluations);
    if let Some(path) = args.trace {
        let mut text = String::from("restart,iteration,value\n");
        for e in &result.trace {
            text.push_str(&format!("{},{},{}\n", e.restart, e.iteration, e.value));
        }
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn selftest() -> Result<()> {
    let checks = selftest::run_all();
    for c in &checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        println!("{tag} {} ({})", c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        bail!("{failed} self-test checks failed");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => run(a),
        Command::Frontier(a) => frontier(a),
        Command::SolvePbo(a) => solve_pbo(a),
        Command::Selftest => selftest(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
