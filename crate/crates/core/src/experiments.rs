//! Experiment harness: the five variants (ℓ1 CG, unregularized CG with
//! early stopping, cardinality-penalized CG, hot-started CP CG, one-shot
//! subset selection), Pareto frontiers over (cardinality, validation
//! error), sparsity and generalization gains, and CSV report emission.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boost::{
    hot_started_cpcg, l1_cg, subset_selection, total_q_boost, ucg_early_stopping, BoostConfig,
    DiscreteSolver, Ensemble, DEFAULT_NEGLIGIBLE_NU,
};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::hypotheses::Dictionary;

pub const DEFAULT_T_PRIME: usize = 50;
/// Risk or error differences at or below this are ties.
pub const COMPARISON_TOL: f64 = 1e-9;

#[allow(non_camel_case_types)]
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    A_L1CG,
    B_UCG,
    C_CPCG,
    D_HOT,
    E_SUBSET,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::A_L1CG,
        Variant::B_UCG,
        Variant::C_CPCG,
        Variant::D_HOT,
        Variant::E_SUBSET,
    ];

    pub fn group(self) -> Group {
        match self {
            Variant::A_L1CG | Variant::B_UCG => Group::Baseline,
            Variant::C_CPCG | Variant::D_HOT | Variant::E_SUBSET => Group::Cp,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Baseline,
    Cp,
}

/// One evaluated ensemble. Errors are fractions of the training and
/// validation sets; `empirical_risk` is `Σ exp(-γ_i) + ν‖w‖₁` on the
/// training set and `total_objective` adds `λ card(w)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub id: usize,
    pub variant: Variant,
    pub dataset: String,
    pub nu: f64,
    pub lambda: Option<f64>,
    pub max_iters: usize,
    pub t_prime: Option<usize>,
    /// Columns generated when the ensemble was taken.
    pub t: usize,
    pub split_seed: u64,
    pub solver_seed: u64,
    pub n_val: usize,
    pub cardinality: usize,
    pub train_error: f64,
    pub val_error: f64,
    pub empirical_risk: f64,
    pub total_objective: f64,
    pub wall_time: f64,
    pub status: String,
}

impl ExperimentRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    /// Equality of everything except wall time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        let strip = |r: &Self| Self {
            wall_time: 0.0,
            ..r.clone()
        };
        let (a, b) = (strip(self), strip(other));
        // NaN metrics of failed runs compare equal to each other here.
        format!("{a:?}") == format!("{b:?}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub dataset: String,
    pub split_seed: u64,
    /// ν values of the ℓ1 baseline.
    pub nu_grid: Vec<f64>,
    /// λ values of the cardinality-penalized variants.
    pub lambda_grid: Vec<f64>,
    /// ν of the unregularized and penalized variants.
    pub negligible_nu: f64,
    /// Iteration budget `T` of every engine.
    pub max_iters: usize,
    /// Prefix length `T′` for hot starting and subset selection.
    pub t_prime: usize,
    pub variants: Vec<Variant>,
    /// Discrete solver of subset selection; the other penalized variants
    /// use `boost.discrete_solver`.
    pub subset_solver: DiscreteSolver,
    /// Validation-error slack for "comparable" points; `None` uses half
    /// an example, `1 / (2 m_val)`.
    pub comparable_tol: Option<f64>,
    /// Run grid cells concurrently. Results do not depend on it.
    pub parallel: bool,
    pub boost: BoostConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            dataset: "dataset".into(),
            split_seed: 0,
            nu_grid: vec![0.5, 2.0, 8.0, 32.0],
            lambda_grid: vec![1.0, 4.0, 16.0, 64.0],
            negligible_nu: DEFAULT_NEGLIGIBLE_NU,
            max_iters: 100,
            t_prime: DEFAULT_T_PRIME,
            variants: Variant::ALL.to_vec(),
            subset_solver: DiscreteSolver::Tabu,
            comparable_tol: None,
            parallel: true,
            boost: BoostConfig::default(),
        }
    }
}

impl SuiteConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let runs = |v: Variant| self.variants.contains(&v);
        if self.variants.is_empty() {
            return Err(Error::Config("no variants selected".into()));
        }
        if runs(Variant::A_L1CG) && self.nu_grid.is_empty() {
            return Err(Error::Config("nu_grid is empty".into()));
        }
        let penalized = runs(Variant::C_CPCG) || runs(Variant::D_HOT) || runs(Variant::E_SUBSET);
        if penalized && self.lambda_grid.is_empty() {
            return Err(Error::Config("lambda_grid is empty".into()));
        }
        if let Some(nu) = self.nu_grid.iter().find(|&&v| !(v > 0.0)) {
            return Err(Error::Config(format!("nu_grid entry {nu} is not positive")));
        }
        if let Some(tol) = self.comparable_tol.filter(|&t| !(t >= 0.0)) {
            return Err(Error::Config(format!("comparable_tol {tol} is negative")));
        }
        if self.t_prime == 0 && (runs(Variant::D_HOT) || runs(Variant::E_SUBSET)) {
            warn!("t_prime = 0: hot start degenerates and subset selection has no columns");
        }
        self.cell_config(self.negligible_nu, 0.0).validate()
    }

    fn cell_config(&self, nu: f64, lambda: f64) -> BoostConfig {
        BoostConfig {
            nu,
            lambda,
            max_iters: self.max_iters,
            ucg_nu: self.negligible_nu,
            hot_start_t_prime: Some(self.t_prime),
            ..self.boost.clone()
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Cell {
    L1 { nu: f64 },
    Ucg,
    Cp { lambda: f64 },
    Hot { lambda: f64 },
}

/// What a finished cell produced: one evaluated ensemble per record.
struct CellOutcome {
    variant: Variant,
    entries: Vec<Entry>,
    /// Dictionary indices of the generated columns, in order.
    generated: Vec<usize>,
}

struct Entry {
    nu: f64,
    lambda: Option<f64>,
    t_prime: Option<usize>,
    t: usize,
    ensemble: std::result::Result<Ensemble, String>,
    wall_time: f64,
}

/// Runs every selected variant on one train/validation split. Failed cells
/// become records with an `error:` status; the suite carries on.
pub fn run_suite(
    train: &Dataset,
    val: &Dataset,
    config: &SuiteConfig,
) -> Result<Vec<ExperimentRecord>> {
    config.validate()?;
    if train.n_features() != val.n_features() {
        return Err(Error::InvalidArgument(
            "train and validation feature counts differ".into(),
        ));
    }
    let dict = Dictionary::enumerate_candidates(train);
    info!("dictionary holds {} distinct stumps", dict.len());
    let runs = |v: Variant| config.variants.contains(&v);

    let mut cells = Vec::new();
    if runs(Variant::A_L1CG) {
        cells.extend(config.nu_grid.iter().map(|&nu| Cell::L1 { nu }));
    }
    if runs(Variant::B_UCG) || runs(Variant::E_SUBSET) {
        cells.push(Cell::Ucg);
    }
    if runs(Variant::C_CPCG) {
        cells.extend(config.lambda_grid.iter().map(|&lambda| Cell::Cp { lambda }));
    }
    if runs(Variant::D_HOT) {
        cells.extend(
            config
                .lambda_grid
                .iter()
                .map(|&lambda| Cell::Hot { lambda }),
        );
    }

    let run_cell = |cell: &Cell| run_cell(*cell, train, &dict, config);
    let mut outcomes: Vec<CellOutcome> = if config.parallel {
        cells.par_iter().map(run_cell).collect()
    } else {
        cells.iter().map(run_cell).collect()
    };

    if runs(Variant::E_SUBSET) {
        let ucg = outcomes
            .iter()
            .find(|o| o.variant == Variant::B_UCG)
            .expect("unregularized run scheduled");
        outcomes.push(run_subset(ucg, train, &dict, config));
    }
    if !runs(Variant::B_UCG) {
        outcomes.retain(|o| o.variant != Variant::B_UCG);
    }

    let mut records = Vec::new();
    for outcome in outcomes {
        for entry in outcome.entries {
            records.push(evaluate(
                outcome.variant,
                entry,
                train,
                val,
                config,
                records.len(),
            ));
        }
    }
    Ok(records)
}

fn run_cell(cell: Cell, train: &Dataset, dict: &Dictionary, config: &SuiteConfig) -> CellOutcome {
    let start = Instant::now();
    let single = |variant, nu, lambda, t_prime, result: Result<(usize, Ensemble)>| {
        let (t, ensemble) = match result {
            Ok((t, e)) => (t, Ok(e)),
            Err(e) => (0, Err(e.to_string())),
        };
        CellOutcome {
            variant,
            entries: vec![Entry {
                nu,
                lambda,
                t_prime,
                t,
                ensemble,
                wall_time: start.elapsed().as_secs_f64(),
            }],
            generated: Vec::new(),
        }
    };
    let neg = config.negligible_nu;
    match cell {
        Cell::L1 { nu } => {
            let r = l1_cg(train, dict, &config.cell_config(nu, 0.0))
                .map(|r| (r.generated.len(), r.ensemble));
            single(Variant::A_L1CG, nu, None, None, r)
        }
        Cell::Cp { lambda } => {
            let r = total_q_boost(train, dict, &config.cell_config(neg, lambda))
                .map(|r| (r.generated.len(), r.ensemble));
            single(Variant::C_CPCG, neg, Some(lambda), None, r)
        }
        Cell::Hot { lambda } => {
            let r = hot_started_cpcg(train, dict, &config.cell_config(neg, lambda))
                .map(|r| (r.run.generated.len(), r.run.ensemble));
            single(Variant::D_HOT, neg, Some(lambda), Some(config.t_prime), r)
        }
        Cell::Ucg => match ucg_early_stopping(train, dict, &config.cell_config(neg, 0.0)) {
            Ok(run) => {
                let elapsed = start.elapsed().as_secs_f64();
                let n = run.snapshots.len().max(1) as f64;
                let entries = run
                    .snapshots
                    .iter()
                    .map(|s| Entry {
                        nu: neg,
                        lambda: None,
                        t_prime: None,
                        t: s.t,
                        ensemble: Ok(s.ensemble.pruned()),
                        wall_time: elapsed * s.t as f64 / n,
                    })
                    .collect();
                CellOutcome {
                    variant: Variant::B_UCG,
                    entries,
                    generated: run.generated,
                }
            }
            Err(e) => single(Variant::B_UCG, neg, None, None, Err(e)),
        },
    }
}

/// Subset selection over the first `T′` columns of the unregularized run.
fn run_subset(
    ucg: &CellOutcome,
    train: &Dataset,
    dict: &Dictionary,
    config: &SuiteConfig,
) -> CellOutcome {
    let start = Instant::now();
    let neg = config.negligible_nu;
    let fail = |msg: String| CellOutcome {
        variant: Variant::E_SUBSET,
        entries: config
            .lambda_grid
            .iter()
            .map(|&lambda| Entry {
                nu: neg,
                lambda: Some(lambda),
                t_prime: Some(config.t_prime),
                t: 0,
                ensemble: Err(msg.clone()),
                wall_time: 0.0,
            })
            .collect(),
        generated: Vec::new(),
    };
    if let Some(Err(e)) = ucg.entries.first().map(|e| &e.ensemble) {
        return fail(format!("unregularized prefix failed: {e}"));
    }
    let t = ucg.generated.len().min(config.t_prime);
    if t == 0 {
        return fail("no columns to select from".into());
    }
    let columns: Vec<_> = ucg.generated[..t]
        .iter()
        .map(|&j| dict.column(j).clone())
        .collect();
    let cfg = BoostConfig {
        discrete_solver: config.subset_solver,
        ..config.cell_config(neg, 0.0)
    };
    match subset_selection(&columns, train, &cfg, &config.lambda_grid) {
        Ok(results) => {
            let per = start.elapsed().as_secs_f64() / results.len().max(1) as f64;
            CellOutcome {
                variant: Variant::E_SUBSET,
                entries: results
                    .into_iter()
                    .map(|(lambda, ensemble)| Entry {
                        nu: neg,
                        lambda: Some(lambda),
                        t_prime: Some(config.t_prime),
                        t,
                        ensemble: Ok(ensemble),
                        wall_time: per,
                    })
                    .collect(),
                generated: Vec::new(),
            }
        }
        Err(e) => fail(e.to_string()),
    }
}

fn evaluate(
    variant: Variant,
    entry: Entry,
    train: &Dataset,
    val: &Dataset,
    config: &SuiteConfig,
    id: usize,
) -> ExperimentRecord {
    let base = ExperimentRecord {
        id,
        variant,
        dataset: config.dataset.clone(),
        nu: entry.nu,
        lambda: entry.lambda,
        max_iters: config.max_iters,
        t_prime: entry.t_prime,
        t: entry.t,
        split_seed: config.split_seed,
        solver_seed: config.boost.tabu.seed,
        n_val: val.n_examples(),
        cardinality: 0,
        train_error: f64::NAN,
        val_error: f64::NAN,
        empirical_risk: f64::NAN,
        total_objective: f64::NAN,
        wall_time: entry.wall_time,
        status: "ok".into(),
    };
    let ensemble = match entry.ensemble {
        Ok(e) => e,
        Err(msg) => {
            warn!("{variant} run failed: {msg}");
            return ExperimentRecord {
                status: format!("error: {msg}"),
                ..base
            };
        }
    };
    let objective = ensemble.objective(train.labels(), entry.nu, entry.lambda.unwrap_or(0.0));
    match objective {
        Ok(o) => ExperimentRecord {
            cardinality: ensemble.cardinality(),
            train_error: ensemble.error_rate(train),
            val_error: ensemble.error_rate(val),
            empirical_risk: o.regularized_risk(),
            total_objective: o.total,
            ..base
        },
        Err(e) => ExperimentRecord {
            status: format!("error: {e}"),
            ..base
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub cardinality: usize,
    pub val_error: f64,
    pub record_id: usize,
}

impl ParetoPoint {
    pub fn from_record(r: &ExperimentRecord) -> Self {
        Self {
            cardinality: r.cardinality,
            val_error: r.val_error,
            record_id: r.id,
        }
    }

    /// At most as large in both coordinates and smaller in at least one.
    pub fn dominates(&self, other: &ParetoPoint) -> bool {
        self.cardinality <= other.cardinality
            && self.val_error <= other.val_error
            && (self.cardinality < other.cardinality || self.val_error < other.val_error)
    }
}

/// Minimal points under (cardinality, validation error) dominance, sorted
/// by cardinality. Of several identical points the one listed first is kept.
pub fn frontier(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut sorted: Vec<(usize, ParetoPoint)> = points.iter().copied().enumerate().collect();
    sorted.sort_by(|(ia, a), (ib, b)| {
        a.cardinality
            .cmp(&b.cardinality)
            .then(a.val_error.total_cmp(&b.val_error))
            .then(ia.cmp(ib))
    });
    let mut out: Vec<ParetoPoint> = Vec::new();
    for (_, p) in sorted {
        if out.last().is_none_or(|last| p.val_error < last.val_error) {
            out.push(p);
        }
    }
    out
}

/// Frontier of the successful records of one group.
pub fn pareto_frontier(records: &[ExperimentRecord], group: Group) -> Vec<ParetoPoint> {
    let points: Vec<ParetoPoint> = records
        .iter()
        .filter(|r| r.is_ok() && r.variant.group() == group && !r.val_error.is_nan())
        .map(ParetoPoint::from_record)
        .collect();
    frontier(&points)
}

/// Relative cardinality saving of `cp` over the sparsest baseline point
/// whose validation error is within `tol` of it. `None` without such a
/// point, or when that point is the empty ensemble.
pub fn sparsity_gain(cp: &ParetoPoint, baseline: &[ParetoPoint], tol: f64) -> Option<f64> {
    let q = comparable_baseline(cp, baseline, tol)?;
    if q.cardinality == 0 {
        return None;
    }
    Some((q.cardinality as f64 - cp.cardinality as f64) / q.cardinality as f64)
}

/// Sparsest baseline point with validation error at most `cp`'s plus `tol`.
pub fn comparable_baseline(
    cp: &ParetoPoint,
    baseline: &[ParetoPoint],
    tol: f64,
) -> Option<ParetoPoint> {
    baseline
        .iter()
        .filter(|q| q.val_error <= cp.val_error + tol)
        .min_by(|a, b| {
            a.cardinality
                .cmp(&b.cardinality)
                .then(a.val_error.total_cmp(&b.val_error))
        })
        .copied()
}

/// Relative validation-error improvement of `cp` over the best baseline
/// point at any cardinality. `None` for an empty baseline or a best error
/// of zero.
pub fn generalization_gain(cp: &ParetoPoint, baseline: &[ParetoPoint]) -> Option<f64> {
    let best = baseline
        .iter()
        .map(|q| q.val_error)
        .min_by(f64::total_cmp)?;
    if best == 0.0 {
        return None;
    }
    Some((best - cp.val_error) / best)
}

/// Loss rates of subset selection against unregularized snapshots.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Suboptimality {
    pub loss_rate_risk: f64,
    pub loss_rate_train_error: f64,
    pub comparisons: usize,
}

/// Compares every subset-selection record with every unregularized
/// snapshot of the same cardinality whose columns lie within the prefix the
/// subset was selected from (`b.t <= e.t`),
/// and reports the fraction of pairs where subset selection has higher
/// empirical risk (resp. training error) by more than `1e-9`. `None` when
/// no cardinality coincides.
pub fn suboptimality_comparison(
    records_e: &[ExperimentRecord],
    records_b: &[ExperimentRecord],
) -> Option<Suboptimality> {
    let mut comparisons = 0usize;
    let mut risk_losses = 0usize;
    let mut error_losses = 0usize;
    for e in records_e.iter().filter(|r| r.is_ok()) {
        for b in records_b
            .iter()
            .filter(|b| b.is_ok() && b.cardinality == e.cardinality && b.t <= e.t)
        {
            comparisons += 1;
            if e.empirical_risk > b.empirical_risk + COMPARISON_TOL {
                risk_losses += 1;
            }
            if e.train_error > b.train_error + COMPARISON_TOL {
                error_losses += 1;
            }
        }
    }
    (comparisons > 0).then(|| Suboptimality {
        loss_rate_risk: risk_losses as f64 / comparisons as f64,
        loss_rate_train_error: error_losses as f64 / comparisons as f64,
        comparisons,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub dataset: String,
    pub group: Group,
    pub cardinality: usize,
    pub val_error: f64,
    pub record_id: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainRow {
    pub dataset: String,
    pub record_id: usize,
    pub variant: Variant,
    pub cardinality: usize,
    pub val_error: f64,
    pub tolerance: f64,
    pub comparable_record_id: Option<usize>,
    pub comparable_cardinality: Option<usize>,
    pub sparsity_gain: Option<f64>,
    pub generalization_gain: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuboptimalityRow {
    pub dataset: String,
    pub loss_rate_risk: Option<f64>,
    pub loss_rate_train_error: Option<f64>,
    pub comparisons: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Analysis {
    pub frontiers: Vec<FrontierRow>,
    pub gains: Vec<GainRow>,
    pub suboptimality: Vec<SuboptimalityRow>,
}

/// Frontiers, one gain row per penalized frontier point, and subset
/// selection loss rates, per dataset. `tol = None` uses `1 / (2 m_val)`.
pub fn analyze(records: &[ExperimentRecord], tol: Option<f64>) -> Analysis {
    let mut by_dataset: BTreeMap<&str, Vec<ExperimentRecord>> = BTreeMap::new();
    for r in records {
        by_dataset
            .entry(r.dataset.as_str())
            .or_default()
            .push(r.clone());
    }
    let mut out = Analysis::default();
    for (name, recs) in by_dataset {
        let baseline = pareto_frontier(&recs, Group::Baseline);
        let cp = pareto_frontier(&recs, Group::Cp);
        for (group, points) in [(Group::Baseline, &baseline), (Group::Cp, &cp)] {
            out.frontiers.extend(points.iter().map(|p| FrontierRow {
                dataset: name.to_string(),
                group,
                cardinality: p.cardinality,
                val_error: p.val_error,
                record_id: p.record_id,
            }));
        }
        let n_val = recs.iter().map(|r| r.n_val).max().unwrap_or(0);
        let tolerance = tol.unwrap_or(if n_val > 0 { 0.5 / n_val as f64 } else { 0.0 });
        for p in &cp {
            let record = recs
                .iter()
                .find(|r| r.id == p.record_id)
                .expect("frontier point has a record");
            let q = comparable_baseline(p, &baseline, tolerance);
            out.gains.push(GainRow {
                dataset: name.to_string(),
                record_id: p.record_id,
                variant: record.variant,
                cardinality: p.cardinality,
                val_error: p.val_error,
                tolerance,
                comparable_record_id: q.map(|q| q.record_id),
                comparable_cardinality: q.map(|q| q.cardinality),
                sparsity_gain: sparsity_gain(p, &baseline, tolerance),
                generalization_gain: generalization_gain(p, &baseline),
            });
        }
        let e: Vec<ExperimentRecord> = recs
            .iter()
            .filter(|r| r.variant == Variant::E_SUBSET)
            .cloned()
            .collect();
        let b: Vec<ExperimentRecord> = recs
            .iter()
            .filter(|r| r.variant == Variant::B_UCG)
            .cloned()
            .collect();
        let s = suboptimality_comparison(&e, &b);
        out.suboptimality.push(SuboptimalityRow {
            dataset: name.to_string(),
            loss_rate_risk: s.map(|s| s.loss_rate_risk),
            loss_rate_train_error: s.map(|s| s.loss_rate_train_error),
            comparisons: s.map_or(0, |s| s.comparisons),
        });
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ScatterRow {
    variant: Variant,
    cardinality: usize,
    val_error: f64,
    record_id: usize,
}

/// Column names, so that empty files still carry a header.
trait CsvRow: Serialize {
    const HEADER: &'static [&'static str];
}

impl CsvRow for ExperimentRecord {
    const HEADER: &'static [&'static str] = &[
        "id",
        "variant",
        "dataset",
        "nu",
        "lambda",
        "max_iters",
        "t_prime",
        "t",
        "split_seed",
        "solver_seed",
        "n_val",
        "cardinality",
        "train_error",
        "val_error",
        "empirical_risk",
        "total_objective",
        "wall_time",
        "status",
    ];
}

impl CsvRow for FrontierRow {
    const HEADER: &'static [&'static str] =
        &["dataset", "group", "cardinality", "val_error", "record_id"];
}

impl CsvRow for GainRow {
    const HEADER: &'static [&'static str] = &[
        "dataset",
        "record_id",
        "variant",
        "cardinality",
        "val_error",
        "tolerance",
        "comparable_record_id",
        "comparable_cardinality",
        "sparsity_gain",
        "generalization_gain",
    ];
}

impl CsvRow for SuboptimalityRow {
    const HEADER: &'static [&'static str] = &[
        "dataset",
        "loss_rate_risk",
        "loss_rate_train_error",
        "comparisons",
    ];
}

impl CsvRow for ScatterRow {
    const HEADER: &'static [&'static str] = &["variant", "cardinality", "val_error", "record_id"];
}

fn write_rows<T: CsvRow>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    w.write_record(T::HEADER).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `records.csv`, `frontiers.csv`, `gains.csv`,
/// `suboptimality.csv` and one `scatter_<dataset>.csv` per dataset into
/// `out_dir`, creating it if needed.
pub fn emit_report(
    records: &[ExperimentRecord],
    analysis: &Analysis,
    out_dir: &Path,
) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_rows(&out_dir.join("records.csv"), records)?;
    write_rows(&out_dir.join("frontiers.csv"), &analysis.frontiers)?;
    write_rows(&out_dir.join("gains.csv"), &analysis.gains)?;
    write_rows(&out_dir.join("suboptimality.csv"), &analysis.suboptimality)?;
    let mut by_dataset: BTreeMap<&str, Vec<ScatterRow>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.is_ok()) {
        by_dataset
            .entry(r.dataset.as_str())
            .or_default()
            .push(ScatterRow {
                variant: r.variant,
                cardinality: r.cardinality,
                val_error: r.val_error,
                record_id: r.id,
            });
    }
    for (name, mut rows) in by_dataset {
        rows.sort_by_key(|r| (r.variant, r.cardinality, r.record_id));
        let file: String = name
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        write_rows(&out_dir.join(format!("scatter_{file}.csv")), &rows)?;
    }
    Ok(())
}

pub fn load_records(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::csv(path, e)))
        .collect()
}
