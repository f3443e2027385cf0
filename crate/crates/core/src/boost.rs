//! Column-generation engines: cardinality-penalized totally corrective
//! boosting over fixed-point weights, the ℓ1-regularized and unregularized
//! convex baselines, hot starting, one-shot subset selection, and duality
//! gap diagnostics.

use std::fmt;
use std::fs;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::io::Write as _;
use std::path::Path;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::convex_opt::{check_dual_constraints, minimize_l1_risk};
use crate::dataset::Dataset;
use crate::discrete_opt::{
    adapt_range, brute_force_pbo, tabu_search, BoostingRmp, FixedPointCodec, FlipEvaluator,
    PseudoBooleanProblem, TabuParams, DEFAULT_BIT_DEPTH, DEFAULT_RANGE_FLOOR, MAX_EXHAUSTIVE_BITS,
};
use crate::error::{Error, Result};
use crate::hypotheses::{Dictionary, HypothesisColumn, Stump};
use crate::loss::{
    dual_objective, dual_weights, margins, primal_objective, MarginMatrix, ObjectiveBreakdown,
};

pub const DEFAULT_EPSILON: f64 = 5e-4;
pub const DEFAULT_MAX_ITERS: usize = 100;
pub const DEFAULT_MAX_BIT_DEPTH: usize = 10;
pub const DEFAULT_NEGLIGIBLE_NU: f64 = 1e-6;

/// Weighted vote of stumps. Predicts `sign(Σ_j w_j h_j(x))` with
/// `sign(0) = +1`, so the empty ensemble predicts +1 everywhere.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Ensemble {
    pub columns: Vec<HypothesisColumn>,
    pub weights: Vec<f64>,
}

impl Ensemble {
    pub fn new(columns: Vec<HypothesisColumn>, weights: Vec<f64>) -> Result<Self> {
        if columns.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} weights for {} columns",
                weights.len(),
                columns.len()
            )));
        }
        if let Some(w) = weights.iter().find(|&&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "ensemble weight {w} is not finite and nonnegative"
            )));
        }
        Ok(Self { columns, weights })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Number of strictly positive weights.
    pub fn cardinality(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }

    /// Drops every column whose weight is not strictly positive.
    pub fn pruned(&self) -> Ensemble {
        let (columns, weights) = self
            .columns
            .iter()
            .zip(&self.weights)
            .filter(|&(_, &w)| w > 0.0)
            .map(|(c, &w)| (c.clone(), w))
            .unzip();
        Ensemble { columns, weights }
    }

    pub fn stumps(&self) -> impl Iterator<Item = &Stump> + '_ {
        self.columns.iter().map(|c| &c.stump)
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.columns
            .iter()
            .zip(&self.weights)
            .map(|(c, &w)| w * f64::from(c.stump.predict(x)))
            .sum()
    }

    pub fn predict(&self, x: &[f64]) -> i8 {
        if self.score(x) >= 0.0 {
            1
        } else {
            -1
        }
    }

    /// Fraction of examples of `data` that are misclassified.
    pub fn error_rate(&self, data: &Dataset) -> f64 {
        misclassified(data, |x| self.predict(x))
    }

    /// Margins on the training set the columns were built from.
    pub fn margins(&self, labels: &[i8]) -> Vec<f64> {
        let cols: Vec<&[i8]> = self
            .columns
            .iter()
            .map(|c| c.responses.as_slice())
            .collect();
        margins(&cols, &self.weights, labels)
    }

    /// Dual weights `u_i = exp(-γ_i)` induced by this ensemble.
    pub fn dual_weights(&self, labels: &[i8]) -> Vec<f64> {
        dual_weights(&self.margins(labels))
    }

    pub fn matrix(&self, labels: &[i8]) -> MarginMatrix {
        let cols: Vec<&[i8]> = self
            .columns
            .iter()
            .map(|c| c.responses.as_slice())
            .collect();
        MarginMatrix::from_columns(&cols, labels)
    }

    /// `risk + ν‖w‖₁ + λ card(w)` on the training set.
    pub fn objective(&self, labels: &[i8], nu: f64, lambda: f64) -> Result<ObjectiveBreakdown> {
        let risk: f64 = self
            .margins(labels)
            .iter()
            .map(|&g| crate::loss::exp_loss(g))
            .sum();
        if let Some(w) = self.weights.iter().find(|&&w| !(w >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "weights must be nonnegative, found {w}"
            )));
        }
        let l1 = nu * self.weights.iter().sum::<f64>();
        let card_term = lambda * self.cardinality() as f64;
        Ok(ObjectiveBreakdown {
            risk,
            l1,
            card_term,
            total: risk + l1 + card_term,
        })
    }

    /// Writes the plain-text model file: one header line, then one
    /// `feature threshold polarity weight` line per column.
    pub fn write_model(&self, path: &Path, header: &ModelHeader) -> Result<()> {
        let mut out = String::new();
        out.push_str(&header.to_string());
        out.push('\n');
        for (stump, w) in self.stumps().zip(&self.weights) {
            out.push_str(&format!(
                "{} {} {} {}\n",
                stump.feature, stump.threshold, stump.polarity, w
            ));
        }
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(out.as_bytes())
            .map_err(|e| Error::io(path, e))
    }
}

fn misclassified(data: &Dataset, predict: impl Fn(&[f64]) -> i8) -> f64 {
    let wrong = data
        .rows()
        .zip(data.labels())
        .filter(|&(x, &y)| predict(x) != y)
        .count();
    wrong as f64 / data.n_examples() as f64
}

/// Header of a model file.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelHeader {
    pub n_examples: usize,
    pub n_features: usize,
    pub nu: f64,
    pub lambda: f64,
    pub loss: String,
}

impl fmt::Display for ModelHeader {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "m={} d={} nu={} lambda={} loss={}",
            self.n_examples, self.n_features, self.nu, self.lambda, self.loss
        )
    }
}

/// An ensemble read back from a model file. Only stumps and weights are
/// stored, so it predicts but carries no training responses.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub header: ModelHeader,
    pub stumps: Vec<Stump>,
    pub weights: Vec<f64>,
}

impl Model {
    pub fn predict(&self, x: &[f64]) -> i8 {
        let s: f64 = self
            .stumps
            .iter()
            .zip(&self.weights)
            .map(|(st, &w)| w * f64::from(st.predict(x)))
            .sum();
        if s >= 0.0 {
            1
        } else {
            -1
        }
    }

    pub fn error_rate(&self, data: &Dataset) -> f64 {
        misclassified(data, |x| self.predict(x))
    }
}

pub fn read_model(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |row: usize, column: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        column,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, head) = lines
        .next()
        .ok_or_else(|| parse_err(1, 1, "empty model file".into()))?;
    let mut fields = std::collections::HashMap::new();
    for (c, tok) in head.split_whitespace().enumerate() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| parse_err(1, c + 1, format!("expected key=value, found {tok:?}")))?;
        fields.insert(k, (c + 1, v));
    }
    let get = |key: &str| {
        fields
            .get(key)
            .copied()
            .ok_or_else(|| parse_err(1, 1, format!("header lacks {key}")))
    };
    let num = |key: &str| -> Result<f64> {
        let (c, v) = get(key)?;
        v.parse()
            .map_err(|_| parse_err(1, c, format!("{key} is not a number: {v:?}")))
    };
    let count = |key: &str| -> Result<usize> {
        let (c, v) = get(key)?;
        v.parse()
            .map_err(|_| parse_err(1, c, format!("{key} is not a count: {v:?}")))
    };
    let header = ModelHeader {
        n_examples: count("m")?,
        n_features: count("d")?,
        nu: num("nu")?,
        lambda: num("lambda")?,
        loss: get("loss")?.1.to_string(),
    };

    let mut stumps = Vec::new();
    let mut weights = Vec::new();
    for (i, line) in lines {
        let row = i + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(Error::RaggedRow {
                path: path.to_path_buf(),
                row,
                found: toks.len(),
                expected: 4,
            });
        }
        let feature: usize = toks[0]
            .parse()
            .map_err(|_| parse_err(row, 1, format!("bad feature index {:?}", toks[0])))?;
        if feature >= header.n_features {
            return Err(parse_err(row, 1, format!("feature {feature} out of range")));
        }
        let threshold: f64 = toks[1]
            .parse()
            .map_err(|_| parse_err(row, 2, format!("bad threshold {:?}", toks[1])))?;
        let polarity: i8 = match toks[2] {
            "1" | "+1" => 1,
            "-1" => -1,
            other => {
                return Err(parse_err(
                    row,
                    3,
                    format!("polarity must be ±1, found {other:?}"),
                ))
            }
        };
        let weight: f64 = toks[3]
            .parse()
            .map_err(|_| parse_err(row, 4, format!("bad weight {:?}", toks[3])))?;
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(parse_err(
                row,
                4,
                format!("weight must be finite and nonnegative, found {weight}"),
            ));
        }
        stumps.push(Stump::new(feature, threshold, polarity));
        weights.push(weight);
    }
    Ok(Model {
        header,
        stumps,
        weights,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscreteSolver {
    #[default]
    Tabu,
    BruteForce,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostConfig {
    pub nu: f64,
    pub lambda: f64,
    pub epsilon: f64,
    /// Iteration budget `T`.
    pub max_iters: usize,
    pub bit_depth: usize,
    pub max_bit_depth: usize,
    /// Raise the bit depth while the grid cannot get within `10ε` of the
    /// continuous ℓ1 optimum.
    pub escalate_bit_depth: bool,
    pub range_floor: f64,
    pub zero_tol: f64,
    pub convex_max_iters: usize,
    pub discrete_solver: DiscreteSolver,
    pub tabu: TabuParams,
    /// `None` checks the dual constraints only when `lambda == 0`.
    pub dual_check: Option<bool>,
    pub hot_start_t_prime: Option<usize>,
    /// ν of the unregularized baseline and its hot-start prefix.
    pub ucg_nu: f64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            nu: DEFAULT_NEGLIGIBLE_NU,
            lambda: 0.0,
            epsilon: DEFAULT_EPSILON,
            max_iters: DEFAULT_MAX_ITERS,
            bit_depth: DEFAULT_BIT_DEPTH,
            max_bit_depth: DEFAULT_MAX_BIT_DEPTH,
            escalate_bit_depth: true,
            range_floor: DEFAULT_RANGE_FLOOR,
            zero_tol: crate::loss::DEFAULT_ZERO_TOL,
            convex_max_iters: crate::convex_opt::DEFAULT_MAX_ITERS,
            discrete_solver: DiscreteSolver::Tabu,
            tabu: TabuParams::default(),
            dual_check: None,
            hot_start_t_prime: None,
            ucg_nu: DEFAULT_NEGLIGIBLE_NU,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.nu > 0.0) || !(self.ucg_nu > 0.0) {
            return bad(format!(
                "nu must be positive (nu = {}, ucg_nu = {})",
                self.nu, self.ucg_nu
            ));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            ));
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if self.bit_depth == 0 || self.bit_depth > self.max_bit_depth || self.max_bit_depth > 30 {
            return bad(format!(
                "need 1 <= bit_depth ({}) <= max_bit_depth ({}) <= 30",
                self.bit_depth, self.max_bit_depth
            ));
        }
        if !(self.range_floor > 0.0) {
            return bad(format!(
                "range_floor must be positive, got {}",
                self.range_floor
            ));
        }
        if !(self.zero_tol >= 0.0) {
            return bad(format!(
                "zero_tol must be nonnegative, got {}",
                self.zero_tol
            ));
        }
        if self.convex_max_iters == 0 {
            return bad("convex_max_iters must be at least 1".into());
        }
        if self.tabu.restarts == 0 || self.tabu.iters_per_restart == 0 {
            return bad("tabu restarts and iters_per_restart must be positive".into());
        }
        Ok(())
    }

    fn dual_check_enabled(&self) -> bool {
        self.dual_check.unwrap_or(self.lambda == 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    /// No dictionary column has edge above `ν + ε`.
    DualFeasible,
    DictionaryExhausted,
    IterationLimit,
    /// The oracle is satisfied but an active column still violates its
    /// dual constraint because the convex solve stopped early.
    ActiveSetUnconverged,
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TerminationReason::DualFeasible => "dual_feasible",
            TerminationReason::DictionaryExhausted => "dictionary_exhausted",
            TerminationReason::IterationLimit => "iteration_limit",
            TerminationReason::ActiveSetUnconverged => "active_set_unconverged",
        };
        f.write_str(s)
    }
}

/// One completed loop body. Discrete fields are empty for the convex
/// engines; column fields are empty for the hot-start solve that adds no
/// column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub column: Option<usize>,
    pub feature: Option<usize>,
    pub threshold: Option<f64>,
    pub polarity: Option<i8>,
    pub edge: Option<f64>,
    pub bit_depth: Option<usize>,
    pub range: Option<f64>,
    pub discrete_objective: Option<f64>,
    pub refined_objective: f64,
    /// Objective of the weights carried forward.
    pub total_objective: f64,
    pub cardinality: usize,
    pub kept_previous: bool,
    pub u_digest: String,
    pub duality_gap: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterationLog {
    pub records: Vec<IterationRecord>,
}

impl IterationLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        for r in &self.records {
            w.serialize(r).map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Order-sensitive digest of the exact bit patterns of `u`.
pub fn digest(u: &[f64]) -> String {
    let mut h = DefaultHasher::new();
    for v in u {
        v.to_bits().hash(&mut h);
    }
    format!("{:016x}", h.finish())
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoostRun {
    /// Final ensemble, strictly positive weights only.
    pub ensemble: Ensemble,
    pub log: IterationLog,
    pub termination: TerminationReason,
    /// Dictionary indices of every generated column, in generation order.
    pub generated: Vec<usize>,
}

/// Refined ensemble after `t` generated columns. Columns whose weight is
/// zero are kept so that the column set is the first `t` generated ones.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: usize,
    pub ensemble: Ensemble,
    /// `risk + ν‖w‖₁`.
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UcgRun {
    pub snapshots: Vec<Snapshot>,
    pub log: IterationLog,
    pub termination: TerminationReason,
    pub generated: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HotStartRun {
    pub prefix: UcgRun,
    pub run: BoostRun,
}

/// Column-generation state shared by all engines.
struct CgState<'a> {
    dict: Dictionary,
    labels: &'a [i8],
    active: Vec<usize>,
    weights: Vec<f64>,
    u: Vec<f64>,
}

impl<'a> CgState<'a> {
    /// Starts from the empty ensemble with every dual weight equal to
    /// `initial_u`.
    fn new(train: &'a Dataset, dict: &Dictionary, initial_u: f64) -> Result<Self> {
        let m = train.n_examples();
        if dict.n_examples() != m {
            return Err(Error::InvalidArgument(format!(
                "dictionary was built on {} examples but the training set has {m}",
                dict.n_examples()
            )));
        }
        if dict.is_empty() {
            return Err(Error::InvalidArgument("dictionary is empty".into()));
        }
        Ok(Self {
            dict: dict.clone(),
            labels: train.labels(),
            active: Vec::new(),
            weights: Vec::new(),
            u: vec![initial_u; m],
        })
    }

    fn matrix(&self) -> MarginMatrix {
        let cols: Vec<&[i8]> = self
            .active
            .iter()
            .map(|&j| self.dict.column(j).responses.as_slice())
            .collect();
        MarginMatrix::from_columns(&cols, self.labels)
    }

    fn ensemble(&self) -> Ensemble {
        Ensemble {
            columns: self
                .active
                .iter()
                .map(|&j| self.dict.column(j).clone())
                .collect(),
            weights: self.weights.clone(),
        }
    }

    fn update_u(&mut self) {
        let cols: Vec<&[i8]> = self
            .active
            .iter()
            .map(|&j| self.dict.column(j).responses.as_slice())
            .collect();
        self.u = dual_weights(&margins(&cols, &self.weights, self.labels));
    }

    fn add(&mut self, index: usize) {
        self.dict.blacklist_index(index);
        self.active.push(index);
        self.weights.push(0.0);
    }

    /// `primal - dual(u)` when `u` satisfies every dictionary constraint
    /// within `eps`.
    fn gap(&self, primal: f64, nu: f64, eps: f64) -> Result<Option<f64>> {
        let violations = check_dual_constraints(self.dict.columns(), self.labels, &self.u, nu, eps);
        if violations.is_empty() {
            Ok(Some(primal - dual_objective(&self.u, 0.0)?))
        } else {
            Ok(None)
        }
    }

    fn record(&self, iteration: usize, choice: Option<(usize, f64)>) -> IterationRecord {
        let stump = choice.map(|(j, _)| self.dict.column(j).stump);
        IterationRecord {
            iteration,
            column: choice.map(|(j, _)| j),
            feature: stump.map(|s| s.feature),
            threshold: stump.map(|s| s.threshold),
            polarity: stump.map(|s| s.polarity),
            edge: choice.map(|(_, e)| e),
            bit_depth: None,
            range: None,
            discrete_objective: None,
            refined_objective: f64::NAN,
            total_objective: f64::NAN,
            cardinality: self.weights.iter().filter(|&&w| w > 0.0).count(),
            kept_previous: false,
            u_digest: digest(&self.u),
            duality_gap: None,
        }
    }
}

/// Outcome of one cardinality-penalized restricted master problem.
#[derive(Clone, Debug, PartialEq)]
pub struct RmpSolution {
    pub discrete_weights: Vec<f64>,
    pub discrete_objective: f64,
    pub refined_weights: Vec<f64>,
    pub refined_objective: f64,
    pub bit_depth: usize,
    pub range: f64,
}

/// `λ = 0` objective reachable on the grid: round the continuous optimum
/// to the nearest levels, then descend by single flips.
fn grid_l1_value(matrix: &MarginMatrix, codec: FixedPointCodec, nu: f64, w: &[f64]) -> Result<f64> {
    let levels: Vec<u32> = w.iter().map(|&v| codec.nearest_level(v)).collect();
    let bits = codec.encode_levels(&levels);
    let rmp = BoostingRmp::new(matrix, codec, nu, 0.0)?;
    let mut ev = rmp.evaluator(&bits);
    loop {
        let current = ev.value();
        let mut best: Option<(usize, f64)> = None;
        for k in 0..codec.n_bits() {
            let v = ev.peek_flip(k);
            if v < current && best.is_none_or(|(_, b)| v < b) {
                best = Some((k, v));
            }
        }
        match best {
            Some((k, _)) => {
                ev.flip(k);
            }
            None => return Ok(current),
        }
    }
}

/// Discrete cardinality-penalized solve over all columns of `matrix`,
/// followed by convex refinement of the selected support warm-started at
/// the discrete weights. `bit_depth` carries the escalated depth across
/// calls; `seed_offset` decorrelates tabu seeds between iterations.
pub fn solve_cp_rmp(
    matrix: &MarginMatrix,
    warm: &[f64],
    config: &BoostConfig,
    bit_depth: &mut usize,
    seed_offset: u64,
) -> Result<RmpSolution> {
    let n = matrix.n_cols();
    let (nu, lambda) = (config.nu, config.lambda);
    let continuous = minimize_l1_risk(matrix, nu, warm, config.epsilon, config.convex_max_iters)?;
    let range = adapt_range(&continuous.w_tilde, config.range_floor);

    let cap = match config.discrete_solver {
        DiscreteSolver::Tabu => config.max_bit_depth,
        DiscreteSolver::BruteForce => config.max_bit_depth.min(MAX_EXHAUSTIVE_BITS / n),
    };
    if cap == 0 {
        return Err(Error::TooManyBits {
            bits: n,
            limit: MAX_EXHAUSTIVE_BITS,
        });
    }
    if *bit_depth > cap {
        debug!(
            "bit depth {} capped at {cap} for exhaustive search over {n} weights",
            *bit_depth
        );
    }
    let mut depth = (*bit_depth).min(cap);
    if config.escalate_bit_depth {
        while depth < cap {
            let codec = FixedPointCodec::new(depth, range, n)?;
            let excess =
                grid_l1_value(matrix, codec, nu, &continuous.w_tilde)? - continuous.objective;
            if excess <= 10.0 * config.epsilon {
                break;
            }
            depth += 1;
            info!(
                "grid misses the continuous optimum by {excess:.3e}; bit depth raised to {depth}"
            );
        }
    }
    *bit_depth = (*bit_depth).max(depth);

    let codec = FixedPointCodec::new(depth, range, n)?;
    let rmp = BoostingRmp::new(matrix, codec, nu, lambda)?;
    let result = match config.discrete_solver {
        DiscreteSolver::Tabu => {
            let mut params = config.tabu.clone();
            params.seed = params.seed.wrapping_add(seed_offset);
            tabu_search(&rmp, &params)?
        }
        DiscreteSolver::BruteForce => brute_force_pbo(&rmp)?,
    };
    let discrete = rmp.decode(&result.best_bits);

    let support: Vec<usize> = (0..n).filter(|&j| discrete[j] != 0.0).collect();
    let mut refined = vec![0.0; n];
    if !support.is_empty() {
        let sub = matrix.select(&support);
        let w0: Vec<f64> = support.iter().map(|&j| discrete[j]).collect();
        let r = minimize_l1_risk(&sub, nu, &w0, config.epsilon, config.convex_max_iters)?;
        if !r.converged {
            warn!(
                "support refinement stopped before convergence ({:.3e})",
                r.projected_gradient_infnorm
            );
        }
        for (&j, &w) in support.iter().zip(&r.w_tilde) {
            refined[j] = if w > config.zero_tol { w } else { 0.0 };
        }
    }
    let refined_objective = primal_objective(matrix, &refined, nu, lambda, 0.0)?.total;
    Ok(RmpSolution {
        discrete_weights: discrete,
        discrete_objective: result.best_value,
        refined_weights: refined,
        refined_objective,
        bit_depth: depth,
        range,
    })
}

/// One restricted master problem inside the CP loop: solve, keep the better
/// of the previous weights and the refined solution, update `u`.
fn cp_step(
    state: &mut CgState<'_>,
    config: &BoostConfig,
    bit_depth: &mut usize,
    iteration: usize,
    choice: Option<(usize, f64)>,
) -> Result<IterationRecord> {
    let matrix = state.matrix();
    let previous = primal_objective(&matrix, &state.weights, config.nu, config.lambda, 0.0)?.total;
    let sol = solve_cp_rmp(&matrix, &state.weights, config, bit_depth, iteration as u64)?;
    let kept_previous = sol.refined_objective > previous;
    if kept_previous {
        info!(
            "iteration {iteration}: discrete solve reached {:.6e}, worse than the previous {:.6e}; keeping previous weights",
            sol.refined_objective, previous
        );
    } else {
        state.weights = sol.refined_weights.clone();
    }
    state.update_u();
    let total = sol.refined_objective.min(previous);
    let mut rec = state.record(iteration, choice);
    rec.bit_depth = Some(sol.bit_depth);
    rec.range = Some(sol.range);
    rec.discrete_objective = Some(sol.discrete_objective);
    rec.refined_objective = sol.refined_objective;
    rec.total_objective = total;
    rec.kept_previous = kept_previous;
    rec.duality_gap = state.gap(total, config.nu, config.epsilon)?;
    Ok(rec)
}

fn run_cp(
    train: &Dataset,
    dict: &Dictionary,
    config: &BoostConfig,
    initial: Option<(&[usize], &[f64])>,
) -> Result<BoostRun> {
    config.validate()?;
    let mut state = CgState::new(train, dict, 1.0 / train.n_examples() as f64)?;
    let mut log = IterationLog::default();
    let mut bit_depth = config.bit_depth;
    let mut t = 0;

    if let Some((active, weights)) = initial.filter(|(a, _)| !a.is_empty()) {
        for &j in active {
            state.add(j);
        }
        state.weights = weights.to_vec();
        t = active.len();
        log.records
            .push(cp_step(&mut state, config, &mut bit_depth, t, None)?);
    }

    let dual_check = config.dual_check_enabled();
    let termination = loop {
        if t >= config.max_iters {
            break TerminationReason::IterationLimit;
        }
        let Some(choice) = state.dict.oracle_best_column(&state.u, state.labels)? else {
            break TerminationReason::DictionaryExhausted;
        };
        if dual_check && choice.edge <= config.nu + config.epsilon {
            break TerminationReason::DualFeasible;
        }
        state.add(choice.index);
        t += 1;
        let rec = cp_step(
            &mut state,
            config,
            &mut bit_depth,
            t,
            Some((choice.index, choice.edge)),
        )?;
        debug!(
            "cp iteration {t}: edge {:.4e}, objective {:.6e}, cardinality {}",
            choice.edge, rec.total_objective, rec.cardinality
        );
        log.records.push(rec);
    };

    let ensemble = state.ensemble().pruned();
    if ensemble.is_empty() {
        warn!("cardinality-penalized run ended with an empty ensemble");
    }
    Ok(BoostRun {
        ensemble,
        log,
        termination,
        generated: state.active,
    })
}

/// Totally corrective boosting with a cardinality penalty. Every iteration
/// adds the most violated column, solves the penalized restricted master
/// problem over fixed-point weights, and refines the selected support with
/// the convex solver. Offered columns are blacklisted but stay in the
/// restricted problem so later solves can re-activate them.
pub fn total_q_boost(train: &Dataset, dict: &Dictionary, config: &BoostConfig) -> Result<BoostRun> {
    run_cp(train, dict, config, None)
}

/// ℓ1-regularized column generation run to ε-convergence: stops when no
/// dictionary column has edge above `ν + ε`, or after `max_iters` columns.
pub fn l1_cg(train: &Dataset, dict: &Dictionary, config: &BoostConfig) -> Result<BoostRun> {
    config.validate()?;
    let (state, log, termination) = convex_cg(
        train,
        dict,
        config,
        config.nu,
        config.max_iters,
        true,
        |_, _| {},
    )?;
    Ok(BoostRun {
        ensemble: state.ensemble().pruned(),
        log,
        termination,
        generated: state.active,
    })
}

/// Column generation with the negligible `ucg_nu`, run for `max_iters`
/// columns or until the dictionary is exhausted, snapshotting the refined
/// ensemble after every iteration.
pub fn ucg_early_stopping(
    train: &Dataset,
    dict: &Dictionary,
    config: &BoostConfig,
) -> Result<UcgRun> {
    config.validate()?;
    ucg(train, dict, config, config.max_iters)
}

fn ucg(
    train: &Dataset,
    dict: &Dictionary,
    config: &BoostConfig,
    max_iters: usize,
) -> Result<UcgRun> {
    let nu = config.ucg_nu;
    let mut snapshots = Vec::new();
    let (state, log, termination) =
        convex_cg(train, dict, config, nu, max_iters, false, |state, t| {
            let ensemble = state.ensemble();
            let objective = ensemble
                .objective(state.labels, nu, 0.0)
                .map(|o| o.total)
                .unwrap_or(f64::NAN);
            snapshots.push(Snapshot {
                t,
                ensemble,
                objective,
            });
        })?;
    Ok(UcgRun {
        snapshots,
        log,
        termination,
        generated: state.active,
    })
}

/// Convex column generation for `min Σ exp(-γ_i) + ν‖w‖₁`. With
/// `dual_check` it stops once no column has edge above `ν + ε`.
fn convex_cg<'a>(
    train: &'a Dataset,
    dict: &Dictionary,
    config: &BoostConfig,
    nu: f64,
    max_iters: usize,
    dual_check: bool,
    mut on_iteration: impl FnMut(&CgState<'a>, usize),
) -> Result<(CgState<'a>, IterationLog, TerminationReason)> {
    // u = exp(-0) = 1 is the exact dual point of the empty ensemble.
    let mut state = CgState::new(train, dict, 1.0)?;
    let mut log = IterationLog::default();
    let mut t = 0;
    let termination = loop {
        if t >= max_iters {
            break TerminationReason::IterationLimit;
        }
        let Some(choice) = state.dict.oracle_best_column(&state.u, state.labels)? else {
            break TerminationReason::DictionaryExhausted;
        };
        if dual_check && choice.edge <= nu + config.epsilon {
            break TerminationReason::DualFeasible;
        }
        state.add(choice.index);
        t += 1;
        let matrix = state.matrix();
        let r = minimize_l1_risk(
            &matrix,
            nu,
            &state.weights,
            config.epsilon,
            config.convex_max_iters,
        )?;
        if !r.converged {
            warn!(
                "iteration {t}: convex solve stopped with projected gradient {:.3e}",
                r.projected_gradient_infnorm
            );
        }
        state.weights = r.w_tilde;
        state.update_u();
        let mut rec = state.record(t, Some((choice.index, choice.edge)));
        rec.refined_objective = r.objective;
        rec.total_objective = r.objective;
        rec.duality_gap = state.gap(r.objective, nu, config.epsilon)?;
        log.records.push(rec);
        on_iteration(&state, t);
    };

    if dual_check && termination != TerminationReason::IterationLimit {
        let violations = check_dual_constraints(
            state.dict.columns(),
            state.labels,
            &state.u,
            nu,
            config.epsilon,
        );
        if !violations.is_empty() {
            warn!(
                "{} active columns violate their dual constraints at termination",
                violations.len()
            );
            return Ok((state, log, TerminationReason::ActiveSetUnconverged));
        }
        return Ok((state, log, TerminationReason::DualFeasible));
    }
    Ok((state, log, termination))
}

/// Unregularized prefix of `T′` columns followed by the cardinality-penalized
/// loop, which starts from the prefix's columns (all blacklisted) and
/// weights and first re-solves the penalized problem over them.
pub fn hot_started_cpcg(
    train: &Dataset,
    dict: &Dictionary,
    config: &BoostConfig,
) -> Result<HotStartRun> {
    config.validate()?;
    let requested = config
        .hot_start_t_prime
        .ok_or_else(|| Error::InvalidArgument("hot start needs hot_start_t_prime".into()))?;
    let t_prime = requested.min(dict.len());
    if t_prime < requested {
        warn!("T' = {requested} exceeds the dictionary size; truncated to {t_prime}");
    }
    let prefix = ucg(train, dict, config, t_prime)?;
    let weights = prefix
        .snapshots
        .last()
        .map(|s| s.ensemble.weights.clone())
        .unwrap_or_default();
    let run = run_cp(train, dict, config, Some((&prefix.generated, &weights)))?;
    Ok(HotStartRun { prefix, run })
}

/// One penalized solve per λ over a fixed column set; no columns are
/// generated.
pub fn subset_selection(
    columns: &[HypothesisColumn],
    train: &Dataset,
    config: &BoostConfig,
    lambdas: &[f64],
) -> Result<Vec<(f64, Ensemble)>> {
    if columns.is_empty() {
        return Err(Error::InvalidArgument(
            "subset selection needs at least one column".into(),
        ));
    }
    let cols: Vec<&[i8]> = columns.iter().map(|c| c.responses.as_slice()).collect();
    if cols.iter().any(|c| c.len() != train.n_examples()) {
        return Err(Error::InvalidArgument(
            "column responses do not match the training set".into(),
        ));
    }
    let matrix = MarginMatrix::from_columns(&cols, train.labels());
    lambdas
        .iter()
        .map(|&lambda| {
            let cfg = BoostConfig {
                lambda,
                ..config.clone()
            };
            cfg.validate()?;
            let mut depth = cfg.bit_depth;
            let sol = solve_cp_rmp(&matrix, &vec![0.0; columns.len()], &cfg, &mut depth, 0)?;
            let ensemble = Ensemble {
                columns: columns.to_vec(),
                weights: sol.refined_weights,
            };
            Ok((lambda, ensemble.pruned()))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualityGap {
    /// Penalized primal objective of the ensemble.
    pub primal: f64,
    /// Best dual value over the feasible candidate dual points, `None` when
    /// none is feasible.
    pub lower_bound: Option<f64>,
    pub gap: Option<f64>,
}

/// Gap between the penalized primal value of `ensemble` and the dual value
/// of the dual point `u_i = exp(-γ_i)` it induces. A reference ensemble
/// contributes a second candidate dual point; only points satisfying every
/// dictionary constraint within `epsilon` are used.
pub fn compute_duality_gap(
    ensemble: &Ensemble,
    dict: &Dictionary,
    labels: &[i8],
    nu: f64,
    lambda: f64,
    epsilon: f64,
    reference: Option<&Ensemble>,
) -> Result<DualityGap> {
    if dict.n_examples() != labels.len() {
        return Err(Error::InvalidArgument(
            "dictionary and labels disagree on m".into(),
        ));
    }
    let primal = ensemble.objective(labels, nu, lambda)?.total;
    let mut lower_bound: Option<f64> = None;
    for candidate in std::iter::once(ensemble).chain(reference) {
        let u = candidate.dual_weights(labels);
        if check_dual_constraints(dict.columns(), labels, &u, nu, epsilon).is_empty() {
            let d = dual_objective(&u, lambda)?;
            lower_bound = Some(lower_bound.map_or(d, |b| b.max(d)));
        }
    }
    Ok(DualityGap {
        primal,
        lower_bound,
        gap: lower_bound.map(|b| primal - b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::make_synthetic_two_gaussians;

    fn separable_1d(m: usize) -> Dataset {
        let x: Vec<f64> = (0..m).map(|i| i as f64).collect();
        let y: Vec<i8> = (0..m).map(|i| if i < m / 2 { -1 } else { 1 }).collect();
        Dataset::new(x, y, 1).unwrap()
    }

    fn noisy(m: usize, seed: u64) -> Dataset {
        make_synthetic_two_gaussians(m, 3, 1.0, seed).unwrap()
    }

    fn exact(lambda: f64) -> BoostConfig {
        BoostConfig {
            lambda,
            discrete_solver: DiscreteSolver::BruteForce,
            ..BoostConfig::default()
        }
    }

    #[test]
    fn empty_ensemble_predicts_positive() {
        let e = Ensemble::default();
        assert_eq!(e.predict(&[1.0, -3.0]), 1);
        assert_eq!(e.cardinality(), 0);
    }

    #[test]
    fn model_file_round_trip() {
        let data = noisy(20, 1);
        let dict = Dictionary::enumerate_candidates(&data);
        let e = Ensemble::new(
            vec![dict.column(3).clone(), dict.column(7).clone()],
            vec![0.125, 2.0 / 3.0],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        let header = ModelHeader {
            n_examples: 20,
            n_features: 3,
            nu: 1e-6,
            lambda: 0.5,
            loss: "exp".into(),
        };
        e.write_model(&path, &header).unwrap();
        let model = read_model(&path).unwrap();
        assert_eq!(model.header, header);
        assert_eq!(model.weights, e.weights);
        assert_eq!(model.stumps, e.stumps().copied().collect::<Vec<_>>());
        assert_eq!(model.error_rate(&data), e.error_rate(&data));
    }

    #[test]
    fn huge_nu_stops_immediately() {
        let data = noisy(30, 2);
        let dict = Dictionary::enumerate_candidates(&data);
        let cfg = BoostConfig {
            nu: 100.0,
            ..BoostConfig::default()
        };
        let run = l1_cg(&data, &dict, &cfg).unwrap();
        assert!(run.log.len() <= 1);
        assert!(run.ensemble.is_empty());
        assert_eq!(run.termination, TerminationReason::DualFeasible);
    }

    #[test]
    fn l1_cg_separates_and_passes_audit() {
        let data = separable_1d(12);
        let dict = Dictionary::enumerate_candidates(&data);
        let cfg = BoostConfig {
            nu: 0.01,
            ..BoostConfig::default()
        };
        let run = l1_cg(&data, &dict, &cfg).unwrap();
        assert_eq!(run.termination, TerminationReason::DualFeasible);
        assert!(run.ensemble.margins(data.labels()).iter().all(|&g| g > 0.0));
        let u = run.ensemble.dual_weights(data.labels());
        let max_edge = dict
            .edges(&u, data.labels())
            .into_iter()
            .fold(f64::MIN, f64::max);
        assert!(max_edge <= cfg.nu + cfg.epsilon);
    }

    #[test]
    fn ucg_snapshots_are_prefixes() {
        let data = noisy(40, 3);
        let dict = Dictionary::enumerate_candidates(&data);
        let cfg = BoostConfig {
            max_iters: 5,
            ..BoostConfig::default()
        };
        let run = ucg_early_stopping(&data, &dict, &cfg).unwrap();
        assert_eq!(run.snapshots.len(), 5.min(dict.len()));
        for (k, s) in run.snapshots.iter().enumerate() {
            assert_eq!(s.t, k + 1);
            assert!(s.ensemble.cardinality() <= s.t);
            let ids: Vec<usize> = s
                .ensemble
                .columns
                .iter()
                .map(|c| dict.find(c).unwrap())
                .collect();
            assert_eq!(ids, run.generated[..s.t]);
        }
        for w in run.snapshots.windows(2) {
            assert!(w[1].objective <= w[0].objective + 1e-6);
        }
    }

    #[test]
    fn prohibitive_lambda_gives_empty_ensemble() {
        let data = noisy(16, 4);
        let dict = Dictionary::enumerate_candidates(&data);
        let cfg = BoostConfig {
            max_iters: 3,
            ..exact(17.0)
        };
        let run = total_q_boost(&data, &dict, &cfg).unwrap();
        assert!(run.ensemble.is_empty());
        let last = run.log.records.last().unwrap();
        assert_eq!(last.total_objective, 16.0);
    }

    #[test]
    fn zero_lambda_matches_l1_support() {
        let data = separable_1d(10);
        let dict = Dictionary::enumerate_candidates(&data);
        let cfg = BoostConfig {
            nu: 0.01,
            ..exact(0.0)
        };
        let cp = total_q_boost(&data, &dict, &cfg).unwrap();
        let l1 = l1_cg(&data, &dict, &cfg).unwrap();
        let support = |e: &Ensemble| {
            let mut ids: Vec<usize> = e.columns.iter().map(|c| dict.find(c).unwrap()).collect();
            ids.sort();
            ids
        };
        assert_eq!(support(&cp.ensemble), support(&l1.ensemble));
    }

    #[test]
    fn loop_invariants_hold() {
        let data = noisy(30, 5);
        let dict = Dictionary::enumerate_candidates(&data);
        let cfg = BoostConfig {
            max_iters: 6,
            tabu: TabuParams {
                restarts: 4,
                iters_per_restart: 200,
                ..TabuParams::default()
            },
            ..BoostConfig {
                lambda: 0.5,
                ..BoostConfig::default()
            }
        };
        let run = total_q_boost(&data, &dict, &cfg).unwrap();
        let mut seen = std::collections::HashSet::new();
        assert!(run.generated.iter().all(|j| seen.insert(*j)));
        for r in &run.log.records {
            assert!(r.refined_objective <= r.discrete_objective.unwrap() + 1e-9);
        }
        for w in run.log.records.windows(2) {
            assert!(w[1].total_objective <= w[0].total_objective);
        }
        assert!(run.ensemble.weights.iter().all(|&w| w > 0.0));
        let again = total_q_boost(&data, &dict, &cfg).unwrap();
        assert_eq!(run.log, again.log);
    }

    #[test]
    fn hot_start_with_empty_prefix_is_plain_cp() {
        let data = noisy(24, 6);
        let dict = Dictionary::enumerate_candidates(&data);
        let cfg = BoostConfig {
            max_iters: 3,
            hot_start_t_prime: Some(0),
            ..exact(0.3)
        };
        let hot = hot_started_cpcg(&data, &dict, &cfg).unwrap();
        let plain = total_q_boost(&data, &dict, &cfg).unwrap();
        assert!(hot.prefix.snapshots.is_empty());
        assert_eq!(hot.run, plain);
    }

    #[test]
    fn hot_start_never_worse_than_prefix() {
        let data = noisy(24, 7);
        let dict = Dictionary::enumerate_candidates(&data);
        let cfg = BoostConfig {
            max_iters: 4,
            hot_start_t_prime: Some(3),
            ..exact(0.3)
        };
        let hot = hot_started_cpcg(&data, &dict, &cfg).unwrap();
        let prefix = &hot.prefix.snapshots.last().unwrap().ensemble;
        let before = prefix
            .objective(data.labels(), cfg.nu, cfg.lambda)
            .unwrap()
            .total;
        let after = hot
            .run
            .ensemble
            .objective(data.labels(), cfg.nu, cfg.lambda)
            .unwrap()
            .total;
        assert!(after <= before + 1e-9);
        assert!(hot.run.log.records[0].column.is_none());
    }

    #[test]
    fn hot_start_prefix_truncated_to_dictionary() {
        let data = separable_1d(6);
        let dict = Dictionary::enumerate_candidates(&data);
        let cfg = BoostConfig {
            hot_start_t_prime: Some(1000),
            ..exact(0.1)
        };
        let hot = hot_started_cpcg(&data, &dict, &cfg).unwrap();
        assert_eq!(hot.prefix.generated.len(), dict.len());
        assert_eq!(hot.run.termination, TerminationReason::DictionaryExhausted);
    }

    #[test]
    fn subset_selection_extremes() {
        let data = noisy(20, 8);
        let dict = Dictionary::enumerate_candidates(&data);
        let cols: Vec<HypothesisColumn> = (0..3).map(|j| dict.column(j * 5).clone()).collect();
        let out = subset_selection(&cols, &data, &exact(0.0), &[0.0, 1e6]).unwrap();
        assert!(out[1].1.is_empty());
        let matrix = MarginMatrix::from_columns(
            &cols
                .iter()
                .map(|c| c.responses.as_slice())
                .collect::<Vec<_>>(),
            data.labels(),
        );
        let full = minimize_l1_risk(&matrix, 1e-6, &[0.0; 3], 5e-4, 500).unwrap();
        let full_support = full.w_tilde.iter().filter(|&&w| w > 0.0).count();
        assert_eq!(out[0].1.cardinality(), full_support);
    }

    #[test]
    fn gap_is_none_for_infeasible_dual_point() {
        let data = noisy(20, 9);
        let dict = Dictionary::enumerate_candidates(&data);
        let g = compute_duality_gap(
            &Ensemble::default(),
            &dict,
            data.labels(),
            1e-3,
            0.0,
            5e-4,
            None,
        )
        .unwrap();
        assert_eq!(g.primal, 20.0);
        assert!(g.gap.is_none());
    }
}
