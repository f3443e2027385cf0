//! Discrete weight optimization: fixed-point binary encoding of nonnegative
//! weights, black-box pseudo-boolean objectives with incremental single-flip
//! evaluation, multistart tabu search and an exhaustive reference solver.

use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{exp_loss, MarginMatrix, ObjectiveBreakdown};

pub const DEFAULT_BIT_DEPTH: usize = 6;
pub const DEFAULT_RANGE_FLOOR: f64 = 1.0;
/// Largest problem `brute_force_pbo` accepts.
pub const MAX_EXHAUSTIVE_BITS: usize = 24;
const MAX_BIT_DEPTH: usize = 30;

/// Maps `bit_depth` bits per weight (LSB first, contiguous per weight) to
/// the uniform grid `{0, r/(2^B-1), ..., r}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPointCodec {
    bit_depth: usize,
    range: f64,
    n_weights: usize,
}

impl FixedPointCodec {
    pub fn new(bit_depth: usize, range: f64, n_weights: usize) -> Result<Self> {
        if bit_depth == 0 || bit_depth > MAX_BIT_DEPTH {
            return Err(Error::InvalidArgument(format!(
                "bit depth must be in 1..={MAX_BIT_DEPTH}, got {bit_depth}"
            )));
        }
        if !(range > 0.0 && range.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "range must be positive, got {range}"
            )));
        }
        Ok(Self {
            bit_depth,
            range,
            n_weights,
        })
    }

    pub fn bit_depth(&self) -> usize {
        self.bit_depth
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn n_weights(&self) -> usize {
        self.n_weights
    }

    pub fn n_bits(&self) -> usize {
        self.bit_depth * self.n_weights
    }

    /// Largest integer level, `2^B - 1`.
    pub fn max_level(&self) -> u32 {
        (1u32 << self.bit_depth) - 1
    }

    pub fn step(&self) -> f64 {
        self.range / f64::from(self.max_level())
    }

    #[inline]
    pub fn level_value(&self, level: u32) -> f64 {
        self.range * (f64::from(level) / f64::from(self.max_level()))
    }

    pub fn level_of(&self, bits: &[bool], weight: usize) -> u32 {
        let block = &bits[weight * self.bit_depth..(weight + 1) * self.bit_depth];
        block
            .iter()
            .enumerate()
            .map(|(k, &b)| u32::from(b) << k)
            .sum()
    }

    pub fn decode(&self, bits: &[bool]) -> Result<Vec<f64>> {
        if bits.len() != self.n_bits() {
            return Err(Error::InvalidArgument(format!(
                "expected {} bits, got {}",
                self.n_bits(),
                bits.len()
            )));
        }
        Ok((0..self.n_weights)
            .map(|j| self.level_value(self.level_of(bits, j)))
            .collect())
    }

    pub fn encode_levels(&self, levels: &[u32]) -> Vec<bool> {
        assert_eq!(levels.len(), self.n_weights);
        levels
            .iter()
            .flat_map(|&l| (0..self.bit_depth).map(move |k| (l >> k) & 1 == 1))
            .collect()
    }

    /// Nearest grid level to `w`, clamped into `[0, r]`.
    pub fn nearest_level(&self, w: f64) -> u32 {
        let scaled = (w / self.range * f64::from(self.max_level())).round();
        scaled.clamp(0.0, f64::from(self.max_level())) as u32
    }
}

/// Grid range for the next discrete solve: twice the largest previous
/// continuous weight, never below `floor`.
pub fn adapt_range(previous: &[f64], floor: f64) -> f64 {
    let max = previous.iter().copied().fold(0.0, f64::max);
    floor.max(2.0 * max)
}

/// Evaluation state for single-bit-flip local search.
pub trait FlipEvaluator {
    fn bits(&self) -> &[bool];
    fn value(&self) -> f64;
    /// Objective if bit `k` were flipped; the state is unchanged.
    fn peek_flip(&mut self, k: usize) -> f64;
    /// Flips bit `k` and returns the new objective.
    fn flip(&mut self, k: usize) -> f64;
    /// Discards all cached state and restarts from `bits`.
    fn reset(&mut self, bits: &[bool]);
}

/// A total, deterministic objective over bitstrings of fixed length.
pub trait PseudoBooleanProblem: Sync {
    type Evaluator<'a>: FlipEvaluator
    where
        Self: 'a;

    fn n_bits(&self) -> usize;
    fn evaluate(&self, bits: &[bool]) -> f64;
    fn evaluator(&self, bits: &[bool]) -> Self::Evaluator<'_>;
}

/// Objective given only as a function; flips are evaluated from scratch.
pub struct BlackBox<F> {
    n_bits: usize,
    objective: F,
}

impl<F: Fn(&[bool]) -> f64 + Sync> BlackBox<F> {
    pub fn new(n_bits: usize, objective: F) -> Self {
        Self { n_bits, objective }
    }
}

pub struct BlackBoxEvaluator<'a, F> {
    problem: &'a BlackBox<F>,
    bits: Vec<bool>,
    value: f64,
}

impl<F: Fn(&[bool]) -> f64 + Sync> FlipEvaluator for BlackBoxEvaluator<'_, F> {
    fn bits(&self) -> &[bool] {
        &self.bits
    }

    fn value(&self) -> f64 {
        self.value
    }

    fn peek_flip(&mut self, k: usize) -> f64 {
        self.bits[k] = !self.bits[k];
        let v = (self.problem.objective)(&self.bits);
        self.bits[k] = !self.bits[k];
        v
    }

    fn flip(&mut self, k: usize) -> f64 {
        self.bits[k] = !self.bits[k];
        self.value = (self.problem.objective)(&self.bits);
        self.value
    }

    fn reset(&mut self, bits: &[bool]) {
        self.bits = bits.to_vec();
        self.value = (self.problem.objective)(&self.bits);
    }
}

impl<F: Fn(&[bool]) -> f64 + Sync> PseudoBooleanProblem for BlackBox<F> {
    type Evaluator<'a>
        = BlackBoxEvaluator<'a, F>
    where
        Self: 'a;

    fn n_bits(&self) -> usize {
        self.n_bits
    }

    fn evaluate(&self, bits: &[bool]) -> f64 {
        (self.objective)(bits)
    }

    fn evaluator(&self, bits: &[bool]) -> Self::Evaluator<'_> {
        BlackBoxEvaluator {
            problem: self,
            bits: bits.to_vec(),
            value: (self.objective)(bits),
        }
    }
}

/// Restricted master problem of cardinality-penalized boosting over
/// fixed-point weights: `Σ_i exp(-γ_i) + ν Σ_j w_j + λ |{j : w_j ≠ 0}|`
/// with `w = decode(bits)`. A discrete weight is nonzero iff any of its
/// bits is set.
pub struct BoostingRmp<'a> {
    matrix: &'a MarginMatrix,
    codec: FixedPointCodec,
    nu: f64,
    lambda: f64,
}

impl<'a> BoostingRmp<'a> {
    pub fn new(
        matrix: &'a MarginMatrix,
        codec: FixedPointCodec,
        nu: f64,
        lambda: f64,
    ) -> Result<Self> {
        if codec.n_weights() != matrix.n_cols() {
            return Err(Error::InvalidArgument(format!(
                "codec encodes {} weights but the problem has {} columns",
                codec.n_weights(),
                matrix.n_cols()
            )));
        }
        if !(nu >= 0.0) || !(lambda >= 0.0) {
            return Err(Error::InvalidArgument(
                "nu and lambda must be nonnegative".into(),
            ));
        }
        Ok(Self {
            matrix,
            codec,
            nu,
            lambda,
        })
    }

    pub fn codec(&self) -> &FixedPointCodec {
        &self.codec
    }

    pub fn matrix(&self) -> &MarginMatrix {
        self.matrix
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn decode(&self, bits: &[bool]) -> Vec<f64> {
        self.codec
            .decode(bits)
            .expect("bitstring length matches the codec")
    }

    pub fn breakdown(&self, bits: &[bool]) -> ObjectiveBreakdown {
        let w = self.decode(bits);
        let risk = self.matrix.risk(&w);
        let l1 = self.nu * w.iter().sum::<f64>();
        let card_term = self.lambda * w.iter().filter(|&&v| v != 0.0).count() as f64;
        ObjectiveBreakdown {
            risk,
            l1,
            card_term,
            total: risk + l1 + card_term,
        }
    }
}

/// Incremental evaluator for [`BoostingRmp`]. Flipping a bit of weight `j`
/// shifts every margin by `Δ y_i H_ij`; because responses are ±1 the risk
/// after a candidate flip is `e^{-Δ} S⁺_j + e^{Δ} S⁻_j`, where `S^±_j` sum
/// the current per-example losses over rows with `y_i H_ij = ±1`.
pub struct RmpEvaluator<'p, 'a> {
    problem: &'p BoostingRmp<'a>,
    bits: Vec<bool>,
    levels: Vec<u32>,
    weights: Vec<f64>,
    // Per-pattern margins in units of the grid step; integer sums are exact,
    // so the state does not drift however many flips are applied.
    level_margins: Vec<i64>,
    losses: Vec<f64>,
    risk: f64,
    weight_sum: f64,
    card: usize,
    split_sums: Vec<(f64, f64)>,
    split_dirty: bool,
}

impl<'p, 'a> RmpEvaluator<'p, 'a> {
    fn new(problem: &'p BoostingRmp<'a>, bits: &[bool]) -> Self {
        let n = problem.codec.n_weights();
        let mut ev = Self {
            problem,
            bits: Vec::new(),
            levels: vec![0; n],
            weights: vec![0.0; n],
            level_margins: Vec::new(),
            losses: Vec::new(),
            risk: 0.0,
            weight_sum: 0.0,
            card: 0,
            split_sums: vec![(0.0, 0.0); n],
            split_dirty: true,
        };
        ev.reset(bits);
        ev
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn total(&self, risk: f64, weight_sum: f64, card: usize) -> f64 {
        risk + self.problem.nu * weight_sum + self.problem.lambda * card as f64
    }

    fn recompute(&mut self) {
        let matrix = self.problem.matrix;
        self.level_margins = (0..matrix.n_patterns())
            .map(|p| {
                matrix
                    .pattern(p)
                    .iter()
                    .zip(&self.levels)
                    .map(|(&a, &l)| i64::from(a) * i64::from(l))
                    .sum()
            })
            .collect();
        let step = self.problem.codec.step();
        self.losses = self
            .level_margins
            .iter()
            .enumerate()
            .map(|(p, &g)| matrix.count(p) * exp_loss(step * g as f64))
            .collect();
        self.risk = self.losses.iter().sum();
        self.weight_sum = self.weights.iter().sum();
        self.card = self.levels.iter().filter(|&&l| l != 0).count();
        self.split_dirty = true;
    }

    fn refresh_split_sums(&mut self) {
        let matrix = self.problem.matrix;
        self.split_sums.iter_mut().for_each(|s| *s = (0.0, 0.0));
        for (p, &e) in self.losses.iter().enumerate() {
            for (s, &a) in self.split_sums.iter_mut().zip(matrix.pattern(p)) {
                if a > 0 {
                    s.0 += e;
                } else {
                    s.1 += e;
                }
            }
        }
        self.split_dirty = false;
    }

    fn flipped_level(&self, k: usize) -> (usize, u32) {
        let b = self.problem.codec.bit_depth();
        let j = k / b;
        (j, self.levels[j] ^ (1 << (k % b)))
    }
}

impl FlipEvaluator for RmpEvaluator<'_, '_> {
    fn bits(&self) -> &[bool] {
        &self.bits
    }

    fn value(&self) -> f64 {
        self.total(self.risk, self.weight_sum, self.card)
    }

    fn peek_flip(&mut self, k: usize) -> f64 {
        if self.split_dirty {
            self.refresh_split_sums();
        }
        let (j, level) = self.flipped_level(k);
        let delta = self.problem.codec.level_value(level) - self.weights[j];
        let (plus, minus) = self.split_sums[j];
        let risk = (-delta).exp() * plus + delta.exp() * minus;
        let card = match (self.levels[j] != 0, level != 0) {
            (false, true) => self.card + 1,
            (true, false) => self.card - 1,
            _ => self.card,
        };
        self.total(risk, self.weight_sum + delta, card)
    }

    fn flip(&mut self, k: usize) -> f64 {
        let (j, level) = self.flipped_level(k);
        let matrix = self.problem.matrix;
        let new_weight = self.problem.codec.level_value(level);
        match (self.levels[j] != 0, level != 0) {
            (false, true) => self.card += 1,
            (true, false) => self.card -= 1,
            _ => {}
        }
        let level_delta = i64::from(level) - i64::from(self.levels[j]);
        self.bits[k] = !self.bits[k];
        self.levels[j] = level;
        self.weights[j] = new_weight;
        let step = self.problem.codec.step();
        let mut risk = 0.0;
        for p in 0..self.level_margins.len() {
            self.level_margins[p] += level_delta * i64::from(matrix.pattern(p)[j]);
            self.losses[p] = matrix.count(p) * exp_loss(step * self.level_margins[p] as f64);
            risk += self.losses[p];
        }
        self.risk = risk;
        self.weight_sum = self.weights.iter().sum();
        self.split_dirty = true;
        self.value()
    }

    fn reset(&mut self, bits: &[bool]) {
        let codec = &self.problem.codec;
        assert_eq!(
            bits.len(),
            codec.n_bits(),
            "bitstring length must match the codec"
        );
        self.bits = bits.to_vec();
        for j in 0..codec.n_weights() {
            self.levels[j] = codec.level_of(bits, j);
            self.weights[j] = codec.level_value(self.levels[j]);
        }
        self.recompute();
    }
}

impl<'a> PseudoBooleanProblem for BoostingRmp<'a> {
    type Evaluator<'p>
        = RmpEvaluator<'p, 'a>
    where
        Self: 'p;

    fn n_bits(&self) -> usize {
        self.codec.n_bits()
    }

    fn evaluate(&self, bits: &[bool]) -> f64 {
        self.breakdown(bits).total
    }

    fn evaluator(&self, bits: &[bool]) -> Self::Evaluator<'_> {
        RmpEvaluator::new(self, bits)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TabuParams {
    pub restarts: usize,
    pub iters_per_restart: usize,
    /// `None` selects `min(20, ⌈N/4⌉)`.
    pub tenure: Option<usize>,
    pub seed: u64,
    /// Run restarts sequentially in seed order so results are reproducible.
    pub deterministic: bool,
    pub record_trace: bool,
}

impl Default for TabuParams {
    fn default() -> Self {
        Self {
            restarts: 16,
            iters_per_restart: 2000,
            tenure: None,
            seed: 0,
            deterministic: true,
            record_trace: false,
        }
    }
}

impl TabuParams {
    pub fn tenure_for(&self, n_bits: usize) -> usize {
        self.tenure.unwrap_or_else(|| 20.min(n_bits.div_ceil(4)))
    }
}

/// One improvement of the global best during a tabu run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceEvent {
    pub restart: usize,
    pub iteration: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TabuResult {
    pub best_bits: Vec<bool>,
    pub best_value: f64,
    pub restarts_used: usize,
    pub evaluations: u64,
    pub seed: u64,
    pub trace: Vec<TraceEvent>,
}

struct RestartOutcome {
    bits: Vec<bool>,
    value: f64,
    evaluations: u64,
    trace: Vec<TraceEvent>,
}

fn restart_start(n: usize, restart: usize, seed: u64) -> Vec<bool> {
    if restart == 0 {
        return vec![false; n];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    (0..n).map(|_| rng.random_bool(0.5)).collect()
}

/// Single-flip tabu walk from `start`. `incumbent` reads the best value
/// known across restarts (used for aspiration); `publish` offers a new best.
fn tabu_walk<P: PseudoBooleanProblem>(
    problem: &P,
    start: &[bool],
    restart: usize,
    params: &TabuParams,
    incumbent: &dyn Fn() -> f64,
    publish: &dyn Fn(f64),
) -> RestartOutcome {
    let n = start.len();
    let tenure = params.tenure_for(n);
    let mut ev = problem.evaluator(start);
    let mut evaluations = 1u64;
    let mut best_bits = start.to_vec();
    let mut best_value = ev.value();
    let mut trace = Vec::new();
    if best_value < incumbent() {
        publish(best_value);
        if params.record_trace {
            trace.push(TraceEvent {
                restart,
                iteration: 0,
                value: best_value,
            });
        }
    }
    let mut tabu_until = vec![0usize; n];

    for it in 1..=params.iters_per_restart {
        let global = incumbent().min(best_value);
        let mut chosen: Option<(usize, f64)> = None;
        let mut fallback: Option<(usize, f64)> = None;
        for (k, &until) in tabu_until.iter().enumerate() {
            let v = ev.peek_flip(k);
            evaluations += 1;
            if fallback.is_none_or(|(_, fv)| v < fv) {
                fallback = Some((k, v));
            }
            let admissible = until < it || v < global;
            if admissible && chosen.is_none_or(|(_, cv)| v < cv) {
                chosen = Some((k, v));
            }
        }
        let Some((k, _)) = chosen.or(fallback) else {
            break;
        };
        let value = ev.flip(k);
        tabu_until[k] = it + tenure;
        if value < best_value {
            best_value = value;
            best_bits.copy_from_slice(ev.bits());
            if value < incumbent() {
                publish(value);
                if params.record_trace {
                    trace.push(TraceEvent {
                        restart,
                        iteration: it,
                        value,
                    });
                }
            }
        }
    }
    RestartOutcome {
        bits: best_bits,
        value: best_value,
        evaluations,
        trace,
    }
}

/// Multistart tabu search over single-bit flips. Restart 0 starts from the
/// all-zero string, the others from independent uniform random strings. A
/// flipped bit stays tabu for `tenure` iterations unless the move would beat
/// the best value found so far.
pub fn tabu_search<P: PseudoBooleanProblem>(
    problem: &P,
    params: &TabuParams,
) -> Result<TabuResult> {
    let n = problem.n_bits();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "pseudo-boolean problem has no bits".into(),
        ));
    }
    if params.restarts == 0 || params.iters_per_restart == 0 {
        return Err(Error::InvalidArgument(
            "tabu restarts and iterations must be positive".into(),
        ));
    }

    let outcomes: Vec<RestartOutcome> = if params.deterministic {
        let best = std::cell::Cell::new(f64::INFINITY);
        (0..params.restarts)
            .map(|r| {
                let start = restart_start(n, r, params.seed);
                tabu_walk(problem, &start, r, params, &|| best.get(), &|v| {
                    best.set(best.get().min(v))
                })
            })
            .collect()
    } else {
        let best = Mutex::new(f64::INFINITY);
        (0..params.restarts)
            .into_par_iter()
            .map(|r| {
                let start = restart_start(n, r, params.seed);
                let read = || *best.lock().expect("best-so-far lock poisoned");
                let publish = |v: f64| {
                    let mut b = best.lock().expect("best-so-far lock poisoned");
                    *b = b.min(v);
                };
                tabu_walk(problem, &start, r, params, &read, &publish)
            })
            .collect()
    };

    let evaluations = outcomes.iter().map(|o| o.evaluations).sum();
    let mut trace: Vec<TraceEvent> = outcomes
        .iter()
        .flat_map(|o| o.trace.iter().copied())
        .collect();
    trace.sort_by_key(|e| (e.restart, e.iteration));
    let winner = outcomes
        .into_iter()
        .reduce(|a, b| if b.value < a.value { b } else { a })
        .expect("at least one restart");
    let best_value = problem.evaluate(&winner.bits);
    Ok(TabuResult {
        best_bits: winner.bits,
        best_value,
        restarts_used: params.restarts,
        evaluations,
        seed: params.seed,
        trace,
    })
}

/// Exact minimum by Gray-code enumeration of all `2^N` bitstrings. Values
/// within `1e-12` relative are treated as ties and resolved towards the
/// lexicographically smallest bitstring (bit 0 first).
pub fn brute_force_pbo<P: PseudoBooleanProblem>(problem: &P) -> Result<TabuResult> {
    let n = problem.n_bits();
    if n > MAX_EXHAUSTIVE_BITS {
        return Err(Error::TooManyBits {
            bits: n,
            limit: MAX_EXHAUSTIVE_BITS,
        });
    }
    let zeros = vec![false; n];
    let mut ev = problem.evaluator(&zeros);
    let mut best_bits = zeros;
    let mut best_value = ev.value();
    let total: u64 = 1 << n;
    for i in 1..total {
        let k = i.trailing_zeros() as usize;
        let v = ev.flip(k);
        let tol = 1e-12 * best_value.abs().max(1.0);
        if v < best_value - tol || (v <= best_value + tol && ev.bits() < best_bits.as_slice()) {
            best_value = best_value.min(v);
            best_bits.copy_from_slice(ev.bits());
        }
    }
    let best_value = problem.evaluate(&best_bits);
    Ok(TabuResult {
        best_bits,
        best_value,
        restarts_used: 1,
        evaluations: total,
        seed: 0,
        trace: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '1').collect()
    }

    #[test]
    fn decode_grid_points() {
        let codec = FixedPointCodec::new(6, 6.3, 1).unwrap();
        assert_eq!(codec.decode(&bits("000000")).unwrap(), vec![0.0]);
        assert_eq!(codec.decode(&bits("111111")).unwrap(), vec![6.3]);
        assert!((codec.decode(&bits("100000")).unwrap()[0] - 0.1).abs() < 1e-15);
        assert!(codec.decode(&bits("10000")).is_err());
    }

    #[test]
    fn decode_is_strictly_monotone() {
        let codec = FixedPointCodec::new(6, 2.7, 1).unwrap();
        let values: Vec<f64> = (0..64u32)
            .map(|l| codec.decode(&codec.encode_levels(&[l])).unwrap()[0])
            .collect();
        assert!(values.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(codec.nearest_level(2.7), 63);
        assert_eq!(codec.nearest_level(-1.0), 0);
        assert_eq!(codec.nearest_level(100.0), 63);
    }

    #[test]
    fn range_adaptation() {
        assert_eq!(adapt_range(&[1.0, 3.1, 0.0], 1.0), 6.2);
        assert_eq!(adapt_range(&[0.0, 0.0], 1.0), 1.0);
        assert_eq!(adapt_range(&[0.2], 1.0), 1.0);
        assert_eq!(adapt_range(&[], 1.0), 1.0);
    }

    #[test]
    fn tabu_on_popcount() {
        let problem = BlackBox::new(4, |b: &[bool]| b.iter().filter(|&&x| x).count() as f64);
        let res = tabu_search(&problem, &TabuParams::default()).unwrap();
        assert_eq!(res.best_value, 0.0);
        assert_eq!(res.best_bits, vec![false; 4]);
    }

    #[test]
    fn tabu_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q: Vec<f64> = (0..100).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = move |b: &[bool]| {
            let mut s = 0.0;
            for i in 0..10 {
                for j in 0..10 {
                    if b[i] && b[j] {
                        s += q[i * 10 + j];
                    }
                }
            }
            s
        };
        let problem = BlackBox::new(10, f);
        let params = TabuParams {
            restarts: 4,
            iters_per_restart: 200,
            seed: 9,
            record_trace: true,
            ..Default::default()
        };
        let a = tabu_search(&problem, &params).unwrap();
        let b = tabu_search(&problem, &params).unwrap();
        assert_eq!(a, b);
        assert!(!a.trace.is_empty());
        let brute = brute_force_pbo(&problem).unwrap();
        assert!(brute.best_value <= a.best_value);
        assert!((brute.best_value - a.best_value).abs() < 1e-12);
    }

    #[test]
    fn brute_force_tie_break() {
        let table = [3.0, 1.0, 1.0, 2.0];
        // index = b0 * 2 + b1 so that "01" (b0 = 0, b1 = 1) maps to 1
        let problem = BlackBox::new(2, move |b: &[bool]| {
            table[usize::from(b[0]) * 2 + usize::from(b[1])]
        });
        let res = brute_force_pbo(&problem).unwrap();
        assert_eq!(res.best_bits, bits("01"));
        assert_eq!(res.best_value, 1.0);
        assert_eq!(res.evaluations, 4);
    }

    #[test]
    fn brute_force_rejects_large_problems() {
        let problem = BlackBox::new(25, |_: &[bool]| 0.0);
        assert!(matches!(
            brute_force_pbo(&problem),
            Err(Error::TooManyBits { bits: 25, .. })
        ));
    }

    fn random_rmp(rng: &mut ChaCha8Rng, m: usize, n: usize) -> MarginMatrix {
        let labels: Vec<i8> = (0..m)
            .map(|_| if rng.random_bool(0.5) { 1 } else { -1 })
            .collect();
        let cols: Vec<Vec<i8>> = (0..n)
            .map(|_| {
                labels
                    .iter()
                    .map(|&y| if rng.random_bool(0.7) { y } else { -y })
                    .collect()
            })
            .collect();
        let refs: Vec<&[i8]> = cols.iter().map(Vec::as_slice).collect();
        MarginMatrix::from_columns(&refs, &labels)
    }

    #[test]
    fn flip_then_unflip_restores_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let matrix = random_rmp(&mut rng, 30, 3);
        let codec = FixedPointCodec::new(6, 3.0, 3).unwrap();
        let rmp = BoostingRmp::new(&matrix, codec, 0.01, 0.5).unwrap();
        let start: Vec<bool> = (0..18).map(|_| rng.random_bool(0.5)).collect();
        let mut ev = rmp.evaluator(&start);
        let v0 = ev.value();
        for k in 0..18 {
            let peek = ev.peek_flip(k);
            let after = ev.flip(k);
            assert!((peek - after).abs() < 1e-12 * after.abs().max(1.0));
            let back = ev.flip(k);
            assert!((back - v0).abs() < 1e-12);
        }
    }

    #[test]
    fn activating_zero_weight_adds_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let matrix = random_rmp(&mut rng, 20, 2);
        let codec = FixedPointCodec::new(4, 2.0, 2).unwrap();
        let lambda = 0.75;
        let rmp = BoostingRmp::new(&matrix, codec, 0.01, lambda).unwrap();
        let ev_bits = vec![false; 8];
        let mut ev = rmp.evaluator(&ev_bits);
        let base = rmp.breakdown(&ev_bits);
        ev.flip(5);
        let after = rmp.breakdown(ev.bits());
        assert_eq!(after.card_term - base.card_term, lambda);
        assert!((ev.value() - after.total).abs() < 1e-12);
    }

    #[test]
    fn incremental_matches_scratch_over_random_flips() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let matrix = random_rmp(&mut rng, 50, 4);
        let codec = FixedPointCodec::new(6, 4.0, 4).unwrap();
        let rmp = BoostingRmp::new(&matrix, codec, 0.02, 0.3).unwrap();
        let mut ev = rmp.evaluator(&[false; 24]);
        for _ in 0..100 {
            let k = rng.random_range(0..24);
            let v = ev.flip(k);
            assert!((v - rmp.evaluate(ev.bits())).abs() < 1e-9);
        }
    }

    #[test]
    fn tabu_never_worse_than_all_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let matrix = random_rmp(&mut rng, 25, 3);
        let codec = FixedPointCodec::new(5, 3.0, 3).unwrap();
        let rmp = BoostingRmp::new(&matrix, codec, 0.01, 100.0).unwrap();
        let params = TabuParams {
            restarts: 2,
            iters_per_restart: 50,
            ..Default::default()
        };
        let res = tabu_search(&rmp, &params).unwrap();
        assert!(res.best_value <= rmp.evaluate(&[false; 15]));
        assert_eq!(res.best_value, rmp.evaluate(&res.best_bits));
    }

    #[test]
    fn parallel_mode_finds_the_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let matrix = random_rmp(&mut rng, 20, 2);
        let codec = FixedPointCodec::new(6, 3.0, 2).unwrap();
        let rmp = BoostingRmp::new(&matrix, codec, 0.01, 0.2).unwrap();
        let params = TabuParams {
            deterministic: false,
            ..Default::default()
        };
        let res = tabu_search(&rmp, &params).unwrap();
        let brute = brute_force_pbo(&rmp).unwrap();
        assert!((res.best_value - brute.best_value).abs() < 1e-9);
    }
}
