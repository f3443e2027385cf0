//! Bound-constrained minimization of ℓ1-regularized exponential risk,
//! `min_{w ⪰ 0} Σ_i exp(-γ_i) + ν Σ_j w_j`, by a projected Newton method
//! with an ε-active set and projected Armijo backtracking.
//!
//! Variables sitting (nearly) on the bound with a positive gradient are held
//! there by a diagonally scaled gradient step; the remaining variables take a
//! damped Newton step on the free block of the Hessian. Iterates are
//! projected onto the nonnegative orthant, so zeros are exact.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hypotheses::HypothesisColumn;
use crate::loss::{exp_loss, MarginMatrix};

pub const DEFAULT_TOLERANCE: f64 = 5e-4;
pub const DEFAULT_MAX_ITERS: usize = 500;

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const ACTIVE_SET_WIDTH: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexSolveResult {
    pub w_tilde: Vec<f64>,
    pub objective: f64,
    pub projected_gradient_infnorm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted iteration, starting with the initial point.
    pub history: Vec<f64>,
}

/// `max_j |∂_j|` over positive weights and `max(0, -∂_j)` over zero weights.
pub fn projected_gradient_infnorm(w: &[f64], grad: &[f64]) -> f64 {
    w.iter()
        .zip(grad)
        .map(|(&wj, &gj)| if wj > 0.0 { gj.abs() } else { (-gj).max(0.0) })
        .fold(0.0, f64::max)
}

struct Evaluation {
    value: f64,
    grad: Vec<f64>,
    // per-pattern count * exp(-γ_p)
    weights: Vec<f64>,
}

fn evaluate(matrix: &MarginMatrix, w: &[f64], nu: f64) -> Evaluation {
    let gamma = matrix.pattern_margins(w);
    let weights: Vec<f64> = gamma
        .iter()
        .enumerate()
        .map(|(p, &g)| matrix.count(p) * exp_loss(g))
        .collect();
    let mut grad = vec![nu; matrix.n_cols()];
    for (p, &e) in weights.iter().enumerate() {
        for (gj, &a) in grad.iter_mut().zip(matrix.pattern(p)) {
            *gj -= e * f64::from(a);
        }
    }
    let value = weights.iter().sum::<f64>() + nu * w.iter().sum::<f64>();
    Evaluation {
        value,
        grad,
        weights,
    }
}

fn newton_direction(matrix: &MarginMatrix, eval: &Evaluation, free: &[usize]) -> Option<Vec<f64>> {
    let k = free.len();
    if k == 0 {
        return Some(Vec::new());
    }
    let mut h = DMatrix::<f64>::zeros(k, k);
    for (p, &e) in eval.weights.iter().enumerate() {
        let row = matrix.pattern(p);
        for (a, &ja) in free.iter().enumerate() {
            let ea = e * f64::from(row[ja]);
            for (b, &jb) in free.iter().enumerate().skip(a) {
                h[(a, b)] += ea * f64::from(row[jb]);
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            h[(a, b)] = h[(b, a)];
        }
    }
    let rhs = DVector::from_iterator(k, free.iter().map(|&j| -eval.grad[j]));
    let scale = (0..k).map(|a| h[(a, a)]).fold(1e-300, f64::max);
    let mut damping = 1e-12 * scale;
    for _ in 0..12 {
        let mut damped = h.clone();
        for a in 0..k {
            damped[(a, a)] += damping;
        }
        if let Some(chol) = damped.cholesky() {
            let d = chol.solve(&rhs);
            if d.iter().all(|v| v.is_finite()) {
                return Some(d.iter().copied().collect());
            }
        }
        damping *= 100.0;
    }
    None
}

/// Minimizes `Σ_i exp(-γ_i) + ν Σ_j w_j` over `w ⪰ 0`, starting from `w0`.
/// Stops when the projected gradient sup-norm is at most `tolerance`.
/// Running out of iterations is not an error: the best iterate is returned
/// with `converged = false`.
pub fn minimize_l1_risk(
    matrix: &MarginMatrix,
    nu: f64,
    w0: &[f64],
    tolerance: f64,
    max_iters: usize,
) -> Result<ConvexSolveResult> {
    let n = matrix.n_cols();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "convex solve needs at least one column".into(),
        ));
    }
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "nu must be positive, got {nu}"
        )));
    }
    if !(tolerance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    if w0.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} initial weights for {n} columns",
            w0.len()
        )));
    }
    if w0.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "initial weights must be finite and nonnegative".into(),
        ));
    }

    let mut w = w0.to_vec();
    let mut eval = evaluate(matrix, &w, nu);
    if eval.value.is_nan() {
        return Err(Error::NotANumber { iteration: 0 });
    }
    let mut history = vec![eval.value];
    let mut pg = projected_gradient_infnorm(&w, &eval.grad);
    let mut iterations = 0;

    while pg > tolerance && iterations < max_iters {
        let width = ACTIVE_SET_WIDTH.min(
            w.iter()
                .zip(&eval.grad)
                .map(|(&wj, &gj)| (wj - (wj - gj).max(0.0)).abs())
                .fold(0.0, f64::max),
        );
        let (binding, free): (Vec<usize>, Vec<usize>) =
            (0..n).partition(|&j| w[j] <= width && eval.grad[j] > 0.0);

        let mut direction = vec![0.0; n];
        match newton_direction(matrix, &eval, &free) {
            Some(d) => {
                for (&j, dj) in free.iter().zip(d) {
                    direction[j] = dj;
                }
            }
            None => {
                for &j in &free {
                    direction[j] = -eval.grad[j];
                }
            }
        }
        for &j in &binding {
            let curvature = hessian_diagonal(&eval).max(1e-12);
            direction[j] = -eval.grad[j] / curvature;
        }
        let slope: f64 = direction.iter().zip(&eval.grad).map(|(d, g)| d * g).sum();
        if !(slope < 0.0) {
            for (d, g) in direction.iter_mut().zip(&eval.grad) {
                *d = -g;
            }
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for attempt in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = w
                .iter()
                .zip(&direction)
                .map(|(&wj, &dj)| (wj + alpha * dj).max(0.0))
                .collect();
            let trial_eval = evaluate(matrix, &trial, nu);
            if trial_eval.value.is_nan() {
                return Err(Error::NotANumber {
                    iteration: iterations + 1,
                });
            }
            let predicted: f64 = trial
                .iter()
                .zip(&w)
                .zip(&eval.grad)
                .map(|((t, wj), g)| g * (t - wj))
                .sum();
            let decrease = trial_eval.value - eval.value;
            let sufficient = decrease <= ARMIJO * predicted.min(0.0) && decrease <= 0.0;
            // Near the optimum the decrease drops below the resolution of the
            // objective; accept a full step that shrinks the projected
            // gradient without a measurable increase.
            let roundoff = attempt == 0
                && decrease <= 1e-12 * eval.value.abs().max(1.0)
                && projected_gradient_infnorm(&trial, &trial_eval.grad) < 0.5 * pg;
            if sufficient || roundoff {
                accepted = Some((trial, trial_eval));
                break;
            }
            alpha *= 0.5;
        }
        let Some((trial, trial_eval)) = accepted else {
            log::debug!(
                "convex solve stalled at iteration {iterations} with projected gradient {pg:e}"
            );
            break;
        };
        w = trial;
        eval = trial_eval;
        iterations += 1;
        history.push(eval.value);
        pg = projected_gradient_infnorm(&w, &eval.grad);
    }

    Ok(ConvexSolveResult {
        w_tilde: w,
        objective: eval.value,
        projected_gradient_infnorm: pg,
        iterations,
        converged: pg <= tolerance,
        history,
    })
}

// a_pj² = 1 for ±1 responses, so every diagonal entry equals the risk.
fn hessian_diagonal(eval: &Evaluation) -> f64 {
    eval.weights.iter().sum()
}

/// Columns whose edge `Σ_i u_i y_i h(x_i)` exceeds `ν + ε`, sorted by
/// decreasing edge (ties by index).
pub fn check_dual_constraints(
    columns: &[HypothesisColumn],
    labels: &[i8],
    u: &[f64],
    nu: f64,
    eps: f64,
) -> Vec<usize> {
    let mut violating: Vec<(usize, f64)> = columns
        .iter()
        .enumerate()
        .map(|(j, col)| (j, col.edge(u, labels)))
        .filter(|&(_, edge)| edge > nu + eps)
        .collect();
    violating.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    violating.into_iter().map(|(j, _)| j).collect()
}
