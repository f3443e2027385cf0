//! Exponential loss, its conjugate, margins, dual sample weights and the
//! primal/dual objectives of ℓ1 and ℓ1 + cardinality regularized risk.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Margins are clamped from below before exponentiation; `exp(500)` is the
/// largest power of e comfortably inside the f64 range.
pub const MARGIN_FLOOR: f64 = -500.0;

/// Default tolerance for counting continuous weights as nonzero.
pub const DEFAULT_ZERO_TOL: f64 = 1e-9;

#[inline]
fn clamp_margin(gamma: f64) -> f64 {
    if gamma < MARGIN_FLOOR {
        log::trace!("margin {gamma} clamped to {MARGIN_FLOOR}");
        MARGIN_FLOOR
    } else {
        gamma
    }
}

/// `l(γ) = exp(-γ)`.
#[inline]
pub fn exp_loss(gamma: f64) -> f64 {
    (-clamp_margin(gamma)).exp()
}

/// `l'(γ) = -exp(-γ)`.
#[inline]
pub fn exp_loss_derivative(gamma: f64) -> f64 {
    -exp_loss(gamma)
}

/// Dual sample weight `u = -l'(γ)`.
#[inline]
pub fn dual_weight(gamma: f64) -> f64 {
    exp_loss(gamma)
}

/// Conjugate of the exponential loss in the form `l*(-u) = u ln u - u`,
/// with `0 ln 0 = 0`.
pub fn exp_loss_conjugate(u: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "conjugate argument must be nonnegative, got {u}"
        )));
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    Ok(u * u.ln() - u)
}

/// Number of weights strictly above `zero_tol`.
pub fn cardinality(w: &[f64], zero_tol: f64) -> usize {
    w.iter().filter(|&&v| v > zero_tol).count()
}

/// Per-example margins `γ_i = y_i Σ_j w_j h_j(x_i)`.
pub fn margins(columns: &[&[i8]], weights: &[f64], labels: &[i8]) -> Vec<f64> {
    assert_eq!(columns.len(), weights.len(), "one weight per column");
    let mut gamma = vec![0.0; labels.len()];
    for (col, &w) in columns.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (g, &h) in gamma.iter_mut().zip(col.iter()) {
            *g += w * f64::from(h);
        }
    }
    for (g, &y) in gamma.iter_mut().zip(labels) {
        *g *= f64::from(y);
    }
    gamma
}

pub fn dual_weights(margins: &[f64]) -> Vec<f64> {
    margins.iter().map(|&g| dual_weight(g)).collect()
}

/// Terms of `Σ l(γ_i) + ν 1ᵀw + λ card(w)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveBreakdown {
    pub risk: f64,
    pub l1: f64,
    pub card_term: f64,
    pub total: f64,
}

impl ObjectiveBreakdown {
    /// The objective without the cardinality term.
    pub fn regularized_risk(&self) -> f64 {
        self.risk + self.l1
    }
}

/// Signed responses `y_i h_j(x_i)` of a set of columns. Identical rows are
/// stored once with a multiplicity, so every quantity below is a weighted
/// sum over distinct row patterns.
#[derive(Clone, Debug)]
pub struct MarginMatrix {
    n_cols: usize,
    n_examples: usize,
    patterns: Vec<i8>,
    counts: Vec<f64>,
}

impl MarginMatrix {
    pub fn from_columns(columns: &[&[i8]], labels: &[i8]) -> Self {
        let n_cols = columns.len();
        let m = labels.len();
        for col in columns {
            assert_eq!(
                col.len(),
                m,
                "column length must match the number of labels"
            );
        }
        let mut seen: HashMap<Vec<i8>, usize> = HashMap::new();
        let mut patterns = Vec::new();
        let mut counts: Vec<f64> = Vec::new();
        let mut row = vec![0i8; n_cols];
        for (i, &y) in labels.iter().enumerate() {
            for (j, col) in columns.iter().enumerate() {
                row[j] = col[i] * y;
            }
            match seen.get(&row) {
                Some(&p) => counts[p] += 1.0,
                None => {
                    seen.insert(row.clone(), counts.len());
                    patterns.extend_from_slice(&row);
                    counts.push(1.0);
                }
            }
        }
        Self {
            n_cols,
            n_examples: m,
            patterns,
            counts,
        }
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn n_examples(&self) -> usize {
        self.n_examples
    }

    pub fn n_patterns(&self) -> usize {
        self.counts.len()
    }

    #[inline]
    pub fn pattern(&self, p: usize) -> &[i8] {
        &self.patterns[p * self.n_cols..(p + 1) * self.n_cols]
    }

    #[inline]
    pub fn count(&self, p: usize) -> f64 {
        self.counts[p]
    }

    /// Restriction to a subset of columns, re-compressed.
    pub fn select(&self, cols: &[usize]) -> MarginMatrix {
        let mut seen: HashMap<Vec<i8>, usize> = HashMap::new();
        let mut patterns = Vec::new();
        let mut counts: Vec<f64> = Vec::new();
        for p in 0..self.n_patterns() {
            let src = self.pattern(p);
            let row: Vec<i8> = cols.iter().map(|&j| src[j]).collect();
            match seen.get(&row) {
                Some(&q) => counts[q] += self.counts[p],
                None => {
                    seen.insert(row.clone(), counts.len());
                    patterns.extend_from_slice(&row);
                    counts.push(self.counts[p]);
                }
            }
        }
        MarginMatrix {
            n_cols: cols.len(),
            n_examples: self.n_examples,
            patterns,
            counts,
        }
    }

    /// Margin of each distinct row pattern.
    pub fn pattern_margins(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.n_cols);
        (0..self.n_patterns())
            .map(|p| {
                self.pattern(p)
                    .iter()
                    .zip(w)
                    .map(|(&a, &wj)| f64::from(a) * wj)
                    .sum()
            })
            .collect()
    }

    /// `Σ_i exp(-γ_i)`.
    pub fn risk(&self, w: &[f64]) -> f64 {
        self.pattern_margins(w)
            .iter()
            .zip(&self.counts)
            .map(|(&g, &c)| c * exp_loss(g))
            .sum()
    }

    /// `Σ_i exp(-γ_i) + ν Σ_j w_j`.
    pub fn l1_objective(&self, w: &[f64], nu: f64) -> f64 {
        self.risk(w) + nu * w.iter().sum::<f64>()
    }

    /// Gradient of [`Self::l1_objective`]:
    /// `-Σ_i exp(-γ_i) y_i H_ij + ν` per coordinate.
    pub fn l1_gradient(&self, w: &[f64], nu: f64) -> Vec<f64> {
        let gamma = self.pattern_margins(w);
        let mut g = vec![nu; self.n_cols];
        for (p, &gp) in gamma.iter().enumerate() {
            let e = self.counts[p] * exp_loss(gp);
            for (gj, &a) in g.iter_mut().zip(self.pattern(p)) {
                *gj -= e * f64::from(a);
            }
        }
        g
    }
}

/// `Σ l(y_i H_i: w) + ν 1ᵀw + λ card(w)` with nonzero weights counted
/// above `zero_tol`.
pub fn primal_objective(
    matrix: &MarginMatrix,
    w: &[f64],
    nu: f64,
    lambda: f64,
    zero_tol: f64,
) -> Result<ObjectiveBreakdown> {
    if w.len() != matrix.n_cols() {
        return Err(Error::InvalidArgument(format!(
            "{} weights for {} columns",
            w.len(),
            matrix.n_cols()
        )));
    }
    if let Some(v) = w.iter().find(|&&v| !(v >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "weights must be nonnegative, found {v}"
        )));
    }
    let risk = matrix.risk(w);
    let l1 = nu * w.iter().sum::<f64>();
    let card_term = lambda * cardinality(w, zero_tol) as f64;
    Ok(ObjectiveBreakdown {
        risk,
        l1,
        card_term,
        total: risk + l1 + card_term,
    })
}

/// Dual objective `-Σ_i l*(-u_i) = Σ_i (u_i - u_i ln u_i)`.
///
/// The conjugate of the cardinality penalty is zero at the only feasible
/// dual point `s = 0`, so the dual does not depend on λ at all; the
/// parameter is accepted for signature symmetry with the primal and is
/// never read.
pub fn dual_objective(u: &[f64], _lambda: f64) -> Result<f64> {
    let mut total = 0.0;
    for &ui in u {
        total -= exp_loss_conjugate(ui)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, LN_2};

    #[test]
    fn loss_values() {
        assert_eq!(exp_loss(0.0), 1.0);
        assert!((exp_loss(LN_2) - 0.5).abs() < 1e-15);
        assert!((exp_loss(-LN_2) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn loss_derivative() {
        assert_eq!(exp_loss_derivative(0.0), -1.0);
        assert_eq!(dual_weight(0.0), 1.0);
        let h = 1e-6;
        let fd = (exp_loss(0.3 + h) - exp_loss(0.3 - h)) / (2.0 * h);
        let an = exp_loss_derivative(0.3);
        assert!(((fd - an) / an).abs() < 1e-6);
    }

    #[test]
    fn margin_floor_prevents_overflow() {
        assert!(exp_loss(-1e6).is_finite());
        assert_eq!(exp_loss(-1e6), exp_loss(MARGIN_FLOOR));
    }

    #[test]
    fn conjugate_values() {
        assert!((exp_loss_conjugate(1.0).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(exp_loss_conjugate(0.0).unwrap(), 0.0);
        assert!(exp_loss_conjugate(E).unwrap().abs() < 1e-15);
        assert!(exp_loss_conjugate(-0.1).is_err());
    }

    #[test]
    fn cardinality_counts() {
        assert_eq!(cardinality(&[0.0, 0.0], 0.0), 0);
        assert_eq!(cardinality(&[0.5, 0.0, 1.2], 0.0), 2);
        assert_eq!(cardinality(&[1e-12, 1.0], 1e-9), 1);
    }

    #[test]
    fn empty_ensemble_objective_is_m() {
        let cols: Vec<Vec<i8>> = vec![vec![1, -1, 1, 1], vec![-1, -1, 1, -1]];
        let refs: Vec<&[i8]> = cols.iter().map(Vec::as_slice).collect();
        let mat = MarginMatrix::from_columns(&refs, &[1, -1, 1, -1]);
        let obj = primal_objective(&mat, &[0.0, 0.0], 0.1, 3.0, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(obj.total, 4.0);
        assert_eq!(obj.card_term, 0.0);
    }

    #[test]
    fn perfect_column_closed_form() {
        let labels = [1, -1, 1, 1, -1];
        let col: Vec<i8> = labels.to_vec();
        let mat = MarginMatrix::from_columns(&[&col], &labels);
        assert_eq!(mat.n_patterns(), 1);
        let (c, nu, lambda) = (1.7, 0.05, 0.3);
        let obj = primal_objective(&mat, &[c], nu, lambda, DEFAULT_ZERO_TOL).unwrap();
        let expect = 5.0 * (-c).exp() + nu * c + lambda;
        assert!((obj.total - expect).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_weights() {
        let col = [1i8, -1];
        let mat = MarginMatrix::from_columns(&[&col], &[1, 1]);
        assert!(primal_objective(&mat, &[-0.1], 0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn dual_of_unit_weights() {
        assert!((dual_objective(&[1.0, 1.0, 1.0], 0.0).unwrap() - 3.0).abs() < 1e-15);
        assert_eq!(
            dual_objective(&[0.3, 2.0], 0.0).unwrap(),
            dual_objective(&[0.3, 2.0], 5.0).unwrap()
        );
    }

    #[test]
    fn per_example_margins() {
        let c0 = [1i8, -1, 1];
        let c1 = [1i8, 1, -1];
        let gamma = margins(&[&c0, &c1], &[0.5, 2.0], &[1, -1, -1]);
        assert_eq!(gamma, vec![2.5, -1.5, 1.5]);
    }

    #[test]
    fn select_recompresses() {
        let c0 = [1i8, 1, -1, -1];
        let c1 = [1i8, -1, 1, -1];
        let mat = MarginMatrix::from_columns(&[&c0, &c1], &[1, 1, 1, 1]);
        assert_eq!(mat.n_patterns(), 4);
        let sub = mat.select(&[0]);
        assert_eq!(sub.n_patterns(), 2);
        assert_eq!(sub.count(0) + sub.count(1), 4.0);
        assert!((sub.risk(&[0.7]) - mat.risk(&[0.7, 0.0])).abs() < 1e-14);
    }
}
