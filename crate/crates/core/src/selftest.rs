//! Quick built-in checks of the solvers against independent oracles, for
//! use from the command line on a fresh install.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::convex_opt::minimize_l1_risk;
use crate::discrete_opt::{
    brute_force_pbo, tabu_search, BoostingRmp, FixedPointCodec, FlipEvaluator,
    PseudoBooleanProblem, TabuParams,
};
use crate::experiments::{frontier, sparsity_gain, ParetoPoint};
use crate::loss::{dual_objective, MarginMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> (Vec<Vec<i8>>, Vec<i8>) {
    let sign = |rng: &mut ChaCha8Rng| if rng.random_bool(0.5) { 1i8 } else { -1 };
    let cols = (0..n)
        .map(|_| (0..m).map(|_| sign(rng)).collect())
        .collect();
    let labels = (0..m).map(|_| sign(rng)).collect();
    (cols, labels)
}

fn matrix_of(cols: &[Vec<i8>], labels: &[i8]) -> MarginMatrix {
    let refs: Vec<&[i8]> = cols.iter().map(Vec::as_slice).collect();
    MarginMatrix::from_columns(&refs, labels)
}

fn dual_ignores_lambda(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0usize;
    for _ in 0..20 {
        let u: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..3.0)).collect();
        let base = dual_objective(&u, 0.0).unwrap_or(f64::NAN);
        worst += [0.1, 1.0, 100.0]
            .iter()
            .filter(|&&l| dual_objective(&u, l).unwrap_or(f64::NAN).to_bits() != base.to_bits())
            .count();
    }
    Check {
        name: "dual objective independent of lambda",
        passed: worst == 0,
        detail: format!("{worst} mismatches"),
    }
}

fn gradient_matches_differences(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (cols, labels) = random_matrix(rng, 20, 3);
        let matrix = matrix_of(&cols, &labels);
        let w: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..2.0)).collect();
        let g = matrix.l1_gradient(&w, 0.01);
        for j in 0..3 {
            let h = 1e-6;
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp[j] += h;
            wm[j] -= h;
            let fd = (matrix.l1_objective(&wp, 0.01) - matrix.l1_objective(&wm, 0.01)) / (2.0 * h);
            worst = worst.max((fd - g[j]).abs() / g[j].abs().max(1.0));
        }
    }
    Check {
        name: "gradient matches central differences",
        passed: worst < 1e-5,
        detail: format!("max relative error {worst:.2e}"),
    }
}

fn convex_beats_grid(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..5 {
        let (cols, labels) = random_matrix(rng, 8, 2);
        let matrix = matrix_of(&cols, &labels);
        let r = minimize_l1_risk(&matrix, 0.01, &[0.0, 0.0], 1e-8, 500);
        let Ok(r) = r else {
            worst = f64::INFINITY;
            continue;
        };
        let mut grid = f64::INFINITY;
        for a in 0..=400 {
            for b in 0..=400 {
                let w = [f64::from(a) * 0.02, f64::from(b) * 0.02];
                grid = grid.min(matrix.l1_objective(&w, 0.01));
            }
        }
        worst = worst.max(r.objective - grid);
    }
    Check {
        name: "convex solver at or below grid search",
        passed: worst <= 1e-4,
        detail: format!("worst excess {worst:.2e}"),
    }
}

fn tabu_reaches_optimum(rng: &mut ChaCha8Rng) -> Check {
    let mut hits = 0;
    let trials = 10;
    for seed in 0..trials {
        let (cols, labels) = random_matrix(rng, 20, 2);
        let matrix = matrix_of(&cols, &labels);
        let Ok(codec) = FixedPointCodec::new(5, 4.0, 2) else {
            continue;
        };
        let Ok(rmp) = BoostingRmp::new(&matrix, codec, 0.01, 0.5) else {
            continue;
        };
        let params = TabuParams {
            seed,
            ..TabuParams::default()
        };
        if let (Ok(t), Ok(b)) = (tabu_search(&rmp, &params), brute_force_pbo(&rmp)) {
            if (t.best_value - b.best_value).abs() <= 1e-12 * b.best_value.abs().max(1.0) {
                hits += 1;
            }
        }
    }
    Check {
        name: "tabu search reaches the exhaustive optimum",
        passed: hits == trials,
        detail: format!("{hits}/{trials}"),
    }
}

fn incremental_matches_scratch(rng: &mut ChaCha8Rng) -> Check {
    let (cols, labels) = random_matrix(rng, 50, 4);
    let matrix = matrix_of(&cols, &labels);
    let mut worst = f64::INFINITY;
    if let Ok(rmp) =
        FixedPointCodec::new(6, 3.0, 4).and_then(|c| BoostingRmp::new(&matrix, c, 0.01, 0.3))
    {
        let mut ev = rmp.evaluator(&[false; 24]);
        worst = 0.0;
        for _ in 0..2000 {
            let v = ev.flip(rng.random_range(0..24));
            worst = worst.max((v - rmp.evaluate(ev.bits())).abs());
        }
    }
    Check {
        name: "incremental evaluation matches recomputation",
        passed: worst < 1e-9,
        detail: format!("max divergence {worst:.2e}"),
    }
}

fn metric_arithmetic() -> Check {
    let cp = ParetoPoint {
        cardinality: 12,
        val_error: 0.2689,
        record_id: 0,
    };
    let base = [ParetoPoint {
        cardinality: 37,
        val_error: 0.2689,
        record_id: 1,
    }];
    let gain = sparsity_gain(&cp, &base, 0.0).unwrap_or(f64::NAN);
    let f = frontier(&[
        ParetoPoint {
            cardinality: 3,
            val_error: 0.10,
            record_id: 0,
        },
        ParetoPoint {
            cardinality: 5,
            val_error: 0.08,
            record_id: 1,
        },
        ParetoPoint {
            cardinality: 4,
            val_error: 0.12,
            record_id: 2,
        },
    ]);
    let ids: Vec<usize> = f.iter().map(|p| p.record_id).collect();
    Check {
        name: "gain and frontier arithmetic",
        passed: (100.0 * gain - 67.57).abs() < 5e-3 && ids == [0, 1],
        detail: format!("gain {:.2}%, frontier ids {ids:?}", 100.0 * gain),
    }
}

/// Runs every check with a fixed seed.
pub fn run_all() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    vec![
        dual_ignores_lambda(&mut rng),
        gradient_matches_differences(&mut rng),
        convex_beats_grid(&mut rng),
        tabu_reaches_optimum(&mut rng),
        incremental_matches_scratch(&mut rng),
        metric_arithmetic(),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for c in super::run_all() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
