#![allow(dead_code)]

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use unipolar_sat::gen::{self, ClauseCount, GenParams};
use unipolar_sat::{Formula, Model};

/// Clauses as plain signed integers, the shape the oracles work on.
pub type IntClauses = Vec<Vec<i64>>;

pub fn to_ints(formula: &Formula) -> IntClauses {
    formula
        .clauses()
        .iter()
        .map(|c| c.lits().iter().map(|l| l.to_dimacs()).collect())
        .collect()
}

fn satisfied_by(clauses: &[Vec<i64>], bits: u64) -> bool {
    clauses.iter().all(|c| {
        c.iter().any(|&l| {
            let value = bits >> (l.unsigned_abs() - 1) & 1 == 1;
            value == (l > 0)
        })
    })
}

/// Exhaustive 2^n search. Returns the lexicographically first model.
pub fn brute_force(num_vars: usize, clauses: &[Vec<i64>]) -> Option<Model> {
    assert!(num_vars <= 24, "oracle is exponential");
    (0..1u64 << num_vars)
        .find(|&bits| satisfied_by(clauses, bits))
        .map(|bits| Model::from_values((0..num_vars).map(|i| bits >> i & 1 == 1).collect()))
}

pub fn brute_force_sat(formula: &Formula) -> bool {
    brute_force(formula.num_vars(), &to_ints(formula)).is_some()
}

/// Polarity skewness counted literal by literal.
pub fn naive_skewness(clauses: &[Vec<i64>]) -> Ratio<u64> {
    let pos = clauses.iter().flatten().filter(|&&l| l > 0).count() as u64;
    let neg = clauses.iter().flatten().filter(|&&l| l < 0).count() as u64;
    if pos + neg == 0 {
        Ratio::from_integer(0)
    } else {
        Ratio::new(pos.min(neg), pos + neg)
    }
}

/// Flips every variable with strictly more unnegated than negated
/// occurrences, then recounts.
pub fn naive_hidden_skewness(num_vars: usize, clauses: &[Vec<i64>]) -> Ratio<u64> {
    let mut pos = vec![0i64; num_vars + 1];
    for &l in clauses.iter().flatten() {
        pos[l.unsigned_abs() as usize] += l.signum();
    }
    let flipped: IntClauses = clauses
        .iter()
        .map(|c| {
            c.iter()
                .map(|&l| {
                    if pos[l.unsigned_abs() as usize] > 0 {
                        -l
                    } else {
                        l
                    }
                })
                .collect()
        })
        .collect();
    naive_skewness(&flipped)
}

/// Random clause list with widths in `1..=max_width`, repeated variables
/// and tautologies allowed.
pub fn random_ints(
    rng: &mut ChaCha8Rng,
    num_vars: usize,
    num_clauses: usize,
    max_width: usize,
) -> IntClauses {
    (0..num_clauses)
        .map(|_| {
            let width = rng.random_range(1..=max_width);
            (0..width)
                .map(|_| {
                    let v = rng.random_range(1..=num_vars as i64);
                    if rng.random_bool(0.5) {
                        v
                    } else {
                        -v
                    }
                })
                .collect()
        })
        .collect()
}

/// Small fixed-width instance near or across the 3-SAT threshold.
pub fn small_instance(rng: &mut ChaCha8Rng, max_vars: usize) -> Formula {
    let n = rng.random_range(3..=max_vars);
    let r = rng.random_range(1.0..7.0);
    let p = [0.5, 0.3, 0.1][rng.random_range(0..3)];
    gen::generate(&GenParams {
        n,
        clauses: ClauseCount::Ratio(r),
        k: 3,
        p,
        seed: rng.random(),
    })
    .unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Upper-tail chi-square quantile via the Wilson-Hilferty approximation.
pub fn chi_square_critical(dof: f64, z: f64) -> f64 {
    let a = 2.0 / (9.0 * dof);
    dof * (1.0 - a + z * a.sqrt()).powi(3)
}
