//! Satisfiability toolkit built around unipolar-set termination.
//!
//! A set of clauses with no all-unnegated clause (or no all-negated clause)
//! is satisfiable by a constant assignment. [`solver`] tracks that condition
//! incrementally during DPLL search and can stop there instead of waiting
//! for every clause to be satisfied. [`analysis`] measures how skewed a
//! formula's literal polarities are and how much a variable inversion can
//! skew them further. [`gen`] and [`bench`] reproduce the random skewed
//! 3-SAT experiment grid.

pub mod analysis;
pub mod bench;
pub mod cli;
pub mod cnf;
pub mod gen;
pub mod solver;

pub use analysis::{Counting, Inverter, Model, SkewnessReport};
pub use cnf::{parse_dimacs, parse_dimacs_str, write_dimacs, Clause, Formula, Lit, Var};
pub use solver::{solve, Mode, SolveStats, SolverOptions, Verdict};
