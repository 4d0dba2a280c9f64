//! Clause polarity, unipolarity, inverters and literal-polarity skewness.
//!
//! A clause is positive when all its literals are unnegated, negative when
//! all are negated, mixed otherwise. A clause set with no positive clause or
//! no negative clause is unipolar and is satisfied by the constant
//! assignment of the missing side's opposite (all false when there is no
//! positive clause, all true when there is no negative clause).
//!
//! Skewness `p(S) = min(poslit, neglit) / (poslit + neglit)`. Flipping every
//! variable that occurs more often unnegated than negated gives the hidden
//! skewness `hp(S)`, which never exceeds `p(S)`.

use std::collections::BTreeSet;
use std::fmt;

use num_rational::Ratio;
use serde::Serialize;
use thiserror::Error;

use crate::cnf::{Clause, Formula, Occurrences, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClausePolarity {
    Positive,
    Negative,
    Mixed,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("empty clause has no polarity")]
    EmptyClause,
    #[error("clause set is bipolar")]
    Bipolar,
    #[error("clause set still has {0} clauses")]
    WrongSide(&'static str),
    #[error("inverter variable {var} exceeds num_vars = {num_vars}")]
    VariableOutOfRange { var: Var, num_vars: usize },
    #[error("model assigns {got} variables, formula has {expected}")]
    PartialModel { expected: usize, got: usize },
}

pub fn clause_polarity(clause: &Clause) -> Result<ClausePolarity, AnalysisError> {
    let lits = clause.lits();
    if lits.is_empty() {
        return Err(AnalysisError::EmptyClause);
    }
    let positives = lits.iter().filter(|l| l.is_positive()).count();
    Ok(if positives == lits.len() {
        ClausePolarity::Positive
    } else if positives == 0 {
        ClausePolarity::Negative
    } else {
        ClausePolarity::Mixed
    })
}

/// Which clause polarity is missing from a unipolar set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    NoPositive,
    NoNegative,
    /// Neither positive nor negative clauses (all mixed, or no clauses).
    Both,
}

impl Side {
    /// Value that satisfies every clause when assigned to all variables.
    pub fn completion_value(self) -> bool {
        matches!(self, Side::NoNegative)
    }

    pub(crate) fn from_counts(positive: usize, negative: usize) -> Option<Side> {
        match (positive, negative) {
            (0, 0) => Some(Side::Both),
            (0, _) => Some(Side::NoPositive),
            (_, 0) => Some(Side::NoNegative),
            _ => None,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::NoPositive => "no_positive",
            Side::NoNegative => "no_negative",
            Side::Both => "both",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Unipolarity {
    Bipolar,
    Unipolar(Side),
}

impl Unipolarity {
    pub fn is_unipolar(self) -> bool {
        matches!(self, Unipolarity::Unipolar(_))
    }
}

/// Classifies the clause set. Empty clauses count as neither polarity.
pub fn unipolarity(formula: &Formula) -> Unipolarity {
    let mut positive = 0;
    let mut negative = 0;
    for clause in formula.clauses() {
        match clause_polarity(clause) {
            Ok(ClausePolarity::Positive) => positive += 1,
            Ok(ClausePolarity::Negative) => negative += 1,
            _ => {}
        }
        if positive > 0 && negative > 0 {
            return Unipolarity::Bipolar;
        }
    }
    Unipolarity::Unipolar(Side::from_counts(positive, negative).expect("not bipolar"))
}

/// A total truth assignment over variables `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Model(Vec<bool>);

impl Model {
    pub fn constant(num_vars: usize, value: bool) -> Model {
        Model(vec![value; num_vars])
    }

    pub fn from_values(values: Vec<bool>) -> Model {
        Model(values)
    }

    pub fn num_vars(&self) -> usize {
        self.0.len()
    }

    pub fn value(&self, var: Var) -> bool {
        self.0[var.slot()]
    }

    pub fn set(&mut self, var: Var, value: bool) {
        self.0[var.slot()] = value;
    }

    pub fn values(&self) -> &[bool] {
        &self.0
    }

    /// Signed DIMACS literals true under the model.
    pub fn to_dimacs(&self) -> Vec<i64> {
        self.0
            .iter()
            .enumerate()
            .map(|(slot, &v)| {
                let index = slot as i64 + 1;
                if v {
                    index
                } else {
                    -index
                }
            })
            .collect()
    }
}

/// The constant model for a unipolar set.
pub fn unipolar_model(formula: &Formula, side: Side) -> Result<Model, AnalysisError> {
    if formula.clauses().iter().any(Clause::is_empty) {
        return Err(AnalysisError::EmptyClause);
    }
    match (unipolarity(formula), side) {
        (Unipolarity::Bipolar, _) => Err(AnalysisError::Bipolar),
        (Unipolarity::Unipolar(Side::NoNegative), Side::NoPositive) => {
            Err(AnalysisError::WrongSide("positive"))
        }
        (Unipolarity::Unipolar(Side::NoPositive), Side::NoNegative) => {
            Err(AnalysisError::WrongSide("negative"))
        }
        _ => Ok(Model::constant(formula.num_vars(), side.completion_value())),
    }
}

/// A set of variables whose literals are flipped throughout a formula.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Inverter(BTreeSet<Var>);

impl Inverter {
    pub fn new() -> Inverter {
        Inverter::default()
    }

    pub fn contains(&self, var: Var) -> bool {
        self.0.contains(&var)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Var> + '_ {
        self.0.iter().copied()
    }

    pub fn insert(&mut self, var: Var) -> bool {
        self.0.insert(var)
    }
}

impl FromIterator<Var> for Inverter {
    fn from_iter<I: IntoIterator<Item = Var>>(iter: I) -> Self {
        Inverter(iter.into_iter().collect())
    }
}

pub fn apply_inverter(formula: &Formula, theta: &Inverter) -> Result<Formula, AnalysisError> {
    if let Some(var) = theta.iter().find(|v| v.slot() >= formula.num_vars()) {
        return Err(AnalysisError::VariableOutOfRange {
            var,
            num_vars: formula.num_vars(),
        });
    }
    let mut mask = vec![false; formula.num_vars()];
    for var in theta.iter() {
        mask[var.slot()] = true;
    }
    Ok(formula.map_literals(|v| mask[v.slot()]))
}

/// Flips the value of each variable in `theta` (variables beyond the model
/// are ignored).
pub fn invert_model(model: &Model, theta: &Inverter) -> Model {
    let mut out = model.clone();
    for var in theta.iter().filter(|v| v.slot() < model.num_vars()) {
        out.set(var, !model.value(var));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verification {
    Satisfied,
    /// Index of the first clause with no true literal.
    Violated(usize),
}

pub fn verify_model(formula: &Formula, model: &Model) -> Result<Verification, AnalysisError> {
    if model.num_vars() != formula.num_vars() {
        return Err(AnalysisError::PartialModel {
            expected: formula.num_vars(),
            got: model.num_vars(),
        });
    }
    let violated = formula.clauses().iter().position(|clause| {
        !clause
            .lits()
            .iter()
            .any(|l| model.value(l.var()) == l.is_positive())
    });
    Ok(violated.map_or(Verification::Satisfied, Verification::Violated))
}

/// Which literal occurrences feed the skewness counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Counting {
    /// Occurrences exactly as read from the input.
    #[default]
    Raw,
    /// Occurrences after duplicate removal and tautology elimination.
    Normalized,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkewnessReport {
    pub counting: Counting,
    pub num_vars: usize,
    pub num_clauses: usize,
    pub pos_lit: u64,
    pub neg_lit: u64,
    pub p: Ratio<u64>,
    pub rho: Inverter,
    pub hp: Ratio<u64>,
    pub initially_unipolar: bool,
    pub unipolar_after_rho: bool,
    /// `(pos(v), neg(v))` per variable slot.
    pub per_variable: Vec<Occurrences>,
    /// No literal occurrences at all; `p` and `hp` are reported as zero.
    pub empty: bool,
}

fn skew_ratio(pos: u64, neg: u64) -> Ratio<u64> {
    if pos + neg == 0 {
        Ratio::from_integer(0)
    } else {
        Ratio::new(pos.min(neg), pos + neg)
    }
}

/// Per-variable `(unnegated, negated)` counts over normalized clauses.
pub fn normalized_occurrences(formula: &Formula) -> Vec<Occurrences> {
    let mut counts = vec![(0u64, 0u64); formula.num_vars()];
    for lit in formula.clauses().iter().flat_map(Clause::lits) {
        let entry = &mut counts[lit.var().slot()];
        if lit.is_positive() {
            entry.0 += 1;
        } else {
            entry.1 += 1;
        }
    }
    counts
}

/// The inverter that flips every variable occurring more often unnegated
/// than negated. Balanced variables are left alone.
pub fn revealing_inverter(per_variable: &[Occurrences]) -> Inverter {
    per_variable
        .iter()
        .enumerate()
        .filter(|(_, (pos, neg))| pos > neg)
        .map(|(slot, _)| Var::from_slot(slot))
        .collect()
}

/// Skewness, revealing inverter and hidden skewness in one linear pass.
pub fn skewness(formula: &Formula, counting: Counting) -> SkewnessReport {
    let (per_variable, num_clauses) = match counting {
        Counting::Raw => (formula.raw_occurrences().to_vec(), formula.raw_clauses()),
        Counting::Normalized => (normalized_occurrences(formula), formula.num_clauses()),
    };
    let pos_lit: u64 = per_variable.iter().map(|o| o.0).sum();
    let neg_lit: u64 = per_variable.iter().map(|o| o.1).sum();
    let rho = revealing_inverter(&per_variable);
    // After flipping rho each variable contributes min(pos, neg) unnegated.
    let hidden_pos: u64 = per_variable.iter().map(|&(p, n)| p.min(n)).sum();
    let hidden_neg = pos_lit + neg_lit - hidden_pos;

    let inverted = apply_inverter(formula, &rho).expect("rho built from formula variables");
    SkewnessReport {
        counting,
        num_vars: formula.num_vars(),
        num_clauses,
        pos_lit,
        neg_lit,
        p: skew_ratio(pos_lit, neg_lit),
        hp: skew_ratio(hidden_pos, hidden_neg),
        rho,
        initially_unipolar: unipolarity(formula).is_unipolar(),
        unipolar_after_rho: unipolarity(&inverted).is_unipolar(),
        per_variable,
        empty: pos_lit + neg_lit == 0,
    }
}

fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Flat machine-readable form of a [`SkewnessReport`].
#[derive(Debug, Clone, Serialize)]
pub struct SkewnessRecord {
    pub n: usize,
    pub m: usize,
    pub poslit: u64,
    pub neglit: u64,
    pub p: f64,
    pub rho_size: usize,
    pub hp: f64,
    pub initially_unipolar: bool,
    pub unipolar_after_rho: bool,
    pub counting: Counting,
    pub empty: bool,
}

impl SkewnessReport {
    pub fn p_f64(&self) -> f64 {
        ratio_to_f64(self.p)
    }

    pub fn hp_f64(&self) -> f64 {
        ratio_to_f64(self.hp)
    }

    pub fn record(&self) -> SkewnessRecord {
        SkewnessRecord {
            n: self.num_vars,
            m: self.num_clauses,
            poslit: self.pos_lit,
            neglit: self.neg_lit,
            p: self.p_f64(),
            rho_size: self.rho.len(),
            hp: self.hp_f64(),
            initially_unipolar: self.initially_unipolar,
            unipolar_after_rho: self.unipolar_after_rho,
            counting: self.counting,
            empty: self.empty,
        }
    }

    /// Markdown header matching [`SkewnessReport::table_row`].
    pub fn table_header() -> &'static str {
        "| instance | n | m | p(S) | hp(S) |\n|---|---|---|---|---|"
    }

    /// One row in the hidden-vs-initial skewness table layout.
    pub fn table_row(&self, name: &str) -> String {
        format!(
            "| {name} | {} | {} | {:.3} | {:.3} |",
            self.num_vars,
            self.num_clauses,
            self.p_f64(),
            self.hp_f64()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> Formula {
        Formula::from_ints(3, [[1, 2, 3], [-1, -2, -3], [-1, 2, -3]]).unwrap()
    }

    fn v(i: u32) -> Var {
        Var::new(i)
    }

    #[test]
    fn polarity_of_example_clauses() {
        let f = example();
        let got: Vec<_> = f
            .clauses()
            .iter()
            .map(|c| clause_polarity(c).unwrap())
            .collect();
        assert_eq!(
            got,
            [
                ClausePolarity::Positive,
                ClausePolarity::Negative,
                ClausePolarity::Mixed
            ]
        );
        assert_eq!(
            clause_polarity(&Clause::default()),
            Err(AnalysisError::EmptyClause)
        );
    }

    #[test]
    fn unipolarity_cases() {
        assert_eq!(unipolarity(&example()), Unipolarity::Bipolar);
        let inverted = apply_inverter(&example(), &[v(2)].into_iter().collect()).unwrap();
        assert_eq!(
            unipolarity(&inverted),
            Unipolarity::Unipolar(Side::NoPositive)
        );
        let empty = Formula::new(2, vec![]).unwrap();
        assert_eq!(unipolarity(&empty), Unipolarity::Unipolar(Side::Both));
        let mixed = Formula::from_ints(2, [[1, -2]]).unwrap();
        assert_eq!(unipolarity(&mixed), Unipolarity::Unipolar(Side::Both));
    }

    #[test]
    fn unipolar_models() {
        let inverted = apply_inverter(&example(), &[v(2)].into_iter().collect()).unwrap();
        let m = unipolar_model(&inverted, Side::NoPositive).unwrap();
        assert_eq!(m, Model::constant(3, false));
        assert_eq!(verify_model(&inverted, &m), Ok(Verification::Satisfied));

        let f = Formula::from_ints(2, [vec![-1], vec![-1, 2]]).unwrap();
        let m = unipolar_model(&f, Side::NoPositive).unwrap();
        assert_eq!(m.values(), &[false, false]);
        assert_eq!(verify_model(&f, &m), Ok(Verification::Satisfied));

        let f = Formula::from_ints(1, [[1]]).unwrap();
        assert_eq!(
            unipolar_model(&f, Side::NoNegative).unwrap().values(),
            &[true]
        );
        assert_eq!(
            unipolar_model(&f, Side::NoPositive),
            Err(AnalysisError::WrongSide("positive"))
        );
        assert_eq!(
            unipolar_model(&example(), Side::NoPositive),
            Err(AnalysisError::Bipolar)
        );
    }

    #[test]
    fn inverter_on_example() {
        let theta: Inverter = [v(2)].into_iter().collect();
        let inverted = apply_inverter(&example(), &theta).unwrap();
        let expected = Formula::from_ints(3, [[1, -2, 3], [-1, 2, -3], [-1, -2, -3]]).unwrap();
        assert_eq!(inverted.clauses(), expected.clauses());
        assert_eq!(
            apply_inverter(&example(), &Inverter::new()).unwrap(),
            example()
        );
        let theta: Inverter = [v(1), v(3)].into_iter().collect();
        let twice = apply_inverter(&apply_inverter(&example(), &theta).unwrap(), &theta).unwrap();
        assert_eq!(twice, example());
        let bad: Inverter = [v(4)].into_iter().collect();
        assert!(matches!(
            apply_inverter(&example(), &bad),
            Err(AnalysisError::VariableOutOfRange { .. })
        ));
    }

    #[test]
    fn model_inversion() {
        let theta: Inverter = [v(2)].into_iter().collect();
        let m = invert_model(&Model::constant(3, false), &theta);
        assert_eq!(m.values(), &[false, true, false]);
        assert_eq!(invert_model(&m, &Inverter::new()), m);
        // M satisfies S iff M.theta satisfies S.theta
        let s = example();
        assert_eq!(verify_model(&s, &m), Ok(Verification::Satisfied));
        let st = apply_inverter(&s, &theta).unwrap();
        assert_eq!(
            verify_model(&st, &invert_model(&m, &theta)),
            Ok(Verification::Satisfied)
        );
    }

    #[test]
    fn skewness_of_example() {
        let r = skewness(&example(), Counting::Raw);
        assert_eq!((r.pos_lit, r.neg_lit), (4, 5));
        assert_eq!(r.p, Ratio::new(4, 9));
        assert_eq!(r.rho.iter().collect::<Vec<_>>(), vec![v(2)]);
        assert_eq!(r.hp, Ratio::new(1, 3));
        assert!(!r.initially_unipolar);
        assert!(r.unipolar_after_rho);
        assert_eq!(format!("{:.3} {:.3}", r.p_f64(), r.hp_f64()), "0.444 0.333");
        assert_eq!(
            skewness(&example(), Counting::Normalized),
            SkewnessReport {
                counting: Counting::Normalized,
                ..r
            }
        );
    }

    #[test]
    fn skewness_balanced_pair() {
        // pos(v1) = 1 > neg(v1) = 0, so v1 flips and the set becomes
        // (-v1, -v2): poslit = 0, neglit = 2.
        let f = Formula::from_ints(2, [[1, -2]]).unwrap();
        let r = skewness(&f, Counting::Raw);
        assert_eq!((r.pos_lit, r.neg_lit), (1, 1));
        assert_eq!(r.p, Ratio::new(1, 2));
        assert_eq!(r.rho.iter().collect::<Vec<_>>(), vec![v(1)]);
        let brute = apply_inverter(&f, &r.rho).unwrap();
        let pos = brute
            .clauses()
            .iter()
            .flat_map(|c| c.lits())
            .filter(|l| l.is_positive())
            .count();
        assert_eq!(pos, 0);
        assert_eq!(r.hp, Ratio::from_integer(0));
    }

    #[test]
    fn skewness_all_negative() {
        let f = Formula::from_ints(2, [[-1], [-2]]).unwrap();
        let r = skewness(&f, Counting::Raw);
        assert_eq!(r.p, Ratio::from_integer(0));
        assert!(r.rho.is_empty());
        assert_eq!(r.hp, Ratio::from_integer(0));
        assert!(r.initially_unipolar);
    }

    #[test]
    fn skewness_empty_formula_flagged() {
        let f = Formula::new(3, vec![]).unwrap();
        let r = skewness(&f, Counting::Raw);
        assert!(r.empty);
        assert_eq!(r.p, Ratio::from_integer(0));
        assert_eq!(r.hp, Ratio::from_integer(0));
    }

    #[test]
    fn raw_and_normalized_counting_differ_on_tautology() {
        let f = Formula::from_ints(2, [vec![1, -1, 2], vec![-2]]).unwrap();
        let raw = skewness(&f, Counting::Raw);
        let norm = skewness(&f, Counting::Normalized);
        assert_eq!((raw.pos_lit, raw.neg_lit, raw.num_clauses), (2, 2, 2));
        assert_eq!((norm.pos_lit, norm.neg_lit, norm.num_clauses), (0, 1, 1));
    }

    #[test]
    fn verification() {
        let s = example();
        let m = Model::from_values(vec![false, true, false]);
        assert_eq!(verify_model(&s, &m), Ok(Verification::Satisfied));
        let unit = Formula::from_ints(1, [[1]]).unwrap();
        assert_eq!(
            verify_model(&unit, &Model::constant(1, false)),
            Ok(Verification::Violated(0))
        );
        let empty = Formula::new(2, vec![]).unwrap();
        assert_eq!(
            verify_model(&empty, &Model::constant(2, true)),
            Ok(Verification::Satisfied)
        );
        assert_eq!(
            verify_model(&s, &Model::constant(2, true)),
            Err(AnalysisError::PartialModel {
                expected: 3,
                got: 2
            })
        );
    }

    #[test]
    fn record_and_row() {
        let r = skewness(&example(), Counting::Raw);
        let json = serde_json::to_value(r.record()).unwrap();
        assert_eq!(json["n"], 3);
        assert_eq!(json["m"], 3);
        assert_eq!(json["poslit"], 4);
        assert_eq!(json["neglit"], 5);
        assert_eq!(json["rho_size"], 1);
        assert_eq!(json["initially_unipolar"], false);
        assert_eq!(r.table_row("ex"), "| ex | 3 | 3 | 0.444 | 0.333 |");
    }
}
