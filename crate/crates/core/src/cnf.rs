//! CNF data model and DIMACS reading/writing.
//!
//! A [`Formula`] keeps two views of its input: the normalized clause list
//! used by the solver (duplicate literals removed, tautologies dropped) and
//! the raw per-variable literal counts exactly as they appeared in the file.

use std::collections::HashSet;
use std::fmt;
use std::io::{self, Read, Write};
use std::ops::Not;

use thiserror::Error;

/// A propositional variable, numbered from 1 as in DIMACS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(u32);

impl Var {
    /// Panics if `index` is zero.
    pub fn new(index: u32) -> Var {
        assert!(index >= 1, "variable indices start at 1");
        Var(index)
    }

    pub fn index(self) -> u32 {
        self.0
    }

    /// Zero-based slot for per-variable tables.
    #[inline]
    pub fn slot(self) -> usize {
        (self.0 - 1) as usize
    }

    pub fn from_slot(slot: usize) -> Var {
        Var(slot as u32 + 1)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// A literal: a variable together with its polarity.
///
/// Encoded as `2 * slot + negated` so that a literal and its negation are
/// adjacent codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: Var, unnegated: bool) -> Lit {
        Lit((var.slot() as u32) << 1 | u32::from(!unnegated))
    }

    pub fn positive(var: Var) -> Lit {
        Lit::new(var, true)
    }

    pub fn negative(var: Var) -> Lit {
        Lit::new(var, false)
    }

    /// Converts a nonzero signed DIMACS integer.
    pub fn from_dimacs(value: i64) -> Option<Lit> {
        if value == 0 || value.unsigned_abs() > u64::from(u32::MAX >> 1) {
            return None;
        }
        Some(Lit::new(Var::new(value.unsigned_abs() as u32), value > 0))
    }

    pub fn to_dimacs(self) -> i64 {
        let index = i64::from(self.var().index());
        if self.is_positive() {
            index
        } else {
            -index
        }
    }

    #[inline]
    pub fn var(self) -> Var {
        Var((self.0 >> 1) + 1)
    }

    /// True for an unnegated literal.
    #[inline]
    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    #[inline]
    pub fn is_negative(self) -> bool {
        !self.is_positive()
    }

    #[inline]
    pub fn negate(self) -> Lit {
        Lit(self.0 ^ 1)
    }

    /// Dense index in `0..2 * num_vars`.
    #[inline]
    pub fn code(self) -> usize {
        self.0 as usize
    }
}

impl Not for Lit {
    type Output = Lit;

    fn not(self) -> Lit {
        self.negate()
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// Result of normalizing a single clause.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalized {
    /// The clause was kept; `duplicates` literals were removed.
    Kept { duplicates: usize },
    /// The clause contains a literal and its negation.
    Tautology,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Clause {
    lits: Vec<Lit>,
}

impl Clause {
    pub fn new(lits: Vec<Lit>) -> Clause {
        Clause { lits }
    }

    pub fn lits(&self) -> &[Lit] {
        &self.lits
    }

    pub fn len(&self) -> usize {
        self.lits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lits.is_empty()
    }

    /// Removes repeated literals (keeping first occurrences in order) and
    /// reports whether the clause is tautological.
    pub fn normalize(&mut self) -> Normalized {
        let mut sorted: Vec<Lit> = self.lits.clone();
        sorted.sort_unstable();
        let mut duplicates = 0;
        for pair in sorted.windows(2) {
            if pair[0] == pair[1] {
                duplicates += 1;
            } else if pair[0].var() == pair[1].var() {
                return Normalized::Tautology;
            }
        }
        if duplicates > 0 {
            let mut seen = HashSet::with_capacity(self.lits.len());
            self.lits.retain(|lit| seen.insert(*lit));
        }
        Normalized::Kept { duplicates }
    }

    /// Literals are distinct and no variable occurs in both polarities.
    pub fn is_normalized(&self) -> bool {
        let mut vars: Vec<Var> = self.lits.iter().map(|l| l.var()).collect();
        vars.sort_unstable();
        vars.windows(2).all(|w| w[0] != w[1])
    }
}

impl FromIterator<Lit> for Clause {
    fn from_iter<I: IntoIterator<Item = Lit>>(iter: I) -> Self {
        Clause::new(iter.into_iter().collect())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormulaError {
    #[error("literal {lit} refers to a variable above num_vars = {num_vars}")]
    VariableOutOfRange { lit: i64, num_vars: usize },
    #[error("literal 0 is not a valid literal")]
    ZeroLiteral,
}

/// Per-variable occurrence counts: `(unnegated, negated)`.
pub type Occurrences = (u64, u64);

/// A CNF instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    num_vars: usize,
    clauses: Vec<Clause>,
    declared_clauses: Option<usize>,
    raw_clauses: usize,
    raw_occurrences: Vec<Occurrences>,
    tautologies_dropped: usize,
    duplicates_removed: usize,
}

impl Formula {
    /// Builds a formula from raw clauses, recording raw literal counts and
    /// then normalizing.
    pub fn new(num_vars: usize, clauses: Vec<Clause>) -> Result<Formula, FormulaError> {
        let mut raw_occurrences = vec![(0u64, 0u64); num_vars];
        for lit in clauses.iter().flat_map(|c| c.lits()) {
            let slot = lit.var().slot();
            if slot >= num_vars {
                return Err(FormulaError::VariableOutOfRange {
                    lit: lit.to_dimacs(),
                    num_vars,
                });
            }
            let entry = &mut raw_occurrences[slot];
            if lit.is_positive() {
                entry.0 += 1;
            } else {
                entry.1 += 1;
            }
        }
        let raw_clauses = clauses.len();
        let mut formula = Formula {
            num_vars,
            clauses,
            declared_clauses: None,
            raw_clauses,
            raw_occurrences,
            tautologies_dropped: 0,
            duplicates_removed: 0,
        };
        formula.normalize();
        Ok(formula)
    }

    /// Convenience constructor from signed DIMACS integers.
    pub fn from_ints<C, I>(num_vars: usize, clauses: C) -> Result<Formula, FormulaError>
    where
        C: IntoIterator<Item = I>,
        I: IntoIterator<Item = i64>,
    {
        let clauses = clauses
            .into_iter()
            .map(|c| {
                c.into_iter()
                    .map(|v| Lit::from_dimacs(v).ok_or(FormulaError::ZeroLiteral))
                    .collect::<Result<Clause, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Formula::new(num_vars, clauses)
    }

    fn normalize(&mut self) {
        let mut tautologies = 0;
        let mut duplicates = 0;
        self.clauses.retain_mut(|clause| match clause.normalize() {
            Normalized::Kept { duplicates: d } => {
                duplicates += d;
                true
            }
            Normalized::Tautology => {
                tautologies += 1;
                false
            }
        });
        self.tautologies_dropped += tautologies;
        self.duplicates_removed += duplicates;
    }

    /// Re-runs normalization; a no-op on any formula built by this module.
    pub fn renormalized(&self) -> Formula {
        let mut copy = self.clone();
        copy.normalize();
        copy
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Number of clauses after normalization.
    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// Clause count from the `p cnf` header, when parsed from DIMACS.
    pub fn declared_clauses(&self) -> Option<usize> {
        self.declared_clauses
    }

    /// Number of clauses in the input body, tautologies included.
    pub fn raw_clauses(&self) -> usize {
        self.raw_clauses
    }

    pub fn tautologies_dropped(&self) -> usize {
        self.tautologies_dropped
    }

    pub fn duplicates_removed(&self) -> usize {
        self.duplicates_removed
    }

    /// Raw `(unnegated, negated)` occurrence counts per variable slot.
    pub fn raw_occurrences(&self) -> &[Occurrences] {
        &self.raw_occurrences
    }

    pub fn raw_pos_lit(&self) -> u64 {
        self.raw_occurrences.iter().map(|o| o.0).sum()
    }

    pub fn raw_neg_lit(&self) -> u64 {
        self.raw_occurrences.iter().map(|o| o.1).sum()
    }

    /// Total literal occurrences after normalization.
    pub fn num_literals(&self) -> usize {
        self.clauses.iter().map(Clause::len).sum()
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> {
        (0..self.num_vars).map(Var::from_slot)
    }

    /// Maps every literal through `f`, keeping raw counts in step. `f` must
    /// preserve the variable of each literal.
    pub(crate) fn map_literals(&self, flip: impl Fn(Var) -> bool) -> Formula {
        let map = |l: Lit| if flip(l.var()) { l.negate() } else { l };
        let clauses = self
            .clauses
            .iter()
            .map(|c| c.lits().iter().copied().map(map).collect())
            .collect();
        let raw_occurrences = self
            .raw_occurrences
            .iter()
            .enumerate()
            .map(|(slot, &(pos, neg))| {
                if flip(Var::from_slot(slot)) {
                    (neg, pos)
                } else {
                    (pos, neg)
                }
            })
            .collect();
        Formula {
            clauses,
            raw_occurrences,
            ..self.clone()
        }
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: malformed header `{text}` (expected `p cnf <vars> <clauses>`)")]
    MalformedHeader { line: usize, text: String },
    #[error("line {line}: second `p` header")]
    DuplicateHeader { line: usize },
    #[error("line {line}: clause data before the `p cnf` header")]
    ClauseBeforeHeader { line: usize },
    #[error("no `p cnf` header found")]
    MissingHeader,
    #[error("line {line}, column {column}: `{token}` is not an integer")]
    InvalidToken {
        line: usize,
        column: usize,
        token: String,
    },
    #[error("line {line}, column {column}: `{token}` has variable index 0")]
    ZeroIndex {
        line: usize,
        column: usize,
        token: String,
    },
    #[error(
        "line {line}, column {column}: literal {lit} exceeds the declared {num_vars} variables"
    )]
    VariableOutOfRange {
        line: usize,
        column: usize,
        lit: i64,
        num_vars: usize,
    },
    #[error("line {line}: final clause is not terminated by 0")]
    UnterminatedClause { line: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Reads a DIMACS CNF instance.
///
/// Accepts `c` comment lines anywhere, arbitrary whitespace between tokens,
/// and the SATLIB `%` end marker. The body clause count wins over the header
/// when they disagree.
pub fn parse_dimacs<R: Read>(mut reader: R) -> Result<Formula, ParseError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    parse_dimacs_str(&text)
}

pub fn parse_dimacs_str(text: &str) -> Result<Formula, ParseError> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut current: Vec<Lit> = Vec::new();
    let mut last_line = 0;

    'lines: for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        if trimmed.starts_with('%') {
            break;
        }
        if trimmed.starts_with('p') {
            if header.is_some() {
                return Err(ParseError::DuplicateHeader { line: line_no });
            }
            header = Some(
                parse_header(trimmed).ok_or_else(|| ParseError::MalformedHeader {
                    line: line_no,
                    text: line.trim().to_string(),
                })?,
            );
            continue;
        }
        let Some((num_vars, _)) = header else {
            return Err(ParseError::ClauseBeforeHeader { line: line_no });
        };
        for (column, token) in tokens_with_columns(line) {
            if token.starts_with('%') {
                break 'lines;
            }
            let value: i64 = token.parse().map_err(|_| ParseError::InvalidToken {
                line: line_no,
                column,
                token: token.to_string(),
            })?;
            if value == 0 {
                if token.starts_with('-') || token.starts_with('+') {
                    return Err(ParseError::ZeroIndex {
                        line: line_no,
                        column,
                        token: token.to_string(),
                    });
                }
                clauses.push(Clause::new(std::mem::take(&mut current)));
                continue;
            }
            if value.unsigned_abs() > num_vars as u64 {
                return Err(ParseError::VariableOutOfRange {
                    line: line_no,
                    column,
                    lit: value,
                    num_vars,
                });
            }
            current.push(Lit::from_dimacs(value).expect("nonzero and in range"));
        }
    }

    let Some((num_vars, declared)) = header else {
        return Err(ParseError::MissingHeader);
    };
    if !current.is_empty() {
        return Err(ParseError::UnterminatedClause { line: last_line });
    }
    if clauses.len() != declared {
        log::warn!(
            "header declares {declared} clauses but the body has {}; using the body",
            clauses.len()
        );
    }
    let mut formula =
        Formula::new(num_vars, clauses).expect("literals range-checked while parsing");
    formula.declared_clauses = Some(declared);
    Ok(formula)
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut parts = line.split_whitespace();
    if parts.next()? != "p" || parts.next()? != "cnf" {
        return None;
    }
    let vars = parts.next()?.parse().ok()?;
    let clauses = parts.next()?.parse().ok()?;
    if parts.next().is_some() {
        return None;
    }
    Some((vars, clauses))
}

/// Whitespace-separated tokens with their 1-based column.
fn tokens_with_columns(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut rest = line;
    let mut offset = 0;
    std::iter::from_fn(move || {
        let start = rest.find(|c: char| !c.is_whitespace())?;
        let tail = &rest[start..];
        let len = tail.find(char::is_whitespace).unwrap_or(tail.len());
        let token = &tail[..len];
        let column = offset + start + 1;
        offset += start + len;
        rest = &tail[len..];
        Some((column, token))
    })
}

/// Writes the normalized clauses as DIMACS.
pub fn write_dimacs<W: Write>(formula: &Formula, out: W) -> io::Result<()> {
    write_dimacs_with_comments(formula, &[], out)
}

/// Like [`write_dimacs`], preceded by one `c` line per comment.
pub fn write_dimacs_with_comments<W: Write>(
    formula: &Formula,
    comments: &[String],
    out: W,
) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    for comment in comments {
        for line in comment.lines() {
            writeln!(out, "c {line}")?;
        }
    }
    writeln!(
        out,
        "p cnf {} {}",
        formula.num_vars(),
        formula.num_clauses()
    )?;
    for clause in formula.clauses() {
        for lit in clause.lits() {
            write!(out, "{lit} ")?;
        }
        writeln!(out, "0")?;
    }
    out.flush()
}

pub fn to_dimacs_string(formula: &Formula) -> String {
    let mut buf = Vec::new();
    write_dimacs(formula, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("DIMACS output is ASCII")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EXAMPLE: &str = "p cnf 3 3\n1 2 3 0\n-1 -2 -3 0\n-1 2 -3 0\n";

    #[test]
    fn literal_encoding() {
        let l = Lit::from_dimacs(-7).unwrap();
        assert_eq!(l.var().index(), 7);
        assert!(l.is_negative());
        assert_eq!(!l, Lit::from_dimacs(7).unwrap());
        assert_eq!(!!l, l);
        assert_eq!(l.to_dimacs(), -7);
        assert!(Lit::from_dimacs(0).is_none());
    }

    #[test]
    fn parses_three_clause_example() {
        let f = parse_dimacs_str(EXAMPLE).unwrap();
        assert_eq!(f.num_vars(), 3);
        assert_eq!(f.num_clauses(), 3);
        assert_eq!(f.raw_pos_lit(), 4);
        assert_eq!(f.raw_neg_lit(), 5);
        assert_eq!(f.declared_clauses(), Some(3));
    }

    #[test]
    fn empty_formula() {
        let f = parse_dimacs_str("p cnf 1 0\n").unwrap();
        assert_eq!(f.num_vars(), 1);
        assert_eq!(f.num_clauses(), 0);
    }

    #[test]
    fn tautology_dropped_raw_counts_kept() {
        let f = parse_dimacs_str("p cnf 2 1\n1 -1 2 0\n").unwrap();
        assert_eq!(f.num_clauses(), 0);
        assert_eq!(f.tautologies_dropped(), 1);
        assert_eq!(f.raw_pos_lit(), 2);
        assert_eq!(f.raw_neg_lit(), 1);
        assert_eq!(f.raw_clauses(), 1);
    }

    #[test]
    fn duplicate_literals_removed() {
        let f = parse_dimacs_str("p cnf 2 1\n2 1 2 2 0\n").unwrap();
        assert_eq!(f.clauses()[0].lits().len(), 2);
        assert_eq!(f.clauses()[0].lits()[0].to_dimacs(), 2);
        assert_eq!(f.duplicates_removed(), 2);
        assert_eq!(f.raw_pos_lit(), 4);
    }

    #[test]
    fn comments_whitespace_and_percent_marker() {
        let text = "c hello\nc\np cnf 3 2\n1\n -2 0 c\t3\n  0\n%\n0\n";
        // `c` inside a clause line is not a comment
        assert!(matches!(
            parse_dimacs_str(text),
            Err(ParseError::InvalidToken {
                line: 5,
                column: 7,
                ..
            })
        ));
        let text = "c hello\np cnf 3 2\n1\n -2 0\t3\n  0\n%\n0\n";
        let f = parse_dimacs_str(text).unwrap();
        assert_eq!(f.num_clauses(), 2);
        assert_eq!(f.clauses()[1].lits()[0].to_dimacs(), 3);
    }

    #[test]
    fn empty_clause_is_kept() {
        let f = parse_dimacs_str("p cnf 1 2\n0\n1 0\n").unwrap();
        assert_eq!(f.num_clauses(), 2);
        assert!(f.clauses()[0].is_empty());
    }

    #[test]
    fn parse_errors_name_location() {
        assert!(matches!(
            parse_dimacs_str("p cnf x 1\n"),
            Err(ParseError::MalformedHeader { line: 1, .. })
        ));
        assert!(matches!(
            parse_dimacs_str("p dnf 1 1\n"),
            Err(ParseError::MalformedHeader { .. })
        ));
        assert!(matches!(
            parse_dimacs_str("c only\n"),
            Err(ParseError::MissingHeader)
        ));
        assert!(matches!(
            parse_dimacs_str("1 0\np cnf 1 1\n"),
            Err(ParseError::ClauseBeforeHeader { line: 1 })
        ));
        assert!(matches!(
            parse_dimacs_str("p cnf 2 1\n1 3 0\n"),
            Err(ParseError::VariableOutOfRange {
                line: 2,
                column: 3,
                lit: 3,
                ..
            })
        ));
        assert!(matches!(
            parse_dimacs_str("p cnf 2 1\n1 -0 0\n"),
            Err(ParseError::ZeroIndex {
                line: 2,
                column: 3,
                ..
            })
        ));
        assert!(matches!(
            parse_dimacs_str("p cnf 2 1\n1 2\n"),
            Err(ParseError::UnterminatedClause { line: 2 })
        ));
        assert!(matches!(
            parse_dimacs_str("p cnf 2 1\n1 2.5 0\n"),
            Err(ParseError::InvalidToken {
                line: 2,
                column: 3,
                ..
            })
        ));
        assert!(matches!(
            parse_dimacs_str("p cnf 2 1\np cnf 2 1\n"),
            Err(ParseError::DuplicateHeader { line: 2 })
        ));
    }

    #[test]
    fn header_mismatch_trusts_body() {
        let f = parse_dimacs_str("p cnf 2 5\n1 0\n2 0\n").unwrap();
        assert_eq!(f.num_clauses(), 2);
        assert_eq!(f.declared_clauses(), Some(5));
    }

    #[test]
    fn writes_unit_clause() {
        let f = Formula::from_ints(1, [[1]]).unwrap();
        assert_eq!(to_dimacs_string(&f), "p cnf 1 1\n1 0\n");
    }

    #[test]
    fn writes_empty_clause_list() {
        let f = Formula::new(2, vec![]).unwrap();
        assert_eq!(to_dimacs_string(&f), "p cnf 2 0\n");
    }

    #[test]
    fn example_round_trip() {
        let f = parse_dimacs_str(EXAMPLE).unwrap();
        let text = to_dimacs_string(&f);
        assert_eq!(text, "p cnf 3 3\n1 2 3 0\n-1 -2 -3 0\n-1 2 -3 0\n");
        assert_eq!(parse_dimacs_str(&text).unwrap().clauses(), f.clauses());
    }

    #[test]
    fn comments_written_before_header() {
        let f = Formula::from_ints(1, [[-1]]).unwrap();
        let mut buf = Vec::new();
        write_dimacs_with_comments(&f, &["n=1 seed=3".into()], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "c n=1 seed=3\np cnf 1 1\n-1 0\n"
        );
    }

    #[test]
    fn out_of_range_constructor() {
        assert_eq!(
            Formula::from_ints(2, [[1, -3]]),
            Err(FormulaError::VariableOutOfRange {
                lit: -3,
                num_vars: 2
            })
        );
    }

    fn arb_clauses() -> impl Strategy<Value = (usize, Vec<Vec<i64>>)> {
        (1usize..12).prop_flat_map(|n| {
            let lit = (1..=n as i64, any::<bool>()).prop_map(|(v, s)| if s { v } else { -v });
            (
                Just(n),
                prop::collection::vec(prop::collection::vec(lit, 0..6), 0..20),
            )
        })
    }

    fn sorted_clauses(f: &Formula) -> Vec<Vec<i64>> {
        let mut out: Vec<Vec<i64>> = f
            .clauses()
            .iter()
            .map(|c| {
                let mut v: Vec<i64> = c.lits().iter().map(|l| l.to_dimacs()).collect();
                v.sort_unstable();
                v
            })
            .collect();
        out.sort();
        out
    }

    proptest! {
        #[test]
        fn round_trip_preserves_clauses((n, clauses) in arb_clauses()) {
            let f = Formula::from_ints(n, clauses).unwrap();
            let back = parse_dimacs_str(&to_dimacs_string(&f)).unwrap();
            prop_assert_eq!(back.num_vars(), f.num_vars());
            prop_assert_eq!(sorted_clauses(&back), sorted_clauses(&f));
        }

        #[test]
        fn normalization_idempotent((n, clauses) in arb_clauses()) {
            let total: usize = clauses.iter().map(Vec::len).sum();
            let f = Formula::from_ints(n, clauses).unwrap();
            prop_assert!(f.clauses().iter().all(Clause::is_normalized));
            let again = f.renormalized();
            prop_assert_eq!(again.clauses(), f.clauses());
            prop_assert_eq!(again.raw_occurrences(), f.raw_occurrences());
            prop_assert_eq!((f.raw_pos_lit() + f.raw_neg_lit()) as usize, total);
        }
    }
}
