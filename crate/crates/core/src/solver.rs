//! Chronological DPLL with incremental polarity counters.
//!
//! Every clause carries the number of unassigned unnegated and negated
//! literals it still holds, plus the level at which it was satisfied. The
//! solver keeps running totals of active positive, active negative and all
//! active clauses, so the unipolarity check after each assignment is O(1).
//!
//! Each step assigns one literal, deletes satisfied clauses and false
//! literals, and on an empty clause undoes back to the most recent untried
//! branch. Unit clauses are propagated (each forced literal is its own
//! step) unless disabled; there is no pure-literal rule, learning or
//! non-chronological backtracking.

use std::fmt;

use serde::Serialize;

use crate::analysis::{Model, Side, Unipolarity};
use crate::cnf::{Formula, Lit, Var};

/// Assignment applications allowed before a run is declared indeterminate.
pub const DEFAULT_BUDGET: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Stop as soon as the active clauses are unipolar.
    Ust,
    /// Stop when every clause is satisfied.
    Ast,
    /// Record the unipolar point, then continue to all-satisfied.
    Measure,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Ust => "ust",
            Mode::Ast => "ast",
            Mode::Measure => "measure",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverOptions {
    pub mode: Mode,
    pub budget: u64,
    /// Assign the literal of every unit clause before the next branch.
    pub unit_propagation: bool,
    /// Test unipolarity before the first assignment as well as after each
    /// one. When off, the earliest possible unipolar point is step 1.
    pub ust_at_start: bool,
    /// Recount every clause state from scratch after each apply and undo.
    pub audit: bool,
}

impl SolverOptions {
    pub fn new(mode: Mode) -> SolverOptions {
        SolverOptions {
            mode,
            budget: DEFAULT_BUDGET,
            unit_propagation: true,
            ust_at_start: true,
            audit: false,
        }
    }

    pub fn with_ust_at_start(self, ust_at_start: bool) -> SolverOptions {
        SolverOptions {
            ust_at_start,
            ..self
        }
    }

    pub fn with_unit_propagation(self, unit_propagation: bool) -> SolverOptions {
        SolverOptions {
            unit_propagation,
            ..self
        }
    }

    pub fn with_budget(self, budget: u64) -> SolverOptions {
        SolverOptions { budget, ..self }
    }

    pub fn with_audit(self, audit: bool) -> SolverOptions {
        SolverOptions { audit, ..self }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClauseState {
    pub remaining_pos: u32,
    pub remaining_neg: u32,
    /// Decision level that satisfied the clause; `None` while active.
    pub satisfied_at: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Inactive,
    Positive,
    Negative,
    Mixed,
    Empty,
}

impl ClauseState {
    pub fn is_active(&self) -> bool {
        self.satisfied_at.is_none()
    }

    fn class(&self) -> Class {
        if !self.is_active() {
            return Class::Inactive;
        }
        match (self.remaining_pos, self.remaining_neg) {
            (0, 0) => Class::Empty,
            (_, 0) => Class::Positive,
            (0, _) => Class::Negative,
            _ => Class::Mixed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrailEntry {
    /// The literal made true.
    pub lit: Lit,
    /// Set for flipped branches and forced (unit) literals.
    pub tried_both: bool,
}

impl TrailEntry {
    pub fn var(&self) -> Var {
        self.lit.var()
    }

    pub fn value(&self) -> bool {
        self.lit.is_positive()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub pos_active: usize,
    pub neg_active: usize,
    pub active_total: usize,
    /// Assignment applications so far, undone ones included.
    pub assignments: u64,
}

impl Counters {
    fn adjust(&mut self, class: Class, add: bool) {
        let slot = match class {
            Class::Inactive => return,
            Class::Positive => Some(&mut self.pos_active),
            Class::Negative => Some(&mut self.neg_active),
            Class::Mixed | Class::Empty => None,
        };
        if add {
            if let Some(c) = slot {
                *c += 1;
            }
            self.active_total += 1;
        } else {
            if let Some(c) = slot {
                *c -= 1;
            }
            self.active_total -= 1;
        }
    }

    fn transition(&mut self, before: Class, after: Class) {
        if before != after {
            self.adjust(before, false);
            self.adjust(after, true);
        }
    }

    fn same_clause_counts(&self, other: &Counters) -> bool {
        (self.pos_active, self.neg_active, self.active_total)
            == (other.pos_active, other.neg_active, other.active_total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Applied {
    Ok,
    Conflict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backtracked {
    Retried(Applied),
    Exhausted,
}

/// Search state over a borrowed formula.
pub struct Solver<'a> {
    formula: &'a Formula,
    states: Vec<ClauseState>,
    /// Clause indices per literal code.
    occurs: Vec<Vec<u32>>,
    values: Vec<Option<bool>>,
    /// Per literal code: active clauses containing it while its variable is
    /// unassigned. Frozen for assigned variables.
    occ_active: Vec<u32>,
    trail: Vec<TrailEntry>,
    counters: Counters,
    /// Clauses that became unit since the last propagation fixpoint.
    units: Vec<u32>,
    unit_propagation: bool,
    has_empty_clause: bool,
    audit: bool,
    audit_checks: u64,
    audit_mismatches: u64,
}

impl<'a> Solver<'a> {
    pub fn new(formula: &'a Formula) -> Solver<'a> {
        let n = formula.num_vars();
        let mut occurs = vec![Vec::new(); 2 * n];
        let mut occ_active = vec![0u32; 2 * n];
        let mut counters = Counters::default();
        let mut states = Vec::with_capacity(formula.num_clauses());
        for (ci, clause) in formula.clauses().iter().enumerate() {
            let mut state = ClauseState::default();
            for lit in clause.lits() {
                occurs[lit.code()].push(ci as u32);
                occ_active[lit.code()] += 1;
                if lit.is_positive() {
                    state.remaining_pos += 1;
                } else {
                    state.remaining_neg += 1;
                }
            }
            counters.adjust(state.class(), true);
            states.push(state);
        }
        Solver {
            formula,
            has_empty_clause: formula.clauses().iter().any(|c| c.is_empty()),
            states,
            occurs,
            values: vec![None; n],
            occ_active,
            trail: Vec::with_capacity(n),
            counters,
            units: formula
                .clauses()
                .iter()
                .enumerate()
                .filter(|(_, c)| c.len() == 1)
                .map(|(ci, _)| ci as u32)
                .collect(),
            unit_propagation: false,
            audit: false,
            audit_checks: 0,
            audit_mismatches: 0,
        }
    }

    pub fn set_audit(&mut self, audit: bool) {
        self.audit = audit;
    }

    pub fn set_unit_propagation(&mut self, enabled: bool) {
        self.unit_propagation = enabled;
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn clause_states(&self) -> &[ClauseState] {
        &self.states
    }

    pub fn trail(&self) -> &[TrailEntry] {
        &self.trail
    }

    pub fn value(&self, var: Var) -> Option<bool> {
        self.values[var.slot()]
    }

    pub fn has_empty_clause(&self) -> bool {
        self.has_empty_clause
    }

    /// `(checks, mismatches)` performed by the audit so far.
    pub fn audit_results(&self) -> (u64, u64) {
        (self.audit_checks, self.audit_mismatches)
    }

    /// The variable with the most occurrences among active clauses (lowest
    /// index on ties), as its more frequent literal (unnegated on ties).
    pub fn pick_branch(&self) -> Option<Lit> {
        let mut best: Option<(u32, usize)> = None;
        for (slot, value) in self.values.iter().enumerate() {
            if value.is_some() {
                continue;
            }
            let score = self.occ_active[2 * slot] + self.occ_active[2 * slot + 1];
            if score > 0 && best.is_none_or(|(s, _)| score > s) {
                best = Some((score, slot));
            }
        }
        best.map(|(_, slot)| {
            let var = Var::from_slot(slot);
            let pos = self.occ_active[2 * slot];
            let neg = self.occ_active[2 * slot + 1];
            Lit::new(var, pos >= neg)
        })
    }

    /// Makes `lit` true: satisfied clauses leave the active set, the false
    /// literal is deleted from the rest.
    ///
    /// Panics if the variable is already assigned.
    pub fn apply(&mut self, lit: Lit) -> Applied {
        self.apply_entry(TrailEntry {
            lit,
            tried_both: false,
        })
    }

    fn apply_entry(&mut self, entry: TrailEntry) -> Applied {
        let lit = entry.lit;
        let var = lit.var();
        assert!(
            self.values[var.slot()].is_none(),
            "variable {var} is already assigned"
        );
        self.values[var.slot()] = Some(lit.is_positive());
        self.trail.push(entry);
        self.counters.assignments += 1;
        let level = self.trail.len() as u32;

        let Solver {
            formula,
            states,
            occurs,
            values,
            occ_active,
            counters,
            units,
            ..
        } = self;

        for &ci in &occurs[lit.code()] {
            let state = &mut states[ci as usize];
            if !state.is_active() {
                continue;
            }
            counters.adjust(state.class(), false);
            state.satisfied_at = Some(level);
            for other in formula.clauses()[ci as usize].lits() {
                if values[other.var().slot()].is_none() {
                    occ_active[other.code()] -= 1;
                }
            }
        }

        let falsified = lit.negate();
        let mut outcome = Applied::Ok;
        for &ci in &occurs[falsified.code()] {
            let state = &mut states[ci as usize];
            if !state.is_active() {
                continue;
            }
            let before = state.class();
            if falsified.is_positive() {
                state.remaining_pos -= 1;
            } else {
                state.remaining_neg -= 1;
            }
            let after = state.class();
            counters.transition(before, after);
            if after == Class::Empty {
                outcome = Applied::Conflict;
            } else if state.remaining_pos + state.remaining_neg == 1 {
                units.push(ci);
            }
        }

        self.run_audit();
        outcome
    }

    fn undo_top(&mut self) -> TrailEntry {
        // The state being restored was a propagation fixpoint.
        self.units.clear();
        let level = self.trail.len() as u32;
        let entry = self.trail.pop().expect("undo on empty trail");
        let lit = entry.lit;
        let var = lit.var();

        let Solver {
            formula,
            states,
            occurs,
            values,
            occ_active,
            counters,
            ..
        } = self;

        let falsified = lit.negate();
        for &ci in &occurs[falsified.code()] {
            let state = &mut states[ci as usize];
            if !state.is_active() {
                continue;
            }
            let before = state.class();
            if falsified.is_positive() {
                state.remaining_pos += 1;
            } else {
                state.remaining_neg += 1;
            }
            counters.transition(before, state.class());
        }

        for &ci in &occurs[lit.code()] {
            let state = &mut states[ci as usize];
            if state.satisfied_at != Some(level) {
                continue;
            }
            state.satisfied_at = None;
            counters.adjust(state.class(), true);
            for other in formula.clauses()[ci as usize].lits() {
                if other.var() != var && values[other.var().slot()].is_none() {
                    occ_active[other.code()] += 1;
                }
            }
        }

        values[var.slot()] = None;
        self.run_audit();
        entry
    }

    /// Undoes assignments back to the most recent entry whose other branch
    /// is untried, then applies that other branch.
    pub fn backtrack(&mut self) -> Backtracked {
        while !self.trail.is_empty() {
            let entry = self.undo_top();
            if !entry.tried_both {
                return Backtracked::Retried(self.apply_entry(TrailEntry {
                    lit: entry.lit.negate(),
                    tried_both: true,
                }));
            }
        }
        Backtracked::Exhausted
    }

    /// Assigns the remaining literal of the next pending unit clause, if
    /// propagation is enabled and one exists.
    pub fn propagate_next(&mut self) -> Option<Applied> {
        if !self.unit_propagation {
            return None;
        }
        while let Some(ci) = self.units.pop() {
            let state = self.states[ci as usize];
            if !state.is_active() || state.remaining_pos + state.remaining_neg != 1 {
                continue;
            }
            let lit = self.formula.clauses()[ci as usize]
                .lits()
                .iter()
                .copied()
                .find(|l| self.values[l.var().slot()].is_none())
                .expect("unit clause has one unassigned literal");
            return Some(self.apply_entry(TrailEntry {
                lit,
                tried_both: true,
            }));
        }
        None
    }

    pub fn check_ust(&self) -> Unipolarity {
        match Side::from_counts(self.counters.pos_active, self.counters.neg_active) {
            Some(side) => Unipolarity::Unipolar(side),
            None => Unipolarity::Bipolar,
        }
    }

    /// Current trail values with every unassigned variable set to `fill`.
    pub fn model_with(&self, fill: bool) -> Model {
        Model::from_values(self.values.iter().map(|v| v.unwrap_or(fill)).collect())
    }

    /// Clause states and counters derived from the current assignment alone.
    pub fn recount(&self) -> (Vec<ClauseState>, Counters) {
        let mut counters = Counters {
            assignments: self.counters.assignments,
            ..Counters::default()
        };
        let states: Vec<ClauseState> = self
            .formula
            .clauses()
            .iter()
            .map(|clause| {
                let mut state = ClauseState::default();
                let mut satisfied = false;
                for lit in clause.lits() {
                    match self.values[lit.var().slot()] {
                        Some(v) if v == lit.is_positive() => satisfied = true,
                        Some(_) => {}
                        None if lit.is_positive() => state.remaining_pos += 1,
                        None => state.remaining_neg += 1,
                    }
                }
                if satisfied {
                    state.satisfied_at = Some(0);
                }
                counters.adjust(state.class(), true);
                state
            })
            .collect();
        (states, counters)
    }

    fn run_audit(&mut self) {
        if !self.audit {
            return;
        }
        let (states, counters) = self.recount();
        let states_match = states.iter().zip(&self.states).all(|(fresh, kept)| {
            fresh.is_active() == kept.is_active()
                && (!kept.is_active()
                    || (fresh.remaining_pos, fresh.remaining_neg)
                        == (kept.remaining_pos, kept.remaining_neg))
        });
        self.audit_checks += 1;
        if !(states_match && counters.same_clause_counts(&self.counters)) {
            self.audit_mismatches += 1;
            debug_assert!(false, "incremental counters diverged from recount");
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Sat(Model),
    Unsat,
    /// Budget exhausted before a decision.
    Indeterminate,
}

impl Verdict {
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::Sat(_) => 10,
            Verdict::Unsat => 20,
            Verdict::Indeterminate => 30,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Sat(_) => "SAT",
            Verdict::Unsat => "UNSAT",
            Verdict::Indeterminate => "INDETERMINATE",
        }
    }

    pub fn model(&self) -> Option<&Model> {
        match self {
            Verdict::Sat(m) => Some(m),
            _ => None,
        }
    }

    pub fn is_sat(&self) -> bool {
        matches!(self, Verdict::Sat(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub mode: Mode,
    pub verdict: Verdict,
    /// Assignment applications when the active set first became unipolar.
    pub n_u: Option<u64>,
    /// Assignment applications when every clause was satisfied.
    pub n_a: Option<u64>,
    /// Trail length at the unipolar point (assignments still standing).
    pub trail_at_ust: Option<usize>,
    pub trail_at_ast: Option<usize>,
    pub ust_side: Option<Side>,
    pub active_at_ust: Option<usize>,
    pub num_clauses: usize,
    pub conflicts: u64,
    pub assignments: u64,
    /// `(checks, mismatches)` of the counter audit, when it was enabled.
    pub audit: Option<(u64, u64)>,
}

impl SolveStats {
    /// `n_a / n_u`, defined when both are known and `n_u >= 1`.
    pub fn gain(&self) -> Option<f64> {
        match (self.n_u, self.n_a) {
            (Some(u), Some(a)) if u > 0 => Some(a as f64 / u as f64),
            _ => None,
        }
    }

    /// Percentage of clauses still active at the unipolar point.
    pub fn remainder_pct(&self) -> Option<f64> {
        let active = self.active_at_ust?;
        (self.num_clauses > 0).then(|| 100.0 * active as f64 / self.num_clauses as f64)
    }

    pub fn record(&self) -> SolveRecord {
        SolveRecord {
            result: self.verdict.label(),
            mode: self.mode,
            n_u: self.n_u,
            n_a: self.n_a,
            gain: self.gain(),
            remainder_pct: self.remainder_pct(),
            conflicts: self.conflicts,
            assignments: self.assignments,
            trail_at_ust: self.trail_at_ust,
            trail_at_ast: self.trail_at_ast,
            model: self.verdict.model().map(Model::to_dimacs),
        }
    }
}

/// Machine-readable form of [`SolveStats`].
#[derive(Debug, Clone, Serialize)]
pub struct SolveRecord {
    pub result: &'static str,
    pub mode: Mode,
    pub n_u: Option<u64>,
    pub n_a: Option<u64>,
    pub gain: Option<f64>,
    pub remainder_pct: Option<f64>,
    pub conflicts: u64,
    pub assignments: u64,
    pub trail_at_ust: Option<usize>,
    pub trail_at_ast: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<Vec<i64>>,
}

struct UstPoint {
    assignments: u64,
    trail_len: usize,
    active: usize,
    side: Side,
}

/// Runs DPLL to the termination point selected by `options.mode`.
pub fn solve(formula: &Formula, options: &SolverOptions) -> SolveStats {
    let mut solver = Solver::new(formula);
    solver.set_audit(options.audit);
    solver.set_unit_propagation(options.unit_propagation);
    let mode = options.mode;
    let mut stats = SolveStats {
        mode,
        verdict: Verdict::Indeterminate,
        n_u: None,
        n_a: None,
        trail_at_ust: None,
        trail_at_ast: None,
        ust_side: None,
        active_at_ust: None,
        num_clauses: formula.num_clauses(),
        conflicts: 0,
        assignments: 0,
        audit: None,
    };
    if solver.has_empty_clause() {
        stats.verdict = Verdict::Unsat;
        return stats;
    }

    let mut ust: Option<UstPoint> = None;
    let observe = |solver: &Solver, ust: &mut Option<UstPoint>| {
        if mode == Mode::Ast || ust.is_some() {
            return;
        }
        if let Unipolarity::Unipolar(side) = solver.check_ust() {
            *ust = Some(UstPoint {
                assignments: solver.counters().assignments,
                trail_len: solver.trail().len(),
                active: solver.counters().active_total,
                side,
            });
        }
    };
    if options.ust_at_start {
        observe(&solver, &mut ust);
    }

    let verdict = 'search: loop {
        if mode == Mode::Ust {
            if let Some(point) = &ust {
                break Verdict::Sat(solver.model_with(point.side.completion_value()));
            }
        }
        if solver.counters().active_total == 0 {
            stats.n_a = Some(solver.counters().assignments);
            stats.trail_at_ast = Some(solver.trail().len());
            break Verdict::Sat(solver.model_with(false));
        }
        if solver.counters().assignments >= options.budget {
            break Verdict::Indeterminate;
        }
        let mut outcome = match solver.propagate_next() {
            Some(outcome) => outcome,
            None => {
                let lit = solver
                    .pick_branch()
                    .expect("a conflict-free active clause has an unassigned literal");
                solver.apply(lit)
            }
        };
        while outcome == Applied::Conflict {
            stats.conflicts += 1;
            if solver.counters().assignments >= options.budget {
                break 'search Verdict::Indeterminate;
            }
            outcome = match solver.backtrack() {
                Backtracked::Retried(o) => o,
                Backtracked::Exhausted => break 'search Verdict::Unsat,
            };
        }
        observe(&solver, &mut ust);
    };

    if let Some(point) = ust {
        stats.n_u = Some(point.assignments);
        stats.trail_at_ust = Some(point.trail_len);
        stats.active_at_ust = Some(point.active);
        stats.ust_side = Some(point.side);
    }
    stats.verdict = verdict;
    stats.assignments = solver.counters().assignments;
    if options.audit {
        stats.audit = Some(solver.audit_results());
    }
    stats
}
