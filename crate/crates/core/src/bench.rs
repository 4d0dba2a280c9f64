//! Experiment grid over `(p, r)` cells: generate, solve in measure mode,
//! aggregate gain and remainder.
//!
//! By default unipolarity is tested only after each assignment, so N_U is at
//! least 1 and initially unipolar instances contribute a finite gain. Set
//! [`GridSpec::ust_at_start`] to also test before the first assignment;
//! instances unipolar from the start then have N_U = 0 and are left out of
//! the gain means.

use std::io;

use rayon::prelude::*;
use thiserror::Error;

use crate::analysis;
use crate::gen::{self, GenParams};
use crate::solver::{self, Mode, SolverOptions, DEFAULT_BUDGET};

/// One row of the grid: a polarity probability and its clause ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub p: f64,
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub n: usize,
    pub k: usize,
    pub count_per_cell: usize,
    pub rows: Vec<GridRow>,
    pub master_seed: u64,
    pub budget: u64,
    /// Worker threads; results do not depend on this.
    pub workers: usize,
    pub ust_at_start: bool,
}

/// Ratios per polarity probability, each row ending at its satisfiability
/// threshold.
pub const TABLE1: [(f64, [f64; 10]); 6] = [
    (
        0.5,
        [2.00, 2.25, 2.50, 2.75, 3.00, 3.25, 3.50, 3.75, 4.00, 4.26],
    ),
    (
        0.4,
        [2.00, 2.30, 2.60, 2.90, 3.20, 3.50, 3.80, 4.10, 4.40, 4.70],
    ),
    (
        0.3,
        [2.00, 2.50, 3.00, 3.50, 4.00, 4.50, 5.00, 5.50, 6.00, 6.40],
    ),
    (
        0.2,
        [2.00, 3.00, 4.00, 5.00, 6.00, 7.00, 8.00, 9.00, 10.00, 11.5],
    ),
    (
        0.1,
        [2.00, 3.00, 5.00, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 41.0],
    ),
    (
        0.05,
        [
            2.00, 10.0, 30.0, 50.0, 70.0, 90.0, 110.0, 130.0, 150.0, 165.0,
        ],
    ),
];

pub const DEFAULT_COUNT_PER_CELL: usize = 200;

impl GridSpec {
    pub fn table1(n: usize, count_per_cell: usize, master_seed: u64) -> GridSpec {
        GridSpec {
            n,
            k: 3,
            count_per_cell,
            rows: TABLE1
                .iter()
                .map(|(p, rs)| GridRow {
                    p: *p,
                    ratios: rs.to_vec(),
                })
                .collect(),
            master_seed,
            budget: DEFAULT_BUDGET,
            workers: rayon::current_num_threads(),
            ust_at_start: false,
        }
    }

    fn jobs(&self) -> Vec<Job> {
        let mut jobs = Vec::new();
        for (pi, row) in self.rows.iter().enumerate() {
            for (ri, &r) in row.ratios.iter().enumerate() {
                for instance in 0..self.count_per_cell {
                    jobs.push(Job {
                        p_index: pi,
                        r_index: ri,
                        p: row.p,
                        r,
                        instance,
                        seed: gen::derive_instance_seed(
                            self.master_seed,
                            pi as u64,
                            ri as u64,
                            instance as u64,
                        ),
                    });
                }
            }
        }
        jobs
    }
}

struct Job {
    p_index: usize,
    r_index: usize,
    p: f64,
    r: f64,
    instance: usize,
    seed: u64,
}

/// Outcome of one generated instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRecord {
    pub p: f64,
    pub r: f64,
    pub p_index: usize,
    pub r_index: usize,
    pub instance: usize,
    pub seed: u64,
    pub verdict: &'static str,
    pub initially_unipolar: bool,
    pub n_u: Option<u64>,
    pub n_a: Option<u64>,
    pub remainder_pct: Option<f64>,
    /// Trail lengths at the two stopping points.
    pub trail_at_ust: Option<usize>,
    pub trail_at_ast: Option<usize>,
    pub conflicts: u64,
    pub assignments: u64,
}

/// Aggregates for one `(p, r)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub p: f64,
    pub r: f64,
    pub n: usize,
    pub count: usize,
    pub seed: u64,
    /// Sum of N_A over sum of N_U, over satisfiable instances with N_U >= 1.
    pub mean_gain: Option<f64>,
    /// Arithmetic mean of per-instance N_A / N_U over the same instances.
    pub mean_ratio_gain: Option<f64>,
    /// Mean remainder over all satisfiable instances.
    pub mean_remainder_pct: Option<f64>,
    pub sum_n_u: u64,
    pub sum_n_a: u64,
    pub sat: usize,
    pub unsat: usize,
    pub indeterminate: usize,
    /// Instances whose generated formula was already unipolar.
    pub initially_unipolar: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub rows: Vec<BenchRow>,
    pub instances: Vec<InstanceRecord>,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("instance count per cell must be at least 1")]
    NoInstances,
    #[error(transparent)]
    Generate(#[from] gen::GenError),
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn run_instance(spec: &GridSpec, job: &Job) -> Result<InstanceRecord, gen::GenError> {
    let params = GenParams {
        k: spec.k,
        ..GenParams::new(spec.n, job.r, job.p, job.seed)
    };
    let formula = gen::generate(&params)?;
    let options = SolverOptions::new(Mode::Measure)
        .with_budget(spec.budget)
        .with_ust_at_start(spec.ust_at_start);
    let stats = solver::solve(&formula, &options);
    Ok(InstanceRecord {
        p: job.p,
        r: job.r,
        p_index: job.p_index,
        r_index: job.r_index,
        instance: job.instance,
        seed: job.seed,
        verdict: stats.verdict.label(),
        initially_unipolar: analysis::unipolarity(&formula).is_unipolar(),
        n_u: stats.n_u,
        n_a: stats.n_a,
        remainder_pct: stats.remainder_pct(),
        trail_at_ust: stats.trail_at_ust,
        trail_at_ast: stats.trail_at_ast,
        conflicts: stats.conflicts,
        assignments: stats.assignments,
    })
}

/// Runs every cell of the grid. Rows come back in grid order and are
/// identical for any worker count.
pub fn run_grid(spec: &GridSpec) -> Result<GridOutcome, BenchError> {
    if spec.count_per_cell == 0 {
        return Err(BenchError::NoInstances);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers.max(1))
        .build()?;
    let jobs = spec.jobs();
    let instances = pool.install(|| {
        jobs.par_iter()
            .map(|job| run_instance(spec, job))
            .collect::<Result<Vec<_>, _>>()
    })?;

    let rows = instances
        .chunks(spec.count_per_cell)
        .map(|cell| aggregate(spec, cell))
        .collect();
    Ok(GridOutcome { rows, instances })
}

fn empty_row(spec: &GridSpec, p: f64, r: f64) -> BenchRow {
    BenchRow {
        p,
        r,
        n: spec.n,
        count: spec.count_per_cell,
        seed: spec.master_seed,
        mean_gain: None,
        mean_ratio_gain: None,
        mean_remainder_pct: None,
        sum_n_u: 0,
        sum_n_a: 0,
        sat: 0,
        unsat: 0,
        indeterminate: 0,
        initially_unipolar: 0,
    }
}

fn aggregate(spec: &GridSpec, cell: &[InstanceRecord]) -> BenchRow {
    let mut row = empty_row(spec, cell[0].p, cell[0].r);
    let mut remainder_sum = 0.0;
    let mut remainder_count = 0usize;
    let mut ratio_sum = 0.0;
    let mut gain_count = 0usize;
    for rec in cell {
        if rec.initially_unipolar {
            row.initially_unipolar += 1;
        }
        match rec.verdict {
            "SAT" => row.sat += 1,
            "UNSAT" => {
                row.unsat += 1;
                continue;
            }
            _ => {
                row.indeterminate += 1;
                continue;
            }
        }
        if let Some(pct) = rec.remainder_pct {
            remainder_sum += pct;
            remainder_count += 1;
        }
        match (rec.n_u, rec.n_a) {
            (Some(u), Some(a)) if u > 0 => {
                row.sum_n_u += u;
                row.sum_n_a += a;
                ratio_sum += a as f64 / u as f64;
                gain_count += 1;
            }
            _ => {}
        }
    }
    if gain_count > 0 {
        row.mean_gain = Some(row.sum_n_a as f64 / row.sum_n_u as f64);
        row.mean_ratio_gain = Some(ratio_sum / gain_count as f64);
    }
    if remainder_count > 0 {
        row.mean_remainder_pct = Some(remainder_sum / remainder_count as f64);
    }
    row
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum TableFormat {
    #[default]
    Csv,
    Markdown,
}

pub const CSV_HEADER: [&str; 11] = [
    "p",
    "r",
    "mean_gain",
    "mean_remainder_pct",
    "sat",
    "unsat",
    "indet",
    "init_unipolar",
    "count",
    "n",
    "seed",
];

fn fmt_opt(value: Option<f64>, decimals: usize) -> String {
    value.map_or_else(|| "NA".to_string(), |v| format!("{v:.decimals$}"))
}

pub fn emit_table(rows: &[BenchRow], format: TableFormat) -> String {
    match format {
        TableFormat::Csv => emit_csv(rows),
        TableFormat::Markdown => emit_markdown(rows),
    }
}

fn emit_csv(rows: &[BenchRow]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(CSV_HEADER).expect("in-memory write");
    for row in rows {
        writer
            .write_record([
                row.p.to_string(),
                format!("{:.2}", row.r),
                fmt_opt(row.mean_gain, 2),
                fmt_opt(row.mean_remainder_pct, 0),
                row.sat.to_string(),
                row.unsat.to_string(),
                row.indeterminate.to_string(),
                row.initially_unipolar.to_string(),
                row.count.to_string(),
                row.n.to_string(),
                row.seed.to_string(),
            ])
            .expect("in-memory write");
    }
    let bytes = writer.into_inner().expect("in-memory flush");
    String::from_utf8(bytes).expect("CSV output is UTF-8")
}

/// One table per `p`, with `G`, `R%` and mean-of-ratios sub-rows.
fn emit_markdown(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    let mut start = 0;
    while start < rows.len() {
        let p = rows[start].p;
        let end = rows[start..]
            .iter()
            .position(|r| r.p != p)
            .map_or(rows.len(), |off| start + off);
        let block = &rows[start..end];
        let cells =
            |f: &dyn Fn(&BenchRow) -> String| block.iter().map(f).collect::<Vec<_>>().join(" | ");
        if start > 0 {
            out.push('\n');
        }
        out.push_str(&format!(
            "| p | r | {} |\n",
            cells(&|r| format!("{:.2}", r.r))
        ));
        out.push_str(&format!("|---|---|{}\n", "---|".repeat(block.len())));
        out.push_str(&format!(
            "| {p} | G | {} |\n",
            cells(&|r| fmt_opt(r.mean_gain, 2))
        ));
        out.push_str(&format!(
            "| | R% | {} |\n",
            cells(&|r| fmt_opt(r.mean_remainder_pct, 0))
        ));
        out.push_str(&format!(
            "| | G (mean of ratios) | {} |\n",
            cells(&|r| fmt_opt(r.mean_ratio_gain, 2))
        ));
        start = end;
    }
    out
}

/// Per-instance audit log as CSV.
pub fn write_instance_log<W: io::Write>(
    records: &[InstanceRecord],
    out: W,
) -> Result<(), BenchError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record([
        "p",
        "r",
        "instance",
        "seed",
        "verdict",
        "n_u",
        "n_a",
        "remainder_pct",
        "trail_at_ust",
        "trail_at_ast",
        "conflicts",
        "assignments",
    ])?;
    let opt = |v: Option<u64>| v.map_or_else(String::new, |x| x.to_string());
    for rec in records {
        writer.write_record([
            rec.p.to_string(),
            format!("{:.2}", rec.r),
            rec.instance.to_string(),
            rec.seed.to_string(),
            rec.verdict.to_string(),
            opt(rec.n_u),
            opt(rec.n_a),
            rec.remainder_pct
                .map_or_else(String::new, |v| format!("{v:.3}")),
            opt(rec.trail_at_ust.map(|t| t as u64)),
            opt(rec.trail_at_ast.map(|t| t as u64)),
            rec.conflicts.to_string(),
            rec.assignments.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
