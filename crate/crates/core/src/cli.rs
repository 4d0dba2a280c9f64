//! Command-line front end: `solve`, `analyze`, `generate` and `bench`.
//!
//! Exit codes: 0 success, 1 usage or input error, and for `solve` 10 SAT,
//! 20 UNSAT, 30 budget exhausted.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::analysis::{self, Counting};
use crate::bench::{self, GridSpec, TableFormat, DEFAULT_COUNT_PER_CELL};
use crate::cnf::{self, Formula};
use crate::gen::{self, ClauseCount, GenParams};
use crate::solver::{self, Mode, SolverOptions, DEFAULT_BUDGET};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "ust",
    version,
    about = "DPLL with unipolar-set termination and polarity skewness tools"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a DIMACS CNF file.
    Solve {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Ust)]
        mode: Mode,
        /// Maximum number of assignment applications.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        /// Branch only; never assign unit-clause literals eagerly.
        #[arg(long)]
        no_unit_propagation: bool,
        #[arg(long)]
        json: bool,
    },
    /// Report polarity skewness and hidden skewness of a DIMACS CNF file.
    Analyze {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Counting::Raw)]
        counting: Counting,
        /// Write the formula with the revealing inverter applied.
        #[arg(long, value_name = "OUT")]
        write_inverted: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Generate random skewed k-SAT instances.
    Generate {
        #[arg(long)]
        n: usize,
        /// Clauses-to-variables ratio.
        #[arg(long, conflicts_with = "m", required_unless_present = "m")]
        r: Option<f64>,
        /// Exact clause count.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// Probability that a literal is unnegated.
        #[arg(long)]
        p: f64,
        #[arg(long)]
        seed: u64,
        /// Number of instances; instance i uses seed + i.
        #[arg(long, default_value_t = 1)]
        count: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the (p, r) experiment grid in measure mode.
    Bench {
        /// Use the standard six-row grid (the only grid currently offered).
        #[arg(long)]
        table1: bool,
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Instances per (p, r) cell.
        #[arg(long, default_value_t = DEFAULT_COUNT_PER_CELL)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-instance assignment budget.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        /// Worker threads (defaults to the number of CPUs).
        #[arg(long)]
        workers: Option<usize>,
        /// Also test unipolarity before the first assignment (N_U may be 0).
        #[arg(long)]
        ust_at_start: bool,
        #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
        format: TableFormat,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write one CSV record per instance.
        #[arg(long, value_name = "LOG")]
        per_instance: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: cnf::ParseError,
    },
    #[error("{path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Generate(#[from] gen::GenError),
    #[error(transparent)]
    Bench(#[from] bench::BenchError),
    #[error(transparent)]
    Output(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Parses `args` (program name first) and runs the subcommand, writing
/// results to `out` and diagnostics to stderr. Returns the exit code.
pub fn run<I, T, W>(args: I, out: &mut W) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    W: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() {
                EXIT_ERROR
            } else {
                EXIT_OK
            };
            let _ = err.print();
            return code;
        }
    };
    log::info!("config: {:?}", cli.command);
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            EXIT_ERROR
        }
    }
}

fn read_formula(path: &Path) -> Result<Formula, CliError> {
    let file = File::open(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    cnf::parse_dimacs(io::BufReader::new(file)).map_err(|source| CliError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<File, CliError> {
    File::create(path).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn opt<T: std::fmt::Display>(value: Option<T>) -> String {
    value.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

fn execute<W: Write>(command: Command, out: &mut W) -> Result<i32, CliError> {
    match command {
        Command::Solve {
            file,
            mode,
            budget,
            no_unit_propagation,
            json,
        } => {
            let formula = read_formula(&file)?;
            let options = SolverOptions::new(mode)
                .with_budget(budget)
                .with_unit_propagation(!no_unit_propagation);
            let stats = solver::solve(&formula, &options);
            if json {
                serde_json::to_writer(&mut *out, &stats.record())?;
                writeln!(out)?;
            } else {
                writeln!(
                    out,
                    "c mode={mode} n_u={} n_a={} gain={} remainder_pct={} conflicts={} assignments={}",
                    opt(stats.n_u),
                    opt(stats.n_a),
                    opt(stats.gain().map(|g| format!("{g:.2}"))),
                    opt(stats.remainder_pct().map(|r| format!("{r:.1}"))),
                    stats.conflicts,
                    stats.assignments
                )?;
                let status = match &stats.verdict {
                    solver::Verdict::Sat(_) => "SATISFIABLE",
                    solver::Verdict::Unsat => "UNSATISFIABLE",
                    solver::Verdict::Indeterminate => "UNKNOWN",
                };
                writeln!(out, "s {status}")?;
                if let Some(model) = stats.verdict.model() {
                    let lits: Vec<String> = model.to_dimacs().iter().map(i64::to_string).collect();
                    if lits.is_empty() {
                        writeln!(out, "v 0")?;
                    } else {
                        writeln!(out, "v {} 0", lits.join(" "))?;
                    }
                }
            }
            Ok(stats.verdict.exit_code())
        }
        Command::Analyze {
            file,
            counting,
            write_inverted,
            json,
        } => {
            let formula = read_formula(&file)?;
            let report = analysis::skewness(&formula, counting);
            if json {
                serde_json::to_writer(&mut *out, &report.record())?;
                writeln!(out)?;
            } else {
                write_report(out, &file, &report)?;
            }
            if let Some(path) = write_inverted {
                let inverted = analysis::apply_inverter(&formula, &report.rho)
                    .expect("rho is drawn from the formula's variables");
                cnf::write_dimacs(&inverted, create(&path)?).map_err(|source| CliError::Write {
                    path: path.clone(),
                    source,
                })?;
                log::info!("wrote inverted formula to {}", path.display());
            }
            Ok(EXIT_OK)
        }
        Command::Generate {
            n,
            r,
            m,
            k,
            p,
            seed,
            count,
            out: dir,
        } => {
            let clauses = match (r, m) {
                (_, Some(m)) => ClauseCount::Exact(m),
                (Some(r), None) => ClauseCount::Ratio(r),
                (None, None) => unreachable!("clap requires --r or --m"),
            };
            fs::create_dir_all(&dir).map_err(|source| CliError::Write {
                path: dir.clone(),
                source,
            })?;
            for i in 0..count {
                let params = GenParams {
                    n,
                    clauses,
                    k,
                    p,
                    seed: seed.wrapping_add(i),
                };
                let formula = gen::generate(&params)?;
                let path = dir.join(params.file_name());
                cnf::write_dimacs_with_comments(&formula, &[params.to_string()], create(&path)?)
                    .map_err(|source| CliError::Write {
                        path: path.clone(),
                        source,
                    })?;
                writeln!(out, "{}", path.display())?;
            }
            Ok(EXIT_OK)
        }
        Command::Bench {
            table1: _,
            n,
            count,
            seed,
            budget,
            workers,
            ust_at_start,
            format,
            out: table_path,
            per_instance,
        } => {
            let mut spec = GridSpec::table1(n, count, seed);
            spec.budget = budget;
            spec.ust_at_start = ust_at_start;
            if let Some(w) = workers {
                spec.workers = w;
            }
            log::info!(
                "grid: n={} k={} count={} seed={} budget={} workers={} ust_at_start={} cells={}",
                spec.n,
                spec.k,
                spec.count_per_cell,
                spec.master_seed,
                spec.budget,
                spec.workers,
                spec.ust_at_start,
                spec.rows.iter().map(|r| r.ratios.len()).sum::<usize>()
            );
            let outcome = bench::run_grid(&spec)?;
            let table = bench::emit_table(&outcome.rows, format);
            match table_path {
                Some(path) => {
                    create(&path)?
                        .write_all(table.as_bytes())
                        .map_err(|source| CliError::Write { path, source })?;
                }
                None => out.write_all(table.as_bytes())?,
            }
            if let Some(path) = per_instance {
                bench::write_instance_log(&outcome.instances, create(&path)?)?;
            }
            Ok(EXIT_OK)
        }
    }
}

fn write_report<W: Write>(
    out: &mut W,
    file: &Path,
    report: &analysis::SkewnessReport,
) -> io::Result<()> {
    const SHOW_RHO: usize = 20;
    writeln!(out, "file={}", file.display())?;
    writeln!(
        out,
        "n={} m={} poslit={} neglit={} counting={:?}",
        report.num_vars, report.num_clauses, report.pos_lit, report.neg_lit, report.counting
    )?;
    if report.empty {
        writeln!(out, "empty=true (no literal occurrences)")?;
    }
    writeln!(out, "p={:.3} ({})", report.p_f64(), report.p)?;
    write!(out, "|rho_S|={}", report.rho.len())?;
    if report.rho.len() <= SHOW_RHO {
        let vars: Vec<String> = report.rho.iter().map(|v| v.index().to_string()).collect();
        write!(out, " rho_S={{{}}}", vars.join(","))?;
    }
    writeln!(out)?;
    writeln!(out, "hp={:.3} ({})", report.hp_f64(), report.hp)?;
    writeln!(out, "initially_unipolar={}", report.initially_unipolar)?;
    writeln!(out, "unipolar_after_rho={}", report.unipolar_after_rho)?;
    let name = file.file_name().map_or_else(
        || file.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    );
    writeln!(out, "{}", analysis::SkewnessReport::table_header())?;
    writeln!(out, "{}", report.table_row(&name))
}
