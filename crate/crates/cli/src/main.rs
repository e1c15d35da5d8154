use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use stprbh::bnb::{BranchingRule, SolveParams, SolveStatus};
use stprbh::instance::{parse_stp_with_warnings, write_stp, Instance};
use stprbh::model::{export_lp, export_mps};
use stprbh::pop::{build_pop, ModelVariant};
use stprbh::reduce::reduce_all;
use stprbh::solve::{solve_instance, strength, BenchRow, CSV_HEADER};
use stprbh::verify::{parse_solution, verify_arcs, write_solution};

/// Exit code for a solve stopped by a limit.
const EXIT_LIMIT: u8 = 2;
/// Exit code for a solution file that fails verification.
const EXIT_REJECTED: u8 = 3;

#[derive(Parser)]
#[command(name = "stprbh", version, about = "Budget- and hop-constrained prize-collecting Steiner trees")]
struct Cli {
    /// Append a one-line summary of the run to this file.
    #[arg(long, global = true)]
    log: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct SolverArgs {
    /// Wall-clock limit in seconds.
    #[arg(long = "time-limit")]
    time_limit: Option<f64>,
    #[arg(long = "mip-gap", default_value_t = 1e-5)]
    mip_gap: f64,
    #[arg(long = "node-limit")]
    node_limit: Option<u64>,
    #[arg(long, value_enum, default_value_t = Branching::MostFractional)]
    branching: Branching,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relaxations solved concurrently; 1 keeps the search single-threaded.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

impl SolverArgs {
    fn params(&self) -> SolveParams {
        SolveParams {
            time_limit_seconds: self.time_limit,
            mip_gap: self.mip_gap,
            node_limit: self.node_limit,
            branching_rule: match self.branching {
                Branching::MostFractional => BranchingRule::MostFractional,
                Branching::PseudoCostLite => BranchingRule::PseudoCostLite,
            },
            seed: self.seed,
            threads: self.threads.max(1),
        }
    }
}

#[derive(ValueEnum, Clone, Copy)]
enum Branching {
    MostFractional,
    PseudoCostLite,
}

#[derive(ValueEnum, Clone, Copy, PartialEq)]
enum Format {
    Lp,
    Mps,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance and print the report as JSON.
    Solve {
        path: PathBuf,
        #[arg(long, default_value = "pop2", value_parser = parse_variant)]
        variant: ModelVariant,
        #[command(flatten)]
        solver: SolverArgs,
        /// Also write the model in this format (requires --out).
        #[arg(long, value_enum, requires = "out")]
        export: Option<Format>,
        /// Destination of the exported model.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the best tree as a solution file.
        #[arg(long = "write-solution")]
        write_solution: Option<PathBuf>,
    },
    /// Apply the edge-removal test and hop trimming; print the log as JSON.
    Reduce {
        path: PathBuf,
        /// Where to write the reduced instance.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the integer program for an instance in LP or MPS format.
    Export {
        path: PathBuf,
        #[arg(long, value_enum)]
        format: Format,
        #[arg(long, default_value = "pop2", value_parser = parse_variant)]
        variant: ModelVariant,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a solution file against an instance.
    Verify { instance: PathBuf, solution: PathBuf },
    /// Relaxation strength of the basic model: LP value over the optimum.
    Strength {
        path: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Solve every .stp file of a directory and print one CSV row per variant.
    Bench {
        dir: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "pop1,pop1r,pop2,pop2r", value_parser = parse_variant)]
        variants: Vec<ModelVariant>,
        #[command(flatten)]
        solver: SolverArgs,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_variant(s: &str) -> Result<ModelVariant, String> {
    ModelVariant::from_name(s).ok_or_else(|| format!("unknown variant {s:?} (expected basic, pop1, pop1r, pop2 or pop2r)"))
}

fn load(path: &Path) -> Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (instance, warnings) = parse_stp_with_warnings(&text).with_context(|| format!("parsing {}", path.display()))?;
    for w in warnings {
        eprintln!("warning: {}:{}: {}", path.display(), w.line, w.message);
    }
    Ok(instance)
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn append_log(log: Option<&Path>, line: &str) -> Result<()> {
    if let Some(path) = log {
        let mut f = fs::OpenOptions::new().create(true).append(true).open(path).with_context(|| format!("opening {}", path.display()))?;
        writeln!(f, "{line}")?;
    }
    Ok(())
}

fn exit_for(status: SolveStatus) -> ExitCode {
    match status {
        SolveStatus::Optimal | SolveStatus::Infeasible => ExitCode::SUCCESS,
        SolveStatus::Feasible | SolveStatus::Limit => ExitCode::from(EXIT_LIMIT),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let log = cli.log.as_deref();
    match cli.command {
        Command::Solve { path, variant, solver, export, out, write_solution: solution_path } => {
            let instance = load(&path)?;
            if let (Some(format), Some(out)) = (export, out.as_ref()) {
                write_model(&instance, variant, format, out)?;
            }
            let outcome = solve_instance(&instance, variant, &solver.params())?;
            if let Some(p) = solution_path {
                fs::write(&p, write_solution(&outcome.tree)).with_context(|| format!("writing {}", p.display()))?;
            }
            print_json(&outcome)?;
            let r = &outcome.report;
            append_log(
                log,
                &format!("solve {} variant={} status={:?} lb={} ub={} nodes={} time_s={:.3}", path.display(), outcome.variant, r.status, r.lb, r.ub, r.nodes, r.wall_time),
            )?;
            Ok(exit_for(r.status))
        }
        Command::Reduce { path, out } => {
            let instance = load(&path)?;
            let (reduced, reduction) = reduce_all(&instance);
            fs::write(&out, write_stp(&reduced)).with_context(|| format!("writing {}", out.display()))?;
            print_json(&reduction)?;
            append_log(
                log,
                &format!("reduce {} edges {} -> {} nodes {} -> {}", path.display(), reduction.original_sizes.edges, reduction.reduced_sizes.edges, reduction.original_sizes.nodes, reduction.reduced_sizes.nodes),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Export { path, format, variant, out } => {
            let instance = load(&path)?;
            write_model(&instance, variant, format, &out)?;
            append_log(log, &format!("export {} -> {}", path.display(), out.display()))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { instance, solution } => {
            let inst = load(&instance)?;
            let text = fs::read_to_string(&solution).with_context(|| format!("reading {}", solution.display()))?;
            let parsed = parse_solution(&text).with_context(|| format!("parsing {}", solution.display()))?;
            let report = verify_arcs(&inst, &parsed.arcs, parsed.objective);
            print_json(&report)?;
            append_log(log, &format!("verify {} feasible={} violations={}", solution.display(), report.feasible, report.violations.len()))?;
            Ok(if report.feasible { ExitCode::SUCCESS } else { ExitCode::from(EXIT_REJECTED) })
        }
        Command::Strength { path, solver } => {
            let instance = load(&path)?;
            let report = strength(&instance, &solver.params())?;
            print_json(&report)?;
            Ok(exit_for(report.opt_status))
        }
        Command::Bench { dir, variants, solver, out } => {
            let mut files: Vec<PathBuf> = fs::read_dir(&dir)
                .with_context(|| format!("listing {}", dir.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("stp")))
                .collect();
            files.sort();
            let params = solver.params();
            let mut csv = String::from(CSV_HEADER);
            csv.push('\n');
            let mut worst = ExitCode::SUCCESS;
            for file in &files {
                let instance = load(file)?;
                for &variant in &variants {
                    let outcome = solve_instance(&instance, variant, &params)?;
                    if !matches!(outcome.report.status, SolveStatus::Optimal | SolveStatus::Infeasible) {
                        worst = ExitCode::from(EXIT_LIMIT);
                    }
                    csv.push_str(&BenchRow::from_outcome(&outcome).to_csv());
                    csv.push('\n');
                }
            }
            match out {
                Some(p) => fs::write(&p, &csv).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{csv}"),
            }
            append_log(log, &format!("bench {} instances={} variants={}", dir.display(), files.len(), variants.len()))?;
            Ok(worst)
        }
    }
}

fn write_model(instance: &Instance, variant: ModelVariant, format: Format, out: &Path) -> Result<()> {
    let work = if variant.apply_eurc { reduce_all(instance).0 } else { instance.clone() };
    if work.edge_count() == 0 {
        bail!("instance has no edges left to model");
    }
    let (model, _) = build_pop(&work, variant)?;
    let text = match format {
        Format::Lp => export_lp(&model),
        Format::Mps => export_mps(&model),
    };
    fs::write(out, text).with_context(|| format!("writing {}", out.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version are not errors; everything else exits like one
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
