use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kktprecond::bench::{
    emit_csv, gen_maxcut_like, gen_random, load_trace, read_records, replay, save_trace, summarize, trace_instance,
    write_records, Grouping, Metric, RandomParams, ReplayConfig, SolverKind,
};
use kktprecond::cones::ConeSpec;
use kktprecond::ipm::IPMConfig;
use kktprecond::kkt::{SubproblemData, TraceMode};
use kktprecond::precond::DeterministicConfig;

#[derive(Parser)]
#[command(name = "bench", version, about = "Generate bundle subproblems, trace their Newton systems and compare KKT solvers")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated subproblem instance as JSON.
    #[command(subcommand)]
    Gen(GenKind),
    /// Run the interior point method on an instance and store every Newton system.
    Trace(TraceArgs),
    /// Solve the stored Newton systems with each solver and write one CSV row per solve.
    Replay(ReplayArgs),
    /// Group replay results and write quartile statistics.
    Summarize(SummarizeArgs),
}

#[derive(Subcommand)]
enum GenKind {
    /// Max-cut-like semidefinite cutting model on a random graph.
    Maxcut(MaxcutArgs),
    /// Dense Gaussian instance with optional side constraints and boxes.
    Random(RandomArgs),
}

#[derive(Args)]
struct MaxcutArgs {
    #[arg(long, default_value_t = 100)]
    nodes: usize,
    #[arg(long, default_value_t = 0.3)]
    density: f64,
    /// Order of the semidefinite model block.
    #[arg(long, default_value_t = 10)]
    order: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RandomArgs {
    #[arg(long, default_value_t = 50)]
    m: usize,
    /// Number of nonnegative cone coordinates.
    #[arg(long, default_value_t = 2)]
    nonneg: usize,
    /// Comma separated orders of the PSD blocks.
    #[arg(long, value_delimiter = ',', default_value = "4")]
    psd: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    ineq: usize,
    #[arg(long, default_value_t = 0)]
    eq: usize,
    #[arg(long, default_value_t = 0.0)]
    box_fraction: f64,
    /// Use `<1, x> <= tau` instead of `<1, x> = tau`.
    #[arg(long)]
    upper_bound: bool,
    /// Add a two column low-rank part to the quadratic term.
    #[arg(long)]
    with_vh: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Stop after the first Newton system with barrier value at or below this.
    #[arg(long)]
    mu_min: Option<f64>,
    #[arg(long, default_value_t = 0.2)]
    mu_reduction: f64,
    #[arg(long, default_value_t = 0.95)]
    step_fraction: f64,
    #[arg(long, default_value_t = 200)]
    max_newton: usize,
    /// Identifier written into the records; defaults to the instance file stem.
    #[arg(long)]
    id: Option<String>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Trace directory; repeat to replay a suite.
    #[arg(long, required = true)]
    trace: Vec<PathBuf>,
    #[arg(long, default_value = "DS,IT,RP,DP")]
    solvers: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Lanczos steps for the condition estimate; 0 means min(N, 100).
    #[arg(long, default_value_t = 0)]
    cond_iters: usize,
    /// Skip the condition estimate.
    #[arg(long)]
    no_cond: bool,
    /// MINRES iteration cap; defaults to 5 N.
    #[arg(long)]
    maxit: Option<usize>,
    /// Threshold factor of the deterministic column selection.
    #[arg(long, default_value_t = DeterministicConfig::default().rho_factor)]
    rho_factor: f64,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// `mu` or `bundle`.
    #[arg(long, default_value = "mu")]
    group: Grouping,
    /// matvecs, wall_seconds, cond_estimate, true_residual, precond_columns or dy_deviation.
    #[arg(long, default_value = "matvecs")]
    metric: Metric,
    #[arg(long)]
    out: PathBuf,
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into())
}

fn run(cli: Cli) -> kktprecond::Result<()> {
    match cli.cmd {
        Command::Gen(GenKind::Maxcut(a)) => {
            let data = gen_maxcut_like(a.nodes, a.density, a.order, a.seed)?;
            data.save(&a.out)?;
            eprintln!("wrote {} (m = {}, cone dimension {})", a.out.display(), data.m, data.cone_dim());
        }
        Command::Gen(GenKind::Random(a)) => {
            let params = RandomParams {
                m: a.m,
                spec: ConeSpec::new(a.nonneg, a.psd),
                n_ineq: a.ineq,
                n_eq: a.eq,
                box_fraction: a.box_fraction,
                trace_mode: if a.upper_bound {
                    TraceMode::UpperBound
                } else {
                    TraceMode::Equality
                },
                with_vh: a.with_vh,
            };
            let data = gen_random(&params, a.seed)?;
            data.save(&a.out)?;
            eprintln!("wrote {} (m = {}, cone dimension {})", a.out.display(), data.m, data.cone_dim());
        }
        Command::Trace(a) => {
            let data = SubproblemData::load(&a.instance)?;
            let cfg = IPMConfig {
                mu_reduction: a.mu_reduction,
                step_fraction: a.step_fraction,
                mu_min: a.mu_min,
                max_newton: a.max_newton,
            };
            cfg.validate()?;
            let id = a.id.unwrap_or_else(|| stem(&a.instance));
            let trace = trace_instance(&id, data, &cfg)?;
            save_trace(&trace, &cfg, &a.out)?;
            let last = trace.snapshots.last().map_or(f64::NAN, |s| s.mu);
            eprintln!(
                "wrote {} Newton systems to {} (final mu {last:.3e})",
                trace.snapshots.len(),
                a.out.display()
            );
        }
        Command::Replay(a) => {
            let cfg = ReplayConfig {
                solvers: SolverKind::parse_list(&a.solvers)?,
                seed: a.seed,
                cond_iters: if a.no_cond { None } else { Some(a.cond_iters) },
                deterministic: DeterministicConfig {
                    rho_factor: a.rho_factor,
                    ..DeterministicConfig::default()
                },
                maxit: a.maxit,
            };
            let mut records = Vec::new();
            for dir in &a.trace {
                let trace = load_trace(dir)?;
                records.extend(replay(&trace, &cfg));
            }
            write_records(&a.out, &records)?;
            let failed = records.iter().filter(|r| !r.error.is_empty()).count();
            eprintln!("wrote {} records to {} ({failed} with errors)", records.len(), a.out.display());
        }
        Command::Summarize(a) => {
            let records = read_records(&a.input)?;
            let rows = summarize(&records, a.group, a.metric)?;
            emit_csv(&a.out, &rows, a.metric)?;
            for r in rows.iter().filter(|r| r.count > 0) {
                println!(
                    "{:<14} {:<3} n={:<5} median {}",
                    r.group,
                    r.solver,
                    r.count,
                    r.median.map_or("-".into(), |v| format!("{v:.4e}"))
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
