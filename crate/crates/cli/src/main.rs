use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use smbp::audit::{run_audit, AuditConfig};
use smbp::experiment::{format_summary, run_experiment, summarize, write_csv, ExperimentConfig, TARGET_RISKS};
use smbp::monte_carlo::{estimate_violations, DEFAULT_SAMPLES};
use smbp::offline::DEFAULT_ORACLE_CAP;
use smbp::online::{pack, PackOptions};
use smbp::planner::{max_identical_jobs, two_class_frontier, JobClass};
use smbp::workload::{generate_workload, WorkloadSpec};
use smbp::{Algorithm, ConstraintSpec, Execution, RiskFamily, UsageKind, Variant};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "smbp", version, about = "Chance-constrained bin packing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an α sweep from a JSON config and write CSV rows.
    Run(RunArgs),
    /// Tabulate the two-class capacity frontier as CSV.
    Frontier(FrontierArgs),
    /// Audit packing guarantees on random instances against the exact optimum.
    Audit(AuditArgs),
    /// Pack one workload under one constraint and trace every machine.
    Single(SingleArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// CSV destination; defaults to the config's output_path, then stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides base_seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    algorithm: Option<Algorithm>,
    /// Force single-threaded execution.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct FrontierArgs {
    #[arg(long, default_value_t = 30.0)]
    capacity: f64,
    #[arg(long, default_value_t = 0.65)]
    mu1: f64,
    #[arg(long, default_value_t = 0.0)]
    b1: f64,
    #[arg(long, default_value_t = 0.65)]
    mu2: f64,
    #[arg(long, default_value_t = 0.49)]
    b2: f64,
    #[arg(long, default_value = "hoeffding")]
    variant: Variant,
    #[arg(long, default_value_t = 0.99)]
    alpha: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    instances: usize,
    #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
    max_jobs: usize,
    #[arg(long, default_value_t = 100_000)]
    lemma_sets: usize,
}

#[derive(Args)]
struct SingleArgs {
    #[arg(long, default_value = "gaussian")]
    variant: Variant,
    #[arg(long, default_value_t = 0.99)]
    alpha: f64,
    #[arg(long, default_value = "hoeffding")]
    family: RiskFamily,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, default_value_t = 72.0)]
    size: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "best-fit")]
    algorithm: Algorithm,
    /// Use two-point usage instead of truncated Gaussian.
    #[arg(long)]
    two_point: bool,
    #[arg(long, default_value_t = 1000)]
    jobs: usize,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(a) => run(a),
        Command::Frontier(a) => frontier(a),
        Command::Audit(a) => audit(a),
        Command::Single(a) => single(a),
    }
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn run(a: RunArgs) -> Result<ExitCode> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.base_seed = seed;
    }
    if let Some(alg) = a.algorithm {
        cfg.algorithm = alg;
    }
    if a.sequential {
        cfg.execution = Execution::Sequential;
    }
    let rows = run_experiment(&cfg)?;
    let dest = a.out.or_else(|| cfg.output_path.clone());
    write_csv(&rows, output(dest.as_ref())?)?;
    let table = format_summary(&summarize(&rows, &TARGET_RISKS)?);
    // Keep stdout pure CSV when the rows go there.
    if dest.is_some() {
        print!("{table}");
    } else {
        eprint!("{table}");
    }
    Ok(ExitCode::SUCCESS)
}

fn frontier(a: FrontierArgs) -> Result<ExitCode> {
    let spec = ConstraintSpec::new(a.variant, a.alpha, a.capacity).with_clip(false);
    let c1 = JobClass::new(a.mu1, a.b1);
    let c2 = JobClass::new(a.mu2, a.b2);
    let n2_max = max_identical_jobs(&c2, &spec)?;
    let grid: Vec<u64> = (0..=n2_max).collect();
    let points = two_class_frontier(&c1, &c2, &spec, &grid)?;
    let mut w = csv::Writer::from_writer(output(a.out.as_ref())?);
    w.write_record(["n2", "max_n1"])?;
    for p in points {
        let n1 = p.max_n1.map(|n| n.to_string()).unwrap_or_default();
        w.write_record([p.n2.to_string(), n1])?;
    }
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn audit(a: AuditArgs) -> Result<ExitCode> {
    if a.max_jobs > 20 {
        bail!("--max-jobs above 20 makes the exact oracle impractical");
    }
    let report = run_audit(&AuditConfig {
        instances: a.instances,
        max_jobs: a.max_jobs,
        lemma_sets: a.lemma_sets,
        seed: a.seed,
        execution: Execution::Parallel,
    })?;
    print!("{}", report.render());
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn single(a: SingleArgs) -> Result<ExitCode> {
    let kind = if a.two_point { UsageKind::TwoPoint } else { UsageKind::TruncatedGaussian };
    let spec = ConstraintSpec {
        variant: a.variant,
        alpha: if a.variant == Variant::NoOvercommit { 1.0 } else { a.alpha },
        p_exponent: a.p,
        capacity: a.size,
        family: a.family,
        clip: true,
    };
    spec.validate()?;
    let jobs = generate_workload(&WorkloadSpec {
        job_count: a.jobs,
        ..WorkloadSpec::production(kind, a.seed)
    })?;
    let opts = PackOptions::default();
    let assignment = pack(&jobs, &spec, a.algorithm, &opts)?;
    let baseline = pack(&jobs, &ConstraintSpec::no_overcommit(a.size), a.algorithm, &opts)?;
    let model = spec.model()?;
    let est = estimate_violations(&assignment, &jobs, &spec, a.samples, a.seed, Execution::Parallel)?;
    println!(
        "variant={} alpha={} D={:.6} size={} algorithm={} jobs={} seed={}",
        a.variant,
        spec.alpha,
        model.d,
        a.size,
        a.algorithm,
        jobs.len(),
        a.seed
    );
    println!("machine,jobs,sum_mean,sum_b,sum_upper,effective_load,violation_rate");
    for (m, rate) in assignment.machines.iter().zip(&est.per_machine_violation_rate) {
        println!(
            "{},{},{:.4},{:.4},{:.4},{:.4},{:.5}",
            m.id,
            m.jobs.len(),
            m.load.sum_mean,
            m.load.sum_b,
            m.load.sum_upper,
            model.effective_load(&m.load),
            rate
        );
    }
    let used = assignment.machine_count();
    let base = baseline.machine_count();
    println!(
        "machines={used} no_overcommit={base} savings={:.2}% violation_rate={:.5}",
        100.0 * (1.0 - used as f64 / base as f64),
        est.aggregate_rate
    );
    Ok(ExitCode::SUCCESS)
}
