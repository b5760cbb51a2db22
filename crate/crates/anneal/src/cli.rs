//! The `anneal` command line: schedule construction, count estimation,
//! lower-bound witnesses, piecewise-linear curve exports, and schedule
//! verification. All inputs and outputs are JSON (schedules spell ∞ as
//! `"inf"`); tabular emissions are CSV.
//!
//! Randomness flows from a single `--seed`: run `i` of a multi-run command
//! uses `seed + i`, the schedule phase samples on the seed's own ChaCha
//! stream, the estimation phase on stream `1 << 60`, and parallel ratio
//! chunks on streams `(2 << 60) | (ratio << 24) | chunk`.
//!
//! Exit codes: 0 success, 2 usage, 3 assumption or instance violation,
//! 4 run failure (with transcript where one exists).

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::estimator::{
    amplify, end_to_end, faithful_total_budget, product_estimate, CountEstimate,
    ProductPlan,
};
use crate::models::{CountTarget, GibbsSystem};
use crate::partfn::{Beta, PartitionFunction, ReversibleReport, ScheduleReport};
use crate::samplers::{
    default_chain_steps, warm_start_driver, ChainConfig, ExactSampler, HamiltonianSampler,
    McmcSampler, StartMode,
};
use crate::sched_adaptive::{
    print_cooling_schedule, AdaptiveConfig, AdaptiveError, Mode, CHEBYSHEV_BOUND,
};
use crate::sched_nonadaptive::{
    augment_reversible, bezakova_schedule, lower_bound_greedy, uniform_schedule,
};
use crate::sched_theory::{
    check_lb_inequality, existence_schedule, greedy_schedule, pl_approx, ConvexCurve,
    LogisticCurve, TheoryError, ROOT_TOL,
};
use crate::schedule::CoolingSchedule;
use crate::zgen::binomial_partition_function;

const EXIT_OK: i32 = 0;
const EXIT_USAGE: i32 = 2;
const EXIT_ASSUMPTION: i32 = 3;
const EXIT_RUN: i32 = 4;

enum CliError {
    Usage(String),
    Assumption(String),
    Run(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Assumption(_) => EXIT_ASSUMPTION,
            CliError::Run(_) => EXIT_RUN,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Assumption(m) | CliError::Run(m) => m,
        }
    }
}

type CliResult = Result<(), CliError>;

#[derive(Parser)]
#[command(name = "anneal", version, about = "Cooling schedules and counting by annealed telescoping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Base seed for all randomness.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for sample fan-out.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Faithful mode uses the published constants; desk mode caps sample
    /// counts and certifies results against the exact oracle instead.
    #[arg(long, global = true, value_enum, default_value_t = CliMode::Desk)]
    mode: CliMode,
    /// Output file (defaults to stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum CliMode {
    Faithful,
    Desk,
}

impl From<CliMode> for Mode {
    fn from(m: CliMode) -> Mode {
        match m {
            CliMode::Faithful => Mode::Faithful,
            CliMode::Desk => Mode::Desk,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build a cooling schedule for an instance.
    Schedule(ScheduleArgs),
    /// Estimate a count (or partition value) end to end.
    Estimate(EstimateArgs),
    /// Lower-bound witnesses: the non-adaptive greedy sequence and the
    /// adaptive curvature instance.
    Lowerbound(LowerboundArgs),
    /// Piecewise-linear approximation of the benchmark curve, as CSV.
    Plapprox(PlapproxArgs),
    /// Re-check a schedule against the exact oracle.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleKind {
    Uniform,
    Bezakova,
    Greedy,
    Existence,
    Adaptive,
}

#[derive(Args)]
struct ScheduleArgs {
    /// Instance file (JSON).
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value_t = ScheduleKind::Adaptive)]
    kind: ScheduleKind,
    /// Chebyshev bound for greedy construction and verification
    /// (accepts a number, `e`, or `e2`).
    #[arg(long, value_parser = parse_bound)]
    b: Option<f64>,
    /// Failure probability budget of the adaptive run.
    #[arg(long, default_value_t = 0.1)]
    delta_prime: f64,
    /// Per-call sample count in desk mode.
    #[arg(long, default_value_t = 2000)]
    desk_samples: u64,
    /// Use the model's Markov chains instead of exact sampling.
    #[arg(long, default_value_t = false)]
    mcmc: bool,
    /// Chain transitions per draw (defaults to the model's mixing bound).
    #[arg(long)]
    chain_steps: Option<u64>,
    /// Chain start discipline.
    #[arg(long, value_enum, default_value_t = CliStart::Cold)]
    start: CliStart,
    /// Relaxation-time surrogate; switches warm starts to the primed
    /// ladder sampler.
    #[arg(long)]
    tau2: Option<u64>,
    /// Insert the reversibility prefix into every interval.
    #[arg(long, default_value_t = false)]
    reversible: bool,
    /// Re-check the schedule with the exact oracle before writing.
    #[arg(long, default_value_t = false)]
    verify: bool,
    /// Also write the β sequence as CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the run transcript (JSON lines, one oracle batch per line).
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliStart {
    Cold,
    Warm,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Use this schedule instead of generating one.
    #[arg(long)]
    schedule: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    eps: f64,
    /// Independent runs; the median is reported.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// Chebyshev constant of the sampling plan.
    #[arg(long, value_parser = parse_bound, default_value = "e2")]
    plan_b: f64,
    /// Cap per-ratio samples (demotes the guarantee to empirical).
    #[arg(long)]
    cap: Option<u64>,
    /// What to estimate: the model's natural count, the ground-level
    /// count, the total count, or Z at a finite β (e.g. `beta=1.0`).
    #[arg(long, value_parser = parse_target, default_value = "auto")]
    target: TargetArg,
    #[arg(long, default_value_t = 0.1)]
    delta_prime: f64,
    #[arg(long, default_value_t = 2000)]
    desk_samples: u64,
}

#[derive(Clone, Copy)]
enum TargetArg {
    Auto,
    Fixed(CountTarget),
}

#[derive(Args)]
struct LowerboundArgs {
    /// Degree of the witness instances.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Anchor for the non-adaptive witness.
    #[arg(long, default_value_t = 20.0)]
    ln_a: f64,
    #[arg(long, value_parser = parse_bound, default_value = "e2")]
    b: f64,
    /// Grid resolution of the curvature check.
    #[arg(long, default_value_t = 101)]
    grid: usize,
    #[arg(long, value_enum, default_value_t = WhichBound::Both)]
    which: WhichBound,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum WhichBound {
    Nonadaptive,
    Adaptive,
    Both,
}

#[derive(Args)]
struct PlapproxArgs {
    /// Exponent of the benchmark curve (1 + e^{-x})^n.
    #[arg(long, default_value_t = 20)]
    n: usize,
    /// Sample rows in the CSV output.
    #[arg(long, default_value_t = 400)]
    samples: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    schedule: PathBuf,
    #[arg(long, value_parser = parse_bound)]
    b: Option<f64>,
    /// Check both step directions.
    #[arg(long, default_value_t = false)]
    reversible: bool,
}

fn parse_bound(text: &str) -> Result<f64, String> {
    match text {
        "e" => Ok(std::f64::consts::E),
        "e2" => Ok(std::f64::consts::E * std::f64::consts::E),
        _ => text
            .parse::<f64>()
            .map_err(|e| format!("bad bound {text:?}: {e}")),
    }
}

fn parse_target(text: &str) -> Result<TargetArg, String> {
    match text {
        "auto" => Ok(TargetArg::Auto),
        "ground" => Ok(TargetArg::Fixed(CountTarget::GroundStates)),
        "total" => Ok(TargetArg::Fixed(CountTarget::TotalConfigurations)),
        _ => {
            let rest = text
                .strip_prefix("beta=")
                .ok_or_else(|| format!("bad target {text:?}; use auto|ground|total|beta=X"))?;
            let beta: f64 = rest.parse().map_err(|e| format!("bad target β: {e}"))?;
            if beta < 0.0 || !beta.is_finite() {
                return Err("target β must be finite and nonnegative".into());
            }
            Ok(TargetArg::Fixed(CountTarget::AtBeta(beta)))
        }
    }
}

/// Parses and runs; the process exit code is the return value.
pub fn run_from_os_args() -> i32 {
    run(std::env::args_os())
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // help and version are successful exits
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Schedule(args) => cmd_schedule(&cli, args),
        Command::Estimate(args) => cmd_estimate(&cli, args),
        Command::Lowerbound(args) => cmd_lowerbound(&cli, args),
        Command::Plapprox(args) => cmd_plapprox(&cli, args),
        Command::Verify(args) => cmd_verify(&cli, args),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn read_instance(path: &Path) -> Result<GibbsSystem, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    GibbsSystem::from_json(&text)
        .map_err(|e| CliError::Usage(format!("cannot parse {}: {e}", path.display())))
}

fn read_schedule(path: &Path) -> Result<CoolingSchedule, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("cannot parse {}: {e}", path.display())))
}

/// Explicit oracle for the instance, enumerating when needed.
fn exact_oracle(sys: &GibbsSystem) -> Result<PartitionFunction, CliError> {
    match sys {
        GibbsSystem::Explicit { log_coeffs } => PartitionFunction::new(log_coeffs.clone())
            .map_err(|e| CliError::Assumption(format!("invalid explicit instance: {e}"))),
        _ => sys
            .enumerate_coefficients(None)
            .map_err(|e| CliError::Assumption(format!("cannot enumerate instance: {e}"))),
    }
}

fn write_output(cli: &Cli, text: &str) -> CliResult {
    match &cli.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Run(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text)
        .map_err(|e| CliError::Run(format!("cannot write {}: {e}", path.display())))
}

fn kind_default_bound(kind: ScheduleKind) -> f64 {
    match kind {
        ScheduleKind::Uniform => std::f64::consts::E,
        ScheduleKind::Bezakova => 2.0 * std::f64::consts::E * std::f64::consts::E,
        ScheduleKind::Greedy | ScheduleKind::Existence => {
            std::f64::consts::E * std::f64::consts::E
        }
        ScheduleKind::Adaptive => CHEBYSHEV_BOUND,
    }
}

fn map_theory_error(e: TheoryError) -> CliError {
    match e {
        TheoryError::Assumption(a) => CliError::Assumption(a.to_string()),
        other => CliError::Run(other.to_string()),
    }
}

fn cmd_schedule(cli: &Cli, args: &ScheduleArgs) -> CliResult {
    let sys = read_instance(&args.instance)?;
    let n = sys.degree();
    let ln_a = sys.ln_a();
    let bound = args.b.unwrap_or_else(|| kind_default_bound(args.kind));

    let mut transcript_text: Option<String> = None;
    let schedule = match args.kind {
        ScheduleKind::Uniform => uniform_schedule(n, ln_a)
            .map_err(|e| CliError::Assumption(e.to_string()))?,
        ScheduleKind::Bezakova => bezakova_schedule(n, ln_a)
            .map_err(|e| CliError::Assumption(e.to_string()))?,
        ScheduleKind::Greedy => {
            let z = exact_oracle(&sys)?;
            greedy_schedule(&z, bound).map_err(map_theory_error)?
        }
        ScheduleKind::Existence => {
            let z = exact_oracle(&sys)?;
            existence_schedule(&z).map_err(map_theory_error)?
        }
        ScheduleKind::Adaptive => {
            let cfg = AdaptiveConfig {
                delta_prime: args.delta_prime,
                mode: cli.mode.into(),
                desk_samples: args.desk_samples,
            };
            let mut sampler: Box<dyn HamiltonianSampler> = if args.mcmc {
                match args.tau2 {
                    Some(tau2) => {
                        let ladder = bezakova_schedule(n.max(2), ln_a.max(1.0))
                            .map_err(|e| CliError::Assumption(e.to_string()))?;
                        let driver = warm_start_driver(&sys, &ladder, tau2, cli.seed)
                            .map_err(|e| CliError::Run(e.to_string()))?;
                        Box::new(driver)
                    }
                    None => {
                        let steps = args.chain_steps.unwrap_or_else(|| default_chain_steps(&sys));
                        let mode = match args.start {
                            CliStart::Cold => StartMode::Cold,
                            CliStart::Warm => StartMode::Warm,
                        };
                        let chain_cfg = ChainConfig::new(steps, cli.seed, mode)
                            .map_err(|e| CliError::Usage(e.to_string()))?;
                        let sampler = McmcSampler::new(sys.clone(), chain_cfg)
                            .map_err(|e| CliError::Usage(e.to_string()))?;
                        if let Some(w) = &sampler.warning {
                            eprintln!("warning: {w}");
                        }
                        Box::new(sampler)
                    }
                }
            } else {
                let z = exact_oracle(&sys)?;
                Box::new(ExactSampler::new(z, cli.seed))
            };
            let run = print_cooling_schedule(sampler.as_mut(), n, ln_a, &cfg, cli.seed)
                .map_err(|failure| {
                    if let Some(path) = &args.transcript {
                        let _ = write_file(path, &failure.transcript.batches_jsonl());
                    }
                    match failure.error {
                        AdaptiveError::Assumption(a) => CliError::Assumption(a.to_string()),
                        other => CliError::Run(other.to_string()),
                    }
                })?;
            if let Some(path) = &args.transcript {
                transcript_text = Some(run.transcript.batches_jsonl());
                let _ = path;
            }
            if let Some(text) = &transcript_text {
                write_file(args.transcript.as_ref().expect("guarded above"), text)?;
            }
            run.schedule
        }
    };

    let schedule = if args.reversible {
        augment_reversible(&schedule, n.max(1)).map_err(|e| CliError::Run(e.to_string()))?
    } else {
        schedule
    };

    if args.verify {
        let z = exact_oracle(&sys)?;
        let report = z.verify_schedule(&schedule, bound);
        eprintln!("{}", render_pair_table(&report));
        if !report.pass {
            return Err(CliError::Run(format!(
                "schedule failed verification at B = {bound}: worst log ratio {}",
                report.worst_log_ratio
            )));
        }
    }

    if let Some(path) = &args.csv {
        write_file(path, &schedule.to_csv())?;
    }
    let text = serde_json::to_string_pretty(&schedule).expect("schedule serializes");
    write_output(cli, &text)
}

fn render_pair_table(report: &ScheduleReport) -> String {
    let mut out = String::from("from,to,log_ratio,ok\r\n");
    for p in &report.pairs {
        out.push_str(&format!("{},{},{},{}\r\n", p.from, p.to, p.log_ratio, p.ok));
    }
    out.push_str(&format!(
        "# worst log ratio {} against bound {} (pass: {})",
        report.worst_log_ratio, report.log_bound, report.pass
    ));
    out
}

#[derive(Serialize)]
struct EstimateReport {
    log_estimate: Option<f64>,
    estimate: Option<f64>,
    eps: f64,
    runs: usize,
    confidence: String,
    total_samples: u64,
    faithful_budget: f64,
    per_ratio: Vec<crate::estimator::RatioEstimate>,
    per_run_log_estimates: Vec<Option<f64>>,
}

fn cmd_estimate(cli: &Cli, args: &EstimateArgs) -> CliResult {
    let sys = read_instance(&args.instance)?;
    let target = match args.target {
        TargetArg::Auto => sys.natural_target(),
        TargetArg::Fixed(t) => t,
    };
    let plan = ProductPlan {
        b: args.plan_b,
        eps: args.eps,
        per_ratio_cap: args.cap,
    };
    if args.runs == 0 {
        return Err(CliError::Usage("need at least one run".into()));
    }

    let mut estimates: Vec<CountEstimate> = Vec::with_capacity(args.runs);
    let mut last_schedule_len = 0;
    for i in 0..args.runs {
        let seed = cli.seed + i as u64;
        let est = match &args.schedule {
            Some(path) => {
                // fixed schedule: sample the telescope directly
                let schedule = read_schedule(path)?;
                last_schedule_len = schedule.num_steps();
                let z = exact_oracle(&sys)?;
                let mut sampler =
                    ExactSampler::new(z.clone(), crate::estimator::estimation_seed(seed));
                let base = product_estimate(&schedule, &mut sampler, &plan)
                    .map_err(|e| CliError::Run(e.to_string()))?;
                // assemble the requested quantity from the raw product
                let log_estimate = match target {
                    CountTarget::GroundStates => base.log_estimate.map(|lp| z.ln_a() + lp),
                    CountTarget::TotalConfigurations => base
                        .log_estimate
                        .map(|lp| z.log_z(Beta::Infinite) - lp),
                    CountTarget::AtBeta(_) => {
                        return Err(CliError::Usage(
                            "finite-β targets need a generated schedule; drop --schedule".into(),
                        ))
                    }
                };
                CountEstimate {
                    log_estimate,
                    ..base
                }
            }
            None => {
                let cfg = AdaptiveConfig {
                    delta_prime: args.delta_prime,
                    mode: cli.mode.into(),
                    desk_samples: args.desk_samples,
                };
                let run = end_to_end(&sys, target, &cfg, &plan, seed, cli.workers).map_err(|e| {
                    match e {
                        crate::estimator::EstimateError::Schedule(f) => {
                            if let AdaptiveError::Assumption(a) = &f.error {
                                CliError::Assumption(a.to_string())
                            } else {
                                CliError::Run(f.to_string())
                            }
                        }
                        other => CliError::Run(other.to_string()),
                    }
                })?;
                last_schedule_len = run.schedule.num_steps();
                run.estimate
            }
        };
        estimates.push(est);
    }

    let per_run: Vec<Option<f64>> = estimates.iter().map(|e| e.log_estimate).collect();
    let final_estimate = if args.runs == 1 {
        estimates.pop().expect("one run")
    } else {
        let merged = amplify(&estimates).map_err(|e| CliError::Run(e.to_string()))?;
        CountEstimate {
            per_ratio: estimates.pop().expect("runs >= 1").per_ratio,
            ..merged
        }
    };
    let report = EstimateReport {
        log_estimate: final_estimate.log_estimate,
        estimate: final_estimate.value(),
        eps: args.eps,
        runs: args.runs,
        confidence: format!("{:?}", final_estimate.confidence),
        total_samples: final_estimate.total_samples,
        faithful_budget: faithful_total_budget(sys.degree(), sys.ln_a(), args.eps),
        per_ratio: final_estimate.per_ratio,
        per_run_log_estimates: per_run,
    };
    let _ = last_schedule_len;
    write_output(cli, &serde_json::to_string_pretty(&report).expect("report serializes"))
}

fn cmd_lowerbound(cli: &Cli, args: &LowerboundArgs) -> CliResult {
    let mut report = serde_json::Map::new();
    if args.which != WhichBound::Adaptive {
        let (schedule, lb) = lower_bound_greedy(args.n, args.ln_a, args.b)
            .map_err(|e| CliError::Assumption(e.to_string()))?;
        report.insert(
            "nonadaptive".into(),
            json!({
                "n": args.n,
                "ln_a": args.ln_a,
                "b": args.b,
                "greedy_length": lb.greedy_length,
                "analytic_bound": lb.analytic_bound,
                "bound_holds": lb.bound_holds,
                "first_points": schedule.betas().iter().take(6).map(|b| b.to_string()).collect::<Vec<_>>(),
            }),
        );
    }
    if args.which != WhichBound::Nonadaptive {
        let z = binomial_partition_function(args.n);
        let schedule = greedy_schedule(&z, args.b).map_err(map_theory_error)?;
        let floor = (args.n as f64 / (20.0 * args.b.ln())).sqrt();
        let curvature = check_lb_inequality(args.n, args.grid);
        report.insert(
            "adaptive".into(),
            json!({
                "n": args.n,
                "b": args.b,
                "greedy_length": schedule.num_steps(),
                "length_floor": floor,
                "floor_holds": schedule.num_steps() as f64 >= floor,
                "curvature_min_slack": curvature.min_slack,
                "curvature_argmin": curvature.argmin,
            }),
        );
    }
    write_output(
        cli,
        &serde_json::to_string_pretty(&serde_json::Value::Object(report))
            .expect("report serializes"),
    )
}

fn cmd_plapprox(cli: &Cli, args: &PlapproxArgs) -> CliResult {
    let curve = LogisticCurve { n: args.n as f64 };
    // domain ends where the curve drops to 1
    let mut hi = 1.0;
    while curve.value(hi) > 1.0 {
        hi *= 2.0;
    }
    let gamma = {
        let (mut lo, mut hi) = (0.0, hi);
        while hi - lo > ROOT_TOL {
            let mid = 0.5 * (lo + hi);
            if curve.value(mid) >= 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let pl = pl_approx(&curve, gamma, ROOT_TOL).map_err(map_theory_error)?;
    let bound = 1.0
        + ((curve.value(0.0) - curve.value(gamma))
            * (curve.slope(0.0) / curve.slope(gamma)).ln())
        .sqrt();
    eprintln!(
        "pieces: {} (bound {:.2}), domain [0, {:.6}], breakpoints {:?}",
        pl.piece_count(),
        bound,
        gamma,
        pl.breakpoints
    );
    write_output(cli, &pl.to_csv(&curve, args.samples))
}

fn render_reversible_table(report: &ReversibleReport) -> String {
    let mut out = render_pair_table(&report.forward);
    out.push_str("\r\n# reverse direction\r\nfrom,to,log_ratio,ok\r\n");
    for p in &report.reverse_pairs {
        out.push_str(&format!("{},{},{},{}\r\n", p.from, p.to, p.log_ratio, p.ok));
    }
    out.push_str(&format!(
        "# worst reverse log ratio {} (pass: {})",
        report.worst_reverse_log_ratio, report.pass
    ));
    out
}

fn cmd_verify(cli: &Cli, args: &VerifyArgs) -> CliResult {
    let sys = read_instance(&args.instance)?;
    let schedule = read_schedule(&args.schedule)?;
    let z = exact_oracle(&sys)?;
    let bound = args.b.unwrap_or(CHEBYSHEV_BOUND);
    if args.reversible {
        let report = z.verify_reversible(&schedule, bound);
        write_output(cli, &render_reversible_table(&report))?;
        if !report.pass {
            return Err(CliError::Run(format!(
                "schedule failed reversible verification at B = {bound}"
            )));
        }
    } else {
        let report = z.verify_schedule(&schedule, bound);
        write_output(cli, &render_pair_table(&report))?;
        if !report.pass {
            return Err(CliError::Run(format!(
                "schedule failed verification at B = {bound}: worst log ratio {}",
                report.worst_log_ratio
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_instance(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
        let path = dir.path().join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(text.as_bytes()).unwrap();
        path
    }

    fn triangle_json() -> &'static str {
        r#"{"type":"colorings","k":3,"graph":{"n":3,"edges":[[0,1],[1,2],[2,0]]}}"#
    }

    #[test]
    fn schedule_then_verify_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let instance = write_instance(&dir, "tri.json", triangle_json());
        let out = dir.path().join("schedule.json");
        let code = run([
            "anneal",
            "schedule",
            "--instance",
            instance.to_str().unwrap(),
            "--kind",
            "adaptive",
            "--seed",
            "7",
            "--out",
            out.to_str().unwrap(),
            "--verify",
        ]);
        assert_eq!(code, EXIT_OK);
        let text = std::fs::read_to_string(&out).unwrap();
        let schedule: CoolingSchedule = serde_json::from_str(&text).unwrap();
        assert!(schedule.num_steps() >= 1);
        // written-then-read schedules are bit-identical
        let again = serde_json::to_string(&schedule).unwrap();
        let back: CoolingSchedule = serde_json::from_str(&again).unwrap();
        assert_eq!(schedule, back);

        let code = run([
            "anneal",
            "verify",
            "--instance",
            instance.to_str().unwrap(),
            "--schedule",
            out.to_str().unwrap(),
            "--out",
            dir.path().join("table.csv").to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK);
    }

    #[test]
    fn schedule_uniform_length() {
        let dir = tempfile::tempdir().unwrap();
        let instance = write_instance(&dir, "tri.json", triangle_json());
        let out = dir.path().join("u.json");
        let code = run([
            "anneal",
            "schedule",
            "--instance",
            instance.to_str().unwrap(),
            "--kind",
            "uniform",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK);
        let schedule: CoolingSchedule =
            serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        // ⌈n ln A⌉ + 2 points with n = 3, ln A = 3 ln 3
        let expected = (3.0f64 * 3.0 * 3.0f64.ln()).ceil() as usize + 2;
        assert_eq!(schedule.num_points(), expected);
    }

    #[test]
    fn estimate_reports_count_near_truth() {
        let dir = tempfile::tempdir().unwrap();
        let instance = write_instance(&dir, "tri.json", triangle_json());
        let out = dir.path().join("report.json");
        let code = run([
            "anneal",
            "estimate",
            "--instance",
            instance.to_str().unwrap(),
            "--eps",
            "0.2",
            "--runs",
            "3",
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK);
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        let estimate = report["estimate"].as_f64().unwrap();
        assert!((estimate - 6.0).abs() < 2.0, "estimate {estimate}");
        assert_eq!(report["runs"], 3);
        assert!(report["per_run_log_estimates"].as_array().unwrap().len() == 3);
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["anneal", "no-such-command"]), EXIT_USAGE);
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("missing.json");
        assert_eq!(
            run([
                "anneal",
                "schedule",
                "--instance",
                missing.to_str().unwrap()
            ]),
            EXIT_USAGE
        );
    }

    #[test]
    fn assumption_violations_exit_3() {
        let dir = tempfile::tempdir().unwrap();
        // k = 1 on an edge: no proper coloring, rejected when enumerated
        let bad = write_instance(
            &dir,
            "bad.json",
            r#"{"type":"colorings","k":1,"graph":{"n":2,"edges":[[0,1]]}}"#,
        );
        let code = run([
            "anneal",
            "schedule",
            "--instance",
            bad.to_str().unwrap(),
            "--kind",
            "greedy",
        ]);
        assert_eq!(code, EXIT_ASSUMPTION);

        // faithful mode refuses a tiny anchor
        let tiny = write_instance(
            &dir,
            "tiny.json",
            r#"{"type":"matchings","graph":{"n":3,"edges":[[0,1],[1,2]]}}"#,
        );
        let code = run([
            "anneal",
            "schedule",
            "--instance",
            tiny.to_str().unwrap(),
            "--kind",
            "adaptive",
            "--mode",
            "faithful",
        ]);
        assert_eq!(code, EXIT_ASSUMPTION);
    }

    #[test]
    fn lowerbound_and_plapprox_emit_reports() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("lb.json");
        let code = run([
            "anneal",
            "lowerbound",
            "--n",
            "100",
            "--ln-a",
            "20",
            "--b",
            "e2",
            "--which",
            "both",
            "--grid",
            "41",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK);
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(report["nonadaptive"]["bound_holds"], true);
        assert_eq!(report["adaptive"]["floor_holds"], true);

        let csv = dir.path().join("fig.csv");
        let code = run([
            "anneal",
            "plapprox",
            "--n",
            "20",
            "--samples",
            "50",
            "--out",
            csv.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK);
        let text = std::fs::read_to_string(&csv).unwrap();
        assert!(text.starts_with("x,f,g"));
        assert_eq!(text.lines().count(), 52);
    }

    #[test]
    fn verify_failure_exits_4() {
        let dir = tempfile::tempdir().unwrap();
        let instance = write_instance(&dir, "tri.json", triangle_json());
        // a two-point schedule has ratio Z(0)/Z(∞) = 27/6 = 4.5 > 2
        let s = write_instance(
            &dir,
            "s.json",
            r#"{"betas":[0.0,"inf"],"moves":["final"]}"#,
        );
        let code = run([
            "anneal",
            "verify",
            "--instance",
            instance.to_str().unwrap(),
            "--schedule",
            s.to_str().unwrap(),
            "--b",
            "2",
            "--out",
            dir.path().join("t.csv").to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_RUN);
    }
}
