//! Command-line front end tying the solvers together: generate
//! instances, solve them, validate schedules, compare algorithms, and
//! benchmark over instance batches.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 resource budget
//! exceeded, 3 internal invariant violation.

mod bench;
mod report;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flowsched_core::cost::{PNorm, Q};
use flowsched_core::dp_poly::solve_poly;
use flowsched_core::dp_pseudo::solve_pseudo;
use flowsched_core::edf::edf_schedule;
use flowsched_core::gen::{gen_adversarial, gen_random, AdversarialKind, GenSpec};
use flowsched_core::instance::{
    objective, read_deadlines, read_instance, read_schedule, validate_schedule, write_instance,
    write_schedule, CostModel, DeadlineAssignment, Instance, ObjectiveKind, Schedule, Time,
};
use flowsched_core::lawler_moore::{lawler_moore, LmJob, LmProblem};
use flowsched_core::oracle::{oracle_multi, oracle_single};
use flowsched_core::qptas::{solve_qptas_with_budget, DEFAULT_STATE_BUDGET};
use flowsched_core::{cost::Cost, Error as CoreError};
use report::{cost_decimal, cost_exact, norm_decimal, q_str, RunReport};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "flowsched",
    version,
    about = "Preemptive flow-time scheduling: approximation solvers, exact oracles, and tooling"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate an instance file (random or a named adversarial family)
    Gen(GenArgs),
    /// Run a solver on an instance and report its objective
    Solve(SolveArgs),
    /// Schedule by earliest deadline first and report feasibility
    Edf(EdfArgs),
    /// Partition jobs into on-time and late for one shared deadline
    Lm(LmArgs),
    /// Validate a schedule file against an instance
    Validate(ValidateArgs),
    /// Run algorithms over an instance batch; emit CSV and a summary
    Bench(bench::BenchArgs),
    /// Run several algorithms on one instance and tabulate objectives
    Compare(CompareArgs),
}

/// Algorithms selectable via --algo.
#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub(crate) enum Algo {
    Edf,
    Pseudo,
    Poly,
    Qptas,
    Oracle,
}

impl Algo {
    pub(crate) fn name(self) -> &'static str {
        match self {
            Algo::Edf => "edf",
            Algo::Pseudo => "pseudo",
            Algo::Poly => "poly",
            Algo::Qptas => "qptas",
            Algo::Oracle => "oracle",
        }
    }

    pub(crate) fn parse_list(text: &str) -> Result<Vec<Algo>, Failure> {
        text.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                ValueEnum::from_str(s, true)
                    .map_err(|_| usage(&format!("unknown algorithm {s:?}")))
            })
            .collect()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub(crate) enum OnOff {
    On,
    Off,
}

impl OnOff {
    pub(crate) fn is_on(self) -> bool {
        matches!(self, OnOff::On)
    }
}

/// A command failure carrying its process exit code.
pub(crate) struct Failure {
    pub code: i32,
    pub msg: String,
}

pub(crate) fn usage(msg: &str) -> Failure {
    Failure { code: 1, msg: msg.to_string() }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Failure {
        let code = match &e {
            CoreError::Parse(_) | CoreError::InvalidInstance(_) => 1,
            CoreError::Budget(_) => 2,
            CoreError::InvalidSchedule(_) | CoreError::Internal(_) => 3,
        };
        Failure { code, msg: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure { code: 1, msg: e.to_string() }
    }
}

impl From<flowsched_core::instance::Violation> for Failure {
    fn from(v: flowsched_core::instance::Violation) -> Failure {
        CoreError::from(v).into()
    }
}

fn main() {
    let code = match std::panic::catch_unwind(run) {
        Ok(Ok(code)) => code,
        Ok(Err(f)) => {
            eprintln!("error: {}", f.msg);
            f.code
        }
        // The panic hook has already printed the message.
        Err(_) => 3,
    };
    std::process::exit(code);
}

fn run() -> Result<i32, Failure> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Keep exit code 1 for usage errors; clap defaults to 2,
            // which this tool reserves for budget exhaustion.
            let is_help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            e.print().ok();
            return Ok(if is_help { 0 } else { 1 });
        }
    };
    match cli.cmd {
        Cmd::Gen(a) => cmd_gen(&a),
        Cmd::Solve(a) => cmd_solve(&a),
        Cmd::Edf(a) => cmd_edf(&a),
        Cmd::Lm(a) => cmd_lm(&a),
        Cmd::Validate(a) => cmd_validate(&a),
        Cmd::Bench(a) => bench::cmd_bench(&a),
        Cmd::Compare(a) => cmd_compare(&a),
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| usage(&format!("cannot read {}: {e}", path.display())))
}

/// Parses "n", "n/d", or a plain decimal like "0.25" into an exact
/// rational.
pub(crate) fn parse_q(text: &str) -> Result<Q, Failure> {
    let bad = || usage(&format!("cannot parse {text:?} as a rational number"));
    let t = text.trim();
    if let Some((a, b)) = t.split_once('/') {
        let num: i64 = a.trim().parse().map_err(|_| bad())?;
        let den: i64 = b.trim().parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(bad());
        }
        return Ok(flowsched_core::cost::q(num, den));
    }
    if let Some((int_part, frac_part)) = t.split_once('.') {
        if frac_part.is_empty() || frac_part.len() > 12 || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let sign = if int_part.trim_start().starts_with('-') { -1 } else { 1 };
        let whole: i64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| bad())? };
        let frac: i64 = frac_part.parse().map_err(|_| bad())?;
        let scale = 10i64.pow(frac_part.len() as u32);
        return Ok(flowsched_core::cost::q(whole * scale + sign * frac, scale));
    }
    let whole: i64 = t.parse().map_err(|_| bad())?;
    Ok(flowsched_core::cost::q_int(whole))
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

#[derive(Args)]
struct GenArgs {
    /// Number of jobs
    #[arg(long, default_value_t = 5)]
    n: usize,
    /// Largest processing time
    #[arg(long = "pmax", default_value_t = 4)]
    p_max: Time,
    /// Largest release time
    #[arg(long = "rmax", default_value_t = 8)]
    r_max: Time,
    /// Largest weight
    #[arg(long = "wmax", default_value_t = 4)]
    w_max: i64,
    /// Machines; 2 or more adds an unrelated-machines matrix
    #[arg(long, default_value_t = 1)]
    machines: usize,
    /// Percent of matrix entries marked unprocessable
    #[arg(long = "inf-percent", default_value_t = 0)]
    inf_percent: u8,
    /// RNG seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Adversarial family (burst, geometric-weights,
    /// staircase-releases); uses only --n, ignores random bounds
    #[arg(long)]
    kind: Option<String>,
    /// Output file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_gen(a: &GenArgs) -> Result<i32, Failure> {
    let instance = match &a.kind {
        Some(kind) => {
            let kind: AdversarialKind = kind.parse()?;
            gen_adversarial(kind, a.n)
        }
        None => gen_random(&GenSpec {
            n: a.n,
            p_max: a.p_max,
            r_max: a.r_max,
            w_max: a.w_max,
            machines: a.machines,
            inf_percent: a.inf_percent,
            seed: a.seed,
        }),
    };
    let text = write_instance(&instance);
    match &a.out {
        Some(path) => {
            fs::write(path, text)?;
            println!("instance written to {}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

#[derive(Args)]
struct SolveArgs {
    /// Algorithm to run
    #[arg(long, value_enum)]
    algo: Algo,
    /// Instance file
    #[arg(long)]
    instance: PathBuf,
    /// Flow-time exponent as u or u/v with u, v <= 8
    #[arg(long, default_value = "1")]
    p: String,
    /// Accuracy parameter (rational or decimal)
    #[arg(long, default_value = "1/4")]
    epsilon: String,
    /// Deadline file; required for --algo edf
    #[arg(long)]
    deadlines: Option<PathBuf>,
    /// Whether jobs may resume on a different machine
    #[arg(long, value_enum, default_value = "on")]
    migration: OnOff,
    /// State cap for the quasi-polynomial solver
    #[arg(long = "state-budget")]
    state_budget: Option<u64>,
    /// Oracle grid refinement (slots per unit time, multi-machine)
    #[arg(long = "delta-den", default_value_t = 1)]
    delta_den: i64,
    /// Also run the exact oracle and report the ratio
    #[arg(long)]
    oracle: bool,
    /// Write the schedule here
    #[arg(long)]
    out: Option<PathBuf>,
}

pub(crate) struct SolveParams {
    pub p: PNorm,
    pub epsilon: Q,
    pub migration: bool,
    pub state_budget: u64,
    pub delta_den: i64,
}

pub(crate) struct AlgoRun {
    pub schedule: Schedule,
    pub cells: u64,
    /// Extra report lines specific to the algorithm.
    pub extra: Vec<String>,
}

/// Runs one algorithm on an instance. `deadlines` feeds the EDF
/// scheduler only.
pub(crate) fn run_algo(
    instance: &Instance,
    algo: Algo,
    params: &SolveParams,
    deadlines: Option<&DeadlineAssignment>,
) -> Result<AlgoRun, CoreError> {
    match algo {
        Algo::Edf => {
            let d = deadlines.ok_or_else(|| {
                CoreError::InvalidInstance("earliest-deadline-first needs a deadline file".into())
            })?;
            let res = edf_schedule(instance, d)?;
            let verdict = if res.met_all_deadlines { "yes" } else { "no" };
            Ok(AlgoRun {
                schedule: res.schedule,
                cells: 0,
                extra: vec![format!("deadlines met: {verdict}")],
            })
        }
        Algo::Pseudo => {
            if params.p != PNorm::one() {
                return Err(CoreError::InvalidInstance(
                    "the pseudo-polynomial solver supports p = 1 only".into(),
                ));
            }
            let res = solve_pseudo(instance)?;
            Ok(AlgoRun {
                schedule: res.schedule,
                cells: res.stats.cells as u64,
                extra: vec![format!("charged bound: {}", res.bound)],
            })
        }
        Algo::Poly => {
            let res = solve_poly(instance, params.p, &params.epsilon)?;
            Ok(AlgoRun {
                schedule: res.schedule,
                cells: res.stats.cells,
                extra: vec![
                    format!(
                        "root budget: {} units ({})",
                        res.budget_units,
                        q_str(&res.budget_value)
                    ),
                    format!("intervals: {}", res.stats.intervals),
                ],
            })
        }
        Algo::Qptas => {
            if instance.machine_count() > 3 {
                return Err(CoreError::InvalidInstance(
                    "the quasi-polynomial solver supports at most 3 machines".into(),
                ));
            }
            let model = CostModel::new(params.p, params.epsilon.clone());
            let res =
                solve_qptas_with_budget(instance, &model, params.migration, params.state_budget)?;
            Ok(AlgoRun {
                schedule: res.schedule,
                cells: res.stats.cells,
                extra: vec![format!(
                    "charged bound: {} ({})",
                    cost_exact(&res.bound),
                    cost_decimal(&res.bound)
                )],
            })
        }
        Algo::Oracle => {
            let (_, schedule) = run_oracle(instance, params)?;
            Ok(AlgoRun { schedule, cells: 0, extra: Vec::new() })
        }
    }
}

/// Exhaustive optimum: exact single-machine search, or the grid search
/// over delta-slot assignments for unrelated machines.
pub(crate) fn run_oracle(
    instance: &Instance,
    params: &SolveParams,
) -> Result<(Cost, Schedule), CoreError> {
    if instance.is_multi() {
        oracle_multi(instance, params.p, params.delta_den, params.migration)
    } else {
        oracle_single(instance, params.p)
    }
}

/// Oracle refusals already carry a user-facing message; surface it
/// verbatim with the resource-budget exit code.
pub(crate) fn oracle_failure(e: CoreError) -> Failure {
    match e {
        CoreError::Budget(detail) => Failure { code: 2, msg: detail },
        other => other.into(),
    }
}

fn cmd_solve(a: &SolveArgs) -> Result<i32, Failure> {
    let instance = read_instance(&read_file(&a.instance)?)?;
    let params = SolveParams {
        p: PNorm::parse(&a.p)?,
        epsilon: parse_q(&a.epsilon)?,
        migration: a.migration.is_on(),
        state_budget: a.state_budget.unwrap_or(DEFAULT_STATE_BUDGET),
        delta_den: a.delta_den,
    };
    let deadlines = match &a.deadlines {
        Some(path) => Some(read_deadlines(&read_file(path)?)?),
        None => None,
    };
    let started = Instant::now();
    let run = run_algo(&instance, a.algo, &params, deadlines.as_ref()).map_err(|e| {
        if a.algo == Algo::Oracle {
            oracle_failure(e)
        } else {
            e.into()
        }
    })?;
    // No command emits a schedule it has not validated.
    validate_schedule(&instance, &run.schedule)?;
    let obj = objective(&instance, &run.schedule, params.p)?;
    let oracle = if a.oracle {
        Some(run_oracle(&instance, &params).map_err(oracle_failure)?.0)
    } else {
        None
    };
    let elapsed = started.elapsed();
    let model = CostModel::new(params.p, params.epsilon.clone());
    let norm = (model.kind == ObjectiveKind::Norm)
        .then(|| (params.p, norm_decimal(&obj, params.p)));
    let report = RunReport {
        algo: a.algo.name(),
        jobs: instance.n(),
        machines: instance.machine_count(),
        objective: obj,
        norm,
        extra: run.extra,
        oracle,
        cells: run.cells,
    };
    print!("{report}");
    if let Some(path) = &a.out {
        fs::write(path, write_schedule(&run.schedule))?;
        println!("schedule written to {}", path.display());
    }
    eprintln!("time: {} ms", elapsed.as_millis());
    Ok(0)
}

// ---------------------------------------------------------------------------
// edf
// ---------------------------------------------------------------------------

#[derive(Args)]
struct EdfArgs {
    /// Instance file
    #[arg(long)]
    instance: PathBuf,
    /// Deadline file ({"d": [int or "inf", ...]})
    #[arg(long)]
    deadlines: PathBuf,
}

fn cmd_edf(a: &EdfArgs) -> Result<i32, Failure> {
    let instance = read_instance(&read_file(&a.instance)?)?;
    let deadlines = read_deadlines(&read_file(&a.deadlines)?)?;
    let res = edf_schedule(&instance, &deadlines)?;
    validate_schedule(&instance, &res.schedule)?;
    println!("{}", write_schedule(&res.schedule));
    if res.met_all_deadlines {
        println!("deadlines met: yes");
        Ok(0)
    } else {
        println!("deadlines met: no");
        if let Some(miss) = &res.first_violation {
            println!(
                "first miss: job {} deadline {} completion {}",
                miss.job, miss.deadline, miss.completion
            );
        }
        Ok(1)
    }
}

// ---------------------------------------------------------------------------
// lm
// ---------------------------------------------------------------------------

#[derive(Args)]
struct LmArgs {
    /// Instance file; weights become late penalties
    #[arg(long)]
    instance: PathBuf,
    /// Shared deadline for all jobs
    #[arg(long)]
    deadline: Time,
    /// Earliest time the machine may start
    #[arg(long, default_value_t = 0)]
    start: Time,
}

fn cmd_lm(a: &LmArgs) -> Result<i32, Failure> {
    let instance = read_instance(&read_file(&a.instance)?)?;
    let problem = LmProblem {
        jobs: instance
            .jobs()
            .iter()
            .map(|j| LmJob { p: j.p, r: j.r, cost: j.w as u64 })
            .collect(),
        deadline: a.deadline,
    };
    let sol = lawler_moore(&problem, a.start);
    println!("penalty: {}", sol.penalty);
    println!(
        "on-time: {}",
        sol.on_time.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
    );
    println!(
        "late: {}",
        sol.late.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
    );
    println!("segments:");
    for (from, to, job) in &sol.segments {
        println!("  [{from}, {to}) job {job}");
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

#[derive(Args)]
struct ValidateArgs {
    /// Instance file
    #[arg(long)]
    instance: PathBuf,
    /// Schedule file
    #[arg(long)]
    schedule: PathBuf,
    /// Also report the objective for this exponent
    #[arg(long)]
    p: Option<String>,
}

fn cmd_validate(a: &ValidateArgs) -> Result<i32, Failure> {
    let instance = read_instance(&read_file(&a.instance)?)?;
    let schedule = read_schedule(&read_file(&a.schedule)?)?;
    if let Err(e) = validate_schedule(&instance, &schedule) {
        // A user-supplied schedule failing validation is bad input,
        // not an internal invariant violation.
        return Err(usage(&format!("invalid schedule: {e}")));
    }
    println!("schedule valid");
    if let Some(p_text) = &a.p {
        let p = PNorm::parse(p_text)?;
        let obj = objective(&instance, &schedule, p)?;
        println!("objective: {} ({})", cost_exact(&obj), cost_decimal(&obj));
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

#[derive(Args)]
struct CompareArgs {
    /// Instance file
    #[arg(long)]
    instance: PathBuf,
    /// Comma-separated algorithms (edf excluded; it needs deadlines)
    #[arg(long, default_value = "pseudo,poly")]
    algos: String,
    /// Flow-time exponent as u or u/v
    #[arg(long, default_value = "1")]
    p: String,
    /// Accuracy parameter (rational or decimal)
    #[arg(long, default_value = "1/4")]
    epsilon: String,
    /// Whether jobs may resume on a different machine
    #[arg(long, value_enum, default_value = "on")]
    migration: OnOff,
    /// Also run the oracle and add a ratio column
    #[arg(long)]
    oracle: bool,
    /// State cap for the quasi-polynomial solver
    #[arg(long = "state-budget")]
    state_budget: Option<u64>,
    /// Oracle grid refinement (slots per unit time, multi-machine)
    #[arg(long = "delta-den", default_value_t = 1)]
    delta_den: i64,
}

fn cmd_compare(a: &CompareArgs) -> Result<i32, Failure> {
    let instance = read_instance(&read_file(&a.instance)?)?;
    let algos = Algo::parse_list(&a.algos)?;
    if algos.is_empty() {
        return Err(usage("no algorithms given"));
    }
    if algos.contains(&Algo::Edf) {
        return Err(usage("compare does not support edf; use the edf subcommand"));
    }
    let params = SolveParams {
        p: PNorm::parse(&a.p)?,
        epsilon: parse_q(&a.epsilon)?,
        migration: a.migration.is_on(),
        state_budget: a.state_budget.unwrap_or(DEFAULT_STATE_BUDGET),
        delta_den: a.delta_den,
    };
    let oracle = if a.oracle {
        let (cost, _) = run_oracle(&instance, &params).map_err(oracle_failure)?;
        println!("oracle: {} ({})", cost_exact(&cost), cost_decimal(&cost));
        Some(cost)
    } else {
        None
    };
    if oracle.is_some() {
        println!("| algo | objective | decimal | ratio | cells |");
        println!("|------|-----------|---------|-------|-------|");
    } else {
        println!("| algo | objective | decimal | cells |");
        println!("|------|-----------|---------|-------|");
    }
    for &algo in &algos {
        match run_algo(&instance, algo, &params, None) {
            Ok(run) => {
                validate_schedule(&instance, &run.schedule)?;
                let obj = objective(&instance, &run.schedule, params.p)?;
                let ratio = oracle.as_ref().map(|orc| {
                    report::ratio_parts(&obj, orc)
                        .map(|(_, dec)| format!("{dec:.6}"))
                        .unwrap_or_default()
                });
                match ratio {
                    Some(r) => println!(
                        "| {} | {} | {} | {} | {} |",
                        algo.name(),
                        cost_exact(&obj),
                        cost_decimal(&obj),
                        r,
                        run.cells
                    ),
                    None => println!(
                        "| {} | {} | {} | {} |",
                        algo.name(),
                        cost_exact(&obj),
                        cost_decimal(&obj),
                        run.cells
                    ),
                }
            }
            Err(e) => {
                let msg = format!("error: {e}").replace('|', "/");
                if oracle.is_some() {
                    println!("| {} | {msg} | - | - | - |", algo.name());
                } else {
                    println!("| {} | {msg} | - | - |", algo.name());
                }
            }
        }
    }
    Ok(0)
}
