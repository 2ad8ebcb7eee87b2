//! Batch benchmarking: run algorithms over generated instances or a
//! directory of instance files, emit one CSV row per (instance, algo),
//! and print a per-algorithm summary table. Failures (budget, invalid
//! input) are recorded in their row and the run continues.

use crate::report::{cost_decimal, ratio_parts};
use crate::{
    oracle_failure, parse_q, run_algo, run_oracle, usage, Algo, Failure, OnOff, SolveParams,
};
use clap::Args;
use flowsched_core::cost::{Cost, PNorm};
use flowsched_core::gen::{gen_random, GenSpec};
use flowsched_core::instance::{objective, read_instance, validate_schedule, Instance, Time};
use flowsched_core::qptas::DEFAULT_STATE_BUDGET;
use flowsched_core::Error as CoreError;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

pub(crate) const CSV_HEADER: &str =
    "instance,seed,algo,p,epsilon,objective,oracle,ratio,millis,cells";

#[derive(Args)]
pub(crate) struct BenchArgs {
    /// Directory of instance JSON files; overrides the generator
    #[arg(long)]
    dir: Option<PathBuf>,
    /// Number of generated instances
    #[arg(long, default_value_t = 20)]
    count: u64,
    /// Jobs per generated instance
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
    /// Machines per generated instance
    #[arg(long, default_value_t = 1)]
    machines: usize,
    /// Percent of matrix entries marked unprocessable
    #[arg(long = "inf-percent", default_value_t = 0)]
    inf_percent: u8,
    /// Seed of the first instance; instance i uses seed + i
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Comma-separated algorithms to run per instance
    #[arg(long, default_value = "pseudo")]
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
    /// Also run the oracle per instance and record ratios
    #[arg(long)]
    oracle: bool,
    /// Write CSV rows here; stdout when omitted
    #[arg(long)]
    csv: Option<PathBuf>,
    /// State cap for the quasi-polynomial solver
    #[arg(long = "state-budget")]
    state_budget: Option<u64>,
    /// Oracle grid refinement (slots per unit time, multi-machine)
    #[arg(long = "delta-den", default_value_t = 1)]
    delta_den: i64,
}

struct Row {
    instance: String,
    seed: String,
    algo: &'static str,
    objective: String,
    oracle: String,
    ratio: Option<f64>,
    millis: u128,
    cells: u64,
}

impl Row {
    fn csv(&self, p: &str, epsilon: &str) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.instance,
            self.seed,
            self.algo,
            p,
            epsilon,
            self.objective,
            self.oracle,
            self.ratio.map(|r| format!("{r:.6}")).unwrap_or_default(),
            self.millis,
            self.cells
        )
    }
}

fn error_class(e: &CoreError) -> &'static str {
    match e {
        CoreError::Parse(_) => "error:parse",
        CoreError::InvalidInstance(_) => "error:input",
        CoreError::Budget(_) => "error:budget",
        CoreError::InvalidSchedule(_) => "error:schedule",
        CoreError::Internal(_) => "error:internal",
    }
}

fn load_instances(a: &BenchArgs) -> Result<Vec<(String, String, Instance)>, Failure> {
    match &a.dir {
        Some(dir) => {
            let mut paths: Vec<PathBuf> = fs::read_dir(dir)
                .map_err(|e| usage(&format!("cannot read {}: {e}", dir.display())))?
                .filter_map(|entry| entry.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            paths.sort();
            let mut out = Vec::with_capacity(paths.len());
            for path in paths {
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                let text = fs::read_to_string(&path)
                    .map_err(|e| usage(&format!("cannot read {}: {e}", path.display())))?;
                out.push((name, String::new(), read_instance(&text)?));
            }
            Ok(out)
        }
        None => Ok((0..a.count)
            .map(|i| {
                let seed = a.seed + i;
                let spec = GenSpec {
                    n: a.n,
                    p_max: a.p_max,
                    r_max: a.r_max,
                    w_max: a.w_max,
                    machines: a.machines,
                    inf_percent: a.inf_percent,
                    seed,
                };
                (format!("gen-{seed}"), seed.to_string(), gen_random(&spec))
            })
            .collect()),
    }
}

pub(crate) fn cmd_bench(a: &BenchArgs) -> Result<i32, Failure> {
    let algos = Algo::parse_list(&a.algos)?;
    if algos.is_empty() {
        return Err(usage("no algorithms given"));
    }
    if algos.contains(&Algo::Edf) {
        return Err(usage("bench does not support edf; it needs per-job deadlines"));
    }
    let params = SolveParams {
        p: PNorm::parse(&a.p)?,
        epsilon: parse_q(&a.epsilon)?,
        migration: a.migration.is_on(),
        state_budget: a.state_budget.unwrap_or(DEFAULT_STATE_BUDGET),
        delta_den: a.delta_den,
    };
    let instances = load_instances(a)?;

    let mut rows: Vec<Row> = Vec::new();
    for (name, seed, instance) in &instances {
        let oracle: Option<Result<Cost, String>> = a.oracle.then(|| {
            run_oracle(instance, &params)
                .map(|(cost, _)| cost)
                .map_err(|e| {
                    let f = oracle_failure(e);
                    // Keep the CSV grid intact whatever the message.
                    format!("error({})", f.msg.replace(',', ";"))
                })
        });
        for &algo in &algos {
            let started = Instant::now();
            let outcome = run_algo(instance, algo, &params, None).and_then(|run| {
                validate_schedule(instance, &run.schedule)?;
                let obj = objective(instance, &run.schedule, params.p)?;
                Ok((obj, run.cells))
            });
            let millis = started.elapsed().as_millis();
            let row = match outcome {
                Ok((obj, cells)) => {
                    let (oracle_col, ratio) = match &oracle {
                        Some(Ok(orc)) => (
                            cost_decimal(orc),
                            ratio_parts(&obj, orc).map(|(_, dec)| dec),
                        ),
                        Some(Err(msg)) => (msg.clone(), None),
                        None => (String::new(), None),
                    };
                    Row {
                        instance: name.clone(),
                        seed: seed.clone(),
                        algo: algo.name(),
                        objective: cost_decimal(&obj),
                        oracle: oracle_col,
                        ratio,
                        millis,
                        cells,
                    }
                }
                Err(e) => Row {
                    instance: name.clone(),
                    seed: seed.clone(),
                    algo: algo.name(),
                    objective: error_class(&e).to_string(),
                    oracle: String::new(),
                    ratio: None,
                    millis,
                    cells: 0,
                },
            };
            rows.push(row);
        }
    }

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(&row.csv(&a.p, &a.epsilon));
        csv.push('\n');
    }
    match &a.csv {
        Some(path) => {
            fs::write(path, &csv)?;
            println!("csv written to {}", path.display());
        }
        None => print!("{csv}"),
    }

    println!();
    println!("| algo | runs | ok | max ratio | mean ratio |");
    println!("|------|------|----|-----------|------------|");
    for &algo in &algos {
        let mine: Vec<&Row> = rows.iter().filter(|r| r.algo == algo.name()).collect();
        let ok = mine.iter().filter(|r| !r.objective.starts_with("error")).count();
        let ratios: Vec<f64> = mine.iter().filter_map(|r| r.ratio).collect();
        let (max_s, mean_s) = if ratios.is_empty() {
            (String::from("-"), String::from("-"))
        } else {
            let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
            let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
            (format!("{max:.6}"), format!("{mean:.6}"))
        };
        println!("| {} | {} | {} | {} | {} |", algo.name(), mine.len(), ok, max_s, mean_s);
    }
    Ok(0)
}
