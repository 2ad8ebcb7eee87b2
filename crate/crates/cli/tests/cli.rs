//! End-to-end tests driving the compiled binary the way a user would:
//! files in, reports and exit codes out.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowsched"))
        .args(args)
        .output()
        .expect("the binary should run")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout should be UTF-8")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr should be UTF-8")
}

/// Fresh scratch directory unique to one test.
fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("flowsched-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).expect("scratch dir should be creatable");
    dir
}

/// Two jobs on one machine: a long early job and a short late one.
const TWO_JOB_FIXTURE: &str = r#"{"jobs":[{"p":2,"r":0,"w":1},{"p":1,"r":1,"w":2}]}"#;

fn write_fixture(dir: &PathBuf, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).expect("fixture should be writable");
    path.to_string_lossy().into_owned()
}

/// Extracts the 6-decimal rendering in parentheses on the given
/// labelled report line.
fn decimal_on_line(report: &str, label: &str) -> f64 {
    let line = report
        .lines()
        .find(|l| l.starts_with(label))
        .unwrap_or_else(|| panic!("report should contain a {label:?} line:\n{report}"));
    let open = line.rfind('(').expect("labelled line should carry a decimal");
    let close = line.rfind(')').expect("labelled line should close the decimal");
    line[open + 1..close].parse().expect("decimal rendering should parse")
}

fn integer_on_line(report: &str, label: &str) -> u64 {
    let line = report
        .lines()
        .find(|l| l.starts_with(label))
        .unwrap_or_else(|| panic!("report should contain a {label:?} line:\n{report}"));
    line[label.len()..].trim().parse().expect("counter should parse")
}

#[test]
fn pseudo_report_stays_within_its_guarantee_on_the_two_job_fixture() {
    let dir = scratch("pseudo-two-job");
    let inst = write_fixture(&dir, "inst.json", TWO_JOB_FIXTURE);
    let out = run(&["solve", "--algo", "pseudo", "--instance", &inst, "--oracle"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let report = stdout(&out);
    for label in ["algo:", "objective:", "oracle:", "ratio:", "cells:"] {
        assert!(report.lines().any(|l| l.starts_with(label)), "missing {label}:\n{report}");
    }
    let ratio = decimal_on_line(&report, "ratio:");
    assert!(ratio <= 6.0 + 1e-9, "pseudo ratio {ratio} exceeds 6");
    assert!(ratio >= 1.0 - 1e-9, "ratio {ratio} below 1");
}

#[test]
fn poly_report_stays_within_its_guarantee_on_the_two_job_fixture() {
    let dir = scratch("poly-two-job");
    let inst = write_fixture(&dir, "inst.json", TWO_JOB_FIXTURE);
    let out = run(&[
        "solve", "--algo", "poly", "--p", "1", "--epsilon", "0.5", "--instance", &inst,
        "--oracle",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let report = stdout(&out);
    let ratio = decimal_on_line(&report, "ratio:");
    assert!(ratio <= 6.5 + 1e-9, "poly ratio {ratio} exceeds 6.5");
}

#[test]
fn oracle_refuses_an_oversized_instance_with_exit_code_two() {
    let dir = scratch("oracle-oversized");
    let jobs: Vec<String> =
        (0..21).map(|_| r#"{"p":1,"r":0,"w":1}"#.to_string()).collect();
    let inst = write_fixture(
        &dir,
        "big.json",
        &format!(r#"{{"jobs":[{}]}}"#, jobs.join(",")),
    );
    let out = run(&["solve", "--algo", "oracle", "--instance", &inst]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).contains("instance too large for oracle"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn qptas_refuses_more_than_three_machines() {
    let dir = scratch("qptas-machines");
    let inst = write_fixture(
        &dir,
        "wide.json",
        r#"{"jobs":[{"p":1,"r":0,"w":1}],"machines":[[1],[1],[1],[1]]}"#,
    );
    let out = run(&["solve", "--algo", "qptas", "--instance", &inst]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("at most 3 machines"), "stderr: {}", stderr(&out));
}

#[test]
fn unknown_flags_exit_with_code_one() {
    let out = run(&["solve", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    let help = run(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
}

#[test]
fn gen_writes_identical_bytes_for_a_seed() {
    let args = ["gen", "--n", "6", "--pmax", "4", "--seed", "7"];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout, "same seed must reproduce the instance");
    let other = run(&["gen", "--n", "6", "--pmax", "4", "--seed", "8"]);
    assert_ne!(first.stdout, other.stdout, "different seeds should differ");
}

#[test]
fn gen_adversarial_families_have_their_documented_shapes() {
    let burst = stdout(&run(&["gen", "--n", "3", "--kind", "burst"]));
    for p in ["\"p\": 1", "\"p\": 2", "\"p\": 4"] {
        assert!(burst.contains(p), "burst should double processing times:\n{burst}");
    }
    let stairs = stdout(&run(&["gen", "--n", "3", "--kind", "staircase-releases"]));
    for r in ["\"r\": 0", "\"r\": 1", "\"r\": 2"] {
        assert!(stairs.contains(r), "staircase should step releases:\n{stairs}");
    }
    let geo = stdout(&run(&["gen", "--n", "3", "--kind", "geometric-weights"]));
    for w in ["\"w\": 1", "\"w\": 2", "\"w\": 4"] {
        assert!(geo.contains(w), "geometric should double weights:\n{geo}");
    }
    let unknown = run(&["gen", "--n", "3", "--kind", "nonsense"]);
    assert_eq!(unknown.status.code(), Some(1));
}

#[test]
fn bench_on_an_empty_directory_emits_a_header_only_csv() {
    let dir = scratch("bench-empty");
    let empty = dir.join("instances");
    fs::create_dir_all(&empty).unwrap();
    let csv = dir.join("out.csv");
    let out = run(&[
        "bench", "--dir", &empty.to_string_lossy(), "--csv", &csv.to_string_lossy(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let written = fs::read_to_string(&csv).expect("csv should exist");
    assert_eq!(
        written,
        "instance,seed,algo,p,epsilon,objective,oracle,ratio,millis,cells\n"
    );
}

#[test]
fn bench_emits_one_csv_row_per_instance_and_algorithm() {
    let dir = scratch("bench-rows");
    let csv = dir.join("out.csv");
    let out = run(&[
        "bench", "--count", "3", "--n", "4", "--pmax", "3", "--rmax", "3", "--seed", "2",
        "--algos", "pseudo,poly", "--oracle", "--csv", &csv.to_string_lossy(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let written = fs::read_to_string(&csv).unwrap();
    let mut lines = written.lines();
    assert_eq!(
        lines.next(),
        Some("instance,seed,algo,p,epsilon,objective,oracle,ratio,millis,cells")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6, "3 instances x 2 algorithms:\n{written}");
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 10, "row should have 10 fields: {row}");
        let ratio: f64 = fields[7].parse().expect("ratio field should be numeric");
        assert!(ratio >= 1.0 - 1e-9, "ratio below 1 in {row}");
    }
    let table = stdout(&out);
    assert!(table.contains("| pseudo |"), "markdown summary missing pseudo:\n{table}");
    assert!(table.contains("| poly |"), "markdown summary missing poly:\n{table}");
}

#[test]
fn bench_records_a_failure_row_and_continues() {
    let dir = scratch("bench-partial");
    let inst_dir = dir.join("instances");
    fs::create_dir_all(&inst_dir).unwrap();
    // 21 unit jobs exceed the oracle work budget; the tiny instance
    // stays solvable.
    let jobs: Vec<String> =
        (0..21).map(|_| r#"{"p":1,"r":0,"w":1}"#.to_string()).collect();
    fs::write(
        inst_dir.join("a-big.json"),
        format!(r#"{{"jobs":[{}]}}"#, jobs.join(",")),
    )
    .unwrap();
    fs::write(inst_dir.join("b-small.json"), TWO_JOB_FIXTURE).unwrap();
    let csv = dir.join("out.csv");
    let out = run(&[
        "bench", "--dir", &inst_dir.to_string_lossy(), "--algos", "pseudo", "--oracle",
        "--csv", &csv.to_string_lossy(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let written = fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = written.lines().skip(1).collect();
    assert_eq!(rows.len(), 2, "both instances should appear:\n{written}");
    assert!(rows[0].starts_with("a-big,"), "rows keep directory order:\n{written}");
    let big: Vec<&str> = rows[0].split(',').collect();
    assert_eq!(big.len(), 10, "failure rows keep the CSV grid: {}", rows[0]);
    assert!(
        big[6].starts_with("error("),
        "oracle column records the refusal: {}",
        rows[0]
    );
    assert_eq!(big[7], "", "no ratio when the oracle refused: {}", rows[0]);
    let small: Vec<&str> = rows[1].split(',').collect();
    assert!(!small[7].is_empty(), "solvable instance should carry a ratio: {}", rows[1]);
}

/// Cell growth for the charged-bound solver on a family with doubling
/// horizon: the fitted exponent of cells against the horizon must stay
/// at most 2.2 (quadratic growth with slack).
#[test]
fn pseudo_cell_counts_grow_at_most_quadratically_with_the_horizon() {
    let dir = scratch("pseudo-fit");
    let mut points: Vec<(f64, f64)> = Vec::new();
    for scale in [1i64, 2, 4, 8, 16] {
        let jobs: Vec<String> = (0..4)
            .map(|_| format!(r#"{{"p":{scale},"r":0,"w":1}}"#))
            .collect();
        let inst = write_fixture(
            &dir,
            &format!("s{scale}.json"),
            &format!(r#"{{"jobs":[{}]}}"#, jobs.join(",")),
        );
        let out = run(&["solve", "--algo", "pseudo", "--instance", &inst]);
        assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
        let cells = integer_on_line(&stdout(&out), "cells:");
        let horizon = 4 * scale; // releases at 0; total work 4*scale
        points.push(((horizon as f64).ln(), (cells as f64).ln()));
    }
    let n = points.len() as f64;
    let (sx, sy): (f64, f64) = points.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    assert!(slope <= 2.2, "fitted cell-growth exponent {slope:.3} exceeds 2.2");
}

#[test]
fn edf_reports_the_first_miss_and_exits_nonzero() {
    let dir = scratch("edf-miss");
    let inst =
        write_fixture(&dir, "inst.json", r#"{"jobs":[{"p":2,"r":0,"w":1},{"p":2,"r":0,"w":1}]}"#);
    let deadlines = write_fixture(&dir, "dl.json", r#"{"d":[2,2]}"#);
    let out = run(&["edf", "--instance", &inst, "--deadlines", &deadlines]);
    assert_eq!(out.status.code(), Some(1));
    let report = stdout(&out);
    assert!(report.contains("deadlines met: no"), "{report}");
    assert!(report.contains("first miss:"), "{report}");

    let feasible = write_fixture(&dir, "dl-ok.json", r#"{"d":[2,4]}"#);
    let ok = run(&["edf", "--instance", &inst, "--deadlines", &feasible]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("deadlines met: yes"));
}

#[test]
fn validate_accepts_solver_output_and_rejects_an_overlap() {
    let dir = scratch("validate");
    let inst = write_fixture(&dir, "inst.json", TWO_JOB_FIXTURE);
    let sched_path = dir.join("sched.json");
    let solved = run(&[
        "solve", "--algo", "pseudo", "--instance", &inst, "--out",
        &sched_path.to_string_lossy(),
    ]);
    assert_eq!(solved.status.code(), Some(0));
    let ok = run(&[
        "validate", "--instance", &inst, "--schedule", &sched_path.to_string_lossy(),
        "--p", "1",
    ]);
    assert_eq!(ok.status.code(), Some(0), "stderr: {}", stderr(&ok));
    let report = stdout(&ok);
    assert!(report.contains("schedule valid"), "{report}");
    assert!(report.contains("objective:"), "{report}");

    let overlap = write_fixture(
        &dir,
        "bad.json",
        r#"{"slots":[{"m":0,"a":"0","b":"2","j":0},{"m":0,"a":"1","b":"2","j":1}]}"#,
    );
    let bad = run(&["validate", "--instance", &inst, "--schedule", &overlap]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("invalid schedule"), "stderr: {}", stderr(&bad));
}

#[test]
fn compare_lists_each_algorithm_with_exact_objectives() {
    let dir = scratch("compare");
    let inst = write_fixture(&dir, "inst.json", TWO_JOB_FIXTURE);
    let out = run(&[
        "compare", "--instance", &inst, "--algos", "pseudo,poly", "--oracle",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let table = stdout(&out);
    assert!(table.contains("| pseudo |"), "{table}");
    assert!(table.contains("| poly |"), "{table}");
    assert!(table.contains("oracle:"), "{table}");
}

#[test]
fn solve_writes_a_schedule_that_validates_in_a_second_process() {
    let dir = scratch("solve-roundtrip");
    let inst = write_fixture(&dir, "inst.json", TWO_JOB_FIXTURE);
    let sched = dir.join("sched.json");
    for algo in ["edf", "pseudo", "poly", "qptas", "oracle"] {
        let mut args = vec![
            "solve", "--algo", algo, "--instance", &inst, "--out",
        ];
        let sched_str = sched.to_string_lossy().into_owned();
        args.push(&sched_str);
        let dl_path;
        let dl_str;
        if algo == "edf" {
            dl_path = write_fixture(&dir, "dl.json", r#"{"d":[3,2]}"#);
            dl_str = dl_path;
            args.push("--deadlines");
            args.push(&dl_str);
        }
        let out = run(&args);
        assert_eq!(out.status.code(), Some(0), "{algo} failed: {}", stderr(&out));
        let check = run(&[
            "validate", "--instance", &inst, "--schedule", &sched.to_string_lossy(),
        ]);
        assert_eq!(check.status.code(), Some(0), "{algo} schedule rejected");
        fs::remove_file(&sched).unwrap();
    }
}
