//! Core data model: jobs, instances, deadline assignments, schedules,
//! schedule validation, and exact objective evaluation, together with
//! the on-disk JSON formats.

use crate::cost::{q_int, Cost, PNorm, Q};
use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Integer time unit; all single-machine times are exact integers.
pub type Time = i64;

/// 0-based job index; job ids always equal their position in the
/// instance's job list.
pub type JobId = usize;

/// A job with processing time, release time, and weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Job {
    pub id: JobId,
    /// Processing time, >= 1.
    pub p: Time,
    /// Release time, >= 0.
    pub r: Time,
    /// Weight, >= 1.
    pub w: i64,
}

/// A scheduling instance: jobs sorted by release time (ties by id),
/// plus an optional per-machine processing-time matrix for the
/// unrelated-machines setting (`None` entries mean the machine cannot
/// process the job).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    jobs: Vec<Job>,
    machines: Option<Vec<Vec<Option<Time>>>>,
}

impl Instance {
    /// Builds and validates an instance. Jobs must already be sorted
    /// by non-decreasing release time; ids are assigned by position.
    pub fn new(
        jobs: Vec<(Time, Time, i64)>,
        machines: Option<Vec<Vec<Option<Time>>>>,
    ) -> crate::Result<Instance> {
        if jobs.is_empty() {
            return Err(crate::Error::InvalidInstance("no jobs".into()));
        }
        let jobs: Vec<Job> = jobs
            .into_iter()
            .enumerate()
            .map(|(id, (p, r, w))| Job { id, p, r, w })
            .collect();
        for j in &jobs {
            if j.p < 1 {
                return Err(crate::Error::InvalidInstance(format!(
                    "job {}: processing time {} < 1",
                    j.id, j.p
                )));
            }
            if j.r < 0 {
                return Err(crate::Error::InvalidInstance(format!(
                    "job {}: negative release time {}",
                    j.id, j.r
                )));
            }
            if j.w < 1 {
                return Err(crate::Error::InvalidInstance(format!(
                    "job {}: weight {} < 1",
                    j.id, j.w
                )));
            }
        }
        for pair in jobs.windows(2) {
            if pair[0].r > pair[1].r {
                return Err(crate::Error::InvalidInstance(format!(
                    "jobs not sorted by release time at index {}",
                    pair[1].id
                )));
            }
        }
        if let Some(mat) = &machines {
            if mat.is_empty() {
                return Err(crate::Error::InvalidInstance(
                    "machine matrix has no rows".into(),
                ));
            }
            for (i, row) in mat.iter().enumerate() {
                if row.len() != jobs.len() {
                    return Err(crate::Error::InvalidInstance(format!(
                        "machine {} row has {} entries, expected {}",
                        i,
                        row.len(),
                        jobs.len()
                    )));
                }
                for (j, e) in row.iter().enumerate() {
                    if let Some(p) = e {
                        if *p < 1 {
                            return Err(crate::Error::InvalidInstance(format!(
                                "machine {i} job {j}: processing time {p} < 1"
                            )));
                        }
                    }
                }
            }
            for j in 0..jobs.len() {
                if mat.iter().all(|row| row[j].is_none()) {
                    return Err(crate::Error::InvalidInstance(format!(
                        "job {j} has no machine that can process it"
                    )));
                }
            }
        }
        Ok(Instance { jobs, machines })
    }

    pub fn jobs(&self) -> &[Job] {
        &self.jobs
    }

    pub fn n(&self) -> usize {
        self.jobs.len()
    }

    /// Number of machines: matrix rows, or 1 without a matrix.
    pub fn machine_count(&self) -> usize {
        self.machines.as_ref().map_or(1, |m| m.len())
    }

    pub fn is_multi(&self) -> bool {
        self.machines.is_some()
    }

    /// Processing time of job `j` on machine `i`; `None` if the
    /// machine cannot run the job. Without a matrix, machine 0 runs
    /// every job at its plain processing time.
    pub fn p_on(&self, i: usize, j: JobId) -> Option<Time> {
        match &self.machines {
            Some(mat) => mat[i][j],
            None => (i == 0).then_some(self.jobs[j].p),
        }
    }

    pub fn max_release(&self) -> Time {
        self.jobs.iter().map(|j| j.r).max().unwrap_or(0)
    }

    pub fn total_work(&self) -> Time {
        self.jobs.iter().map(|j| j.p).sum()
    }

    /// Largest finite processing time across machines.
    pub fn p_max_finite(&self) -> Time {
        match &self.machines {
            Some(mat) => mat
                .iter()
                .flat_map(|row| row.iter().flatten())
                .copied()
                .max()
                .unwrap_or(1),
            None => self.jobs.iter().map(|j| j.p).max().unwrap_or(1),
        }
    }

    /// Single-machine horizon: the smallest power of two strictly
    /// greater than max release + total work.
    pub fn horizon_single(&self) -> Time {
        let bound = self.max_release() + self.total_work();
        let mut t = 1;
        while t <= bound {
            t *= 2;
        }
        t
    }

    /// Multi-machine horizon: max release + n * (largest finite
    /// processing time); every job fits before it on some machine.
    pub fn horizon_multi(&self) -> Time {
        self.max_release() + self.n() as Time * self.p_max_finite()
    }
}

/// Per-job deadline: a finite time or unbounded (`None`), the output
/// of the deadline-setting solvers and the input to EDF.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeadlineAssignment {
    pub d: Vec<Option<Time>>,
}

impl DeadlineAssignment {
    pub fn new(d: Vec<Option<Time>>) -> DeadlineAssignment {
        DeadlineAssignment { d }
    }

    /// Rewrites unbounded deadlines to the horizon `t`.
    pub fn finalize(&self, t: Time) -> Vec<Time> {
        self.d.iter().map(|d| d.unwrap_or(t)).collect()
    }
}

/// One maximal run of a job on a machine over `[a, b)`, with both
/// endpoints stored as integer multiples of `1/den` (the schedule's
/// grid denominator).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub machine: usize,
    /// Start, in grid units.
    pub a: i64,
    /// End, in grid units; a < b.
    pub b: i64,
    pub job: JobId,
}

/// A preemptive schedule: a list of machine-time slots on a common
/// grid of step `1/den`. Single-machine schedules use `den = 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    den: i64,
    slots: Vec<Slot>,
}

impl Schedule {
    /// Builds a schedule, canonicalizing slot order, coalescing
    /// adjacent same-job runs, and reducing the grid denominator.
    pub fn new(den: i64, mut slots: Vec<Slot>) -> Schedule {
        assert!(den >= 1, "grid denominator must be positive");
        slots.sort_by_key(|s| (s.machine, s.a, s.b, s.job));
        let mut merged: Vec<Slot> = Vec::with_capacity(slots.len());
        for s in slots {
            match merged.last_mut() {
                Some(last)
                    if last.machine == s.machine && last.job == s.job && last.b == s.a =>
                {
                    last.b = s.b;
                }
                _ => merged.push(s),
            }
        }
        let mut g = den;
        for s in &merged {
            g = gcd_i64(g, gcd_i64(s.a, s.b));
        }
        let g = if g == 0 { 1 } else { g };
        if g > 1 {
            for s in &mut merged {
                s.a /= g;
                s.b /= g;
            }
        }
        Schedule { den: den / g, slots: merged }
    }

    /// Single-machine schedule on the integer grid.
    pub fn single(segments: Vec<(Time, Time, JobId)>) -> Schedule {
        Schedule::new(
            1,
            segments
                .into_iter()
                .map(|(a, b, job)| Slot { machine: 0, a, b, job })
                .collect(),
        )
    }

    pub fn den(&self) -> i64 {
        self.den
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    /// Exact completion time of each job: the end of its last slot,
    /// or `None` for jobs that never run.
    pub fn completion_times(&self, n: usize) -> Vec<Option<Q>> {
        let mut end = vec![None::<i64>; n];
        for s in &self.slots {
            let e = end[s.job].get_or_insert(s.b);
            *e = (*e).max(s.b);
        }
        end.iter()
            .map(|e| e.map(|v| Q::new(BigInt::from(v), BigInt::from(self.den))))
            .collect()
    }
}

fn gcd_i64(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// A failed schedule invariant, naming the invariant and the machine,
/// job, and time where it was detected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub invariant: String,
    pub machine: Option<usize>,
    pub job: Option<JobId>,
    /// Grid-time rendering of where the violation occurs.
    pub time: Option<String>,
}

impl Violation {
    fn new(invariant: &str) -> Violation {
        Violation { invariant: invariant.into(), machine: None, job: None, time: None }
    }

    fn machine(mut self, m: usize) -> Violation {
        self.machine = Some(m);
        self
    }

    fn job(mut self, j: JobId) -> Violation {
        self.job = Some(j);
        self
    }

    fn at(mut self, num: i64, den: i64) -> Violation {
        self.time = Some(render_grid_time(num, den));
        self
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.invariant)?;
        if let Some(m) = self.machine {
            write!(f, ", machine {m}")?;
        }
        if let Some(j) = self.job {
            write!(f, ", job {j}")?;
        }
        if let Some(t) = &self.time {
            write!(f, ", at time {t}")?;
        }
        Ok(())
    }
}

impl std::error::Error for Violation {}

fn render_grid_time(num: i64, den: i64) -> String {
    if den == 1 {
        num.to_string()
    } else {
        format!("{num}/{den}")
    }
}

/// Checks every schedule invariant against the instance: slot sanity,
/// no overlap per machine, no job on two machines at once, releases
/// respected, machine capability, and full processing per job
/// (exact single-machine lengths; fractional completion >= 1 with a
/// machine matrix).
pub fn validate_schedule(instance: &Instance, schedule: &Schedule) -> Result<(), Violation> {
    let n = instance.n();
    let m = instance.machine_count();
    let den = schedule.den();
    for s in schedule.slots() {
        if s.job >= n {
            return Err(Violation::new("unknown job id").job(s.job));
        }
        if s.machine >= m {
            return Err(Violation::new("unknown machine").machine(s.machine).job(s.job));
        }
        if s.a < 0 || s.a >= s.b {
            return Err(Violation::new("empty or reversed slot")
                .machine(s.machine)
                .job(s.job)
                .at(s.a, den));
        }
        if instance.p_on(s.machine, s.job).is_none() {
            return Err(Violation::new("job not processable on machine")
                .machine(s.machine)
                .job(s.job)
                .at(s.a, den));
        }
        let r_scaled = instance.jobs()[s.job].r * den;
        if s.a < r_scaled {
            return Err(Violation::new("starts before release")
                .machine(s.machine)
                .job(s.job)
                .at(s.a, den));
        }
    }
    // Per-machine overlap: adjacent in (machine, start) order.
    let mut by_machine: Vec<&Slot> = schedule.slots().iter().collect();
    by_machine.sort_by_key(|s| (s.machine, s.a, s.b));
    for w in by_machine.windows(2) {
        if w[0].machine == w[1].machine && w[1].a < w[0].b {
            return Err(Violation::new("machine overlap")
                .machine(w[1].machine)
                .job(w[1].job)
                .at(w[1].a, den));
        }
    }
    // A job must not run on two machines at the same time.
    let mut by_job: Vec<&Slot> = schedule.slots().iter().collect();
    by_job.sort_by_key(|s| (s.job, s.a, s.b));
    for w in by_job.windows(2) {
        if w[0].job == w[1].job && w[1].a < w[0].b {
            return Err(Violation::new("job runs on two machines at once")
                .machine(w[1].machine)
                .job(w[1].job)
                .at(w[1].a, den));
        }
    }
    // Processing amounts.
    if instance.is_multi() {
        // Fractional completion: sum over slots of length / p[i][j] >= 1.
        let mut done = vec![Q::from_integer(BigInt::from(0)); n];
        for s in schedule.slots() {
            let p_ij = instance.p_on(s.machine, s.job).expect("checked above");
            let len = Q::new(BigInt::from(s.b - s.a), BigInt::from(den));
            done[s.job] += len / q_int(p_ij);
        }
        for (j, frac) in done.iter().enumerate() {
            if *frac < q_int(1) {
                return Err(Violation::new("incomplete processing").job(j));
            }
        }
    } else {
        let mut run = vec![0i64; n];
        for s in schedule.slots() {
            run[s.job] += s.b - s.a;
        }
        for (j, job) in instance.jobs().iter().enumerate() {
            let need = job.p * den;
            if run[j] < need {
                return Err(Violation::new("incomplete processing").job(j));
            }
            if run[j] > need {
                return Err(Violation::new("excess processing").job(j));
            }
        }
    }
    Ok(())
}

/// Exact objective `sum_j w_j * (C_j - r_j)^p` of a valid schedule.
/// The `1/p` root for norm reporting is applied by the caller.
pub fn objective(instance: &Instance, schedule: &Schedule, p: PNorm) -> crate::Result<Cost> {
    validate_schedule(instance, schedule)?;
    let completions = schedule.completion_times(instance.n());
    let mut total = Cost::zero();
    for job in instance.jobs() {
        let c = completions[job.id]
            .clone()
            .expect("validated schedules process every job");
        let flow = c - q_int(job.r);
        total.add_power_term(&q_int(job.w), &flow, p);
    }
    Ok(total)
}

/// How a run's objective is reported: the plain weighted sum, or its
/// `1/p`-th root.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    Sum,
    Norm,
}

/// Objective parameters shared by the approximation solvers.
#[derive(Debug, Clone)]
pub struct CostModel {
    pub p: PNorm,
    pub epsilon: Q,
    pub kind: ObjectiveKind,
}

impl CostModel {
    pub fn new(p: PNorm, epsilon: Q) -> CostModel {
        let kind = if p.is_integer() && p.numer() == 1 {
            ObjectiveKind::Sum
        } else {
            ObjectiveKind::Norm
        };
        CostModel { p, epsilon, kind }
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JobRepr {
    p: i64,
    r: i64,
    w: i64,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FiniteOrInf {
    Finite(i64),
    Text(String),
}

impl FiniteOrInf {
    fn to_option(&self, what: &str) -> crate::Result<Option<i64>> {
        match self {
            FiniteOrInf::Finite(v) => Ok(Some(*v)),
            FiniteOrInf::Text(s) if s == "inf" => Ok(None),
            FiniteOrInf::Text(s) => Err(crate::Error::Parse(format!(
                "{what}: expected an integer or \"inf\", got {s:?}"
            ))),
        }
    }

    fn from_option(v: Option<i64>) -> FiniteOrInf {
        match v {
            Some(x) => FiniteOrInf::Finite(x),
            None => FiniteOrInf::Text("inf".into()),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceRepr {
    jobs: Vec<JobRepr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    machines: Option<Vec<Vec<FiniteOrInf>>>,
}

fn parse_err(e: serde_json::Error) -> crate::Error {
    crate::Error::Parse(e.to_string())
}

/// Parses an instance document, rejecting malformed JSON with a
/// position-annotated error and invalid field values with a
/// job-indexed error.
pub fn read_instance(text: &str) -> crate::Result<Instance> {
    let repr: InstanceRepr = serde_json::from_str(text).map_err(parse_err)?;
    let jobs = repr.jobs.iter().map(|j| (j.p, j.r, j.w)).collect();
    let machines = match repr.machines {
        None => None,
        Some(rows) => {
            let mut out = Vec::with_capacity(rows.len());
            for (i, row) in rows.iter().enumerate() {
                let mut r = Vec::with_capacity(row.len());
                for (j, e) in row.iter().enumerate() {
                    r.push(e.to_option(&format!("machines[{i}][{j}]"))?);
                }
                out.push(r);
            }
            Some(out)
        }
    };
    Instance::new(jobs, machines)
}

pub fn write_instance(instance: &Instance) -> String {
    let repr = InstanceRepr {
        jobs: instance
            .jobs()
            .iter()
            .map(|j| JobRepr { p: j.p, r: j.r, w: j.w })
            .collect(),
        machines: instance.machines.as_ref().map(|mat| {
            mat.iter()
                .map(|row| row.iter().map(|e| FiniteOrInf::from_option(*e)).collect())
                .collect()
        }),
    };
    serde_json::to_string_pretty(&repr).expect("instance serialization cannot fail")
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeadlinesRepr {
    d: Vec<FiniteOrInf>,
}

pub fn read_deadlines(text: &str) -> crate::Result<DeadlineAssignment> {
    let repr: DeadlinesRepr = serde_json::from_str(text).map_err(parse_err)?;
    let mut d = Vec::with_capacity(repr.d.len());
    for (j, e) in repr.d.iter().enumerate() {
        d.push(e.to_option(&format!("d[{j}]"))?);
    }
    Ok(DeadlineAssignment::new(d))
}

pub fn write_deadlines(deadlines: &DeadlineAssignment) -> String {
    let repr = DeadlinesRepr {
        d: deadlines.d.iter().map(|e| FiniteOrInf::from_option(*e)).collect(),
    };
    serde_json::to_string_pretty(&repr).expect("deadline serialization cannot fail")
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SlotRepr {
    m: usize,
    /// Start and end as decimal strings of grid multiples.
    a: String,
    b: String,
    j: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleRepr {
    #[serde(skip_serializing_if = "Option::is_none")]
    den: Option<i64>,
    slots: Vec<SlotRepr>,
}

pub fn read_schedule(text: &str) -> crate::Result<Schedule> {
    let repr: ScheduleRepr = serde_json::from_str(text).map_err(parse_err)?;
    let den = repr.den.unwrap_or(1);
    if den < 1 {
        return Err(crate::Error::Parse(format!("den must be >= 1, got {den}")));
    }
    let mut slots = Vec::with_capacity(repr.slots.len());
    for (k, s) in repr.slots.iter().enumerate() {
        let a = s.a.parse::<i64>().map_err(|_| {
            crate::Error::Parse(format!("slots[{k}].a: not a grid multiple: {:?}", s.a))
        })?;
        let b = s.b.parse::<i64>().map_err(|_| {
            crate::Error::Parse(format!("slots[{k}].b: not a grid multiple: {:?}", s.b))
        })?;
        slots.push(Slot { machine: s.m, a, b, job: s.j });
    }
    Ok(Schedule::new(den, slots))
}

pub fn write_schedule(schedule: &Schedule) -> String {
    let repr = ScheduleRepr {
        den: (schedule.den() != 1).then_some(schedule.den()),
        slots: schedule
            .slots()
            .iter()
            .map(|s| SlotRepr {
                m: s.machine,
                a: s.a.to_string(),
                b: s.b.to_string(),
                j: s.job,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&repr).expect("schedule serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::q;

    fn inst(jobs: Vec<(Time, Time, i64)>) -> Instance {
        Instance::new(jobs, None).unwrap()
    }

    #[test]
    fn horizon_is_next_power_of_two() {
        // One unit job: bound 1, next power of two above it is 2.
        assert_eq!(inst(vec![(1, 0, 1)]).horizon_single(), 2);
        // max r + total p = 1 + 5 = 6 -> 8.
        assert_eq!(inst(vec![(2, 0, 1), (3, 1, 2)]).horizon_single(), 8);
    }

    #[test]
    fn rejects_bad_jobs() {
        assert!(Instance::new(vec![], None).is_err());
        assert!(Instance::new(vec![(0, 0, 1)], None).is_err());
        assert!(Instance::new(vec![(1, -1, 1)], None).is_err());
        assert!(Instance::new(vec![(1, 0, 0)], None).is_err());
        assert!(Instance::new(vec![(1, 3, 1), (1, 0, 1)], None).is_err());
    }

    #[test]
    fn rejects_unusable_job_column() {
        let m = Some(vec![vec![None, Some(2)], vec![None, Some(1)]]);
        assert!(Instance::new(vec![(1, 0, 1), (1, 0, 1)], m).is_err());
    }

    #[test]
    fn objective_examples() {
        let i = inst(vec![(1, 0, 1)]);
        let s = Schedule::single(vec![(0, 1, 0)]);
        assert_eq!(objective(&i, &s, PNorm::one()).unwrap().as_q().unwrap(), q_int(1));

        let i = inst(vec![(2, 1, 3)]);
        let s = Schedule::single(vec![(1, 3, 0)]);
        assert_eq!(objective(&i, &s, PNorm::one()).unwrap().as_q().unwrap(), q_int(6));

        let i = inst(vec![(1, 0, 1), (1, 0, 1)]);
        let s = Schedule::single(vec![(0, 1, 0), (1, 2, 1)]);
        let p2 = PNorm::new(2, 1).unwrap();
        assert_eq!(objective(&i, &s, p2).unwrap().as_q().unwrap(), q_int(5));
    }

    #[test]
    fn validation_catches_each_violation() {
        let i = inst(vec![(2, 0, 1)]);
        let s = Schedule::single(vec![(0, 1, 0)]);
        assert_eq!(
            validate_schedule(&i, &s).unwrap_err().invariant,
            "incomplete processing"
        );

        let i = inst(vec![(1, 5, 1)]);
        let s = Schedule::single(vec![(4, 5, 0)]);
        assert_eq!(
            validate_schedule(&i, &s).unwrap_err().invariant,
            "starts before release"
        );

        let i = inst(vec![(2, 0, 1), (2, 0, 1)]);
        let s = Schedule::new(
            1,
            vec![
                Slot { machine: 0, a: 2, b: 4, job: 0 },
                Slot { machine: 0, a: 3, b: 5, job: 1 },
                Slot { machine: 0, a: 0, b: 2, job: 1 },
            ],
        );
        assert_eq!(validate_schedule(&i, &s).unwrap_err().invariant, "machine overlap");
    }

    #[test]
    fn multi_machine_fractional_completion() {
        let m = Some(vec![vec![Some(2)], vec![Some(4)]]);
        let i = Instance::new(vec![(2, 0, 1)], m).unwrap();
        // Half on each machine: 1/2 + 2/4 covers... 1*(1/2) + 2*(1/4) = 1.
        let s = Schedule::new(
            1,
            vec![
                Slot { machine: 0, a: 0, b: 1, job: 0 },
                Slot { machine: 1, a: 1, b: 3, job: 0 },
            ],
        );
        validate_schedule(&i, &s).unwrap();
        // Dropping the second slot leaves the job incomplete.
        let s = Schedule::new(1, vec![Slot { machine: 0, a: 0, b: 1, job: 0 }]);
        assert_eq!(
            validate_schedule(&i, &s).unwrap_err().invariant,
            "incomplete processing"
        );
        // Running both machines at once on the same job is rejected.
        let s = Schedule::new(
            1,
            vec![
                Slot { machine: 0, a: 0, b: 2, job: 0 },
                Slot { machine: 1, a: 1, b: 4, job: 0 },
            ],
        );
        assert_eq!(
            validate_schedule(&i, &s).unwrap_err().invariant,
            "job runs on two machines at once"
        );
    }

    #[test]
    fn instance_round_trip() {
        let text = r#"{"jobs":[{"p":2,"r":0,"w":1},{"p":3,"r":1,"w":2}]}"#;
        let i = read_instance(text).unwrap();
        assert_eq!(i.horizon_single(), 8);
        let again = read_instance(&write_instance(&i)).unwrap();
        assert_eq!(i, again);

        let text = r#"{"jobs":[{"p":1,"r":0,"w":1}],"machines":[[1],["inf"]]}"#;
        let i = read_instance(text).unwrap();
        assert_eq!(i.machine_count(), 2);
        assert_eq!(i.p_on(1, 0), None);
        let again = read_instance(&write_instance(&i)).unwrap();
        assert_eq!(i, again);
    }

    #[test]
    fn instance_parse_rejections() {
        assert!(read_instance("{").is_err());
        assert!(read_instance(r#"{"jobs":[{"p":1.5,"r":0,"w":1}]}"#).is_err());
        assert!(read_instance(r#"{"jobs":[{"p":0,"r":0,"w":1}]}"#).is_err());
        assert!(read_instance(r#"{"jobs":[{"p":1,"r":0,"w":1}],"machines":[["x"]]}"#).is_err());
    }

    #[test]
    fn schedule_round_trip_and_grid_reduction() {
        let s = Schedule::new(
            4,
            vec![
                Slot { machine: 0, a: 0, b: 2, job: 0 },
                Slot { machine: 1, a: 2, b: 6, job: 1 },
            ],
        );
        // All multiples share factor 2 with den 4: stored on den 2.
        assert_eq!(s.den(), 2);
        let again = read_schedule(&write_schedule(&s)).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn adjacent_same_job_slots_coalesce() {
        let s = Schedule::single(vec![(0, 1, 0), (1, 2, 0)]);
        assert_eq!(s.slots().len(), 1);
        assert_eq!((s.slots()[0].a, s.slots()[0].b), (0, 2));
    }

    #[test]
    fn deadline_round_trip() {
        let d = DeadlineAssignment::new(vec![Some(4), None]);
        let again = read_deadlines(&write_deadlines(&d)).unwrap();
        assert_eq!(d, again);
        assert_eq!(d.finalize(8), vec![4, 8]);
    }

    #[test]
    fn completion_times_use_grid() {
        let s = Schedule::new(
            3,
            vec![
                Slot { machine: 0, a: 0, b: 2, job: 0 },
                Slot { machine: 0, a: 2, b: 7, job: 1 },
            ],
        );
        let c = s.completion_times(2);
        assert_eq!(c[0].clone().unwrap(), q(2, 3));
        assert_eq!(c[1].clone().unwrap(), q(7, 3));
    }
}
