//! Earliest-deadline-first scheduling and the matching feasibility
//! test: a deadline assignment admits a preemptive single-machine
//! schedule meeting every deadline if and only if no time window is
//! overloaded, and EDF finds such a schedule whenever one exists.

use crate::instance::{DeadlineAssignment, Instance, JobId, Schedule, Time};
use std::collections::BTreeSet;

/// A missed deadline, reported with the job's deadline and actual
/// completion time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MissedDeadline {
    pub job: JobId,
    pub deadline: Time,
    pub completion: Time,
}

/// Outcome of an EDF run: the full schedule (all jobs are finished
/// regardless of deadline misses), per-job completion times, and the
/// chronologically first miss if any.
#[derive(Debug, Clone)]
pub struct EdfResult {
    pub schedule: Schedule,
    pub completions: Vec<Time>,
    pub met_all_deadlines: bool,
    pub first_violation: Option<MissedDeadline>,
}

fn require_single_machine(instance: &Instance) -> crate::Result<()> {
    if instance.is_multi() {
        return Err(crate::Error::InvalidInstance(
            "this solver handles single-machine instances only".into(),
        ));
    }
    Ok(())
}

fn finalized(instance: &Instance, deadlines: &DeadlineAssignment) -> crate::Result<Vec<Time>> {
    if deadlines.d.len() != instance.n() {
        return Err(crate::Error::InvalidInstance(format!(
            "{} deadlines for {} jobs",
            deadlines.d.len(),
            instance.n()
        )));
    }
    Ok(deadlines.finalize(instance.horizon_single()))
}

/// Runs preemptive EDF: at every decision point the released,
/// unfinished job with the smallest deadline (ties by id) runs, and
/// the machine never idles while released work is pending. Decision
/// points are releases and completions only, which suffices because
/// the priority order changes at no other moment.
pub fn edf_schedule(
    instance: &Instance,
    deadlines: &DeadlineAssignment,
) -> crate::Result<EdfResult> {
    require_single_machine(instance)?;
    let d = finalized(instance, deadlines)?;
    let jobs = instance.jobs();
    let n = jobs.len();
    let mut remaining: Vec<Time> = jobs.iter().map(|j| j.p).collect();
    let mut completions: Vec<Time> = vec![0; n];
    let mut segments: Vec<(Time, Time, JobId)> = Vec::new();
    // Jobs are stored sorted by release; `next_release` walks them.
    let mut next_release = 0usize;
    let mut active: BTreeSet<(Time, JobId)> = BTreeSet::new();
    let mut now: Time = 0;
    loop {
        while next_release < n && jobs[next_release].r <= now {
            active.insert((d[next_release], next_release));
            next_release += 1;
        }
        let Some(&(dj, j)) = active.iter().next() else {
            if next_release == n {
                break;
            }
            now = jobs[next_release].r;
            continue;
        };
        let finish = now + remaining[j];
        let horizon = if next_release < n { jobs[next_release].r.min(finish) } else { finish };
        segments.push((now, horizon, j));
        remaining[j] -= horizon - now;
        now = horizon;
        if remaining[j] == 0 {
            active.remove(&(dj, j));
            completions[j] = now;
        }
    }
    let mut misses: Vec<MissedDeadline> = (0..n)
        .filter(|&j| completions[j] > d[j])
        .map(|j| MissedDeadline { job: j, deadline: d[j], completion: completions[j] })
        .collect();
    misses.sort_by_key(|m| (m.completion, m.job));
    let first_violation = misses.first().copied();
    Ok(EdfResult {
        schedule: Schedule::single(segments),
        completions,
        met_all_deadlines: first_violation.is_none(),
        first_violation,
    })
}

/// True iff the deadlines are achievable by some preemptive schedule:
/// for every window [s, t], the total work that must run inside it
/// (jobs released at or after s with deadline at or before t) fits in
/// t - s.
///
/// Only windows whose endpoints are release times or deadlines need
/// checking: if some [s, t] is overloaded, raise s to the smallest
/// release among its contributing jobs and lower t to their largest
/// deadline (or to s if that is larger). The same jobs still
/// contribute, the window only shrinks, and both endpoints become
/// critical values, so the overload survives the move.
pub fn density_feasible(
    instance: &Instance,
    deadlines: &DeadlineAssignment,
) -> crate::Result<bool> {
    require_single_machine(instance)?;
    let d = finalized(instance, deadlines)?;
    let jobs = instance.jobs();
    let mut points: Vec<Time> = jobs.iter().map(|j| j.r).chain(d.iter().copied()).collect();
    points.sort_unstable();
    points.dedup();
    for (si, &s) in points.iter().enumerate() {
        for &t in &points[si..] {
            let load: Time = jobs
                .iter()
                .filter(|j| s <= j.r && d[j.id] <= t)
                .map(|j| j.p)
                .sum();
            if load > t - s {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
